//! Per-coordinate FTRL-Proximal over expanded PQR vectors.
//!
//! Only the accumulators `z` and `n` are stored; weights are recomputed from
//! them in closed form on the support of each incoming vector.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::expansion::{ExpandedVector, PqrIndexMap};
use crate::io::LabeledInstance;
use crate::metrics::{EvalReport, ReportBuilder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    Regression,
    Classification,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Regression => "regression",
            Task::Classification => "classification",
        }
    }

    /// Training target for a raw label. Classification labels may be given
    /// as `{-1, +1}` or `{0, 1}` and are mapped to `{0, 1}`.
    pub fn target(self, label: f64) -> Result<f64> {
        match self {
            Task::Regression => Ok(label),
            Task::Classification => {
                if label == 1.0 {
                    Ok(1.0)
                } else if label == 0.0 || label == -1.0 {
                    Ok(0.0)
                } else {
                    Err(Error::TaskMismatch(format!(
                        "label {label} is not a binary class label (expected -1/+1 or 0/1)"
                    )))
                }
            }
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regression" => Ok(Task::Regression),
            "classification" => Ok(Task::Classification),
            other => Err(Error::InvalidArgument(format!("unknown task `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FtrlParams {
    pub alpha: f64,
    pub beta: f64,
    pub l1: f64,
    pub l2: f64,
    pub task: Task,
    /// When false the bias coordinate is trained without L1/L2.
    pub regularize_bias: bool,
}

impl Default for FtrlParams {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            beta: 1.0,
            l1: 1.0,
            l2: 1.0,
            task: Task::Regression,
            regularize_bias: true,
        }
    }
}

impl FtrlParams {
    pub fn new(alpha: f64, beta: f64, l1: f64, l2: f64, task: Task) -> Result<Self> {
        let params = Self {
            alpha,
            beta,
            l1,
            l2,
            task,
            regularize_bias: true,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} must be > 0, got {v}")))
            }
        };
        let nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} must be >= 0, got {v}")))
            }
        };
        positive("alpha", self.alpha)?;
        positive("beta", self.beta)?;
        nonneg("l1", self.l1)?;
        nonneg("l2", self.l2)
    }

    pub fn with_unregularized_bias(mut self) -> Self {
        self.regularize_bias = false;
        self
    }
}

/// Closed-form FTRL-Proximal weight for one coordinate.
pub fn ftrl_weight(z: f64, n: f64, params: &FtrlParams) -> f64 {
    weight(z, n, params.alpha, params.beta, params.l1, params.l2)
}

#[inline]
fn weight(z: f64, n: f64, alpha: f64, beta: f64, l1: f64, l2: f64) -> f64 {
    if z.abs() < l1 || z == 0.0 {
        return 0.0;
    }
    -(z - z.signum() * l1) / ((beta + n.sqrt()) / alpha + l2)
}

#[inline]
pub fn sigmoid(margin: f64) -> f64 {
    if margin >= 0.0 {
        1.0 / (1.0 + (-margin).exp())
    } else {
        let e = margin.exp();
        e / (1.0 + e)
    }
}

/// Per-round loss. Regression takes the prediction `ŷ` and returns
/// `½(ŷ - y)²`. Classification takes the raw margin and a label whose sign
/// gives the class (`{-1, +1}` or `{0, 1}`) and returns `log(1 + e^{-y m})`.
pub fn loss(input: f64, label: f64, task: Task) -> f64 {
    match task {
        Task::Regression => 0.5 * (input - label) * (input - label),
        Task::Classification => {
            let y = if label > 0.0 { 1.0 } else { -1.0 };
            let t = -y * input;
            if t > 0.0 {
                t + (-t).exp().ln_1p()
            } else {
                t.exp().ln_1p()
            }
        }
    }
}

/// Dense keeps two arrays of length `D`; above this threshold a hash table
/// addressed by slot is used instead.
pub const DENSE_STORAGE_LIMIT: usize = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StorageKind {
    Auto,
    Dense,
    Sparse,
}

#[derive(Debug, Clone, PartialEq)]
enum Storage {
    Dense { z: Vec<f64>, n: Vec<f64> },
    Sparse(HashMap<usize, (f64, f64)>),
}

impl Storage {
    #[inline]
    fn get(&self, slot: usize) -> (f64, f64) {
        match self {
            Storage::Dense { z, n } => (z[slot], n[slot]),
            Storage::Sparse(map) => map.get(&slot).copied().unwrap_or((0.0, 0.0)),
        }
    }

    #[inline]
    fn set(&mut self, slot: usize, zi: f64, ni: f64) {
        match self {
            Storage::Dense { z, n } => {
                z[slot] = zi;
                n[slot] = ni;
            }
            Storage::Sparse(map) => {
                map.insert(slot, (zi, ni));
            }
        }
    }
}

/// Learner state: accumulators over the expanded space plus hyperparameters.
#[derive(Debug, Clone)]
pub struct FtrlState {
    params: FtrlParams,
    dim: usize,
    storage: Storage,
    scratch: Vec<f64>,
}

impl PartialEq for FtrlState {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params && self.dim == other.dim && self.storage == other.storage
    }
}

impl FtrlState {
    pub fn new(params: FtrlParams, dim: usize) -> Self {
        Self::with_storage(params, dim, StorageKind::Auto)
    }

    pub fn with_storage(params: FtrlParams, dim: usize, kind: StorageKind) -> Self {
        let dense = match kind {
            StorageKind::Auto => dim <= DENSE_STORAGE_LIMIT,
            StorageKind::Dense => true,
            StorageKind::Sparse => false,
        };
        let storage = if dense {
            Storage::Dense {
                z: vec![0.0; dim],
                n: vec![0.0; dim],
            }
        } else {
            Storage::Sparse(HashMap::new())
        };
        Self {
            params,
            dim,
            storage,
            scratch: Vec::new(),
        }
    }

    pub fn params(&self) -> &FtrlParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.storage, Storage::Dense { .. })
    }

    /// `(z, n)` for a slot.
    pub fn accumulators(&self, slot: usize) -> (f64, f64) {
        self.storage.get(slot)
    }

    /// Installs accumulators directly, as when loading a saved model.
    pub fn set_accumulators(&mut self, slot: usize, z: f64, n: f64) -> Result<()> {
        if slot >= self.dim {
            return Err(Error::Dimension(format!("slot {slot} >= {}", self.dim)));
        }
        if !z.is_finite() || !n.is_finite() || n < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "invalid accumulators z={z} n={n} at slot {slot}"
            )));
        }
        self.storage.set(slot, z, n);
        Ok(())
    }

    /// Current weight of a slot.
    #[inline]
    pub fn weight(&self, slot: usize) -> f64 {
        let (z, n) = self.storage.get(slot);
        let p = &self.params;
        if !p.regularize_bias && slot + 1 == self.dim {
            weight(z, n, p.alpha, p.beta, 0.0, 0.0)
        } else {
            weight(z, n, p.alpha, p.beta, p.l1, p.l2)
        }
    }

    /// All weights as a dense vector.
    pub fn weights(&self) -> Vec<f64> {
        (0..self.dim).map(|s| self.weight(s)).collect()
    }

    /// Count of coordinates whose weight is currently nonzero.
    pub fn nonzero_weights(&self) -> usize {
        self.touched().filter(|&(s, _, _)| self.weight(s) != 0.0).count()
    }

    /// Slots with nonzero accumulators, ascending.
    pub fn touched(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        let mut slots: Vec<(usize, f64, f64)> = match &self.storage {
            Storage::Dense { z, n } => z
                .iter()
                .zip(n)
                .enumerate()
                .filter(|(_, (&zi, &ni))| zi != 0.0 || ni != 0.0)
                .map(|(s, (&zi, &ni))| (s, zi, ni))
                .collect(),
            Storage::Sparse(map) => map
                .iter()
                .filter(|(_, &(zi, ni))| zi != 0.0 || ni != 0.0)
                .map(|(&s, &(zi, ni))| (s, zi, ni))
                .collect(),
        };
        slots.sort_unstable_by_key(|&(s, _, _)| s);
        slots.into_iter()
    }

    fn check_support(&self, x: &ExpandedVector) -> Result<()> {
        match x.entries().last() {
            Some(&(s, _)) if s >= self.dim => Err(Error::Dimension(format!(
                "expanded slot {s} outside [0, {})",
                self.dim
            ))),
            _ => Ok(()),
        }
    }

    /// `w · x̃`.
    pub fn margin(&self, x: &ExpandedVector) -> f64 {
        x.iter().map(|(s, v)| self.weight(s) * v).sum()
    }

    /// `w · x̃` for regression, `sigmoid(w · x̃)` for classification.
    pub fn predict(&self, x: &ExpandedVector) -> f64 {
        self.link(self.margin(x))
    }

    fn link(&self, margin: f64) -> f64 {
        match self.params.task {
            Task::Regression => margin,
            Task::Classification => sigmoid(margin),
        }
    }

    /// Per-coordinate gradient `(p - y) x̃_i` at the current weights, where
    /// `target` is already in training form (see [`Task::target`]).
    pub fn gradient(&self, x: &ExpandedVector, target: f64) -> Vec<(usize, f64)> {
        let residual = self.predict(x) - target;
        x.iter().map(|(s, v)| (s, residual * v)).collect()
    }

    /// One FTRL-Proximal round on `x̃`. Returns the pre-update margin.
    /// Coordinates outside the support of `x̃` are not touched. A non-finite
    /// gradient aborts the round before any state changes.
    pub fn update(&mut self, x: &ExpandedVector, target: f64) -> Result<f64> {
        self.check_support(x)?;
        let mut w = std::mem::take(&mut self.scratch);
        w.clear();
        w.extend(x.iter().map(|(s, _)| self.weight(s)));
        let margin: f64 = w.iter().zip(x.iter()).map(|(wi, (_, v))| wi * v).sum();
        let p = self.link(margin);
        let residual = p - target;

        if let Some((slot, v)) = x.iter().find(|&(_, v)| !(residual * v).is_finite()) {
            self.scratch = w;
            return Err(Error::Numeric {
                slot,
                detail: format!("non-finite gradient: prediction {p}, target {target}, feature value {v}"),
            });
        }

        let alpha = self.params.alpha;
        for ((slot, v), &wi) in x.iter().zip(&w) {
            let g = residual * v;
            let (z, n) = self.storage.get(slot);
            let sigma = ((n + g * g).sqrt() - n.sqrt()) / alpha;
            self.storage.set(slot, z + g - sigma * wi, n + g * g);
        }
        self.scratch = w;
        Ok(margin)
    }
}

/// Options shared by [`train_stream`] and [`evaluate`].
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Rounds at which to emit a report row. Empty means one row at the end.
    pub checkpoints: Vec<u64>,
    /// Clamp reported regression predictions to this range (losses use the
    /// unclamped decision).
    pub clip: Option<(f64, f64)>,
    /// Keep every per-round loss in the report.
    pub record_losses: bool,
}

/// Online pass: for each instance in arrival order expand, predict, record
/// the progressive metric, then update.
pub fn train_stream<I>(
    state: &mut FtrlState,
    instances: I,
    map: &PqrIndexMap,
    options: &RunOptions,
) -> Result<EvalReport>
where
    I: IntoIterator<Item = Result<LabeledInstance>>,
{
    run(state, instances, map, options, true)
}

/// Progressive-style report for a frozen model; the state is not modified.
pub fn evaluate<I>(
    state: &FtrlState,
    instances: I,
    map: &PqrIndexMap,
    options: &RunOptions,
) -> Result<EvalReport>
where
    I: IntoIterator<Item = Result<LabeledInstance>>,
{
    let mut frozen = state.clone();
    run(&mut frozen, instances, map, options, false)
}

fn run<I>(
    state: &mut FtrlState,
    instances: I,
    map: &PqrIndexMap,
    options: &RunOptions,
    learn: bool,
) -> Result<EvalReport>
where
    I: IntoIterator<Item = Result<LabeledInstance>>,
{
    if state.dim() != map.expanded_dim() {
        return Err(Error::Dimension(format!(
            "state has {} coordinates, index map expands to {}",
            state.dim(),
            map.expanded_dim()
        )));
    }
    let task = state.params().task;
    let mut report = ReportBuilder::new(task, &options.checkpoints, options.record_losses);
    let mut x = ExpandedVector::new();
    let mut scratch = Vec::new();
    for (round, instance) in (1u64..).zip(instances) {
        let instance = instance.map_err(|e| e.at_round(round))?;
        map.expand_into(&instance.features, &mut x, &mut scratch)
            .map_err(|e| e.at_round(round))?;
        let target = task.target(instance.label).map_err(|e| e.at_round(round))?;
        let margin = if learn {
            state.update(&x, target).map_err(|e| e.at_round(round))?
        } else {
            state.margin(&x)
        };
        let round_loss = loss(margin, target, task);
        let mut reported = state.link(margin);
        if let (Task::Regression, Some((lo, hi))) = (task, options.clip) {
            reported = reported.clamp(lo, hi);
        }
        report.record(reported, target, round_loss);
    }
    Ok(report.finish())
}
