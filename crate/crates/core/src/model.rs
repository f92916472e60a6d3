//! A trained PQR model: frozen separation plus FTRL accumulators, and its
//! versioned text format.
//!
//! ```text
//! pqr-model v1 d=<d> k=<k> task=<task> alpha=<α> beta=<β> l1=<λ1> l2=<λ2>
//! pqr-sep v1 d=<d> k=<k>
//! <k high-frequency indices, one per line>
//! <slot> <z> <n>            one line per coordinate with nonzero accumulators
//! ```
//!
//! Reals are written in the shortest decimal form that parses back to the
//! same bits. A trailing ` bias=unregularized` header token marks models whose
//! bias coordinate is exempt from L1/L2.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::expansion::PqrIndexMap;
use crate::ftrl::{self, FtrlParams, FtrlState, RunOptions, Task};
use crate::io::{write_atomic, LabeledInstance};
use crate::metrics::EvalReport;
use crate::separation::FeatureSeparation;

#[derive(Debug, Clone, PartialEq)]
pub struct PqrModel {
    map: PqrIndexMap,
    state: FtrlState,
}

impl PqrModel {
    /// Fresh model with zero accumulators.
    pub fn new(separation: FeatureSeparation, params: FtrlParams) -> Self {
        let map = PqrIndexMap::new(separation);
        let state = FtrlState::new(params, map.expanded_dim());
        Self { map, state }
    }

    pub fn from_parts(map: PqrIndexMap, state: FtrlState) -> Result<Self> {
        if map.expanded_dim() != state.dim() {
            return Err(Error::Dimension(format!(
                "state has {} coordinates, index map expands to {}",
                state.dim(),
                map.expanded_dim()
            )));
        }
        Ok(Self { map, state })
    }

    pub fn map(&self) -> &PqrIndexMap {
        &self.map
    }

    pub fn state(&self) -> &FtrlState {
        &self.state
    }

    pub fn params(&self) -> &FtrlParams {
        self.state.params()
    }

    pub fn task(&self) -> Task {
        self.state.params().task
    }

    /// Original feature dimension.
    pub fn dim(&self) -> usize {
        self.map.dim()
    }

    /// `ŷ` for regression, a probability for classification.
    pub fn predict(&self, features: &[(u32, f64)]) -> Result<f64> {
        Ok(self.state.predict(&self.map.expand(features)?))
    }

    pub fn train<I>(&mut self, instances: I, options: &RunOptions) -> Result<EvalReport>
    where
        I: IntoIterator<Item = Result<LabeledInstance>>,
    {
        ftrl::train_stream(&mut self.state, instances, &self.map, options)
    }

    pub fn evaluate<I>(&self, instances: I, options: &RunOptions) -> Result<EvalReport>
    where
        I: IntoIterator<Item = Result<LabeledInstance>>,
    {
        ftrl::evaluate(&self.state, instances, &self.map, options)
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> io::Result<()> {
        let p = self.state.params();
        write!(
            out,
            "pqr-model v1 d={} k={} task={} alpha={:?} beta={:?} l1={:?} l2={:?}",
            self.map.dim(),
            self.map.k(),
            p.task,
            p.alpha,
            p.beta,
            p.l1,
            p.l2
        )?;
        if !p.regularize_bias {
            write!(out, " bias=unregularized")?;
        }
        writeln!(out)?;
        self.map.separation().write_to(&mut out)?;
        for (slot, z, n) in self.state.touched() {
            writeln!(out, "{slot} {z:?} {n:?}")?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(mut reader: R) -> Result<Self> {
        let mut line = String::new();
        reader.read_line(&mut line)?;
        let header = parse_header(line.trim_end())?;
        let separation = FeatureSeparation::read_from(&mut reader)?;
        if separation.dim() as usize != header.d || separation.k() != header.k {
            return Err(Error::Format(format!(
                "separation block (d={}, k={}) disagrees with model header (d={}, k={})",
                separation.dim(),
                separation.k(),
                header.d,
                header.k
            )));
        }
        let mut model = Self::new(separation, header.params);
        let mut previous: Option<usize> = None;
        for (n, record) in reader.lines().enumerate() {
            let record = record?;
            let bad = || Error::Format(format!("bad coordinate record `{record}`"));
            let mut parts = record.split(' ');
            let slot: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let z: f64 = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let acc: f64 = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            if parts.next().is_some() || previous.is_some_and(|p| p >= slot) {
                return Err(Error::Format(format!(
                    "coordinate record {} out of order or malformed",
                    n + 1
                )));
            }
            previous = Some(slot);
            model
                .state
                .set_accumulators(slot, z, acc)
                .map_err(|e| Error::Format(e.to_string()))?;
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path, |w| self.write_to(w))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(file))
    }
}

struct Header {
    d: usize,
    k: usize,
    params: FtrlParams,
}

fn parse_header(line: &str) -> Result<Header> {
    let bad = |why: &str| Error::Format(format!("bad model header `{line}`: {why}"));
    let mut parts = line.split(' ');
    if parts.next() != Some("pqr-model") || parts.next() != Some("v1") {
        return Err(bad("expected `pqr-model v1`"));
    }
    let mut field = |key: &str| -> Result<String> {
        let part = parts.next().ok_or_else(|| bad(&format!("missing {key}")))?;
        part.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix('='))
            .map(str::to_owned)
            .ok_or_else(|| bad(&format!("expected {key}=")))
    };
    let num = |s: String, key: &str| -> Result<f64> { s.parse().map_err(|_| bad(&format!("bad {key}"))) };
    let d = field("d")?.parse().map_err(|_| bad("bad d"))?;
    let k = field("k")?.parse().map_err(|_| bad("bad k"))?;
    let task: Task = field("task")?.parse().map_err(|_| bad("bad task"))?;
    let alpha = num(field("alpha")?, "alpha")?;
    let beta = num(field("beta")?, "beta")?;
    let l1 = num(field("l1")?, "l1")?;
    let l2 = num(field("l2")?, "l2")?;
    let mut params = FtrlParams::new(alpha, beta, l1, l2, task).map_err(|e| bad(&e.to_string()))?;
    match parts.next() {
        None => {}
        Some("bias=unregularized") => params = params.with_unregularized_bias(),
        Some(other) => return Err(bad(&format!("unexpected token `{other}`"))),
    }
    if parts.next().is_some() {
        return Err(bad("trailing tokens"));
    }
    Ok(Header { d, k, params })
}
