//! Empirical regret against the best fixed decision in hindsight.
//!
//! The comparator is found numerically: the expanded model is linear in its
//! weights and both losses are convex, so full-batch accelerated gradient
//! descent from zero reaches the global optimum.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::expansion::{ExpandedVector, PqrIndexMap};
use crate::ftrl::{loss, sigmoid, train_stream, FtrlParams, FtrlState, RunOptions, Task};
use crate::io::LabeledInstance;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    /// Stop once the Euclidean norm of the mean-loss gradient drops below this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 100_000,
        }
    }
}

/// Hindsight-optimal fixed weights and their cumulative loss.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleFit {
    /// Dense over the expanded dimension.
    pub weights: Vec<f64>,
    pub total_loss: f64,
    pub iterations: usize,
    pub grad_norm: f64,
}

/// Squared-loss Gram form is used when at most this many slots are active.
const GRAM_LIMIT: usize = 4096;

struct Problem {
    /// Active slots; column `c` of the compact problem is `slots[c]`.
    slots: Vec<usize>,
    rows: Vec<Vec<(usize, f64)>>,
    targets: Vec<f64>,
    task: Task,
    gram: Option<Gram>,
}

struct Gram {
    g: Vec<f64>,
    b: Vec<f64>,
    c: f64,
}

impl Problem {
    fn new(expanded: &[ExpandedVector], targets: Vec<f64>, task: Task) -> Self {
        let mut slots: Vec<usize> = expanded.iter().flat_map(|x| x.iter().map(|(s, _)| s)).collect();
        slots.sort_unstable();
        slots.dedup();
        let rows: Vec<Vec<(usize, f64)>> = expanded
            .iter()
            .map(|x| {
                x.iter()
                    .map(|(s, v)| (slots.binary_search(&s).expect("collected"), v))
                    .collect()
            })
            .collect();
        let mut problem = Self {
            slots,
            rows,
            targets,
            task,
            gram: None,
        };
        if task == Task::Regression && problem.slots.len() <= GRAM_LIMIT {
            problem.gram = Some(problem.build_gram());
        }
        problem
    }

    fn n(&self) -> f64 {
        self.rows.len() as f64
    }

    fn dim(&self) -> usize {
        self.slots.len()
    }

    fn build_gram(&self) -> Gram {
        let m = self.dim();
        let mut g = vec![0.0; m * m];
        let mut b = vec![0.0; m];
        let mut c = 0.0;
        for (row, &y) in self.rows.iter().zip(&self.targets) {
            for &(i, vi) in row {
                b[i] += vi * y;
                for &(j, vj) in row {
                    g[i * m + j] += vi * vj;
                }
            }
            c += y * y;
        }
        let n = self.n();
        g.iter_mut().for_each(|v| *v /= n);
        b.iter_mut().for_each(|v| *v /= n);
        Gram { g, b, c: c / n }
    }

    fn margin(row: &[(usize, f64)], w: &[f64]) -> f64 {
        row.iter().map(|&(i, v)| w[i] * v).sum()
    }

    /// Mean loss and its gradient.
    fn value_and_grad(&self, w: &[f64], grad: &mut [f64]) -> f64 {
        let m = self.dim();
        if let Some(gram) = &self.gram {
            let mut quad = 0.0;
            let mut lin = 0.0;
            for i in 0..m {
                let gw: f64 = gram.g[i * m..(i + 1) * m].iter().zip(w).map(|(g, w)| g * w).sum();
                grad[i] = gw - gram.b[i];
                quad += w[i] * gw;
                lin += w[i] * gram.b[i];
            }
            return 0.5 * quad - lin + 0.5 * gram.c;
        }
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut total = 0.0;
        for (row, &y) in self.rows.iter().zip(&self.targets) {
            let margin = Self::margin(row, w);
            let residual = match self.task {
                Task::Regression => margin - y,
                Task::Classification => sigmoid(margin) - y,
            };
            total += loss(margin, y, self.task);
            for &(i, v) in row {
                grad[i] += residual * v;
            }
        }
        let n = self.n();
        grad.iter_mut().for_each(|g| *g /= n);
        total / n
    }

    /// Exact cumulative loss, summed per row.
    fn total_loss(&self, w: &[f64]) -> f64 {
        self.rows
            .iter()
            .zip(&self.targets)
            .map(|(row, &y)| loss(Self::margin(row, w), y, self.task))
            .sum()
    }

    fn hessian_bound_vec(&self, v: &[f64], out: &mut [f64]) {
        let m = self.dim();
        if let Some(gram) = &self.gram {
            for (o, row) in out.iter_mut().zip(gram.g.chunks_exact(m)) {
                *o = row.iter().zip(v).map(|(g, v)| g * v).sum();
            }
            return;
        }
        out.iter_mut().for_each(|o| *o = 0.0);
        let scale = match self.task {
            Task::Regression => 1.0,
            Task::Classification => 0.25,
        };
        for row in &self.rows {
            let xv = Self::margin(row, v);
            for &(i, xi) in row {
                out[i] += scale * xv * xi;
            }
        }
        let n = self.n();
        out.iter_mut().for_each(|o| *o /= n);
    }

    /// Power-iteration estimate of the largest curvature.
    fn lipschitz(&self) -> f64 {
        let m = self.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut v: Vec<f64> = (0..m).map(|_| rng.random_range(0.5..1.5)).collect();
        let start = norm(&v);
        v.iter_mut().for_each(|x| *x /= start);
        let mut hv = vec![0.0; m];
        let mut lambda = 0.0;
        for _ in 0..100 {
            self.hessian_bound_vec(&v, &mut hv);
            let norm = hv.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                break;
            }
            lambda = norm;
            v.iter_mut().zip(&hv).for_each(|(v, h)| *v = h / norm);
        }
        (lambda * 1.05).max(1e-12)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn batch_oracle(instances: &[LabeledInstance], map: &PqrIndexMap, task: Task) -> Result<OracleFit> {
    batch_oracle_with(instances, map, task, &OracleConfig::default())
}

/// Full-batch minimization of the cumulative loss over the expanded linear model.
pub fn batch_oracle_with(
    instances: &[LabeledInstance],
    map: &PqrIndexMap,
    task: Task,
    config: &OracleConfig,
) -> Result<OracleFit> {
    let mut expanded = Vec::with_capacity(instances.len());
    let mut targets = Vec::with_capacity(instances.len());
    for inst in instances {
        expanded.push(map.expand(&inst.features)?);
        targets.push(task.target(inst.label)?);
    }
    let dim = map.expanded_dim();
    if instances.is_empty() {
        return Ok(OracleFit {
            weights: vec![0.0; dim],
            total_loss: 0.0,
            iterations: 0,
            grad_norm: 0.0,
        });
    }
    let problem = Problem::new(&expanded, targets, task);
    let m = problem.dim();

    // Accelerated gradient with gradient restarts and step backtracking.
    let mut lip = problem.lipschitz();
    let mut x = vec![0.0; m];
    let mut grad_x = vec![0.0; m];
    problem.value_and_grad(&x, &mut grad_x);
    let mut y = x.clone();
    let mut grad_y = vec![0.0; m];
    let mut next = vec![0.0; m];
    let mut grad_next = vec![0.0; m];
    let mut t = 1.0f64;
    let mut iterations = 0;
    let mut grad_norm = norm(&grad_x);

    while grad_norm >= config.tolerance {
        if iterations >= config.max_iterations {
            return Err(Error::NonConvergence {
                iterations,
                grad_norm,
            });
        }
        iterations += 1;
        let f_y = problem.value_and_grad(&y, &mut grad_y);
        let gy2: f64 = grad_y.iter().map(|g| g * g).sum();
        loop {
            for i in 0..m {
                next[i] = y[i] - grad_y[i] / lip;
            }
            let f = problem.value_and_grad(&next, &mut grad_next);
            // sufficient decrease for an L-smooth function, with slack for rounding
            if f <= f_y - 0.5 * gy2 / lip + 1e-12 * f_y.abs().max(1.0) || lip > 1e30 {
                break;
            }
            lip *= 2.0;
        }
        // gradient restart: drop momentum once it points uphill
        let uphill: f64 = (0..m).map(|i| grad_y[i] * (next[i] - x[i])).sum();
        if uphill > 0.0 {
            t = 1.0;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let momentum = if uphill > 0.0 { 0.0 } else { (t - 1.0) / t_next };
        for i in 0..m {
            y[i] = next[i] + momentum * (next[i] - x[i]);
        }
        std::mem::swap(&mut x, &mut next);
        std::mem::swap(&mut grad_x, &mut grad_next);
        t = t_next;
        grad_norm = norm(&grad_x);
    }

    let total_loss = problem.total_loss(&x);
    let mut weights = vec![0.0; dim];
    for (c, &slot) in problem.slots.iter().enumerate() {
        weights[slot] = x[c];
    }
    Ok(OracleFit {
        weights,
        total_loss,
        iterations,
        grad_norm,
    })
}

/// Per-round losses of a fixed weight vector replayed over `instances`.
pub fn fixed_decision_losses(
    weights: &[f64],
    instances: &[LabeledInstance],
    map: &PqrIndexMap,
    task: Task,
) -> Result<Vec<f64>> {
    if weights.len() != map.expanded_dim() {
        return Err(Error::Dimension(format!(
            "{} weights for expanded dimension {}",
            weights.len(),
            map.expanded_dim()
        )));
    }
    instances
        .iter()
        .map(|inst| {
            let x = map.expand(&inst.features)?;
            Ok(loss(x.dot(weights), task.target(inst.label)?, task))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretPoint {
    pub t: usize,
    pub learner_loss: f64,
    pub oracle_loss: f64,
    pub regret: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegretSeries {
    pub points: Vec<RegretPoint>,
}

impl RegretSeries {
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,learner_loss,oracle_loss,regret")?;
        for p in &self.points {
            writeln!(
                out,
                "{},{:?},{:?},{:?}",
                p.t, p.learner_loss, p.oracle_loss, p.regret
            )?;
        }
        Ok(())
    }

    pub fn summary(&self) -> String {
        match self.points.last() {
            Some(p) => format!(
                "checkpoints={} t={} regret={:?} regret_per_round={:?}",
                self.points.len(),
                p.t,
                p.regret,
                p.regret / p.t as f64
            ),
            None => "checkpoints=0".to_string(),
        }
    }

    pub fn at(&self, t: usize) -> Option<&RegretPoint> {
        self.points.iter().find(|p| p.t == t)
    }
}

/// `regret(T_j) = Σ_{t ≤ T_j} f_t(θ_t) - L*(T_j)`.
pub fn regret_series(
    round_losses: &[f64],
    checkpoints: &[usize],
    oracle_losses: &[f64],
) -> Result<RegretSeries> {
    if checkpoints.len() != oracle_losses.len() {
        return Err(Error::InvalidArgument(format!(
            "{} checkpoints but {} oracle losses",
            checkpoints.len(),
            oracle_losses.len()
        )));
    }
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "checkpoints must be strictly increasing".into(),
        ));
    }
    if let Some(&last) = checkpoints.last() {
        if last > round_losses.len() {
            return Err(Error::InvalidArgument(format!(
                "checkpoint {last} beyond {} recorded rounds",
                round_losses.len()
            )));
        }
    }
    let mut points = Vec::with_capacity(checkpoints.len());
    let mut cumulative = 0.0;
    let mut done = 0;
    for (&t, &oracle_loss) in checkpoints.iter().zip(oracle_losses) {
        cumulative += round_losses[done..t].iter().sum::<f64>();
        done = t;
        points.push(RegretPoint {
            t,
            learner_loss: cumulative,
            oracle_loss,
            regret: cumulative - oracle_loss,
        });
    }
    Ok(RegretSeries { points })
}

/// Trains a fresh FTRL learner over `instances` and measures its regret
/// at each checkpoint against the batch optimum of that prefix.
pub fn empirical_regret(
    instances: &[LabeledInstance],
    map: &PqrIndexMap,
    params: FtrlParams,
    checkpoints: &[usize],
) -> Result<RegretSeries> {
    let mut state = FtrlState::new(params, map.expanded_dim());
    let options = RunOptions {
        record_losses: true,
        ..Default::default()
    };
    let report = train_stream(&mut state, instances.iter().cloned().map(Ok), map, &options)?;
    let losses = report.round_losses.unwrap_or_default();
    let oracle = checkpoints
        .iter()
        .map(|&t| {
            if t > instances.len() {
                return Err(Error::InvalidArgument(format!(
                    "checkpoint {t} beyond {} instances",
                    instances.len()
                )));
            }
            Ok(batch_oracle(&instances[..t], map, params.task)?.total_loss)
        })
        .collect::<Result<Vec<_>>>()?;
    regret_series(&losses, checkpoints, &oracle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::separation::FeatureSeparation;

    fn inst(label: f64, f: &[(u32, f64)]) -> LabeledInstance {
        LabeledInstance::new(label, f.to_vec()).unwrap()
    }

    fn random_regression(n: usize, seed: u64) -> (Vec<LabeledInstance>, PqrIndexMap) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let map = PqrIndexMap::new(FeatureSeparation::new(8, vec![1, 2, 3]).unwrap());
        let data = (0..n)
            .map(|_| {
                let feats: Vec<(u32, f64)> = (1..=8u32)
                    .filter_map(|i| {
                        if rng.random_bool(0.4) {
                            Some((i, rng.random_range(-1.0..1.0)))
                        } else {
                            None
                        }
                    })
                    .collect();
                inst(rng.random_range(-2.0..2.0), &feats)
            })
            .collect();
        (data, map)
    }

    #[test]
    fn identical_instances_are_fit_exactly() {
        let map = PqrIndexMap::new(FeatureSeparation::new(3, vec![1]).unwrap());
        let data = vec![inst(2.5, &[(1, 1.0), (3, 2.0)]); 20];
        let fit = batch_oracle(&data, &map, Task::Regression).unwrap();
        assert!(fit.total_loss < 1e-12, "{}", fit.total_loss);
        let x = map.expand(&data[0].features).unwrap();
        assert!((x.dot(&fit.weights) - 2.5).abs() < 1e-7);
    }

    #[test]
    fn bias_learns_constant_label() {
        let map = PqrIndexMap::new(FeatureSeparation::linear(4));
        let data = vec![inst(-1.5, &[]); 12];
        let fit = batch_oracle(&data, &map, Task::Regression).unwrap();
        assert!((fit.weights[map.bias_slot()] + 1.5).abs() < 1e-8);
        assert!(fit.total_loss < 1e-14);
    }

    #[test]
    fn optimum_beats_random_candidates() {
        let (data, map) = random_regression(200, 5);
        let fit = batch_oracle(&data, &map, Task::Regression).unwrap();
        assert!(fit.grad_norm < 1e-8);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..50 {
            let candidate: Vec<f64> = fit
                .weights
                .iter()
                .map(|w| w + rng.random_range(-0.5..0.5))
                .collect();
            let l: f64 = fixed_decision_losses(&candidate, &data, &map, Task::Regression)
                .unwrap()
                .iter()
                .sum();
            assert!(fit.total_loss <= l);
        }
    }

    #[test]
    fn gram_and_row_paths_agree() {
        // A classification fit exercises the row path; regression uses the Gram form.
        let (data, map) = random_regression(150, 8);
        let fit = batch_oracle(&data, &map, Task::Regression).unwrap();
        let replay: f64 = fixed_decision_losses(&fit.weights, &data, &map, Task::Regression)
            .unwrap()
            .iter()
            .sum();
        assert!((replay - fit.total_loss).abs() < 1e-12 * replay.max(1.0));

        let labels: Vec<LabeledInstance> = data
            .iter()
            .enumerate()
            .map(|(i, d)| LabeledInstance {
                label: if i % 3 == 0 { 1.0 } else { -1.0 },
                ..d.clone()
            })
            .collect();
        let fit = batch_oracle(&labels, &map, Task::Classification).unwrap();
        assert!(fit.grad_norm < 1e-8);
    }

    #[test]
    fn reproducible() {
        let (data, map) = random_regression(100, 1);
        let a = batch_oracle(&data, &map, Task::Regression).unwrap();
        let b = batch_oracle(&data, &map, Task::Regression).unwrap();
        assert!((a.total_loss - b.total_loss).abs() <= 1e-6);
    }

    #[test]
    fn separable_classification_does_not_converge() {
        let map = PqrIndexMap::new(FeatureSeparation::linear(1));
        let data = vec![inst(1.0, &[(1, 1.0)]), inst(-1.0, &[(1, -1.0)])];
        let config = OracleConfig {
            max_iterations: 500,
            ..Default::default()
        };
        assert!(matches!(
            batch_oracle_with(&data, &map, Task::Classification, &config),
            Err(Error::NonConvergence { .. })
        ));
    }

    #[test]
    fn oracle_replay_has_zero_regret() {
        // Realizable data: the fixed optimum is optimal on every prefix too.
        let map = PqrIndexMap::new(FeatureSeparation::new(4, vec![1, 2]).unwrap());
        let truth = [0.5, -1.0, 0.25, 2.0, 0.75, -0.5, 1.5, 0.1];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data: Vec<LabeledInstance> = (0..60)
            .map(|_| {
                let feats: Vec<(u32, f64)> = (1..=4u32)
                    .filter_map(|i| {
                        if rng.random_bool(0.7) {
                            Some((i, rng.random_range(0.5..1.5)))
                        } else {
                            None
                        }
                    })
                    .collect();
                let y = map.expand(&feats).unwrap().dot(&truth);
                inst(y, &feats)
            })
            .collect();
        let full = batch_oracle(&data, &map, Task::Regression).unwrap();
        let losses = fixed_decision_losses(&full.weights, &data, &map, Task::Regression).unwrap();
        let checkpoints = [10, 30, 60];
        let oracle: Vec<f64> = checkpoints
            .iter()
            .map(|&t| {
                batch_oracle(&data[..t], &map, Task::Regression)
                    .unwrap()
                    .total_loss
            })
            .collect();
        let series = regret_series(&losses, &checkpoints, &oracle).unwrap();
        for p in &series.points {
            assert!(p.regret.abs() < 1e-9, "{p:?}");
        }
    }

    #[test]
    fn zero_learner_on_zero_labels() {
        let map = PqrIndexMap::new(FeatureSeparation::linear(3));
        let data = vec![inst(0.0, &[(1, 1.0)]), inst(0.0, &[(2, 1.0), (3, 1.0)])];
        let losses = fixed_decision_losses(&[0.0; 4], &data, &map, Task::Regression).unwrap();
        let oracle = batch_oracle(&data, &map, Task::Regression).unwrap();
        let s = regret_series(&losses, &[2], &[oracle.total_loss]).unwrap();
        assert_eq!(s.points[0].regret, 0.0);
    }

    #[test]
    fn series_argument_checks() {
        assert!(regret_series(&[1.0, 1.0], &[3], &[0.0]).is_err());
        assert!(regret_series(&[1.0, 1.0], &[2, 1], &[0.0, 0.0]).is_err());
        assert!(regret_series(&[1.0, 1.0], &[1], &[]).is_err());
        let s = regret_series(&[1.0, 2.0, 3.0], &[1, 3], &[0.5, 1.0]).unwrap();
        assert_eq!(s.points[1].learner_loss, 6.0);
        assert_eq!(s.points[1].regret, 5.0);
        let mut csv = Vec::new();
        s.write_csv(&mut csv).unwrap();
        assert_eq!(
            String::from_utf8(csv).unwrap(),
            "t,learner_loss,oracle_loss,regret\n1,1.0,0.5,0.5\n3,6.0,1.0,5.0\n"
        );
    }
}
