//! Evaluation metrics and progressive reports.

pub mod regret;

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::ftrl::Task;

/// Probabilities are clamped to `[LOGLOSS_EPS, 1 - LOGLOSS_EPS]`.
pub const LOGLOSS_EPS: f64 = 1e-15;

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::InvalidArgument(format!(
            "length mismatch: {a} predictions, {b} labels"
        )));
    }
    if a == 0 {
        return Err(Error::InvalidArgument("empty input".into()));
    }
    Ok(())
}

pub fn rmse(predictions: &[f64], labels: &[f64]) -> Result<f64> {
    check_lengths(predictions.len(), labels.len())?;
    let sse: f64 = predictions
        .iter()
        .zip(labels)
        .map(|(p, y)| (p - y) * (p - y))
        .sum();
    Ok((sse / predictions.len() as f64).sqrt())
}

/// Mann-Whitney AUC from rank sums; ties among scores share their average
/// rank, which credits tied positive/negative pairs with one half. A label
/// is positive when it is `> 0`.
pub fn auc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    check_lengths(scores.len(), labels.len())?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut positive_rank_sum = 0.0;
    let mut positives = 0u64;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // 1-based ranks start+1 ..= end share their mean
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            if labels[i] > 0.0 {
                positive_rank_sum += rank;
                positives += 1;
            }
        }
        start = end;
    }
    let negatives = scores.len() as u64 - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::UndefinedMetric(
            "AUC needs at least one positive and one negative label".into(),
        ));
    }
    let p = positives as f64;
    let u = positive_rank_sum - p * (p + 1.0) / 2.0;
    Ok(u / (p * negatives as f64))
}

/// Mean binary cross-entropy (natural log). Labels `> 0` are positive.
pub fn logloss(probabilities: &[f64], labels: &[f64]) -> Result<f64> {
    check_lengths(probabilities.len(), labels.len())?;
    let total: f64 = probabilities
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(LOGLOSS_EPS, 1.0 - LOGLOSS_EPS);
            if y > 0.0 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    Ok(total / probabilities.len() as f64)
}

/// One emitted row of a report.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub t: u64,
    pub cumulative_loss: f64,
    pub rmse: Option<f64>,
    pub auc: Option<f64>,
    pub logloss: Option<f64>,
}

impl Checkpoint {
    pub fn mean_loss(&self) -> f64 {
        self.cumulative_loss / self.t as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub task: Task,
    pub instances: u64,
    pub cumulative_loss: f64,
    /// Regression only.
    pub rmse: Option<f64>,
    /// Classification only; `None` when one class is absent.
    pub auc: Option<f64>,
    /// Classification only.
    pub logloss: Option<f64>,
    pub checkpoints: Vec<Checkpoint>,
    /// Per-round losses, when requested.
    pub round_losses: Option<Vec<f64>>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:?}")).unwrap_or_default()
}

impl EvalReport {
    pub fn mean_loss(&self) -> Option<f64> {
        (self.instances > 0).then(|| self.cumulative_loss / self.instances as f64)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        match self.task {
            Task::Regression => {
                writeln!(out, "t,cumulative_loss,mean_loss,rmse")?;
                for c in &self.checkpoints {
                    writeln!(
                        out,
                        "{},{:?},{:?},{}",
                        c.t,
                        c.cumulative_loss,
                        c.mean_loss(),
                        opt(c.rmse)
                    )?;
                }
            }
            Task::Classification => {
                writeln!(out, "t,cumulative_loss,mean_loss,auc,logloss")?;
                for c in &self.checkpoints {
                    writeln!(
                        out,
                        "{},{:?},{:?},{},{}",
                        c.t,
                        c.cumulative_loss,
                        c.mean_loss(),
                        opt(c.auc),
                        opt(c.logloss)
                    )?;
                }
            }
        }
        Ok(())
    }

    /// Single-line `key=value` summary.
    pub fn summary(&self) -> String {
        let mut s = format!("task={} instances={}", self.task, self.instances);
        match self.task {
            Task::Regression => s += &format!(" rmse={}", opt(self.rmse)),
            Task::Classification => s += &format!(" auc={} logloss={}", opt(self.auc), opt(self.logloss)),
        }
        s += &format!(
            " cumulative_loss={:?} mean_loss={}",
            self.cumulative_loss,
            opt(self.mean_loss())
        );
        s
    }
}

/// Accumulates per-round predictions into an [`EvalReport`].
#[derive(Debug)]
pub(crate) struct ReportBuilder {
    task: Task,
    checkpoints: Vec<u64>,
    next: usize,
    t: u64,
    cumulative_loss: f64,
    squared_error: f64,
    scores: Vec<f64>,
    labels: Vec<f64>,
    rows: Vec<Checkpoint>,
    round_losses: Option<Vec<f64>>,
}

impl ReportBuilder {
    pub(crate) fn new(task: Task, checkpoints: &[u64], record_losses: bool) -> Self {
        let mut checkpoints: Vec<u64> = checkpoints.iter().copied().filter(|&t| t > 0).collect();
        checkpoints.sort_unstable();
        checkpoints.dedup();
        Self {
            task,
            checkpoints,
            next: 0,
            t: 0,
            cumulative_loss: 0.0,
            squared_error: 0.0,
            scores: Vec::new(),
            labels: Vec::new(),
            rows: Vec::new(),
            round_losses: record_losses.then(Vec::new),
        }
    }

    /// `prediction` is `ŷ` or a probability; `target` the training-form label.
    pub(crate) fn record(&mut self, prediction: f64, target: f64, loss: f64) {
        self.t += 1;
        self.cumulative_loss += loss;
        if let Some(losses) = &mut self.round_losses {
            losses.push(loss);
        }
        match self.task {
            Task::Regression => self.squared_error += (prediction - target) * (prediction - target),
            Task::Classification => {
                self.scores.push(prediction);
                self.labels.push(target);
            }
        }
        if self.checkpoints.get(self.next) == Some(&self.t) {
            self.next += 1;
            let row = self.row();
            self.rows.push(row);
        }
    }

    fn row(&self) -> Checkpoint {
        let (rmse, auc_v, logloss_v) = match self.task {
            Task::Regression => (Some((self.squared_error / self.t as f64).sqrt()), None, None),
            Task::Classification => (
                None,
                auc(&self.scores, &self.labels).ok(),
                logloss(&self.scores, &self.labels).ok(),
            ),
        };
        Checkpoint {
            t: self.t,
            cumulative_loss: self.cumulative_loss,
            rmse,
            auc: auc_v,
            logloss: logloss_v,
        }
    }

    pub(crate) fn finish(mut self) -> EvalReport {
        let final_row = (self.t > 0).then(|| self.row());
        if self.checkpoints.is_empty() {
            if let Some(row) = &final_row {
                self.rows.push(row.clone());
            }
        }
        let (rmse, auc_v, logloss_v) = final_row
            .map(|r| (r.rmse, r.auc, r.logloss))
            .unwrap_or((None, None, None));
        EvalReport {
            task: self.task,
            instances: self.t,
            cumulative_loss: self.cumulative_loss,
            rmse,
            auc: auc_v,
            logloss: logloss_v,
            checkpoints: self.rows,
            round_losses: self.round_losses,
        }
    }
}
