//! Projective quadratic regression (PQR) for sparse online learning.
//!
//! Features are split by occurrence frequency into a small high-frequency
//! set `H` and the rest `L`. The model keeps a full interaction matrix over
//! `H`, one shared interaction weight per high feature against all of `L`,
//! and ignores low-low interactions. That restricted quadratic model is
//! linear in a deterministic feature expansion, so it trains with
//! per-coordinate FTRL-Proximal at roughly the cost of a linear model.
//!
//! Typical flow:
//!
//! ```no_run
//! use pqr_core::{io, separation, FtrlParams, PqrModel, RunOptions, Task};
//!
//! # fn main() -> pqr_core::Result<()> {
//! let counts = separation::count_features(io::stream("train.txt")?)?;
//! let sep = separation::select_top_k(&counts, 50, counts.max_index().unwrap_or(0))?;
//! let params = FtrlParams::new(0.1, 1.0, 1.0, 1.0, Task::Regression)?;
//! let mut model = PqrModel::new(sep, params);
//! let report = model.train(io::stream("train.txt")?, &RunOptions::default())?;
//! println!("{}", report.summary());
//! # Ok(())
//! # }
//! ```

pub mod error;
pub mod expansion;
pub mod ftrl;
pub mod io;
pub mod metrics;
pub mod model;
pub mod movielens;
pub mod oracle;
pub mod separation;
pub mod synth;

pub use error::{Error, ParseError, Result};
pub use expansion::{ExpandedVector, PqrIndexMap, Slot};
pub use ftrl::{ftrl_weight, loss, train_stream, FtrlParams, FtrlState, RunOptions, StorageKind, Task};
pub use io::{DatasetSplit, LabeledInstance};
pub use metrics::regret::{batch_oracle, regret_series, OracleFit, RegretSeries};
pub use metrics::{auc, logloss, rmse, EvalReport};
pub use model::PqrModel;
pub use oracle::{assemble_matrix, decompose_projection, predict_quadratic_form, PqrMatrix};
pub use separation::{FeatureCounts, FeatureSeparation};
