//! Single-positive multi-label learning driven by estimated class priors.
//!
//! Each training instance reveals exactly one of its relevant labels. The
//! learner alternates between two steps:
//!
//! 1. estimate every label's class prior from the current classifier's
//!    scores with a confidence-bound threshold search ([`prior`]);
//! 2. minimise an unbiased risk that uses those priors to weigh the observed
//!    positives against the model's mean output ([`risk`], [`trainer`]).
//!
//! The [`synth`] module produces fixtures with exactly known priors so that
//! both steps can be checked against ground truth, and [`metrics`] implements
//! the six multi-label evaluation measures.
//!
//! ```
//! use crisp::prior::{estimate_prior, EstimatorConfig};
//!
//! let scores = [0.9, 0.8, 0.7, 0.4, 0.3, 0.1];
//! let cfg = EstimatorConfig { delta: 0.5, tau: 0.01 };
//! let est = estimate_prior(&scores, &[0, 2], &cfg).unwrap();
//! assert_eq!(est.z_hat, 0.7);
//! assert_eq!(est.pi_hat, 0.5);
//! ```

pub mod data;
mod error;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod prior;
pub mod risk;
pub mod synth;
pub mod trainer;

pub use data::{MultiLabelDataset, SinglePositiveDataset, SplitSpec};
pub use error::{CrispError, Result};
pub use metrics::MetricsReport;
pub use model::{Architecture, Classifier, GradientSet};
pub use prior::{EstimatorConfig, PriorEstimate};
pub use risk::{LossKind, LossValue, RiskConfig};
pub use trainer::{TrainConfig, TrainReport};

// The guide's code listings are compiled and run as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/priors.md")]
    mod priors {}
    #[doc = include_str!("../../../book/src/risk.md")]
    mod risk {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/synthetic.md")]
    mod synthetic {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
