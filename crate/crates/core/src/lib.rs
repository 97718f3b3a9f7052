//! Bi-level reward-weight optimization with performance-gated, novelty-guided
//! exploration of the weight space.

pub mod cartpole;
pub mod error;
pub mod harness;
pub mod inner;
pub mod landscape;
pub mod net;
pub mod outer;
pub mod record;
pub mod rng;
pub mod sampling;
pub mod scheduler;

pub use error::{Error, Result};
pub use landscape::{Family, Landscape};
pub use net::DenseNet;
pub use record::{Event, Experiment, RunRecord, SeriesRow};
pub use sampling::WeightBox;
