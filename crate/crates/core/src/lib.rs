//! Probabilistic index models: pseudo-observation fitting, sandwich
//! inference, partition and subsample fitting for large `n`, simulation
//! studies and residual diagnostics.

mod batch;
pub mod data;
pub mod design;
pub mod diagnostics;
pub mod error;
pub mod fit;
pub mod inference;
mod kernel;
pub mod link;
pub mod normal;
pub mod parallel;
pub mod pseudo;
pub mod rng;
pub mod scalable;
pub mod simulate;

pub use data::Dataset;
pub use design::{DesignSpec, RowFeatures, Term};
pub use diagnostics::{loess_smooth, pim_residuals, Residual, ResidualSet};
pub use error::{PieceId, PimError, Result};
pub use fit::{fit_pim, sandwich_covariance, FittedPim, PimFit, Sandwich, SolverConfig, StoredFit};
pub use inference::{predict_pi, wald_test, PiPrediction, WaldResult};
pub use link::LinkFunction;
pub use pseudo::{expand_pseudo_observations, PseudoObservation, PseudoObservations};
pub use scalable::{
    aggregate_only, partition_fit, subsample_fit, AggregatedFit, Interval, Method, PartitionPlan, SubsamplePlan,
};
pub use simulate::{
    generate, ols_fit, qq_points, run_mc_study, true_beta, CellReport, GeneratingModel, McGridSpec, ModelKind, OlsFit,
    SimulationReport, TrueBeta,
};
