//! Synthetic data from Gaussian linear models, an OLS reference fit, and
//! Monte Carlo studies of the scalable estimators.

mod model;
mod ols;
mod study;

pub use model::{generate, true_beta, GeneratingModel, ModelKind, TrueBeta, X_COLUMN};
pub use ols::{ols_fit, OlsFit};
pub use study::{qq_points, run_mc_study, CellReport, McGridSpec, SimulationReport};
