//! Large-`n` fitting: one PIM per disjoint partition or per uniform
//! subsample, pooled by the unweighted mean of the piece estimates.

mod aggregate;
mod plan;

pub use aggregate::{aggregate_only, AggregatedFit, Interval, Method};
pub use plan::{PartitionPlan, SubsamplePlan};

use rayon::prelude::*;

use crate::data::Dataset;
use crate::design::DesignSpec;
use crate::error::{PieceId, PimError, Result};
use crate::fit::{fit_pim, PimFit, SolverConfig};
use crate::inference::check_alpha;

/// Fits every piece (in parallel), then reports the first failure in piece
/// order, if any.
fn fit_pieces(
    data: &Dataset,
    spec: &DesignSpec,
    solver: &SolverConfig,
    pieces: &[Vec<usize>],
    id: fn(usize) -> PieceId,
) -> Result<Vec<PimFit>> {
    log::info!("fitting {} pieces on {} rows", pieces.len(), data.n());
    let results: Vec<Result<PimFit>> = pieces
        .par_iter()
        .map(|rows| {
            let subset = data.select_rows(rows)?;
            fit_pim(&subset, spec, solver)
        })
        .collect();
    results
        .into_iter()
        .enumerate()
        .map(|(k, r)| {
            r.map_err(|e| PimError::Piece {
                piece: id(k),
                source: Box::new(e),
            })
        })
        .collect()
}

fn check_piece_size(size: usize, spec: &DesignSpec, what: &str) -> Result<()> {
    if size < spec.p() + 2 {
        return Err(PimError::Config(format!(
            "{what} of {size} rows is below p + 2 = {}",
            spec.p() + 2
        )));
    }
    Ok(())
}

/// Single random partitioning of the rows into `plan.partitions` pieces.
pub fn partition_fit(
    data: &Dataset,
    spec: &DesignSpec,
    plan: &PartitionPlan,
    alpha: f64,
    solver: &SolverConfig,
) -> Result<AggregatedFit> {
    check_alpha(alpha)?;
    if plan.n != data.n() {
        return Err(PimError::Config(format!(
            "partition plan is for {} rows, data has {}",
            plan.n,
            data.n()
        )));
    }
    check_piece_size(plan.smallest(), spec, "smallest partition")?;
    spec.validate(data)?;
    let pieces = plan.realize();
    let fits = fit_pieces(data, spec, solver, &pieces, PieceId::Partition)?;
    aggregate_only(
        fits,
        Method::Partition {
            partitions: plan.partitions,
        },
        data.n(),
        alpha,
    )
}

/// `plan.b` independent uniform subsamples of `plan.k` rows.
pub fn subsample_fit(
    data: &Dataset,
    spec: &DesignSpec,
    plan: &SubsamplePlan,
    alpha: f64,
    solver: &SolverConfig,
) -> Result<AggregatedFit> {
    check_alpha(alpha)?;
    plan.check(data.n())?;
    check_piece_size(plan.k, spec, "subsample")?;
    spec.validate(data)?;
    let pieces: Vec<Vec<usize>> = (0..plan.b).map(|b| plan.draw(data.n(), b)).collect();
    let fits = fit_pieces(data, spec, solver, &pieces, PieceId::Iteration)?;
    aggregate_only(fits, Method::Subsample { k: plan.k, b: plan.b }, data.n(), alpha)
}
