//! Pseudo-observation residuals on random row subsets and a LOESS smoother
//! for summarising them.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::design::DesignSpec;
use crate::error::{PimError, Result};
use crate::fit::FittedPim;
use crate::pseudo::expand_pseudo_observations;
use crate::rng;

pub const DEFAULT_SPAN: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    /// Original row indices, `i < j`.
    pub i: usize,
    pub j: usize,
    /// Position in the lexicographic order of the subset's pairs.
    pub pseudo_index: usize,
    pub residual: f64,
    pub z: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSet {
    pub entries: Vec<Residual>,
    pub subset_seed: u64,
    pub m: usize,
    pub rows: Vec<usize>,
}

/// `I(Y_i ⪯ Y_j) − g⁻¹(Z_ijᵀβ̂)` over all pairs of `m` rows drawn without
/// replacement.
pub fn pim_residuals(
    data: &Dataset,
    spec: &DesignSpec,
    fit: &dyn FittedPim,
    m: usize,
    seed: u64,
) -> Result<ResidualSet> {
    if fit.fingerprint() != spec.fingerprint() || fit.coefficients().len() != spec.p() {
        return Err(PimError::Design(format!(
            "fit was produced under design {}, not {}",
            fit.fingerprint(),
            spec.fingerprint()
        )));
    }
    if m < 2 || m > data.n() {
        return Err(PimError::Config(format!(
            "residual subset size must be in [2, {}], got {m}",
            data.n()
        )));
    }
    let mut g = rng::stream(seed, &[]);
    let mut rows = rng::sample_without_replacement(&mut g, data.n(), m);
    rows.sort_unstable();
    let subset = data.select_rows(&rows)?;
    let beta = fit.coefficients();
    let link = spec.link();
    let entries = expand_pseudo_observations(&subset, spec)?
        .enumerate()
        .map(|(k, po)| {
            let eta: f64 = po.z.iter().zip(beta).map(|(z, b)| z * b).sum();
            Residual {
                i: rows[po.i],
                j: rows[po.j],
                pseudo_index: k,
                residual: po.indicator - link.inverse(eta),
                z: po.z,
            }
        })
        .collect();
    Ok(ResidualSet {
        entries,
        subset_seed: seed,
        m,
        rows,
    })
}

fn tricube(u: f64) -> f64 {
    if u >= 1.0 {
        0.0
    } else {
        let t = 1.0 - u * u * u;
        t * t * t
    }
}

/// Weighted local linear fit at `x0`; falls back to the weighted mean when
/// the weighted spread of x vanishes.
fn local_linear(xs: &[f64], ys: &[f64], x0: f64, h: f64) -> f64 {
    let (mut sw, mut sx, mut sy) = (0.0, 0.0, 0.0);
    let w: Vec<f64> = xs
        .iter()
        .map(|&x| {
            if h > 0.0 {
                tricube((x - x0).abs() / h)
            } else if x == x0 {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    for ((&wi, &x), &y) in w.iter().zip(xs).zip(ys) {
        sw += wi;
        sx += wi * x;
        sy += wi * y;
    }
    let (xb, yb) = (sx / sw, sy / sw);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for ((&wi, &x), &y) in w.iter().zip(xs).zip(ys) {
        sxx += wi * (x - xb) * (x - xb);
        sxy += wi * (x - xb) * (y - yb);
    }
    let scale = xs.last().unwrap() - xs[0];
    if sxx <= 1e-14 * sw * scale * scale {
        yb
    } else {
        yb + sxy / sxx * (x0 - xb)
    }
}

/// Local linear regression with tricube weights over the `⌈span·n⌉` nearest
/// neighbours, evaluated at every input x. Output follows input order.
pub fn loess_smooth(points: &[(f64, f64)], span: f64) -> Result<Vec<(f64, f64)>> {
    let n = points.len();
    if n < 10 {
        return Err(PimError::Config(format!("LOESS needs at least 10 points, got {n}")));
    }
    if !(span > 0.0 && span <= 1.0) {
        return Err(PimError::Config(format!("span must be in (0, 1], got {span}")));
    }
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(PimError::Data("non-finite LOESS input".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| points[a].0.total_cmp(&points[b].0));
    let xs: Vec<f64> = order.iter().map(|&k| points[k].0).collect();
    let ys: Vec<f64> = order.iter().map(|&k| points[k].1).collect();
    if xs[0] == xs[n - 1] {
        return Err(PimError::Data("all x values are equal".into()));
    }
    let q = ((span * n as f64).ceil() as usize).clamp(2, n);

    let mut fitted = vec![0.0; n];
    for (pos, &x0) in xs.iter().enumerate() {
        // the q nearest neighbours of a point in sorted data are contiguous
        let (mut lo, mut hi) = (pos, pos + 1);
        while hi - lo < q {
            if lo == 0 {
                hi += 1;
            } else if hi == n || x0 - xs[lo - 1] <= xs[hi] - x0 {
                lo -= 1;
            } else {
                hi += 1;
            }
        }
        let h = (x0 - xs[lo]).max(xs[hi - 1] - x0);
        fitted[order[pos]] = local_linear(&xs[lo..hi], &ys[lo..hi], x0, h);
    }
    Ok(points.iter().zip(fitted).map(|(&(x, _), f)| (x, f)).collect())
}
