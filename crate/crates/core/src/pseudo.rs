use crate::data::Dataset;
use crate::design::{DesignSpec, RowFeatures};
use crate::error::Result;

/// `I(y_i ⪯ y_j)`: 1 if `y_i < y_j`, ½ on exact ties, 0 otherwise.
#[inline]
pub fn indicator(y_i: f64, y_j: f64) -> f64 {
    // branch-free: the comparison outcome is unpredictable in the pair loops
    0.5 * ((y_i < y_j) as u8 as f64 + (y_i <= y_j) as u8 as f64)
}

/// Number of unordered pairs among `n` observations.
pub fn pair_count(n: usize) -> u64 {
    let n = n as u64;
    n * n.saturating_sub(1) / 2
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoObservation {
    pub i: usize,
    pub j: usize,
    pub indicator: f64,
    pub z: Vec<f64>,
}

/// Lazily yields the `n(n−1)/2` pseudo-observations in lexicographic `(i, j)`
/// order without materialising them.
#[derive(Debug, Clone)]
pub struct PseudoObservations {
    y: Vec<f64>,
    features: RowFeatures,
    i: usize,
    j: usize,
}

pub fn expand_pseudo_observations(data: &Dataset, spec: &DesignSpec) -> Result<PseudoObservations> {
    spec.validate(data)?;
    let features = spec.row_features(data)?;
    Ok(PseudoObservations {
        y: data.y().to_vec(),
        features,
        i: 0,
        j: 1,
    })
}

impl Iterator for PseudoObservations {
    type Item = PseudoObservation;

    fn next(&mut self) -> Option<Self::Item> {
        let n = self.y.len();
        if self.j >= n {
            return None;
        }
        let (i, j) = (self.i, self.j);
        let (fi, fj) = (self.features.row(i), self.features.row(j));
        let item = PseudoObservation {
            i,
            j,
            indicator: indicator(self.y[i], self.y[j]),
            z: fj.iter().zip(fi).map(|(b, a)| b - a).collect(),
        };
        self.j += 1;
        if self.j == n {
            self.i += 1;
            self.j = self.i + 1;
        }
        Some(item)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.y.len();
        let remaining = if self.j >= n {
            0
        } else {
            let rest_of_row = n - self.j;
            let later = n - self.i - 1;
            rest_of_row + later * (later - 1) / 2
        };
        (remaining, Some(remaining))
    }
}

impl ExactSizeIterator for PseudoObservations {}
