//! Streaming accumulators over all pseudo-observations of one dataset.
//!
//! Pairs `(i, j)` are visited row block by row block. Blocks are dealt to a
//! fixed number of lanes (block `b` goes to lane `b mod LANES`), each lane
//! folds its blocks in order, and lanes are reduced in order. Results
//! therefore depend on `block_rows` only, never on the rayon thread count.

use rayon::prelude::*;

use crate::batch::{row_dot_p1, row_weights, RowInput};
use crate::design::RowFeatures;
use crate::link::LinkFunction;

const LANES: usize = 8;

pub(crate) struct PairProblem<'a> {
    pub y: &'a [f64],
    pub features: &'a RowFeatures,
    pub link: LinkFunction,
    pub eta_clamp: f64,
    pub block_rows: usize,
}

/// Score `U(β)` and expected information `Σ A (∂μ/∂β)ᵀ` at one `β`.
#[derive(Debug, Clone)]
pub(crate) struct ScoreInfo {
    pub score: Vec<f64>,
    /// Row-major `p × p`, symmetric.
    pub info: Vec<f64>,
    pub clamped: bool,
}

/// Bread and meat of the sandwich at one `β`.
#[derive(Debug, Clone)]
pub(crate) struct SandwichParts {
    pub bread: Vec<f64>,
    pub meat: Vec<f64>,
    pub clamped: bool,
}

/// Per-lane scratch: pair weights for the current row.
struct RowBuffers {
    score: Vec<f64>,
    info: Vec<f64>,
}

impl PairProblem<'_> {
    fn n(&self) -> usize {
        self.y.len()
    }

    fn p(&self) -> usize {
        self.features.p()
    }

    /// Block ranges for each lane, in fold order.
    fn lanes(&self) -> Vec<Vec<(usize, usize)>> {
        let n = self.n();
        let step = self.block_rows.max(1);
        let mut lanes = vec![Vec::new(); LANES];
        for (b, start) in (0..n).step_by(step).enumerate() {
            lanes[b % LANES].push((start, (start + step).min(n)));
        }
        lanes
    }

    /// Fills the buffers for pairs `(i, i+1..n)`; returns whether any linear
    /// predictor was clamped.
    fn weights(&self, lin: &[f64], i: usize, buf: &mut RowBuffers) -> bool {
        let row = RowInput {
            y_i: self.y[i],
            lin_i: lin[i],
            y: &self.y[i + 1..],
            lin: &lin[i + 1..],
            eta_clamp: self.eta_clamp,
        };
        row_weights(self.link, &row, &mut buf.score, &mut buf.info) > 0
    }

    fn buffers(&self) -> RowBuffers {
        RowBuffers {
            score: vec![0.0; self.n()],
            info: vec![0.0; self.n()],
        }
    }

    pub fn score_info(&self, beta: &[f64]) -> ScoreInfo {
        let (n, p) = (self.n(), self.p());
        let lin = self.features.linear_predictor(beta);
        let empty = || ScoreInfo {
            score: vec![0.0; p],
            info: vec![0.0; p * p],
            clamped: false,
        };
        let partials: Vec<ScoreInfo> = self
            .lanes()
            .into_par_iter()
            .map(|blocks| {
                let mut acc = empty();
                let mut buf = self.buffers();
                for (lo, hi) in blocks {
                    for i in lo..hi {
                        acc.clamped |= self.weights(&lin, i, &mut buf);
                        let m = n - i - 1;
                        if p == 1 {
                            let f = self.features.values();
                            let (s, w) = row_dot_p1(f[i], &f[i + 1..], &buf.score, &buf.info);
                            acc.score[0] += s;
                            acc.info[0] += w;
                        } else {
                            self.score_row(i, &buf.score[..m], &buf.info[..m], &mut acc);
                        }
                    }
                }
                acc
            })
            .collect();
        let mut total = empty();
        for part in partials {
            add_into(&mut total.score, &part.score);
            add_into(&mut total.info, &part.info);
            total.clamped |= part.clamped;
        }
        mirror_upper(&mut total.info, p);
        total
    }

    fn score_row(&self, i: usize, s: &[f64], w: &[f64], acc: &mut ScoreInfo) {
        let p = self.p();
        let fi = self.features.row(i);
        let mut z = vec![0.0; p];
        for (k, (&s, &w)) in s.iter().zip(w).enumerate() {
            let fj = self.features.row(i + 1 + k);
            for a in 0..p {
                z[a] = fj[a] - fi[a];
                acc.score[a] += s * z[a];
            }
            for a in 0..p {
                let wa = w * z[a];
                for b in a..p {
                    acc.info[a * p + b] += wa * z[b];
                }
            }
        }
    }

    /// Bread and meat via per-index score sums `S_h`:
    /// `M = Σ_h S_h S_hᵀ − Σ_{i<j} U_ij U_ijᵀ`, with `U_ij` added to both
    /// `S_i` and `S_j`. Each lane keeps its own `n × p` buffer of partial sums.
    pub fn sandwich_parts(&self, beta: &[f64]) -> SandwichParts {
        let (n, p) = (self.n(), self.p());
        let lin = self.features.linear_predictor(beta);
        struct Lane {
            sums: Vec<f64>,
            bread: Vec<f64>,
            self_outer: Vec<f64>,
            clamped: bool,
        }
        let lanes: Vec<Lane> = self
            .lanes()
            .into_par_iter()
            .map(|blocks| {
                let mut lane = Lane {
                    sums: vec![0.0; n * p],
                    bread: vec![0.0; p * p],
                    self_outer: vec![0.0; p * p],
                    clamped: false,
                };
                let mut buf = self.buffers();
                let mut z = vec![0.0; p];
                let mut s_i = vec![0.0; p];
                for (lo, hi) in blocks {
                    for i in lo..hi {
                        lane.clamped |= self.weights(&lin, i, &mut buf);
                        let fi = self.features.row(i);
                        s_i.iter_mut().for_each(|v| *v = 0.0);
                        for j in i + 1..n {
                            let (s, w) = (buf.score[j - i - 1], buf.info[j - i - 1]);
                            let fj = self.features.row(j);
                            let s_j = &mut lane.sums[j * p..(j + 1) * p];
                            for a in 0..p {
                                z[a] = fj[a] - fi[a];
                                let u = s * z[a];
                                s_i[a] += u;
                                s_j[a] += u;
                            }
                            for a in 0..p {
                                let wa = w * z[a];
                                let ua = s * s * z[a];
                                for b in a..p {
                                    lane.bread[a * p + b] += wa * z[b];
                                    lane.self_outer[a * p + b] += ua * z[b];
                                }
                            }
                        }
                        add_into(&mut lane.sums[i * p..(i + 1) * p], &s_i);
                    }
                }
                lane
            })
            .collect();

        let mut sums = vec![0.0; n * p];
        let mut bread = vec![0.0; p * p];
        let mut self_outer = vec![0.0; p * p];
        let mut clamped = false;
        for lane in &lanes {
            add_into(&mut sums, &lane.sums);
            add_into(&mut bread, &lane.bread);
            add_into(&mut self_outer, &lane.self_outer);
            clamped |= lane.clamped;
        }
        let mut meat = vec![0.0; p * p];
        for s_h in sums.chunks_exact(p) {
            for a in 0..p {
                for b in a..p {
                    meat[a * p + b] += s_h[a] * s_h[b];
                }
            }
        }
        for (m, o) in meat.iter_mut().zip(&self_outer) {
            *m -= o;
        }
        mirror_upper(&mut bread, p);
        mirror_upper(&mut meat, p);
        SandwichParts { bread, meat, clamped }
    }
}

fn add_into(acc: &mut [f64], part: &[f64]) {
    for (a, b) in acc.iter_mut().zip(part) {
        *a += b;
    }
}

/// Copies the upper triangle of a row-major `p × p` matrix onto the lower.
fn mirror_upper(m: &mut [f64], p: usize) {
    for a in 0..p {
        for b in 0..a {
            m[a * p + b] = m[b * p + a];
        }
    }
}
