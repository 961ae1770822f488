#![allow(dead_code)]

use nalgebra::DMatrix;
use pimfit::rng;
use pimfit::{Dataset, DesignSpec, LinkFunction, Term};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::erf::erfc;
use std::f64::consts::{PI, SQRT_2};

pub fn phi(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

pub fn phi_density(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// `(g⁻¹(η), dg⁻¹/dη)`.
pub fn mean_and_slope(link: LinkFunction, eta: f64) -> (f64, f64) {
    match link {
        LinkFunction::Logit => {
            let mu = 1.0 / (1.0 + (-eta).exp());
            (mu, mu * (1.0 - mu))
        }
        LinkFunction::Probit => (phi(eta), phi_density(eta)),
    }
}

pub struct Pair {
    pub i: usize,
    pub j: usize,
    pub ind: f64,
    pub z: Vec<f64>,
}

/// Pairs of a linear-terms-only design, built from the raw columns.
pub fn pairs(data: &Dataset, columns: &[&str]) -> Vec<Pair> {
    let y = data.y();
    let cols: Vec<&[f64]> = columns.iter().map(|c| data.column(c).unwrap()).collect();
    let mut out = Vec::new();
    for i in 0..data.n() {
        for j in i + 1..data.n() {
            let ind = if y[i] < y[j] {
                1.0
            } else if y[i] == y[j] {
                0.5
            } else {
                0.0
            };
            out.push(Pair {
                i,
                j,
                ind,
                z: cols.iter().map(|c| c[j] - c[i]).collect(),
            });
        }
    }
    out
}

/// `A e` for one pair: `μ'/V · (I − μ) · z`.
pub fn pair_score(link: LinkFunction, pair: &Pair, beta: &[f64]) -> Vec<f64> {
    let eta: f64 = pair.z.iter().zip(beta).map(|(z, b)| z * b).sum();
    let (mu, d) = mean_and_slope(link, eta);
    let w = d / (mu * (1.0 - mu)) * (pair.ind - mu);
    pair.z.iter().map(|z| w * z).collect()
}

pub fn score(link: LinkFunction, pairs: &[Pair], beta: &[f64]) -> Vec<f64> {
    let mut u = vec![0.0; beta.len()];
    for p in pairs {
        for (a, v) in pair_score(link, p, beta).into_iter().enumerate() {
            u[a] += v;
        }
    }
    u
}

/// `Σ s_p s_qᵀ` over every ordered pair of pseudo-observations sharing an
/// original index, the pair with itself included.
pub fn brute_force_meat(link: LinkFunction, pairs: &[Pair], beta: &[f64]) -> DMatrix<f64> {
    let p = beta.len();
    let s: Vec<Vec<f64>> = pairs.iter().map(|q| pair_score(link, q, beta)).collect();
    let mut m = DMatrix::zeros(p, p);
    for (a, pa) in pairs.iter().enumerate() {
        for (b, pb) in pairs.iter().enumerate() {
            if pa.i == pb.i || pa.i == pb.j || pa.j == pb.i || pa.j == pb.j {
                for r in 0..p {
                    for c in 0..p {
                        m[(r, c)] += s[a][r] * s[b][c];
                    }
                }
            }
        }
    }
    m
}

pub fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

/// `y = Σ_k slope_k·x_k + N(0, 1)` with uniform(0, 1) covariates `x1..xp`.
pub fn linear_data(seed: u64, n: usize, slopes: &[f64]) -> Dataset {
    let mut g = rng::stream(seed, &[]);
    let p = slopes.len();
    let cols: Vec<Vec<f64>> = (0..p).map(|_| (0..n).map(|_| g.random::<f64>()).collect()).collect();
    let y = (0..n)
        .map(|i| {
            let e: f64 = StandardNormal.sample(&mut g);
            (0..p).map(|k| slopes[k] * cols[k][i]).sum::<f64>() + e
        })
        .collect();
    Dataset::new(y, cols, (1..=p).map(|k| format!("x{k}")).collect()).unwrap()
}

pub fn linear_spec(p: usize, link: LinkFunction) -> DesignSpec {
    DesignSpec::new((1..=p).map(|k| Term::linear(format!("x{k}"))).collect(), link).unwrap()
}

pub fn column_names(p: usize) -> Vec<String> {
    (1..=p).map(|k| format!("x{k}")).collect()
}
