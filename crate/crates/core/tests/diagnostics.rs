mod common;

use common::*;
use nalgebra::{Matrix2, Vector2};
use pimfit::rng;
use pimfit::{
    fit_pim, generate, loess_smooth, pim_residuals, GeneratingModel, LinkFunction, PimError, SolverConfig, StoredFit,
};
use rand::Rng;

#[test]
fn fifty_rows_give_1225_bounded_residuals() {
    let model = GeneratingModel::model1();
    let d = generate(&model, 400, 1).unwrap();
    let spec = model.design();
    let fit = fit_pim(&d, &spec, &SolverConfig::default()).unwrap();
    let set = pim_residuals(&d, &spec, &fit, 50, 3).unwrap();
    assert_eq!(set.entries.len(), 1225);
    assert_eq!(set.m, 50);
    assert!(set
        .entries
        .iter()
        .all(|e| (-1.0..=1.0).contains(&e.residual) && e.i < e.j));
    let idx: Vec<usize> = set.entries.iter().map(|e| e.pseudo_index).collect();
    assert_eq!(idx, (0..1225).collect::<Vec<_>>());
    assert_eq!(pim_residuals(&d, &spec, &fit, 2, 3).unwrap().entries.len(), 1);
}

#[test]
fn zero_coefficients_give_half_steps() {
    let d = linear_data(2, 100, &[0.0]);
    let spec = linear_spec(1, LinkFunction::Probit);
    let fit = StoredFit {
        beta: vec![0.0],
        design_fingerprint: spec.fingerprint(),
    };
    for e in pim_residuals(&d, &spec, &fit, 30, 4).unwrap().entries {
        assert!([-0.5, 0.0, 0.5].contains(&e.residual));
    }
}

#[test]
fn four_rows_by_hand() {
    let d = linear_data(3, 40, &[1.0]);
    let spec = linear_spec(1, LinkFunction::Probit);
    let fit = fit_pim(&d, &spec, &SolverConfig::default()).unwrap();
    let set = pim_residuals(&d, &spec, &fit, 4, 5).unwrap();
    assert_eq!(set.entries.len(), 6);
    let (y, x) = (d.y(), d.column("x1").unwrap());
    let mut k = 0;
    for a in 0..4 {
        for b in a + 1..4 {
            let (i, j) = (set.rows[a], set.rows[b]);
            let ind = if y[i] < y[j] {
                1.0
            } else if y[i] == y[j] {
                0.5
            } else {
                0.0
            };
            let expected = ind - phi((x[j] - x[i]) * fit.beta[0]);
            let e = &set.entries[k];
            assert_eq!((e.i, e.j), (i, j));
            assert!((e.residual - expected).abs() < 1e-12);
            k += 1;
        }
    }
}

#[test]
fn mismatches_and_bad_sizes_are_rejected() {
    let d = linear_data(4, 30, &[1.0]);
    let spec = linear_spec(1, LinkFunction::Probit);
    let other = StoredFit {
        beta: vec![0.1],
        design_fingerprint: linear_spec(1, LinkFunction::Logit).fingerprint(),
    };
    assert!(matches!(
        pim_residuals(&d, &spec, &other, 10, 0),
        Err(PimError::Design(_))
    ));
    let ok = StoredFit {
        beta: vec![0.1],
        design_fingerprint: spec.fingerprint(),
    };
    assert!(matches!(pim_residuals(&d, &spec, &ok, 31, 0), Err(PimError::Config(_))));
}

#[test]
fn residuals_restate_the_score_for_logit() {
    let d = linear_data(5, 120, &[1.0, -1.0]);
    let spec = linear_spec(2, LinkFunction::Logit);
    let fit = fit_pim(&d, &spec, &SolverConfig::default()).unwrap();
    let set = pim_residuals(&d, &spec, &fit, 120, 0).unwrap();
    for a in 0..2 {
        let s: f64 = set.entries.iter().map(|e| e.z[a] * e.residual).sum();
        assert!(s.abs() <= 1e-8 * set.entries.len() as f64, "{s}");
    }
}

fn tricube(u: f64) -> f64 {
    if u < 1.0 {
        (1.0 - u.powi(3)).powi(3)
    } else {
        0.0
    }
}

#[test]
fn loess_matches_per_point_weighted_least_squares() {
    let mut g = rng::stream(6, &[]);
    let pts: Vec<(f64, f64)> = (0..500)
        .map(|_| {
            let x = 10.0 * g.random::<f64>();
            (x, x.sin() + 0.3 * (g.random::<f64>() - 0.5))
        })
        .collect();
    let span = 0.3;
    let fitted = loess_smooth(&pts, span).unwrap();
    let q = (span * 500.0f64).ceil() as usize;
    let mut worst = 0.0f64;
    for (k, &(x0, _)) in pts.iter().enumerate() {
        let mut dist: Vec<f64> = pts.iter().map(|(x, _)| (x - x0).abs()).collect();
        dist.sort_by(f64::total_cmp);
        let h = dist[q - 1];
        let mut xtwx = Matrix2::zeros();
        let mut xtwy = Vector2::zeros();
        for &(x, y) in &pts {
            let w = tricube((x - x0).abs() / h);
            let r = Vector2::new(1.0, x - x0);
            xtwx += w * r * r.transpose();
            xtwy += w * y * r;
        }
        let coef = xtwx.lu().solve(&xtwy).unwrap();
        assert_eq!(fitted[k].0, x0);
        worst = worst.max((fitted[k].1 - coef[0]).abs());
    }
    assert!(worst < 1e-10, "{worst}");
}

#[test]
fn loess_reproduces_constants_and_lines() {
    let mut g = rng::stream(7, &[]);
    let xs: Vec<f64> = (0..60).map(|_| g.random::<f64>() * 4.0 - 2.0).collect();
    let c: Vec<(f64, f64)> = xs.iter().map(|&x| (x, 3.0)).collect();
    assert!(loess_smooth(&c, 0.75)
        .unwrap()
        .iter()
        .all(|(_, f)| (f - 3.0).abs() < 1e-12));
    let l: Vec<(f64, f64)> = xs.iter().map(|&x| (x, 2.0 * x + 1.0)).collect();
    assert!(loess_smooth(&l, 0.75)
        .unwrap()
        .iter()
        .all(|(x, f)| (f - 2.0 * x - 1.0).abs() < 1e-8));
    let flat: Vec<(f64, f64)> = (0..20).map(|k| (1.0, k as f64)).collect();
    assert!(loess_smooth(&flat, 0.75).is_err());
}
