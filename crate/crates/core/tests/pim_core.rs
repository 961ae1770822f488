mod common;

use common::*;
use nalgebra::DMatrix;
use pimfit::fit::sandwich_at;
use pimfit::inference::predict_pi_from;
use pimfit::{
    expand_pseudo_observations, fit_pim, generate, predict_pi, sandwich_covariance, true_beta, wald_test, Dataset,
    DesignSpec, GeneratingModel, LinkFunction, PimFit, SolverConfig, Term,
};

const LINKS: [LinkFunction; 2] = [LinkFunction::Logit, LinkFunction::Probit];

#[test]
fn five_rows_give_ten_pairs() {
    let d = Dataset::new(
        vec![3.0, 1.0, 2.0, 2.0, 5.0],
        vec![vec![0.1, 0.2, 0.3, 0.4, 0.5]],
        vec!["x".into()],
    )
    .unwrap();
    let spec = DesignSpec::new(vec![Term::linear("x")], LinkFunction::Probit).unwrap();
    let all: Vec<_> = expand_pseudo_observations(&d, &spec).unwrap().collect();
    assert_eq!(all.len(), 10);
    let order: Vec<(usize, usize)> = all.iter().map(|p| (p.i, p.j)).collect();
    let mut sorted = order.clone();
    sorted.sort();
    assert_eq!(order, sorted);
    let tie = all.iter().find(|p| p.i == 2 && p.j == 3).unwrap();
    assert_eq!(tie.indicator, 0.5);
    let first = &all[0];
    assert_eq!(first.indicator, 0.0);
    assert!((first.z[0] - 0.1).abs() < 1e-15);
}

#[test]
fn identical_rows_pair_to_half_and_zero() {
    let d = Dataset::new(vec![1.0, 1.0, 4.0], vec![vec![2.0, 2.0, 3.0]], vec!["x".into()]).unwrap();
    let spec = DesignSpec::new(vec![Term::linear("x"), Term::quadratic("x")], LinkFunction::Logit).unwrap();
    let first = expand_pseudo_observations(&d, &spec).unwrap().next().unwrap();
    assert_eq!(first.indicator, 0.5);
    assert_eq!(first.z, vec![0.0, 0.0]);
}

#[test]
fn unknown_column_is_a_configuration_error() {
    let d = linear_data(1, 10, &[1.0]);
    let spec = DesignSpec::new(vec![Term::linear("nope")], LinkFunction::Probit).unwrap();
    assert!(matches!(
        expand_pseudo_observations(&d, &spec),
        Err(pimfit::PimError::Config(_))
    ));
}

#[test]
fn link_examples() {
    assert_eq!(LinkFunction::Probit.inverse(0.0), 0.5);
    assert_eq!(LinkFunction::Logit.inverse(0.0), 0.5);
    assert!((LinkFunction::Probit.inverse(-0.066) - 0.4737).abs() < 5e-5);
    assert!((LinkFunction::Logit.inverse(-0.249) - 0.4381).abs() < 5e-5);
}

#[test]
fn grid_oracle_small_instances() {
    for seed in 0..5 {
        let d = linear_data(100 + seed, 15, &[1.5]);
        let fit = fit_pim(&d, &linear_spec(1, LinkFunction::Probit), &SolverConfig::default()).unwrap();
        let pairs = pairs(&d, &["x1"]);
        let (mut best, mut best_norm) = (0.0, f64::INFINITY);
        for k in 0..=200_000 {
            let b = -10.0 + k as f64 * 1e-4;
            let u = score(LinkFunction::Probit, &pairs, &[b])[0].abs();
            if u < best_norm {
                best = b;
                best_norm = u;
            }
        }
        assert!(
            (fit.beta[0] - best).abs() < 1e-3,
            "seed {seed}: {} vs grid {best}",
            fit.beta[0]
        );
    }
}

#[test]
fn converged_score_is_small() {
    for link in LINKS {
        let d = linear_data(7, 60, &[1.0, -0.5]);
        let spec = linear_spec(2, link);
        let fit = fit_pim(&d, &spec, &SolverConfig::default()).unwrap();
        let u = score(link, &pairs(&d, &["x1", "x2"]), &fit.beta);
        let norm = u.iter().fold(0.0f64, |m, v| m.max(v.abs())) / fit.n_pseudo as f64;
        assert!(norm <= 1e-8, "{norm}");
        assert!(fit.score_norm <= 1e-8);
        assert_eq!(fit.n_pseudo, 60 * 59 / 2);
        let lib = pimfit::fit::score(&d, &spec, &fit.beta).unwrap();
        for (a, b) in lib.iter().zip(&u) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

#[test]
fn meat_matches_brute_force_double_loop() {
    for n in [10, 20, 30] {
        for p in [1, 3] {
            for link in LINKS {
                let slopes: Vec<f64> = (0..p).map(|k| 1.0 - 0.6 * k as f64).collect();
                let d = linear_data(n as u64 * 10 + p as u64, n, &slopes);
                let spec = linear_spec(p, link);
                let beta: Vec<f64> = slopes.iter().map(|s| 0.4 * s + 0.05).collect();
                let names = column_names(p);
                let cols: Vec<&str> = names.iter().map(String::as_str).collect();
                let oracle = brute_force_meat(link, &pairs(&d, &cols), &beta);
                let streamed =
                    sandwich_covariance(expand_pseudo_observations(&d, &spec).unwrap(), &beta, link).unwrap();
                let blocked = sandwich_at(&d, &spec, &beta, &SolverConfig::default()).unwrap();
                assert!(
                    rel_frobenius(&streamed.meat, &oracle) <= 1e-10,
                    "stream n={n} p={p} {link:?}"
                );
                assert!(
                    rel_frobenius(&blocked.meat, &oracle) <= 1e-10,
                    "kernel n={n} p={p} {link:?}"
                );
            }
        }
    }
}

#[test]
fn bread_matches_numerical_jacobian_for_logit() {
    // with the canonical link the expected and observed information coincide
    let d = linear_data(5, 25, &[1.0, 0.5]);
    let spec = linear_spec(2, LinkFunction::Logit);
    let fit = fit_pim(&d, &spec, &SolverConfig::default()).unwrap();
    let pairs = pairs(&d, &["x1", "x2"]);
    let h = 1e-6;
    let mut jac = DMatrix::zeros(2, 2);
    for c in 0..2 {
        let mut up = fit.beta.clone();
        let mut dn = fit.beta.clone();
        up[c] += h;
        dn[c] -= h;
        let (uu, ud) = (
            score(LinkFunction::Logit, &pairs, &up),
            score(LinkFunction::Logit, &pairs, &dn),
        );
        for r in 0..2 {
            jac[(r, c)] = -(uu[r] - ud[r]) / (2.0 * h);
        }
    }
    let bread = sandwich_at(&d, &spec, &fit.beta, &SolverConfig::default())
        .unwrap()
        .bread;
    assert!(rel_frobenius(&bread, &jac) < 1e-4, "{bread} vs {jac}");
}

#[test]
fn probit_bread_is_expected_information() {
    let d = linear_data(6, 25, &[1.0, 0.5]);
    let spec = linear_spec(2, LinkFunction::Probit);
    let beta = [0.4, 0.2];
    let mut oracle = DMatrix::zeros(2, 2);
    for q in pairs(&d, &["x1", "x2"]) {
        let eta = q.z[0] * beta[0] + q.z[1] * beta[1];
        let (mu, dmu) = mean_and_slope(LinkFunction::Probit, eta);
        let w = dmu * dmu / (mu * (1.0 - mu));
        for r in 0..2 {
            for c in 0..2 {
                oracle[(r, c)] += w * q.z[r] * q.z[c];
            }
        }
    }
    let bread = sandwich_at(&d, &spec, &beta, &SolverConfig::default()).unwrap().bread;
    assert!(rel_frobenius(&bread, &oracle) < 1e-10);
}

#[test]
fn covariance_is_symmetric_psd() {
    let d = linear_data(8, 80, &[1.0, -1.0, 0.5]);
    let fit = fit_pim(&d, &linear_spec(3, LinkFunction::Probit), &SolverConfig::default()).unwrap();
    let c = fit.covariance_matrix();
    assert!((&c - c.transpose()).norm() < 1e-15 * c.norm().max(1.0));
    let eig = c.symmetric_eigen().eigenvalues;
    assert!(eig.iter().all(|&l| l >= -1e-14 * eig.max()), "{eig}");
}

#[test]
fn all_ties_give_zero_meat_and_covariance() {
    let d = Dataset::new(
        vec![2.0; 12],
        vec![(0..12).map(|k| k as f64).collect()],
        vec!["x1".into()],
    )
    .unwrap();
    let spec = linear_spec(1, LinkFunction::Probit);
    let s = sandwich_covariance(
        expand_pseudo_observations(&d, &spec).unwrap(),
        &[0.0],
        LinkFunction::Probit,
    )
    .unwrap();
    assert_eq!(s.meat[(0, 0)], 0.0);
    assert_eq!(s.covariance[(0, 0)], 0.0);
}

#[test]
fn model1_recovers_truth() {
    let model = GeneratingModel::model1();
    let d = generate(&model, 2500, 42).unwrap();
    let fit = fit_pim(&d, &model.design(), &SolverConfig::default()).unwrap();
    let se = fit.std_errors()[0];
    assert!(
        (fit.beta[0] - true_beta(&model).value).abs() < 3.0 * se,
        "{} ± {se}",
        fit.beta[0]
    );
}

#[test]
fn null_model_estimate_is_insignificant() {
    let d = linear_data(9, 2000, &[0.0]);
    let fit = fit_pim(&d, &linear_spec(1, LinkFunction::Probit), &SolverConfig::default()).unwrap();
    assert!(fit.beta[0].abs() < 3.0 * fit.std_errors()[0]);
}

#[test]
fn sandwich_se_matches_monte_carlo_spread() {
    let model = GeneratingModel::model1();
    let spec = model.design();
    let (runs, n) = (500, 300);
    let fits: Vec<PimFit> = (0..runs)
        .map(|r| fit_pim(&generate(&model, n, 1000 + r).unwrap(), &spec, &SolverConfig::default()).unwrap())
        .collect();
    let est: Vec<f64> = fits.iter().map(|f| f.beta[0]).collect();
    let mean = est.iter().sum::<f64>() / runs as f64;
    let sd = (est.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (runs as f64 - 1.0)).sqrt();
    let se = fits.iter().map(|f| f.std_errors()[0]).sum::<f64>() / runs as f64;
    assert!((se / sd - 1.0).abs() < 0.15, "mean SE {se} vs MC sd {sd}");
}

#[test]
fn wald_and_prediction_examples() {
    let mut fit = fit_pim(
        &linear_data(3, 30, &[1.0]),
        &linear_spec(1, LinkFunction::Probit),
        &SolverConfig::default(),
    )
    .unwrap();
    fit.beta = vec![-0.083];
    fit.covariance = vec![vec![0.0015 * 0.0015]];
    let w = &wald_test(&fit, &[0.0], 0.05).unwrap()[0];
    assert!((w.z_statistic + 55.12).abs() < 0.25);
    let w = &wald_test(&fit, &[-0.083], 0.05).unwrap()[0];
    assert_eq!((w.z_statistic, w.p_value), (0.0, 1.0));

    fit.beta = vec![-0.033];
    let pi = predict_pi(&fit, &[2.0], 0.05).unwrap();
    assert!((pi.pi_estimate - 0.4737).abs() < 5e-5);
    let pi = predict_pi(&fit, &[0.0], 0.05).unwrap();
    assert_eq!(pi.pi_estimate, 0.5);
    assert!(pi.ci_lower <= 0.5 && 0.5 <= pi.ci_upper);
}

#[test]
fn four_hour_prediction_interval() {
    // 4 hours versus 0: η = −0.033·(−4). The printed interval implies an
    // SE of about 0.00026 for β̂₁, not the tabulated 0.001.
    let eta = -0.033 * -4.0;
    let pi = predict_pi_from(LinkFunction::Probit, eta, 4.0 * 0.000258, 0.05).unwrap();
    assert!((pi.pi_estimate - 0.5525).abs() < 5e-5);
    assert!((pi.ci_lower - 0.5517).abs() < 1e-4, "{}", pi.ci_lower);
    assert!((pi.ci_upper - 0.5533).abs() < 1e-4, "{}", pi.ci_upper);
    let wide = predict_pi_from(LinkFunction::Probit, eta, 4.0 * 0.001, 0.05).unwrap();
    assert!(wide.ci_upper - wide.ci_lower > 0.006);
}
