mod common;

use approx::{abs_diff_eq, assert_relative_eq};
use common::*;
use pimfit::pseudo::indicator;
use pimfit::{
    aggregate_only, expand_pseudo_observations, generate, loess_smooth, pim_residuals, Dataset, GeneratingModel,
    LinkFunction, Method, PartitionPlan, PimFit, StoredFit, SubsamplePlan,
};
use proptest::prelude::*;

fn link() -> impl Strategy<Value = LinkFunction> {
    prop_oneof![Just(LinkFunction::Probit), Just(LinkFunction::Logit)]
}

fn piece(beta: f64) -> PimFit {
    PimFit {
        beta: vec![beta],
        covariance: vec![vec![0.01]],
        n_obs: 100,
        n_pseudo: 4950,
        iterations: 4,
        score_norm: 0.0,
        separated: false,
        term_names: vec!["x".into()],
        link: LinkFunction::Probit,
        design_fingerprint: "f".into(),
        fit_seconds: 0.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn indicator_is_antisymmetric(a in -1e6f64..1e6, b in -1e6f64..1e6) {
        prop_assert_eq!(indicator(a, b) + indicator(b, a), 1.0);
        prop_assert_eq!(indicator(a, a), 0.5);
    }

    #[test]
    fn link_mean_is_antisymmetric(l in link(), eta in -30f64..30.0) {
        prop_assert!(abs_diff_eq!(l.inverse(eta) + l.inverse(-eta), 1.0, epsilon = 1e-12));
    }

    #[test]
    fn indicators_survive_monotone_recoding(
        ys in prop::collection::vec(0i32..6, 5..30),
        shift in -100i32..100,
        scale in 1i32..9,
    ) {
        let n = ys.len();
        let x: Vec<f64> = (0..n).map(|k| k as f64).collect();
        let spec = linear_spec(1, LinkFunction::Probit);
        let base = Dataset::new(ys.iter().map(|&v| v as f64).collect(), vec![x.clone()], vec!["x1".into()]).unwrap();
        let moved = base.map_response(|v| v * scale as f64 + shift as f64).unwrap();
        let a: Vec<f64> = expand_pseudo_observations(&base, &spec).unwrap().map(|p| p.indicator).collect();
        let b: Vec<f64> = expand_pseudo_observations(&moved, &spec).unwrap().map(|p| p.indicator).collect();
        prop_assert_eq!(a.len(), n * (n - 1) / 2);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn partitions_are_disjoint_and_exhaustive(n in 20usize..2000, s in 2usize..20, seed in any::<u64>()) {
        prop_assume!(s <= n);
        let plan = PartitionPlan::new(n, s, seed).unwrap();
        let pieces = plan.realize();
        prop_assert_eq!(pieces.len(), s);
        let mut seen = vec![false; n];
        for p in &pieces {
            prop_assert!(p.windows(2).all(|w| w[0] < w[1]));
            for &r in p {
                prop_assert!(!seen[r]);
                seen[r] = true;
            }
        }
        prop_assert!(seen.into_iter().all(|v| v));
        prop_assert_eq!(pieces, PartitionPlan::new(n, s, seed).unwrap().realize());
    }

    #[test]
    fn subsample_draws_are_distinct(n in 50usize..5000, k in 2usize..40, it in 0usize..50, seed in any::<u64>()) {
        let plan = SubsamplePlan::new(k, 2, seed).unwrap();
        let rows = plan.draw(n, it);
        prop_assert_eq!(rows.len(), k);
        prop_assert!(rows.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(rows.iter().all(|&r| r < n));
        prop_assert_eq!(rows, plan.draw(n, it));
    }

    #[test]
    fn generation_is_seed_deterministic(seed in any::<u64>(), n in 2usize..200) {
        let m = GeneratingModel::model3();
        let a = generate(&m, n, seed).unwrap();
        prop_assert_eq!(a.content_hash(), generate(&m, n, seed).unwrap().content_hash());
    }

    #[test]
    fn residuals_are_bounded(l in link(), beta in -5f64..5.0, seed in any::<u64>(), m in 2usize..25) {
        let d = linear_data(seed, 25, &[1.0]);
        let spec = linear_spec(1, l);
        let fit = StoredFit { beta: vec![beta], design_fingerprint: spec.fingerprint() };
        let set = pim_residuals(&d, &spec, &fit, m, seed).unwrap();
        prop_assert_eq!(set.entries.len(), m * (m - 1) / 2);
        prop_assert!(set.entries.iter().all(|e| (-1.0..=1.0).contains(&e.residual)));
    }

    #[test]
    fn loess_reproduces_lines(
        xs in prop::collection::vec(-50f64..50.0, 12..80),
        a in -10f64..10.0,
        b in -10f64..10.0,
        span in 0.3f64..=1.0,
    ) {
        let mut sorted = xs.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        prop_assume!(sorted.len() >= 12);
        let pts: Vec<(f64, f64)> = xs.iter().map(|&x| (x, a + b * x)).collect();
        for (x, f) in loess_smooth(&pts, span).unwrap() {
            prop_assert!(abs_diff_eq!(f, a + b * x, epsilon = 1e-6 * (1.0 + (a + b * x).abs())));
        }
    }

    #[test]
    fn pooled_estimate_is_the_piece_mean(betas in prop::collection::vec(-3f64..3.0, 2..40)) {
        let s = betas.len();
        let agg = aggregate_only(
            betas.iter().map(|&b| piece(b)).collect(),
            Method::Partition { partitions: s },
            100 * s,
            0.05,
        ).unwrap();
        let mean = betas.iter().sum::<f64>() / s as f64;
        assert_relative_eq!(agg.beta_pooled[0], mean, epsilon = 1e-12, max_relative = 1e-12);
        prop_assert!(agg.var_scaled[0] >= 0.0);
        prop_assert!(agg.ci_scaled[0].lower <= agg.beta_pooled[0] && agg.beta_pooled[0] <= agg.ci_scaled[0].upper);
    }
}
