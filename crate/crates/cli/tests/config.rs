use std::path::PathBuf;

use pimfit::{LinkFunction, SolverConfig};
use pimfit_cli::config::{Contrast, FitConfig, MethodConfig, OutputFormat, SimulateConfig, TermSpec};
use proptest::prelude::*;

fn name() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_]{0,8}"
}

fn term() -> impl Strategy<Value = TermSpec> {
    prop_oneof![
        name().prop_map(TermSpec::Linear),
        name().prop_map(TermSpec::Quad),
        (name(), -100i32..100).prop_map(|(column, b)| TermSpec::Factor {
            column,
            baseline: b as f64 / 4.0
        }),
    ]
}

fn method() -> impl Strategy<Value = MethodConfig> {
    prop_oneof![
        Just(MethodConfig::Full),
        (2usize..500).prop_map(|s| MethodConfig::Partition {
            partitions: Some(s),
            partition_size: None
        }),
        (10usize..5000).prop_map(|s| MethodConfig::Partition {
            partitions: None,
            partition_size: Some(s)
        }),
        (5usize..500, 2usize..500).prop_map(|(k, b)| MethodConfig::Subsample { k, b }),
    ]
}

fn fit_config() -> impl Strategy<Value = FitConfig> {
    (
        (name(), prop::collection::vec(term(), 1..4)),
        prop_oneof![Just(LinkFunction::Probit), Just(LinkFunction::Logit)],
        0.001f64..0.5,
        0u64..i64::MAX as u64,
        prop::option::of(1usize..64),
        prop_oneof![Just(OutputFormat::Json), Just(OutputFormat::Csv)],
        method(),
        any::<bool>(),
        prop::collection::vec((name(), prop::collection::vec(-5f64..5.0, 1..3)), 0..3),
    )
        .prop_map(
            |((response, terms), link, alpha, seed, workers, format, method, flag, contrasts)| FitConfig {
                input: PathBuf::from(format!("{response}.csv")),
                response,
                terms: terms.iter().map(|t| t.to_string()).collect(),
                link,
                alpha,
                seed,
                workers,
                output: workers.map(|w| PathBuf::from(format!("out{w}.json"))),
                format,
                full_fit_cap: 50_000,
                allow_large_full: flag,
                per_piece: !flag,
                method,
                contrasts: contrasts.into_iter().map(|(name, z)| Contrast { name, z }).collect(),
                solver: SolverConfig::default(),
            },
        )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn fit_config_round_trips(cfg in fit_config()) {
        let text = cfg.to_toml().unwrap();
        prop_assert_eq!(FitConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn term_specs_round_trip(t in term()) {
        prop_assert_eq!(t.to_string().parse::<TermSpec>().unwrap(), t);
    }
}

#[test]
fn malformed_terms_are_rejected() {
    for bad in ["x", "linear:", "cubic:x", "factor:g", "factor:g@nan", "factor:@1"] {
        assert!(bad.parse::<TermSpec>().is_err(), "{bad}");
    }
}

#[test]
fn partition_needs_exactly_one_size() {
    let base = "input = \"d.csv\"\nresponse = \"y\"\nterms = [\"linear:x\"]\n[method]\nkind = \"partition\"\n";
    assert!(FitConfig::from_toml(base).is_err());
    assert!(FitConfig::from_toml(&format!("{base}partitions = 4\npartition_size = 100\n")).is_err());
    assert!(FitConfig::from_toml(&format!("{base}partitions = 4\n")).is_ok());
}

#[test]
fn bundled_simulation_config_loads() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/model1_partition_desk.toml");
    let cfg = SimulateConfig::load(&path).unwrap();
    let grid = cfg.grid().unwrap();
    assert_eq!((grid.n, grid.runs), (25_000, 500));
    assert_eq!(grid.methods, vec![pimfit::Method::Partition { partitions: 10 }]);
}
