// SPDX-License-Identifier: MIT OR Apache-2.0

use parcs_core::detect::{detect, DetectConfig, Method};
use parcs_core::experiment::{realisation_rng, run_benchmark, BenchmarkConfig};
use parcs_core::infer::BootstrapConfig;
use parcs_core::metrics::RateDefinition;
use parcs_core::rng::RngSpec;
use parcs_core::series::MultiSeries;
use parcs_core::synth::{deterministic_mean, generate, scenario, ScenarioOverrides, SCENARIOS};

fn quick(method: Method) -> DetectConfig {
    DetectConfig { method, bootstrap: BootstrapConfig::new(300, 0.05).unwrap(), ..DetectConfig::default() }
}

#[test]
fn every_scenario_runs_through_every_applicable_method() {
    for name in SCENARIOS {
        let spec = scenario(name, &ScenarioOverrides::default()).unwrap();
        let x = generate(&spec, realisation_rng(1, 0)).unwrap();
        for method in Method::ALL {
            let mut cfg = quick(method);
            cfg.sqrt_preprocess = name.starts_with("poisson");
            let r = detect(&x, &cfg, RngSpec::new(2));
            if x.covariates() > 1 && method != Method::Parcs {
                assert!(r.is_err(), "{name} {method}");
                continue;
            }
            let d = r.unwrap_or_else(|e| panic!("{name} {method}: {e}"));
            assert_eq!(d.reconstructed.len(), x.covariates());
            assert!(d.reconstructed.iter().all(|c| c.len() == x.len() && c.iter().all(|v| v.is_finite())));
            for t in d.result.accepted.iter().chain(&d.result.rejected) {
                assert!(t.location >= 1 && t.location < x.len());
                assert!(t.p_value > 0.0 && t.p_value <= 1.0);
            }
        }
    }
}

#[test]
fn strong_noiseless_steps_are_recovered_exactly() {
    let spec = scenario("multivariate-9", &ScenarioOverrides::default()).unwrap();
    let x = deterministic_mean(&spec).unwrap();
    let d = detect(&x, &quick(Method::Parcs), RngSpec::new(3)).unwrap();
    let mut locs = d.locations();
    locs.sort_unstable();
    assert_eq!(locs, spec.effective_cps());
    for (n, col) in x.columns().iter().enumerate() {
        assert!(col.values().iter().zip(&d.reconstructed[n]).all(|(a, b)| (a - b).abs() < 1e-8));
    }
}

#[test]
fn offset_and_scale_do_not_change_locations() {
    let spec = scenario("two-cp-3", &ScenarioOverrides::default()).unwrap();
    let x = generate(&spec, realisation_rng(5, 0)).unwrap();
    let base = detect(&x, &quick(Method::Parcs), RngSpec::new(8)).unwrap();
    let moved = MultiSeries::from_columns(vec![x.column(0).values().iter().map(|v| 10.0 + 4.0 * v).collect()]).unwrap();
    let d = detect(&moved, &quick(Method::Parcs), RngSpec::new(8)).unwrap();
    assert_eq!(base.locations(), d.locations());
    for (a, b) in base.result.accepted.iter().zip(&d.result.accepted) {
        assert!((a.p_value - b.p_value).abs() < 1e-12);
        assert!((4.0 * a.step_weights[0] - b.step_weights[0]).abs() < 1e-8);
    }
}

#[test]
fn benchmark_is_reproducible_and_seed_sensitive() {
    let cfg = BenchmarkConfig {
        scenario: "two-cp-3".into(),
        overrides: ScenarioOverrides::default(),
        methods: vec![Method::Parcs, Method::Binseg],
        alpha_grid: vec![0.05],
        realisations: 6,
        seed: 17,
        detect: quick(Method::Parcs),
        window: None,
        rates: RateDefinition::Count,
    };
    let a = run_benchmark(&cfg).unwrap();
    let b = run_benchmark(&cfg).unwrap();
    assert_eq!(a.reports, b.reports);
    assert_eq!(a.outcomes, b.outcomes);
    let c = run_benchmark(&BenchmarkConfig { seed: 18, ..cfg }).unwrap();
    assert_ne!(a.outcomes, c.outcomes);
}
