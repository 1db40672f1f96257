mod common;

use dataeff::analysis::{aggregate_seeds, per_class_curves, per_intent_points, ComplexityAnnotations, ComplexityClass};
use dataeff::curve::fit_curve;
use dataeff::protocol::{
    build_manifests, ledger_to_curve, run_protocol, Ledger, SimulatedRunnerConfig, Simulator, Truth,
};
use dataeff::sampling::{make_schedule, Algorithm};

fn config(noise_sigma: f64) -> SimulatedRunnerConfig {
    let (a, b, c) = common::CANONICAL;
    SimulatedRunnerConfig {
        truth: Truth { a, b, c },
        noise_sigma,
        em_at_zero: 0.0,
        seed: 9,
    }
}

#[test]
fn noiseless_seeds_fit_identically() {
    let table = common::synthetic_corpus("weather", 400, 30, 4, 3, 1);
    let manifests =
        build_manifests(&table, "weather", &make_schedule(10).unwrap(), Algorithm::Uniform, &[0, 1, 2], "m")
            .unwrap();
    let ledger = run_protocol(&manifests, &Simulator::new(config(0.0)).unwrap(), 3).unwrap();
    let points = ledger_to_curve(&ledger).unwrap();
    let agg = aggregate_seeds(&points, &[80.0, 90.0]).unwrap();
    assert_eq!(agg.seed_fits.len(), 3);
    let fits: Vec<[f64; 3]> = agg.seed_fits.values().map(|m| m.params()).collect();
    for f in &fits[1..] {
        for i in 0..3 {
            assert!((f[i] - fits[0][i]).abs() <= 1e-9, "{f:?} vs {:?}", fits[0]);
        }
    }
    assert!(agg.queries.iter().all(|q| q.spread().unwrap() <= 1e-9));
    let joint = fit_curve(&points).unwrap();
    assert!((joint.invert(90.0).unwrap().subset_percent - 35.830474).abs() < 1e-3);
}

#[test]
fn noisy_seeds_spread_but_stay_close() {
    let table = common::synthetic_corpus("weather", 400, 30, 4, 3, 2);
    let manifests =
        build_manifests(&table, "weather", &make_schedule(10).unwrap(), Algorithm::Uniform, &[0, 1, 2], "m")
            .unwrap();
    let ledger = run_protocol(&manifests, &Simulator::new(config(0.5)).unwrap(), 2).unwrap();
    let agg = aggregate_seeds(&ledger_to_curve(&ledger).unwrap(), &[]).unwrap();
    let positive: Vec<_> = agg.per_subset.iter().filter(|s| s.subset_percent > 0.0).collect();
    assert!(positive.iter().any(|s| s.spread > 0.0));
    assert!(positive.iter().all(|s| s.spread < 4.0 && s.seeds == 3));
}

#[test]
fn ledger_survives_json_round_trip() {
    let table = common::synthetic_corpus("weather", 200, 20, 3, 2, 3);
    let manifests =
        build_manifests(&table, "weather", &make_schedule(5).unwrap(), Algorithm::Uniform, &[4], "m").unwrap();
    let ledger = run_protocol(&manifests, &Simulator::with_predictions(config(0.0), &table).unwrap(), 1).unwrap();
    let text = ledger.to_json();
    assert_eq!(Ledger::from_json(&text).unwrap(), ledger);
}

#[test]
fn per_class_curves_from_simulated_predictions() {
    let table = common::synthetic_corpus("weather", 300, 400, 3, 2, 5);
    let manifests =
        build_manifests(&table, "weather", &make_schedule(10).unwrap(), Algorithm::Uniform, &[0], "m").unwrap();
    let ledger = run_protocol(&manifests, &Simulator::with_predictions(config(0.0), &table).unwrap(), 4).unwrap();
    let per_intent = per_intent_points(&ledger, &table, 10).unwrap();
    assert_eq!(per_intent.len(), 3);
    // Per-row Bernoulli draws track the simulated curve on ~130 rows per intent.
    for points in per_intent.values() {
        for p in points.iter().filter(|p| p.subset_percent >= 12.0) {
            assert!((p.exact_match - common::canonical(p.subset_percent)).abs() < 15.0);
        }
    }
    let annotations = ComplexityAnnotations {
        domain: "weather".into(),
        classes: per_intent.keys().map(|k| (k.clone(), ComplexityClass::Semi)).collect(),
    };
    let curves = per_class_curves(&per_intent, &annotations).unwrap();
    assert_eq!(curves[&ComplexityClass::Semi].len(), 10);
    assert!(curves[&ComplexityClass::Open].is_empty());
}
