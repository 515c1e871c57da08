use pyrewatch_core::detection_model::step_probabilities;
use pyrewatch_core::monte_carlo::{run_trials, single_step_frequency, BoundaryMode, TrialConfig};
use pyrewatch_core::{load_scenario, QuadratureSpec};

fn run_in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn single_step_frequencies_match_step_probabilities() {
    let s = load_scenario("{}").unwrap();
    let cfg = TrialConfig::new(s.clone(), 1, 99);
    for k in [10, 46] {
        let f = single_step_frequency(&cfg, k, 100_000).unwrap();
        let p = step_probabilities::<f64>(&s, k, QuadratureSpec::default()).unwrap();
        assert!((f.p_d - p.p_d).abs() <= 0.01, "k={k}: p_d {} vs {}", f.p_d, p.p_d);
        assert!((f.p_fa - p.p_fa).abs() <= 0.01, "k={k}: p_fa {} vs {}", f.p_fa, p.p_fa);
    }
}

#[test]
fn outcomes_do_not_depend_on_worker_count() {
    let s = load_scenario(r#"{"flag_threshold": 4}"#).unwrap();
    let cfg = TrialConfig::new(s, 300, 2024);
    let one = run_in_pool(1, || run_trials(&cfg).unwrap());
    let three = run_in_pool(3, || run_trials(&cfg).unwrap());
    assert_eq!(one, three);
}

#[test]
fn empirical_curve_is_monotone() {
    let s = load_scenario("{}").unwrap();
    let mut cfg = TrialConfig::new(s, 500, 5);
    cfg.boundary = BoundaryMode::Torus;
    let curve = run_trials(&cfg).unwrap();
    let pi = curve.pi_hat();
    assert_eq!(pi.len(), 46);
    assert!(pi.windows(2).all(|w| w[1] >= w[0]));
    assert!(curve.ci_halfwidth().iter().all(|&h| h > 0.0 && h < 0.1));
}

#[test]
fn too_small_forest_needs_torus() {
    let s = load_scenario(r#"{"forest_area_km2": 4.0, "num_uavs": 1}"#).unwrap();
    let cfg = TrialConfig::new(s, 10, 1);
    assert!(run_trials(&cfg).is_err());
    let mut torus = cfg.clone();
    torus.boundary = BoundaryMode::Torus;
    assert!(run_trials(&torus).is_ok());
}
