mod common;

use std::f64::consts::PI;

use pyrewatch_core::detection_model::{
    binomial_tail_complement, binomial_tail_direct, p_detect_complement, p_detect_direct, p_detect_given_n_in,
    p_false_alarm,
};
use pyrewatch_core::geometry::circle_intersection_area;
use pyrewatch_core::link_budget::bpsk_ber;
use pyrewatch_core::{load_scenario, FireGeometry64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn lens_area_matches_integration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..300 {
        let r1 = rng.random_range(0.1..100.0);
        let r2 = rng.random_range(0.1..100.0);
        let d = rng.random_range(0.0..1.2 * (r1 + r2));
        let exact = circle_intersection_area(r1, r2, d);
        let oracle = common::lens_by_integration(r1, r2, d);
        let scale = PI * r1.min(r2).powi(2);
        assert!((exact - oracle).abs() <= 1e-6 * scale, "r1={r1} r2={r2} d={d}: {exact} vs {oracle}");
    }
}

#[test]
fn lens_area_limits_are_exact() {
    for (r1, r2) in [(1.0, 2.0), (3.0, 3.0), (250.0, 40.0)] {
        let small = PI * f64::min(r1, r2).powi(2);
        assert_eq!(circle_intersection_area(r1, r2, 0.0), small);
        assert_eq!(circle_intersection_area(r1, r2, f64::abs(r1 - r2)), small);
        assert_eq!(circle_intersection_area(r1, r2, r1 + r2), 0.0);
        assert_eq!(circle_intersection_area(r1, r2, 2.0 * (r1 + r2)), 0.0);
    }
}

#[test]
fn ring_overlap_matches_grid_count() {
    let s = load_scenario("{}").unwrap();
    for k in [1, 10, 46] {
        let g = FireGeometry64::at(&s, k);
        for frac in [0.05, 0.3, 0.6, 0.9] {
            let d = g.r_u_inner_m + frac * (g.r_u_outer_m - g.r_u_inner_m);
            let oracle = common::ring_overlap_by_grid(g.r_fire_m, g.r_sense_m, g.r_hov_m, d, 1200);
            let exact = g.a_in(d);
            let cell = (2.0 * g.r_hov_m / 1200.0).powi(2);
            // Boundary cells: perimeter of the region over the cell side.
            let slack = 4.0 * PI * (g.r_sense_m + g.r_hov_m) * cell.sqrt() + cell;
            assert!((exact - oracle).abs() <= slack, "k={k} d={d}: {exact} vs {oracle}");
        }
    }
}

#[test]
fn detection_forms_match_enumeration() {
    for n in 1..=10 {
        for eps in [0.01, 0.1, 0.3] {
            for n_in in 0..=n {
                let dist = common::flag_count_by_enumeration(n_in, n - n_in, eps);
                for m in 1..=n {
                    let want = common::tail(&dist, m);
                    let direct = p_detect_direct(n_in, n - n_in, m, eps);
                    let comp = p_detect_complement(n_in, n - n_in, m, eps);
                    let auto = p_detect_given_n_in(n_in, n - n_in, m, eps).unwrap();
                    for got in [direct, comp, auto] {
                        assert!((got - want).abs() <= 1e-12, "n={n} n_in={n_in} m={m} eps={eps}: {got} vs {want}");
                    }
                }
            }
        }
    }
}

#[test]
fn false_alarm_matches_enumeration() {
    for n in 1..=10 {
        for eps in [0.01, 0.1, 0.3] {
            let dist = common::flag_count_by_enumeration(0, n, eps);
            for m in 1..=n {
                let want = common::tail(&dist, m);
                assert!((binomial_tail_direct(n, m, eps) - want).abs() <= 1e-12);
                assert!((binomial_tail_complement(n, m, eps) - want).abs() <= 1e-12);
                for p_int in [0.0, 0.25, 1.0] {
                    let got = p_false_alarm(p_int, n, m, eps).unwrap();
                    assert!((got - (1.0 - p_int) * want).abs() <= 1e-12);
                }
            }
        }
    }
}

#[test]
fn bpsk_matches_gaussian_tail() {
    for snr_db in [0.0f64, 3.0, 5.0, 7.5, 10.0] {
        let snr = 10f64.powf(snr_db / 10.0);
        let want = common::q_function((2.0 * snr).sqrt());
        let got = bpsk_ber(snr);
        assert!((got - want).abs() <= 1e-9 * want, "{snr_db} dB: {got} vs {want}");
    }
}

#[test]
fn reference_step_count_by_integer_arithmetic() {
    // T = 90 × 0.1 s + 30 s = 39 s; T_f = 1800 s.
    assert_eq!(common::steps_within_centis(180_000, 3_900), 46);
    assert_eq!(load_scenario("{}").unwrap().critical_steps(), 46);
}
