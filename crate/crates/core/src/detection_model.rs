//! Per-step detection and false-alarm probabilities.
//!
//! A UAV raises an alarm when at least `M` of the `N` flags it collects are
//! positive. Sensors inside the detection ring report correctly with
//! probability `1 - ε`; the rest report a false positive with probability `ε`.
//! The count of positive flags is therefore the sum of two binomials, and the
//! detection probability averages that tail over the radial position of the
//! UAV inside its detection ring.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::{sensors_in_intersection, FireGeometry};
use crate::scalar::{floor_count, Scalar};
use crate::scenario::Scenario;

/// Probabilities that drive one transition of the chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepProbabilities<S> {
    pub k: usize,
    pub p_int: S,
    pub p_fa: S,
    pub p_d: S,
}

/// Number of radial points `I` of the conditional-detection quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureSpec {
    pub points: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { points: 200 }
    }
}

impl QuadratureSpec {
    pub fn new(points: usize) -> Result<Self> {
        if points < 2 {
            return Err(Error::invalid("quad_points", format!("must be >= 2, got {points}")));
        }
        Ok(Self { points })
    }

    pub fn doubled(self) -> Self {
        Self { points: self.points * 2 }
    }
}

/// `min(1, N_u A_u / A)`: chance that some UAV's coverage meets the ring.
pub fn p_intersection<S: Scalar>(scenario: &Scenario, geom: &FireGeometry<S>) -> S {
    let p = scenario.params();
    (S::of(p.num_uavs as f64) * geom.ring_area_km2 / S::of(p.forest_area_km2)).min(S::one())
}

fn ln_choose<S: Scalar>(n: usize, k: usize) -> S {
    let one = S::one();
    (S::of_usize(n) + one).ln_gamma() - (S::of_usize(k) + one).ln_gamma() - (S::of_usize(n - k) + one).ln_gamma()
}

// `m ln x` with the convention 0 · ln 0 = 0.
#[inline]
fn ln_pow<S: Scalar>(ln_x: S, m: usize) -> S {
    if m == 0 {
        S::zero()
    } else {
        S::of_usize(m) * ln_x
    }
}

/// Binomial probability mass, evaluated in log space.
pub fn binomial_pmf<S: Scalar>(n: usize, m: usize, p: S) -> S {
    if m > n {
        return S::zero();
    }
    let ln_p = p.ln();
    let ln_q = (S::one() - p).ln();
    (ln_choose::<S>(n, m) + ln_pow(ln_p, m) + ln_pow(ln_q, n - m)).exp()
}

/// `P(X ≥ m)` for `X ~ Bin(n, p)`, summing the upper terms.
pub fn binomial_tail_direct<S: Scalar>(n: usize, m: usize, p: S) -> S {
    (m..=n).map(|i| binomial_pmf(n, i, p)).sum::<S>().min(S::one())
}

/// `P(X ≥ m)` as one minus the lower cumulative mass.
pub fn binomial_tail_complement<S: Scalar>(n: usize, m: usize, p: S) -> S {
    if m == 0 {
        return S::one();
    }
    let lower: S = (0..m.min(n + 1)).map(|i| binomial_pmf(n, i, p)).sum();
    (S::one() - lower).max(S::zero())
}

/// `P(X ≥ m)`, choosing the shorter of the two sums.
pub fn binomial_tail<S: Scalar>(n: usize, m: usize, p: S) -> S {
    if m > n {
        S::zero()
    } else if 2 * m <= n {
        binomial_tail_complement(n, m, p)
    } else {
        binomial_tail_direct(n, m, p)
    }
}

/// False-alarm probability: no UAV meets the ring, yet the `N` flags, each
/// wrong with probability `ε`, contain at least `M` positives.
pub fn p_false_alarm<S: Scalar>(p_int: S, n: usize, m: usize, eps: S) -> Result<S> {
    if m > n {
        return Err(Error::domain(format!("flag threshold M = {m} exceeds N = {n}")));
    }
    if eps == S::zero() && m >= 1 {
        return Ok(S::zero());
    }
    Ok((S::one() - p_int) * binomial_tail(n, m, eps))
}

fn check_counts(n_in: usize, n_out: usize, m: usize) -> Result<()> {
    if m == 0 || m > n_in + n_out {
        return Err(Error::domain(format!(
            "flag threshold M = {m} outside 1..=N with N = n_in + n_out = {}",
            n_in + n_out
        )));
    }
    Ok(())
}

/// Alarm probability as the direct double sum over true-positive count
/// `m_in` and false-positive count `m_out ≥ max(0, M - m_in)`.
pub fn p_detect_direct<S: Scalar>(n_in: usize, n_out: usize, m: usize, eps: S) -> S {
    let one = S::one();
    let (ln_e, ln_q) = (eps.ln(), (one - eps).ln());
    let mut total = S::zero();
    for m_in in 0..=n_in {
        let a = (ln_choose::<S>(n_in, m_in) + ln_pow(ln_e, n_in - m_in) + ln_pow(ln_q, m_in)).exp();
        let lo = m.saturating_sub(m_in);
        let mut b = S::zero();
        for m_out in lo..=n_out {
            b += (ln_choose::<S>(n_out, m_out) + ln_pow(ln_e, m_out) + ln_pow(ln_q, n_out - m_out)).exp();
        }
        total += a * b;
    }
    total.min(one)
}

/// Alarm probability as one minus the mass of fewer than `M` positives.
/// Costs `O(M²)` terms.
pub fn p_detect_complement<S: Scalar>(n_in: usize, n_out: usize, m: usize, eps: S) -> S {
    let one = S::one();
    let (ln_e, ln_q) = (eps.ln(), (one - eps).ln());
    let mut miss = S::zero();
    for m_in in 0..=n_in.min(m - 1) {
        let a = (ln_choose::<S>(n_in, m_in) + ln_pow(ln_e, n_in - m_in) + ln_pow(ln_q, m_in)).exp();
        let hi = (m - 1 - m_in).min(n_out);
        let mut b = S::zero();
        for m_out in 0..=hi {
            b += (ln_choose::<S>(n_out, m_out) + ln_pow(ln_e, m_out) + ln_pow(ln_q, n_out - m_out)).exp();
        }
        miss += a * b;
    }
    (one - miss).max(S::zero())
}

/// `P(X_in + X_out ≥ M)` with `X_in ~ Bin(n_in, 1-ε)`, `X_out ~ Bin(n_out, ε)`.
///
/// `M = 1` and `ε = 0` take closed forms; otherwise the complement sum is
/// used for `M < N/2` and the direct sum above that.
pub fn p_detect_given_n_in<S: Scalar>(n_in: usize, n_out: usize, m: usize, eps: S) -> Result<S> {
    check_counts(n_in, n_out, m)?;
    if eps == S::zero() {
        return Ok(if n_in >= m { S::one() } else { S::zero() });
    }
    if m == 1 {
        let miss = (ln_pow(eps.ln(), n_in) + ln_pow((S::one() - eps).ln(), n_out)).exp();
        return Ok(S::one() - miss);
    }
    Ok(general_detect(n_in, n_out, m, eps))
}

fn general_detect<S: Scalar>(n_in: usize, n_out: usize, m: usize, eps: S) -> S {
    if 2 * m < n_in + n_out {
        p_detect_complement(n_in, n_out, m, eps)
    } else {
        p_detect_direct(n_in, n_out, m, eps)
    }
}

/// Quadrature nodes over the UAV detection ring: for `i = 2..=I`, the
/// annulus weight `(r_i² - r_{i-1}²) / (R̄_u² - R̲_u²)` and the sensor count
/// `n_in(r_i)`, with `r_i = R̲_u + (R̄_u - R̲_u) i / I`.
pub fn quadrature_nodes<'a, S: Scalar>(
    scenario: &'a Scenario,
    geom: &'a FireGeometry<S>,
    quad: QuadratureSpec,
) -> impl Iterator<Item = (S, usize)> + 'a {
    let lo = geom.r_u_inner_m;
    let hi = geom.r_u_outer_m;
    let denom = hi * hi - lo * lo;
    let count = S::of_usize(quad.points);
    let radius = move |i: usize| lo + (hi - lo) * S::of_usize(i) / count;
    (2..=quad.points).map(move |i| {
        let (r, prev) = (radius(i), radius(i - 1));
        ((r * r - prev * prev) / denom, sensors_in_intersection(scenario, geom, r))
    })
}

/// Radial quadrature of the conditional detection probability,
/// `Σ_i w_i f(n_in(r_i))` over [`quadrature_nodes`].
pub fn conditional_detection<S, F>(scenario: &Scenario, geom: &FireGeometry<S>, quad: QuadratureSpec, mut f: F) -> Result<S>
where
    S: Scalar,
    F: FnMut(usize) -> Result<S>,
{
    let mut total = S::zero();
    for (w, n_in) in quadrature_nodes(scenario, geom, quad) {
        total += w * f(n_in)?;
    }
    Ok(total.min(S::one()))
}

/// Conditional detection given intersection, evaluating the alarm
/// probability afresh at every quadrature point.
pub fn p_detect_given_intersection<S: Scalar>(scenario: &Scenario, geom: &FireGeometry<S>, quad: QuadratureSpec) -> Result<S> {
    let n = scenario.collected_per_hover();
    let m = scenario.flag_threshold();
    let eps = S::of(scenario.epsilon());
    conditional_detection(scenario, geom, quad, |n_in| p_detect_given_n_in(n_in, n - n_in, m, eps))
}

/// Fraction of the UAV detection ring where the coverage disk holds at least
/// one ring sensor on average. Equals the conditional detection probability
/// in the limit of many quadrature points when `ε = 0` and `M = 1`.
pub fn effective_annulus_ratio(scenario: &Scenario, geom: &FireGeometry<f64>) -> f64 {
    let lambda_m2 = scenario.params().sensor_density_per_km2 / 1.0e6;
    let hit = |r: f64| floor_count(lambda_m2 * geom.a_in(r)) >= 1;
    let (lo, hi) = (geom.r_u_inner_m, geom.r_u_outer_m);
    const SCAN: usize = 4096;
    let at = |i: usize| lo + (hi - lo) * i as f64 / SCAN as f64;
    let Some(first) = (0..=SCAN).find(|&i| hit(at(i))) else {
        return 0.0;
    };
    let last = (0..=SCAN).rev().find(|&i| hit(at(i))).unwrap_or(first);
    let refine = |mut inside: f64, mut outside: f64| {
        for _ in 0..200 {
            let mid = 0.5 * (inside + outside);
            if mid == inside || mid == outside {
                break;
            }
            if hit(mid) {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        inside
    };
    let r_lo = if first == 0 { lo } else { refine(at(first), at(first - 1)) };
    let r_hi = if last == SCAN { hi } else { refine(at(last), at(last + 1)) };
    (r_hi * r_hi - r_lo * r_lo) / (hi * hi - lo * lo)
}

/// Assembles `P_int`, `P_fa` and `P_d = P_int · P_d|int` at step `k ≥ 1`.
pub fn step_probabilities<S: Scalar>(scenario: &Scenario, k: usize, quad: QuadratureSpec) -> Result<StepProbabilities<S>> {
    if k == 0 {
        return Err(Error::domain("step probabilities are defined for k >= 1"));
    }
    let geom = FireGeometry::<S>::at(scenario, k);
    let p_int = p_intersection(scenario, &geom);
    let n = scenario.collected_per_hover();
    let m = scenario.flag_threshold();
    let p_fa = p_false_alarm(p_int, n, m, S::of(scenario.epsilon()))?;
    let p_d = if p_int == S::zero() {
        S::zero()
    } else {
        p_int * p_detect_given_intersection(scenario, &geom, quad)?
    };
    Ok(StepProbabilities { k, p_int, p_fa, p_d })
}

/// Quadrature weights of each step grouped by sensor count.
///
/// Depends on the sensor layer and the geometry only, so one table serves
/// every threshold `M`, flag error and fleet size.
#[derive(Debug, Clone)]
pub struct RingWeights<S> {
    /// For `k = 1..=steps`: `(n_in, total weight)` sorted by `n_in`.
    pub per_step: Vec<Vec<(usize, S)>>,
    /// Ring area `A_u[k]` in km², `k = 1..=steps`.
    pub ring_area_km2: Vec<S>,
}

impl<S: Scalar> RingWeights<S> {
    pub fn new(scenario: &Scenario, quad: QuadratureSpec, steps: usize) -> Result<Self> {
        let mut per_step = Vec::with_capacity(steps);
        let mut ring_area_km2 = Vec::with_capacity(steps);
        for k in 1..=steps {
            let geom = FireGeometry::<S>::at(scenario, k);
            let mut bins: Vec<(usize, S)> = Vec::new();
            for (w, n_in) in quadrature_nodes(scenario, &geom, quad) {
                match bins.binary_search_by_key(&n_in, |b| b.0) {
                    Ok(j) => bins[j].1 += w,
                    Err(j) => bins.insert(j, (n_in, w)),
                }
            }
            per_step.push(bins);
            ring_area_km2.push(geom.ring_area_km2);
        }
        Ok(Self { per_step, ring_area_km2 })
    }

    pub fn steps(&self) -> usize {
        self.per_step.len()
    }
}

/// Step quantities that do not depend on the fleet size.
///
/// The conditional detection probability and the false-alarm binomial tail
/// depend on the sensor layer and `M` only, so one profile serves every
/// `N_u`. Alarm probabilities are evaluated once per distinct `n_in`.
#[derive(Debug, Clone)]
pub struct ConditionalProfile<S> {
    /// `P_d|int[k]` for `k = 1..=steps`.
    pub conditional: Vec<S>,
    /// Ring area `A_u[k]` in km², `k = 1..=steps`.
    pub ring_area_km2: Vec<S>,
    /// `P(at least M of N flags positive)` with every flag false.
    pub false_tail: S,
}

impl<S: Scalar> ConditionalProfile<S> {
    pub fn new(scenario: &Scenario, quad: QuadratureSpec, steps: usize) -> Result<Self> {
        let weights = RingWeights::new(scenario, quad, steps)?;
        Self::from_weights(&weights, scenario.collected_per_hover(), scenario.flag_threshold(), S::of(scenario.epsilon()))
    }

    /// Profile for threshold `m` and flag error `eps` over precomputed
    /// weights of a layer that collects `n` observations per hover.
    pub fn from_weights(weights: &RingWeights<S>, n: usize, m: usize, eps: S) -> Result<Self> {
        let false_tail = if eps == S::zero() {
            S::zero()
        } else if m > n {
            return Err(Error::domain(format!("flag threshold M = {m} exceeds N = {n}")));
        } else {
            binomial_tail(n, m, eps)
        };
        let mut memo: HashMap<usize, S> = HashMap::new();
        let mut conditional = Vec::with_capacity(weights.steps());
        for bins in &weights.per_step {
            let mut c = S::zero();
            for &(n_in, w) in bins {
                let v = match memo.get(&n_in) {
                    Some(&v) => v,
                    None => {
                        let v = p_detect_given_n_in(n_in, n - n_in, m, eps)?;
                        memo.insert(n_in, v);
                        v
                    }
                };
                c += w * v;
            }
            conditional.push(c.min(S::one()));
        }
        Ok(Self {
            conditional,
            ring_area_km2: weights.ring_area_km2.clone(),
            false_tail,
        })
    }

    pub fn steps(&self) -> usize {
        self.conditional.len()
    }

    /// Step probabilities for a fleet of `num_uavs` over a forest of
    /// `forest_area_km2`, for the first `steps` steps.
    pub fn step_probabilities(&self, num_uavs: u32, forest_area_km2: f64, steps: usize) -> Vec<StepProbabilities<S>> {
        let nu = S::of(num_uavs as f64);
        let area = S::of(forest_area_km2);
        self.conditional
            .iter()
            .zip(&self.ring_area_km2)
            .take(steps)
            .enumerate()
            .map(|(i, (&c, &a_u))| {
                let p_int = (nu * a_u / area).min(S::one());
                StepProbabilities {
                    k: i + 1,
                    p_int,
                    p_fa: (S::one() - p_int) * self.false_tail,
                    p_d: p_int * c,
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::load_scenario;

    #[test]
    fn intersection_at_ignition() {
        let s = load_scenario("{}").unwrap();
        let g = FireGeometry::<f64>::at(&s, 0);
        let expected = 10.0 * std::f64::consts::PI * 0.25 / 400.0;
        assert!((p_intersection(&s, &g) - expected).abs() < 1e-15);
        assert!((expected - 0.0196).abs() < 1e-4);
    }

    #[test]
    fn intersection_clamps_and_vanishes() {
        let none = load_scenario(r#"{"num_uavs": 0}"#).unwrap();
        let g = FireGeometry::<f64>::at(&none, 5);
        assert_eq!(p_intersection(&none, &g), 0.0);
        let many = load_scenario(r#"{"num_uavs": 100000}"#).unwrap();
        assert_eq!(p_intersection(&many, &FireGeometry::<f64>::at(&many, 5)), 1.0);
    }

    #[test]
    fn false_alarm_examples() {
        assert_eq!(p_false_alarm(0.3f64, 90, 4, 0.0).unwrap(), 0.0);
        let m1 = p_false_alarm(0.3f64, 90, 1, 0.1).unwrap();
        assert!((m1 - 0.7 * (1.0 - 0.9f64.powi(90))).abs() < 1e-13);
        assert!((p_false_alarm(0.0f64, 3, 2, 0.1).unwrap() - 0.028).abs() < 1e-14);
        assert!(p_false_alarm(0.0f64, 3, 4, 0.1).is_err());
    }

    #[test]
    fn tail_forms_agree() {
        for n in 0..=30 {
            for m in 0..=n {
                for eps in [0.01f64, 0.1, 0.3] {
                    let d = binomial_tail_direct(n, m, eps);
                    let c = binomial_tail_complement(n, m, eps);
                    assert!((d - c).abs() < 1e-12, "n={n} m={m} eps={eps}: {d} vs {c}");
                }
            }
        }
    }

    #[test]
    fn detect_examples() {
        assert_eq!(p_detect_given_n_in(0, 90, 1, 0.0f64).unwrap(), 0.0);
        assert_eq!(p_detect_given_n_in(3, 87, 1, 0.0f64).unwrap(), 1.0);
        let v = p_detect_given_n_in(5, 10, 1, 0.1f64).unwrap();
        assert!((v - (1.0 - 0.1f64.powi(5) * 0.9f64.powi(10))).abs() < 1e-15);
        let w = p_detect_given_n_in(2, 1, 2, 0.1f64).unwrap();
        assert!((w - 0.828).abs() < 1e-14);
        assert!(p_detect_given_n_in(2, 1, 4, 0.1f64).is_err());
        assert!(p_detect_given_n_in(2, 1, 0, 0.1f64).is_err());
    }

    #[test]
    fn fast_paths_match_general_forms() {
        for n_in in 0..=20 {
            let n_out = 20 - n_in;
            let fast = p_detect_given_n_in(n_in, n_out, 1, 0.2f64).unwrap();
            assert!((fast - p_detect_direct(n_in, n_out, 1, 0.2)).abs() < 1e-12);
            assert!((fast - p_detect_complement(n_in, n_out, 1, 0.2)).abs() < 1e-12);
            for m in 1..=20 {
                let exact = p_detect_given_n_in(n_in, n_out, m, 0.0f64).unwrap();
                assert!((exact - p_detect_direct(n_in, n_out, m, 0.0)).abs() < 1e-12);
                assert!((exact - p_detect_complement(n_in, n_out, m, 0.0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn quadrature_weights_cover_the_ring() {
        let s = load_scenario("{}").unwrap();
        for points in [2, 10, 200] {
            let g = FireGeometry::<f64>::at(&s, 7);
            let total = conditional_detection(&s, &g, QuadratureSpec::new(points).unwrap(), |_| Ok(1.0)).unwrap();
            assert!(total >= 1.0 - 2.0 / points as f64 - 1e-12, "I={points}: {total}");
            assert!(total <= 1.0);
        }
        assert!(QuadratureSpec::new(1).is_err());
    }

    #[test]
    fn quadrature_doubling_is_stable() {
        let s = load_scenario("{}").unwrap();
        for k in [1, 10, 46] {
            let g = FireGeometry::<f64>::at(&s, k);
            let q = QuadratureSpec::default();
            let a = p_detect_given_intersection(&s, &g, q).unwrap();
            let b = p_detect_given_intersection(&s, &g, q.doubled()).unwrap();
            assert!((a - b).abs() < 1e-3, "k={k}: {a} vs {b}");
        }
    }

    #[test]
    fn noiseless_single_flag_matches_effective_annulus() {
        let s = load_scenario(r#"{"combined_error": 0.0}"#).unwrap();
        for k in [1, 10, 46] {
            let g = FireGeometry::<f64>::at(&s, k);
            let ratio = effective_annulus_ratio(&s, &g);
            let quad = p_detect_given_intersection(&s, &g, QuadratureSpec::new(20_000).unwrap()).unwrap();
            assert!((ratio - quad).abs() < 1e-3, "k={k}: {ratio} vs {quad}");
        }
    }

    #[test]
    fn dense_network_conditional_tends_to_one() {
        let s = load_scenario(r#"{"combined_error": 0.0, "sensor_density_per_km2": 100000.0, "obs_time_s": 0.0001}"#).unwrap();
        let g = FireGeometry::<f64>::at(&s, 3);
        let c = p_detect_given_intersection(&s, &g, QuadratureSpec::default()).unwrap();
        assert!(c > 0.98, "{c}");
    }

    #[test]
    fn step_probability_bounds() {
        let s = load_scenario("{}").unwrap();
        for k in [1, 20, 46] {
            let p = step_probabilities::<f64>(&s, k, QuadratureSpec::default()).unwrap();
            assert!(p.p_d <= p.p_int);
            assert!(p.p_fa <= 1.0 - p.p_int + 1e-15);
            assert!(p.p_d + p.p_fa <= 1.0);
        }
        assert!(step_probabilities::<f64>(&s, 0, QuadratureSpec::default()).is_err());

        let quiet = load_scenario(r#"{"combined_error": 0.0}"#).unwrap();
        assert_eq!(step_probabilities::<f64>(&quiet, 5, QuadratureSpec::default()).unwrap().p_fa, 0.0);

        let grounded = load_scenario(r#"{"num_uavs": 0}"#).unwrap();
        let p = step_probabilities::<f64>(&grounded, 5, QuadratureSpec::default()).unwrap();
        assert_eq!(p.p_d, 0.0);
        assert!((p.p_fa - binomial_tail(90, 1, 0.1)).abs() < 1e-15);
    }

    #[test]
    fn profile_matches_direct_evaluation() {
        let s = load_scenario(r#"{"flag_threshold": 6}"#).unwrap();
        let quad = QuadratureSpec::default();
        let profile = ConditionalProfile::<f64>::new(&s, quad, s.critical_steps()).unwrap();
        let fast = profile.step_probabilities(10, 400.0, s.critical_steps());
        for sp in fast.iter().step_by(9) {
            let slow = step_probabilities::<f64>(&s, sp.k, quad).unwrap();
            assert!((sp.p_d - slow.p_d).abs() < 1e-12);
            assert!((sp.p_fa - slow.p_fa).abs() < 1e-12);
            assert!((sp.p_int - slow.p_int).abs() < 1e-15);
        }
    }

    #[test]
    fn single_precision_tracks_double() {
        let s = load_scenario(r#"{"flag_threshold": 4}"#).unwrap();
        let a = step_probabilities::<f32>(&s, 20, QuadratureSpec::default()).unwrap();
        let b = step_probabilities::<f64>(&s, 20, QuadratureSpec::default()).unwrap();
        assert!((a.p_d as f64 - b.p_d).abs() < 1e-4);
    }
}
