//! Sensor-to-UAV link quality and altitude design.
//!
//! Air-to-ground channel with an elevation-dependent line-of-sight
//! probability, coherent BPSK over the mean-SNR AWGN abstraction, and an
//! odd-length repetition code with majority decoding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Radio and environment constants of the sensor uplink.
///
/// Power and noise are in dBm, excess path losses in dB. `env_a` and `env_b`
/// are the elevation-model constants (suburban: 4.88 and 0.43).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelParams {
    pub tx_power_dbm: f64,
    pub noise_dbm: f64,
    pub path_loss_exp: f64,
    pub eta_los_db: f64,
    pub eta_nlos_db: f64,
    pub env_a: f64,
    pub env_b: f64,
    pub repetitions: u32,
    pub sensing_error: f64,
    pub target_edge_snr_db: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            tx_power_dbm: 10.0,
            noise_dbm: -90.0,
            path_loss_exp: 2.0,
            eta_los_db: 0.1,
            eta_nlos_db: 21.0,
            env_a: 4.88,
            env_b: 0.43,
            repetitions: 1,
            sensing_error: 0.0,
            target_edge_snr_db: 5.0,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("channel.tx_power_dbm", self.tx_power_dbm),
            ("channel.noise_dbm", self.noise_dbm),
            ("channel.eta_los_db", self.eta_los_db),
            ("channel.eta_nlos_db", self.eta_nlos_db),
            ("channel.target_edge_snr_db", self.target_edge_snr_db),
        ];
        for (field, v) in finite {
            if !v.is_finite() {
                return Err(Error::invalid(field, "must be finite"));
            }
        }
        if !(self.path_loss_exp.is_finite() && self.path_loss_exp > 0.0) {
            return Err(Error::invalid("channel.path_loss_exp", "must be > 0"));
        }
        if !(self.env_a > 0.0 && self.env_a.is_finite()) {
            return Err(Error::invalid("channel.env_a", "must be > 0"));
        }
        if !(self.env_b > 0.0 && self.env_b.is_finite()) {
            return Err(Error::invalid("channel.env_b", "must be > 0"));
        }
        if self.eta_nlos_db < self.eta_los_db {
            return Err(Error::invalid(
                "channel.eta_nlos_db",
                "must be >= eta_los_db",
            ));
        }
        if self.repetitions == 0 || self.repetitions.is_multiple_of(2) {
            return Err(Error::invalid(
                "channel.repetitions",
                "must be an odd positive integer",
            ));
        }
        if !(0.0..=0.5).contains(&self.sensing_error) {
            return Err(Error::invalid("channel.sensing_error", "must lie in [0, 0.5]"));
        }
        Ok(())
    }

    /// Combined flag error when the coverage edge sits exactly at the
    /// target SNR (the worst point of the coverage disk).
    pub fn edge_combined_error<S: Scalar>(&self) -> Result<S> {
        let ber = bpsk_ber(db_to_linear(S::of(self.target_edge_snr_db)));
        let eps_t = repetition_error(ber, self.repetitions)?;
        Ok(combined_error(S::of(self.sensing_error), eps_t))
    }
}

/// Per-geometry link summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkQuality<S> {
    pub snr_linear: S,
    pub p_los: S,
    pub ber_bpsk: S,
    pub eps_t: S,
    pub eps_combined: S,
}

/// UAV altitude maximizing the coverage radius for a target edge SNR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AltitudeDesign<S> {
    pub h_opt_m: S,
    pub r_hov_max_m: S,
    pub edge_snr_linear: S,
}

pub fn db_to_linear<S: Scalar>(db: S) -> S {
    S::of(10.0).powf(db / S::of(10.0))
}

pub fn linear_to_db<S: Scalar>(x: S) -> S {
    S::of(10.0) * x.log10()
}

/// Line-of-sight probability for a UAV at height `h_m` and slant distance
/// `w_m`; the elevation angle enters in degrees.
pub fn los_probability<S: Scalar>(h_m: S, w_m: S, env_a: S, env_b: S) -> Result<S> {
    if !(h_m > S::zero()) {
        return Err(Error::domain("UAV height must be positive"));
    }
    if h_m > w_m {
        return Err(Error::domain(format!(
            "slant distance {w_m} m is shorter than height {h_m} m"
        )));
    }
    let theta_deg = (h_m / w_m).min(S::one()).asin().to_degrees();
    Ok(S::one() / (S::one() + env_a * (-env_b * (theta_deg - env_a)).exp()))
}

/// Mean received SNR (linear) at slant distance `w_m` from a UAV at `h_m`.
pub fn average_snr<S: Scalar>(params: &ChannelParams, h_m: S, w_m: S) -> Result<S> {
    if !(w_m > S::zero()) {
        return Err(Error::domain("sensor-UAV distance must be positive"));
    }
    let p_los = los_probability(h_m, w_m, S::of(params.env_a), S::of(params.env_b))?;
    Ok(snr_with_los(params, w_m, p_los))
}

fn snr_with_los<S: Scalar>(params: &ChannelParams, w_m: S, p_los: S) -> S {
    let budget = db_to_linear(S::of(params.tx_power_dbm - params.noise_dbm));
    let eta_los = db_to_linear(S::of(params.eta_los_db));
    let eta_nlos = db_to_linear(S::of(params.eta_nlos_db));
    budget * w_m.powf(-S::of(params.path_loss_exp)) * (p_los / eta_los + (S::one() - p_los) / eta_nlos)
}

/// Coherent BPSK bit error probability `Q(sqrt(2 snr))`.
pub fn bpsk_ber<S: Scalar>(snr_linear: S) -> S {
    let snr = snr_linear.max(S::zero());
    S::of(0.5) * snr.sqrt().erfc()
}

/// Majority-decoding failure of a `gamma`-fold repetition code.
pub fn repetition_error<S: Scalar>(ber: S, gamma: u32) -> Result<S> {
    if gamma == 0 || gamma.is_multiple_of(2) {
        return Err(Error::domain(format!(
            "repetition count must be odd and positive, got {gamma}"
        )));
    }
    let n = gamma as usize;
    let first = n.div_ceil(2);
    let q = S::one() - ber;
    let mut coeff = S::one();
    // C(n, i) built incrementally from C(n, 0).
    let mut total = S::zero();
    for i in 0..=n {
        if i >= first {
            total += coeff * ber.powi(i as i32) * q.powi((n - i) as i32);
        }
        coeff = coeff * S::of_usize(n - i) / S::of_usize(i + 1);
    }
    Ok(total)
}

/// Probability that a flag is wrong after independent sensing and
/// transmission errors.
pub fn combined_error<S: Scalar>(eps_s: S, eps_t: S) -> S {
    eps_s * (S::one() - eps_t) + (S::one() - eps_s) * eps_t
}

pub fn link_quality<S: Scalar>(params: &ChannelParams, h_m: S, w_m: S) -> Result<LinkQuality<S>> {
    let p_los = los_probability(h_m, w_m, S::of(params.env_a), S::of(params.env_b))?;
    let snr_linear = snr_with_los(params, w_m, p_los);
    let ber_bpsk = bpsk_ber(snr_linear);
    let eps_t = repetition_error(ber_bpsk, params.repetitions)?;
    Ok(LinkQuality {
        snr_linear,
        p_los,
        ber_bpsk,
        eps_t,
        eps_combined: combined_error(S::of(params.sensing_error), eps_t),
    })
}

const H_MIN_M: f64 = 1.0;
const H_MAX_M: f64 = 100_000.0;
const R_CAP_M: f64 = 1.0e8;

/// Largest ground radius whose edge SNR still meets `target_linear` for a
/// UAV at `h_m`; zero when even the point directly below misses it.
pub fn max_radius_at<S: Scalar>(params: &ChannelParams, h_m: S, target_linear: S) -> Result<S> {
    let edge = |r: S| average_snr(params, h_m, (h_m * h_m + r * r).sqrt());
    if edge(S::zero())? < target_linear {
        return Ok(S::zero());
    }
    let mut lo = S::zero();
    let mut hi = h_m.max(S::one());
    while edge(hi)? >= target_linear {
        lo = hi;
        hi *= S::of(2.0);
        if hi > S::of(R_CAP_M) {
            return Err(Error::Numerical(
                "edge SNR does not fall below the target within 1e8 m".into(),
            ));
        }
    }
    let tol = S::epsilon() * S::of(8.0);
    for _ in 0..300 {
        let mid = S::of(0.5) * (lo + hi);
        if mid <= lo || mid >= hi || (hi - lo) <= tol * hi {
            break;
        }
        if edge(mid)? >= target_linear {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Coverage radius against altitude, for plotting.
pub fn altitude_sweep<S: Scalar>(
    params: &ChannelParams,
    target_snr_db: S,
    heights_m: &[S],
) -> Result<Vec<(S, S)>> {
    let target = db_to_linear(target_snr_db);
    heights_m
        .iter()
        .map(|&h| Ok((h, max_radius_at(params, h, target)?)))
        .collect()
}

/// Altitude in [1 m, 100 km] that maximizes the coverage radius meeting
/// `target_snr_db` at the edge.
///
/// A log-spaced scan brackets the peak, then golden-section search refines
/// it; each evaluation bisects for the radius.
pub fn optimize_altitude<S: Scalar>(params: &ChannelParams, target_snr_db: S) -> Result<AltitudeDesign<S>> {
    params.validate()?;
    let target = db_to_linear(target_snr_db);
    let radius = |h: S| max_radius_at(params, h, target);

    const SCAN: usize = 97;
    let (lmin, lmax) = (S::of(H_MIN_M).ln(), S::of(H_MAX_M).ln());
    let step = (lmax - lmin) / S::of_usize(SCAN - 1);
    let hs: Vec<S> = (0..SCAN).map(|i| (lmin + step * S::of_usize(i)).exp()).collect();
    let mut best = 0;
    let mut best_r = S::neg_infinity();
    for (i, &h) in hs.iter().enumerate() {
        let r = radius(h)?;
        if r > best_r {
            best_r = r;
            best = i;
        }
    }
    if !(best_r > S::zero()) {
        return Err(Error::Infeasible(format!(
            "target edge SNR {target_snr_db} dB is not attainable at any altitude in [1 m, 100 km]"
        )));
    }

    let mut a = hs[best.saturating_sub(1)];
    let mut b = hs[(best + 1).min(SCAN - 1)];
    let inv_phi = S::of((5f64.sqrt() - 1.0) / 2.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut rc = radius(c)?;
    let mut rd = radius(d)?;
    let tol = S::epsilon().sqrt() * S::of(4.0);
    for _ in 0..200 {
        if (b - a) <= tol * (a.abs() + b.abs()) {
            break;
        }
        if rc >= rd {
            b = d;
            d = c;
            rd = rc;
            c = b - inv_phi * (b - a);
            rc = radius(c)?;
        } else {
            a = c;
            c = d;
            rc = rd;
            d = a + inv_phi * (b - a);
            rd = radius(d)?;
        }
    }
    let (mut h_opt, mut r_opt) = if rc >= rd { (c, rc) } else { (d, rd) };
    // The golden bracket never shrinks below the scan optimum.
    if best_r > r_opt {
        h_opt = hs[best];
        r_opt = best_r;
    }
    let w = (h_opt * h_opt + r_opt * r_opt).sqrt();
    Ok(AltitudeDesign {
        h_opt_m: h_opt,
        r_hov_max_m: r_opt,
        edge_snr_linear: average_snr(params, h_opt, w)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: f64 = 4.88;
    const B: f64 = 0.43;

    #[test]
    fn los_overhead_is_essentially_one() {
        let p = los_probability(100.0, 100.0, A, B).unwrap();
        let expected = 1.0 / (1.0 + A * (-B * (90.0 - A)).exp());
        assert!((p - expected).abs() < 1e-16);
        assert!((1.0 - p).abs() < 1e-15);
    }

    #[test]
    fn los_grazing_limit() {
        let p = los_probability(1e-9, 1e3, A, B).unwrap();
        let limit = 1.0 / (1.0 + A * (A * B).exp());
        assert!((p - limit).abs() < 1e-9);
        assert!((limit - 0.0245).abs() < 2e-4);
    }

    #[test]
    fn los_without_elevation_dependence() {
        for h in [1.0, 50.0, 300.0] {
            let p = los_probability(h, 400.0, A, 0.0).unwrap();
            assert!((p - 1.0 / (1.0 + A)).abs() < 1e-15);
        }
    }

    #[test]
    fn los_rejects_height_above_distance() {
        assert!(los_probability(10.0, 5.0, A, B).is_err());
        assert!(los_probability(0.0, 5.0, A, B).is_err());
    }

    #[test]
    fn snr_power_law_at_fixed_los() {
        let mut p = ChannelParams::default();
        p.eta_nlos_db = p.eta_los_db;
        let s1: f64 = average_snr(&p, 50.0, 200.0).unwrap();
        let s2 = average_snr(&p, 50.0, 400.0).unwrap();
        assert!((s1 / s2 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn snr_independent_of_los_when_losses_match() {
        let mut p = ChannelParams::default();
        p.eta_nlos_db = p.eta_los_db;
        let w = 500.0f64;
        let low = average_snr(&p, 10.0, w).unwrap();
        let high = average_snr(&p, 490.0, w).unwrap();
        assert!((low / high - 1.0).abs() < 1e-12);
    }

    #[test]
    fn snr_decreases_with_distance() {
        let p = ChannelParams::default();
        let mut prev = f64::INFINITY;
        for i in 0..200 {
            let w = 100.0 + 50.0 * i as f64;
            let s = average_snr(&p, 100.0, w).unwrap();
            assert!(s < prev);
            prev = s;
        }
    }

    #[test]
    fn bpsk_reference_points() {
        let at = |db: f64| bpsk_ber(db_to_linear(db));
        assert!((at(10.0) / 3.9e-6 - 1.0).abs() < 0.02);
        assert!((at(5.0) / 6e-3 - 1.0).abs() < 0.05);
        assert!((at(0.0) / 7.86e-2 - 1.0).abs() < 0.01);
        assert_eq!(bpsk_ber(0.0f64), 0.5);
    }

    #[test]
    fn repetition_hand_values() {
        assert_eq!(repetition_error(0.2f64, 1).unwrap(), 0.2);
        assert_eq!(repetition_error(0.0f64, 5).unwrap(), 0.0);
        assert!((repetition_error(0.1f64, 3).unwrap() - 0.028).abs() < 1e-15);
        assert!(repetition_error(0.1f64, 2).is_err());
        assert!(repetition_error(0.1f64, 0).is_err());
    }

    #[test]
    fn combined_error_identities() {
        assert_eq!(combined_error(0.0f64, 0.0), 0.0);
        assert_eq!(combined_error(0.1f64, 0.0), 0.1);
        for x in [0.0, 0.01, 0.3, 0.5] {
            assert!((combined_error(0.5f64, x) - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn altitude_design_meets_edge_target() {
        let p = ChannelParams::default();
        for db in [0.0f64, 5.0, 10.0] {
            let d = optimize_altitude(&p, db).unwrap();
            let target = db_to_linear(db);
            assert!(((d.edge_snr_linear - target) / target).abs() < 1e-6, "{db} dB: {d:?}");
            assert!(d.r_hov_max_m > 0.0);
        }
    }

    #[test]
    fn altitude_design_rejects_unreachable_target() {
        let p = ChannelParams::default();
        assert!(matches!(optimize_altitude(&p, 200.0f64), Err(Error::Infeasible(_))));
    }

    #[test]
    fn channel_validation() {
        let mut p = ChannelParams::default();
        assert!(p.validate().is_ok());
        p.repetitions = 4;
        assert!(p.validate().is_err());
        p = ChannelParams::default();
        p.eta_nlos_db = 0.0;
        assert!(p.validate().is_err());
    }
}
