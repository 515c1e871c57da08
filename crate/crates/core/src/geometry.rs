//! Planar geometry of the growing fire and the UAV coverage disk.
//!
//! All lengths are meters; the UAV detection-ring area is also reported in
//! km² because the intersection probability compares it with the forest area.

use crate::scalar::{floor_count, Scalar};
use crate::scenario::Scenario;

/// Radii of the fire disk, the sensor detection ring and the UAV detection
/// ring at one time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FireGeometry<S> {
    pub k: usize,
    /// `R_f[k] = v T k`.
    pub r_fire_m: S,
    /// `R_s[k] = R_f[k] + d_s`.
    pub r_sense_m: S,
    /// Inner radius of the UAV detection ring, `max(0, R_f - R_hov)`.
    pub r_u_inner_m: S,
    /// Outer radius of the UAV detection ring, `R_s + R_hov`.
    pub r_u_outer_m: S,
    pub r_hov_m: S,
    /// `π (R̄_u² - R̲_u²)` in km².
    pub ring_area_km2: S,
}

impl<S: Scalar> FireGeometry<S> {
    pub fn from_radii(k: usize, r_fire_m: S, detect_radius_m: S, r_hov_m: S) -> Self {
        let r_sense_m = r_fire_m + detect_radius_m;
        let r_u_inner_m = (r_fire_m - r_hov_m).max(S::zero());
        let r_u_outer_m = r_sense_m + r_hov_m;
        let ring_area_km2 =
            S::PI() * (r_u_outer_m * r_u_outer_m - r_u_inner_m * r_u_inner_m) / S::of(1.0e6);
        Self {
            k,
            r_fire_m,
            r_sense_m,
            r_u_inner_m,
            r_u_outer_m,
            r_hov_m,
            ring_area_km2,
        }
    }

    /// Geometry after `k` steps of circular spread.
    pub fn at(scenario: &Scenario, k: usize) -> Self {
        let p = scenario.params();
        let r_fire = S::of(p.fire_ros_m_per_min) * S::of(scenario.step_min()) * S::of_usize(k);
        Self::from_radii(
            k,
            r_fire,
            S::of(p.sensor_detect_radius_m),
            S::of(p.uav_coverage_radius_m),
        )
    }

    /// Area (m²) of the part of a coverage disk centered `center_dist_m`
    /// from the ignition point that lies in the sensor detection ring.
    pub fn a_in(&self, center_dist_m: S) -> S {
        let outer = circle_intersection_area(self.r_sense_m, self.r_hov_m, center_dist_m);
        let inner = circle_intersection_area(self.r_fire_m, self.r_hov_m, center_dist_m);
        (outer - inner).max(S::zero())
    }

    /// Whether a coverage disk at `center_dist_m` overlaps the sensor ring.
    pub fn coverage_meets_ring(&self, center_dist_m: S) -> bool {
        center_dist_m < self.r_u_outer_m && center_dist_m + self.r_hov_m > self.r_fire_m
    }
}

/// Area of overlap of two disks with radii `r1`, `r2` whose centers are
/// `center_dist` apart.
pub fn circle_intersection_area<S: Scalar>(r1: S, r2: S, center_dist: S) -> S {
    let zero = S::zero();
    let (r1, r2) = if r1 >= r2 { (r1, r2) } else { (r2, r1) };
    if r1 <= zero || r2 <= zero {
        return zero;
    }
    let d = center_dist.abs();
    if d >= r1 + r2 {
        return zero;
    }
    let small = r1.min(r2);
    if d <= (r1 - r2).abs() {
        return S::PI() * small * small;
    }
    let two = S::of(2.0);
    let c1 = ((d * d + r1 * r1 - r2 * r2) / (two * d * r1)).max(-S::one()).min(S::one());
    let c2 = ((d * d + r2 * r2 - r1 * r1) / (two * d * r2)).max(-S::one()).min(S::one());
    let kite = (-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2);
    let area = r1 * r1 * c1.acos() + r2 * r2 * c2.acos() - S::of(0.5) * kite.max(zero).sqrt();
    area.max(zero).min(S::PI() * small * small)
}

/// Average number of detecting sensors the UAV hears from the ring,
/// `min(N, ⌊λ_s A_in(R)⌋)`.
pub fn sensors_in_intersection<S: Scalar>(scenario: &Scenario, geom: &FireGeometry<S>, center_dist_m: S) -> usize {
    let density_per_m2 = S::of(scenario.params().sensor_density_per_km2) / S::of(1.0e6);
    floor_count(density_per_m2 * geom.a_in(center_dist_m)).min(scenario.collected_per_hover())
}
