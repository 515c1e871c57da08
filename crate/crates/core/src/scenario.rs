//! Scenario parameters, validation and derived timing.
//!
//! A [`ScenarioParams`] is the raw configuration (JSON, snake_case keys,
//! fixed units). [`Scenario`] is the validated, immutable view every other
//! module consumes: it resolves the flag error and derives the observation
//! count `N`, the step duration `T` and the step counts `K` and `K̄`.

use std::fmt;

use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::link_budget::ChannelParams;

/// Flag error used when neither `combined_error` nor a channel block is given.
pub const DEFAULT_COMBINED_ERROR: f64 = 0.1;

/// Raw scenario configuration. Missing keys take the reference defaults
/// (400 km² forest, 180 sensors/km², 10 UAVs, 20 m/min spread, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioParams {
    pub forest_area_km2: f64,
    pub sensor_density_per_km2: f64,
    pub num_uavs: u32,
    pub fire_ros_m_per_min: f64,
    pub sensor_detect_radius_m: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub combined_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelParams>,
    pub uav_coverage_radius_m: f64,
    pub collection_ratio: f64,
    pub obs_time_s: f64,
    pub travel_time_min: f64,
    pub verify_time_min: f64,
    pub critical_time_min: f64,
    pub fallback_time_min: f64,
    pub flag_threshold: u32,
    pub sensor_cost: f64,
    pub uav_cost: f64,
    pub budget: f64,
    pub damage_coeff: f64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            forest_area_km2: 400.0,
            sensor_density_per_km2: 180.0,
            num_uavs: 10,
            fire_ros_m_per_min: 20.0,
            sensor_detect_radius_m: 100.0,
            combined_error: None,
            channel: None,
            uav_coverage_radius_m: 400.0,
            collection_ratio: 1.0,
            obs_time_s: 0.1,
            travel_time_min: 0.5,
            verify_time_min: 1.0,
            critical_time_min: 30.0,
            fallback_time_min: 30.0,
            flag_threshold: 1,
            sensor_cost: 1.0,
            uav_cost: 1000.0,
            budget: 10.0e6,
            damage_coeff: 10_000.0,
        }
    }
}

fn require_positive(field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be a finite value > 0, got {v}")))
    }
}

impl ScenarioParams {
    /// Checks the per-field bounds. Cross-field invariants are checked by
    /// [`Scenario::new`].
    pub fn validate_fields(&self) -> Result<()> {
        require_positive("forest_area_km2", self.forest_area_km2)?;
        if !(self.sensor_density_per_km2.is_finite() && self.sensor_density_per_km2 >= 0.0) {
            return Err(Error::invalid("sensor_density_per_km2", "must be a finite value >= 0"));
        }
        require_positive("fire_ros_m_per_min", self.fire_ros_m_per_min)?;
        require_positive("sensor_detect_radius_m", self.sensor_detect_radius_m)?;
        if let Some(eps) = self.combined_error {
            if !(0.0..=0.5).contains(&eps) {
                return Err(Error::invalid("combined_error", format!("must lie in [0, 0.5], got {eps}")));
            }
        }
        if let Some(ch) = &self.channel {
            ch.validate()?;
        }
        require_positive("uav_coverage_radius_m", self.uav_coverage_radius_m)?;
        if !(self.collection_ratio > 0.0 && self.collection_ratio <= 1.0) {
            return Err(Error::invalid("collection_ratio", "must lie in (0, 1]"));
        }
        require_positive("obs_time_s", self.obs_time_s)?;
        require_positive("travel_time_min", self.travel_time_min)?;
        require_positive("verify_time_min", self.verify_time_min)?;
        require_positive("critical_time_min", self.critical_time_min)?;
        require_positive("fallback_time_min", self.fallback_time_min)?;
        if self.flag_threshold == 0 {
            return Err(Error::invalid("flag_threshold", "must be a positive integer"));
        }
        require_positive("sensor_cost", self.sensor_cost)?;
        require_positive("uav_cost", self.uav_cost)?;
        require_positive("budget", self.budget)?;
        require_positive("damage_coeff", self.damage_coeff)?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario parameters serialize")
    }
}

/// Duration of one hover-and-travel step.
///
/// `exact` carries the rational value when every timing input has a short
/// decimal form, so floors such as `⌊T_f / T⌋` are taken without rounding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDuration {
    pub minutes: f64,
    pub exact: Option<Ratio<i128>>,
}

impl StepDuration {
    /// Whole steps that fit in `horizon_min`.
    pub fn steps_within(&self, horizon_min: f64) -> usize {
        if let (Some(t), Some(h)) = (self.exact, rational(horizon_min)) {
            if let Some(q) = h.checked_div(&t) {
                return q.floor().to_integer().to_usize().unwrap_or(0);
            }
        }
        (horizon_min / self.minutes).floor().to_usize().unwrap_or(0)
    }

    fn at_most(&self, other_min: f64) -> bool {
        if let (Some(t), Some(o)) = (self.exact, rational(other_min)) {
            return t <= o;
        }
        self.minutes <= other_min
    }
}

pub(crate) fn rational(x: f64) -> Option<Ratio<i128>> {
    let r = Ratio::<i128>::approximate_float(x)?;
    // Only accept short decimal-like fractions; anything else is treated as
    // an arbitrary real.
    if *r.denom() <= 1_000_000_000 && (r.to_f64()? - x).abs() <= f64::EPSILON * x.abs() {
        Some(r)
    } else {
        None
    }
}

/// Validated scenario with derived quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    params: ScenarioParams,
    epsilon: f64,
    collected: usize,
    step: StepDuration,
    critical_steps: usize,
    fallback_steps: usize,
}

impl Scenario {
    pub fn new(params: ScenarioParams) -> Result<Self> {
        params.validate_fields()?;
        let epsilon = match (params.combined_error, &params.channel) {
            (Some(eps), Some(_)) => {
                log::info!("both combined_error and channel given; using combined_error = {eps}");
                eps
            }
            (Some(eps), None) => eps,
            (None, Some(ch)) => ch.edge_combined_error::<f64>()?,
            (None, None) => DEFAULT_COMBINED_ERROR,
        };

        let r_km = params.uav_coverage_radius_m / 1000.0;
        let expected = params.collection_ratio
            * params.sensor_density_per_km2
            * std::f64::consts::PI
            * r_km
            * r_km;
        let collected = expected.floor().to_usize().ok_or_else(|| {
            Error::invalid("sensor_density_per_km2", "collectable observation count overflows")
        })?;
        if (params.flag_threshold as usize) > collected {
            return Err(Error::invalid(
                "flag_threshold",
                format!(
                    "flag_threshold exceeds collectable observations (M = {} > N = {collected})",
                    params.flag_threshold
                ),
            ));
        }

        let minutes = collected as f64 * params.obs_time_s / 60.0 + params.travel_time_min;
        let exact = (|| {
            let n = Ratio::from_integer(i128::try_from(collected).ok()?);
            let obs = rational(params.obs_time_s)?;
            let travel = rational(params.travel_time_min)?;
            n.checked_mul(&obs)?
                .checked_div(&Ratio::from_integer(60))?
                .checked_add(&travel)
        })();
        let step = StepDuration { minutes, exact };

        let critical_steps = step.steps_within(params.critical_time_min);
        if critical_steps < 1 {
            return Err(Error::invalid(
                "critical_time_min",
                format!("shorter than one step (T = {minutes} min)"),
            ));
        }
        let fallback_steps = step.steps_within(params.fallback_time_min);
        if fallback_steps < 1 {
            return Err(Error::invalid(
                "fallback_time_min",
                format!("shorter than one step (T = {minutes} min)"),
            ));
        }
        if !step.at_most(params.verify_time_min) {
            return Err(Error::invalid(
                "verify_time_min",
                format!("must be >= the step duration T = {minutes} min"),
            ));
        }

        Ok(Self {
            params,
            epsilon,
            collected,
            step,
            critical_steps,
            fallback_steps,
        })
    }

    pub fn params(&self) -> &ScenarioParams {
        &self.params
    }

    /// Re-validates after modifying a copy of the parameters.
    pub fn with(&self, edit: impl FnOnce(&mut ScenarioParams)) -> Result<Self> {
        let mut p = self.params.clone();
        edit(&mut p);
        Scenario::new(p)
    }

    /// Combined flag error ε.
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Observations collected per hover, `N = ⌊β λ_s π R_hov²⌋`.
    pub fn collected_per_hover(&self) -> usize {
        self.collected
    }

    pub fn step(&self) -> StepDuration {
        self.step
    }

    pub fn step_min(&self) -> f64 {
        self.step.minutes
    }

    /// `K = ⌊T_f / T⌋`.
    pub fn critical_steps(&self) -> usize {
        self.critical_steps
    }

    /// `K̄ = ⌊T_D / T⌋`.
    pub fn fallback_steps(&self) -> usize {
        self.fallback_steps
    }

    pub fn flag_threshold(&self) -> usize {
        self.params.flag_threshold as usize
    }

    /// Expected number of deployed sensors `N_s = λ_s A`.
    pub fn sensor_count(&self) -> f64 {
        self.params.sensor_density_per_km2 * self.params.forest_area_km2
    }

    pub fn forest_side_m(&self) -> f64 {
        self.params.forest_area_km2.sqrt() * 1000.0
    }

    /// Whole steps within `horizon_min`; fails when the horizon is shorter
    /// than one step.
    pub fn derived_step_count(&self, horizon_min: f64) -> Result<usize> {
        if !(horizon_min.is_finite() && horizon_min > 0.0) || !self.step.at_most(horizon_min) {
            return Err(Error::domain(format!(
                "horizon {horizon_min} min is shorter than one step (T = {} min)",
                self.step.minutes
            )));
        }
        Ok(self.step.steps_within(horizon_min))
    }

    /// System cost `ω_s N_s + ω_u N_u`.
    pub fn spend(&self) -> f64 {
        self.params.sensor_cost * self.sensor_count() + self.params.uav_cost * self.params.num_uavs as f64
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "N = {}, T = {} min, K = {}, K̄ = {}, ε = {}",
            self.collected, self.step.minutes, self.critical_steps, self.fallback_steps, self.epsilon
        )
    }
}

/// Parses and validates a JSON scenario. Blank input yields the defaults.
pub fn load_scenario(config_text: &str) -> Result<Scenario> {
    let params: ScenarioParams = if config_text.trim().is_empty() {
        ScenarioParams::default()
    } else {
        serde_json::from_str(config_text)?
    };
    Scenario::new(params)
}
