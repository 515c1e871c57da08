//! Budgeted design search.
//!
//! P1 maximizes `π_D[K]` and P2 minimizes the expected loss (system cost
//! plus fire damage weighted by the detection-time distribution). Both scan
//! a grid of sensor densities `λ_s` and thresholds `M`; the fleet size is
//! whatever the budget leaves after buying the sensors.

use std::cmp::Ordering;
use std::io::{self, Write};

use num_rational::Ratio;
use num_traits::{CheckedDiv, CheckedMul, CheckedSub, ToPrimitive};
use rayon::prelude::*;
use serde::Serialize;

use crate::detection_model::{ConditionalProfile, QuadratureSpec, RingWeights};
use crate::dtmc_engine::{curve_from_steps, DetectionCurve};
use crate::error::{Error, Result};
use crate::report::fmt12;
use crate::scenario::{rational, Scenario, ScenarioParams};

/// Unit costs and the damage function `ω_D(t) = ω_d · min(t, T_D)²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostModel {
    pub sensor_cost: f64,
    pub uav_cost: f64,
    pub damage_coeff: f64,
    pub fallback_min: f64,
}

impl CostModel {
    pub fn from_params(p: &ScenarioParams) -> Self {
        Self {
            sensor_cost: p.sensor_cost,
            uav_cost: p.uav_cost,
            damage_coeff: p.damage_coeff,
            fallback_min: p.fallback_time_min,
        }
    }

    /// Damage of a fire first handled `t_min` minutes after ignition. Past
    /// `T_D` the fallback system takes over and the damage stops growing.
    pub fn damage(&self, t_min: f64) -> f64 {
        let t = t_min.clamp(0.0, self.fallback_min);
        self.damage_coeff * t * t
    }

    pub fn system_cost(&self, n_sensors: f64, num_uavs: u32) -> f64 {
        self.sensor_cost * n_sensors + self.uav_cost * num_uavs as f64
    }

    /// Expected loss with no sensing system at all.
    pub fn no_system_loss(&self) -> f64 {
        self.damage(self.fallback_min)
    }
}

/// `⌊(ζ - ω_s N_s) / ω_u⌋`, in exact rational arithmetic when every input
/// has a short decimal form.
pub fn budget_to_uavs(budget: f64, n_sensors: f64, sensor_cost: f64, uav_cost: f64) -> Result<u32> {
    if !(uav_cost > 0.0) {
        return Err(Error::invalid("uav_cost", "must be > 0"));
    }
    let infeasible = || {
        Error::Infeasible(format!(
            "budget {budget} does not cover {n_sensors} sensors at {sensor_cost} each"
        ))
    };
    let exact_count = (|| {
        let rest = rational(budget)?.checked_sub(&rational(sensor_cost)?.checked_mul(&rational(n_sensors)?)?)?;
        Some((rest, rest.checked_div(&rational(uav_cost)?)?.floor().to_integer()))
    })();
    let count = match exact_count {
        Some((rest, _)) if rest < Ratio::from_integer(0) => return Err(infeasible()),
        Some((_, q)) => q.to_u32(),
        None => {
            let rest = budget - sensor_cost * n_sensors;
            if rest < 0.0 {
                return Err(infeasible());
            }
            (rest / uav_cost).floor().to_u32()
        }
    };
    count.ok_or_else(|| Error::Numerical(format!("fleet size for budget {budget} overflows")))
}

/// Expected loss of a design from its detection curve over `K̄` steps:
/// system cost, plus `ω_D(kT)` weighted by `ρ_D[k]`, plus the fallback
/// damage `ω_D((K̄+1)T)` for fires not detected by `K̄`.
pub fn losses_from_curve(costs: &CostModel, system_cost: f64, curve: &DetectionCurve<f64>, fallback_steps: usize) -> Result<f64> {
    if curve.len() < fallback_steps {
        return Err(Error::domain(format!(
            "curve covers {} steps but the loss horizon needs {fallback_steps}",
            curve.len()
        )));
    }
    let t = curve.step_min;
    let mut loss = system_cost;
    for r in &curve.records[..fallback_steps] {
        loss += costs.damage(r.k as f64 * t) * r.rho_d;
    }
    let missed = 1.0 - curve.pi_d(fallback_steps).unwrap_or(0.0);
    Ok(loss + costs.damage((fallback_steps + 1) as f64 * t) * missed.max(0.0))
}

/// Expected loss of the scenario's own design.
pub fn expected_losses(scenario: &Scenario, curve: &DetectionCurve<f64>) -> Result<f64> {
    let p = scenario.params();
    let costs = CostModel::from_params(p);
    losses_from_curve(&costs, costs.system_cost(scenario.sensor_count(), p.num_uavs), curve, scenario.fallback_steps())
}

/// Search grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    pub lambdas: Vec<f64>,
    pub thresholds: Vec<u32>,
    pub budgets: Vec<f64>,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            lambdas: (1..=40).map(|i| 10.0 * i as f64).collect(),
            thresholds: (1..=32).collect(),
            budgets: log_budgets(1.0e4, 1.0e7, 10),
        }
    }
}

/// Log-spaced values from `lo` to `hi` with `per_decade` steps per decade.
pub fn log_budgets(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let n = (decades * per_decade as f64).round() as usize;
    (0..=n)
        .map(|i| {
            let v = lo * 10f64.powf(decades * i as f64 / n.max(1) as f64);
            // Keep decade points exact.
            if i % per_decade == 0 {
                lo * 10f64.powi((i / per_decade) as i32)
            } else {
                v
            }
        })
        .collect()
}

impl Grid {
    pub fn validate(&self) -> Result<()> {
        if self.lambdas.is_empty() || self.thresholds.is_empty() {
            return Err(Error::invalid("grid", "density and threshold grids must be nonempty"));
        }
        if self.lambdas.iter().any(|&l| !(l.is_finite() && l >= 0.0)) {
            return Err(Error::invalid("grid", "densities must be finite and >= 0"));
        }
        if self.thresholds.contains(&0) {
            return Err(Error::invalid("grid", "thresholds must be >= 1"));
        }
        Ok(())
    }
}

/// One evaluated design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellEval {
    pub budget: f64,
    pub lambda_s: f64,
    pub flag_threshold: u32,
    pub num_uavs: u32,
    pub spend: f64,
    /// `π_D[K]`.
    pub pi_d: f64,
    pub expected_loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Problem {
    P1,
    P2,
}

/// Chosen design with its objective and curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanResult {
    pub problem: Problem,
    pub budget: f64,
    pub lambda_s: f64,
    pub num_uavs: u32,
    pub flag_threshold: u32,
    pub objective: f64,
    pub spend: f64,
    pub slack: f64,
    pub curve: DetectionCurve<f64>,
}

/// Best design of one budget in P2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BudgetOptimum {
    pub budget: f64,
    pub best: CellEval,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct P2Report {
    pub best: PlanResult,
    pub per_budget: Vec<BudgetOptimum>,
    pub no_system_loss: f64,
    /// True when buying nothing beats every design on the grid.
    pub no_system_preferred: bool,
}

struct Layer {
    lambda_s: f64,
    scenario: Scenario,
    profiles: Vec<(u32, ConditionalProfile<f64>)>,
    steps: usize,
}

/// Fleet-independent detection profiles for every `(λ_s, M)` of a grid.
pub struct Planner {
    template: ScenarioParams,
    grid: Grid,
    costs: CostModel,
    layers: Vec<Layer>,
}

impl Planner {
    pub fn new(template: &ScenarioParams, grid: &Grid, quad: QuadratureSpec) -> Result<Self> {
        grid.validate()?;
        let layers = grid
            .lambdas
            .par_iter()
            .map(|&lambda_s| build_layer(template, grid, quad, lambda_s))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        Ok(Self {
            template: template.clone(),
            grid: grid.clone(),
            costs: CostModel::from_params(template),
            layers,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn costs(&self) -> &CostModel {
        &self.costs
    }

    fn curve(&self, layer: &Layer, profile: &ConditionalProfile<f64>, num_uavs: u32) -> Result<DetectionCurve<f64>> {
        let s = &layer.scenario;
        let steps = profile.step_probabilities(num_uavs, self.template.forest_area_km2, layer.steps);
        curve_from_steps(&steps, s.step_min(), s.params().verify_time_min)
    }

    fn eval(&self, budget: f64, layer: &Layer, m: u32, profile: &ConditionalProfile<f64>, num_uavs: u32) -> Result<CellEval> {
        let s = &layer.scenario;
        let curve = self.curve(layer, profile, num_uavs)?;
        let spend = self.costs.system_cost(s.sensor_count(), num_uavs);
        Ok(CellEval {
            budget,
            lambda_s: layer.lambda_s,
            flag_threshold: m,
            num_uavs,
            spend,
            pi_d: curve.pi_d(s.critical_steps()).unwrap_or(0.0).clamp(0.0, 1.0),
            expected_loss: losses_from_curve(&self.costs, spend, &curve, s.fallback_steps())?,
        })
    }

    /// Every feasible design at `budget`, ordered by `(λ_s, M)`.
    pub fn evaluate(&self, budget: f64) -> Result<Vec<CellEval>> {
        let per_layer = self
            .layers
            .par_iter()
            .map(|layer| {
                let n_sensors = layer.scenario.sensor_count();
                let Ok(num_uavs) = budget_to_uavs(budget, n_sensors, self.costs.sensor_cost, self.costs.uav_cost) else {
                    return Ok(Vec::new());
                };
                layer
                    .profiles
                    .iter()
                    .map(|(m, profile)| self.eval(budget, layer, *m, profile, num_uavs))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(per_layer.into_iter().flatten().collect())
    }

    /// Evaluates a fixed fleet size, ignoring the budget.
    pub fn evaluate_fleet(&self, num_uavs: u32) -> Result<Vec<CellEval>> {
        self.layers
            .iter()
            .flat_map(|layer| layer.profiles.iter().map(move |(m, p)| (layer, *m, p)))
            .map(|(layer, m, p)| self.eval(f64::NAN, layer, m, p, num_uavs))
            .collect()
    }

    fn plan(&self, problem: Problem, cell: &CellEval) -> Result<PlanResult> {
        let layer = self
            .layers
            .iter()
            .find(|l| l.lambda_s == cell.lambda_s)
            .ok_or_else(|| Error::Numerical("chosen density missing from the profile table".into()))?;
        let profile = &layer
            .profiles
            .iter()
            .find(|(m, _)| *m == cell.flag_threshold)
            .ok_or_else(|| Error::Numerical("chosen threshold missing from the profile table".into()))?
            .1;
        let mut curve = self.curve(layer, profile, cell.num_uavs)?;
        let horizon = match problem {
            Problem::P1 => layer.scenario.critical_steps(),
            Problem::P2 => layer.scenario.fallback_steps(),
        };
        curve.records.truncate(horizon);
        Ok(PlanResult {
            problem,
            budget: cell.budget,
            lambda_s: cell.lambda_s,
            num_uavs: cell.num_uavs,
            flag_threshold: cell.flag_threshold,
            objective: match problem {
                Problem::P1 => cell.pi_d,
                Problem::P2 => cell.expected_loss,
            },
            spend: cell.spend,
            slack: cell.budget - cell.spend,
            curve,
        })
    }

    /// P1 at one budget.
    pub fn solve_p1(&self, budget: f64) -> Result<PlanResult> {
        let cells = self.evaluate(budget)?;
        let best = cells
            .iter()
            .min_by(|a, b| p1_order(a, b))
            .ok_or_else(|| Error::Infeasible(format!("no design on the grid fits budget {budget}")))?;
        self.plan(Problem::P1, best)
    }

    /// P2 over the grid's budgets.
    pub fn solve_p2(&self) -> Result<P2Report> {
        let mut per_budget = Vec::new();
        for &budget in &self.grid.budgets {
            let cells = self.evaluate(budget)?;
            if let Some(best) = cells.iter().min_by(|a, b| p2_order(a, b)) {
                per_budget.push(BudgetOptimum { budget, best: *best });
            }
        }
        let overall = per_budget
            .iter()
            .map(|b| &b.best)
            .min_by(|a, b| p2_order(a, b))
            .ok_or_else(|| Error::Infeasible("no budget on the grid admits a design".into()))?;
        let no_system_loss = self.costs.no_system_loss();
        Ok(P2Report {
            best: self.plan(Problem::P2, overall)?,
            no_system_preferred: no_system_loss < overall.expected_loss,
            no_system_loss,
            per_budget,
        })
    }

    /// Best threshold per density at a fixed fleet size, as
    /// `(λ_s, M*, π_D[K])`.
    pub fn threshold_profile(&self, num_uavs: u32) -> Result<Vec<(f64, u32, f64)>> {
        let cells = self.evaluate_fleet(num_uavs)?;
        let mut out: Vec<(f64, u32, f64)> = Vec::new();
        for c in cells {
            match out.last_mut() {
                Some(last) if last.0 == c.lambda_s => {
                    if c.pi_d > last.2 {
                        *last = (c.lambda_s, c.flag_threshold, c.pi_d);
                    }
                }
                _ => out.push((c.lambda_s, c.flag_threshold, c.pi_d)),
            }
        }
        Ok(out)
    }
}

fn build_layer(template: &ScenarioParams, grid: &Grid, quad: QuadratureSpec, lambda_s: f64) -> Result<Option<Layer>> {
    let mut p = template.clone();
    p.sensor_density_per_km2 = lambda_s;
    p.flag_threshold = 1;
    let scenario = match Scenario::new(p) {
        Ok(s) => s,
        Err(e) if e.is_config() => {
            log::debug!("skipping density {lambda_s}: {e}");
            return Ok(None);
        }
        Err(e) => return Err(e),
    };
    let steps = scenario.critical_steps().max(scenario.fallback_steps());
    let n = scenario.collected_per_hover();
    let eps = scenario.epsilon();
    let weights = RingWeights::<f64>::new(&scenario, quad, steps)?;
    let profiles = grid
        .thresholds
        .iter()
        .filter(|&&m| m as usize <= n)
        .map(|&m| Ok((m, ConditionalProfile::from_weights(&weights, n, m as usize, eps)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Some(Layer {
        lambda_s,
        scenario,
        profiles,
        steps,
    }))
}

// Ascending order = preference order.
fn p1_order(a: &CellEval, b: &CellEval) -> Ordering {
    b.pi_d
        .total_cmp(&a.pi_d)
        .then(a.spend.total_cmp(&b.spend))
        .then(a.flag_threshold.cmp(&b.flag_threshold))
        .then(a.lambda_s.total_cmp(&b.lambda_s))
}

fn p2_order(a: &CellEval, b: &CellEval) -> Ordering {
    a.expected_loss
        .total_cmp(&b.expected_loss)
        .then(a.spend.total_cmp(&b.spend))
        .then(a.flag_threshold.cmp(&b.flag_threshold))
        .then(a.lambda_s.total_cmp(&b.lambda_s))
}

/// P1 for one budget, building the profile table on the way.
pub fn solve_p1(template: &ScenarioParams, budget: f64, grid: &Grid) -> Result<PlanResult> {
    Planner::new(template, grid, QuadratureSpec::default())?.solve_p1(budget)
}

/// P2 over `grid.budgets`.
pub fn solve_p2(template: &ScenarioParams, grid: &Grid) -> Result<P2Report> {
    Planner::new(template, grid, QuadratureSpec::default())?.solve_p2()
}

/// `budget,lambda_s,M,N_u,pi_D` rows.
pub fn write_p1_csv<W: Write>(cells: &[CellEval], mut w: W) -> io::Result<()> {
    writeln!(w, "# schema: pyrewatch-p1/1")?;
    writeln!(w, "budget,lambda_s,M,N_u,pi_D")?;
    for c in cells {
        writeln!(w, "{},{},{},{},{}", fmt12(c.budget), fmt12(c.lambda_s), c.flag_threshold, c.num_uavs, fmt12(c.pi_d))?;
    }
    Ok(())
}

/// `budget,lambda_s,M,N_u,expected_loss` rows.
pub fn write_p2_csv<W: Write>(cells: &[CellEval], mut w: W) -> io::Result<()> {
    writeln!(w, "# schema: pyrewatch-p2/1")?;
    writeln!(w, "budget,lambda_s,M,N_u,expected_loss")?;
    for c in cells {
        writeln!(
            w,
            "{},{},{},{},{}",
            fmt12(c.budget),
            fmt12(c.lambda_s),
            c.flag_threshold,
            c.num_uavs,
            fmt12(c.expected_loss)
        )?;
    }
    Ok(())
}
