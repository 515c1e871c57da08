//! Trial-by-trial simulation of the sensing system.
//!
//! Each trial draws a Poisson sensor field over the square forest, ignites a
//! fire at a random point and steps the fleet forward: every searching UAV
//! hovers at a uniform point of its own partition, gathers up to `N` flags
//! from the live sensors it covers and raises an alarm at `M` positives. An
//! alarm starts a verification that ends after a geometric number of steps;
//! it confirms the fire when the alarming UAV's coverage met the sensor
//! detection ring, otherwise the UAV resumes its search.
//!
//! Trial `i` draws from ChaCha stream `i` of the configured seed, so results
//! do not depend on how trials are spread over worker threads.

use std::io::{self, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Hypergeometric, Poisson};
use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dtmc_engine::DetectionCurve;
use crate::error::{Error, Result};
use crate::geometry::FireGeometry;
use crate::report::fmt12;
use crate::scenario::Scenario;

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// How ignition points near the forest border are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryMode {
    /// Ignite far enough inside that no ring reaches the border.
    #[default]
    InteriorIgnition,
    /// Wrap all coordinates around the square.
    Torus,
}

/// Which UAVs stop searching while an alarm is being verified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum VerificationScope {
    /// Only the alarming UAV dwells; the rest keep searching.
    #[default]
    PerUav,
    /// The whole fleet pauses while any alarm is verified.
    SystemWide,
}

#[derive(Debug, Clone)]
pub struct TrialConfig {
    pub scenario: Scenario,
    pub trials: usize,
    pub seed: u64,
    pub boundary: BoundaryMode,
    pub verification: VerificationScope,
    /// Steps simulated per trial; defaults to `K`.
    pub steps: usize,
}

impl TrialConfig {
    pub fn new(scenario: Scenario, trials: usize, seed: u64) -> Self {
        let steps = scenario.critical_steps();
        Self {
            scenario,
            trials,
            seed,
            boundary: BoundaryMode::default(),
            verification: VerificationScope::default(),
            steps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("trials", "must be >= 1"));
        }
        if self.steps == 0 {
            return Err(Error::invalid("steps", "must be >= 1"));
        }
        if self.boundary == BoundaryMode::InteriorIgnition {
            let margin = self.interior_margin_m();
            let side = self.scenario.forest_side_m();
            if 2.0 * margin >= side {
                return Err(Error::invalid(
                    "boundary_mode",
                    format!("forest side {side} m leaves no interior ignition region with margin {margin} m; use torus"),
                ));
            }
        }
        Ok(())
    }

    /// `R_s` at the last simulated step plus the coverage radius.
    pub fn interior_margin_m(&self) -> f64 {
        let g = FireGeometry::<f64>::at(&self.scenario, self.steps);
        g.r_sense_m + g.r_hov_m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrialOutcome {
    pub detected: bool,
    pub detect_step: Option<usize>,
    /// Alarms raised by UAVs whose coverage missed the sensor ring.
    pub false_alarm_count: u32,
}

/// Rectangle `[x, x + w) × [y, y + h)` in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Partition {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

/// Splits a square of side `side` into `n` equal-area rectangles laid out
/// as a near-square grid; rows hold `⌈√n⌉` or fewer cells.
pub fn partitions(side: f64, n: usize) -> Vec<Partition> {
    if n == 0 {
        return Vec::new();
    }
    let cols = (n as f64).sqrt().ceil() as usize;
    let rows = n.div_ceil(cols);
    let mut out = Vec::with_capacity(n);
    let mut y = 0.0;
    for r in 0..rows {
        let in_row = n / rows + usize::from(r < n % rows);
        let h = side * in_row as f64 / n as f64;
        let w = side / in_row as f64;
        for c in 0..in_row {
            out.push(Partition { x: c as f64 * w, y, w, h });
        }
        y += h;
    }
    out
}

/// Per-trial RNG: stream `trial` of the seeded ChaCha8 generator.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

#[derive(Debug, Clone, Copy)]
struct Plane {
    side: f64,
    torus: bool,
}

impl Plane {
    fn delta(&self, a: f64, b: f64) -> f64 {
        let d = (a - b).abs();
        if self.torus {
            d.min(self.side - d)
        } else {
            d
        }
    }

    fn dist2(&self, p: [f64; 2], q: [f64; 2]) -> f64 {
        let dx = self.delta(p[0], q[0]);
        let dy = self.delta(p[1], q[1]);
        dx * dx + dy * dy
    }
}

/// Sensor field generated cell by cell on first use. Cells hold independent
/// Poisson counts, so the field is a homogeneous Poisson process.
struct LazyField {
    cell: f64,
    per_side: usize,
    mean_per_cell: f64,
    cells: Vec<Option<Vec<[f64; 2]>>>,
}

impl LazyField {
    fn new(side: f64, density_per_m2: f64, cell_hint: f64) -> Self {
        let cell_hint = cell_hint.max(side / 512.0);
        let per_side = ((side / cell_hint).ceil() as usize).max(1);
        let cell = side / per_side as f64;
        Self {
            cell,
            per_side,
            mean_per_cell: density_per_m2 * cell * cell,
            cells: vec![None; per_side * per_side],
        }
    }

    fn cell_points<R: Rng>(&mut self, ix: usize, iy: usize, rng: &mut R) -> &[[f64; 2]] {
        let idx = iy * self.per_side + ix;
        if self.cells[idx].is_none() {
            let count = sample_poisson(self.mean_per_cell, rng);
            let (x0, y0) = (ix as f64 * self.cell, iy as f64 * self.cell);
            let pts = (0..count)
                .map(|_| [x0 + rng.random::<f64>() * self.cell, y0 + rng.random::<f64>() * self.cell])
                .collect();
            self.cells[idx] = Some(pts);
        }
        self.cells[idx].as_deref().unwrap_or(&[])
    }
}

fn sample_poisson<R: Rng>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map_or(0, |d| d.sample(rng) as u64)
}

fn sample_binomial<R: Rng>(n: u64, p: f64, rng: &mut R) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).map_or(0, |d| d.sample(rng))
}

/// Live covered sensors and how many of them lie in the detection ring.
#[derive(Debug, Clone, Copy, Default)]
struct Coverage {
    alive: u64,
    ring: u64,
}

fn survey<R: Rng>(field: &mut LazyField, plane: Plane, uav: [f64; 2], fire: [f64; 2], geom: &FireGeometry<f64>, rng: &mut R) -> Coverage {
    let r_hov = geom.r_hov_m;
    let (rh2, rf2, rs2) = (r_hov * r_hov, geom.r_fire_m * geom.r_fire_m, geom.r_sense_m * geom.r_sense_m);
    let n = field.per_side as i64;
    let cell = field.cell;
    let axis = |c: f64| -> Vec<usize> {
        let lo = ((c - r_hov) / cell).floor() as i64;
        let hi = ((c + r_hov) / cell).floor() as i64;
        let mut idx: Vec<usize> = if plane.torus {
            (lo..=hi.min(lo + n - 1)).map(|i| i.rem_euclid(n) as usize).collect()
        } else {
            (lo.max(0)..=hi.min(n - 1)).map(|i| i as usize).collect()
        };
        idx.sort_unstable();
        idx.dedup();
        idx
    };
    let (xs, ys) = (axis(uav[0]), axis(uav[1]));
    let mut out = Coverage::default();
    for &cy in &ys {
        for &cx in &xs {
            for &p in field.cell_points(cx, cy, rng) {
                if plane.dist2(p, uav) > rh2 {
                    continue;
                }
                let df2 = plane.dist2(p, fire);
                if df2 <= rf2 {
                    continue;
                }
                out.alive += 1;
                if df2 <= rs2 {
                    out.ring += 1;
                }
            }
        }
    }
    out
}

/// Positive flags among the (at most `N`) collected observations.
fn positive_flags<R: Rng>(cov: Coverage, n_max: u64, eps: f64, rng: &mut R) -> u64 {
    let (taken, ring) = if cov.alive > n_max {
        let ring = Hypergeometric::new(cov.alive, cov.ring, n_max).map_or(0, |d| d.sample(rng));
        (n_max, ring)
    } else {
        (cov.alive, cov.ring)
    };
    sample_binomial(ring, 1.0 - eps, rng) + sample_binomial(taken - ring, eps, rng)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum UavState {
    Searching,
    Verifying { genuine: bool },
}

struct Setup {
    plane: Plane,
    parts: Vec<Partition>,
    geoms: Vec<FireGeometry<f64>>,
    density_per_m2: f64,
    n_max: u64,
    m: u64,
    eps: f64,
    resolve: f64,
    margin: f64,
}

impl Setup {
    fn new(cfg: &TrialConfig) -> Self {
        let s = &cfg.scenario;
        let p = s.params();
        let side = s.forest_side_m();
        Self {
            plane: Plane {
                side,
                torus: cfg.boundary == BoundaryMode::Torus,
            },
            parts: partitions(side, p.num_uavs as usize),
            geoms: (0..=cfg.steps).map(|k| FireGeometry::at(s, k)).collect(),
            density_per_m2: p.sensor_density_per_km2 / 1.0e6,
            n_max: s.collected_per_hover() as u64,
            m: s.flag_threshold() as u64,
            eps: s.epsilon(),
            resolve: s.step_min() / p.verify_time_min,
            margin: cfg.interior_margin_m(),
        }
    }

    fn place<R: Rng>(&self, part: &Partition, rng: &mut R) -> [f64; 2] {
        [part.x + rng.random::<f64>() * part.w, part.y + rng.random::<f64>() * part.h]
    }

    fn ignite<R: Rng>(&self, rng: &mut R) -> [f64; 2] {
        let side = self.plane.side;
        if self.plane.torus {
            [rng.random::<f64>() * side, rng.random::<f64>() * side]
        } else {
            let span = side - 2.0 * self.margin;
            [self.margin + rng.random::<f64>() * span, self.margin + rng.random::<f64>() * span]
        }
    }

    fn meets_ring(&self, geom: &FireGeometry<f64>, uav: [f64; 2], fire: [f64; 2]) -> bool {
        geom.coverage_meets_ring(self.plane.dist2(uav, fire).sqrt())
    }
}

fn run_one(setup: &Setup, scope: VerificationScope, steps: usize, rng: &mut ChaCha8Rng) -> TrialOutcome {
    let fire = setup.ignite(rng);
    let mut field = LazyField::new(setup.plane.side, setup.density_per_m2, setup.geoms[0].r_hov_m);
    let mut states = vec![UavState::Searching; setup.parts.len()];
    let mut system: Option<bool> = None;
    let mut outcome = TrialOutcome::default();

    for k in 1..=steps {
        let geom = &setup.geoms[k];
        match scope {
            VerificationScope::PerUav => {
                for (part, state) in setup.parts.iter().zip(states.iter_mut()) {
                    if let UavState::Verifying { genuine } = *state {
                        if rng.random::<f64>() < setup.resolve {
                            if genuine {
                                outcome.detected = true;
                                outcome.detect_step = Some(k);
                            }
                            *state = UavState::Searching;
                        }
                        continue;
                    }
                    if let Some(genuine) = search(setup, part, geom, fire, &mut field, rng) {
                        outcome.false_alarm_count += u32::from(!genuine);
                        *state = UavState::Verifying { genuine };
                    }
                }
            }
            VerificationScope::SystemWide => {
                if let Some(genuine) = system {
                    if rng.random::<f64>() < setup.resolve {
                        if genuine {
                            outcome.detected = true;
                            outcome.detect_step = Some(k);
                        }
                        system = None;
                    }
                } else {
                    let mut alarm: Option<bool> = None;
                    for part in &setup.parts {
                        if let Some(genuine) = search(setup, part, geom, fire, &mut field, rng) {
                            outcome.false_alarm_count += u32::from(!genuine);
                            alarm = Some(alarm.unwrap_or(false) || genuine);
                        }
                    }
                    system = alarm;
                }
            }
        }
        if outcome.detected {
            break;
        }
    }
    outcome
}

/// One hover: `Some(genuine)` when the UAV raises an alarm.
fn search(setup: &Setup, part: &Partition, geom: &FireGeometry<f64>, fire: [f64; 2], field: &mut LazyField, rng: &mut ChaCha8Rng) -> Option<bool> {
    let uav = setup.place(part, rng);
    let cov = survey(field, setup.plane, uav, fire, geom, rng);
    let positives = positive_flags(cov, setup.n_max, setup.eps, rng);
    (positives >= setup.m).then(|| setup.meets_ring(geom, uav, fire))
}

/// Simulates one trial.
pub fn simulate_trial(cfg: &TrialConfig, trial: u64) -> Result<TrialOutcome> {
    cfg.validate()?;
    let setup = Setup::new(cfg);
    Ok(run_one(&setup, cfg.verification, cfg.steps, &mut trial_rng(cfg.seed, trial)))
}

/// Empirical detection curve from a batch of trials.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCurve {
    pub trials: u64,
    pub step_min: f64,
    /// Trials first detected at step `k` (index `k - 1`).
    pub detections_at: Vec<u64>,
    pub false_alarms: u64,
}

impl EmpiricalCurve {
    pub fn steps(&self) -> usize {
        self.detections_at.len()
    }

    /// Detected by step `k` (cumulative count), `k = 1..=steps`.
    pub fn detected_by(&self) -> Vec<u64> {
        self.detections_at
            .iter()
            .scan(0u64, |acc, &d| {
                *acc += d;
                Some(*acc)
            })
            .collect()
    }

    /// `π̂_D[k]` for `k = 1..=steps`.
    pub fn pi_hat(&self) -> Vec<f64> {
        self.detected_by().into_iter().map(|c| c as f64 / self.trials as f64).collect()
    }

    /// 95% Wilson interval half-widths of `π̂_D[k]`.
    pub fn ci_halfwidth(&self) -> Vec<f64> {
        self.pi_hat().into_iter().map(|p| wilson_halfwidth(p, self.trials)).collect()
    }

    /// Largest `|π̂_D[k] - π_D[k]|` over the common steps.
    pub fn max_abs_gap(&self, analytical: &DetectionCurve<f64>) -> f64 {
        self.pi_hat()
            .iter()
            .zip(&analytical.records)
            .map(|(p, r)| (p - r.pi_d).abs())
            .fold(0.0, f64::max)
    }

    /// Analytical curve columns followed by `pi_D_mc,ci_halfwidth,trials`.
    pub fn write_csv<W: Write>(&self, analytical: &DetectionCurve<f64>, mut w: W) -> io::Result<()> {
        writeln!(w, "# schema: pyrewatch-mc/1")?;
        writeln!(w, "k,t_min,p_int,p_fa,p_d,pi_D,rho_D,pi_D_mc,ci_halfwidth,trials")?;
        for ((r, p), h) in analytical.records.iter().zip(self.pi_hat()).zip(self.ci_halfwidth()) {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                r.k,
                fmt12(r.t_min),
                fmt12(r.p_int),
                fmt12(r.p_fa),
                fmt12(r.p_d),
                fmt12(r.pi_d),
                fmt12(r.rho_d),
                fmt12(p),
                fmt12(h),
                self.trials
            )?;
        }
        Ok(())
    }
}

/// Half-width of the 95% Wilson score interval.
pub fn wilson_halfwidth(p_hat: f64, n: u64) -> f64 {
    let n = n as f64;
    let z2 = Z95 * Z95;
    Z95 / (1.0 + z2 / n) * (p_hat * (1.0 - p_hat) / n + z2 / (4.0 * n * n)).sqrt()
}

/// Runs all trials on the current rayon pool.
pub fn run_trials(cfg: &TrialConfig) -> Result<EmpiricalCurve> {
    cfg.validate()?;
    let setup = Setup::new(cfg);
    let steps = cfg.steps;
    let (detections_at, false_alarms) = (0..cfg.trials as u64)
        .into_par_iter()
        .fold(
            || (vec![0u64; steps], 0u64),
            |(mut hist, fa), i| {
                let o = run_one(&setup, cfg.verification, steps, &mut trial_rng(cfg.seed, i));
                if let Some(k) = o.detect_step {
                    hist[k - 1] += 1;
                }
                (hist, fa + u64::from(o.false_alarm_count))
            },
        )
        .reduce(
            || (vec![0u64; steps], 0u64),
            |(mut a, fa), (b, fb)| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                (a, fa + fb)
            },
        );
    Ok(EmpiricalCurve {
        trials: cfg.trials as u64,
        step_min: cfg.scenario.step_min(),
        detections_at,
        false_alarms,
    })
}

/// Frequencies of alarms split by whether the coverage met the ring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleStepFrequency {
    pub p_d: f64,
    pub p_fa: f64,
    pub placements: u64,
}

/// One UAV placed `placements` times in its partition around a fire at
/// the partition center with radius `R_f[k]`; the local sensor field is
/// redrawn for each placement.
pub fn single_step_frequency(cfg: &TrialConfig, k: usize, placements: u64) -> Result<SingleStepFrequency> {
    if k == 0 {
        return Err(Error::domain("single-step frequency needs k >= 1"));
    }
    if placements == 0 {
        return Err(Error::invalid("placements", "must be >= 1"));
    }
    let s = &cfg.scenario;
    let p = s.params();
    if p.num_uavs == 0 {
        return Ok(SingleStepFrequency {
            p_d: 0.0,
            p_fa: 0.0,
            placements,
        });
    }
    let part = partitions(s.forest_side_m(), p.num_uavs as usize)[0];
    let geom = FireGeometry::<f64>::at(s, k);
    let fire = [part.w / 2.0, part.h / 2.0];
    let n_max = s.collected_per_hover() as u64;
    let m = s.flag_threshold() as u64;
    let eps = s.epsilon();
    let density = p.sensor_density_per_km2 / 1.0e6;
    let r_hov = geom.r_hov_m;
    let disk_mean = density * std::f64::consts::PI * r_hov * r_hov;

    let (hits, false_hits) = (0..placements)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(cfg.seed, i);
            let uav = [rng.random::<f64>() * part.w, rng.random::<f64>() * part.h];
            let dx = wrap(uav[0] - fire[0], part.w);
            let dy = wrap(uav[1] - fire[1], part.h);
            let d = (dx * dx + dy * dy).sqrt();
            let mut cov = Coverage::default();
            for _ in 0..sample_poisson(disk_mean, &mut rng) {
                let rr = r_hov * rng.random::<f64>().sqrt();
                let th = std::f64::consts::TAU * rng.random::<f64>();
                let (sx, sy) = (dx + rr * th.cos(), dy + rr * th.sin());
                let df = (sx * sx + sy * sy).sqrt();
                if df <= geom.r_fire_m {
                    continue;
                }
                cov.alive += 1;
                if df <= geom.r_sense_m {
                    cov.ring += 1;
                }
            }
            if positive_flags(cov, n_max, eps, &mut rng) < m {
                (0u64, 0u64)
            } else if geom.coverage_meets_ring(d) {
                (1, 0)
            } else {
                (0, 1)
            }
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok(SingleStepFrequency {
        p_d: hits as f64 / placements as f64,
        p_fa: false_hits as f64 / placements as f64,
        placements,
    })
}

fn wrap(d: f64, period: f64) -> f64 {
    d - period * (d / period).round()
}
