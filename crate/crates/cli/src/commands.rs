use std::fmt::Write as _;
use std::time::Instant;

use pyrewatch_core::dtmc_engine::detection_curve_over;
use pyrewatch_core::link_budget::{altitude_sweep, optimize_altitude};
use pyrewatch_core::monte_carlo::{run_trials, BoundaryMode, TrialConfig, VerificationScope};
use pyrewatch_core::planner::{expected_losses, write_p1_csv, write_p2_csv, Planner};
use pyrewatch_core::report::fmt12;
use pyrewatch_core::{detection_curve, Error, Grid, QuadratureSpec, Scenario, ScenarioParams};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::manifest::Outputs;
use crate::{parse, CliError, Common, GridArgs, Metric};

fn load(common: &Common) -> Result<Scenario, CliError> {
    let text = match &common.config {
        Some(path) => std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?,
        None => String::new(),
    };
    Ok(pyrewatch_core::load_scenario(&text)?)
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut text = serde_json::to_string_pretty(value).expect("output serializes");
    text.push('\n');
    text.into_bytes()
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Vec<u8> {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to memory cannot fail");
    buf
}

fn grid_of(args: &GridArgs, budgets: Vec<f64>) -> Result<Grid, CliError> {
    Ok(Grid {
        lambdas: parse::values(&args.lambdas)?,
        thresholds: parse::counts(&args.thresholds)?,
        budgets,
    })
}

pub fn analyze(common: &Common, validate: bool) -> Result<(), CliError> {
    let start = Instant::now();
    let scenario = load(common)?;
    let quad = QuadratureSpec::new(common.quad_points)?;
    let k = scenario.critical_steps();
    let horizon = k.max(scenario.fallback_steps());

    let full = detection_curve_over::<f64>(&scenario, quad, horizon)?;
    let expected_loss = expected_losses(&scenario, &full)?;
    let mut curve = full.clone();
    curve.records.truncate(k);

    let doubling_gap = if validate {
        let fine = detection_curve_over::<f64>(&scenario, quad.doubled(), k)?;
        let gap = curve
            .records
            .iter()
            .zip(&fine.records)
            .map(|(a, b)| (a.pi_d - b.pi_d).abs())
            .fold(0.0, f64::max);
        println!("max |rho_D two-way discrepancy| = {:e}", full.max_rho_discrepancy);
        println!("max simplex drift              = {:e}", full.max_drift);
        println!("renormalizations               = {}", full.renormalizations);
        println!("max |pi_D(I) - pi_D(2I)|       = {gap:e}");
        Some(gap)
    } else {
        None
    };

    let summary = json!({
        "pi_D_K": curve.final_pi_d(),
        "rho_sum": curve.rho_sum(),
        "N": scenario.collected_per_hover(),
        "T_min": scenario.step_min(),
        "K": k,
        "K_bar": scenario.fallback_steps(),
        "epsilon": scenario.epsilon(),
        "quad_points": quad.points,
        "max_rho_discrepancy": full.max_rho_discrepancy,
        "max_drift": full.max_drift,
        "renormalizations": full.renormalizations,
        "quad_doubling_max_diff": doubling_gap,
        "expected_loss": expected_loss,
    });

    let mut out = Outputs::new(&common.out);
    out.write("curve.csv", &csv_bytes(|w| curve.write_csv(w)))?;
    out.write("summary.json", &to_json(&summary))?;
    out.finish("analyze", &scenario, Vec::new(), start.elapsed())?;
    println!("pi_D[{k}] = {}  expected loss = {}", fmt12(curve.final_pi_d()), fmt12(expected_loss));
    Ok(())
}

pub fn simulate(
    common: &Common,
    trials: usize,
    seed: u64,
    boundary: BoundaryMode,
    verification: VerificationScope,
) -> Result<(), CliError> {
    let start = Instant::now();
    let scenario = load(common)?;
    let quad = QuadratureSpec::new(common.quad_points)?;
    let analytical = detection_curve::<f64>(&scenario, quad)?;

    let mut cfg = TrialConfig::new(scenario.clone(), trials, seed);
    cfg.boundary = boundary;
    cfg.verification = verification;
    let empirical = run_trials(&cfg)?;
    let gap = empirical.max_abs_gap(&analytical);

    let summary = json!({
        "trials": trials,
        "seed": seed,
        "boundary": boundary,
        "verification": verification,
        "pi_D_K_mc": empirical.pi_hat().last().copied(),
        "pi_D_K": analytical.final_pi_d(),
        "max_abs_gap": gap,
        "false_alarms": empirical.false_alarms,
    });

    let mut out = Outputs::new(&common.out);
    out.write("mc.csv", &csv_bytes(|w| empirical.write_csv(&analytical, w)))?;
    out.write("summary.json", &to_json(&summary))?;
    out.finish("simulate", &scenario, vec![seed], start.elapsed())?;
    println!("max |pi_D_mc - pi_D| = {}", fmt12(gap));
    Ok(())
}

pub fn optimize_detection(common: &Common, grid: &GridArgs, budget: Option<&str>) -> Result<(), CliError> {
    let start = Instant::now();
    let scenario = load(common)?;
    let budgets = match budget {
        Some(spec) => parse::values(spec)?,
        None => vec![scenario.params().budget],
    };
    let grid = grid_of(grid, budgets.clone())?;
    let planner = Planner::new(scenario.params(), &grid, QuadratureSpec::new(common.quad_points)?)?;

    let mut cells = Vec::new();
    let mut plans = Vec::new();
    let mut infeasible = Vec::new();
    for &b in &budgets {
        cells.extend(planner.evaluate(b)?);
        match planner.solve_p1(b) {
            Ok(plan) => {
                println!(
                    "budget {}: pi_D = {} with lambda_s = {}, M = {}, N_u = {}",
                    fmt12(b),
                    fmt12(plan.objective),
                    fmt12(plan.lambda_s),
                    plan.flag_threshold,
                    plan.num_uavs
                );
                plans.push(plan);
            }
            Err(Error::Infeasible(msg)) => {
                log::warn!("{msg}");
                infeasible.push(b);
            }
            Err(e) => return Err(e.into()),
        }
    }

    let mut out = Outputs::new(&common.out);
    out.write("p1.csv", &csv_bytes(|w| write_p1_csv(&cells, w)))?;
    out.write("plans.json", &to_json(&plans))?;
    out.finish("optimize-detection", &scenario, Vec::new(), start.elapsed())?;
    if infeasible.is_empty() {
        Ok(())
    } else {
        let list: Vec<String> = infeasible.iter().map(|b| fmt12(*b)).collect();
        Err(Error::Infeasible(format!("no design on the grid fits budget(s) {}", list.join(", "))).into())
    }
}

pub fn optimize_losses(common: &Common, grid: &GridArgs, budgets: &str) -> Result<(), CliError> {
    let start = Instant::now();
    let scenario = load(common)?;
    let budgets = parse::budgets(budgets)?;
    let grid = grid_of(grid, budgets.clone())?;
    let planner = Planner::new(scenario.params(), &grid, QuadratureSpec::new(common.quad_points)?)?;

    let report = planner.solve_p2()?;
    let mut cells = Vec::new();
    for &b in &budgets {
        cells.extend(planner.evaluate(b)?);
    }
    let optima: Vec<_> = report.per_budget.iter().map(|o| o.best).collect();

    let mut out = Outputs::new(&common.out);
    out.write("p2.csv", &csv_bytes(|w| write_p2_csv(&cells, w)))?;
    out.write("p2_optimum_by_budget.csv", &csv_bytes(|w| write_p2_csv(&optima, w)))?;
    out.write("plan.json", &to_json(&report))?;
    out.finish("optimize-losses", &scenario, Vec::new(), start.elapsed())?;

    let best = &report.best;
    println!(
        "minimum expected loss {} at budget {} (lambda_s = {}, M = {}, N_u = {}); no-system loss {}",
        fmt12(best.objective),
        fmt12(best.budget),
        fmt12(best.lambda_s),
        best.flag_threshold,
        best.num_uavs,
        fmt12(report.no_system_loss)
    );
    if report.no_system_preferred {
        println!("deploying no system is cheaper than every design on the grid");
    }
    Ok(())
}

const SWEEP_H_MIN_M: f64 = 1.0;
const SWEEP_H_MAX_M: f64 = 1.0e5;

pub fn altitude(common: &Common, snr_db: &str, sweep_points: usize) -> Result<(), CliError> {
    let start = Instant::now();
    let scenario = load(common)?;
    let channel = scenario.params().channel.clone().unwrap_or_default();
    channel.validate()?;
    let targets = parse::values(snr_db)?;
    if sweep_points < 2 {
        return Err(CliError::Usage("--sweep-points must be >= 2".into()));
    }
    let ratio = (SWEEP_H_MAX_M / SWEEP_H_MIN_M).ln() / (sweep_points - 1) as f64;
    let heights: Vec<f64> = (0..sweep_points).map(|i| SWEEP_H_MIN_M * (ratio * i as f64).exp()).collect();

    let mut table = String::from("# schema: pyrewatch-altitude/1\nsnr_db,h_opt_m,r_hov_max_m,status\n");
    let mut sweep = String::from("# schema: pyrewatch-altitude-sweep/1\nsnr_db,h_m,r_max_m\n");
    for &snr in &targets {
        match optimize_altitude::<f64>(&channel, snr) {
            Ok(d) => {
                writeln!(table, "{},{},{},ok", fmt12(snr), fmt12(d.h_opt_m), fmt12(d.r_hov_max_m)).unwrap();
                println!("{snr} dB: h* = {:.1} m, R* = {:.1} m", d.h_opt_m, d.r_hov_max_m);
            }
            Err(Error::Infeasible(msg)) => {
                log::warn!("{msg}");
                writeln!(table, "{},,,infeasible", fmt12(snr)).unwrap();
                println!("{snr} dB: infeasible");
            }
            Err(e) => return Err(e.into()),
        }
        for (h, r) in altitude_sweep::<f64>(&channel, snr, &heights)? {
            writeln!(sweep, "{},{},{}", fmt12(snr), fmt12(h), fmt12(r)).unwrap();
        }
    }

    let mut out = Outputs::new(&common.out);
    out.write("altitude.csv", table.as_bytes())?;
    out.write("altitude_sweep.csv", sweep.as_bytes())?;
    out.finish("altitude", &scenario, Vec::new(), start.elapsed())?;
    Ok(())
}

#[derive(Debug, Clone, Copy)]
enum Field {
    Real(fn(&mut ScenarioParams, f64)),
    Count(fn(&mut ScenarioParams, u32)),
}

/// Scenario field for a sweep key; aliases follow the usual symbols.
fn field(key: &str) -> Option<Field> {
    use Field::{Count, Real};
    Some(match key {
        "forest_area_km2" | "A" => Real(|p, v| p.forest_area_km2 = v),
        "sensor_density_per_km2" | "lambda_s" => Real(|p, v| p.sensor_density_per_km2 = v),
        "num_uavs" | "N_u" => Count(|p, v| p.num_uavs = v),
        "fire_ros_m_per_min" | "v_f" => Real(|p, v| p.fire_ros_m_per_min = v),
        "sensor_detect_radius_m" | "d_s" => Real(|p, v| p.sensor_detect_radius_m = v),
        "combined_error" | "epsilon" => Real(|p, v| p.combined_error = Some(v)),
        "uav_coverage_radius_m" | "R_hov" => Real(|p, v| p.uav_coverage_radius_m = v),
        "collection_ratio" | "eta" => Real(|p, v| p.collection_ratio = v),
        "obs_time_s" | "T_obs" => Real(|p, v| p.obs_time_s = v),
        "travel_time_min" | "T_trv" => Real(|p, v| p.travel_time_min = v),
        "verify_time_min" | "T_vrf" => Real(|p, v| p.verify_time_min = v),
        "critical_time_min" | "T_f" => Real(|p, v| p.critical_time_min = v),
        "fallback_time_min" | "T_D" => Real(|p, v| p.fallback_time_min = v),
        "flag_threshold" | "M" => Count(|p, v| p.flag_threshold = v),
        "sensor_cost" | "w_s" => Real(|p, v| p.sensor_cost = v),
        "uav_cost" | "w_u" => Real(|p, v| p.uav_cost = v),
        "budget" => Real(|p, v| p.budget = v),
        "damage_coeff" | "w_d" => Real(|p, v| p.damage_coeff = v),
        _ => return None,
    })
}

fn apply(f: Field, p: &mut ScenarioParams, v: f64) -> Result<(), CliError> {
    match f {
        Field::Real(set) => set(p, v),
        Field::Count(set) => {
            if !(v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64) {
                return Err(CliError::Usage(format!("expected a nonnegative integer, got {v}")));
            }
            set(p, v as u32)
        }
    }
    Ok(())
}

type Row = (f64, u32, usize, f64);

/// Threshold and `(k, value)` pairs of one sweep point.
type PointValues = (u32, Vec<(usize, f64)>);

fn sweep_point(base: &ScenarioParams, quad: QuadratureSpec, metric: Metric) -> Result<Option<PointValues>, CliError> {
    let scenario = match Scenario::new(base.clone()) {
        Ok(s) => s,
        Err(e) if e.is_config() => {
            log::warn!("skipping sweep point: {e}");
            return Ok(None);
        }
        Err(e) => return Err(e.into()),
    };
    let m = base.flag_threshold;
    let k = scenario.critical_steps();
    let values = match metric {
        Metric::PiD => {
            let curve = detection_curve::<f64>(&scenario, quad)?;
            curve.records.iter().map(|r| (r.k, r.pi_d)).collect()
        }
        Metric::PiDK => vec![(k, detection_curve::<f64>(&scenario, quad)?.final_pi_d())],
        Metric::ExpectedLoss => {
            let kbar = scenario.fallback_steps();
            let curve = detection_curve_over::<f64>(&scenario, quad, kbar)?;
            vec![(kbar, expected_losses(&scenario, &curve)?)]
        }
    };
    Ok(Some((m, values)))
}

pub fn sweep(common: &Common, vary: &str, flag_thresholds: Option<&str>, metric: Metric) -> Result<(), CliError> {
    let start = Instant::now();
    let scenario = load(common)?;
    let quad = QuadratureSpec::new(common.quad_points)?;
    let (key, values) = parse::vary(vary)?;
    let f = field(&key).ok_or_else(|| CliError::Usage(format!("unknown sweep key {key:?}")))?;
    let thresholds = match flag_thresholds {
        Some(spec) => parse::counts(spec)?,
        None => vec![scenario.params().flag_threshold],
    };

    let mut points = Vec::new();
    for &v in &values {
        for &m in &thresholds {
            let mut p = scenario.params().clone();
            p.flag_threshold = m;
            apply(f, &mut p, v)?;
            points.push((v, p));
        }
    }

    let results = points
        .par_iter()
        .map(|(v, p)| Ok(sweep_point(p, quad, metric)?.map(|(m, vals)| (*v, m, vals))))
        .collect::<Result<Vec<_>, CliError>>()?;
    let rows: Vec<Row> = results
        .into_iter()
        .flatten()
        .flat_map(|(v, m, vals)| vals.into_iter().map(move |(k, x)| (v, m, k, x)))
        .collect();

    let metric_name = match metric {
        Metric::PiD => "pi_D",
        Metric::PiDK => "pi_D_K",
        Metric::ExpectedLoss => "expected_loss",
    };
    let mut csv = String::from("# schema: pyrewatch-sweep/1\nparam,value,M,k,metric,metric_value\n");
    for (v, m, k, x) in &rows {
        writeln!(csv, "{key},{},{m},{k},{metric_name},{}", fmt12(*v), fmt12(*x)).unwrap();
    }

    let mut out = Outputs::new(&common.out);
    out.write("sweep.csv", csv.as_bytes())?;
    out.finish("sweep", &scenario, Vec::new(), start.elapsed())?;
    println!("{} rows over {} points", rows.len(), points.len());
    Ok(())
}
