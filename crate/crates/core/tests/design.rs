use pyrewatch_core::planner::{log_budgets, Planner};
use pyrewatch_core::{detection_curve, load_scenario, Grid, QuadratureSpec, Scenario, ScenarioParams};

fn pi_k(s: &Scenario) -> f64 {
    detection_curve::<f64>(s, QuadratureSpec::default()).unwrap().final_pi_d()
}

fn reference() -> Scenario {
    load_scenario("{}").unwrap()
}

#[test]
fn more_uavs_never_hurt() {
    for m in [1, 8] {
        let mut last = 0.0;
        for nu in 1..=40 {
            let p = pi_k(&reference().with(|p| {
                p.num_uavs = nu;
                p.flag_threshold = m;
            }).unwrap());
            assert!(p >= last - 1e-12, "M={m} N_u={nu}: {p} < {last}");
            last = p;
        }
    }
}

#[test]
fn longer_detection_range_never_hurts() {
    for m in [1, 4, 16] {
        let mut last = 0.0;
        for ds in (50..=300).step_by(25) {
            let p = pi_k(&reference().with(|p| {
                p.sensor_detect_radius_m = ds as f64;
                p.flag_threshold = m;
            }).unwrap());
            assert!(p >= last - 1e-12, "M={m} d_s={ds}: {p} < {last}");
            last = p;
        }
    }
}

#[test]
fn density_has_an_interior_optimum() {
    for m in [1, 4, 8] {
        let values: Vec<f64> = (2..=40)
            .map(|i| pi_k(&reference().with(|p| {
                p.sensor_density_per_km2 = 10.0 * i as f64;
                p.flag_threshold = m;
            }).unwrap()))
            .collect();
        let (arg, peak) = values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        assert!(arg > 0 && arg < values.len() - 1, "M={m}: peak at the grid edge");
        assert!(peak > values[0] && peak > values[values.len() - 1]);
    }
}

#[test]
fn best_threshold_grows_with_density() {
    let planner = Planner::new(&ScenarioParams::default(), &Grid::default(), QuadratureSpec::default()).unwrap();
    let profile = planner.threshold_profile(10).unwrap();
    assert_eq!(profile.len(), 40);
    let m_star: Vec<u32> = profile.iter().map(|x| x.1).collect();
    assert!(m_star.windows(2).all(|w| w[1] >= w[0]), "{m_star:?}");
    assert!(m_star.last().unwrap() > m_star.first().unwrap());
}

#[test]
fn costly_verification_favours_high_thresholds() {
    let best_m = |t_vrf: f64, nu: u32| {
        (1u32..=32)
            .map(|m| {
                let s = reference()
                    .with(|p| {
                        p.verify_time_min = t_vrf;
                        p.flag_threshold = m;
                        p.num_uavs = nu;
                    })
                    .unwrap();
                (m, pi_k(&s))
            })
            .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc })
            .0
    };
    for nu in [10, 20] {
        let m_star: Vec<u32> = [1.0, 5.0, 20.0].into_iter().map(|t| best_m(t, nu)).collect();
        assert!(m_star.windows(2).all(|w| w[1] >= w[0]), "N_u={nu}: {m_star:?}");
        assert!(m_star[2] > m_star[0], "N_u={nu}: {m_star:?}");
    }
}

#[test]
fn detection_plan_improves_with_budget() {
    let grid = Grid {
        lambdas: (1..=20).map(|i| 10.0 * i as f64).collect(),
        thresholds: vec![1, 2, 4, 8],
        budgets: Vec::new(),
    };
    let planner = Planner::new(&ScenarioParams::default(), &grid, QuadratureSpec::default()).unwrap();
    let mut last = 0.0;
    for budget in log_budgets(5.0e4, 5.0e5, 9) {
        let plan = planner.solve_p1(budget).unwrap();
        assert!(plan.spend <= budget);
        assert!(plan.objective >= last, "budget {budget}: {} < {last}", plan.objective);
        last = plan.objective;
    }
}

#[test]
fn loss_optimum_beats_doing_nothing() {
    let grid = Grid {
        lambdas: (2..=12).map(|i| 10.0 * i as f64).collect(),
        thresholds: (1..=8).collect(),
        budgets: log_budgets(1.0e4, 1.0e6, 5),
    };
    let report = Planner::new(&ScenarioParams::default(), &grid, QuadratureSpec::default())
        .unwrap()
        .solve_p2()
        .unwrap();
    assert!(report.best.objective <= report.no_system_loss);
    assert!(!report.no_system_preferred);
    assert!(report.per_budget.iter().all(|b| b.best.spend <= b.budget));
}
