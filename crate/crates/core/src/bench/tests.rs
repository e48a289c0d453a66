use super::*;
use crate::metrics::{beampattern, evaluate};

fn small_sweep(param: SweepParam, values: Vec<f64>, exec: Execution) -> SweepSpec {
    let mut spec = SweepSpec::new(
        SystemConfig::default(),
        param,
        values,
        vec![SolverKind::PointAo],
        vec![0, 1],
    );
    spec.exec = exec;
    spec
}

#[test]
fn scenario_hash_is_frozen() {
    let cfg = SystemConfig::default();
    assert_eq!(scenario_hash(&cfg, 0), scenario_hash(&cfg, 0));
    assert_ne!(scenario_hash(&cfg, 0), scenario_hash(&cfg, 1));
    assert_ne!(scenario_hash(&cfg, 0), scenario_hash(&cfg.clone().with_users(2), 0));
    assert_eq!(scenario_hash(&cfg, 0).len(), 16);
}

#[test]
fn sweep_parameters_parse_and_apply() {
    for p in SweepParam::ALL {
        assert_eq!(p.name().parse::<SweepParam>().unwrap(), p);
    }
    assert!("bandwidth".parse::<SweepParam>().is_err());
    let base = SystemConfig::default();
    assert_eq!(SweepParam::NUsers.apply(&base, 2.0).unwrap().n_users, 2);
    assert!(SweepParam::NUsers.apply(&base, 1.5).is_err());
    let g = SweepParam::SinrThreshold.apply(&base, 10.0).unwrap();
    assert!(g.sinr_thresholds.iter().all(|&x| (x - 10.0).abs() < 1e-12));
    assert_eq!(SweepParam::RateMin.apply(&base, 2e6).unwrap().rate_min_bps, 2e6);
    assert_eq!(SweepParam::PowerBudget.apply(&base, 2.0).unwrap().power_budget_w, 2.0);
}

#[test]
fn sweep_values_must_be_monotone() {
    let spec = small_sweep(SweepParam::NUsers, vec![1.0, 3.0, 2.0], Execution::Sequential);
    assert!(spec.validate().is_err());
    let spec = small_sweep(SweepParam::NUsers, vec![], Execution::Sequential);
    assert!(spec.validate().is_err());
}

#[test]
fn csv_headers_are_stable() {
    let table = SweepTable {
        param: SweepParam::RateMin,
        cells: Vec::new(),
    };
    assert_eq!(
        table.cells_csv().unwrap(),
        "param,value,algorithm,seed,scenario_hash,status,crb,crb_db,crb_bound,f_hz,outer_iterations,inner_iterations,min_slack\n"
    );
    assert_eq!(
        table.summary_csv().unwrap(),
        "param,value,algorithm,n_ok,n_cells,crb_mean,crb_std,crb_db_mean\n"
    );
    assert_eq!(table.timings_csv().unwrap(), "value,algorithm,seed,wall_s\n");
}

#[test]
fn sweep_is_deterministic_and_revalidates() {
    let seq = run_sweep(&small_sweep(SweepParam::NUsers, vec![1.0, 2.0], Execution::Sequential)).unwrap();
    let par = run_sweep(&small_sweep(SweepParam::NUsers, vec![1.0, 2.0], Execution::Parallel)).unwrap();
    assert_eq!(seq.cells_csv().unwrap(), par.cells_csv().unwrap());
    assert_eq!(seq.summary_csv().unwrap(), par.summary_csv().unwrap());
    assert_eq!(seq.cells.len(), 4);
    let base = SystemConfig::default();
    for c in &seq.cells {
        assert_eq!(c.status, CellStatus::Solved, "{}", c.message);
        let cfg = SweepParam::NUsers.apply(&base, c.value).unwrap();
        let scn = Scenario::generate(cfg, c.seed).unwrap();
        let again = evaluate(&scn, c.solution.as_ref().unwrap(), TargetMode::Point).unwrap();
        let crb = c.crb.unwrap();
        assert!((again.crb_value - crb).abs() <= 1e-9 * crb);
    }
    let rows = seq.summary();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.n_ok == 2 && r.n_cells == 2));
}

#[test]
fn failed_cells_are_recorded() {
    let spec = SweepSpec {
        algorithms: vec![SolverKind::PointAo],
        seeds: vec![0],
        ..small_sweep(SweepParam::RateMin, vec![1e6, 1e9], Execution::Sequential)
    };
    let t = run_sweep(&spec).unwrap();
    assert_eq!(t.cells[0].status, CellStatus::Solved);
    assert_eq!(t.cells[1].status, CellStatus::Infeasible);
    assert!(t.cells[1].crb.is_none());
    let csv = t.cells_csv().unwrap();
    assert!(csv.lines().nth(2).unwrap().contains(",infeasible,,"));
}

#[test]
fn baseline_names_parse() {
    for b in Baseline::ALL {
        assert_eq!(b.name().parse::<Baseline>().unwrap(), b);
    }
    assert!("greedy".parse::<Baseline>().is_err());
}

#[test]
fn local_only_needs_enough_cpu() {
    let cfg = SystemConfig {
        rate_min_bps: 3e6,
        ..SystemConfig::default()
    };
    assert!(cfg.f_max_hz / cfg.cycles_per_bit < cfg.rate_min_bps);
    let scn = Scenario::generate(cfg, 0).unwrap();
    let r = run_baseline(Baseline::LocalOnly, &scn, TargetMode::Point, &SolveOptions::default());
    assert!(matches!(r, Err(Error::Infeasible { .. })));
}

#[test]
fn baselines_bracket_the_full_design() {
    let scn = Scenario::generate(SystemConfig::default(), 2).unwrap();
    let opts = SolveOptions::default();
    let full = full_algorithm(&scn, TargetMode::Point, &opts).unwrap().report.crb_value;
    let bound = run_baseline(Baseline::SdrBound, &scn, TargetMode::Point, &opts).unwrap();
    assert!(bound.crb_value <= full * (1.0 + 1e-6));
    let off = run_baseline(Baseline::OffloadingOnly, &scn, TargetMode::Point, &opts).unwrap();
    assert!(off.feasible);
    assert!(off.crb_value >= full * (1.0 - 1e-6));
    let local = run_baseline(Baseline::LocalOnly, &scn, TargetMode::Point, &opts).unwrap();
    assert!(local.feasible);
    assert_eq!(local.slack("rate").map(|s| s >= -1e-6), Some(true));
}

#[test]
fn convergence_export_writes_two_files() {
    let dir = tempfile::tempdir().unwrap();
    let series = [ConvergenceSeries {
        label: "point-ao".into(),
        crb: vec![3e-8, 2.6e-8, 2.5e-8],
    }];
    let out = export_plot(&PlotData::Convergence(&series), dir.path(), "conv").unwrap();
    let csv = std::fs::read_to_string(&out.csv).unwrap();
    assert!(csv.starts_with("series,iteration,crb,crb_db\n"));
    assert_eq!(csv.lines().count(), 4);
    let svg = std::fs::read_to_string(&out.svg).unwrap();
    assert!(svg.contains("<svg"));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);
}

#[test]
fn empty_export_leaves_no_files() {
    let dir = tempfile::tempdir().unwrap();
    let r = export_plot(&PlotData::Convergence(&[]), dir.path(), "none");
    assert!(r.is_err());
    let t = SweepTable {
        param: SweepParam::NUsers,
        cells: Vec::new(),
    };
    assert!(export_plot(&PlotData::Sweep(&t), dir.path(), "none").is_err());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn beampattern_export_marks_the_peak() {
    let dir = tempfile::tempdir().unwrap();
    let a = crate::scenario::steering_vector(0.0, 4, 0.5).unwrap();
    let r = &a * a.adjoint();
    let grid: Vec<f64> = (-90..=90).map(|d| (d as f64).to_radians()).collect();
    let pts = beampattern(&r, &grid, 0.5).unwrap();
    let out = export_plot(&PlotData::Beampattern { points: &pts, target: 0.0 }, dir.path(), "bp").unwrap();
    let csv = std::fs::read_to_string(&out.csv).unwrap();
    assert!(csv.starts_with("theta_deg,gain_db\n"));
    let peak = csv
        .lines()
        .skip(1)
        .map(|l| {
            let mut it = l.split(',').map(|x| x.parse::<f64>().unwrap());
            (it.next().unwrap(), it.next().unwrap())
        })
        .fold((0.0, f64::NEG_INFINITY), |b, p| if p.1 > b.1 { p } else { b });
    assert!(peak.0.abs() < 1e-9);
    assert!(std::fs::read_to_string(&out.svg).unwrap().contains("<polygon") || out.svg.exists());
}
