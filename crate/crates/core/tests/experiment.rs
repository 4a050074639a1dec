use jsprr::experiment::{run_experiment, Algo, ExperimentConfig, Format, ResultTable, SweepKind};
use jsprr::relaxation::{build_lp, solve_lp};

fn config(sweep: SweepKind, values: &[&str], seeds: Vec<u64>, algorithms: Vec<Algo>, scale: f64) -> ExperimentConfig {
    ExperimentConfig {
        sweep,
        values: values.iter().map(|s| s.to_string()).collect(),
        seeds,
        algorithms,
        scale,
        trials: 10,
        ..Default::default()
    }
}

#[test]
fn storage_sweep_row_count_and_determinism() {
    let cfg = config(
        SweepKind::Storage,
        &["250", "500", "750", "1000", "1250"],
        vec![0, 1],
        vec![Algo::Rr, Algo::Greedy, Algo::Lr],
        0.1,
    );
    let a = run_experiment(&cfg).unwrap();
    assert_eq!(a.rows.len(), 5 * 2 * 3);
    assert!(a.rows.iter().all(|r| r.error.is_none()));
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(a, b);
    let mut json = Vec::new();
    a.write(Format::Json, &mut json).unwrap();
    assert_eq!(ResultTable::read(Format::Json, &json[..]).unwrap(), a);
    // CSV carries no factor or error columns.
    let mut csv = Vec::new();
    a.write(Format::Csv, &mut csv).unwrap();
    let back = ResultTable::read(Format::Csv, &csv[..]).unwrap();
    let stripped: Vec<_> = a.rows.iter().cloned().map(|mut r| {
        r.factors = None;
        r
    }).collect();
    assert_eq!(back.rows, stripped);
}

#[test]
fn lr_row_is_the_relaxation() {
    let cfg = config(SweepKind::Storage, &["500"], vec![3], vec![Algo::Lr], 0.2);
    let table = run_experiment(&cfg).unwrap();
    assert_eq!(table.rows.len(), 1);
    let inst = jsprr::generator::generate_instance(&cfg.cell_config("500", 3).unwrap()).unwrap();
    let xi = solve_lp(&build_lp(&inst, false).unwrap()).unwrap().objective;
    assert!((table.rows[0].cloud_load.unwrap() - xi).abs() < 1e-9);
}

#[test]
fn low_compute_close_to_relaxation() {
    let cfg = config(SweepKind::Compute, &["3"], (0..5).collect(), vec![Algo::Rr, Algo::Lr], 1.0);
    let table = run_experiment(&cfg).unwrap();
    let mean = |a: Algo| {
        let v: Vec<f64> = table.rows.iter().filter(|r| r.algo == a).map(|r| r.cloud_load.unwrap()).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let (rr, lr) = (mean(Algo::Rr), mean(Algo::Lr));
    assert!((rr - lr) / lr <= 0.15, "rr {rr} lr {lr}");
}

