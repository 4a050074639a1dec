mod common;

use common::{reference_cloud_load, tiny_instance, Coverage};
use jsprr::generator::{generate_instance, GeneratorConfig};
use jsprr::model::Route;
use jsprr::relaxation::{build_lp, solve_lp};
use jsprr::rounding::round_placement;

#[test]
fn matches_external_solver_on_tiny_instances() {
    for k in 0..200u64 {
        let inst = tiny_instance(k, k % 3 == 0, Coverage::Overlapping);
        let frac = solve_lp(&build_lp(&inst, false).unwrap()).unwrap();
        let reference = reference_cloud_load(&inst, false);
        assert!((frac.objective - reference).abs() < 1e-6, "instance {k}: {} vs {reference}", frac.objective);
        for row in &frac.y {
            let total: f64 = row.iter().map(|(_, v)| v).sum();
            assert!((total - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn matches_external_solver_with_adaptation_budget() {
    for k in 0..60u64 {
        let mut inst = tiny_instance(300 + k, false, Coverage::Overlapping);
        let prev = round_placement(&solve_lp(&build_lp(&inst, false).unwrap()).unwrap(), k);
        inst.prev_placement = Some(prev.to_rows());
        inst.adaptation_budget = Some((k % 4) as f64 * 0.7);
        let frac = solve_lp(&build_lp(&inst, true).unwrap()).unwrap();
        let reference = reference_cloud_load(&inst, false);
        assert!((frac.objective - reference).abs() < 1e-6, "instance {k}: {} vs {reference}", frac.objective);
    }
}

#[test]
fn matches_external_solver_on_generated_instances() {
    for seed in 0..3 {
        let cfg = GeneratorConfig {
            n_users: 40,
            n_services: 12,
            storage_cap: 150.0,
            compute_cap: 2.0,
            seed,
            ..Default::default()
        };
        let inst = generate_instance(&cfg).unwrap();
        let frac = solve_lp(&build_lp(&inst, false).unwrap()).unwrap();
        let reference = reference_cloud_load(&inst, false);
        assert!((frac.objective - reference).abs() < 1e-6, "seed {seed}: {} vs {reference}", frac.objective);
    }
}

#[test]
fn uncovered_users_go_to_cloud() {
    let mut inst = tiny_instance(3, true, Coverage::Overlapping);
    inst.users[0].coverage.clear();
    let frac = solve_lp(&build_lp(&inst, false).unwrap()).unwrap();
    assert_eq!(frac.cloud(0), 1.0);
    assert_eq!(frac.y[0], vec![(Route::Cloud, 1.0)]);
}
