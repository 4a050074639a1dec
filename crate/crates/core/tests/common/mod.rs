//! Shared fixtures: random tiny instances and reference models solved with an
//! external LP/MILP solver.
#![allow(dead_code, clippy::needless_range_loop)]

use jsprr::model::{BaseStation, Instance, ServiceSpec, User};
use microlp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem, Variable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coverage {
    Overlapping,
    Disjoint,
}

/// At most 3 stations, 4 services and 8 users.
pub fn tiny_instance(seed: u64, unit: bool, coverage: Coverage) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=3usize);
    let s = rng.gen_range(1..=4usize);
    let u = rng.gen_range(1..=8usize);
    let services = (0..s)
        .map(|id| {
            if unit {
                ServiceSpec::unit(id)
            } else {
                ServiceSpec {
                    id,
                    storage: rng.gen_range(0.5..3.0),
                    compute: rng.gen_range(0.2..2.0),
                    uplink: rng.gen_range(0.2..2.0),
                    downlink: rng.gen_range(0.2..2.0),
                }
            }
        })
        .collect();
    let stations = (0..n)
        .map(|id| {
            if unit {
                BaseStation::new(
                    id,
                    rng.gen_range(0..=3) as f64,
                    rng.gen_range(0..=3) as f64,
                    rng.gen_range(0..=4) as f64,
                    rng.gen_range(0..=4) as f64,
                )
            } else {
                BaseStation::new(
                    id,
                    rng.gen_range(0.0..5.0),
                    rng.gen_range(0.0..4.0),
                    rng.gen_range(0.0..4.0),
                    rng.gen_range(0.0..4.0),
                )
            }
        })
        .collect();
    let users = (0..u)
        .map(|id| {
            let cov: Vec<usize> = match coverage {
                Coverage::Disjoint => {
                    if rng.gen_bool(0.1) {
                        vec![]
                    } else {
                        vec![rng.gen_range(0..n)]
                    }
                }
                Coverage::Overlapping => (0..n).filter(|_| rng.gen_bool(0.6)).collect(),
            };
            User {
                id,
                coverage: cov,
                service: rng.gen_range(0..s),
                x: None,
                y: None,
            }
        })
        .collect();
    Instance {
        services,
        stations,
        users,
        prev_placement: None,
        adaptation_budget: None,
    }
}

/// Reference model written directly from the problem statement. `integer`
/// selects binary variables (exact optimum) over [0, 1] (relaxation).
pub fn reference_cloud_load(inst: &Instance, integer: bool) -> f64 {
    let mut p = Problem::new(OptimizationDirection::Minimize);
    let var = |p: &mut Problem, obj: f64| {
        if integer {
            p.add_binary_var(obj)
        } else {
            p.add_var(obj, (0.0, 1.0))
        }
    };
    let (n_st, n_sv) = (inst.stations.len(), inst.services.len());
    let x: Vec<Vec<Variable>> = (0..n_st)
        .map(|_| (0..n_sv).map(|_| var(&mut p, 0.0)).collect())
        .collect();
    let mut routes: Vec<Vec<(usize, Variable)>> = Vec::new();
    let mut cloud = Vec::new();
    for user in &inst.users {
        let ys: Vec<(usize, Variable)> = user.coverage.iter().map(|&n| (n, var(&mut p, 0.0))).collect();
        let yl = var(&mut p, 1.0);
        let mut assign = LinearExpr::empty();
        for &(n, y) in &ys {
            assign.add(y, 1.0);
            p.add_constraint([(y, 1.0), (x[n][user.service], -1.0)], ComparisonOp::Le, 0.0);
        }
        assign.add(yl, 1.0);
        p.add_constraint(assign, ComparisonOp::Eq, 1.0);
        routes.push(ys);
        cloud.push(yl);
    }
    for n in 0..n_st {
        let bs = &inst.stations[n];
        let mut storage = LinearExpr::empty();
        for s in 0..n_sv {
            storage.add(x[n][s], inst.services[s].storage);
        }
        p.add_constraint(storage, ComparisonOp::Le, bs.storage_cap);
        let caps = [bs.compute_cap, bs.uplink_cap, bs.downlink_cap];
        for (k, cap) in caps.into_iter().enumerate() {
            let mut e = LinearExpr::empty();
            for (u, ys) in routes.iter().enumerate() {
                let svc = &inst.services[inst.users[u].service];
                let need = [svc.compute, svc.uplink, svc.downlink][k];
                for &(m, y) in ys {
                    if m == n {
                        e.add(y, need);
                    }
                }
            }
            p.add_constraint(e, ComparisonOp::Le, cap);
        }
    }
    if let (Some(prev), Some(d)) = (&inst.prev_placement, inst.adaptation_budget) {
        let mut e = LinearExpr::empty();
        for n in 0..n_st {
            for s in 0..n_sv {
                if prev[n][s] == 0 {
                    e.add(x[n][s], inst.services[s].storage);
                }
            }
        }
        p.add_constraint(e, ComparisonOp::Le, d);
    }
    let sol = p.solve().expect("reference model solves").into_solution().expect("solution");
    sol.objective()
}

/// Σ_u over cloud indicators, checked from scratch against every constraint
/// family. Returns the violated families.
pub fn independent_violations(inst: &Instance, sol: &jsprr::model::IntegerSolution) -> Vec<String> {
    use jsprr::model::Route;
    let tol = 1e-9;
    let mut out = Vec::new();
    let (n_st, n_sv) = (inst.stations.len(), inst.services.len());
    let mut storage = vec![0.0; n_st];
    for n in 0..n_st {
        for s in 0..n_sv {
            if sol.placement.get(n, s) {
                storage[n] += inst.services[s].storage;
            }
        }
    }
    let mut load = vec![[0.0f64; 3]; n_st];
    for (u, r) in sol.routing.iter().enumerate() {
        if let Route::Station(n) = *r {
            let user = &inst.users[u];
            if !user.coverage.contains(&n) {
                out.push(format!("user {u} routed outside coverage"));
            }
            if !sol.placement.get(n, user.service) {
                out.push(format!("user {u} routed to station without its service"));
            }
            let svc = &inst.services[user.service];
            load[n][0] += svc.compute;
            load[n][1] += svc.uplink;
            load[n][2] += svc.downlink;
        }
    }
    for n in 0..n_st {
        let bs = &inst.stations[n];
        if storage[n] > bs.storage_cap + tol {
            out.push(format!("storage at {n}"));
        }
        for (k, cap) in [bs.compute_cap, bs.uplink_cap, bs.downlink_cap].into_iter().enumerate() {
            if load[n][k] > cap + tol {
                out.push(format!("resource {k} at {n}"));
            }
        }
    }
    if let (Some(prev), Some(d)) = (&inst.prev_placement, inst.adaptation_budget) {
        let spend: f64 = (0..n_st)
            .flat_map(|n| (0..n_sv).map(move |s| (n, s)))
            .filter(|&(n, s)| sol.placement.get(n, s) && prev[n][s] == 0)
            .map(|(_, s)| inst.services[s].storage)
            .sum();
        if spend > d + tol {
            out.push("adaptation".into());
        }
    }
    out
}
