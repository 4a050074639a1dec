//! The linear relaxation of the placement/routing program and its solution.

pub mod simplex;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Instance, Resource, Resources, Route};
use simplex::{LinearProgram, Row, Sense};

/// Values this close to 0 or 1 are snapped after solving.
const SNAP_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variable {
    Place { station: usize, service: usize },
    Route { user: usize, to: Route },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowKind {
    /// Each user routed exactly once.
    Assignment { user: usize },
    /// y_nu ≤ x_{n,s_u}.
    Link { user: usize, station: usize },
    Capacity { station: usize, resource: Resource },
    Adaptation,
}

/// LR-JSPRR in explicit form. Route variables exist only for covering
/// stations and the cloud.
#[derive(Clone, Debug)]
pub struct LpProblem {
    pub lp: LinearProgram,
    pub variables: Vec<Variable>,
    pub row_kinds: Vec<RowKind>,
    n_stations: usize,
    n_services: usize,
    /// Per user: (destination, variable index), covering stations first then cloud.
    route_vars: Vec<Vec<(Route, usize)>>,
    storage_of_service: Vec<f64>,
    /// Per-request compute/uplink/downlink of each user (storage unused).
    demand_of_user: Vec<Resources>,
}

impl LpProblem {
    pub fn n_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn n_constraints(&self) -> usize {
        self.lp.rows.len()
    }

    pub fn n_route_variables(&self) -> usize {
        self.route_vars.iter().map(Vec::len).sum()
    }

    fn var_name(&self, j: usize) -> String {
        match self.variables[j] {
            Variable::Place { station, service } => format!("x_{station}_{service}"),
            Variable::Route { user, to: Route::Station(n) } => format!("y_{n}_{user}"),
            Variable::Route { user, to: Route::Cloud } => format!("yc_{user}"),
        }
    }

    fn row_name(&self, i: usize) -> String {
        match self.row_kinds[i] {
            RowKind::Assignment { user } => format!("assign_{user}"),
            RowKind::Link { user, station } => format!("link_{station}_{user}"),
            RowKind::Capacity { station, resource } => format!("{resource}_{station}"),
            RowKind::Adaptation => "adaptation".into(),
        }
    }

    /// CPLEX LP text, readable by common external solvers.
    pub fn to_lp_format(&self) -> String {
        let mut out = String::new();
        let term = |out: &mut String, first: bool, c: f64, name: &str| {
            let sign = match (c < 0.0, first) {
                (true, _) => " -",
                (false, true) => "",
                (false, false) => " +",
            };
            let mag = c.abs();
            if mag == 1.0 {
                let _ = write!(out, "{sign} {name}");
            } else {
                let _ = write!(out, "{sign} {mag:?} {name}");
            }
        };
        out.push_str("\\ LR-JSPRR relaxation\nMinimize\n obj:");
        let mut first = true;
        for (j, &c) in self.lp.objective.iter().enumerate() {
            if c != 0.0 {
                term(&mut out, first, c, &self.var_name(j));
                first = false;
            }
        }
        out.push_str("\nSubject To\n");
        for (i, row) in self.lp.rows.iter().enumerate() {
            let _ = write!(out, " {}:", self.row_name(i));
            if row.coefs.is_empty() && self.n_variables() > 0 {
                let _ = write!(out, " 0 {}", self.var_name(0));
            }
            for (k, &(j, c)) in row.coefs.iter().enumerate() {
                term(&mut out, k == 0, c, &self.var_name(j));
            }
            let op = match row.sense {
                Sense::Le => "<=",
                Sense::Ge => ">=",
                Sense::Eq => "=",
            };
            let _ = writeln!(out, " {op} {:?}", row.rhs);
        }
        out.push_str("Bounds\n");
        for j in 0..self.n_variables() {
            let _ = writeln!(out, " 0 <= {} <= {:?}", self.var_name(j), self.lp.upper[j]);
        }
        out.push_str("End\n");
        out
    }
}

/// Transcribes the relaxation: assignment equalities, placement links,
/// four capacity rows per station and, when requested, the adaptation row.
///
/// An infinite budget omits the adaptation row since it can never bind.
pub fn build_lp(instance: &Instance, include_adaptation: bool) -> Result<LpProblem> {
    let report = instance.validate();
    if !report.is_ok() {
        return Err(Error::InvalidInstance(report.violations.join("; ")));
    }
    if include_adaptation && !instance.has_adaptation() {
        return Err(Error::MissingAdaptationData);
    }
    let (n_st, n_sv) = (instance.n_stations(), instance.n_services());

    let mut variables = Vec::new();
    for station in 0..n_st {
        for service in 0..n_sv {
            variables.push(Variable::Place { station, service });
        }
    }
    let mut route_vars = Vec::with_capacity(instance.n_users());
    for user in &instance.users {
        let mut vars = Vec::with_capacity(user.coverage.len() + 1);
        for &n in &user.coverage {
            vars.push((Route::Station(n), variables.len()));
            variables.push(Variable::Route { user: user.id, to: Route::Station(n) });
        }
        vars.push((Route::Cloud, variables.len()));
        variables.push(Variable::Route { user: user.id, to: Route::Cloud });
        route_vars.push(vars);
    }

    let mut objective = vec![0.0; variables.len()];
    for vars in &route_vars {
        let (_, cloud) = *vars.last().unwrap();
        objective[cloud] = 1.0;
    }

    let mut rows = Vec::new();
    let mut row_kinds = Vec::new();
    for (u, vars) in route_vars.iter().enumerate() {
        rows.push(Row {
            coefs: vars.iter().map(|&(_, j)| (j, 1.0)).collect(),
            sense: Sense::Eq,
            rhs: 1.0,
        });
        row_kinds.push(RowKind::Assignment { user: u });
    }
    for (u, vars) in route_vars.iter().enumerate() {
        let s = instance.users[u].service;
        for &(to, j) in vars {
            if let Route::Station(n) = to {
                rows.push(Row {
                    coefs: vec![(j, 1.0), (n * n_sv + s, -1.0)],
                    sense: Sense::Le,
                    rhs: 0.0,
                });
                row_kinds.push(RowKind::Link { user: u, station: n });
            }
        }
    }
    for (n, bs) in instance.stations.iter().enumerate() {
        for r in Resource::ALL {
            let coefs: Vec<(usize, f64)> = match r {
                Resource::Storage => (0..n_sv)
                    .map(|s| (n * n_sv + s, instance.services[s].storage))
                    .collect(),
                _ => route_vars
                    .iter()
                    .enumerate()
                    .flat_map(|(u, vars)| {
                        vars.iter()
                            .filter(move |(to, _)| *to == Route::Station(n))
                            .map(move |&(_, j)| (j, instance.request_requirement(u, r)))
                    })
                    .collect(),
            };
            rows.push(Row {
                coefs,
                sense: Sense::Le,
                rhs: bs.capacity(r),
            });
            row_kinds.push(RowKind::Capacity { station: n, resource: r });
        }
    }
    if include_adaptation {
        let budget = instance.adaptation_budget.unwrap();
        if budget.is_finite() {
            let coefs = (0..n_st)
                .flat_map(|n| (0..n_sv).map(move |s| (n, s)))
                .filter(|&(n, s)| !instance.previously_placed(n, s))
                .map(|(n, s)| (n * n_sv + s, instance.services[s].storage))
                .collect();
            rows.push(Row {
                coefs,
                sense: Sense::Le,
                rhs: budget,
            });
            row_kinds.push(RowKind::Adaptation);
        }
    }

    let upper = vec![1.0; variables.len()];
    Ok(LpProblem {
        lp: LinearProgram {
            objective,
            upper,
            rows,
        },
        variables,
        row_kinds,
        n_stations: n_st,
        n_services: n_sv,
        route_vars,
        storage_of_service: instance.services.iter().map(|s| s.storage).collect(),
        demand_of_user: (0..instance.n_users())
            .map(|u| {
                let mut d = Resources::default();
                for r in Resource::ROUTING {
                    *d.get_mut(r) = instance.request_requirement(u, r);
                }
                d
            })
            .collect(),
    })
}

/// Optimal fractional placement and routing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FractionalSolution {
    pub n_stations: usize,
    pub n_services: usize,
    /// Row-major N×S placement fractions.
    pub x: Vec<f64>,
    /// Per user: (destination, fraction), covering stations first then cloud.
    pub y: Vec<Vec<(Route, f64)>>,
    /// Fractional cloud load ξ†.
    pub objective: f64,
    /// Minimum fractional compute load over stations, GHz.
    pub lambda: f64,
    /// Minimum fractional uplink load over stations, Mbps.
    pub mu: f64,
    /// Minimum fractional downlink load over stations, Mbps.
    pub nu: f64,
    /// Per-station fractional loads.
    pub station_loads: Vec<Resources>,
    pub iterations: usize,
}

impl FractionalSolution {
    pub fn placement(&self, n: usize, s: usize) -> f64 {
        self.x[n * self.n_services + s]
    }

    /// y† for `user` towards `to` (0 if no such variable).
    pub fn route(&self, user: usize, to: Route) -> f64 {
        self.y[user]
            .iter()
            .find(|(r, _)| *r == to)
            .map_or(0.0, |&(_, v)| v)
    }

    pub fn cloud(&self, user: usize) -> f64 {
        self.route(user, Route::Cloud)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpStats {
    pub xi: f64,
    pub lambda: f64,
    pub mu: f64,
    pub nu: f64,
}

pub fn lp_stats(frac: &FractionalSolution) -> LpStats {
    LpStats {
        xi: frac.objective,
        lambda: frac.lambda,
        mu: frac.mu,
        nu: frac.nu,
    }
}

fn snap(v: f64) -> f64 {
    if v < SNAP_TOL {
        0.0
    } else if v > 1.0 - SNAP_TOL {
        1.0
    } else {
        v
    }
}

pub fn solve_lp(problem: &LpProblem) -> Result<FractionalSolution> {
    let sol = simplex::solve(&problem.lp)?;
    let x: Vec<f64> = (0..problem.n_stations * problem.n_services)
        .map(|j| snap(sol.x[j]))
        .collect();
    let y: Vec<Vec<(Route, f64)>> = problem
        .route_vars
        .iter()
        .map(|vars| vars.iter().map(|&(to, j)| (to, snap(sol.x[j]))).collect())
        .collect();

    let mut loads = vec![Resources::default(); problem.n_stations];
    for (n, load) in loads.iter_mut().enumerate() {
        load.storage = (0..problem.n_services)
            .map(|s| problem.storage_of_service[s] * x[n * problem.n_services + s])
            .sum();
    }
    for (u, routes) in y.iter().enumerate() {
        for &(to, v) in routes {
            if let Route::Station(n) = to {
                for r in Resource::ROUTING {
                    *loads[n].get_mut(r) += v * problem.demand_of_user[u].get(r);
                }
            }
        }
    }
    let min_of = |r: Resource| {
        if loads.is_empty() {
            0.0
        } else {
            loads.iter().map(|l| l.get(r)).fold(f64::INFINITY, f64::min)
        }
    };
    let objective = y.iter().map(|v| v.last().map_or(0.0, |c| c.1)).sum();
    Ok(FractionalSolution {
        n_stations: problem.n_stations,
        n_services: problem.n_services,
        x,
        y,
        objective,
        lambda: min_of(Resource::Compute),
        mu: min_of(Resource::Uplink),
        nu: min_of(Resource::Downlink),
        station_loads: loads,
        iterations: sol.iterations,
    })
}
