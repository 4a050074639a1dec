//! Domain types for joint service placement and request routing instances,
//! and exact evaluation of integer solutions against every constraint.
//!
//! Units: storage in GB, compute in GHz, bandwidth in Mbps. Loads are
//! compared against capacities with an absolute tolerance of [`FEAS_TOL`].

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance used for every capacity comparison.
pub const FEAS_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resource {
    Storage,
    Compute,
    Uplink,
    Downlink,
}

impl Resource {
    pub const ALL: [Resource; 4] = [
        Resource::Storage,
        Resource::Compute,
        Resource::Uplink,
        Resource::Downlink,
    ];
    /// Resources consumed per routed request.
    pub const ROUTING: [Resource; 3] = [Resource::Compute, Resource::Uplink, Resource::Downlink];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Resource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Resource::Storage => "storage",
            Resource::Compute => "compute",
            Resource::Uplink => "uplink",
            Resource::Downlink => "downlink",
        };
        f.write_str(s)
    }
}

/// A quantity per resource type.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Resources {
    pub storage: f64,
    pub compute: f64,
    pub uplink: f64,
    pub downlink: f64,
}

impl Resources {
    pub fn get(&self, r: Resource) -> f64 {
        match r {
            Resource::Storage => self.storage,
            Resource::Compute => self.compute,
            Resource::Uplink => self.uplink,
            Resource::Downlink => self.downlink,
        }
    }

    pub fn get_mut(&mut self, r: Resource) -> &mut f64 {
        match r {
            Resource::Storage => &mut self.storage,
            Resource::Compute => &mut self.compute,
            Resource::Uplink => &mut self.uplink,
            Resource::Downlink => &mut self.downlink,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ServiceSpec {
    pub id: usize,
    /// Storage footprint, GB.
    #[serde(rename = "r")]
    pub storage: f64,
    /// Compute per request, GHz.
    #[serde(rename = "c")]
    pub compute: f64,
    /// Uplink per request, Mbps.
    #[serde(rename = "bu")]
    pub uplink: f64,
    /// Downlink per request, Mbps.
    #[serde(rename = "bd")]
    pub downlink: f64,
}

impl ServiceSpec {
    pub fn requirement(&self, r: Resource) -> f64 {
        match r {
            Resource::Storage => self.storage,
            Resource::Compute => self.compute,
            Resource::Uplink => self.uplink,
            Resource::Downlink => self.downlink,
        }
    }

    pub fn unit(id: usize) -> Self {
        ServiceSpec {
            id,
            storage: 1.0,
            compute: 1.0,
            uplink: 1.0,
            downlink: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaseStation {
    pub id: usize,
    #[serde(rename = "R")]
    pub storage_cap: f64,
    #[serde(rename = "C")]
    pub compute_cap: f64,
    #[serde(rename = "Bu")]
    pub uplink_cap: f64,
    #[serde(rename = "Bd")]
    pub downlink_cap: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
}

impl BaseStation {
    pub fn new(id: usize, storage: f64, compute: f64, uplink: f64, downlink: f64) -> Self {
        BaseStation {
            id,
            storage_cap: storage,
            compute_cap: compute,
            uplink_cap: uplink,
            downlink_cap: downlink,
            x: None,
            y: None,
        }
    }

    pub fn capacity(&self, r: Resource) -> f64 {
        match r {
            Resource::Storage => self.storage_cap,
            Resource::Compute => self.compute_cap,
            Resource::Uplink => self.uplink_cap,
            Resource::Downlink => self.downlink_cap,
        }
    }

    pub fn capacity_mut(&mut self, r: Resource) -> &mut f64 {
        match r {
            Resource::Storage => &mut self.storage_cap,
            Resource::Compute => &mut self.compute_cap,
            Resource::Uplink => &mut self.uplink_cap,
            Resource::Downlink => &mut self.downlink_cap,
        }
    }

    pub fn position(&self) -> Option<(f64, f64)> {
        self.x.zip(self.y)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct User {
    pub id: usize,
    /// Stations covering this user. May be empty (cloud-only user).
    pub coverage: Vec<usize>,
    /// The single service this user requests.
    pub service: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
}

impl User {
    pub fn position(&self) -> Option<(f64, f64)> {
        self.x.zip(self.y)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub services: Vec<ServiceSpec>,
    pub stations: Vec<BaseStation>,
    pub users: Vec<User>,
    /// Placement of the previous period, N×S with 0/1 entries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prev_placement: Option<Vec<Vec<u8>>>,
    /// Adaptation budget in GB.
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub adaptation_budget: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl Instance {
    pub fn n_stations(&self) -> usize {
        self.stations.len()
    }

    pub fn n_services(&self) -> usize {
        self.services.len()
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    /// Whether `x^p_{ns} = 1`. Absent previous placement reads as all zeros.
    pub fn previously_placed(&self, n: usize, s: usize) -> bool {
        self.prev_placement
            .as_ref()
            .and_then(|p| p.get(n))
            .and_then(|row| row.get(s))
            .is_some_and(|&v| v == 1)
    }

    pub fn has_adaptation(&self) -> bool {
        self.prev_placement.is_some() && self.adaptation_budget.is_some()
    }

    /// True when every service has r = c = b↑ = b↓ = 1.
    pub fn is_unit(&self) -> bool {
        self.services
            .iter()
            .all(|s| Resource::ALL.iter().all(|&r| s.requirement(r) == 1.0))
    }

    /// Requirement of the service requested by `user` in a routing resource.
    pub fn request_requirement(&self, user: usize, r: Resource) -> f64 {
        self.services[self.users[user].service].requirement(r)
    }

    /// Copy of the instance with every user's requested service replaced.
    pub fn with_demand(&self, demand: &[usize]) -> Instance {
        let mut out = self.clone();
        for (u, &s) in out.users.iter_mut().zip(demand) {
            u.service = s;
        }
        out
    }

    /// Structural checks: dangling ids, negative or non-finite values,
    /// malformed previous placement, budget without placement.
    pub fn validate(&self) -> ValidationReport {
        let mut v = Vec::new();
        let (n, s) = (self.n_stations(), self.n_services());
        for (i, svc) in self.services.iter().enumerate() {
            if svc.id != i {
                v.push(format!("service at position {i} has id {}", svc.id));
            }
            for r in Resource::ALL {
                let q = svc.requirement(r);
                if !q.is_finite() || q < 0.0 {
                    v.push(format!("service {i} has invalid {r} requirement {q}"));
                }
            }
        }
        for (i, bs) in self.stations.iter().enumerate() {
            if bs.id != i {
                v.push(format!("station at position {i} has id {}", bs.id));
            }
            for r in Resource::ALL {
                let q = bs.capacity(r);
                if !q.is_finite() || q < 0.0 {
                    v.push(format!("station {i} has invalid {r} capacity {q}"));
                }
            }
        }
        for (i, u) in self.users.iter().enumerate() {
            if u.id != i {
                v.push(format!("user at position {i} has id {}", u.id));
            }
            if u.service >= s {
                v.push(format!("user {i}: service id {} out of range", u.service));
            }
            for &b in &u.coverage {
                if b >= n {
                    v.push(format!("user {i}: BS id {b} out of range"));
                }
            }
            let mut cov = u.coverage.clone();
            cov.sort_unstable();
            if cov.windows(2).any(|w| w[0] == w[1]) {
                v.push(format!("user {i}: duplicate BS ids in coverage"));
            }
        }
        match (&self.prev_placement, self.adaptation_budget) {
            (Some(_), None) => v.push("previous placement present without budget D".into()),
            (None, Some(_)) => v.push("budget D present without previous placement".into()),
            _ => {}
        }
        if let Some(d) = self.adaptation_budget {
            if d.is_nan() || d < 0.0 {
                v.push(format!("budget D = {d} must be nonnegative"));
            }
        }
        if let Some(p) = &self.prev_placement {
            if p.len() != n {
                v.push(format!("previous placement has {} rows, expected {n}", p.len()));
            }
            for (i, row) in p.iter().enumerate() {
                if row.len() != s {
                    v.push(format!(
                        "previous placement row {i} has {} entries, expected {s}",
                        row.len()
                    ));
                }
                if row.iter().any(|&x| x > 1) {
                    v.push(format!("previous placement row {i} has non-binary entries"));
                }
            }
        }
        ValidationReport { violations: v }
    }
}

/// Binary N×S placement matrix.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Placement {
    n_services: usize,
    bits: Vec<bool>,
}

impl Placement {
    pub fn empty(n_stations: usize, n_services: usize) -> Self {
        Placement {
            n_services,
            bits: vec![false; n_stations * n_services],
        }
    }

    pub fn n_stations(&self) -> usize {
        self.bits.len().checked_div(self.n_services).unwrap_or(0)
    }

    pub fn n_services(&self) -> usize {
        self.n_services
    }

    pub fn get(&self, n: usize, s: usize) -> bool {
        self.bits[n * self.n_services + s]
    }

    pub fn set(&mut self, n: usize, s: usize, v: bool) {
        self.bits[n * self.n_services + s] = v;
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let ns = self.n_services;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i / ns, i % ns))
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        (0..self.n_stations())
            .map(|n| (0..self.n_services).map(|s| self.get(n, s) as u8).collect())
            .collect()
    }

    pub fn from_rows(rows: &[Vec<u8>], n_services: usize) -> Result<Self> {
        let mut p = Placement::empty(rows.len(), n_services);
        for (n, row) in rows.iter().enumerate() {
            if row.len() != n_services {
                return Err(Error::DimensionMismatch {
                    what: "placement row",
                    expected: n_services,
                    found: row.len(),
                });
            }
            for (s, &v) in row.iter().enumerate() {
                p.set(n, s, v == 1);
            }
        }
        Ok(p)
    }
}

impl Serialize for Placement {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(ser)
    }
}

impl<'de> Deserialize<'de> for Placement {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<u8>>::deserialize(de)?;
        let s = rows.first().map_or(0, Vec::len);
        Placement::from_rows(&rows, s).map_err(serde::de::Error::custom)
    }
}

/// Where one request is served. Serialized as a station id or `null` for the cloud.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "Option<usize>", into = "Option<usize>")]
pub enum Route {
    Station(usize),
    Cloud,
}

impl From<Option<usize>> for Route {
    fn from(v: Option<usize>) -> Self {
        v.map_or(Route::Cloud, Route::Station)
    }
}

impl From<Route> for Option<usize> {
    fn from(r: Route) -> Self {
        match r {
            Route::Station(n) => Some(n),
            Route::Cloud => None,
        }
    }
}

/// Binary placement plus exactly one route per user.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegerSolution {
    pub placement: Placement,
    pub routing: Vec<Route>,
}

impl IntegerSolution {
    /// Nothing placed, everyone on the cloud.
    pub fn all_cloud(instance: &Instance) -> Self {
        IntegerSolution {
            placement: Placement::empty(instance.n_stations(), instance.n_services()),
            routing: vec![Route::Cloud; instance.n_users()],
        }
    }

    pub fn cloud_load(&self) -> usize {
        self.routing.iter().filter(|r| **r == Route::Cloud).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintKind {
    Storage,
    Compute,
    Uplink,
    Downlink,
    Adaptation,
}

impl From<Resource> for ConstraintKind {
    fn from(r: Resource) -> Self {
        match r {
            Resource::Storage => ConstraintKind::Storage,
            Resource::Compute => ConstraintKind::Compute,
            Resource::Uplink => ConstraintKind::Uplink,
            Resource::Downlink => ConstraintKind::Downlink,
        }
    }
}

/// One violated capacity or adaptation constraint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ConstraintKind,
    /// `None` for the network-wide adaptation constraint.
    pub station: Option<usize>,
    pub load: f64,
    pub capacity: f64,
    /// load / capacity; `None` when the capacity is zero.
    pub factor: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    pub cloud_load: usize,
    pub served: usize,
    pub loads: Vec<Resources>,
    /// Per station, indexed by [`Resource::index`]. `None` marks positive load
    /// on a zero capacity, where the ratio is undefined.
    pub violation_factors: Vec<[Option<f64>; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adaptation_spend: Option<f64>,
    pub feasible: bool,
}

impl LoadReport {
    pub fn violation_factor(&self, station: usize, r: Resource) -> Result<f64> {
        self.violation_factors[station][r.index()].ok_or(Error::ZeroCapacityLoad {
            station,
            resource: r,
            load: self.loads[station].get(r),
        })
    }

    /// Largest factor for one resource across stations (`INFINITY` if any is undefined).
    pub fn max_factor(&self, r: Resource) -> f64 {
        self.violation_factors
            .iter()
            .map(|f| f[r.index()].unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max)
    }

    /// Mean load/capacity over stations with positive capacity.
    pub fn mean_utilization(&self, instance: &Instance, r: Resource) -> f64 {
        let vals: Vec<f64> = instance
            .stations
            .iter()
            .zip(&self.loads)
            .filter(|(bs, _)| bs.capacity(r) > 0.0)
            .map(|(bs, l)| l.get(r) / bs.capacity(r))
            .collect();
        if vals.is_empty() {
            0.0
        } else {
            vals.iter().sum::<f64>() / vals.len() as f64
        }
    }
}

/// load/capacity, 0 for 0/0, `None` for positive load on zero capacity.
pub fn ratio(load: f64, capacity: f64) -> Option<f64> {
    if capacity > 0.0 {
        Some(load / capacity)
    } else if load <= FEAS_TOL {
        Some(0.0)
    } else {
        None
    }
}

fn check_shape(instance: &Instance, sol: &IntegerSolution) -> Result<()> {
    let p = &sol.placement;
    if p.n_services() != instance.n_services() {
        return Err(Error::DimensionMismatch {
            what: "placement services",
            expected: instance.n_services(),
            found: p.n_services(),
        });
    }
    if p.n_stations() != instance.n_stations() && instance.n_services() > 0 {
        return Err(Error::DimensionMismatch {
            what: "placement stations",
            expected: instance.n_stations(),
            found: p.n_stations(),
        });
    }
    if sol.routing.len() != instance.n_users() {
        return Err(Error::DimensionMismatch {
            what: "routing",
            expected: instance.n_users(),
            found: sol.routing.len(),
        });
    }
    for (u, route) in sol.routing.iter().enumerate() {
        if let Route::Station(n) = *route {
            let user = &instance.users[u];
            if !user.coverage.contains(&n) {
                return Err(Error::RouteNotCovering { user: u, station: n });
            }
            if !p.get(n, user.service) {
                return Err(Error::ServiceNotPlaced {
                    user: u,
                    station: n,
                    service: user.service,
                });
            }
        }
    }
    Ok(())
}

/// Total data of placed services that were absent in the previous period.
pub fn adaptation_spend(instance: &Instance, placement: &Placement) -> f64 {
    placement
        .pairs()
        .filter(|&(n, s)| !instance.previously_placed(n, s))
        .map(|(_, s)| instance.services[s].storage)
        .sum()
}

/// Exact loads, cloud load and violation factors of an integer solution.
///
/// Routing to a station outside the user's coverage, or to one that does not
/// hold the requested service, is a hard error rather than a violation.
pub fn evaluate_solution(instance: &Instance, sol: &IntegerSolution) -> Result<LoadReport> {
    check_shape(instance, sol)?;
    let n = instance.n_stations();
    let mut loads = vec![Resources::default(); n];
    for (bs, load) in loads.iter_mut().enumerate() {
        load.storage = (0..instance.n_services())
            .filter(|&s| sol.placement.get(bs, s))
            .map(|s| instance.services[s].storage)
            .sum();
    }
    let mut cloud_load = 0;
    for (u, route) in sol.routing.iter().enumerate() {
        match *route {
            Route::Cloud => cloud_load += 1,
            Route::Station(bs) => {
                let svc = &instance.services[instance.users[u].service];
                for r in Resource::ROUTING {
                    *loads[bs].get_mut(r) += svc.requirement(r);
                }
            }
        }
    }
    let mut feasible = true;
    let violation_factors: Vec<[Option<f64>; 4]> = instance
        .stations
        .iter()
        .zip(&loads)
        .map(|(bs, load)| {
            Resource::ALL.map(|r| {
                if load.get(r) > bs.capacity(r) + FEAS_TOL {
                    feasible = false;
                }
                ratio(load.get(r), bs.capacity(r))
            })
        })
        .collect();
    let adaptation = instance.adaptation_budget.map(|d| {
        let spend = adaptation_spend(instance, &sol.placement);
        if spend > d + FEAS_TOL {
            feasible = false;
        }
        spend
    });
    Ok(LoadReport {
        cloud_load,
        served: instance.n_users() - cloud_load,
        loads,
        violation_factors,
        adaptation_spend: adaptation,
        feasible,
    })
}

/// Every violated capacity constraint (Eqs. 5-8) and the adaptation budget.
/// Empty exactly when [`LoadReport::feasible`] holds.
pub fn check_feasibility(instance: &Instance, sol: &IntegerSolution) -> Result<Vec<Violation>> {
    let report = evaluate_solution(instance, sol)?;
    let mut out = Vec::new();
    for (n, (bs, load)) in instance.stations.iter().zip(&report.loads).enumerate() {
        for r in Resource::ALL {
            if load.get(r) > bs.capacity(r) + FEAS_TOL {
                out.push(Violation {
                    kind: r.into(),
                    station: Some(n),
                    load: load.get(r),
                    capacity: bs.capacity(r),
                    factor: report.violation_factors[n][r.index()],
                });
            }
        }
    }
    if let (Some(d), Some(spend)) = (instance.adaptation_budget, report.adaptation_spend) {
        if spend > d + FEAS_TOL {
            out.push(Violation {
                kind: ConstraintKind::Adaptation,
                station: None,
                load: spend,
                capacity: d,
                factor: ratio(spend, d),
            });
        }
    }
    Ok(out)
}
