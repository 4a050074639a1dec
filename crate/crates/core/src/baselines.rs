//! Comparison algorithms and exact oracles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    adaptation_spend, Instance, IntegerSolution, Placement, Resource, Route, FEAS_TOL,
};
use crate::rounding::repair_routing;

/// Brute-force limits.
pub const MAX_ORACLE_PAIRS: usize = 12;
pub const MAX_ORACLE_USERS: usize = 8;

/// Set of placement elements e_ns.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlacementSet(pub Vec<(usize, usize)>);

impl PlacementSet {
    pub fn to_placement(&self, instance: &Instance) -> Result<Placement> {
        let mut p = Placement::empty(instance.n_stations(), instance.n_services());
        for &(n, s) in &self.0 {
            if n >= instance.n_stations() || s >= instance.n_services() {
                return Err(Error::InvalidInstance(format!("placement pair ({n}, {s}) out of range")));
            }
            p.set(n, s, true);
        }
        Ok(p)
    }

    pub fn with(&self, n: usize, s: usize) -> PlacementSet {
        let mut v = self.0.clone();
        if !v.contains(&(n, s)) {
            v.push((n, s));
        }
        PlacementSet(v)
    }
}

impl From<&Placement> for PlacementSet {
    fn from(p: &Placement) -> Self {
        PlacementSet(p.pairs().collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreedyOutcome {
    /// Storage-feasible placement with nearest-station routing; compute and
    /// bandwidth ignored.
    pub raw: IntegerSolution,
    /// `raw` after moving requests off overloaded stations.
    pub repaired: IntegerSolution,
}

fn nearest_holding(instance: &Instance, placement: &Placement, user: usize) -> Route {
    let u = &instance.users[user];
    let dist = |n: usize| -> f64 {
        let bs = &instance.stations[n];
        match (bs.position(), u.position()) {
            (Some((bx, by)), Some((ux, uy))) => (bx - ux).hypot(by - uy),
            _ => 0.0,
        }
    };
    let mut cands: Vec<usize> = u
        .coverage
        .iter()
        .copied()
        .filter(|&n| placement.get(n, u.service))
        .collect();
    cands.sort_by(|&a, &b| dist(a).total_cmp(&dist(b)).then(a.cmp(&b)));
    cands.first().map_or(Route::Cloud, |&n| Route::Station(n))
}

/// Greedy caching: repeatedly add the (station, service) pair that removes
/// the most requests from the cloud under compute/bandwidth-oblivious
/// routing, while storage allows.
pub fn greedy_cache(instance: &Instance) -> Result<GreedyOutcome> {
    let (n_st, n_sv) = (instance.n_stations(), instance.n_services());
    let mut requesters: Vec<Vec<usize>> = vec![Vec::new(); n_st * n_sv];
    for (u, user) in instance.users.iter().enumerate() {
        for &n in &user.coverage {
            requesters[n * n_sv + user.service].push(u);
        }
    }
    let mut placement = Placement::empty(n_st, n_sv);
    let mut used = vec![0.0; n_st];
    let mut served = vec![false; instance.n_users()];
    loop {
        let mut best: Option<(usize, usize, usize)> = None;
        for n in 0..n_st {
            let room = instance.stations[n].storage_cap - used[n];
            for s in 0..n_sv {
                if placement.get(n, s) || instance.services[s].storage > room + FEAS_TOL {
                    continue;
                }
                let gain = requesters[n * n_sv + s].iter().filter(|&&u| !served[u]).count();
                if gain > 0 && best.is_none_or(|b| gain > b.2) {
                    best = Some((n, s, gain));
                }
            }
        }
        let Some((n, s, _)) = best else { break };
        placement.set(n, s, true);
        used[n] += instance.services[s].storage;
        for &u in &requesters[n * n_sv + s] {
            served[u] = true;
        }
    }
    let routing = (0..instance.n_users())
        .map(|u| nearest_holding(instance, &placement, u))
        .collect();
    let raw = IntegerSolution { placement, routing };
    let repaired = repair_routing(instance, &raw)?;
    Ok(GreedyOutcome { raw, repaired })
}

/// Dinic max-flow on a small dense-ish graph.
struct FlowNetwork {
    adj: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<u64>,
}

impl FlowNetwork {
    fn new(n: usize) -> Self {
        FlowNetwork {
            adj: vec![Vec::new(); n],
            to: Vec::new(),
            cap: Vec::new(),
        }
    }

    fn add_edge(&mut self, a: usize, b: usize, c: u64) {
        self.adj[a].push(self.to.len());
        self.to.push(b);
        self.cap.push(c);
        self.adj[b].push(self.to.len());
        self.to.push(a);
        self.cap.push(0);
    }

    fn levels(&self, s: usize) -> Vec<i64> {
        let mut level = vec![-1; self.adj.len()];
        level[s] = 0;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            for &e in &self.adj[v] {
                let w = self.to[e];
                if self.cap[e] > 0 && level[w] < 0 {
                    level[w] = level[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        level
    }

    fn augment(&mut self, v: usize, t: usize, f: u64, level: &[i64], it: &mut [usize]) -> u64 {
        if v == t {
            return f;
        }
        while it[v] < self.adj[v].len() {
            let e = self.adj[v][it[v]];
            let w = self.to[e];
            if self.cap[e] > 0 && level[w] == level[v] + 1 {
                let d = self.augment(w, t, f.min(self.cap[e]), level, it);
                if d > 0 {
                    self.cap[e] -= d;
                    self.cap[e ^ 1] += d;
                    return d;
                }
            }
            it[v] += 1;
        }
        0
    }

    fn max_flow(&mut self, s: usize, t: usize) -> u64 {
        let mut flow = 0;
        loop {
            let level = self.levels(s);
            if level[t] < 0 {
                return flow;
            }
            let mut it = vec![0; self.adj.len()];
            loop {
                let f = self.augment(s, t, u64::MAX, &level, &mut it);
                if f == 0 {
                    break;
                }
                flow += f;
            }
        }
    }
}

/// f(E) on unit-requirement instances via max-flow:
/// source → user (1), user → covering station holding its service (1),
/// station → sink (⌊min{C, B↑, B↓}⌋).
pub fn max_served_flow(instance: &Instance, placement: &Placement) -> Result<usize> {
    if !instance.is_unit() {
        return Err(Error::NotUnit("max-flow evaluation".into()));
    }
    let (n_users, n_st) = (instance.n_users(), instance.n_stations());
    let (source, sink) = (n_users + n_st, n_users + n_st + 1);
    let mut g = FlowNetwork::new(n_users + n_st + 2);
    for (u, user) in instance.users.iter().enumerate() {
        g.add_edge(source, u, 1);
        for &n in &user.coverage {
            if placement.get(n, user.service) {
                g.add_edge(u, n_users + n, 1);
            }
        }
    }
    for (n, bs) in instance.stations.iter().enumerate() {
        let cap = bs.compute_cap.min(bs.uplink_cap).min(bs.downlink_cap);
        let cap = (cap + FEAS_TOL).floor().clamp(0.0, n_users as f64) as u64;
        g.add_edge(n_users + n, sink, cap);
    }
    Ok(g.max_flow(source, sink) as usize)
}

/// f(E) by exhaustive routing search; any requirements, at most
/// [`MAX_ORACLE_USERS`] users.
pub fn max_served_bruteforce(instance: &Instance, placement: &Placement) -> Result<usize> {
    if instance.n_users() > MAX_ORACLE_USERS {
        return Err(Error::TooLarge(format!(
            "{} users exceeds {MAX_ORACLE_USERS}",
            instance.n_users()
        )));
    }
    let mut search = RoutingSearch::new(instance, placement, 0);
    search.run();
    Ok(search.best_served.unwrap_or(0))
}

/// f(E): maximum number of requests the stations can serve under placement E.
pub fn max_served_given_placement(instance: &Instance, placement: &PlacementSet) -> Result<usize> {
    let p = placement.to_placement(instance)?;
    if instance.is_unit() {
        max_served_flow(instance, &p)
    } else {
        max_served_bruteforce(instance, &p)
    }
}

/// F(E): served count when compute and bandwidth never congest.
pub fn max_served_uncongested(instance: &Instance, placement: &PlacementSet) -> Result<usize> {
    let mut relaxed = instance.clone();
    let big = instance.n_users() as f64 * instance
        .services
        .iter()
        .map(|s| s.compute.max(s.uplink).max(s.downlink))
        .fold(1.0, f64::max);
    for bs in &mut relaxed.stations {
        for r in Resource::ROUTING {
            *bs.capacity_mut(r) = big;
        }
    }
    max_served_given_placement(&relaxed, placement)
}

/// Depth-first routing search for a fixed placement. Options per user are
/// tried in ascending station id with the cloud last; only strict
/// improvements are kept, so the first optimum found is lexicographically
/// smallest.
struct RoutingSearch<'a> {
    instance: &'a Instance,
    options: Vec<Vec<usize>>,
    /// Users with at least one option, suffix counts for the bound.
    coverable_suffix: Vec<usize>,
    loads: Vec<[f64; 3]>,
    current: Vec<Route>,
    best_served: Option<usize>,
    best: Vec<Route>,
    floor: usize,
}

impl<'a> RoutingSearch<'a> {
    /// `floor`: only routings serving strictly more than `floor - 1` users
    /// are recorded (0 records anything).
    fn new(instance: &'a Instance, placement: &Placement, floor: usize) -> Self {
        let options: Vec<Vec<usize>> = instance
            .users
            .iter()
            .map(|u| {
                let mut o: Vec<usize> = u
                    .coverage
                    .iter()
                    .copied()
                    .filter(|&n| placement.get(n, u.service))
                    .collect();
                o.sort_unstable();
                o
            })
            .collect();
        let mut coverable_suffix = vec![0; options.len() + 1];
        for u in (0..options.len()).rev() {
            coverable_suffix[u] = coverable_suffix[u + 1] + usize::from(!options[u].is_empty());
        }
        RoutingSearch {
            instance,
            options,
            coverable_suffix,
            loads: vec![[0.0; 3]; instance.n_stations()],
            current: vec![Route::Cloud; instance.n_users()],
            best_served: None,
            best: Vec::new(),
            floor,
        }
    }

    fn upper_bound(&self) -> usize {
        self.coverable_suffix[0]
    }

    fn run(&mut self) {
        self.dfs(0, 0);
    }

    fn dfs(&mut self, u: usize, served: usize) {
        let target = self.best_served.map_or(self.floor, |b| b + 1);
        if served + self.coverable_suffix[u] < target {
            return;
        }
        if u == self.current.len() {
            self.best_served = Some(served);
            self.best = self.current.clone();
            return;
        }
        let svc = &self.instance.services[self.instance.users[u].service];
        let need = [svc.compute, svc.uplink, svc.downlink];
        for k in 0..self.options[u].len() {
            let n = self.options[u][k];
            let bs = &self.instance.stations[n];
            let caps = [bs.compute_cap, bs.uplink_cap, bs.downlink_cap];
            let fits = (0..3).all(|i| self.loads[n][i] + need[i] <= caps[i] + FEAS_TOL);
            if !fits {
                continue;
            }
            (0..3).for_each(|i| self.loads[n][i] += need[i]);
            self.current[u] = Route::Station(n);
            self.dfs(u + 1, served + 1);
            (0..3).for_each(|i| self.loads[n][i] -= need[i]);
        }
        self.current[u] = Route::Cloud;
        self.dfs(u + 1, served);
    }
}

/// Cloud load of an optimal solution for disjoint coverage and unit
/// requirements: each station keeps its ⌊R_n⌋ locally most requested
/// services and serves up to ⌊min{C_n, B↑_n, B↓_n}⌋ of their requests.
pub fn nonoverlapping_optimal(instance: &Instance) -> Result<usize> {
    if !instance.is_unit() {
        return Err(Error::NotUnit("non-overlapping closed form".into()));
    }
    if instance.users.iter().any(|u| u.coverage.len() > 1) {
        return Err(Error::InvalidInstance(
            "coverage regions overlap (some user has |N_u| > 1)".into(),
        ));
    }
    let mut served_total = 0usize;
    for (n, bs) in instance.stations.iter().enumerate() {
        let mut counts = vec![0usize; instance.n_services()];
        for u in instance.users.iter().filter(|u| u.coverage == [n]) {
            counts[u.service] += 1;
        }
        counts.sort_unstable_by(|a, b| b.cmp(a));
        let slots = (bs.storage_cap + FEAS_TOL).floor().max(0.0) as usize;
        let demand: usize = counts.iter().take(slots).sum();
        let cap = bs.compute_cap.min(bs.uplink_cap).min(bs.downlink_cap);
        let cap = (cap + FEAS_TOL).floor().max(0.0) as usize;
        served_total += demand.min(cap);
    }
    Ok(instance.n_users() - served_total)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution {
    pub solution: IntegerSolution,
    pub cloud_load: usize,
}

/// Exact optimum by enumerating storage-feasible (and budget-feasible)
/// placements and, for each, every routing. Ties resolve to the
/// lexicographically smallest (placement bits, routes) encoding.
pub fn optimal_bruteforce(instance: &Instance) -> Result<OracleSolution> {
    let (n_st, n_sv) = (instance.n_stations(), instance.n_services());
    let pairs = n_st * n_sv;
    if pairs > MAX_ORACLE_PAIRS || instance.n_users() > MAX_ORACLE_USERS {
        return Err(Error::TooLarge(format!(
            "N·S = {pairs} (max {MAX_ORACLE_PAIRS}), U = {} (max {MAX_ORACLE_USERS})",
            instance.n_users()
        )));
    }
    let mut best: Option<(usize, IntegerSolution)> = None;
    for mask in 0u32..(1u32 << pairs) {
        let mut p = Placement::empty(n_st, n_sv);
        for i in 0..pairs {
            if mask & (1 << (pairs - 1 - i)) != 0 {
                p.set(i / n_sv, i % n_sv, true);
            }
        }
        let storage_ok = (0..n_st).all(|n| {
            let used: f64 = (0..n_sv)
                .filter(|&s| p.get(n, s))
                .map(|s| instance.services[s].storage)
                .sum();
            used <= instance.stations[n].storage_cap + FEAS_TOL
        });
        if !storage_ok {
            continue;
        }
        if let Some(d) = instance.adaptation_budget {
            if adaptation_spend(instance, &p) > d + FEAS_TOL {
                continue;
            }
        }
        let floor = best.as_ref().map_or(0, |(served, _)| served + 1);
        let mut search = RoutingSearch::new(instance, &p, floor);
        if search.upper_bound() < floor {
            continue;
        }
        search.run();
        if let Some(served) = search.best_served {
            if best.as_ref().is_none_or(|(b, _)| served > *b) {
                best = Some((
                    served,
                    IntegerSolution {
                        placement: p,
                        routing: search.best,
                    },
                ));
            }
        }
    }
    let (served, solution) = best.expect("the empty placement is always feasible");
    Ok(OracleSolution {
        solution,
        cloud_load: instance.n_users() - served,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::counterexample;
    use crate::model::{evaluate_solution, BaseStation, ServiceSpec, User};

    #[test]
    fn counterexample_values() {
        let inst = counterexample();
        let a = PlacementSet(vec![(0, 0)]);
        let b = PlacementSet(vec![(0, 0), (1, 0)]);
        assert_eq!(max_served_given_placement(&inst, &PlacementSet::default()).unwrap(), 0);
        assert_eq!(max_served_given_placement(&inst, &a).unwrap(), 1);
        assert_eq!(max_served_given_placement(&inst, &b).unwrap(), 1);
        assert_eq!(max_served_given_placement(&inst, &a.with(0, 1)).unwrap(), 1);
        assert_eq!(max_served_given_placement(&inst, &b.with(0, 1)).unwrap(), 2);
    }

    #[test]
    fn oracle_on_counterexample() {
        let inst = counterexample();
        let o = optimal_bruteforce(&inst).unwrap();
        assert_eq!(o.cloud_load, 0);
        assert!(evaluate_solution(&inst, &o.solution).unwrap().feasible);
    }

    #[test]
    fn oracle_all_zero_capacities() {
        let mut inst = counterexample();
        for bs in &mut inst.stations {
            *bs = BaseStation::new(bs.id, 0.0, 0.0, 0.0, 0.0);
        }
        assert_eq!(optimal_bruteforce(&inst).unwrap().cloud_load, 2);
    }

    #[test]
    fn oracle_size_cap() {
        let mut inst = counterexample();
        inst.services = (0..7).map(ServiceSpec::unit).collect();
        assert!(matches!(optimal_bruteforce(&inst), Err(Error::TooLarge(_))));
    }

    #[test]
    fn greedy_picks_dominant_service() {
        let inst = Instance {
            services: vec![ServiceSpec::unit(0), ServiceSpec::unit(1)],
            stations: vec![BaseStation::new(0, 1.0, 10.0, 10.0, 10.0)],
            users: (0..5)
                .map(|id| User { id, coverage: vec![0], service: usize::from(id >= 3), x: None, y: None })
                .collect(),
            prev_placement: None,
            adaptation_budget: None,
        };
        let g = greedy_cache(&inst).unwrap();
        assert!(g.raw.placement.get(0, 0));
        assert!(!g.raw.placement.get(0, 1));
        assert_eq!(g.raw.cloud_load(), 2);
    }

    #[test]
    fn nonoverlap_worked_example() {
        // One station, R = 2, request counts {5, 3, 1}, C = 4.
        let counts = [5, 3, 1];
        let mut users = Vec::new();
        for (s, &c) in counts.iter().enumerate() {
            for _ in 0..c {
                users.push(User { id: users.len(), coverage: vec![0], service: s, x: None, y: None });
            }
        }
        let inst = Instance {
            services: (0..3).map(ServiceSpec::unit).collect(),
            stations: vec![BaseStation::new(0, 2.0, 4.0, 10.0, 10.0)],
            users,
            prev_placement: None,
            adaptation_budget: None,
        };
        assert_eq!(nonoverlapping_optimal(&inst).unwrap(), 5);
    }

    #[test]
    fn nonoverlap_uncovered_and_unbinding() {
        let mut inst = Instance {
            services: (0..2).map(ServiceSpec::unit).collect(),
            stations: vec![BaseStation::new(0, 2.0, 10.0, 10.0, 10.0)],
            users: vec![
                User { id: 0, coverage: vec![], service: 0, x: None, y: None },
                User { id: 1, coverage: vec![0], service: 1, x: None, y: None },
                User { id: 2, coverage: vec![0], service: 0, x: None, y: None },
            ],
            prev_placement: None,
            adaptation_budget: None,
        };
        assert_eq!(nonoverlapping_optimal(&inst).unwrap(), 1);
        inst.users[1].coverage.clear();
        inst.users[2].coverage.clear();
        assert_eq!(nonoverlapping_optimal(&inst).unwrap(), 3);
        inst.users[2].coverage = vec![0, 0];
        assert!(nonoverlapping_optimal(&inst).is_err());
    }

    #[test]
    fn flow_requires_unit_instance() {
        let mut inst = counterexample();
        inst.services[0].compute = 0.5;
        let p = Placement::empty(2, 2);
        assert!(matches!(max_served_flow(&inst, &p), Err(Error::NotUnit(_))));
        assert_eq!(max_served_bruteforce(&inst, &p).unwrap(), 0);
    }
}
