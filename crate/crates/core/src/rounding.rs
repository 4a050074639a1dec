//! Randomized rounding of the fractional optimum, feasibility repair, and the
//! bi-criteria factors that bound how far raw rounded solutions overshoot.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    evaluate_solution, Instance, IntegerSolution, LoadReport, Placement, Resource, Resources,
    Route, FEAS_TOL,
};
use crate::relaxation::FractionalSolution;
use crate::stream::{derive_seed, substream};

/// Bernoulli(x†_ns) for every (n, s), independently.
pub fn round_placement(frac: &FractionalSolution, seed: u64) -> Placement {
    let mut rng = substream(seed, "placement", 0);
    let mut p = Placement::empty(frac.n_stations, frac.n_services);
    for n in 0..frac.n_stations {
        for s in 0..frac.n_services {
            let u: f64 = rng.gen();
            p.set(n, s, u < frac.placement(n, s));
        }
    }
    p
}

/// Sampling weights for one user given the stations in N'_u.
///
/// Station weights are y†_nu / x†_{n,s_u}; the cloud weight is the clamped
/// expression `[(y†_lu - Π(1-x†)) / (1 - Π(1-x†))]_+`. If the total exceeds
/// one, everything is scaled down; a shortfall goes to the cloud.
#[derive(Clone, Debug, PartialEq)]
pub struct RouteWeights {
    pub stations: Vec<(usize, f64)>,
    pub cloud: f64,
    /// 1 - (raw total). Positive: mass added to the cloud; negative: scaled away.
    pub residual: f64,
}

pub fn route_weights(
    frac: &FractionalSolution,
    user: usize,
    service: usize,
    available: &[usize],
) -> Result<RouteWeights> {
    let mut stations = Vec::with_capacity(available.len());
    let mut miss_all = 1.0;
    for &n in available {
        let x = frac.placement(n, service);
        if x <= 0.0 {
            return Err(Error::Internal(format!(
                "station {n} holds service {service} with zero fractional placement"
            )));
        }
        miss_all *= 1.0 - x;
        let w = (frac.route(user, Route::Station(n)) / x).clamp(0.0, 1.0);
        stations.push((n, w));
    }
    let cloud = if miss_all < 1.0 {
        ((frac.cloud(user) - miss_all) / (1.0 - miss_all)).max(0.0)
    } else {
        1.0
    };
    let total: f64 = stations.iter().map(|w| w.1).sum::<f64>() + cloud;
    let residual = 1.0 - total;
    if total > 1.0 {
        stations.iter_mut().for_each(|w| w.1 /= total);
        Ok(RouteWeights {
            stations,
            cloud: cloud / total,
            residual,
        })
    } else {
        Ok(RouteWeights {
            stations,
            cloud: cloud + residual,
            residual,
        })
    }
}

fn available_stations(instance: &Instance, placement: &Placement, user: usize) -> Vec<usize> {
    let u = &instance.users[user];
    u.coverage
        .iter()
        .copied()
        .filter(|&n| placement.get(n, u.service))
        .collect()
}

/// One route per user: cloud when no covering station holds the service,
/// otherwise a draw from [`route_weights`].
pub fn round_routing(
    instance: &Instance,
    frac: &FractionalSolution,
    placement: &Placement,
    seed: u64,
) -> Result<Vec<Route>> {
    let mut rng = substream(seed, "routing", 0);
    (0..instance.n_users())
        .map(|u| {
            let avail = available_stations(instance, placement, u);
            if avail.is_empty() {
                return Ok(Route::Cloud);
            }
            let w = route_weights(frac, u, instance.users[u].service, &avail)?;
            let draw: f64 = rng.gen();
            let mut acc = 0.0;
            for &(n, p) in &w.stations {
                acc += p;
                if draw < acc {
                    return Ok(Route::Station(n));
                }
            }
            Ok(Route::Cloud)
        })
        .collect()
}

/// Exact routing probabilities of [`round_routing`] per user, by enumerating
/// which covering stations end up holding the service.
pub fn exact_route_marginals(
    instance: &Instance,
    frac: &FractionalSolution,
) -> Result<Vec<Vec<(Route, f64)>>> {
    instance
        .users
        .iter()
        .map(|user| {
            let s = user.service;
            let live: Vec<usize> = user
                .coverage
                .iter()
                .copied()
                .filter(|&n| frac.placement(n, s) > 0.0)
                .collect();
            let mut probs: Vec<(Route, f64)> = user
                .coverage
                .iter()
                .map(|&n| (Route::Station(n), 0.0))
                .chain(std::iter::once((Route::Cloud, 0.0)))
                .collect();
            let cloud_slot = probs.len() - 1;
            for mask in 0u32..(1 << live.len()) {
                let mut pr = 1.0;
                let mut avail = Vec::new();
                for (k, &n) in live.iter().enumerate() {
                    let x = frac.placement(n, s);
                    if mask & (1 << k) != 0 {
                        pr *= x;
                        avail.push(n);
                    } else {
                        pr *= 1.0 - x;
                    }
                }
                if pr == 0.0 {
                    continue;
                }
                if avail.is_empty() {
                    probs[cloud_slot].1 += pr;
                    continue;
                }
                let w = route_weights(frac, user.id, s, &avail)?;
                for (n, p) in w.stations {
                    let slot = user.coverage.iter().position(|&c| c == n).unwrap();
                    probs[slot].1 += pr * p;
                }
                probs[cloud_slot].1 += pr * w.cloud;
            }
            Ok(probs)
        })
        .collect()
}

type Removal = (usize, usize, usize, Vec<(usize, Route)>);

/// Running loads of a solution under repair.
struct RepairState<'a> {
    instance: &'a Instance,
    sol: IntegerSolution,
    loads: Vec<Resources>,
    spend: f64,
}

impl<'a> RepairState<'a> {
    fn new(instance: &'a Instance, sol: IntegerSolution) -> Result<Self> {
        let report = evaluate_solution(instance, &sol)?;
        Ok(RepairState {
            instance,
            loads: report.loads,
            spend: report.adaptation_spend.unwrap_or(0.0),
            sol,
        })
    }

    fn demand(&self, u: usize) -> Resources {
        let svc = &self.instance.services[self.instance.users[u].service];
        Resources {
            storage: 0.0,
            compute: svc.compute,
            uplink: svc.uplink,
            downlink: svc.downlink,
        }
    }

    /// Covering station other than `exclude` holding the user's service with
    /// room for the request; maximizes the minimum normalized residual.
    fn destination(&self, loads: &[Resources], u: usize, exclude: usize) -> Option<usize> {
        let user = &self.instance.users[u];
        let need = self.demand(u);
        let mut best: Option<(usize, f64)> = None;
        for &m in &user.coverage {
            if m == exclude || !self.sol.placement.get(m, user.service) {
                continue;
            }
            let bs = &self.instance.stations[m];
            let mut slack = f64::INFINITY;
            let mut fits = true;
            for r in Resource::ROUTING {
                let after = loads[m].get(r) + need.get(r);
                let cap = bs.capacity(r);
                if after > cap + FEAS_TOL {
                    fits = false;
                    break;
                }
                slack = slack.min(if cap > 0.0 { (cap - after) / cap } else { 0.0 });
            }
            if fits && best.is_none_or(|(_, b)| slack > b) {
                best = Some((m, slack));
            }
        }
        best.map(|b| b.0)
    }

    fn move_user(&mut self, u: usize, to: Route) {
        let need = self.demand(u);
        if let Route::Station(n) = self.sol.routing[u] {
            for r in Resource::ROUTING {
                *self.loads[n].get_mut(r) -= need.get(r);
            }
        }
        if let Route::Station(n) = to {
            for r in Resource::ROUTING {
                *self.loads[n].get_mut(r) += need.get(r);
            }
        }
        self.sol.routing[u] = to;
    }

    fn users_at(&self, n: usize, s: usize) -> Vec<usize> {
        self.sol
            .routing
            .iter()
            .enumerate()
            .filter(|&(u, r)| *r == Route::Station(n) && self.instance.users[u].service == s)
            .map(|(u, _)| u)
            .collect()
    }

    /// Cloud-load increment of removing (n, s), re-directing greedily.
    fn removal_cost(&self, n: usize, s: usize) -> (usize, Vec<(usize, Route)>) {
        let mut loads = self.loads.clone();
        let mut moves = Vec::new();
        let mut increment = 0;
        for u in self.users_at(n, s) {
            let need = self.demand(u);
            let to = match self.destination(&loads, u, n) {
                Some(m) => {
                    for r in Resource::ROUTING {
                        *loads[m].get_mut(r) += need.get(r);
                    }
                    Route::Station(m)
                }
                None => {
                    increment += 1;
                    Route::Cloud
                }
            };
            moves.push((u, to));
        }
        (increment, moves)
    }

    fn storage_violated(&self, n: usize) -> bool {
        self.loads[n].storage > self.instance.stations[n].storage_cap + FEAS_TOL
    }

    fn adaptation_violated(&self) -> bool {
        self.instance
            .adaptation_budget
            .is_some_and(|d| self.spend > d + FEAS_TOL)
    }

    fn remove(&mut self, n: usize, s: usize, moves: Vec<(usize, Route)>) {
        for (u, to) in moves {
            self.move_user(u, to);
        }
        self.sol.placement.set(n, s, false);
        let r = self.instance.services[s].storage;
        self.loads[n].storage -= r;
        if !self.instance.previously_placed(n, s) {
            self.spend -= r;
        }
    }

    fn fix_storage_and_adaptation(&mut self) -> Result<()> {
        loop {
            let adapt = self.adaptation_violated();
            let stations: Vec<bool> = (0..self.instance.n_stations())
                .map(|n| self.storage_violated(n))
                .collect();
            if !adapt && !stations.iter().any(|&v| v) {
                return Ok(());
            }
            // (station, service, cloud-load increment, redirections)
            let mut best: Option<Removal> = None;
            for (n, s) in self.sol.placement.pairs().collect::<Vec<_>>() {
                if self.instance.services[s].storage <= 0.0 {
                    continue;
                }
                let helps =
                    stations[n] || (adapt && !self.instance.previously_placed(n, s));
                if !helps {
                    continue;
                }
                let (inc, moves) = self.removal_cost(n, s);
                if best.as_ref().is_none_or(|b| inc < b.2) {
                    best = Some((n, s, inc, moves));
                }
            }
            let Some((n, s, _, moves)) = best else {
                return Err(Error::Internal(
                    "storage or adaptation violated with nothing removable".into(),
                ));
            };
            self.remove(n, s, moves);
        }
    }

    /// Largest routing-resource violation: (station, resource, factor).
    fn most_overloaded(&self) -> Option<(usize, Resource)> {
        let mut worst: Option<(usize, Resource, f64)> = None;
        for (n, bs) in self.instance.stations.iter().enumerate() {
            for r in Resource::ROUTING {
                let (load, cap) = (self.loads[n].get(r), bs.capacity(r));
                if load <= cap + FEAS_TOL {
                    continue;
                }
                let factor = if cap > 0.0 { load / cap } else { f64::INFINITY };
                if worst.is_none_or(|w| factor > w.2) {
                    worst = Some((n, r, factor));
                }
            }
        }
        worst.map(|w| (w.0, w.1))
    }

    fn fix_routing(&mut self) {
        while let Some((n, r)) = self.most_overloaded() {
            let u = (0..self.instance.n_users())
                .filter(|&u| self.sol.routing[u] == Route::Station(n))
                .fold(None::<(usize, f64)>, |best, u| {
                    let q = self.instance.request_requirement(u, r);
                    match best {
                        Some((_, bq)) if bq >= q => best,
                        _ => Some((u, q)),
                    }
                })
                .map(|b| b.0)
                .expect("overloaded station serves someone");
            let to = self
                .destination(&self.loads, u, n)
                .map_or(Route::Cloud, Route::Station);
            self.move_user(u, to);
        }
    }
}

/// Converts a rounded solution into a feasible one.
///
/// Phase 1 removes placed services until storage and the adaptation budget
/// hold, each time picking the removal with the smallest cloud-load
/// increment. Phase 2 moves requests off overloaded stations, most
/// overloaded first, to another covering station with room or the cloud.
pub fn repair(instance: &Instance, sol: &IntegerSolution) -> Result<IntegerSolution> {
    let mut state = RepairState::new(instance, sol.clone())?;
    state.fix_storage_and_adaptation()?;
    state.fix_routing();
    Ok(state.sol)
}

/// Phase 2 of [`repair`] only.
pub fn repair_routing(instance: &Instance, sol: &IntegerSolution) -> Result<IntegerSolution> {
    let mut state = RepairState::new(instance, sol.clone())?;
    state.fix_routing();
    Ok(state.sol)
}

/// Routes every user with no valid route greedily: each cloud user is sent
/// to a covering station holding its service with room, if any.
pub(crate) fn fill_from_cloud(instance: &Instance, sol: IntegerSolution) -> Result<IntegerSolution> {
    let mut state = RepairState::new(instance, sol)?;
    for u in 0..instance.n_users() {
        if state.sol.routing[u] == Route::Cloud {
            if let Some(m) = state.destination(&state.loads, u, usize::MAX) {
                state.move_user(u, Route::Station(m));
            }
        }
    }
    Ok(state.sol)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundingTrial {
    pub trial: usize,
    pub seed: u64,
    pub raw: IntegerSolution,
    pub repaired: IntegerSolution,
    pub raw_report: LoadReport,
    pub repaired_report: LoadReport,
}

pub fn randomized_rounding(
    instance: &Instance,
    frac: &FractionalSolution,
    seed: u64,
) -> Result<RoundingTrial> {
    let placement = round_placement(frac, seed);
    let routing = round_routing(instance, frac, &placement, seed)?;
    let raw = IntegerSolution { placement, routing };
    let raw_report = evaluate_solution(instance, &raw)?;
    let repaired = if raw_report.feasible {
        raw.clone()
    } else {
        repair(instance, &raw)?
    };
    let repaired_report = evaluate_solution(instance, &repaired)?;
    if !repaired_report.feasible {
        return Err(Error::Internal("repair produced an infeasible solution".into()));
    }
    Ok(RoundingTrial {
        trial: 0,
        seed,
        raw,
        repaired,
        raw_report,
        repaired_report,
    })
}

/// Seed of trial `t` under a master seed.
pub fn trial_seed(master: u64, t: usize) -> u64 {
    derive_seed(master, "trial", t as u64)
}

/// `k` independent trials, run in parallel and returned in trial order.
pub fn run_trials(
    instance: &Instance,
    frac: &FractionalSolution,
    master: u64,
    k: usize,
) -> Result<Vec<RoundingTrial>> {
    (0..k)
        .into_par_iter()
        .map(|t| {
            let mut trial = randomized_rounding(instance, frac, trial_seed(master, t))?;
            trial.trial = t;
            Ok(trial)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Pick {
    #[default]
    Best,
    Median,
}

/// Index of the chosen trial by repaired cloud load (ties: lowest trial).
pub fn pick_trial(trials: &[RoundingTrial], pick: Pick) -> Option<usize> {
    let mut order: Vec<usize> = (0..trials.len()).collect();
    order.sort_by_key(|&i| (trials[i].repaired_report.cloud_load, trials[i].trial));
    match pick {
        Pick::Best => order.first().copied(),
        Pick::Median => order.get(order.len().saturating_sub(1) / 2).copied(),
    }
}

/// A bi-criteria factor `1 + ε`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub value: f64,
    pub epsilon: f64,
}

impl Factor {
    /// `scale · ln(S) / denom + offset`, infinite for a zero denominator.
    fn new(scale: f64, ln_s: f64, denom: f64, offset: f64) -> Self {
        let value = if denom > 0.0 {
            scale * ln_s / denom + offset
        } else {
            f64::INFINITY
        };
        Factor {
            value,
            epsilon: value - 1.0,
        }
    }

    /// Capacity-violation factor `3 ln(S)/denom + 4`.
    pub fn capacity(n_services: usize, denom: f64) -> Self {
        Factor::new(3.0, (n_services as f64).ln(), denom, 4.0)
    }

    /// Objective/adaptation factor `2 ln(S)/denom + 3`.
    pub fn objective(n_services: usize, denom: f64) -> Self {
        Factor::new(2.0, (n_services as f64).ln(), denom, 3.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BicriteriaReport {
    pub storage: Vec<Factor>,
    pub compute: Factor,
    pub uplink: Factor,
    pub downlink: Factor,
    pub objective: Factor,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adaptation: Option<Factor>,
}

impl BicriteriaReport {
    pub fn capacity_factor(&self, station: usize, r: Resource) -> f64 {
        match r {
            Resource::Storage => self.storage[station].value,
            Resource::Compute => self.compute.value,
            Resource::Uplink => self.uplink.value,
            Resource::Downlink => self.downlink.value,
        }
    }
}

pub fn bicriteria_factors(instance: &Instance, frac: &FractionalSolution) -> BicriteriaReport {
    let s = instance.n_services();
    BicriteriaReport {
        storage: instance
            .stations
            .iter()
            .map(|bs| Factor::capacity(s, bs.storage_cap))
            .collect(),
        compute: Factor::capacity(s, frac.lambda),
        uplink: Factor::capacity(s, frac.mu),
        downlink: Factor::capacity(s, frac.nu),
        objective: Factor::objective(s, frac.objective),
        adaptation: instance
            .adaptation_budget
            .filter(|_| instance.prev_placement.is_some())
            .map(|d| Factor::objective(s, d)),
    }
}
