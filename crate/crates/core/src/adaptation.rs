//! Multi-period operation under a per-period adaptation budget.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::ZipfSampler;
use crate::model::{
    adaptation_spend, evaluate_solution, Instance, IntegerSolution, Placement, Route, FEAS_TOL,
};
use crate::relaxation::{build_lp, solve_lp};
use crate::rounding::{
    fill_from_cloud, pick_trial, repair_routing, run_trials, Factor, Pick,
};
use crate::stream::{derive_seed, substream};

/// Requested service per user, one snapshot per period. Coverage is fixed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemandSequence {
    pub snapshots: Vec<Vec<usize>>,
    #[serde(default)]
    pub period_label: Option<String>,
}

impl DemandSequence {
    /// Starts from the instance's own demand and applies `churn` each period.
    pub fn with_churn(
        instance: &Instance,
        periods: usize,
        churn: f64,
        zipf_shape: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut snapshots = Vec::with_capacity(periods);
        let mut current: Vec<usize> = instance.users.iter().map(|u| u.service).collect();
        for t in 0..periods {
            if t > 0 {
                let shift = demand_shift(
                    &current,
                    instance.n_services(),
                    zipf_shape,
                    churn,
                    derive_seed(seed, "demand", t as u64),
                )?;
                current = shift.demand;
            }
            snapshots.push(current.clone());
        }
        Ok(DemandSequence { snapshots, period_label: None })
    }

    pub fn validate(&self, instance: &Instance) -> Result<()> {
        for (t, snap) in self.snapshots.iter().enumerate() {
            if snap.len() != instance.n_users() {
                return Err(Error::DimensionMismatch {
                    what: "demand snapshot",
                    expected: instance.n_users(),
                    found: snap.len(),
                });
            }
            if let Some(&s) = snap.iter().find(|&&s| s >= instance.n_services()) {
                return Err(Error::InvalidInstance(format!(
                    "demand snapshot {t} requests unknown service {s}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemandShift {
    pub demand: Vec<usize>,
    /// Users whose service was re-drawn (the draw may repeat the old one).
    pub redrawn: Vec<usize>,
}

/// Each user independently re-draws its service from the Zipf law with
/// probability `churn`.
pub fn demand_shift(
    demand: &[usize],
    n_services: usize,
    zipf_shape: f64,
    churn: f64,
    seed: u64,
) -> Result<DemandShift> {
    if !(0.0..=1.0).contains(&churn) {
        return Err(Error::InvalidConfig(format!("churn {churn} outside [0, 1]")));
    }
    let zipf = ZipfSampler::new(zipf_shape, n_services);
    let mut out = demand.to_vec();
    let mut redrawn = Vec::new();
    for (u, s) in out.iter_mut().enumerate() {
        let mut rng = substream(seed, "churn", u as u64);
        if rng.gen::<f64>() < churn {
            *s = zipf.sample(&mut rng);
            redrawn.push(u);
        }
    }
    Ok(DemandShift { demand: out, redrawn })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodOptions {
    pub trials: usize,
    pub pick: Pick,
    /// Period 0 is not charged against the budget.
    pub bootstrap_free: bool,
    /// With a finite budget, also consider last period's placement (re-routed
    /// for the new demand) and keep it if it serves more.
    pub carry_over: bool,
}

impl Default for PeriodOptions {
    fn default() -> Self {
        PeriodOptions {
            trials: 20,
            pick: Pick::Best,
            bootstrap_free: false,
            carry_over: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeriodSource {
    Rounding,
    CarryOver,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodResult {
    pub period: usize,
    pub lp_objective: f64,
    pub cloud_load: usize,
    pub raw_cloud_load: usize,
    /// Budget charged this period; `None` when unconstrained.
    pub budget: Option<f64>,
    pub adaptation_spend: f64,
    pub raw_adaptation_spend: f64,
    /// Raw spend above `factor · D`.
    pub raw_exceeds_bound: bool,
    pub source: PeriodSource,
    pub solution: IntegerSolution,
}

fn storage_fits(instance: &Instance, placement: &Placement, n: usize, s: usize) -> bool {
    let used: f64 = (0..instance.n_services())
        .filter(|&k| placement.get(n, k))
        .map(|k| instance.services[k].storage)
        .sum();
    used + instance.services[s].storage <= instance.stations[n].storage_cap + FEAS_TOL
}

/// Puts back previously placed services that still fit; they cost nothing
/// against the budget. Freed-up cloud users are then re-routed.
fn retain_previous(instance: &Instance, sol: IntegerSolution) -> Result<IntegerSolution> {
    let mut sol = sol;
    for n in 0..instance.n_stations() {
        for s in 0..instance.n_services() {
            if instance.previously_placed(n, s)
                && !sol.placement.get(n, s)
                && storage_fits(instance, &sol.placement, n, s)
            {
                sol.placement.set(n, s, true);
            }
        }
    }
    fill_from_cloud(instance, sol)
}

/// Last period's placement with routes kept where still valid, overloads
/// moved off and cloud users re-routed.
fn carry_over(instance: &Instance, previous: &IntegerSolution) -> Result<IntegerSolution> {
    let routing = instance
        .users
        .iter()
        .zip(&previous.routing)
        .map(|(u, &r)| match r {
            Route::Station(n) if previous.placement.get(n, u.service) => r,
            _ => Route::Cloud,
        })
        .collect();
    let sol = IntegerSolution {
        placement: previous.placement.clone(),
        routing,
    };
    fill_from_cloud(instance, repair_routing(instance, &sol)?)
}

/// Solves each period in turn with the previous period's placement as x^p.
/// An infinite `budget` makes every period an independent solve.
pub fn run_periods(
    instance: &Instance,
    demands: &DemandSequence,
    budget: f64,
    seed: u64,
    options: &PeriodOptions,
) -> Result<Vec<PeriodResult>> {
    if budget.is_nan() || budget < 0.0 {
        return Err(Error::InvalidConfig(format!("budget {budget} must be nonnegative")));
    }
    if options.trials == 0 {
        return Err(Error::InvalidConfig("at least one trial per period".into()));
    }
    demands.validate(instance)?;
    let mut prev_rows = instance.prev_placement.clone().unwrap_or_else(|| {
        vec![vec![0u8; instance.n_services()]; instance.n_stations()]
    });
    let mut previous: Option<IntegerSolution> = None;
    let mut results = Vec::with_capacity(demands.snapshots.len());
    for (t, snapshot) in demands.snapshots.iter().enumerate() {
        let charged = budget.is_finite() && !(t == 0 && options.bootstrap_free);
        let mut inst = instance.with_demand(snapshot);
        inst.prev_placement = charged.then(|| prev_rows.clone());
        inst.adaptation_budget = charged.then_some(budget);

        let frac = solve_lp(&build_lp(&inst, charged)?)?;
        let trials = run_trials(&inst, &frac, derive_seed(seed, "period", t as u64), options.trials)?;
        let chosen = &trials[pick_trial(&trials, options.pick).expect("nonempty trials")];

        let mut source = PeriodSource::Rounding;
        let mut sol = chosen.repaired.clone();
        if charged {
            sol = retain_previous(&inst, sol)?;
            if let (true, Some(prev)) = (options.carry_over, &previous) {
                let incumbent = carry_over(&inst, prev)?;
                if incumbent.cloud_load() <= sol.cloud_load() {
                    sol = incumbent;
                    source = PeriodSource::CarryOver;
                }
            }
        }
        let report = evaluate_solution(&inst, &sol)?;
        if !report.feasible {
            return Err(Error::Internal(format!("period {t} solution is infeasible")));
        }
        let raw_spend = adaptation_spend(&inst, &chosen.raw.placement);
        let bound = Factor::objective(inst.n_services(), budget).value * budget;
        results.push(PeriodResult {
            period: t,
            lp_objective: frac.objective,
            cloud_load: report.cloud_load,
            raw_cloud_load: chosen.raw_report.cloud_load,
            budget: inst.adaptation_budget,
            adaptation_spend: adaptation_spend(&inst, &sol.placement),
            raw_adaptation_spend: raw_spend,
            raw_exceeds_bound: charged && raw_spend > bound + FEAS_TOL,
            source,
            solution: sol.clone(),
        });
        prev_rows = sol.placement.to_rows();
        previous = Some(sol);
    }
    Ok(results)
}
