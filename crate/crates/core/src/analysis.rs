//! Approximate-submodularity diagnostics for unit-requirement instances.

use serde::{Deserialize, Serialize};

use crate::baselines::{greedy_cache, max_served_given_placement, optimal_bruteforce, PlacementSet};
use crate::error::{Error, Result};
use crate::model::{BaseStation, Instance, Resource, ServiceSpec, User};

/// How Φ_n was counted.
pub const PHI_CONVENTION: &str = "all requests from covered users (every service assumed stored)";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubmodularityReport {
    /// Requests from users inside each station's coverage.
    pub phi: Vec<usize>,
    /// Largest demand-to-capacity ratio, floored at 1.
    pub overload: f64,
    pub delta: f64,
    pub total_storage: f64,
    pub ratio: f64,
    pub phi_convention: String,
}

/// Greedy guarantee ½·((1−δ)/(1+δ))·1/(1 + ΣR·δ/(1−δ)).
pub fn guarantee_ratio(delta: f64, total_storage: f64) -> f64 {
    if delta >= 1.0 {
        return 0.0;
    }
    let shrink = (1.0 - delta) / (1.0 + delta);
    0.5 * shrink / (1.0 + total_storage * delta / (1.0 - delta))
}

pub fn delta_bound(instance: &Instance) -> Result<SubmodularityReport> {
    if !instance.is_unit() {
        return Err(Error::NotUnit("delta bound".into()));
    }
    let mut phi = vec![0usize; instance.n_stations()];
    for u in &instance.users {
        for &n in &u.coverage {
            phi[n] += 1;
        }
    }
    let mut overload: f64 = 1.0;
    for (n, bs) in instance.stations.iter().enumerate() {
        for r in Resource::ROUTING {
            let cap = bs.capacity(r);
            let demand = phi[n] as f64;
            let q = if demand == 0.0 {
                0.0
            } else if cap == 0.0 {
                f64::INFINITY
            } else {
                demand / cap
            };
            overload = overload.max(q);
        }
    }
    let delta = 1.0 - 1.0 / overload;
    let total_storage = instance.stations.iter().map(|b| b.storage_cap).sum();
    Ok(SubmodularityReport {
        phi,
        overload,
        delta,
        total_storage,
        ratio: guarantee_ratio(delta, total_storage),
        phi_convention: PHI_CONVENTION.into(),
    })
}

/// Which routing resource is made scarce in the counterexample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bottleneck {
    Compute,
    Uplink,
    Downlink,
}

impl Bottleneck {
    pub fn resource(self) -> Resource {
        match self {
            Bottleneck::Compute => Resource::Compute,
            Bottleneck::Uplink => Resource::Uplink,
            Bottleneck::Downlink => Resource::Downlink,
        }
    }
}

/// Two stations, two unit services, two users in the overlap requesting
/// different services. The bottleneck resource gets `capacity` per station,
/// everything else is abundant.
pub fn counterexample_instance(bottleneck: Bottleneck, capacity: f64) -> Instance {
    let stations = (0..2)
        .map(|id| {
            let mut bs = BaseStation::new(id, 2.0, 10.0, 10.0, 10.0);
            *bs.capacity_mut(bottleneck.resource()) = capacity;
            bs
        })
        .collect();
    Instance {
        services: vec![ServiceSpec::unit(0), ServiceSpec::unit(1)],
        stations,
        users: (0..2)
            .map(|id| User { id, coverage: vec![0, 1], service: id, x: None, y: None })
            .collect(),
        prev_placement: None,
        adaptation_budget: None,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub bottleneck: Bottleneck,
    pub capacity: f64,
    /// f({e11})
    pub f_a: usize,
    /// f({e11, e21})
    pub f_b: usize,
    /// f({e11, e12})
    pub f_a_plus: usize,
    /// f({e11, e21, e12})
    pub f_b_plus: usize,
    pub marginal_a: i64,
    pub marginal_b: i64,
    /// Marginal gain grows with the larger set.
    pub submodularity_violated: bool,
}

pub fn counterexample_report(bottleneck: Bottleneck, capacity: f64) -> Result<CounterexampleReport> {
    let inst = counterexample_instance(bottleneck, capacity);
    let a = PlacementSet(vec![(0, 0)]);
    let b = PlacementSet(vec![(0, 0), (1, 0)]);
    let f = |e: &PlacementSet| max_served_given_placement(&inst, e);
    let (f_a, f_b) = (f(&a)?, f(&b)?);
    let (f_a_plus, f_b_plus) = (f(&a.with(0, 1))?, f(&b.with(0, 1))?);
    let marginal_a = f_a_plus as i64 - f_a as i64;
    let marginal_b = f_b_plus as i64 - f_b as i64;
    Ok(CounterexampleReport {
        bottleneck,
        capacity,
        f_a,
        f_b,
        f_a_plus,
        f_b_plus,
        marginal_a,
        marginal_b,
        submodularity_violated: marginal_b > marginal_a,
    })
}

/// Evaluates the compute-bottleneck counterexample and checks the expected
/// values 1, 1, 1, 2.
pub fn verify_counterexample() -> Result<CounterexampleReport> {
    let r = counterexample_report(Bottleneck::Compute, 1.0)?;
    if (r.f_a, r.f_b, r.f_a_plus, r.f_b_plus) != (1, 1, 1, 2) {
        return Err(Error::Internal(format!(
            "counterexample evaluated to f(A)={}, f(B)={}, f(A+e12)={}, f(B+e12)={}",
            r.f_a, r.f_b, r.f_a_plus, r.f_b_plus
        )));
    }
    Ok(r)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuaranteeCheck {
    pub greedy_served: usize,
    pub optimal_served: usize,
    pub delta: f64,
    pub ratio: f64,
    pub holds: bool,
}

/// Compares f(greedy placement) against ratio × optimum.
pub fn greedy_guarantee_check(instance: &Instance) -> Result<GuaranteeCheck> {
    let report = delta_bound(instance)?;
    let oracle = optimal_bruteforce(instance)?;
    let greedy = greedy_cache(instance)?;
    let greedy_served = max_served_given_placement(instance, &PlacementSet::from(&greedy.raw.placement))?;
    let optimal_served = instance.n_users() - oracle.cloud_load;
    Ok(GuaranteeCheck {
        greedy_served,
        optimal_served,
        delta: report.delta,
        ratio: report.ratio,
        holds: greedy_served as f64 >= report.ratio * optimal_served as f64 - 1e-12,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_station(phi: usize, compute: f64) -> Instance {
        Instance {
            services: vec![ServiceSpec::unit(0)],
            stations: vec![BaseStation::new(0, 1.0, compute, 100.0, 100.0)],
            users: (0..phi)
                .map(|id| User { id, coverage: vec![0], service: 0, x: None, y: None })
                .collect(),
            prev_placement: None,
            adaptation_budget: None,
        }
    }

    #[test]
    fn fifty_percent_overload() {
        let r = delta_bound(&single_station(6, 4.0)).unwrap();
        assert_eq!(r.phi, vec![6]);
        assert!((r.delta - 1.0 / 3.0).abs() < 1e-12);
        assert!((r.ratio - 0.25 / (1.0 + 1.0 / 2.0)).abs() < 1e-12);
    }

    #[test]
    fn no_overload() {
        let r = delta_bound(&single_station(3, 4.0)).unwrap();
        assert_eq!(r.delta, 0.0);
        assert_eq!(r.ratio, 0.5);
    }

    #[test]
    fn zero_capacity_with_demand() {
        let r = delta_bound(&single_station(1, 0.0)).unwrap();
        assert_eq!(r.delta, 1.0);
        assert_eq!(r.ratio, 0.0);
        assert_eq!(delta_bound(&single_station(0, 0.0)).unwrap().delta, 0.0);
    }

    #[test]
    fn ratio_formula() {
        for total in [1.0, 10.0, 1000.0] {
            let expected = 0.25 / (1.0 + total / 2.0);
            assert!((guarantee_ratio(1.0 / 3.0, total) - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn counterexample_variants() {
        let c = verify_counterexample().unwrap();
        assert_eq!((c.marginal_a, c.marginal_b), (0, 1));
        for b in [Bottleneck::Uplink, Bottleneck::Downlink] {
            let r = counterexample_report(b, 1.0).unwrap();
            assert_eq!((r.f_a, r.f_b, r.f_a_plus, r.f_b_plus), (1, 1, 1, 2));
        }
        let relaxed = counterexample_report(Bottleneck::Compute, 2.0).unwrap();
        assert_eq!(relaxed.f_a_plus, 2);
        assert!(!relaxed.submodularity_violated);
    }

    #[test]
    fn non_unit_rejected() {
        let mut inst = single_station(2, 1.0);
        inst.services[0].storage = 3.0;
        assert!(matches!(delta_bound(&inst), Err(Error::NotUnit(_))));
    }

    #[test]
    fn guarantee_on_counterexample() {
        let g = greedy_guarantee_check(&counterexample_instance(Bottleneck::Compute, 1.0)).unwrap();
        assert!(g.holds);
        assert_eq!(g.optimal_served, 2);
    }
}
