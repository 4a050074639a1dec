mod common;

use common::{tiny_instance, Coverage};
use jsprr::baselines::{
    greedy_cache, max_served_bruteforce, max_served_flow, max_served_given_placement,
    max_served_uncongested, PlacementSet,
};
use jsprr::generator::{generate_instance, GeneratorConfig};
use jsprr::model::Placement;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_placement(seed: u64, n: usize, s: usize) -> PlacementSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PlacementSet(
        (0..n)
            .flat_map(|a| (0..s).map(move |b| (a, b)))
            .filter(|_| rng.gen_bool(0.4))
            .collect(),
    )
}

#[test]
fn served_count_is_monotone_in_placement() {
    for k in 0..150u64 {
        let inst = tiny_instance(k, k % 2 == 0, Coverage::Overlapping);
        let base = random_placement(k, inst.n_stations(), inst.n_services());
        let f = max_served_given_placement(&inst, &base).unwrap();
        for n in 0..inst.n_stations() {
            for s in 0..inst.n_services() {
                let g = max_served_given_placement(&inst, &base.with(n, s)).unwrap();
                assert!(g >= f, "instance {k}: adding ({n},{s}) dropped {f} to {g}");
            }
        }
    }
}

#[test]
fn flow_agrees_with_enumeration() {
    for k in 0..200u64 {
        let inst = tiny_instance(k, true, Coverage::Overlapping);
        let p: Placement = random_placement(k + 7, inst.n_stations(), inst.n_services())
            .to_placement(&inst)
            .unwrap();
        assert_eq!(max_served_flow(&inst, &p).unwrap(), max_served_bruteforce(&inst, &p).unwrap(), "instance {k}");
    }
}

#[test]
fn uncongested_dominates() {
    for k in 0..100u64 {
        let inst = tiny_instance(k, k % 2 == 1, Coverage::Overlapping);
        let p = random_placement(k, inst.n_stations(), inst.n_services());
        assert!(max_served_uncongested(&inst, &p).unwrap() >= max_served_given_placement(&inst, &p).unwrap());
    }
}

#[test]
fn greedy_fills_most_storage() {
    let mut good = 0;
    let mut total = 0;
    for seed in 0..5 {
        let inst = generate_instance(&GeneratorConfig { seed, ..Default::default() }).unwrap();
        let g = greedy_cache(&inst).unwrap();
        for n in 0..inst.n_stations() {
            let used: f64 = (0..inst.n_services())
                .filter(|&s| g.raw.placement.get(n, s))
                .map(|s| inst.services[s].storage)
                .sum();
            assert!(used <= inst.stations[n].storage_cap + 1e-9);
            total += 1;
            if used >= 0.9 * inst.stations[n].storage_cap {
                good += 1;
            }
        }
    }
    // At least 7 of every 9 stations.
    assert!(good * 9 >= total * 7, "{good} of {total}");
}
