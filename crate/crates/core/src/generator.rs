//! Synthetic instances: stations on a regular grid, users uniform over the
//! union of coverage disks, Zipf service popularity.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BaseStation, Instance, ServiceSpec, User};
use crate::stream::{substream, Stream};

/// Rejection-sampling attempts allowed per user before giving up.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub n_stations: usize,
    pub n_users: usize,
    pub n_services: usize,
    /// Side of the square deployment area, meters.
    pub area_side: f64,
    /// Coverage radius of every station, meters.
    pub coverage_radius: f64,
    pub zipf_shape: f64,
    pub storage_cap: f64,
    pub compute_cap: f64,
    pub uplink_cap: f64,
    pub downlink_cap: f64,
    pub storage_range: (f64, f64),
    pub compute_range: (f64, f64),
    pub uplink_range: (f64, f64),
    pub downlink_range: (f64, f64),
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_stations: 9,
            n_users: 500,
            n_services: 100,
            area_side: 500.0,
            coverage_radius: 150.0,
            zipf_shape: 0.8,
            storage_cap: 500.0,
            compute_cap: 10.0,
            uplink_cap: 75.0,
            downlink_cap: 250.0,
            storage_range: (20.0, 100.0),
            compute_range: (0.1, 0.5),
            uplink_range: (1.0, 5.0),
            downlink_range: (1.0, 20.0),
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_services == 0 {
            return bad("n_services must be at least 1".into());
        }
        if !(self.zipf_shape > 0.0 && self.zipf_shape.is_finite()) {
            return bad(format!("zipf_shape must be positive, got {}", self.zipf_shape));
        }
        if !(self.area_side > 0.0 && self.coverage_radius > 0.0) {
            return bad("area_side and coverage_radius must be positive".into());
        }
        for (name, (lo, hi)) in [
            ("storage_range", self.storage_range),
            ("compute_range", self.compute_range),
            ("uplink_range", self.uplink_range),
            ("downlink_range", self.downlink_range),
        ] {
            if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
                return bad(format!("{name} [{lo}, {hi}] is empty or negative"));
            }
        }
        for (name, c) in [
            ("storage_cap", self.storage_cap),
            ("compute_cap", self.compute_cap),
            ("uplink_cap", self.uplink_cap),
            ("downlink_cap", self.downlink_cap),
        ] {
            if !(c >= 0.0 && c.is_finite()) {
                return bad(format!("{name} must be finite and nonnegative"));
            }
        }
        grid_side(self.n_stations).map(|_| ())
    }
}

fn grid_side(n: usize) -> Result<usize> {
    let k = (n as f64).sqrt().round() as usize;
    if k * k != n || n == 0 {
        return Err(Error::InvalidConfig(format!(
            "n_stations = {n} is not a positive perfect square"
        )));
    }
    Ok(k)
}

/// Zipf probability mass over ranks 1..=s: `p_k ∝ k^-shape`.
pub fn zipf_pmf(shape: f64, s: usize) -> Vec<f64> {
    let w: Vec<f64> = (1..=s).map(|k| (k as f64).powf(-shape)).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Inverse-CDF sampler over service ranks (rank k maps to service id k-1).
#[derive(Clone, Debug)]
pub struct ZipfSampler {
    cdf: Vec<f64>,
}

impl ZipfSampler {
    pub fn new(shape: f64, s: usize) -> Self {
        let mut acc = 0.0;
        let cdf = zipf_pmf(shape, s)
            .into_iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        ZipfSampler { cdf }
    }

    pub fn sample(&self, rng: &mut Stream) -> usize {
        let u: f64 = rng.gen();
        self.cdf
            .partition_point(|&c| c <= u)
            .min(self.cdf.len() - 1)
    }
}

fn uniform(rng: &mut Stream, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) * rng.gen::<f64>()
}

/// Station coordinates: centers of the k×k partition of the square, row-major.
pub fn grid_positions(n_stations: usize, side: f64) -> Result<Vec<(f64, f64)>> {
    let k = grid_side(n_stations)?;
    let cell = side / k as f64;
    Ok((0..n_stations)
        .map(|i| {
            let (row, col) = (i / k, i % k);
            ((col as f64 + 0.5) * cell, (row as f64 + 0.5) * cell)
        })
        .collect())
}

pub fn generate_instance(config: &GeneratorConfig) -> Result<Instance> {
    config.validate()?;
    let positions = grid_positions(config.n_stations, config.area_side)?;
    let stations: Vec<BaseStation> = positions
        .iter()
        .enumerate()
        .map(|(id, &(x, y))| BaseStation {
            x: Some(x),
            y: Some(y),
            ..BaseStation::new(
                id,
                config.storage_cap,
                config.compute_cap,
                config.uplink_cap,
                config.downlink_cap,
            )
        })
        .collect();

    let services = (0..config.n_services)
        .map(|id| {
            let mut rng = substream(config.seed, "service", id as u64);
            ServiceSpec {
                id,
                storage: uniform(&mut rng, config.storage_range),
                compute: uniform(&mut rng, config.compute_range),
                uplink: uniform(&mut rng, config.uplink_range),
                downlink: uniform(&mut rng, config.downlink_range),
            }
        })
        .collect();

    let zipf = ZipfSampler::new(config.zipf_shape, config.n_services);
    let r2 = config.coverage_radius * config.coverage_radius;
    let users = (0..config.n_users)
        .map(|id| {
            let mut rng = substream(config.seed, "user", id as u64);
            let mut coverage = Vec::new();
            let (mut px, mut py) = (0.0, 0.0);
            for _ in 0..MAX_PLACEMENT_ATTEMPTS {
                px = config.area_side * rng.gen::<f64>();
                py = config.area_side * rng.gen::<f64>();
                coverage = positions
                    .iter()
                    .enumerate()
                    .filter(|(_, &(x, y))| (x - px).powi(2) + (y - py).powi(2) <= r2)
                    .map(|(n, _)| n)
                    .collect();
                if !coverage.is_empty() {
                    break;
                }
            }
            if coverage.is_empty() {
                return Err(Error::InvalidConfig(format!(
                    "user {id} not covered after {MAX_PLACEMENT_ATTEMPTS} attempts"
                )));
            }
            Ok(User {
                id,
                coverage,
                service: zipf.sample(&mut rng),
                x: Some(px),
                y: Some(py),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Instance {
        services,
        stations,
        users,
        prev_placement: None,
        adaptation_budget: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pmf_degenerate_cases() {
        assert_eq!(zipf_pmf(1.7, 1), vec![1.0]);
        assert_eq!(zipf_pmf(0.0, 4), vec![0.25; 4]);
    }

    #[test]
    fn pmf_three_services() {
        let p = zipf_pmf(0.8, 3);
        let raw = [1.0, 2f64.powf(-0.8), 3f64.powf(-0.8)];
        let total: f64 = raw.iter().sum();
        for (a, b) in p.iter().zip(raw) {
            assert!((a - b / total).abs() < 1e-15);
        }
    }

    #[test]
    fn non_square_station_count_rejected() {
        let cfg = GeneratorConfig {
            n_stations: 8,
            ..Default::default()
        };
        assert!(matches!(generate_instance(&cfg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn unreachable_coverage_fails_after_cap() {
        let cfg = GeneratorConfig {
            n_stations: 1,
            n_users: 1,
            coverage_radius: 1e-9,
            area_side: 1e6,
            ..Default::default()
        };
        assert!(generate_instance(&cfg).is_err());
    }

    #[test]
    fn default_grid_is_rotation_symmetric() {
        let pos = grid_positions(9, 500.0).unwrap();
        for &(x, y) in &pos {
            // 90° rotation about the area center maps (x, y) to (500 - y, x).
            let rx = 500.0 - y;
            let ry = x;
            assert!(pos
                .iter()
                .any(|&(a, b)| (a - rx).abs() < 1e-9 && (b - ry).abs() < 1e-9));
        }
    }
}
