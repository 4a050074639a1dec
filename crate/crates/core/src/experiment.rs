//! Capacity sweeps over generated instances and their tabular output.

use std::io::{Read, Write};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::greedy_cache;
use crate::error::{Error, Result};
use crate::generator::{generate_instance, GeneratorConfig};
use crate::model::{evaluate_solution, Instance, Resource, Resources};
use crate::relaxation::{build_lp, solve_lp, FractionalSolution};
use crate::rounding::{bicriteria_factors, pick_trial, run_trials, Factor, Pick};
use crate::stream::derive_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    Storage,
    Compute,
    Bandwidth,
    Utilization,
}

impl SweepKind {
    pub fn default_values(self) -> Vec<String> {
        let v: &[&str] = match self {
            SweepKind::Storage => &["250", "500", "750", "1000", "1250"],
            SweepKind::Compute => &["1", "3", "5", "10", "15", "20"],
            SweepKind::Bandwidth => &["25/100", "50/175", "75/250", "100/325", "125/400"],
            SweepKind::Utilization => &["default"],
        };
        v.iter().map(|s| s.to_string()).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Rr,
    Greedy,
    Lr,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::Rr => "rr",
            Algo::Greedy => "greedy",
            Algo::Lr => "lr",
        }
    }
}

impl std::str::FromStr for Algo {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rr" => Ok(Algo::Rr),
            "greedy" => Ok(Algo::Greedy),
            "lr" => Ok(Algo::Lr),
            _ => Err(Error::InvalidConfig(format!("unknown algorithm '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub sweep: SweepKind,
    /// Capacity values; bandwidth points are written `up/down`.
    pub values: Vec<String>,
    pub seeds: Vec<u64>,
    pub algorithms: Vec<Algo>,
    pub generator: GeneratorConfig,
    /// Multiplies the number of users.
    pub scale: f64,
    pub trials: usize,
    pub pick: Pick,
    /// Report greedy before overload repair.
    pub greedy_raw: bool,
    /// Record wall-clock runtimes; otherwise runtime_ms is 0 so output is
    /// reproducible byte for byte.
    pub timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            sweep: SweepKind::Storage,
            values: SweepKind::Storage.default_values(),
            seeds: (0..20).collect(),
            algorithms: vec![Algo::Rr, Algo::Greedy, Algo::Lr],
            generator: GeneratorConfig::default(),
            scale: 1.0,
            trials: 20,
            pick: Pick::Best,
            greedy_raw: false,
            timing: false,
        }
    }
}

fn parse_number(v: &str) -> Result<f64> {
    v.trim()
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite() && *x >= 0.0)
        .ok_or_else(|| Error::InvalidConfig(format!("bad sweep value '{v}'")))
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() || self.seeds.is_empty() || self.algorithms.is_empty() {
            return Err(Error::InvalidConfig(
                "sweep values, seeds and algorithms must be nonempty".into(),
            ));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::InvalidConfig(format!("scale {} must be positive", self.scale)));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        for v in &self.values {
            self.cell_config(v, 0)?;
        }
        Ok(())
    }

    /// Generator settings for one sweep value and seed.
    pub fn cell_config(&self, value: &str, seed: u64) -> Result<GeneratorConfig> {
        let mut g = self.generator.clone();
        g.seed = seed;
        g.n_users = ((g.n_users as f64) * self.scale).round() as usize;
        match self.sweep {
            SweepKind::Storage => g.storage_cap = parse_number(value)?,
            SweepKind::Compute => g.compute_cap = parse_number(value)?,
            SweepKind::Bandwidth => {
                let (up, down) = value.split_once('/').ok_or_else(|| {
                    Error::InvalidConfig(format!("bandwidth value '{value}' is not 'up/down'"))
                })?;
                g.uplink_cap = parse_number(up)?;
                g.downlink_cap = parse_number(down)?;
            }
            SweepKind::Utilization => {}
        }
        g.validate()?;
        Ok(g)
    }
}

/// Largest theoretical violation factors for an RR row; `None` stands for
/// an unbounded factor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorSummary {
    pub storage: Option<f64>,
    pub compute: Option<f64>,
    pub uplink: Option<f64>,
    pub downlink: Option<f64>,
    pub objective: Option<f64>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub sweep: String,
    pub algo: Algo,
    pub seed: u64,
    pub cloud_load: Option<f64>,
    pub util_storage: Option<f64>,
    pub util_compute: Option<f64>,
    pub util_up: Option<f64>,
    pub util_down: Option<f64>,
    pub runtime_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factors: Option<FactorSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ResultRow {
    fn failed(sweep: &str, algo: Algo, seed: u64, err: &Error) -> Self {
        ResultRow {
            sweep: sweep.to_string(),
            algo,
            seed,
            cloud_load: None,
            util_storage: None,
            util_compute: None,
            util_up: None,
            util_down: None,
            runtime_ms: 0,
            factors: None,
            error: Some(err.to_string()),
        }
    }

    fn completed(sweep: &str, algo: Algo, seed: u64, out: &AlgoOutcome, util: [f64; 4]) -> Self {
        ResultRow {
            sweep: sweep.to_string(),
            algo,
            seed,
            cloud_load: Some(out.cloud_load),
            util_storage: Some(util[0]),
            util_compute: Some(util[1]),
            util_up: Some(util[2]),
            util_down: Some(util[3]),
            runtime_ms: out.runtime_ms,
            factors: out.factors,
            error: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

pub const CSV_HEADER: [&str; 9] = [
    "sweep",
    "algo",
    "seed",
    "cloud_load",
    "util_storage",
    "util_compute",
    "util_up",
    "util_down",
    "runtime_ms",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ResultTable {
    pub fn write<W: Write>(&self, format: Format, out: W) -> Result<()> {
        match format {
            Format::Csv => self.write_csv(out),
            Format::Json => {
                let mut out = out;
                serde_json::to_writer_pretty(&mut out, self)?;
                writeln!(out)?;
                Ok(())
            }
        }
    }

    fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(CSV_HEADER).map_err(io)?;
        for r in &self.rows {
            w.write_record([
                r.sweep.clone(),
                r.algo.name().to_string(),
                r.seed.to_string(),
                fmt_opt(r.cloud_load),
                fmt_opt(r.util_storage),
                fmt_opt(r.util_compute),
                fmt_opt(r.util_up),
                fmt_opt(r.util_down),
                r.runtime_ms.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(format: Format, input: R) -> Result<Self> {
        match format {
            Format::Json => Ok(serde_json::from_reader(input)?),
            Format::Csv => {
                let mut rd = csv::Reader::from_reader(input);
                let parse_err = |e: String| Error::Parse(e);
                let mut rows = Vec::new();
                for rec in rd.records() {
                    let rec = rec.map_err(|e| parse_err(e.to_string()))?;
                    let field = |i: usize| rec.get(i).unwrap_or("");
                    let num = |i: usize| -> Result<Option<f64>> {
                        let s = field(i);
                        if s.is_empty() {
                            Ok(None)
                        } else {
                            s.parse().map(Some).map_err(|_| parse_err(format!("bad number '{s}'")))
                        }
                    };
                    rows.push(ResultRow {
                        sweep: field(0).to_string(),
                        algo: field(1).parse()?,
                        seed: field(2).parse().map_err(|_| parse_err("bad seed".into()))?,
                        cloud_load: num(3)?,
                        util_storage: num(4)?,
                        util_compute: num(5)?,
                        util_up: num(6)?,
                        util_down: num(7)?,
                        runtime_ms: field(8).parse().map_err(|_| parse_err("bad runtime".into()))?,
                        factors: None,
                        error: None,
                    });
                }
                Ok(ResultTable { rows })
            }
        }
    }

    /// Mean cloud load per (sweep value, algorithm), in first-seen order;
    /// failed rows are skipped.
    pub fn mean_cloud_load(&self) -> Vec<(String, Algo, f64, usize)> {
        let mut out: Vec<(String, Algo, f64, usize)> = Vec::new();
        for r in &self.rows {
            let Some(c) = r.cloud_load else { continue };
            match out.iter_mut().find(|(s, a, _, _)| *s == r.sweep && *a == r.algo) {
                Some(e) => {
                    e.2 += c;
                    e.3 += 1;
                }
                None => out.push((r.sweep.clone(), r.algo, c, 1)),
            }
        }
        for e in &mut out {
            e.2 /= e.3 as f64;
        }
        out
    }
}

fn station_utilizations(instance: &Instance, loads: &[Resources]) -> Vec<[f64; 4]> {
    instance
        .stations
        .iter()
        .zip(loads)
        .map(|(bs, l)| {
            Resource::ALL.map(|r| {
                let cap = bs.capacity(r);
                if cap > 0.0 {
                    l.get(r) / cap
                } else {
                    0.0
                }
            })
        })
        .collect()
}

fn mean4(rows: &[[f64; 4]]) -> [f64; 4] {
    let mut m = [0.0; 4];
    for r in rows {
        for i in 0..4 {
            m[i] += r[i];
        }
    }
    m.map(|x| if rows.is_empty() { 0.0 } else { x / rows.len() as f64 })
}

/// Outcome of one algorithm on one instance.
struct AlgoOutcome {
    cloud_load: f64,
    per_station: Vec<[f64; 4]>,
    factors: Option<FactorSummary>,
    runtime_ms: u64,
}

fn run_algo(
    config: &ExperimentConfig,
    instance: &Instance,
    frac: &Result<(FractionalSolution, u64)>,
    algo: Algo,
    seed: u64,
) -> Result<AlgoOutcome> {
    let started = Instant::now();
    let outcome = match algo {
        Algo::Lr => {
            let (frac, _) = frac.as_ref().map_err(Clone::clone)?;
            AlgoOutcome {
                cloud_load: frac.objective,
                per_station: station_utilizations(instance, &frac.station_loads),
                factors: None,
                runtime_ms: 0,
            }
        }
        Algo::Rr => {
            let (frac, _) = frac.as_ref().map_err(Clone::clone)?;
            let trials = run_trials(instance, frac, derive_seed(seed, "rr", 0), config.trials)?;
            let best = &trials[pick_trial(&trials, config.pick).expect("trials >= 1")];
            let b = bicriteria_factors(instance, frac);
            let worst = |v: &[Factor]| v.iter().map(|f| f.value).fold(0.0, f64::max);
            AlgoOutcome {
                cloud_load: best.repaired_report.cloud_load as f64,
                per_station: station_utilizations(instance, &best.repaired_report.loads),
                factors: Some(FactorSummary {
                    storage: finite(worst(&b.storage)),
                    compute: finite(b.compute.value),
                    uplink: finite(b.uplink.value),
                    downlink: finite(b.downlink.value),
                    objective: finite(b.objective.value),
                }),
                runtime_ms: 0,
            }
        }
        Algo::Greedy => {
            let g = greedy_cache(instance)?;
            let sol = if config.greedy_raw { &g.raw } else { &g.repaired };
            let report = evaluate_solution(instance, sol)?;
            AlgoOutcome {
                cloud_load: report.cloud_load as f64,
                per_station: station_utilizations(instance, &report.loads),
                factors: None,
                runtime_ms: 0,
            }
        }
    };
    let mut elapsed = started.elapsed().as_millis() as u64;
    if matches!(algo, Algo::Lr | Algo::Rr) {
        // The shared LP solve is charged to both.
        elapsed += frac.as_ref().map(|(_, ms)| *ms).unwrap_or(0);
    }
    Ok(AlgoOutcome {
        runtime_ms: if config.timing { elapsed } else { 0 },
        ..outcome
    })
}

fn run_cell(config: &ExperimentConfig, value: &str, seed: u64) -> Vec<ResultRow> {
    let fail_all = |e: &Error| {
        config
            .algorithms
            .iter()
            .map(|&a| ResultRow::failed(value, a, seed, e))
            .collect::<Vec<_>>()
    };
    let instance = match config.cell_config(value, seed).and_then(|g| generate_instance(&g)) {
        Ok(i) => i,
        Err(e) => return fail_all(&e),
    };
    let needs_lp = config.algorithms.iter().any(|a| matches!(a, Algo::Rr | Algo::Lr));
    let frac = if needs_lp {
        let t = Instant::now();
        build_lp(&instance, false)
            .and_then(|p| solve_lp(&p))
            .map(|f| (f, t.elapsed().as_millis() as u64))
    } else {
        Err(Error::Internal("relaxation not requested".into()))
    };
    let mut rows = Vec::new();
    for &algo in &config.algorithms {
        match run_algo(config, &instance, &frac, algo, seed) {
            Ok(out) if config.sweep == SweepKind::Utilization => {
                for (n, &u) in out.per_station.iter().enumerate() {
                    rows.push(ResultRow::completed(&format!("bs{n}"), algo, seed, &out, u));
                }
            }
            Ok(out) => rows.push(ResultRow::completed(value, algo, seed, &out, mean4(&out.per_station))),
            Err(e) => rows.push(ResultRow::failed(value, algo, seed, &e)),
        }
    }
    rows
}

/// Runs every (value, seed) cell; one instance per cell is shared by all
/// algorithms. Rows come out ordered by sweep value, algorithm, seed.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ResultTable> {
    config.validate()?;
    let cells: Vec<(usize, u64)> = (0..config.values.len())
        .flat_map(|v| config.seeds.iter().map(move |&s| (v, s)))
        .collect();
    let results: Vec<Vec<ResultRow>> = cells
        .par_iter()
        .map(|&(v, seed)| run_cell(config, &config.values[v], seed))
        .collect();
    let mut keyed: Vec<(usize, usize, usize, ResultRow)> = Vec::new();
    for (&(v, _), rows) in cells.iter().zip(results) {
        for row in rows {
            let a = config.algorithms.iter().position(|&x| x == row.algo).unwrap_or(0);
            let s = config.seeds.iter().position(|&x| x == row.seed).unwrap_or(0);
            keyed.push((v, a, s, row));
        }
    }
    // Stable: per-station rows of a cell keep their station order.
    keyed.sort_by_key(|k| (k.0, k.1, k.2));
    Ok(ResultTable {
        rows: keyed.into_iter().map(|k| k.3).collect(),
    })
}
