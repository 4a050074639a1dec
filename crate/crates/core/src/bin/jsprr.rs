use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use jsprr::adaptation::{run_periods, DemandSequence, PeriodOptions};
use jsprr::analysis::{counterexample_report, delta_bound, greedy_guarantee_check, Bottleneck};
use jsprr::baselines::{greedy_cache, nonoverlapping_optimal, optimal_bruteforce};
use jsprr::experiment::{run_experiment, Algo, ExperimentConfig, Format, ResultTable, SweepKind};
use jsprr::generator::{generate_instance, GeneratorConfig};
use jsprr::model::{evaluate_solution, Instance};
use jsprr::relaxation::{build_lp, lp_stats, solve_lp};
use jsprr::rounding::{bicriteria_factors, pick_trial, run_trials, Pick};
use jsprr::{Error, Result};

#[derive(Parser)]
#[command(name = "jsprr", version, about = "Joint service placement and request routing")]
struct Cli {
    /// Master seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file (stdout when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<OutFormat>,
    /// Multiplies the number of generated users.
    #[arg(long, global = true, default_value_t = 1.0)]
    scale: f64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic instance.
    Generate(GenerateArgs),
    /// LP relaxation plus randomized rounding and repair.
    Solve(SolveArgs),
    /// Run a comparison algorithm or exact oracle.
    Baseline(BaselineArgs),
    /// Approximate-submodularity diagnostics.
    Analyze(AnalyzeArgs),
    /// Multi-period run under an adaptation budget.
    Periods(PeriodsArgs),
    /// Capacity sweep over generated instances.
    Experiment(ExperimentArgs),
    /// Aggregate an experiment result file.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Generator settings as JSON; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    stations: Option<usize>,
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    services: Option<usize>,
    #[arg(long)]
    storage: Option<f64>,
    #[arg(long)]
    compute: Option<f64>,
    #[arg(long)]
    uplink: Option<f64>,
    #[arg(long)]
    downlink: Option<f64>,
    #[arg(long)]
    zipf: Option<f64>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    side: Option<f64>,
}

#[derive(Args)]
struct SolveArgs {
    /// Instance JSON, `-` for stdin.
    instance: PathBuf,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, value_enum, default_value_t = PickArg::Best)]
    pick: PickArg,
    /// Include the unrepaired rounding of the chosen trial.
    #[arg(long)]
    emit_raw: bool,
    /// Write the relaxation in LP text format to this path.
    #[arg(long)]
    dump_lp: Option<PathBuf>,
    /// Ignore the instance's adaptation budget.
    #[arg(long)]
    no_adaptation: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum PickArg {
    Best,
    Median,
}

impl From<PickArg> for Pick {
    fn from(p: PickArg) -> Pick {
        match p {
            PickArg::Best => Pick::Best,
            PickArg::Median => Pick::Median,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineAlgo {
    Greedy,
    Nonoverlap,
    Oracle,
}

#[derive(Args)]
struct BaselineArgs {
    instance: PathBuf,
    #[arg(long, value_enum)]
    algo: BaselineAlgo,
    /// Include greedy's solution before overload repair.
    #[arg(long)]
    emit_raw: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Unit-requirement instance; omit to evaluate the built-in counterexample.
    instance: Option<PathBuf>,
    /// Also compare greedy against the exact optimum (tiny instances only).
    #[arg(long)]
    guarantee: bool,
    #[arg(long, value_enum, default_value_t = BottleneckArg::Compute)]
    bottleneck: BottleneckArg,
    /// Per-station capacity of the counterexample bottleneck.
    #[arg(long, default_value_t = 1.0)]
    capacity: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum BottleneckArg {
    Compute,
    Uplink,
    Downlink,
}

impl From<BottleneckArg> for Bottleneck {
    fn from(b: BottleneckArg) -> Bottleneck {
        match b {
            BottleneckArg::Compute => Bottleneck::Compute,
            BottleneckArg::Uplink => Bottleneck::Uplink,
            BottleneckArg::Downlink => Bottleneck::Downlink,
        }
    }
}

#[derive(Args)]
struct PeriodsArgs {
    instance: PathBuf,
    #[arg(long, default_value_t = 2)]
    periods: usize,
    /// Probability that a user re-draws its service between periods.
    #[arg(long, default_value_t = 0.1)]
    churn: f64,
    /// Replacement budget per period in GB; `inf` disables it.
    #[arg(long, default_value_t = f64::INFINITY)]
    budget: f64,
    /// Do not charge the first period against the budget.
    #[arg(long)]
    bootstrap_free: bool,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// Zipf shape used when re-drawing services.
    #[arg(long, default_value_t = 0.8)]
    zipf: f64,
    /// Explicit demand sequence (JSON) instead of churn.
    #[arg(long)]
    demands: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long, value_enum, default_value_t = SweepArg::Storage)]
    sweep: SweepArg,
    /// Comma-separated sweep values; bandwidth points as `up/down`.
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<String>>,
    /// Comma-separated seeds or inclusive ranges like `0-19`.
    #[arg(long)]
    seeds: Option<String>,
    /// Number of consecutive seeds starting at --seed when --seeds is absent.
    #[arg(long, default_value_t = 20)]
    n_seeds: u64,
    #[arg(long, value_delimiter = ',', default_value = "rr,greedy,lr")]
    algos: Vec<String>,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, value_enum, default_value_t = PickArg::Best)]
    pick: PickArg,
    /// Report greedy before overload repair.
    #[arg(long)]
    greedy_raw: bool,
    /// Record wall-clock runtimes (output is then not reproducible).
    #[arg(long)]
    timing: bool,
    /// Generator settings as JSON.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepArg {
    Storage,
    Compute,
    Bandwidth,
    Utilization,
}

impl From<SweepArg> for SweepKind {
    fn from(s: SweepArg) -> SweepKind {
        match s {
            SweepArg::Storage => SweepKind::Storage,
            SweepArg::Compute => SweepKind::Compute,
            SweepArg::Bandwidth => SweepKind::Bandwidth,
            SweepArg::Utilization => SweepKind::Utilization,
        }
    }
}

#[derive(Args)]
struct ReportArgs {
    /// Result file written by `experiment`.
    results: PathBuf,
}

fn read_input(path: &Path) -> Result<String> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        Ok(s)
    } else {
        fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }
}

fn load_instance(path: &Path) -> Result<Instance> {
    let inst = Instance::from_json(&read_input(path)?)?;
    let report = inst.validate();
    if !report.is_ok() {
        return Err(Error::InvalidInstance(report.violations.join("; ")));
    }
    Ok(inst)
}

struct Output {
    path: Option<PathBuf>,
}

impl Output {
    fn bytes(&self, data: &[u8]) -> Result<()> {
        match &self.path {
            Some(p) => fs::write(p, data).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
            None => {
                let mut out = io::stdout().lock();
                out.write_all(data)?;
                out.flush()?;
                Ok(())
            }
        }
    }

    fn json<T: Serialize>(&self, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.bytes(s.as_bytes())
    }

    fn csv(&self, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(header).map_err(err)?;
        for r in rows {
            w.write_record(r).map_err(err)?;
        }
        let data = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        self.bytes(&data)
    }
}

fn json_only(format: Option<OutFormat>, what: &str) -> Result<()> {
    match format {
        Some(OutFormat::Csv) => Err(Error::InvalidConfig(format!("{what} output is JSON only"))),
        _ => Ok(()),
    }
}

fn read_generator_config(path: &Option<PathBuf>) -> Result<GeneratorConfig> {
    match path {
        Some(p) => Ok(serde_json::from_str(&read_input(p)?)?),
        None => Ok(GeneratorConfig::default()),
    }
}

fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    let bad = || Error::InvalidConfig(format!("bad seed list '{spec}'"));
    let mut seeds = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
                if a > b {
                    return Err(bad());
                }
                seeds.extend(a..=b);
            }
            None => seeds.push(part.parse().map_err(|_| bad())?),
        }
    }
    Ok(seeds)
}

fn generate(cli: &Cli, args: &GenerateArgs, out: &Output) -> Result<()> {
    json_only(cli.format, "generate")?;
    let mut g = read_generator_config(&args.config)?;
    g.seed = cli.seed;
    macro_rules! set {
        ($($field:ident <- $arg:ident),*) => {
            $(if let Some(v) = args.$arg { g.$field = v; })*
        };
    }
    set!(n_stations <- stations, n_users <- users, n_services <- services,
         storage_cap <- storage, compute_cap <- compute, uplink_cap <- uplink,
         downlink_cap <- downlink, zipf_shape <- zipf, coverage_radius <- radius,
         area_side <- side);
    g.n_users = (g.n_users as f64 * cli.scale).round() as usize;
    let inst = generate_instance(&g)?;
    out.bytes(format!("{}\n", inst.to_json()).as_bytes())
}

fn solve(cli: &Cli, args: &SolveArgs, out: &Output) -> Result<()> {
    let inst = load_instance(&args.instance)?;
    let adaptation = inst.has_adaptation() && !args.no_adaptation;
    let mut inst = inst;
    if !adaptation {
        inst.prev_placement = None;
        inst.adaptation_budget = None;
    }
    let problem = build_lp(&inst, adaptation)?;
    if let Some(path) = &args.dump_lp {
        fs::write(path, problem.to_lp_format())
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    }
    let frac = solve_lp(&problem)?;
    if args.trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }
    let trials = run_trials(&inst, &frac, cli.seed, args.trials)?;
    let chosen = &trials[pick_trial(&trials, args.pick.into()).expect("trials >= 1")];
    if let Some(OutFormat::Csv) = cli.format {
        let rows: Vec<Vec<String>> = trials
            .iter()
            .map(|t| {
                vec![
                    t.trial.to_string(),
                    t.seed.to_string(),
                    t.raw_report.cloud_load.to_string(),
                    t.raw_report.feasible.to_string(),
                    t.repaired_report.cloud_load.to_string(),
                ]
            })
            .collect();
        return out.csv(&["trial", "seed", "raw_cloud_load", "raw_feasible", "cloud_load"], &rows);
    }
    let trial_summary: Vec<_> = trials
        .iter()
        .map(|t| {
            json!({
                "trial": t.trial,
                "seed": t.seed,
                "raw_cloud_load": t.raw_report.cloud_load,
                "raw_feasible": t.raw_report.feasible,
                "cloud_load": t.repaired_report.cloud_load,
            })
        })
        .collect();
    let mut doc = json!({
        "lp": {
            "objective": frac.objective,
            "stats": lp_stats(&frac),
            "iterations": frac.iterations,
            "variables": problem.n_variables(),
            "constraints": problem.n_constraints(),
        },
        "bicriteria": bicriteria_factors(&inst, &frac),
        "chosen_trial": chosen.trial,
        "cloud_load": chosen.repaired_report.cloud_load,
        "solution": chosen.repaired,
        "report": chosen.repaired_report,
        "trials": trial_summary,
    });
    if args.emit_raw {
        doc["raw"] = json!({ "solution": chosen.raw, "report": chosen.raw_report });
    }
    out.json(&doc)
}

fn baseline(cli: &Cli, args: &BaselineArgs, out: &Output) -> Result<()> {
    let inst = load_instance(&args.instance)?;
    let (name, cloud_load, solution, raw) = match args.algo {
        BaselineAlgo::Greedy => {
            let g = greedy_cache(&inst)?;
            let raw = args.emit_raw.then(|| g.raw.clone());
            ("greedy", g.repaired.cloud_load(), Some(g.repaired), raw)
        }
        BaselineAlgo::Nonoverlap => ("nonoverlap", nonoverlapping_optimal(&inst)?, None, None),
        BaselineAlgo::Oracle => {
            let o = optimal_bruteforce(&inst)?;
            ("oracle", o.cloud_load, Some(o.solution), None)
        }
    };
    if let Some(OutFormat::Csv) = cli.format {
        return out.csv(&["algo", "cloud_load"], &[vec![name.into(), cloud_load.to_string()]]);
    }
    let mut doc = json!({ "algo": name, "cloud_load": cloud_load });
    if let Some(sol) = &solution {
        doc["solution"] = json!(sol);
        doc["report"] = json!(evaluate_solution(&inst, sol)?);
    }
    if let Some(raw) = &raw {
        doc["raw"] = json!({ "solution": raw, "report": evaluate_solution(&inst, raw)? });
    }
    out.json(&doc)
}

fn analyze(cli: &Cli, args: &AnalyzeArgs, out: &Output) -> Result<()> {
    json_only(cli.format, "analyze")?;
    match &args.instance {
        None => out.json(&counterexample_report(args.bottleneck.into(), args.capacity)?),
        Some(path) => {
            let inst = load_instance(path)?;
            let mut doc = json!(delta_bound(&inst)?);
            if args.guarantee {
                doc["guarantee"] = json!(greedy_guarantee_check(&inst)?);
            }
            out.json(&doc)
        }
    }
}

fn periods(cli: &Cli, args: &PeriodsArgs, out: &Output) -> Result<()> {
    let inst = load_instance(&args.instance)?;
    let demands = match &args.demands {
        Some(p) => serde_json::from_str(&read_input(p)?)?,
        None => DemandSequence::with_churn(&inst, args.periods, args.churn, args.zipf, cli.seed)?,
    };
    let opts = PeriodOptions {
        trials: args.trials,
        bootstrap_free: args.bootstrap_free,
        ..Default::default()
    };
    let results = run_periods(&inst, &demands, args.budget, cli.seed, &opts)?;
    if let Some(OutFormat::Csv) = cli.format {
        let rows: Vec<Vec<String>> = results
            .iter()
            .map(|r| {
                vec![
                    r.period.to_string(),
                    r.lp_objective.to_string(),
                    r.raw_cloud_load.to_string(),
                    r.cloud_load.to_string(),
                    r.budget.map(|b| b.to_string()).unwrap_or_default(),
                    r.raw_adaptation_spend.to_string(),
                    r.adaptation_spend.to_string(),
                ]
            })
            .collect();
        return out.csv(
            &["period", "lp_objective", "raw_cloud_load", "cloud_load", "budget", "raw_adaptation_spend", "adaptation_spend"],
            &rows,
        );
    }
    out.json(&results)
}

fn experiment(cli: &Cli, args: &ExperimentArgs, out: &Output) -> Result<()> {
    let sweep: SweepKind = args.sweep.into();
    let seeds = match &args.seeds {
        Some(s) => parse_seeds(s)?,
        None => (0..args.n_seeds).map(|k| cli.seed.wrapping_add(k)).collect(),
    };
    let algorithms = args
        .algos
        .iter()
        .map(|a| a.trim().parse::<Algo>())
        .collect::<Result<Vec<_>>>()?;
    let config = ExperimentConfig {
        sweep,
        values: args.values.clone().unwrap_or_else(|| sweep.default_values()),
        seeds,
        algorithms,
        generator: read_generator_config(&args.config)?,
        scale: cli.scale,
        trials: args.trials,
        pick: args.pick.into(),
        greedy_raw: args.greedy_raw,
        timing: args.timing,
    };
    let table = run_experiment(&config)?;
    let mut buf = Vec::new();
    table.write(table_format(cli.format), &mut buf)?;
    out.bytes(&buf)
}

fn table_format(f: Option<OutFormat>) -> Format {
    match f {
        Some(OutFormat::Json) => Format::Json,
        _ => Format::Csv,
    }
}

fn report(cli: &Cli, args: &ReportArgs, out: &Output) -> Result<()> {
    let text = read_input(&args.results)?;
    let input_format = if text.trim_start().starts_with('{') { Format::Json } else { Format::Csv };
    let table = ResultTable::read(input_format, text.as_bytes())?;
    let means = table.mean_cloud_load();
    match table_format(cli.format) {
        Format::Csv => {
            let rows: Vec<Vec<String>> = means
                .iter()
                .map(|(s, a, m, k)| vec![s.clone(), a.name().into(), k.to_string(), m.to_string()])
                .collect();
            out.csv(&["sweep", "algo", "runs", "mean_cloud_load"], &rows)
        }
        Format::Json => {
            let rows: Vec<_> = means
                .iter()
                .map(|(s, a, m, k)| json!({ "sweep": s, "algo": a, "runs": k, "mean_cloud_load": m }))
                .collect();
            out.json(&rows)
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let out = Output { path: cli.out.clone() };
    match &cli.command {
        Command::Generate(a) => generate(cli, a, &out),
        Command::Solve(a) => solve(cli, a, &out),
        Command::Baseline(a) => baseline(cli, a, &out),
        Command::Analyze(a) => analyze(cli, a, &out),
        Command::Periods(a) => periods(cli, a, &out),
        Command::Experiment(a) => experiment(cli, a, &out),
        Command::Report(a) => report(cli, a, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("jsprr: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
