//! Command-line experiments for the evolving voter model.
//!
//! Every subcommand takes `--seed`, `--replicas`, `--jobs`, `--out` and
//! `--config`. Outputs go to files named from the `--out` prefix; JSON
//! documents carry a `schema_version` field.

// `!(x > 0.0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use evovoter::ame::{
    backward_iterate_from, forward_simulate_replica, stationary_estimate, AmeParams, ForwardConfig,
    Plane, StationaryMode,
};
use evovoter::dynamics::{
    par_map, run_replica, Clock, GraphModel, ModelParams, RewireMode, RunResult, TargetRule,
};
use evovoter::graph::OpinionInit;
use evovoter::io::{read_snapshot, to_versioned_json};
use evovoter::moments::{
    order3_residuals, sample_moments, table1_rows, write_table1_csv, FourthOrder, MomentKind,
    MomentSampling, SimMoments, PUBLISHED_TABLE1,
};
use evovoter::oracle::{
    check_fixture_corpus, enumerate_drift, verify_identity_sum, write_fixture_corpus, TargetMode,
};
use evovoter::pair_approx::{pa_equilibrium, pa_integrate, pa_nu_c};
use evovoter::stats::{
    arch_endpoints_to_nu_c, classify_run, fit_arch, fit_cubic, mean_se, ArchScale, ClassifyConfig,
    NuCritical, Regime, Trajectory,
};

pub use config::Count;
use config::{merge_with_file, parse_enum, parse_grid, parse_list};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
    /// Checks ran to completion and some failed.
    #[error("{0}")]
    ChecksFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) | CliError::ChecksFailed(_) => 3,
        }
    }
}

impl From<evovoter::Error> for CliError {
    fn from(e: evovoter::Error) -> Self {
        match e {
            evovoter::Error::InvalidInput(_) => CliError::Validation(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn validation(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

#[derive(Debug, Parser)]
#[command(name = "evovoter", version, about = "Evolving voter model experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the model and write trajectories.
    Simulate(SimulateArgs),
    /// Fit the arch y = A x(1-x) - B to a trajectory or to fresh runs.
    Arch(ArchArgs),
    /// Moment table: closed-form predictions from simulated or published Ub.
    Table1(Table1Args),
    /// Two-plane approximate master equation.
    Ame(AmeArgs),
    /// Pair-approximation equilibrium and ODE.
    Pa(PaArgs),
    /// Exact drift checks on a fixture corpus or a snapshot.
    Oracle(OracleArgs),
    /// Classify runs over a grid of nu.
    Nuscan(NuscanArgs),
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct Common {
    /// Master seed; with the replica index it fixes every random stream.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replicas: Option<Count>,
    /// Worker threads for replicas (default: available cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output path prefix.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON file with default values for any of these options.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl Common {
    fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }

    fn replicas(&self, default: u64) -> u64 {
        self.replicas.map_or(default, |c| c.0)
    }

    fn jobs(&self) -> usize {
        self.jobs
            .filter(|&j| j > 0)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }

    fn out(&self, command: &str) -> PathBuf {
        self.out
            .clone()
            .unwrap_or_else(|| PathBuf::from("out").join(command))
    }
}

/// Model parameters shared by the simulation commands.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ModelArgs {
    #[arg(long)]
    pub n: Option<Count>,
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub l: Option<Count>,
    #[arg(long, allow_negative_numbers = true)]
    pub nu: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub p: Option<f64>,
    /// ctmc, discrete_efficient, discrete_uniform_edge or silk.
    #[arg(long, value_parser = parse_enum::<Clock>)]
    pub clock: Option<Clock>,
    /// regular or erdos_renyi.
    #[arg(long, value_parser = parse_enum::<GraphModel>)]
    pub graph: Option<GraphModel>,
    /// product or exact_count.
    #[arg(long, value_parser = parse_enum::<OpinionInit>)]
    pub init: Option<OpinionInit>,
    /// to_random or to_same.
    #[arg(long, value_parser = parse_enum::<RewireMode>)]
    pub rewire_mode: Option<RewireMode>,
    /// exclude_neighbors or uniform_all.
    #[arg(long, value_parser = parse_enum::<TargetRule>)]
    pub target_rule: Option<TargetRule>,
    #[arg(long)]
    pub max_updates: Option<Count>,
    #[arg(long)]
    pub max_time: Option<f64>,
    #[arg(long)]
    pub record_every: Option<Count>,
    #[arg(long)]
    pub record_dt: Option<f64>,
    /// Record ordered triple counts in each row.
    #[arg(long)]
    #[serde(default)]
    pub triples: bool,
    #[arg(long)]
    #[serde(default)]
    pub legacy_rates: bool,
}

impl ModelArgs {
    pub fn params(&self) -> CliResult<ModelParams> {
        let d = ModelParams::default();
        let params = ModelParams {
            n: self.n.map_or(d.n, |c| c.0 as usize),
            l: self.l.map_or(d.l, |c| c.0 as usize),
            nu: self.nu.unwrap_or(d.nu),
            p: self.p.unwrap_or(d.p),
            graph: self.graph.unwrap_or(d.graph),
            init: self.init.unwrap_or(d.init),
            rewire_mode: self.rewire_mode.unwrap_or(d.rewire_mode),
            target_rule: self.target_rule.unwrap_or(d.target_rule),
            clock: self.clock.unwrap_or(d.clock),
            legacy_rates: self.legacy_rates,
            max_updates: self.max_updates.map(|c| c.0),
            max_time: self.max_time,
            record_every: self.record_every.map(|c| c.0),
            record_dt: self.record_dt,
            record_triples: self.triples,
            regular_attempts: d.regular_attempts,
        };
        params.validate()?;
        Ok(params)
    }
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let f =
        File::create(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    Ok(BufWriter::new(f))
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut w = create(path)?;
    writeln!(w, "{}", to_versioned_json(value)?)?;
    w.flush()?;
    Ok(())
}

/// Files written by a command, and a one-line summary for the terminal.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

pub fn run(cli: Cli) -> CliResult<Report> {
    match cli.command {
        Command::Simulate(a) => cmd_simulate(&merge_with_file(&a, a.common.config.as_deref())?),
        Command::Arch(a) => cmd_arch(&merge_with_file(&a, a.common.config.as_deref())?),
        Command::Table1(a) => cmd_table1(&merge_with_file(&a, a.common.config.as_deref())?),
        Command::Ame(a) => cmd_ame(&merge_with_file(&a, a.common.config.as_deref())?),
        Command::Pa(a) => cmd_pa(&merge_with_file(&a, a.common.config.as_deref())?),
        Command::Oracle(a) => cmd_oracle(&merge_with_file(&a, a.common.config.as_deref())?),
        Command::Nuscan(a) => cmd_nuscan(&merge_with_file(&a, a.common.config.as_deref())?),
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
}

#[derive(Serialize)]
struct SimulateOutput<'a> {
    seed: u64,
    params: &'a ModelParams,
    results: &'a [RunResult],
}

pub fn cmd_simulate(a: &SimulateArgs) -> CliResult<Report> {
    let params = a.model.params()?;
    let seed = a.common.seed();
    let replicas = a.common.replicas(1);
    let out = a.common.out("simulate");
    let results = par_map(replicas, a.common.jobs(), |r| run_replica(&params, seed, r))?;
    let mut report = Report::default();
    for (r, res) in results.iter().enumerate() {
        let path = if replicas == 1 {
            with_suffix(&out, ".csv")
        } else {
            with_suffix(&out, &format!("_r{r}.csv"))
        };
        let mut w = create(&path)?;
        res.trajectory.write_csv(&mut w)?;
        w.flush()?;
        report.files.push(path);
    }
    let json = with_suffix(&out, ".json");
    write_json(
        &json,
        &SimulateOutput {
            seed,
            params: &params,
            results: &results,
        },
    )?;
    report.files.push(json);
    let absorbed = results.iter().filter(|r| r.absorbed).count();
    report.summary = format!("{replicas} replica(s), {absorbed} absorbed");
    Ok(report)
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ArchArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Fit a trajectory CSV instead of simulating; `--n` and `--L` give the
    /// normalization.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Keep adding replicas, each run to absorption or its cap, until the
    /// pooled update count reaches this value. `--replicas` is then an upper
    /// bound.
    #[arg(long)]
    pub min_updates: Option<Count>,
    /// edge_fraction (y = 2 N10 / nL) or per_vertex_degree (y = N10 / nL).
    #[arg(long, value_parser = parse_enum::<ArchScale>)]
    pub scale: Option<ArchScale>,
    /// Fraction of each trajectory's rows discarded before fitting.
    #[arg(long)]
    pub burn_in: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArchOutput {
    pub seed: u64,
    pub n: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub nu: f64,
    pub scale: ArchScale,
    pub burn_in: f64,
    pub replicas_used: u64,
    pub total_updates: u64,
    pub fit: evovoter::stats::ArchFit,
    /// Fit of `N100 / (n L^2)` against `x` when triples were recorded.
    pub cubic: Option<evovoter::stats::CubicFit>,
}

/// Runs replicas in index order until `min_updates` pooled updates, at most
/// `max_replicas`. The set used does not depend on `jobs`; 0 means all
/// cores.
pub fn pooled_runs(
    params: &ModelParams,
    seed: u64,
    max_replicas: u64,
    min_updates: Option<u64>,
    jobs: usize,
) -> CliResult<Vec<RunResult>> {
    let Some(min) = min_updates else {
        return Ok(par_map(max_replicas, jobs, |r| {
            run_replica(params, seed, r)
        })?);
    };
    let jobs = if jobs == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        jobs
    };
    let mut runs = Vec::new();
    let mut total = 0u64;
    let mut next = 0u64;
    while total < min && next < max_replicas {
        let batch = (jobs as u64).min(max_replicas - next);
        let start = next;
        let got = par_map(batch, jobs, |i| run_replica(params, seed, start + i))?;
        next += batch;
        for r in got {
            if total >= min {
                break;
            }
            total += r.updates;
            runs.push(r);
        }
    }
    Ok(runs)
}

pub fn cmd_arch(a: &ArchArgs) -> CliResult<Report> {
    let scale = a.scale.unwrap_or_default();
    let burn_in = a.burn_in.unwrap_or(0.1);
    if !(0.0..1.0).contains(&burn_in) {
        return Err(validation("burn-in must lie in [0, 1)"));
    }
    let params = a.model.params()?;
    let seed = a.common.seed();
    let trajectories: Vec<(Trajectory, u64)> = match &a.input {
        Some(path) => {
            let f = File::open(path).map_err(|e| validation(format!("{}: {e}", path.display())))?;
            let t = Trajectory::read_csv(BufReader::new(f))?;
            let updates = t.last().map_or(0, |r| r.updates);
            vec![(t, updates)]
        }
        None => {
            let max = a
                .common
                .replicas(if a.min_updates.is_some() { 1000 } else { 1 });
            pooled_runs(
                &params,
                seed,
                max,
                a.min_updates.map(|c| c.0),
                a.common.jobs(),
            )?
            .into_iter()
            .map(|r| (r.trajectory, r.updates))
            .collect()
        }
    };
    let l = params.l as f64;
    let mut points = Vec::new();
    let mut cubic_points = Vec::new();
    for (t, _) in &trajectories {
        points.extend(t.arch_points(params.n, l, scale, burn_in));
        cubic_points.extend(t.cubic_points(params.n, l, burn_in));
    }
    let fit = fit_arch(&points)?;
    let cubic = if cubic_points.len() >= 4 {
        Some(fit_cubic(&cubic_points)?)
    } else {
        None
    };
    let output = ArchOutput {
        seed,
        n: params.n,
        l: params.l,
        nu: params.nu,
        scale,
        burn_in,
        replicas_used: trajectories.len() as u64,
        total_updates: trajectories.iter().map(|t| t.1).sum(),
        fit,
        cubic,
    };
    let path = with_suffix(&a.common.out("arch"), ".json");
    write_json(&path, &output)?;
    let roots = fit
        .roots
        .map_or("none".to_string(), |(r0, r1)| format!("{r0:.4}, {r1:.4}"));
    Ok(Report {
        files: vec![path],
        summary: format!("A = {:.4}, B = {:.5}, roots {roots}", fit.a, fit.b),
    })
}

/// A comma-separated list of numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NuList(pub Vec<f64>);

impl std::str::FromStr for NuList {
    type Err = String;

    fn from_str(s: &str) -> Result<NuList, String> {
        parse_list(s).map(NuList)
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct Table1Args {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Predict from the published simulated Ub.
    #[arg(long, conflicts_with = "resimulate")]
    #[serde(default)]
    pub use_paper_ub: bool,
    /// Simulate the moments (n = 1600, L = 40 unless overridden).
    #[arg(long)]
    #[serde(default)]
    pub resimulate: bool,
    /// Comma-separated nu values (default: 2, 1.6, 1.44, 1.32, 1.2, 1).
    #[arg(long)]
    pub nu_list: Option<NuList>,
    #[arg(long)]
    pub n: Option<Count>,
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub l: Option<Count>,
    /// Updates before the first snapshot, in units of nL.
    #[arg(long)]
    pub warmup: Option<f64>,
    /// Updates between snapshots, in units of nL.
    #[arg(long)]
    pub spacing: Option<f64>,
    #[arg(long)]
    pub snapshots: Option<Count>,
    /// factorial or raw neighbor-count moments.
    #[arg(long, value_parser = parse_enum::<MomentKind>)]
    pub kind: Option<MomentKind>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResimulatedRow {
    pub nu: f64,
    pub replicas: u64,
    pub ub: f64,
    pub ub_se: f64,
    pub ua: f64,
    pub uab: f64,
    pub ubb: f64,
    pub uaa: f64,
    /// Order-3 aggregate residual relative to its scale, replica mean.
    pub order3_relative: f64,
}

pub fn cmd_table1(a: &Table1Args) -> CliResult<Report> {
    if a.use_paper_ub == a.resimulate {
        return Err(validation(
            "choose exactly one of --use-paper-ub and --resimulate",
        ));
    }
    let nus = a
        .nu_list
        .clone()
        .map_or_else(|| PUBLISHED_TABLE1.iter().map(|r| r.nu).collect(), |l| l.0);
    let out = a.common.out("table1");
    let mut report = Report::default();
    let sims: Vec<SimMoments> = if a.use_paper_ub {
        nus.iter()
            .map(|&nu| {
                PUBLISHED_TABLE1
                    .iter()
                    .find(|r| (r.nu - nu).abs() < 1e-9)
                    .map(SimMoments::from)
                    .ok_or_else(|| validation(format!("no published row for nu = {nu}")))
            })
            .collect::<CliResult<_>>()?
    } else {
        let d = MomentSampling::default();
        let cfg = MomentSampling {
            n: a.n.map_or(d.n, |c| c.0 as usize),
            l: a.l.map_or(d.l, |c| c.0 as usize),
            warmup: a.warmup.unwrap_or(d.warmup),
            spacing: a.spacing.unwrap_or(d.spacing),
            snapshots: a.snapshots.map_or(d.snapshots, |c| c.0 as usize),
            kind: a.kind.unwrap_or(d.kind),
        };
        let replicas = a.common.replicas(5);
        let seed = a.common.seed();
        let mut rows = Vec::new();
        for &nu in &nus {
            let states = par_map(replicas, a.common.jobs(), |r| {
                let (s, _) = sample_moments(nu, &cfg, seed, r)?;
                let o = order3_residuals(&s, &FourthOrder::default())?;
                Ok((s, o.aggregate / o.aggregate_scale))
            })?;
            let col = |f: fn(&evovoter::moments::MomentState) -> f64| {
                mean_se(&states.iter().map(|(s, _)| f(s)).collect::<Vec<_>>())
            };
            let (ub, ub_se) = col(|s| s.ub);
            rows.push(ResimulatedRow {
                nu,
                replicas,
                ub,
                ub_se,
                ua: col(|s| s.ua).0,
                uab: col(|s| s.uab).0,
                ubb: col(|s| s.ubb).0,
                uaa: col(|s| s.uaa).0,
                order3_relative: states.iter().map(|s| s.1).sum::<f64>() / replicas as f64,
            });
        }
        let json = with_suffix(&out, ".json");
        write_json(
            &json,
            &serde_json::json!({ "seed": seed, "sampling": cfg, "rows": rows }),
        )?;
        report.files.push(json);
        rows.iter()
            .map(|r| SimMoments {
                nu: r.nu,
                ub: r.ub,
                uab: r.uab,
                ubb: r.ubb,
                uaa: r.uaa,
            })
            .collect()
    };
    let rows = table1_rows(&sims)?;
    let csv = with_suffix(&out, ".csv");
    let mut w = create(&csv)?;
    write_table1_csv(&rows, &mut w)?;
    w.flush()?;
    report.files.insert(0, csv);
    report.summary = format!("{} row(s)", rows.len());
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmeTask {
    /// One long path: path CSV, occupation histogram, summary.
    Forward,
    /// Backward iteration from two starts: distances per cycle.
    Backward,
    /// Time-average and renewal-weighted stationary estimates.
    Stationary,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct AmeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// forward, backward or stationary.
    #[arg(long, value_parser = parse_enum::<AmeTask>)]
    pub task: Option<AmeTask>,
    #[arg(long, allow_negative_numbers = true)]
    pub nu: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    /// Plane-0 counterpart of alpha (default: alpha).
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    /// Plane-0 counterpart of beta (default: beta).
    #[arg(long, allow_negative_numbers = true)]
    pub eps: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub eta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub p: Option<f64>,
    /// Simulated time for forward, or time budget for the time average.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Renewal samples per plane for the stationary task.
    #[arg(long)]
    pub samples: Option<Count>,
    #[arg(long)]
    pub cycles: Option<Count>,
    #[arg(long)]
    pub bins: Option<Count>,
}

impl AmeArgs {
    pub fn params(&self) -> CliResult<AmeParams> {
        let alpha = self.alpha.unwrap_or(0.3625);
        let beta = self.beta.unwrap_or(0.3074);
        let params = AmeParams {
            bar_alpha: alpha,
            bar_beta: beta,
            bar_delta: self.delta.unwrap_or(alpha),
            bar_eps: self.eps.unwrap_or(beta),
            bar_eta: self.eta.unwrap_or(0.0833),
            nu: self.nu.unwrap_or(2.0),
            p: self.p.unwrap_or(0.5),
        };
        params.validate()?;
        Ok(params)
    }
}

#[derive(Serialize)]
struct ForwardSummary {
    replica: u64,
    jumps: u64,
    time_in: [f64; 2],
    occupancy_one: f64,
    mean_sojourn: [f64; 2],
    end_plane: Plane,
    end: [f64; 2],
    clamped: bool,
}

pub fn cmd_ame(a: &AmeArgs) -> CliResult<Report> {
    let params = a.params()?;
    let seed = a.common.seed();
    let out = a.common.out("ame");
    let bins = a.bins.map_or(100, |c| c.0 as usize);
    let mut report = Report::default();
    match a.task.unwrap_or(AmeTask::Stationary) {
        AmeTask::Forward => {
            let horizon = a.horizon.unwrap_or(1000.0);
            let cfg = ForwardConfig {
                bins,
                ..Default::default()
            };
            let replicas = a.common.replicas(1);
            let runs = par_map(replicas, a.common.jobs(), |r| {
                forward_simulate_replica(&params, [0.0, 0.0], Plane::One, horizon, seed, r, cfg)
            })?;
            let path_csv = with_suffix(&out, "_path.csv");
            let mut w = create(&path_csv)?;
            writeln!(w, "replica,t,plane,x,y")?;
            for (r, run) in runs.iter().enumerate() {
                for p in &run.path {
                    writeln!(w, "{r},{},{},{},{}", p.t, p.plane.index(), p.x, p.y)?;
                }
            }
            w.flush()?;
            let mut hist = runs[0].hist.clone();
            for run in &runs[1..] {
                hist.merge(&run.hist);
            }
            let hist_csv = with_suffix(&out, "_hist.csv");
            let mut w = create(&hist_csv)?;
            hist.write_csv(&mut w)?;
            w.flush()?;
            let summaries: Vec<ForwardSummary> = runs
                .iter()
                .enumerate()
                .map(|(r, run)| ForwardSummary {
                    replica: r as u64,
                    jumps: run.jumps,
                    time_in: run.time_in,
                    occupancy_one: run.occupancy(Plane::One),
                    mean_sojourn: [mean_se(&run.sojourns[0]).0, mean_se(&run.sojourns[1]).0],
                    end_plane: run.end_plane,
                    end: run.end,
                    clamped: run.clamped,
                })
                .collect();
            let json = with_suffix(&out, ".json");
            write_json(
                &json,
                &serde_json::json!({ "seed": seed, "params": params, "horizon": horizon, "runs": summaries }),
            )?;
            report.files = vec![path_csv, hist_csv, json];
            report.summary = format!(
                "{} path(s), occupancy of plane 1 {:.4}",
                runs.len(),
                summaries[0].occupancy_one
            );
        }
        AmeTask::Backward => {
            let cycles = a.cycles.map_or(50, |c| c.0 as usize);
            let replicas = a.common.replicas(1);
            let z = params.fixed_point(Plane::Zero)?;
            let w = [0.0, 0.0];
            let runs = par_map(replicas, a.common.jobs(), |r| {
                backward_iterate_from(&params, Plane::Zero, seed.wrapping_add(r), cycles, z, w)
            })?;
            let csv = with_suffix(&out, "_distances.csv");
            let mut f = create(&csv)?;
            writeln!(f, "replica,cycle,distance")?;
            for (r, run) in runs.iter().enumerate() {
                for (k, d) in run.distances.iter().enumerate() {
                    writeln!(f, "{r},{},{d:e}", k + 1)?;
                }
            }
            f.flush()?;
            let json = with_suffix(&out, ".json");
            let limits: Vec<[f64; 2]> = runs.iter().map(|r| r.y).collect();
            let finals: Vec<f64> = runs.iter().map(|r| *r.distances.last().unwrap()).collect();
            write_json(
                &json,
                &serde_json::json!({ "seed": seed, "params": params, "cycles": cycles, "entry_points": limits, "final_distance": finals }),
            )?;
            let worst = finals.iter().copied().fold(0.0, f64::max);
            report.files = vec![csv, json];
            report.summary = format!("largest distance after {cycles} cycles: {worst:e}");
        }
        AmeTask::Stationary => {
            let horizon = a.horizon.unwrap_or(2e5);
            let samples = a.samples.map_or(20_000, |c| c.0) as f64;
            let ta = stationary_estimate(&params, StationaryMode::TimeAverage, horizon, seed)?;
            let rw = stationary_estimate(&params, StationaryMode::RenewalWeighted, samples, seed)?;
            for (name, est) in [("time_average", &ta), ("renewal", &rw)] {
                let path = with_suffix(&out, &format!("_{name}_hist.csv"));
                let mut w = create(&path)?;
                est.hist.write_csv(&mut w)?;
                w.flush()?;
                report.files.push(path);
            }
            let strip = |e: &evovoter::ame::StationaryEstimate| {
                serde_json::json!({
                    "occupancy_one": e.occupancy_one, "occupancy_se": e.occupancy_se,
                    "nu0": e.nu0, "nu0_se": e.nu0_se, "nu1": e.nu1, "nu1_se": e.nu1_se,
                    "mode_one": e.hist.coarsen(5).mode(Plane::One), "mode_zero": e.hist.coarsen(5).mode(Plane::Zero),
                })
            };
            let gap = (ta.occupancy_one - rw.occupancy_one).abs();
            let combined = (ta.occupancy_se.powi(2) + rw.occupancy_se.powi(2)).sqrt();
            let json = with_suffix(&out, ".json");
            write_json(
                &json,
                &serde_json::json!({
                    "seed": seed, "params": params,
                    "fixed_point": [params.fixed_point(Plane::Zero)?, params.fixed_point(Plane::One)?],
                    "time_average": strip(&ta), "renewal": strip(&rw),
                    "occupancy_gap_in_se": gap / combined,
                }),
            )?;
            report.files.push(json);
            report.summary = format!(
                "occupancy of plane 1: {:.4} ± {:.4} (time average), {:.4} ± {:.4} (renewal)",
                ta.occupancy_one, ta.occupancy_se, rw.occupancy_one, rw.occupancy_se
            );
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct PaArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long, allow_negative_numbers = true)]
    pub p: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub nu: Option<f64>,
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub l: Option<f64>,
    /// Also integrate the ODE from this per-capita `N10,N11,N00`.
    #[arg(long)]
    pub init: Option<NuList>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
}

pub fn cmd_pa(a: &PaArgs) -> CliResult<Report> {
    let p = a.p.unwrap_or(0.5);
    let nu = a.nu.unwrap_or(1.0);
    let l = a.l.unwrap_or(40.0);
    let eq = pa_equilibrium(p, nu, l)?;
    let out = a.common.out("pa");
    let mut report = Report::default();
    let mut doc = serde_json::json!({ "nu_c": pa_nu_c(p), "equilibrium": eq, "state": eq.state() });
    if let Some(init) = &a.init {
        let [n10, n11, n00] = init.0[..] else {
            return Err(validation("--init needs three values N10,N11,N00"));
        };
        let tr = pa_integrate(
            p,
            nu,
            l,
            [n10, n11, n00],
            a.t_end.unwrap_or(100.0),
            a.dt.unwrap_or(0.01),
        )?;
        let csv = with_suffix(&out, ".csv");
        let mut w = create(&csv)?;
        writeln!(w, "t,N10,N11,N00")?;
        for (t, s) in tr.times.iter().zip(&tr.states) {
            writeln!(w, "{t},{},{},{}", s[0], s[1], s[2])?;
        }
        w.flush()?;
        report.files.push(csv);
        doc["integration"] = serde_json::json!({ "absorbed": tr.absorbed, "final": tr.last() });
    }
    let json = with_suffix(&out, ".json");
    write_json(&json, &doc)?;
    report.files.insert(0, json);
    report.summary = format!(
        "J0 = {}, J1 = {}, K1 = {}, K0 = {}, feasible = {}",
        eq.j0, eq.j1, eq.k1, eq.k0, eq.feasible
    );
    Ok(report)
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct OracleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Check every fixture in this directory.
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
    /// Write `--replicas` random fixtures (default 50) into this directory
    /// before checking it.
    #[arg(long)]
    #[serde(default)]
    pub generate: bool,
    #[arg(long)]
    pub max_n: Option<Count>,
    /// Compare drifts on one snapshot file instead.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    pub nu: Option<f64>,
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub l: Option<f64>,
    /// idealized_target or exclude_neighbors.
    #[arg(long, value_parser = parse_enum::<TargetMode>)]
    pub mode: Option<TargetMode>,
}

pub fn cmd_oracle(a: &OracleArgs) -> CliResult<Report> {
    let out = a.common.out("oracle");
    let json = with_suffix(&out, ".json");
    match (&a.fixtures, &a.graph) {
        (Some(dir), None) => {
            if a.generate {
                let max_n = a.max_n.map_or(40, |c| c.0 as usize);
                write_fixture_corpus(dir, a.common.replicas(50), a.common.seed(), max_n)?;
            }
            let outcomes = check_fixture_corpus(dir)?;
            if outcomes.is_empty() {
                return Err(validation(format!("no fixtures in {}", dir.display())));
            }
            write_json(&json, &serde_json::json!({ "fixtures": outcomes }))?;
            let failed: Vec<&str> = outcomes
                .iter()
                .filter(|o| !o.passed())
                .map(|o| o.name.as_str())
                .collect();
            if !failed.is_empty() {
                return Err(CliError::ChecksFailed(format!(
                    "{} of {} fixtures failed: {}",
                    failed.len(),
                    outcomes.len(),
                    failed.join(", ")
                )));
            }
            Ok(Report {
                files: vec![json],
                summary: format!("all {} fixtures pass", outcomes.len()),
            })
        }
        (None, Some(path)) => {
            let f = File::open(path).map_err(|e| validation(format!("{}: {e}", path.display())))?;
            let g = read_snapshot(BufReader::new(f))?;
            let nu = a.nu.ok_or_else(|| validation("--graph needs --nu"))?;
            let l = a.l.ok_or_else(|| validation("--graph needs --L"))?;
            let r = enumerate_drift(&g, nu, l, a.mode.unwrap_or(TargetMode::IdealizedTarget))?;
            let identity = verify_identity_sum(&r);
            write_json(
                &json,
                &serde_json::json!({ "report": r, "identity_sum": identity }),
            )?;
            if !identity {
                return Err(CliError::ChecksFailed(
                    "drift components do not sum to zero".into(),
                ));
            }
            Ok(Report {
                files: vec![json],
                summary: format!("max relative gap {:e}", r.max_rel_gap),
            })
        }
        _ => Err(validation("give exactly one of --fixtures and --graph")),
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct NuscanArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// start:stop:step, inclusive.
    #[arg(long)]
    pub nu_grid: Option<String>,
    #[arg(long)]
    pub c_rapid: Option<f64>,
    #[arg(long)]
    pub c_prolonged: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NuscanRow {
    pub nu: f64,
    pub rapid: usize,
    pub prolonged: usize,
    pub indeterminate: usize,
    pub mean_minority: f64,
    /// Lower arch root fitted to the pooled replicas, if any.
    pub arch_root: Option<f64>,
}

pub fn cmd_nuscan(a: &NuscanArgs) -> CliResult<Report> {
    let grid = parse_grid(a.nu_grid.as_deref().unwrap_or("0.4:2.6:0.2")).map_err(validation)?;
    let base = a.model.params()?;
    let cfg = ClassifyConfig {
        c_rapid: a.c_rapid.unwrap_or(ClassifyConfig::default().c_rapid),
        c_prolonged: a
            .c_prolonged
            .unwrap_or(ClassifyConfig::default().c_prolonged),
    };
    let nl = (base.n * base.l) as f64;
    let cap = base
        .max_updates
        .unwrap_or((cfg.c_prolonged * nl).ceil() as u64);
    let replicas = a.common.replicas(10);
    let seed = a.common.seed();
    let out = a.common.out("nuscan");
    let runs_csv = with_suffix(&out, "_runs.csv");
    let mut w = create(&runs_csv)?;
    writeln!(w, "nu,replica,regime,absorbed,updates,final_density")?;
    let mut rows = Vec::new();
    for &nu in &grid {
        let params = ModelParams {
            nu,
            max_updates: Some(cap),
            ..base.clone()
        };
        params.validate()?;
        let runs = par_map(replicas, a.common.jobs(), |r| run_replica(&params, seed, r))?;
        let mut counts = [0usize; 3];
        let mut points = Vec::new();
        for (r, run) in runs.iter().enumerate() {
            let regime = classify_run(run, cfg);
            counts[regime as usize] += 1;
            let name = match regime {
                Regime::Rapid => "rapid",
                Regime::Prolonged => "prolonged",
                Regime::Indeterminate => "indeterminate",
            };
            writeln!(
                w,
                "{nu},{r},{name},{},{},{}",
                run.absorbed,
                run.updates,
                run.final_density()
            )?;
            points.extend(run.trajectory.arch_points(
                params.n,
                params.l as f64,
                ArchScale::EdgeFraction,
                0.1,
            ));
        }
        let arch_root = fit_arch(&points).ok().and_then(|f| f.roots).map(|r| r.0);
        rows.push(NuscanRow {
            nu,
            rapid: counts[0],
            prolonged: counts[1],
            indeterminate: counts[2],
            mean_minority: runs.iter().map(|r| r.minority_fraction()).sum::<f64>()
                / runs.len().max(1) as f64,
            arch_root,
        });
    }
    w.flush()?;
    let csv = with_suffix(&out, ".csv");
    let mut w = create(&csv)?;
    writeln!(
        w,
        "nu,rapid,prolonged,indeterminate,mean_minority,arch_root"
    )?;
    for r in &rows {
        let root = r.arch_root.map_or(String::new(), |x| x.to_string());
        writeln!(
            w,
            "{},{},{},{},{},{root}",
            r.nu, r.rapid, r.prolonged, r.indeterminate, r.mean_minority
        )?;
    }
    w.flush()?;
    let endpoints: Vec<(f64, Option<f64>)> = rows.iter().map(|r| (r.nu, r.arch_root)).collect();
    let nu_c = arch_endpoints_to_nu_c(base.p, &endpoints)?;
    let json = with_suffix(&out, ".json");
    write_json(
        &json,
        &serde_json::json!({ "seed": seed, "params": base, "classify": cfg, "cap": cap, "rows": rows, "nu_c": nu_c }),
    )?;
    Ok(Report {
        files: vec![csv, runs_csv, json],
        summary: match nu_c {
            NuCritical::Found(v) => format!("{} grid point(s), nu_c estimate {v:.4}", rows.len()),
            NuCritical::Censored => format!("{} grid point(s), no arch contains p", rows.len()),
        },
    })
}
