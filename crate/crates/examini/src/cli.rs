//! Command-line entry point: one thin binary, six subcommands.
//!
//! Exit codes are the only success/failure channel: 0 success, 1 a
//! regression or check failed, 2 usage or config-schema error, 3 runtime
//! error. Every run echoes an effective config (all defaults injected,
//! all overrides applied) next to its outputs; re-running that file
//! reproduces the outputs bit for bit.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bench::{
    emit_report, kernel_speedup_table, read_kernel_csv, regression_check, run_campaign,
    BenchError, CampaignResult, CampaignSpec, RegressionStatus,
};
use crate::gravity::{
    build_tree, direct_sum, grouped_walk_force, load_bodies, save_bodies,
    write_force_comparison_csv, Body, Domain, GravityError, WalkParams, DEFAULT_LEAF_CAPACITY,
};
use crate::mhd::{run_mhd, save_fields, write_series_csv, MhdConfig, MhdError};
use crate::pic::{run_pic, save_checkpoint, ParticleSet, PicConfig, PicError};
use crate::runtime::{run_ranks, DEFAULT_WATCHDOG};
use crate::trace::{
    compute_pop_metrics, compute_pop_metrics_with_replay, ideal_network_replay, load_trace,
    save_trace, TraceError,
};

pub const EXIT_SUCCESS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config {}: {}", path.display(), problems.join("; "))]
    Config { path: PathBuf, problems: Vec<String> },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Mhd(#[from] MhdError),
    #[error(transparent)]
    Pic(#[from] PicError),
    #[error(transparent)]
    Gravity(#[from] GravityError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

enum Outcome {
    Success,
    CheckFailed,
}

#[derive(Parser)]
#[command(
    name = "examini",
    version,
    about = "Mini-app runs, trace analysis and scaling campaigns"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the MHD mini-app from a JSON config
    Mhd(RunArgs),
    /// Run the PIC mini-app from a JSON config
    Pic(RunArgs),
    /// Run the gravity mini-app from a JSON config
    Gravity(RunArgs),
    /// Trace tooling
    Trace {
        #[command(subcommand)]
        cmd: TraceCmd,
    },
    /// Run a scaling campaign, optionally against a baseline store
    Campaign(CampaignArgs),
    /// Re-emit saved campaign results or compare kernel timing logs
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON config path
    #[arg(long)]
    config: PathBuf,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the config's rank count
    #[arg(long)]
    ranks: Option<usize>,
    /// Override the config's seed
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum TraceCmd {
    /// Compute POP-style efficiency metrics for a recorded trace
    Analyze(TraceAnalyzeArgs),
}

#[derive(Args)]
struct TraceAnalyzeArgs {
    /// Recorded trace (JSONL)
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Replay on an ideal network to split CommE into SerE and TE
    #[arg(long)]
    ideal_replay: bool,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct CampaignArgs {
    /// Campaign spec JSON
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the spec's seed
    #[arg(long)]
    seed: Option<u64>,
    /// Baseline store; presence turns the regression check on
    #[arg(long)]
    baseline_dir: Option<PathBuf>,
    /// Rewrite baselines from this run's medians
    #[arg(long)]
    update_baselines: bool,
    /// Regression tolerance in percent
    #[arg(long, default_value_t = 10.0)]
    tolerance_pct: f64,
}

#[derive(Args)]
struct ReportArgs {
    /// Saved campaign result JSON to re-emit
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Reference per-cycle kernel CSV for a speedup table
    #[arg(long)]
    kernels_ref: Option<PathBuf>,
    /// Candidate per-cycle kernel CSV
    #[arg(long)]
    kernels_new: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// File format of the kernel comparison table
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Parses and routes, mapping every failure class to its exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version land here too; only real parse
            // errors count as usage failures
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_SUCCESS };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.cmd) {
        Ok(Outcome::Success) => EXIT_SUCCESS,
        Ok(Outcome::CheckFailed) => EXIT_CHECK_FAILED,
        Err(e @ (CliError::Config { .. } | CliError::Usage(_))) => {
            eprintln!("{e}");
            EXIT_USAGE
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

fn run(cmd: Cmd) -> Result<Outcome, CliError> {
    match cmd {
        Cmd::Mhd(args) => run_mhd_cmd(&args),
        Cmd::Pic(args) => run_pic_cmd(&args),
        Cmd::Gravity(args) => run_gravity_cmd(&args),
        Cmd::Trace { cmd: TraceCmd::Analyze(args) } => trace_analyze_cmd(&args),
        Cmd::Campaign(args) => campaign_cmd(&args),
        Cmd::Report(args) => report_cmd(&args),
    }
}

// ---------------------------------------------------------------- configs

fn default_ranks() -> usize {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MhdRunConfig {
    #[serde(flatten)]
    pub mhd: MhdConfig,
    #[serde(default = "default_ranks")]
    pub ranks: usize,
    /// The solver itself is deterministic; the field exists so every
    /// schema carries the same seed knob.
    #[serde(default)]
    pub seed: u64,
}

fn default_cycles() -> usize {
    10
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PicRunConfig {
    #[serde(flatten)]
    pub pic: PicConfig,
    #[serde(default = "default_ranks")]
    pub ranks: usize,
    #[serde(default = "default_cycles")]
    pub cycles: usize,
}

fn default_n_bodies() -> usize {
    2000
}
fn default_theta() -> f64 {
    0.5
}
fn default_softening() -> f64 {
    1e-4
}
fn default_group_size() -> usize {
    32
}
fn default_leaf_capacity() -> usize {
    DEFAULT_LEAF_CAPACITY
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GravityRunConfig {
    /// Snapshot base path to load bodies from; a random cloud is drawn
    /// from the seed when absent.
    #[serde(default)]
    pub bodies: Option<PathBuf>,
    #[serde(default = "default_n_bodies")]
    pub n_bodies: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_softening")]
    pub softening: f64,
    #[serde(default = "default_group_size")]
    pub group_size: usize,
    #[serde(default)]
    pub direct_radius: f64,
    #[serde(default = "default_leaf_capacity")]
    pub leaf_capacity: usize,
    #[serde(default = "default_ranks")]
    pub ranks: usize,
    /// Also run the O(n²) oracle and emit the per-body comparison.
    #[serde(default)]
    pub compare_direct: bool,
}

impl GravityRunConfig {
    fn walk_params(&self) -> WalkParams {
        WalkParams {
            theta: self.theta,
            softening: self.softening,
            group_size: self.group_size,
            direct_radius: self.direct_radius,
        }
    }
}

/// Loads a JSON config, injecting serde defaults. Parse failures carry
/// the offending path so they surface as usage errors.
pub fn load_config<C: DeserializeOwned>(path: &Path) -> Result<C, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config {
        path: path.to_path_buf(),
        problems: vec![format!("cannot read: {e}")],
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::Config {
        path: path.to_path_buf(),
        problems: vec![e.to_string()],
    })
}

/// [`load_config`] plus a semantic check returning the full violation
/// list (field-path messages), not just the first problem.
pub fn validate_config<C: DeserializeOwned>(
    path: &Path,
    check: impl FnOnce(&C) -> Vec<String>,
) -> Result<C, CliError> {
    let cfg = load_config::<C>(path)?;
    fail_on_problems(path, check(&cfg))?;
    Ok(cfg)
}

fn fail_on_problems(path: &Path, problems: Vec<String>) -> Result<(), CliError> {
    if problems.is_empty() {
        Ok(())
    } else {
        Err(CliError::Config { path: path.to_path_buf(), problems })
    }
}

fn write_effective_config<C: Serialize>(out_dir: &Path, cfg: &C) -> Result<(), CliError> {
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("effective-config.json"), serde_json::to_string_pretty(cfg)?)?;
    Ok(())
}

fn mhd_problems(cfg: &MhdRunConfig) -> Vec<String> {
    if cfg.ranks == 0 {
        return vec!["ranks must be at least 1".to_string()];
    }
    match cfg.mhd.validate(cfg.ranks) {
        Ok(()) => Vec::new(),
        Err(MhdError::InvalidConfig(problems)) => problems,
        Err(other) => vec![other.to_string()],
    }
}

fn pic_problems(cfg: &PicRunConfig) -> Vec<String> {
    if cfg.ranks == 0 {
        return vec!["ranks must be at least 1".to_string()];
    }
    match cfg.pic.validate(cfg.ranks) {
        Ok(()) => Vec::new(),
        Err(PicError::InvalidConfig(problems)) => problems,
        Err(other) => vec![other.to_string()],
    }
}

fn gravity_problems(cfg: &GravityRunConfig) -> Vec<String> {
    let mut problems = cfg.walk_params().validate().err().unwrap_or_default();
    if cfg.ranks == 0 {
        problems.push("ranks must be at least 1".to_string());
    }
    if cfg.bodies.is_none() && cfg.n_bodies == 0 {
        problems.push("n_bodies must be positive when no snapshot is given".to_string());
    }
    if cfg.leaf_capacity == 0 {
        problems.push("leaf_capacity must be at least 1".to_string());
    }
    problems
}

// --------------------------------------------------------------- handlers

fn run_mhd_cmd(args: &RunArgs) -> Result<Outcome, CliError> {
    let mut cfg: MhdRunConfig = load_config(&args.config)?;
    if let Some(r) = args.ranks {
        cfg.ranks = r;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    fail_on_problems(&args.config, mhd_problems(&cfg))?;
    write_effective_config(&args.out, &cfg)?;

    let out = run_mhd(&cfg.mhd, cfg.ranks)?;
    save_fields(&cfg.mhd, &out.results, &args.out.join("fields"))?;
    write_series_csv(&args.out.join("series.csv"), &out.results[0].series)?;
    save_trace(&args.out.join("trace.jsonl"), &out.timeline)?;

    let r = &out.results[0];
    let last = r.series.last().expect("series always has the initial sample");
    println!(
        "mhd: {}x{}x{} cells, {} ranks, {} steps to t={:.6}, max|divB|n={:.3e}",
        cfg.mhd.cells[0],
        cfg.mhd.cells[1],
        cfg.mhd.cells[2],
        cfg.ranks,
        r.steps,
        r.t_final,
        last.divb_max_normalized
    );
    println!("wrote fields.bin fields.json series.csv trace.jsonl under {}", args.out.display());
    Ok(Outcome::Success)
}

fn run_pic_cmd(args: &RunArgs) -> Result<Outcome, CliError> {
    let mut cfg: PicRunConfig = load_config(&args.config)?;
    if let Some(r) = args.ranks {
        cfg.ranks = r;
    }
    if let Some(s) = args.seed {
        cfg.pic.seed = s;
    }
    fail_on_problems(&args.config, pic_problems(&cfg))?;
    write_effective_config(&args.out, &cfg)?;

    let out = run_pic(&cfg.pic, cfg.ranks, cfg.cycles)?;

    let rows: Vec<crate::bench::KernelSample> = out
        .results
        .iter()
        .flat_map(|r| r.kernel_rows.iter().map(crate::bench::KernelSample::from))
        .collect();
    crate::bench::write_kernel_csv(&args.out.join("kernels.csv"), &rows)?;

    let mut energy = fs::File::create(args.out.join("energy.csv"))?;
    use std::io::Write;
    writeln!(energy, "cycle,field,kinetic,total")?;
    for s in &out.results[0].energy {
        writeln!(energy, "{},{:?},{:?},{:?}", s.cycle, s.field, s.kinetic, s.total())?;
    }

    // global checkpoint: fields are replicated, particles concatenated
    // across rank stripes per species
    let mut merged: Vec<ParticleSet> = out.results[0].particles.clone();
    for r in &out.results[1..] {
        for (m, s) in merged.iter_mut().zip(&r.particles) {
            m.x.extend_from_slice(&s.x);
            m.y.extend_from_slice(&s.y);
            m.vx.extend_from_slice(&s.vx);
            m.vy.extend_from_slice(&s.vy);
            m.vz.extend_from_slice(&s.vz);
            m.qm.extend_from_slice(&s.qm);
            m.weight.extend_from_slice(&s.weight);
        }
    }
    save_checkpoint(&args.out.join("checkpoint"), &out.results[0].fields, &merged)?;
    save_trace(&args.out.join("trace.jsonl"), &out.timeline)?;

    let total: usize = merged.iter().map(ParticleSet::len).sum();
    println!(
        "pic: {}x{} cells, {} ranks, {} cycles, {} particles, {} kernel rows",
        cfg.pic.cells[0],
        cfg.pic.cells[1],
        cfg.ranks,
        cfg.cycles,
        total,
        rows.len()
    );
    println!(
        "wrote kernels.csv energy.csv checkpoint.bin checkpoint.json trace.jsonl under {}",
        args.out.display()
    );
    Ok(Outcome::Success)
}

fn run_gravity_cmd(args: &RunArgs) -> Result<Outcome, CliError> {
    let mut cfg: GravityRunConfig = load_config(&args.config)?;
    if let Some(r) = args.ranks {
        cfg.ranks = r;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    fail_on_problems(&args.config, gravity_problems(&cfg))?;
    write_effective_config(&args.out, &cfg)?;

    let mut bodies: Vec<Body> = match &cfg.bodies {
        Some(base) => load_bodies(base)?,
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            (0..cfg.n_bodies)
                .map(|_| {
                    Body::at(
                        [
                            rng.gen_range(-1.0..1.0),
                            rng.gen_range(-1.0..1.0),
                            rng.gen_range(-1.0..1.0),
                        ],
                        rng.gen_range(0.5..2.0),
                    )
                })
                .collect()
        }
    };
    let domain = Domain::enclosing(&bodies);
    let tree = build_tree(&mut bodies, &domain, cfg.leaf_capacity)?;

    let params = cfg.walk_params();
    let (n, ranks) = (bodies.len(), cfg.ranks);
    let run = run_ranks(ranks, DEFAULT_WATCHDOG, |ctx| {
        // each rank owns a contiguous slice of the Hilbert-sorted targets
        let rank = ctx.comm.rank();
        let (lo, hi) = (rank * n / ranks, (rank + 1) * n / ranks);
        let mut mine = bodies.clone();
        for (i, b) in mine.iter_mut().enumerate() {
            b.active = i >= lo && i < hi;
        }
        let forces =
            ctx.rec.useful("tree_walk", (hi - lo) as u64, || grouped_walk_force(&tree, &mine, &params));
        forces.accel[lo..hi].to_vec()
    });
    let (slices, timeline) = run.into_timeline(None)?;
    let accel: Vec<[f64; 3]> = slices.concat();

    save_bodies(&args.out.join("bodies"), &bodies)?;
    save_trace(&args.out.join("trace.jsonl"), &timeline)?;
    let mut csv = fs::File::create(args.out.join("accel.csv"))?;
    use std::io::Write;
    writeln!(csv, "body,ax,ay,az")?;
    for (i, a) in accel.iter().enumerate() {
        writeln!(csv, "{},{:?},{:?},{:?}", i, a[0], a[1], a[2])?;
    }

    let mut outputs = String::from("bodies.bin bodies.json accel.csv trace.jsonl");
    if cfg.compare_direct {
        let direct = direct_sum(&bodies, params.softening);
        write_force_comparison_csv(&args.out.join("force_comparison.csv"), &accel, &direct)?;
        outputs.push_str(" force_comparison.csv");
    }
    println!(
        "gravity: {} bodies, {} ranks, theta={}, group_size={}",
        n, ranks, params.theta, params.group_size
    );
    println!("wrote {outputs} under {}", args.out.display());
    Ok(Outcome::Success)
}

fn trace_analyze_cmd(args: &TraceAnalyzeArgs) -> Result<Outcome, CliError> {
    let tl = load_trace(&args.input)?;
    let report = if args.ideal_replay {
        let replay = ideal_network_replay(&tl)?;
        compute_pop_metrics_with_replay(&tl, &replay, None)?
    } else {
        compute_pop_metrics(&tl, None)?
    };
    fs::create_dir_all(&args.out)?;
    let file = match args.format {
        Format::Json => {
            fs::write(args.out.join("efficiency.json"), serde_json::to_string_pretty(&report)?)?;
            "efficiency.json"
        }
        Format::Csv => {
            report.write_csv(fs::File::create(args.out.join("efficiency.csv"))?)?;
            "efficiency.csv"
        }
    };
    print!(
        "trace: {} ranks, LB {:.3}, CommE {:.3}, PE {:.3}",
        report.ranks,
        report.load_balance,
        report.communication_efficiency,
        report.parallel_efficiency
    );
    match (report.serialization_efficiency, report.transfer_efficiency) {
        (Some(ser), Some(te)) => println!(", SerE {ser:.3}, TE {te:.3}"),
        _ => println!(),
    }
    println!("wrote {file} under {}", args.out.display());
    Ok(Outcome::Success)
}

fn campaign_cmd(args: &CampaignArgs) -> Result<Outcome, CliError> {
    let mut spec: CampaignSpec = load_config(&args.config)?;
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    let problems = match spec.validate() {
        Ok(()) => Vec::new(),
        Err(BenchError::InvalidSpec(problems)) => problems,
        Err(other) => vec![other.to_string()],
    };
    fail_on_problems(&args.config, problems)?;
    write_effective_config(&args.out, &spec)?;

    let result = run_campaign(&spec, Some(&args.out.join("traces")))?;
    emit_report(&result, &args.out, "campaign")?;
    for p in &result.points {
        println!(
            "g{} r{:>4} n{:>10} wall {:.4e}s speedup {:>7.2} eff {:.3} (ideal {:.0})",
            p.group, p.rank_count, p.resolution, p.walltime_s, p.speedup, p.efficiency,
            p.ideal_speedup
        );
    }
    println!("wrote campaign.csv campaign.json under {}", args.out.display());

    let Some(baseline_dir) = &args.baseline_dir else {
        return Ok(Outcome::Success);
    };
    let report = regression_check(&result, baseline_dir, args.tolerance_pct, args.update_baselines)?;
    fs::write(args.out.join("regression.json"), serde_json::to_string_pretty(&report)?)?;
    for e in &report.entries {
        let key = format!("{} {} g{} r{} n{}", e.app, e.mode, e.group, e.rank_count, e.resolution);
        match &e.status {
            RegressionStatus::Pass { delta_pct, .. } => {
                println!("pass    {key}  delta {delta_pct:+.1}%");
            }
            RegressionStatus::Fail { baseline_s, delta_pct } => println!(
                "FAIL    {key}  delta {delta_pct:+.1}% vs baseline {baseline_s:.4e}s (tolerance {}%)",
                args.tolerance_pct
            ),
            RegressionStatus::Missing { candidate_s } => {
                println!("missing {key}  candidate {candidate_s:.4e}s recorded");
            }
            RegressionStatus::Updated { walltime_s } => {
                println!("update  {key}  baseline set to {walltime_s:.4e}s");
            }
        }
    }
    if report.passed {
        Ok(Outcome::Success)
    } else {
        Ok(Outcome::CheckFailed)
    }
}

fn report_cmd(args: &ReportArgs) -> Result<Outcome, CliError> {
    match (&args.input, &args.kernels_ref, &args.kernels_new) {
        (Some(path), None, None) => {
            let result: CampaignResult = load_config(path)?;
            fs::create_dir_all(&args.out)?;
            emit_report(&result, &args.out, "report")?;
            println!(
                "report: {} points re-emitted to report.csv report.json under {}",
                result.points.len(),
                args.out.display()
            );
            Ok(Outcome::Success)
        }
        (None, Some(reference), Some(new)) => {
            let table = kernel_speedup_table(&read_kernel_csv(reference)?, &read_kernel_csv(new)?)?;
            fs::create_dir_all(&args.out)?;
            let file = match args.format {
                Format::Csv => {
                    let mut f = fs::File::create(args.out.join("kernel_comparison.csv"))?;
                    use std::io::Write;
                    writeln!(f, "kernel,t_ref,t_new,speedup")?;
                    for row in &table {
                        writeln!(f, "{},{:?},{:?},{:?}", row.kernel, row.t_ref, row.t_new, row.speedup)?;
                    }
                    "kernel_comparison.csv"
                }
                Format::Json => {
                    fs::write(
                        args.out.join("kernel_comparison.json"),
                        serde_json::to_string_pretty(&table)?,
                    )?;
                    "kernel_comparison.json"
                }
            };
            for row in &table {
                println!("{:<20} {:>12.4e}s {:>12.4e}s  x{:.2}", row.kernel, row.t_ref, row.t_new, row.speedup);
            }
            println!("wrote {file} under {}", args.out.display());
            Ok(Outcome::Success)
        }
        _ => Err(CliError::Usage(
            "report needs either --in RESULT_JSON or both --kernels-ref and --kernels-new".into(),
        )),
    }
}
