//! Command-line front end: single-model builds, the random-initialization experiment
//! harness, and the sampling cross-check.
//!
//! Exit codes: 0 success, 1 file or parse error, 2 degenerate network, 3 unsupported
//! architecture, 4 sampled region missing from the built complex.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::builder::{build_complex, write_vertices_jsonl, Tolerances, Vertex};
use crate::error::{Error, Result};
use crate::model::ReluNetwork;
use crate::oracle::{sample_region_witnesses, SampleGrid, EXCLUSION_TOL};
use crate::signs::SignSequence;
use crate::topology::{assemble_vertices, betti_gf2, decision_boundary_svg, BettiReport, CubicalComplex, Window};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_DEGENERATE: i32 = 2;
pub const EXIT_UNSUPPORTED: i32 = 3;
pub const EXIT_ORACLE: i32 = 4;

/// Environment variable consulted when `--threads` is absent.
pub const THREADS_ENV: &str = "RELUCX_THREADS";

/// Redraws allowed per trial before the experiment gives up.
const MAX_REDRAWS: u32 = 1000;

#[derive(Debug, Parser)]
#[command(name = "relucx", version, about = "Polyhedral complexes and decision-boundary topology of ReLU networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the complex of one model and write vertices, cells and Betti numbers.
    Build(BuildArgs),
    /// Betti statistics over randomly initialized networks.
    Experiment(ExperimentArgs),
    /// Compare built regions against grid sampling.
    OracleCheck(OracleArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ToleranceArgs {
    /// Magnitude below which an unsolved node map value is treated as degenerate.
    #[arg(long = "deg-tol", default_value_t = 1e-8)]
    pub deg_tol: f64,
    /// Largest accepted condition number of a vertex system.
    #[arg(long = "cond-max", default_value_t = 1e12)]
    pub cond_max: f64,
    /// Worker threads (falls back to RELUCX_THREADS, then all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

impl ToleranceArgs {
    pub fn tolerances(&self) -> Tolerances {
        Tolerances { degeneracy_tol: self.deg_tol, cond_max: self.cond_max, ..Tolerances::default() }
    }
}

#[derive(Debug, Clone, Args)]
pub struct BuildArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Also draw the decision boundary as db.svg (two inputs only).
    #[arg(long)]
    pub svg: bool,
    /// Drawing window `lo,hi`, applied to both axes.
    #[arg(long = "box", default_value = "-10,10", value_parser = parse_box, allow_hyphen_values = true)]
    pub bounds: (f64, f64),
    #[command(flatten)]
    pub tol: ToleranceArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    /// Comma-separated architecture, e.g. `2,5,1`.
    #[arg(long, value_delimiter = ',', required = true)]
    pub arch: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub tol: ToleranceArgs,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Sampling box `lo,hi`, applied to every axis.
    #[arg(long = "box", default_value = "-20,20", value_parser = parse_box, allow_hyphen_values = true)]
    pub bounds: (f64, f64),
    #[arg(long, default_value_t = 600)]
    pub resolution: usize,
    /// Compare against cells read from this complex.jsonl instead of a fresh build.
    #[arg(long)]
    pub complex: Option<PathBuf>,
    /// Write the JSON report here as well as to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub tol: ToleranceArgs,
}

fn parse_box(s: &str) -> std::result::Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected lo,hi")?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("{e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("{e}"))?;
    if lo.is_nan() || hi.is_nan() || lo >= hi {
        return Err("box needs lo < hi".into());
    }
    Ok((lo, hi))
}

/// Thread count from the flag, then the environment.
pub fn thread_count(flag: Option<usize>) -> Option<usize> {
    flag.or_else(|| std::env::var(THREADS_ENV).ok()?.trim().parse().ok()).filter(|&n| n > 0)
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count(threads) {
        builder = builder.num_threads(n);
    }
    builder.build().expect("thread pool").install(f)
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::DegenerateNetwork(_) | Error::DuplicateMismatch { .. } => EXIT_DEGENERATE,
        Error::ArchitectureUnsupported { .. } => EXIT_UNSUPPORTED,
        _ => EXIT_IO,
    }
}

#[derive(Serialize)]
struct Diagnostic<'a> {
    error: &'static str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    detail: Option<&'a crate::error::Degeneracy>,
}

fn diagnostic(err: &Error) -> String {
    let (kind, detail) = match err {
        Error::DegenerateNetwork(d) => ("degenerate_network", Some(d)),
        Error::DuplicateMismatch { .. } => ("duplicate_mismatch", None),
        Error::ArchitectureUnsupported { .. } => ("architecture_unsupported", None),
        _ => ("error", None),
    };
    serde_json::to_string(&Diagnostic { error: kind, message: err.to_string(), detail }).expect("diagnostic serializes")
}

fn create_file(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path).map_err(|e| Error::io(path, e))?))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Everything computed for one network.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub vertices: Vec<Vertex>,
    pub complex: CubicalComplex,
    pub betti: BettiReport,
}

/// Build → assemble → decision boundary → compactify → Betti numbers.
pub fn analyze(net: &ReluNetwork, tol: &Tolerances) -> Result<Analysis> {
    let state = build_complex(net, tol)?;
    let vertices = state.vertex_list();
    let complex = assemble_vertices(&vertices, net.input_dim())?;
    complex.boundary_matrices().check()?;
    let betti = betti_gf2(&complex.decision_boundary().compactify())?;
    Ok(Analysis { vertices, complex, betti })
}

fn build_outputs(args: &BuildArgs) -> Result<BettiReport> {
    let net = ReluNetwork::load(&args.model)?;
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let analysis = with_threads(args.tol.threads, || analyze(&net, &args.tol.tolerances()))?;

    let path = args.out.join("vertices.jsonl");
    let mut w = create_file(&path)?;
    write_vertices_jsonl(&mut w, &analysis.vertices)?;
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = args.out.join("complex.jsonl");
    let mut w = create_file(&path)?;
    analysis.complex.write_jsonl(&mut w)?;
    w.flush().map_err(|e| Error::io(&path, e))?;

    write_text(&args.out.join("betti.json"), &(serde_json::to_string(&analysis.betti)? + "\n"))?;

    if args.svg {
        let (lo, hi) = args.bounds;
        let window = Window { min: [lo, lo], max: [hi, hi] };
        let db = analysis.complex.decision_boundary();
        match decision_boundary_svg(&net, &db, &analysis.vertices, &window)? {
            Some(svg) => write_text(&args.out.join("db.svg"), &svg)?,
            None => eprintln!("--svg ignored: input dimension is {}", net.input_dim()),
        }
    }
    Ok(analysis.betti)
}

/// `relucx build`.
pub fn cmd_build(args: &BuildArgs) -> i32 {
    match build_outputs(args) {
        Ok(_) => EXIT_OK,
        Err(err) => {
            let code = exit_code(&err);
            let diag = diagnostic(&err);
            if code == EXIT_DEGENERATE && args.out.is_dir() {
                let _ = write_text(&args.out.join("diagnostic.json"), &(diag.clone() + "\n"));
            }
            if code == EXIT_IO {
                eprintln!("error: {err}");
            } else {
                println!("{diag}");
            }
            code
        }
    }
}

/// Settings for a batch of random networks.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub architecture: Vec<usize>,
    pub trials: usize,
    pub base_seed: u64,
    pub tolerances: Tolerances,
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(architecture: &[usize], trials: usize, base_seed: u64) -> Self {
        ExperimentConfig {
            architecture: architecture.to_vec(),
            trials,
            base_seed,
            tolerances: Tolerances::default(),
            out_dir: None,
            threads: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidArchitecture("trials must be at least 1".into()));
        }
        // Shape problems surface here rather than inside a worker.
        ReluNetwork::random_init(&self.architecture, 0)?;
        let (n0, n1) = (self.architecture[0], self.architecture[1]);
        if n1 < n0 {
            return Err(Error::ArchitectureUnsupported { n0, n1 });
        }
        Ok(())
    }
}

/// Seed of trial `trial` after `redraw` degenerate draws. The first draw uses
/// `base + trial`; redraws are mixed with SplitMix64 so they do not collide with
/// other trials' first draws.
pub fn trial_seed(base: u64, trial: usize, redraw: u32) -> u64 {
    let first = base.wrapping_add(trial as u64);
    if redraw == 0 {
        return first;
    }
    let mut z = first ^ (redraw as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Outcome of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub redraws: u32,
    pub vertex_count: usize,
    pub report: BettiReport,
}

fn run_trial(config: &ExperimentConfig, trial: usize) -> Result<TrialResult> {
    let mut redraws = 0;
    loop {
        let seed = trial_seed(config.base_seed, trial, redraws);
        let net = ReluNetwork::random_init(&config.architecture, seed)?;
        match analyze(&net, &config.tolerances) {
            Ok(a) => return Ok(TrialResult { trial, seed, redraws, vertex_count: a.vertices.len(), report: a.betti }),
            Err(Error::DegenerateNetwork(_)) if redraws < MAX_REDRAWS => redraws += 1,
            Err(e) => return Err(e),
        }
    }
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt() / n.sqrt())
}

/// Summary statistics of an experiment with the per-trial values behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsRow {
    pub architecture: String,
    pub base_seed: u64,
    pub beta_mean: Vec<f64>,
    pub beta_se: Vec<f64>,
    pub bounded_mean: f64,
    pub bounded_se: f64,
    pub unbounded_mean: f64,
    pub unbounded_se: f64,
    /// False when there was a single trial, in which case every SE is reported as 0.
    pub se_defined: bool,
    pub redraws: u32,
    pub trials: Vec<TrialResult>,
}

impl StatsRow {
    pub fn from_trials(architecture: &[usize], base_seed: u64, trials: Vec<TrialResult>) -> Self {
        let label = format!("({})", architecture.iter().map(ToString::to_string).collect::<Vec<_>>().join(","));
        let grades = architecture[0];
        let column =
            |f: &dyn Fn(&TrialResult) -> f64| -> (f64, f64) { mean_se(&trials.iter().map(f).collect::<Vec<_>>()) };
        let (beta_mean, beta_se) =
            (0..grades).map(|k| column(&|t| t.report.betti.get(k).copied().unwrap_or(0) as f64)).unzip();
        let (bounded_mean, bounded_se) = column(&|t| t.report.bounded as f64);
        let (unbounded_mean, unbounded_se) = column(&|t| t.report.unbounded as f64);
        StatsRow {
            architecture: label,
            base_seed,
            beta_mean,
            beta_se,
            bounded_mean,
            bounded_se,
            unbounded_mean,
            unbounded_se,
            se_defined: trials.len() > 1,
            redraws: trials.iter().map(|t| t.redraws).sum(),
            trials,
        }
    }

    /// `stats.csv`: one `summary` row followed by one `trial` row per network.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let grades = self.beta_mean.len();
        let mut header: Vec<String> =
            ["kind", "architecture", "trial", "seed", "trials", "redraws"].map(String::from).to_vec();
        for k in 0..grades {
            header.push(format!("beta_{k}"));
            header.push(format!("beta_{k}_se"));
        }
        header.extend(["bounded", "bounded_se", "unbounded", "unbounded_se", "se_defined"].map(String::from));
        w.write_record(&header)?;

        let f = |v: f64| format!("{v:.6}");
        let mut row = vec![
            "summary".to_string(),
            self.architecture.clone(),
            String::new(),
            self.base_seed.to_string(),
            self.trials.len().to_string(),
            self.redraws.to_string(),
        ];
        for k in 0..grades {
            row.push(f(self.beta_mean[k]));
            row.push(f(self.beta_se[k]));
        }
        row.extend([
            f(self.bounded_mean),
            f(self.bounded_se),
            f(self.unbounded_mean),
            f(self.unbounded_se),
            self.se_defined.to_string(),
        ]);
        w.write_record(&row)?;

        for t in &self.trials {
            let mut row = vec![
                "trial".to_string(),
                self.architecture.clone(),
                t.trial.to_string(),
                t.seed.to_string(),
                String::new(),
                t.redraws.to_string(),
            ];
            for k in 0..grades {
                row.push(t.report.betti.get(k).copied().unwrap_or(0).to_string());
                row.push(String::new());
            }
            row.extend([
                t.report.bounded.to_string(),
                String::new(),
                t.report.unbounded.to_string(),
                String::new(),
                String::new(),
            ]);
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("stats.csv", e))?;
        Ok(())
    }
}

/// Runs every trial (concurrently, up to the configured thread count) and aggregates
/// in trial order. Writes `stats.csv` when an output directory is configured.
pub fn run_experiment(config: &ExperimentConfig) -> Result<StatsRow> {
    config.validate()?;
    let results: Vec<Result<TrialResult>> =
        with_threads(config.threads, || (0..config.trials).into_par_iter().map(|t| run_trial(config, t)).collect());
    let trials = results.into_iter().collect::<Result<Vec<_>>>()?;
    let row = StatsRow::from_trials(&config.architecture, config.base_seed, trials);
    if let Some(dir) = &config.out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("stats.csv");
        row.write_csv(create_file(&path)?)?;
    }
    Ok(row)
}

/// `relucx experiment`.
pub fn cmd_experiment(args: &ExperimentArgs) -> i32 {
    let config = ExperimentConfig {
        architecture: args.arch.clone(),
        trials: args.trials,
        base_seed: args.seed,
        tolerances: args.tol.tolerances(),
        out_dir: Some(args.out.clone()),
        threads: args.tol.threads,
    };
    match run_experiment(&config) {
        Ok(row) => {
            if !row.se_defined {
                eprintln!("warning: a single trial has no standard error; reported as 0");
            }
            let betas: Vec<String> = row
                .beta_mean
                .iter()
                .zip(&row.beta_se)
                .enumerate()
                .map(|(k, (m, s))| format!("beta_{k} {m:.3} ± {s:.3}"))
                .collect();
            println!(
                "{} trials={} redraws={} {} bounded {:.3} ± {:.3} unbounded {:.3} ± {:.3}",
                row.architecture,
                row.trials.len(),
                row.redraws,
                betas.join(" "),
                row.bounded_mean,
                row.bounded_se,
                row.unbounded_mean,
                row.unbounded_se
            );
            EXIT_OK
        }
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}

/// Result of comparing sampled regions with built regions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub regions_builder: usize,
    pub regions_sampled: usize,
    /// Sampled regions absent from the built complex. Any entry is a correctness failure.
    pub missing: Vec<SignSequence>,
    /// Built regions that no grid point landed in (thin or outside the box).
    pub unsampled: Vec<SignSequence>,
    pub counts_ok: bool,
}

impl OracleReport {
    pub fn compare(built: &[SignSequence], sampled: &[SignSequence]) -> Self {
        let built_set: std::collections::BTreeSet<&SignSequence> = built.iter().collect();
        let sampled_set: std::collections::BTreeSet<&SignSequence> = sampled.iter().collect();
        let missing: Vec<SignSequence> = sampled_set.difference(&built_set).map(|s| (*s).clone()).collect();
        let unsampled: Vec<SignSequence> = built_set.difference(&sampled_set).map(|s| (*s).clone()).collect();
        let counts_ok = missing.is_empty() && built_set.len() == sampled_set.len() + unsampled.len();
        OracleReport {
            regions_builder: built_set.len(),
            regions_sampled: sampled_set.len(),
            missing,
            unsampled,
            counts_ok,
        }
    }

    pub fn passed(&self) -> bool {
        self.missing.is_empty() && self.counts_ok
    }
}

/// Region records (`dim == n0`) of a `complex.jsonl`, without closure validation so a
/// damaged file still reaches the comparison.
fn read_regions(path: &Path, n0: usize) -> Result<Vec<SignSequence>> {
    use std::io::BufRead;
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut regions = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: crate::topology::CellRecord = serde_json::from_str(&line)?;
        if rec.dim == n0 {
            regions.push(rec.signs);
        }
    }
    Ok(regions)
}

fn oracle_report(args: &OracleArgs) -> Result<OracleReport> {
    let net = ReluNetwork::load(&args.model)?;
    let n0 = net.input_dim();
    let built = match &args.complex {
        Some(path) => read_regions(path, n0)?,
        None => {
            let a = with_threads(args.tol.threads, || analyze(&net, &args.tol.tolerances()))?;
            a.complex.cells(n0).to_vec()
        }
    };
    if args.resolution < 2 {
        return Err(Error::InvalidArchitecture("resolution must be at least 2".into()));
    }
    let grid = SampleGrid::cube(n0, args.bounds.0, args.bounds.1, args.resolution);
    let sampled: Vec<SignSequence> =
        with_threads(args.tol.threads, || sample_region_witnesses(&net, &grid, EXCLUSION_TOL).into_keys().collect());
    Ok(OracleReport::compare(&built, &sampled))
}

/// `relucx oracle-check`.
pub fn cmd_oracle_check(args: &OracleArgs) -> i32 {
    match oracle_report(args) {
        Ok(report) => {
            let text = serde_json::to_string(&report).expect("report serializes");
            println!("{text}");
            if let Some(path) = &args.out {
                if let Err(e) = write_text(path, &(text + "\n")) {
                    eprintln!("error: {e}");
                    return EXIT_IO;
                }
            }
            if report.passed() {
                EXIT_OK
            } else {
                EXIT_ORACLE
            }
        }
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}

pub fn run(cli: &Cli) -> i32 {
    match &cli.command {
        Command::Build(a) => cmd_build(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::OracleCheck(a) => cmd_oracle_check(a),
    }
}
