//! `lmcl`: command-line driver for offline training, continual runs, path
//! scans, checkpoint merging, metric recomputation and dataset generation.
//!
//! Exit codes: 0 on success, 1 when the input or configuration is invalid,
//! 2 when a run fails after validation. Diagnostics go to stderr.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lmcl_core::config::{load_config, make_stream, make_task, parse_config, ExperimentConfig};
use lmcl_core::connectivity::{merge_running, scan, uniform_grid};
use lmcl_core::container::{load_checkpoint, save_checkpoint};
use lmcl_core::continual::{offline_fit, run_stream, write_clds, write_dataset_csv};
use lmcl_core::metrics::{
    average_accuracy, average_forgetting, emit_report, format_sig, AccuracyMatrix, RunReport, RunStatus,
};
use lmcl_core::nncore::{evaluate, Batch, Network};

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<lmcl_core::Error> for CliError {
    fn from(e: lmcl_core::Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Console display: 9 significant digits, no round-trip fallback.
fn show(v: f64) -> String {
    format_sig(v, 9)
}

/// Any failure while reading user-supplied inputs counts as invalid input.
fn input<T>(what: &str, r: lmcl_core::Result<T>) -> CliResult<T> {
    r.map_err(|e| CliError::Validation(format!("{what}: {e}")))
}

fn runtime<E: std::fmt::Display>(what: &str) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{what}: {e}"))
}

#[derive(Debug, Parser)]
#[command(
    name = "lmcl",
    version,
    about = "Continual-learning harness for drifting detection streams"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON experiment config; defaults are used for anything left out.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config's seed list with this single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file or directory, depending on the subcommand.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DataFormat {
    Clds,
    Csv,
    Both,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the offline model on task 1 and write an LMCW checkpoint.
    TrainOffline {
        #[command(flatten)]
        common: Common,
    },
    /// Run the configured strategy over the stream and emit reports.
    Continual {
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate the linear path between two checkpoints.
    Scan {
        #[command(flatten)]
        common: Common,
        /// Task (1-based) the second checkpoint was trained on; earlier tasks form the previous set.
        #[arg(long)]
        task: usize,
        /// Number of grid points; defaults to the config's scan.points.
        #[arg(long)]
        points: Option<usize>,
        previous: PathBuf,
        current: PathBuf,
    },
    /// Running-average merge of two checkpoints.
    Merge {
        #[command(flatten)]
        common: Common,
        /// Tasks trained on so far, the current one included.
        #[arg(long = "t")]
        tasks_seen: usize,
        previous: PathBuf,
        current: PathBuf,
    },
    /// Recompute AA and AF from a matrix.csv.
    Metrics {
        #[command(flatten)]
        common: Common,
        matrix: PathBuf,
    },
    /// Write the synthetic stream as dataset files.
    Datagen {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "clds")]
        format: DataFormat,
    },
}

fn config_for(common: &Common) -> CliResult<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => input(&format!("config {}", path.display()), load_config(path))?,
        None => parse_config("{}")?,
    };
    if let Some(seed) = common.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.display().to_string();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn first_seed(cfg: &ExperimentConfig) -> CliResult<u64> {
    cfg.seeds
        .first()
        .copied()
        .ok_or_else(|| CliError::Validation("seeds: at least one seed is required".into()))
}

fn create_parent(path: &Path) -> CliResult<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            fs::create_dir_all(dir).map_err(runtime("creating output directory"))
        }
        _ => Ok(()),
    }
}

fn train_offline(common: &Common) -> CliResult<()> {
    let cfg = config_for(common)?;
    let seed = first_seed(&cfg)?;
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from("offline.lmcw"));
    let task = make_task(&cfg, seed, 1)?;
    let mut log = Vec::new();
    let net = offline_fit(&cfg, seed, &task.train, 1, &mut log)?;
    let acc = evaluate(&net, &task.test)?;
    create_parent(&out)?;
    save_checkpoint(&out, &net)?;
    eprintln!(
        "offline model: task 1 test accuracy {}, written to {}",
        show(acc),
        out.display()
    );
    Ok(())
}

fn continual(common: &Common) -> CliResult<()> {
    let cfg = config_for(common)?;
    first_seed(&cfg)?;
    let root = PathBuf::from(&cfg.output_dir);
    let mut failed = Vec::new();
    for &seed in &cfg.seeds {
        let report = run_stream(&cfg, seed)?;
        let dir = root.join(format!("seed_{seed}"));
        emit_report(&report, &dir)?;
        print_summary(seed, &report);
        if let RunStatus::Failed { error } = &report.status {
            failed.push(format!("seed {seed}: {error}"));
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Runtime(failed.join("; ")))
    }
}

fn print_summary(seed: u64, report: &RunReport) {
    let (aa, af) = match report.final_summary() {
        Some(s) => (show(s.aa), s.af.map_or_else(|| "NA".to_string(), show)),
        None => ("NA".to_string(), "NA".to_string()),
    };
    println!("seed={seed} strategy={} AA={aa} AF={af}", report.strategy);
}

fn load_net(path: &Path) -> CliResult<Network> {
    input(&format!("checkpoint {}", path.display()), load_checkpoint(path))
}

fn scan_cmd(common: &Common, task: usize, points: Option<usize>, previous: &Path, current: &Path) -> CliResult<()> {
    let cfg = config_for(common)?;
    let seed = first_seed(&cfg)?;
    if task < 2 || task > cfg.stream.tasks {
        return Err(CliError::Validation(format!(
            "--task: must be between 2 and stream.tasks ({}), got {task}",
            cfg.stream.tasks
        )));
    }
    let grid = uniform_grid(points.unwrap_or(cfg.scan.points))?;
    let a = load_net(previous)?;
    let b = load_net(current)?;
    let (theta_a, theta_b) = (a.flatten(), b.flatten());
    input("checkpoints", theta_a.check_layout(&theta_b))?;
    if a.input_dim() != cfg.input_dim() {
        return Err(CliError::Validation(format!(
            "checkpoint input dimension {} does not match the stream's {}",
            a.input_dim(),
            cfg.input_dim()
        )));
    }
    let tasks = make_stream(&cfg, seed)?;
    let prev: Vec<&Batch> = tasks[..task - 1].iter().map(|t| &t.test).collect();
    let result = scan(&a, &theta_a, &theta_b, &grid, &prev, &tasks[task - 1].test, task)?;

    let out = common
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("scan_t{task}.csv")));
    create_parent(&out)?;
    let mut w = BufWriter::new(fs::File::create(&out).map_err(runtime("creating scan file"))?);
    result.write_csv(&mut w)?;
    w.flush().map_err(runtime("writing scan file"))?;
    match result.interior_at_least_endpoints() {
        Some(row) => println!("interior lambda={} acc_all={}", show(row.lambda), show(row.acc_all)),
        None => println!("no interior point reaches both endpoints"),
    }
    Ok(())
}

fn merge_cmd(common: &Common, tasks_seen: usize, previous: &Path, current: &Path) -> CliResult<()> {
    if tasks_seen < 2 {
        return Err(CliError::Validation(format!(
            "--t: must be at least 2, got {tasks_seen}"
        )));
    }
    let a = load_net(previous)?;
    let b = load_net(current)?;
    let merged = input("checkpoints", merge_running(&a.flatten(), &b.flatten(), tasks_seen))?;
    let net = input("checkpoints", a.with_weights(&merged))?;
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from("merged.lmcw"));
    create_parent(&out)?;
    save_checkpoint(&out, &net)?;
    Ok(())
}

fn metrics_cmd(common: &Common, path: &Path) -> CliResult<()> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let matrix = input(&format!("matrix {}", path.display()), AccuracyMatrix::read_csv(&text))?;
    let t = matrix.complete_rows();
    if t == 0 {
        return Err(CliError::Validation(format!("{}: no complete rows", path.display())));
    }
    let aa = average_accuracy(&matrix, t)?;
    let af = if t >= 2 {
        Some(average_forgetting(&matrix, t)?)
    } else {
        None
    };
    let af_text = af.map_or_else(|| "NA".to_string(), show);
    println!("AA={}", show(aa));
    println!("AF={af_text}");
    if let Some(out) = &common.out {
        let summary = RunReport::summarize(&matrix)?;
        create_parent(out)?;
        let json = serde_json::to_string_pretty(&summary).map_err(runtime("serializing summary"))?;
        fs::write(out, json + "\n").map_err(runtime("writing summary"))?;
    }
    Ok(())
}

fn datagen(common: &Common, format: DataFormat) -> CliResult<()> {
    let cfg = config_for(common)?;
    let seed = first_seed(&cfg)?;
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("data"));
    let tasks = make_stream(&cfg, seed)?;
    fs::create_dir_all(&dir).map_err(runtime("creating output directory"))?;
    let write = |name: String, data: &Batch| -> CliResult<()> {
        if matches!(format, DataFormat::Clds | DataFormat::Both) {
            let mut w = BufWriter::new(
                fs::File::create(dir.join(format!("{name}.clds"))).map_err(runtime("creating dataset"))?,
            );
            write_clds(&mut w, data)?;
            w.flush().map_err(runtime("writing dataset"))?;
        }
        if matches!(format, DataFormat::Csv | DataFormat::Both) {
            let mut w =
                BufWriter::new(fs::File::create(dir.join(format!("{name}.csv"))).map_err(runtime("creating dataset"))?);
            write_dataset_csv(&mut w, data)?;
            w.flush().map_err(runtime("writing dataset"))?;
        }
        Ok(())
    };
    for task in &tasks {
        write(format!("task{}_train", task.id), &task.train)?;
        write(format!("task{}_test", task.id), &task.test)?;
    }
    let meta: Vec<_> = tasks.iter().map(|t| &t.meta).collect();
    let json = serde_json::to_string_pretty(&serde_json::json!({ "seed": seed, "config": cfg, "tasks": meta }))
        .map_err(runtime("serializing stream metadata"))?;
    fs::write(dir.join("stream.json"), json + "\n").map_err(runtime("writing stream metadata"))?;
    Ok(())
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::TrainOffline { common } => train_offline(&common),
        Command::Continual { common } => continual(&common),
        Command::Scan {
            common,
            task,
            points,
            previous,
            current,
        } => scan_cmd(&common, task, points, &previous, &current),
        Command::Merge {
            common,
            tasks_seen,
            previous,
            current,
        } => merge_cmd(&common, tasks_seen, &previous, &current),
        Command::Metrics { common, matrix } => metrics_cmd(&common, &matrix),
        Command::Datagen { common, format } => datagen(&common, format),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
