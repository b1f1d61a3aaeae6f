//! `discover`: run the pipeline, the benchmark suite, or re-render a report.
//!
//! Exit codes: 0 success, 2 usage, 3 config error, 4 data error,
//! 5 pipeline or output error.

use clap::{Parser, Subcommand};
use discover::bench::{self, BenchError, BenchmarkConfig, RowStatus};
use discover::config::{ConfigError, RunConfig};
use discover::pipeline::{self, PipelineError};
use discover::report::{self, RunReport};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_CONFIG: u8 = 3;
const EXIT_DATA: u8 = 4;
const EXIT_PIPELINE: u8 = 5;

#[derive(Parser)]
#[command(name = "discover", version, about = "Automated tabular discovery")]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Print only the output location.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline from a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Parent directory of run directories (default: config output_dir,
        /// else `runs`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run benchmark configs and compare with reference values.
    Bench {
        /// A benchmark TOML file or a directory of them.
        #[arg(long, default_value = "bench")]
        config: PathBuf,
        /// Dataset ids or groups to keep, comma separated.
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "bench-results")]
        out: PathBuf,
    },
    /// Re-render Markdown from a report.json or run directory.
    Report {
        path: PathBuf,
        /// Write here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl ToString) -> Self {
        Failure {
            code,
            message: message.to_string(),
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let code = match e {
            PipelineError::Config(_) => EXIT_CONFIG,
            PipelineError::Data(_) => EXIT_DATA,
            PipelineError::Failed(_) => EXIT_PIPELINE,
        };
        Failure::new(code, e)
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::new(EXIT_CONFIG, e)
    }
}

impl From<BenchError> for Failure {
    fn from(e: BenchError) -> Self {
        let code = match e {
            BenchError::Io { .. } | BenchError::Config(_) | BenchError::Invalid(_) => EXIT_CONFIG,
            BenchError::EmptyGroup(_) => EXIT_PIPELINE,
        };
        Failure::new(code, e)
    }
}

fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn write_output(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Failure::new(EXIT_PIPELINE, e))?;
    }
    std::fs::write(path, text).map_err(|e| Failure::new(EXIT_PIPELINE, format!("{}: {e}", path.display())))
}

fn cmd_run(config: &Path, seed: Option<u64>, out: Option<PathBuf>, quiet: bool) -> Result<(), Failure> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let base = config.parent().unwrap_or(Path::new("."));
    let artifacts = pipeline::run(&cfg, base, &timestamp())?;
    let parent = out.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("runs"));
    let dir = report::write_run_dir(&parent, &artifacts.report, &artifacts.model, &artifacts.plan)
        .map_err(|e| Failure::new(EXIT_PIPELINE, format!("writing run directory: {e}")))?;
    let r = &artifacts.report;
    if !quiet {
        eprintln!(
            "{} discoveries, {} hypotheses; best model {} ({} = {})",
            r.discoveries.len(),
            r.hypotheses.len(),
            r.best_model.family(),
            r.leaderboard.primary_metric,
            r.leaderboard.best().score.map_or("n/a".into(), |s| format!("{s:.4}")),
        );
        for w in &r.warnings {
            eprintln!("warning: {w}");
        }
    }
    println!("{}", dir.display());
    Ok(())
}

fn cmd_bench(config: &Path, only: &[String], seed: Option<u64>, out: &Path, quiet: bool) -> Result<(), Failure> {
    let suite = if config.is_dir() {
        bench::load_suite(config)?
    } else {
        vec![BenchmarkConfig::load(config)?]
    };
    let suite = bench::filter_suite(suite, only);
    if suite.is_empty() {
        return Err(Failure::new(EXIT_CONFIG, "no benchmark matches --only"));
    }
    let runs = bench::run_suite(&suite, seed, &timestamp());
    let rows: Vec<_> = runs.iter().map(|r| r.row.clone()).collect();
    let aggregates = bench::aggregate(&rows);
    let notes: Vec<String> = suite.iter().flat_map(|c| c.notes.iter().map(move |n| format!("{}: {n}", c.id))).collect();
    let markdown = bench::comparison_markdown(&rows, &aggregates, &notes);
    write_output(&out.join("comparison.csv"), &bench::comparison_csv(&rows))?;
    write_output(&out.join("comparison.md"), &markdown)?;
    for run in &runs {
        if let Some(report) = &run.report {
            let name = format!("{}-{}.report.json", run.row.dataset, run.row.target);
            write_output(&out.join("reports").join(name), &report.to_json())?;
        }
    }
    if quiet {
        println!("{}", out.display());
    } else {
        print!("{markdown}");
    }
    if rows.iter().any(|r| r.status == RowStatus::Failed) {
        return Err(Failure::new(EXIT_PIPELINE, "some benchmark rows failed; see the comparison table"));
    }
    Ok(())
}

fn cmd_report(path: &Path, out: Option<PathBuf>) -> Result<(), Failure> {
    let file = if path.is_dir() {
        path.join(report::REPORT_JSON)
    } else {
        path.to_path_buf()
    };
    let text = std::fs::read_to_string(&file).map_err(|e| Failure::new(EXIT_DATA, format!("{}: {e}", file.display())))?;
    let parsed = RunReport::from_json(&text).map_err(|e| Failure::new(EXIT_DATA, format!("{}: {e}", file.display())))?;
    if parsed.config.hash() != parsed.metadata.config_hash {
        return Err(Failure::new(EXIT_DATA, "config hash does not match the embedded config"));
    }
    let markdown = report::render_markdown(&parsed);
    match out {
        Some(p) => write_output(&p, &markdown),
        None => {
            print!("{markdown}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_PIPELINE);
        }
    }
    let result = match cli.command {
        Command::Run { config, seed, out } => cmd_run(&config, seed, out, cli.quiet),
        Command::Bench { config, only, seed, out } => cmd_bench(&config, &only, seed, &out, cli.quiet),
        Command::Report { path, out } => cmd_report(&path, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
