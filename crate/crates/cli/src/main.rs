use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use dmeshare::montecarlo::PointBudget;
use dmeshare::{ValidationError, Violation};
use dmeshare_cli::config::{McBlock, DEFAULT_MC_SEED};
use dmeshare_cli::experiment::{export_sample, write_export};
use dmeshare_cli::{parse_spec, run_experiment, ExperimentSpec, OutputFormat};
use serde_json::json;

#[derive(Parser)]
#[command(name = "dmeshare", version, about = "Secondary-access interference experiments for the DME band")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, env = "DMESHARE_THREADS", default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a file and write its table.
    Run(RunArgs),
    /// Check a file and print the scenario with defaults filled in.
    Validate { spec: PathBuf },
    /// Write the raw Monte Carlo sample of the file's base scenario.
    McExport(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    spec: PathBuf,
    /// Output file; standard output when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

enum Failure {
    Invalid(ValidationError),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Other(e.into())
    }
}

fn load(path: &Path) -> Result<ExperimentSpec, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    parse_spec(&text).map_err(Failure::Invalid)
}

/// Applies command-line overrides on top of the file.
fn load_with(args: &RunArgs) -> Result<ExperimentSpec, Failure> {
    let mut spec = load(&args.spec)?;
    if args.trials == Some(0) {
        return Err(Failure::Invalid(ValidationError(vec![Violation::new(
            "--trials",
            "must be at least 1",
        )])));
    }
    if args.seed.is_some() || args.trials.is_some() {
        let mut mc = spec.mc.unwrap_or(McBlock {
            trials: 1,
            seed: DEFAULT_MC_SEED,
            budget: PointBudget::default(),
        });
        if let Some(seed) = args.seed {
            mc.seed = seed;
        }
        if let Some(trials) = args.trials {
            mc.trials = trials;
        }
        spec.mc = Some(mc);
    }
    if let Some(f) = args.format {
        spec.output.format = match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        };
    }
    if let Some(p) = &args.output {
        spec.output.path = Some(p.clone());
    }
    Ok(spec)
}

fn sink(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Validate { spec } => {
            let spec = load(&spec)?;
            let mut out = io::stdout().lock();
            serde_json::to_writer_pretty(&mut out, &spec.scenario).context("writing scenario")?;
            writeln!(out)?;
        }
        Command::Run(args) => {
            let spec = load_with(&args)?;
            log::info!("running {} over {} value(s)", spec.kind, spec.axis_values().len());
            let table = run_experiment(&spec);
            let mut w = sink(spec.output.path.as_deref())?;
            table.write(spec.output.format, &mut w)?;
            w.flush()?;
        }
        Command::McExport(args) => {
            let spec = load_with(&args)?;
            let sample = export_sample(&spec).map_err(|e| {
                Failure::Invalid(ValidationError(vec![Violation::new("[mc]", e)]))
            })?;
            let mut w = sink(spec.output.path.as_deref())?;
            write_export(&spec, &sample, &mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
    {
        log::warn!("thread pool: {e}");
    }
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(v)) => {
            let violations: Vec<_> = v
                .0
                .iter()
                .map(|x| json!({"field": x.field, "message": x.message, "line": x.line}))
                .collect();
            eprintln!(
                "{}",
                json!({"error": "invalid_spec", "message": v.to_string(), "violations": violations})
            );
            ExitCode::from(2)
        }
        Err(Failure::Other(e)) => {
            eprintln!("{}", json!({"error": "runtime", "message": format!("{e:#}")}));
            ExitCode::FAILURE
        }
    }
}
