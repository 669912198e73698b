use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use aijobs::cli_io::{run_pipeline, selftest, CliError, Model, PipelineOptions, RunManifest, Stage};

#[derive(Parser)]
#[command(name = "aijobs", version, about = "Simulate AI shocks to freelance markets and estimate their effects")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario JSON file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; later stages read earlier outputs from here.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Clone, Default)]
struct Tuning {
    /// Significance level for quadrant classification.
    #[arg(long)]
    alpha: Option<f64>,
    /// Propensity-score caliper (probability scale).
    #[arg(long)]
    caliper: Option<f64>,
    /// Absolute TOST equivalence bound; defaults to 0.36 outcome SDs.
    #[arg(long)]
    bounds: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimateModel {
    Did,
    Trend,
    Event,
    Dual,
    Heterogeneity,
    Demand,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportKind {
    Quadrant,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the worker-month panel and the market-week demand series.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Propensity-score matching and balance tables for each treated market.
    Match {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        tuning: Tuning,
    },
    /// Fit one model family on the simulated panel.
    Estimate {
        #[arg(value_enum)]
        model: EstimateModel,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        tuning: Tuning,
    },
    /// Equivalence tests on event-study pre-trends.
    Tost {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        tuning: Tuning,
    },
    /// Quadrant classification and comparative-statics tables.
    Report {
        #[arg(value_enum)]
        kind: ReportKind,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        tuning: Tuning,
    },
    /// Every stage, or the comma-separated list given by --stages.
    Run {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        tuning: Tuning,
        #[arg(long, value_delimiter = ',')]
        stages: Option<Vec<Stage>>,
    },
    /// Quick internal consistency checks.
    Selftest,
}

fn options(t: &Tuning, models: Option<Vec<Model>>) -> PipelineOptions {
    let mut o = PipelineOptions::default();
    if let Some(a) = t.alpha {
        o.alpha = a;
    }
    if let Some(c) = t.caliper {
        o.caliper = c;
    }
    o.bounds = t.bounds;
    if let Some(m) = models {
        o.models = m;
    }
    o
}

fn execute(common: &Common, stages: &[Stage], opts: &PipelineOptions) -> Result<RunManifest, CliError> {
    run_pipeline(&common.config, &common.out, common.seed, stages, opts)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { common } => execute(common, &[Stage::Simulate], &PipelineOptions::default()),
        Command::Match { common, tuning } => execute(common, &[Stage::Match], &options(tuning, None)),
        Command::Estimate { model, common, tuning } => {
            let models = match model {
                EstimateModel::Did => vec![Model::Did],
                EstimateModel::Trend => vec![Model::Trend],
                EstimateModel::Event => vec![Model::Event],
                EstimateModel::Dual => vec![Model::Dual],
                EstimateModel::Heterogeneity => vec![Model::Heterogeneity],
                EstimateModel::Demand => vec![Model::Demand],
                EstimateModel::All => Model::ALL.to_vec(),
            };
            execute(common, &[Stage::Estimate], &options(tuning, Some(models)))
        }
        Command::Tost { common, tuning } => execute(common, &[Stage::Tost], &options(tuning, None)),
        Command::Report { kind: ReportKind::Quadrant, common, tuning } => {
            execute(common, &[Stage::Report], &options(tuning, None))
        }
        Command::Run { common, tuning, stages } => {
            let stages = stages.clone().unwrap_or_else(|| Stage::ALL.to_vec());
            execute(common, &stages, &options(tuning, None))
        }
        Command::Selftest => {
            let checks = selftest();
            for c in &checks {
                println!("{} {:<28} {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            return if checks.iter().all(|c| c.pass) { ExitCode::SUCCESS } else { ExitCode::from(3) };
        }
    };
    match result {
        Ok(m) => {
            for o in &m.outputs {
                println!("{}  {}", &o.sha256[..12], o.path);
            }
            println!("manifest {}", m.manifest_hash);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
