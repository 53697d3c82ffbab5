use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use windcast_cli::{cmd_compare, cmd_evaluate, cmd_fit, cmd_forecast, cmd_simulate, CliError, Family, GeneratorSpec, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "windcast", version, about = "Short-horizon wind speed forecasting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one model family and write model.json and fit_report.json.
    Fit(RunArgs),
    /// Forecast from a model file into a predictions CSV.
    Forecast {
        #[arg(long)]
        model_file: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Rows to forecast; defaults to the rest of the data.
        #[arg(long)]
        steps: Option<usize>,
        /// First forecast index; defaults to the end of the training split.
        #[arg(long)]
        start: Option<usize>,
        /// Defaults to predictions.csv beside the model file.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Score a predictions CSV and write metrics.json.
    Evaluate {
        #[arg(long)]
        predictions: PathBuf,
        /// Defaults to metrics.json beside the predictions.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Fit every family at every horizon and rank them against persistence.
    Compare(RunArgs),
    /// Generate a synthetic series in the input CSV format.
    Simulate {
        /// Generator spec as JSON.
        #[arg(long, conflicts_with = "preset")]
        spec: Option<PathBuf>,
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    WindLike,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    horizon_hours: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let model = self.model.as_deref().map(str::parse::<Family>).transpose()?;
        let overrides = Overrides {
            model,
            horizon_hours: self.horizon_hours,
            seed: self.seed,
            data_path: self.data.clone(),
            output_dir: self.output_dir.clone(),
        };
        RunConfig::resolve(self.config.as_deref(), &overrides)
    }
}

fn beside(path: &Path, name: &str) -> PathBuf {
    path.parent().unwrap_or(Path::new(".")).join(name)
}

fn print<T: Serialize>(value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string(value).map_err(|e| CliError::Io(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fit(args) => print(&cmd_fit(&args.resolve()?)?),
        Command::Forecast {
            model_file,
            data,
            steps,
            start,
            output,
        } => {
            let output = output.unwrap_or_else(|| beside(&model_file, "predictions.csv"));
            print(&cmd_forecast(&model_file, &data, steps, start, &output)?)
        }
        Command::Evaluate { predictions, output } => {
            let output = output.unwrap_or_else(|| beside(&predictions, "metrics.json"));
            print(&cmd_evaluate(&predictions, &output)?)
        }
        Command::Compare(args) => {
            let outcome = cmd_compare(&args.resolve()?)?;
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            print(&serde_json::json!({
                "metrics": outcome.metrics_path,
                "ranking": outcome.ranking_path,
                "plots": outcome.plot_paths,
                "skipped": outcome.warnings.len(),
            }))
        }
        Command::Simulate {
            spec,
            preset,
            n,
            seed,
            output,
        } => {
            let mut generator = match (spec, preset) {
                (Some(path), _) => {
                    let text = std::fs::read_to_string(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
                }
                (None, Some(Preset::WindLike)) => GeneratorSpec::wind_like(),
                (None, None) => GeneratorSpec::default(),
            };
            if let Some(n) = n {
                generator.n = n;
            }
            if let Some(seed) = seed {
                generator.seed = seed;
            }
            let outcome = cmd_simulate(&generator, &output)?;
            if outcome.clipped > 0 {
                eprintln!("warning: {} values clipped at 0", outcome.clipped);
            }
            print(&outcome)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::Config(e.to_string().trim_end().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
