use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use slimrnn::train::Evaluation;
use slimrnn_cli::commands;
use slimrnn_cli::error::{CliError, CliResult, EXIT_USAGE};

#[derive(Parser)]
#[command(name = "slimrnn", version, about = "Train, evaluate and gradient-check slim LSTM text classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train on a CSV and write checkpoint, metrics, epoch curve and manifest.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate a checkpoint on the positive and negative rows of a CSV.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train once per value of one axis and print a comparison table.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values.
        #[arg(long)]
        values: String,
        /// Comma-separated variants, one table row each.
        #[arg(long)]
        rows: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare analytic gradients with central finite differences.
    Gradcheck {
        #[arg(default_value = "all")]
        scope: String,
        /// Tolerance for cells and single layers (default 1e-5).
        #[arg(long)]
        tol: Option<f64>,
        /// Tolerance for whole-model targets (default 1e-4).
        #[arg(long)]
        model_tol: Option<f64>,
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the trainable parameter count of one cell.
    CountParams { variant: String, d: usize, n: usize },
}

fn pct(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{v:.1}"))
}

fn print_evaluation(label: &str, e: &Evaluation) {
    println!("Model\tPositive (%)\tNegative (%)\tOverall");
    println!("{label}\t{}\t{}\t{:.1}", pct(e.positive), pct(e.negative), e.overall);
}

fn write_json(dir: &std::path::Path, name: &str, json: String) -> CliResult<()> {
    std::fs::create_dir_all(dir)
        .and_then(|_| std::fs::write(dir.join(name), json))
        .map_err(|source| CliError::Write {
            path: dir.join(name),
            source,
        })
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Train { config, data, out, seed } => {
            let outcome = commands::cmd_train(&config, &data, &out, seed)?;
            print_evaluation(&outcome.report.variant.to_string(), &outcome.report.validation);
            for path in &outcome.outputs {
                eprintln!("wrote {}", path.display());
            }
        }
        Command::Eval { checkpoint, data, out } => {
            let evaluation = commands::cmd_eval(&checkpoint, &data, out.as_deref())?;
            print_evaluation("checkpoint", &evaluation);
        }
        Command::Sweep {
            config,
            data,
            axis,
            values,
            rows,
            out,
            seed,
        } => {
            let table = commands::cmd_sweep(&config, &data, &axis, &values, rows.as_deref(), out.as_deref(), seed)?;
            print!("{}", table.render());
        }
        Command::Gradcheck {
            scope,
            tol,
            model_tol,
            seeds,
            out,
        } => {
            let reports = commands::cmd_gradcheck(&scope, tol, model_tol, seeds)?;
            for r in &reports {
                print!("{r}");
            }
            if let Some(dir) = out {
                write_json(&dir, "gradcheck.json", serde_json::to_string_pretty(&reports).expect("reports serialize"))?;
            }
            let failed: Vec<&str> = reports.iter().filter(|r| !r.passed).map(|r| r.target.as_str()).collect();
            if !failed.is_empty() {
                return Err(CliError::GradcheckFailed(failed.join(", ")));
            }
        }
        Command::CountParams { variant, d, n } => {
            println!("{}", commands::cmd_count_params(&variant, d, n)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
