use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hjsub_harness::{exit_code, run, HarnessError, RunOptions, Scenario};

#[derive(Parser)]
#[command(
    name = "hjsub",
    version,
    about = "Restriction and extension experiments for Hamilton-Jacobi equations on submanifolds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and print its report.
    Run {
        scenario: PathBuf,
        /// Directory for the report and grid snapshots.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Grid refinement multiplier.
        #[arg(long)]
        refine: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Check a scenario file without running it.
    Validate { scenario: PathBuf },
    /// List the built-in manifolds and Hamiltonians.
    Catalog,
    /// Print the JSON schema of scenario files.
    Schema,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

fn load(path: &Path) -> Result<Scenario, HarnessError> {
    let s = Scenario::load(path)?;
    s.validate()?;
    Ok(s)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { scenario, out, refine, seed, format } => {
            let result = load(&scenario).and_then(|s| {
                let report = run(&s, &RunOptions { out_dir: out.clone(), refine, seed })?;
                let text = match format {
                    Format::Json => report.to_json(),
                    Format::Csv => report.checks_csv(),
                };
                if let Some(dir) = &out {
                    std::fs::create_dir_all(dir)?;
                    let name = &report.scenario.name;
                    let ext = if format == Format::Json { "json" } else { "csv" };
                    std::fs::write(dir.join(format!("{name}.report.{ext}")), &text)?;
                    if format == Format::Csv && !report.tables.is_empty() {
                        std::fs::write(dir.join(format!("{name}.tables.csv")), report.tables_csv())?;
                    }
                }
                println!("{text}");
                Ok(report.outcome.exit_code())
            });
            result.unwrap_or_else(|e| {
                eprintln!("error: {e}");
                exit_code(&e)
            })
        }
        Command::Validate { scenario } => match load(&scenario) {
            Ok(s) => {
                println!("{}: valid {} scenario", scenario.display(), s.kind.as_str());
                0
            }
            Err(e) => {
                eprintln!("error: {e}");
                exit_code(&e)
            }
        },
        Command::Catalog => {
            println!("manifolds:");
            for (name, what) in hjsub::catalog::MANIFOLDS {
                println!("  {name:<22} {what}");
            }
            println!("hamiltonians:");
            for (name, what) in hjsub::catalog::HAMILTONIANS {
                println!("  {name:<22} {what}");
            }
            0
        }
        Command::Schema => {
            println!(
                "{}",
                serde_json::to_string_pretty(&hjsub_harness::scenario::schema()).expect("schema serializes")
            );
            0
        }
    };
    ExitCode::from(code as u8)
}
