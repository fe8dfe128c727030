use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use parking_scvx::CarState;
use parking_scvx_cli::commands::{self, parse_pose, PlanOptions, ScenarioSource};
use parking_scvx_cli::{CliError, Format};

#[derive(Parser)]
#[command(name = "parking-scvx", version, about = "Parking maneuvers by successive convexification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
    Svg,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scenario and write the artifact, knot table and plot.
    Plan {
        /// Built-in scenario: reverse or parallel.
        #[arg(required_unless_present = "file", conflicts_with = "file")]
        scenario: Option<String>,
        /// Scenario JSON file.
        #[arg(long)]
        file: Option<PathBuf>,
        /// Draw the start pose from the scenario's start region.
        #[arg(long)]
        seed: Option<u64>,
        /// Knots per curve section.
        #[arg(long)]
        knots: Option<usize>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Outputs to write; repeat or separate with commas. Default: all.
        #[arg(long, value_enum, value_delimiter = ',')]
        format: Vec<FormatArg>,
    },
    /// Compare an unconstrained solve against the Reeds-Shepp shortest path.
    RsCompare {
        /// Start pose as x,y,theta (radians).
        #[arg(allow_hyphen_values = true, value_parser = parse_pose)]
        q0: CarState,
        /// Goal pose as x,y,theta (radians).
        #[arg(allow_hyphen_values = true, value_parser = parse_pose)]
        q1: CarState,
        /// Minimum turning radius [m].
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        /// Overlay plot path.
        #[arg(long, default_value = "rs-compare.svg")]
        out: PathBuf,
    },
    /// Plot the convergence history stored in an artifact.
    History {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "history.svg")]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Plan { scenario, file, seed, knots, out, format } => {
            let source = match (scenario, file) {
                (_, Some(path)) => ScenarioSource::File(path),
                (Some(name), None) => ScenarioSource::Builtin(name),
                (None, None) => return Err(CliError::BadInput("no scenario given".into())),
            };
            let mut formats: Vec<Format> = format
                .into_iter()
                .map(|f| match f {
                    FormatArg::Json => Format::Json,
                    FormatArg::Csv => Format::Csv,
                    FormatArg::Svg => Format::Svg,
                })
                .collect();
            if formats.is_empty() {
                formats = vec![Format::Json, Format::Csv, Format::Svg];
            }
            let summary = commands::plan(&PlanOptions { source, seed, knots, out, formats })?;
            Ok(serde_json::to_string(&summary).expect("summary serializes"))
        }
        Command::RsCompare { q0, q1, radius, out } => {
            let s = commands::rs_compare(q0, q1, radius, &out)?;
            Ok(format!(
                "scvx length {:.6} m\nrs length {:.6} m ({})\nratio {:.6}\n{}",
                s.scvx_length,
                s.rs_length,
                s.rs_word,
                s.ratio,
                serde_json::to_string(&s).expect("summary serializes")
            ))
        }
        Command::History { input, out } => {
            let n = commands::history(&input, &out)?;
            Ok(serde_json::json!({ "iterations": n, "plot": out }).to_string())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(text) => {
            println!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
