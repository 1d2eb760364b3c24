use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gaugelab::cli::{self, CliError, LoadedScenario, PlotKind};
use gaugelab::dtn::NormKind;

#[derive(Parser)]
#[command(name = "gaugelab", version, about = "Gauge transport, broken rays and DtN maps for matrix Schrodinger operators")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write its results and manifest.
    Run {
        config: PathBuf,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the norm used for DtN comparisons (operator or frobenius).
        #[arg(long)]
        norm: Option<String>,
    },
    /// Flatten a result JSON file into CSV.
    EmitPlotdata {
        result: PathBuf,
        /// broken_ray, gauge_field or dtn; read from the file when omitted.
        #[arg(long)]
        kind: Option<String>,
        /// Write here instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Parse a scenario and resolve every spec without running it.
    ValidateConfig { config: PathBuf },
}

fn parse_norm(s: &str) -> Result<NormKind, CliError> {
    match s {
        "operator" | "op" => Ok(NormKind::Operator),
        "frobenius" | "fro" => Ok(NormKind::Frobenius),
        _ => Err(CliError::Validation(format!("unknown norm {s:?} (operator, frobenius)"))),
    }
}

fn main_inner(args: Args) -> Result<(), CliError> {
    cli::init_threads()?;
    match args.command {
        Command::Run { config, out, norm } => {
            let mut ls = LoadedScenario::load(&config)?;
            if let Some(o) = out {
                let o = std::path::absolute(&o)?;
                ls.scenario.output.dir = o.to_string_lossy().into_owned();
            }
            if let Some(n) = norm {
                ls.scenario.numerics.norm = parse_norm(&n)?;
            }
            let r = cli::run(&ls)?;
            print!("{}", r.summary);
            println!("wrote {} file(s) to {}", r.files.len(), r.dir.display());
        }
        Command::EmitPlotdata { result, kind, output } => {
            let bytes = std::fs::read(&result).map_err(|e| CliError::Io(format!("{}: {e}", result.display())))?;
            let v: serde_json::Value = serde_json::from_slice(&bytes)
                .map_err(|e| CliError::Validation(format!("{}: {e}", result.display())))?;
            let kind = kind.map(|k| k.parse::<PlotKind>()).transpose()?;
            let csv = cli::emit_plotdata(&v, kind)?;
            match output {
                Some(p) => std::fs::write(&p, csv)?,
                None => print!("{csv}"),
            }
        }
        Command::ValidateConfig { config } => {
            let ls = LoadedScenario::load(&config)?;
            let ctx = cli::validate(&ls)?;
            println!(
                "{}: ok (task {:?}, {} obstacle(s), config hash {})",
                config.display(),
                ls.scenario.task,
                ctx.domain.n_obstacles(),
                &ls.config_hash()[..16]
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match main_inner(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gaugelab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
