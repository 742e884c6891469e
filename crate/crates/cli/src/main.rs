//! `tlsres`: simulation, fitting and synthetic-data commands for optically
//! illuminated superconducting resonators. Every run prints a JSON result
//! envelope; tabular results go to CSV files in the output directory.

mod commands;
mod config;
mod error;
mod output;

use clap::{Parser, Subcommand, ValueEnum};
use commands::{fit_spectrum, mc, photon_number, slopes, synth, temp_model};
use error::{CliError, CliResult};
use output::{flatten, schema_tag, Context, Envelope, Output};
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "tlsres", version, about)]
struct Cli {
    /// Config file: JSON object, `key = value` lines, or an earlier result
    /// envelope to replay. Flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for output files.
    #[arg(long, global = true, env = "TLSRES_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
    /// Format of the summary on stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a transmission trace with the Lorentzian and/or full S21 model.
    #[command(allow_negative_numbers = true)]
    FitSpectrum(fit_spectrum::Flags),
    /// Ensemble slopes of Δ(1/Q) and Δf/f versus optical power.
    #[command(allow_negative_numbers = true)]
    Slopes(slopes::Flags),
    /// Monte Carlo TLS ensembles; per-trial and aggregate response curves.
    #[command(allow_negative_numbers = true)]
    Mc(mc::Flags),
    /// Δf/f versus temperature from TLS permittivity and kinetic inductance.
    #[command(allow_negative_numbers = true)]
    TempModel(temp_model::Flags),
    /// Intracavity photon number and coupling rates of a mode.
    #[command(allow_negative_numbers = true)]
    PhotonNumber(photon_number::Flags),
    /// Synthetic traces or power series in the input file formats.
    #[command(allow_negative_numbers = true)]
    Synth(synth::Flags),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::FitSpectrum(_) => "fit-spectrum",
            Command::Slopes(_) => "slopes",
            Command::Mc(_) => "mc",
            Command::TempModel(_) => "temp-model",
            Command::PhotonNumber(_) => "photon-number",
            Command::Synth(_) => "synth",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tlsres: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::FitSpectrum(f) => execute::<fit_spectrum::Config>(cli, f, fit_spectrum::run),
        Command::Slopes(f) => execute::<slopes::Config>(cli, f, slopes::run),
        Command::Mc(f) => execute::<mc::Config>(cli, f, mc::run),
        Command::TempModel(f) => execute::<temp_model::Config>(cli, f, temp_model::run),
        Command::PhotonNumber(f) => execute::<photon_number::Config>(cli, f, photon_number::run),
        Command::Synth(f) => execute::<synth::Config>(cli, f, synth::run),
    }
}

fn execute<C>(cli: &Cli, flags: &impl Serialize, run: fn(&C, &Context) -> CliResult<Output>) -> CliResult<()>
where
    C: Default + Serialize + DeserializeOwned,
{
    let name = cli.command.name();
    let file = cli.config.as_deref().map(|p| config::load(p, name)).transpose()?;
    let cfg: C = config::resolve(file, flags)?;
    std::fs::create_dir_all(&cli.out_dir).map_err(|e| CliError::io(&cli.out_dir, e))?;
    let ctx = Context {
        out_dir: cli.out_dir.clone(),
    };

    let start = Instant::now();
    let out = run(&cfg, &ctx)?;
    let envelope = Envelope {
        command: name,
        schema: schema_tag(name),
        config: &cfg,
        result: out.result,
        outputs: out.files.iter().map(|p| p.display().to_string()).collect(),
        duration_s: start.elapsed().as_secs_f64(),
    };

    let text = match cli.format {
        Format::Json => serde_json::to_string_pretty(&envelope).expect("serializable") + "\n",
        Format::Text => {
            let mut s = format!("command = {name}\nschema = {}\n", envelope.schema);
            s.push_str(&flatten(&envelope.result));
            for f in &envelope.outputs {
                s.push_str(&format!("wrote {f}\n"));
            }
            s
        }
    };
    // A closed stdout (e.g. piped into `head`) is not a failure of the run.
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
    Ok(())
}
