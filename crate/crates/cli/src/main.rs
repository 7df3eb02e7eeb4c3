use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser)]
#[command(
    name = "fsbs",
    version,
    about = "Frequency-shifted backscatter tag simulator and decoder"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a scenario to cf32 IQ plus a JSON manifest sidecar.
    Simulate(SimulateArgs),
    /// Decode a cf32 capture against a band-spec file.
    Decode(DecodeArgs),
    /// Simulate, decode and compare against ground truth in one step.
    Run(RunArgs),
    /// Assign channel centers for a list of tag requests.
    Plan(PlanArgs),
    /// Solve for one capacitor so a design resonates at a target frequency.
    Tune(TuneArgs),
    /// Check the resonance formula against the bundled ESCO table.
    TableCheck,
    /// Run the acceptance suite, one PASS/FAIL line per criterion.
    Acceptance(AcceptanceArgs),
    /// Write the bundled scenarios as JSON files.
    Scenarios(ScenariosArgs),
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["scenario", "bundled"])))]
pub struct ScenarioSource {
    /// Scenario JSON file.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Name of a bundled scenario instead of a file.
    #[arg(long)]
    pub bundled: Option<String>,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub source: ScenarioSource,
    /// Output cf32 path; the manifest goes to `<out>.json`.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the receiver band specs here.
    #[arg(long)]
    pub bands_out: Option<PathBuf>,
}

#[derive(Args)]
pub struct DecodeArgs {
    #[arg(long)]
    pub iq: PathBuf,
    /// Band-spec JSON: a list, or an object with a `bands` field (a
    /// simulation manifest works).
    #[arg(long)]
    pub bands: PathBuf,
    /// Output event log (TSV).
    #[arg(long)]
    pub events: PathBuf,
    /// Directory for one WAV per audio band.
    #[arg(long)]
    pub wav_dir: Option<PathBuf>,
    /// Overview spectrogram CSV.
    #[arg(long)]
    pub spectrogram: Option<PathBuf>,
}

#[derive(Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub source: ScenarioSource,
    /// Directory for capture, manifest, events and WAVs.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Exit with status 1 unless decoded events match the ground truth.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub requests: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum TopologyArg {
    Esco,
    Mco,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum FreeArg {
    C1,
    C2,
    #[value(alias = "c_blocking")]
    CBlocking,
    #[value(alias = "c_shift")]
    CShift,
    #[value(alias = "c_jfet")]
    CJfet,
}

/// Component values accept SI suffixes: `470p`, `4.7mH`, `202kHz`.
#[derive(Args)]
pub struct TuneArgs {
    #[arg(long)]
    pub target: String,
    #[arg(long)]
    pub l1: String,
    #[arg(long, value_enum)]
    pub topology: TopologyArg,
    /// Start from this Table 2 row (nominal kHz) instead of the row nearest
    /// the target.
    #[arg(long)]
    pub row: Option<u32>,
    #[arg(long)]
    pub l2: Option<String>,
    #[arg(long)]
    pub c1: Option<String>,
    #[arg(long)]
    pub c2: Option<String>,
    #[arg(long)]
    pub c_blocking: Option<String>,
    #[arg(long)]
    pub c_shift: Option<String>,
    #[arg(long)]
    pub c_jfet: Option<String>,
    /// The capacitor to solve for. Defaults to c_shift (MCO) or c_jfet (ESCO).
    #[arg(long, value_enum)]
    pub free: Option<FreeArg>,
    /// Write the design JSON here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct AcceptanceArgs {
    /// Run only these criteria (1-10).
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<u8>,
}

#[derive(Args)]
pub struct ScenariosArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Decode(a) => commands::decode(&a),
        Command::Run(a) => commands::run(&a),
        Command::Plan(a) => commands::plan(&a),
        Command::Tune(a) => commands::tune(&a),
        Command::TableCheck => commands::table_check(),
        Command::Acceptance(a) => commands::acceptance(&a),
        Command::Scenarios(a) => commands::scenarios(&a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("fsbs: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn free_component_accepts_both_spellings() {
        for v in ["c-shift", "c_shift"] {
            let cli = Cli::try_parse_from([
                "fsbs",
                "tune",
                "--target",
                "300k",
                "--l1",
                "1m",
                "--topology",
                "mco",
                "--free",
                v,
            ])
            .unwrap();
            assert!(matches!(
                cli.command,
                Command::Tune(TuneArgs {
                    free: Some(FreeArg::CShift),
                    ..
                })
            ));
        }
    }

    #[test]
    fn simulate_needs_exactly_one_source() {
        assert!(Cli::try_parse_from(["fsbs", "simulate", "--out", "x"]).is_err());
        assert!(Cli::try_parse_from([
            "fsbs",
            "simulate",
            "--scenario",
            "a",
            "--bundled",
            "pong",
            "--out",
            "x"
        ])
        .is_err());
        assert!(Cli::try_parse_from([
            "fsbs",
            "simulate",
            "--bundled",
            "pong",
            "--seed",
            "3",
            "--out",
            "x"
        ])
        .is_ok());
    }
}
