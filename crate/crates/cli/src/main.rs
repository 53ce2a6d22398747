use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use quadlqr_cli::commands::{cmd_compare, cmd_sim, cmd_synth, CliError};
use quadlqr_cli::config::{self, Mode, Overrides, ResolvedRun};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "quadlqr",
    version,
    about = "Quadcopter attitude control: LQR/LQRi gain synthesis and closed-loop simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the gain matrix and write the gain report
    Synth(CommonArgs),
    /// Run one closed-loop simulation; write the trace CSV and metrics
    Sim(CommonArgs),
    /// Run LQR and LQRi on the identical scenario and report improvement
    Compare(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the TOML run config
    config: PathBuf,
    /// Override weights.mode from the config
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Override scenario.seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override output.directory
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Lqr,
    Lqri,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Lqr => Mode::Lqr,
            ModeArg::Lqri => Mode::Lqri,
        }
    }
}

fn resolve(args: &CommonArgs) -> Result<ResolvedRun, CliError> {
    let loaded = config::load(&args.config)?;
    let overrides = Overrides {
        mode: args.mode.map(Mode::from),
        seed: args.seed,
        out_dir: args.out.clone(),
    };
    Ok(config::resolve(&loaded, &overrides)?)
}

fn execute(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Synth(args) => cmd_synth(&resolve(args)?),
        Command::Sim(args) => cmd_sim(&resolve(args)?),
        Command::Compare(args) => cmd_compare(&resolve(args)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
