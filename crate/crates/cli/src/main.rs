use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use svqkd_cli::config::{AttackKind, Format, Overrides, RunConfig};
use svqkd_cli::{commands, CliError};

/// Simulator for GHZ-state multiparty key distribution checked by Svetlichny-inequality violation.
#[derive(Parser)]
#[command(name = "svqkd", version)]
struct Cli {
    /// TOML file; its keys override the command-line flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output format for the summary [default: table].
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an honest session with a Werner-state source.
    Simulate(SessionArgs),
    /// Tabulate the Devetak-Winter key rate against visibility.
    Keyrate(KeyrateArgs),
    /// Check the classical bounds with brute-force oracles.
    Verify(VerifyArgs),
    /// Run a session with an eavesdropper in control of the source.
    Attack(AttackArgs),
}

#[derive(Args)]
struct SessionArgs {
    /// Number of parties [default: 3].
    #[arg(long)]
    parties: Option<usize>,
    /// Number of rounds [default: 40000].
    #[arg(long)]
    rounds: Option<usize>,
    /// Weight of the GHZ state in the Werner mixture [default: 1.0].
    #[arg(long)]
    visibility: Option<f64>,
    /// RNG seed [default: 0].
    #[arg(long, env = "SVQKD_SEED")]
    seed: Option<u64>,
    /// Standard errors the estimate must clear the classical bound by [default: 3].
    #[arg(long)]
    abort_sigma: Option<f64>,
    /// Write the public transcript here as JSON lines.
    #[arg(long)]
    transcript: Option<PathBuf>,
    /// Write the summary here instead of stdout.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct AttackArgs {
    #[command(flatten)]
    session: SessionArgs,
    /// Attack to mount; the strongest instance is searched for.
    #[arg(long, value_enum)]
    attack: Option<AttackKind>,
    /// JSON or TOML file with an explicit attack description.
    #[arg(long)]
    attack_spec: Option<PathBuf>,
    /// Optimizer restarts for searched attacks [default: 200].
    #[arg(long)]
    restarts: Option<usize>,
}

#[derive(Args)]
struct KeyrateArgs {
    /// start:end:step, a comma list, or a single visibility [default: 0:1:0.01].
    #[arg(long)]
    grid: Option<String>,
    /// Write the rate table here as CSV.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Number of parties [default: 3].
    #[arg(long)]
    parties: Option<usize>,
    /// Also write the report here.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn session_overrides(a: SessionArgs) -> Overrides {
    Overrides {
        parties: a.parties,
        rounds: a.rounds,
        visibility: a.visibility,
        seed: a.seed,
        abort_sigma: a.abort_sigma,
        transcript: a.transcript,
        summary: a.summary,
        ..Default::default()
    }
}

fn run(cli: Cli) -> Result<commands::CommandOutput, CliError> {
    let (flags, action): (Overrides, fn(&RunConfig) -> _) = match cli.command {
        Command::Simulate(a) => (session_overrides(a), commands::simulate),
        Command::Attack(a) => (
            Overrides {
                attack: a.attack,
                attack_spec: a.attack_spec,
                restarts: a.restarts,
                ..session_overrides(a.session)
            },
            commands::attack,
        ),
        Command::Keyrate(a) => (Overrides { grid: a.grid, output: a.output, ..Default::default() }, commands::keyrate),
        Command::Verify(a) => (Overrides { parties: a.parties, output: a.output, ..Default::default() }, commands::verify),
    };
    let flags = Overrides { format: cli.format, ..flags };
    let cfg = RunConfig::resolve(flags, cli.config.as_deref())?;
    action(&cfg)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(out) => {
            print!("{}", out.stdout);
            ExitCode::from(out.code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let Some(h) = e.hint() {
                eprintln!("  {h}");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
