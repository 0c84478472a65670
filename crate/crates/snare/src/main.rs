use std::io::Write;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use snare::frontend::{analyze_source, RunConfig, StrategyKind};
use snare::keycycle::Rho1;

#[derive(Parser)]
#[command(name = "snare", about = "Symbolic protocol analysis for bounded sessions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a protocol file and report attacks.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Protocol file to analyze.
    file: String,
    #[arg(long, value_enum, default_value_t = StrategyArg::Exhaustive)]
    strategy: StrategyArg,
    /// Protection relation for key-cycle properties.
    #[arg(long, value_enum)]
    rho1: Option<Rho1Arg>,
    /// Enable whole-message recovery from signatures.
    #[arg(long)]
    unsign: bool,
    /// Report every attack instead of stopping at the first.
    #[arg(long)]
    all_witnesses: bool,
    #[arg(long, value_enum, default_value_t = FormatArg::Text)]
    format: FormatArg,
    /// Cap on the number of interleavings explored.
    #[arg(long, default_value_t = 1000)]
    max_interleavings: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Exhaustive,
    Eager,
}

#[derive(Clone, Copy, ValueEnum)]
enum Rho1Arg {
    Guarded,
    Subterm,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    MachineReadable,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Analyze(args) = cli.command;

    let source = match std::fs::read_to_string(&args.file) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{}: {}", args.file, e);
            return ExitCode::from(2);
        }
    };
    let cfg = RunConfig {
        strategy: match args.strategy {
            StrategyArg::Exhaustive => StrategyKind::Exhaustive,
            StrategyArg::Eager => StrategyKind::Eager,
        },
        rho1: args.rho1.map(|r| match r {
            Rho1Arg::Guarded => Rho1::Guarded,
            Rho1Arg::Subterm => Rho1::Subterm,
        }),
        unsign: args.unsign,
        all_witnesses: args.all_witnesses,
        max_interleavings: args.max_interleavings,
    };
    match analyze_source(&source, &cfg) {
        Ok(report) => {
            let out = match args.format {
                FormatArg::Text => report.text(),
                FormatArg::MachineReadable => format!("{}\n", report.machine_readable()),
            };
            // a closed pipe on stdout is not an analysis failure
            let _ = std::io::stdout().write_all(out.as_bytes());
            if report.attack_found {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("{}: {}", args.file, e);
            ExitCode::from(2)
        }
    }
}
