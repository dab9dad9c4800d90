use std::path::PathBuf;
use std::process::ExitCode;

use aeronet_cli::{run_command, Command, Invocation, LinkKind, Overrides};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "aeronet", version, about = "Simulate a neural network trained across a fleet of airborne devices")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Assign neurons to devices and export the formation.
    Plan(Args),
    /// Check the config, dataset and link ranges without simulating.
    Validate(Args),
    /// Run the full training simulation and write trace and report.
    Simulate(Args),
    /// Summarize an existing trace.
    Report {
        #[command(flatten)]
        args: Args,
        /// Trace file; defaults to trace.jsonl in the output directory.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum Link {
    Wired,
    Wireless,
}

#[derive(clap::Args)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    design: Option<u8>,
    #[arg(long, value_enum)]
    sparse: Option<Toggle>,
    #[arg(long, value_enum)]
    link: Option<Link>,
}

impl Args {
    fn invocation(self, command: Command, trace: Option<PathBuf>) -> Invocation {
        let overrides = Overrides {
            seed: self.seed,
            design: self.design,
            sparse: self.sparse.map(|t| matches!(t, Toggle::On)),
            link: self.link.map(|l| match l {
                Link::Wired => LinkKind::Wired,
                Link::Wireless => LinkKind::Wireless,
            }),
            output_dir: self.out,
        };
        Invocation { command, config: self.config, overrides, trace }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("AERONET_LOG_LEVEL", "error")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let invocation = match cli.command {
        Sub::Plan(a) => a.invocation(Command::Plan, None),
        Sub::Validate(a) => a.invocation(Command::Validate, None),
        Sub::Simulate(a) => a.invocation(Command::Simulate, None),
        Sub::Report { args, trace } => args.invocation(Command::Report, trace),
    };
    match run_command(&invocation) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
