//! `wpbc`: runs slab waveguide experiments described by a TOML file.
//!
//! Exit status: 0 on success, 1 for bad input, 2 for numerical failure,
//! 3 when `validate` finds the WPBC error not below the PML-backed one.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wpbc_core::config::{Experiment, ModeCount, RunConfig};
use wpbc_core::Error;

use commands::Context;

#[derive(Parser)]
#[command(name = "wpbc", version, about = "Scalar TE slab waveguide solver with waveguide port boundary conditions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Modes of a slab cross-section or a conducting strip
    Modal(Common),
    /// Slab with waveguide ports on both ends
    Scatter(Common),
    /// Straight guide: WPBC against PML-backed truncation
    Validate(Common),
    /// Mode-projection residual as a function of the port mode counts
    Nmodes(Common),
    /// Experiment named by the `experiment` key of the config
    Run(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long, short)]
    config: PathBuf,
    /// Output directory; overrides the `output` key
    #[arg(long)]
    out: Option<PathBuf>,
    /// Modes at the input port (a count or `full`)
    #[arg(long)]
    nmodes_in: Option<ModeCount>,
    /// Modes at the output port (a count or `full`)
    #[arg(long)]
    nmodes_out: Option<ModeCount>,
}

const EXIT_INPUT: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_CHECK: u8 = 3;

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if e.is_input_error() { EXIT_INPUT } else { EXIT_NUMERICAL })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(EXIT_INPUT) } else { ExitCode::SUCCESS };
        }
    };
    let (named, args) = match cli.command {
        Command::Modal(a) => (Some(Experiment::Modal), a),
        Command::Scatter(a) => (Some(Experiment::Scatter), a),
        Command::Validate(a) => (Some(Experiment::Validate), a),
        Command::Nmodes(a) => (Some(Experiment::Nmodes), a),
        Command::Run(a) => (None, a),
    };
    let mut cfg = match RunConfig::read(&args.config) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    if let Some(n) = args.nmodes_in {
        cfg.ports.input.nmodes = n;
    }
    if let Some(n) = args.nmodes_out {
        cfg.ports.out.nmodes = n;
    }
    let Some(experiment) = named.or(cfg.experiment) else {
        return fail(&Error::Config(format!(
            "{}: `run` needs the experiment key",
            args.config.display()
        )));
    };
    let out = cfg.output_dir(args.out.as_deref());
    let ctx = match Context::new(cfg, out) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    match commands::run(&ctx, experiment) {
        Ok(o) if o.passed => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(EXIT_CHECK),
        Err(e) => fail(&e),
    }
}
