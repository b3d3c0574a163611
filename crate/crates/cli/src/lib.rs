//! Command-line front end for `flagdyn`.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use commands::{CliError, Context, EXIT_USAGE};
use output::OutDir;

#[derive(Debug, Parser)]
#[command(name = "flagdyn", version, about = "Certified projective dynamics of discrete groups")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Run configuration (TOML).
    #[arg(long, short)]
    pub config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; overrides the config. 0 means one per core.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the compatibility conditions and write a certificate.
    Certify(Common),
    /// Sample the limit set.
    Limitset {
        #[command(flatten)]
        common: Common,
        /// Run even if certification fails.
        #[arg(long)]
        skip_certify: bool,
        /// Also write an SVG scatter plot (dimensions 2 and 3).
        #[arg(long)]
        svg: bool,
    },
    /// Fit exponential contraction rates.
    Rates {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        skip_certify: bool,
    },
    /// Recertify along a deformation of the peripheral representation.
    Probe(Common),
    /// Build an automaton for a group acting on the projective line.
    Synthesize(Common),
    /// Singular value gaps of a matrix sequence.
    Gaps(Common),
    /// Evaluate the projective metric of a properly convex domain.
    Hilbert(Common),
}

/// Runs the CLI on `args` and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32, CliError> {
    let (common, skip_certify, svg) = match &cmd {
        Command::Limitset {
            common,
            skip_certify,
            svg,
        } => (common, *skip_certify, *svg),
        Command::Rates { common, skip_certify } => (common, *skip_certify, false),
        Command::Certify(c)
        | Command::Probe(c)
        | Command::Synthesize(c)
        | Command::Gaps(c)
        | Command::Hilbert(c) => (c, false, false),
    };
    let cfg = config::load(&common.config)?;
    let threads = common.threads.unwrap_or(cfg.config.threads);
    // A second initialisation in the same process is harmless.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    let seed = common.seed.unwrap_or(cfg.config.seed);
    let ctx = Context {
        seed,
        out: OutDir::create(&common.out)?,
        svg,
        skip_certify,
        cfg,
    };
    match cmd {
        Command::Certify(_) => commands::certify(&ctx),
        Command::Limitset { .. } => commands::limitset(&ctx),
        Command::Rates { .. } => commands::rates(&ctx),
        Command::Probe(_) => commands::probe(&ctx),
        Command::Synthesize(_) => commands::synthesize(&ctx),
        Command::Gaps(_) => commands::gaps(&ctx),
        Command::Hilbert(_) => commands::hilbert(&ctx),
    }
}
