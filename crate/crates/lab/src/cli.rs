//! `tiletower <command> --config <path> --out <dir> [--svg] [--seed N] [--mode exact|numeric]`

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::{Config, Mode};
use crate::experiments::{self, write_outcome, Outcome};
use crate::report::Output;
use crate::LabError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Parser, Debug)]
#[command(name = "tiletower", version, about = "Tile-tower experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(clap::Args, Debug, Clone)]
pub struct Common {
    /// JSON experiment config
    #[arg(long)]
    pub config: PathBuf,
    /// output directory
    #[arg(long)]
    pub out: PathBuf,
    /// also write SVG plots
    #[arg(long)]
    pub svg: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub mode: Option<Mode>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// build a CME and write manifest, N and the validation ledger
    Build(Common),
    /// structural, mass and alignment checks over the profile corpus
    Verify(Common),
    /// single-tower experiment
    Warmup(Common),
    /// T_M and weak-norm sweep with the major-set probe
    Blowup(Common),
    /// Walsh identities, weak type and column sums
    Walsh(Common),
    /// norm oracles and weight bands
    Norms(Common),
    /// counting-function suite
    Counting(Common),
    /// reconstruction constancy
    Reconstruct(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Build(c)
            | Command::Verify(c)
            | Command::Warmup(c)
            | Command::Blowup(c)
            | Command::Walsh(c)
            | Command::Norms(c)
            | Command::Counting(c)
            | Command::Reconstruct(c) => c,
        }
    }
}

fn load(c: &Common) -> Result<Config, LabError> {
    let mut cfg = Config::load(&c.config)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(m) = c.mode {
        cfg.mode = m;
    }
    Ok(cfg)
}

fn dispatch(cmd: &Command, cfg: &Config) -> Result<Outcome, LabError> {
    match cmd {
        Command::Build(_) => experiments::cmd_build(cfg),
        Command::Verify(_) => experiments::cmd_verify(cfg),
        Command::Warmup(_) => experiments::cmd_warmup(cfg),
        Command::Blowup(_) => experiments::cmd_blowup(cfg),
        Command::Walsh(_) => Ok(experiments::cmd_walsh(cfg)),
        Command::Norms(_) => experiments::cmd_norms(cfg),
        Command::Counting(_) => experiments::cmd_counting(cfg),
        Command::Reconstruct(_) => Ok(experiments::cmd_reconstruct(cfg)),
    }
}

/// Runs a parsed command; messages go to `err`. Returns the exit code.
pub fn execute(cli: &Cli, err: &mut dyn std::io::Write) -> i32 {
    let c = cli.command.common();
    let result = load(c).and_then(|cfg| {
        let out = Output::create(&c.out, c.svg)?;
        let o = dispatch(&cli.command, &cfg)?;
        write_outcome(&out, &cfg, &o)?;
        Ok((o, out))
    });
    match result {
        Ok((o, out)) => {
            for n in &o.notes {
                let _ = writeln!(err, "{}", n);
            }
            if o.pass {
                EXIT_OK
            } else {
                let ledger = if o.command == "build" { out.path("ledger.csv") } else { out.path("summary.txt") };
                let _ = writeln!(err, "{} failed; see {}", o.command, ledger.display());
                EXIT_FAIL
            }
        }
        Err(e) => {
            let _ = writeln!(err, "{}", e);
            e.exit_code()
        }
    }
}

/// Parses `args` (program name first) and runs.
pub fn run<I, T>(args: I, err: &mut dyn std::io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(&cli, err),
        Err(e) => {
            let _ = write!(err, "{}", e);
            match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            }
        }
    }
}
