use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use isac_limits::cli::{self, parse_config, Mode, RunOptions};
use isac_limits::IsacError;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Waterfill,
    Region,
    SisoLimit,
    Compound,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Waterfill => Mode::Waterfill,
            ModeArg::Region => Mode::Region,
            ModeArg::SisoLimit => Mode::SisoLimit,
            ModeArg::Compound => Mode::Compound,
        }
    }
}

/// MMSE-Rate region computations for integrated sensing and communication.
#[derive(Debug, Parser)]
#[command(name = "isac-limits", version)]
struct Args {
    mode: ModeArg,
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    verbose: bool,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_NONCONVERGENCE: u8 = 3;
const EXIT_INTERNAL: u8 = 4;

fn main() -> ExitCode {
    let args = Args::parse();
    let mode: Mode = args.mode.into();
    let cfg = match parse_config(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let opts = RunOptions {
        seed: args.seed,
        trials: args.trials,
        verbose: args.verbose,
    };
    match cli::run_to_dir(mode, &cfg, &opts, &args.out_dir) {
        Ok((files, out)) => {
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            if args.verbose {
                for f in &files {
                    eprintln!("wrote {}", f.display());
                }
            }
            if out.converged {
                ExitCode::SUCCESS
            } else {
                eprintln!("error: some points did not converge (flagged in the output)");
                ExitCode::from(EXIT_NONCONVERGENCE)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                IsacError::Config { .. } | IsacError::Mode(_) | IsacError::GridCoverage { .. } => EXIT_CONFIG,
                IsacError::NonConvergence(_) => EXIT_NONCONVERGENCE,
                _ => EXIT_INTERNAL,
            })
        }
    }
}
