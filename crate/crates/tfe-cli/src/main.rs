//! Command line front end: solve fiber fields over grids, trace foliation
//! leaves, and verify the defining equations numerically.

use clap::Parser;

mod args;
mod config;
mod list;
mod output;
mod par;
mod solve;
mod trace;
mod verify;

/// Process-level failure classes, mapped to exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, bad config values, malformed surface files.
    #[error("{0}")]
    Config(String),
    /// Residual checks ran and failed.
    #[error("{0}")]
    Verification(String),
    /// The requested computation left its domain: seeds off the surface,
    /// empty traces, I/O trouble.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Verification(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("i/o error: {e}"))
    }
}

fn run(cli: args::Cli) -> Result<(), CliError> {
    match cli.cmd {
        args::Cmd::Solve(a) => {
            let (cfg, src) = config::resolve("solve", &a)?;
            solve::run(&cfg, &src)
        }
        args::Cmd::Trace(a) => {
            let (cfg, src) = config::resolve("trace", &a)?;
            trace::run(&cfg, &src)
        }
        args::Cmd::Verify(a) => {
            let (cfg, src) = config::resolve("verify", &a)?;
            verify::run(&cfg, &src)
        }
        args::Cmd::ListExamples => {
            list::run();
            Ok(())
        }
    }
}

fn main() {
    // die silently on a closed pipe, like other unix text tools
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = match args::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    std::process::exit(0);
                }
                _ => {
                    eprint!("{e}");
                    std::process::exit(1);
                }
            }
        }
    };
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
