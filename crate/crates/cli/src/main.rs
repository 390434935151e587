mod args;
mod commands;
mod io;
mod json;
mod manifest;

use std::fmt;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

/// A failure with the exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Bad usage or input: exit 2.
    Usage(String),
    Engine(ustat_boot::Error),
    /// A replay produced different output: exit 3.
    Mismatch(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self::Usage(msg.into())
    }

    fn exit_code(&self) -> u8 {
        use ustat_boot::Error;
        match self {
            Self::Usage(_) | Self::Engine(Error::InvalidArgument(_)) => 2,
            Self::Engine(Error::Numerical(_) | Error::Degenerate(_)) | Self::Mismatch(_) => 3,
            Self::Engine(Error::ResourceLimit(_)) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(m) | Self::Mismatch(m) => f.write_str(m),
            Self::Engine(e) => write!(f, "{e}"),
        }
    }
}

impl From<ustat_boot::Error> for CliError {
    fn from(e: ustat_boot::Error) -> Self {
        Self::Engine(e)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (command, expected) = match cli.command {
        Command::Replay(r) => {
            let (cmd, digest) = manifest::load_for_replay(&r.manifest_path, r.force)?;
            (cmd, Some(digest))
        }
        other => (other, None),
    };
    let started = manifest::now_ms();
    let outcome = commands::run(&command)?;
    let stdout = format!("{}\n", outcome.stdout);
    if let Some(want) = expected {
        let got = io::digest64(stdout.as_bytes());
        if got != want {
            return Err(CliError::Mismatch(format!("replayed output digest {got} differs from recorded {want}")));
        }
    }
    print!("{stdout}");
    let record = manifest::RunManifest::new(&command, &outcome, &stdout, started)?;
    let target = cli.manifest.clone().or_else(|| match &command {
        Command::Simulate(a) => Some(a.out.join("manifest.json")),
        _ => None,
    });
    record.emit(target.as_deref())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
