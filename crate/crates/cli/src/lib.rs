//! Command-line front end: resolves configuration, runs one command and
//! renders a reproducible JSON or CSV report.
//!
//! Exit codes: 0 completed (PASS, UNVERIFIED or a data command), 1 FAIL
//! verdict, 2 configuration error, 3 runtime failure.

pub mod args;
pub mod config;
pub mod error;
pub mod report;
pub mod run;

use std::ffi::OsString;

use clap::Parser;

pub use args::{Cli, Command, Format, Options};
pub use config::RunConfig;
pub use error::CliError;
pub use run::{execute, Execution};

/// Worker count from `DYNINT_THREADS`; `None` leaves rayon's default.
pub fn thread_count(value: Option<&str>) -> Result<Option<usize>, CliError> {
    match value.map(str::trim) {
        None | Some("") => Ok(None),
        Some(v) => match v.parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config(format!("DYNINT_THREADS must be a positive integer, got `{v}`"))),
        },
    }
}

/// Parses, runs and writes the report; errors go to stderr as JSON.
pub fn main_with<I, T>(args: I, threads: Option<&str>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // help and version
            print!("{e}");
            return 0;
        }
        Err(e) => return fail(&CliError::Usage(first_line(&e.to_string()))),
    };
    match thread_count(threads) {
        Ok(Some(n)) => {
            // a second call in the same process keeps the first pool
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        Ok(None) => {}
        Err(e) => return fail(&e),
    }
    match run(&cli) {
        Ok(code) => code,
        Err(e) => fail(&e),
    }
}

fn first_line(s: &str) -> String {
    s.lines().next().unwrap_or_default().trim_start_matches("error: ").to_string()
}

fn fail(e: &CliError) -> i32 {
    eprintln!("{}", e.to_json());
    e.exit_code()
}

pub fn run(cli: &Cli) -> Result<i32, CliError> {
    let cfg = RunConfig::resolve(cli.command, &cli.opts)?;
    let exec = execute(cli.command, &cfg)?;
    match &cfg.output {
        Some(path) => std::fs::write(path, &exec.rendered).map_err(|e| CliError::Output {
            path: path.clone(),
            message: e.to_string(),
        })?,
        None => print!("{}", exec.rendered),
    }
    Ok(exec.exit_code)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thread_values() {
        assert_eq!(thread_count(None).unwrap(), None);
        assert_eq!(thread_count(Some("4")).unwrap(), Some(4));
        assert!(thread_count(Some("0")).is_err());
        assert!(thread_count(Some("many")).is_err());
    }
}
