//! flatlab: configuration-driven front end for curvature evaluation,
//! identity and flatness suites, deviation functionals, minimization runs
//! and normal-coordinate prescriptions.
//!
//! Usage: `flatlab <command> --config <path> [--key value]...`
//! Commands: curvature, verify, flatness, deviation, minimize,
//! normal-metric, census. Flag names mirror config paths
//! (e.g. `--quad.margin 2`). Exit codes: 0 all checks pass, 2 invalid
//! configuration, 3 numerical failure, 4 out of domain.

mod config;
mod report;
mod run;

use flatlab_core::error::Error;
use std::process::ExitCode;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_DOMAIN: u8 = 4;

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::ConfigInvalid(_) | Error::Io(_) => EXIT_CONFIG,
        Error::OutOfDomain { .. } => EXIT_DOMAIN,
        _ => EXIT_NUMERICAL,
    }
}

fn main() -> ExitCode {
    flatlab_core::configure_threads(None);
    let args: Vec<String> = std::env::args().skip(1).collect();
    match execute(&args) {
        Ok(all_pass) => {
            if all_pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_NUMERICAL)
            }
        }
        Err(e) => {
            eprintln!("flatlab: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn execute(args: &[String]) -> Result<bool, Error> {
    let (command, config_path, overrides) = parse_args(args)?;
    let text = std::fs::read_to_string(&config_path)
        .map_err(|e| Error::ConfigInvalid(format!("cannot read config '{config_path}': {e}")))?;
    let mut raw = config::RawConfig::parse(&text)?;
    raw.apply_overrides(&overrides);

    let start = std::time::Instant::now();
    let mut rep = run::run(&command, &raw)?;
    rep.timing_ms = start.elapsed().as_millis();

    let structured = rep.structured();
    match raw.get("output.report") {
        Some(path) => std::fs::write(&path, &structured)?,
        None => print!("{structured}"),
    }
    if let Some(path) = raw.get("output.table") {
        std::fs::write(&path, rep.tabular())?;
    }
    Ok(rep.all_pass())
}

fn parse_args(args: &[String]) -> Result<(String, String, Vec<(String, String)>), Error> {
    let mut command = None;
    let mut config_path = None;
    let mut overrides = Vec::new();
    let mut i = 0;
    while i < args.len() {
        let a = &args[i];
        if let Some(key) = a.strip_prefix("--") {
            let value = args
                .get(i + 1)
                .ok_or_else(|| Error::ConfigInvalid(format!("flag --{key} needs a value")))?
                .clone();
            if key == "config" {
                config_path = Some(value);
            } else {
                overrides.push((key.to_string(), value));
            }
            i += 2;
        } else {
            if command.is_some() {
                return Err(Error::ConfigInvalid(format!("unexpected argument '{a}'")));
            }
            command = Some(a.clone());
            i += 1;
        }
    }
    let command = command.ok_or_else(|| {
        Error::ConfigInvalid("usage: flatlab <command> --config <path> [--key value]...".into())
    })?;
    let config_path =
        config_path.ok_or_else(|| Error::ConfigInvalid("missing --config <path>".into()))?;
    Ok((command, config_path, overrides))
}
