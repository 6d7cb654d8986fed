mod args;
mod commands;
mod config;

use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use kcm::experiments::write_report;
use kcm::KcmError;
use serde_json::{json, Map, Value};

use args::{Cli, CliCommand};
use config::RunConfig;

const EXIT_VALIDATION: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_STUDY: u8 = 3;

fn exit_code(e: &KcmError) -> u8 {
    match e {
        KcmError::Capacity { .. } | KcmError::Convergence(_) | KcmError::Irreducible(_) => {
            EXIT_NUMERICAL
        }
        KcmError::Study(_) => EXIT_STUDY,
        _ => EXIT_VALIDATION,
    }
}

fn load_config(path: &Path) -> kcm::Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| KcmError::Validation(format!("cannot read {}: {e}", path.display())))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(KcmError::Validation("configuration must be a JSON object".into())),
        Err(e) => Err(KcmError::Validation(format!("{}: {e}", path.display()))),
    }
}

fn run(command: CliCommand) -> kcm::Result<u8> {
    let overrides = command.overrides();
    let base = match &overrides.config {
        Some(path) => load_config(path)?,
        None if matches!(command, CliCommand::Run(_)) => {
            return Err(KcmError::Validation("run needs --config".into()))
        }
        None => Map::new(),
    };
    let cfg = RunConfig::from_value(overrides.apply(base))?;
    let root = cfg.output_root(overrides.output_dir_given);
    let outcome = kcm::par::install(cfg.execution.threads, || commands::execute(&cfg))?;
    let dir = write_report(
        &root,
        &outcome.report,
        &cfg.echo(),
        cfg.execution.seed,
        cfg.execution.plot_data,
    )?;
    println!(
        "{}",
        json!({
            "command": cfg.command.name(),
            "output_dir": dir,
            "results": outcome.report.results,
        })
    );
    match outcome.failure {
        Some(msg) => {
            eprintln!("kcm: {}: {msg}", cfg.command.name());
            Ok(EXIT_STUDY)
        }
        None => Ok(0),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("kcm: error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
