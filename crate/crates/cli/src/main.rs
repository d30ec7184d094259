use std::path::Path;
use std::process::ExitCode;

use clap::{Arg, ArgMatches, Command};
use spinmetro_cli::config::{Format, KEYS};
use spinmetro_cli::validate::{self, Status, Tolerances};
use spinmetro_cli::{commands, figures, records, CliError, Record, Result, RunConfig};

const SUBCOMMANDS: [(&str, &str); 5] = [
    ("qfi", "Effective QFI of one configuration"),
    ("cfi", "CFI of the Jz readout together with the QFI"),
    ("sweep", "Evaluate a grid along one parameter axis"),
    ("figure", "Write a figure dataset and its manifest"),
    ("validate", "Run the validation suite"),
];

fn flag_name(key: &str) -> String {
    key.replace('_', "-")
}

fn key_args() -> Vec<Arg> {
    KEYS.iter()
        .filter(|&&k| k != "mode")
        .map(|&key| {
            let long: &'static str = Box::leak(flag_name(key).into_boxed_str());
            let mut arg = Arg::new(key)
                .long(long)
                .value_name("VALUE")
                .allow_hyphen_values(true);
            if long != key {
                arg = arg.alias(key);
            }
            arg
        })
        .collect()
}

fn cli() -> Command {
    let mut cmd = Command::new("spinmetro")
        .about("Fisher information of an ancilla-assisted collective spin probe")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for (name, about) in SUBCOMMANDS {
        let mut sub = Command::new(name)
            .about(about)
            .arg(
                Arg::new("config_file")
                    .long("config")
                    .value_name("PATH")
                    .help("Flat key = value file; flags override it"),
            )
            .args(key_args());
        if name == "figure" {
            sub = sub.arg(
                Arg::new("figure_id")
                    .value_name("ID")
                    .help("fig2, fig3a..fig3f or fig4"),
            );
        }
        cmd = cmd.subcommand(sub);
    }
    cmd
}

fn load_config(mode: &str, m: &ArgMatches) -> Result<RunConfig> {
    let mut config = RunConfig::default();
    if let Some(path) = m.get_one::<String>("config_file") {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path.clone(), e))?;
        config.merge_text(&text)?;
    }
    config.set("mode", mode)?;
    for key in KEYS.iter().filter(|&&k| k != "mode") {
        if let Some(v) = m.get_one::<String>(key) {
            config.set(key, v)?;
        }
    }
    if let Some(id) = m.try_get_one::<String>("figure_id").ok().flatten() {
        config.set("figure", id)?;
    }
    Ok(config)
}

fn write_output(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| CliError::io(path.display().to_string(), e))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit(records: &[Record], config: &RunConfig) -> Result<()> {
    write_output(
        &records::encode(records, config.format)?,
        config.out.as_deref(),
    )
}

fn run_validate(config: &RunConfig) -> Result<()> {
    let tol = Tolerances {
        override_tol: config.tol,
    };
    let checks = validate::run_all(&tol);
    let failed = checks.iter().filter(|c| c.status == Status::Fail).count();
    let report = match config.format {
        Format::Json => {
            let list: Vec<_> = checks.iter().map(|c| c.to_json()).collect();
            let mut s = serde_json::to_string_pretty(&serde_json::json!({
                "checks": list,
                "failed": failed,
            }))
            .expect("report serializes");
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut s: String = checks.iter().map(|c| c.line() + "\n").collect();
            let warned = checks.iter().filter(|c| c.status == Status::Warn).count();
            s.push_str(&format!(
                "{} checks: {} failed, {} warnings\n",
                checks.len(),
                failed,
                warned
            ));
            s
        }
    };
    write_output(&report, config.out.as_deref())?;
    if failed > 0 {
        return Err(CliError::ValidationFailed(failed));
    }
    Ok(())
}

fn run(mode: &str, m: &ArgMatches) -> Result<()> {
    let config = load_config(mode, m)?;
    match mode {
        "qfi" => emit(&commands::cmd_qfi(&config)?, &config),
        "cfi" => emit(&commands::cmd_cfi(&config)?, &config),
        "sweep" => emit(&commands::cmd_sweep(&config)?, &config),
        "figure" => {
            let id = config.figure.as_deref().ok_or_else(|| {
                CliError::config(format!(
                    "figure needs an id: {}",
                    figures::FIGURES.join(", ")
                ))
            })?;
            let data = figures::generate(id, config.jobs)?;
            let [data_path, manifest] =
                figures::write(&data, config.out.as_deref(), config.format)?;
            eprintln!("wrote {} and {}", data_path.display(), manifest.display());
            Ok(())
        }
        "validate" => run_validate(&config),
        _ => unreachable!("clap restricts subcommands"),
    }
}

fn main() -> ExitCode {
    // Usage errors are configuration errors (exit 1), not clap's default 2.
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let (mode, sub) = matches.subcommand().expect("subcommand required");
    match run(mode, sub) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("spinmetro: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
