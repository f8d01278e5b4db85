//! `fraclab`: batch runner for the fraclab numerical laboratory.

mod commands;
mod config;
mod keys;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Command};

use crate::config::Params;
use crate::keys::{about, section_keys, Key, COMMON, SUBCOMMANDS};

const AFTER_HELP: &str = "\
Every key can be given as a flag (--key value) or in a config file passed
with --config: flat `key = value` lines under [common] or [<subcommand>]
headers, `#` comments. Flags override the file; unknown keys are errors.

Outputs go to <out>/<name>.{csv,json,gp,txt}; each embeds the tool version
and the SHA-256 of the resolved configuration. Results do not depend on
--workers.

Exit status: 0 success, 1 failed criterion (verify-all), 2 invalid usage or
configuration, 3 numeric failure, 4 i/o error.";

fn key_arg(k: &Key) -> Arg {
    let mut help = k.help.to_string();
    if let Some(d) = k.default {
        help.push_str(&format!(" [default: {d}]"));
    }
    Arg::new(k.name)
        .long(k.name)
        .value_name("VALUE")
        .action(ArgAction::Set)
        .allow_hyphen_values(true)
        .help(help)
}

fn cli() -> Command {
    let mut cmd = Command::new("fraclab")
        .version(output::VERSION)
        .about("Monte Carlo laboratory for weighted fractional integrals of Gaussian processes")
        .arg_required_else_help(true)
        .subcommand_required(true)
        .after_help(AFTER_HELP);
    for sub in SUBCOMMANDS {
        let mut s = Command::new(sub)
            .about(about(sub))
            .after_help(AFTER_HELP)
            .arg(
                Arg::new("config")
                    .long("config")
                    .value_name("FILE")
                    .value_parser(clap::value_parser!(PathBuf))
                    .help("key = value configuration file"),
            );
        for k in COMMON.iter().chain(section_keys(sub)) {
            s = s.arg(key_arg(k));
        }
        cmd = cmd.subcommand(s);
    }
    cmd
}

fn flags(sub: &str, m: &ArgMatches) -> Vec<(String, String)> {
    COMMON
        .iter()
        .chain(section_keys(sub))
        .filter_map(|k| {
            m.get_one::<String>(k.name)
                .map(|v| (k.name.to_string(), v.clone()))
        })
        .collect()
}

fn main() -> ExitCode {
    let matches = cli().get_matches();
    let Some((sub, m)) = matches.subcommand() else {
        return ExitCode::from(2);
    };
    let file = m.get_one::<PathBuf>("config");
    let entries = match file.map(|p| config::load(p)).transpose() {
        Ok(e) => e.unwrap_or_default(),
        Err(e) => {
            eprintln!("fraclab: invalid configuration: {e}");
            return ExitCode::from(2);
        }
    };
    let params = Params::resolve(sub, &entries, file.map(PathBuf::as_path), &flags(sub, m));
    match commands::run(&params) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fraclab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
