//! `einflow` command-line driver: config resolution, dispatch, and report emission.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Arg, ArgMatches};

use crate::commands::Context;
use crate::config::{parse_file, Command, Config};
use crate::error::{CliError, CliResult, EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION};
use crate::report::{hash_file, OutputDir, Report, RunManifest, Status, TOOL_VERSION};

fn command_line() -> clap::Command {
    let mut root = clap::Command::new("einflow")
        .version(TOOL_VERSION)
        .about("Entropy and Ricci-flow experiments on grid tori and model spaces")
        .subcommand_required(true)
        .arg(Arg::new("config").long("config").value_name("FILE").global(true).help("flat key = value config file"))
        .arg(Arg::new("out").long("out").value_name("DIR").global(true).help("output directory [default: einflow-out]"));
    for c in Command::ALL {
        let mut sub = clap::Command::new(c.name()).about(c.about());
        for k in c.keys() {
            let help = match k.default {
                Some(d) => format!("{} [default: {d}]", k.doc),
                None => format!("{} [required]", k.doc),
            };
            sub = sub.arg(Arg::new(k.name).long(k.name).value_name("VALUE").allow_negative_numbers(true).help(help));
        }
        root = root.subcommand(sub);
    }
    root.subcommand(
        clap::Command::new("rerun")
            .about("Repeat a run from its manifest.json or report.json")
            .arg(Arg::new("manifest").required(true).value_name("MANIFEST")),
    )
}

/// Result of a completed dispatch.
pub struct RunOutput {
    pub exit_code: i32,
    pub report: Option<Report>,
    pub out_dir: Option<PathBuf>,
}

fn resolve(matches: &ArgMatches) -> CliResult<(Config, Option<RunManifest>)> {
    let (name, sub) = matches.subcommand().ok_or_else(|| CliError::Usage("no command given".into()))?;
    if name == "rerun" {
        let path = PathBuf::from(sub.get_one::<String>("manifest").expect("required"));
        let manifest = RunManifest::load(&path)?;
        let command = Command::from_name(&manifest.command)?;
        let flags: Vec<(String, String)> = manifest.config.clone().into_iter().collect();
        return Ok((Config::resolve(command, &[], &flags)?, Some(manifest)));
    }
    let command = Command::from_name(name)?;
    let file = match matches.get_one::<String>("config") {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Io(format!("{p}: {e}")))?;
            parse_file(&text)?
        }
        None => Vec::new(),
    };
    let flags: Vec<(String, String)> = command
        .keys()
        .iter()
        .filter_map(|k| sub.get_one::<String>(k.name).map(|v| (k.name.to_string(), v.clone())))
        .collect();
    Ok((Config::resolve(command, &file, &flags)?, None))
}

/// Runs one invocation, writing messages to the given streams.
pub fn run_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> RunOutput
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let fail = |code| RunOutput { exit_code: code, report: None, out_dir: None };
    let matches = match command_line().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand | ErrorKind::MissingSubcommand => EXIT_VALIDATION,
                ErrorKind::InvalidSubcommand => {
                    let name = e.get(clap::error::ContextKind::InvalidSubcommand).map(|v| v.to_string()).unwrap_or_default();
                    let _ = writeln!(stderr, "error: {}", CliError::UnknownCommand(name));
                    return fail(EXIT_VALIDATION);
                }
                _ => EXIT_VALIDATION,
            };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { write!(stdout, "{text}") } else { write!(stderr, "{text}") };
            return fail(code);
        }
    };
    let out_dir = PathBuf::from(matches.get_one::<String>("out").map(String::as_str).unwrap_or("einflow-out"));
    let (cfg, replay) = match resolve(&matches) {
        Ok(v) => v,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return fail(e.exit_code());
        }
    };
    let out = match OutputDir::create(&out_dir) {
        Ok(o) => o,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return fail(e.exit_code());
        }
    };
    let mut ctx = Context { cfg, out, inputs: Default::default() };
    let outcome = commands::execute(&mut ctx);
    if let Some(m) = &replay {
        if let Err(e) = check_inputs(m, &ctx) {
            let _ = writeln!(stderr, "error: {e}");
            return fail(e.exit_code());
        }
    }
    let manifest = RunManifest::new(ctx.cfg.command, ctx.cfg.resolved(), ctx.inputs.clone());
    let (status, message, result, summary, code) = match outcome {
        Ok(o) => {
            let code = if o.status == Status::Ok { EXIT_OK } else { EXIT_NUMERICAL };
            (o.status, o.message, o.result, Some(o.summary), code)
        }
        Err(e) if e.exit_code() == EXIT_VALIDATION => {
            let _ = writeln!(stderr, "error: {e}");
            return fail(EXIT_VALIDATION);
        }
        Err(e) => (Status::NumericalFailure, Some(e.to_string()), serde_json::Value::Null, None, EXIT_NUMERICAL),
    };
    let report = match ctx.out.finish(manifest, status, message.clone(), result) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return fail(EXIT_NUMERICAL);
        }
    };
    if let Some(s) = summary {
        let _ = writeln!(stdout, "{s}");
    }
    if let Some(m) = message {
        let _ = writeln!(stderr, "{}: {m}", if status == Status::CheckFailed { "check failed" } else { "error" });
    }
    let _ = writeln!(stdout, "report: {}", out_dir.join("report.json").display());
    RunOutput { exit_code: code, report: Some(report), out_dir: Some(out_dir) }
}

fn check_inputs(manifest: &RunManifest, ctx: &Context) -> CliResult<()> {
    for (key, hash) in &manifest.input_hashes {
        let now = match ctx.inputs.get(key) {
            Some(h) => h.clone(),
            None => hash_file(std::path::Path::new(ctx.cfg.raw(key)))?,
        };
        if &now != hash {
            return Err(CliError::Usage(format!("input `{key}` differs from the manifest (sha256 {now}, recorded {hash})")));
        }
    }
    Ok(())
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut std::io::stdout(), &mut std::io::stderr()).exit_code
}
