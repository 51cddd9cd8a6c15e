//! Command-line driver for splitgap: point commands, sweeps, fits and the
//! verification suite, with a content-addressed result cache.

pub mod args;
pub mod cache;
pub mod commands;
pub mod fit;
pub mod record;
pub mod sweep;
pub mod verify;

use std::fs::File;
use std::io::{BufRead, BufReader, Write};

use anyhow::Context;
use clap::Parser;
use serde_json::{json, Value};

use splitgap::scaling::FitModel;

use crate::args::{Cli, Command, GlobalOpts};
use crate::cache::Cache;
use crate::commands::{build_point, execute, UsageError};
use crate::record::{canonical, write_csv, RunRecord};
use crate::verify::{criterion, suite_criteria, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_COMPUTE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Parses `argv` (program name first), runs the command and returns the
/// exit status. Errors are reported on `stderr`: clap text for usage
/// errors, one JSON object for computation errors.
pub fn run<I, T>(argv: I, stdin: &mut dyn BufRead, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(stdout, "{text}");
                EXIT_OK
            };
        }
    };
    let command_name = command_name(&cli.command);
    match dispatch(cli, stdin, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            if let Some(u) = e.downcast_ref::<UsageError>() {
                let _ = writeln!(stderr, "error: {u}");
                return EXIT_USAGE;
            }
            let kind = e
                .downcast_ref::<splitgap::Error>()
                .map(error_kind)
                .unwrap_or("Runtime");
            let body = json!({
                "command": command_name,
                "error": {"kind": kind, "message": format!("{e:#}")},
            });
            let _ = writeln!(stderr, "{}", canonical(&body));
            EXIT_COMPUTE
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Ed(_) => "ed",
        Command::Toy(_) => "toy",
        Command::Rotor(_) => "rotor",
        Command::Instanton(_) => "instanton",
        Command::Hessian(_) => "hessian",
        Command::Fit(_) => "fit",
        Command::Sweep(_) => "sweep",
        Command::Verify(_) => "verify",
    }
}

pub fn error_kind(e: &splitgap::Error) -> &'static str {
    use splitgap::Error::*;
    match e {
        InvalidParams(_) => "InvalidParams",
        InvalidCoupling(_) => "InvalidCoupling",
        NonPositiveMass { .. } => "NonPositiveMass",
        DimensionMismatch { .. } => "DimensionMismatch",
        NotConverged { .. } => "NotConverged",
        TooLarge { .. } => "TooLarge",
        GridTooCoarse { .. } => "GridTooCoarse",
        FactorOutOfRange { .. } => "FactorOutOfRange",
        RootNotBracketed { .. } => "RootNotBracketed",
        RootNotFound(_) => "RootNotFound",
        QuadratureNotConverged(_) => "QuadratureNotConverged",
        DegenerateFit(_) => "DegenerateFit",
        Unsupported(_) => "Unsupported",
    }
}

fn cache_for(g: &GlobalOpts) -> Option<Cache> {
    if g.no_cache {
        None
    } else {
        Cache::from_flag_or_env(g.cache_dir.as_deref())
    }
}

/// JSON lines go to `--output` when given, else to stdout.
fn emit_lines(g: &GlobalOpts, lines: &[String], stdout: &mut dyn Write) -> anyhow::Result<()> {
    match &g.output {
        Some(path) => {
            let mut f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            for l in lines {
                writeln!(f, "{l}")?;
            }
        }
        None => {
            for l in lines {
                writeln!(stdout, "{l}")?;
            }
        }
    }
    Ok(())
}

fn emit_csv(g: &GlobalOpts, rows: &[Value]) -> anyhow::Result<()> {
    if let Some(path) = &g.csv {
        let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        write_csv(rows, f)?;
    }
    Ok(())
}

fn emit_records(g: &GlobalOpts, records: &[RunRecord], stdout: &mut dyn Write) -> anyhow::Result<()> {
    let lines: Vec<String> = records.iter().map(RunRecord::to_json_line).collect();
    emit_lines(g, &lines, stdout)?;
    let rows: Vec<Value> = records.iter().map(|r| serde_json::to_value(r).expect("records serialize")).collect();
    emit_csv(g, &rows)
}

fn dispatch(cli: Cli, stdin: &mut dyn BufRead, stdout: &mut dyn Write, stderr: &mut dyn Write) -> anyhow::Result<i32> {
    let name = command_name(&cli.command);
    let g = cli.global;
    let cache = cache_for(&g);
    match cli.command {
        Command::Ed(a) | Command::Toy(a) | Command::Rotor(a) | Command::Instanton(a) | Command::Hessian(a) => {
            let spec = build_point(name, &a)?;
            let out = execute(&spec, cache.as_ref())?;
            for n in &out.notes {
                writeln!(stderr, "{n}")?;
            }
            emit_records(&g, &[out.record], stdout)?;
            Ok(EXIT_OK)
        }
        Command::Sweep(s) => {
            let points = match &s.preset {
                Some(p) => sweep::preset(p)?,
                None => {
                    let axes = s
                        .axes
                        .iter()
                        .map(|a| sweep::parse_axis(a))
                        .collect::<Result<Vec<_>, _>>()?;
                    sweep::expand(&s.cmd, &s.base, &axes, s.max_points)?
                }
            };
            if points.len() > s.max_points {
                return Err(UsageError(format!("sweep has {} points, above --max-points {}", points.len(), s.max_points)).into());
            }
            writeln!(stderr, "sweep: {} points", points.len())?;
            let mut warned = std::collections::BTreeSet::new();
            let mut records = Vec::new();
            let mut failures = 0;
            for (spec, out) in points.iter().zip(sweep::run_points(&points, cache.as_ref(), g.jobs)) {
                match out {
                    Ok(o) => {
                        for n in o.notes {
                            if warned.insert(n.clone()) {
                                writeln!(stderr, "{n}")?;
                            }
                        }
                        records.push(o.record);
                    }
                    Err(e) => {
                        failures += 1;
                        let kind = e.downcast_ref::<splitgap::Error>().map(error_kind).unwrap_or("Runtime");
                        let body = json!({
                            "command": spec.command,
                            "inputs": spec.inputs,
                            "error": {"kind": kind, "message": format!("{e:#}")},
                        });
                        writeln!(stderr, "{}", canonical(&body))?;
                    }
                }
            }
            emit_records(&g, &records, stdout)?;
            Ok(if failures == 0 { EXIT_OK } else { EXIT_COMPUTE })
        }
        Command::Fit(f) => {
            let model: FitModel = f.model.parse().map_err(|e| UsageError(format!("{e}")))?;
            let reader: Box<dyn BufRead + '_> = match &f.input {
                Some(path) => Box::new(BufReader::new(
                    File::open(path).with_context(|| format!("opening {}", path.display()))?,
                )),
                None => Box::new(stdin),
            };
            let mut records = Vec::new();
            for (i, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let r: RunRecord =
                    serde_json::from_str(&line).with_context(|| format!("input line {} is not a record", i + 1))?;
                records.push(r);
            }
            let (fits, notes) = fit::fit_records(&records, model);
            for n in notes {
                writeln!(stderr, "warning: {n}")?;
            }
            if fits.is_empty() {
                anyhow::bail!("no series with at least 3 sizes to fit");
            }
            let lines: Vec<String> = fits
                .iter()
                .map(|f| canonical(&serde_json::to_value(f).expect("fits serialize")))
                .collect();
            emit_lines(&g, &lines, stdout)?;
            emit_csv(&g, &fit::plot_rows(&records, &fits))?;
            Ok(EXIT_OK)
        }
        Command::Verify(v) => {
            let criteria =
                suite_criteria(&v.suite).ok_or_else(|| UsageError(format!("unknown suite {:?}", v.suite)))?;
            let opts = VerifyOptions {
                beta: v.beta,
                nmax: v.nmax,
                cache,
                jobs: g.jobs,
            };
            let mut lines = Vec::new();
            let mut rows = Vec::new();
            let mut all_pass = true;
            for n in criteria {
                let o = criterion(n, &opts);
                writeln!(
                    stderr,
                    "{} {:>2} {} ({:.2} s)",
                    if o.pass { "PASS" } else { "FAIL" },
                    o.criterion,
                    o.name,
                    o.elapsed_s
                )?;
                all_pass &= o.pass;
                let value = serde_json::to_value(&o)?;
                lines.push(canonical(&value));
                rows.push(value);
            }
            emit_lines(&g, &lines, stdout)?;
            emit_csv(&g, &rows)?;
            Ok(if all_pass { EXIT_OK } else { EXIT_COMPUTE })
        }
    }
}
