//! Command-line front end. `run` parses flags, computes and writes the
//! result; it returns the process exit code.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use crate::bandtree::{build_generating_tree_with, tree_to_csv, TreeExport, TreeOptions};
use crate::contfrac::{cf_statistics, cf_value, convergents, CFExpansion};
use crate::dos::{compare_with, dos_from_bands, dos_from_tree, level_intervals, DOSApprox};
use crate::error::{Error, Result};
use crate::holder::{corollary_asymptotics, dichotomy_check, holder_report, HolderReport};
use crate::schrodinger::{potential, ModelParams, DEFAULT_PRECISION};
use crate::suite::{verify_all, SuiteOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_COMPUTATION: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "qspec", version, about = "Spectra of Sturmian Schrödinger operators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Convergents and coefficient statistics.
    Cf(CfArgs),
    /// V(1..n).
    Potential(PotentialArgs),
    /// Build and export the generating band tree.
    Bands(BandsArgs),
    /// Band-count DOS, its tree construction and eigenvalue counts.
    Dos(DosArgs),
    /// Hölder exponents: theorem values, γ_k and measured exponents.
    Holder(HolderArgs),
    /// Geometric or super-geometric decay of band lengths.
    Dichotomy(ModelArgs),
    /// Run every invariant check; nonzero exit on any failure.
    Verify(ModelArgs),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Args, Debug)]
pub struct Output {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CfArgs {
    #[arg(long)]
    pub cf: String,
    /// Number of convergents.
    #[arg(long, default_value_t = 10)]
    pub depth: usize,
    #[arg(long, default_value_t = DEFAULT_PRECISION)]
    pub precision: u32,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Debug)]
pub struct PotentialArgs {
    #[arg(long)]
    pub cf: String,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long)]
    pub n: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Debug)]
pub struct ModelArgs {
    #[arg(long)]
    pub cf: String,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long)]
    pub depth: usize,
    #[arg(long, default_value_t = DEFAULT_PRECISION)]
    pub precision: u32,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Debug)]
pub struct BandsArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Expand only this many of the shortest bands of each type per level.
    #[arg(long)]
    pub beam: Option<usize>,
}

#[derive(Args, Debug)]
pub struct DosArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Size of H_n for the eigenvalue counts (default q_{depth+2}).
    #[arg(long)]
    pub n: Option<u64>,
    /// Test interval lo:hi; repeatable. Defaults to the bands of 𝓖_{depth−2}.
    #[arg(long = "interval", value_parser = parse_interval, allow_hyphen_values = true)]
    pub intervals: Vec<(f64, f64)>,
}

#[derive(Args, Debug)]
pub struct HolderArgs {
    #[arg(long)]
    pub cf: String,
    #[arg(long, required_unless_present = "lambdas")]
    pub lambda: Option<f64>,
    /// Comma-separated λ sweep.
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Vec<f64>,
    #[arg(long)]
    pub depth: usize,
    #[arg(long, default_value_t = DEFAULT_PRECISION)]
    pub precision: u32,
    #[command(flatten)]
    pub output: Output,
}

fn parse_interval(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected lo:hi, got {s:?}"))?;
    let lo: f64 = a.trim().parse().map_err(|_| format!("bad number {a:?}"))?;
    let hi: f64 = b.trim().parse().map_err(|_| format!("bad number {b:?}"))?;
    if !(lo <= hi) {
        return Err(format!("empty interval {s:?}"));
    }
    Ok((lo, hi))
}

fn params(cf: &str, lambda: f64, precision: u32) -> Result<ModelParams> {
    ModelParams::with_precision(cf.parse::<CFExpansion>()?, lambda, precision)
}

/// Every non-integer number becomes its shortest round-trip decimal string.
pub fn stringify_reals(v: Value) -> Value {
    match v {
        Value::Number(n) if !(n.is_i64() || n.is_u64()) => Value::String(n.as_f64().map_or_else(|| n.to_string(), |x| x.to_string())),
        Value::Array(a) => Value::Array(a.into_iter().map(stringify_reals).collect()),
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, v)| (k, stringify_reals(v))).collect()),
        other => other,
    }
}

fn json<T: Serialize>(x: &T) -> Result<String> {
    let v = stringify_reals(serde_json::to_value(x)?);
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

fn csv_rows<I, R>(header: &[&str], rows: I) -> Result<String>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).expect("csv is utf-8"))
}

fn emit(out: &Output, text: &str) -> Result<()> {
    match &out.out {
        Some(p) => std::fs::write(p, text)?,
        None => {
            let mut s = std::io::stdout().lock();
            s.write_all(text.as_bytes())?;
            s.flush()?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct ConvergentRow {
    k: usize,
    a: u64,
    p: String,
    q: String,
}

#[derive(Serialize)]
struct CfOut {
    cf: String,
    beta: String,
    geometric_mean: f64,
    arithmetic_mean: f64,
    convergents: Vec<ConvergentRow>,
}

fn cmd_cf(a: &CfArgs) -> Result<()> {
    let cf: CFExpansion = a.cf.parse()?;
    let depth = cf.len().map_or(a.depth, |n| n.min(a.depth));
    if depth == 0 {
        return Err(Error::InvalidArgument("depth must be at least 1".into()));
    }
    let cv = convergents(&cf, depth)?;
    let coeffs = cf.prefix(depth)?;
    let (geo, arith) = cf_statistics(&cf, depth)?;
    let rows: Vec<ConvergentRow> = cv.iter().zip(&coeffs).map(|(c, &a)| ConvergentRow { k: c.k, a, p: c.p.to_string(), q: c.q.to_string() }).collect();
    let text = match a.output.format {
        Format::Json => json(&CfOut {
            cf: cf.to_string(),
            beta: crate::bandtree::decimal(&cf_value(&cf, a.precision)?),
            geometric_mean: geo,
            arithmetic_mean: arith,
            convergents: rows,
        })?,
        Format::Csv => csv_rows(&["k", "a_k", "p_k", "q_k"], rows.into_iter().map(|r| [r.k.to_string(), r.a.to_string(), r.p, r.q]))?,
    };
    emit(&a.output, &text)
}

fn cmd_potential(a: &PotentialArgs) -> Result<()> {
    if a.n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let p = params(&a.cf, a.lambda, DEFAULT_PRECISION)?;
    let v = potential(&p, 1, a.n)?;
    let text = match a.output.format {
        Format::Json => json(&serde_json::json!({ "cf": p.cf.to_string(), "lambda": p.lambda, "n": a.n, "values": v }))?,
        Format::Csv => csv_rows(&["n", "V"], v.iter().enumerate().map(|(i, x)| [(i + 1).to_string(), x.to_string()]))?,
    };
    emit(&a.output, &text)
}

fn cmd_bands(a: &BandsArgs) -> Result<()> {
    let m = &a.model;
    let p = params(&m.cf, m.lambda, m.precision)?;
    let tree = build_generating_tree_with(&p, m.depth, &TreeOptions { beam: a.beam, ..TreeOptions::default() })?;
    let text = match m.output.format {
        Format::Json => json(&TreeExport::new(&tree))?,
        Format::Csv => tree_to_csv(&tree)?,
    };
    emit(&m.output, &text)
}

#[derive(Serialize)]
struct MassRow {
    lo: f64,
    hi: f64,
    mass: f64,
}

#[derive(Serialize)]
struct DosOut {
    cf: String,
    lambda: f64,
    level: usize,
    q: u64,
    bands: Vec<MassRow>,
    /// Largest endpoint gap between the tree and full-line constructions.
    construction_gap: f64,
    comparison: crate::dos::DosComparison,
}

fn cmd_dos(a: &DosArgs) -> Result<()> {
    let m = &a.model;
    let p = params(&m.cf, m.lambda, m.precision)?;
    let k = m.depth;
    if k == 0 {
        return Err(Error::InvalidArgument("depth must be at least 1".into()));
    }
    let tree = build_generating_tree_with(&p, k, &TreeOptions::default())?;
    let from_tree = dos_from_tree(&tree, k)?;
    let from_bands = dos_from_bands(&p, k)?;
    let gap = from_tree.bands.iter().zip(&from_bands.bands).map(|(x, y)| (x.0 - y.0).abs().max((x.1 - y.1).abs())).fold(0.0, f64::max);
    let intervals = if a.intervals.is_empty() { level_intervals(&tree, k.saturating_sub(2).max(1)) } else { a.intervals.clone() };
    let comparison = match a.n {
        Some(0) => return Err(Error::InvalidArgument("n must be at least 1".into())),
        Some(n) => crate::dos::compare_with_n(&p, &from_bands, &intervals, n)?,
        None => compare_with(&p, &from_bands, &intervals)?,
    };
    let text = match m.output.format {
        Format::Json => json(&DosOut {
            cf: p.cf.to_string(),
            lambda: p.lambda,
            level: k,
            q: from_bands.q,
            bands: masses(&from_bands),
            construction_gap: gap,
            comparison,
        })?,
        Format::Csv => csv_rows(&["x", "N"], from_bands.step_points().into_iter().map(|(x, n)| [x.to_string(), n.to_string()]))?,
    };
    emit(&m.output, &text)
}

fn masses(d: &DOSApprox) -> Vec<MassRow> {
    d.bands.iter().map(|&(lo, hi)| MassRow { lo, hi, mass: d.weight() }).collect()
}

#[derive(Serialize)]
struct HolderSweep {
    reports: Vec<HolderReport>,
    corollary: Option<crate::holder::CorollaryTable>,
}

fn cmd_holder(a: &HolderArgs) -> Result<()> {
    let mut lambdas: Vec<f64> = a.lambda.into_iter().collect();
    lambdas.extend(&a.lambdas);
    let cf: CFExpansion = a.cf.parse()?;
    for &l in &lambdas {
        crate::schrodinger::ModelParams::with_precision(cf.clone(), l, a.precision)?.require_theorem_regime()?;
    }
    let reports = lambdas.iter().map(|&l| holder_report(&ModelParams::with_precision(cf.clone(), l, a.precision)?, a.depth)).collect::<Result<Vec<_>>>()?;
    let text = match a.output.format {
        Format::Json if reports.len() == 1 && a.lambdas.is_empty() => json(&reports[0])?,
        Format::Json => {
            let corollary = cf.constant_value().map(|b| corollary_asymptotics(b, &lambdas)).transpose()?;
            json(&HolderSweep { reports, corollary })?
        }
        Format::Csv => csv_rows(
            &["lambda", "level", "index", "kind", "length", "mass", "exponent"],
            reports.iter().flat_map(|r| {
                r.bands.iter().map(move |b| [r.lambda.to_string(), b.level.to_string(), b.index.to_string(), b.kind.to_string(), b.length.to_string(), b.mass.to_string(), b.exponent.to_string()])
            }),
        )?,
    };
    emit(&a.output, &text)
}

fn cmd_dichotomy(m: &ModelArgs) -> Result<()> {
    let cf: CFExpansion = m.cf.parse()?;
    ModelParams::with_precision(cf.clone(), m.lambda, m.precision)?;
    let r = dichotomy_check(&cf, m.lambda, m.depth)?;
    let text = match m.output.format {
        Format::Json => json(&r)?,
        Format::Csv => csv_rows(
            &["level", "log_min_length", "gamma_k"],
            r.log_min_lengths.iter().enumerate().map(|(i, l)| [(i + 1).to_string(), l.to_string(), r.gamma_k_seq.get(i).map_or(String::new(), f64::to_string)]),
        )?,
    };
    emit(&m.output, &text)
}

/// Returns whether every required check passed.
fn cmd_verify(m: &ModelArgs) -> Result<bool> {
    let p = params(&m.cf, m.lambda, m.precision)?;
    if m.depth == 0 {
        return Err(Error::InvalidArgument("depth must be at least 1".into()));
    }
    let report = verify_all(&p, m.depth, &SuiteOptions::default())?;
    let text = match m.output.format {
        Format::Json => json(&report)?,
        Format::Csv => csv_rows(
            &["check", "required", "passed", "detail"],
            report.checks.iter().map(|c| [c.name.clone(), c.required.to_string(), c.passed.to_string(), c.detail.clone()]),
        )?,
    };
    emit(&m.output, &text)?;
    for c in report.failures() {
        eprintln!("FAILED {}: {}", c.name, c.detail);
    }
    Ok(report.all_passed())
}

fn exit_for(e: &Error) -> i32 {
    if e.is_computational() {
        EXIT_COMPUTATION
    } else {
        EXIT_INVALID
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Cf(a) => cmd_cf(a).map(|_| true),
        Command::Potential(a) => cmd_potential(a).map(|_| true),
        Command::Bands(a) => cmd_bands(a).map(|_| true),
        Command::Dos(a) => cmd_dos(a).map(|_| true),
        Command::Holder(a) => cmd_holder(a).map(|_| true),
        Command::Dichotomy(a) => cmd_dichotomy(a).map(|_| true),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_COMPUTATION,
        Err(e) => {
            eprintln!("error: {e}");
            exit_for(&e)
        }
    }
}
