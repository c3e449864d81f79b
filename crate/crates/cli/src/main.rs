//! `banddensity` command-line front end.

mod sweep;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use banddensity::classify::{classify_lw, classify_penta, mu_lw, mu_penta, recip_a, ClassifyError, ClassifyOptions, Verdict};
use banddensity::export::{build_witness, verify_export, ConstructionChoice, ExportError, WitnessExport, WitnessRequest};
use banddensity::family::{builtin_family, CoefficientFamily, FamilyError, FamilyKind};
use banddensity::scalar::{Mode, Rational, Scalar};
use banddensity::systems::BandSystem;
use banddensity::verify::Report;
use banddensity::xi::{xi_closed, xi_definitional, SparseOperator, XiError};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Export(#[from] ExportError),
    #[error(transparent)]
    Xi(#[from] XiError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Usage(String),
    #[error("sweep: {0}")]
    Sweep(String),
}

#[derive(Parser, Debug)]
#[command(name = "banddensity", version, about = "Density of band-diagonal biorthogonal systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decide density properties of a family.
    Classify(ClassifyArgs),
    /// Build an annihilating witness, verify it, and export it.
    Witness(WitnessArgs),
    /// Re-verify an exported witness.
    Verify(VerifyArgs),
    /// Dump the Ξ-sequence of an operator two ways.
    Xi(XiArgs),
    /// Dump the criterion sequence of a family.
    Mu(MuArgs),
    /// Classify every family of a parameter grid.
    Sweep(SweepArgs),
}

#[derive(Args, Debug, Clone, Default)]
struct FamilyArgs {
    /// Built-in family name.
    #[arg(long)]
    builtin: Option<String>,
    /// Tridiagonal family: expression for a_n.
    #[arg(long, conflicts_with = "builtin")]
    lw: Option<String>,
    /// Pentadiagonal family: expression for a_n.
    #[arg(long = "penta-a", conflicts_with_all = ["builtin", "lw"])]
    penta_a: Option<String>,
    #[arg(long = "penta-b")]
    penta_b: Option<String>,
    #[arg(long = "penta-c")]
    penta_c: Option<String>,
    /// Optional; defaults to a_n b_n - c_n.
    #[arg(long = "penta-d")]
    penta_d: Option<String>,
}

impl FamilyArgs {
    fn build(&self) -> Result<CoefficientFamily, CliError> {
        if let Some(name) = &self.builtin {
            return Ok(builtin_family(name)?);
        }
        if let Some(a) = &self.lw {
            return Ok(CoefficientFamily::lw(a)?);
        }
        match (&self.penta_a, &self.penta_b, &self.penta_c) {
            (Some(a), Some(b), Some(c)) => Ok(CoefficientFamily::penta(a, b, c, self.penta_d.as_deref())?),
            (None, None, None) if self.penta_d.is_none() => Err(CliError::Usage(
                "no family given: use --builtin, --lw, or --penta-a/--penta-b/--penta-c".into(),
            )),
            _ => Err(CliError::Usage("a pentadiagonal family needs --penta-a, --penta-b and --penta-c".into())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Clone)]
struct OutputArgs {
    /// Write to this file instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args, Debug)]
struct ClassifyArgs {
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ConstructionArg {
    Annihilator,
    Planar,
}

#[derive(Args, Debug)]
struct WitnessArgs {
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Window (tridiagonal) or number of four-index blocks (pentadiagonal).
    #[arg(long = "N", default_value_t = 100)]
    n: usize,
    #[arg(long, default_value = "float")]
    mode: Mode,
    /// Overrides the construction chosen from k.
    #[arg(long, value_enum)]
    construction: Option<ConstructionArg>,
    #[arg(long)]
    tolerance: Option<f64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Witness export written by `witness`.
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OperatorArg {
    Witness,
    Random,
}

#[derive(Args, Debug)]
struct XiArgs {
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long, value_enum, default_value = "witness")]
    operator: OperatorArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Witness size as in `witness`, or the support window of a random operator.
    #[arg(long = "N", default_value_t = 20)]
    n: usize,
    #[arg(long, default_value = "rational")]
    mode: Mode,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct MuArgs {
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long = "N", default_value_t = 100)]
    n: usize,
    #[arg(long, default_value = "float")]
    mode: Mode,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// JSON sweep description.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text).map_err(|source| CliError::Io { path: path.display().to_string(), source }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|source| CliError::Io { path: "<stdout>".into(), source })
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

fn csv_text<F>(header: &[&str], fill: F) -> Result<String, CliError>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<(), csv::Error>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    fill(&mut w)?;
    let bytes = w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn verdict_row(label: &str, v: &Verdict) -> Vec<String> {
    let ev = v.evidence.as_ref();
    vec![
        label.to_string(),
        json_word(&v.property),
        json_word(&v.answer),
        json_word(&v.basis),
        ev.map_or(String::new(), |e| e.partial_sum.format()),
        ev.map_or(String::new(), |e| e.horizon.to_string()),
        ev.and_then(|e| e.slope).map_or(String::new(), |s| s.format()),
    ]
}

/// Serialized form of a unit enum variant, without quotes.
pub(crate) fn json_word<T: Serialize>(value: &T) -> String {
    match serde_json::to_value(value) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => String::new(),
    }
}

pub(crate) fn classify_family(family: &CoefficientFamily, k: usize, opts: &ClassifyOptions) -> Result<Verdict, CliError> {
    Ok(match family.kind() {
        FamilyKind::Lw => classify_lw(family, k, opts)?,
        FamilyKind::Penta => classify_penta(family, opts)?,
    })
}

fn cmd_classify(args: &ClassifyArgs) -> Result<u8, CliError> {
    if args.k == 0 {
        return Err(CliError::Usage("--k must be at least 1".into()));
    }
    let family = args.family.build()?;
    let verdict = classify_family(&family, args.k, &ClassifyOptions::from_env())?;
    let text = match args.output.format {
        Format::Json => {
            #[derive(Serialize)]
            struct Out<'a> {
                family_label: &'a str,
                kind: FamilyKind,
                k: usize,
                verdict: &'a Verdict,
            }
            to_json(&Out { family_label: family.label(), kind: family.kind(), k: args.k, verdict: &verdict })?
        }
        Format::Csv => csv_text(
            &["label", "property", "answer", "basis", "partial_sum", "horizon", "slope"],
            |w| w.write_record(verdict_row(family.label(), &verdict)),
        )?,
    };
    emit(args.output.out.as_deref(), &text)?;
    Ok(0)
}

fn report_csv(report: &Report) -> Result<String, CliError> {
    csv_text(&["name", "status", "worst_value", "location"], |w| {
        for c in &report.checks {
            w.write_record([
                c.name.as_str(),
                &json_word(&c.status),
                &c.worst_value,
                c.location.as_deref().unwrap_or(""),
            ])?;
        }
        Ok(())
    })
}

fn exit_for(report: &Report) -> u8 {
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if report.passed() {
        0
    } else {
        if let Some(c) = report.first_failure() {
            eprintln!("verification failed: {} at {}", c.name, c.location.as_deref().unwrap_or("?"));
        }
        1
    }
}

fn witness_request(k: usize, n: usize, mode: Mode, construction: Option<ConstructionArg>) -> WitnessRequest {
    let mut req = WitnessRequest::new(k, n, mode);
    req.construction = construction.map(|c| match c {
        ConstructionArg::Annihilator => ConstructionChoice::Annihilator,
        ConstructionArg::Planar => ConstructionChoice::Planar,
    });
    req
}

fn cmd_witness(args: &WitnessArgs) -> Result<u8, CliError> {
    let family = args.family.build()?;
    let mut req = witness_request(args.k, args.n, args.mode, args.construction);
    req.tolerance = args.tolerance;
    let (export, report) = build_witness(&family, &req)?;
    let text = match args.output.format {
        Format::Json => to_json(&export)?,
        Format::Csv => report_csv(&report)?,
    };
    emit(args.output.out.as_deref(), &text)?;
    Ok(exit_for(&report))
}

fn cmd_verify(args: &VerifyArgs) -> Result<u8, CliError> {
    let text = fs::read_to_string(&args.input)
        .map_err(|source| CliError::Io { path: args.input.display().to_string(), source })?;
    let export: WitnessExport = serde_json::from_str(&text)?;
    let report = verify_export(&export)?;
    let text = match args.output.format {
        Format::Json => to_json(&report)?,
        Format::Csv => report_csv(&report)?,
    };
    emit(args.output.out.as_deref(), &text)?;
    Ok(exit_for(&report))
}

/// Sparse operator with about three entries per row, values `p/q` with
/// `|p| <= 20`, `1 <= q <= 5`, supported in `[0, window]²`.
fn random_operator<S: Scalar>(window: usize, seed: u64) -> SparseOperator<S> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut op = SparseOperator::new();
    for _ in 0..3 * (window + 1) {
        let i = rng.gen_range(0..=window);
        let j = rng.gen_range(0..=window);
        let value = Rational::new(BigInt::from(rng.gen_range(-20i64..=20)), BigInt::from(rng.gen_range(1i64..=5)));
        op.set(i, j, S::from_rational(&value));
    }
    op
}

fn witness_operator<S: Scalar>(family: &CoefficientFamily, args: &XiArgs) -> Result<(SparseOperator<S>, usize), CliError> {
    let (export, _) = build_witness(family, &witness_request(args.k, args.n, S::MODE, None))?;
    let mut op = SparseOperator::new();
    for (i, j, text) in &export.operator_entries {
        let value = S::parse_scalar(text).ok_or_else(|| CliError::Usage(format!("bad exported value {text}")))?;
        op.set(*i, *j, value);
    }
    Ok((op, export.window))
}

/// Rows `n, definitional, closed, |difference|` and whether any row differs.
fn xi_rows<S: Scalar>(family: &CoefficientFamily, args: &XiArgs) -> Result<(Vec<[String; 4]>, bool), CliError> {
    let (op, window) = match args.operator {
        OperatorArg::Witness => witness_operator::<S>(family, args)?,
        OperatorArg::Random => (random_operator::<S>(args.n, args.seed), args.n),
    };
    let system = BandSystem::new(family.clone())?;
    let last = window
        .checked_sub(system.bandwidth())
        .ok_or_else(|| CliError::Usage("window is narrower than the band".into()))?;
    let def = xi_definitional(&op, &system, last)?;
    let closed = xi_closed(&op, &system, last)?;
    let mismatch = def.values != closed.values;
    let rows = def
        .values
        .iter()
        .zip(&closed.values)
        .enumerate()
        .map(|(n, (x, y))| {
            let diff = num_traits::Signed::abs(&(x - y));
            [
                n.to_string(),
                S::from_rational(x).format(),
                S::from_rational(y).format(),
                S::from_rational(&diff).format(),
            ]
        })
        .collect();
    Ok((rows, mismatch))
}

fn cmd_xi(args: &XiArgs) -> Result<u8, CliError> {
    let family = args.family.build()?;
    let (rows, mismatch) = match args.mode {
        Mode::Float => xi_rows::<f64>(&family, args)?,
        Mode::Rational => xi_rows::<Rational>(&family, args)?,
    };
    let header = ["n", "xi_definitional", "xi_closed", "abs_diff"];
    let text = match args.output.format {
        Format::Csv => csv_text(&header, |w| rows.iter().try_for_each(|r| w.write_record(r)))?,
        Format::Json => {
            let objects: Vec<serde_json::Value> = rows
                .iter()
                .map(|r| serde_json::json!({"n": r[0].parse::<usize>().unwrap_or(0), "xi_definitional": r[1], "xi_closed": r[2], "abs_diff": r[3]}))
                .collect();
            to_json(&objects)?
        }
    };
    emit(args.output.out.as_deref(), &text)?;
    Ok(if mismatch { 1 } else { 0 })
}

fn mu_rows<S: Scalar>(family: &CoefficientFamily, k: usize, n: usize) -> Result<Vec<Vec<String>>, CliError> {
    Ok(match family.kind() {
        FamilyKind::Lw => {
            let seq = if k == 1 { mu_lw::<S>(family, n)? } else { recip_a::<S>(family, n)? };
            seq.values.iter().enumerate().map(|(i, v)| vec![i.to_string(), v.format(), String::new()]).collect()
        }
        FamilyKind::Penta => {
            let seq = mu_penta::<S>(family, n)?;
            seq.values
                .iter()
                .zip(&seq.cases)
                .enumerate()
                .map(|(i, (v, c))| {
                    vec![
                        i.to_string(),
                        v.as_ref().map_or("inf".to_string(), Scalar::format),
                        c.map_or(String::new(), |c| json_word(&c)),
                    ]
                })
                .collect()
        }
    })
}

fn cmd_mu(args: &MuArgs) -> Result<u8, CliError> {
    if args.k == 0 {
        return Err(CliError::Usage("--k must be at least 1".into()));
    }
    let family = args.family.build()?;
    let rows = match args.mode {
        Mode::Float => mu_rows::<f64>(&family, args.k, args.n)?,
        Mode::Rational => mu_rows::<Rational>(&family, args.k, args.n)?,
    };
    let text = match args.output.format {
        Format::Csv => csv_text(&["n", "mu", "case"], |w| rows.iter().try_for_each(|r| w.write_record(r)))?,
        Format::Json => {
            let objects: Vec<serde_json::Value> = rows
                .iter()
                .map(|r| serde_json::json!({"n": r[0].parse::<usize>().unwrap_or(0), "mu": r[1], "case": r[2]}))
                .collect();
            to_json(&objects)?
        }
    };
    emit(args.output.out.as_deref(), &text)?;
    Ok(0)
}

fn cmd_sweep(args: &SweepArgs) -> Result<u8, CliError> {
    let text = fs::read_to_string(&args.config)
        .map_err(|source| CliError::Io { path: args.config.display().to_string(), source })?;
    let config: sweep::SweepConfig = serde_json::from_str(&text)?;
    let rows = sweep::run(&config)?;
    let text = match args.format {
        Format::Csv => sweep::to_csv(&rows)?,
        Format::Json => to_json(&rows)?,
    };
    emit(args.out.as_deref(), &text)?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Classify(a) => cmd_classify(a),
        Command::Witness(a) => cmd_witness(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Xi(a) => cmd_xi(a),
        Command::Mu(a) => cmd_mu(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
