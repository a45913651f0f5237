use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use microagg_bench::{emit_report, run_sweep, ReportFormat, SweepSpec};
use microagg_core::dataset::{column_stats, load_table_with, write_table, CodeMaps, ReadOptions};
use microagg_core::metrics::{evaluate, k_anonymity_check, EvaluationReport};
use microagg_core::{
    anonymize, AnonymizationConfig, AttributeSchema, Error, Method, Microdata, NormalizeMode, Role,
};

#[derive(Parser, Debug)]
#[command(
    name = "microagg",
    version,
    about = "Microaggregation-based k-anonymity for numeric microdata"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Mask a table and write the anonymized CSV
    Anonymize(AnonymizeArgs),
    /// Score a masked table against its original
    Evaluate(EvaluateArgs),
    /// Run a k-sweep described by a JSON spec file
    Sweep(SweepArgs),
    /// Print the shape and column statistics of a table
    Inspect(InspectArgs),
}

#[derive(Args, Debug)]
struct InputArgs {
    /// CSV file with a header row
    #[arg(long)]
    input: PathBuf,
    /// JSON attribute schema
    #[arg(long)]
    schema: PathBuf,
    /// Factorize non-numeric confidential columns into integer codes
    #[arg(long)]
    encode_categorical: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
#[value(rename_all = "snake_case")]
enum MethodArg {
    Mdav,
    IndividualSorting,
    SingleAxisZscore,
    SingleAxisPca,
    HmPfsom,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Mdav => Method::Mdav,
            MethodArg::IndividualSorting => Method::IndividualSorting,
            MethodArg::SingleAxisZscore => Method::SingleAxisZscore,
            MethodArg::SingleAxisPca => Method::SingleAxisPca,
            MethodArg::HmPfsom => Method::HmPfsom,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum NormalizeArg {
    Strict,
    Lenient,
}

#[derive(Args, Debug)]
struct AnonymizeArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum)]
    method: MethodArg,
    #[arg(long)]
    k: usize,
    /// Masked CSV destination
    #[arg(long)]
    out: PathBuf,
    /// hm_pfsom: groups per sub-microdata instead of k
    #[arg(long)]
    groups_count: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Smallest sub-microdata count tried by hm_pfsom
    #[arg(long)]
    c_min: Option<usize>,
    /// Largest sub-microdata count tried by hm_pfsom
    #[arg(long)]
    c_max: Option<usize>,
    #[arg(long)]
    m_fuzz: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long, value_enum, default_value = "lenient")]
    normalize: NormalizeArg,
    /// Print the summary as JSON
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Original CSV
    #[arg(long)]
    input: PathBuf,
    /// Masked CSV, with or without the identifier columns
    #[arg(long)]
    masked: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    /// Also report whether the release is k-anonymous for this k
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    encode_categorical: bool,
    /// Print the report as JSON
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// JSON sweep spec
    spec: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    /// One row per (method, k, metric)
    #[arg(long)]
    long: bool,
    /// Print the result rows as JSON on stdout
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct InspectArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    json: bool,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_method_failure() { 3 } else { 2 },
            message: e.to_string(),
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Anonymize(a) => cmd_anonymize(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Inspect(a) => cmd_inspect(&a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load(path: &Path, schema: &AttributeSchema, encode: bool) -> CliResult<(Microdata, CodeMaps)> {
    let opts = ReadOptions {
        drop_columns: Vec::new(),
        encode_categorical: encode,
    };
    Ok(load_table_with(path, schema, &opts)?)
}

/// Renders every output in memory first, then moves them into place, so an
/// error leaves no partial files.
fn write_all_atomic(outputs: &[(PathBuf, Vec<u8>)]) -> CliResult {
    let mut staged = Vec::with_capacity(outputs.len());
    for (path, bytes) in outputs {
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let io_err = |e: std::io::Error| {
            Failure::from(Error::Io {
                path: path.clone(),
                source: e,
            })
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
        tmp.write_all(bytes).map_err(io_err)?;
        staged.push((tmp, path));
    }
    for (tmp, path) in staged {
        tmp.persist(path).map_err(|e| {
            Failure::from(Error::Io {
                path: path.clone(),
                source: e.error,
            })
        })?;
    }
    Ok(())
}

fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out
        .file_stem()
        .map_or_else(|| "masked".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}.{suffix}.json"))
}

fn config_from(a: &AnonymizeArgs) -> CliResult<AnonymizationConfig> {
    let mut config = AnonymizationConfig::new(a.method.into(), a.k);
    config.groups_count = a.groups_count;
    config.normalize = match a.normalize {
        NormalizeArg::Strict => NormalizeMode::Strict,
        NormalizeArg::Lenient => NormalizeMode::Lenient,
    };
    let fuzz = &mut config.fuzz;
    fuzz.seed = a.seed;
    if let Some(v) = a.m_fuzz {
        fuzz.m_fuzz = v;
    }
    if let Some(v) = a.eta {
        fuzz.eta = v;
    }
    if let Some(v) = a.tol {
        fuzz.tol = v;
    }
    if let Some(v) = a.max_iter {
        fuzz.max_iter = v;
    }
    match (a.c_min, a.c_max) {
        (None, None) => {}
        (lo, hi) => {
            let range = (lo.unwrap_or(2), hi.unwrap_or(usize::MAX));
            if range.0 == 0 || range.0 > range.1 {
                return Err(Failure::usage(format!(
                    "--c-min must be >= 1 and not above --c-max (got {} and {})",
                    range.0, range.1
                )));
            }
            config.qid_c_range = Some(range);
        }
    }
    Ok(config)
}

fn cmd_anonymize(a: &AnonymizeArgs) -> CliResult {
    let schema = AttributeSchema::from_json_file(&a.input.schema)?;
    let (md, codes) = load(&a.input.input, &schema, a.input.encode_categorical)?;
    let mut config = config_from(a)?;
    if let Some((lo, hi)) = config.qid_c_range {
        // an open upper bound means "as many as the records allow"
        let hi = hi.min(md.n());
        config.qid_c_range = Some((lo, hi));
    }
    let md = md.without_identifiers();
    let res = anonymize(&md, &config)?;
    let k_max = k_anonymity_check(&res.masked, 1).k_max;

    let mut csv = Vec::new();
    write_table(&res.masked, &mut csv)?;
    let mut outputs = vec![(a.out.clone(), csv)];
    if res.sub_structure.is_some() {
        let json = serde_json::to_vec_pretty(&res.structure_report()).map_err(Error::from)?;
        outputs.push((sibling(&a.out, "structure"), json));
    }
    if !codes.is_empty() {
        let json = serde_json::to_vec_pretty(&codes).map_err(Error::from)?;
        outputs.push((sibling(&a.out, "codes"), json));
    }
    write_all_atomic(&outputs)?;

    let method = config.method.name();
    if a.json {
        let summary =
            serde_json::json!({"n": md.n(), "method": method, "k": config.k, "k_max": k_max});
        println!("{summary}");
    } else {
        println!("n={} method={method} k={} k_max={k_max}", md.n(), config.k);
    }
    Ok(())
}

/// Masked files normally lack identifier columns; accept both layouts.
fn load_masked(path: &Path, schema: &AttributeSchema, encode: bool) -> CliResult<Microdata> {
    let public = schema.without_identifiers();
    match load(path, &public, encode) {
        Ok((md, _)) => Ok(md),
        Err(first) => match load(path, schema, encode) {
            Ok((md, _)) => Ok(md.without_identifiers()),
            Err(_) => Err(first),
        },
    }
}

fn print_report_table(report: &EvaluationReport, n: usize, verdict: Option<(usize, bool)>) {
    let pct = |v: f64| 100.0 * v / n as f64;
    println!("{:<22}{:.6}", "il", report.il);
    println!("{:<22}{:.6}", "il_normalized", report.il_normalized);
    println!(
        "{:<22}{} ({:.2}%)",
        "linked",
        report.dbrl.linked,
        pct(report.dbrl.linked as f64)
    );
    println!(
        "{:<22}{} ({:.2}%)",
        "second_nearest",
        report.dbrl.second_nearest,
        pct(report.dbrl.second_nearest as f64)
    );
    println!("{:<22}{}", "not_linked", report.dbrl.not_linked);
    println!(
        "{:<22}{:.6} ({:.2}%)",
        "expected_matches",
        report.dbrl.expected_matches,
        pct(report.dbrl.expected_matches)
    );
    println!("{:<22}{}", "groups", report.sse_per_group.len());
    println!("{:<22}{:.6}", "min_sse", report.min_sse);
    println!("{:<22}{}", "k_anonymous_at", report.k_anonymous_at);
    println!("{:<22}{}", "diversity_ok", report.diversity_ok);
    if let Some((k, holds)) = verdict {
        println!("{:<22}{}", format!("k_anonymous({k})"), holds);
    }
}

fn cmd_evaluate(a: &EvaluateArgs) -> CliResult {
    let schema = AttributeSchema::from_json_file(&a.schema)?;
    let (original, _) = load(&a.input, &schema, a.encode_categorical)?;
    let original = original.without_identifiers();
    let masked = load_masked(&a.masked, &schema, a.encode_categorical)?;
    let report = evaluate(&original, &masked, None, None)?;
    let verdict = a.k.map(|k| (k, k_anonymity_check(&masked, k).holds));
    if a.json {
        let mut value = serde_json::to_value(&report).map_err(Error::from)?;
        if let (Some((k, holds)), Some(obj)) = (verdict, value.as_object_mut()) {
            obj.insert("k".into(), k.into());
            obj.insert("k_anonymous".into(), holds.into());
        }
        println!("{value}");
    } else {
        print_report_table(&report, original.n(), verdict);
    }
    Ok(())
}

fn cmd_sweep(a: &SweepArgs) -> CliResult {
    let text = fs::read_to_string(&a.spec).map_err(|e| {
        Failure::from(Error::Io {
            path: a.spec.clone(),
            source: e,
        })
    })?;
    let spec = SweepSpec::from_json_str(&text)
        .map_err(|e| Failure::usage(format!("{}: {e}", a.spec.display())))?;
    eprintln!(
        "sweep: {} methods x {} k values on {}",
        spec.methods.len(),
        spec.k_values.len(),
        spec.dataset.display()
    );
    let rows = run_sweep(&spec)?;
    for row in &rows {
        match &row.error {
            Some(err) => eprintln!("  {} k={}: failed: {err}", row.method, row.k),
            None => eprintln!("  {} k={}: {:.1} ms", row.method, row.k, row.wall_time_ms),
        }
    }
    let format = match a.format {
        FormatArg::Csv => ReportFormat::Csv,
        FormatArg::Json => ReportFormat::Json,
    };
    let path = emit_report(
        &rows,
        &spec.dataset_stem(),
        &spec.output_dir,
        format,
        a.long,
    )?;
    eprintln!("wrote {}", path.display());
    if a.json {
        println!("{}", serde_json::to_string(&rows).map_err(Error::from)?);
    }
    Ok(())
}

fn cmd_inspect(a: &InspectArgs) -> CliResult {
    let schema = AttributeSchema::from_json_file(&a.input.schema)?;
    let (md, codes) = load(&a.input.input, &schema, a.input.encode_categorical)?;
    let stats = column_stats(&md);
    let k_max = k_anonymity_check(&md, 1).k_max;
    let roles = |r: Role| schema.count(r);
    if a.json {
        let columns: Vec<_> = schema
            .attributes()
            .iter()
            .zip(&stats.columns)
            .map(|(attr, s)| {
                serde_json::json!({
                    "name": attr.name, "role": attr.role,
                    "min": s.min, "max": s.max, "mean": s.mean, "std": s.std,
                })
            })
            .collect();
        let value = serde_json::json!({
            "n": md.n(),
            "identifiers": roles(Role::Identifier),
            "quasi_identifiers": roles(Role::QuasiIdentifier),
            "confidential": roles(Role::Confidential),
            "k_max": k_max,
            "columns": columns,
            "codes": codes,
        });
        println!("{value}");
        return Ok(());
    }
    println!(
        "{} records, {} identifier, {} quasi-identifier, {} confidential attributes; raw k_max={k_max}",
        md.n(),
        roles(Role::Identifier),
        roles(Role::QuasiIdentifier),
        roles(Role::Confidential)
    );
    println!(
        "{:<20}{:<18}{:>14}{:>14}{:>14}{:>14}",
        "column", "role", "min", "max", "mean", "std"
    );
    for (attr, s) in schema.attributes().iter().zip(&stats.columns) {
        println!(
            "{:<20}{:<18}{:>14.4}{:>14.4}{:>14.4}{:>14.4}",
            attr.name,
            attr.role.to_string(),
            s.min,
            s.max,
            s.mean,
            s.std
        );
    }
    for (col, labels) in &codes {
        println!("codes for {col}: {}", labels.join(", "));
    }
    Ok(())
}
