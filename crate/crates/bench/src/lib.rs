//! k-sweep harness: anonymize a dataset with every requested method and k,
//! score each release and write the table as CSV or JSON.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use microagg_core::dataset::{format_value, load_table_with, ReadOptions};
use microagg_core::error::{Error, Result};
use microagg_core::{
    anonymize, evaluate, AnonymizationConfig, AttributeSchema, ClassAssignment, FuzzinessParams,
    Method, Microdata, NormalizeMode,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Sweep description, usually read from a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub dataset: PathBuf,
    pub schema: PathBuf,
    pub methods: Vec<Method>,
    /// Strictly increasing.
    pub k_values: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Columns removed from the file before the schema is applied.
    #[serde(default)]
    pub drop_columns: Vec<String>,
    #[serde(default)]
    pub encode_categorical: bool,
    #[serde(default)]
    pub normalize: NormalizeMode,
    #[serde(default)]
    pub fuzz: Option<FuzzinessParams>,
    /// Worker threads; all available cores when absent.
    #[serde(default)]
    pub workers: Option<usize>,
}

impl SweepSpec {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let spec: SweepSpec = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::InvalidParam(
                "sweep needs at least one method".into(),
            ));
        }
        if self.k_values.is_empty() {
            return Err(Error::InvalidParam("sweep needs at least one k".into()));
        }
        if self.k_values.contains(&0) {
            return Err(Error::InvalidParam("k values must be positive".into()));
        }
        if self.k_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParam(format!(
                "k values must be strictly increasing, got {:?}",
                self.k_values
            )));
        }
        Ok(())
    }

    /// File stem of the dataset, used to name reports.
    pub fn dataset_stem(&self) -> String {
        self.dataset
            .file_stem()
            .map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned())
    }

    fn config(&self, method: Method, k: usize) -> AnonymizationConfig {
        let mut config = AnonymizationConfig::new(method, k);
        config.normalize = self.normalize;
        config.fuzz = self.fuzz.clone().unwrap_or_default();
        config.fuzz.seed = self.seed;
        config
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubStructureSummary {
    /// Number of sub-microdata.
    pub c: usize,
    /// Confidential classes found in each sub-microdata.
    pub cs: Vec<usize>,
}

/// One `(method, k)` cell. Metric fields are `None` when the cell failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: Method,
    pub k: usize,
    pub il: Option<f64>,
    pub il_normalized: Option<f64>,
    pub linked: Option<usize>,
    pub second_nearest: Option<usize>,
    pub expected_matches: Option<f64>,
    pub min_sse: Option<f64>,
    pub k_max: Option<usize>,
    pub wall_time_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sub_structure: Option<SubStructureSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub const COLUMNS: [&str; 10] = [
    "method",
    "k",
    "il",
    "il_normalized",
    "linked",
    "second_nearest",
    "expected_matches",
    "min_sse",
    "k_max",
    "wall_time_ms",
];

impl ResultRow {
    fn failed(method: Method, k: usize, wall_time_ms: f64, err: &Error) -> Self {
        ResultRow {
            method,
            k,
            il: None,
            il_normalized: None,
            linked: None,
            second_nearest: None,
            expected_matches: None,
            min_sse: None,
            k_max: None,
            wall_time_ms,
            sub_structure: None,
            error: Some(err.to_string()),
        }
    }

    /// Metric values in [`COLUMNS`] order after `method` and `k`.
    fn metrics(&self) -> [(&'static str, Option<f64>); 8] {
        [
            ("il", self.il),
            ("il_normalized", self.il_normalized),
            ("linked", self.linked.map(|v| v as f64)),
            ("second_nearest", self.second_nearest.map(|v| v as f64)),
            ("expected_matches", self.expected_matches),
            ("min_sse", self.min_sse),
            ("k_max", self.k_max.map(|v| v as f64)),
            ("wall_time_ms", Some(self.wall_time_ms)),
        ]
    }
}

/// Anonymizes and scores one cell.
pub fn run_cell(md: &Microdata, config: &AnonymizationConfig) -> ResultRow {
    let (method, k) = (config.method, config.k);
    let start = Instant::now();
    let outcome = anonymize(md, config).and_then(|res| {
        let classes = ClassAssignment::from_result(&res);
        let report = evaluate(md, &res.masked, Some(&res.partition), classes.as_ref())?;
        Ok((res, report))
    });
    let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    match outcome {
        Ok((res, report)) => ResultRow {
            method,
            k,
            il: Some(report.il),
            il_normalized: Some(report.il_normalized),
            linked: Some(report.dbrl.linked),
            second_nearest: Some(report.dbrl.second_nearest),
            expected_matches: Some(report.dbrl.expected_matches),
            min_sse: Some(report.min_sse),
            k_max: Some(report.k_anonymous_at),
            wall_time_ms,
            sub_structure: res.sub_structure.as_ref().map(|subs| SubStructureSummary {
                c: subs.len(),
                cs: subs.iter().map(|s| s.cs).collect(),
            }),
            error: None,
        },
        Err(e) => ResultRow::failed(method, k, wall_time_ms, &e),
    }
}

/// Loads the dataset named by `spec`, dropping identifier columns.
pub fn load_dataset(spec: &SweepSpec) -> Result<Microdata> {
    let schema = AttributeSchema::from_json_file(&spec.schema)?;
    let opts = ReadOptions {
        drop_columns: spec.drop_columns.clone(),
        encode_categorical: spec.encode_categorical,
    };
    let (md, _) = load_table_with(&spec.dataset, &schema, &opts)?;
    Ok(md.without_identifiers())
}

/// Runs every `(method, k)` cell on an already loaded table. Rows come back
/// in spec order: methods outer, k inner.
pub fn sweep_microdata(md: &Microdata, spec: &SweepSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let cells: Vec<(Method, usize)> = spec
        .methods
        .iter()
        .flat_map(|&m| spec.k_values.iter().map(move |&k| (m, k)))
        .collect();
    let run = || -> Vec<ResultRow> {
        cells
            .par_iter()
            .map(|&(m, k)| run_cell(md, &spec.config(m, k)))
            .collect()
    };
    match spec.workers {
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| Error::InvalidParam(format!("worker pool: {e}")))?;
            Ok(pool.install(run))
        }
        None => Ok(run()),
    }
}

/// Loads the dataset and runs the sweep. Only a load failure is an error;
/// failing cells are reported in their rows.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let md = load_dataset(spec)?;
    sweep_microdata(&md, spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        }
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(format_value).unwrap_or_default()
}

/// Wide CSV in [`COLUMNS`] order; failed cells leave metric fields empty.
pub fn write_csv<W: Write>(rows: &[ResultRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(COLUMNS)?;
    for row in rows {
        let mut record = vec![row.method.name().to_string(), row.k.to_string()];
        record.extend(row.metrics().iter().map(|&(_, v)| cell(v)));
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: "<csv writer>".into(),
        source: e,
    })?;
    Ok(())
}

/// One line per `(method, k, metric)`, ready for plotting tools.
pub fn write_long_csv<W: Write>(rows: &[ResultRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["method", "k", "metric", "value"])?;
    for row in rows {
        for (name, v) in row.metrics() {
            w.write_record([row.method.name(), &row.k.to_string(), name, &cell(v)])?;
        }
    }
    w.flush().map_err(|e| Error::Io {
        path: "<csv writer>".into(),
        source: e,
    })?;
    Ok(())
}

#[derive(Serialize)]
struct LongRecord<'a> {
    method: Method,
    k: usize,
    metric: &'a str,
    value: Option<f64>,
}

fn render(rows: &[ResultRow], format: ReportFormat, long: bool) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    match (format, long) {
        (ReportFormat::Csv, false) => write_csv(rows, &mut buf)?,
        (ReportFormat::Csv, true) => write_long_csv(rows, &mut buf)?,
        (ReportFormat::Json, false) => serde_json::to_writer_pretty(&mut buf, rows)?,
        (ReportFormat::Json, true) => {
            let records: Vec<LongRecord> = rows
                .iter()
                .flat_map(|r| {
                    r.metrics().into_iter().map(|(metric, value)| LongRecord {
                        method: r.method,
                        k: r.k,
                        metric,
                        value,
                    })
                })
                .collect();
            serde_json::to_writer_pretty(&mut buf, &records)?;
        }
    }
    Ok(buf)
}

/// Writes `sweep_<stem>.<ext>` (or `sweep_<stem>_long.<ext>`) into `dir`
/// through a temporary file, so a failed write leaves nothing behind.
pub fn emit_report(
    rows: &[ResultRow],
    stem: &str,
    dir: &Path,
    format: ReportFormat,
    long: bool,
) -> Result<PathBuf> {
    if rows.is_empty() {
        return Err(Error::InvalidParam("no result rows to report".into()));
    }
    let bytes = render(rows, format, long)?;
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let suffix = if long { "_long" } else { "" };
    let path = dir.join(format!("sweep_{stem}{suffix}.{}", format.extension()));
    let io_err = |e: std::io::Error| Error::Io {
        path: path.clone(),
        source: e,
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(&bytes).map_err(io_err)?;
    tmp.persist(&path).map_err(|e| io_err(e.error))?;
    Ok(path)
}
