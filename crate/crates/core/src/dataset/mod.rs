//! Microdata tables, attribute roles, column statistics and min-max scaling.

mod io;
mod synth;

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{stable_sum, Matrix};

pub use io::{
    format_value, load_table, load_table_with, read_table, save_table, write_table, CodeMaps,
    ReadOptions,
};
pub use synth::{synthesize, SynthSpec, Synthetic};

/// Disclosure role of a column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Identifier,
    QuasiIdentifier,
    Confidential,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Identifier => "identifier",
            Role::QuasiIdentifier => "quasi_identifier",
            Role::Confidential => "confidential",
        })
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identifier" => Ok(Role::Identifier),
            "quasi_identifier" => Ok(Role::QuasiIdentifier),
            "confidential" => Ok(Role::Confidential),
            other => Err(Error::Schema(format!("unknown role '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub role: Role,
}

impl Attribute {
    pub fn new(name: impl Into<String>, role: Role) -> Self {
        Attribute {
            name: name.into(),
            role,
        }
    }
}

/// Ordered column names and roles. Holds at least one quasi-identifier and
/// one confidential attribute; names are unique.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AttributeSchema {
    attributes: Vec<Attribute>,
}

#[derive(Deserialize)]
struct RawSchema {
    attributes: Vec<Attribute>,
}

impl<'de> Deserialize<'de> for AttributeSchema {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawSchema::deserialize(d)?;
        AttributeSchema::new(raw.attributes).map_err(serde::de::Error::custom)
    }
}

impl AttributeSchema {
    pub fn new(attributes: Vec<Attribute>) -> Result<Self> {
        let mut seen = HashSet::new();
        for a in &attributes {
            if a.name.is_empty() {
                return Err(Error::Schema("empty attribute name".into()));
            }
            if !seen.insert(a.name.as_str()) {
                return Err(Error::Schema(format!("duplicate attribute '{}'", a.name)));
            }
        }
        let schema = AttributeSchema { attributes };
        if schema.count(Role::QuasiIdentifier) == 0 {
            return Err(Error::Schema("no quasi-identifier attribute".into()));
        }
        if schema.count(Role::Confidential) == 0 {
            return Err(Error::Schema("no confidential attribute".into()));
        }
        Ok(schema)
    }

    /// Shorthand for tests and examples: `[("ZIP", Role::QuasiIdentifier), ...]`.
    pub fn from_pairs(pairs: &[(&str, Role)]) -> Result<Self> {
        Self::new(pairs.iter().map(|&(n, r)| Attribute::new(n, r)).collect())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn names(&self) -> Vec<&str> {
        self.attributes.iter().map(|a| a.name.as_str()).collect()
    }

    /// Column indices carrying `role`, in schema order.
    pub fn indices(&self, role: Role) -> Vec<usize> {
        self.attributes
            .iter()
            .enumerate()
            .filter(|(_, a)| a.role == role)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn count(&self, role: Role) -> usize {
        self.attributes.iter().filter(|a| a.role == role).count()
    }

    /// Same schema with identifier columns removed.
    pub fn without_identifiers(&self) -> AttributeSchema {
        AttributeSchema {
            attributes: self
                .attributes
                .iter()
                .filter(|a| a.role != Role::Identifier)
                .cloned()
                .collect(),
        }
    }
}

/// A numeric record table bound to a schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Microdata {
    schema: AttributeSchema,
    data: Matrix,
    row_ids: Vec<usize>,
}

impl Microdata {
    /// Row ids default to `0..n`.
    pub fn new(schema: AttributeSchema, data: Matrix) -> Result<Self> {
        let row_ids = (0..data.nrows()).collect();
        Self::with_row_ids(schema, data, row_ids)
    }

    pub fn with_row_ids(
        schema: AttributeSchema,
        data: Matrix,
        row_ids: Vec<usize>,
    ) -> Result<Self> {
        if data.nrows() == 0 {
            return Err(Error::Empty);
        }
        if data.ncols() != schema.len() {
            return Err(Error::Shape(format!(
                "{} columns for a schema of {} attributes",
                data.ncols(),
                schema.len()
            )));
        }
        if row_ids.len() != data.nrows() {
            return Err(Error::Shape("row id count differs from row count".into()));
        }
        if let Some(pos) = data.as_slice().iter().position(|v| !v.is_finite()) {
            let (row, col) = (pos / data.ncols(), pos % data.ncols());
            return Err(Error::BadCell {
                row,
                column: schema.attributes[col].name.clone(),
                value: data.get(row, col).to_string(),
            });
        }
        Ok(Microdata {
            schema,
            data,
            row_ids,
        })
    }

    pub fn from_rows(schema: AttributeSchema, rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(schema, Matrix::from_rows(rows)?)
    }

    pub fn schema(&self) -> &AttributeSchema {
        &self.schema
    }

    pub fn data(&self) -> &Matrix {
        &self.data
    }

    pub fn row_ids(&self) -> &[usize] {
        &self.row_ids
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn m(&self) -> usize {
        self.data.ncols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.data.row(i)
    }

    /// Copy with a different value matrix of the same shape.
    pub fn with_data(&self, data: Matrix) -> Result<Self> {
        if data.nrows() != self.n() || data.ncols() != self.m() {
            return Err(Error::Shape(
                "replacement matrix has a different shape".into(),
            ));
        }
        Self::with_row_ids(self.schema.clone(), data, self.row_ids.clone())
    }

    /// The columns with `role`, preserving row order and ids.
    pub fn project(&self, role: Role) -> Result<Projection> {
        let columns = self.schema.indices(role);
        if columns.is_empty() {
            return Err(Error::RoleAbsent(role));
        }
        Ok(Projection {
            names: columns
                .iter()
                .map(|&j| self.schema.attributes[j].name.clone())
                .collect(),
            data: self.data.select_columns(&columns),
            row_ids: self.row_ids.clone(),
            columns,
        })
    }

    /// Copy with identifier columns dropped.
    pub fn without_identifiers(&self) -> Microdata {
        let keep: Vec<usize> = (0..self.m())
            .filter(|&j| self.schema.attributes[j].role != Role::Identifier)
            .collect();
        Microdata {
            schema: self.schema.without_identifiers(),
            data: self.data.select_columns(&keep),
            row_ids: self.row_ids.clone(),
        }
    }
}

/// Role-restricted view of a [`Microdata`].
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// Source column indices.
    pub columns: Vec<usize>,
    pub names: Vec<String>,
    pub data: Matrix,
    pub row_ids: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnStat {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl ColumnStat {
    pub fn of(values: &[f64]) -> ColumnStat {
        let n = values.len() as f64;
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // keep min <= mean <= max despite rounding
        let mean = (stable_sum(values.iter().copied()) / n).clamp(min, max);
        let var = stable_sum(values.iter().map(|v| (v - mean) * (v - mean))) / n;
        let std = if min == max { 0.0 } else { var.sqrt() };
        ColumnStat {
            min,
            max,
            mean,
            std,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.max == self.min
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub columns: Vec<ColumnStat>,
}

impl ColumnStats {
    pub fn of_matrix(m: &Matrix) -> ColumnStats {
        ColumnStats {
            columns: (0..m.ncols())
                .map(|j| ColumnStat::of(&m.column(j)))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// Stats restricted to the given columns.
    pub fn select(&self, idx: &[usize]) -> ColumnStats {
        ColumnStats {
            columns: idx.iter().map(|&j| self.columns[j]).collect(),
        }
    }
}

pub fn column_stats(md: &Microdata) -> ColumnStats {
    ColumnStats::of_matrix(md.data())
}

/// How min-max scaling treats a constant column.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizeMode {
    /// Reject constant columns.
    Strict,
    /// Map constant columns to 0.
    #[default]
    Lenient,
}

impl FromStr for NormalizeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strict" => Ok(NormalizeMode::Strict),
            "lenient" => Ok(NormalizeMode::Lenient),
            other => Err(Error::InvalidParam(format!(
                "unknown normalize mode '{other}'"
            ))),
        }
    }
}

/// `v' = (v - min) / (max - min)` per column.
pub fn normalize_matrix(m: &Matrix, stats: &ColumnStats, mode: NormalizeMode) -> Result<Matrix> {
    if stats.len() != m.ncols() {
        return Err(Error::Shape("stats do not match column count".into()));
    }
    if mode == NormalizeMode::Strict {
        if let Some(j) = stats.columns.iter().position(ColumnStat::is_constant) {
            return Err(Error::ConstantColumn(format!("column {j}")));
        }
    }
    let mut out = m.clone();
    for i in 0..out.nrows() {
        for (v, s) in out.row_mut(i).iter_mut().zip(&stats.columns) {
            *v = if s.is_constant() {
                0.0
            } else {
                (*v - s.min) / (s.max - s.min)
            };
        }
    }
    Ok(out)
}

/// Inverse of [`normalize_matrix`]. Constant columns come back as their value.
pub fn denormalize_matrix(m: &Matrix, stats: &ColumnStats) -> Result<Matrix> {
    if stats.len() != m.ncols() {
        return Err(Error::Shape("stats do not match column count".into()));
    }
    let mut out = m.clone();
    for i in 0..out.nrows() {
        for (v, s) in out.row_mut(i).iter_mut().zip(&stats.columns) {
            *v = s.min + *v * (s.max - s.min);
        }
    }
    Ok(out)
}

pub fn min_max_normalize(
    md: &Microdata,
    stats: &ColumnStats,
    mode: NormalizeMode,
) -> Result<Microdata> {
    if mode == NormalizeMode::Strict && stats.len() == md.m() {
        if let Some(j) = stats.columns.iter().position(ColumnStat::is_constant) {
            return Err(Error::ConstantColumn(
                md.schema().attributes()[j].name.clone(),
            ));
        }
    }
    md.with_data(normalize_matrix(md.data(), stats, mode)?)
}

pub fn min_max_denormalize(md: &Microdata, stats: &ColumnStats) -> Result<Microdata> {
    md.with_data(denormalize_matrix(md.data(), stats)?)
}
