//! Partitioning heuristics and quasi-identifier masking.

mod diversity;
mod hybrid;
mod mdav;
mod univariate;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{normalize_matrix, ColumnStats, Microdata, NormalizeMode, Role};
use crate::error::{Error, Result};
use crate::fpclust::FuzzinessParams;
use crate::matrix::{mean_of_rows, Matrix};

pub use diversity::diversity_partition;
pub use hybrid::hm_pfsom_anonymize;
pub use mdav::mdav_partition;
pub use univariate::{individual_sorting_mask, single_axis_partition, SortCriterion};

/// Disjoint, exhaustive group assignment of records.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    labels: Vec<usize>,
    g: usize,
    k_declared: usize,
}

impl Partition {
    /// Labels must use every id in `0..g` for some `g`.
    pub fn new(labels: Vec<usize>, k_declared: usize) -> Result<Self> {
        let g = labels.iter().max().map_or(0, |&m| m + 1);
        let mut seen = vec![false; g];
        for &l in &labels {
            seen[l] = true;
        }
        if let Some(empty) = seen.iter().position(|&s| !s) {
            return Err(Error::Partition(format!("group {empty} is empty")));
        }
        Ok(Partition {
            labels,
            g,
            k_declared,
        })
    }

    /// Builds a partition of `0..n` from explicit member lists.
    pub fn from_groups(groups: &[Vec<usize>], n: usize, k_declared: usize) -> Result<Self> {
        let mut labels = vec![usize::MAX; n];
        for (gid, members) in groups.iter().enumerate() {
            for &i in members {
                if i >= n {
                    return Err(Error::Partition(format!(
                        "record {i} out of range for n={n}"
                    )));
                }
                if labels[i] != usize::MAX {
                    return Err(Error::Partition(format!(
                        "record {i} appears in two groups"
                    )));
                }
                labels[i] = gid;
            }
        }
        if let Some(i) = labels.iter().position(|&l| l == usize::MAX) {
            return Err(Error::Partition(format!("record {i} is in no group")));
        }
        Self::new(labels, k_declared)
    }

    /// Groups of bit-identical rows, numbered by first appearance.
    pub fn from_equal_rows(m: &Matrix, k_declared: usize) -> Self {
        let mut ids: HashMap<Vec<u64>, usize> = HashMap::new();
        let labels = m
            .rows_iter()
            .map(|r| {
                let key: Vec<u64> = r.iter().map(|v| v.to_bits()).collect();
                let next = ids.len();
                *ids.entry(key).or_insert(next)
            })
            .collect::<Vec<_>>();
        let g = ids.len();
        Partition {
            labels,
            g,
            k_declared,
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn g(&self) -> usize {
        self.g
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn k_declared(&self) -> usize {
        self.k_declared
    }

    /// Member row indices of every group, ascending.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.g];
        for (i, &l) in self.labels.iter().enumerate() {
            groups[l].push(i);
        }
        groups
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.g];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    pub fn min_size(&self) -> usize {
        self.sizes().into_iter().min().unwrap_or(0)
    }

    /// Every group holds at least `k_declared` records.
    pub fn is_anonymity_grade(&self) -> bool {
        self.min_size() >= self.k_declared
    }
}

/// Replaces every quasi-identifier cell by its group mean. Other columns are
/// copied unchanged.
pub fn centroid_replace(md: &Microdata, partition: &Partition) -> Result<Microdata> {
    if partition.n() != md.n() {
        return Err(Error::Shape(format!(
            "partition covers {} records, microdata has {}",
            partition.n(),
            md.n()
        )));
    }
    let qid_cols = md.schema().indices(Role::QuasiIdentifier);
    let qids = md.data().select_columns(&qid_cols);
    let mut out = md.data().clone();
    for members in partition.groups() {
        let mean = mean_of_rows(&qids, &members);
        for &i in &members {
            for (&col, &v) in qid_cols.iter().zip(&mean) {
                out.set(i, col, v);
            }
        }
    }
    md.with_data(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Mdav,
    IndividualSorting,
    SingleAxisZscore,
    SingleAxisPca,
    HmPfsom,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Mdav,
        Method::IndividualSorting,
        Method::SingleAxisZscore,
        Method::SingleAxisPca,
        Method::HmPfsom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Mdav => "mdav",
            Method::IndividualSorting => "individual_sorting",
            Method::SingleAxisZscore => "single_axis_zscore",
            Method::SingleAxisPca => "single_axis_pca",
            Method::HmPfsom => "hm_pfsom",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidParam(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnonymizationConfig {
    pub method: Method,
    pub k: usize,
    #[serde(default)]
    pub fuzz: FuzzinessParams,
    /// Cluster-count sweep for the quasi-identifier split; `(1, 1)` keeps the
    /// whole table as one sub-microdata.
    #[serde(default)]
    pub qid_c_range: Option<(usize, usize)>,
    /// Cluster-count sweep for confidential classes inside each sub-microdata.
    #[serde(default)]
    pub conf_c_range: Option<(usize, usize)>,
    /// Fix the number of groups per sub-microdata instead of `k`; the
    /// effective k becomes `⌊min class size / groups_count⌋`.
    #[serde(default)]
    pub groups_count: Option<usize>,
    #[serde(default)]
    pub normalize: NormalizeMode,
}

impl AnonymizationConfig {
    pub fn new(method: Method, k: usize) -> Self {
        AnonymizationConfig {
            method,
            k,
            fuzz: FuzzinessParams::default(),
            qid_c_range: None,
            conf_c_range: None,
            groups_count: None,
            normalize: NormalizeMode::Lenient,
        }
    }
}

/// Per sub-microdata record of the hybrid method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubMicrodata {
    /// Row ids of the members, ascending.
    pub members: Vec<usize>,
    /// Number of confidential classes.
    pub cs: usize,
    /// Class of each member, aligned with `members`.
    pub class_labels: Vec<usize>,
    pub class_sizes: Vec<usize>,
    /// Minimum per-class count used when forming groups.
    pub k: usize,
    /// Groups formed in this sub-microdata.
    pub groups: usize,
    /// Set when the sub-microdata was too small for `k·cs` and became one group.
    pub collapsed: bool,
}

#[derive(Debug, Clone)]
pub struct AnonymizedResult {
    pub masked: Microdata,
    pub partition: Partition,
    pub sub_structure: Option<Vec<SubMicrodata>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub size: usize,
    pub class_counts: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubSummary {
    pub size: usize,
    pub cs: usize,
    pub class_sizes: Vec<usize>,
}

/// JSON layout of a partition and its sub-microdata structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub labels: Vec<usize>,
    pub groups: Vec<GroupSummary>,
    pub subs: Vec<SubSummary>,
}

impl AnonymizedResult {
    /// Confidential class of every record, when the method produced classes.
    pub fn class_labels(&self) -> Option<Vec<usize>> {
        let subs = self.sub_structure.as_ref()?;
        let mut labels = vec![0; self.masked.n()];
        for sub in subs {
            for (&row, &c) in sub.members.iter().zip(&sub.class_labels) {
                labels[row] = c;
            }
        }
        Some(labels)
    }

    pub fn structure_report(&self) -> StructureReport {
        let classes = self.class_labels();
        let groups = self
            .partition
            .groups()
            .into_iter()
            .map(|members| {
                let mut class_counts = BTreeMap::new();
                if let Some(cl) = &classes {
                    for &i in &members {
                        *class_counts.entry(cl[i].to_string()).or_insert(0) += 1;
                    }
                }
                GroupSummary {
                    size: members.len(),
                    class_counts,
                }
            })
            .collect();
        let subs = self
            .sub_structure
            .iter()
            .flatten()
            .map(|s| SubSummary {
                size: s.members.len(),
                cs: s.cs,
                class_sizes: s.class_sizes.clone(),
            })
            .collect();
        StructureReport {
            labels: self.partition.labels().to_vec(),
            groups,
            subs,
        }
    }
}

/// Quasi-identifiers min-max scaled by their own statistics.
pub(crate) fn normalized_qids(md: &Microdata, mode: NormalizeMode) -> Result<Matrix> {
    let qids = md.project(Role::QuasiIdentifier)?;
    let stats = ColumnStats::of_matrix(&qids.data);
    if mode == NormalizeMode::Strict {
        if let Some(j) = stats.columns.iter().position(|s| s.is_constant()) {
            return Err(Error::ConstantColumn(qids.names[j].clone()));
        }
    }
    normalize_matrix(&qids.data, &stats, NormalizeMode::Lenient)
}

/// Runs the configured method end to end.
pub fn anonymize(md: &Microdata, config: &AnonymizationConfig) -> Result<AnonymizedResult> {
    let (n, k) = (md.n(), config.k);
    // the hybrid method runs its own, more specific checks
    if config.method != Method::HmPfsom && (k == 0 || k > n) {
        return Err(Error::InvalidK { k, n });
    }
    let masked_by_partition = |partition: Partition| -> Result<AnonymizedResult> {
        Ok(AnonymizedResult {
            masked: centroid_replace(md, &partition)?,
            partition,
            sub_structure: None,
        })
    };
    match config.method {
        Method::Mdav => {
            masked_by_partition(mdav_partition(&normalized_qids(md, config.normalize)?, k)?)
        }
        Method::IndividualSorting => {
            let masked = individual_sorting_mask(md, k)?;
            let partition =
                Partition::from_equal_rows(&masked.project(Role::QuasiIdentifier)?.data, k);
            Ok(AnonymizedResult {
                masked,
                partition,
                sub_structure: None,
            })
        }
        Method::SingleAxisZscore | Method::SingleAxisPca => {
            let criterion = if config.method == Method::SingleAxisZscore {
                SortCriterion::ZscoreSum
            } else {
                SortCriterion::FirstPc
            };
            let qids = md.project(Role::QuasiIdentifier)?.data;
            masked_by_partition(single_axis_partition(&qids, k, criterion)?)
        }
        Method::HmPfsom => hm_pfsom_anonymize(md, config),
    }
}
