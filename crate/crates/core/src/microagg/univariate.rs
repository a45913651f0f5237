//! Univariate microaggregation: per-attribute individual ranking and
//! single-axis sorting of whole records.

use serde::{Deserialize, Serialize};

use crate::dataset::{ColumnStat, Microdata, Role};
use crate::error::{Error, Result};
use crate::matrix::{stable_sum, Matrix};
use crate::microagg::Partition;

const POWER_ITER_TOL: f64 = 1e-10;
const POWER_ITER_MAX: usize = 10_000;

/// Splits an ordering into consecutive chunks of `k`; the last chunk takes
/// the remainder, so chunk sizes lie in `[k, 2k − 1]`.
fn chunks(order: &[usize], k: usize) -> Vec<Vec<usize>> {
    let full = order.len() / k;
    (0..full)
        .map(|c| {
            let end = if c + 1 == full {
                order.len()
            } else {
                (c + 1) * k
            };
            order[c * k..end].to_vec()
        })
        .collect()
}

fn sort_by_value(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    order
}

/// Microaggregates every quasi-identifier independently: sort the column,
/// average consecutive chunks of `k` values, restore row order. The result is
/// generally not k-anonymous on the combined quasi-identifiers.
pub fn individual_sorting_mask(md: &Microdata, k: usize) -> Result<Microdata> {
    let n = md.n();
    if k == 0 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    let mut out = md.data().clone();
    for col in md.schema().indices(Role::QuasiIdentifier) {
        let values = md.data().column(col);
        for chunk in chunks(&sort_by_value(&values), k) {
            let mean = stable_sum(chunk.iter().map(|&i| values[i])) / chunk.len() as f64;
            for &i in &chunk {
                out.set(i, col, mean);
            }
        }
    }
    md.with_data(out)
}

/// Record-level ordering used by [`single_axis_partition`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SortCriterion {
    /// Sum of the per-attribute z-scores.
    ZscoreSum,
    /// Projection on the leading principal axis of the z-scored attributes.
    FirstPc,
}

fn zscores(qids: &Matrix, allow_constant: bool) -> Result<Matrix> {
    let mut z = qids.clone();
    for j in 0..qids.ncols() {
        let stat = ColumnStat::of(&qids.column(j));
        if stat.is_constant() && !allow_constant {
            return Err(Error::ConstantColumn(format!(
                "quasi-identifier column {j}"
            )));
        }
        for i in 0..qids.nrows() {
            let v = if stat.is_constant() {
                0.0
            } else {
                (qids.get(i, j) - stat.mean) / stat.std
            };
            z.set(i, j, v);
        }
    }
    Ok(z)
}

/// Leading eigenvector of a symmetric matrix by power iteration, with the
/// largest-magnitude loading made positive.
fn leading_eigenvector(cov: &[Vec<f64>]) -> Result<Vec<f64>> {
    let p = cov.len();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let start = (0..p)
        .max_by(|&a, &b| norm(&cov[a]).total_cmp(&norm(&cov[b])))
        .ok_or_else(|| Error::Degenerate("no quasi-identifiers".into()))?;
    let mut v = cov[start].clone();
    let len = norm(&v);
    if !(len > 0.0) {
        return Err(Error::Degenerate(
            "quasi-identifier covariance is zero".into(),
        ));
    }
    v.iter_mut().for_each(|x| *x /= len);
    for _ in 0..POWER_ITER_MAX {
        let mut next: Vec<f64> = cov
            .iter()
            .map(|row| row.iter().zip(&v).map(|(a, b)| a * b).sum())
            .collect();
        let len = norm(&next);
        next.iter_mut().for_each(|x| *x /= len);
        let delta = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = next;
        if delta < POWER_ITER_TOL {
            break;
        }
    }
    let lead = (0..p)
        .max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()).then(b.cmp(&a)))
        .expect("non-empty");
    if v[lead] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    Ok(v)
}

/// Scores every record by `criterion`, sorts by score (ties by row) and
/// groups consecutive chunks of `k`.
pub fn single_axis_partition(
    qids: &Matrix,
    k: usize,
    criterion: SortCriterion,
) -> Result<Partition> {
    let n = qids.nrows();
    if k == 0 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    let scores: Vec<f64> = match criterion {
        SortCriterion::ZscoreSum => {
            let z = zscores(qids, false)?;
            z.rows_iter().map(|r| r.iter().sum()).collect()
        }
        SortCriterion::FirstPc => {
            let z = zscores(qids, true)?;
            let p = z.ncols();
            let mut cov = vec![vec![0.0; p]; p];
            for (a, row) in cov.iter_mut().enumerate() {
                for (b, slot) in row.iter_mut().enumerate() {
                    *slot = stable_sum((0..n).map(|i| z.get(i, a) * z.get(i, b))) / n as f64;
                }
            }
            let axis = leading_eigenvector(&cov)?;
            z.rows_iter()
                .map(|r| r.iter().zip(&axis).map(|(a, b)| a * b).sum())
                .collect()
        }
    };
    Partition::from_groups(&chunks(&sort_by_value(&scores), k), n, k)
}
