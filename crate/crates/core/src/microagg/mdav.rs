use crate::error::{Error, Result};
use crate::matrix::{mean_of_rows, sq_dist, Matrix};
use crate::microagg::Partition;

/// Maximum Distance to Average Vector partitioning.
///
/// While at least `3k` records are unassigned, the record `r` farthest from
/// the centroid of the unassigned records seeds a group with its `k − 1`
/// nearest unassigned neighbours, and the record farthest from `r` seeds a
/// second one. Between `2k` and `3k − 1` leftovers give one more group around
/// the farthest record and a final group of the rest; fewer than `2k` form a
/// single group. Group sizes fall in `[k, 2k − 1]`. Distances are squared
/// Euclidean on the rows of `qids`; ties resolve to the lowest row.
pub fn mdav_partition(qids: &Matrix, k: usize) -> Result<Partition> {
    let n = qids.nrows();
    if k == 0 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    let mut state = Unassigned::new(qids);
    let mut groups: Vec<Vec<usize>> = Vec::new();

    while state.len() >= 3 * k {
        let centroid = state.centroid();
        let r = state.farthest_from(&centroid);
        let r_point = qids.row(r).to_vec();
        groups.push(state.take_group(r, k));
        let s = state.farthest_from(&r_point);
        groups.push(state.take_group(s, k));
    }
    if state.len() >= 2 * k {
        let centroid = state.centroid();
        let r = state.farthest_from(&centroid);
        groups.push(state.take_group(r, k));
    }
    if state.len() > 0 {
        groups.push(state.remaining.clone());
    }
    Partition::from_groups(&groups, n, k)
}

struct Unassigned<'a> {
    qids: &'a Matrix,
    /// Ascending row indices.
    remaining: Vec<usize>,
}

impl<'a> Unassigned<'a> {
    fn new(qids: &'a Matrix) -> Self {
        Unassigned {
            qids,
            remaining: (0..qids.nrows()).collect(),
        }
    }

    fn len(&self) -> usize {
        self.remaining.len()
    }

    fn centroid(&self) -> Vec<f64> {
        mean_of_rows(self.qids, &self.remaining)
    }

    fn farthest_from(&self, point: &[f64]) -> usize {
        let mut best = self.remaining[0];
        let mut best_d = f64::NEG_INFINITY;
        for &i in &self.remaining {
            let d = sq_dist(self.qids.row(i), point);
            if d > best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }

    /// Removes `seed` and its `k − 1` nearest remaining records.
    fn take_group(&mut self, seed: usize, k: usize) -> Vec<usize> {
        let seed_point = self.qids.row(seed);
        let mut by_dist: Vec<(f64, usize)> = self
            .remaining
            .iter()
            .filter(|&&i| i != seed)
            .map(|&i| (sq_dist(self.qids.row(i), seed_point), i))
            .collect();
        by_dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut group = vec![seed];
        group.extend(by_dist.iter().take(k - 1).map(|&(_, i)| i));
        self.remaining.retain(|i| !group.contains(i));
        group
    }
}
