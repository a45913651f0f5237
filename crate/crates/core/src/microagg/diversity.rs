use crate::error::{Error, Result};
use crate::matrix::{column_means, mean_of_rows, sq_dist, Matrix};
use crate::microagg::Partition;

/// Forms groups that each hold at least `k` records of every confidential
/// class.
///
/// `x̄` is the centroid of all rows of `qids`, computed once. While every
/// class still has `k` unassigned members, the unassigned record `x_r`
/// farthest from `x̄` seeds a group together with its `k − 1` nearest
/// unassigned classmates and the `k` nearest unassigned members of every
/// other class. Leftovers then join, in row order, the group whose centroid
/// (taken once, after seeding) is nearest. Distances are squared Euclidean on
/// `qids`; ties go to the lowest row or group index.
///
/// Labels may be any integers; classes are ordered by label value.
pub fn diversity_partition(qids: &Matrix, class_labels: &[usize], k: usize) -> Result<Partition> {
    let n = qids.nrows();
    if class_labels.len() != n {
        return Err(Error::Shape(format!(
            "{} class labels for {n} records",
            class_labels.len()
        )));
    }
    if k == 0 || n == 0 {
        return Err(Error::InvalidK { k, n });
    }
    let mut classes: Vec<usize> = class_labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let class_of: Vec<usize> = class_labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label present"))
        .collect();
    let mut sizes = vec![0usize; classes.len()];
    for &c in &class_of {
        sizes[c] += 1;
    }
    let smallest = (0..classes.len())
        .min_by_key(|&c| (sizes[c], c))
        .expect("n > 0");
    if sizes[smallest] < k {
        return Err(Error::ClassTooSmall {
            scope: "sub-microdata".into(),
            class: classes[smallest],
            size: sizes[smallest],
            k,
            max_feasible_k: sizes[smallest],
        });
    }

    let xbar = column_means(qids);
    let mut unassigned = vec![true; n];
    let mut left = sizes.clone();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    while left.iter().all(|&s| s >= k) {
        let r = (0..n)
            .filter(|&i| unassigned[i])
            .fold(None, |best: Option<(usize, f64)>, i| {
                let d = sq_dist(qids.row(i), &xbar);
                match best {
                    Some((_, bd)) if bd >= d => best,
                    _ => Some((i, d)),
                }
            })
            .map(|(i, _)| i)
            .expect("unassigned records remain");
        let seed = qids.row(r);
        unassigned[r] = false;
        left[class_of[r]] -= 1;
        let mut group = vec![r];
        for c in 0..classes.len() {
            let need = if c == class_of[r] { k - 1 } else { k };
            let mut candidates: Vec<(f64, usize)> = (0..n)
                .filter(|&i| unassigned[i] && class_of[i] == c)
                .map(|i| (sq_dist(qids.row(i), seed), i))
                .collect();
            candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for &(_, i) in candidates.iter().take(need) {
                unassigned[i] = false;
                group.push(i);
            }
            left[c] -= need;
        }
        groups.push(group);
    }

    let centroids: Vec<Vec<f64>> = groups.iter().map(|g| mean_of_rows(qids, g)).collect();
    for i in (0..n).filter(|&i| unassigned[i]) {
        let nearest = (0..groups.len())
            .min_by(|&a, &b| {
                sq_dist(qids.row(i), &centroids[a])
                    .total_cmp(&sq_dist(qids.row(i), &centroids[b]))
                    .then(a.cmp(&b))
            })
            .expect("at least one group");
        groups[nearest].push(i);
    }
    Partition::from_groups(&groups, n, k)
}
