//! Fuzzy-possibilistic c-means with cluster-count selection by the PCAES
//! validity index.
//!
//! Each iteration recomputes, from the current centers `v_j`,
//!
//! * memberships `u_ij = 1 / Σ_k (‖x_i − v_j‖ / ‖x_i − v_k‖)^(2/(m−1))`, summing
//!   to 1 over clusters for every record;
//! * typicalities `t_ij = 1 / Σ_l (‖x_i − v_j‖ / ‖x_l − v_j‖)^(2/(η−1))`,
//!   summing to 1 over records for every cluster;
//!
//! and then moves each center to the `(u^m + t^η)`-weighted mean of the data.
//! The loop stops once no center moves by `tol` or more, or after `max_iter`
//! rounds. Centers are seeded by a deterministic farthest-point sweep.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{column_means, sq_dist, Matrix};

/// Squared distances below this are raised to it before taking ratios.
const MIN_SQ_DIST: f64 = 1e-24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuzzinessParams {
    /// Membership fuzzifier, > 1.
    pub m_fuzz: f64,
    /// Typicality fuzzifier, > 1.
    pub eta: f64,
    pub max_iter: usize,
    /// Center-movement convergence threshold.
    pub tol: f64,
    /// Only consulted by [`Init::RandomPoints`].
    pub seed: u64,
    #[serde(default)]
    pub init: Init,
}

impl Default for FuzzinessParams {
    fn default() -> Self {
        FuzzinessParams {
            m_fuzz: 2.0,
            eta: 2.0,
            max_iter: 300,
            tol: 1e-6,
            seed: 0,
            init: Init::FarthestPoint,
        }
    }
}

impl FuzzinessParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParam(what.to_owned()));
        if !(self.m_fuzz > 1.0 && self.m_fuzz.is_finite()) {
            return bad("m_fuzz must be > 1");
        }
        if !(self.eta > 1.0 && self.eta.is_finite()) {
            return bad("eta must be > 1");
        }
        if !(self.tol > 0.0) {
            return bad("tol must be > 0");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be >= 1");
        }
        Ok(())
    }
}

/// Center seeding strategy.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// Start at the record nearest the grand mean, then repeatedly add the
    /// record farthest from all chosen ones. Ties go to the lowest row.
    #[default]
    FarthestPoint,
    /// `c` distinct rows drawn with the seed.
    RandomPoints,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    /// `c × d`.
    pub centers: Matrix,
    /// Memberships, `n × c`; rows sum to 1.
    #[serde(rename = "U")]
    pub u: Matrix,
    /// Typicalities, `n × c`; columns sum to 1.
    #[serde(rename = "T")]
    pub t: Matrix,
    pub c: usize,
    pub iterations_run: usize,
    pub converged: bool,
    /// Objective value after every center update.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub objective: Vec<f64>,
}

impl ClusterModel {
    /// Index of the nearest center for each record; ties go to the lower index.
    pub fn hard_labels(&self, data: &Matrix) -> Vec<usize> {
        nearest_centers(data, &self.centers)
    }
}

pub fn nearest_centers(data: &Matrix, centers: &Matrix) -> Vec<usize> {
    data.rows_iter()
        .map(|x| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (j, v) in centers.rows_iter().enumerate() {
                let d = sq_dist(x, v);
                if d < best_d {
                    best = j;
                    best_d = d;
                }
            }
            best
        })
        .collect()
}

/// `J = Σ_i Σ_j (u_ij^m + t_ij^η) ‖x_i − v_j‖²`.
pub fn objective(data: &Matrix, model: &ClusterModel, params: &FuzzinessParams) -> f64 {
    weighted_objective(
        data,
        &center_weights(&model.u, &model.t, params),
        &model.centers,
    )
}

fn fuzz_pow(x: f64, f: f64) -> f64 {
    if f == 2.0 {
        x * x
    } else {
        x.powf(f)
    }
}

/// `u_ij^m + t_ij^η` for every record and cluster.
fn center_weights(u: &Matrix, t: &Matrix, params: &FuzzinessParams) -> Matrix {
    let mut w = Matrix::zeros(u.nrows(), u.ncols());
    for ((slot, &a), &b) in w
        .as_mut_slice()
        .iter_mut()
        .zip(u.as_slice())
        .zip(t.as_slice())
    {
        *slot = fuzz_pow(a, params.m_fuzz) + fuzz_pow(b, params.eta);
    }
    w
}

fn weighted_objective(data: &Matrix, w: &Matrix, centers: &Matrix) -> f64 {
    let mut total = 0.0;
    for (i, x) in data.rows_iter().enumerate() {
        for (j, v) in centers.rows_iter().enumerate() {
            total += w.get(i, j) * sq_dist(x, v);
        }
    }
    total
}

fn initial_centers(data: &Matrix, c: usize, params: &FuzzinessParams) -> Matrix {
    let n = data.nrows();
    let chosen: Vec<usize> = match params.init {
        Init::FarthestPoint => {
            let mean = column_means(data);
            let first = argmin_by(n, |i| sq_dist(data.row(i), &mean));
            let mut chosen = vec![first];
            let mut gap: Vec<f64> = (0..n)
                .map(|i| sq_dist(data.row(i), data.row(first)))
                .collect();
            while chosen.len() < c {
                let next = argmax_by(n, |i| {
                    if chosen.contains(&i) {
                        f64::NEG_INFINITY
                    } else {
                        gap[i]
                    }
                });
                chosen.push(next);
                for (i, g) in gap.iter_mut().enumerate() {
                    *g = g.min(sq_dist(data.row(i), data.row(next)));
                }
            }
            chosen
        }
        Init::RandomPoints => {
            use rand::seq::index::sample;
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(params.seed);
            let mut idx = sample(&mut rng, n, c).into_vec();
            idx.sort_unstable();
            idx
        }
    };
    data.select_rows(&chosen)
}

fn argmin_by(n: usize, f: impl Fn(usize) -> f64) -> usize {
    let mut best = 0;
    let mut best_v = f64::INFINITY;
    for i in 0..n {
        let v = f(i);
        if v < best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

fn argmax_by(n: usize, f: impl Fn(usize) -> f64) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for i in 0..n {
        let v = f(i);
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

/// Normalized power weights `w_a ∝ s_a^(−1/(f−1))` computed in log space so
/// that tiny distances and fuzzifiers near 1 cannot overflow.
fn power_weights(sq: impl Iterator<Item = f64>, fuzz: f64, out: &mut Vec<f64>) {
    out.clear();
    if fuzz == 2.0 {
        // plain reciprocals; the distance floor keeps them finite
        out.extend(sq.map(|s| 1.0 / s.max(MIN_SQ_DIST)));
        let sum: f64 = out.iter().sum();
        for w in out.iter_mut() {
            *w /= sum;
        }
        return;
    }
    let expo = 1.0 / (fuzz - 1.0);
    out.extend(sq.map(|s| -s.max(MIN_SQ_DIST).ln() * expo));
    let top = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for w in out.iter_mut() {
        *w = (*w - top).exp();
        sum += *w;
    }
    for w in out.iter_mut() {
        *w /= sum;
    }
}

/// Memberships and typicalities of every record with respect to `centers`.
pub fn memberships(data: &Matrix, centers: &Matrix, params: &FuzzinessParams) -> (Matrix, Matrix) {
    let (n, c) = (data.nrows(), centers.nrows());
    let mut d2 = Matrix::zeros(n, c);
    for i in 0..n {
        for j in 0..c {
            d2.set(i, j, sq_dist(data.row(i), centers.row(j)));
        }
    }
    let mut u = Matrix::zeros(n, c);
    let mut t = Matrix::zeros(n, c);
    let mut buf = Vec::new();
    for i in 0..n {
        power_weights(d2.row(i).iter().copied(), params.m_fuzz, &mut buf);
        u.row_mut(i).copy_from_slice(&buf);
    }
    for j in 0..c {
        power_weights((0..n).map(|i| d2.get(i, j)), params.eta, &mut buf);
        for (i, &w) in buf.iter().enumerate() {
            t.set(i, j, w);
        }
    }
    (u, t)
}

fn update_centers(data: &Matrix, w: &Matrix) -> Matrix {
    let (n, d, c) = (data.nrows(), data.ncols(), w.ncols());
    let mut centers = Matrix::zeros(c, d);
    for j in 0..c {
        let mut total = 0.0;
        let mut acc = vec![0.0; d];
        for i in 0..n {
            let wij = w.get(i, j);
            total += wij;
            for (a, x) in acc.iter_mut().zip(data.row(i)) {
                *a += wij * x;
            }
        }
        for (slot, a) in centers.row_mut(j).iter_mut().zip(acc) {
            *slot = a / total;
        }
    }
    centers
}

/// Runs the alternating updates for a fixed cluster count `c`.
pub fn fp_cluster(data: &Matrix, c: usize, params: &FuzzinessParams) -> Result<ClusterModel> {
    params.validate()?;
    let n = data.nrows();
    if n == 0 || data.ncols() == 0 {
        return Err(Error::Empty);
    }
    if c == 0 || c > n {
        return Err(Error::InvalidRange { min: c, max: c, n });
    }

    let mut centers = initial_centers(data, c, params);
    let mut objective = Vec::new();
    let mut iterations_run = 0;
    let mut converged = false;
    for it in 1..=params.max_iter {
        let (u, t) = memberships(data, &centers, params);
        let w = center_weights(&u, &t, params);
        let next = update_centers(data, &w);
        let shift = centers
            .rows_iter()
            .zip(next.rows_iter())
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        centers = next;
        iterations_run = it;
        objective.push(weighted_objective(data, &w, &centers));
        if shift < params.tol {
            converged = true;
            break;
        }
    }
    let (u, t) = memberships(data, &centers, params);
    Ok(ClusterModel {
        centers,
        u,
        t,
        c,
        iterations_run,
        converged,
        objective,
    })
}

/// Partition coefficient and exponential separation index; larger is better.
///
/// `Σ_j Σ_i u_ij² / u_M − Σ_j exp(−min_{k≠j} ‖v_j − v_k‖² / β_T)` where
/// `u_M = max_j Σ_i u_ij²`, `β_T = Σ_j ‖v_j − x̄‖² / c` and `x̄` is the grand
/// mean of the data. Each cluster's compactness is measured against the most
/// compact cluster, which bounds the index to `(−c, c)`.
pub fn pcaes(data: &Matrix, model: &ClusterModel) -> Result<f64> {
    let c = model.centers.nrows();
    if c < 2 {
        return Err(Error::InvalidParam(
            "PCAES needs at least 2 clusters".into(),
        ));
    }
    if model.u.nrows() != data.nrows() || model.u.ncols() != c {
        return Err(Error::Shape(
            "membership matrix does not match data/centers".into(),
        ));
    }
    let compactness: Vec<f64> = (0..c)
        .map(|j| {
            (0..model.u.nrows())
                .map(|i| model.u.get(i, j).powi(2))
                .sum()
        })
        .collect();
    let u_m = compactness
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if !(u_m > 0.0) {
        return Err(Error::Degenerate("all memberships are zero".into()));
    }
    let grand_mean = column_means(data);
    let beta = model
        .centers
        .rows_iter()
        .map(|v| sq_dist(v, &grand_mean))
        .sum::<f64>()
        / c as f64;
    if !(beta > 0.0) {
        return Err(Error::Degenerate(
            "all cluster centers coincide with the data mean".into(),
        ));
    }
    let mut score = 0.0;
    for j in 0..c {
        let nearest = (0..c)
            .filter(|&k| k != j)
            .map(|k| sq_dist(model.centers.row(j), model.centers.row(k)))
            .fold(f64::INFINITY, f64::min);
        score += compactness[j] / u_m - (-nearest / beta).exp();
    }
    Ok(score)
}

/// Result of a cluster-count sweep.
#[derive(Debug, Clone, Serialize)]
pub struct Selection {
    pub model: ClusterModel,
    /// Nearest-center label of every record, in `0..model.c`.
    pub hard_labels: Vec<usize>,
    /// PCAES of each candidate `c`; `None` where the model was degenerate.
    pub scores: Vec<(usize, Option<f64>)>,
}

/// Default sweep range `[2, ⌈√n⌉]`, or `None` when fewer than two clusters fit.
pub fn default_range(n: usize) -> Option<(usize, usize)> {
    let max = ((n as f64).sqrt().ceil() as usize).min(n);
    (max >= 2).then_some((2, max))
}

/// Clusters `data` for every `c` in the range and keeps the PCAES winner
/// (ties to the smaller `c`). Clusters left empty by hardening are dropped.
pub fn select_partition(
    data: &Matrix,
    c_range: (usize, usize),
    params: &FuzzinessParams,
) -> Result<Selection> {
    let (c_min, c_max) = c_range;
    let n = data.nrows();
    if c_min < 2 || c_min > c_max || c_max > n {
        return Err(Error::InvalidRange {
            min: c_min,
            max: c_max,
            n,
        });
    }
    params.validate()?;

    let mut scores = Vec::new();
    let mut best: Option<(f64, ClusterModel)> = None;
    for c in c_min..=c_max {
        let model = fp_cluster(data, c, params)?;
        let score = pcaes(data, &model).ok();
        scores.push((c, score));
        if let Some(s) = score {
            if best.as_ref().is_none_or(|(b, _)| s > *b) {
                best = Some((s, model));
            }
        }
    }
    let (_, model) = best
        .ok_or_else(|| Error::Degenerate("every candidate cluster count was degenerate".into()))?;
    let (model, hard_labels) = prune_empty(data, model, params);
    Ok(Selection {
        model,
        hard_labels,
        scores,
    })
}

fn prune_empty(
    data: &Matrix,
    model: ClusterModel,
    params: &FuzzinessParams,
) -> (ClusterModel, Vec<usize>) {
    let labels = model.hard_labels(data);
    let mut used = vec![false; model.c];
    for &l in &labels {
        used[l] = true;
    }
    if used.iter().all(|&u| u) {
        return (model, labels);
    }
    let keep: Vec<usize> = (0..model.c).filter(|&j| used[j]).collect();
    let centers = model.centers.select_rows(&keep);
    let (u, t) = memberships(data, &centers, params);
    let pruned = ClusterModel {
        c: keep.len(),
        centers,
        u,
        t,
        ..model
    };
    let labels = pruned.hard_labels(data);
    (pruned, labels)
}
