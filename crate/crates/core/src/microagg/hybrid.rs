use crate::dataset::{normalize_matrix, ColumnStats, Microdata, NormalizeMode, Role};
use crate::error::{Error, Result};
use crate::fpclust::{default_range, select_partition, FuzzinessParams};
use crate::matrix::Matrix;
use crate::microagg::{
    centroid_replace, diversity_partition, AnonymizationConfig, AnonymizedResult, Partition,
    SubMicrodata,
};

/// Normalized columns of one role, scaled by their own statistics.
fn normalized_role(md: &Microdata, role: Role, mode: NormalizeMode) -> Result<Matrix> {
    let proj = md.project(role)?;
    let stats = ColumnStats::of_matrix(&proj.data);
    if mode == NormalizeMode::Strict {
        if let Some(j) = stats.columns.iter().position(|s| s.is_constant()) {
            return Err(Error::ConstantColumn(proj.names[j].clone()));
        }
    }
    normalize_matrix(&proj.data, &stats, NormalizeMode::Lenient)
}

/// Clamps a requested sweep to what `n` records allow; `None` means a single
/// cluster.
fn effective_range(requested: Option<(usize, usize)>, n: usize) -> Option<(usize, usize)> {
    let (lo, hi) = match requested {
        Some(r) => r,
        None => default_range(n)?,
    };
    let (lo, hi) = (lo.max(2), hi.min(n));
    (lo <= hi).then_some((lo, hi))
}

/// Hard labels from the best fuzzy-possibilistic partition, or all zeros when
/// no split is possible or every candidate is degenerate.
fn cluster_labels(
    data: &Matrix,
    range: Option<(usize, usize)>,
    params: &FuzzinessParams,
) -> Result<Vec<usize>> {
    let Some(range) = range else {
        return Ok(vec![0; data.nrows()]);
    };
    match select_partition(data, range, params) {
        Ok(sel) => Ok(sel.hard_labels),
        Err(Error::Degenerate(_)) => Ok(vec![0; data.nrows()]),
        Err(e) => Err(e),
    }
}

/// Splits the records on their quasi-identifiers, finds confidential classes
/// inside every split and builds diversity-preserving groups in each.
pub fn hm_pfsom_anonymize(
    md: &Microdata,
    config: &AnonymizationConfig,
) -> Result<AnonymizedResult> {
    let n = md.n();
    let params = &config.fuzz;
    params.validate()?;
    match config.groups_count {
        Some(0) => {
            return Err(Error::InvalidParam(
                "groups_count must be at least 1".into(),
            ))
        }
        Some(_) => {}
        None => {
            if config.k == 0 {
                return Err(Error::InvalidK { k: 0, n });
            }
            if n < 2 * config.k {
                return Err(Error::InsufficientRecords { n, k: config.k });
            }
        }
    }
    if let Some((lo, hi)) = config.qid_c_range {
        if lo == 0 || lo > hi || hi > n {
            return Err(Error::InvalidRange {
                min: lo,
                max: hi,
                n,
            });
        }
    }

    let qids = normalized_role(md, Role::QuasiIdentifier, config.normalize)?;
    let conf = normalized_role(md, Role::Confidential, config.normalize)?;

    let sub_labels = cluster_labels(&qids, effective_range(config.qid_c_range, n), params)?;
    let c = sub_labels.iter().max().map_or(0, |&m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); c];
    for (i, &l) in sub_labels.iter().enumerate() {
        members[l].push(i);
    }
    members.retain(|m| !m.is_empty());

    // classes for every sub first, so a failure can report the global bound
    let mut classes = Vec::with_capacity(members.len());
    for rows in &members {
        let sub_conf = conf.select_rows(rows);
        let labels = cluster_labels(
            &sub_conf,
            effective_range(config.conf_c_range, rows.len()),
            params,
        )?;
        let cs = labels.iter().max().map_or(0, |&m| m + 1);
        let mut sizes = vec![0usize; cs];
        for &l in &labels {
            sizes[l] += 1;
        }
        classes.push((labels, sizes));
    }
    let max_feasible_k = classes
        .iter()
        .filter_map(|(_, sizes)| sizes.iter().copied().min())
        .min()
        .unwrap_or(0);

    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut subs = Vec::with_capacity(members.len());
    let mut k_floor = usize::MAX;
    for (sid, (rows, (labels, sizes))) in members.into_iter().zip(classes).enumerate() {
        let cs = sizes.len();
        let min_class = sizes.iter().copied().min().unwrap_or(0);
        let k = match config.groups_count {
            Some(g) => {
                let k = min_class / g;
                if k == 0 {
                    return Err(Error::InvalidParam(format!(
                        "sub-microdata {sid}: groups_count {g} exceeds its smallest class ({min_class} records)"
                    )));
                }
                k
            }
            None => config.k,
        };
        k_floor = k_floor.min(k);
        let collapsed = rows.len() < k * cs;
        let local = if collapsed {
            vec![(0..rows.len()).collect()]
        } else {
            diversity_partition(&qids.select_rows(&rows), &labels, k)
                .map_err(|e| match e {
                    Error::ClassTooSmall { class, size, k, .. } => Error::ClassTooSmall {
                        scope: format!("sub-microdata {sid}"),
                        class,
                        size,
                        k,
                        max_feasible_k,
                    },
                    other => other,
                })?
                .groups()
        };
        let g = local.len();
        groups.extend(
            local
                .into_iter()
                .map(|grp| grp.into_iter().map(|j| rows[j]).collect()),
        );
        subs.push(SubMicrodata {
            members: rows,
            cs,
            class_labels: labels,
            class_sizes: sizes,
            k,
            groups: g,
            collapsed,
        });
    }

    let k_declared = if config.groups_count.is_some() {
        k_floor
    } else {
        config.k
    };
    let partition = Partition::from_groups(&groups, n, k_declared)?;
    Ok(AnonymizedResult {
        masked: centroid_replace(md, &partition)?,
        partition,
        sub_structure: Some(subs),
    })
}
