//! Seeded generator of blob-structured microdata for tests and benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Attribute, AttributeSchema, Microdata, Role};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n: usize,
    /// One center per quasi-identifier blob; all of equal dimension.
    pub qid_blob_centers: Vec<Vec<f64>>,
    /// One center per confidential class; all of equal dimension.
    pub conf_class_centers: Vec<Vec<f64>>,
    /// Standard deviation of the isotropic Gaussian noise.
    pub noise_scale: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct Synthetic {
    /// Columns `q0..`, then `s0..`.
    pub data: Microdata,
    pub blob_labels: Vec<usize>,
    pub class_labels: Vec<usize>,
}

/// Record `i` belongs to blob `i % b` and, within its blob, cycles through
/// the classes, so every blob holds a balanced share of every class.
pub fn synthesize(spec: &SynthSpec) -> Result<Synthetic> {
    let b = spec.qid_blob_centers.len();
    let c = spec.conf_class_centers.len();
    if spec.n == 0 || b == 0 || c == 0 {
        return Err(Error::InvalidParam(
            "synthesize needs n >= 1 and at least one blob and class center".into(),
        ));
    }
    let p = spec.qid_blob_centers[0].len();
    let s = spec.conf_class_centers[0].len();
    if p == 0
        || s == 0
        || spec.qid_blob_centers.iter().any(|v| v.len() != p)
        || spec.conf_class_centers.iter().any(|v| v.len() != s)
    {
        return Err(Error::InvalidParam(
            "centers must share a non-zero dimension".into(),
        ));
    }
    if !(spec.noise_scale >= 0.0 && spec.noise_scale.is_finite()) {
        return Err(Error::InvalidParam(
            "noise_scale must be finite and >= 0".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_scale).expect("validated scale");
    let mut data = Matrix::zeros(spec.n, p + s);
    let mut blob_labels = Vec::with_capacity(spec.n);
    let mut class_labels = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let blob = i % b;
        let class = (i / b) % c;
        let row = data.row_mut(i);
        for (slot, &center) in row[..p].iter_mut().zip(&spec.qid_blob_centers[blob]) {
            *slot = center + noise.sample(&mut rng);
        }
        for (slot, &center) in row[p..].iter_mut().zip(&spec.conf_class_centers[class]) {
            *slot = center + noise.sample(&mut rng);
        }
        blob_labels.push(blob);
        class_labels.push(class);
    }

    let attributes = (0..p)
        .map(|j| Attribute::new(format!("q{j}"), Role::QuasiIdentifier))
        .chain((0..s).map(|j| Attribute::new(format!("s{j}"), Role::Confidential)))
        .collect();
    Ok(Synthetic {
        data: Microdata::new(AttributeSchema::new(attributes)?, data)?,
        blob_labels,
        class_labels,
    })
}
