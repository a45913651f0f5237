//! Microdata k-anonymity through microaggregation: classical MDAV and
//! univariate heuristics, a fuzzy-possibilistic hybrid that keeps
//! confidential values diverse inside every group, and the usual disclosure
//! risk and utility measures.

pub mod dataset;
pub mod error;
pub mod fpclust;
pub mod matrix;
pub mod metrics;
pub mod microagg;

pub use dataset::{Attribute, AttributeSchema, ColumnStats, Microdata, NormalizeMode, Role};
pub use error::{Error, Result};
pub use fpclust::{ClusterModel, FuzzinessParams};
pub use matrix::Matrix;
pub use metrics::{evaluate, ClassAssignment, EvaluationReport};
pub use microagg::{anonymize, AnonymizationConfig, AnonymizedResult, Method, Partition};
