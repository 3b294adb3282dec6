//! Vicinity covers: partitions of the situation set into groups of similar
//! situations.
//!
//! Three strategies are provided:
//! - a similarity graph (edge iff distance ≤ α) partitioned by Louvain,
//! - k-means on the encoded descriptive features,
//! - the leaves of a regression tree predicting the target.
//!
//! Every strategy returns a [`VicinityCover`], which is always a partition of
//! the row indices `0..n`.

mod distance;
mod graph;
mod kmeans;
mod louvain;
mod method;
mod tree;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use distance::{
    distance, euclidean, levenshtein, ActivitySequences, DistanceConfig, EncodedRows, Metric,
    PairwiseDistance,
};
pub use graph::{build_similarity_graph, SimilarityGraph};
pub use kmeans::{kmeans, kmeans_cover, KMeansFit, DEFAULT_MAX_ITER};
pub use louvain::{louvain, modularity};
pub use method::{build_cover, BuiltCover, MethodConfig, METHOD_NAMES};
pub use tree::{tree_cover, Condition, LeafDescription, RegressionTree, TreeConfig, TreeCover};

#[derive(Debug, Error, PartialEq)]
pub enum CoverError {
    #[error("k = {k} exceeds the number of rows ({n})")]
    KTooLarge { k: usize, n: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("empty input")]
    Empty,
    #[error("not a partition: {0}")]
    NotAPartition(String),
}

/// Which method produced a cover, with its parameters.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub method: String,
    pub params: BTreeMap<String, serde_json::Value>,
    pub seed: Option<u64>,
}

impl Provenance {
    pub fn new(method: &str) -> Self {
        Provenance {
            method: method.into(),
            ..Default::default()
        }
    }

    pub fn param(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.params.insert(key.into(), value.into());
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VicinityCover {
    /// Vicinity id of every row.
    pub assignment: Vec<usize>,
    /// Row indices of every vicinity, ascending.
    pub vicinities: Vec<Vec<usize>>,
    pub provenance: Provenance,
}

impl VicinityCover {
    /// Builds a cover from arbitrary per-row labels. Vicinity ids follow the
    /// ascending order of the labels.
    pub fn from_labels(labels: &[usize], provenance: Provenance) -> Self {
        let mut ids = BTreeMap::new();
        for &l in labels {
            ids.entry(l).or_insert(0);
        }
        for (i, id) in ids.values_mut().enumerate() {
            *id = i;
        }
        let assignment: Vec<usize> = labels.iter().map(|l| ids[l]).collect();
        let mut vicinities = vec![Vec::new(); ids.len()];
        for (row, &v) in assignment.iter().enumerate() {
            vicinities[v].push(row);
        }
        VicinityCover {
            assignment,
            vicinities,
            provenance,
        }
    }

    /// All `n` rows in one vicinity.
    pub fn single(n: usize, provenance: Provenance) -> Self {
        Self::from_labels(&vec![0; n], provenance)
    }

    pub fn len(&self) -> usize {
        self.vicinities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vicinities.is_empty()
    }

    pub fn num_rows(&self) -> usize {
        self.assignment.len()
    }

    /// Verifies that the cover partitions `0..n`: total assignment, non-empty
    /// vicinities, and agreement between both views.
    pub fn check_partition(&self, n: usize) -> Result<(), CoverError> {
        if self.assignment.len() != n {
            return Err(CoverError::NotAPartition(format!(
                "assignment covers {} rows, expected {n}",
                self.assignment.len()
            )));
        }
        let mut seen = vec![false; n];
        for (v, rows) in self.vicinities.iter().enumerate() {
            if rows.is_empty() {
                return Err(CoverError::NotAPartition(format!("vicinity {v} is empty")));
            }
            for &r in rows {
                if r >= n || seen[r] {
                    return Err(CoverError::NotAPartition(format!(
                        "row {r} is out of range or in two vicinities"
                    )));
                }
                seen[r] = true;
                if self.assignment[r] != v {
                    return Err(CoverError::NotAPartition(format!(
                        "row {r} assigned to {} but listed in {v}",
                        self.assignment[r]
                    )));
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(r) => Err(CoverError::NotAPartition(format!(
                "row {r} is in no vicinity"
            ))),
            None => Ok(()),
        }
    }
}
