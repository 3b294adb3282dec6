use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::{
    build_similarity_graph, kmeans_cover, louvain, tree_cover, ActivitySequences, CoverError,
    EncodedRows, Metric, Provenance, RegressionTree, TreeConfig, VicinityCover, DEFAULT_MAX_ITER,
};
use crate::features::{EncodingReport, SituationFeatureTable};

/// How to partition the situations into vicinities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum MethodConfig {
    Similarity {
        #[serde(default = "default_metric")]
        metric: Metric,
        #[serde(default = "default_alpha")]
        alpha: f64,
    },
    Kmeans {
        #[serde(default = "default_k")]
        k: usize,
        #[serde(default = "default_max_iter")]
        max_iter: usize,
    },
    Tree {
        #[serde(default = "default_depth")]
        max_depth: usize,
        #[serde(default = "default_min_leaf")]
        min_leaf: usize,
    },
    /// The whole situation set as one vicinity.
    Baseline,
}

fn default_metric() -> Metric {
    Metric::EuclideanOnEncoded
}
fn default_alpha() -> f64 {
    1.4
}
fn default_k() -> usize {
    25
}
fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}
fn default_depth() -> usize {
    TreeConfig::default().max_depth
}
fn default_min_leaf() -> usize {
    TreeConfig::default().min_leaf
}

pub const METHOD_NAMES: [&str; 4] = ["similarity", "kmeans", "tree", "baseline"];

impl MethodConfig {
    pub fn name(&self) -> &'static str {
        match self {
            MethodConfig::Similarity { .. } => "similarity",
            MethodConfig::Kmeans { .. } => "kmeans",
            MethodConfig::Tree { .. } => "tree",
            MethodConfig::Baseline => "baseline",
        }
    }

    /// Default parameters for a method given by name.
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "similarity" => MethodConfig::Similarity {
                metric: default_metric(),
                alpha: default_alpha(),
            },
            "kmeans" => MethodConfig::Kmeans {
                k: default_k(),
                max_iter: default_max_iter(),
            },
            "tree" => MethodConfig::Tree {
                max_depth: default_depth(),
                min_leaf: default_min_leaf(),
            },
            "baseline" => MethodConfig::Baseline,
            _ => return None,
        })
    }

    pub fn check(&self) -> Result<(), CoverError> {
        let bad = |m: &str| Err(CoverError::InvalidParameter(m.into()));
        match *self {
            MethodConfig::Similarity { alpha, .. } if !(alpha >= 0.0 && alpha.is_finite()) => {
                bad("alpha must be a non-negative number")
            }
            MethodConfig::Kmeans { k: 0, .. } => bad("k must be positive"),
            MethodConfig::Kmeans { max_iter: 0, .. } => bad("max_iter must be positive"),
            MethodConfig::Tree { max_depth: 0, .. } => bad("max_depth must be at least 1"),
            MethodConfig::Tree { min_leaf: 0, .. } => bad("min_leaf must be at least 1"),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BuiltCover {
    pub cover: VicinityCover,
    pub tree: Option<RegressionTree>,
}

/// Runs the configured method on a feature table and its encoded matrix.
pub fn build_cover(
    method: &MethodConfig,
    table: &SituationFeatureTable,
    matrix: ArrayView2<'_, f64>,
    report: &EncodingReport,
    seed: u64,
) -> Result<BuiltCover, CoverError> {
    method.check()?;
    let n = table.len();
    if n == 0 {
        return Err(CoverError::Empty);
    }
    let (cover, tree) = match *method {
        MethodConfig::Similarity { metric, alpha } => {
            let graph = match metric {
                Metric::EuclideanOnEncoded => build_similarity_graph(&EncodedRows(matrix), alpha),
                Metric::LevenshteinOnActivitySequences => {
                    build_similarity_graph(&ActivitySequences(table.traces()), alpha)
                }
            };
            log::info!(
                "similarity graph: {} nodes, {} edges",
                graph.node_count(),
                graph.edge_count()
            );
            let mut cover = louvain(&graph, seed);
            cover.provenance = Provenance::new("similarity")
                .param(
                    "metric",
                    serde_json::to_value(metric).expect("metric serializes"),
                )
                .param("alpha", alpha)
                .param("community_detection", "louvain")
                .param("resolution", 1.0)
                .param("edges", graph.edge_count())
                .seed(seed);
            (cover, None)
        }
        MethodConfig::Kmeans { k, max_iter } => (kmeans_cover(matrix, k, seed, max_iter)?, None),
        MethodConfig::Tree {
            max_depth,
            min_leaf,
        } => {
            let fit = tree_cover(
                matrix,
                &table.targets(),
                TreeConfig {
                    max_depth,
                    min_leaf,
                },
                Some(report),
            )?;
            (fit.cover, Some(fit.tree))
        }
        MethodConfig::Baseline => (VicinityCover::single(n, Provenance::new("baseline")), None),
    };
    cover.check_partition(n)?;
    Ok(BuiltCover { cover, tree })
}
