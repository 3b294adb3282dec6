//! CART regression tree whose leaves serve as vicinities.
//!
//! Splits are binary, chosen by maximal reduction of the sum of squared
//! errors. Candidate thresholds are midpoints between consecutive distinct
//! values of a column; on one-hot columns this is a category-membership test.
//! Ties go to the lowest column index, then the lowest threshold.

use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::Serialize;

use super::{CoverError, Provenance, VicinityCover};
use crate::features::{ColumnEncoding, EncodingReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: 5,
            min_leaf: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Condition {
    pub column: usize,
    /// `true` for `x[column] <= threshold`, `false` for `x[column] > threshold`.
    pub le: bool,
    pub threshold: f64,
    /// Readable form in original feature units.
    pub text: String,
}

impl Condition {
    pub fn holds(&self, x: &[f64]) -> bool {
        (x[self.column] <= self.threshold) == self.le
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeafDescription {
    pub vicinity_id: usize,
    pub size: usize,
    pub mean: f64,
    pub depth: usize,
    pub path: Vec<Condition>,
}

impl LeafDescription {
    pub fn matches(&self, x: &[f64]) -> bool {
        self.path.iter().all(|c| c.holds(x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "node", rename_all = "snake_case")]
enum Node {
    Split {
        column: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        leaf: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionTree {
    nodes: Vec<Node>,
    pub leaves: Vec<LeafDescription>,
}

impl RegressionTree {
    /// Index of the leaf that `x` (an encoded row) falls into.
    pub fn leaf_for(&self, x: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { leaf } => return leaf,
                Node::Split {
                    column,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[column] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        self.leaves.iter().map(|l| l.depth).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone)]
pub struct TreeCover {
    pub cover: VicinityCover,
    pub tree: RegressionTree,
}

#[derive(Debug, Clone, Copy)]
struct Split {
    column: usize,
    threshold: f64,
    gain: f64,
}

fn sse(rows: &[usize], y: &[f64]) -> (f64, f64) {
    let mean = rows.iter().map(|&r| y[r]).sum::<f64>() / rows.len() as f64;
    let sse = rows.iter().map(|&r| (y[r] - mean).powi(2)).sum();
    (mean, sse)
}

fn best_split_on(
    column: usize,
    rows: &[usize],
    x: ArrayView2<'_, f64>,
    y: &[f64],
    mean: f64,
    min_leaf: usize,
) -> Option<Split> {
    let mut sorted: Vec<(f64, f64)> = rows
        .iter()
        .map(|&r| (x[[r, column]], y[r] - mean))
        .collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = sorted.len();
    let total: f64 = sorted.iter().map(|p| p.1).sum();
    let base = total * total / n as f64;
    let mut left_sum = 0.0;
    let mut best: Option<Split> = None;
    for i in 0..n - 1 {
        left_sum += sorted[i].1;
        let (lo, hi) = (sorted[i].0, sorted[i + 1].0);
        let left_n = i + 1;
        if lo == hi || left_n < min_leaf || n - left_n < min_leaf {
            continue;
        }
        let right_sum = total - left_sum;
        let gain = left_sum * left_sum / left_n as f64
            + right_sum * right_sum / (n - left_n) as f64
            - base;
        if best.is_none_or(|b| gain > b.gain) {
            let mut threshold = lo + (hi - lo) / 2.0;
            if threshold >= hi {
                threshold = lo;
            }
            best = Some(Split {
                column,
                threshold,
                gain,
            });
        }
    }
    best
}

struct Builder<'a> {
    x: ArrayView2<'a, f64>,
    y: &'a [f64],
    cfg: TreeConfig,
    names: &'a dyn Fn(usize, bool, f64) -> String,
    nodes: Vec<Node>,
    leaves: Vec<LeafDescription>,
    labels: Vec<usize>,
}

impl Builder<'_> {
    fn grow(&mut self, rows: Vec<usize>, depth: usize, path: Vec<Condition>) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { leaf: usize::MAX });
        let (mean, node_sse) = sse(&rows, self.y);

        let split = if depth < self.cfg.max_depth
            && rows.len() >= 2 * self.cfg.min_leaf
            && node_sse > 0.0
        {
            let candidates: Vec<Option<Split>> = (0..self.x.ncols())
                .into_par_iter()
                .map(|c| best_split_on(c, &rows, self.x, self.y, mean, self.cfg.min_leaf))
                .collect();
            candidates
                .into_iter()
                .flatten()
                .fold(None, |acc: Option<Split>, s| match acc {
                    Some(a) if s.gain <= a.gain => Some(a),
                    _ => Some(s),
                })
                .filter(|s| s.gain > 1e-12 * node_sse)
        } else {
            None
        };

        match split {
            Some(Split {
                column, threshold, ..
            }) => {
                let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
                    .into_iter()
                    .partition(|&r| self.x[[r, column]] <= threshold);
                let cond = |le: bool| Condition {
                    column,
                    le,
                    threshold,
                    text: (self.names)(column, le, threshold),
                };
                let mut left_path = path.clone();
                left_path.push(cond(true));
                let mut right_path = path;
                right_path.push(cond(false));
                let left = self.grow(left_rows, depth + 1, left_path);
                let right = self.grow(right_rows, depth + 1, right_path);
                self.nodes[id] = Node::Split {
                    column,
                    threshold,
                    left,
                    right,
                };
            }
            None => {
                let leaf = self.leaves.len();
                for &r in &rows {
                    self.labels[r] = leaf;
                }
                self.leaves.push(LeafDescription {
                    vicinity_id: leaf,
                    size: rows.len(),
                    mean,
                    depth,
                    path,
                });
                self.nodes[id] = Node::Leaf { leaf };
            }
        }
        id
    }
}

/// Readable predicate for an encoded column, in original units when the
/// encoding report is available.
fn describe(report: Option<&EncodingReport>, column: usize, le: bool, threshold: f64) -> String {
    let op = if le { "<=" } else { ">" };
    let Some(report) = report else {
        return format!("x{column} {op} {threshold}");
    };
    match report.encoding_of(column) {
        Some(ColumnEncoding::Numeric { feature, .. }) => {
            let raw = report.decode(column, threshold).unwrap_or(threshold);
            format!("{feature} {op} {raw}")
        }
        Some(ColumnEncoding::OneHot {
            feature,
            categories,
        }) => {
            let label = categories
                .iter()
                .find(|c| c.column == column)
                .map_or("?", |c| c.label.as_str());
            if le {
                format!("{feature} != {label}")
            } else {
                format!("{feature} = {label}")
            }
        }
        None => format!("x{column} {op} {threshold}"),
    }
}

/// Fits a regression tree of `target` on the encoded features and returns its
/// leaves as a cover. Leaves are numbered depth-first, left before right.
pub fn tree_cover(
    x: ArrayView2<'_, f64>,
    target: &[f64],
    cfg: TreeConfig,
    report: Option<&EncodingReport>,
) -> Result<TreeCover, CoverError> {
    let n = x.nrows();
    if n == 0 {
        return Err(CoverError::Empty);
    }
    if target.len() != n {
        return Err(CoverError::InvalidParameter(format!(
            "{} targets for {n} rows",
            target.len()
        )));
    }
    if cfg.max_depth == 0 || cfg.min_leaf == 0 {
        return Err(CoverError::InvalidParameter(
            "max_depth and min_leaf must be positive".into(),
        ));
    }
    let names = |c: usize, le: bool, t: f64| describe(report, c, le, t);
    let mut builder = Builder {
        x,
        y: target,
        cfg,
        names: &names,
        nodes: Vec::new(),
        leaves: Vec::new(),
        labels: vec![0; n],
    };
    builder.grow((0..n).collect(), 0, Vec::new());
    let provenance = Provenance::new("tree")
        .param("max_depth", cfg.max_depth)
        .param("min_leaf", cfg.min_leaf);
    Ok(TreeCover {
        cover: VicinityCover::from_labels(&builder.labels, provenance),
        tree: RegressionTree {
            nodes: builder.nodes,
            leaves: builder.leaves,
        },
    })
}
