use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::features::SituationFeatureTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    /// Euclidean distance between rows of the encoded feature matrix.
    EuclideanOnEncoded,
    /// Unit-cost edit distance between activity sequences.
    LevenshteinOnActivitySequences,
}

/// Two situations are similar iff their distance is at most `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceConfig {
    pub metric: Metric,
    pub alpha: f64,
}

/// A symmetric, non-negative distance over `len()` items.
pub trait PairwiseDistance: Sync {
    fn len(&self) -> usize;
    fn distance(&self, i: usize, j: usize) -> f64;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub struct EncodedRows<'a>(pub ArrayView2<'a, f64>);

impl PairwiseDistance for EncodedRows<'_> {
    fn len(&self) -> usize {
        self.0.nrows()
    }

    fn distance(&self, i: usize, j: usize) -> f64 {
        self.0
            .row(i)
            .iter()
            .zip(self.0.row(j).iter())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }
}

pub struct ActivitySequences<'a>(pub Vec<&'a [u32]>);

impl PairwiseDistance for ActivitySequences<'_> {
    fn len(&self) -> usize {
        self.0.len()
    }

    fn distance(&self, i: usize, j: usize) -> f64 {
        levenshtein(self.0[i], self.0[j]) as f64
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Edit distance with unit insert/delete/substitute costs over token sequences.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (a, b) = if a.len() < b.len() { (b, a) } else { (a, b) };
    if b.is_empty() {
        return a.len();
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let above = row[j + 1];
            row[j + 1] = if x == y {
                diag
            } else {
                1 + diag.min(above).min(row[j])
            };
            diag = above;
        }
    }
    row[b.len()]
}

/// Distance between table rows `i` and `j` under `cfg`; `matrix` is the
/// encoded feature matrix of `table`.
pub fn distance(
    i: usize,
    j: usize,
    cfg: &DistanceConfig,
    table: &SituationFeatureTable,
    matrix: ArrayView2<'_, f64>,
) -> f64 {
    match cfg.metric {
        Metric::EuclideanOnEncoded => EncodedRows(matrix).distance(i, j),
        Metric::LevenshteinOnActivitySequences => {
            levenshtein(&table.rows[i].trace, &table.rows[j].trace) as f64
        }
    }
}
