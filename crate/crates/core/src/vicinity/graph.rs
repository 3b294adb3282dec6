use rayon::prelude::*;

use super::PairwiseDistance;

/// Unweighted, undirected similarity graph without self-loops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimilarityGraph {
    /// Sorted neighbour lists; `j ∈ adjacency[i]` iff `i ∈ adjacency[j]`.
    pub adjacency: Vec<Vec<usize>>,
}

impl SimilarityGraph {
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a != b {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        SimilarityGraph { adjacency }
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].binary_search(&j).is_ok()
    }

    /// Edges `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, ns)| ns.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }
}

/// Evaluates all `n(n-1)/2` pairs and links those at distance ≤ `alpha`.
///
/// Cost is quadratic in the number of situations in both time and, for dense
/// neighbourhoods, memory.
pub fn build_similarity_graph<D: PairwiseDistance>(dist: &D, alpha: f64) -> SimilarityGraph {
    let n = dist.len();
    let upper: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..n)
                .filter(|&j| dist.distance(i, j) <= alpha)
                .collect()
        })
        .collect();
    let mut adjacency = vec![Vec::new(); n];
    for (i, ns) in upper.iter().enumerate() {
        for &j in ns {
            adjacency[j].push(i);
        }
    }
    for (i, ns) in upper.into_iter().enumerate() {
        adjacency[i].extend(ns);
    }
    SimilarityGraph { adjacency }
}
