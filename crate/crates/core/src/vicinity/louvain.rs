//! Louvain community detection (local moving + aggregation) at resolution 1.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Provenance, SimilarityGraph, VicinityCover};

/// Moves must beat staying put by more than this, in edge-weight units.
const MIN_GAIN: f64 = 1e-12;

/// Weighted graph with explicit self-loops; `loops[i]` is `A_ii`, counted once
/// per ordered pair so that `Σ_i degree[i] = 2m` holds at every level.
struct Level {
    adj: Vec<Vec<(usize, f64)>>,
    loops: Vec<f64>,
    degree: Vec<f64>,
}

impl Level {
    fn from_graph(g: &SimilarityGraph) -> Self {
        let adj: Vec<Vec<(usize, f64)>> = g
            .adjacency
            .iter()
            .map(|ns| ns.iter().map(|&j| (j, 1.0)).collect())
            .collect();
        let degree = adj.iter().map(|ns| ns.len() as f64).collect();
        Level {
            loops: vec![0.0; adj.len()],
            adj,
            degree,
        }
    }

    fn len(&self) -> usize {
        self.adj.len()
    }

    fn aggregate(&self, community: &[usize], count: usize) -> Level {
        let mut loops = vec![0.0; count];
        let mut links: Vec<HashMap<usize, f64>> = vec![HashMap::new(); count];
        for i in 0..self.len() {
            let a = community[i];
            loops[a] += self.loops[i];
            for &(j, w) in &self.adj[i] {
                let b = community[j];
                if a == b {
                    loops[a] += w;
                } else {
                    *links[a].entry(b).or_insert(0.0) += w;
                }
            }
        }
        let adj: Vec<Vec<(usize, f64)>> = links
            .into_iter()
            .map(|m| {
                let mut v: Vec<(usize, f64)> = m.into_iter().collect();
                v.sort_unstable_by_key(|&(j, _)| j);
                v
            })
            .collect();
        let degree = adj
            .iter()
            .zip(&loops)
            .map(|(ns, l)| ns.iter().map(|&(_, w)| w).sum::<f64>() + l)
            .collect();
        Level { adj, loops, degree }
    }
}

/// Newman modularity of a labelling of `graph` (0 for an edgeless graph).
pub fn modularity(graph: &SimilarityGraph, labels: &[usize]) -> f64 {
    let two_m = (2 * graph.edge_count()) as f64;
    if two_m == 0.0 {
        return 0.0;
    }
    let mut internal: BTreeMap<usize, f64> = BTreeMap::new();
    let mut total: BTreeMap<usize, f64> = BTreeMap::new();
    for (i, ns) in graph.adjacency.iter().enumerate() {
        *total.entry(labels[i]).or_insert(0.0) += ns.len() as f64;
        let same = ns.iter().filter(|&&j| labels[j] == labels[i]).count();
        *internal.entry(labels[i]).or_insert(0.0) += same as f64;
    }
    total
        .iter()
        .map(|(c, tot)| internal.get(c).copied().unwrap_or(0.0) / two_m - (tot / two_m).powi(2))
        .sum()
}

/// One local-moving phase. Returns whether any node changed community;
/// `on_move` observes the labelling after every move.
fn local_moving(
    level: &Level,
    order: &[usize],
    community: &mut [usize],
    mut on_move: impl FnMut(&[usize]),
) -> bool {
    let n = level.len();
    let two_m: f64 = level.degree.iter().sum();
    if two_m == 0.0 {
        return false;
    }
    let mut tot = vec![0.0; n];
    for i in 0..n {
        tot[community[i]] += level.degree[i];
    }
    let mut weight_to = vec![0.0; n];
    let mut is_touched = vec![false; n];
    let mut touched: Vec<usize> = Vec::new();
    let mut moved_any = false;

    loop {
        let mut moved = false;
        for &i in order {
            let own = community[i];
            let k_i = level.degree[i];
            for &c in &touched {
                weight_to[c] = 0.0;
                is_touched[c] = false;
            }
            touched.clear();
            touched.push(own);
            is_touched[own] = true;
            for &(j, w) in &level.adj[i] {
                let c = community[j];
                if !is_touched[c] {
                    is_touched[c] = true;
                    touched.push(c);
                }
                weight_to[c] += w;
            }

            tot[own] -= k_i;
            let gain =
                |c: usize, tot: &[f64], weight_to: &[f64]| weight_to[c] - tot[c] * k_i / two_m;
            let stay = gain(own, &tot, &weight_to);
            let mut best = own;
            let mut best_gain = stay;
            for &c in &touched {
                let g = gain(c, &tot, &weight_to);
                if g > best_gain {
                    best = c;
                    best_gain = g;
                }
            }
            if best != own && best_gain - stay <= MIN_GAIN {
                best = own;
            }
            tot[best] += k_i;
            if best != own {
                community[i] = best;
                moved = true;
                moved_any = true;
                on_move(community);
            }
        }
        if !moved {
            break;
        }
    }
    moved_any
}

/// Renumbers labels densely in order of first appearance.
fn compact(labels: &mut [usize]) -> usize {
    let mut map: HashMap<usize, usize> = HashMap::new();
    for l in labels.iter_mut() {
        let next = map.len();
        *l = *map.entry(*l).or_insert(next);
    }
    map.len()
}

pub(crate) fn louvain_labels(graph: &SimilarityGraph, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut level = Level::from_graph(graph);
    let mut membership: Vec<usize> = (0..graph.node_count()).collect();

    loop {
        let n = level.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut community: Vec<usize> = (0..n).collect();
        if !local_moving(&level, &order, &mut community, |_| {}) {
            break;
        }
        let count = compact(&mut community);
        for m in membership.iter_mut() {
            *m = community[*m];
        }
        if count == n {
            break;
        }
        level = level.aggregate(&community, count);
    }
    compact(&mut membership);
    membership
}

/// Partitions the similarity graph into communities. Isolated nodes end up as
/// singleton vicinities; the result depends only on the graph and `seed`.
pub fn louvain(graph: &SimilarityGraph, seed: u64) -> VicinityCover {
    let labels = louvain_labels(graph, seed);
    let provenance = Provenance::new("louvain")
        .param("resolution", 1.0)
        .seed(seed);
    VicinityCover::from_labels(&labels, provenance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn triangles() -> SimilarityGraph {
        SimilarityGraph::from_edges(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])
    }

    pub(crate) fn planted(seed: u64) -> (SimilarityGraph, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth: Vec<usize> = (0..60).map(|i| i / 20).collect();
        let mut edges = Vec::new();
        for i in 0..60 {
            for j in (i + 1)..60 {
                let p = if truth[i] == truth[j] { 0.5 } else { 0.02 };
                if rng.random::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }
        (SimilarityGraph::from_edges(60, &edges), truth)
    }

    #[test]
    fn two_triangles_give_two_communities() {
        let cover = louvain(&triangles(), 1);
        assert_eq!(cover.vicinities, vec![vec![0, 1, 2], vec![3, 4, 5]]);
    }

    #[test]
    fn edgeless_graph_gives_singletons() {
        let cover = louvain(&SimilarityGraph::from_edges(5, &[]), 3);
        assert_eq!(cover.len(), 5);
        assert!(cover.vicinities.iter().all(|v| v.len() == 1));
    }

    #[test]
    fn modularity_of_known_partitions() {
        let g = triangles();
        // two disconnected triangles split perfectly: 2 * (6/12 - (6/12)^2)
        assert!((modularity(&g, &[0, 0, 0, 1, 1, 1]) - 0.5).abs() < 1e-12);
        assert!((modularity(&g, &[0; 6])).abs() < 1e-12);
        let singletons: Vec<usize> = (0..6).collect();
        assert!((modularity(&g, &singletons) + 6.0 / 36.0).abs() < 1e-12);
    }

    #[test]
    fn recovers_planted_partition() {
        for seed in 0..5 {
            let (g, truth) = planted(seed);
            let cover = louvain(&g, seed);
            let found = modularity(&g, &cover.assignment);
            assert!(found >= modularity(&g, &truth) - 0.02, "seed {seed}");
            cover.check_partition(60).unwrap();
        }
    }

    #[test]
    fn every_local_move_increases_modularity() {
        let (g, _) = planted(9);
        let level = Level::from_graph(&g);
        let order: Vec<usize> = (0..60).rev().collect();
        let mut community: Vec<usize> = (0..60).collect();
        let mut last = modularity(&g, &community);
        let mut moves = 0;
        local_moving(&level, &order, &mut community, |labels| {
            let q = modularity(&g, labels);
            assert!(q > last, "move decreased modularity: {last} -> {q}");
            last = q;
            moves += 1;
        });
        assert!(moves > 0);
    }

    #[test]
    fn same_seed_same_result() {
        let (g, _) = planted(4);
        assert_eq!(louvain(&g, 42), louvain(&g, 42));
    }
}
