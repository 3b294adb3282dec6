//! Lloyd's k-means with k-means++ seeding.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{CoverError, Provenance, VicinityCover};

pub const DEFAULT_MAX_ITER: usize = 300;

#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub cover: VicinityCover,
    pub centroids: Array2<f64>,
    /// Sum of squared distances to the assigned centroid after every iteration.
    pub objective_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn plus_plus_init(data: ArrayView2<'_, f64>, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = data.nrows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut closest: Vec<f64> = (0..n)
        .map(|i| sq_dist(data.row(i), data.row(chosen[0])))
        .collect();
    while chosen.len() < k {
        let total: f64 = closest.iter().sum();
        let next = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &d) in closest.iter().enumerate() {
                if d > 0.0 {
                    pick = Some(i);
                    if r < d {
                        break;
                    }
                    r -= d;
                }
            }
            pick.expect("positive mass")
        } else {
            // every remaining point coincides with a centre
            (0..n).find(|i| !chosen.contains(i)).expect("k <= n")
        };
        chosen.push(next);
        for (i, c) in closest.iter_mut().enumerate() {
            *c = c.min(sq_dist(data.row(i), data.row(next)));
        }
    }
    chosen
}

fn assign(data: ArrayView2<'_, f64>, centroids: &Array2<f64>) -> Vec<usize> {
    (0..data.nrows())
        .into_par_iter()
        .map(|i| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, centroid) in centroids.rows().into_iter().enumerate() {
                let d = sq_dist(data.row(i), centroid);
                if d < best_d {
                    best = c;
                    best_d = d;
                }
            }
            best
        })
        .collect()
}

fn update(data: ArrayView2<'_, f64>, labels: &[usize], centroids: &mut Array2<f64>) -> Vec<usize> {
    let mut counts = vec![0usize; centroids.nrows()];
    let mut sums = Array2::<f64>::zeros(centroids.dim());
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        let mut row = sums.row_mut(l);
        row += &data.row(i);
    }
    for (c, &count) in counts.iter().enumerate() {
        if count > 0 {
            let mean = &sums.row(c) / count as f64;
            centroids.row_mut(c).assign(&mean);
        }
    }
    counts
}

fn objective(data: ArrayView2<'_, f64>, labels: &[usize], centroids: &Array2<f64>) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| sq_dist(data.row(i), centroids.row(l)))
        .sum()
}

/// Refills empty clusters with the point farthest from its centroid, taken
/// from clusters that keep at least one member.
fn repair_empty(
    data: ArrayView2<'_, f64>,
    labels: &mut [usize],
    centroids: &mut Array2<f64>,
    counts: &mut [usize],
) -> bool {
    let mut repaired = false;
    for empty in 0..counts.len() {
        if counts[empty] > 0 {
            continue;
        }
        let mut far = None;
        let mut far_d = 0.0;
        for (i, &l) in labels.iter().enumerate() {
            if counts[l] < 2 {
                continue;
            }
            let d = sq_dist(data.row(i), centroids.row(l));
            if d > far_d {
                far = Some(i);
                far_d = d;
            }
        }
        let Some(i) = far else { break };
        counts[labels[i]] -= 1;
        labels[i] = empty;
        counts[empty] = 1;
        centroids.row_mut(empty).assign(&data.row(i));
        repaired = true;
    }
    if repaired {
        update(data, labels, centroids);
    }
    repaired
}

/// Clusters the rows of `data` into at most `k` groups.
pub fn kmeans(
    data: ArrayView2<'_, f64>,
    k: usize,
    seed: u64,
    max_iter: usize,
) -> Result<KMeansFit, CoverError> {
    let n = data.nrows();
    if n == 0 {
        return Err(CoverError::Empty);
    }
    if k == 0 {
        return Err(CoverError::InvalidParameter("k must be positive".into()));
    }
    if k > n {
        return Err(CoverError::KTooLarge { k, n });
    }
    if max_iter == 0 {
        return Err(CoverError::InvalidParameter(
            "max_iter must be positive".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds = plus_plus_init(data, k, &mut rng);
    let mut centroids = Array2::zeros((k, data.ncols()));
    for (c, &i) in seeds.iter().enumerate() {
        centroids.row_mut(c).assign(&data.row(i));
    }

    let mut labels: Vec<usize> = Vec::new();
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        let next = assign(data, &centroids);
        if next == labels {
            converged = true;
            break;
        }
        labels = next;
        iterations += 1;
        let mut counts = update(data, &labels, &mut centroids);
        repair_empty(data, &mut labels, &mut centroids, &mut counts);
        history.push(objective(data, &labels, &centroids));
    }

    let provenance = Provenance::new("kmeans")
        .param("k", k)
        .param("max_iter", max_iter)
        .param("init", "k-means++")
        .seed(seed);
    Ok(KMeansFit {
        cover: VicinityCover::from_labels(&labels, provenance),
        centroids,
        objective_history: history,
        iterations,
        converged,
    })
}

pub fn kmeans_cover(
    data: ArrayView2<'_, f64>,
    k: usize,
    seed: u64,
    max_iter: usize,
) -> Result<VicinityCover, CoverError> {
    kmeans(data, k, seed, max_iter).map(|fit| fit.cover)
}
