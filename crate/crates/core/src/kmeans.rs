//! Lloyd k-means with k-means++ seeding and best-of-n restarts.

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from};

/// Which total decides between restarts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum InertiaKind {
    /// Sum of squared distances to the assigned centroid.
    #[default]
    Squared,
    /// Sum of plain Euclidean distances.
    Unsquared,
}

#[derive(Clone, Copy, Debug)]
pub struct KMeansOptions {
    pub restarts: usize,
    pub max_iters: usize,
    pub seed: u64,
    pub selection: InertiaKind,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_iters: 300,
            seed: 0,
            selection: InertiaKind::Squared,
        }
    }
}

#[derive(Clone, Debug)]
pub struct KMeansResult {
    pub centroids: DMatrix<f64>,
    pub assignments: Vec<usize>,
    /// Total squared distance of points to their centroids.
    pub inertia: f64,
    /// Total unsquared distance.
    pub sum_distances: f64,
    pub restarts_run: usize,
    pub seed: u64,
}

fn sq_dist(points: &DMatrix<f64>, j: usize, centroids: &DMatrix<f64>, c: usize) -> f64 {
    (points.column(j) - centroids.column(c)).norm_squared()
}

fn nearest(points: &DMatrix<f64>, j: usize, centroids: &DMatrix<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centroids.ncols() {
        let d = sq_dist(points, j, centroids, c);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_init<R: Rng>(points: &DMatrix<f64>, k: usize, rng: &mut R) -> DMatrix<f64> {
    let (d, n) = points.shape();
    let mut centroids = DMatrix::zeros(d, k);
    centroids.set_column(0, &points.column(rng.random_range(0..n)));
    let mut dist: Vec<f64> = (0..n).map(|j| sq_dist(points, j, &centroids, 0)).collect();
    for c in 1..k {
        let pick = match WeightedIndex::new(&dist) {
            Ok(w) => w.sample(rng),
            // Every point coincides with a chosen centroid.
            Err(_) => rng.random_range(0..n),
        };
        centroids.set_column(c, &points.column(pick));
        for (j, dj) in dist.iter_mut().enumerate() {
            *dj = dj.min(sq_dist(points, j, &centroids, c));
        }
    }
    centroids
}

fn update_centroids(points: &DMatrix<f64>, assignments: &[usize], k: usize) -> DMatrix<f64> {
    let mut centroids = DMatrix::zeros(points.nrows(), k);
    let mut counts = vec![0usize; k];
    for (j, &a) in assignments.iter().enumerate() {
        let mut c = centroids.column_mut(a);
        c += points.column(j);
        counts[a] += 1;
    }
    for (c, &n) in counts.iter().enumerate() {
        if n > 0 {
            centroids.column_mut(c).unscale_mut(n as f64);
        }
    }
    centroids
}

/// Moves the point farthest from its centroid, taken from a cluster with more
/// than one member, into each empty cluster.
fn repair_empty(
    points: &DMatrix<f64>,
    assignments: &mut [usize],
    centroids: &mut DMatrix<f64>,
    k: usize,
) {
    loop {
        let mut counts = vec![0usize; k];
        for &a in assignments.iter() {
            counts[a] += 1;
        }
        let Some(empty) = counts.iter().position(|&n| n == 0) else {
            return;
        };
        let donor = (0..assignments.len())
            .filter(|&j| counts[assignments[j]] > 1)
            .map(|j| (j, sq_dist(points, j, centroids, assignments[j])))
            .fold(None::<(usize, f64)>, |best, cur| match best {
                Some(b) if b.1 >= cur.1 => Some(b),
                _ => Some(cur),
            });
        let (j, _) = donor.expect("k <= n guarantees a donor");
        assignments[j] = empty;
        centroids.set_column(empty, &points.column(j));
        *centroids = update_centroids(points, assignments, k);
    }
}

fn totals(points: &DMatrix<f64>, assignments: &[usize], centroids: &DMatrix<f64>) -> (f64, f64) {
    assignments
        .iter()
        .enumerate()
        .map(|(j, &a)| sq_dist(points, j, centroids, a))
        .fold((0.0, 0.0), |(s, u), d| (s + d, u + d.sqrt()))
}

fn single_run(points: &DMatrix<f64>, k: usize, max_iters: usize, seed: u64) -> KMeansResult {
    let n = points.ncols();
    let mut rng = rng_from(seed);
    let mut centroids = plus_plus_init(points, k, &mut rng);
    let mut assignments = vec![usize::MAX; n];
    for _ in 0..max_iters.max(1) {
        let next: Vec<usize> = (0..n).map(|j| nearest(points, j, &centroids).0).collect();
        let changed = next != assignments;
        assignments = next;
        centroids = update_centroids(points, &assignments, k);
        repair_empty(points, &mut assignments, &mut centroids, k);
        if !changed {
            break;
        }
    }
    let (inertia, sum_distances) = totals(points, &assignments, &centroids);
    KMeansResult {
        centroids,
        assignments,
        inertia,
        sum_distances,
        restarts_run: 1,
        seed,
    }
}

/// Clusters the columns of `points` into `k` groups.
pub fn kmeans(points: &DMatrix<f64>, k: usize, opts: &KMeansOptions) -> Result<KMeansResult> {
    let n = points.ncols();
    if k == 0 {
        return Err(Error::Input("cluster count must be at least 1".into()));
    }
    if k > n {
        return Err(Error::Input(format!(
            "cannot form {k} clusters from {n} points"
        )));
    }
    if opts.restarts == 0 {
        return Err(Error::Config("k-means needs at least one restart".into()));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite point passed to k-means".into()));
    }
    let runs: Vec<KMeansResult> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            single_run(
                points,
                k,
                opts.max_iters,
                derive_seed(opts.seed, &[r as u64]),
            )
        })
        .collect();
    let score = |r: &KMeansResult| match opts.selection {
        InertiaKind::Squared => r.inertia,
        InertiaKind::Unsquared => r.sum_distances,
    };
    // Lowest score wins; the earliest restart breaks ties.
    let mut best = runs
        .into_iter()
        .reduce(|a, b| if score(&b) < score(&a) { b } else { a })
        .expect("at least one restart");
    best.restarts_run = opts.restarts;
    best.seed = opts.seed;
    Ok(best)
}

/// Mean of the columns, the optimum for a single cluster.
pub fn mean_point(points: &DMatrix<f64>) -> DVector<f64> {
    points.column_mean()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::testutil::gaussian;

    #[test]
    fn one_point_per_cluster() {
        let x = gaussian(3, 6, 1);
        let r = kmeans(&x, 6, &KMeansOptions::default()).unwrap();
        assert!(r.inertia.abs() <= 1e-24);
        let mut seen = r.assignments.clone();
        seen.sort();
        assert_eq!(seen, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let x = gaussian(4, 9, 2);
        let r = kmeans(&x, 1, &KMeansOptions::default()).unwrap();
        assert!((r.centroids.column(0) - mean_point(&x)).norm() <= 1e-12);
    }

    #[test]
    fn inertia_matches_recomputation() {
        let x = gaussian(3, 40, 3);
        let r = kmeans(&x, 4, &KMeansOptions::default()).unwrap();
        let mut total = 0.0;
        for (j, &a) in r.assignments.iter().enumerate() {
            total += (x.column(j) - r.centroids.column(a)).norm_squared();
        }
        assert!((total - r.inertia).abs() <= 1e-8 * total);
        assert_eq!(r.restarts_run, 10);
    }

    #[test]
    fn separated_blobs_match_exhaustive_optimum() {
        let noise = gaussian(2, 12, 4);
        let mut x = noise.clone();
        for j in 6..12 {
            x[(0, j)] += 20.0;
        }
        let r = kmeans(&x, 2, &KMeansOptions::default()).unwrap();
        let truth: Vec<usize> = (0..12).map(|j| usize::from(j >= 6)).collect();
        let flipped: Vec<usize> = truth.iter().map(|t| 1 - t).collect();
        assert!(r.assignments == truth || r.assignments == flipped);

        // Oracle: best of all 2^12 two-way splits.
        let mut best = f64::INFINITY;
        for mask in 1u32..(1 << 12) - 1 {
            let labels: Vec<usize> = (0..12).map(|j| ((mask >> j) & 1) as usize).collect();
            let c = update_centroids(&x, &labels, 2);
            best = best.min(totals(&x, &labels, &c).0);
        }
        assert!((r.inertia - best).abs() <= 1e-9 * best);
    }

    #[test]
    fn duplicate_points_still_fill_every_cluster() {
        let x = DMatrix::from_column_slice(1, 5, &[1.0, 1.0, 1.0, 1.0, 2.0]);
        let r = kmeans(&x, 3, &KMeansOptions::default()).unwrap();
        for c in 0..3 {
            assert!(r.assignments.contains(&c));
        }
    }

    #[test]
    fn errors_and_determinism() {
        let x = gaussian(2, 3, 5);
        assert!(matches!(
            kmeans(&x, 4, &KMeansOptions::default()),
            Err(Error::Input(_))
        ));
        let y = gaussian(3, 30, 6);
        let opts = KMeansOptions {
            seed: 99,
            selection: InertiaKind::Unsquared,
            ..KMeansOptions::default()
        };
        let a = kmeans(&y, 3, &opts).unwrap();
        let b = kmeans(&y, 3, &opts).unwrap();
        assert_eq!(a.assignments, b.assignments);
        assert_eq!(a.centroids, b.centroids);
    }
}
