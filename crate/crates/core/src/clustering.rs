//! Classical K-means: k-means++ seeding followed by Lloyd iterations.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `K × l` matrix of cluster representatives, one center per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Centroids(Array2<f64>);

impl Centroids {
    pub fn new(centers: Array2<f64>) -> Result<Self> {
        if centers.nrows() == 0 || centers.ncols() == 0 {
            return Err(Error::Config(format!(
                "centroids need K ≥ 1 and dimension ≥ 1, got {:?}",
                centers.dim()
            )));
        }
        if centers.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                tensor: "centroids".into(),
            });
        }
        Ok(Self(centers.as_standard_layout().into_owned()))
    }

    pub fn k(&self) -> usize {
        self.0.nrows()
    }

    pub fn dim(&self) -> usize {
        self.0.ncols()
    }

    pub fn center(&self, k: usize) -> ArrayView1<'_, f64> {
        self.0.row(k)
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub(crate) fn as_array_mut(&mut self) -> &mut Array2<f64> {
        &mut self.0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    /// Largest L2 distance between corresponding centers.
    pub fn max_shift(&self, other: &Centroids) -> f64 {
        self.0
            .rows()
            .into_iter()
            .zip(other.0.rows())
            .map(|(a, b)| squared_distance(a, b).sqrt())
            .fold(0.0, f64::max)
    }
}

/// Hard cluster labels in `[0, K)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    labels: Vec<usize>,
    k: usize,
}

impl Assignment {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= k) {
            return Err(Error::Input(format!("label {l} at position {i} is not below K = {k}")));
        }
        Ok(Self { labels, k })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<usize> {
        self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.k];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansSettings {
    pub max_iters: usize,
    pub tol: f64,
    /// Independent k-means++ restarts; the lowest objective wins.
    pub n_init: usize,
}

impl Default for KMeansSettings {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol: 1e-6,
            n_init: 10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LloydStep {
    pub centroids: Centroids,
    pub assignment: Assignment,
    /// Sum of squared distances under the new assignment and the input centers.
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub centroids: Centroids,
    /// Nearest-center labels under the final centroids.
    pub assignment: Assignment,
    /// Objective of `assignment` against `centroids`.
    pub objective: f64,
    pub iterations: usize,
    /// Per-iteration Lloyd objectives.
    pub history: Vec<f64>,
}

pub fn squared_distance(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_dims(points: ArrayView2<'_, f64>, centroids: &Centroids) -> Result<()> {
    if points.ncols() != centroids.dim() {
        return Err(Error::shape(
            "points vs centroids",
            format!("{} columns", centroids.dim()),
            format!("{} columns", points.ncols()),
        ));
    }
    Ok(())
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Config("K must be positive".into()));
    }
    if n < k {
        return Err(Error::Config(format!("need at least K = {k} points, got {n}")));
    }
    Ok(())
}

/// Index and squared distance of the nearest center; ties go to the lowest index.
fn nearest(point: &[f64], centroids: &Centroids) -> (usize, f64) {
    let centers = centroids.0.as_slice().expect("centroids are row-major");
    let mut best = (0, f64::INFINITY);
    for (k, c) in centers.chunks_exact(point.len()).enumerate() {
        let d: f64 = point.iter().zip(c).map(|(x, y)| (x - y) * (x - y)).sum();
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

/// Rows of a row-major copy (or borrow) of `points`.
fn row_slices<'a>(points: &'a ndarray::CowArray<'_, f64, ndarray::Ix2>) -> std::slice::ChunksExact<'a, f64> {
    points.as_slice().expect("standard layout").chunks_exact(points.ncols())
}

/// D²-weighted seeding. Picks `k` distinct rows of `points`.
///
/// Sampling walks the rows in lexicographic order, so the chosen centers do
/// not depend on the order of the input rows.
pub fn kmeans_plus_plus_init(points: ArrayView2<'_, f64>, k: usize, seed: u64) -> Result<Centroids> {
    let n = points.nrows();
    check_k(n, k)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        points
            .row(a)
            .iter()
            .zip(points.row(b).iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let sorted = points.select(Axis(0), &order);
    let points = sorted.view();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::with_capacity(k);
    let mut taken = vec![false; n];

    let first = rng.random_range(0..n);
    chosen.push(first);
    taken[first] = true;
    let mut d2: Vec<f64> = points
        .rows()
        .into_iter()
        .map(|p| squared_distance(p, points.row(first)))
        .collect();

    while chosen.len() < k {
        for (i, t) in taken.iter().enumerate() {
            if *t {
                d2[i] = 0.0;
            }
        }
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                acc += w;
                pick = Some(i);
                if acc > target {
                    break;
                }
            }
            pick.expect("positive total weight")
        } else {
            // every remaining point coincides with a chosen one
            let free: Vec<usize> = (0..n).filter(|&i| !taken[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        taken[next] = true;
        for (i, p) in points.rows().into_iter().enumerate() {
            let d = squared_distance(p, points.row(next));
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }

    let mut centers = Array2::zeros((k, points.ncols()));
    for (row, &i) in chosen.iter().enumerate() {
        centers.row_mut(row).assign(&points.row(i));
    }
    Centroids::new(centers)
}

/// Nearest-center labels by squared L2 distance.
pub fn assign(points: ArrayView2<'_, f64>, centroids: &Centroids) -> Result<Assignment> {
    check_dims(points, centroids)?;
    let points = points.as_standard_layout();
    let labels = row_slices(&points).map(|p| nearest(p, centroids).0).collect();
    Ok(Assignment {
        labels,
        k: centroids.k(),
    })
}

/// Sum of squared distances from each point to its assigned center.
pub fn objective(points: ArrayView2<'_, f64>, centroids: &Centroids, assignment: &Assignment) -> Result<f64> {
    check_dims(points, centroids)?;
    if assignment.len() != points.nrows() || assignment.k() != centroids.k() {
        return Err(Error::shape(
            "assignment",
            format!("{} labels over K = {}", points.nrows(), centroids.k()),
            format!("{} labels over K = {}", assignment.len(), assignment.k()),
        ));
    }
    Ok(points
        .rows()
        .into_iter()
        .zip(&assignment.labels)
        .map(|(p, &l)| squared_distance(p, centroids.center(l)))
        .sum())
}

/// One assign-then-average iteration.
///
/// A cluster left empty takes the point farthest from its current center
/// (lowest index on ties), so exactly K centers survive.
pub fn lloyd_step(points: ArrayView2<'_, f64>, centroids: &Centroids) -> Result<LloydStep> {
    check_dims(points, centroids)?;
    let k = centroids.k();
    let dim = centroids.dim();
    let mut labels = Vec::with_capacity(points.nrows());
    let mut dists = Vec::with_capacity(points.nrows());
    let mut sums = Array2::<f64>::zeros((k, dim));
    let mut counts = vec![0usize; k];
    let mut objective = 0.0;

    let rows = points.as_standard_layout();
    for p in row_slices(&rows) {
        let (label, d) = nearest(p, centroids);
        labels.push(label);
        dists.push(d);
        objective += d;
        counts[label] += 1;
        for (s, &x) in sums.row_mut(label).iter_mut().zip(p) {
            *s += x;
        }
    }

    for (c, &count) in counts.iter().enumerate() {
        if count > 0 {
            sums.row_mut(c).mapv_inplace(|s| s / count as f64);
        }
    }
    for c in (0..k).filter(|&c| counts[c] == 0) {
        let mut far = None;
        for (i, &d) in dists.iter().enumerate() {
            if d >= 0.0 && far.is_none_or(|(_, best)| d > best) {
                far = Some((i, d));
            }
        }
        match far {
            Some((i, _)) => {
                sums.row_mut(c).assign(&points.row(i));
                dists[i] = -1.0;
            }
            None => sums.row_mut(c).assign(&centroids.center(c)),
        }
    }

    Ok(LloydStep {
        centroids: Centroids::new(sums)?,
        assignment: Assignment { labels, k },
        objective,
    })
}

/// k-means++ seeding then Lloyd iterations until the largest center shift
/// drops below `tol` or `max_iters` is reached, repeated `n_init` times.
///
/// Restart 0 is seeded with `seed` itself; ties on the objective keep the
/// earlier restart.
pub fn kmeans(points: ArrayView2<'_, f64>, k: usize, seed: u64, settings: KMeansSettings) -> Result<KMeansFit> {
    if settings.n_init == 0 {
        return Err(Error::Config("kmeans n_init must be positive".into()));
    }
    let mut best: Option<KMeansFit> = None;
    for restart in 0..settings.n_init as u64 {
        let fit = kmeans_single(points, k, restart_seed(seed, restart), settings)?;
        if best.as_ref().is_none_or(|b| fit.objective < b.objective) {
            best = Some(fit);
        }
    }
    Ok(best.expect("n_init ≥ 1"))
}

fn restart_seed(seed: u64, restart: u64) -> u64 {
    seed.wrapping_add(restart.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn kmeans_single(points: ArrayView2<'_, f64>, k: usize, seed: u64, settings: KMeansSettings) -> Result<KMeansFit> {
    let mut centroids = kmeans_plus_plus_init(points, k, seed)?;
    let mut history = Vec::new();
    let mut iterations = 0;
    for _ in 0..settings.max_iters {
        let step = lloyd_step(points, &centroids)?;
        history.push(step.objective);
        let shift = step.centroids.max_shift(&centroids);
        centroids = step.centroids;
        iterations += 1;
        if shift < settings.tol {
            break;
        }
    }
    let assignment = assign(points, &centroids)?;
    let objective = objective(points, &centroids, &assignment)?;
    Ok(KMeansFit {
        centroids,
        assignment,
        objective,
        iterations,
        history,
    })
}
