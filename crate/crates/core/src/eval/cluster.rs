use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{input, Result};

pub const GMM_MAX_ITERATIONS: usize = 100;
pub const GMM_TOLERANCE: f64 = 1e-6;
const VARIANCE_FLOOR: f64 = 1e-6;
const KMEANS_ROUNDS: usize = 10;

/// Gaussian mixture with diagonal covariances on 2-D points.
#[derive(Debug, Clone, PartialEq)]
pub struct Gmm {
    pub weights: Vec<f64>,
    pub means: Vec<[f64; 2]>,
    pub variances: Vec<[f64; 2]>,
}

fn sq_dist(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Index of the point farthest from its nearest center.
fn farthest(points: &[[f64; 2]], centers: &[[f64; 2]]) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, p) in points.iter().enumerate() {
        let d = centers
            .iter()
            .map(|c| sq_dist(p, c))
            .fold(f64::INFINITY, f64::min);
        if d > best.1 {
            best = (i, d);
        }
    }
    best.0
}

/// A few hard k-means rounds; returns the cluster shares and variances as EM's start.
fn lloyd(
    points: &[[f64; 2]],
    means: &mut [[f64; 2]],
    spread: [f64; 2],
) -> (Vec<f64>, Vec<[f64; 2]>) {
    let k = means.len();
    let nearest = |p: &[f64; 2], means: &[[f64; 2]]| {
        (0..k).fold(0, |b, c| {
            if sq_dist(p, &means[c]) < sq_dist(p, &means[b]) {
                c
            } else {
                b
            }
        })
    };
    for _ in 0..KMEANS_ROUNDS {
        let mut sums = vec![[0.0; 3]; k];
        for p in points {
            let c = nearest(p, means);
            sums[c][0] += p[0];
            sums[c][1] += p[1];
            sums[c][2] += 1.0;
        }
        for (m, s) in means.iter_mut().zip(&sums) {
            if s[2] > 0.0 {
                *m = [s[0] / s[2], s[1] / s[2]];
            }
        }
    }
    let mut stats = vec![[0.0; 3]; k];
    for p in points {
        let c = nearest(p, means);
        stats[c][0] += (p[0] - means[c][0]).powi(2);
        stats[c][1] += (p[1] - means[c][1]).powi(2);
        stats[c][2] += 1.0;
    }
    let n = points.len() as f64;
    stats
        .iter()
        .map(|s| {
            if s[2] < 2.0 {
                (1.0 / n, spread)
            } else {
                (
                    s[2] / n,
                    [s[0] / s[2], s[1] / s[2]].map(|v| v.max(VARIANCE_FLOOR)),
                )
            }
        })
        .unzip()
}

impl Gmm {
    fn log_joint(&self, p: &[f64; 2]) -> Vec<f64> {
        (0..self.weights.len())
            .map(|c| {
                let mut l = self.weights[c].ln();
                for a in 0..2 {
                    let v = self.variances[c][a];
                    l -= 0.5
                        * ((2.0 * std::f64::consts::PI * v).ln()
                            + (p[a] - self.means[c][a]).powi(2) / v);
                }
                l
            })
            .collect()
    }

    /// Component with the highest responsibility for `p`.
    pub fn label(&self, p: &[f64; 2]) -> usize {
        let lj = self.log_joint(p);
        (0..lj.len()).fold(0, |b, c| if lj[c] > lj[b] { c } else { b })
    }

    /// EM started from seeded farthest-point centers refined by a few
    /// k-means rounds. A component that loses
    /// all its mass is re-seeded at the point farthest from the current means.
    pub fn fit(points: &[[f64; 2]], k: usize, seed: u64) -> Result<Self> {
        if k < 2 {
            return input("a mixture needs at least two components");
        }
        if points.len() < k {
            return input(format!(
                "{} points cannot seed {k} components",
                points.len()
            ));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut means = vec![points[rng.random_range(0..points.len())]];
        while means.len() < k {
            means.push(points[farthest(points, &means)]);
        }
        let n = points.len() as f64;
        let spread = [0, 1].map(|a| {
            let m = points.iter().map(|p| p[a]).sum::<f64>() / n;
            (points.iter().map(|p| (p[a] - m).powi(2)).sum::<f64>() / n).max(VARIANCE_FLOOR)
        });
        let (weights, variances) = lloyd(points, &mut means, spread);
        let mut gmm = Gmm {
            weights,
            means,
            variances,
        };
        let mut previous = f64::NEG_INFINITY;
        let mut resp = vec![0.0; points.len() * k];
        for _ in 0..GMM_MAX_ITERATIONS {
            let mut ll = 0.0;
            for (i, p) in points.iter().enumerate() {
                let lj = gmm.log_joint(p);
                let m = lj.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = lj.iter().map(|l| (l - m).exp()).sum();
                ll += m + z.ln();
                for c in 0..k {
                    resp[i * k + c] = (lj[c] - m).exp() / z;
                }
            }
            for c in 0..k {
                let nk: f64 = (0..points.len()).map(|i| resp[i * k + c]).sum();
                if nk < 1e-9 {
                    let far = farthest(points, &gmm.means);
                    gmm.means[c] = points[far];
                    gmm.variances[c] = spread;
                    gmm.weights[c] = 1.0 / n;
                    continue;
                }
                let mut mu = [0.0; 2];
                for (i, p) in points.iter().enumerate() {
                    mu[0] += resp[i * k + c] * p[0];
                    mu[1] += resp[i * k + c] * p[1];
                }
                mu = mu.map(|x| x / nk);
                let mut var = [0.0; 2];
                for (i, p) in points.iter().enumerate() {
                    var[0] += resp[i * k + c] * (p[0] - mu[0]).powi(2);
                    var[1] += resp[i * k + c] * (p[1] - mu[1]).powi(2);
                }
                gmm.means[c] = mu;
                gmm.variances[c] = var.map(|v| (v / nk).max(VARIANCE_FLOOR));
                gmm.weights[c] = nk / n;
            }
            let total: f64 = gmm.weights.iter().sum();
            gmm.weights.iter_mut().for_each(|w| *w /= total);
            let avg = ll / n;
            if (avg - previous).abs() < GMM_TOLERANCE {
                break;
            }
            previous = avg;
        }
        Ok(gmm)
    }
}

/// Mean silhouette coefficient of `points` under `labels`.
///
/// Points alone in their cluster score 0; with fewer than two clusters the score is 0.
pub fn silhouette(points: &[[f64; 2]], labels: &[usize]) -> Result<f64> {
    if points.is_empty() || points.len() != labels.len() {
        return input("silhouette needs one label per point and at least one point");
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    labels.iter().for_each(|&l| sizes[l] += 1);
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    let mut sums = vec![0.0; k];
    for (i, p) in points.iter().enumerate() {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for (q, &l) in points.iter().zip(labels) {
            sums[l] += sq_dist(p, q).sqrt();
        }
        let own = labels[i];
        if sizes[own] < 2 {
            continue;
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / points.len() as f64)
}

/// Fits a `k`-component mixture on `train`, labels `test` by maximum
/// responsibility and returns the silhouette of that labeling.
pub fn gmm_fit_silhouette(
    train: &[[f64; 2]],
    test: &[[f64; 2]],
    k: usize,
    seed: u64,
) -> Result<f64> {
    if test.is_empty() {
        return input("silhouette needs test points");
    }
    let gmm = Gmm::fit(train, k, seed)?;
    let labels: Vec<usize> = test.iter().map(|p| gmm.label(p)).collect();
    silhouette(test, &labels)
}
