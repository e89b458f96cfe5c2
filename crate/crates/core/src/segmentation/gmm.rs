//! Full-covariance RGB Gaussian mixtures fitted by hard assignment.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Added to the covariance diagonal on every fit.
pub const COVARIANCE_REGULARIZATION: f64 = 1e-3;
const LN_2PI: f64 = 1.837_877_066_409_345_5;
const KMEANS_ROUNDS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    pub weight: f64,
    pub mean: [f64; 3],
    pub covariance: [[f64; 3]; 3],
    inverse: [[f64; 3]; 3],
    log_det: f64,
}

impl Gaussian {
    fn new(weight: f64, mean: [f64; 3], covariance: [[f64; 3]; 3]) -> Self {
        let (inverse, det) = invert3(&covariance);
        Self { weight, mean, covariance, inverse, log_det: det.ln() }
    }

    /// `-ln(weight * N(z | mean, cov))`.
    pub fn cost(&self, z: [f64; 3]) -> f64 {
        let d = [z[0] - self.mean[0], z[1] - self.mean[1], z[2] - self.mean[2]];
        let mut maha = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                maha += d[i] * self.inverse[i][j] * d[j];
            }
        }
        -self.weight.ln() + 0.5 * (self.log_det + maha + 3.0 * LN_2PI)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    components: Vec<Gaussian>,
}

impl GaussianMixture {
    pub fn components(&self) -> &[Gaussian] {
        &self.components
    }

    /// Initial fit: k-means++ seeding with a fixed seed, Lloyd rounds, then
    /// per-cluster maximum likelihood. Components that end up empty are dropped.
    pub fn fit(samples: &[[f64; 3]], k: usize, seed: u64) -> Self {
        assert!(!samples.is_empty(), "cannot fit a mixture to zero samples");
        let k = k.max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut centers: Vec<[f64; 3]> = vec![samples[rng.random_range(0..samples.len())]];
        let mut nearest: Vec<f64> = samples.iter().map(|s| sq_dist(s, &centers[0])).collect();
        while centers.len() < k {
            let total: f64 = nearest.iter().sum();
            if total <= 0.0 {
                break;
            }
            let mut target = rng.random::<f64>() * total;
            let mut pick = samples.len() - 1;
            for (i, &d) in nearest.iter().enumerate() {
                if target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            let c = samples[pick];
            centers.push(c);
            for (n, s) in nearest.iter_mut().zip(samples) {
                *n = n.min(sq_dist(s, &c));
            }
        }
        let mut labels = vec![0usize; samples.len()];
        for _ in 0..KMEANS_ROUNDS {
            for (label, s) in labels.iter_mut().zip(samples) {
                *label = (0..centers.len())
                    .min_by(|&a, &b| sq_dist(s, &centers[a]).total_cmp(&sq_dist(s, &centers[b])))
                    .unwrap();
            }
            let mut sums = vec![([0.0; 3], 0usize); centers.len()];
            for (&l, s) in labels.iter().zip(samples) {
                for c in 0..3 {
                    sums[l].0[c] += s[c];
                }
                sums[l].1 += 1;
            }
            for (center, (sum, n)) in centers.iter_mut().zip(sums) {
                if n > 0 {
                    *center = [sum[0] / n as f64, sum[1] / n as f64, sum[2] / n as f64];
                }
            }
        }
        Self::from_assignments(samples, &labels, centers.len())
    }

    /// Maximum-likelihood components from a hard labelling.
    pub fn from_assignments(samples: &[[f64; 3]], labels: &[usize], k: usize) -> Self {
        let mut count = vec![0usize; k];
        let mut sum = vec![[0.0f64; 3]; k];
        for (&l, s) in labels.iter().zip(samples) {
            count[l] += 1;
            for c in 0..3 {
                sum[l][c] += s[c];
            }
        }
        let mut cov = vec![[[0.0f64; 3]; 3]; k];
        let means: Vec<[f64; 3]> = (0..k)
            .map(|i| {
                let n = count[i].max(1) as f64;
                [sum[i][0] / n, sum[i][1] / n, sum[i][2] / n]
            })
            .collect();
        for (&l, s) in labels.iter().zip(samples) {
            let d = [s[0] - means[l][0], s[1] - means[l][1], s[2] - means[l][2]];
            for i in 0..3 {
                for j in 0..3 {
                    cov[l][i][j] += d[i] * d[j];
                }
            }
        }
        let total = samples.len() as f64;
        let components = (0..k)
            .filter(|&i| count[i] > 0)
            .map(|i| {
                let n = count[i] as f64;
                let mut c = cov[i];
                for (r, row) in c.iter_mut().enumerate() {
                    for v in row.iter_mut() {
                        *v /= n;
                    }
                    row[r] += COVARIANCE_REGULARIZATION;
                }
                Gaussian::new(n / total, means[i], c)
            })
            .collect();
        Self { components }
    }

    /// Index and cost of the cheapest component for `z`.
    pub fn best_component(&self, z: [f64; 3]) -> (usize, f64) {
        self.components
            .iter()
            .enumerate()
            .map(|(i, g)| (i, g.cost(z)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("mixture has at least one component")
    }

    /// Data cost of `z` under the hard-assignment energy.
    pub fn cost(&self, z: [f64; 3]) -> f64 {
        self.best_component(z).1
    }

    /// One hard-EM step: assign each sample to its cheapest component and
    /// refit. Returns the refit mixture.
    pub fn refit(&self, samples: &[[f64; 3]]) -> Self {
        let labels: Vec<usize> = samples.iter().map(|&s| self.best_component(s).0).collect();
        Self::from_assignments(samples, &labels, self.components.len())
    }

    pub fn total_cost(&self, samples: &[[f64; 3]]) -> f64 {
        samples.iter().map(|&s| self.cost(s)).sum()
    }

    pub fn weight_sum(&self) -> f64 {
        self.components.iter().map(|g| g.weight).sum()
    }
}

fn sq_dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

fn invert3(m: &[[f64; 3]; 3]) -> ([[f64; 3]; 3], f64) {
    let c00 = m[1][1] * m[2][2] - m[1][2] * m[2][1];
    let c01 = m[1][2] * m[2][0] - m[1][0] * m[2][2];
    let c02 = m[1][0] * m[2][1] - m[1][1] * m[2][0];
    let det = m[0][0] * c00 + m[0][1] * c01 + m[0][2] * c02;
    let inv_det = 1.0 / det;
    let inv = [
        [c00 * inv_det, (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv_det, (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv_det],
        [c01 * inv_det, (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv_det, (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv_det],
        [c02 * inv_det, (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv_det, (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv_det],
    ];
    (inv, det)
}
