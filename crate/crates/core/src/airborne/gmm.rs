//! Diagonal-covariance Gaussian mixtures over RGB samples.

use std::f64::consts::PI;

#[derive(Clone, Debug, PartialEq)]
pub struct GmmParams {
    pub components: usize,
    pub iterations: u32,
    /// Lower bound on every per-channel variance.
    pub variance_floor: f64,
}

impl Default for GmmParams {
    fn default() -> Self {
        GmmParams {
            components: 3,
            iterations: 10,
            variance_floor: 4.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ColorModel {
    pub weights: Vec<f64>,
    pub means: Vec<[f64; 3]>,
    pub variances: Vec<[f64; 3]>,
}

fn to_f64(c: [u8; 3]) -> [f64; 3] {
    c.map(|v| v as f64)
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (0..3).map(|i| (a[i] - b[i]).powi(2)).sum()
}

impl ColorModel {
    /// Fits a mixture with k-means initialization followed by EM. Returns
    /// `None` for an empty sample set. Fewer distinct colors than components
    /// shrink the mixture.
    pub fn fit(samples: &[[u8; 3]], params: &GmmParams) -> Option<ColorModel> {
        if samples.is_empty() {
            return None;
        }
        let xs: Vec<[f64; 3]> = samples.iter().map(|&c| to_f64(c)).collect();
        let mut means = farthest_point_seeds(&xs, params.components.max(1));
        for _ in 0..params.iterations {
            let assign: Vec<usize> = xs.iter().map(|x| nearest(&means, x)).collect();
            let mut sums = vec![[0.0; 3]; means.len()];
            let mut counts = vec![0usize; means.len()];
            for (x, &k) in xs.iter().zip(&assign) {
                counts[k] += 1;
                for i in 0..3 {
                    sums[k][i] += x[i];
                }
            }
            for k in 0..means.len() {
                if counts[k] > 0 {
                    means[k] = sums[k].map(|s| s / counts[k] as f64);
                }
            }
        }

        let k = means.len();
        let mut model = ColorModel {
            weights: vec![1.0 / k as f64; k],
            variances: vec![[params.variance_floor.max(1e-9); 3]; k],
            means,
        };
        // Hard assignment seeds the variances before EM.
        let assign: Vec<usize> = xs.iter().map(|x| nearest(&model.means, x)).collect();
        model.m_step(&xs, |n, j| if assign[n] == j { 1.0 } else { 0.0 }, params);

        for _ in 0..params.iterations {
            let resp: Vec<Vec<f64>> = xs.iter().map(|x| model.responsibilities(x)).collect();
            model.m_step(&xs, |n, j| resp[n][j], params);
        }
        Some(model)
    }

    fn m_step(&mut self, xs: &[[f64; 3]], resp: impl Fn(usize, usize) -> f64, params: &GmmParams) {
        let floor = params.variance_floor.max(1e-9);
        for j in 0..self.means.len() {
            let nk: f64 = (0..xs.len()).map(|n| resp(n, j)).sum();
            if nk <= 1e-12 {
                self.weights[j] = 0.0;
                continue;
            }
            let mut mean = [0.0; 3];
            for (n, x) in xs.iter().enumerate() {
                for i in 0..3 {
                    mean[i] += resp(n, j) * x[i];
                }
            }
            mean = mean.map(|m| m / nk);
            let mut var = [0.0; 3];
            for (n, x) in xs.iter().enumerate() {
                for i in 0..3 {
                    var[i] += resp(n, j) * (x[i] - mean[i]).powi(2);
                }
            }
            self.means[j] = mean;
            self.variances[j] = var.map(|v| (v / nk).max(floor));
            self.weights[j] = nk / xs.len() as f64;
        }
    }

    fn component_log_densities(&self, x: &[f64; 3]) -> Vec<f64> {
        (0..self.means.len())
            .map(|j| {
                if self.weights[j] <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                let mut lp = self.weights[j].ln();
                for ((xi, mu), v) in x.iter().zip(&self.means[j]).zip(&self.variances[j]) {
                    lp -= 0.5 * ((2.0 * PI * v).ln() + (xi - mu).powi(2) / v);
                }
                lp
            })
            .collect()
    }

    fn responsibilities(&self, x: &[f64; 3]) -> Vec<f64> {
        let lps = self.component_log_densities(x);
        let total = log_sum_exp(&lps);
        lps.iter().map(|lp| (lp - total).exp()).collect()
    }

    pub fn log_likelihood(&self, color: [u8; 3]) -> f64 {
        log_sum_exp(&self.component_log_densities(&to_f64(color)))
    }

    /// `-mean log p(c)` over the samples; 0 for an empty set.
    pub fn mean_negative_log_likelihood(&self, samples: &[[u8; 3]]) -> f64 {
        if samples.is_empty() {
            return 0.0;
        }
        -samples.iter().map(|&c| self.log_likelihood(c)).sum::<f64>() / samples.len() as f64
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn nearest(means: &[[f64; 3]], x: &[f64; 3]) -> usize {
    let mut best = 0;
    for k in 1..means.len() {
        if dist2(&means[k], x) < dist2(&means[best], x) {
            best = k;
        }
    }
    best
}

/// Deterministic seeds: the first sample, then repeatedly the sample farthest
/// from all chosen seeds. Stops early when every sample coincides with a seed.
fn farthest_point_seeds(xs: &[[f64; 3]], k: usize) -> Vec<[f64; 3]> {
    let mut seeds = vec![xs[0]];
    while seeds.len() < k {
        let (mut best, mut best_d) = (0, 0.0);
        for (i, x) in xs.iter().enumerate() {
            let d = seeds.iter().map(|s| dist2(s, x)).fold(f64::INFINITY, f64::min);
            if d > best_d {
                best = i;
                best_d = d;
            }
        }
        if best_d == 0.0 {
            break;
        }
        seeds.push(xs[best]);
    }
    seeds
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_color_collapses_to_one_floored_component() {
        let m = ColorModel::fit(&[[10, 20, 30]; 8], &GmmParams::default()).unwrap();
        assert_eq!(m.means, vec![[10.0, 20.0, 30.0]]);
        assert_eq!(m.variances, vec![[4.0; 3]]);
        let expected = 1.5 * (2.0 * PI * 4.0).ln();
        assert!((m.mean_negative_log_likelihood(&[[10, 20, 30]]) - expected).abs() < 1e-12);
    }

    #[test]
    fn two_clusters_are_separated() {
        let mut s = vec![[200, 10, 10]; 20];
        s.extend(vec![[10, 10, 200]; 20]);
        s.extend(vec![[12, 12, 198]; 20]);
        let m = ColorModel::fit(&s, &GmmParams::default()).unwrap();
        let total: f64 = m.weights.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(m.log_likelihood([200, 10, 10]) > m.log_likelihood([100, 100, 100]));
        assert!(m.log_likelihood([11, 11, 199]) > m.log_likelihood([10, 200, 10]));
    }

    #[test]
    fn foreign_colors_cost_more() {
        let own = vec![[120, 80, 40]; 10];
        let m = ColorModel::fit(&own, &GmmParams::default()).unwrap();
        assert!(
            m.mean_negative_log_likelihood(&[[40, 80, 120]; 10])
                > m.mean_negative_log_likelihood(&own)
        );
        assert!(ColorModel::fit(&[], &GmmParams::default()).is_none());
    }
}
