use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::tree::FeatureTree;

/// `h(x) = floor((a·x + b) / r)` with Gaussian `a` and `b ~ U[0, r)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StableHashFunction {
    pub a: Vec<f64>,
    pub b: f64,
    pub r: f64,
}

impl StableHashFunction {
    pub fn random<R: Rng + ?Sized>(dims: usize, r: f64, rng: &mut R) -> Self {
        let a = (0..dims).map(|_| rng.sample(StandardNormal)).collect();
        let b = rng.gen::<f64>() * r;
        StableHashFunction { a, b, r }
    }

    pub fn dims(&self) -> usize {
        self.a.len()
    }

    pub fn hash(&self, x: &[f64]) -> Result<i64> {
        if x.len() != self.a.len() {
            return Err(Error::dimension(self.a.len(), x.len()));
        }
        let dot: f64 = self.a.iter().zip(x).map(|(a, x)| a * x).sum();
        Ok(((dot + self.b) / self.r).floor() as i64)
    }

    pub fn hash_tree(&self, tree: &FeatureTree) -> Result<i64> {
        self.hash(&tree.flatten())
    }
}

/// Probability that two points at Euclidean distance `distance` share a
/// bucket under a random Gaussian projection of width `r`.
pub fn collision_probability(distance: f64, r: f64) -> f64 {
    if distance <= 0.0 {
        return 1.0;
    }
    let t = r / distance;
    let tail = erfc(t / std::f64::consts::SQRT_2);
    let p = 1.0 - tail - 2.0 / ((2.0 * std::f64::consts::PI).sqrt() * t) * (1.0 - (-t * t / 2.0).exp());
    p.clamp(0.0, 1.0)
}
