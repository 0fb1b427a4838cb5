//! Common environmental noise: the spatial coefficient σ(x) and the shared Brownian path.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::PeriodicBox;

/// Derives an independent 64-bit stream seed from a base seed and a list of tags
/// (splitmix64 finalizer chained over the inputs).
pub fn stream_seed(seed: u64, tags: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    tags.iter().fold(mix(seed), |acc, &t| mix(acc ^ mix(t)))
}

pub fn rng_for(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(seed, tags))
}

/// Noise coefficient σ: R^d → R^d, bounded with bounded derivatives.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseCoefficient {
    Constant(Vec<f64>),
    /// `σ_q(x) = amplitude_q · exp(-|x - center|² / (2 width²))`, minimum-image distance.
    SmoothBump {
        center: Vec<f64>,
        width: f64,
        amplitude: Vec<f64>,
    },
}

impl NoiseCoefficient {
    pub fn zero(d: usize) -> Self {
        NoiseCoefficient::Constant(vec![0.0; d])
    }

    pub fn constant(sigma: &[f64]) -> Self {
        NoiseCoefficient::Constant(sigma.to_vec())
    }

    pub fn d(&self) -> usize {
        match self {
            NoiseCoefficient::Constant(s) => s.len(),
            NoiseCoefficient::SmoothBump { amplitude, .. } => amplitude.len(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            NoiseCoefficient::Constant(s) => s.iter().all(|&v| v == 0.0),
            NoiseCoefficient::SmoothBump { amplitude, .. } => amplitude.iter().all(|&v| v == 0.0),
        }
    }

    /// Writes σ(x) into `out`.
    #[inline]
    pub fn eval(&self, x: &[f64], domain: &PeriodicBox, out: &mut [f64]) {
        match self {
            NoiseCoefficient::Constant(s) => out.copy_from_slice(s),
            NoiseCoefficient::SmoothBump { center, width, amplitude } => {
                let r2: f64 = x
                    .iter()
                    .zip(center)
                    .map(|(&a, &c)| {
                        let dx = domain.min_image(a - c);
                        dx * dx
                    })
                    .sum();
                let w = (-0.5 * r2 / (width * width)).exp();
                for (o, &a) in out.iter_mut().zip(amplitude) {
                    *o = a * w;
                }
            }
        }
    }
}

/// One realization of a d-dimensional Brownian motion on a uniform fine grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    pub d: usize,
    pub dt: f64,
    pub seed: u64,
    /// `steps × d`, row-major.
    pub increments: Vec<f64>,
}

/// Samples increments `ΔB ~ N(0, dt I)` on `[0, horizon]`.
pub fn generate_path(seed: u64, horizon: f64, dt_fine: f64, d: usize) -> Result<BrownianPath> {
    let steps = step_count(horizon, dt_fine)?;
    let mut rng = rng_for(seed, &[0x5041_5448]);
    let sd = dt_fine.sqrt();
    let increments = (0..steps * d)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sd * z
        })
        .collect();
    Ok(BrownianPath { d, dt: dt_fine, seed, increments })
}

/// Number of steps of size `dt` covering `[0, horizon]`; `dt` must divide `horizon`.
pub fn step_count(horizon: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !(horizon > 0.0) {
        return Err(Error::InvalidArgument(format!("horizon {horizon} and step {dt} must be positive")));
    }
    let ratio = horizon / dt;
    let steps = ratio.round();
    if (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::InvalidArgument(format!("step {dt} does not divide horizon {horizon}")));
    }
    Ok(steps as usize)
}

impl BrownianPath {
    pub fn steps(&self) -> usize {
        self.increments.len() / self.d
    }

    pub fn horizon(&self) -> f64 {
        self.steps() as f64 * self.dt
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }

    pub fn increment(&self, step: usize) -> &[f64] {
        &self.increments[step * self.d..(step + 1) * self.d]
    }

    /// Ratio `dt_consumer / dt`, which must be a positive integer.
    pub fn refinement_factor(&self, dt_consumer: f64) -> Result<usize> {
        let ratio = dt_consumer / self.dt;
        let k = ratio.round();
        if k < 1.0 || (ratio - k).abs() > 1e-9 * ratio {
            return Err(Error::InvalidArgument(format!(
                "fine step {} does not divide consumer step {dt_consumer}",
                self.dt
            )));
        }
        Ok(k as usize)
    }

    /// Path restricted to steps `factor` times coarser; each coarse increment is the
    /// left-to-right sum of its fine increments.
    pub fn coarsen(&self, factor: usize) -> Result<BrownianPath> {
        if factor == 0 || !self.steps().is_multiple_of(factor) {
            return Err(Error::InvalidArgument(format!(
                "factor {factor} does not divide {} steps",
                self.steps()
            )));
        }
        let coarse_steps = self.steps() / factor;
        let mut increments = vec![0.0; coarse_steps * self.d];
        for c in 0..coarse_steps {
            for f in 0..factor {
                let fine = self.increment(c * factor + f);
                for (acc, &v) in increments[c * self.d..(c + 1) * self.d].iter_mut().zip(fine) {
                    *acc += v;
                }
            }
        }
        Ok(BrownianPath { d: self.d, dt: self.dt * factor as f64, seed: self.seed, increments })
    }

    /// Restriction to a consumer step size.
    pub fn restrict(&self, dt_consumer: f64) -> Result<BrownianPath> {
        self.coarsen(self.refinement_factor(dt_consumer)?)
    }

    /// `B(t_step)` per axis.
    pub fn value_at(&self, step: usize) -> Vec<f64> {
        let mut b = vec![0.0; self.d];
        for s in 0..step {
            for (acc, &v) in b.iter_mut().zip(self.increment(s)) {
                *acc += v;
            }
        }
        b
    }

    /// Sample quadratic variation `Σ (ΔB_q)²` per axis.
    pub fn quadratic_variation(&self) -> Vec<f64> {
        let mut qv = vec![0.0; self.d];
        for s in 0..self.steps() {
            for (acc, &v) in qv.iter_mut().zip(self.increment(s)) {
                *acc += v * v;
            }
        }
        qv
    }
}
