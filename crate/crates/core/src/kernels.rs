//! Gaussian kernel families for the potential (β-scaled) and friction (γ-scaled) interactions.
//!
//! The base root kernel is `π^{-d/2} e^{-|x|²}`, whose self-convolution is the standard
//! Gaussian `(2π)^{-d/2} e^{-|x|²/2}`. With a scale `s = N^{e/d}` and amplitude `N^e`:
//!
//! - full kernel `K_N(x) = N^e (2π)^{-d/2} e^{-|s x|²/2}` (φ_N or ψ_N),
//! - root kernel `K_N^r(x) = N^e π^{-d/2} e^{-|s x|²}`, with `K_N^r ∗ K_N^r = K_N`,
//! - friction matrix `ζ_N(x) = s⁴ ψ_N(x) x xᵀ`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::params::ScalingParams;

/// Truncation radius in standard deviations of the full kernel.
pub const CUTOFF_SDS: f64 = 6.0;

/// Default bound on `|α|` for [`gaussian_moment`].
pub const MAX_MOMENT_ORDER: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    /// φ_N, scaled by β.
    Potential,
    /// ψ_N and ζ_N, scaled by γ.
    Friction,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelFamily {
    pub kind: KernelKind,
    pub exponent: f64,
    pub d: usize,
    pub n: usize,
    /// Evaluations beyond this radius return exactly zero.
    pub cutoff_radius: f64,
    amplitude: f64,
    scale: f64,
    full_norm: f64,
    root_norm: f64,
}

impl KernelFamily {
    pub fn new(kind: KernelKind, exponent: f64, d: usize, n: usize) -> Self {
        let nf = n as f64;
        let scale = nf.powf(exponent / d as f64);
        Self {
            kind,
            exponent,
            d,
            n,
            cutoff_radius: CUTOFF_SDS / scale,
            amplitude: nf.powf(exponent),
            scale,
            full_norm: nf.powf(exponent) * (2.0 * PI).powf(-(d as f64) / 2.0),
            root_norm: nf.powf(exponent) * PI.powf(-(d as f64) / 2.0),
        }
    }

    pub fn potential(p: &ScalingParams) -> Self {
        Self::new(KernelKind::Potential, p.beta, p.d, p.n)
    }

    pub fn friction(p: &ScalingParams) -> Self {
        Self::new(KernelKind::Friction, p.gamma, p.d, p.n)
    }

    /// `N^{e/d}`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `N^e`.
    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// Standard deviation of the full kernel along each axis.
    pub fn std_dev(&self) -> f64 {
        1.0 / self.scale
    }

    /// Standard deviation of the root kernel along each axis.
    pub fn root_std_dev(&self) -> f64 {
        1.0 / (self.scale * std::f64::consts::SQRT_2)
    }

    #[inline]
    fn inside(&self, r2: f64) -> bool {
        r2 <= self.cutoff_radius * self.cutoff_radius
    }

    #[inline]
    fn full_from_r2(&self, r2: f64) -> f64 {
        if !self.inside(r2) {
            return 0.0;
        }
        let s2 = self.scale * self.scale;
        self.full_norm * (-0.5 * s2 * r2).exp()
    }

    /// Full kernel (φ_N or ψ_N).
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.full_from_r2(norm2(x))
    }

    /// Root kernel (φ_N^r or ψ_N^r).
    pub fn eval_root(&self, x: &[f64]) -> f64 {
        let r2 = norm2(x);
        if !self.inside(r2) {
            return 0.0;
        }
        let s2 = self.scale * self.scale;
        self.root_norm * (-s2 * r2).exp()
    }

    /// Scalar `g` with `∇K_N(x) = g x`.
    #[inline]
    pub fn grad_factor(&self, r2: f64) -> f64 {
        -self.scale * self.scale * self.full_from_r2(r2)
    }

    /// Gradient of the full kernel.
    pub fn eval_grad(&self, x: &[f64]) -> Vec<f64> {
        let g = self.grad_factor(norm2(x));
        x.iter().map(|&xi| g * xi).collect()
    }

    /// Scalar `z` with `ζ_N(x) = z x xᵀ`.
    #[inline]
    pub fn zeta_factor(&self, r2: f64) -> f64 {
        let s2 = self.scale * self.scale;
        s2 * s2 * self.full_from_r2(r2)
    }

    /// Friction matrix `ζ_N(x)`, row-major `d × d`.
    pub fn eval_zeta(&self, x: &[f64]) -> Vec<f64> {
        let z = self.zeta_factor(norm2(x));
        let d = x.len();
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = z * (x[i] * x[j]);
            }
        }
        out
    }
}

/// φ_N^r at `x`. Only defined for the potential family.
pub fn eval_phi_r(x: &[f64], fam: &KernelFamily) -> f64 {
    debug_assert_eq!(fam.kind, KernelKind::Potential);
    fam.eval_root(x)
}

/// ∇φ_N at `x`. Only defined for the potential family.
pub fn eval_grad_phi(x: &[f64], fam: &KernelFamily) -> Vec<f64> {
    debug_assert_eq!(fam.kind, KernelKind::Potential);
    fam.eval_grad(x)
}

/// ζ_N at `x`. Only defined for the friction family.
pub fn eval_zeta(x: &[f64], fam: &KernelFamily) -> Vec<f64> {
    debug_assert_eq!(fam.kind, KernelKind::Friction);
    fam.eval_zeta(x)
}

#[inline]
pub(crate) fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn double_factorial_odd(n: usize) -> f64 {
    // (n - 1)!! for even n
    (1..n).step_by(2).map(|k| k as f64).product()
}

/// Closed-form moment `h^α_{N,q,q'} = ∫ x^α x_q x_{q'} ζ-weight`, i.e.
/// `∫ x^α x_q x_{q'} N^{4γ/d} ψ_N(x) dx`.
///
/// With `a = α + e_q + e_{q'}`, the integral vanishes when any `a_i` is odd and
/// otherwise equals `N^{γ(4-|a|)/d} Π_i (a_i - 1)!!`. Axes `q`, `q'` are zero-based.
pub fn gaussian_moment(alpha: &[usize], q: usize, q_prime: usize, p: &ScalingParams) -> Result<f64> {
    gaussian_moment_bounded(alpha, q, q_prime, p, MAX_MOMENT_ORDER)
}

pub fn gaussian_moment_bounded(
    alpha: &[usize],
    q: usize,
    q_prime: usize,
    p: &ScalingParams,
    max_order: usize,
) -> Result<f64> {
    if alpha.len() != p.d || q >= p.d || q_prime >= p.d {
        return Err(Error::Shape(format!(
            "multi-index of length {} with axes ({q}, {q_prime}) in dimension {}",
            alpha.len(),
            p.d
        )));
    }
    let order: usize = alpha.iter().sum();
    if order > max_order {
        return Err(Error::MomentOrder { order, max: max_order });
    }
    let mut a = alpha.to_vec();
    a[q] += 1;
    a[q_prime] += 1;
    if a.iter().any(|ai| ai % 2 == 1) {
        return Ok(0.0);
    }
    let total: usize = a.iter().sum();
    let n = p.n as f64;
    let power = p.gamma * (4.0 - total as f64) / p.d as f64;
    Ok(n.powf(power) * a.iter().map(|&ai| double_factorial_odd(ai)).product::<f64>())
}
