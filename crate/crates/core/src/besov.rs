//! Littlewood–Paley blocks on the periodic lattice and the Besov / Triebel–Lizorkin
//! norms built from them.
//!
//! The low-frequency bump `χ` equals 1 on `|ξ| ≤ 1/λ` and 0 on `|ξ| ≥ λ`, with a
//! smooth `e^{-1/t}` transition in between. The annular bump is `φ(ξ) = χ(ξ/2) - χ(ξ)`,
//! supported in `1/λ ≤ |ξ| ≤ 2λ`, and `φ_j(ξ) = φ(2^{-j} ξ)`. The partial sums telescope:
//! `χ + Σ_{j=0}^{J} φ_j = χ(2^{-J-1} ·)`, so the partition sums to one once `2^{J+1}/λ`
//! exceeds the largest lattice frequency. For `λ < √2`, `φ_i φ_j ≡ 0` whenever `|i - j| > 1`.

use crate::empirical::cic_deposit;
use crate::error::{Error, Result};
use crate::fft::GridFft;
use crate::geometry::Grid;
use crate::particles::ParticleState;
use crate::spde::FieldState;

/// Tolerance of the partition-of-unity check.
pub const PARTITION_TOL: f64 = 1e-10;

/// Smooth step: 0 for `t ≤ 0`, 1 for `t ≥ 1`, `C^∞` in between.
fn smooth_step(t: f64) -> f64 {
    let glue = |s: f64| if s > 0.0 { (-1.0 / s).exp() } else { 0.0 };
    let a = glue(t);
    let b = glue(1.0 - t);
    if a + b == 0.0 {
        return if t >= 1.0 { 1.0 } else { 0.0 };
    }
    a / (a + b)
}

/// Radial low-frequency bump `χ(|ξ|)`.
pub fn chi(lambda: f64, r: f64) -> f64 {
    let lo = 1.0 / lambda;
    if r <= lo {
        1.0
    } else if r >= lambda {
        0.0
    } else {
        1.0 - smooth_step((r - lo) / (lambda - lo))
    }
}

/// Radial annular bump `φ(|ξ|) = χ(|ξ|/2) - χ(|ξ|)`.
pub fn annulus(lambda: f64, r: f64) -> f64 {
    chi(lambda, 0.5 * r) - chi(lambda, r)
}

pub struct DyadicPartition {
    pub lambda: f64,
    pub j_max: i32,
    fft: GridFft,
    /// `weights[j + 1][bin]` is `φ_j` at the bin's frequency (`φ_{-1} = χ`).
    weights: Vec<Vec<f64>>,
}

impl std::fmt::Debug for DyadicPartition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DyadicPartition")
            .field("lambda", &self.lambda)
            .field("j_max", &self.j_max)
            .field("grid", self.fft.grid())
            .finish()
    }
}

/// Builds and validates the partition on the lattice `2πk/L` of `grid`.
pub fn build_partition(lambda: f64, grid: &Grid) -> Result<DyadicPartition> {
    if !(lambda > 1.0 && lambda < std::f64::consts::SQRT_2) {
        return Err(Error::PartitionInvalid(format!("lambda {lambda} outside (1, sqrt 2)")));
    }
    let fft = GridFft::new(*grid);
    let mags = fft.frequency_magnitudes();
    let r_max = mags.iter().copied().fold(0.0, f64::max);
    let mut j_max = 0i32;
    while 2f64.powi(j_max + 1) / lambda < r_max {
        j_max += 1;
    }
    let weights: Vec<Vec<f64>> = (-1..=j_max)
        .map(|j| {
            mags.iter()
                .map(|&r| if j < 0 { chi(lambda, r) } else { annulus(lambda, r * 0.5f64.powi(j)) })
                .collect()
        })
        .collect();
    let partition = DyadicPartition { lambda, j_max, fft, weights };
    partition.validate()?;
    Ok(partition)
}

impl DyadicPartition {
    pub fn grid(&self) -> &Grid {
        self.fft.grid()
    }

    pub fn fft(&self) -> &GridFft {
        &self.fft
    }

    /// Multiplier of block `j` on every DFT bin.
    pub fn weights(&self, j: i32) -> Result<&[f64]> {
        self.check_index(j)?;
        Ok(&self.weights[(j + 1) as usize])
    }

    fn check_index(&self, j: i32) -> Result<()> {
        if j < -1 || j > self.j_max {
            return Err(Error::BlockIndex { j, j_max: self.j_max });
        }
        Ok(())
    }

    /// Largest deviation of `Σ_j φ_j` from one on the lattice.
    pub fn partition_residual(&self) -> f64 {
        let bins = self.weights[0].len();
        (0..bins)
            .map(|b| (self.weights.iter().map(|w| w[b]).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Largest product `φ_i φ_j` over non-adjacent pairs.
    pub fn overlap_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.weights.len() {
            for j in (i + 2)..self.weights.len() {
                for (a, b) in self.weights[i].iter().zip(&self.weights[j]) {
                    worst = worst.max((a * b).abs());
                }
            }
        }
        worst
    }

    fn validate(&self) -> Result<()> {
        let sum = self.partition_residual();
        if sum > PARTITION_TOL {
            return Err(Error::PartitionInvalid(format!("partition sum off by {sum:e}")));
        }
        let overlap = self.overlap_residual();
        if overlap > 0.0 {
            return Err(Error::PartitionInvalid(format!("non-adjacent blocks overlap by {overlap:e}")));
        }
        if self.weights.iter().flatten().any(|&w| !(0.0..=1.0).contains(&w)) {
            return Err(Error::PartitionInvalid("weights outside [0, 1]".into()));
        }
        Ok(())
    }

    /// `Δ_j f`.
    pub fn block(&self, f: &[f64], j: i32) -> Result<Vec<f64>> {
        Ok(self.fft.filter(f, self.weights(j)?))
    }

    /// Every block `Δ_{-1} f, …, Δ_{j_max} f` from a single forward transform.
    pub fn blocks(&self, f: &[f64]) -> Vec<Vec<f64>> {
        let hat = self.fft.forward_real(f);
        self.weights
            .iter()
            .map(|w| {
                let filtered = hat.iter().zip(w).map(|(c, &x)| c * x).collect();
                self.fft.inverse_real(filtered)
            })
            .collect()
    }

    /// `‖Δ_j f‖²_{L²}` for every block via Parseval.
    pub fn block_energies(&self, f: &[f64]) -> Vec<f64> {
        let hat = self.fft.forward_real(f);
        let g = self.grid();
        let scale = g.cell_volume() / g.len() as f64;
        self.weights
            .iter()
            .map(|w| hat.iter().zip(w).map(|(c, &x)| c.norm_sqr() * x * x).sum::<f64>() * scale)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormFamily {
    Besov,
    TriebelLizorkin,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormSpec {
    pub family: NormFamily,
    pub s: f64,
    pub p: f64,
    /// `f64::INFINITY` for the sup over blocks.
    pub r: f64,
}

impl NormSpec {
    pub fn besov(s: f64, p: f64, r: f64) -> Self {
        Self { family: NormFamily::Besov, s, p, r }
    }

    pub fn triebel_lizorkin(s: f64, p: f64, r: f64) -> Self {
        Self { family: NormFamily::TriebelLizorkin, s, p, r }
    }

    pub fn validate(&self) -> Result<()> {
        let p_ok = match self.family {
            NormFamily::TriebelLizorkin => self.p > 1.0 && self.p < f64::INFINITY,
            NormFamily::Besov => self.p > 0.0,
        };
        if !p_ok || !(self.r > 1.0) {
            return Err(Error::InvalidArgument(format!("norm exponents p = {}, r = {}", self.p, self.r)));
        }
        Ok(())
    }
}

fn lr_sum(values: impl Iterator<Item = f64>, r: f64) -> f64 {
    if r.is_infinite() {
        values.fold(0.0, |m, v| m.max(v.abs()))
    } else {
        values.map(|v| v.abs().powf(r)).sum::<f64>().powf(1.0 / r)
    }
}

fn grid_lp(f: &[f64], p: f64, cell: f64) -> f64 {
    if p.is_infinite() {
        f.iter().fold(0.0, |m, v| m.max(v.abs()))
    } else {
        (f.iter().map(|v| v.abs().powf(p)).sum::<f64>() * cell).powf(1.0 / p)
    }
}

/// Besov or Triebel–Lizorkin norm of a grid field.
pub fn norm(f: &[f64], spec: &NormSpec, part: &DyadicPartition) -> Result<f64> {
    spec.validate()?;
    let cell = part.grid().cell_volume();
    let weight = |j: i32| 2f64.powf(j as f64 * spec.s);
    match spec.family {
        NormFamily::Besov if spec.p == 2.0 => {
            let e = part.block_energies(f);
            Ok(lr_sum(e.iter().enumerate().map(|(i, &e)| weight(i as i32 - 1) * e.max(0.0).sqrt()), spec.r))
        }
        NormFamily::Besov => {
            let blocks = part.blocks(f);
            Ok(lr_sum(
                blocks.iter().enumerate().map(|(i, b)| weight(i as i32 - 1) * grid_lp(b, spec.p, cell)),
                spec.r,
            ))
        }
        NormFamily::TriebelLizorkin => {
            let blocks = part.blocks(f);
            let pointwise: Vec<f64> = (0..f.len())
                .map(|k| lr_sum(blocks.iter().enumerate().map(|(i, b)| weight(i as i32 - 1) * b[k]), spec.r))
                .collect();
            Ok(grid_lp(&pointwise, spec.p, cell))
        }
    }
}

/// Negative-order distances between the raw empirical measures and the fluid fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceReport {
    /// `‖S^N - ρ‖_{E^{-α}_{2,r̃}}`.
    pub density: f64,
    /// `‖V^N - ρυ‖_{E^{-α}_{2,r̃}}`, Euclidean over components.
    pub momentum: f64,
    /// Grid spacing of the cloud-in-cell representation; the deposition bias is O(h).
    pub deposition_spacing: f64,
}

/// Distances of `S^N` from `ρ` and `V^N` from `ρυ` in `E^{-α}_{2,r̃}`, `α > d/2 + 1`.
pub fn distribution_distance(
    s: &ParticleState,
    f: &FieldState,
    alpha: f64,
    r_tilde: f64,
    family: NormFamily,
    part: &DyadicPartition,
) -> Result<DistanceReport> {
    let d = f.grid.d as f64;
    if !(alpha > d / 2.0 + 1.0) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} must exceed d/2 + 1 = {}", d / 2.0 + 1.0)));
    }
    if part.grid() != &f.grid {
        return Err(Error::Shape("partition and field grids differ".into()));
    }
    let spec = NormSpec { family, s: -alpha, p: 2.0, r: r_tilde };
    let (dens, mom) = cic_deposit(s, &f.grid);
    let diff: Vec<f64> = dens.iter().zip(&f.rho).map(|(a, b)| a - b).collect();
    let density = norm(&diff, &spec, part)?;
    let rho_u = f.momentum();
    let mut sq = 0.0;
    for (m, target) in mom.iter().zip(&rho_u) {
        let diff: Vec<f64> = m.iter().zip(target).map(|(a, b)| a - b).collect();
        sq += norm(&diff, &spec, part)?.powi(2);
    }
    Ok(DistanceReport { density, momentum: sq.sqrt(), deposition_spacing: f.grid.spacing() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn bump_shape() {
        let l = 1.3;
        assert_eq!(chi(l, 0.0), 1.0);
        assert_eq!(chi(l, 1.0 / l), 1.0);
        assert_eq!(chi(l, l), 0.0);
        assert_eq!(chi(l, 2.0), 0.0);
        let mid = chi(l, 0.5 * (l + 1.0 / l));
        assert!((mid - 0.5).abs() < 1e-12);
        assert_eq!(annulus(l, 0.5), 0.0);
        assert_eq!(annulus(l, 3.0), 0.0);
    }

    #[test]
    fn rejects_bad_lambda() {
        let g = Grid::new(2, 16, 2.0 * PI);
        assert!(build_partition(1.5, &g).is_err());
        assert!(build_partition(1.0, &g).is_err());
    }

    #[test]
    fn block_index_range() {
        let g = Grid::new(2, 16, 2.0 * PI);
        let p = build_partition(1.3, &g).unwrap();
        let f = vec![0.0; g.len()];
        assert!(p.block(&f, -2).is_err());
        assert!(p.block(&f, p.j_max + 1).is_err());
        assert!(p.block(&f, p.j_max).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_lives_in_low_block() {
        let g = Grid::new(2, 16, 3.0);
        let part = build_partition(1.3, &g).unwrap();
        let f = vec![-2.0; g.len()];
        let s = -1.5;
        let n = norm(&f, &NormSpec::besov(s, 2.0, 2.0), &part).unwrap();
        let expect = 2f64.powf(-s) * 2.0 * 3.0;
        assert!((n - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn general_p_path_matches_parseval_path() {
        let g = Grid::new(2, 16, 2.0 * PI);
        let part = build_partition(1.3, &g).unwrap();
        let f = g.sample(|x| (3.0 * x[0]).sin() + 0.5 * (x[1] + 2.0 * x[0]).cos() + 0.1);
        let fast = norm(&f, &NormSpec::besov(-1.0, 2.0, 3.0), &part).unwrap();
        let blocks = part.blocks(&f);
        let slow = lr_sum(
            blocks
                .iter()
                .enumerate()
                .map(|(i, b)| 2f64.powf(-(i as f64 - 1.0)) * grid_lp(b, 2.0, g.cell_volume())),
            3.0,
        );
        assert!((fast - slow).abs() < 1e-12 * slow);
    }
}
