//! Mollified empirical fields, grid interpolation, and the empirical energy
//!
//! ```text
//! Q_t^N = (1/N) Σ_k |V^k - υ(X^k, t)|² + ‖S^N ∗ φ_N^r - ρ(·, t)‖²_{L²}
//! ```

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::Grid;
use crate::kernels::{KernelFamily, KernelKind};
use crate::particles::ParticleState;
use crate::spde::FieldState;

/// Minimum number of grid cells per standard deviation of the root mollifier.
pub const MIN_CELLS_PER_SD: f64 = 4.0;

/// Fixed number of partial grids merged in order, independent of the thread count.
const DEPOSIT_CHUNKS: usize = 8;

/// Multilinear interpolation of a periodic grid field at `x`.
///
/// Written as nested `a + t (b - a)` so constant fields and node positions are
/// reproduced exactly.
pub fn interpolate(grid: &Grid, field: &[f64], x: &[f64]) -> f64 {
    let d = grid.d;
    let h = grid.spacing();
    let m = grid.m;
    let mut base = [0usize; 3];
    let mut frac = [0.0; 3];
    for a in 0..d {
        let u = grid.domain().wrap(x[a]) / h;
        let i = (u.floor() as usize).min(m - 1);
        base[a] = i;
        frac[a] = u - i as f64;
    }
    // corner values, then collapse axis by axis (last axis first)
    let corners = 1usize << d;
    let mut vals = [0.0; 8];
    let mut idx = [0usize; 3];
    for (c, val) in vals.iter_mut().enumerate().take(corners) {
        for a in 0..d {
            let bit = (c >> (d - 1 - a)) & 1;
            idx[a] = (base[a] + bit) % m;
        }
        *val = field[grid.flat(&idx[..d])];
    }
    let mut len = corners;
    for a in (0..d).rev() {
        len /= 2;
        for c in 0..len {
            let lo = vals[2 * c];
            let hi = vals[2 * c + 1];
            vals[c] = lo + frac[a] * (hi - lo);
        }
    }
    vals[0]
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDeposit {
    pub grid: Grid,
    /// `(S^N ∗ φ_N^r)` at the nodes.
    pub density: Vec<f64>,
    /// `(V^N ∗ φ_N^r)` at the nodes, one grid per component.
    pub momentum: Vec<Vec<f64>>,
    pub n: usize,
    /// Standard deviation of the root mollifier.
    pub bandwidth: f64,
}

impl EmpiricalDeposit {
    pub fn mass(&self) -> f64 {
        self.grid.integrate(&self.density)
    }
}

/// Checks that the grid resolves the root mollifier.
pub fn check_resolution(grid: &Grid, fam: &KernelFamily) -> Result<()> {
    let cells_per_sd = fam.root_std_dev() / grid.spacing();
    if cells_per_sd < MIN_CELLS_PER_SD {
        return Err(Error::GridTooCoarse { cells_per_sd, required: MIN_CELLS_PER_SD });
    }
    Ok(())
}

/// Mollified empirical density and momentum on `grid`.
pub fn deposit(s: &ParticleState, fam: &KernelFamily, grid: &Grid) -> Result<EmpiricalDeposit> {
    if fam.kind != KernelKind::Potential {
        return Err(Error::InvalidArgument("deposit uses the potential family".into()));
    }
    if s.d != grid.d {
        return Err(Error::Shape(format!("state dimension {} vs grid dimension {}", s.d, grid.d)));
    }
    check_resolution(grid, fam)?;
    if fam.cutoff_radius > 0.5 * grid.length {
        return Err(Error::CutoffTooLarge { cutoff: fam.cutoff_radius, half_box: 0.5 * grid.length });
    }
    let d = grid.d;
    let n = s.n();
    let chunk = n.div_ceil(DEPOSIT_CHUNKS).max(1);
    let partials: Vec<Vec<f64>> = (0..n)
        .step_by(chunk)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|start| {
            let mut acc = vec![0.0; grid.len() * (d + 1)];
            for k in start..(start + chunk).min(n) {
                splat(grid, fam, s.position(k), s.velocity(k), &mut acc);
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; grid.len() * (d + 1)];
    for p in &partials {
        for (a, b) in total.iter_mut().zip(p) {
            *a += b;
        }
    }
    let inv_n = 1.0 / n as f64;
    total.iter_mut().for_each(|v| *v *= inv_n);
    let len = grid.len();
    let density = total[..len].to_vec();
    let momentum = (0..d).map(|q| total[(q + 1) * len..(q + 2) * len].to_vec()).collect();
    Ok(EmpiricalDeposit { grid: *grid, density, momentum, n, bandwidth: fam.root_std_dev() })
}

/// Adds `φ_N^r(x_g - x)` (and its velocity-weighted copies) to every node within the cutoff.
/// The Gaussian factorizes per axis, so only `d` short exponential tables are needed.
fn splat(grid: &Grid, fam: &KernelFamily, x: &[f64], v: &[f64], acc: &mut [f64]) {
    let d = grid.d;
    let h = grid.spacing();
    let m = grid.m as isize;
    let len = grid.len();
    let cutoff = fam.cutoff_radius;
    let reach = (cutoff / h).ceil() as isize;
    let width = (2 * reach + 1) as usize;
    let s2 = fam.scale() * fam.scale();
    let peak = fam.eval_root(&vec![0.0; d]);
    // per-axis tables: node index, offset², exp factor
    let mut nodes = vec![0usize; d * width];
    let mut off2 = vec![0.0; d * width];
    let mut fac = vec![0.0; d * width];
    for a in 0..d {
        let c = (x[a] / h).floor() as isize;
        for (j, o) in (-reach..=reach).enumerate() {
            let node = c + o;
            let dx = node as f64 * h - x[a];
            nodes[a * width + j] = node.rem_euclid(m) as usize;
            off2[a * width + j] = dx * dx;
            fac[a * width + j] = (-s2 * dx * dx).exp();
        }
    }
    let cut2 = cutoff * cutoff;
    let mut counter = vec![0usize; d];
    loop {
        let mut r2 = 0.0;
        let mut w = peak;
        let mut flat = 0usize;
        for a in 0..d {
            let j = a * width + counter[a];
            r2 += off2[j];
            w *= fac[j];
            flat = flat * grid.m + nodes[j];
        }
        if r2 <= cut2 {
            acc[flat] += w;
            for q in 0..d {
                acc[(q + 1) * len + flat] += w * v[q];
            }
        }
        // odometer
        let mut a = d;
        loop {
            if a == 0 {
                return;
            }
            a -= 1;
            counter[a] += 1;
            if counter[a] < width {
                break;
            }
            counter[a] = 0;
        }
    }
}

/// Cloud-in-cell (multilinear) assignment of the raw empirical measures:
/// returns the densities of `S^N` and of each component of `V^N` on the grid.
pub fn cic_deposit(s: &ParticleState, grid: &Grid) -> (Vec<f64>, Vec<Vec<f64>>) {
    let d = grid.d;
    let h = grid.spacing();
    let m = grid.m;
    let len = grid.len();
    let weight = 1.0 / (s.n() as f64 * grid.cell_volume());
    let mut dens = vec![0.0; len];
    let mut mom = vec![vec![0.0; len]; d];
    let mut base = [0usize; 3];
    let mut frac = [0.0; 3];
    let mut idx = [0usize; 3];
    for k in 0..s.n() {
        let x = s.position(k);
        for a in 0..d {
            let u = grid.domain().wrap(x[a]) / h;
            let i = (u.floor() as usize).min(m - 1);
            base[a] = i;
            frac[a] = u - i as f64;
        }
        for c in 0..(1usize << d) {
            let mut w = weight;
            for a in 0..d {
                let bit = (c >> a) & 1;
                idx[a] = (base[a] + bit) % m;
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
            }
            let flat = grid.flat(&idx[..d]);
            dens[flat] += w;
            for q in 0..d {
                mom[q][flat] += w * s.velocity(k)[q];
            }
        }
    }
    (dens, mom)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    pub t: f64,
    /// `(1/N) Σ_k |V^k - υ(X^k)|²`.
    pub kinetic: f64,
    /// `‖S^N ∗ φ_N^r - ρ‖²_{L²}` by grid quadrature.
    pub density_l2: f64,
    pub total: f64,
}

/// Kinetic residuals `V^k - υ(X^k, t)`, `n × d`.
pub fn kinetic_residuals(s: &ParticleState, f: &FieldState) -> Vec<f64> {
    let d = s.d;
    let mut out = vec![0.0; s.x.len()];
    for (k, o) in out.chunks_exact_mut(d).enumerate() {
        let x = s.position(k);
        for q in 0..d {
            o[q] = s.velocity(k)[q] - interpolate(&f.grid, &f.vel[q], x);
        }
    }
    out
}

/// Empirical energy of a particle state against a field state on the deposit's grid.
pub fn energy(s: &ParticleState, f: &FieldState, dep: &EmpiricalDeposit) -> Result<EnergyBreakdown> {
    if f.grid != dep.grid {
        return Err(Error::Shape("field and deposit grids differ".into()));
    }
    let res = kinetic_residuals(s, f);
    let kinetic = res.iter().map(|r| r * r).sum::<f64>() / s.n() as f64;
    let density_l2 = dep
        .density
        .iter()
        .zip(&f.rho)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        * dep.grid.cell_volume();
    Ok(EnergyBreakdown { t: s.t, kinetic, density_l2, total: kinetic + density_l2 })
}

/// Pairings `⟨S^N, f⟩ = (1/N) Σ f(X^k)` and `⟨V^N, f⟩ = (1/N) Σ V^k f(X^k)`.
pub fn pair(s: &ParticleState, grid: &Grid, f: &[f64]) -> (f64, Vec<f64>) {
    let d = s.d;
    let mut sp = 0.0;
    let mut vp = vec![0.0; d];
    for k in 0..s.n() {
        let fk = interpolate(grid, f, s.position(k));
        sp += fk;
        for (a, &vq) in vp.iter_mut().zip(s.velocity(k)) {
            *a += vq * fk;
        }
    }
    let n = s.n() as f64;
    vp.iter_mut().for_each(|a| *a /= n);
    (sp / n, vp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ScalingParams;
    use std::f64::consts::PI;

    #[test]
    fn interpolation_exactness() {
        let g = Grid::new(2, 8, 4.0);
        let c = vec![2.5; g.len()];
        assert_eq!(interpolate(&g, &c, &[1.234, 3.21]), 2.5);
        let f = g.sample(|x| 1.0 + 2.0 * x[0] - 0.5 * x[1]);
        let mut node = [0.0; 2];
        g.node(19, &mut node);
        assert_eq!(interpolate(&g, &f, &node), f[19]);
        // affine inside one cell
        let v = interpolate(&g, &f, &[1.3, 2.2]);
        assert!((v - (1.0 + 2.6 - 1.1)).abs() < 1e-14);
    }

    #[test]
    fn single_particle_deposit_profile() {
        let p = ScalingParams { n: 1, ..Default::default() };
        let fam = KernelFamily::potential(&p);
        let g = Grid::new(2, 128, 16.0);
        let s = ParticleState::new(2, vec![8.0, 8.0], vec![1.0, 0.0], 0.0).unwrap();
        let dep = deposit(&s, &fam, &g).unwrap();
        assert!((dep.mass() - 1.0).abs() < 1e-8);
        let l2 = g.integrate(&dep.density.iter().map(|v| v * v).collect::<Vec<_>>());
        assert!((l2 - 1.0 / (2.0 * PI)).abs() < 1e-8, "{l2}");
        let mut node = [0.0; 2];
        for k in [0usize, 5000, 8256, 8300] {
            g.node(k, &mut node);
            let expect = fam.eval_root(&[node[0] - 8.0, node[1] - 8.0]);
            assert!((dep.density[k] - expect).abs() < 1e-15);
        }
        assert_eq!(dep.momentum[0], dep.density);
        assert!(dep.momentum[1].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn coarse_grid_rejected() {
        let p = ScalingParams { n: 4096, ..Default::default() };
        let fam = KernelFamily::potential(&p);
        let g = Grid::new(2, 32, 8.0);
        let s = ParticleState::new(2, vec![1.0, 1.0], vec![0.0, 0.0], 0.0).unwrap();
        assert!(matches!(deposit(&s, &fam, &g), Err(Error::GridTooCoarse { .. })));
    }

    #[test]
    fn cic_conserves_mass_and_momentum() {
        let g = Grid::new(2, 16, 4.0);
        let s = ParticleState::new(2, vec![0.1, 3.95, 2.0, 2.0, 3.3, 0.7], vec![1.0, 2.0, -1.0, 0.5, 0.0, 3.0], 0.0)
            .unwrap();
        let (rho, mom) = cic_deposit(&s, &g);
        assert!((g.integrate(&rho) - 1.0).abs() < 1e-14);
        assert!((g.integrate(&mom[0]) - 0.0).abs() < 1e-14);
        assert!((g.integrate(&mom[1]) - 5.5 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn pairing_with_one() {
        let g = Grid::new(2, 8, 4.0);
        let one = vec![1.0; g.len()];
        let s = ParticleState::new(2, vec![0.1, 0.2, 3.0, 1.0], vec![1.0, 2.0, 3.0, -4.0], 0.0).unwrap();
        let (sp, vp) = pair(&s, &g, &one);
        assert_eq!(sp, 1.0);
        assert_eq!(vp, vec![2.0, -1.0]);
    }
}
