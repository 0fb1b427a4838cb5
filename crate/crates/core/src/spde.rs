//! Periodic finite-difference solver for the stochastic compressible barotropic system
//! in velocity form, pressure `p = ρ²/2`:
//!
//! ```text
//! dρ   = -div(ρυ) dt
//! dυ_q = ( -υ·∇υ_q - ∇_q ρ + (1/2ρ) ∇_q(ρ² div υ)
//!          + (1/2ρ) Σ_i ∇_i(ρ² [∇_i υ_q + ∇_q υ_i]) ) dt + σ_q(x) υ_q ∘ dB^q
//! ```
//!
//! Central second-order differences throughout; same-axis viscous fluxes use the compact
//! three-point form with face-averaged `ρ²`.

use rayon::prelude::*;

use crate::error::{BlowupSite, Error, Result};
use crate::geometry::Grid;
use crate::noise::NoiseCoefficient;
use crate::particles::NoiseScheme;

/// Default diffusive stability constant.
pub const C_STAB: f64 = 0.2;
/// Default acoustic/advective Courant number.
pub const COURANT: f64 = 0.5;
/// Density floor as a fraction of the initial mean density.
pub const FLOOR_FRACTION: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub grid: Grid,
    pub rho: Vec<f64>,
    /// One grid per velocity component.
    pub vel: Vec<Vec<f64>>,
    pub t: f64,
}

impl FieldState {
    pub fn new(grid: Grid, rho: Vec<f64>, vel: Vec<Vec<f64>>, t: f64) -> Result<Self> {
        if rho.len() != grid.len() || vel.len() != grid.d || vel.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::Shape("field arrays do not match the grid".into()));
        }
        Ok(Self { grid, rho, vel, t })
    }

    pub fn constant(grid: Grid, rho: f64, vel: &[f64]) -> Self {
        Self {
            grid,
            rho: vec![rho; grid.len()],
            vel: vel.iter().map(|&v| vec![v; grid.len()]).collect(),
            t: 0.0,
        }
    }

    pub fn mass(&self) -> f64 {
        self.grid.integrate(&self.rho)
    }

    /// `ρυ`, the momentum density.
    pub fn momentum(&self) -> Vec<Vec<f64>> {
        self.vel
            .iter()
            .map(|c| c.iter().zip(&self.rho).map(|(u, r)| u * r).collect())
            .collect()
    }

    pub fn min_rho(&self) -> f64 {
        self.rho.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_rho(&self) -> f64 {
        self.rho.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_speed(&self) -> f64 {
        (0..self.grid.len())
            .map(|k| self.vel.iter().map(|c| c[k] * c[k]).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    pub fn find_non_finite(&self) -> Option<BlowupSite> {
        if let Some(cell) = self.rho.iter().position(|v| !v.is_finite()) {
            return Some(BlowupSite::Grid { cell, field: "rho" });
        }
        for c in &self.vel {
            if let Some(cell) = c.iter().position(|v| !v.is_finite()) {
                return Some(BlowupSite::Grid { cell, field: "upsilon" });
            }
        }
        None
    }
}

/// Periodic neighbour tables, one pair per axis.
#[derive(Debug, Clone)]
struct Neighbors {
    plus: Vec<Vec<u32>>,
    minus: Vec<Vec<u32>>,
}

impl Neighbors {
    fn new(grid: &Grid) -> Self {
        let plus = (0..grid.d)
            .map(|a| (0..grid.len()).map(|k| grid.shift(k, a, 1) as u32).collect())
            .collect();
        let minus = (0..grid.d)
            .map(|a| (0..grid.len()).map(|k| grid.shift(k, a, -1) as u32).collect())
            .collect();
        Self { plus, minus }
    }
}

/// Finite-difference operators on one grid.
#[derive(Debug, Clone)]
pub struct Stencil {
    grid: Grid,
    nb: Neighbors,
}

impl Stencil {
    pub fn new(grid: Grid) -> Self {
        Self { grid, nb: Neighbors::new(&grid) }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Central first derivative along `axis`.
    pub fn d1(&self, f: &[f64], axis: usize) -> Vec<f64> {
        let inv = 0.5 / self.grid.spacing();
        let (p, m) = (&self.nb.plus[axis], &self.nb.minus[axis]);
        let mut out = vec![0.0; f.len()];
        out.par_iter_mut().enumerate().for_each(|(k, o)| {
            *o = (f[p[k] as usize] - f[m[k] as usize]) * inv;
        });
        out
    }

    /// Compact `∂_a(c ∂_a u)` with face-averaged coefficient.
    pub fn d2_weighted(&self, c: &[f64], u: &[f64], axis: usize) -> Vec<f64> {
        let h = self.grid.spacing();
        let inv = 1.0 / (h * h);
        let (p, m) = (&self.nb.plus[axis], &self.nb.minus[axis]);
        let mut out = vec![0.0; u.len()];
        out.par_iter_mut().enumerate().for_each(|(k, o)| {
            let (kp, km) = (p[k] as usize, m[k] as usize);
            let cp = 0.5 * (c[k] + c[kp]);
            let cm = 0.5 * (c[k] + c[km]);
            *o = (cp * (u[kp] - u[k]) - cm * (u[k] - u[km])) * inv;
        });
        out
    }

    /// `∂_a(c ∂_b u)`: compact when `a == b`, nested central differences otherwise.
    pub fn d_flux(&self, c: &[f64], u: &[f64], a: usize, b: usize) -> Vec<f64> {
        if a == b {
            return self.d2_weighted(c, u, a);
        }
        let inner: Vec<f64> = self.d1(u, b).iter().zip(c).map(|(g, w)| g * w).collect();
        self.d1(&inner, a)
    }
}

/// Which algebraic form of the pressure force to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PressureForm {
    /// `∇_q ρ`.
    DensityGradient,
    /// `(1/ρ) ∇_q (ρ²/2)`.
    PressureOverDensity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopDecision {
    Continue,
    Stopped(f64),
}

#[derive(Debug, Clone)]
pub struct SpdeSolver {
    stencil: Stencil,
    /// σ sampled on the grid, one grid per component.
    sigma: Vec<Vec<f64>>,
    pub scheme: NoiseScheme,
    pub rho_floor: f64,
    /// Disables every deterministic term (noise-only test mode).
    pub frozen_transport: bool,
    pub c_stab: f64,
}

impl SpdeSolver {
    pub fn new(grid: Grid, sigma: &NoiseCoefficient, rho_floor: f64) -> Result<Self> {
        if sigma.d() != grid.d {
            return Err(Error::Shape(format!("noise dimension {} vs grid dimension {}", sigma.d(), grid.d)));
        }
        let domain = grid.domain();
        let mut per_node = vec![vec![0.0; grid.len()]; grid.d];
        let mut x = [0.0; 3];
        let mut s = [0.0; 3];
        for k in 0..grid.len() {
            grid.node(k, &mut x[..grid.d]);
            sigma.eval(&x[..grid.d], &domain, &mut s[..grid.d]);
            for q in 0..grid.d {
                per_node[q][k] = s[q];
            }
        }
        Ok(Self {
            stencil: Stencil::new(grid),
            sigma: per_node,
            scheme: NoiseScheme::Heun,
            rho_floor,
            frozen_transport: false,
            c_stab: C_STAB,
        })
    }

    /// Solver whose density floor is `1e-6 × mean(ρ0)`.
    pub fn for_initial(f0: &FieldState, sigma: &NoiseCoefficient) -> Result<Self> {
        let mean = f0.rho.iter().sum::<f64>() / f0.rho.len() as f64;
        Self::new(f0.grid, sigma, FLOOR_FRACTION * mean)
    }

    pub fn with_scheme(mut self, scheme: NoiseScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn stencil(&self) -> &Stencil {
        &self.stencil
    }

    /// `-div(ρυ)` from central differences of the flux.
    pub fn continuity_rhs(&self, f: &FieldState) -> Vec<f64> {
        let mut out = vec![0.0; f.rho.len()];
        for (a, comp) in f.vel.iter().enumerate() {
            let flux: Vec<f64> = comp.iter().zip(&f.rho).map(|(u, r)| u * r).collect();
            for (o, g) in out.iter_mut().zip(self.stencil.d1(&flux, a)) {
                *o -= g;
            }
        }
        out
    }

    pub fn pressure_gradient(&self, f: &FieldState, q: usize, form: PressureForm) -> Vec<f64> {
        match form {
            PressureForm::DensityGradient => self.stencil.d1(&f.rho, q),
            PressureForm::PressureOverDensity => {
                let p: Vec<f64> = f.rho.iter().map(|r| 0.5 * r * r).collect();
                self.stencil.d1(&p, q).iter().zip(&f.rho).map(|(g, r)| g / r).collect()
            }
        }
    }

    /// Deterministic right-hand side of every velocity component.
    pub fn momentum_rhs(&self, f: &FieldState) -> Result<Vec<Vec<f64>>> {
        let min = f.min_rho();
        if !(min >= self.rho_floor) {
            return Err(Error::DensityFloor { min, floor: self.rho_floor });
        }
        let d = f.grid.d;
        let st = &self.stencil;
        let rho2: Vec<f64> = f.rho.iter().map(|r| r * r).collect();
        // grads[q][a] = ∂_a υ_q
        let grads: Vec<Vec<Vec<f64>>> = (0..d).map(|q| (0..d).map(|a| st.d1(&f.vel[q], a)).collect()).collect();
        let mut out = Vec::with_capacity(d);
        for q in 0..d {
            let mut acc = self.pressure_gradient(f, q, PressureForm::DensityGradient);
            acc.iter_mut().for_each(|v| *v = -*v);
            for a in 0..d {
                for ((o, u), g) in acc.iter_mut().zip(&f.vel[a]).zip(&grads[q][a]) {
                    *o -= u * g;
                }
            }
            // Σ_i ∂_i(ρ² ∂_i υ_q) + Σ_i ∂_i(ρ² ∂_q υ_i) + Σ_i ∂_q(ρ² ∂_i υ_i)
            let mut visc = vec![0.0; f.rho.len()];
            for i in 0..d {
                for term in [
                    st.d_flux(&rho2, &f.vel[q], i, i),
                    st.d_flux(&rho2, &f.vel[i], i, q),
                    st.d_flux(&rho2, &f.vel[i], q, i),
                ] {
                    visc.iter_mut().zip(&term).for_each(|(v, t)| *v += t);
                }
            }
            for ((o, v), r) in acc.iter_mut().zip(&visc).zip(&f.rho) {
                *o += v / (2.0 * r);
            }
            out.push(acc);
        }
        Ok(out)
    }

    fn drift(&self, f: &FieldState) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        if self.frozen_transport {
            let z = vec![0.0; f.rho.len()];
            return Ok((z.clone(), vec![z; f.grid.d]));
        }
        let m = self.momentum_rhs(f)?;
        Ok((self.continuity_rhs(f), m))
    }

    /// Largest step satisfying the diffusive bound `c_stab h² / max ρ` and the
    /// Courant bound on `|υ| + √ρ`.
    pub fn stable_dt(&self, f: &FieldState) -> f64 {
        let h = f.grid.spacing();
        let max_rho = f.max_rho().max(0.0);
        let diffusive = if max_rho > 0.0 { self.c_stab * h * h / max_rho } else { f64::INFINITY };
        let wave = f.max_speed() + max_rho.sqrt();
        let courant = if wave > 0.0 { COURANT * h / wave } else { f64::INFINITY };
        diffusive.min(courant)
    }

    /// One step of the stochastic system with path increment `db`.
    pub fn spde_step(&self, f: &FieldState, db: &[f64], dt: f64) -> Result<FieldState> {
        let d = f.grid.d;
        let (c0, m0) = self.drift(f)?;
        let mut next = match self.scheme {
            NoiseScheme::ItoEuler => {
                let rho = f.rho.iter().zip(&c0).map(|(r, c)| r + c * dt).collect();
                let vel = (0..d)
                    .map(|q| {
                        (0..f.rho.len())
                            .map(|k| {
                                let (u, s) = (f.vel[q][k], self.sigma[q][k]);
                                u + (m0[q][k] + 0.5 * s * s * u) * dt + s * u * db[q]
                            })
                            .collect()
                    })
                    .collect();
                FieldState { grid: f.grid, rho, vel, t: f.t + dt }
            }
            NoiseScheme::Heun => {
                let pred_rho = f.rho.iter().zip(&c0).map(|(r, c)| r + c * dt).collect();
                let pred_vel = (0..d)
                    .map(|q| {
                        (0..f.rho.len())
                            .map(|k| {
                                let u = f.vel[q][k];
                                u + m0[q][k] * dt + self.sigma[q][k] * u * db[q]
                            })
                            .collect()
                    })
                    .collect();
                let pred = FieldState { grid: f.grid, rho: pred_rho, vel: pred_vel, t: f.t + dt };
                if let Some(site) = pred.find_non_finite() {
                    return Err(Error::Blowup { t: pred.t, site });
                }
                let (c1, m1) = self.drift(&pred)?;
                let rho = (0..f.rho.len()).map(|k| f.rho[k] + 0.5 * (c0[k] + c1[k]) * dt).collect();
                let vel = (0..d)
                    .map(|q| {
                        (0..f.rho.len())
                            .map(|k| {
                                let s = self.sigma[q][k];
                                f.vel[q][k]
                                    + 0.5 * (m0[q][k] + m1[q][k]) * dt
                                    + 0.5 * s * (f.vel[q][k] + pred.vel[q][k]) * db[q]
                            })
                            .collect()
                    })
                    .collect();
                FieldState { grid: f.grid, rho, vel, t: f.t + dt }
            }
        };
        if let Some(site) = next.find_non_finite() {
            return Err(Error::Blowup { t: next.t, site });
        }
        let min = next.min_rho();
        if !self.frozen_transport && min < self.rho_floor {
            return Err(Error::DensityFloor { min, floor: self.rho_floor });
        }
        next.t = f.t + dt;
        Ok(next)
    }

    /// Discrete proxy `max(‖ρ‖_∞, ‖υ‖_∞, ‖∇υ‖_∞)` of the solution norm.
    pub fn proxy_norm(&self, f: &FieldState) -> f64 {
        let sup = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let mut n = sup(&f.rho);
        for (q, c) in f.vel.iter().enumerate() {
            n = n.max(sup(c));
            for a in 0..f.grid.d {
                n = n.max(sup(&self.stencil.d1(&f.vel[q], a)));
            }
        }
        if n.is_finite() {
            n
        } else {
            f64::INFINITY
        }
    }

    /// Stopping rule at threshold `m`.
    pub fn check_stopping(&self, f: &FieldState, m: f64) -> StopDecision {
        if self.proxy_norm(f) >= m {
            StopDecision::Stopped(f.t)
        } else {
            StopDecision::Continue
        }
    }
}
