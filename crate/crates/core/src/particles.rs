//! The N-particle second-order system with moderate interaction, matrix friction and
//! common multiplicative Stratonovich noise
//!
//! ```text
//! dX^k = V^k dt
//! dV^k = -(1/N) Σ_{l≠k} [∇φ_N(X^k - X^l) + ζ_N(X^k - X^l)(V^k - V^l)] dt + σ(X^k) V^k ∘ dB
//! ```
//!
//! where the noise acts componentwise, `σ_q(X) V_q ∘ dB^q`.

use rand::Rng;
use rayon::prelude::*;

use crate::cells::CellList;
use crate::empirical::interpolate;
use crate::error::{BlowupSite, Error, Result};
use crate::geometry::{Grid, PeriodicBox};
use crate::kernels::KernelFamily;
use crate::noise::{rng_for, BrownianPath, NoiseCoefficient};

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleState {
    pub d: usize,
    /// `n × d` positions in `[0, L)^d`, row-major.
    pub x: Vec<f64>,
    /// `n × d` velocities, row-major.
    pub v: Vec<f64>,
    pub t: f64,
}

impl ParticleState {
    pub fn new(d: usize, x: Vec<f64>, v: Vec<f64>, t: f64) -> Result<Self> {
        if x.len() != v.len() || !x.len().is_multiple_of(d) {
            return Err(Error::Shape(format!(
                "positions ({}) and velocities ({}) are not n × {d}",
                x.len(),
                v.len()
            )));
        }
        Ok(Self { d, x, v, t })
    }

    pub fn n(&self) -> usize {
        self.x.len() / self.d
    }

    pub fn position(&self, k: usize) -> &[f64] {
        &self.x[k * self.d..(k + 1) * self.d]
    }

    pub fn velocity(&self, k: usize) -> &[f64] {
        &self.v[k * self.d..(k + 1) * self.d]
    }

    /// `(1/N) Σ_k V^k`, summed in index order.
    pub fn mean_velocity(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.d];
        for vk in self.v.chunks_exact(self.d) {
            for (a, &b) in m.iter_mut().zip(vk) {
                *a += b;
            }
        }
        let n = self.n() as f64;
        m.iter_mut().for_each(|a| *a /= n);
        m
    }

    pub fn max_speed(&self) -> f64 {
        self.v
            .chunks_exact(self.d)
            .map(|vk| vk.iter().map(|a| a * a).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    pub fn wrap(&mut self, domain: &PeriodicBox) {
        for xi in &mut self.x {
            *xi = domain.wrap(*xi);
        }
    }

    /// First non-finite entry, if any.
    pub fn find_non_finite(&self) -> Option<BlowupSite> {
        if let Some(i) = self.x.iter().position(|v| !v.is_finite()) {
            return Some(BlowupSite::Particle { index: i / self.d, field: "X" });
        }
        if let Some(i) = self.v.iter().position(|v| !v.is_finite()) {
            return Some(BlowupSite::Particle { index: i / self.d, field: "V" });
        }
        None
    }
}

/// Stratonovich-consistent time stepping of the noise term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseScheme {
    /// Stochastic Heun predictor-corrector.
    Heun,
    /// Itô Euler-Maruyama with the `½ σ_q² V_q` correction drift.
    ItoEuler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeighborMode {
    /// Cell list when at least three cells fit per axis, all pairs otherwise.
    Auto,
    AllPairs,
}

#[derive(Debug, Clone)]
pub struct ParticleSystem {
    pub domain: PeriodicBox,
    pub potential: KernelFamily,
    pub friction: KernelFamily,
    pub scheme: NoiseScheme,
    pub neighbors: NeighborMode,
    /// Switches the pairwise interaction off (free transport plus noise).
    pub interactions: bool,
}

impl ParticleSystem {
    pub fn new(domain: PeriodicBox, potential: KernelFamily, friction: KernelFamily) -> Result<Self> {
        let cutoff = potential.cutoff_radius.max(friction.cutoff_radius);
        if cutoff > 0.5 * domain.length {
            return Err(Error::CutoffTooLarge { cutoff, half_box: 0.5 * domain.length });
        }
        Ok(Self {
            domain,
            potential,
            friction,
            scheme: NoiseScheme::Heun,
            neighbors: NeighborMode::Auto,
            interactions: true,
        })
    }

    pub fn with_scheme(mut self, scheme: NoiseScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_neighbors(mut self, mode: NeighborMode) -> Self {
        self.neighbors = mode;
        self
    }

    pub fn without_interactions(mut self) -> Self {
        self.interactions = false;
        self
    }

    fn cutoff(&self) -> f64 {
        self.potential.cutoff_radius.max(self.friction.cutoff_radius)
    }

    /// Interaction acceleration of every particle, `n × d`.
    pub fn interaction_drift(&self, s: &ParticleState) -> Vec<f64> {
        let d = s.d;
        let n = s.n();
        let mut out = vec![0.0; n * d];
        if !self.interactions || n < 2 {
            return out;
        }
        let cells = match self.neighbors {
            NeighborMode::Auto => CellList::build(&s.x, &self.domain, self.cutoff()),
            NeighborMode::AllPairs => None,
        };
        let inv_n = 1.0 / n as f64;
        out.par_chunks_mut(d).enumerate().for_each(|(k, acc)| {
            let mut sum = [0.0; 3];
            let mut visit = |l: usize| {
                if l != k {
                    self.pair_force(s, k, l, &mut sum[..d]);
                }
            };
            match &cells {
                Some(cl) => cl.for_each_candidate(k, &mut visit),
                None => (0..n).for_each(&mut visit),
            }
            for (a, &b) in acc.iter_mut().zip(&sum[..d]) {
                *a = -inv_n * b;
            }
        });
        out
    }

    /// Adds `∇φ_N(x) + ζ_N(x)(V^k - V^l)` with `x` the minimum image of `X^k - X^l`.
    #[inline]
    fn pair_force(&self, s: &ParticleState, k: usize, l: usize, sum: &mut [f64]) {
        let d = s.d;
        let mut x = [0.0; 3];
        self.domain.displacement(s.position(k), s.position(l), &mut x[..d]);
        let r2: f64 = x[..d].iter().map(|a| a * a).sum();
        let g = self.potential.grad_factor(r2);
        let z = self.friction.zeta_factor(r2);
        if g == 0.0 && z == 0.0 {
            return;
        }
        let vk = s.velocity(k);
        let vl = s.velocity(l);
        let mut proj = 0.0;
        for i in 0..d {
            proj += x[i] * (vk[i] - vl[i]);
        }
        let coef = g + z * proj;
        for i in 0..d {
            sum[i] += coef * x[i];
        }
    }

    /// σ(X^k) for every particle, `n × d`.
    fn sigma_values(&self, s: &ParticleState, sigma: &NoiseCoefficient) -> Vec<f64> {
        let d = s.d;
        let mut out = vec![0.0; s.x.len()];
        for (k, o) in out.chunks_exact_mut(d).enumerate() {
            sigma.eval(s.position(k), &self.domain, o);
        }
        out
    }

    /// Advances `(X, V, t)` by `dt` using the path increment `db`.
    pub fn step(&self, s: &ParticleState, db: &[f64], dt: f64, sigma: &NoiseCoefficient) -> Result<ParticleState> {
        let d = s.d;
        let a0 = self.interaction_drift(s);
        let sig0 = self.sigma_values(s, sigma);
        let mut next = match self.scheme {
            NoiseScheme::ItoEuler => {
                let mut x = s.x.clone();
                let mut v = s.v.clone();
                for i in 0..x.len() {
                    let sq = sig0[i];
                    x[i] += s.v[i] * dt;
                    v[i] += (a0[i] + 0.5 * sq * sq * s.v[i]) * dt + sq * s.v[i] * db[i % d];
                }
                ParticleState { d, x, v, t: s.t + dt }
            }
            NoiseScheme::Heun => {
                let mut pred = s.clone();
                for i in 0..s.x.len() {
                    pred.x[i] = self.domain.wrap(s.x[i] + s.v[i] * dt);
                    pred.v[i] = s.v[i] + a0[i] * dt + sig0[i] * s.v[i] * db[i % d];
                }
                let a1 = self.interaction_drift(&pred);
                let sig1 = self.sigma_values(&pred, sigma);
                let mut x = s.x.clone();
                let mut v = s.v.clone();
                for i in 0..x.len() {
                    x[i] += 0.5 * (s.v[i] + pred.v[i]) * dt;
                    v[i] += 0.5 * (a0[i] + a1[i]) * dt
                        + 0.5 * (sig0[i] * s.v[i] + sig1[i] * pred.v[i]) * db[i % d];
                }
                ParticleState { d, x, v, t: s.t + dt }
            }
        };
        if let Some(site) = next.find_non_finite() {
            return Err(Error::Blowup { t: next.t, site });
        }
        next.wrap(&self.domain);
        Ok(next)
    }
}

/// Why a trajectory ended before the horizon.
#[derive(Debug, Clone, PartialEq)]
pub enum Halt {
    /// Non-finite state; `t` is the last valid time.
    Blowup { t: f64, site: BlowupSite },
    /// `max |V^k| ≥ m` at time `t`.
    Threshold { t: f64 },
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<ParticleState>,
    pub halt: Option<Halt>,
}

#[derive(Debug, Clone, Copy)]
pub struct RunSchedule {
    pub dt: f64,
    /// Emit a snapshot every this many steps (and at t = 0).
    pub output_every: usize,
    /// Stopping threshold on `max |V^k|`.
    pub threshold: f64,
}

/// Integrates `s0` along `path` (restricted to `schedule.dt`).
pub fn simulate(
    system: &ParticleSystem,
    s0: &ParticleState,
    path: &BrownianPath,
    sigma: &NoiseCoefficient,
    schedule: &RunSchedule,
) -> Result<Trajectory> {
    let coarse = path.restrict(schedule.dt)?;
    let every = schedule.output_every.max(1);
    let mut snapshots = vec![s0.clone()];
    let mut s = s0.clone();
    for step in 0..coarse.steps() {
        let next = match system.step(&s, coarse.increment(step), schedule.dt, sigma) {
            Ok(next) => next,
            Err(Error::Blowup { site, .. }) => {
                return Ok(Trajectory { snapshots, halt: Some(Halt::Blowup { t: s.t, site }) });
            }
            Err(e) => return Err(e),
        };
        s = next;
        if (step + 1) % every == 0 {
            snapshots.push(s.clone());
        }
        if s.max_speed() >= schedule.threshold {
            if (step + 1) % every != 0 {
                snapshots.push(s.clone());
            }
            return Ok(Trajectory { snapshots, halt: Some(Halt::Threshold { t: s.t }) });
        }
    }
    Ok(Trajectory { snapshots, halt: None })
}

/// How initial positions are drawn from the gridded density.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    /// Independent draws.
    Iid,
    /// Stratified node selection (one uniform per `1/N` slice of the CDF).
    Stratified,
}

/// Draws `n` particles from the multilinear interpolant of `rho0` with velocities
/// `υ0(X^k)`.
///
/// A node is selected with probability `ρ_i h^d`, then each coordinate is offset by a
/// tent-distributed amount on `[-h, h]`; the resulting law is exactly the multilinear
/// interpolant of the nodal density.
pub fn sample_initial(
    grid: &Grid,
    rho0: &[f64],
    upsilon0: &[Vec<f64>],
    n: usize,
    seed: u64,
    sampling: Sampling,
) -> Result<ParticleState> {
    let d = grid.d;
    if rho0.len() != grid.len() || upsilon0.len() != d || upsilon0.iter().any(|c| c.len() != grid.len()) {
        return Err(Error::Shape("initial fields do not match the grid".into()));
    }
    if rho0.iter().any(|&r| r < 0.0 || !r.is_finite()) {
        return Err(Error::InvalidArgument("initial density must be finite and non-negative".into()));
    }
    let mass = grid.integrate(rho0);
    if (mass - 1.0).abs() > 1e-8 {
        return Err(Error::NotNormalized { mass });
    }
    let w = grid.cell_volume();
    let mut cdf = Vec::with_capacity(rho0.len());
    let mut acc = 0.0;
    for &r in rho0 {
        acc += r * w;
        cdf.push(acc);
    }
    let total = acc;
    let domain = grid.domain();
    let h = grid.spacing();
    let mut rng = rng_for(seed, &[0x494E_4954, n as u64]);
    let mut x = Vec::with_capacity(n * d);
    let mut node = [0.0; 3];
    for k in 0..n {
        let u: f64 = rng.random();
        let target = match sampling {
            Sampling::Iid => u * total,
            Sampling::Stratified => (k as f64 + u) / n as f64 * total,
        };
        let i = cdf.partition_point(|&c| c <= target).min(cdf.len() - 1);
        grid.node(i, &mut node[..d]);
        for &c in &node[..d] {
            let tent: f64 = rng.random::<f64>() + rng.random::<f64>() - 1.0;
            x.push(domain.wrap(c + h * tent));
        }
    }
    let mut v = Vec::with_capacity(n * d);
    for xk in x.chunks_exact(d) {
        for comp in upsilon0 {
            v.push(interpolate(grid, comp, xk));
        }
    }
    ParticleState::new(d, x, v, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::generate_path;
    use crate::params::ScalingParams;

    fn system(n: usize, length: f64) -> ParticleSystem {
        let p = ScalingParams { n, ..Default::default() };
        ParticleSystem::new(
            PeriodicBox::new(2, length),
            KernelFamily::potential(&p),
            KernelFamily::friction(&p),
        )
        .unwrap()
    }

    fn random_state(n: usize, length: f64, seed: u64) -> ParticleState {
        let mut rng = rng_for(seed, &[]);
        let x = (0..2 * n).map(|_| rng.random::<f64>() * length).collect();
        let v = (0..2 * n).map(|_| rng.random::<f64>() - 0.5).collect();
        ParticleState::new(2, x, v, 0.0).unwrap()
    }

    #[test]
    fn single_particle_feels_nothing() {
        let sys = system(1, 12.0);
        let s = ParticleState::new(2, vec![1.0, 2.0], vec![0.3, -0.1], 0.0).unwrap();
        assert_eq!(sys.interaction_drift(&s), vec![0.0, 0.0]);
    }

    #[test]
    fn two_particles_equal_velocity() {
        let sys = system(2, 12.0);
        let s = ParticleState::new(2, vec![1.0, 1.0, 1.4, 1.3], vec![0.5, 0.5, 0.5, 0.5], 0.0).unwrap();
        let a = sys.interaction_drift(&s);
        assert_eq!(a[0], -a[2]);
        assert_eq!(a[1], -a[3]);
        // potential only: matches -(1/2)∇φ_2(X¹ - X²)
        let g = sys.potential.eval_grad(&[-0.4, -0.3]);
        assert!((a[0] + 0.5 * g[0]).abs() < 1e-15);
    }

    #[test]
    fn cutoff_must_fit_in_half_box() {
        let p = ScalingParams { n: 256, ..Default::default() };
        let err = ParticleSystem::new(PeriodicBox::new(2, 6.0), KernelFamily::potential(&p), KernelFamily::friction(&p));
        assert!(matches!(err, Err(Error::CutoffTooLarge { .. })));
    }

    #[test]
    fn cell_list_matches_all_pairs() {
        let sys = system(400, 16.0);
        let s = random_state(400, 16.0, 11);
        let fast = sys.interaction_drift(&s);
        let slow = sys.clone().with_neighbors(NeighborMode::AllPairs).interaction_drift(&s);
        let scale = slow.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn zero_noise_zero_drift_is_free_flight() {
        let sys = system(2, 12.0).without_interactions();
        let s = ParticleState::new(2, vec![1.0, 1.0, 2.0, 2.0], vec![0.5, -0.25, 0.0, 1.0], 0.0).unwrap();
        // Itô-Euler carries the ½σ²V correction drift, so only σ = 0 is drift-free there
        for (scheme, sigma) in [(NoiseScheme::Heun, 0.7), (NoiseScheme::ItoEuler, 0.0)] {
            let sys = sys.clone().with_scheme(scheme);
            let next = sys.step(&s, &[0.0, 0.0], 0.1, &NoiseCoefficient::constant(&[sigma, sigma])).unwrap();
            assert_eq!(next.v, s.v);
            for (a, b) in next.x.iter().zip([1.05, 0.975, 2.0, 2.1]) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_sigma_heun_is_deterministic_heun() {
        let sys = system(32, 12.0);
        let s = random_state(32, 12.0, 5);
        let dt = 0.01;
        let next = sys.step(&s, &[0.3, -0.2], dt, &NoiseCoefficient::zero(2)).unwrap();
        let a0 = sys.interaction_drift(&s);
        let mut pred = s.clone();
        for i in 0..s.x.len() {
            pred.x[i] = sys.domain.wrap(s.x[i] + s.v[i] * dt);
            pred.v[i] += a0[i] * dt;
        }
        let a1 = sys.interaction_drift(&pred);
        for i in 0..s.x.len() {
            let v = s.v[i] + 0.5 * (a0[i] + a1[i]) * dt;
            let x = sys.domain.wrap(s.x[i] + 0.5 * (s.v[i] + pred.v[i]) * dt);
            assert_eq!(next.v[i], v);
            assert_eq!(next.x[i], x);
        }
    }

    #[test]
    fn simulate_is_deterministic_and_schedule_independent() {
        let sys = system(64, 12.0);
        let s0 = random_state(64, 12.0, 8);
        let path = generate_path(3, 0.4, 0.01, 2).unwrap();
        let sigma = NoiseCoefficient::constant(&[0.2, 0.1]);
        let sched = RunSchedule { dt: 0.02, output_every: 4, threshold: 1e6 };
        let a = simulate(&sys, &s0, &path, &sigma, &sched).unwrap();
        let b = simulate(&sys, &s0, &path, &sigma, &sched).unwrap();
        assert_eq!(a.snapshots, b.snapshots);
        let fine = simulate(&sys, &s0, &path, &sigma, &RunSchedule { output_every: 2, ..sched }).unwrap();
        assert_eq!(fine.snapshots.len(), 11);
        for (i, snap) in a.snapshots.iter().enumerate() {
            assert_eq!(snap, &fine.snapshots[2 * i]);
        }
    }

    #[test]
    fn threshold_halts_run() {
        let sys = system(1, 12.0).without_interactions();
        let s0 = ParticleState::new(2, vec![1.0, 1.0], vec![1.0, 1.0], 0.0).unwrap();
        let path = generate_path(1, 1.0, 0.01, 2).unwrap();
        let sched = RunSchedule { dt: 0.01, output_every: 10, threshold: 0.5 };
        let traj = simulate(&sys, &s0, &path, &NoiseCoefficient::zero(2), &sched).unwrap();
        assert!(matches!(traj.halt, Some(Halt::Threshold { t }) if (t - 0.01).abs() < 1e-15));
    }

    #[test]
    fn constant_velocity_field_is_copied() {
        let g = Grid::new(2, 16, 4.0);
        let rho = vec![1.0 / 16.0; g.len()];
        let ups = vec![vec![0.3; g.len()], vec![-1.7; g.len()]];
        let s = sample_initial(&g, &rho, &ups, 500, 9, Sampling::Iid).unwrap();
        assert!(s.v.chunks_exact(2).all(|v| v == [0.3, -1.7]));
        assert!(s.x.iter().all(|&x| (0.0..4.0).contains(&x)));
        let bad = vec![1.0; g.len()];
        assert!(matches!(sample_initial(&g, &bad, &ups, 5, 9, Sampling::Iid), Err(Error::NotNormalized { .. })));
    }
}
