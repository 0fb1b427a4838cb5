//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Three operations are exposed: a live particle system with its mollified density,
//! the kernel profiles at a chosen `N`, and the dyadic block energies of a test field.

use wasm_bindgen::prelude::*;

use mnslab::besov::build_partition;
use mnslab::empirical::deposit;
use mnslab::geometry::Grid;
use mnslab::harness::ExperimentConfig;
use mnslab::kernels::KernelFamily;
use mnslab::noise::{generate_path, stream_seed, NoiseCoefficient};
use mnslab::params::ScalingParams;
use mnslab::particles::{sample_initial, ParticleState, ParticleSystem, Sampling};

const BOX: f64 = 12.0;

fn params(n: usize) -> ScalingParams {
    ScalingParams { n, ..Default::default() }
}

/// Particles started from the bump preset, driven by one common Brownian path.
#[wasm_bindgen]
pub struct ParticleDemo {
    system: ParticleSystem,
    potential: KernelFamily,
    state: ParticleState,
    sigma: NoiseCoefficient,
    grid: Grid,
    seed: u64,
    batches: u64,
}

#[wasm_bindgen]
impl ParticleDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(n: usize, sigma: f64, seed: u32) -> Result<ParticleDemo, String> {
        let p = params(n.max(2));
        let potential = KernelFamily::potential(&p);
        // four grid cells per root-kernel standard deviation, as the deposit requires
        let m = ((4.0 * BOX / potential.root_std_dev()).ceil() as usize).next_multiple_of(8);
        let cfg = ExperimentConfig::default()
            .with("grid.M", &m.to_string())
            .and_then(|c| c.with("init.preset", "bump"))
            .map_err(|e| e.to_string())?;
        let grid = cfg.grid();
        let (rho, vel) = cfg.initial_fields().map_err(|e| e.to_string())?;
        let state = sample_initial(&grid, &rho, &vel, p.n, seed as u64, Sampling::Iid).map_err(|e| e.to_string())?;
        let system = ParticleSystem::new(grid.domain(), potential, KernelFamily::friction(&p))
            .map_err(|e| e.to_string())?;
        Ok(Self {
            system,
            potential,
            state,
            sigma: NoiseCoefficient::constant(&[sigma, sigma]),
            grid,
            seed: seed as u64,
            batches: 0,
        })
    }

    /// Advances `count` steps of size `dt`.
    pub fn step(&mut self, count: usize, dt: f64) -> Result<(), String> {
        if count == 0 {
            return Ok(());
        }
        let path = generate_path(stream_seed(self.seed, &[self.batches]), count as f64 * dt, dt, 2)
            .map_err(|e| e.to_string())?;
        self.batches += 1;
        for k in 0..path.steps() {
            self.state = self.system.step(&self.state, path.increment(k), dt, &self.sigma).map_err(|e| e.to_string())?;
        }
        Ok(())
    }

    pub fn time(&self) -> f64 {
        self.state.t
    }

    pub fn grid_size(&self) -> usize {
        self.grid.m
    }

    pub fn max_speed(&self) -> f64 {
        self.state.max_speed()
    }

    /// Interleaved positions `x0, y0, x1, y1, …` in box units.
    pub fn positions(&self) -> Vec<f64> {
        self.state.x.clone()
    }

    /// Mollified density as a `grid_size × grid_size` RGBA image, rows top to bottom.
    pub fn density_rgba(&self) -> Result<Vec<u8>, String> {
        let dep = deposit(&self.state, &self.potential, &self.grid).map_err(|e| e.to_string())?;
        let max = dep.density.iter().fold(0.0f64, |a, &b| a.max(b)).max(f64::MIN_POSITIVE);
        let m = self.grid.m;
        let mut img = vec![0u8; 4 * m * m];
        for row in 0..m {
            for col in 0..m {
                // x along columns, y upwards
                let v = dep.density[col * m + (m - 1 - row)] / max;
                let px = &mut img[4 * (row * m + col)..4 * (row * m + col) + 4];
                px.copy_from_slice(&[(255.0 * v.sqrt()) as u8, (255.0 * v) as u8, (255.0 * v * v) as u8, 255]);
            }
        }
        Ok(img)
    }
}

/// Radial profiles of `φ_N^r`, `φ_N` and `ψ_N` on `[0, r_max]`, concatenated.
#[wasm_bindgen]
pub fn kernel_profiles(n: usize, beta: f64, gamma: f64, r_max: f64, samples: usize) -> Vec<f64> {
    let p = ScalingParams { n: n.max(1), beta, gamma, ..Default::default() };
    let (phi, psi) = (KernelFamily::potential(&p), KernelFamily::friction(&p));
    let radii = (0..samples).map(|i| r_max * i as f64 / (samples.max(2) - 1) as f64);
    let mut out = Vec::with_capacity(3 * samples);
    out.extend(radii.clone().map(|r| phi.eval_root(&[r, 0.0])));
    out.extend(radii.clone().map(|r| phi.eval(&[r, 0.0])));
    out.extend(radii.map(|r| psi.eval(&[r, 0.0])));
    out
}

/// `L²` energies of the dyadic blocks `j = -1, 0, …` of `cos(k·x)` on a `2π` box.
#[wasm_bindgen]
pub fn dyadic_block_energies(m: usize, lambda: f64, kx: f64, ky: f64) -> Result<Vec<f64>, String> {
    let grid = Grid::new(2, m, 2.0 * std::f64::consts::PI);
    let part = build_partition(lambda, &grid).map_err(|e| e.to_string())?;
    let f = grid.sample(|x| (kx.round() * x[0] + ky.round() * x[1]).cos());
    Ok(part.block_energies(&f))
}
