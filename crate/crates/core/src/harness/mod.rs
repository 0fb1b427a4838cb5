//! Coupled particle/SPDE runs, Monte-Carlo sweeps over `N`, and their CSV reports.

mod config;
mod report;

pub use config::{ExperimentConfig, InitPreset, KEYS};
pub use report::{
    aggregate, read_aggregate_csv, read_rows_csv, write_aggregate_csv, write_rows_csv, Aggregate, Manifest,
    StudyFlags, AGGREGATE_HEADER, ROW_HEADER,
};

use rayon::prelude::*;

use crate::besov::{build_partition, distribution_distance, DyadicPartition};
use crate::empirical::{check_resolution, deposit, energy};
use crate::error::{Error, Result};
use crate::kernels::KernelFamily;
use crate::noise::{generate_path, stream_seed};
use crate::error::Constraint;
use crate::params::{admissibility, Admissibility};
use crate::particles::{sample_initial, ParticleState, ParticleSystem};
use crate::spde::{FieldState, SpdeSolver, StopDecision};

const PATH_STREAM: u64 = 0x0050_4154_4852_4550;

/// One output row: the coupled state at an output time, frozen after `τ_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub n: usize,
    pub rep: usize,
    pub t: f64,
    pub q_total: f64,
    pub q_kinetic: f64,
    pub q_density: f64,
    pub besov_s: f64,
    pub besov_v: f64,
    pub stopped: bool,
    /// Stopping time, `inf` if the run never stopped.
    pub tau_m: f64,
}

#[derive(Debug, Clone)]
pub struct CoupledRun {
    pub rows: Vec<RunRow>,
    /// Set when the run ended on a blowup or density-floor error. Rows after the last
    /// valid time are frozen and flagged as stopped.
    pub failure: Option<String>,
}

impl CoupledRun {
    pub fn sup_q(&self) -> f64 {
        self.rows.iter().fold(0.0, |m, r| m.max(r.q_total))
    }
}

/// Checks the configuration's parameters at particle count `n`.
///
/// With `force_delta` a `DELTA_WINDOW` violation is downgraded to a warning, which is
/// how negative-control studies are expressed.
pub fn check_params(cfg: &ExperimentConfig, n: usize) -> Result<Admissibility> {
    let mut adm = admissibility(&cfg.params.with_n(n));
    match adm.violation {
        None => Ok(adm),
        Some(Constraint::DeltaWindow) if cfg.force_delta => {
            adm.warnings.push(format!("delta = {} forced outside the admissible window", cfg.params.delta));
            Ok(adm)
        }
        Some(c) => Err(Error::Inadmissible(c)),
    }
}

/// Caps the global worker pool at `MNS_THREADS` if that variable is set. Call once,
/// before any parallel work.
pub fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("MNS_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("MNS_THREADS: '{v}' is not a positive integer")))?;
    if n == 0 {
        return Err(Error::Config("MNS_THREADS must be positive".into()));
    }
    // A second call finds the pool already built; that is fine.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Builds the dyadic partition used by every run of `cfg`.
pub fn partition_for(cfg: &ExperimentConfig) -> Result<DyadicPartition> {
    build_partition(cfg.lambda, &cfg.grid())
}

pub fn run_coupled(cfg: &ExperimentConfig, n: usize, rep: usize) -> Result<CoupledRun> {
    run_coupled_with(cfg, n, rep, &partition_for(cfg)?)
}

/// Runs the particle system and the SPDE on one shared Brownian path.
///
/// The path depends on `(seed, rep)` only, so every `N` of a replication sees the
/// same noise; initial particles come from the stream `(seed, N, rep)`.
pub fn run_coupled_with(cfg: &ExperimentConfig, n: usize, rep: usize, part: &DyadicPartition) -> Result<CoupledRun> {
    check_params(cfg, n)?;
    let p = cfg.params.with_n(n);
    let grid = cfg.grid();
    if part.grid() != &grid {
        return Err(Error::Shape("partition grid differs from the configured grid".into()));
    }
    let potential = KernelFamily::potential(&p);
    let friction = KernelFamily::friction(&p);
    check_resolution(&grid, &potential)?;
    let system = ParticleSystem::new(grid.domain(), potential, friction)?.with_scheme(cfg.scheme);

    let dt_spde = cfg.dt / cfg.spde_substeps as f64;
    let path = generate_path(stream_seed(cfg.seed, &[PATH_STREAM, rep as u64]), p.horizon, dt_spde, p.d)?;
    let coarse = path.restrict(cfg.dt)?;
    let steps = coarse.steps();
    if steps % cfg.outputs != 0 {
        return Err(Error::Config(format!("time.outputs = {} must divide the {steps} steps", cfg.outputs)));
    }
    let every = steps / cfg.outputs;

    let (rho0, vel0) = cfg.initial_fields()?;
    let mut s = sample_initial(&grid, &rho0, &vel0, n, stream_seed(cfg.seed, &[n as u64, rep as u64]), cfg.sampling)?;
    let mut f = FieldState::new(grid, rho0, vel0, 0.0)?;
    let solver = SpdeSolver::for_initial(&f, &cfg.sigma)?.with_scheme(cfg.scheme);
    let bound = solver.stable_dt(&f);
    if dt_spde > bound {
        return Err(Error::Config(format!(
            "SPDE step {dt_spde} exceeds the stability bound {bound:.3e}; raise time.spde_substeps"
        )));
    }

    let eval = |s: &ParticleState, f: &FieldState, t: f64| -> Result<RunRow> {
        let dep = deposit(s, &potential, &grid)?;
        let e = energy(s, f, &dep)?;
        let dist = distribution_distance(s, f, cfg.alpha, cfg.r_tilde, cfg.norm_family, part)?;
        Ok(RunRow {
            n,
            rep,
            t,
            q_total: e.total,
            q_kinetic: e.kinetic,
            q_density: e.density_l2,
            besov_s: dist.density,
            besov_v: dist.momentum,
            stopped: false,
            tau_m: f64::INFINITY,
        })
    };

    let mut rows = vec![eval(&s, &f, 0.0)?];
    let mut frozen: Option<RunRow> = None;
    let mut failure = None;
    for step in 0..steps {
        let t_next = coarse.time(step + 1);
        if frozen.is_none() {
            let advanced = (|| -> Result<(ParticleState, FieldState)> {
                let mut g = f.clone();
                for sub in 0..cfg.spde_substeps {
                    g = solver.spde_step(&g, path.increment(step * cfg.spde_substeps + sub), dt_spde)?;
                }
                let s_next = system.step(&s, coarse.increment(step), cfg.dt, &cfg.sigma)?;
                Ok((s_next, g))
            })();
            match advanced {
                Ok((s_next, g)) => {
                    s = s_next;
                    f = g;
                    s.t = t_next;
                    f.t = t_next;
                    let stop = s.max_speed() >= p.threshold
                        || matches!(solver.check_stopping(&f, p.threshold), StopDecision::Stopped(_));
                    if stop {
                        let mut row = eval(&s, &f, t_next)?;
                        row.stopped = true;
                        row.tau_m = t_next;
                        frozen = Some(row);
                    }
                }
                Err(e @ (Error::Blowup { .. } | Error::DensityFloor { .. })) => {
                    let t_last = coarse.time(step);
                    let mut row = eval(&s, &f, t_last)?;
                    row.stopped = true;
                    row.tau_m = t_last;
                    frozen = Some(row);
                    failure = Some(format!("N = {n}, rep = {rep}: {e}"));
                }
                Err(e) => return Err(e),
            }
        }
        if (step + 1) % every == 0 {
            let row = match &frozen {
                Some(r) => RunRow { t: t_next, ..r.clone() },
                None => eval(&s, &f, t_next)?,
            };
            rows.push(row);
        }
    }
    Ok(CoupledRun { rows, failure })
}

/// Raw rows, per-`N` aggregates and trend flags of a convergence study.
#[derive(Debug, Clone)]
pub struct StudyReport {
    pub rows: Vec<RunRow>,
    pub aggregates: Vec<Aggregate>,
    pub flags: StudyFlags,
    pub failures: Vec<String>,
    pub manifest: Manifest,
}

/// Sweeps the schedule with `cfg.replications` runs per `N`.
pub fn convergence_study(cfg: &ExperimentConfig) -> Result<StudyReport> {
    if cfg.schedule.len() < 2 {
        return Err(Error::InvalidArgument("the N schedule needs at least two entries".into()));
    }
    if cfg.replications < 4 {
        return Err(Error::InsufficientReplications(format!("{} replications per N, at least 4 required", cfg.replications)));
    }
    for &n in &cfg.schedule {
        check_params(cfg, n)?;
    }
    let part = partition_for(cfg)?;
    let jobs: Vec<(usize, usize)> =
        cfg.schedule.iter().flat_map(|&n| (0..cfg.replications).map(move |r| (n, r))).collect();
    let runs: Vec<CoupledRun> =
        jobs.par_iter().map(|&(n, rep)| run_coupled_with(cfg, n, rep, &part)).collect::<Result<_>>()?;
    let failures = runs.iter().filter_map(|r| r.failure.clone()).collect();
    let mut rows: Vec<RunRow> = runs.into_iter().flat_map(|r| r.rows).collect();
    rows.sort_by(|a, b| (a.n, a.rep).cmp(&(b.n, b.rep)).then(a.t.total_cmp(&b.t)));
    let aggregates = aggregate(&rows, cfg.params.delta)?;
    let flags = StudyFlags::from_aggregates(&aggregates);
    Ok(StudyReport { rows, aggregates, flags, failures, manifest: Manifest::for_config(cfg) })
}
