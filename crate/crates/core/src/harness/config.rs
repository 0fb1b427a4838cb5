//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::besov::NormFamily;
use crate::error::{Error, Result};
use crate::geometry::Grid;
use crate::noise::NoiseCoefficient;
use crate::params::ScalingParams;
use crate::particles::{NoiseScheme, Sampling};
use crate::snapshot::read_field;

/// Every accepted key with its default value.
pub const KEYS: &[(&str, &str)] = &[
    ("params.d", "2"),
    ("params.beta", "0.5"),
    ("params.gamma", "0.05"),
    ("params.delta", "0.2"),
    ("params.T", "1"),
    ("params.m", "1000"),
    ("params.debug_dimension", "false"),
    ("params.force_delta", "false"),
    ("study.schedule", "256,512,1024,2048"),
    ("study.replications", "8"),
    ("run.N", "256"),
    ("run.rep", "0"),
    ("grid.M", "480"),
    ("grid.L", "12"),
    ("time.dt", "0.02"),
    ("time.spde_substeps", "4"),
    ("time.outputs", "50"),
    ("noise.kind", "constant"),
    ("noise.sigma", "0.1"),
    ("noise.center", ""),
    ("noise.width", "1"),
    ("init.preset", "bump"),
    ("init.file", ""),
    ("init.bump_width", "1.5"),
    ("init.bump_background", "0.5"),
    ("init.shear", "0.2"),
    ("init.wave_amplitude", "0.3"),
    ("init.sampling", "iid"),
    ("seed", "20261016"),
    ("scheme.noise", "heun"),
    ("scheme.deterministic", "true"),
    ("norms.alpha", "2.5"),
    ("norms.r", "2"),
    ("norms.r_tilde", "2"),
    ("norms.lambda", "1.3"),
    ("norms.family", "besov"),
    ("output.dir", "mnslab-out"),
];

#[derive(Debug, Clone, PartialEq)]
pub enum InitPreset {
    /// `ρ0 = 1/L^d`, `υ0 = 0`.
    Uniform,
    /// Gaussian bump over a uniform background, renormalized, with a sinusoidal shear.
    Bump { width: f64, background: f64, shear: f64 },
    /// Single-mode density perturbation `(1 + a cos(2π x_1/L))/L^d`, `υ0 = 0`.
    Wave { amplitude: f64 },
    /// Gridded fields from a field snapshot.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub params: ScalingParams,
    pub force_delta: bool,
    pub schedule: Vec<usize>,
    pub replications: usize,
    pub run_n: usize,
    pub run_rep: usize,
    pub grid_m: usize,
    pub box_length: f64,
    pub dt: f64,
    pub spde_substeps: usize,
    pub outputs: usize,
    pub sigma: NoiseCoefficient,
    pub init: InitPreset,
    pub sampling: Sampling,
    pub seed: u64,
    pub scheme: NoiseScheme,
    pub deterministic: bool,
    pub alpha: f64,
    pub r: f64,
    pub r_tilde: f64,
    pub lambda: f64,
    pub norm_family: NormFamily,
    pub output_dir: PathBuf,
    /// Canonical `key=value` text of every key, used for hashing.
    canonical: String,
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    let parsed = match v.trim() {
        "inf" | "infinity" => Ok(f64::INFINITY),
        s => s.parse::<f64>(),
    };
    parsed.map_err(|_| Error::Config(format!("{key}: '{v}' is not a number")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.trim().parse().map_err(|_| Error::Config(format!("{key}: '{v}' is not a non-negative integer")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("{key}: '{v}' is not a boolean"))),
    }
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| parse_f64(key, s)).collect()
}

/// Broadcasts a one-element list to `d` entries.
fn per_axis(key: &str, values: Vec<f64>, d: usize) -> Result<Vec<f64>> {
    match values.len() {
        1 => Ok(vec![values[0]; d]),
        n if n == d => Ok(values),
        n => Err(Error::Config(format!("{key}: expected 1 or {d} values, got {n}"))),
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::from_str("").expect("defaults are valid")
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str(&text)
    }

    /// Parses `key = value` lines; `#` starts a comment. Unknown or repeated keys are errors.
    #[allow(clippy::should_implement_trait)]
    pub fn from_str(text: &str) -> Result<Self> {
        let mut values: BTreeMap<&str, String> = KEYS.iter().map(|&(k, v)| (k, v.to_string())).collect();
        let mut seen = std::collections::HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let k = k.trim();
            let Some(slot) = KEYS.iter().find(|(name, _)| *name == k).map(|(name, _)| *name) else {
                return Err(Error::Config(format!("line {}: unknown key '{k}'", lineno + 1)));
            };
            if !seen.insert(slot) {
                return Err(Error::Config(format!("line {}: duplicate key '{k}'", lineno + 1)));
            }
            values.insert(slot, v.trim().to_string());
        }
        Self::from_map(&values)
    }

    fn from_map(m: &BTreeMap<&str, String>) -> Result<Self> {
        let get = |k: &str| m[k].as_str();
        let d = parse_usize("params.d", get("params.d"))?;
        let params = ScalingParams {
            d,
            n: 1,
            beta: parse_f64("params.beta", get("params.beta"))?,
            gamma: parse_f64("params.gamma", get("params.gamma"))?,
            delta: parse_f64("params.delta", get("params.delta"))?,
            horizon: parse_f64("params.T", get("params.T"))?,
            threshold: parse_f64("params.m", get("params.m"))?,
            debug_dimension: parse_bool("params.debug_dimension", get("params.debug_dimension"))?,
        };
        let schedule: Vec<usize> = get("study.schedule")
            .split(',')
            .map(|s| parse_usize("study.schedule", s))
            .collect::<Result<_>>()?;
        if schedule.windows(2).any(|w| w[0] >= w[1]) || schedule.is_empty() {
            return Err(Error::Config("study.schedule must be strictly increasing".into()));
        }
        let box_length = parse_f64("grid.L", get("grid.L"))?;
        let sigma = match get("noise.kind") {
            "none" => NoiseCoefficient::zero(d),
            "constant" => NoiseCoefficient::Constant(per_axis(
                "noise.sigma",
                parse_list("noise.sigma", get("noise.sigma"))?,
                d,
            )?),
            "bump" => {
                let center = parse_list("noise.center", get("noise.center"))?;
                let center = if center.is_empty() { vec![0.5 * box_length; d] } else { per_axis("noise.center", center, d)? };
                NoiseCoefficient::SmoothBump {
                    center,
                    width: parse_f64("noise.width", get("noise.width"))?,
                    amplitude: per_axis("noise.sigma", parse_list("noise.sigma", get("noise.sigma"))?, d)?,
                }
            }
            other => return Err(Error::Config(format!("noise.kind: unknown '{other}'"))),
        };
        let init = match get("init.preset") {
            "uniform" => InitPreset::Uniform,
            "bump" => InitPreset::Bump {
                width: parse_f64("init.bump_width", get("init.bump_width"))?,
                background: parse_f64("init.bump_background", get("init.bump_background"))?,
                shear: parse_f64("init.shear", get("init.shear"))?,
            },
            "wave" => InitPreset::Wave { amplitude: parse_f64("init.wave_amplitude", get("init.wave_amplitude"))? },
            "file" => {
                let p = get("init.file");
                if p.is_empty() {
                    return Err(Error::Config("init.preset = file requires init.file".into()));
                }
                InitPreset::File(PathBuf::from(p))
            }
            other => return Err(Error::Config(format!("init.preset: unknown preset '{other}'"))),
        };
        let sampling = match get("init.sampling") {
            "iid" => Sampling::Iid,
            "stratified" => Sampling::Stratified,
            other => return Err(Error::Config(format!("init.sampling: unknown '{other}'"))),
        };
        let scheme = match get("scheme.noise") {
            "heun" => NoiseScheme::Heun,
            "ito_euler" => NoiseScheme::ItoEuler,
            other => return Err(Error::Config(format!("scheme.noise: unknown '{other}'"))),
        };
        let norm_family = match get("norms.family") {
            "besov" => NormFamily::Besov,
            "triebel_lizorkin" => NormFamily::TriebelLizorkin,
            other => return Err(Error::Config(format!("norms.family: unknown '{other}'"))),
        };
        let alpha = parse_f64("norms.alpha", get("norms.alpha"))?;
        if !(alpha > d as f64 / 2.0 + 1.0) {
            return Err(Error::Config(format!("norms.alpha = {alpha} must exceed d/2 + 1")));
        }
        let r = parse_f64("norms.r", get("norms.r"))?;
        let r_tilde = parse_f64("norms.r_tilde", get("norms.r_tilde"))?;
        if !(r > 1.0 && r_tilde > 1.0) || ((1.0 / r + 1.0 / r_tilde) - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("norms.r = {r} and norms.r_tilde = {r_tilde} must be conjugate")));
        }
        let spde_substeps = parse_usize("time.spde_substeps", get("time.spde_substeps"))?;
        let outputs = parse_usize("time.outputs", get("time.outputs"))?;
        if spde_substeps == 0 || outputs == 0 {
            return Err(Error::Config("time.spde_substeps and time.outputs must be positive".into()));
        }
        let canonical = m.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
        Ok(Self {
            params,
            force_delta: parse_bool("params.force_delta", get("params.force_delta"))?,
            schedule,
            replications: parse_usize("study.replications", get("study.replications"))?,
            run_n: parse_usize("run.N", get("run.N"))?,
            run_rep: parse_usize("run.rep", get("run.rep"))?,
            grid_m: parse_usize("grid.M", get("grid.M"))?,
            box_length,
            dt: parse_f64("time.dt", get("time.dt"))?,
            spde_substeps,
            outputs,
            sigma,
            init,
            sampling,
            seed: get("seed").trim().parse().map_err(|_| Error::Config("seed: not a u64".into()))?,
            scheme,
            deterministic: parse_bool("scheme.deterministic", get("scheme.deterministic"))?,
            alpha,
            r,
            r_tilde,
            lambda: parse_f64("norms.lambda", get("norms.lambda"))?,
            norm_family,
            output_dir: PathBuf::from(get("output.dir")),
            canonical,
        })
    }

    /// Returns a copy with one key overridden (same validation as the file parser).
    pub fn with(&self, key: &str, value: &str) -> Result<Self> {
        let mut map: BTreeMap<&str, String> = BTreeMap::new();
        for line in self.canonical.lines() {
            let (k, v) = line.split_once('=').expect("canonical form");
            let slot = KEYS.iter().find(|(name, _)| *name == k).map(|(n, _)| *n).expect("known key");
            map.insert(slot, v.to_string());
        }
        let Some(slot) = KEYS.iter().find(|(name, _)| *name == key).map(|(n, _)| *n) else {
            return Err(Error::Config(format!("unknown key '{key}'")));
        };
        map.insert(slot, value.to_string());
        Self::from_map(&map)
    }

    pub fn canonical_text(&self) -> &str {
        &self.canonical
    }

    /// SHA-256 of the canonical configuration text, hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn grid(&self) -> Grid {
        Grid::new(self.params.d, self.grid_m, self.box_length)
    }

    /// Initial `(ρ0, υ0)` on the configured grid, `ρ0` normalized to unit mass.
    pub fn initial_fields(&self) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let grid = self.grid();
        let d = grid.d;
        let l = grid.length;
        let (mut rho, vel) = match &self.init {
            InitPreset::Uniform => (vec![1.0; grid.len()], vec![vec![0.0; grid.len()]; d]),
            InitPreset::Bump { width, background, shear } => {
                let dom = grid.domain();
                let rho = grid.sample(|x| {
                    let r2: f64 = x.iter().map(|&xi| dom.min_image(xi - 0.5 * l).powi(2)).sum();
                    background + (-0.5 * r2 / (width * width)).exp()
                });
                let mut vel = vec![vec![0.0; grid.len()]; d];
                if d >= 2 {
                    vel[0] = grid.sample(|x| shear * (2.0 * PI * x[1] / l).sin());
                    vel[1] = grid.sample(|x| 0.5 * shear * (2.0 * PI * x[0] / l).cos());
                } else {
                    vel[0] = grid.sample(|x| shear * (2.0 * PI * x[0] / l).sin());
                }
                (rho, vel)
            }
            InitPreset::Wave { amplitude } => {
                (grid.sample(|x| 1.0 + amplitude * (2.0 * PI * x[0] / l).cos()), vec![vec![0.0; grid.len()]; d])
            }
            InitPreset::File(path) => {
                let f = read_field(&mut std::io::BufReader::new(std::fs::File::open(path)?))?;
                if f.grid.d != grid.d || f.grid.m != grid.m || (f.grid.length - grid.length).abs() > 1e-12 {
                    return Err(Error::Config(format!(
                        "init.file grid {}^{} on L = {} does not match the configured grid",
                        f.grid.m, f.grid.d, f.grid.length
                    )));
                }
                (f.rho, f.vel)
            }
        };
        let mass = grid.integrate(&rho);
        if !(mass > 0.0) {
            return Err(Error::Config("initial density has no mass".into()));
        }
        rho.iter_mut().for_each(|r| *r /= mass);
        Ok((rho, vel))
    }
}
