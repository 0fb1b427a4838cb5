//! Scaling exponents of the moderately interacting system and their admissibility window.

use crate::error::{Constraint, Error, Result};

/// Endpoint tolerance for the open admissibility intervals.
pub const WINDOW_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingParams {
    /// Spatial dimension.
    pub d: usize,
    /// Particle count.
    pub n: usize,
    /// Potential scaling exponent.
    pub beta: f64,
    /// Friction scaling exponent.
    pub gamma: f64,
    /// Convergence-rate exponent.
    pub delta: f64,
    /// Time horizon.
    pub horizon: f64,
    /// Blow-up threshold of the stopping rule.
    pub threshold: f64,
    /// Allows d = 1 for solver debugging.
    pub debug_dimension: bool,
}

impl Default for ScalingParams {
    fn default() -> Self {
        Self {
            d: 2,
            n: 256,
            beta: 0.5,
            gamma: 0.05,
            delta: 0.2,
            horizon: 1.0,
            threshold: 1e3,
            debug_dimension: false,
        }
    }
}

impl ScalingParams {
    pub fn with_n(&self, n: usize) -> Self {
        Self { n, ..self.clone() }
    }

    /// Upper bound 2β/(3d+8) on the friction exponent.
    pub fn gamma_bound(&self) -> f64 {
        2.0 * self.beta / (3.0 * self.d as f64 + 8.0)
    }

    /// Open interval (γ(d+4)/d, min(β/d, 2(β − γ(d+2))/d)) for δ.
    pub fn delta_window(&self) -> (f64, f64) {
        let d = self.d as f64;
        let lo = self.gamma * (d + 4.0) / d;
        let hi = (self.beta / d).min(2.0 * (self.beta - self.gamma * (d + 2.0)) / d);
        (lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Admissibility {
    pub window: (f64, f64),
    pub delta_in_window: bool,
    /// First violated constraint, if any.
    pub violation: Option<Constraint>,
    pub warnings: Vec<String>,
}

impl Admissibility {
    pub fn is_valid(&self) -> bool {
        self.violation.is_none()
    }
}

/// Evaluates every admissibility constraint without failing.
pub fn admissibility(p: &ScalingParams) -> Admissibility {
    let window = p.delta_window();
    let delta_in_window = p.delta > window.0 + WINDOW_TOL && p.delta < window.1 - WINDOW_TOL;
    let mut warnings = Vec::new();

    let dim_ok = p.d >= 2 || (p.d == 1 && p.debug_dimension);
    if p.d == 1 && p.debug_dimension {
        warnings.push("d = 1 is outside the theory (d >= 2); debug-dimension run".to_string());
    }

    let violation = if !dim_ok || p.d > 3 {
        Some(Constraint::Dimension)
    } else if p.n < 1 {
        Some(Constraint::ParticleCount)
    } else if !(p.horizon > 0.0) {
        Some(Constraint::Horizon)
    } else if !(p.threshold > 0.0) {
        Some(Constraint::Threshold)
    } else if !(p.beta > 0.0 && p.beta < 1.0) {
        Some(Constraint::BetaRange)
    } else if !(p.gamma > 0.0 && p.gamma < p.gamma_bound() - WINDOW_TOL) {
        Some(Constraint::GammaBound)
    } else if !(window.1 - window.0 > 2.0 * WINDOW_TOL) {
        Some(Constraint::EmptyWindow)
    } else if !delta_in_window {
        Some(Constraint::DeltaWindow)
    } else {
        None
    };

    Admissibility { window, delta_in_window, violation, warnings }
}

/// Accepts `p` only if every constraint holds; returns the computed δ-window.
pub fn validate_params(p: &ScalingParams) -> Result<Admissibility> {
    let report = admissibility(p);
    match report.violation {
        Some(c) => Err(Error::Inadmissible(c)),
        None => Ok(report),
    }
}
