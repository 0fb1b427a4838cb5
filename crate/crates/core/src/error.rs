use thiserror::Error;

/// Scaling constraint that failed admissibility.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    BetaRange,
    GammaBound,
    DeltaWindow,
    EmptyWindow,
    Dimension,
    Horizon,
    Threshold,
    ParticleCount,
}

impl Constraint {
    pub fn code(self) -> &'static str {
        match self {
            Constraint::BetaRange => "BETA_RANGE",
            Constraint::GammaBound => "GAMMA_BOUND",
            Constraint::DeltaWindow => "DELTA_WINDOW",
            Constraint::EmptyWindow => "EMPTY_WINDOW",
            Constraint::Dimension => "DIMENSION",
            Constraint::Horizon => "HORIZON",
            Constraint::Threshold => "THRESHOLD",
            Constraint::ParticleCount => "PARTICLE_COUNT",
        }
    }
}

impl std::fmt::Display for Constraint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.code())
    }
}

/// Which quantity went non-finite or crossed the stopping threshold.
#[derive(Debug, Clone, PartialEq)]
pub enum BlowupSite {
    Particle { index: usize, field: &'static str },
    Grid { cell: usize, field: &'static str },
}

impl std::fmt::Display for BlowupSite {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BlowupSite::Particle { index, field } => write!(f, "particle {index}, {field}"),
            BlowupSite::Grid { cell, field } => write!(f, "grid cell {cell}, {field}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("inadmissible parameters: {0}")]
    Inadmissible(Constraint),
    #[error("non-finite state at t = {t}: {site}")]
    Blowup { t: f64, site: BlowupSite },
    #[error("density {min} fell below floor {floor}")]
    DensityFloor { min: f64, floor: f64 },
    #[error("grid too coarse: {cells_per_sd:.2} cells per kernel standard deviation (need >= {required})")]
    GridTooCoarse { cells_per_sd: f64, required: f64 },
    #[error("dyadic partition invalid: {0}")]
    PartitionInvalid(String),
    #[error("block index {j} outside [-1, {j_max}]")]
    BlockIndex { j: i32, j_max: i32 },
    #[error("moment order {order} exceeds maximum {max}")]
    MomentOrder { order: usize, max: usize },
    #[error("initial density not normalized: mass {mass}")]
    NotNormalized { mass: f64 },
    #[error("kernel cutoff {cutoff} exceeds half the box length {half_box}")]
    CutoffTooLarge { cutoff: f64, half_box: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("config: {0}")]
    Config(String),
    #[error("snapshot format: {0}")]
    Format(String),
    #[error("insufficient replications: {0}")]
    InsufficientReplications(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
