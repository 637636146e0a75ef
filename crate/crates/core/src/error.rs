use thiserror::Error;

/// Errors raised by metric evaluation, geodesic solving and the analysis pipeline.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("point {point:?} lies outside the disc of radius {radius}")]
    OutOfDomain { point: Vec<f64>, radius: f64 },

    #[error("metric is singular at {point:?} (|det g| = {det:e})")]
    SingularMetric { point: Vec<f64>, det: f64 },

    #[error("unknown catalog metric `{0}`")]
    UnknownMetric(String),

    #[error("invalid metric parameter: {0}")]
    InvalidParameter(String),

    #[error("perturbed metric degenerates at {point:?}: {reason}")]
    DegenerateResult { point: Vec<f64>, reason: String },

    #[error("trajectory left the disc at t = {t}")]
    LeftDomain { t: f64 },

    #[error("step size control failed at t = {t} (h = {h:e})")]
    StepFailure { t: f64, h: f64 },

    #[error("shooting did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("geodesic is light-like (|g(v,v)| = {energy:e})")]
    LightLike { energy: f64 },

    #[error("boundary-value solve for pair ({source_index}, {target_index}) failed: {cause}")]
    PairFailed {
        source_index: usize,
        target_index: usize,
        cause: Box<Error>,
    },

    #[error("no admissible point configuration after {attempts} attempts (last failure: {last})")]
    ConfigurationExhausted { attempts: usize, last: String },

    #[error("linear system is ill-conditioned (condition number {cond:e} > {cond_max:e})")]
    IllConditioned { cond: f64, cond_max: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable name of the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::OutOfDomain { .. } => "OutOfDomain",
            Error::SingularMetric { .. } => "SingularMetric",
            Error::UnknownMetric(_) => "UnknownMetric",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::DegenerateResult { .. } => "DegenerateResult",
            Error::LeftDomain { .. } => "LeftDomain",
            Error::StepFailure { .. } => "StepFailure",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::LightLike { .. } => "LightLike",
            Error::PairFailed { .. } => "PairFailed",
            Error::ConfigurationExhausted { .. } => "ConfigurationExhausted",
            Error::IllConditioned { .. } => "IllConditioned",
            Error::InvalidInput(_) => "InvalidInput",
            Error::Config(_) => "ConfigError",
            Error::Io(_) => "IoError",
        }
    }

    /// True for errors caused by the user's input rather than by numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::UnknownMetric(_)
                | Error::InvalidParameter(_)
                | Error::Config(_)
                | Error::InvalidInput(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
