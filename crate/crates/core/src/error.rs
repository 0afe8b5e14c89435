use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dimension {dim} does not factor as {electron} x {nuclear}")]
    NonFactorizable {
        dim: usize,
        electron: usize,
        nuclear: usize,
    },

    #[error("operator is not Hermitian (deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("no Hartmann-Hahn resonance: gamma_n*B = {gamma_n_b} MHz is below omega_eff = {omega_eff} MHz")]
    NoResonance { gamma_n_b: f64, omega_eff: f64 },

    #[error("nuclear spin at {radius_nm} nm is inside the contact region (minimum {min_nm} nm)")]
    RadiusTooSmall { radius_nm: f64, min_nm: f64 },

    #[error("sweep span does not cross the resonance (detuning runs from {start} to {end} MHz)")]
    SpanTooSmall { start: f64, end: f64 },

    #[error("{n} nuclear spins exceed the exact-propagation limit of {max}")]
    TooManySpins { n: usize, max: usize },

    #[error("energy denominator vanishes: gamma_e*B = |D(theta)| = {0} MHz")]
    Pole(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
