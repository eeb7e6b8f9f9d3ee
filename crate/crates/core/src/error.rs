use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0} violated")]
    InvalidParameter(String),
    #[error("same-sign rule violated: delta_mu*deltaB = {width} but a_bg = {a_bg}")]
    SignMismatch { width: f64, a_bg: f64 },
    #[error("a_bg = {a_bg} too close to b*sqrt(pi) = {b_sqrt_pi}, coupling derivation singular")]
    SingularBackground { a_bg: f64, b_sqrt_pi: f64 },
    #[error("scattering length undefined at the resonance position")]
    PoleAtResonance,
    #[error("energy {0} sits on the bare-molecule pole of the amplitude")]
    ChannelPole(f64),
    #[error("kernel denominator vanishes for K = {k_out}, k = {k_in}, E = {energy}")]
    ThresholdSingular { k_out: f64, k_in: f64, energy: f64 },
    #[error("trimer branch lost near control value {at} after step halving")]
    LostBranch { at: f64 },
    #[error("no shallow dimer at this field")]
    NoShallowDimer,
    #[error("shallow dimer present, deep-loss estimate not applicable")]
    ShallowDimerPresent,
    #[error("atom-dimer pole K = {k_pole} beyond grid cutoff {k_max}")]
    PoleOffGrid { k_pole: f64, k_max: f64 },
    #[error("residue extractions disagree: relative difference {0}")]
    FitDivergence(f64),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Input problems, as opposed to numerical failures.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_) | Error::SignMismatch { .. } | Error::SingularBackground { .. } | Error::Config(_)
        )
    }
}
