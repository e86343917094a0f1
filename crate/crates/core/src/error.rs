use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("density {density:?} left the model domain box")]
    DomainEscape { density: Vec<f64> },

    #[error("rate function `{event}` returned {value} < 0")]
    NegativeRate { event: String, value: f64 },

    #[error("total event rate {total} exceeds cap {cap}")]
    RateOverflow { total: f64, cap: f64 },

    #[error("F_{index} = {lhs} but gamma*x*R = {rhs} (quasi-neutral factorisation broken)")]
    QuasiNeutralMismatch { index: usize, lhs: f64, rhs: f64 },

    #[error("integrator step size underflow at t = {t} (h = {h})")]
    IntegratorBlowup { t: f64, h: f64 },

    #[error("|R| failed to decay along the flow (t = {t}, R = {r})")]
    NotConverging { t: f64, r: f64 },

    #[error("back-flow check failed: |phi_tau(pi) - x| = {residual}")]
    PitauViolation { residual: f64 },

    #[error("radial projection of a zero-total vector")]
    ZeroTotal,

    #[error("R(t p) does not change sign for t in [0, {extent}]")]
    NoBracket { extent: f64 },

    #[error("transversal eigenvalue lambda = {value} is degenerate")]
    LambdaZero { value: f64 },

    #[error("per-capita growth rates have no common root: S1* = {s1}, S2* = {s2}")]
    NoCommonRoot { s1: f64, s2: f64 },

    #[error("operation requires a quasi-neutral model")]
    MissingQuasiNeutral,

    #[error("chart invariant `{name}` violated (residual {residual:e})")]
    ChartInvariant { name: &'static str, residual: f64 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
