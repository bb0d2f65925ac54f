use thiserror::Error;

pub type Result<T> = std::result::Result<T, DpError>;

#[derive(Debug, Error)]
pub enum DpError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value produced by the integrator at t = {t:.3} s")]
    NonFinite { t: f64 },

    #[error("delay line holds samples only up to t = {newest:.6} s, read requested at t = {requested:.6} s")]
    DelayNotPopulated { requested: f64, newest: f64 },

    #[error("delay line sample pushed at t = {t:.6} s is not newer than t = {newest:.6} s")]
    DelayOutOfOrder { t: f64, newest: f64 },

    #[error("tracking error left the barrier region at t = {t:.3} s: z1 = {z1:?}, bound = {bound:?}")]
    BarrierViolation { t: f64, z1: [f64; 3], bound: [f64; 3] },

    #[error("allocation box is empty for {variable} of thruster {thruster} (lower {lo:.6} > upper {hi:.6})")]
    InfeasibleBox {
        thruster: usize,
        variable: &'static str,
        lo: f64,
        hi: f64,
    },

    #[error("forbidden zone of half-width {halfwidth:.6} rad covers the whole circle")]
    ZoneCoversCircle { halfwidth: f64 },

    #[error("primal-dual solver diverged (|Z| = {norm:.3e}) after {iterations} iterations")]
    SolverDivergence { norm: f64, iterations: usize },

    #[error("dimension mismatch: {0}")]
    Shape(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("failed to parse scenario: {0}")]
    Toml(#[from] toml::de::Error),
}
