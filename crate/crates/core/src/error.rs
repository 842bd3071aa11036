use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid smoothing configuration: {0}")]
    InvalidSmoothing(String),

    #[error("invalid integrator configuration: {0}")]
    InvalidIntegrator(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The closed-form return map is only valid on the two-zero shape window.
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("degenerate return map: a1 = a2 gives slope m = 1 and no unique fixed point")]
    DegenerateMap,

    #[error("event-driven solver exceeded {cap} events before reaching the horizon")]
    Runaway { cap: usize },

    #[error("zero-slope segment at t = {t}: delayed value vanishes on an interval")]
    ZeroSlope { t: f64 },

    #[error("no sign change of P(h) - h on [{lo}, {hi}] (g(lo) = {g_lo}, g(hi) = {g_hi})")]
    BracketFailure {
        lo: f64,
        hi: f64,
        g_lo: f64,
        g_hi: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by the caller's inputs rather than by the computation.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidParams(_)
                | Error::InvalidSmoothing(_)
                | Error::InvalidIntegrator(_)
                | Error::InvalidArgument(_)
        )
    }
}
