use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("separation d = {d:e} m outside the valid range (0, R = {radius:e} m)")]
    Separation { d: f64, radius: f64 },

    #[error("d = {d:e} m lies outside the tabulated CPD range [{lo:e}, {hi:e}] m")]
    CpdOutOfRange { d: f64, lo: f64, hi: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dissipation mode requires a configured dissipation coefficient gamma")]
    MissingGamma,

    #[error("fit_parabola: need at least 3 distinct voltages, got {distinct}")]
    Underdetermined { distinct: usize },

    #[error("fit_parabola: fitted curvature a = {a:e} is not positive (non-convex response)")]
    NonConvex { a: f64 },

    #[error("parabola fit failed at d_r = {d_r:e} m: {source}")]
    AtDistance {
        d_r: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("{what}: no convergence after {iterations} iterations")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
    },

    #[error("fitted contact point d0 = {d0:e} m does not exceed max(d_r) = {max_dr:e} m")]
    Unphysical { d0: f64, max_dr: f64 },

    #[error("duplicate basis exponent {0}")]
    DuplicateExponent(f64),

    #[error("singular or collinear design matrix: {0}")]
    Singular(String),

    #[error("gradient {gradient:e} N/m drives the measured resonance frequency to zero or below")]
    FrequencyCollapse { gradient: f64 },

    #[error("schema error at line {line}{}: {message}", column.as_ref().map(|c| format!(", column '{c}'")).unwrap_or_default())]
    Schema {
        line: usize,
        column: Option<String>,
        message: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn schema(line: usize, column: Option<&str>, message: impl Into<String>) -> Self {
        Error::Schema {
            line,
            column: column.map(str::to_owned),
            message: message.into(),
        }
    }
}
