use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Error type shared by the whole crate. The CLI maps `Config`, `Validation`
/// and `Domain` to exit code 2 and the infeasibility variants to exit code 3.
#[derive(Debug, Error)]
pub enum Error {
    /// Problem with a configuration file or key.
    #[error("configuration error: {0}")]
    Config(String),

    /// A parameter value violates a model invariant.
    #[error("invalid parameter: {0}")]
    Validation(String),

    /// The feedback link has zero gain, so reporting a configuration to the
    /// surface would take forever.
    #[error("degenerate feedback channel: {0}")]
    DegenerateChannel(String),

    /// No element count satisfies the hardware, physical and frame caps.
    #[error("infeasible instance: {0}")]
    Infeasible(String),

    /// Argument outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Exhaustive search refused to run because the candidate range is too
    /// large; raise the cap explicitly if the cost is intended.
    #[error("exhaustive search refused: {n_upper} candidates exceed cap {cap}")]
    BruteForceCap { n_upper: usize, cap: usize },

    /// The caller supplied reference optima that this instance beats, so
    /// they cannot be the true per-instance maxima.
    #[error("contract violation: {0}")]
    ContractViolation(String),

    /// Too many realizations were infeasible for the averages to be trusted.
    #[error(
        "run aborted at {power_dbm} dBm: {skipped} of {total} realizations infeasible (limit 1%)"
    )]
    InfeasibleRun {
        skipped: usize,
        total: usize,
        power_dbm: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
