use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    Graph(String),

    #[error("graph file {field}: {message}")]
    GraphFile { field: String, message: String },

    #[error("unknown switch catalog entry `{0}`")]
    UnknownSwitch(String),

    #[error("switch failed certification: {0}")]
    SwitchVerification(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular scattering system at k = {k}: {detail}")]
    SingularScattering { k: f64, detail: String },

    #[error("singular closed form: |denominator| = {magnitude:e}")]
    SingularPhase { magnitude: f64 },

    #[error("antisymmetrised two-particle state vanishes (Pauli exclusion)")]
    PauliExclusion,

    #[error("wave packets overlap or are too close: {0}")]
    PacketPlacement(String),

    #[error("probability {leakage:e} reached the ends of the rails")]
    BoundaryLeakage { leakage: f64 },

    #[error("collision not complete: interaction-region occupancy {occupancy:e}")]
    CollisionIncomplete { occupancy: f64 },

    #[error("phase unreliable: overlap magnitude {overlap} below 0.5")]
    UnreliablePhase { overlap: f64 },

    #[error("packets were routed to the wrong terminals: {0}")]
    RoutingFailure(String),

    #[error("output packets exit {spread:.2} sites apart (allowed {allowed:.2})")]
    TimingMisalignment { spread: f64, allowed: f64 },

    #[error("target phase unreachable: powers of G are periodic with period {period}")]
    Unreachable { period: u64 },

    #[error("no k <= {cap} reaches the requested precision")]
    BudgetExceeded { cap: u64 },

    #[error("preparation plan error {error:e} exceeds threshold {threshold:e}")]
    PlanQuality { error: f64, threshold: f64 },

    #[error("schedule file {field}: {message}")]
    ScheduleFile { field: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Errors caused by bad input rather than by a failed computation.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Graph(_)
                | Error::GraphFile { .. }
                | Error::UnknownSwitch(_)
                | Error::InvalidArgument(_)
                | Error::PacketPlacement(_)
                | Error::ScheduleFile { .. }
        )
    }
}
