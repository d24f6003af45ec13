//! Sequential-pass SUAV delivery in an unknown wind field.
//!
//! A team of small UAVs flies one after another from a fixed start to a fixed
//! goal on a Manhattan-style grid of roads. Each pass measures wind speed
//! along the edges it traverses and reports to a central agent, which updates
//! per-edge travel-time estimates and replans a minimum-time path for the next
//! pass. The crate bundles:
//!
//! - [`grid`]: the directed 4-neighbor road graph with nontraversable
//!   boundary rows,
//! - [`windfield`]: ground-truth wind synthesis from a resistor-network
//!   pressure-gradient model plus a periodic gradient signal,
//! - [`traversal`]: discrete-time flight simulation along a planned path,
//! - [`estimator`]: the agent's cost table, signal stitching, resistance
//!   estimation, FFT analysis, and the mass-spring Kalman filter,
//! - [`planner`]: Dijkstra with randomized tie-breaking plus an exhaustive
//!   verification oracle,
//! - [`harness`]: reproducible trial/sweep orchestration and CSV reports.

pub mod estimator;
pub mod grid;
pub mod harness;
pub mod planner;
pub mod traversal;
pub mod windfield;

use std::fmt;

/// Crate-wide error type.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Grid dimensions too small to hold boundary rows plus an interior.
    GridTooSmall { n1: usize, n2: usize },
    /// Nonpositive edge spacing.
    NonpositiveSpacing,
    /// A vertical resistance was zero or negative; the network cannot be solved.
    SingularNetwork,
    /// All proportionality constants are zero; nothing to scale.
    AllZeroCoeffs,
    /// An (i, j) pair that is not an edge of the graph.
    UnknownEdge(u32, u32),
    /// Airspeed does not dominate the wind cap; a headwind could stall progress.
    PossibleStall { u0: f64, w_max: f64 },
    /// Nonpositive integration time step.
    NonpositiveTimeStep,
    /// u0 plus estimated/measured wind is not positive; Eq.-style cost undefined.
    NonpositiveGroundSpeed(f64),
    /// Path passed to the traversal is not a chain of graph edges.
    DisconnectedPath(u32, u32),
    /// No start-to-goal route exists over traversable edges.
    Disconnected,
    /// A cost-table entry was zero, negative, or not finite.
    NonpositiveCost(u32, u32),
    /// Start and goal coincide.
    DegenerateQuery,
    /// Quadratic fit needs at least three samples.
    DegenerateWindow,
    /// The normalized-gradient estimate averages to zero over the window.
    IndeterminateResistance,
    /// Series too short for the requested number of spectral components.
    SeriesTooShort { len: usize, needed: usize },
    /// Kalman filter needs at least one mode.
    EmptyFilter,
    /// Innovation variance collapsed to a nonpositive value.
    CovarianceCollapse,
    /// Invalid trial configuration.
    InvalidConfig(String),
    /// I/O failure with path context.
    Io(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::GridTooSmall { n1, n2 } => {
                write!(f, "grid {n1}x{n2} too small for boundary rows (need at least 3x3)")
            }
            Error::NonpositiveSpacing => write!(f, "edge lengths must be positive"),
            Error::SingularNetwork => write!(f, "singular network: vertical resistance must be strictly positive"),
            Error::AllZeroCoeffs => write!(f, "all edge coefficients are zero; cannot scale to a wind cap"),
            Error::UnknownEdge(i, j) => write!(f, "unknown edge ({i}, {j})"),
            Error::PossibleStall { u0, w_max } => {
                write!(f, "possible stall: headwind can cancel airspeed (u0 = {u0}, w_max = {w_max})")
            }
            Error::NonpositiveTimeStep => write!(f, "time step must be positive"),
            Error::NonpositiveGroundSpeed(g) => write!(f, "nonpositive ground speed {g}"),
            Error::DisconnectedPath(i, j) => write!(f, "path hop ({i}, {j}) is not a graph edge"),
            Error::Disconnected => write!(f, "goal unreachable from start"),
            Error::NonpositiveCost(i, j) => write!(f, "cost of edge ({i}, {j}) is not positive and finite"),
            Error::DegenerateQuery => write!(f, "start and goal coincide"),
            Error::DegenerateWindow => write!(f, "degenerate window: quadratic fit needs three or more samples"),
            Error::IndeterminateResistance => {
                write!(f, "indeterminate resistance: gradient estimate averages to zero over the window")
            }
            Error::SeriesTooShort { len, needed } => {
                write!(f, "series of length {len} too short for spectral analysis (need {needed})")
            }
            Error::EmptyFilter => write!(f, "filter needs at least one mode"),
            Error::CovarianceCollapse => write!(f, "covariance collapse: innovation variance not positive"),
            Error::InvalidConfig(msg) => write!(f, "invalid config: {msg}"),
            Error::Io(msg) => write!(f, "i/o error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
