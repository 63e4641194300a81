use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

/// Failure modes shared by every module.
#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// A scalar parameter is outside its legal range.
    Parameter(String),
    /// A grid cannot resolve the requested frequencies or time samples.
    Resolution(String),
    /// A symbol or metric could not be constructed.
    Construction(String),
    /// An operation is not available for this representation.
    Unsupported(String),
    /// A bicharacteristic left the declared flow-out region.
    FlowEscape { time: f64 },
    /// Explicit time step exceeds the stability bound.
    Stability { requested: f64, suggested: f64 },
    /// A requested time lies outside a trajectory's span.
    Range { time: f64, start: f64, end: f64 },
    /// A least-squares fit has too few points.
    Fit(String),
    /// Operands live on different grids.
    GridMismatch(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Parameter(m) => write!(f, "parameter error: {m}"),
            Error::Resolution(m) => write!(f, "resolution error: {m}"),
            Error::Construction(m) => write!(f, "construction error: {m}"),
            Error::Unsupported(m) => write!(f, "unsupported representation: {m}"),
            Error::FlowEscape { time } => {
                write!(f, "flow escaped the declared region at t = {time}")
            }
            Error::Stability { requested, suggested } => write!(
                f,
                "time step {requested} violates the stability bound; use at most {suggested}"
            ),
            Error::Range { time, start, end } => {
                write!(f, "time {time} outside trajectory span [{start}, {end}]")
            }
            Error::Fit(m) => write!(f, "fit error: {m}"),
            Error::GridMismatch(m) => write!(f, "grid mismatch: {m}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

impl Error {
    /// True for errors caused by discretisation limits rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Resolution(_)
                | Error::FlowEscape { .. }
                | Error::Stability { .. }
                | Error::GridMismatch(_)
                | Error::Fit(_)
        )
    }
}

macro_rules! param_err {
    ($($arg:tt)*) => { $crate::error::Error::Parameter(alloc::format!($($arg)*)) };
}
pub(crate) use param_err;
