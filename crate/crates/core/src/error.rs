use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("point lies {distance:.3e} m off the mirror plane")]
    OffPlane { distance: f64 },

    #[error("registration degenerate: no correspondences within {max_corr_dist} m")]
    RegistrationDegenerate { max_corr_dist: f64 },

    #[error("route is shorter than one step of {step} m")]
    RouteTooShort { step: f64 },

    #[error("no feasible point in search space: {0}")]
    InfeasibleSpace(String),

    #[error("trajectory mismatch: {0}")]
    TrajectoryMismatch(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
