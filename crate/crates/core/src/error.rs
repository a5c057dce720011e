use thiserror::Error;

/// Errors produced across the navigation stack.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum NavError {
    #[error("time {t} outside trajectory domain [{start}, {end}]")]
    Domain { t: f64, start: f64, end: f64 },
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("no free cell available for goal sampling")]
    NoFreeCell,
    #[error("goal unreachable from start")]
    Unreachable,
    #[error("non-finite acceleration commanded for robot {0}")]
    NonFiniteAccel(usize),
    #[error("planning failed: {0}")]
    PlanningFailed(String),
    #[error("generation failed: {0}")]
    Generation(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for NavError {
    fn from(e: std::io::Error) -> Self {
        NavError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, NavError>;
