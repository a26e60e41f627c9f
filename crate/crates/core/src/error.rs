use alloc::boxed::Box;
use alloc::string::String;
use core::fmt;

use crate::model::FittedModel;

/// Errors produced by the model, inference, and audit routines.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    EmptySubset,
    IndexOutOfRange {
        index: usize,
        n: usize,
    },
    DuplicateIndex(usize),
    InvalidRate {
        row: usize,
        col: usize,
        value: f64,
    },
    DimensionMismatch {
        expected: usize,
        found: usize,
    },
    /// More than one closed communicating class; the stationary distribution is not unique.
    MultipleClosedClasses(usize),
    SingularSystem {
        residual: f64,
    },
    EmptyDataset,
    SameItem(usize),
    NonpositiveGamma {
        index: usize,
        value: f64,
    },
    InvalidPairwise {
        row: usize,
        col: usize,
    },
    InvalidWeights,
    NotConnected,
    NoConvergence {
        iterations: usize,
    },
    OptimizerFailure {
        reason: String,
        best: Option<Box<FittedModel>>,
    },
    InvalidConfig(&'static str),
    InvalidPartition(&'static str),
    NotContractible,
    LambdaMismatch {
        max_diff: f64,
    },
    InvalidK,
    BadNesting,
    NegativeAlpha(f64),
    DegenerateSplit {
        train: usize,
        test: usize,
    },
    InvalidChoice {
        chosen: usize,
    },
    InvalidSet(&'static str),
    UnseenSet,
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptySubset => write!(f, "subset is empty"),
            Error::IndexOutOfRange { index, n } => {
                write!(f, "index {index} out of range for universe of size {n}")
            }
            Error::DuplicateIndex(i) => write!(f, "index {i} appears more than once"),
            Error::InvalidRate { row, col, value } => {
                write!(
                    f,
                    "rate q[{row}][{col}] = {value} is negative or not finite"
                )
            }
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::MultipleClosedClasses(k) => write!(
                f,
                "chain has {k} closed communicating classes; stationary distribution is not unique"
            ),
            Error::SingularSystem { residual } => {
                write!(f, "stationary system is singular (residual {residual:e})")
            }
            Error::EmptyDataset => write!(f, "dataset has no observations"),
            Error::SameItem(i) => {
                write!(f, "pairwise query needs two distinct items, got {i} twice")
            }
            Error::NonpositiveGamma { index, value } => {
                write!(
                    f,
                    "quality parameter gamma[{index}] = {value} must be positive"
                )
            }
            Error::InvalidPairwise { row, col } => {
                write!(f, "pairwise matrix invalid at ({row}, {col})")
            }
            Error::InvalidWeights => write!(f, "mixture weights must be nonnegative and sum to 1"),
            Error::NotConnected => write!(f, "comparison graph is not strongly connected"),
            Error::NoConvergence { iterations } => {
                write!(f, "no convergence after {iterations} iterations")
            }
            Error::OptimizerFailure { reason, .. } => write!(f, "optimizer failure: {reason}"),
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::InvalidPartition(msg) => write!(f, "invalid partition: {msg}"),
            Error::NotContractible => write!(f, "partition is not contractible"),
            Error::LambdaMismatch { max_diff } => {
                write!(f, "block rates differ between models by {max_diff:e}")
            }
            Error::InvalidK => write!(f, "expansion factor k must be at least 1"),
            Error::BadNesting => write!(f, "expected A to be a proper subset of B"),
            Error::NegativeAlpha(a) => write!(f, "smoothing alpha = {a} must be nonnegative"),
            Error::DegenerateSplit { train, test } => {
                write!(f, "split leaves an empty side (train {train}, test {test})")
            }
            Error::InvalidChoice { chosen } => {
                write!(f, "chosen item {chosen} is not a member of its choice set")
            }
            Error::InvalidSet(msg) => write!(f, "invalid choice set: {msg}"),
            Error::UnseenSet => write!(f, "choice set does not occur in the dataset"),
        }
    }
}

impl core::error::Error for Error {}
