use std::path::PathBuf;

use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    MalformedRow { line: u64, message: String },

    #[error("line {line}: duplicate date {date}")]
    DuplicateDate { line: u64, date: NaiveDate },

    #[error("line {line}: date {date} precedes {previous}")]
    UnorderedDate {
        line: u64,
        date: NaiveDate,
        previous: NaiveDate,
    },

    #[error("missing days between {after} and {before}")]
    Gap { after: NaiveDate, before: NaiveDate },

    #[error("line {line}: negative value {value}")]
    NegativeValue { line: u64, value: f64 },

    #[error("invalid value {value} on {date}")]
    InvalidValue { date: NaiveDate, value: f64 },

    #[error("series has {len} days, at least {min} required")]
    TooShort { len: usize, min: usize },

    #[error("series is empty")]
    Empty,

    #[error("invalid baseline weights: {0}")]
    InvalidWeights(String),

    #[error("{histories} histories supplied for {weights} weights")]
    HistoryCountMismatch { histories: usize, weights: usize },

    #[error("history {index} has no value for {month:02}-{day:02}")]
    MissingMonthDay { index: usize, month: u32, day: u32 },

    #[error("series do not overlap")]
    NoOverlap,

    #[error("segment {start}..={end} lies outside the series range")]
    SegmentOutOfRange { start: NaiveDate, end: NaiveDate },

    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },

    #[error("observed series is all zero")]
    AllZero,

    #[error("report holds {available} candidates, {needed} requested")]
    NotEnoughCandidates { needed: usize, available: usize },

    #[error("r0 must be finite and non-negative, got {0}")]
    InvalidR0(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for errors caused by the content of an input file rather than by
    /// a violated argument or model invariant.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::MalformedRow { .. }
                | Error::DuplicateDate { .. }
                | Error::UnorderedDate { .. }
                | Error::Gap { .. }
                | Error::NegativeValue { .. }
                | Error::Empty
        )
    }
}
