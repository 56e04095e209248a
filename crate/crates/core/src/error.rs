use std::io;
use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid HTM id {0:#x}")]
    InvalidId(u32),

    #[error("storage error for {}", describe(*.bucket, .path))]
    Storage {
        bucket: Option<usize>,
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("corrupt bucket {bucket}: {detail}")]
    Corrupt { bucket: usize, detail: String },

    #[error("workload queue for bucket {0} is empty")]
    EmptyQueue(usize),

    #[error("no pending work to schedule")]
    NothingToSchedule,

    #[error("workload saturated at {at_ms:.3} ms: {queued} queued items + {incoming} incoming exceeds ceiling {ceiling}")]
    Saturated {
        at_ms: f64,
        queued: usize,
        incoming: usize,
        ceiling: usize,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

fn describe(bucket: Option<usize>, path: &std::path::Path) -> String {
    match bucket {
        Some(b) => format!("bucket {b} ({})", path.display()),
        None => path.display().to_string(),
    }
}

impl Error {
    pub(crate) fn storage(bucket: Option<usize>, path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Storage {
            bucket,
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user-supplied parameters or mismatched
    /// inputs rather than by the environment.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::InvalidInput(_) | Error::Config(_) | Error::InvalidId(_))
    }
}
