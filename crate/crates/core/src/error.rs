use std::path::PathBuf;

/// Errors produced by the library.
///
/// Group indices carried by variants are zero-based; their `Display` output
/// is one-based to match how groups are numbered in reports.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("group {} has {size} object(s); at least 2 are required", .group + 1)]
    GroupSize { group: usize, size: usize },

    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error("group {} is degenerate: all squared distances to its Fréchet mean are equal (sigma_sq = 0)", .group + 1)]
    DegenerateGroup { group: usize },

    #[error("resampling failed: {0}")]
    Resampling(String),

    #[error("{}{}: {message}", .path.display(), .row.map(|r| format!(", row {r}")).unwrap_or_default())]
    Data {
        path: PathBuf,
        row: Option<usize>,
        message: String,
    },

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for errors caused by statistically degenerate data rather than
    /// malformed input.
    pub fn is_degenerate(&self) -> bool {
        matches!(
            self,
            Error::Degenerate(_) | Error::DegenerateGroup { .. } | Error::Resampling(_)
        )
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn data(path: impl Into<PathBuf>, row: Option<usize>, msg: impl Into<String>) -> Self {
        Error::Data {
            path: path.into(),
            row,
            message: msg.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
