use std::path::PathBuf;

use crate::config::ConfigIssue;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain of the model or formula.
    #[error("domain error: {0}")]
    Domain(String),
    #[error("fit failed: {0}")]
    Fit(String),
    /// The caller broke an input contract (for example unsorted timetags).
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("invalid configuration ({} issue(s)):\n{}", .0.len(), format_issues(.0))]
    Config(Vec<ConfigIssue>),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed data: {0}")]
    Format(String),
}

fn format_issues(issues: &[ConfigIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("  {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
