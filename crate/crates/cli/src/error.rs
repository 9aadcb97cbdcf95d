use std::path::PathBuf;

/// Exit status for a run where every check passed.
pub const EXIT_PASS: i32 = 0;
/// Exit status for a run where some check failed.
pub const EXIT_FAIL: i32 = 1;
/// Exit status for a rejected config or a run that could not complete.
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
    #[error(transparent)]
    Core(#[from] tangent_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("serialization failed: {0}")]
    Serialize(#[from] serde_json::Error),
}
