use std::path::PathBuf;

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad arguments, configuration, or violated preconditions.
    Validation,
    /// Unreadable or malformed input data.
    Data,
    /// Statistically degenerate input (all ties, zero variance, ...).
    Degenerate,
}

#[derive(Debug, thiserror::Error)]
pub enum AuditError {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("malformed data: {0}")]
    Data(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<AuditError>,
    },
}

pub type Result<T, E = AuditError> = std::result::Result<T, E>;

impl AuditError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            AuditError::Invalid(_) | AuditError::Domain(_) => ErrorKind::Validation,
            AuditError::Data(_) | AuditError::Io { .. } => ErrorKind::Data,
            AuditError::Degenerate(_) => ErrorKind::Degenerate,
            AuditError::Context { source, .. } => source.kind(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AuditError::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps the error with a short description of where it happened.
    pub fn context(self, context: impl Into<String>) -> Self {
        AuditError::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn context_preserves_kind() {
        let e = AuditError::Degenerate("all values tied".into()).context("subgroup White/Female");
        assert_eq!(e.kind(), ErrorKind::Degenerate);
        assert_eq!(e.to_string(), "subgroup White/Female: degenerate data: all values tied");
    }
}
