use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("rejected keyword {word:?}: {reason}")]
    RejectedKeyword { word: String, reason: &'static str },

    #[error("document id {doc_id} does not fit a tree of height {height}")]
    Capacity { doc_id: u64, height: u8 },

    #[error("document {0} is already indexed")]
    DuplicateDocument(u64),

    #[error("unknown document {0}")]
    UnknownDocument(u64),

    #[error("a document must carry at least one keyword token")]
    EmptyTokens,

    #[error("query must contain at least one keyword")]
    EmptyQuery,

    #[error("plaintext must be non-empty")]
    EmptyPlaintext,

    #[error("authenticated decryption failed for document {0}")]
    Decryption(u64),

    #[error("format error at line {line}: {reason}")]
    Format { line: usize, reason: String },

    #[error("index corruption: {0}")]
    IndexCorruption(String),

    #[error("ledger chain invalid at seq {seq}: {reason}")]
    LedgerCorrupt { seq: u64, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn format(line: usize, reason: impl Into<String>) -> Self {
        Error::Format {
            line,
            reason: reason.into(),
        }
    }
}
