use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Coarse failure class, used by binaries to pick an exit code:
/// `Usage` covers bad invocations, unreadable or malformed inputs and
/// invalid configuration; `Runtime` covers failures of the pipeline
/// itself on inputs that were accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Runtime,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    ReadFile {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("cannot write {path}: {source}")]
    WriteFile {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },

    /// Structurally valid input that violates a documented invariant
    /// (duplicate ids, unnormalized stopword entries, bad thresholds...).
    #[error("validation error: {0}")]
    Validation(String),

    /// Line-oriented data file (stopwords, rules, repair map, qrels, run)
    /// that does not parse; line numbers are 1-based.
    #[error("{path}:{line}: {message}")]
    DataFormat {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("thesaurus {path}: {message}")]
    ThesaurusParse { path: PathBuf, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    /// The corpus was accepted but the pipeline cannot produce a result
    /// from it (for example every token was removed by cleaning).
    #[error("pipeline error: {0}")]
    Pipeline(String),

    /// A computation was asked for a value outside its domain, such as
    /// scoring a term the corpus never saw or averaging over an empty
    /// relevance set.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("index file {path} uses format version {found}, this build reads version {expected}; re-index to upgrade")]
    IndexVersion {
        path: PathBuf,
        found: u64,
        expected: u64,
    },

    #[error("index file {path} failed integrity check: {message}")]
    IndexIntegrity { path: PathBuf, message: String },
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::ReadFile { .. }
            | Error::Manifest { .. }
            | Error::Validation(_)
            | Error::DataFormat { .. }
            | Error::ThesaurusParse { .. }
            | Error::Config(_)
            | Error::IndexVersion { .. } => ErrorClass::Usage,
            Error::WriteFile { .. }
            | Error::Pipeline(_)
            | Error::Domain(_)
            | Error::IndexIntegrity { .. } => ErrorClass::Runtime,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn read_to_string(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::ReadFile {
        path: path.to_path_buf(),
        source,
    })
}
