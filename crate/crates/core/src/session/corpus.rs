//! Newline-delimited JSON corpus files: one dialogue log per line.

use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::dialogue::DialogueLog;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Parse {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

/// Serializes a corpus exactly as it is written to disk.
pub fn corpus_to_string(logs: &[DialogueLog]) -> String {
    let mut out = String::new();
    for log in logs {
        out.push_str(&serde_json::to_string(log).expect("logs always serialize"));
        out.push('\n');
    }
    out
}

pub fn write_corpus(path: impl AsRef<Path>, logs: &[DialogueLog]) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let io_err = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut file = io::BufWriter::new(fs::File::create(path).map_err(io_err)?);
    file.write_all(corpus_to_string(logs).as_bytes()).map_err(io_err)?;
    file.flush().map_err(io_err)
}

/// Reads a corpus; blank lines are skipped and errors carry 1-based line numbers.
pub fn read_corpus(path: impl AsRef<Path>) -> Result<Vec<DialogueLog>, CorpusError> {
    let path = path.as_ref();
    let io_err = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let reader = BufReader::new(fs::File::open(path).map_err(io_err)?);
    let mut logs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let log = serde_json::from_str(&line).map_err(|source| CorpusError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        })?;
        logs.push(log);
    }
    Ok(logs)
}
