//! Configuration and model files (TOML) and CSV output.

mod config;
mod csv;
mod model_file;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{load_config, parse_config, parse_config_unvalidated, SimulationConfig};
pub use csv::{compare_tables, density_table, emit_csv, read_csv, write_csv_file, SeriesTable};
pub use model_file::{Entry, HamiltonianEntry, JumpTermEntry, ModelDimensions, ModelFile};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: {message}")]
    Semantic { path: String, message: String },

    #[error(transparent)]
    Model(#[from] crate::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ConfigError {
    pub(crate) fn semantic(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Semantic {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn from_toml(text: &str, err: &toml::de::Error) -> Self {
        let (line, column) = err
            .span()
            .map(|span| line_column(text, span.start))
            .unwrap_or((0, 0));
        Self::Parse {
            line,
            column,
            message: err.message().trim().to_string(),
        }
    }
}

/// 1-based line and column of a byte offset.
fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, column)
}
