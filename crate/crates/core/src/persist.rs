//! JSON artifacts: checkpoints, population files and single genomes.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::neat::Genome;

pub const POPULATION_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum PersistError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: unsupported format version {found} (expected {expected})")]
    Version { path: PathBuf, found: u32, expected: u32 },
    #[error("{0}: population is empty")]
    EmptyPopulation(PathBuf),
}

/// Writes `value` as pretty JSON, replacing the file atomically.
pub fn save_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), PersistError> {
    let io = |source| PersistError::Io {
        path: path.to_path_buf(),
        source,
    };
    let text = serde_json::to_string_pretty(value).map_err(|source| PersistError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, text).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T, PersistError> {
    let text = std::fs::read_to_string(path).map_err(|source| PersistError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| PersistError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// A saved population, as written at the end of training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationFile {
    pub version: u32,
    /// Generations completed when the file was written.
    pub generation: u32,
    pub genomes: Vec<Genome>,
}

impl PopulationFile {
    pub fn new(generation: u32, genomes: Vec<Genome>) -> Self {
        PopulationFile {
            version: POPULATION_VERSION,
            generation,
            genomes,
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), PersistError> {
        save_json(path, self)
    }

    /// Loads and checks the version; empty populations are rejected.
    pub fn load(path: &Path) -> Result<Self, PersistError> {
        let p: PopulationFile = load_json(path)?;
        if p.version != POPULATION_VERSION {
            return Err(PersistError::Version {
                path: path.to_path_buf(),
                found: p.version,
                expected: POPULATION_VERSION,
            });
        }
        if p.genomes.is_empty() {
            return Err(PersistError::EmptyPopulation(path.to_path_buf()));
        }
        Ok(p)
    }
}

pub fn save_genome(path: &Path, genome: &Genome) -> Result<(), PersistError> {
    save_json(path, genome)
}

pub fn load_genome(path: &Path) -> Result<Genome, PersistError> {
    load_json(path)
}
