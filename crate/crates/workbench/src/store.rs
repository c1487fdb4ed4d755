//! Append-only action logs, one JSON-lines file per case.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use gmwf_core::format::canonical_json;
use thiserror::Error;

use crate::sim::Step;

const EXTENSION: &str = "jsonl";

#[derive(Debug, Error)]
pub enum StoreError {
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

#[derive(Debug, Clone)]
pub struct Store {
    dir: PathBuf,
}

impl Store {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|source| StoreError::Io {
            path: dir.clone(),
            source,
        })?;
        Ok(Store { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_of(&self, case_id: &str) -> PathBuf {
        self.dir.join(format!("{case_id}.{EXTENSION}"))
    }

    pub fn append(&self, case_id: &str, step: &Step) -> Result<(), StoreError> {
        let path = self.path_of(case_id);
        let io_err = |source| StoreError::Io {
            path: path.clone(),
            source,
        };
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err)?;
        writeln!(f, "{}", canonical_json(step)).map_err(io_err)?;
        f.sync_data().map_err(io_err)
    }

    /// Every logged case with its steps, in file order.
    pub fn load(&self) -> Result<BTreeMap<String, Vec<Step>>, StoreError> {
        let io_err = |path: &Path| {
            let path = path.to_path_buf();
            move |source| StoreError::Io { path, source }
        };
        let mut out = BTreeMap::new();
        for entry in fs::read_dir(&self.dir).map_err(io_err(&self.dir))? {
            let path = entry.map_err(io_err(&self.dir))?.path();
            if path.extension().and_then(|e| e.to_str()) != Some(EXTENSION) {
                continue;
            }
            let Some(case_id) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            let file = fs::File::open(&path).map_err(io_err(&path))?;
            let mut steps = Vec::new();
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(io_err(&path))?;
                if line.trim().is_empty() {
                    continue;
                }
                let step = serde_json::from_str(&line).map_err(|source| StoreError::Parse {
                    path: path.clone(),
                    line: i + 1,
                    source,
                })?;
                steps.push(step);
            }
            out.insert(case_id.to_string(), steps);
        }
        Ok(out)
    }
}
