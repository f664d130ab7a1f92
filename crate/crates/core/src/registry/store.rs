//! On-disk persistence: an append-only record log plus a full snapshot.
//!
//! ```text
//! <dir>/records.jsonl   one DiscoveryRecord per line, appended on ingest
//! <dir>/snapshot.json   Registry::snapshot(), rewritten atomically
//! ```
//!
//! Opening a store restores the snapshot (if any) and then replays every
//! log record newer than the snapshot, so a crash between snapshots loses
//! nothing that reached the log.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::{DiscoveryRecord, ProfileTaxonomy, Registry, RegistryConfig, RegistryError};

pub const RECORD_LOG: &str = "records.jsonl";
pub const SNAPSHOT: &str = "snapshot.json";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path} line {line}: {message}")]
    MalformedLog {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Registry(#[from] RegistryError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_owned(),
        source,
    }
}

/// Reads a record log. Blank lines are skipped.
pub fn read_record_log(path: &Path) -> Result<Vec<DiscoveryRecord>, StoreError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| StoreError::MalformedLog {
            path: path.to_owned(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

pub struct Store {
    dir: PathBuf,
    log: BufWriter<File>,
}

impl Store {
    /// Opens (creating if needed) the store in `dir` and rebuilds the
    /// registry from it. A supplied taxonomy replaces the persisted one.
    pub fn open(
        dir: &Path,
        taxonomy: Option<ProfileTaxonomy>,
    ) -> Result<(Store, Registry), StoreError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;

        let snap_path = dir.join(SNAPSHOT);
        let mut registry = if snap_path.exists() {
            let text = fs::read_to_string(&snap_path).map_err(io_err(&snap_path))?;
            Registry::restore(&text)?
        } else {
            Registry::new(taxonomy.clone().unwrap_or_default(), RegistryConfig::default())
        };
        if let Some(taxonomy) = taxonomy {
            registry.set_taxonomy(taxonomy)?;
        }

        let log_path = dir.join(RECORD_LOG);
        if log_path.exists() {
            let last = registry.records().last().map_or(0, |r| r.record_id);
            let newer = read_record_log(&log_path)?
                .into_iter()
                .filter(|r| r.record_id > last);
            registry.replay(newer)?;
        }

        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&log_path)
            .map_err(io_err(&log_path))?;
        Ok((
            Store {
                dir: dir.to_owned(),
                log: BufWriter::new(file),
            },
            registry,
        ))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn append(&mut self, record: &DiscoveryRecord) -> Result<(), StoreError> {
        let path = self.dir.join(RECORD_LOG);
        let line = serde_json::to_string(record).expect("record serializes");
        writeln!(self.log, "{line}").map_err(io_err(&path))?;
        self.log.flush().map_err(io_err(&path))
    }

    /// Writes a full snapshot via a temporary file and rename.
    pub fn write_snapshot(&mut self, registry: &Registry) -> Result<(), StoreError> {
        let log_path = self.dir.join(RECORD_LOG);
        self.log.flush().map_err(io_err(&log_path))?;
        self.log.get_ref().sync_all().map_err(io_err(&log_path))?;

        let path = self.dir.join(SNAPSHOT);
        let tmp = self.dir.join(format!("{SNAPSHOT}.tmp"));
        {
            let mut f = File::create(&tmp).map_err(io_err(&tmp))?;
            f.write_all(registry.snapshot().as_bytes())
                .map_err(io_err(&tmp))?;
            f.sync_all().map_err(io_err(&tmp))?;
        }
        fs::rename(&tmp, &path).map_err(io_err(&path))
    }
}
