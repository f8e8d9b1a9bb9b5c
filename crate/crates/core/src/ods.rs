//! Operational data storage: the staging database that shredded rows land
//! in, plus a registry recording every document the pipeline attempted.

use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use rusqlite::{Connection, OptionalExtension};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OdsError {
    #[error("storage failure: {0}")]
    IoFailure(String),
}

fn io_err(e: impl std::fmt::Display) -> OdsError {
    OdsError::IoFailure(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadStatus {
    Loaded,
    Failed,
}

impl LoadStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            LoadStatus::Loaded => "loaded",
            LoadStatus::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegistryEntry {
    pub id: i64,
    pub source_uri: String,
    pub object_id: Option<u64>,
    pub loaded_at: String,
    pub status: LoadStatus,
}

/// An open store. Dropping the handle (or calling [`OdsHandle::close`])
/// releases the file; the registry and all loaded rows persist.
#[derive(Debug)]
pub struct OdsHandle {
    path: PathBuf,
    conn: Option<Connection>,
}

const REGISTRY_DDL: &str = "CREATE TABLE IF NOT EXISTS \"_ods_registry\" (
  \"id\" INTEGER NOT NULL PRIMARY KEY AUTOINCREMENT,
  \"source_uri\" TEXT NOT NULL,
  \"object_id\" INTEGER,
  \"loaded_at\" TEXT NOT NULL,
  \"status\" TEXT NOT NULL
)";

/// Open (creating if necessary) the store at `path`. Reopening an existing
/// store is a no-op apart from acquiring the connection.
pub fn open_ods(path: &Path) -> Result<OdsHandle, OdsError> {
    let conn = Connection::open(path).map_err(io_err)?;
    conn.pragma_update(None, "foreign_keys", true)
        .map_err(io_err)?;
    conn.execute(REGISTRY_DDL, []).map_err(io_err)?;
    Ok(OdsHandle {
        path: path.to_path_buf(),
        conn: Some(conn),
    })
}

impl OdsHandle {
    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn connection(&self) -> Result<&Connection, OdsError> {
        self.conn
            .as_ref()
            .ok_or_else(|| io_err("store handle is closed"))
    }

    pub fn connection_mut(&mut self) -> Result<&mut Connection, OdsError> {
        self.conn
            .as_mut()
            .ok_or_else(|| io_err("store handle is closed"))
    }

    /// Append one registry row; ids are strictly increasing across the
    /// lifetime of the store, even if rows are ever deleted.
    pub fn record_load(
        &mut self,
        source_uri: &str,
        object_id: Option<u64>,
        status: LoadStatus,
    ) -> Result<i64, OdsError> {
        let conn = self.connection()?;
        let loaded_at = Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true);
        conn.execute(
            "INSERT INTO \"_ods_registry\" (\"source_uri\", \"object_id\", \"loaded_at\", \"status\")
             VALUES (?1, ?2, ?3, ?4)",
            rusqlite::params![
                source_uri,
                object_id.map(|id| id as i64),
                loaded_at,
                status.as_str()
            ],
        )
        .map_err(io_err)?;
        Ok(conn.last_insert_rowid())
    }

    pub fn registry(&self) -> Result<Vec<RegistryEntry>, OdsError> {
        let conn = self.connection()?;
        let mut stmt = conn
            .prepare(
                "SELECT \"id\", \"source_uri\", \"object_id\", \"loaded_at\", \"status\"
                 FROM \"_ods_registry\" ORDER BY \"id\"",
            )
            .map_err(io_err)?;
        let entries = stmt
            .query_map([], |row| {
                Ok(RegistryEntry {
                    id: row.get(0)?,
                    source_uri: row.get(1)?,
                    object_id: row.get::<_, Option<i64>>(2)?.map(|id| id as u64),
                    loaded_at: row.get(3)?,
                    status: if row.get::<_, String>(4)? == "loaded" {
                        LoadStatus::Loaded
                    } else {
                        LoadStatus::Failed
                    },
                })
            })
            .map_err(io_err)?
            .collect::<Result<Vec<_>, _>>()
            .map_err(io_err)?;
        Ok(entries)
    }

    /// Highest object id recorded so far, for assigning the next one.
    pub fn max_object_id(&self) -> Result<u64, OdsError> {
        let conn = self.connection()?;
        let max: Option<i64> = conn
            .query_row(
                "SELECT MAX(\"object_id\") FROM \"_ods_registry\"",
                [],
                |r| r.get(0),
            )
            .optional()
            .map_err(io_err)?
            .flatten();
        Ok(max.unwrap_or(0) as u64)
    }

    pub fn close(&mut self) {
        self.conn = None;
    }
}
