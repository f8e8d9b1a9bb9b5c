//! Bulk driver for the stages that are pure per source: extract, wrap,
//! emit-xml, shred. With the `parallel` feature on (the default) the
//! preparation fans out across a thread pool; the fallback runs the same
//! code sequentially, and both produce identical output in manifest order.
//! Database writes always stay sequential, in manifest order, so a batch
//! run loads the exact rows the agent pipeline would.

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use thiserror::Error;

use crate::agent::{FailureRecord, PipelineReport, STAGE_SERVICES};
use crate::dtd::DtdAst;
use crate::extract::{extract, ExtractError, Manifest, ManifestEntry};
use crate::model::{wrap, WrapError};
use crate::ods::{LoadStatus, OdsHandle};
use crate::rdb::{
    create_schema, dtd_to_relational, load, rebase, shred, CompileError, RelationalSchema, RowSet,
    SchemaSqlError, ShredError,
};
use crate::xml::{emit_xml, EmitError, XmlDocument};

/// One source carried through extraction, wrapping, emission, and shredding,
/// ready to be loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub object_id: u64,
    pub document: XmlDocument,
    pub rows: RowSet,
}

#[derive(Debug, Error)]
pub enum PrepareError {
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Wrap(#[from] WrapError),
    #[error(transparent)]
    Emit(#[from] EmitError),
    #[error(transparent)]
    Shred(#[from] ShredError),
}

impl PrepareError {
    /// Which stage service the error belongs to.
    pub fn stage(&self) -> &'static str {
        match self {
            PrepareError::Extract(_) => "extract",
            PrepareError::Wrap(_) => "wrap",
            PrepareError::Emit(_) => "emit-xml",
            PrepareError::Shred(_) => "shred",
        }
    }
}

#[derive(Debug, Error)]
pub enum BatchError {
    #[error("cannot derive a schema: {0}")]
    Compile(#[from] CompileError),
    #[error("sink unavailable: {0}")]
    Sink(String),
}

/// Run one source through the four pure stages.
pub fn prepare(
    entry: &ManifestEntry,
    object_id: u64,
    dtd: &DtdAst,
    schema: &RelationalSchema,
) -> Result<Prepared, PrepareError> {
    let set = extract(entry)?;
    let object = wrap(&set, object_id)?;
    let document = emit_xml(&object, dtd)?;
    let rows = shred(&document, schema)?;
    Ok(Prepared {
        object_id,
        document,
        rows,
    })
}

/// Prepare every entry, assigning object ids `base_id + 1 ..`. Output order
/// matches entry order regardless of scheduling.
#[cfg(feature = "parallel")]
pub fn prepare_all(
    entries: &[ManifestEntry],
    base_id: u64,
    dtd: &DtdAst,
    schema: &RelationalSchema,
) -> Vec<Result<Prepared, PrepareError>> {
    entries
        .par_iter()
        .enumerate()
        .map(|(i, entry)| prepare(entry, base_id + 1 + i as u64, dtd, schema))
        .collect()
}

#[cfg(not(feature = "parallel"))]
pub fn prepare_all(
    entries: &[ManifestEntry],
    base_id: u64,
    dtd: &DtdAst,
    schema: &RelationalSchema,
) -> Vec<Result<Prepared, PrepareError>> {
    prepare_all_sequential(entries, base_id, dtd, schema)
}

/// Single-threaded equivalent of [`prepare_all`]; the benchmark baseline.
pub fn prepare_all_sequential(
    entries: &[ManifestEntry],
    base_id: u64,
    dtd: &DtdAst,
    schema: &RelationalSchema,
) -> Vec<Result<Prepared, PrepareError>> {
    entries
        .iter()
        .enumerate()
        .map(|(i, entry)| prepare(entry, base_id + 1 + i as u64, dtd, schema))
        .collect()
}

/// Whole-manifest run without the agent layer: parallel preparation, then
/// sequential loads in manifest order. Produces the same store contents,
/// registry entries, and report the agent pipeline would for the same
/// manifest against the same store.
pub fn run_batch(
    manifest: &Manifest,
    dtd: &DtdAst,
    ods: &mut OdsHandle,
) -> Result<PipelineReport, BatchError> {
    let sink = |e: &dyn std::fmt::Display| BatchError::Sink(e.to_string());
    let root = dtd
        .elements
        .keys()
        .next()
        .ok_or_else(|| BatchError::Sink("document type declares no elements".into()))?;
    let schema = dtd_to_relational(dtd, root)?;
    match create_schema(&schema, ods.connection().map_err(|e| sink(&e))?) {
        Ok(_) | Err(SchemaSqlError::TableExists(_)) => {}
        Err(e) => return Err(sink(&e)),
    }
    let base_id = ods.max_object_id().map_err(|e| sink(&e))?;

    let prepared = prepare_all(&manifest.entries, base_id, dtd, &schema);

    let mut report = PipelineReport {
        per_stage_counts: STAGE_SERVICES.iter().map(|s| (s.to_string(), 0)).collect(),
        ..PipelineReport::default()
    };
    for (index, (entry, outcome)) in manifest.entries.iter().zip(prepared).enumerate() {
        let source = entry.path.display().to_string();
        let object_id = base_id + 1 + index as u64;
        let failure = match outcome {
            Ok(ready) => {
                for s in &STAGE_SERVICES[..4] {
                    *report.per_stage_counts.get_mut(*s).unwrap() += 1;
                }
                let conn = ods.connection_mut().map_err(|e| sink(&e))?;
                let loaded =
                    rebase(&ready.rows, conn).and_then(|rebased| load(&rebased, &schema, conn));
                match loaded {
                    Ok(_) => {
                        *report.per_stage_counts.get_mut("load").unwrap() += 1;
                        None
                    }
                    Err(e) => Some(FailureRecord {
                        source: source.clone(),
                        stage: "load".into(),
                        diagnostic: e.to_string(),
                    }),
                }
            }
            Err(e) => {
                let failed_at = STAGE_SERVICES.iter().position(|s| *s == e.stage()).unwrap();
                for s in &STAGE_SERVICES[..failed_at] {
                    *report.per_stage_counts.get_mut(*s).unwrap() += 1;
                }
                Some(FailureRecord {
                    source: source.clone(),
                    stage: e.stage().into(),
                    diagnostic: e.to_string(),
                })
            }
        };
        match failure {
            None => {
                report.objects_processed += 1;
                ods.record_load(&source, Some(object_id), LoadStatus::Loaded)
                    .map_err(|e| sink(&e))?;
            }
            Some(record) => {
                report.objects_failed += 1;
                report.failures.push(record);
                ods.record_load(&source, None, LoadStatus::Failed)
                    .map_err(|e| sink(&e))?;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::{register_pipeline_agents, run_pipeline, AgentPlatform};
    use crate::ods::open_ods;
    use crate::xml::canonical_dtd;

    fn corpus(dir: &std::path::Path, n: usize) -> Manifest {
        let mut entries = Vec::new();
        for i in 0..n {
            let path = dir.join(format!("doc{i}.txt"));
            std::fs::write(&path, format!("file number {i}\nwith two lines\n")).unwrap();
            entries.push(ManifestEntry::new(path));
        }
        Manifest { entries }
    }

    fn dump(ods: &OdsHandle, table: &str) -> Vec<String> {
        let conn = ods.connection().unwrap();
        let mut stmt = conn
            .prepare(&format!("SELECT * FROM \"{table}\" ORDER BY id"))
            .unwrap();
        let cols = stmt.column_count();
        let rows = stmt
            .query_map([], |row| {
                let mut cells = Vec::new();
                for c in 0..cols {
                    cells.push(format!("{:?}", row.get_ref(c).unwrap()));
                }
                Ok(cells.join("|"))
            })
            .unwrap();
        rows.map(Result::unwrap).collect()
    }

    #[test]
    fn parallel_and_sequential_preparation_agree() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = corpus(dir.path(), 12);
        let dtd = canonical_dtd();
        let schema = dtd_to_relational(&dtd, "complex_object").unwrap();
        let par = prepare_all(&manifest.entries, 0, &dtd, &schema);
        let seq = prepare_all_sequential(&manifest.entries, 0, &dtd, &schema);
        assert_eq!(par.len(), seq.len());
        for (p, s) in par.iter().zip(&seq) {
            assert_eq!(p.as_ref().unwrap(), s.as_ref().unwrap());
        }
    }

    #[test]
    fn batch_and_agent_runs_load_identical_stores() {
        let dir = tempfile::tempdir().unwrap();
        let mut manifest = corpus(dir.path(), 5);
        manifest
            .entries
            .insert(2, ManifestEntry::new(dir.path().join("absent.txt")));
        let dtd = canonical_dtd();

        let mut batch_ods = open_ods(&dir.path().join("batch.db")).unwrap();
        let batch_report = run_batch(&manifest, &dtd, &mut batch_ods).unwrap();

        let platform = AgentPlatform::new();
        register_pipeline_agents(&platform);
        let mut agent_ods = open_ods(&dir.path().join("agent.db")).unwrap();
        let agent_report = run_pipeline(&platform, &manifest, &dtd, &mut agent_ods).unwrap();

        assert_eq!(batch_report, agent_report);
        assert_eq!(batch_report.objects_processed, 5);
        assert_eq!(batch_report.objects_failed, 1);
        let schema = dtd_to_relational(&dtd, "complex_object").unwrap();
        for table in &schema.tables {
            assert_eq!(
                dump(&batch_ods, &table.name),
                dump(&agent_ods, &table.name),
                "{}",
                table.name
            );
        }
    }

    #[test]
    fn prepare_error_names_its_stage() {
        let dir = tempfile::tempdir().unwrap();
        let dtd = canonical_dtd();
        let schema = dtd_to_relational(&dtd, "complex_object").unwrap();
        let entry = ManifestEntry::new(dir.path().join("missing.txt"));
        let err = prepare(&entry, 1, &dtd, &schema).unwrap_err();
        assert_eq!(err.stage(), "extract");
    }
}
