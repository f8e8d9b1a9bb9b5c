//! One function per subcommand. Every stage works off files so a pipeline
//! run can be reproduced step by step: `extract` writes attributes.json,
//! `gen-xml` turns it into xml/object_NNNNN.xml files, `dtd2sql` writes
//! schema.sql, `shred` loads the XML into the store, `reconstruct` prints
//! documents rebuilt from rows. Object ids in the stage flow are manifest
//! positions (1-based), which is exactly what `run` assigns on a fresh
//! store.

use std::fs;
use std::io::{self, BufRead, Write as _};
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use complex_etl_core::agent::{
    register_pipeline_agents, run_pipeline, AgentPlatform, PipelineReport, STAGE_SERVICES,
};
use complex_etl_core::batch::prepare_all;
use complex_etl_core::dtd::{parse_dtd, DtdAst};
use complex_etl_core::extract::{extract, Manifest, ManifestEntry};
use complex_etl_core::model::{wrap, AttrValue, AttributeSet};
use complex_etl_core::ods::{open_ods, LoadStatus, OdsHandle};
use complex_etl_core::rdb::{
    create_schema, ddl, dtd_to_relational, load, rebase, reconstruct, shred, RelationalSchema,
    SchemaSqlError,
};
use complex_etl_core::xml::{canonical_dtd, emit_xml, read_xml, validate_xml, write_xml};

#[derive(Args)]
pub struct StageArgs {
    /// TOML manifest listing the source files
    #[arg(long)]
    pub manifest: Option<PathBuf>,

    /// Document type declaration; the built-in one when omitted
    #[arg(long)]
    pub dtd: Option<PathBuf>,

    /// Directory for produced files (XML, schema.sql, reports)
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// SQLite store to load into or reconstruct from
    #[arg(long, env = "COMPLEX_ETL_DB")]
    pub db: Option<PathBuf>,

    /// Ask for optional attributes still missing after extraction
    #[arg(long)]
    pub interactive: bool,

    /// Per-source progress on stderr
    #[arg(long)]
    pub verbose: bool,
}

/// How a command failed: `Config` problems exit 2, `Data` problems exit 1.
pub enum Failure {
    Config(String),
    Data(String),
}

fn config(e: impl std::fmt::Display) -> Failure {
    Failure::Config(e.to_string())
}

const XML_DIR: &str = "xml";

fn xml_file_name(object_id: u64) -> String {
    format!("object_{object_id:05}.xml")
}

/// One line of attributes.json: what extraction found for one source.
#[derive(Serialize, Deserialize)]
struct ExtractedRecord {
    source: String,
    object_id: u64,
    attributes: AttributeSet,
}

fn load_dtd(args: &StageArgs) -> Result<DtdAst, Failure> {
    match &args.dtd {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                Failure::Config(format!("cannot read dtd `{}`: {e}", path.display()))
            })?;
            parse_dtd(&text).map_err(|e| Failure::Config(format!("dtd `{}`: {e}", path.display())))
        }
        None => Ok(canonical_dtd()),
    }
}

fn schema_for(dtd: &DtdAst) -> Result<RelationalSchema, Failure> {
    let root = dtd
        .elements
        .keys()
        .next()
        .ok_or_else(|| Failure::Config("dtd declares no elements".into()))?;
    dtd_to_relational(dtd, root).map_err(config)
}

fn require<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, Failure> {
    value
        .as_deref()
        .ok_or_else(|| Failure::Config(format!("--{flag} is required for this command")))
}

fn require_db(args: &StageArgs) -> Result<&Path, Failure> {
    args.db
        .as_deref()
        .ok_or_else(|| Failure::Config("--db or COMPLEX_ETL_DB must point at the store".into()))
}

fn load_manifest(args: &StageArgs) -> Result<Manifest, Failure> {
    let path = require(&args.manifest, "manifest")?;
    Manifest::load(path).map_err(config)
}

fn open_store(path: &Path) -> Result<OdsHandle, Failure> {
    open_ods(path).map_err(config)
}

fn ensure_tables(schema: &RelationalSchema, ods: &OdsHandle) -> Result<(), Failure> {
    match create_schema(schema, ods.connection().map_err(config)?) {
        Ok(_) | Err(SchemaSqlError::TableExists(_)) => Ok(()),
        Err(e) => Err(config(e)),
    }
}

const PROMPTABLE: [&str; 5] = ["created", "modified", "language", "author", "description"];

/// Manual capture: ask for each optional attribute automatic extraction
/// left empty. Empty answers skip; closed input stops asking altogether.
fn prompt_missing(entries: &mut [ManifestEntry]) {
    let stdin = io::stdin();
    let mut lines = stdin.lock().lines();
    for entry in entries.iter_mut() {
        let Ok(found) = extract(entry) else {
            continue; // the real pass will report it
        };
        for name in PROMPTABLE {
            if found.get(name).is_some() {
                continue;
            }
            print!("{name} for {} (enter to skip): ", entry.path.display());
            let _ = io::stdout().flush();
            match lines.next() {
                Some(Ok(line)) => {
                    let line = line.trim();
                    if !line.is_empty() {
                        entry
                            .attributes
                            .insert(name.to_string(), AttrValue::Text(line.to_string()));
                    }
                }
                _ => return,
            }
        }
    }
}

pub fn run(args: &StageArgs) -> Result<(), Failure> {
    let mut manifest = load_manifest(args)?;
    let out = require(&args.out, "out")?;
    let db = require_db(args)?;
    let dtd = load_dtd(args)?;
    let schema = schema_for(&dtd)?;
    if args.interactive {
        prompt_missing(&mut manifest.entries);
    }

    let mut ods = open_store(db)?;
    ensure_tables(&schema, &ods)?;
    let base_id = ods.max_object_id().map_err(config)?;

    let platform = AgentPlatform::new();
    register_pipeline_agents(&platform);
    let report = run_pipeline(&platform, &manifest, &dtd, &mut ods).map_err(config)?;

    let xml_dir = out.join(XML_DIR);
    fs::create_dir_all(&xml_dir).map_err(config)?;
    fs::write(out.join("schema.sql"), ddl(&schema)).map_err(config)?;
    // The pure half once more, to leave the emitted XML on disk — the same
    // bytes the pipeline shredded, since these stages are deterministic.
    for item in prepare_all(&manifest.entries, base_id, &dtd, &schema)
        .into_iter()
        .flatten()
    {
        fs::write(
            xml_dir.join(xml_file_name(item.object_id)),
            write_xml(&item.document),
        )
        .map_err(config)?;
    }
    let json = serde_json::to_string_pretty(&report).map_err(config)?;
    fs::write(out.join("report.json"), json + "\n").map_err(config)?;

    render_report(&report, &manifest, base_id, args.verbose);
    if report.objects_failed > 0 {
        Err(Failure::Data(format!(
            "{} of {} sources failed",
            report.objects_failed,
            manifest.entries.len()
        )))
    } else {
        Ok(())
    }
}

fn render_report(report: &PipelineReport, manifest: &Manifest, base_id: u64, verbose: bool) {
    println!(
        "{} of {} sources loaded, {} failed",
        report.objects_processed,
        manifest.entries.len(),
        report.objects_failed
    );
    let counts: Vec<String> = STAGE_SERVICES
        .iter()
        .map(|s| format!("{s} {}", report.per_stage_counts[*s]))
        .collect();
    println!("stages: {}", counts.join(" | "));
    if verbose {
        for (index, entry) in manifest.entries.iter().enumerate() {
            let source = entry.path.display().to_string();
            if !report.failures.iter().any(|f| f.source == source) {
                println!("loaded {source} as object {}", base_id + 1 + index as u64);
            }
        }
    }
    for failure in &report.failures {
        println!(
            "failed {} at {}: {}",
            failure.source, failure.stage, failure.diagnostic
        );
    }
}

pub fn extract_stage(args: &StageArgs) -> Result<(), Failure> {
    let mut manifest = load_manifest(args)?;
    let out = require(&args.out, "out")?;
    if args.interactive {
        prompt_missing(&mut manifest.entries);
    }
    fs::create_dir_all(out).map_err(config)?;

    let mut records = Vec::new();
    let mut failed = 0usize;
    for (index, entry) in manifest.entries.iter().enumerate() {
        match extract(entry) {
            Ok(attributes) => {
                if args.verbose {
                    eprintln!("extracted {}", entry.path.display());
                }
                records.push(ExtractedRecord {
                    source: entry.path.display().to_string(),
                    object_id: index as u64 + 1,
                    attributes,
                });
            }
            Err(e) => {
                failed += 1;
                eprintln!("{e}");
            }
        }
    }
    let json = serde_json::to_string_pretty(&records).map_err(config)?;
    fs::write(out.join("attributes.json"), json + "\n").map_err(config)?;
    if failed > 0 {
        Err(Failure::Data(format!(
            "{failed} of {} sources failed extraction",
            manifest.entries.len()
        )))
    } else {
        Ok(())
    }
}

pub fn gen_xml(args: &StageArgs) -> Result<(), Failure> {
    let out = require(&args.out, "out")?;
    let dtd = load_dtd(args)?;
    let path = out.join("attributes.json");
    let text = fs::read_to_string(&path).map_err(|e| {
        Failure::Config(format!(
            "cannot read `{}` (run the extract stage first): {e}",
            path.display()
        ))
    })?;
    let records: Vec<ExtractedRecord> = serde_json::from_str(&text).map_err(config)?;
    let dir = out.join(XML_DIR);
    fs::create_dir_all(&dir).map_err(config)?;

    let mut failed = 0usize;
    for record in &records {
        let emitted = wrap(&record.attributes, record.object_id)
            .map_err(|e| e.to_string())
            .and_then(|object| emit_xml(&object, &dtd).map_err(|e| e.to_string()));
        match emitted {
            Ok(document) => {
                let file = dir.join(xml_file_name(record.object_id));
                fs::write(&file, write_xml(&document)).map_err(config)?;
                if args.verbose {
                    eprintln!("wrote {}", file.display());
                }
            }
            Err(e) => {
                failed += 1;
                eprintln!("{}: {e}", record.source);
            }
        }
    }
    if failed > 0 {
        Err(Failure::Data(format!(
            "{failed} of {} objects failed",
            records.len()
        )))
    } else {
        Ok(())
    }
}

pub fn dtd2sql(args: &StageArgs) -> Result<(), Failure> {
    let out = require(&args.out, "out")?;
    let dtd = load_dtd(args)?;
    let schema = schema_for(&dtd)?;
    fs::create_dir_all(out).map_err(config)?;
    let file = out.join("schema.sql");
    fs::write(&file, ddl(&schema)).map_err(config)?;
    if args.verbose {
        eprintln!("wrote {}", file.display());
    }
    Ok(())
}

pub fn shred_stage(args: &StageArgs) -> Result<(), Failure> {
    let out = require(&args.out, "out")?;
    let db = require_db(args)?;
    let dtd = load_dtd(args)?;
    let schema = schema_for(&dtd)?;
    let dir = out.join(XML_DIR);
    let mut files: Vec<PathBuf> = fs::read_dir(&dir)
        .map_err(|e| {
            Failure::Config(format!(
                "cannot list `{}` (run the gen-xml stage first): {e}",
                dir.display()
            ))
        })?
        .filter_map(Result::ok)
        .map(|entry| entry.path())
        .filter(|p| p.extension().is_some_and(|x| x == "xml"))
        .collect();
    files.sort();

    let mut ods = open_store(db)?;
    ensure_tables(&schema, &ods)?;
    let mut failed = 0usize;
    for file in &files {
        let source = file.display().to_string();
        match shred_one(file, &schema, &mut ods) {
            Ok(root_id) => {
                ods.record_load(&source, Some(root_id), LoadStatus::Loaded)
                    .map_err(config)?;
                if args.verbose {
                    eprintln!("loaded {source} as row {root_id}");
                }
            }
            Err(message) => {
                failed += 1;
                ods.record_load(&source, None, LoadStatus::Failed)
                    .map_err(config)?;
                eprintln!("{source}: {message}");
            }
        }
    }
    if failed > 0 {
        Err(Failure::Data(format!(
            "{failed} of {} documents failed",
            files.len()
        )))
    } else {
        Ok(())
    }
}

fn shred_one(file: &Path, schema: &RelationalSchema, ods: &mut OdsHandle) -> Result<u64, String> {
    let text = fs::read_to_string(file).map_err(|e| e.to_string())?;
    let document = read_xml(&text).map_err(|e| e.to_string())?;
    let report = validate_xml(&document, &schema.dtd);
    if !report.is_valid() {
        return Err(report.to_string());
    }
    let rows = shred(&document, schema).map_err(|e| e.to_string())?;
    let conn = ods.connection_mut().map_err(|e| e.to_string())?;
    let rebased = rebase(&rows, conn).map_err(|e| e.to_string())?;
    load(&rebased, schema, conn).map_err(|e| e.to_string())?;
    Ok(rebased.rows[0].id as u64)
}

pub fn reconstruct_stage(args: &StageArgs) -> Result<(), Failure> {
    let db = require_db(args)?;
    let dtd = load_dtd(args)?;
    let schema = schema_for(&dtd)?;
    let ods = open_store(db)?;
    let conn = ods.connection().map_err(config)?;
    let root = &schema.root_table().name;
    let ids: Vec<i64> = {
        let mut stmt = conn
            .prepare(&format!("SELECT \"id\" FROM \"{root}\" ORDER BY \"id\""))
            .map_err(|e| {
                Failure::Config(format!("`{}` is not a populated store: {e}", db.display()))
            })?;
        let mapped = stmt.query_map([], |row| row.get(0)).map_err(config)?;
        mapped.collect::<Result<_, _>>().map_err(config)?
    };

    let mut stdout = io::stdout().lock();
    for id in ids {
        let document = reconstruct(conn, &schema, id).map_err(|e| Failure::Data(e.to_string()))?;
        stdout
            .write_all(write_xml(&document).as_bytes())
            .map_err(config)?;
        if args.verbose {
            eprintln!("reconstructed root {id}");
        }
    }
    Ok(())
}
