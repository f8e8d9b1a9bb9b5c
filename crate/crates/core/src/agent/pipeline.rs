//! Five-stage ETL run over the agent platform: extract → wrap → emit-xml →
//! shred → load, one conversation per manifest entry, supervised by an
//! orchestrator agent. A failure in any stage abandons only that source's
//! conversation; the rest keep flowing.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Mutex;
use std::thread;

use indexmap::IndexMap;
use rusqlite::Connection;
use serde::{Deserialize, Serialize};

use crate::dtd::DtdAst;
use crate::extract::{extract, Manifest};
use crate::model::wrap;
use crate::ods::{LoadStatus, OdsHandle};
use crate::rdb::{
    create_schema, dtd_to_relational, load, rebase, shred, RelationalSchema, SchemaSqlError,
};
use crate::xml::emit_xml;

use super::{
    AgentError, AgentId, AgentPlatform, MessageEnvelope, Performative, PipelinePayload,
    ServiceDescriptor,
};

/// The stage services, in pipeline order.
pub const STAGE_SERVICES: [&str; 5] = ["extract", "wrap", "emit-xml", "shred", "load"];

const ORCHESTRATOR: &str = "menu-agent";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureRecord {
    /// The manifest entry's path, as given.
    pub source: String,
    /// Which stage service reported the failure.
    pub stage: String,
    pub diagnostic: String,
}

impl std::fmt::Display for FailureRecord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}: {} failed: {}",
            self.source, self.stage, self.diagnostic
        )
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PipelineReport {
    pub objects_processed: u64,
    pub objects_failed: u64,
    /// How many objects completed each stage, keyed by service name.
    pub per_stage_counts: IndexMap<String, u64>,
    /// One record per failed source, in manifest order.
    pub failures: Vec<FailureRecord>,
}

/// Register the default worker for each stage service. Idempotent: agents
/// already present are left alone.
pub fn register_pipeline_agents(platform: &AgentPlatform) {
    let defaults = [
        ("data-agent", "extract"),
        ("wrapper-agent", "wrap"),
        ("xml-agent", "emit-xml"),
        ("shredder-agent", "shred"),
        ("loader-agent", "load"),
    ];
    for (agent, service) in defaults {
        match platform.register_agent(ServiceDescriptor::new(agent, [service])) {
            Ok(_) | Err(AgentError::DuplicateAgent(_)) => {}
            Err(e) => unreachable!("static descriptor rejected: {e}"),
        }
    }
}

struct RunContext<'a> {
    dtd: &'a DtdAst,
    schema: &'a RelationalSchema,
    sink: Mutex<&'a mut Connection>,
}

/// Drive every manifest entry through the five stages and into `ods`.
///
/// The first provider found for each service does that stage's work. Tables
/// for the document type are created on first use and reused afterwards, so
/// repeated runs against one store accumulate rows. Every entry ends up in
/// the store's registry, as `loaded` with its object id or as `failed`.
pub fn run_pipeline(
    platform: &AgentPlatform,
    manifest: &Manifest,
    dtd: &DtdAst,
    ods: &mut OdsHandle,
) -> Result<PipelineReport, AgentError> {
    let providers: Vec<AgentId> = STAGE_SERVICES
        .iter()
        .map(|service| {
            platform
                .directory_lookup(service)
                .into_iter()
                .next()
                .ok_or_else(|| AgentError::MissingAgent(service.to_string()))
        })
        .collect::<Result<_, _>>()?;

    let sink_err = |e: &dyn std::fmt::Display| AgentError::SinkUnavailable(e.to_string());
    let root =
        dtd.elements.keys().next().ok_or_else(|| {
            AgentError::SinkUnavailable("document type declares no elements".into())
        })?;
    let schema = dtd_to_relational(dtd, root).map_err(|e| sink_err(&e))?;
    match create_schema(&schema, ods.connection().map_err(|e| sink_err(&e))?) {
        Ok(_) | Err(SchemaSqlError::TableExists(_)) => {}
        Err(e) => return Err(sink_err(&e)),
    }
    let base_id = ods.max_object_id().map_err(|e| sink_err(&e))?;

    let orchestrator =
        match platform.register_agent(ServiceDescriptor::new(ORCHESTRATOR, ["supervision"])) {
            Ok(id) => id,
            Err(AgentError::DuplicateAgent(_)) => AgentId(ORCHESTRATOR.to_string()),
            Err(e) => return Err(e),
        };

    // Workers are spawned per distinct provider, not per stage, so one agent
    // advertising several services still drains one mailbox sequentially.
    let mut workers: Vec<AgentId> = Vec::new();
    for provider in &providers {
        if !workers.contains(provider) {
            workers.push(provider.clone());
        }
    }

    let (outcomes, per_stage_counts) = {
        let conn = ods.connection_mut().map_err(|e| sink_err(&e))?;
        let ctx = RunContext {
            dtd,
            schema: &schema,
            sink: Mutex::new(conn),
        };
        thread::scope(|scope| {
            for worker in &workers {
                let ctx = &ctx;
                let worker = worker.clone();
                let orchestrator = orchestrator.clone();
                scope.spawn(move || worker_loop(platform, &worker, &orchestrator, ctx));
            }
            let result = orchestrate(platform, &orchestrator, &providers, manifest, base_id);
            // Workers must be released even when orchestration bails out,
            // otherwise the scope would never join.
            for worker in &workers {
                let _ = platform.send(MessageEnvelope {
                    performative: Performative::Done,
                    sender: orchestrator.clone(),
                    receiver: worker.clone(),
                    conversation: u64::MAX,
                    payload: PipelinePayload::Nothing,
                });
            }
            result
        })?
    };

    let mut report = PipelineReport {
        per_stage_counts,
        ..PipelineReport::default()
    };
    for (index, outcome) in outcomes.iter().enumerate() {
        let source = manifest.entries[index].path.display().to_string();
        let object_id = base_id + 1 + index as u64;
        match outcome {
            Ok(()) => {
                report.objects_processed += 1;
                ods.record_load(&source, Some(object_id), LoadStatus::Loaded)
                    .map_err(|e| sink_err(&e))?;
            }
            Err(failure) => {
                report.objects_failed += 1;
                report.failures.push(failure.clone());
                ods.record_load(&source, None, LoadStatus::Failed)
                    .map_err(|e| sink_err(&e))?;
            }
        }
    }
    Ok(report)
}

type Outcome = Result<(), FailureRecord>;

fn orchestrate(
    platform: &AgentPlatform,
    orchestrator: &AgentId,
    providers: &[AgentId],
    manifest: &Manifest,
    base_id: u64,
) -> Result<(Vec<Outcome>, IndexMap<String, u64>), AgentError> {
    let total = manifest.entries.len();
    let mut per_stage: IndexMap<String, u64> =
        STAGE_SERVICES.iter().map(|s| (s.to_string(), 0)).collect();
    // stage last dispatched for each conversation, as an index into
    // STAGE_SERVICES; names the failing stage when a Failure comes back.
    let mut dispatched: Vec<usize> = vec![0; total];
    let mut outcomes: Vec<Option<Outcome>> = vec![None; total];
    // Shredded rows wait here until every earlier conversation has either
    // failed or had its own load dispatched: loads run in manifest order, so
    // the row ids a run assigns are reproducible.
    let mut pending_rows: Vec<Option<PipelinePayload>> = (0..total).map(|_| None).collect();
    let mut load_sent: Vec<bool> = vec![false; total];
    let mut next_load = 0usize;

    for (index, entry) in manifest.entries.iter().enumerate() {
        platform.send(MessageEnvelope {
            performative: Performative::Request,
            sender: orchestrator.clone(),
            receiver: providers[0].clone(),
            conversation: index as u64,
            payload: PipelinePayload::ExtractJob {
                entry: entry.clone(),
                object_id: base_id + 1 + index as u64,
            },
        })?;
    }

    let mut resolved = 0;
    while resolved < total {
        let envelope = platform.receive(orchestrator)?;
        let index = envelope.conversation as usize;
        if index >= total || outcomes[index].is_some() {
            continue;
        }
        let source = manifest.entries[index].path.display().to_string();
        let stage = STAGE_SERVICES[dispatched[index]].to_string();
        match envelope.performative {
            Performative::Failure => {
                let diagnostic = match envelope.payload {
                    PipelinePayload::Diagnostic(d) => d,
                    other => format!("malformed failure payload: {other:?}"),
                };
                outcomes[index] = Some(Err(FailureRecord {
                    source,
                    stage,
                    diagnostic,
                }));
                resolved += 1;
            }
            Performative::Inform => {
                *per_stage.get_mut(&stage).expect("known stage") += 1;
                match envelope.payload {
                    PipelinePayload::Nothing => {
                        outcomes[index] = Some(Ok(()));
                        resolved += 1;
                    }
                    payload @ (PipelinePayload::Attributes { .. }
                    | PipelinePayload::Object(_)
                    | PipelinePayload::Document(_)) => {
                        dispatched[index] += 1;
                        platform.send(MessageEnvelope {
                            performative: Performative::Request,
                            sender: orchestrator.clone(),
                            receiver: providers[dispatched[index]].clone(),
                            conversation: envelope.conversation,
                            payload,
                        })?;
                    }
                    payload @ PipelinePayload::Rows(_) => {
                        pending_rows[index] = Some(payload);
                    }
                    other => {
                        outcomes[index] = Some(Err(FailureRecord {
                            source,
                            stage,
                            diagnostic: format!("unexpected reply: {other:?}"),
                        }));
                        resolved += 1;
                    }
                }
            }
            // Stage agents never send requests back; drain anything stray.
            Performative::Request | Performative::Done => {}
        }

        while next_load < total {
            if outcomes[next_load].is_some() || load_sent[next_load] {
                next_load += 1;
                continue;
            }
            let Some(payload) = pending_rows[next_load].take() else {
                break;
            };
            dispatched[next_load] += 1;
            load_sent[next_load] = true;
            platform.send(MessageEnvelope {
                performative: Performative::Request,
                sender: orchestrator.clone(),
                receiver: providers[STAGE_SERVICES.len() - 1].clone(),
                conversation: next_load as u64,
                payload,
            })?;
            next_load += 1;
        }
    }

    let outcomes = outcomes
        .into_iter()
        .map(|o| o.expect("all conversations resolved"))
        .collect();
    Ok((outcomes, per_stage))
}

fn worker_loop(
    platform: &AgentPlatform,
    me: &AgentId,
    orchestrator: &AgentId,
    ctx: &RunContext<'_>,
) {
    loop {
        let envelope = match platform.receive(me) {
            Ok(e) => e,
            Err(_) => return, // deregistered mid-run
        };
        match envelope.performative {
            Performative::Done => return,
            Performative::Request => {
                let conversation = envelope.conversation;
                let outcome = catch_unwind(AssertUnwindSafe(|| handle(envelope.payload, ctx)))
                    .unwrap_or_else(|panic| Err(panic_text(&panic)));
                let reply = match outcome {
                    Ok(payload) => MessageEnvelope {
                        performative: Performative::Inform,
                        sender: me.clone(),
                        receiver: orchestrator.clone(),
                        conversation,
                        payload,
                    },
                    Err(diagnostic) => MessageEnvelope {
                        performative: Performative::Failure,
                        sender: me.clone(),
                        receiver: orchestrator.clone(),
                        conversation,
                        payload: PipelinePayload::Diagnostic(diagnostic),
                    },
                };
                let _ = platform.send(reply);
            }
            _ => {} // stage agents only act on requests
        }
    }
}

/// One stage's work, selected by what the request carries.
fn handle(payload: PipelinePayload, ctx: &RunContext<'_>) -> Result<PipelinePayload, String> {
    match payload {
        PipelinePayload::ExtractJob { entry, object_id } => {
            let set = extract(&entry).map_err(|e| e.to_string())?;
            Ok(PipelinePayload::Attributes { set, object_id })
        }
        PipelinePayload::Attributes { set, object_id } => {
            let obj = wrap(&set, object_id).map_err(|e| e.to_string())?;
            Ok(PipelinePayload::Object(Box::new(obj)))
        }
        PipelinePayload::Object(obj) => {
            let doc = emit_xml(&obj, ctx.dtd).map_err(|e| e.to_string())?;
            Ok(PipelinePayload::Document(Box::new(doc)))
        }
        PipelinePayload::Document(doc) => {
            let rows = shred(&doc, ctx.schema).map_err(|e| e.to_string())?;
            Ok(PipelinePayload::Rows(rows))
        }
        PipelinePayload::Rows(rows) => {
            // A panic mid-transaction rolls back on drop, so a poisoned lock
            // still guards a consistent connection; take it anyway.
            let mut guard = ctx
                .sink
                .lock()
                .unwrap_or_else(std::sync::PoisonError::into_inner);
            let conn: &mut Connection = &mut guard;
            let rebased = rebase(&rows, conn).map_err(|e| e.to_string())?;
            load(&rebased, ctx.schema, conn).map_err(|e| e.to_string())?;
            Ok(PipelinePayload::Nothing)
        }
        other => Err(format!("request carries no stage input: {other:?}")),
    }
}

fn panic_text(panic: &(dyn std::any::Any + Send)) -> String {
    if let Some(s) = panic.downcast_ref::<&str>() {
        format!("stage panicked: {s}")
    } else if let Some(s) = panic.downcast_ref::<String>() {
        format!("stage panicked: {s}")
    } else {
        "stage panicked".to_string()
    }
}
