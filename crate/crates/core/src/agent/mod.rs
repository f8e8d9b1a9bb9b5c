//! In-process actor platform: named agents advertise services through a
//! directory, exchange typed envelopes through unbounded mailboxes, and a
//! supervising orchestrator drives the ETL stages over them.
//!
//! Delivery guarantee: for any (sender, receiver) pair, messages arrive in
//! send order. Each agent drains its mailbox strictly sequentially;
//! different agents run concurrently.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::sync::{Arc, Condvar, Mutex};

use thiserror::Error;

use crate::extract::ManifestEntry;
use crate::model::{AttributeSet, ComplexObject};
use crate::rdb::RowSet;
use crate::xml::XmlDocument;

mod pipeline;

pub use pipeline::{
    register_pipeline_agents, run_pipeline, FailureRecord, PipelineReport, STAGE_SERVICES,
};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AgentId(String);

impl AgentId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Performative {
    Request,
    Inform,
    Failure,
    Done,
}

/// What an envelope carries. Job payloads keep the assigned object id with
/// them so stage workers stay stateless.
#[derive(Debug, Clone, PartialEq)]
pub enum PipelinePayload {
    ExtractJob {
        entry: ManifestEntry,
        object_id: u64,
    },
    Attributes {
        set: AttributeSet,
        object_id: u64,
    },
    Object(Box<ComplexObject>),
    Document(Box<XmlDocument>),
    Rows(RowSet),
    Report(PipelineReport),
    Diagnostic(String),
    Nothing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MessageEnvelope {
    pub performative: Performative,
    pub sender: AgentId,
    pub receiver: AgentId,
    /// Correlates every message belonging to one source's conversation.
    pub conversation: u64,
    pub payload: PipelinePayload,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceDescriptor {
    pub agent: String,
    pub services: Vec<String>,
}

impl ServiceDescriptor {
    pub fn new<S: Into<String>, I: IntoIterator<Item = S>>(agent: &str, services: I) -> Self {
        ServiceDescriptor {
            agent: agent.to_string(),
            services: services.into_iter().map(Into::into).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeliveryReceipt {
    pub receiver: AgentId,
    /// 1-based depth of the mailbox right after enqueueing.
    pub queue_position: usize,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AgentError {
    #[error("agent `{0}` is already registered")]
    DuplicateAgent(String),
    #[error("invalid service descriptor: {0}")]
    InvalidDescriptor(String),
    #[error("no agent named `{0}` to receive the message")]
    UnknownReceiver(String),
    #[error("no agent named `{0}`")]
    UnknownAgent(String),
    #[error("invalid envelope: {0}")]
    InvalidEnvelope(String),
    #[error("no provider registered for service `{0}`")]
    MissingAgent(String),
    #[error("sink unavailable: {0}")]
    SinkUnavailable(String),
}

#[derive(Default)]
struct Mailbox {
    queue: Mutex<VecDeque<MessageEnvelope>>,
    available: Condvar,
}

#[derive(Default)]
struct Inner {
    /// Registration order matters: lookups report providers in it.
    directory: Mutex<Vec<(AgentId, Vec<String>)>>,
    mailboxes: Mutex<HashMap<AgentId, Arc<Mailbox>>>,
}

/// Cloning the platform hands out another handle to the same directory and
/// mailboxes; handles are safe to share across threads.
#[derive(Clone, Default)]
pub struct AgentPlatform {
    inner: Arc<Inner>,
}

impl AgentPlatform {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register_agent(&self, descriptor: ServiceDescriptor) -> Result<AgentId, AgentError> {
        if descriptor.agent.is_empty() {
            return Err(AgentError::InvalidDescriptor("agent name is empty".into()));
        }
        if descriptor.services.is_empty() {
            return Err(AgentError::InvalidDescriptor(format!(
                "agent `{}` advertises no services",
                descriptor.agent
            )));
        }
        let id = AgentId(descriptor.agent.clone());
        let mut directory = self.inner.directory.lock().unwrap();
        if directory.iter().any(|(existing, _)| existing == &id) {
            return Err(AgentError::DuplicateAgent(descriptor.agent));
        }
        directory.push((id.clone(), descriptor.services));
        self.inner
            .mailboxes
            .lock()
            .unwrap()
            .insert(id.clone(), Arc::new(Mailbox::default()));
        Ok(id)
    }

    /// Remove an agent from the directory and drop its mailbox, undelivered
    /// messages included. Returns whether the agent existed.
    pub fn deregister_agent(&self, name: &str) -> bool {
        let mut directory = self.inner.directory.lock().unwrap();
        let before = directory.len();
        directory.retain(|(id, _)| id.as_str() != name);
        let existed = directory.len() < before;
        if existed {
            self.inner
                .mailboxes
                .lock()
                .unwrap()
                .remove(&AgentId(name.to_string()));
        }
        existed
    }

    /// Agents advertising `service`, in registration order.
    pub fn directory_lookup(&self, service: &str) -> Vec<AgentId> {
        self.inner
            .directory
            .lock()
            .unwrap()
            .iter()
            .filter(|(_, services)| services.iter().any(|s| s == service))
            .map(|(id, _)| id.clone())
            .collect()
    }

    pub fn send(&self, envelope: MessageEnvelope) -> Result<DeliveryReceipt, AgentError> {
        if envelope.sender == envelope.receiver {
            return Err(AgentError::InvalidEnvelope(format!(
                "agent `{}` may not message itself",
                envelope.sender
            )));
        }
        if envelope.performative == Performative::Failure {
            match &envelope.payload {
                PipelinePayload::Diagnostic(d) if !d.is_empty() => {}
                _ => {
                    return Err(AgentError::InvalidEnvelope(
                        "failure without a diagnostic".into(),
                    ))
                }
            }
        }
        let mailbox = self
            .inner
            .mailboxes
            .lock()
            .unwrap()
            .get(&envelope.receiver)
            .cloned()
            .ok_or_else(|| AgentError::UnknownReceiver(envelope.receiver.to_string()))?;
        let receiver = envelope.receiver.clone();
        let mut queue = mailbox.queue.lock().unwrap();
        queue.push_back(envelope);
        let queue_position = queue.len();
        drop(queue);
        mailbox.available.notify_one();
        Ok(DeliveryReceipt {
            receiver,
            queue_position,
        })
    }

    /// Block until the agent's next envelope arrives.
    pub fn receive(&self, agent: &AgentId) -> Result<MessageEnvelope, AgentError> {
        let mailbox = self
            .inner
            .mailboxes
            .lock()
            .unwrap()
            .get(agent)
            .cloned()
            .ok_or_else(|| AgentError::UnknownAgent(agent.to_string()))?;
        let mut queue = mailbox.queue.lock().unwrap();
        loop {
            if let Some(envelope) = queue.pop_front() {
                return Ok(envelope);
            }
            queue = mailbox.available.wait(queue).unwrap();
        }
    }

    pub fn try_receive(&self, agent: &AgentId) -> Result<Option<MessageEnvelope>, AgentError> {
        let mailbox = self
            .inner
            .mailboxes
            .lock()
            .unwrap()
            .get(agent)
            .cloned()
            .ok_or_else(|| AgentError::UnknownAgent(agent.to_string()))?;
        let envelope = mailbox.queue.lock().unwrap().pop_front();
        Ok(envelope)
    }
}
