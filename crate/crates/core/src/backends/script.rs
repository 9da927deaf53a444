//! Strict scripted doubles.
//!
//! A script is an ordered list of entries, each a request predicate plus a
//! canned response or fault. A request consumes the first unconsumed entry
//! whose predicate accepts it; a request that matches nothing is an error.

use std::collections::HashMap;
use std::sync::Mutex;

use super::{BackendError, ChatClient, ChatMessage, ChatParams, EmbeddingProvider, LeanClient};
use crate::types::Diagnostic;

type Predicate<Req> = Box<dyn Fn(&Req) -> bool + Send + Sync>;

struct Entry<Req, Resp> {
    matcher: Predicate<Req>,
    outcome: Result<Resp, BackendError>,
    used: bool,
}

/// Ordered (predicate, response-or-fault) list shared by the scripted clients.
pub struct ScriptedBehavior<Req, Resp> {
    entries: Mutex<Vec<Entry<Req, Resp>>>,
    log: Mutex<Vec<Req>>,
}

impl<Req: Clone, Resp: Clone> Default for ScriptedBehavior<Req, Resp> {
    fn default() -> Self {
        Self {
            entries: Mutex::new(Vec::new()),
            log: Mutex::new(Vec::new()),
        }
    }
}

impl<Req: Clone, Resp: Clone> ScriptedBehavior<Req, Resp> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn respond(
        self,
        matcher: impl Fn(&Req) -> bool + Send + Sync + 'static,
        response: Resp,
    ) -> Self {
        self.push(Box::new(matcher), Ok(response))
    }

    pub fn raise(
        self,
        matcher: impl Fn(&Req) -> bool + Send + Sync + 'static,
        fault: BackendError,
    ) -> Self {
        self.push(Box::new(matcher), Err(fault))
    }

    /// Entry that accepts the next request, whatever it is.
    pub fn then(self, response: Resp) -> Self {
        self.respond(|_| true, response)
    }

    pub fn then_raise(self, fault: BackendError) -> Self {
        self.raise(|_| true, fault)
    }

    fn push(self, matcher: Predicate<Req>, outcome: Result<Resp, BackendError>) -> Self {
        self.entries.lock().unwrap().push(Entry {
            matcher,
            outcome,
            used: false,
        });
        self
    }

    pub fn call(&self, request: Req, describe: impl FnOnce(&Req) -> String) -> Result<Resp, BackendError> {
        self.log.lock().unwrap().push(request.clone());
        let mut entries = self.entries.lock().unwrap();
        match entries.iter_mut().find(|e| !e.used && (e.matcher)(&request)) {
            Some(entry) => {
                entry.used = true;
                entry.outcome.clone()
            }
            None => Err(BackendError::UnexpectedRequest(describe(&request))),
        }
    }

    pub fn requests(&self) -> Vec<Req> {
        self.log.lock().unwrap().clone()
    }

    pub fn remaining(&self) -> usize {
        self.entries.lock().unwrap().iter().filter(|e| !e.used).count()
    }

    pub fn is_exhausted(&self) -> bool {
        self.remaining() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeanRequest {
    pub code: String,
    pub timeout_s: f64,
}

pub type ScriptedLean = ScriptedBehavior<LeanRequest, Vec<Diagnostic>>;

impl LeanClient for ScriptedLean {
    fn execute(&self, code: &str, timeout_s: f64) -> Result<Vec<Diagnostic>, BackendError> {
        let request = LeanRequest {
            code: code.to_string(),
            timeout_s,
        };
        self.call(request, |r| format!("lean file of {} lines", r.code.lines().count()))
    }
}

pub type ScriptedChat = ScriptedBehavior<Vec<ChatMessage>, String>;

impl ChatClient for ScriptedChat {
    fn chat(&self, messages: &[ChatMessage], _params: &ChatParams) -> Result<String, BackendError> {
        if messages.is_empty() {
            return Err(BackendError::Precondition("empty message list".into()));
        }
        self.call(messages.to_vec(), |m| {
            format!("chat request with {} messages", m.len())
        })
    }
}

/// Embedding double with a fixed text → vector table. Unknown texts fail.
#[derive(Debug, Default, Clone)]
pub struct ScriptedEmbedder {
    table: HashMap<String, Vec<f64>>,
}

impl ScriptedEmbedder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, text: impl Into<String>, vector: Vec<f64>) -> Self {
        self.table.insert(text.into(), vector);
        self
    }
}

impl EmbeddingProvider for ScriptedEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError> {
        let missing: Vec<usize> = texts
            .iter()
            .enumerate()
            .filter(|(_, t)| !self.table.contains_key(*t))
            .map(|(i, _)| i)
            .collect();
        if !missing.is_empty() {
            return Err(BackendError::ProviderFailure {
                indices: missing,
                message: "text not in script".into(),
            });
        }
        Ok(texts.iter().map(|t| self.table[t].clone()).collect())
    }
}
