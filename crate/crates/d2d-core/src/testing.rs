//! Deterministic offline transports for tests and cassette fixture
//! generation. Not used by production code paths.

use std::collections::{BTreeMap, VecDeque};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use crate::gateway::transport::{Transport, TransportError};
use crate::gateway::types::{ChatRequest, ChatResponse};

/// Wraps a closure as a transport.
pub struct ResponderTransport<F>(pub F);

impl<F> Transport for ResponderTransport<F>
where
    F: Fn(&ChatRequest) -> Result<ChatResponse, TransportError> + Send + Sync,
{
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, TransportError> {
        (self.0)(request)
    }
}

pub fn responder<F>(f: F) -> Arc<dyn Transport>
where
    F: Fn(&ChatRequest) -> Result<ChatResponse, TransportError> + Send + Sync + 'static,
{
    Arc::new(ResponderTransport(f))
}

/// Replies with a fixed queue of results, in order. Panics when exhausted —
/// a test that sends more requests than it scripted is broken.
pub struct ScriptedTransport {
    queue: Mutex<VecDeque<Result<ChatResponse, TransportError>>>,
}

impl ScriptedTransport {
    pub fn new(replies: impl IntoIterator<Item = Result<ChatResponse, TransportError>>) -> Arc<Self> {
        Arc::new(ScriptedTransport { queue: Mutex::new(replies.into_iter().collect()) })
    }

    pub fn texts(texts: impl IntoIterator<Item = &'static str>) -> Arc<Self> {
        Self::new(texts.into_iter().map(|t| Ok(ChatResponse::text_only(t))))
    }

    pub fn remaining(&self) -> usize {
        self.queue.lock().unwrap().len()
    }
}

impl Transport for ScriptedTransport {
    fn send(&self, _request: &ChatRequest) -> Result<ChatResponse, TransportError> {
        self.queue
            .lock()
            .unwrap()
            .pop_front()
            .expect("scripted transport exhausted: more requests sent than scripted")
    }
}

/// Delegates to an inner transport while counting calls per schema tag.
pub struct CountingTransport {
    inner: Arc<dyn Transport>,
    counts: Mutex<BTreeMap<String, usize>>,
    total: AtomicUsize,
}

impl CountingTransport {
    pub fn wrap(inner: Arc<dyn Transport>) -> Arc<Self> {
        Arc::new(CountingTransport { inner, counts: Mutex::new(BTreeMap::new()), total: AtomicUsize::new(0) })
    }

    pub fn total(&self) -> usize {
        self.total.load(Ordering::SeqCst)
    }

    /// Calls whose request carried this schema tag ("-" for untagged).
    pub fn count(&self, tag: &str) -> usize {
        *self.counts.lock().unwrap().get(tag).unwrap_or(&0)
    }
}

impl Transport for CountingTransport {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, TransportError> {
        let tag = request.schema_tag.clone().unwrap_or_else(|| "-".to_string());
        *self.counts.lock().unwrap().entry(tag).or_insert(0) += 1;
        self.total.fetch_add(1, Ordering::SeqCst);
        self.inner.send(request)
    }
}

/// Fails the first `n` sends with HTTP 500, then delegates.
pub struct FailingTransport {
    failures_left: AtomicUsize,
    inner: Arc<dyn Transport>,
}

impl FailingTransport {
    pub fn new(failures: usize, inner: Arc<dyn Transport>) -> Arc<Self> {
        Arc::new(FailingTransport { failures_left: AtomicUsize::new(failures), inner })
    }
}

impl Transport for FailingTransport {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, TransportError> {
        let left = self.failures_left.load(Ordering::SeqCst);
        if left > 0 {
            self.failures_left.store(left - 1, Ordering::SeqCst);
            return Err(TransportError::Http { status: 500, body: "simulated outage".into() });
        }
        self.inner.send(request)
    }
}

/// A transport that must never be reached; panics on use.
pub struct PanicTransport;

impl Transport for PanicTransport {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, TransportError> {
        panic!(
            "network transport reached in an offline test (schema_tag={:?})",
            request.schema_tag
        );
    }
}
