//! Structured-output extraction and repair under 30 adversarial model
//! replies: fenced, prose-wrapped, truncated, scalar-only, wrong-typed,
//! over-propertied, or outright JSON-free. Every reply must either recover
//! to a schema-valid value in the observed number of calls or fail with a
//! structured error after exactly the configured attempts — and no code
//! path may ever hand back a schema-invalid value.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};

use d2d_core::gateway::{
    ChatMessage, ChatRequest, ChatResponse, Gateway, GatewayConfig, GatewayError, GatewayMode,
    Transport, TransportError,
};
use serde_json::{json, Value};

/// Scripted transport that also records every request it sees, so tests can
/// count calls and inspect repair exchanges.
struct Recorder {
    replies: Mutex<VecDeque<String>>,
    requests: Mutex<Vec<ChatRequest>>,
}

impl Recorder {
    fn new(replies: &[&str]) -> Arc<Self> {
        Arc::new(Recorder {
            replies: Mutex::new(replies.iter().map(|s| s.to_string()).collect()),
            requests: Mutex::new(Vec::new()),
        })
    }

    fn calls(&self) -> usize {
        self.requests.lock().unwrap().len()
    }

    fn request(&self, i: usize) -> ChatRequest {
        self.requests.lock().unwrap()[i].clone()
    }
}

impl Transport for Recorder {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, TransportError> {
        self.requests.lock().unwrap().push(request.clone());
        let text = self
            .replies
            .lock()
            .unwrap()
            .pop_front()
            .expect("adversarial script exhausted: unexpected extra call");
        Ok(ChatResponse::text_only(text))
    }
}

fn schema() -> Value {
    json!({
        "type": "object",
        "required": ["name", "count"],
        "properties": {
            "name": {"type": "string"},
            "count": {"type": "integer"}
        },
        "additionalProperties": false
    })
}

fn run(transport: Arc<Recorder>) -> Result<Value, GatewayError> {
    let gw = Gateway::new(
        GatewayConfig { mode: GatewayMode::Live, backoff_base_ms: 0, ..Default::default() },
        Some(transport),
    )
    .unwrap();
    let req = ChatRequest::new(
        "test-model",
        vec![ChatMessage::user("emit the object")],
        0.2,
    );
    gw.complete_structured(&req, &schema())
}

const GOOD: &str = r#"{"name": "fixed", "count": 7}"#;

#[test]
fn criterion_9_structured_output_contract_survives_adversarial_replies() {
    // (a) Replies that must recover on the first call, no repair exchange.
    let recoverable: Vec<(&str, String, Value)> = vec![
        ("plain object", r#"{"name": "a", "count": 1}"#.into(), json!({"name": "a", "count": 1})),
        (
            "fenced with language tag",
            format!("```json\n{}\n```", r#"{"name": "b", "count": 2}"#),
            json!({"name": "b", "count": 2}),
        ),
        (
            "fenced without language tag",
            format!("```\n{}\n```", r#"{"name": "c", "count": 3}"#),
            json!({"name": "c", "count": 3}),
        ),
        (
            "fence never closed",
            format!("```json\n{}", r#"{"name": "d", "count": 4}"#),
            json!({"name": "d", "count": 4}),
        ),
        (
            "prose before",
            format!("Sure — here is the JSON you asked for: {}", r#"{"name": "e", "count": 5}"#),
            json!({"name": "e", "count": 5}),
        ),
        (
            "prose on both sides",
            format!("Answer: {} — hope that helps!", r#"{"name": "f", "count": 6}"#),
            json!({"name": "f", "count": 6}),
        ),
        (
            "braces inside string values",
            r#"{"name": "curly } brace { test", "count": 8}"#.into(),
            json!({"name": "curly } brace { test", "count": 8}),
        ),
        (
            "escaped quotes inside strings",
            r#"{"name": "she said \"hi\"", "count": 9}"#.into(),
            json!({"name": "she said \"hi\"", "count": 9}),
        ),
        (
            "first of two values wins",
            r#"{"name": "first", "count": 1} and also {"name": "other", "count": 9}"#.into(),
            json!({"name": "first", "count": 1}),
        ),
        (
            "unparseable candidate skipped",
            r#"attempt {not valid json} then {"name": "ok", "count": 4}"#.into(),
            json!({"name": "ok", "count": 4}),
        ),
        (
            "pretty-printed multiline",
            "{\n  \"name\": \"multi\",\n  \"count\": 11\n}".into(),
            json!({"name": "multi", "count": 11}),
        ),
        (
            "digits in prose are not candidates",
            format!("I rate it 9/10. {}", r#"{"name": "g", "count": 10}"#),
            json!({"name": "g", "count": 10}),
        ),
        (
            "fenced with trailing chatter",
            format!("Here you go:\n```json\n{}\n```\nLet me know.", r#"{"name": "h", "count": 12}"#),
            json!({"name": "h", "count": 12}),
        ),
        (
            "unicode content",
            r#"{"name": "café ❤", "count": 13}"#.into(),
            json!({"name": "café ❤", "count": 13}),
        ),
    ];

    // (b) First replies that must trigger exactly one repair exchange.
    let repairable: Vec<(&str, &str)> = vec![
        ("truncated mid-object", r#"{"name": "a", "count":"#),
        ("no JSON at all", "I cannot produce JSON right now."),
        ("bare scalar", "42"),
        ("bare quoted string", "\"name\""),
        ("wrong type for count", r#"{"name": "a", "count": "three"}"#),
        ("missing required field", r#"{"name": "a"}"#),
        ("extra property", r#"{"name": "a", "count": 1, "extra": true}"#),
        ("array instead of object", r#"[{"name": "a", "count": 1}]"#),
        ("null count", r#"{"name": "a", "count": null}"#),
        ("fractional count", r#"{"name": "a", "count": 1.5}"#),
        ("boolean name", r#"{"name": true, "count": 1}"#),
        ("empty object", "{}"),
        ("truncated inside a fence", "```json\n{\"name\": \"a\""),
        ("first candidate invalid", r#"{"count": 1} or maybe {"name": "z", "count": 2}"#),
    ];

    // (c) Scripts that never produce anything valid.
    let hopeless: Vec<(&str, [&str; 3])> = vec![
        ("stubborn prose", ["no", "still no", "absolutely not"]),
        (
            "stubborn wrong type",
            [
                r#"{"name": "a", "count": "x"}"#,
                r#"{"name": "b", "count": "y"}"#,
                r#"{"name": "c", "count": "z"}"#,
            ],
        ),
    ];

    assert_eq!(
        recoverable.len() + repairable.len() + hopeless.len(),
        30,
        "the adversarial corpus holds exactly 30 first replies"
    );

    // Independent re-validation of every recovered value.
    let compiled = jsonschema::JSONSchema::compile(&schema()).unwrap();

    for (label, reply, expected) in &recoverable {
        let t = Recorder::new(&[reply]);
        let value = run(Arc::clone(&t)).unwrap_or_else(|e| panic!("{label}: {e}"));
        assert_eq!(&value, expected, "{label}: extracted value");
        assert_eq!(t.calls(), 1, "{label}: no repair for a recoverable reply");
        assert!(compiled.is_valid(&value), "{label}: returned value must be schema-valid");
    }

    for (label, bad) in &repairable {
        let t = Recorder::new(&[bad, GOOD]);
        let value = run(Arc::clone(&t)).unwrap_or_else(|e| panic!("{label}: {e}"));
        assert_eq!(value, json!({"name": "fixed", "count": 7}), "{label}: repaired value");
        assert_eq!(t.calls(), 2, "{label}: exactly one repair exchange");
        assert!(compiled.is_valid(&value), "{label}: returned value must be schema-valid");

        // The repair request quotes the failure and keeps the conversation.
        let second = t.request(1);
        assert_eq!(second.messages.len(), 3, "{label}: base user + assistant echo + repair");
        assert_eq!(second.messages[1].content, *bad, "{label}: assistant turn echoes the reply");
        let repair = &second.messages[2].content;
        assert!(
            repair.starts_with("That reply was not valid: "),
            "{label}: repair preamble, got {repair:?}"
        );
        assert!(
            repair.ends_with(
                "Respond again with a single JSON value conforming to the required schema, \
                 and no surrounding text."
            ),
            "{label}: repair instruction, got {repair:?}"
        );
    }

    for (label, script) in &hopeless {
        let t = Recorder::new(script);
        let err = run(Arc::clone(&t)).expect_err(label);
        let GatewayError::Structured(e) = err else {
            panic!("{label}: expected a structured failure, got {err:?}");
        };
        assert_eq!(e.attempts, 3, "{label}: default budget is three attempts");
        assert_eq!(e.errors_per_attempt.len(), 3, "{label}: errors recorded per attempt");
        assert!(
            e.errors_per_attempt.iter().all(|v| !v.is_empty()),
            "{label}: every attempt carries at least one error"
        );
        assert_eq!(t.calls(), 3, "{label}: one call per attempt");
    }

    // Error taxonomy spot checks: JSON-free replies get the fixed sentinel
    // line, schema violations get pointer-prefixed lines.
    let t = Recorder::new(&["no", "still no", "absolutely not"]);
    let GatewayError::Structured(e) = run(t).unwrap_err() else { unreachable!() };
    for v in &e.errors_per_attempt {
        assert_eq!(v, &vec!["no JSON value found in response".to_string()]);
    }

    let t = Recorder::new(&[
        r#"{"name": "a", "count": "x"}"#,
        r#"{"name": "b", "count": "y"}"#,
        r#"{"name": "c", "count": "z"}"#,
    ]);
    let GatewayError::Structured(e) = run(t).unwrap_err() else { unreachable!() };
    for v in &e.errors_per_attempt {
        assert!(
            v.iter().all(|line| line.starts_with("/count: ")),
            "pointer-prefixed violation lines, got {v:?}"
        );
    }
}
