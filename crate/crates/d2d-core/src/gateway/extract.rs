//! Pulling the first JSON value out of free-form model text.

/// Extracts the first parseable JSON object or array from `text`.
///
/// Code fences are stripped first: if the text contains a ``` fence, only the
/// first fenced block is scanned. Within the scan region, candidate spans are
/// found by walking balanced braces/brackets with string-literal awareness;
/// the first span that parses is returned.
pub fn extract_first_json(text: &str) -> Option<serde_json::Value> {
    let region = fenced_block(text).unwrap_or(text);
    let bytes = region.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' || bytes[i] == b'[' {
            if let Some(end) = balanced_span_end(region, i) {
                if let Ok(v) = serde_json::from_str(&region[i..end]) {
                    return Some(v);
                }
            }
            // Unbalanced or unparseable from this opener; try the next one.
        }
        i += 1;
    }
    None
}

/// Content of the first ``` fenced block, tolerating a language tag after the
/// opening fence and a missing closing fence.
fn fenced_block(text: &str) -> Option<&str> {
    let start = text.find("```")?;
    let after = &text[start + 3..];
    // Skip an optional language word up to the first newline.
    let body_start = match after.find('\n') {
        Some(nl) if after[..nl].trim().chars().all(|c| c.is_alphanumeric()) => nl + 1,
        _ => 0,
    };
    let body = &after[body_start..];
    match body.find("```") {
        Some(end) => Some(&body[..end]),
        None => Some(body),
    }
}

/// Byte index one past the end of the balanced span opening at `start`.
fn balanced_span_end(s: &str, start: usize) -> Option<usize> {
    let bytes = s.as_bytes();
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(start) {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' | b'[' => depth += 1,
            b'}' | b']' => {
                depth = depth.saturating_sub(1);
                if depth == 0 {
                    return Some(i + 1);
                }
            }
            _ => {}
        }
    }
    None
}
