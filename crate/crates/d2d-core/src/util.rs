//! Small shared helpers.

/// Longest prefix of `s` containing at most `max_chars` characters, cut on a
/// char boundary.
pub(crate) fn char_prefix(s: &str, max_chars: usize) -> &str {
    match s.char_indices().nth(max_chars) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

/// `s` clipped to `max_chars` characters with a trailing ellipsis when
/// anything was cut.
pub(crate) fn clip_with_ellipsis(s: &str, max_chars: usize) -> String {
    if s.chars().count() > max_chars {
        format!("{}…", char_prefix(s, max_chars))
    } else {
        s.to_string()
    }
}
