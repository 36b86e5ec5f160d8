//! Deterministic tweet text normalization.

use std::sync::OnceLock;

use regex::Regex;
use unicode_normalization::UnicodeNormalization;

/// Upper bound on stored text length, in characters.
pub const MAX_TEXT_CHARS: usize = 512;

pub const URL_TOKEN: &str = "HTTPURL";
pub const MENTION_TOKEN: &str = "@USER";

static URL_RE: OnceLock<Regex> = OnceLock::new();
static MENTION_RE: OnceLock<Regex> = OnceLock::new();
static WHITESPACE_RE: OnceLock<Regex> = OnceLock::new();

fn url_re() -> &'static Regex {
    URL_RE.get_or_init(|| Regex::new(r"(?i)\b(?:https?://|www\.)\S+").expect("url regex"))
}

fn mention_re() -> &'static Regex {
    MENTION_RE.get_or_init(|| Regex::new(r"@\w+").expect("mention regex"))
}

fn whitespace_re() -> &'static Regex {
    WHITESPACE_RE.get_or_init(|| Regex::new(r"\s+").expect("whitespace regex"))
}

/// NFC, then URLs to `HTTPURL`, mentions to `@USER`, whitespace runs to a
/// single space, trim. Emoji pass through untouched.
pub fn normalize_text(raw: &str) -> String {
    let composed: String = raw.nfc().collect();
    let text = url_re().replace_all(&composed, URL_TOKEN);
    let text = mention_re().replace_all(&text, MENTION_TOKEN);
    let text = whitespace_re().replace_all(&text, " ");
    text.trim().to_string()
}

/// [`normalize_text`] followed by the [`MAX_TEXT_CHARS`] cap.
pub fn clean_text(raw: &str) -> String {
    let normalized = normalize_text(raw);
    match normalized.char_indices().nth(MAX_TEXT_CHARS) {
        Some((cut, _)) => normalized[..cut].trim_end().to_string(),
        None => normalized,
    }
}
