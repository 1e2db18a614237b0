//! Text chunking and component tagging for ingested files.
//!
//! Chunks are cut by character count with no overlap so that concatenating a
//! file's chunks reproduces the original text byte for byte. When a window
//! contains a newline the cut lands just after the last one, keeping lines
//! intact where possible; the newline stays with the earlier chunk.

use crate::spe::TargetSystem;
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::sync::LazyLock;

/// Which pipeline component a chunk appears to describe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentTag {
    Source,
    Operator,
    Sink,
    Doc,
    Other,
}

/// Split `text` into chunks of at most `chunk_size` characters.
///
/// Empty input produces no chunks; everything else produces at least one,
/// and no chunk is ever empty.
pub fn chunk_text(text: &str, chunk_size: usize) -> Vec<String> {
    assert!(chunk_size > 0, "chunk size must be positive");
    let mut chunks = Vec::new();
    let mut rest = text;
    while !rest.is_empty() {
        // Byte offset of the first character past the window; when the rest
        // fits entirely it becomes the final chunk.
        let window_end = match rest.char_indices().nth(chunk_size) {
            Some((i, _)) => i,
            None => {
                chunks.push(rest.to_string());
                break;
            }
        };
        let window = &rest[..window_end];
        let cut = match window.rfind('\n') {
            Some(nl) => nl + 1,
            None => window_end,
        };
        chunks.push(rest[..cut].to_string());
        rest = &rest[cut..];
    }
    chunks
}

const SOURCE_WORDS: [&str; 2] = ["source", "connector"];
const SINK_WORDS: [&str; 1] = ["sink"];
const OPERATOR_WORDS: [&str; 3] = ["operator", "process", "transform"];

fn match_words(haystack: &str, words: &[&str]) -> bool {
    words.iter().any(|w| haystack.contains(w))
}

/// Classify a file into a component tag: markdown is documentation, then the
/// path decides, then the content, and anything unrecognised is `Other`.
pub fn component_tag(path: &str, content: &str) -> ComponentTag {
    let path_lower = path.to_lowercase();
    if path_lower.ends_with(".md") {
        return ComponentTag::Doc;
    }
    for (words, tag) in [
        (&SOURCE_WORDS[..], ComponentTag::Source),
        (&SINK_WORDS[..], ComponentTag::Sink),
        (&OPERATOR_WORDS[..], ComponentTag::Operator),
    ] {
        if match_words(&path_lower, words) {
            return tag;
        }
    }
    let content_lower = content.to_lowercase();
    for (words, tag) in [
        (&SOURCE_WORDS[..], ComponentTag::Source),
        (&SINK_WORDS[..], ComponentTag::Sink),
        (&OPERATOR_WORDS[..], ComponentTag::Operator),
    ] {
        if match_words(&content_lower, words) {
            return tag;
        }
    }
    ComponentTag::Other
}

static VERSION_PATTERN: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)(?:flink|storm|spark)[-_/](\d+(?:\.\d+)+)").expect("version pattern")
});

/// Pull a stream-processing-engine version out of a path like
/// `repos/flink-1.17/...` when one is present.
pub fn spe_version(path: &str) -> Option<String> {
    VERSION_PATTERN.captures(path).map(|c| c[1].to_string())
}

/// Which target systems a file plausibly concerns. Files naming a specific
/// engine in their path or content index under that engine alone; files
/// naming none are generic and index under every configured system.
pub fn systems_for(path: &str, content: &str, configured: &[TargetSystem]) -> Vec<TargetSystem> {
    let path_lower = path.to_lowercase();
    let content_lower = content.to_lowercase();
    let mentioned: Vec<TargetSystem> = configured
        .iter()
        .copied()
        .filter(|s| path_lower.contains(s.name()) || content_lower.contains(s.name()))
        .collect();
    if mentioned.is_empty() {
        configured.to_vec()
    } else {
        mentioned
    }
}
