//! Parameter extraction from natural-language pipeline requests.
//!
//! Every field is optional: a partial request simply leaves fields unset, and
//! downstream stages decide what to do about the gaps (ask, default, or note
//! them in the output). Extraction is pure regex over the normalized query —
//! no provider round-trips — so it is fast and fully deterministic. The
//! patterns are tuned for the phrasing people actually use ("30-second
//! tumbling windows", "parallelism: 4 for source", "checkpoint every 10
//! seconds") rather than any fixed grammar.

use crate::spe::TargetSystem;
use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::LazyLock;

/// Everything the extractor can pull out of a request. Missing information
/// stays `None`; serialization skips unset fields so saved analyses only
/// show what was actually said.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineParameters {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_system: Option<TargetSystem>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source_kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source_topic: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bootstrap_servers: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub consumer_group: Option<String>,
    /// Literal split pattern, e.g. `\s+` for whitespace.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split_pattern: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lowercase: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_word_length: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_seconds: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_format: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source_parallelism: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub processing_parallelism: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sink_parallelism: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint_interval_ms: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state_backend: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dlq_topic: Option<String>,
    /// Anything noteworthy that has no dedicated field (e.g. delivery
    /// semantics), as key/value pairs.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extras: BTreeMap<String, String>,
}

impl PipelineParameters {
    /// Count of populated dedicated fields (extras excluded). A rough
    /// completeness signal for complexity scoring and logging.
    pub fn populated(&self) -> usize {
        [
            self.target_system.is_some(),
            self.source_kind.is_some(),
            self.source_topic.is_some(),
            self.bootstrap_servers.is_some(),
            self.consumer_group.is_some(),
            self.split_pattern.is_some(),
            self.lowercase.is_some(),
            self.min_word_length.is_some(),
            self.window_seconds.is_some(),
            self.window_kind.is_some(),
            self.output_path.is_some(),
            self.output_format.is_some(),
            self.source_parallelism.is_some(),
            self.processing_parallelism.is_some(),
            self.sink_parallelism.is_some(),
            self.checkpoint_interval_ms.is_some(),
            self.state_backend.is_some(),
            self.dlq_topic.is_some(),
        ]
        .iter()
        .filter(|b| **b)
        .count()
    }
}

/// Normalize a raw query: straighten curly quotes, collapse runs of
/// whitespace, trim. Everything downstream (patterns, prompts, hashing)
/// sees only this form.
pub fn normalize_query(raw: &str) -> String {
    let straightened: String = raw
        .chars()
        .map(|c| match c {
            '\u{201c}' | '\u{201d}' | '\u{201e}' | '\u{00ab}' | '\u{00bb}' => '"',
            '\u{2018}' | '\u{2019}' => '\'',
            '\u{2265}' => '≥',
            _ => c,
        })
        .collect();
    straightened.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn re(pattern: &str) -> Regex {
    RegexBuilder::new(pattern).case_insensitive(true).build().expect("extraction pattern compiles")
}

struct Patterns {
    quoted_topic: Regex,
    bare_topic: Regex,
    bootstrap: Regex,
    group: Regex,
    split_regex_literal: Regex,
    split_word: Regex,
    lowercase: Regex,
    min_length: [Regex; 4],
    window: [Regex; 3],
    path: [Regex; 2],
    format: [Regex; 2],
    parallel_for: Regex,
    parallel_named: Regex,
    checkpoint: Regex,
    backend: [Regex; 2],
    dlq_near: Regex,
    exactly_once: Regex,
}

static P: LazyLock<Patterns> = LazyLock::new(|| Patterns {
    quoted_topic: re(r#"topics?\s*:?\s*"([^"]+)"|topics?\s*:?\s*'([^']+)'"#),
    // Unquoted topic names must start lowercase (bullet labels and sentence
    // starts are capitalized) and not be a connective.
    bare_topic: re(r"topics?\s+(?:named\s+|called\s+)?([a-z0-9][A-Za-z0-9._-]*)"),
    bootstrap: re(r"(?:bootstrap\s+servers?|brokers?)\s*[:=]?\s*([\w.-]+:\d{2,5}(?:\s*,\s*[\w.-]+:\d{2,5})*)"),
    // "group" alone is too ambiguous (it appears inside many topic names);
    // require the "consumer group" or "group id" phrasing.
    group: re(r#"(?:consumer\s+group|group\s+id)\s*[:=]?\s*"?([a-z0-9][\w.-]*)"?"#),
    split_regex_literal: re(r#"regex\s*:?\s*"([^"]+)""#),
    split_word: re(r"split(?:ting)?[^.;]*?\bby\s+(whitespace|white\s+space|spaces?|commas?|tabs?|newlines?)"),
    lowercase: re(r"lower\s*-?\s*cas(?:e|ed|ing)"),
    min_length: [
        re(r"length\s*(?:>=|≥)\s*(\d+)"),
        re(r"length\s+(?:of\s+)?at\s+least\s+(\d+)"),
        re(r"at\s+least\s+(\d+)\s+(?:characters|chars|letters)"),
        re(r"(\d+)\s*(?:or\s+more|\+)\s*(?:characters|chars|letters)"),
    ],
    window: [
        re(r"(\d+)[-\s]second\s+(tumbling|sliding|session)?\s*windows?"),
        re(r"windows?\s+of\s+(\d+)\s+seconds?"),
        re(r"(?:aggregate|aggregat\w+|window\w*)[^.;]{0,40}?\bevery\s+(\d+)\s+seconds?"),
    ],
    path: [
        // Paths with an extension, optionally absolute.
        re(r"(?:file(?:\s+system)?|output|write|sink)\s*:?\s*(?:at|to|into)?\s*((?:/[\w.-]+)*/?[\w-]+\.\w+)"),
        // Bare absolute paths anywhere.
        re(r"\b((?:/[\w.-]+){2,})\b"),
    ],
    format: [re(r#"format\s*:?\s*"([^"]+)""#), re(r#""([^"]+)"\s+format"#)],
    parallel_for: re(r"(\d+)\s+for\s+(?:the\s+)?(source|processing|sink)"),
    parallel_named: re(r"(source|processing|sink)\s+parallelism\s*(?:of|=|:)?\s*(\d+)"),
    checkpoint: re(r"checkpoint\w*\s*:?\s*(?:every\s+|interval\s+(?:of\s+)?)?(\d+)\s*(ms|milliseconds?|s\b|seconds?)"),
    backend: [re(r"([\w-]+)\s+state\s+backend"), re(r"state\s+backend\s*[:=]?\s*([\w-]+)")],
    dlq_near: re(r"(?:dead[-\s]?letters?(?:\s+queues?)?|dlq)"),
    exactly_once: re(r"exactly[-\s]once"),
});

/// Words that can trail "topic" without being a topic name.
const TOPIC_STOPWORDS: [&str; 12] =
    ["a", "an", "and", "for", "format", "from", "in", "is", "name", "the", "to", "with"];

fn first_capture(regexes: &[Regex], text: &str) -> Option<String> {
    for r in regexes {
        if let Some(c) = r.captures(text) {
            for i in 1..c.len() {
                if let Some(m) = c.get(i) {
                    return Some(m.as_str().to_string());
                }
            }
        }
    }
    None
}

/// Classify each topic mention as main or dead-letter by scanning the text
/// shortly before the match for a DLQ cue.
fn extract_topics(text: &str, params: &mut PipelineParameters) {
    let mut mentions: Vec<(usize, String)> = Vec::new();
    for c in P.quoted_topic.captures_iter(text) {
        let m = c.get(1).or_else(|| c.get(2)).expect("one alternative matched");
        mentions.push((m.start(), m.as_str().to_string()));
    }
    for c in P.bare_topic.captures_iter(text) {
        let m = c.get(1).expect("group 1 exists");
        let name = m.as_str();
        if TOPIC_STOPWORDS.contains(&name.to_lowercase().as_str()) {
            continue;
        }
        // Skip if a quoted mention already covers this position.
        if mentions.iter().any(|(pos, n)| *pos <= m.start() && m.start() < pos + n.len() + 2) {
            continue;
        }
        mentions.push((m.start(), name.to_string()));
    }
    mentions.sort();
    for (pos, name) in mentions {
        let lead_start = pos.saturating_sub(100);
        // Positions come from regex matches, so they sit on char boundaries;
        // walk the window start back onto one as well.
        let mut ls = lead_start;
        while !text.is_char_boundary(ls) {
            ls -= 1;
        }
        let lead = &text[ls..pos];
        // A DLQ cue only counts inside the mention's own clause — scan back
        // no further than the last sentence/clause break.
        let clause = match lead.rfind(['.', ';', '!', '?']) {
            Some(i) => &lead[i + 1..],
            None => lead,
        };
        if P.dlq_near.is_match(clause) {
            params.dlq_topic.get_or_insert(name);
        } else {
            params.source_topic.get_or_insert(name);
        }
    }
}

fn extract_window(text: &str, params: &mut PipelineParameters) {
    if let Some(c) = P.window[0].captures(text) {
        params.window_seconds = c[1].parse().ok();
        if let Some(kind) = c.get(2) {
            params.window_kind = Some(kind.as_str().to_lowercase());
        }
        return;
    }
    for r in &P.window[1..] {
        if let Some(c) = r.captures(text) {
            params.window_seconds = c[1].parse().ok();
            return;
        }
    }
}

fn extract_parallelism(text: &str, params: &mut PipelineParameters) {
    let mut assign = |role: &str, value: u32| {
        let slot = match role {
            "source" => &mut params.source_parallelism,
            "processing" => &mut params.processing_parallelism,
            "sink" => &mut params.sink_parallelism,
            _ => return,
        };
        slot.get_or_insert(value);
    };
    for c in P.parallel_for.captures_iter(text) {
        if let Ok(v) = c[1].parse() {
            assign(&c[2].to_lowercase(), v);
        }
    }
    for c in P.parallel_named.captures_iter(text) {
        if let Ok(v) = c[2].parse() {
            assign(&c[1].to_lowercase(), v);
        }
    }
}

/// Pull every recognizable parameter out of a *normalized* query.
pub fn extract_parameters(query: &str) -> PipelineParameters {
    let mut params = PipelineParameters::default();
    let lower = query.to_lowercase();

    for system in TargetSystem::ALL {
        if lower.contains(system.name()) {
            params.target_system = Some(system);
            break;
        }
    }
    if lower.contains("kafka") {
        params.source_kind = Some("kafka".into());
    }

    extract_topics(query, &mut params);
    params.bootstrap_servers = first_capture(std::slice::from_ref(&P.bootstrap), query);
    if let Some(c) = P.group.captures(query) {
        let name = c[1].to_string();
        if !TOPIC_STOPWORDS.contains(&name.to_lowercase().as_str()) {
            params.consumer_group = Some(name);
        }
    }

    if let Some(c) = P.split_regex_literal.captures(query) {
        params.split_pattern = Some(c[1].to_string());
    } else if let Some(c) = P.split_word.captures(query) {
        let word = c[1].to_lowercase();
        params.split_pattern = Some(match word.as_str() {
            w if w.starts_with("whitespace") || w.starts_with("white space") || w.starts_with("space") => {
                r"\s+".to_string()
            }
            w if w.starts_with("comma") => ",".to_string(),
            w if w.starts_with("tab") => r"\t".to_string(),
            w if w.starts_with("newline") => r"\n".to_string(),
            other => other.to_string(),
        });
    }
    if P.lowercase.is_match(query) {
        params.lowercase = Some(true);
    }
    if let Some(v) = first_capture(&P.min_length, query) {
        params.min_word_length = v.parse().ok();
    }

    extract_window(query, &mut params);
    params.output_path = first_capture(&P.path, query);
    params.output_format = first_capture(&P.format, query);
    extract_parallelism(query, &mut params);

    if let Some(c) = P.checkpoint.captures(query) {
        if let Ok(v) = c[1].parse::<u64>() {
            let unit = c[2].to_lowercase();
            params.checkpoint_interval_ms =
                Some(if unit.starts_with("ms") || unit.starts_with("milli") { v } else { v * 1000 });
        }
    }
    for r in &P.backend {
        if let Some(c) = r.captures(query) {
            let s = c[1].to_lowercase();
            // "the state backend" phrasing: the article is not a backend name.
            if !["a", "an", "the", "with", "its"].contains(&s.as_str()) {
                params.state_backend = Some(s);
                break;
            }
        }
    }
    if P.exactly_once.is_match(query) {
        params.extras.insert("delivery_semantics".into(), "exactly_once".into());
    }

    params
}

#[cfg(test)]
mod tests {
    use super::*;

    // A fully specified word-count request, phrased the way a user would
    // type it.
    const FULL: &str = r#"Create an Apache Flink streaming application that processes text data: read from Kafka topic "input-text" (bootstrap servers: localhost:9092, consumer group: word-count-group), split messages by whitespace regex "\s+", convert to lowercase, and filter words with length >= 3. Use 30-second tumbling windows for aggregation. Write to the local file system at /output/word-counts.txt with format "word,count,timestamp". Parallelism: 4 for source, 8 for processing, 2 for sink. Checkpointing: every 10 seconds with a sqlite3 state backend. Send malformed messages to a dead letter queue on Kafka topic "dlq-text"."#;

    // The same application with most details missing.
    const PARTIAL: &str = "Create a Flink streaming application for text processing: read plain text from a Kafka topic, split messages into words by whitespace and count frequencies, aggregate every 30 seconds, and write to a local file at word-counts.txt";

    #[test]
    fn full_request_extracts_every_field() {
        let p = extract_parameters(&normalize_query(FULL));
        assert_eq!(p.target_system, Some(TargetSystem::Flink));
        assert_eq!(p.source_kind.as_deref(), Some("kafka"));
        assert_eq!(p.source_topic.as_deref(), Some("input-text"));
        assert_eq!(p.bootstrap_servers.as_deref(), Some("localhost:9092"));
        assert_eq!(p.consumer_group.as_deref(), Some("word-count-group"));
        assert_eq!(p.split_pattern.as_deref(), Some(r"\s+"));
        assert_eq!(p.lowercase, Some(true));
        assert_eq!(p.min_word_length, Some(3));
        assert_eq!(p.window_seconds, Some(30));
        assert_eq!(p.window_kind.as_deref(), Some("tumbling"));
        assert_eq!(p.output_path.as_deref(), Some("/output/word-counts.txt"));
        assert_eq!(p.output_format.as_deref(), Some("word,count,timestamp"));
        assert_eq!(p.source_parallelism, Some(4));
        assert_eq!(p.processing_parallelism, Some(8));
        assert_eq!(p.sink_parallelism, Some(2));
        assert_eq!(p.checkpoint_interval_ms, Some(10_000));
        assert_eq!(p.state_backend.as_deref(), Some("sqlite3"));
        assert_eq!(p.dlq_topic.as_deref(), Some("dlq-text"));
        assert_eq!(p.populated(), 18);
    }

    #[test]
    fn partial_request_leaves_missing_fields_unset() {
        let p = extract_parameters(&normalize_query(PARTIAL));
        assert_eq!(p.target_system, Some(TargetSystem::Flink));
        assert_eq!(p.source_kind.as_deref(), Some("kafka"));
        // No topic was named; "split messages into words" must not be
        // mistaken for one.
        assert_eq!(p.source_topic, None);
        assert_eq!(p.bootstrap_servers, None);
        assert_eq!(p.consumer_group, None);
        assert_eq!(p.split_pattern.as_deref(), Some(r"\s+"));
        assert_eq!(p.window_seconds, Some(30));
        assert_eq!(p.window_kind, None);
        assert_eq!(p.output_path.as_deref(), Some("word-counts.txt"));
        assert_eq!(p.source_parallelism, None);
        assert_eq!(p.processing_parallelism, None);
        assert_eq!(p.sink_parallelism, None);
        assert_eq!(p.checkpoint_interval_ms, None);
        assert_eq!(p.dlq_topic, None);
    }

    #[test]
    fn normalization_straightens_quotes_and_collapses_whitespace() {
        let raw = "Create   a “pipeline”\n\tfrom topic “clicks”";
        let n = normalize_query(raw);
        assert_eq!(n, "Create a \"pipeline\" from topic \"clicks\"");
        let p = extract_parameters(&n);
        assert_eq!(p.source_topic.as_deref(), Some("clicks"));
    }

    #[test]
    fn dlq_topic_is_kept_separate_from_the_source_topic() {
        let q = normalize_query(
            "read from kafka topic \"events\" and push poison pills to the dead-letter topic \"events-dlq\"",
        );
        let p = extract_parameters(&q);
        assert_eq!(p.source_topic.as_deref(), Some("events"));
        assert_eq!(p.dlq_topic.as_deref(), Some("events-dlq"));
    }

    #[test]
    fn dlq_first_phrasing_still_finds_the_main_topic() {
        let q = normalize_query("use a DLQ topic dead-events; the main source is kafka topic live-events");
        let p = extract_parameters(&q);
        assert_eq!(p.dlq_topic.as_deref(), Some("dead-events"));
        assert_eq!(p.source_topic.as_deref(), Some("live-events"));
    }

    #[test]
    fn checkpoint_units_convert_to_milliseconds() {
        let secs = extract_parameters("enable checkpointing every 10 seconds");
        assert_eq!(secs.checkpoint_interval_ms, Some(10_000));
        let ms = extract_parameters("checkpoint interval of 500 ms");
        assert_eq!(ms.checkpoint_interval_ms, Some(500));
    }

    #[test]
    fn checkpoint_seconds_do_not_leak_into_the_window() {
        let p = extract_parameters("use 30-second tumbling windows and checkpoint every 10 seconds");
        assert_eq!(p.window_seconds, Some(30));
        assert_eq!(p.checkpoint_interval_ms, Some(10_000));
    }

    #[test]
    fn parallelism_accepts_both_phrasings() {
        let a = extract_parameters("parallelism: 4 for source, 8 for processing, 2 for sink");
        assert_eq!((a.source_parallelism, a.processing_parallelism, a.sink_parallelism), (Some(4), Some(8), Some(2)));
        let b = extract_parameters("use source parallelism of 3 and sink parallelism 5");
        assert_eq!((b.source_parallelism, b.processing_parallelism, b.sink_parallelism), (Some(3), None, Some(5)));
    }

    #[test]
    fn split_words_map_to_literal_patterns() {
        assert_eq!(extract_parameters("split by commas").split_pattern.as_deref(), Some(","));
        assert_eq!(extract_parameters("split the line by tabs").split_pattern.as_deref(), Some(r"\t"));
        assert_eq!(
            extract_parameters("splitting records by whitespace").split_pattern.as_deref(),
            Some(r"\s+")
        );
        assert_eq!(extract_parameters(r#"split using regex: "[,;]+""#).split_pattern.as_deref(), Some("[,;]+"));
    }

    #[test]
    fn empty_query_extracts_nothing() {
        let p = extract_parameters("");
        assert_eq!(p, PipelineParameters::default());
        assert_eq!(p.populated(), 0);
    }

    #[test]
    fn serialization_skips_unset_fields() {
        let p = extract_parameters("aggregate every 45 seconds");
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(json, r#"{"window_seconds":45}"#);
    }
}
