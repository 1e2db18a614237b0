//! Pulling code files out of model replies.
//!
//! Replies carry code in fenced blocks. Extraction keeps every block whose
//! info string matches the language hint (every block when no hint is
//! given), names each file after the first type declaration it can find,
//! and falls back to a step-indexed name when the content names nothing.
//! Unclosed fences are dropped rather than guessed at.

use regex::Regex;
use std::collections::BTreeSet;
use std::sync::LazyLock;

/// One fenced block as it appeared in the reply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FencedBlock {
    /// First word of the info string, lowercased; empty for bare fences.
    pub language: String,
    pub content: String,
}

/// Scan `text` for complete fenced blocks.
///
/// A fence line with an info string opens a block; a bare fence line closes
/// it. An opener appearing while a block is already open means the earlier
/// block never closed properly — its content is dropped and parsing
/// restarts at the new opener. A block still open at end of input is
/// likewise dropped.
pub fn fence_blocks(text: &str) -> Vec<FencedBlock> {
    let mut blocks = Vec::new();
    let mut open: Option<(String, Vec<&str>)> = None;
    for line in text.lines() {
        let trimmed = line.trim_start();
        if let Some(rest) = trimmed.strip_prefix("```") {
            match open.take() {
                Some((language, lines)) if rest.trim().is_empty() => {
                    let mut content = lines.join("\n");
                    if !content.is_empty() {
                        content.push('\n');
                    }
                    blocks.push(FencedBlock { language, content });
                }
                _ => open = Some((info_word(rest), Vec::new())),
            }
        } else if let Some((_, lines)) = open.as_mut() {
            lines.push(line);
        }
    }
    blocks
}

fn info_word(info: &str) -> String {
    info.trim().split_whitespace().next().unwrap_or("").to_lowercase()
}

/// Languages that get a conventional file extension; everything else is
/// written as plain text.
fn extension_for(language: &str) -> &'static str {
    match language {
        "java" => "java",
        "scala" => "scala",
        "python" | "py" => "py",
        "xml" | "pom" => "xml",
        "yaml" | "yml" => "yaml",
        "json" => "json",
        "sql" => "sql",
        "bash" | "sh" | "shell" => "sh",
        "properties" => "properties",
        _ => "txt",
    }
}

static JAVA_DECL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?m)^\s*(?:public\s+|final\s+|abstract\s+)*(?:class|interface|enum|record)\s+([A-Za-z_][A-Za-z0-9_]*)")
        .expect("java declaration pattern")
});
static SCALA_DECL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?m)^\s*(?:case\s+)?(?:class|object|trait)\s+([A-Za-z_][A-Za-z0-9_]*)").expect("scala declaration pattern")
});
static PYTHON_DECL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?m)^(?:class|def)\s+([A-Za-z_][A-Za-z0-9_]*)").expect("python declaration pattern"));

/// Name for a block's content: the first type declaration when the language
/// has a recognisable one.
fn declared_name(language: &str, content: &str) -> Option<String> {
    let pattern = match language {
        "java" => &*JAVA_DECL,
        "scala" => &*SCALA_DECL,
        "python" | "py" => &*PYTHON_DECL,
        _ => return None,
    };
    pattern.captures(content).map(|c| c[1].to_string())
}

/// Extract the code files from one step's reply.
///
/// With a hint only blocks labelled with that language qualify; without one
/// every complete block does. Names collide onto the step-indexed fallback
/// rather than overwrite each other.
pub fn extract_code_blocks(text: &str, language_hint: Option<&str>, step_id: &str) -> Vec<(String, String)> {
    let hint = language_hint.map(str::to_lowercase);
    let mut taken: BTreeSet<String> = BTreeSet::new();
    let mut files = Vec::new();
    let selected = fence_blocks(text)
        .into_iter()
        .filter(|b| match &hint {
            Some(h) => &b.language == h,
            None => true,
        })
        .collect::<Vec<_>>();
    for (n, block) in selected.into_iter().enumerate() {
        let ext = extension_for(&block.language);
        let fallback = format!("step-{step_id}-{}.{ext}", n + 1);
        let name = match declared_name(&block.language, &block.content) {
            Some(decl) => {
                let candidate = format!("{decl}.{ext}");
                if taken.contains(&candidate) {
                    fallback
                } else {
                    candidate
                }
            }
            None => fallback,
        };
        taken.insert(name.clone());
        files.push((name, block.content));
    }
    files
}
