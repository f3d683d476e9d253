//! Offline demo backend.
//!
//! Produces deterministic, well-formed responses for every protocol step
//! by recognizing which template a prompt came from. Good enough to
//! exercise the full pipeline end to end without a model server; not a
//! model. Evaluation verdicts are drawn from the prompt digest so a small
//! fraction of examples goes through the reconsideration path.

use crate::error::Result;

use super::{prompt_digest, ChatBackend, Completion, CompletionRequest, FinishReason, Provenance};

#[derive(Default)]
pub struct CannedBackend;

impl CannedBackend {
    pub fn new() -> CannedBackend {
        CannedBackend
    }
}

fn last_user_message(request: &CompletionRequest) -> &str {
    request
        .prompt
        .messages
        .iter()
        .rev()
        .find(|m| m.role == crate::prompt::Role::User)
        .map(|m| m.content.as_str())
        .unwrap_or("")
}

fn between<'a>(text: &'a str, start: &str, end: &str) -> Option<&'a str> {
    let from = text.find(start)? + start.len();
    let rest = &text[from..];
    match rest.find(end) {
        Some(to) => Some(&rest[..to]),
        None => Some(rest),
    }
}

fn after<'a>(text: &'a str, start: &str) -> Option<&'a str> {
    text.find(start).map(|from| &text[from + start.len()..])
}

fn content_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|t| t.len() >= 4)
        .map(|t| t.to_ascii_lowercase())
        .collect()
}

fn first_sentence(text: &str) -> &str {
    let trimmed = text.trim();
    match trimmed.find('.') {
        Some(dot) => &trimmed[..=dot],
        None => trimmed,
    }
}

fn translate(question: &str) -> String {
    let cleaned = question.trim();
    let mut out: String = cleaned.to_string();
    if let Some(first) = cleaned.chars().next() {
        if first.is_ascii_lowercase() {
            out = first.to_ascii_uppercase().to_string() + &cleaned[first.len_utf8()..];
        }
    }
    if !out.ends_with('?') && !out.ends_with('.') {
        out.push('?');
    }
    out
}

fn classify(user: &str) -> String {
    let segment = between(user, "Privacy Policy Segment:\n\n", "\n\nQuestion:").unwrap_or("");
    let question = after(user, "Question:\n\n").unwrap_or("");
    let segment_tokens = content_tokens(segment);
    let overlap = content_tokens(question)
        .iter()
        .filter(|t| segment_tokens.contains(t))
        .count();
    if overlap >= 1 {
        "The segment speaks to the same subject the question raises, so it addresses the question directly.\nLabel: Relevant".to_string()
    } else {
        "The segment covers different subject matter and does not address what the question asks.\nLabel: Irrelevant".to_string()
    }
}

fn extract(user: &str) -> String {
    let segment = between(user, "Privacy Policy Segment:\n\n", "\n\nQuestion:").unwrap_or("");
    let span = first_sentence(segment);
    format!("{span}\nRationale: This sentence addresses the question most directly.")
}

fn evaluate(digest: &str) -> String {
    let disagrees = matches!(digest.as_bytes().first(), Some(b'0'..=b'3'));
    if disagrees {
        "The assessment reads the question too literally and misses how the dialect frames it.\nDisagree"
            .to_string()
    } else {
        "The assessment captures the intent of the original question.\nAgree".to_string()
    }
}

fn reconsider_classification(system: &str) -> String {
    let previous = between(system, "classified the privacy policy segment as '", "'").unwrap_or("");
    let flipped = if previous.eq_ignore_ascii_case("relevant") {
        "Irrelevant"
    } else {
        "Relevant"
    };
    format!(
        "Reading the question through the dialect's framing changes which parts of the segment apply.\nFinal Label: {flipped}"
    )
}

fn reconsider_extraction(system: &str) -> String {
    let previous = between(
        system,
        "you answered the question about the privacy policy segment as follows:\n\n",
        "\n\nYour reasoning",
    )
    .unwrap_or("")
    .trim();
    format!("{previous}\nRationale: The span already reflects the dialect reading of the question.")
}

impl ChatBackend for CannedBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<Completion> {
        let system = request
            .prompt
            .messages
            .first()
            .map(|m| m.content.as_str())
            .unwrap_or("");
        let user = last_user_message(request);
        let content = if system.contains("translate the following question from this dialect") {
            translate(user)
        } else if system.contains("critically assess whether the Privacy Policy Agent's") {
            evaluate(&prompt_digest(&request.prompt))
        } else if system.contains("Previously, you classified the privacy policy segment") {
            reconsider_classification(system)
        } else if system.contains("Previously, you answered the question") {
            reconsider_extraction(system)
        } else if system.contains("'Label: Relevant' or 'Label: Irrelevant'") {
            classify(user)
        } else {
            extract(user)
        };
        Ok(Completion {
            content,
            finish_reason: FinishReason::Stop,
            usage: None,
            provenance: Provenance::Script,
        })
    }
}
