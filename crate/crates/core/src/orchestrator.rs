//! The two-agent refinement protocol, executed per example.
//!
//! Step 1: the Dialect Agent translates the dialectal question into
//! Standard American English. Step 2a: the Privacy Policy Agent answers
//! against the policy segment. Steps 2b/2c: the Dialect Agent audits the
//! answer against the original dialectal question and either agrees or
//! triggers a reconsideration, looping until agreement or until the
//! refinement cap is hit. Every backend call becomes exactly one recorded
//! turn, and malformed model output falls back conservatively instead of
//! aborting the batch.

use serde::{Deserialize, Serialize};

use crate::backend::{prompt_digest, ChatBackend, CompletionRequest};
use crate::datasets::{Label, QAExample};
use crate::error::Result;
use crate::profiles::{render_profile, ProfileRegistry, GENERIC_PROFILE_ID};
use crate::prompt::{
    build_answer_prompt, build_evaluation_prompt, build_reconsideration_prompt,
    build_translation_prompt, ChatPrompt, DecodingParams, FewShotExample, ShotKind, TaskKind,
};

/// What a verdict decides: a relevance label or an extracted span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictValue {
    Label(Label),
    Span(String),
}

impl VerdictValue {
    /// Text form used when a verdict is embedded into a later prompt.
    /// An empty span renders as a visible placeholder because prompt
    /// slots reject empty values; the trace itself keeps the empty span.
    pub fn display_text(&self) -> String {
        match self {
            VerdictValue::Label(label) => label.as_str().to_string(),
            VerdictValue::Span(text) if text.trim().is_empty() => "(no answer)".to_string(),
            VerdictValue::Span(text) => text.clone(),
        }
    }
}

/// The Privacy Policy Agent's decision plus its stated reasoning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub value: VerdictValue,
    pub reasoning: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgreementValue {
    Agree,
    Disagree,
}

/// The Dialect Agent's audit outcome plus its full rationale text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub value: AgreementValue,
    pub rationale: String,
}

/// A model response that does not satisfy its output contract.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseFailure {
    pub message: String,
}

impl std::fmt::Display for ParseFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

/// Which verdict marker applies: `Label:` on first answers, `Final
/// Label:` on reconsiderations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictStage {
    Initial,
    Final,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentRole {
    Dialect,
    Privacy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Translate,
    Answer,
    Evaluate,
    Reconsider,
}

/// What a turn's raw response parsed into, or why it failed to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ParsedTurn {
    Translation { translated_question: String },
    Verdict { verdict: Verdict },
    Agreement { agreement: Agreement },
    Failure { message: String },
}

/// One backend exchange inside a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub agent: AgentRole,
    pub step: StepKind,
    /// Step name plus round suffix where applicable, e.g. `evaluate#1`.
    pub step_tag: String,
    pub prompt_digest: String,
    pub raw_response: String,
    pub parsed: ParsedTurn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    ZeroShot,
    FewShot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileMode {
    Full,
    Generic,
}

/// Complete record of one example's pass through the protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementTrace {
    pub example_id: String,
    pub dialect_id: String,
    pub task: TaskKind,
    pub mode: PromptMode,
    pub translated_question: String,
    pub turns: Vec<Turn>,
    pub initial_verdict: Verdict,
    pub final_verdict: Verdict,
    /// Reconsiderations performed, capped by `max_refinements`.
    pub iterations: u32,
    #[serde(rename = "override")]
    pub override_flag: bool,
    /// True when the loop hit the cap with the Dialect Agent still
    /// disagreeing; the last reconsidered verdict stands.
    pub loop_exhausted: bool,
    /// Step tags whose responses needed a fallback, e.g. `evaluate#0`.
    pub parse_failures: Vec<String>,
}

/// Per-run settings shared by every example the run touches.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub task: TaskKind,
    pub profile_mode: ProfileMode,
    pub mode: PromptMode,
    pub shot_count: usize,
    pub max_refinements: u32,
    pub model: String,
    pub decoding: DecodingParams,
    pub shots: Vec<FewShotExample>,
}

impl RunConfig {
    pub fn new(task: TaskKind, model: impl Into<String>) -> RunConfig {
        RunConfig {
            task,
            profile_mode: ProfileMode::Full,
            mode: PromptMode::ZeroShot,
            shot_count: 8,
            max_refinements: 2,
            model: model.into(),
            decoding: DecodingParams::default(),
            shots: Vec::new(),
        }
    }
}

fn find_last_ci(haystack: &str, needle: &str) -> Option<usize> {
    let h = haystack.as_bytes();
    let n = needle.as_bytes();
    if n.is_empty() || h.len() < n.len() {
        return None;
    }
    (0..=h.len() - n.len())
        .rev()
        .find(|&i| h[i..i + n.len()].eq_ignore_ascii_case(n))
}

fn find_first_ci(haystack: &str, needle: &str) -> Option<usize> {
    let h = haystack.as_bytes();
    let n = needle.as_bytes();
    if n.is_empty() || h.len() < n.len() {
        return None;
    }
    (0..=h.len() - n.len()).find(|&i| h[i..i + n.len()].eq_ignore_ascii_case(n))
}

/// Extracts a verdict from a Privacy Policy Agent response.
///
/// Classification scans case-insensitively for the stage's marker
/// (`Label:` or `Final Label:`); the last occurrence wins and the first
/// alphabetic token after it must normalize to relevant or irrelevant.
/// Extraction takes the text before the first `Rationale:` marker as the
/// answer span and the remainder as the reasoning.
pub fn parse_verdict(
    text: &str,
    task: TaskKind,
    stage: VerdictStage,
) -> std::result::Result<Verdict, ParseFailure> {
    match task {
        TaskKind::PrivacyClassification => {
            let marker = match stage {
                VerdictStage::Initial => "Label:",
                VerdictStage::Final => "Final Label:",
            };
            let index = find_last_ci(text, marker).ok_or_else(|| ParseFailure {
                message: format!("no '{marker}' marker in response"),
            })?;
            let tail = &text[index + marker.len()..];
            let token: String = tail
                .chars()
                .skip_while(|c| !c.is_alphabetic())
                .take_while(|c| c.is_alphabetic())
                .collect();
            let label = Label::parse(&token).ok_or_else(|| ParseFailure {
                message: format!("token '{token}' after '{marker}' is not a known label"),
            })?;
            Ok(Verdict {
                value: VerdictValue::Label(label),
                reasoning: text[..index].trim().to_string(),
            })
        }
        TaskKind::PolicyExtraction => {
            let marker = "Rationale:";
            let index = find_first_ci(text, marker).ok_or_else(|| ParseFailure {
                message: format!("no '{marker}' marker in response"),
            })?;
            let answer = text[..index].trim();
            if answer.is_empty() {
                return Err(ParseFailure {
                    message: "empty answer span before the rationale".into(),
                });
            }
            Ok(Verdict {
                value: VerdictValue::Span(answer.to_string()),
                reasoning: text[index + marker.len()..].trim().to_string(),
            })
        }
    }
}

/// Extracts Agree or Disagree from a Dialect Agent response. Only the
/// final non-empty line counts, and disagreement is checked first because
/// "disagree" contains "agree".
pub fn parse_agreement(text: &str) -> std::result::Result<Agreement, ParseFailure> {
    let line = text
        .lines()
        .rev()
        .find(|line| !line.trim().is_empty())
        .ok_or_else(|| ParseFailure {
            message: "empty response".into(),
        })?;
    let lowered = line.to_lowercase();
    let value = if lowered.contains("disagree") {
        AgreementValue::Disagree
    } else if lowered.contains("agree") {
        AgreementValue::Agree
    } else {
        return Err(ParseFailure {
            message: format!("final line '{}' has no agree/disagree token", line.trim()),
        });
    };
    Ok(Agreement {
        value,
        rationale: text.trim().to_string(),
    })
}

fn fallback_verdict(task: TaskKind) -> Verdict {
    match task {
        TaskKind::PrivacyClassification => Verdict {
            value: VerdictValue::Label(Label::Irrelevant),
            reasoning: String::new(),
        },
        TaskKind::PolicyExtraction => Verdict {
            value: VerdictValue::Span(String::new()),
            reasoning: String::new(),
        },
    }
}

fn non_empty_or<'a>(text: &'a str, placeholder: &'a str) -> &'a str {
    if text.trim().is_empty() {
        placeholder
    } else {
        text
    }
}

fn call_backend(
    backend: &dyn ChatBackend,
    model: &str,
    example_id: &str,
    step_tag: &str,
    prompt: ChatPrompt,
) -> Result<(String, String)> {
    let digest = prompt_digest(&prompt);
    let request = CompletionRequest {
        model: model.to_string(),
        prompt,
        request_tag: format!("{example_id}/{step_tag}"),
    };
    let completion = backend.complete(&request)?;
    Ok((completion.content, digest))
}

/// Runs the full protocol for one example and returns its trace.
///
/// Fallbacks on malformed output: an empty translation reuses the
/// original question; an unparseable answer or reconsideration yields
/// Irrelevant (classification) or an empty span (extraction); an
/// unparseable evaluation counts as agreement so the loop terminates.
/// Every fallback is recorded in `parse_failures`.
pub fn run_example(
    example: &QAExample,
    cfg: &RunConfig,
    registry: &ProfileRegistry,
    backend: &dyn ChatBackend,
) -> Result<RefinementTrace> {
    let profile = match cfg.profile_mode {
        ProfileMode::Generic => registry.get(GENERIC_PROFILE_ID)?,
        ProfileMode::Full => registry.get(&example.dialect_id)?,
    };
    let profile_text = render_profile(profile);
    let shots_for = |kind: ShotKind| -> Vec<FewShotExample> {
        match cfg.mode {
            PromptMode::ZeroShot => Vec::new(),
            PromptMode::FewShot => cfg
                .shots
                .iter()
                .filter(|shot| shot.task_kind == kind)
                .take(cfg.shot_count)
                .cloned()
                .collect(),
        }
    };

    let mut turns: Vec<Turn> = Vec::new();
    let mut parse_failures: Vec<String> = Vec::new();

    let prompt = build_translation_prompt(
        &profile_text,
        &example.question,
        &shots_for(ShotKind::Translation),
    )?
    .with_decoding(cfg.decoding);
    let (raw, digest) = call_backend(backend, &cfg.model, &example.example_id, "translate", prompt)?;
    let translated_question = {
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            parse_failures.push("translate".into());
            turns.push(Turn {
                agent: AgentRole::Dialect,
                step: StepKind::Translate,
                step_tag: "translate".into(),
                prompt_digest: digest,
                raw_response: raw.clone(),
                parsed: ParsedTurn::Failure {
                    message: "empty translation".into(),
                },
            });
            example.question.clone()
        } else {
            let translated = trimmed.to_string();
            turns.push(Turn {
                agent: AgentRole::Dialect,
                step: StepKind::Translate,
                step_tag: "translate".into(),
                prompt_digest: digest,
                raw_response: raw.clone(),
                parsed: ParsedTurn::Translation {
                    translated_question: translated.clone(),
                },
            });
            translated
        }
    };

    let prompt = build_answer_prompt(
        cfg.task,
        &example.segment,
        &translated_question,
        &shots_for(cfg.task.into()),
    )?
    .with_decoding(cfg.decoding);
    let (raw, digest) = call_backend(backend, &cfg.model, &example.example_id, "answer", prompt)?;
    let initial_verdict = match parse_verdict(&raw, cfg.task, VerdictStage::Initial) {
        Ok(verdict) => {
            turns.push(Turn {
                agent: AgentRole::Privacy,
                step: StepKind::Answer,
                step_tag: "answer".into(),
                prompt_digest: digest,
                raw_response: raw,
                parsed: ParsedTurn::Verdict {
                    verdict: verdict.clone(),
                },
            });
            verdict
        }
        Err(failure) => {
            parse_failures.push("answer".into());
            turns.push(Turn {
                agent: AgentRole::Privacy,
                step: StepKind::Answer,
                step_tag: "answer".into(),
                prompt_digest: digest,
                raw_response: raw,
                parsed: ParsedTurn::Failure {
                    message: failure.message,
                },
            });
            fallback_verdict(cfg.task)
        }
    };

    let mut current = initial_verdict.clone();
    let mut iterations = 0u32;
    let mut loop_exhausted = false;
    loop {
        let step_tag = format!("evaluate#{iterations}");
        let prompt = build_evaluation_prompt(
            &profile_text,
            &example.segment,
            &example.question,
            &current.value.display_text(),
            non_empty_or(&current.reasoning, "none given"),
        )?
        .with_decoding(cfg.decoding);
        let (raw, digest) =
            call_backend(backend, &cfg.model, &example.example_id, &step_tag, prompt)?;
        let agreement = match parse_agreement(&raw) {
            Ok(agreement) => {
                turns.push(Turn {
                    agent: AgentRole::Dialect,
                    step: StepKind::Evaluate,
                    step_tag: step_tag.clone(),
                    prompt_digest: digest,
                    raw_response: raw,
                    parsed: ParsedTurn::Agreement {
                        agreement: agreement.clone(),
                    },
                });
                agreement
            }
            Err(failure) => {
                parse_failures.push(step_tag.clone());
                let fallback = Agreement {
                    value: AgreementValue::Agree,
                    rationale: raw.trim().to_string(),
                };
                turns.push(Turn {
                    agent: AgentRole::Dialect,
                    step: StepKind::Evaluate,
                    step_tag: step_tag.clone(),
                    prompt_digest: digest,
                    raw_response: raw,
                    parsed: ParsedTurn::Failure {
                        message: failure.message,
                    },
                });
                fallback
            }
        };
        if agreement.value == AgreementValue::Agree {
            break;
        }
        if iterations == cfg.max_refinements {
            loop_exhausted = true;
            break;
        }

        let step_tag = format!("reconsider#{}", iterations + 1);
        let prompt = build_reconsideration_prompt(
            cfg.task,
            &current.value.display_text(),
            non_empty_or(&current.reasoning, "none given"),
            non_empty_or(&agreement.rationale, "none given"),
        )?
        .with_decoding(cfg.decoding);
        let (raw, digest) =
            call_backend(backend, &cfg.model, &example.example_id, &step_tag, prompt)?;
        current = match parse_verdict(&raw, cfg.task, VerdictStage::Final) {
            Ok(verdict) => {
                turns.push(Turn {
                    agent: AgentRole::Privacy,
                    step: StepKind::Reconsider,
                    step_tag: step_tag.clone(),
                    prompt_digest: digest,
                    raw_response: raw,
                    parsed: ParsedTurn::Verdict {
                        verdict: verdict.clone(),
                    },
                });
                verdict
            }
            Err(failure) => {
                parse_failures.push(step_tag.clone());
                turns.push(Turn {
                    agent: AgentRole::Privacy,
                    step: StepKind::Reconsider,
                    step_tag: step_tag.clone(),
                    prompt_digest: digest,
                    raw_response: raw,
                    parsed: ParsedTurn::Failure {
                        message: failure.message,
                    },
                });
                fallback_verdict(cfg.task)
            }
        };
        iterations += 1;
    }

    let override_flag = current.value != initial_verdict.value;
    Ok(RefinementTrace {
        example_id: example.example_id.clone(),
        dialect_id: example.dialect_id.clone(),
        task: cfg.task,
        mode: cfg.mode,
        translated_question,
        turns,
        initial_verdict,
        final_verdict: current,
        iterations,
        override_flag,
        loop_exhausted,
        parse_failures,
    })
}
