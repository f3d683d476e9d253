//! Prompt assembly for the two agents.
//!
//! Four builders cover the protocol: translation and evaluation for the
//! Dialect Agent, answer and reconsideration for the Privacy Policy Agent.
//! Templates are fixed constants with named `{slot}` markers filled in a
//! single pass, so substituted values are never rescanned and identical
//! inputs always produce byte-identical prompts. Few-shot examples are
//! rendered as alternating user/assistant message pairs between the system
//! message and the final user message.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

/// Sampling parameters sent with every prompt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodingParams {
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
}

fn default_temperature() -> f64 {
    0.0
}

fn default_max_tokens() -> u32 {
    512
}

impl Default for DecodingParams {
    fn default() -> Self {
        DecodingParams {
            temperature: default_temperature(),
            max_tokens: default_max_tokens(),
        }
    }
}

/// Ordered message list plus decoding parameters; the unit sent to a backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatPrompt {
    pub messages: Vec<ChatMessage>,
    pub decoding: DecodingParams,
}

impl ChatPrompt {
    pub fn new(messages: Vec<ChatMessage>) -> Self {
        ChatPrompt {
            messages,
            decoding: DecodingParams::default(),
        }
    }

    pub fn with_decoding(mut self, decoding: DecodingParams) -> Self {
        self.decoding = decoding;
        self
    }
}

/// The two evaluation tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    PrivacyClassification,
    PolicyExtraction,
}

/// What a few-shot exemplar demonstrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShotKind {
    PrivacyClassification,
    PolicyExtraction,
    Translation,
    Evaluation,
}

impl From<TaskKind> for ShotKind {
    fn from(task: TaskKind) -> Self {
        match task {
            TaskKind::PrivacyClassification => ShotKind::PrivacyClassification,
            TaskKind::PolicyExtraction => ShotKind::PolicyExtraction,
        }
    }
}

/// One in-context exemplar, rendered as a user/assistant message pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub task_kind: ShotKind,
    pub input_block: String,
    pub output_block: String,
}

const TRANSLATION_SYSTEM: &str = "You are an expert linguist specializing in the following dialect:\n\n{dialect_info}\n\nYour task is to translate the following question from this dialect into clear, Standard American English. Ensure that the translation is easily understandable to a general audience. Please provide only the translated question and do not include any additional text.";

const TRANSLATION_USER: &str = "{question}";

const CLASSIFICATION_SYSTEM: &str = "You are a privacy policy expert. Your task is to determine whether the provided privacy policy segment is 'Relevant' or 'Irrelevant' to the question, based on the following definitions:\n\nDefinitions:\n\n- Relevant: The policy segment directly addresses the question.\n\n- Irrelevant: The policy segment does not directly address the question.\n\nPlease analyze the material below and provide:\n1. A brief explanation of your reasoning.\n2. Conclude only with 'Label: Relevant' or 'Label: Irrelevant'.";

const EXTRACTION_SYSTEM: &str = "You are a privacy policy expert. Review the provided policy segment and answer the following question in a concise manner, ensuring factual accuracy. Base your response solely on the information in the policy segment.\n\nPlease analyze the material below and provide:\n1. A short exact answer span quoted from the policy segment.\n2. A brief rationale on a new line starting with 'Rationale:'.";

const ANSWER_USER: &str = "Privacy Policy Segment:\n\n{privacy_policy_segment}\n\nQuestion:\n\n{translated_question}";

const EVALUATION_SYSTEM: &str = "You are an expert linguist specializing in the following dialect, with expertise in privacy policies.\n\n{dialect_info}\n\nPreviously, you translated a question from this dialect into Standard American English. Now, you need to critically assess whether the Privacy Policy Agent's classification accurately reflects the meaning of the original question in the dialect.\n\nPrivacy Policy Segment:\n\n{privacy_policy_segment}\n\nOriginal Question in Dialect:\n\n{question}\n\nThe Privacy Policy Agent has classified the policy segment as '{classification}' with the following reasoning:\n\n{reasoning}\n\nBased on your understanding of the dialect and its nuances, analyze the expert's classification and reasoning. Do you find any discrepancies or misunderstandings? Please provide a detailed explanation and conclude with either 'Agree' if you concur with the classification or 'Disagree' if you do not.";

/// The evaluation template keeps all material in the system message, so a
/// short fixed user message carries the actual turn.
pub const EVALUATION_USER_MESSAGE: &str = "Please provide your assessment.";

const RECONSIDERATION_CLASSIFICATION_SYSTEM: &str = "You are a privacy policy expert. Previously, you classified the privacy policy segment as '{previous_classification}' regarding the question, with the following reasoning:\n\n{previous_reasoning}\n\nHowever, the Dialect Agent has provided additional insights and disagrees with your classification. Their reasoning is as follows:\n\n{dialect_reasoning}\n\nPlease reconsider your initial decision in light of this new information. Provide:\n1. A brief explanation of your reconsidered decision.\n2. Conclude with 'Final Label: Relevant' or 'Final Label: Irrelevant'.";

const RECONSIDERATION_EXTRACTION_SYSTEM: &str = "You are a privacy policy expert. Previously, you answered the question about the privacy policy segment as follows:\n\n{previous_answer}\n\nYour reasoning was as follows:\n\n{previous_reasoning}\n\nHowever, the Dialect Agent has provided additional insights and disagrees with your answer. Their reasoning is as follows:\n\n{dialect_reasoning}\n\nYou received feedback indicating that certain elements of the user's dialectal query were not fully addressed. Please revise your previous answer to incorporate the Dialect Agent's insights and ensure the user's intent is accurately captured. Provide:\n1. A short exact answer span quoted from the policy segment.\n2. A brief rationale on a new line starting with 'Rationale:'.";

/// See [`EVALUATION_USER_MESSAGE`]; same situation for reconsideration.
pub const RECONSIDERATION_USER_MESSAGE: &str = "Please provide your reconsidered decision.";

/// All slot names any template may contain. Used to assert that no slot
/// survives unsubstituted into a built prompt.
const SLOT_NAMES: &[&str] = &[
    "dialect_info",
    "question",
    "privacy_policy_segment",
    "translated_question",
    "classification",
    "reasoning",
    "previous_classification",
    "previous_answer",
    "previous_reasoning",
    "dialect_reasoning",
];

/// Fills `{name}` slots in one left-to-right pass. Substituted values are
/// not rescanned, so a value containing a slot marker stays literal.
fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        out.push_str(&rest[..start]);
        let after = &rest[start + 1..];
        if let Some(end) = after.find('}') {
            let name = &after[..end];
            if let Some((_, value)) = vars.iter().find(|(n, _)| *n == name) {
                out.push_str(value);
                rest = &after[end + 1..];
                continue;
            }
        }
        out.push('{');
        rest = after;
    }
    out.push_str(rest);
    out
}

fn require_non_empty(name: &str, value: &str) -> Result<()> {
    if value.trim().is_empty() {
        return Err(Error::Prompt(format!("{name} must be non-empty")));
    }
    Ok(())
}

fn check_shots(shots: &[FewShotExample]) -> Result<()> {
    for (i, shot) in shots.iter().enumerate() {
        if shot.input_block.trim().is_empty() || shot.output_block.trim().is_empty() {
            return Err(Error::Prompt(format!(
                "few-shot example {i} has an empty input or output block"
            )));
        }
    }
    Ok(())
}

fn check_no_unfilled_slots(prompt: &ChatPrompt) -> Result<()> {
    for message in &prompt.messages {
        for name in SLOT_NAMES {
            let marker = format!("{{{name}}}");
            if message.content.contains(&marker) {
                return Err(Error::Prompt(format!(
                    "unsubstituted template slot {marker}"
                )));
            }
        }
    }
    Ok(())
}

fn assemble(system: String, shots: &[FewShotExample], user: String) -> Result<ChatPrompt> {
    let mut messages = Vec::with_capacity(2 + 2 * shots.len());
    messages.push(ChatMessage::system(system));
    for shot in shots {
        messages.push(ChatMessage::user(shot.input_block.clone()));
        messages.push(ChatMessage::assistant(shot.output_block.clone()));
    }
    messages.push(ChatMessage::user(user));
    let prompt = ChatPrompt {
        messages,
        decoding: DecodingParams::default(),
    };
    check_no_unfilled_slots(&prompt)?;
    Ok(prompt)
}

/// Step 1: Dialect Agent translates the dialectal question into SAE.
pub fn build_translation_prompt(
    profile_text: &str,
    question: &str,
    shots: &[FewShotExample],
) -> Result<ChatPrompt> {
    require_non_empty("profile_text", profile_text)?;
    require_non_empty("question", question)?;
    check_shots(shots)?;
    let system = fill(TRANSLATION_SYSTEM, &[("dialect_info", profile_text)]);
    let user = fill(TRANSLATION_USER, &[("question", question)]);
    assemble(system, shots, user)
}

/// Step 2a: Privacy Policy Agent answers against the policy segment.
/// Classification asks for a `Label:` verdict; extraction asks for a short
/// exact span plus a `Rationale:` line.
pub fn build_answer_prompt(
    task: TaskKind,
    segment: &str,
    translated_question: &str,
    shots: &[FewShotExample],
) -> Result<ChatPrompt> {
    require_non_empty("segment", segment)?;
    require_non_empty("translated_question", translated_question)?;
    check_shots(shots)?;
    let system = match task {
        TaskKind::PrivacyClassification => CLASSIFICATION_SYSTEM.to_string(),
        TaskKind::PolicyExtraction => EXTRACTION_SYSTEM.to_string(),
    };
    let user = fill(
        ANSWER_USER,
        &[
            ("privacy_policy_segment", segment),
            ("translated_question", translated_question),
        ],
    );
    assemble(system, shots, user)
}

/// Steps 2b/2c: Dialect Agent audits the Privacy Policy Agent's output
/// against the original dialectal question and concludes Agree or Disagree.
pub fn build_evaluation_prompt(
    profile_text: &str,
    segment: &str,
    original_question: &str,
    classification_or_answer: &str,
    reasoning: &str,
) -> Result<ChatPrompt> {
    require_non_empty("profile_text", profile_text)?;
    require_non_empty("segment", segment)?;
    require_non_empty("original_question", original_question)?;
    require_non_empty("classification_or_answer", classification_or_answer)?;
    require_non_empty("reasoning", reasoning)?;
    let system = fill(
        EVALUATION_SYSTEM,
        &[
            ("dialect_info", profile_text),
            ("privacy_policy_segment", segment),
            ("question", original_question),
            ("classification", classification_or_answer),
            ("reasoning", reasoning),
        ],
    );
    assemble(system, &[], EVALUATION_USER_MESSAGE.to_string())
}

/// Step 2b continued: Privacy Policy Agent reconsiders after disagreement.
pub fn build_reconsideration_prompt(
    task: TaskKind,
    previous_output: &str,
    previous_reasoning: &str,
    dialect_reasoning: &str,
) -> Result<ChatPrompt> {
    require_non_empty("previous_output", previous_output)?;
    require_non_empty("previous_reasoning", previous_reasoning)?;
    require_non_empty("dialect_reasoning", dialect_reasoning)?;
    let system = match task {
        TaskKind::PrivacyClassification => fill(
            RECONSIDERATION_CLASSIFICATION_SYSTEM,
            &[
                ("previous_classification", previous_output),
                ("previous_reasoning", previous_reasoning),
                ("dialect_reasoning", dialect_reasoning),
            ],
        ),
        TaskKind::PolicyExtraction => fill(
            RECONSIDERATION_EXTRACTION_SYSTEM,
            &[
                ("previous_answer", previous_output),
                ("previous_reasoning", previous_reasoning),
                ("dialect_reasoning", dialect_reasoning),
            ],
        ),
    };
    assemble(system, &[], RECONSIDERATION_USER_MESSAGE.to_string())
}

/// Loads few-shot exemplars from a JSON Lines file with fields
/// `task_kind`, `input_block`, `output_block`.
pub fn load_fewshot(path: impl AsRef<Path>) -> Result<Vec<FewShotExample>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let reader = BufReader::new(file);
    let mut shots = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let shot: FewShotExample = serde_json::from_str(&line)
            .map_err(|e| Error::json(format!("{}:{}", path.display(), index + 1), e))?;
        if shot.input_block.trim().is_empty() || shot.output_block.trim().is_empty() {
            return Err(Error::Prompt(format!(
                "few-shot example at {}:{} has an empty block",
                path.display(),
                index + 1
            )));
        }
        shots.push(shot);
    }
    Ok(shots)
}
