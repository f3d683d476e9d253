//! Dataset loaders for the two privacy QA tasks, plus attachment of
//! pre-translated dialect-variant questions.
//!
//! PrivacyQA is tab-separated with header columns `example_id`, `question`,
//! `segment`, `label`; each row is one (question, candidate sentence) pair
//! labeled Relevant or Irrelevant. PolicyQA uses the common reading
//! comprehension JSON structure (`data` -> `paragraphs` -> `context` +
//! `qas` -> `answers`), one example per question with all reference answer
//! texts kept as spans. Variant files are JSON Lines `{example_id,
//! question}` maps and must cover the full example set.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prompt::TaskKind;

/// Relevance label for PrivacyQA candidate sentences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Relevant,
    Irrelevant,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Relevant => "Relevant",
            Label::Irrelevant => "Irrelevant",
        }
    }

    pub fn parse(token: &str) -> Option<Label> {
        if token.eq_ignore_ascii_case("relevant") {
            Some(Label::Relevant)
        } else if token.eq_ignore_ascii_case("irrelevant") {
            Some(Label::Irrelevant)
        } else {
            None
        }
    }
}

/// Ground truth for one example, matching its task kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoldAnswer {
    Classification(Label),
    Spans(Vec<String>),
}

/// One evaluation unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAExample {
    pub example_id: String,
    pub task: TaskKind,
    pub dialect_id: String,
    /// The question presented to the system (dialectal after attachment).
    pub question: String,
    /// The original SAE question, present once a variant is attached.
    pub sae_reference_question: Option<String>,
    pub segment: String,
    pub gold: GoldAnswer,
}

/// Loads PrivacyQA rows. Row numbers in errors count the header as line 1.
pub fn load_privacyqa(path: impl AsRef<Path>) -> Result<Vec<QAExample>> {
    let path = path.as_ref();
    let location = |row: usize| format!("{}:{}", path.display(), row);
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .from_path(path)
        .map_err(|e| Error::Dataset {
            location: path.display().to_string(),
            message: e.to_string(),
        })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Dataset {
            location: path.display().to_string(),
            message: e.to_string(),
        })?
        .clone();
    let column = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Dataset {
                location: path.display().to_string(),
                message: format!("missing column '{name}'"),
            })
    };
    let id_col = column("example_id")?;
    let question_col = column("question")?;
    let segment_col = column("segment")?;
    let label_col = column("label")?;

    let mut examples = Vec::new();
    let mut seen = HashSet::new();
    for (index, record) in reader.records().enumerate() {
        let row = index + 2;
        let record = record.map_err(|e| Error::Dataset {
            location: location(row),
            message: e.to_string(),
        })?;
        let field = |col: usize, name: &str| -> Result<&str> {
            record.get(col).ok_or_else(|| Error::Dataset {
                location: location(row),
                message: format!("missing field '{name}'"),
            })
        };
        let example_id = field(id_col, "example_id")?.to_string();
        let question = field(question_col, "question")?.to_string();
        let segment = field(segment_col, "segment")?.to_string();
        let label_token = field(label_col, "label")?;
        if example_id.is_empty() {
            return Err(Error::Dataset {
                location: location(row),
                message: "empty example_id".into(),
            });
        }
        if !seen.insert(example_id.clone()) {
            return Err(Error::Dataset {
                location: location(row),
                message: format!("duplicate example_id '{example_id}'"),
            });
        }
        if question.trim().is_empty() || segment.trim().is_empty() {
            return Err(Error::Dataset {
                location: location(row),
                message: "empty question or segment".into(),
            });
        }
        let label = Label::parse(label_token).ok_or_else(|| Error::Dataset {
            location: location(row),
            message: format!("unknown label token '{label_token}'"),
        })?;
        examples.push(QAExample {
            example_id,
            task: TaskKind::PrivacyClassification,
            dialect_id: "sae".into(),
            question,
            sae_reference_question: None,
            segment,
            gold: GoldAnswer::Classification(label),
        });
    }
    Ok(examples)
}

/// Writes examples back to the PrivacyQA TSV contract. Reloading the
/// written file reproduces an equal list.
pub fn write_privacyqa(examples: &[QAExample], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::WriterBuilder::new()
        .delimiter(b'\t')
        .from_path(path)
        .map_err(|e| Error::Dataset {
            location: path.display().to_string(),
            message: e.to_string(),
        })?;
    writer
        .write_record(["example_id", "question", "segment", "label"])
        .map_err(|e| Error::Dataset {
            location: path.display().to_string(),
            message: e.to_string(),
        })?;
    for example in examples {
        let label = match &example.gold {
            GoldAnswer::Classification(label) => label.as_str(),
            GoldAnswer::Spans(_) => {
                return Err(Error::Dataset {
                    location: path.display().to_string(),
                    message: format!(
                        "example '{}' is not a classification example",
                        example.example_id
                    ),
                })
            }
        };
        writer
            .write_record([
                example.example_id.as_str(),
                example.question.as_str(),
                example.segment.as_str(),
                label,
            ])
            .map_err(|e| Error::Dataset {
                location: path.display().to_string(),
                message: e.to_string(),
            })?;
    }
    writer.flush().map_err(|e| Error::io(path.display().to_string(), e))
}

#[derive(Debug, Serialize, Deserialize)]
struct SquadFile {
    data: Vec<SquadArticle>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SquadArticle {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    title: Option<String>,
    paragraphs: Vec<SquadParagraph>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SquadParagraph {
    context: String,
    qas: Vec<SquadQa>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SquadQa {
    id: String,
    question: String,
    answers: Vec<SquadAnswer>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SquadAnswer {
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    answer_start: Option<u64>,
}

/// Loads PolicyQA from its reading-comprehension JSON shape, one example
/// per question with all reference answers retained.
pub fn load_policyqa(path: impl AsRef<Path>) -> Result<Vec<QAExample>> {
    let path = path.as_ref();
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let file: SquadFile =
        serde_json::from_str(&raw).map_err(|e| Error::json(path.display().to_string(), e))?;
    let mut examples = Vec::new();
    let mut seen = HashSet::new();
    for (ai, article) in file.data.iter().enumerate() {
        for (pi, paragraph) in article.paragraphs.iter().enumerate() {
            let location = |qi: usize| {
                format!(
                    "{}: data[{ai}].paragraphs[{pi}].qas[{qi}]",
                    path.display()
                )
            };
            if paragraph.context.trim().is_empty() {
                return Err(Error::Dataset {
                    location: format!("{}: data[{ai}].paragraphs[{pi}]", path.display()),
                    message: "empty context".into(),
                });
            }
            for (qi, qa) in paragraph.qas.iter().enumerate() {
                if qa.id.is_empty() || qa.question.trim().is_empty() {
                    return Err(Error::Dataset {
                        location: location(qi),
                        message: "empty id or question".into(),
                    });
                }
                if !seen.insert(qa.id.clone()) {
                    return Err(Error::Dataset {
                        location: location(qi),
                        message: format!("duplicate qa id '{}'", qa.id),
                    });
                }
                if qa.answers.is_empty() {
                    return Err(Error::Dataset {
                        location: location(qi),
                        message: "empty answers list".into(),
                    });
                }
                let spans: Vec<String> = qa.answers.iter().map(|a| a.text.clone()).collect();
                if spans.iter().any(|s| s.trim().is_empty()) {
                    return Err(Error::Dataset {
                        location: location(qi),
                        message: "empty answer text".into(),
                    });
                }
                examples.push(QAExample {
                    example_id: qa.id.clone(),
                    task: TaskKind::PolicyExtraction,
                    dialect_id: "sae".into(),
                    question: qa.question.clone(),
                    sae_reference_question: None,
                    segment: paragraph.context.clone(),
                    gold: GoldAnswer::Spans(spans),
                });
            }
        }
    }
    Ok(examples)
}

/// Writes extraction examples back out in the PolicyQA JSON shape, one
/// question per paragraph. Reloading reproduces an equal list.
pub fn write_policyqa(examples: &[QAExample], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut paragraphs = Vec::new();
    for example in examples {
        let spans = match &example.gold {
            GoldAnswer::Spans(spans) => spans,
            GoldAnswer::Classification(_) => {
                return Err(Error::Dataset {
                    location: path.display().to_string(),
                    message: format!(
                        "example '{}' is not an extraction example",
                        example.example_id
                    ),
                })
            }
        };
        paragraphs.push(SquadParagraph {
            context: example.segment.clone(),
            qas: vec![SquadQa {
                id: example.example_id.clone(),
                question: example.question.clone(),
                answers: spans
                    .iter()
                    .map(|text| SquadAnswer {
                        text: text.clone(),
                        answer_start: None,
                    })
                    .collect(),
            }],
        });
    }
    let file = SquadFile {
        data: vec![SquadArticle {
            title: None,
            paragraphs,
        }],
    };
    let json = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::json(path.display().to_string(), e))?;
    fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Loads gold answers keyed by example id, picking the loader from the
/// file extension: `.tsv` for classification, `.json` for extraction.
pub fn load_gold(path: impl AsRef<Path>) -> Result<HashMap<String, GoldAnswer>> {
    let path = path.as_ref();
    let extension = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    let examples = match extension {
        "tsv" => load_privacyqa(path)?,
        "json" => load_policyqa(path)?,
        other => {
            return Err(Error::Dataset {
                location: path.display().to_string(),
                message: format!("unsupported gold file extension '{other}'"),
            })
        }
    };
    Ok(examples
        .into_iter()
        .map(|e| (e.example_id, e.gold))
        .collect())
}

#[derive(Debug, Deserialize)]
struct VariantRecord {
    example_id: String,
    question: String,
}

/// Pairs each example with its pre-translated dialect-variant question.
/// The variant file must cover every example id; segments, golds, and
/// counts are never changed.
pub fn attach_dialect_variants(
    examples: &[QAExample],
    variant_path: impl AsRef<Path>,
    dialect_id: &str,
) -> Result<Vec<QAExample>> {
    let path = variant_path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let reader = BufReader::new(file);
    let mut variants: HashMap<String, String> = HashMap::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: VariantRecord = serde_json::from_str(&line)
            .map_err(|e| Error::json(format!("{}:{}", path.display(), index + 1), e))?;
        if record.question.trim().is_empty() {
            return Err(Error::Dataset {
                location: format!("{}:{}", path.display(), index + 1),
                message: format!("empty variant question for '{}'", record.example_id),
            });
        }
        if variants
            .insert(record.example_id.clone(), record.question)
            .is_some()
        {
            return Err(Error::Dataset {
                location: format!("{}:{}", path.display(), index + 1),
                message: format!("duplicate variant for '{}'", record.example_id),
            });
        }
    }
    let missing: Vec<&str> = examples
        .iter()
        .filter(|e| !variants.contains_key(&e.example_id))
        .map(|e| e.example_id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Dataset {
            location: path.display().to_string(),
            message: format!(
                "variant file misses {} example id(s): {}",
                missing.len(),
                missing.join(", ")
            ),
        });
    }
    Ok(examples
        .iter()
        .map(|example| {
            let mut attached = example.clone();
            attached.question = variants[&example.example_id].clone();
            attached.sae_reference_question = Some(example.question.clone());
            attached.dialect_id = dialect_id.to_string();
            attached
        })
        .collect())
}
