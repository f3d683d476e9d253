//! Scoring of persisted runs into per-dialect report tables, plus
//! deterministic plain-text and CSV rendering.
//!
//! A scored run yields two rows, `initial` and `final`, each holding the
//! per-dialect scores and the disparity summary. The CSV format is long
//! form (`section,label,field,value`) with full-precision values so a
//! rendered table parses back to an equal table; the plain format rounds
//! half-up to 3 decimals for display.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datasets::{load_gold, GoldAnswer};
use crate::error::{Error, Result};
use crate::metrics::{
    classification_f1, disparity, override_stats, round_half_up_3, token_f1, DialectScore,
    OverrideStats,
};
use crate::orchestrator::{RefinementTrace, Verdict, VerdictValue};
use crate::prompt::TaskKind;
use crate::runner::load_completed_traces;

/// One scored configuration: a label plus per-dialect scores and the
/// disparity columns derived from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    pub scores: Vec<DialectScore>,
    pub avg: f64,
    pub avg_diff: f64,
    pub max_diff: f64,
}

/// Initial-versus-final average, the refinement ablation summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationBlock {
    pub initial: f64,
    #[serde(rename = "final")]
    pub final_: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReportTable {
    pub rows: Vec<ReportRow>,
    pub ablation: Option<AblationBlock>,
    pub overrides: Option<OverrideStats>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Plain,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<ReportFormat> {
        match s {
            "plain" => Ok(ReportFormat::Plain),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::Config(format!(
                "unknown report format '{other}' (expected plain or csv)"
            ))),
        }
    }
}

#[derive(Clone, Copy)]
enum VerdictColumn {
    Initial,
    Final,
}

fn column_verdict(trace: &RefinementTrace, column: VerdictColumn) -> &Verdict {
    match column {
        VerdictColumn::Initial => &trace.initial_verdict,
        VerdictColumn::Final => &trace.final_verdict,
    }
}

fn dialect_order(traces: &[RefinementTrace]) -> Vec<String> {
    let mut ids: BTreeSet<String> = traces.iter().map(|t| t.dialect_id.clone()).collect();
    let mut order = Vec::new();
    if ids.remove("sae") {
        order.push("sae".to_string());
    }
    order.extend(ids);
    order
}

fn score_dialect(
    traces: &[&RefinementTrace],
    golds: &HashMap<String, GoldAnswer>,
    task: TaskKind,
    column: VerdictColumn,
) -> Result<f64> {
    match task {
        TaskKind::PrivacyClassification => {
            let mut predictions = Vec::with_capacity(traces.len());
            let mut gold_labels = Vec::with_capacity(traces.len());
            for trace in traces {
                let verdict = column_verdict(trace, column);
                let VerdictValue::Label(prediction) = verdict.value else {
                    return Err(Error::Scoring(format!(
                        "trace '{}' carries a span verdict in a classification run",
                        trace.example_id
                    )));
                };
                let GoldAnswer::Classification(gold) = &golds[&trace.example_id] else {
                    return Err(Error::Scoring(format!(
                        "gold for '{}' is not a classification label",
                        trace.example_id
                    )));
                };
                predictions.push(prediction);
                gold_labels.push(*gold);
            }
            classification_f1(&predictions, &gold_labels)
        }
        TaskKind::PolicyExtraction => {
            let mut sum = 0.0;
            for trace in traces {
                let verdict = column_verdict(trace, column);
                let VerdictValue::Span(span) = &verdict.value else {
                    return Err(Error::Scoring(format!(
                        "trace '{}' carries a label verdict in an extraction run",
                        trace.example_id
                    )));
                };
                let GoldAnswer::Spans(spans) = &golds[&trace.example_id] else {
                    return Err(Error::Scoring(format!(
                        "gold for '{}' is not a span list",
                        trace.example_id
                    )));
                };
                sum += token_f1(span, spans)?;
            }
            Ok(sum / traces.len() as f64)
        }
    }
}

fn build_row(
    label: &str,
    order: &[String],
    by_dialect: &HashMap<String, Vec<&RefinementTrace>>,
    golds: &HashMap<String, GoldAnswer>,
    task: TaskKind,
    column: VerdictColumn,
) -> Result<ReportRow> {
    let mut scores = Vec::with_capacity(order.len());
    for dialect_id in order {
        let traces = &by_dialect[dialect_id];
        scores.push(DialectScore {
            dialect_id: dialect_id.clone(),
            score: score_dialect(traces, golds, task, column)?,
            n_examples: traces.len(),
        });
    }
    let summary = disparity(&scores)?;
    Ok(ReportRow {
        label: label.to_string(),
        scores,
        avg: summary.avg,
        avg_diff: summary.avg_diff,
        max_diff: summary.max_diff,
    })
}

/// Scores loaded traces against gold answers: per-dialect rows for the
/// initial and final verdicts, the initial-vs-final ablation, and the
/// override impact block. Every trace must have a matching gold and all
/// traces must belong to the same task.
pub fn score_traces(
    traces: &[RefinementTrace],
    golds: &HashMap<String, GoldAnswer>,
) -> Result<ReportTable> {
    if traces.is_empty() {
        return Err(Error::Scoring("no traces to score".into()));
    }
    let task = traces[0].task;
    if traces.iter().any(|t| t.task != task) {
        return Err(Error::Scoring("traces mix classification and extraction".into()));
    }
    let missing: Vec<&str> = traces
        .iter()
        .filter(|t| !golds.contains_key(&t.example_id))
        .map(|t| t.example_id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Scoring(format!(
            "{} trace(s) have no gold answer: {}",
            missing.len(),
            missing.join(", ")
        )));
    }

    let order = dialect_order(traces);
    let mut by_dialect: HashMap<String, Vec<&RefinementTrace>> = HashMap::new();
    for trace in traces {
        by_dialect.entry(trace.dialect_id.clone()).or_default().push(trace);
    }

    let initial = build_row("initial", &order, &by_dialect, golds, task, VerdictColumn::Initial)?;
    let final_ = build_row("final", &order, &by_dialect, golds, task, VerdictColumn::Final)?;
    let ablation = AblationBlock {
        initial: initial.avg,
        final_: final_.avg,
    };
    let overrides = override_stats(traces, golds)?;
    Ok(ReportTable {
        rows: vec![initial, final_],
        ablation: Some(ablation),
        overrides: Some(overrides),
    })
}

/// File-level entry point: loads traces (refusing unresolved failures)
/// and gold answers, then scores.
pub fn score_run(trace_paths: &[PathBuf], gold_path: impl AsRef<Path>) -> Result<ReportTable> {
    let traces = load_completed_traces(trace_paths)?;
    let golds = load_gold(gold_path)?;
    score_traces(&traces, &golds)
}

/// Mean BLEU and ROUGE-L of trace translations against the SAE reference
/// questions carried by the examples, matched on (dialect, example).
pub fn score_translations(
    traces: &[RefinementTrace],
    examples: &[crate::datasets::QAExample],
) -> Result<crate::runner::TranslationScore> {
    if traces.is_empty() {
        return Err(Error::Scoring("no traces to score".into()));
    }
    let references: HashMap<(String, String), String> = examples
        .iter()
        .filter_map(|e| {
            e.sae_reference_question.as_ref().map(|reference| {
                (
                    (e.dialect_id.clone(), e.example_id.clone()),
                    reference.clone(),
                )
            })
        })
        .collect();
    let mut bleu_sum = 0.0;
    let mut rouge_sum = 0.0;
    for trace in traces {
        let key = (trace.dialect_id.clone(), trace.example_id.clone());
        let reference = references.get(&key).ok_or_else(|| {
            Error::Scoring(format!(
                "no SAE reference for {}/{}",
                trace.dialect_id, trace.example_id
            ))
        })?;
        bleu_sum += crate::metrics::bleu(&trace.translated_question, std::slice::from_ref(reference))?;
        rouge_sum += crate::metrics::rouge_l(&trace.translated_question, reference)?;
    }
    let n = traces.len();
    Ok(crate::runner::TranslationScore {
        dialect_id: "all".into(),
        n,
        bleu: bleu_sum / n as f64,
        rouge_l: rouge_sum / n as f64,
    })
}

fn display3(x: f64) -> String {
    format!("{:.3}", round_half_up_3(x))
}

fn render_plain(table: &ReportTable) -> String {
    let mut out = String::new();
    if !table.rows.is_empty() {
        let dialects: Vec<&str> = table.rows[0]
            .scores
            .iter()
            .map(|s| s.dialect_id.as_str())
            .collect();
        let label_width = table
            .rows
            .iter()
            .map(|r| r.label.len())
            .chain(["row".len()])
            .max()
            .unwrap_or(3);
        let mut widths: Vec<usize> = dialects.iter().map(|d| d.len().max(5)).collect();
        widths.extend([5usize, 8, 8]);
        let headers: Vec<String> = dialects
            .iter()
            .map(|d| d.to_string())
            .chain(["avg".into(), "avg_diff".into(), "max_diff".into()])
            .collect();

        let _ = write!(out, "{:<label_width$}", "row");
        for (header, width) in headers.iter().zip(&widths) {
            let _ = write!(out, "  {header:>width$}");
        }
        out.push('\n');
        for row in &table.rows {
            let _ = write!(out, "{:<label_width$}", row.label);
            let values: Vec<String> = row
                .scores
                .iter()
                .map(|s| display3(s.score))
                .chain([display3(row.avg), display3(row.avg_diff), display3(row.max_diff)])
                .collect();
            for (value, width) in values.iter().zip(&widths) {
                let _ = write!(out, "  {value:>width$}");
            }
            out.push('\n');
        }
        let counts: Vec<String> = table.rows[0]
            .scores
            .iter()
            .map(|s| format!("{} n={}", s.dialect_id, s.n_examples))
            .collect();
        let _ = writeln!(out, "\nexamples per dialect: {}", counts.join(", "));
    }
    if let Some(ablation) = &table.ablation {
        let _ = writeln!(
            out,
            "\nrefinement ablation: initial avg {}, final avg {}",
            display3(ablation.initial),
            display3(ablation.final_)
        );
    }
    if let Some(overrides) = &table.overrides {
        let _ = writeln!(
            out,
            "\noverrides: {} of {} traces (rate {})",
            overrides.n_overrides,
            overrides.n_traces,
            display3(overrides.override_rate)
        );
        let _ = writeln!(
            out,
            "  beneficial {}, detrimental {}, neutral {}",
            display3(overrides.beneficial_rate),
            display3(overrides.detrimental_rate),
            display3(overrides.neutral_rate)
        );
    }
    out
}

fn render_csv(table: &ReportTable) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let emit = |writer: &mut csv::Writer<Vec<u8>>,
                section: &str,
                label: &str,
                field: &str,
                value: String|
     -> Result<()> {
        writer
            .write_record([section, label, field, value.as_str()])
            .map_err(|e| Error::Scoring(format!("csv rendering: {e}")))
    };
    writer
        .write_record(["section", "label", "field", "value"])
        .map_err(|e| Error::Scoring(format!("csv rendering: {e}")))?;
    for row in &table.rows {
        for score in &row.scores {
            emit(
                &mut writer,
                "row",
                &row.label,
                &format!("dialect:{}", score.dialect_id),
                format!("{}", score.score),
            )?;
            emit(
                &mut writer,
                "row",
                &row.label,
                &format!("n:{}", score.dialect_id),
                format!("{}", score.n_examples),
            )?;
        }
        emit(&mut writer, "row", &row.label, "avg", format!("{}", row.avg))?;
        emit(&mut writer, "row", &row.label, "avg_diff", format!("{}", row.avg_diff))?;
        emit(&mut writer, "row", &row.label, "max_diff", format!("{}", row.max_diff))?;
    }
    if let Some(ablation) = &table.ablation {
        emit(&mut writer, "ablation", "", "initial", format!("{}", ablation.initial))?;
        emit(&mut writer, "ablation", "", "final", format!("{}", ablation.final_))?;
    }
    if let Some(overrides) = &table.overrides {
        emit(&mut writer, "overrides", "", "n_traces", format!("{}", overrides.n_traces))?;
        emit(&mut writer, "overrides", "", "n_overrides", format!("{}", overrides.n_overrides))?;
        emit(&mut writer, "overrides", "", "override_rate", format!("{}", overrides.override_rate))?;
        emit(&mut writer, "overrides", "", "beneficial_rate", format!("{}", overrides.beneficial_rate))?;
        emit(&mut writer, "overrides", "", "detrimental_rate", format!("{}", overrides.detrimental_rate))?;
        emit(&mut writer, "overrides", "", "neutral_rate", format!("{}", overrides.neutral_rate))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::Scoring(format!("csv rendering: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Scoring(format!("csv rendering: {e}")))
}

/// Renders a table deterministically. CSV keeps full precision and
/// round-trips through [`parse_csv_report`]; plain text rounds half-up to
/// 3 decimals.
pub fn render_report(table: &ReportTable, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Plain => Ok(render_plain(table)),
        ReportFormat::Csv => render_csv(table),
    }
}

fn parse_value<T: std::str::FromStr>(field: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| {
        Error::Scoring(format!("csv field '{field}' has unparseable value '{value}'"))
    })
}

/// Parses a CSV document produced by [`render_report`] back into an
/// equal table.
pub fn parse_csv_report(text: &str) -> Result<ReportTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let mut table = ReportTable::default();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Scoring(format!("csv parsing: {e}")))?;
        let get = |i: usize| record.get(i).unwrap_or("").to_string();
        let (section, label, field, value) = (get(0), get(1), get(2), get(3));
        match section.as_str() {
            "row" => {
                if table.rows.last().map(|r| r.label.as_str()) != Some(label.as_str()) {
                    table.rows.push(ReportRow {
                        label: label.clone(),
                        scores: Vec::new(),
                        avg: 0.0,
                        avg_diff: 0.0,
                        max_diff: 0.0,
                    });
                }
                let row = table.rows.last_mut().expect("row present");
                if let Some(dialect_id) = field.strip_prefix("dialect:") {
                    row.scores.push(DialectScore {
                        dialect_id: dialect_id.to_string(),
                        score: parse_value(&field, &value)?,
                        n_examples: 0,
                    });
                } else if let Some(dialect_id) = field.strip_prefix("n:") {
                    let score = row
                        .scores
                        .iter_mut()
                        .find(|s| s.dialect_id == dialect_id)
                        .ok_or_else(|| {
                            Error::Scoring(format!("csv count for unknown dialect '{dialect_id}'"))
                        })?;
                    score.n_examples = parse_value(&field, &value)?;
                } else {
                    match field.as_str() {
                        "avg" => row.avg = parse_value(&field, &value)?,
                        "avg_diff" => row.avg_diff = parse_value(&field, &value)?,
                        "max_diff" => row.max_diff = parse_value(&field, &value)?,
                        other => {
                            return Err(Error::Scoring(format!("unknown csv row field '{other}'")))
                        }
                    }
                }
            }
            "ablation" => {
                let ablation = table.ablation.get_or_insert(AblationBlock {
                    initial: 0.0,
                    final_: 0.0,
                });
                match field.as_str() {
                    "initial" => ablation.initial = parse_value(&field, &value)?,
                    "final" => ablation.final_ = parse_value(&field, &value)?,
                    other => {
                        return Err(Error::Scoring(format!(
                            "unknown csv ablation field '{other}'"
                        )))
                    }
                }
            }
            "overrides" => {
                let overrides = table.overrides.get_or_insert(OverrideStats {
                    n_traces: 0,
                    n_overrides: 0,
                    override_rate: 0.0,
                    beneficial_rate: 0.0,
                    detrimental_rate: 0.0,
                    neutral_rate: 0.0,
                });
                match field.as_str() {
                    "n_traces" => overrides.n_traces = parse_value(&field, &value)?,
                    "n_overrides" => overrides.n_overrides = parse_value(&field, &value)?,
                    "override_rate" => overrides.override_rate = parse_value(&field, &value)?,
                    "beneficial_rate" => overrides.beneficial_rate = parse_value(&field, &value)?,
                    "detrimental_rate" => {
                        overrides.detrimental_rate = parse_value(&field, &value)?
                    }
                    "neutral_rate" => overrides.neutral_rate = parse_value(&field, &value)?,
                    other => {
                        return Err(Error::Scoring(format!(
                            "unknown csv overrides field '{other}'"
                        )))
                    }
                }
            }
            other => {
                return Err(Error::Scoring(format!("unknown csv section '{other}'")));
            }
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::Label;
    use crate::orchestrator::{PromptMode, Verdict};

    fn label_verdict(label: Label) -> Verdict {
        Verdict {
            value: VerdictValue::Label(label),
            reasoning: "because".into(),
        }
    }

    fn trace(
        example_id: &str,
        dialect_id: &str,
        initial: Label,
        final_: Label,
    ) -> RefinementTrace {
        RefinementTrace {
            example_id: example_id.into(),
            dialect_id: dialect_id.into(),
            task: TaskKind::PrivacyClassification,
            mode: PromptMode::ZeroShot,
            translated_question: "Will my data be shared?".into(),
            turns: Vec::new(),
            initial_verdict: label_verdict(initial),
            final_verdict: label_verdict(final_),
            iterations: u32::from(initial != final_),
            override_flag: initial != final_,
            loop_exhausted: false,
            parse_failures: Vec::new(),
        }
    }

    fn golds_for(traces: &[RefinementTrace], gold: Label) -> HashMap<String, GoldAnswer> {
        traces
            .iter()
            .map(|t| (t.example_id.clone(), GoldAnswer::Classification(gold)))
            .collect()
    }

    fn two_dialect_fixture() -> (Vec<RefinementTrace>, HashMap<String, GoldAnswer>) {
        // Per dialect, 4 examples, all gold Relevant. sae: initial gets 3
        // right, final all 4. raave: initial 2 right, final 3.
        let traces = vec![
            trace("e1", "sae", Label::Relevant, Label::Relevant),
            trace("e2", "sae", Label::Relevant, Label::Relevant),
            trace("e3", "sae", Label::Relevant, Label::Relevant),
            trace("e4", "sae", Label::Irrelevant, Label::Relevant),
            trace("e5", "raave", Label::Relevant, Label::Relevant),
            trace("e6", "raave", Label::Relevant, Label::Relevant),
            trace("e7", "raave", Label::Irrelevant, Label::Relevant),
            trace("e8", "raave", Label::Irrelevant, Label::Irrelevant),
        ];
        let golds = golds_for(&traces, Label::Relevant);
        (traces, golds)
    }

    #[test]
    fn scores_two_dialect_fixture_by_hand() {
        let (traces, golds) = two_dialect_fixture();
        let table = score_traces(&traces, &golds).unwrap();
        assert_eq!(table.rows.len(), 2);
        let initial = &table.rows[0];
        assert_eq!(initial.label, "initial");
        assert_eq!(initial.scores[0].dialect_id, "sae");
        // sae initial: TP=3, FN=1 -> P=1, R=.75, F1=6/7.
        assert!((initial.scores[0].score - 6.0 / 7.0).abs() < 1e-12);
        // raave initial: TP=2, FN=2 -> P=1, R=.5, F1=2/3.
        assert!((initial.scores[1].score - 2.0 / 3.0).abs() < 1e-12);
        let final_ = &table.rows[1];
        assert_eq!(final_.scores[0].score, 1.0);
        // raave final: TP=3, FN=1 -> 6/7.
        assert!((final_.scores[1].score - 6.0 / 7.0).abs() < 1e-12);
        assert_eq!(initial.scores[0].n_examples, 4);

        let ablation = table.ablation.as_ref().unwrap();
        assert!((ablation.initial - initial.avg).abs() < 1e-15);
        assert!((ablation.final_ - final_.avg).abs() < 1e-15);

        // 3 overrides (e4, e7 beneficial wrong->right; none detrimental).
        let overrides = table.overrides.as_ref().unwrap();
        assert_eq!(overrides.n_traces, 8);
        assert_eq!(overrides.n_overrides, 2);
        assert!((overrides.override_rate - 0.25).abs() < 1e-12);
        assert_eq!(overrides.beneficial_rate, 1.0);
        assert_eq!(overrides.detrimental_rate, 0.0);
    }

    #[test]
    fn unchanged_finals_mirror_initials() {
        let traces = vec![
            trace("e1", "sae", Label::Relevant, Label::Relevant),
            trace("e2", "sae", Label::Irrelevant, Label::Irrelevant),
            trace("e3", "raave", Label::Relevant, Label::Relevant),
            trace("e4", "raave", Label::Irrelevant, Label::Irrelevant),
        ];
        let golds = golds_for(&traces, Label::Relevant);
        let table = score_traces(&traces, &golds).unwrap();
        assert_eq!(table.rows[0].scores, table.rows[1].scores);
        assert_eq!(table.overrides.as_ref().unwrap().override_rate, 0.0);
    }

    #[test]
    fn sae_column_comes_first() {
        let traces = vec![
            trace("e1", "aboriginal", Label::Relevant, Label::Relevant),
            trace("e2", "sae", Label::Relevant, Label::Relevant),
            trace("e3", "jamaican", Label::Relevant, Label::Relevant),
        ];
        let golds = golds_for(&traces, Label::Relevant);
        let table = score_traces(&traces, &golds).unwrap();
        let order: Vec<&str> = table.rows[0]
            .scores
            .iter()
            .map(|s| s.dialect_id.as_str())
            .collect();
        assert_eq!(order, vec!["sae", "aboriginal", "jamaican"]);
    }

    #[test]
    fn missing_gold_is_refused_with_ids() {
        let traces = vec![
            trace("e1", "sae", Label::Relevant, Label::Relevant),
            trace("e2", "raave", Label::Relevant, Label::Relevant),
        ];
        let mut golds = golds_for(&traces, Label::Relevant);
        golds.remove("e2");
        let err = score_traces(&traces, &golds).unwrap_err().to_string();
        assert!(err.contains("e2"));
    }

    #[test]
    fn csv_round_trips_to_an_equal_table() {
        let (traces, golds) = two_dialect_fixture();
        let table = score_traces(&traces, &golds).unwrap();
        let csv = render_report(&table, ReportFormat::Csv).unwrap();
        let back = parse_csv_report(&csv).unwrap();
        assert_eq!(back, table);
    }

    #[test]
    fn empty_table_renders_header_only_csv() {
        let table = ReportTable::default();
        let csv = render_report(&table, ReportFormat::Csv).unwrap();
        assert_eq!(csv, "section,label,field,value\n");
        assert_eq!(parse_csv_report(&csv).unwrap(), table);
    }

    #[test]
    fn plain_rendering_is_deterministic_and_rounded() {
        let (traces, golds) = two_dialect_fixture();
        let table = score_traces(&traces, &golds).unwrap();
        let a = render_report(&table, ReportFormat::Plain).unwrap();
        let b = render_report(&table, ReportFormat::Plain).unwrap();
        assert_eq!(a, b);
        assert!(a.contains("0.857"));
        assert!(a.contains("initial"));
        assert!(a.contains("overrides: 2 of 8 traces"));
    }

    #[test]
    fn translation_identity_scores_100() {
        let mut traces = vec![trace("e1", "raave", Label::Relevant, Label::Relevant)];
        traces[0].translated_question = "Will my test results be shared?".into();
        let examples = vec![crate::datasets::QAExample {
            example_id: "e1".into(),
            task: TaskKind::PrivacyClassification,
            dialect_id: "raave".into(),
            question: "gon my test results be shared?".into(),
            sae_reference_question: Some("Will my test results be shared?".into()),
            segment: "segment".into(),
            gold: GoldAnswer::Classification(Label::Relevant),
        }];
        let score = score_translations(&traces, &examples).unwrap();
        assert_eq!(score.bleu, 100.0);
        assert_eq!(score.rouge_l, 100.0);
        assert_eq!(score.n, 1);
    }

    #[test]
    fn translation_without_reference_errors() {
        let traces = vec![trace("e1", "raave", Label::Relevant, Label::Relevant)];
        let err = score_translations(&traces, &[]).unwrap_err().to_string();
        assert!(err.contains("no SAE reference"));
    }
}
