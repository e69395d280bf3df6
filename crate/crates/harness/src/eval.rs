//! Scoring records against a method and aggregating per-tag accuracy, the
//! set-level All and All* scores, and class-weighted F1 for yes/no tags.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use timetom_core::generator::Gold;
use timetom_core::parser::{QuestionFlavor, ToMQuestion};
use timetom_core::solver::{BeliefSolver, KNOWS};
use timetom_pipeline::{run_pipeline, ModelBackend, PipelinePolicy};

use crate::dataset::DatasetRecord;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Pipeline(PipelinePolicy),
    /// Answers every question with the actual state of the world: the
    /// object's real place, or that every piece of information is known.
    RealityBaseline,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Pipeline(p) => p.mode.name(),
            Method::RealityBaseline => "reality_baseline",
        }
    }
}

/// Lowercases, turns punctuation into spaces and collapses whitespace.
pub fn normalize_text(text: &str) -> String {
    text.to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

fn contains_words(haystack: &str, needle: &str) -> bool {
    !needle.is_empty() && format!(" {haystack} ").contains(&format!(" {needle} "))
}

/// Candidates mentioned in `reply`, as whole words after normalization. A
/// candidate found only as part of a longer mentioned candidate is dropped.
pub fn mentioned_candidates<'c>(reply: &str, candidates: &'c [String]) -> Vec<&'c str> {
    let text = normalize_text(reply);
    let found: Vec<(&str, String)> =
        candidates.iter().map(|c| (c.as_str(), normalize_text(c))).filter(|(_, n)| contains_words(&text, n)).collect();
    found.iter().filter(|(_, n)| !found.iter().any(|(_, m)| m != n && contains_words(m, n))).map(|(c, _)| *c).collect()
}

/// The single candidate `reply` settles on; `None` when it names none or
/// several.
pub fn normalize_answer<'c>(reply: &str, candidates: &'c [String]) -> Option<&'c str> {
    match mentioned_candidates(reply, candidates).as_slice() {
        [one] => Some(one),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordResult {
    pub id: String,
    pub qtype: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub belief: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub set_id: Option<String>,
    pub gold: String,
    pub reply: String,
    pub predicted: Option<String>,
    pub correct: bool,
    pub calls: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Scores `reply` against the record's gold: `(correct, predicted)`.
pub fn score_reply(record: &DatasetRecord, reply: &str) -> (bool, Option<String>) {
    match &record.gold {
        Gold::List(names) => {
            let said: BTreeSet<&str> = mentioned_candidates(reply, &record.candidates).into_iter().collect();
            let gold: BTreeSet<&str> = names.iter().map(String::as_str).collect();
            (said == gold, Some(said.into_iter().collect::<Vec<_>>().join(", ")))
        }
        Gold::Text(gold) => {
            let fallback = [gold.clone()];
            let candidates = if record.candidates.is_empty() { &fallback[..] } else { &record.candidates };
            let predicted = normalize_answer(reply, candidates);
            (predicted == Some(gold.as_str()), predicted.map(str::to_string))
        }
    }
}

fn baseline_reply(record: &DatasetRecord) -> Result<String, String> {
    let (log, q) = record.prepare().map_err(|e| e.to_string())?;
    let solver = BeliefSolver::new(&log);
    match (q.flavor, &q.object) {
        (_, Some(object)) => {
            let reality = ToMQuestion::reality(object);
            Ok(solver.solve(&reality).map_err(|e| e.to_string())?.value.to_string())
        }
        (QuestionFlavor::Belief, None) => Ok(KNOWS.to_string()),
        (flavor, None) if flavor.is_list() => Ok(log.characters().iter().cloned().collect::<Vec<_>>().join(", ")),
        _ => Ok("yes".to_string()),
    }
}

pub fn run_record(record: &DatasetRecord, method: &Method, backend: &dyn ModelBackend) -> RecordResult {
    let outcome = match method {
        Method::RealityBaseline => baseline_reply(record).map(|r| (r, 0)),
        Method::Pipeline(policy) => record.prepare().map_err(|e| e.to_string()).and_then(|(_, q)| {
            run_pipeline(backend, &record.raw_story(), &q, policy)
                .map(|a| (a.final_answer, a.calls))
                .map_err(|e| e.to_string())
        }),
    };
    let (reply, calls, error) = match outcome {
        Ok((reply, calls)) => (reply, calls, None),
        Err(e) => {
            log::warn!("record {} failed: {e}", record.id);
            (String::new(), 0, Some(e))
        }
    };
    let (correct, predicted) = if error.is_some() { (false, None) } else { score_reply(record, &reply) };
    RecordResult {
        id: record.id.clone(),
        qtype: record.tags.qtype.clone(),
        belief: record.tags.belief.clone(),
        set_id: record.tags.set_id.clone(),
        gold: record.gold.as_text(),
        reply,
        predicted,
        correct,
        calls,
        error,
    }
}

/// Runs every record, `parallelism` at a time. Results come back in record
/// order whatever the completion order.
pub fn run_records(
    records: &[DatasetRecord],
    method: &Method,
    backend: &dyn ModelBackend,
    parallelism: usize,
) -> Vec<RecordResult> {
    let work = || records.par_iter().map(|r| run_record(r, method, backend)).collect();
    match rayon::ThreadPoolBuilder::new().num_threads(parallelism.max(1)).build() {
        Ok(pool) => pool.install(work),
        Err(e) => {
            log::warn!("falling back to the global thread pool: {e}");
            work()
        }
    }
}

pub fn evaluate(
    records: &[DatasetRecord],
    method: &Method,
    backend: &dyn ModelBackend,
    parallelism: usize,
) -> Result<EvalReport, AggregateError> {
    let results = run_records(records, method, backend, parallelism);
    aggregate_scores(method.name(), &results)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AggregateError {
    #[error("record {0} has no question type tag")]
    MissingTag(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagRow {
    pub tag: String,
    pub n: usize,
    pub accuracy: Option<f64>,
    /// List and yes/no both correct, over sets.
    pub all: Option<f64>,
    /// Every question of a set correct, over sets.
    pub all_star: Option<f64>,
    pub weighted_f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub records: usize,
    pub errors: usize,
    pub calls: usize,
    pub rows: Vec<TagRow>,
}

pub const OVERALL: &str = "overall";
pub const TRUE_BELIEF: &str = "true_belief";
pub const FALSE_BELIEF: &str = "false_belief";
pub const ANSWERABILITY_ALL: &str = "answerability_all";
pub const INFOACCESS_ALL: &str = "infoaccess_all";
pub const ALL_STAR: &str = "all_star";

/// Fixed leading row order; other tags follow alphabetically.
const TAG_ORDER: [&str; 13] = [
    OVERALL,
    TRUE_BELIEF,
    FALSE_BELIEF,
    "reality",
    "memory",
    "first",
    "second",
    "third-acyc",
    "third-cyc",
    "answerability_list",
    "answerability_binary",
    "infoaccess_list",
    "infoaccess_binary",
];

impl EvalReport {
    pub fn row(&self, tag: &str) -> Option<&TagRow> {
        self.rows.iter().find(|r| r.tag == tag)
    }

    pub fn accuracy(&self, tag: &str) -> Option<f64> {
        self.row(tag).and_then(|r| r.accuracy)
    }

    pub fn all_answerability(&self) -> Option<f64> {
        self.row(ANSWERABILITY_ALL).and_then(|r| r.all)
    }

    pub fn all_infoaccess(&self) -> Option<f64> {
        self.row(INFOACCESS_ALL).and_then(|r| r.all)
    }

    pub fn all_star(&self) -> Option<f64> {
        self.row(ALL_STAR).and_then(|r| r.all_star)
    }
}

fn percent(hits: usize, n: usize) -> Option<f64> {
    (n > 0).then(|| round2(100.0 * hits as f64 / n as f64))
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Class-weighted F1 over gold labels; a missing prediction counts as a
/// wrong label.
pub fn weighted_f1(pairs: &[(&str, Option<&str>)]) -> Option<f64> {
    if pairs.is_empty() {
        return None;
    }
    let classes: BTreeSet<&str> = pairs.iter().map(|(g, _)| *g).collect();
    let mut total = 0.0;
    for class in classes {
        let tp = pairs.iter().filter(|(g, p)| *g == class && *p == Some(class)).count() as f64;
        let support = pairs.iter().filter(|(g, _)| *g == class).count() as f64;
        let predicted = pairs.iter().filter(|(_, p)| *p == Some(class)).count() as f64;
        let f1 = if tp == 0.0 { 0.0 } else { 2.0 * tp / (support + predicted) };
        total += f1 * support;
    }
    Some(round2(100.0 * total / pairs.len() as f64))
}

fn accuracy_row(tag: &str, results: &[&RecordResult]) -> TagRow {
    let binary = tag.ends_with("_binary");
    let weighted_f1 = binary.then(|| {
        let pairs: Vec<(&str, Option<&str>)> =
            results.iter().map(|r| (r.gold.as_str(), r.predicted.as_deref())).collect();
        weighted_f1(&pairs)
    });
    TagRow {
        tag: tag.to_string(),
        n: results.len(),
        accuracy: percent(results.iter().filter(|r| r.correct).count(), results.len()),
        all: None,
        all_star: None,
        weighted_f1: weighted_f1.flatten(),
    }
}

/// Per-set All over the list and yes/no questions of one family.
fn all_row(tag: &str, family: &str, sets: &BTreeMap<&str, Vec<&RecordResult>>) -> Option<TagRow> {
    let (list, binary) = (format!("{family}_list"), format!("{family}_binary"));
    let mut n = 0;
    let mut hits = 0;
    for members in sets.values() {
        let relevant: Vec<&&RecordResult> = members.iter().filter(|r| r.qtype == list || r.qtype == binary).collect();
        let complete = relevant.iter().any(|r| r.qtype == list) && relevant.iter().any(|r| r.qtype == binary);
        if complete {
            n += 1;
            hits += usize::from(relevant.iter().all(|r| r.correct));
        }
    }
    (n > 0).then(|| TagRow {
        tag: tag.to_string(),
        n,
        accuracy: None,
        all: percent(hits, n),
        all_star: None,
        weighted_f1: None,
    })
}

pub fn aggregate_scores(method: &str, results: &[RecordResult]) -> Result<EvalReport, AggregateError> {
    if let Some(r) = results.iter().find(|r| r.qtype.is_empty()) {
        return Err(AggregateError::MissingTag(r.id.clone()));
    }
    let mut by_tag: BTreeMap<String, Vec<&RecordResult>> = BTreeMap::new();
    for r in results {
        by_tag.entry(r.qtype.clone()).or_default().push(r);
        match r.belief.as_deref() {
            Some("true") => by_tag.entry(TRUE_BELIEF.into()).or_default().push(r),
            Some("false") => by_tag.entry(FALSE_BELIEF.into()).or_default().push(r),
            _ => {}
        }
    }

    let mut rows = Vec::new();
    if !results.is_empty() {
        rows.push(accuracy_row(OVERALL, &results.iter().collect::<Vec<_>>()));
    }
    for tag in TAG_ORDER.iter().skip(1) {
        if let Some(members) = by_tag.remove(*tag) {
            rows.push(accuracy_row(tag, &members));
        }
    }
    for (tag, members) in &by_tag {
        rows.push(accuracy_row(tag, members));
    }

    let mut sets: BTreeMap<&str, Vec<&RecordResult>> = BTreeMap::new();
    for r in results {
        if let Some(id) = r.set_id.as_deref() {
            sets.entry(id).or_default().push(r);
        }
    }
    rows.extend(all_row(ANSWERABILITY_ALL, "answerability", &sets));
    rows.extend(all_row(INFOACCESS_ALL, "infoaccess", &sets));
    if !sets.is_empty() {
        let hits = sets.values().filter(|members| members.iter().all(|r| r.correct)).count();
        rows.push(TagRow {
            tag: ALL_STAR.to_string(),
            n: sets.len(),
            accuracy: None,
            all: None,
            all_star: percent(hits, sets.len()),
            weighted_f1: None,
        });
    }

    Ok(EvalReport {
        method: method.to_string(),
        records: results.len(),
        errors: results.iter().filter(|r| r.error.is_some()).count(),
        calls: results.iter().map(|r| r.calls).sum(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cands(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn normalizer_picks_the_single_mentioned_candidate() {
        let c = cands(&["basket", "box", "table"]);
        assert_eq!(normalize_answer("The celery is in the BOX.", &c), Some("box"));
        assert_eq!(normalize_answer("Considering the feedback, the answer is box.", &c), Some("box"));
        assert_eq!(normalize_answer("Either the box or the basket.", &c), None);
        assert_eq!(normalize_answer("I have no idea.", &c), None);
        // Whole words only: "boxes" does not name the box.
        assert_eq!(normalize_answer("Among the boxes.", &c), None);
    }

    #[test]
    fn longer_candidate_wins_over_its_part() {
        let c = cands(&["knows", "does not know", "green box", "box"]);
        assert_eq!(normalize_answer("Ann does not know.", &c), Some("does not know"));
        assert_eq!(normalize_answer("It is in the green box", &c), Some("green box"));
    }

    #[test]
    fn f1_of_perfect_and_inverted_predictions() {
        assert_eq!(weighted_f1(&[("yes", Some("yes")), ("no", Some("no"))]), Some(100.0));
        assert_eq!(weighted_f1(&[("yes", Some("no")), ("no", Some("yes"))]), Some(0.0));
        // yes: tp 1, support 2, predicted 1 -> 2/3; no: tp 1, support 1, predicted 2 -> 2/3.
        assert_eq!(weighted_f1(&[("yes", Some("yes")), ("yes", Some("no")), ("no", Some("no"))]), Some(66.67));
        assert_eq!(weighted_f1(&[]), None);
    }

    #[test]
    fn missing_tag() {
        let r = RecordResult {
            id: "x".into(),
            qtype: String::new(),
            belief: None,
            set_id: None,
            gold: "a".into(),
            reply: "a".into(),
            predicted: Some("a".into()),
            correct: true,
            calls: 0,
            error: None,
        };
        assert_eq!(aggregate_scores("m", &[r]), Err(AggregateError::MissingTag("x".into())));
    }

    #[test]
    fn empty_results_give_an_empty_report() {
        let report = aggregate_scores("m", &[]).unwrap();
        assert!(report.rows.is_empty());
        assert_eq!(report.records, 0);
    }
}
