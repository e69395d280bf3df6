//! Evaluation records and the JSONL formats they are read from.
//!
//! `generated` files hold one generated instance per line, expanded into one
//! record per question. `tomi_jsonl` and `fantom_jsonl` hold one flat record
//! per line:
//!
//! ```json
//! {"id": "r1", "story": "...", "question": "...", "candidates": ["a", "b"],
//!  "gold": "a", "qtype": "first", "belief": "false", "set_id": "s1"}
//! ```
//!
//! `story` may also be a list of lines. Fields not listed here are kept as-is
//! in [`DatasetRecord::extra`].

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use timetom_core::event::{annotate_timeline, EventLog, RawStory, ScenarioKind, TimePoint};
use timetom_core::generator::{Gold, LabeledInstance, QuestionTags};
use timetom_core::parser::{parse_any, QuestionParser, ToMQuestion};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    Generated,
    TomiJsonl,
    FantomJsonl,
}

impl DatasetFormat {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "generated" => Some(Self::Generated),
            "tomi_jsonl" | "tomi" => Some(Self::TomiJsonl),
            "fantom_jsonl" | "fantom" => Some(Self::FantomJsonl),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("schema error on line {line}: {message}")]
    Schema { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub kind: ScenarioKind,
    /// Untimed story or dialogue, one sentence or utterance per line.
    pub story: String,
    pub question: String,
    pub candidates: Vec<String>,
    pub gold: Gold,
    pub tags: QuestionTags,
    /// Structured question when the source provides one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structured: Option<ToMQuestion>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, Value>,
}

impl DatasetRecord {
    pub fn raw_story(&self) -> RawStory {
        RawStory::from_text(&self.story, self.kind)
    }

    /// Event log of the story and the structured question, with the record's
    /// candidates attached.
    pub fn prepare(&self) -> Result<(EventLog, ToMQuestion), timetom_core::Error> {
        let timeline = annotate_timeline(&self.raw_story())?;
        let log = parse_any(&timeline)?;
        let question = match &self.structured {
            Some(q) => q.clone(),
            None => QuestionParser::new(&log).with_transcript(&timeline).parse(&self.question)?,
        };
        Ok((log, question.with_candidates(&self.candidates)))
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum StoryField {
    Text(String),
    Lines(Vec<String>),
}

#[derive(Debug, Deserialize)]
struct FlatRecord {
    id: String,
    story: StoryField,
    question: String,
    #[serde(default)]
    candidates: Vec<String>,
    gold: Gold,
    qtype: String,
    #[serde(default)]
    belief: Option<String>,
    #[serde(default)]
    set_id: Option<String>,
    /// Utterance times that establish the asked-about information.
    #[serde(default)]
    info_times: Option<BTreeSet<TimePoint>>,
    #[serde(flatten)]
    extra: BTreeMap<String, Value>,
}

/// One record per question of a generated instance.
pub fn records_from_instance(inst: &LabeledInstance) -> Vec<DatasetRecord> {
    let story = inst.story.entries().iter().map(|e| e.text.as_str()).collect::<Vec<_>>().join("\n");
    inst.questions
        .iter()
        .enumerate()
        .map(|(k, q)| DatasetRecord {
            id: format!("{}#{k}", inst.id),
            kind: inst.story.kind(),
            story: story.clone(),
            question: q.text.clone(),
            candidates: q.question.candidates.clone(),
            gold: q.gold.clone(),
            tags: q.tags.clone(),
            structured: Some(q.question.clone()),
            extra: BTreeMap::new(),
        })
        .collect()
}

fn schema(line: usize, message: impl ToString) -> DatasetError {
    DatasetError::Schema { line, message: message.to_string() }
}

fn check_gold(line: usize, record: &DatasetRecord) -> Result<(), DatasetError> {
    if record.candidates.is_empty() {
        return Ok(());
    }
    let ok = match &record.gold {
        Gold::Text(g) => record.candidates.contains(g),
        Gold::List(names) => names.iter().all(|n| record.candidates.contains(n)),
    };
    if ok {
        Ok(())
    } else {
        Err(schema(line, format!("gold {:?} is not among the candidates of {}", record.gold.as_text(), record.id)))
    }
}

fn flat_record(line: usize, text: &str, kind: ScenarioKind, needs_set: bool) -> Result<DatasetRecord, DatasetError> {
    let flat: FlatRecord = serde_json::from_str(text).map_err(|e| schema(line, e))?;
    if needs_set && flat.set_id.is_none() {
        return Err(schema(line, format!("record {} has no set_id", flat.id)));
    }
    let story = match flat.story {
        StoryField::Text(s) => s,
        StoryField::Lines(lines) => lines.join("\n"),
    };
    let mut record = DatasetRecord {
        id: flat.id,
        kind,
        story,
        question: flat.question,
        candidates: flat.candidates,
        gold: flat.gold,
        tags: QuestionTags { qtype: flat.qtype, belief: flat.belief, set_id: flat.set_id },
        structured: None,
        extra: flat.extra,
    };
    // Externally supplied info times override whatever the question parser
    // would resolve from the topic.
    if let Some(times) = flat.info_times {
        let (_, mut q) = record.prepare().map_err(|e| schema(line, e))?;
        q.info_times = times;
        record.structured = Some(q);
    }
    check_gold(line, &record)?;
    Ok(record)
}

/// Parses dataset text. Blank lines are skipped; line numbers are 1-based.
pub fn parse_dataset(text: &str, format: DatasetFormat) -> Result<Vec<DatasetRecord>, DatasetError> {
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        match format {
            DatasetFormat::Generated => {
                let inst: LabeledInstance = serde_json::from_str(line).map_err(|e| schema(line_no, e))?;
                for record in records_from_instance(&inst) {
                    check_gold(line_no, &record)?;
                    records.push(record);
                }
            }
            DatasetFormat::TomiJsonl => records.push(flat_record(line_no, line, ScenarioKind::Reading, false)?),
            DatasetFormat::FantomJsonl => records.push(flat_record(line_no, line, ScenarioKind::Dialogue, true)?),
        }
    }
    Ok(records)
}

pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<Vec<DatasetRecord>, DatasetError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| DatasetError::Io { path: path.display().to_string(), source })?;
    parse_dataset(&text, format)
}

/// Records grouped by `set_id`, in order of first appearance within each set.
pub fn group_by_set(records: &[DatasetRecord]) -> BTreeMap<&str, Vec<&DatasetRecord>> {
    let mut sets: BTreeMap<&str, Vec<&DatasetRecord>> = BTreeMap::new();
    for r in records {
        if let Some(id) = r.tags.set_id.as_deref() {
            sets.entry(id).or_default().push(r);
        }
    }
    sets
}
