//! Text-model backends: an offline stub that answers every prompt by running
//! the symbolic engine, and an HTTP chat-completion client.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::LazyLock;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;
use timetom_core::event::{annotate_timeline, parse_timed_lines, RawStory, ScenarioKind, TemporalStory};
use timetom_core::parser::{parse_dialogue, parse_dialogue_line, parse_sentence, parse_story, DialogueLine};
use timetom_core::perception::build_tbsc;
use timetom_core::solver::{DOES_NOT_KNOW, KNOWS};

use crate::template::{identify, Bindings, TemplateId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodingParams {
    pub temperature: f32,
    pub top_p: f32,
}

impl Default for DecodingParams {
    fn default() -> Self {
        Self { temperature: 0.0, top_p: 0.95 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("backend configuration: {0}")]
    Config(String),
    #[error("credentials rejected: {0}")]
    Credentials(String),
    #[error("transport failed after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("unexpected response: {0}")]
    Response(String),
}

pub trait ModelBackend: Send + Sync {
    fn name(&self) -> &str;
    fn complete(&self, prompt: &str, params: &DecodingParams) -> Result<String, BackendError>;
    fn is_deterministic(&self) -> bool;
}

/// Offline backend. Each prompt is matched to its template and answered by the
/// corresponding symbolic step, in the textual shape a model would reply with.
///
/// Higher-order questions are answered from the first character's own view,
/// so only the feedback stage brings in the nested belief.
#[derive(Debug, Default)]
pub struct StubBackend {
    calls: AtomicUsize,
}

impl StubBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

const NO_IDEA: &str = "I don't know.";

impl ModelBackend for StubBackend {
    fn name(&self) -> &str {
        "stub"
    }

    fn is_deterministic(&self) -> bool {
        true
    }

    fn complete(&self, prompt: &str, _params: &DecodingParams) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let Some((id, b)) = identify(prompt) else {
            return Ok(NO_IDEA.to_string());
        };
        let get = |k: &str| b.get(k).map(String::as_str).unwrap_or("");
        Ok(match id {
            TemplateId::Cts => add_timeline(get("story"), ScenarioKind::Reading),
            TemplateId::DialogueCts => add_timeline(get("dialogue"), ScenarioKind::Dialogue),
            TemplateId::Tbsc => chain_of(get("story"), get("character"), ScenarioKind::Reading),
            TemplateId::DialogueTbsc => chain_of(get("dialogue"), get("character"), ScenarioKind::Dialogue),
            TemplateId::SelfCompress => drop_presence_lines(get("perspective")),
            TemplateId::QaFirst => locate(get("perspective2"), get("question")),
            TemplateId::QaHigher => locate(get("perspective"), get("question")),
            TemplateId::QaPlain => plain_answer(get("story"), get("question")),
            TemplateId::Feedback | TemplateId::DialogueFeedback => {
                format!("Considering the feedback, the answer is {}.", get("answer2"))
            }
            TemplateId::DialogueQaFirst | TemplateId::DialogueQaHigher => match topic_in(get("question")) {
                Some(topic) if knows_topic(get("perspective"), &topic) => KNOWS.to_string(),
                Some(_) => DOES_NOT_KNOW.to_string(),
                None => NO_IDEA.to_string(),
            },
            TemplateId::AnswerabilityList => list_knowers(&b, "target"),
            TemplateId::InfoaccessList => list_knowers(&b, "target_q"),
            TemplateId::AnswerabilityBinary => binary_knows(&b, "target"),
            TemplateId::InfoaccessBinary => binary_knows(&b, "target_q"),
        })
    }
}

fn add_timeline(text: &str, kind: ScenarioKind) -> String {
    match annotate_timeline(&RawStory::from_text(text, kind)) {
        Ok(ts) => ts.to_text(),
        Err(_) => NO_IDEA.to_string(),
    }
}

fn chain_of(timeline: &str, character: &str, kind: ScenarioKind) -> String {
    let dump = || -> Option<String> {
        let ts = TemporalStory::parse_text(timeline, kind).ok()?;
        let log = match kind {
            ScenarioKind::Reading => parse_story(&ts),
            ScenarioKind::Dialogue => parse_dialogue(&ts),
        }
        .ok()?;
        Some(build_tbsc(&log, character).ok()?.dump(Some(&ts)))
    };
    dump().unwrap_or_else(|| NO_IDEA.to_string())
}

fn timed_lines(text: &str) -> Vec<(String, String)> {
    parse_timed_lines(text).map(|v| v.into_iter().map(|(t, s)| (t.to_string(), s)).collect()).unwrap_or_default()
}

fn drop_presence_lines(perspective: &str) -> String {
    timed_lines(perspective)
        .into_iter()
        .filter(|(_, s)| !parse_sentence(s).is_some_and(|f| f.is_presence_change()))
        .map(|(t, s)| format!("{t}: {s}"))
        .collect::<Vec<_>>()
        .join("\n")
}

static ASKED_OBJECT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?:look for|Where is|Where was) (?:the )?(\w+)").unwrap());
static TOPIC: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)who discussed (.+?)\?").unwrap());
static CHAIN_HEADER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(\w+)'s belief state chain:$").unwrap());

fn states_of(text: &str, object: &str) -> Vec<String> {
    text.lines()
        .filter_map(|line| {
            let sentence = line.split_once(": ").map_or(line, |(_, s)| s);
            let form = parse_sentence(sentence)?;
            let (o, c) = form.object_state()?;
            (o == object).then(|| c.to_string())
        })
        .collect()
}

/// Last known place of the asked-about object in `context`.
fn locate(context: &str, question: &str) -> String {
    let Some(object) = ASKED_OBJECT.captures(question).map(|c| c[1].to_string()) else {
        return NO_IDEA.to_string();
    };
    match states_of(context, &object).last() {
        Some(c) => format!("The {object} is in the {c}."),
        None => NO_IDEA.to_string(),
    }
}

/// Answers without any perspective: the object's actual place, or for
/// dialogues, that everyone knows everything.
fn plain_answer(story: &str, question: &str) -> String {
    if let Some(object) = ASKED_OBJECT.captures(question).map(|c| c[1].to_string()) {
        let states = states_of(story, &object);
        let pick = if question.contains("at the beginning") { states.first() } else { states.last() };
        return pick.map_or(NO_IDEA.to_string(), |c| format!("The {object} is in the {c}."));
    }
    if question.contains("List all the characters") {
        let speakers: std::collections::BTreeSet<String> = story
            .lines()
            .filter_map(|l| match parse_dialogue_line(l.split_once(": ").map_or(l, |(_, s)| s)) {
                Some(DialogueLine::Utterance { speaker, .. }) => Some(speaker),
                _ => None,
            })
            .collect();
        return speakers.into_iter().collect::<Vec<_>>().join(", ");
    }
    if question.contains("Does ") {
        return "yes".to_string();
    }
    KNOWS.to_string()
}

fn topic_in(text: &str) -> Option<String> {
    TOPIC.captures(text).map(|c| c[1].to_string())
}

/// Whether `context` holds every part of what was said about `topic`.
fn knows_topic(context: &str, topic: &str) -> bool {
    let has = |s: String| context.contains(&s);
    has(format!("I want to talk about {topic}."))
        || (has(format!("I have two things to say about {topic}.")) && has(format!("The second thing about {topic}.")))
}

fn chain_blocks(final_text: &str) -> Vec<(String, String)> {
    let mut blocks: Vec<(String, String)> = Vec::new();
    for line in final_text.lines() {
        if let Some(c) = CHAIN_HEADER.captures(line) {
            blocks.push((c[1].to_string(), String::new()));
        } else if let Some((_, body)) = blocks.last_mut() {
            body.push_str(line);
            body.push('\n');
        }
    }
    blocks
}

fn list_knowers(b: &Bindings, target_key: &str) -> String {
    let Some(topic) = b.get(target_key).and_then(|t| topic_in(t)) else {
        return NO_IDEA.to_string();
    };
    let names: Vec<String> = chain_blocks(b.get("final_text").map_or("", String::as_str))
        .into_iter()
        .filter(|(_, body)| knows_topic(body, &topic))
        .map(|(name, _)| name)
        .collect();
    if names.is_empty() {
        "None of them.".to_string()
    } else {
        names.join(", ")
    }
}

fn binary_knows(b: &Bindings, target_key: &str) -> String {
    let Some(topic) = b.get(target_key).and_then(|t| topic_in(t)) else {
        return NO_IDEA.to_string();
    };
    let context = b.get("binary_context").map_or("", String::as_str);
    if knows_topic(context, &topic) { "yes" } else { "no" }.to_string()
}

/// Settings for [`RemoteBackend`], normally read from the environment.
#[derive(Debug, Clone, PartialEq)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub model: String,
    pub api_key: Option<String>,
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub timeout: Duration,
    pub verbose: bool,
}

pub const ENDPOINT_VAR: &str = "TIMETOM_ENDPOINT";
pub const MODEL_VAR: &str = "TIMETOM_MODEL";
pub const API_KEY_VAR: &str = "TIMETOM_API_KEY";

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key: None,
            max_attempts: 4,
            base_delay: Duration::from_millis(250),
            timeout: Duration::from_secs(120),
            verbose: false,
        }
    }

    pub fn from_env() -> Result<Self, BackendError> {
        let endpoint =
            std::env::var(ENDPOINT_VAR).map_err(|_| BackendError::Config(format!("{ENDPOINT_VAR} is not set")))?;
        let model = std::env::var(MODEL_VAR).map_err(|_| BackendError::Config(format!("{MODEL_VAR} is not set")))?;
        let mut config = Self::new(endpoint, model);
        config.api_key = std::env::var(API_KEY_VAR).ok().filter(|k| !k.is_empty());
        Ok(config)
    }
}

/// Chat-completion client (`POST {endpoint}` with an OpenAI-style body).
/// Transport failures, 429 and 5xx are retried with exponential backoff.
pub struct RemoteBackend {
    config: RemoteConfig,
    agent: ureq::Agent,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { config, agent }
    }

    pub fn from_env() -> Result<Self, BackendError> {
        RemoteConfig::from_env().map(Self::new)
    }

    fn attempt(&self, body: &Value) -> Result<String, Attempt> {
        let mut request = self.agent.post(&self.config.endpoint).header("Content-Type", "application/json");
        if let Some(key) = &self.config.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = request.send_json(body).map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response.body_mut().read_to_string().map_err(|e| Attempt::Retry(e.to_string()))?;
        if self.config.verbose {
            log::debug!("response {status}: {text}");
        }
        match status {
            200..=299 => {}
            401 | 403 => return Err(Attempt::Fatal(BackendError::Credentials(format!("status {status}")))),
            429 | 500..=599 => return Err(Attempt::Retry(format!("status {status}"))),
            _ => return Err(Attempt::Fatal(BackendError::Response(format!("status {status}: {text}")))),
        }
        let value: Value =
            serde_json::from_str(&text).map_err(|e| Attempt::Fatal(BackendError::Response(e.to_string())))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| Attempt::Fatal(BackendError::Response("missing choices[0].message.content".into())))
    }
}

enum Attempt {
    Retry(String),
    Fatal(BackendError),
}

impl ModelBackend for RemoteBackend {
    fn name(&self) -> &str {
        &self.config.model
    }

    fn is_deterministic(&self) -> bool {
        false
    }

    fn complete(&self, prompt: &str, params: &DecodingParams) -> Result<String, BackendError> {
        let body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": params.temperature,
            "top_p": params.top_p,
        });
        if self.config.verbose {
            log::debug!("request: {body}");
        }
        let mut last = String::new();
        for attempt in 0..self.config.max_attempts {
            if attempt > 0 {
                std::thread::sleep(self.config.base_delay * 2u32.pow(attempt - 1));
            }
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(message)) => {
                    log::warn!("attempt {} of {} failed: {message}", attempt + 1, self.config.max_attempts);
                    last = message;
                }
            }
        }
        Err(BackendError::Transport { attempts: self.config.max_attempts, message: last })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::template::{bind, render_prompt};

    const STORY: &str = "Alice entered the room.\nThe celery is in the basket.\nAlice exited the room.\n\
                         Bob moved the celery to the box.\nBob exited the room.\nAlice entered the room.\n\
                         John moved the celery to the table.";

    fn ask(id: TemplateId, pairs: &[(&str, &str)]) -> String {
        StubBackend::new().complete(&render_prompt(id, &bind(pairs)).unwrap(), &DecodingParams::default()).unwrap()
    }

    #[test]
    fn stub_stages() {
        let timeline = ask(TemplateId::Cts, &[("story", STORY)]);
        assert!(timeline.starts_with("t1: Alice entered the room.\nt2: The celery"));
        let chain = ask(TemplateId::Tbsc, &[("story", &timeline), ("character", "Alice")]);
        assert_eq!(chain.lines().count(), 5);
        assert!(!chain.contains("t4:"));
        let own = ask(TemplateId::SelfCompress, &[("perspective", &chain), ("character", "Alice")]);
        assert_eq!(own, "t2: The celery is in the basket.\nt7: John moved the celery to the table.");
        let answer = ask(
            TemplateId::QaFirst,
            &[("perspective2", &own), ("name", "Alice"), ("question", "Where will Alice look for the celery?")],
        );
        assert_eq!(answer, "The celery is in the table.");
    }

    #[test]
    fn unknown_prompt_gets_a_shrug() {
        assert_eq!(StubBackend::new().complete("hello", &DecodingParams::default()).unwrap(), NO_IDEA);
    }

    #[test]
    fn stub_counts_calls() {
        let stub = StubBackend::new();
        stub.complete("a", &DecodingParams::default()).unwrap();
        stub.complete("b", &DecodingParams::default()).unwrap();
        assert_eq!(stub.calls(), 2);
    }

    #[test]
    fn topic_knowledge_needs_every_part() {
        let both = "t3: Sara: I have two things to say about the fair.\nt5: Sara: The second thing about the fair.";
        assert!(knows_topic(both, "the fair"));
        assert!(!knows_topic("t5: Sara: The second thing about the fair.", "the fair"));
        assert!(knows_topic("t2: Ann: I want to talk about the fair.", "the fair"));
    }
}
