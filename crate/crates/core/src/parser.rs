//! Deterministic parsing of the closed story/dialogue grammar and of ToM
//! questions, plus the inverse text emitter used by the generator.
//!
//! Story sentences:
//!
//! ```text
//! X entered the L.            X exited the L.
//! The O is in the C.          X moved the O to the C.
//! X told Y that the O is in the C.
//! ```
//!
//! Dialogue lines: `X: <utterance>`, `X left the conversation.`,
//! `X joined the conversation.`

use std::collections::{BTreeMap, BTreeSet};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::{Event, EventKind, EventLog, RawStory, ScenarioKind, TemporalStory, TimePoint};

/// Location name used for every dialogue event.
pub const CONVERSATION: &str = "conversation";

static ENTER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(?P<a>[A-Z]\w*) entered the (?P<l>\w+)\.?$").unwrap());
static EXIT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(?P<a>[A-Z]\w*) exited the (?P<l>\w+)\.?$").unwrap());
static STATE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^The (?P<o>\w+) is in the (?P<c>\w+)\.?$").unwrap());
static MOVE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?P<a>[A-Z]\w*) moved the (?P<o>\w+) to the (?P<c>\w+)\.?$").unwrap());
static TELL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?P<a>[A-Z]\w*) told (?P<b>[A-Z]\w*) that the (?P<o>\w+) is in the (?P<c>\w+)\.?$").unwrap()
});
static PAIR_PRESENCE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?P<a>[A-Z]\w*) and (?P<b>[A-Z]\w*) (?P<v>entered|exited) the (?P<l>\w+)\.?$").unwrap()
});
static UTTER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(?P<a>[A-Z]\w*): (?P<u>.+)$").unwrap());
static LEAVE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(?P<a>[A-Z]\w*) left the conversation\.?$").unwrap());
static JOIN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(?P<a>[A-Z]\w*) joined the conversation\.?$").unwrap());

/// One sentence of the story grammar, before locations are resolved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SentenceForm {
    Enter { actor: String, location: String },
    Exit { actor: String, location: String },
    ObjectState { object: String, container: String },
    Move { actor: String, object: String, container: String },
    Tell { actor: String, listener: String, object: String, container: String },
}

impl SentenceForm {
    /// Enter/exit sentences, which belief compression removes.
    pub fn is_presence_change(&self) -> bool {
        matches!(self, SentenceForm::Enter { .. } | SentenceForm::Exit { .. })
    }

    /// Object and container named by a state-carrying sentence.
    pub fn object_state(&self) -> Option<(&str, &str)> {
        match self {
            SentenceForm::ObjectState { object, container }
            | SentenceForm::Move { object, container, .. }
            | SentenceForm::Tell { object, container, .. } => Some((object, container)),
            _ => None,
        }
    }
}

/// Matches one sentence against the story grammar.
pub fn parse_sentence(text: &str) -> Option<SentenceForm> {
    let text = text.trim();
    let s = |c: &regex::Captures, k: &str| c[k].to_string();
    if let Some(c) = ENTER.captures(text) {
        return Some(SentenceForm::Enter { actor: s(&c, "a"), location: s(&c, "l") });
    }
    if let Some(c) = EXIT.captures(text) {
        return Some(SentenceForm::Exit { actor: s(&c, "a"), location: s(&c, "l") });
    }
    if let Some(c) = STATE.captures(text) {
        return Some(SentenceForm::ObjectState { object: s(&c, "o"), container: s(&c, "c") });
    }
    if let Some(c) = MOVE.captures(text) {
        return Some(SentenceForm::Move { actor: s(&c, "a"), object: s(&c, "o"), container: s(&c, "c") });
    }
    if let Some(c) = TELL.captures(text) {
        return Some(SentenceForm::Tell {
            actor: s(&c, "a"),
            listener: s(&c, "b"),
            object: s(&c, "o"),
            container: s(&c, "c"),
        });
    }
    None
}

/// One dialogue line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DialogueLine {
    Utterance { speaker: String, content: String },
    Leave { actor: String },
    Join { actor: String },
}

pub fn parse_dialogue_line(text: &str) -> Option<DialogueLine> {
    let text = text.trim();
    if let Some(c) = UTTER.captures(text) {
        return Some(DialogueLine::Utterance { speaker: c["a"].to_string(), content: c["u"].trim().to_string() });
    }
    if let Some(c) = LEAVE.captures(text) {
        return Some(DialogueLine::Leave { actor: c["a"].to_string() });
    }
    if let Some(c) = JOIN.captures(text) {
        return Some(DialogueLine::Join { actor: c["a"].to_string() });
    }
    None
}

/// Splits compound reading-scenario lines so that every line holds one event:
/// several sentences on one line become several lines, and
/// `X and Y entered the L.` becomes two arrivals. Dialogue stories pass through.
pub fn split_sentences(raw: &RawStory) -> RawStory {
    if raw.kind() == ScenarioKind::Dialogue {
        return raw.clone();
    }
    let mut lines = Vec::new();
    for line in raw.lines() {
        for sentence in split_on_periods(line) {
            match PAIR_PRESENCE.captures(&sentence) {
                Some(c) => {
                    lines.push(format!("{} {} the {}.", &c["a"], &c["v"], &c["l"]));
                    lines.push(format!("{} {} the {}.", &c["b"], &c["v"], &c["l"]));
                }
                None => lines.push(sentence),
            }
        }
    }
    RawStory::from_text(&lines.join("\n"), raw.kind())
}

fn split_on_periods(line: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut chars = line.chars().peekable();
    while let Some(ch) = chars.next() {
        current.push(ch);
        if ch == '.' && chars.peek().is_some_and(|n| n.is_whitespace()) {
            out.push(current.trim().to_string());
            current.clear();
        }
    }
    if !current.trim().is_empty() {
        out.push(current.trim().to_string());
    }
    out
}

/// Parses a reading-scenario story into an event log.
///
/// Sentences that do not name a location get one by inference: an object state
/// is placed where its container was last seen, falling back to the most
/// recently mentioned location; a move happens where its actor is, falling back
/// to where the object currently sits.
pub fn parse_story(story: &TemporalStory) -> Result<EventLog> {
    let mut events = Vec::with_capacity(story.len());
    let mut presence: BTreeMap<String, String> = BTreeMap::new();
    let mut container_at: BTreeMap<String, String> = BTreeMap::new();
    let mut object_in: BTreeMap<String, String> = BTreeMap::new();
    let mut scene: Option<String> = None;

    for entry in story.entries() {
        let unparsable = || Error::UnparsableSentence { time: entry.time, text: entry.text.clone() };
        let form = parse_sentence(&entry.text).ok_or_else(unparsable)?;
        let kind = match form {
            SentenceForm::Enter { actor, location } => {
                presence.insert(actor.clone(), location.clone());
                scene = Some(location.clone());
                EventKind::Enter { actor, location }
            }
            SentenceForm::Exit { actor, location } => {
                presence.remove(&actor);
                scene = Some(location.clone());
                EventKind::Exit { actor, location }
            }
            SentenceForm::ObjectState { object, container } => {
                let location = container_at.get(&container).or(scene.as_ref()).cloned().ok_or_else(unparsable)?;
                container_at.insert(container.clone(), location.clone());
                object_in.insert(object.clone(), container.clone());
                scene = Some(location.clone());
                EventKind::ObjectState { object, container, location }
            }
            SentenceForm::Move { actor, object, container } => {
                let location = presence
                    .get(&actor)
                    .or_else(|| object_in.get(&object).and_then(|c| container_at.get(c)))
                    .or_else(|| container_at.get(&container))
                    .or(scene.as_ref())
                    .cloned()
                    .ok_or_else(unparsable)?;
                presence.insert(actor.clone(), location.clone());
                container_at.insert(container.clone(), location.clone());
                object_in.insert(object.clone(), container.clone());
                scene = Some(location.clone());
                EventKind::Move { actor, object, container, location }
            }
            SentenceForm::Tell { actor, listener, object, container } => {
                EventKind::Tell { actor, listener, object, container }
            }
        };
        events.push(Event::new(entry.time, kind));
    }
    Ok(EventLog::new(events))
}

/// Parses a dialogue; each utterance gets the fresh information tag `info_<t>`.
pub fn parse_dialogue(story: &TemporalStory) -> Result<EventLog> {
    let mut events = Vec::with_capacity(story.len());
    for entry in story.entries() {
        let line = parse_dialogue_line(&entry.text)
            .ok_or_else(|| Error::UnparsableSentence { time: entry.time, text: entry.text.clone() })?;
        let location = CONVERSATION.to_string();
        let kind = match line {
            DialogueLine::Utterance { speaker, .. } => {
                EventKind::Utterance { actor: speaker, location, info_id: info_id_for(entry.time) }
            }
            DialogueLine::Leave { actor } => EventKind::Leave { actor, location },
            DialogueLine::Join { actor } => EventKind::Join { actor, location },
        };
        events.push(Event::new(entry.time, kind));
    }
    Ok(EventLog::new(events))
}

pub fn info_id_for(time: TimePoint) -> String {
    format!("info_{}", time.index())
}

/// Parses with the parser matching the story's scenario kind.
pub fn parse_any(story: &TemporalStory) -> Result<EventLog> {
    match story.kind() {
        ScenarioKind::Reading => parse_story(story),
        ScenarioKind::Dialogue => parse_dialogue(story),
    }
}

/// Story sentence for an event. Utterances have no canonical text.
pub fn render_sentence(event: &Event) -> Option<String> {
    Some(match &event.kind {
        EventKind::Enter { actor, location } => format!("{actor} entered the {location}."),
        EventKind::Exit { actor, location } => format!("{actor} exited the {location}."),
        EventKind::ObjectState { object, container, .. } => format!("The {object} is in the {container}."),
        EventKind::Move { actor, object, container, .. } => format!("{actor} moved the {object} to the {container}."),
        EventKind::Tell { actor, listener, object, container } => {
            format!("{actor} told {listener} that the {object} is in the {container}.")
        }
        EventKind::Join { actor, .. } => format!("{actor} joined the conversation."),
        EventKind::Leave { actor, .. } => format!("{actor} left the conversation."),
        EventKind::Utterance { .. } => return None,
    })
}

/// Renders a reading-scenario log as timeline text.
pub fn render_story(log: &EventLog) -> Result<TemporalStory> {
    let entries = log
        .events()
        .iter()
        .map(|e| {
            render_sentence(e)
                .map(|text| crate::event::StoryEntry { time: e.time, text })
                .ok_or(Error::UnsupportedFlavor("utterance"))
        })
        .collect::<Result<Vec<_>>>()?;
    TemporalStory::from_entries(entries, ScenarioKind::Reading)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionFlavor {
    Belief,
    Reality,
    Memory,
    AnswerabilityList,
    AnswerabilityBinary,
    InfoaccessList,
    InfoaccessBinary,
}

impl QuestionFlavor {
    pub fn name(self) -> &'static str {
        match self {
            QuestionFlavor::Belief => "belief",
            QuestionFlavor::Reality => "reality",
            QuestionFlavor::Memory => "memory",
            QuestionFlavor::AnswerabilityList => "answerability_list",
            QuestionFlavor::AnswerabilityBinary => "answerability_binary",
            QuestionFlavor::InfoaccessList => "infoaccess_list",
            QuestionFlavor::InfoaccessBinary => "infoaccess_binary",
        }
    }

    pub fn is_info(self) -> bool {
        matches!(
            self,
            QuestionFlavor::AnswerabilityList
                | QuestionFlavor::AnswerabilityBinary
                | QuestionFlavor::InfoaccessList
                | QuestionFlavor::InfoaccessBinary
        )
    }

    pub fn is_list(self) -> bool {
        matches!(self, QuestionFlavor::AnswerabilityList | QuestionFlavor::InfoaccessList)
    }

    pub fn is_binary(self) -> bool {
        matches!(self, QuestionFlavor::AnswerabilityBinary | QuestionFlavor::InfoaccessBinary)
    }
}

/// A structured theory-of-mind question.
///
/// Belief questions either ask where an object is believed to be (`object`) or,
/// in dialogues, whether a piece of information is believed known
/// (`info_times` plus `topic`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToMQuestion {
    pub flavor: QuestionFlavor,
    pub order: usize,
    #[serde(default)]
    pub chain: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<String>,
    #[serde(default)]
    pub info_times: BTreeSet<TimePoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    #[serde(default)]
    pub candidates: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic: Option<String>,
}

impl ToMQuestion {
    pub fn reality(object: &str) -> Self {
        Self::object_question(QuestionFlavor::Reality, Vec::new(), object)
    }

    pub fn memory(object: &str) -> Self {
        Self::object_question(QuestionFlavor::Memory, Vec::new(), object)
    }

    pub fn belief<S: AsRef<str>>(chain: &[S], object: &str) -> Self {
        let chain = chain.iter().map(|c| c.as_ref().to_string()).collect();
        Self::object_question(QuestionFlavor::Belief, chain, object)
    }

    fn object_question(flavor: QuestionFlavor, chain: Vec<String>, object: &str) -> Self {
        Self {
            flavor,
            order: chain.len(),
            chain,
            object: Some(object.to_string()),
            info_times: BTreeSet::new(),
            target: None,
            candidates: Vec::new(),
            topic: None,
        }
    }

    /// Dialogue belief or info question about a topic established at `info_times`.
    pub fn about_info<S: AsRef<str>>(
        flavor: QuestionFlavor,
        chain: &[S],
        topic: &str,
        info_times: BTreeSet<TimePoint>,
        target: Option<&str>,
    ) -> Self {
        let chain: Vec<String> = chain.iter().map(|c| c.as_ref().to_string()).collect();
        Self {
            flavor,
            order: chain.len(),
            chain,
            object: None,
            info_times,
            target: target.map(str::to_string),
            candidates: Vec::new(),
            topic: Some(topic.to_string()),
        }
    }

    pub fn with_candidates<S: AsRef<str>>(mut self, candidates: &[S]) -> Self {
        self.candidates = candidates.iter().map(|c| c.as_ref().to_string()).collect();
        self
    }

    pub fn is_higher_order(&self) -> bool {
        self.flavor == QuestionFlavor::Belief && self.order >= 2
    }

    /// Chain with repeated characters removed, first occurrence kept.
    pub fn distinct_chain(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        self.chain.iter().map(String::as_str).filter(|c| seen.insert(*c)).collect()
    }

    /// Canonical question text in the grammar [`parse_question`] reads.
    pub fn render(&self) -> String {
        let topic = self.topic.as_deref().unwrap_or("");
        let object = self.object.as_deref().unwrap_or("");
        let target = self.target.as_deref().unwrap_or("");
        match self.flavor {
            QuestionFlavor::Reality => format!("Where is the {object} really?"),
            QuestionFlavor::Memory => format!("Where was the {object} at the beginning?"),
            QuestionFlavor::Belief if self.object.is_some() => render_object_belief(&self.chain, object),
            QuestionFlavor::Belief => render_info_belief(&self.chain, topic),
            QuestionFlavor::AnswerabilityList => format!(
                "Who discussed {topic}? List all the characters who know the precise correct answer to this question."
            ),
            QuestionFlavor::AnswerabilityBinary => {
                format!("Who discussed {topic}? Does {target} know the precise correct answer to this question?")
            }
            QuestionFlavor::InfoaccessList => {
                format!(
                    "{} discussed {topic}. List all the characters who know this information.",
                    self.speakers_phrase()
                )
            }
            QuestionFlavor::InfoaccessBinary => {
                format!("{} discussed {topic}. Does {target} know this information?", self.speakers_phrase())
            }
        }
    }

    fn speakers_phrase(&self) -> String {
        join_names(&self.chain)
    }
}

/// `A`, `A and B`, `A, B and C`.
pub fn join_names<S: AsRef<str>>(names: &[S]) -> String {
    match names {
        [] => "Someone".to_string(),
        [one] => one.as_ref().to_string(),
        [init @ .., last] => {
            format!("{} and {}", init.iter().map(|s| s.as_ref()).collect::<Vec<_>>().join(", "), last.as_ref())
        }
    }
}

fn render_object_belief(chain: &[String], object: &str) -> String {
    match chain {
        [] => format!("Where is the {object} really?"),
        [only] => format!("Where will {only} look for the {object}?"),
        [first, rest @ ..] => {
            let mut s = format!("Where does {first} believe");
            for (i, c) in rest.iter().enumerate() {
                s.push(' ');
                s.push_str(c);
                if i + 1 < rest.len() {
                    s.push_str(" thinks");
                }
            }
            s.push_str(&format!(" will look for the {object}?"));
            s
        }
    }
}

fn render_info_belief(chain: &[String], topic: &str) -> String {
    let first = chain.first().map(String::as_str).unwrap_or("Someone");
    let mut s = format!("What does {first} believe about ");
    let rest = chain.get(1..).unwrap_or(&[]);
    for (i, c) in rest.iter().enumerate() {
        s.push_str(c);
        s.push_str("'s belief ");
        s.push_str(if i + 1 < rest.len() { "regarding " } else { "about " });
    }
    s.push_str("who discussed ");
    s.push_str(topic);
    s.push('?');
    s
}

static Q_REALITY: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^Where is (?:the )?(?P<o>\w+) really\?$").unwrap());
static Q_MEMORY: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^Where was (?:the )?(?P<o>\w+) at the beginning\?$").unwrap());
static Q_WILL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^Where will (?P<a>[A-Z]\w*) look for (?:the )?(?P<o>\w+)\?$").unwrap());
static Q_DOES: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"^Where does (?P<chain>.+?) (?:will look|looks|look|searches|search|will search) for (?:the )?(?P<o>\w+)\?$",
    )
    .unwrap()
});
static Q_INFO_BELIEF: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^What does (?P<a>[A-Z]\w*) believe about (?P<rest>.+)\?$").unwrap());
static Q_NESTED_BELIEF: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?P<a>[A-Z]\w*)'s belief (?:regarding|about) ").unwrap());
static Q_ANS_LIST: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"^Who discussed (?P<t>.+)\? List all the characters who know the precise correct answer to this question\.?$",
    )
    .unwrap()
});
static Q_ANS_BIN: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^Who discussed (?P<t>.+)\? Does (?P<x>[A-Z]\w*) know the precise correct answer to this question\?$")
        .unwrap()
});
static Q_INFO_LIST: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?P<s>.+?) discussed (?P<t>.+)\. List all the characters who know this information\.?$").unwrap()
});
static Q_INFO_BIN: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?P<s>.+?) discussed (?P<t>.+)\. Does (?P<x>[A-Z]\w*) know this information\?$").unwrap()
});

const MENTAL_VERBS: [&str; 4] = ["believe", "think", "believes", "thinks"];

/// Parses questions against a log, optionally with the dialogue transcript so
/// that topics can be resolved to the utterance times that establish them.
#[derive(Debug, Clone)]
pub struct QuestionParser<'a> {
    log: &'a EventLog,
    transcript: Option<&'a TemporalStory>,
}

impl<'a> QuestionParser<'a> {
    pub fn new(log: &'a EventLog) -> Self {
        Self { log, transcript: None }
    }

    pub fn with_transcript(mut self, transcript: &'a TemporalStory) -> Self {
        self.transcript = Some(transcript);
        self
    }

    pub fn parse(&self, text: &str) -> Result<ToMQuestion> {
        let text = text.split_whitespace().collect::<Vec<_>>().join(" ");
        if let Some(c) = Q_REALITY.captures(&text) {
            return Ok(ToMQuestion::reality(self.object(&c["o"])?));
        }
        if let Some(c) = Q_MEMORY.captures(&text) {
            return Ok(ToMQuestion::memory(self.object(&c["o"])?));
        }
        if let Some(c) = Q_WILL.captures(&text) {
            let who = self.character(&c["a"])?;
            return Ok(ToMQuestion::belief(&[who], self.object(&c["o"])?));
        }
        if let Some(c) = Q_DOES.captures(&text) {
            let chain = self.mental_chain(&c["chain"], &text)?;
            return Ok(ToMQuestion::belief(&chain, self.object(&c["o"])?));
        }
        if let Some(c) = Q_ANS_LIST.captures(&text) {
            let (topic, times) = self.topic(&c["t"])?;
            return Ok(ToMQuestion::about_info::<&str>(QuestionFlavor::AnswerabilityList, &[], topic, times, None));
        }
        if let Some(c) = Q_ANS_BIN.captures(&text) {
            let (topic, times) = self.topic(&c["t"])?;
            let target = self.character(&c["x"])?;
            return Ok(ToMQuestion::about_info::<&str>(
                QuestionFlavor::AnswerabilityBinary,
                &[],
                topic,
                times,
                Some(target),
            ));
        }
        if let Some(c) = Q_INFO_LIST.captures(&text) {
            let speakers = self.name_list(&c["s"])?;
            let (topic, times) = self.topic(&c["t"])?;
            return Ok(ToMQuestion {
                order: 0,
                chain: speakers,
                ..ToMQuestion::about_info::<&str>(QuestionFlavor::InfoaccessList, &[], topic, times, None)
            });
        }
        if let Some(c) = Q_INFO_BIN.captures(&text) {
            let speakers = self.name_list(&c["s"])?;
            let (topic, times) = self.topic(&c["t"])?;
            let target = self.character(&c["x"])?;
            return Ok(ToMQuestion {
                order: 0,
                chain: speakers,
                ..ToMQuestion::about_info::<&str>(QuestionFlavor::InfoaccessBinary, &[], topic, times, Some(target))
            });
        }
        if let Some(c) = Q_INFO_BELIEF.captures(&text) {
            let mut chain = vec![self.character(&c["a"])?.to_string()];
            let mut rest = c["rest"].to_string();
            while let Some(m) = Q_NESTED_BELIEF.captures(&rest) {
                chain.push(self.character(&m["a"])?.to_string());
                rest = rest[m.get(0).unwrap().end()..].to_string();
            }
            let topic_text =
                rest.strip_prefix("who discussed ").ok_or_else(|| Error::UnparsableQuestion(text.clone()))?;
            let (topic, times) = self.topic(topic_text)?;
            return Ok(ToMQuestion::about_info(QuestionFlavor::Belief, &chain, topic, times, None));
        }
        Err(Error::UnparsableQuestion(text))
    }

    fn mental_chain(&self, segment: &str, text: &str) -> Result<Vec<String>> {
        // "A thinks that B ..." reads the same as "A thinks B ...".
        let words: Vec<&str> = segment.split(' ').filter(|w| *w != "that").collect();
        if words.len().is_multiple_of(2) {
            return Err(Error::UnparsableQuestion(text.to_string()));
        }
        let mut chain = Vec::new();
        for (i, w) in words.iter().enumerate() {
            if i % 2 == 0 {
                chain.push(self.character(w)?.to_string());
            } else if !MENTAL_VERBS.contains(w) {
                return Err(Error::UnparsableQuestion(text.to_string()));
            }
        }
        Ok(chain)
    }

    fn name_list(&self, phrase: &str) -> Result<Vec<String>> {
        phrase
            .split(", ")
            .flat_map(|part| part.split(" and "))
            .map(|name| self.character(name.trim()).map(str::to_string))
            .collect()
    }

    fn character<'s>(&self, name: &'s str) -> Result<&'s str> {
        if self.log.has_character(name) {
            Ok(name)
        } else {
            Err(Error::UnknownEntity(name.to_string()))
        }
    }

    fn object<'s>(&self, name: &'s str) -> Result<&'s str> {
        if self.log.objects().contains(name) {
            Ok(name)
        } else {
            Err(Error::UnknownEntity(name.to_string()))
        }
    }

    /// Times of the utterances that mention `topic` (case-insensitive).
    fn topic<'s>(&self, topic: &'s str) -> Result<(&'s str, BTreeSet<TimePoint>)> {
        let transcript = self.transcript.ok_or_else(|| Error::UnknownEntity(topic.to_string()))?;
        let needle = topic.to_lowercase();
        let times: BTreeSet<TimePoint> = transcript
            .entries()
            .iter()
            .filter(|e| {
                matches!(parse_dialogue_line(&e.text), Some(DialogueLine::Utterance { ref content, .. })
                    if content.to_lowercase().contains(&needle))
            })
            .map(|e| e.time)
            .collect();
        if times.is_empty() {
            return Err(Error::UnknownEntity(topic.to_string()));
        }
        Ok((topic, times))
    }
}

/// Parses a question against a log (no dialogue topics).
pub fn parse_question(text: &str, log: &EventLog) -> Result<ToMQuestion> {
    QuestionParser::new(log).parse(text)
}
