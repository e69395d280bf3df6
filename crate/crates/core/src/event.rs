//! Timestamped events, timeline annotation and event-log validation.
//!
//! A story is a sequence of sentences (or utterances in a dialogue). Each one
//! is bound to exactly one [`TimePoint`], and the structured form of a story is
//! an [`EventLog`] holding one [`Event`] per time point.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One-based position on a story timeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct TimePoint(u32);

impl TimePoint {
    pub fn new(index: u32) -> Option<Self> {
        (index >= 1).then_some(Self(index))
    }

    /// Time point for a zero-based sequence position.
    pub fn from_position(position: usize) -> Self {
        Self(position as u32 + 1)
    }

    pub fn index(self) -> u32 {
        self.0
    }

    pub fn position(self) -> usize {
        self.0 as usize - 1
    }
}

impl TryFrom<u32> for TimePoint {
    type Error = String;

    fn try_from(value: u32) -> std::result::Result<Self, Self::Error> {
        TimePoint::new(value).ok_or_else(|| "time points start at 1".to_string())
    }
}

impl From<TimePoint> for u32 {
    fn from(t: TimePoint) -> u32 {
        t.0
    }
}

impl fmt::Display for TimePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

impl FromStr for TimePoint {
    type Err = Error;

    /// Accepts `t3`, `T3` or a bare `3`.
    fn from_str(s: &str) -> Result<Self> {
        let digits = s.trim().trim_start_matches(['t', 'T']);
        digits
            .parse::<u32>()
            .ok()
            .and_then(TimePoint::new)
            .ok_or_else(|| Error::InvalidTimeline(format!("bad time label {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    #[default]
    Reading,
    Dialogue,
}

/// Untimed input: one sentence (reading) or one utterance (dialogue) per line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawStory {
    lines: Vec<String>,
    kind: ScenarioKind,
}

impl RawStory {
    /// Builds a story from lines, trimming each. Blank lines are rejected.
    pub fn new<I, S>(lines: I, kind: ScenarioKind) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut out = Vec::new();
        for (index, line) in lines.into_iter().enumerate() {
            let line = line.as_ref().trim();
            if line.is_empty() {
                return Err(Error::EmptyLine { index });
            }
            out.push(line.to_string());
        }
        Ok(Self { lines: out, kind })
    }

    /// Splits free text on newlines, skipping blank lines.
    pub fn from_text(text: &str, kind: ScenarioKind) -> Self {
        let lines = text.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_string).collect();
        Self { lines, kind }
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    pub fn kind(&self) -> ScenarioKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn to_text(&self) -> String {
        self.lines.join("\n")
    }

    /// Whitespace-normalized copy: inner runs of whitespace collapse to one space.
    pub fn normalized(&self) -> Self {
        Self { lines: self.lines.iter().map(|l| normalize_ws(l)).collect(), kind: self.kind }
    }
}

fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoryEntry {
    pub time: TimePoint,
    pub text: String,
}

/// A story with an explicit timeline `t1..tN`. Serialized as its kind plus
/// the `t1: sentence` text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "StoryRecord", try_from = "StoryRecord")]
pub struct TemporalStory {
    entries: Vec<StoryEntry>,
    kind: ScenarioKind,
}

impl TemporalStory {
    /// Validates that the times run exactly `1..=N`.
    pub fn from_entries(entries: Vec<StoryEntry>, kind: ScenarioKind) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyStory);
        }
        for (pos, entry) in entries.iter().enumerate() {
            if entry.time != TimePoint::from_position(pos) {
                return Err(Error::InvalidTimeline(format!(
                    "expected {} at position {}, found {}",
                    TimePoint::from_position(pos),
                    pos + 1,
                    entry.time
                )));
            }
            if entry.text.trim().is_empty() {
                return Err(Error::EmptyLine { index: pos });
            }
        }
        Ok(Self { entries, kind })
    }

    /// Parses the `t1: sentence` rendering produced by [`TemporalStory::to_text`]
    /// (and the looser variants text models tend to emit).
    pub fn parse_text(text: &str, kind: ScenarioKind) -> Result<Self> {
        let entries = parse_timed_lines(text)?.into_iter().map(|(time, text)| StoryEntry { time, text }).collect();
        Self::from_entries(entries, kind)
    }

    pub fn entries(&self) -> &[StoryEntry] {
        &self.entries
    }

    pub fn kind(&self) -> ScenarioKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn text_at(&self, time: TimePoint) -> Option<&str> {
        self.entries.get(time.position()).map(|e| e.text.as_str())
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|e| format!("{}: {}", e.time, e.text)).collect::<Vec<_>>().join("\n")
    }
}

/// Parses lines of the form `t3: text` (also `t3 text`, `[t3] text`, `t3. text`).
///
/// Times must be strictly increasing but need not be contiguous, so this also
/// reads belief-chain dumps.
pub fn parse_timed_lines(text: &str) -> Result<Vec<(TimePoint, String)>> {
    let mut out: Vec<(TimePoint, String)> = Vec::new();
    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let (time, rest) = split_time_prefix(line)
            .ok_or_else(|| Error::InvalidTimeline(format!("line without time prefix: {line:?}")))?;
        if let Some((prev, _)) = out.last() {
            if time <= *prev {
                return Err(Error::InvalidTimeline(format!("time {time} does not follow {prev}")));
            }
        }
        if rest.is_empty() {
            return Err(Error::InvalidTimeline(format!("empty entry at {time}")));
        }
        out.push((time, rest.to_string()));
    }
    Ok(out)
}

fn split_time_prefix(line: &str) -> Option<(TimePoint, &str)> {
    let s = line.strip_prefix('[').unwrap_or(line);
    let s = s.strip_prefix(['t', 'T'])?;
    let digits = s.find(|c: char| !c.is_ascii_digit()).unwrap_or(s.len());
    if digits == 0 {
        return None;
    }
    let time = TimePoint::new(s[..digits].parse().ok()?)?;
    let rest = s[digits..].trim_start_matches(']');
    let rest = rest.trim_start_matches([':', '.', ')', '-', ' ', '\t']);
    Some((time, rest.trim()))
}

/// Binds line `i` of the story to time point `t_i`.
pub fn annotate_timeline(raw: &RawStory) -> Result<TemporalStory> {
    if raw.is_empty() {
        return Err(Error::EmptyStory);
    }
    let entries = raw
        .lines()
        .iter()
        .enumerate()
        .map(|(pos, text)| StoryEntry { time: TimePoint::from_position(pos), text: text.clone() })
        .collect();
    TemporalStory::from_entries(entries, raw.kind())
}

pub fn strip_timeline(story: &TemporalStory) -> RawStory {
    RawStory { lines: story.entries.iter().map(|e| e.text.clone()).collect(), kind: story.kind }
}

/// What happened at one time point.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum EventKind {
    Enter {
        actor: String,
        location: String,
    },
    Exit {
        actor: String,
        location: String,
    },
    ObjectState {
        object: String,
        container: String,
        location: String,
    },
    Move {
        actor: String,
        object: String,
        container: String,
        location: String,
    },
    Utterance {
        actor: String,
        location: String,
        info_id: String,
    },
    Join {
        actor: String,
        location: String,
    },
    Leave {
        actor: String,
        location: String,
    },
    /// Private, truthful report of an object's location from `actor` to `listener`.
    Tell {
        actor: String,
        listener: String,
        object: String,
        container: String,
    },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::Enter { .. } => "enter",
            EventKind::Exit { .. } => "exit",
            EventKind::ObjectState { .. } => "object_state",
            EventKind::Move { .. } => "move",
            EventKind::Utterance { .. } => "utterance",
            EventKind::Join { .. } => "join",
            EventKind::Leave { .. } => "leave",
            EventKind::Tell { .. } => "tell",
        }
    }

    /// Presence changes: entering or leaving a room or conversation.
    pub fn is_presence_change(&self) -> bool {
        matches!(
            self,
            EventKind::Enter { .. } | EventKind::Exit { .. } | EventKind::Join { .. } | EventKind::Leave { .. }
        )
    }

    pub fn is_arrival(&self) -> bool {
        matches!(self, EventKind::Enter { .. } | EventKind::Join { .. })
    }

    pub fn is_departure(&self) -> bool {
        matches!(self, EventKind::Exit { .. } | EventKind::Leave { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "EventRecord", try_from = "EventRecord")]
pub struct Event {
    pub time: TimePoint,
    pub kind: EventKind,
}

impl Event {
    pub fn new(time: TimePoint, kind: EventKind) -> Self {
        Self { time, kind }
    }

    pub fn actor(&self) -> Option<&str> {
        match &self.kind {
            EventKind::Enter { actor, .. }
            | EventKind::Exit { actor, .. }
            | EventKind::Move { actor, .. }
            | EventKind::Utterance { actor, .. }
            | EventKind::Join { actor, .. }
            | EventKind::Leave { actor, .. }
            | EventKind::Tell { actor, .. } => Some(actor),
            EventKind::ObjectState { .. } => None,
        }
    }

    pub fn location(&self) -> Option<&str> {
        match &self.kind {
            EventKind::Enter { location, .. }
            | EventKind::Exit { location, .. }
            | EventKind::ObjectState { location, .. }
            | EventKind::Move { location, .. }
            | EventKind::Utterance { location, .. }
            | EventKind::Join { location, .. }
            | EventKind::Leave { location, .. } => Some(location),
            EventKind::Tell { .. } => None,
        }
    }

    pub fn object(&self) -> Option<&str> {
        match &self.kind {
            EventKind::ObjectState { object, .. } | EventKind::Move { object, .. } | EventKind::Tell { object, .. } => {
                Some(object)
            }
            _ => None,
        }
    }

    pub fn container(&self) -> Option<&str> {
        match &self.kind {
            EventKind::ObjectState { container, .. }
            | EventKind::Move { container, .. }
            | EventKind::Tell { container, .. } => Some(container),
            _ => None,
        }
    }

    pub fn listener(&self) -> Option<&str> {
        match &self.kind {
            EventKind::Tell { listener, .. } => Some(listener),
            _ => None,
        }
    }

    pub fn info_id(&self) -> Option<&str> {
        match &self.kind {
            EventKind::Utterance { info_id, .. } => Some(info_id),
            _ => None,
        }
    }

    /// Container this event places `object` in, if it carries that fact.
    pub fn state_of(&self, object: &str) -> Option<&str> {
        (self.object() == Some(object)).then(|| self.container()).flatten()
    }

    /// Characters that take part in the event directly.
    pub fn participants(&self) -> impl Iterator<Item = &str> {
        self.actor().into_iter().chain(self.listener())
    }
}

/// Flat wire form of an [`Event`]; absent fields are omitted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub time: TimePoint,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actor: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub container: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub listener: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub info_id: Option<String>,
}

impl From<&Event> for EventRecord {
    fn from(e: &Event) -> Self {
        let owned = |s: Option<&str>| s.map(str::to_string);
        EventRecord {
            time: e.time,
            kind: e.kind.name().to_string(),
            actor: owned(e.actor()),
            location: owned(e.location()),
            object: owned(e.object()),
            container: owned(e.container()),
            listener: owned(e.listener()),
            info_id: owned(e.info_id()),
        }
    }
}

impl From<Event> for EventRecord {
    fn from(e: Event) -> Self {
        EventRecord::from(&e)
    }
}

impl TryFrom<EventRecord> for Event {
    type Error = String;

    fn try_from(r: EventRecord) -> std::result::Result<Self, String> {
        fn need(field: Option<String>, name: &str, kind: &str) -> std::result::Result<String, String> {
            field.ok_or_else(|| format!("{kind} event requires field {name:?}"))
        }
        fn forbid(field: &Option<String>, name: &str, kind: &str) -> std::result::Result<(), String> {
            match field {
                Some(_) => Err(format!("{kind} event must not carry field {name:?}")),
                None => Ok(()),
            }
        }
        let k = r.kind.as_str();
        let kind = match k {
            "enter" | "exit" | "join" | "leave" => {
                forbid(&r.object, "object", k)?;
                forbid(&r.container, "container", k)?;
                forbid(&r.listener, "listener", k)?;
                forbid(&r.info_id, "info_id", k)?;
                let actor = need(r.actor, "actor", k)?;
                let location = need(r.location, "location", k)?;
                match k {
                    "enter" => EventKind::Enter { actor, location },
                    "exit" => EventKind::Exit { actor, location },
                    "join" => EventKind::Join { actor, location },
                    _ => EventKind::Leave { actor, location },
                }
            }
            "object_state" => {
                forbid(&r.actor, "actor", k)?;
                forbid(&r.listener, "listener", k)?;
                forbid(&r.info_id, "info_id", k)?;
                EventKind::ObjectState {
                    object: need(r.object, "object", k)?,
                    container: need(r.container, "container", k)?,
                    location: need(r.location, "location", k)?,
                }
            }
            "move" => {
                forbid(&r.listener, "listener", k)?;
                forbid(&r.info_id, "info_id", k)?;
                EventKind::Move {
                    actor: need(r.actor, "actor", k)?,
                    object: need(r.object, "object", k)?,
                    container: need(r.container, "container", k)?,
                    location: need(r.location, "location", k)?,
                }
            }
            "utterance" => {
                forbid(&r.object, "object", k)?;
                forbid(&r.container, "container", k)?;
                forbid(&r.listener, "listener", k)?;
                EventKind::Utterance {
                    actor: need(r.actor, "actor", k)?,
                    location: need(r.location, "location", k)?,
                    info_id: need(r.info_id, "info_id", k)?,
                }
            }
            "tell" => {
                forbid(&r.location, "location", k)?;
                forbid(&r.info_id, "info_id", k)?;
                EventKind::Tell {
                    actor: need(r.actor, "actor", k)?,
                    listener: need(r.listener, "listener", k)?,
                    object: need(r.object, "object", k)?,
                    container: need(r.container, "container", k)?,
                }
            }
            other => return Err(format!("unknown event kind {other:?}")),
        };
        Ok(Event { time: r.time, kind })
    }
}

/// Tracks where each character is while replaying a log.
///
/// A character whose first located appearance is anything other than an
/// arrival (an exit, a move, an utterance) is taken to be at that location from
/// the start of the story.
#[derive(Debug, Clone, Default)]
pub struct Presence {
    at: BTreeMap<String, String>,
}

impl Presence {
    pub fn initial(log: &EventLog) -> Self {
        Self { at: log.initial_locations.clone() }
    }

    pub fn location_of(&self, character: &str) -> Option<&str> {
        self.at.get(character).map(String::as_str)
    }

    pub fn is_at(&self, character: &str, location: &str) -> bool {
        self.location_of(character) == Some(location)
    }

    pub fn occupants<'a>(&'a self, location: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.at.iter().filter(move |(_, l)| l.as_str() == location).map(|(c, _)| c.as_str())
    }

    /// Applies the presence effect of `event`, if any.
    pub fn apply(&mut self, event: &Event) {
        match &event.kind {
            EventKind::Enter { actor, location } | EventKind::Join { actor, location } => {
                self.at.insert(actor.clone(), location.clone());
            }
            EventKind::Exit { actor, location } | EventKind::Leave { actor, location }
                if self.is_at(actor, location) =>
            {
                self.at.remove(actor);
            }
            _ => {}
        }
    }
}

#[derive(Serialize, Deserialize)]
struct StoryRecord {
    kind: ScenarioKind,
    text: String,
}

impl From<TemporalStory> for StoryRecord {
    fn from(s: TemporalStory) -> Self {
        StoryRecord { kind: s.kind, text: s.to_text() }
    }
}

impl TryFrom<StoryRecord> for TemporalStory {
    type Error = Error;

    fn try_from(r: StoryRecord) -> Result<Self> {
        TemporalStory::parse_text(&r.text, r.kind)
    }
}

/// Ordered events of one scenario plus the name sets they mention.
/// Serialized as the bare event list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "Vec<Event>", from = "Vec<Event>")]
pub struct EventLog {
    events: Vec<Event>,
    characters: BTreeSet<String>,
    locations: BTreeSet<String>,
    objects: BTreeSet<String>,
    containers: BTreeSet<String>,
    initial_locations: BTreeMap<String, String>,
}

impl From<Vec<Event>> for EventLog {
    fn from(events: Vec<Event>) -> Self {
        EventLog::new(events)
    }
}

impl From<EventLog> for Vec<Event> {
    fn from(log: EventLog) -> Self {
        log.events
    }
}

impl EventLog {
    pub fn new(events: Vec<Event>) -> Self {
        let mut characters = BTreeSet::new();
        let mut locations = BTreeSet::new();
        let mut objects = BTreeSet::new();
        let mut containers = BTreeSet::new();
        let mut seen = BTreeSet::new();
        let mut initial_locations = BTreeMap::new();
        for e in &events {
            characters.extend(e.participants().map(str::to_string));
            locations.extend(e.location().map(str::to_string));
            objects.extend(e.object().map(str::to_string));
            containers.extend(e.container().map(str::to_string));
            if let (Some(actor), Some(location)) = (e.actor(), e.location()) {
                if seen.insert(actor.to_string()) && !e.kind.is_arrival() {
                    initial_locations.insert(actor.to_string(), location.to_string());
                }
            }
        }
        Self { events, characters, locations, objects, containers, initial_locations }
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn characters(&self) -> &BTreeSet<String> {
        &self.characters
    }

    pub fn locations(&self) -> &BTreeSet<String> {
        &self.locations
    }

    pub fn objects(&self) -> &BTreeSet<String> {
        &self.objects
    }

    pub fn containers(&self) -> &BTreeSet<String> {
        &self.containers
    }

    /// Where a character is before the first event, if anywhere.
    pub fn initial_location(&self, character: &str) -> Option<&str> {
        self.initial_locations.get(character).map(String::as_str)
    }

    pub fn event_at(&self, time: TimePoint) -> Option<&Event> {
        self.events.get(time.position()).filter(|e| e.time == time)
    }

    pub fn last_time(&self) -> Option<TimePoint> {
        self.events.last().map(|e| e.time)
    }

    pub fn has_character(&self, name: &str) -> bool {
        self.characters.contains(name)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(&EventRecord::from(e)).expect("event record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut events = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: EventRecord =
                serde_json::from_str(line).map_err(|e| Error::Schema { line: i + 1, message: e.to_string() })?;
            let event = Event::try_from(record).map_err(|message| Error::Schema { line: i + 1, message })?;
            events.push(event);
        }
        Ok(Self::new(events))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    TimeOutOfSequence { expected: TimePoint },
    AlreadyPresent { character: String, location: String },
    NotPresent { character: String, location: String },
    ActorAbsent { character: String, location: String },
    NoInitialState { object: String },
    SelfTell { character: String },
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViolationKind::TimeOutOfSequence { expected } => write!(f, "expected time {expected}"),
            ViolationKind::AlreadyPresent { character, location } => {
                write!(f, "{character} arrives while already in the {location}")
            }
            ViolationKind::NotPresent { character, location } => {
                write!(f, "{character} leaves the {location} without being in it")
            }
            ViolationKind::ActorAbsent { character, location } => {
                write!(f, "{character} acts in the {location} without being there")
            }
            ViolationKind::NoInitialState { object } => {
                write!(f, "the {object} is moved before any initial state")
            }
            ViolationKind::SelfTell { character } => write!(f, "{character} tells themself"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub time: TimePoint,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every structural invariant of an event log and reports each breach.
///
/// A character is in at most one place, so an arrival while present anywhere
/// counts as a violation.
pub fn validate_log(log: &EventLog) -> ValidationReport {
    let mut violations = Vec::new();
    let mut presence = Presence::initial(log);
    let mut stated: BTreeSet<&str> = BTreeSet::new();
    for (pos, e) in log.events().iter().enumerate() {
        let expected = TimePoint::from_position(pos);
        let mut flag = |kind| violations.push(Violation { time: e.time, kind });
        if e.time != expected {
            flag(ViolationKind::TimeOutOfSequence { expected });
        }
        match &e.kind {
            EventKind::Enter { actor, .. } | EventKind::Join { actor, .. } => {
                if let Some(current) = presence.location_of(actor) {
                    flag(ViolationKind::AlreadyPresent { character: actor.clone(), location: current.to_string() });
                }
            }
            EventKind::Exit { actor, location } | EventKind::Leave { actor, location } => {
                if !presence.is_at(actor, location) {
                    flag(ViolationKind::NotPresent { character: actor.clone(), location: location.clone() });
                }
            }
            EventKind::Move { actor, object, location, .. } => {
                if !presence.is_at(actor, location) {
                    flag(ViolationKind::ActorAbsent { character: actor.clone(), location: location.clone() });
                }
                if !stated.contains(object.as_str()) {
                    flag(ViolationKind::NoInitialState { object: object.clone() });
                }
            }
            EventKind::Utterance { actor, location, .. } => {
                if !presence.is_at(actor, location) {
                    flag(ViolationKind::ActorAbsent { character: actor.clone(), location: location.clone() });
                }
            }
            EventKind::ObjectState { object, .. } => {
                stated.insert(object);
            }
            EventKind::Tell { actor, listener, .. } => {
                if actor == listener {
                    flag(ViolationKind::SelfTell { character: actor.clone() });
                }
            }
        }
        presence.apply(e);
    }
    ValidationReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(i: u32) -> TimePoint {
        TimePoint::new(i).unwrap()
    }

    fn enter(i: u32, a: &str, l: &str) -> Event {
        Event::new(t(i), EventKind::Enter { actor: a.into(), location: l.into() })
    }

    fn exit(i: u32, a: &str, l: &str) -> Event {
        Event::new(t(i), EventKind::Exit { actor: a.into(), location: l.into() })
    }

    #[test]
    fn annotate_two_lines() {
        let raw =
            RawStory::new(["A entered the kitchen.", "The celery is in the basket."], ScenarioKind::Reading).unwrap();
        let ts = annotate_timeline(&raw).unwrap();
        assert_eq!(
            ts.entries(),
            &[
                StoryEntry { time: t(1), text: "A entered the kitchen.".into() },
                StoryEntry { time: t(2), text: "The celery is in the basket.".into() },
            ]
        );
    }

    #[test]
    fn annotate_single_line_and_strip() {
        let raw = RawStory::new(["Hi."], ScenarioKind::Dialogue).unwrap();
        let ts = annotate_timeline(&raw).unwrap();
        assert_eq!(ts.to_text(), "t1: Hi.");
        assert_eq!(strip_timeline(&ts), raw);
    }

    #[test]
    fn annotate_rejects_empty() {
        let raw = RawStory::from_text("\n  \n", ScenarioKind::Reading);
        assert_eq!(annotate_timeline(&raw), Err(Error::EmptyStory));
    }

    #[test]
    fn raw_story_rejects_blank_line() {
        assert_eq!(RawStory::new(["a", " "], ScenarioKind::Reading), Err(Error::EmptyLine { index: 1 }));
    }

    #[test]
    fn seven_line_story_gets_t1_to_t7() {
        let raw = RawStory::from_text("a\nb\nc\nd\ne\nf\ng", ScenarioKind::Reading);
        let ts = annotate_timeline(&raw).unwrap();
        let times: Vec<u32> = ts.entries().iter().map(|e| e.time.index()).collect();
        assert_eq!(times, (1..=7).collect::<Vec<_>>());
        assert_eq!(strip_timeline(&ts).lines().len(), 7);
    }

    #[test]
    fn timed_line_variants() {
        let parsed = parse_timed_lines("t1: a\n[t3] b\nT4. c\n t7 - d").unwrap();
        let times: Vec<u32> = parsed.iter().map(|(t, _)| t.index()).collect();
        assert_eq!(times, vec![1, 3, 4, 7]);
        assert_eq!(parsed[3].1, "d");
        assert!(parse_timed_lines("t2: a\nt2: b").is_err());
        assert!(parse_timed_lines("no prefix").is_err());
        assert!(TemporalStory::parse_text("t1: a\nt3: b", ScenarioKind::Reading).is_err());
    }

    #[test]
    fn exit_without_enter_is_flagged() {
        let log = EventLog::new(vec![enter(1, "A", "room"), exit(2, "A", "room"), exit(3, "A", "room")]);
        let report = validate_log(&log);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].time, t(3));
    }

    #[test]
    fn move_without_initial_state_is_flagged() {
        let log = EventLog::new(vec![
            enter(1, "A", "room"),
            Event::new(
                t(2),
                EventKind::Move {
                    actor: "A".into(),
                    object: "apple".into(),
                    container: "box".into(),
                    location: "room".into(),
                },
            ),
        ]);
        let report = validate_log(&log);
        assert_eq!(
            report.violations,
            vec![Violation { time: t(2), kind: ViolationKind::NoInitialState { object: "apple".into() } }]
        );
    }

    #[test]
    fn gaps_and_self_tell_are_flagged() {
        let log = EventLog::new(vec![
            enter(1, "A", "room"),
            Event::new(
                t(3),
                EventKind::Tell { actor: "A".into(), listener: "A".into(), object: "o".into(), container: "c".into() },
            ),
        ]);
        let kinds: Vec<_> = validate_log(&log).violations.into_iter().map(|v| v.kind).collect();
        assert!(kinds.contains(&ViolationKind::TimeOutOfSequence { expected: t(2) }));
        assert!(kinds.contains(&ViolationKind::SelfTell { character: "A".into() }));
    }

    #[test]
    fn implicit_initial_presence() {
        let log = EventLog::new(vec![enter(1, "A", "room"), exit(2, "B", "room")]);
        assert_eq!(log.initial_location("A"), None);
        assert_eq!(log.initial_location("B"), Some("room"));
        assert!(validate_log(&log).is_ok());
    }

    #[test]
    fn jsonl_field_order_and_omission() {
        let log = EventLog::new(vec![Event::new(
            t(1),
            EventKind::Utterance { actor: "Sara".into(), location: "conversation".into(), info_id: "info_1".into() },
        )]);
        assert_eq!(
            log.to_jsonl(),
            "{\"time\":1,\"kind\":\"utterance\",\"actor\":\"Sara\",\"location\":\"conversation\",\"info_id\":\"info_1\"}\n"
        );
        assert_eq!(EventLog::from_jsonl(&log.to_jsonl()).unwrap(), log);
    }

    #[test]
    fn jsonl_rejects_bad_records() {
        let err = EventLog::from_jsonl("{\"time\":1,\"kind\":\"enter\",\"actor\":\"A\"}").unwrap_err();
        assert!(matches!(err, Error::Schema { line: 1, .. }));
        let err =
            EventLog::from_jsonl("\n{\"time\":0,\"kind\":\"enter\",\"actor\":\"A\",\"location\":\"r\"}").unwrap_err();
        assert!(matches!(err, Error::Schema { line: 2, .. }));
        assert!(EventLog::from_jsonl("{\"time\":1,\"kind\":\"fly\"}").is_err());
    }
}
