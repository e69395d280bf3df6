//! Per-character belief state chains: which events each character perceives,
//! the resulting perceptible time sets, and the split into thing-state
//! ("self world") and presence ("social world") events.
//!
//! A character perceives the event at time `t` when it is the event's actor,
//! when it is the listener of a tell, or when, just before `t`, it is at the
//! location where the event happens.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::{Event, EventKind, EventLog, Presence, TemporalStory, TimePoint};
use crate::parser::render_sentence;

/// The events a character perceives, in time order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeliefChain {
    pub character: String,
    pub perceived: Vec<Event>,
}

impl BeliefChain {
    pub fn times(&self) -> impl Iterator<Item = TimePoint> + '_ {
        self.perceived.iter().map(|e| e.time)
    }

    /// Perceived sentences with `tN:` prefixes, one per line. Text comes from
    /// `story` when it has the time point, otherwise from the canonical grammar.
    pub fn dump(&self, story: Option<&TemporalStory>) -> String {
        dump_events(&self.perceived, story)
    }
}

pub(crate) fn dump_events(events: &[Event], story: Option<&TemporalStory>) -> String {
    events
        .iter()
        .map(|e| {
            let text = story
                .and_then(|s| s.text_at(e.time).map(str::to_string))
                .or_else(|| render_sentence(e))
                .unwrap_or_else(|| format!("{} spoke.", e.actor().unwrap_or("someone")));
            format!("{}: {}", e.time, text)
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerceptibleTimeSet {
    pub character: String,
    pub times: BTreeSet<TimePoint>,
}

impl PerceptibleTimeSet {
    pub fn contains(&self, t: TimePoint) -> bool {
        self.times.contains(&t)
    }
}

/// Thing-state events of a chain: object states, moves, utterances and tells.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelfWorldBelief {
    pub character: String,
    pub events: Vec<Event>,
}

/// Presence events of a chain: enter, exit, join and leave.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SocialWorldBelief {
    pub character: String,
    pub events: Vec<Event>,
}

/// Whether `character`, located per `before`, perceives `event`.
pub fn perceives(before: &Presence, event: &Event, character: &str) -> bool {
    if event.actor() == Some(character) || event.listener() == Some(character) {
        return true;
    }
    match event.location() {
        Some(loc) => before.is_at(character, loc),
        None => false,
    }
}

pub fn build_tbsc(log: &EventLog, character: &str) -> Result<BeliefChain> {
    if !log.has_character(character) {
        return Err(Error::UnknownCharacter(character.to_string()));
    }
    let mut presence = Presence::initial(log);
    let mut perceived = Vec::new();
    for event in log.events() {
        if perceives(&presence, event, character) {
            perceived.push(event.clone());
        }
        presence.apply(event);
    }
    Ok(BeliefChain { character: character.to_string(), perceived })
}

pub fn perceptible_time_set(chain: &BeliefChain) -> PerceptibleTimeSet {
    PerceptibleTimeSet { character: chain.character.clone(), times: chain.times().collect() }
}

/// Builds the chain for `character` and projects it onto times.
pub fn time_set_of(log: &EventLog, character: &str) -> Result<PerceptibleTimeSet> {
    build_tbsc(log, character).map(|c| perceptible_time_set(&c))
}

/// Whether an event carries thing-state content rather than presence.
pub fn is_self_world(kind: &EventKind) -> bool {
    !kind.is_presence_change()
}

pub fn compress_self_world(chain: &BeliefChain) -> (SelfWorldBelief, SocialWorldBelief) {
    let (own, social): (Vec<Event>, Vec<Event>) = chain.perceived.iter().cloned().partition(|e| is_self_world(&e.kind));
    (
        SelfWorldBelief { character: chain.character.clone(), events: own },
        SocialWorldBelief { character: chain.character.clone(), events: social },
    )
}

impl SelfWorldBelief {
    pub fn dump(&self, story: Option<&TemporalStory>) -> String {
        dump_events(&self.events, story)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::event::{annotate_timeline, RawStory, ScenarioKind};
    use crate::parser::parse_story;

    pub(crate) fn t(i: u32) -> TimePoint {
        TimePoint::new(i).unwrap()
    }

    pub(crate) fn times(ix: &[u32]) -> BTreeSet<TimePoint> {
        ix.iter().map(|&i| t(i)).collect()
    }

    pub(crate) const WORKED_STORY: [&str; 7] = [
        "Alice entered the room.",
        "The celery is in the basket.",
        "Alice exited the room.",
        "Bob moved the celery to the box.",
        "Bob exited the room.",
        "Alice entered the room.",
        "John moved the celery to the table.",
    ];

    pub(crate) fn worked_story() -> TemporalStory {
        annotate_timeline(&RawStory::new(WORKED_STORY, ScenarioKind::Reading).unwrap()).unwrap()
    }

    pub(crate) fn worked_log() -> EventLog {
        parse_story(&worked_story()).unwrap()
    }

    #[test]
    fn worked_example_time_sets() {
        let log = worked_log();
        assert_eq!(time_set_of(&log, "John").unwrap().times, times(&[1, 2, 3, 4, 5, 6, 7]));
        assert_eq!(time_set_of(&log, "Bob").unwrap().times, times(&[1, 2, 3, 4, 5]));
        assert_eq!(time_set_of(&log, "Alice").unwrap().times, times(&[1, 2, 3, 6, 7]));
    }

    #[test]
    fn unknown_character() {
        assert_eq!(build_tbsc(&worked_log(), "Zed"), Err(Error::UnknownCharacter("Zed".into())));
    }

    #[test]
    fn single_character_sees_everything() {
        let ts = annotate_timeline(
            &RawStory::new(
                ["Mia entered the hall.", "The pen is in the drawer.", "Mia moved the pen to the box."],
                ScenarioKind::Reading,
            )
            .unwrap(),
        )
        .unwrap();
        let log = parse_story(&ts).unwrap();
        assert_eq!(build_tbsc(&log, "Mia").unwrap().perceived, log.events());
    }

    #[test]
    fn empty_chain_projects_to_empty_set() {
        let chain = BeliefChain { character: "X".into(), perceived: vec![] };
        assert!(perceptible_time_set(&chain).times.is_empty());
    }

    #[test]
    fn john_compression() {
        let log = worked_log();
        let (own, social) = compress_self_world(&build_tbsc(&log, "John").unwrap());
        let own_times: Vec<u32> = own.events.iter().map(|e| e.time.index()).collect();
        let social_times: Vec<u32> = social.events.iter().map(|e| e.time.index()).collect();
        assert_eq!(own_times, vec![2, 4, 7]);
        // The opening arrival is a presence change too.
        assert_eq!(social_times, vec![1, 3, 5, 6]);
        let own_states: Vec<&str> = own.events.iter().filter_map(|e| e.state_of("celery")).collect();
        assert_eq!(own_states, vec!["basket", "box", "table"]);
    }

    #[test]
    fn compression_degenerate_cases() {
        let log = worked_log();
        let states: Vec<Event> = log.events().iter().filter(|e| is_self_world(&e.kind)).cloned().collect();
        let (own, social) = compress_self_world(&BeliefChain { character: "John".into(), perceived: states.clone() });
        assert_eq!((own.events, social.events.len()), (states, 0));

        let moves: Vec<Event> = log.events().iter().filter(|e| e.kind.is_presence_change()).cloned().collect();
        let (own, social) = compress_self_world(&BeliefChain { character: "John".into(), perceived: moves.clone() });
        assert_eq!((own.events.len(), social.events), (0, moves));
    }

    #[test]
    fn tell_reaches_absent_listener() {
        let ts = annotate_timeline(
            &RawStory::new(
                [
                    "Ann entered the den.",
                    "Ben entered the den.",
                    "The key is in the jar.",
                    "Ben exited the den.",
                    "Ann moved the key to the tin.",
                    "Ann told Ben that the key is in the tin.",
                ],
                ScenarioKind::Reading,
            )
            .unwrap(),
        )
        .unwrap();
        let log = parse_story(&ts).unwrap();
        assert_eq!(time_set_of(&log, "Ben").unwrap().times, times(&[2, 3, 4, 6]));
        assert_eq!(time_set_of(&log, "Ann").unwrap().times, times(&[1, 2, 3, 4, 5, 6]));
    }

    #[test]
    fn chain_dump_uses_story_text() {
        let ts = worked_story();
        let chain = build_tbsc(&worked_log(), "Alice").unwrap();
        assert_eq!(
            chain.dump(Some(&ts)),
            "t1: Alice entered the room.\nt2: The celery is in the basket.\nt3: Alice exited the room.\n\
             t6: Alice entered the room.\nt7: John moved the celery to the table."
        );
        assert_eq!(chain.dump(None), chain.dump(Some(&ts)));
    }
}
