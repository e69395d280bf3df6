//! Ground truth by recursive perspective filtering.
//!
//! `belief([c1, .., cm])` is `belief([c2, .., cm])` evaluated on the view of
//! the log that `c1` perceived, with presence replayed inside that view. This
//! module deliberately shares no code with the perception or solver modules.
//!
//! A view also remembers, for every located event it contains, who the parent
//! view knew to be in that room just before the event: whoever witnesses
//! something in a room also sees who else is there.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::event::{Event, EventKind, EventLog, TimePoint};
use crate::parser::{QuestionFlavor, ToMQuestion};
use crate::solver::AnswerValue;

/// Who is where, as seen from one view.
type Whereabouts = BTreeMap<String, String>;

#[derive(Debug, Clone)]
struct View<'a> {
    events: Vec<&'a Event>,
    initial: Whereabouts,
    /// Occupants of the event's location just before each event.
    occupants_before: BTreeMap<TimePoint, (String, BTreeSet<String>)>,
}

impl<'a> View<'a> {
    fn root(log: &'a EventLog) -> Self {
        let initial = log
            .characters()
            .iter()
            .filter_map(|c| log.initial_location(c).map(|l| (c.clone(), l.to_string())))
            .collect();
        Self { events: log.events().iter().collect(), initial, occupants_before: BTreeMap::new() }
    }

    /// Replays the view, calling `visit(event, whereabouts_before)` per event.
    fn replay(&self, mut visit: impl FnMut(&Event, &Whereabouts)) {
        let mut here = self.initial.clone();
        for e in &self.events {
            if let Some((location, occupants)) = self.occupants_before.get(&e.time) {
                here.retain(|who, at| at != location || occupants.contains(who));
                for who in occupants {
                    here.insert(who.clone(), location.clone());
                }
            }
            visit(e, &here);
            match &e.kind {
                EventKind::Enter { actor, location } | EventKind::Join { actor, location } => {
                    here.insert(actor.clone(), location.clone());
                }
                EventKind::Exit { actor, location } | EventKind::Leave { actor, location }
                    if here.get(actor) == Some(location) =>
                {
                    here.remove(actor);
                }
                _ => {}
            }
        }
    }

    fn seen_by(&self, character: &str) -> BTreeSet<TimePoint> {
        let mut seen = BTreeSet::new();
        self.replay(|e, here| {
            let (actor, listener, location) = event_roles(e);
            let witnessed = actor == Some(character)
                || listener == Some(character)
                || location.is_some_and(|l| here.get(character).map(String::as_str) == Some(l));
            if witnessed {
                seen.insert(e.time);
            }
        });
        seen
    }

    fn restrict_to(&self, character: &str) -> View<'a> {
        let seen = self.seen_by(character);
        let mut events = Vec::new();
        let mut occupants_before = BTreeMap::new();
        let mut position = 0;
        self.replay(|e, here| {
            let event = self.events[position];
            position += 1;
            if !seen.contains(&e.time) {
                return;
            }
            events.push(event);
            if let (_, _, Some(location)) = event_roles(e) {
                let occupants = here.iter().filter(|(_, at)| *at == location).map(|(who, _)| who.clone()).collect();
                occupants_before.insert(e.time, (location.to_string(), occupants));
            }
        });
        View { events, initial: self.initial.clone(), occupants_before }
    }
}

fn event_roles(e: &Event) -> (Option<&str>, Option<&str>, Option<&str>) {
    match &e.kind {
        EventKind::Enter { actor, location }
        | EventKind::Exit { actor, location }
        | EventKind::Join { actor, location }
        | EventKind::Leave { actor, location }
        | EventKind::Utterance { actor, location, .. }
        | EventKind::Move { actor, location, .. } => (Some(actor), None, Some(location)),
        EventKind::ObjectState { location, .. } => (None, None, Some(location)),
        EventKind::Tell { actor, listener, .. } => (Some(actor), Some(listener), None),
    }
}

fn placed_in<'e>(e: &'e Event, object: &str) -> Option<&'e str> {
    match &e.kind {
        EventKind::ObjectState { object: o, container, .. }
        | EventKind::Move { object: o, container, .. }
        | EventKind::Tell { object: o, container, .. }
            if o == object =>
        {
            Some(container)
        }
        _ => None,
    }
}

fn check_entities(log: &EventLog, q: &ToMQuestion) -> Result<()> {
    if let Some(object) = &q.object {
        if !log.objects().contains(object) {
            return Err(Error::UnknownObject(object.clone()));
        }
    }
    match q.chain.iter().find(|c| !log.has_character(c)) {
        Some(c) => Err(Error::UnknownCharacter(c.clone())),
        None => Ok(()),
    }
}

/// Reference answer for belief, reality and memory questions.
pub fn oracle_belief(log: &EventLog, q: &ToMQuestion) -> Result<AnswerValue> {
    check_entities(log, q)?;
    let container = |c: Option<&str>| c.map_or(AnswerValue::Unknown, |c| AnswerValue::Container(c.to_string()));
    match (q.flavor, q.object.as_deref()) {
        (QuestionFlavor::Reality, Some(object)) => {
            Ok(container(log.events().iter().rev().find_map(|e| placed_in(e, object))))
        }
        (QuestionFlavor::Memory, Some(object)) => Ok(container(log.events().iter().find_map(|e| match &e.kind {
            EventKind::ObjectState { object: o, container, .. } if o == object => Some(container.as_str()),
            _ => None,
        }))),
        (QuestionFlavor::Belief, _) if !q.chain.is_empty() => {
            let (innermost, outer) = q.chain.split_last().expect("non-empty chain");
            let mut view = View::root(log);
            for c in outer {
                view = view.restrict_to(c);
            }
            let seen = view.seen_by(innermost);
            match q.object.as_deref() {
                Some(object) => Ok(container(
                    view.events.iter().filter(|e| seen.contains(&e.time)).rev().find_map(|e| placed_in(e, object)),
                )),
                None if !q.info_times.is_empty() => Ok(AnswerValue::Knowledge(q.info_times.is_subset(&seen))),
                None => Ok(AnswerValue::Unknown),
            }
        }
        (flavor, _) if flavor.is_info() => Err(Error::UnsupportedFlavor(flavor.name())),
        _ => Ok(AnswerValue::Unknown),
    }
}

/// Whether `character` witnessed every event at `info_times`.
pub fn oracle_knows(log: &EventLog, info_times: &BTreeSet<TimePoint>, character: &str) -> Result<bool> {
    if !log.has_character(character) {
        return Err(Error::UnknownCharacter(character.to_string()));
    }
    Ok(info_times.is_subset(&View::root(log).seen_by(character)))
}

/// Reference answer for answerability and info-access questions.
pub fn oracle_info(log: &EventLog, q: &ToMQuestion) -> Result<AnswerValue> {
    if !q.flavor.is_info() {
        return Err(Error::UnsupportedFlavor(q.flavor.name()));
    }
    if q.flavor.is_list() {
        let mut knowers = BTreeSet::new();
        for c in log.characters() {
            if oracle_knows(log, &q.info_times, c)? {
                knowers.insert(c.clone());
            }
        }
        Ok(AnswerValue::Characters(knowers))
    } else {
        let target = q.target.as_deref().ok_or_else(|| Error::UnknownCharacter(String::new()))?;
        Ok(AnswerValue::Bool(oracle_knows(log, &q.info_times, target)?))
    }
}

/// Dispatches to [`oracle_belief`] or [`oracle_info`].
pub fn oracle_answer(log: &EventLog, q: &ToMQuestion) -> Result<AnswerValue> {
    if q.flavor.is_info() {
        oracle_info(log, q)
    } else {
        oracle_belief(log, q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::tests::worked_log;

    fn c(s: &str) -> AnswerValue {
        AnswerValue::Container(s.into())
    }

    #[test]
    fn worked_example_answers() {
        let log = worked_log();
        let b = |chain: &[&str]| oracle_belief(&log, &ToMQuestion::belief(chain, "celery")).unwrap();
        assert_eq!(b(&["John", "Bob"]), c("box"));
        assert_eq!(b(&["Bob"]), c("box"));
        assert_eq!(b(&["John"]), c("table"));
        assert_eq!(b(&["Alice", "Bob"]), c("basket"));
        assert_eq!(b(&["John", "Bob", "Alice"]), c("basket"));
        assert_eq!(oracle_belief(&log, &ToMQuestion::reality("celery")).unwrap(), c("table"));
        assert_eq!(oracle_belief(&log, &ToMQuestion::memory("celery")).unwrap(), c("basket"));
    }

    #[test]
    fn full_visibility_collapses_to_reality() {
        let log = worked_log();
        let reality = oracle_belief(&log, &ToMQuestion::reality("celery")).unwrap();
        assert_eq!(oracle_belief(&log, &ToMQuestion::belief(&["John"], "celery")).unwrap(), reality);
    }

    #[test]
    fn arrival_reveals_occupants() {
        // Bob arrives after Ann and never sees her arrival, yet Bob's view of
        // Ann's perspective must place her in the room.
        let log = crate::parser::parse_story(
            &crate::event::annotate_timeline(
                &crate::event::RawStory::new(
                    [
                        "Ann entered the den.",
                        "Bob entered the den.",
                        "The key is in the jar.",
                        "Ann exited the den.",
                        "Bob moved the key to the tin.",
                    ],
                    crate::event::ScenarioKind::Reading,
                )
                .unwrap(),
            )
            .unwrap(),
        )
        .unwrap();
        assert_eq!(oracle_belief(&log, &ToMQuestion::belief(&["Bob", "Ann"], "key")).unwrap(), c("jar"));
        assert_eq!(oracle_belief(&log, &ToMQuestion::belief(&["Ann", "Bob"], "key")).unwrap(), c("jar"));
        assert_eq!(oracle_belief(&log, &ToMQuestion::belief(&["Bob"], "key")).unwrap(), c("tin"));
    }

    #[test]
    fn oracle_errors() {
        let log = worked_log();
        assert_eq!(
            oracle_belief(&log, &ToMQuestion::belief(&["Zed"], "celery")),
            Err(Error::UnknownCharacter("Zed".into()))
        );
        assert_eq!(oracle_belief(&log, &ToMQuestion::reality("apple")), Err(Error::UnknownObject("apple".into())));
    }
}
