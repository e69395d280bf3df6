//! Symbolic belief solver. Higher-order questions are reduced to a
//! first-order question asked inside the window of times that every character
//! in the chain perceived.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::{Event, EventKind, EventLog, TimePoint};
use crate::parser::{QuestionFlavor, ToMQuestion};
use crate::perception::{build_tbsc, is_self_world, perceptible_time_set, PerceptibleTimeSet};

/// Times perceived by every participant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommunicationWindow {
    /// Distinct participants in first-mention order.
    pub participants: Vec<String>,
    pub times: BTreeSet<TimePoint>,
}

impl CommunicationWindow {
    pub fn label(&self) -> String {
        let prefix = if self.participants.len() == 1 { "T" } else { "BC" };
        format!("{prefix}({}) = {}", self.participants.join(","), format_times(&self.times))
    }
}

/// Intersects the sets; repeated characters count once.
pub fn communication_window(sets: &[PerceptibleTimeSet]) -> CommunicationWindow {
    let mut participants: Vec<String> = Vec::new();
    let mut times: Option<BTreeSet<TimePoint>> = None;
    for set in sets {
        if participants.contains(&set.character) {
            continue;
        }
        participants.push(set.character.clone());
        times = Some(match times {
            None => set.times.clone(),
            Some(acc) => acc.intersection(&set.times).copied().collect(),
        });
    }
    CommunicationWindow { participants, times: times.unwrap_or_default() }
}

/// `{t1..t3,t6..t7}`; single points are written bare, e.g. `{t2,t5}`.
pub fn format_times(times: &BTreeSet<TimePoint>) -> String {
    let mut runs: Vec<(u32, u32)> = Vec::new();
    for t in times.iter().map(|t| t.index()) {
        match runs.last_mut() {
            Some((_, end)) if *end + 1 == t => *end = t,
            _ => runs.push((t, t)),
        }
    }
    let parts: Vec<String> =
        runs.iter().map(|&(a, b)| if a == b { format!("t{a}") } else { format!("t{a}..t{b}") }).collect();
    format!("{{{}}}", parts.join(","))
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum AnswerValue {
    Container(String),
    Characters(BTreeSet<String>),
    /// Yes/no answer to a binary info question.
    Bool(bool),
    /// Whether the asked-about information is believed known.
    Knowledge(bool),
    Unknown,
}

impl AnswerValue {
    pub fn is_unknown(&self) -> bool {
        matches!(self, AnswerValue::Unknown)
    }
}

impl fmt::Display for AnswerValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnswerValue::Container(c) => f.write_str(c),
            AnswerValue::Characters(cs) => f.write_str(&cs.iter().cloned().collect::<Vec<_>>().join(", ")),
            AnswerValue::Bool(true) => f.write_str("yes"),
            AnswerValue::Bool(false) => f.write_str("no"),
            AnswerValue::Knowledge(true) => f.write_str("knows"),
            AnswerValue::Knowledge(false) => f.write_str("does not know"),
            AnswerValue::Unknown => f.write_str("unknown"),
        }
    }
}

pub const KNOWS: &str = "knows";
pub const DOES_NOT_KNOW: &str = "does not know";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverAnswer {
    pub value: AnswerValue,
    pub window: Option<CommunicationWindow>,
    pub trace: Vec<String>,
}

/// A log with every character's perceptible time set computed once.
#[derive(Debug, Clone)]
pub struct BeliefSolver<'a> {
    log: &'a EventLog,
    sets: BTreeMap<String, PerceptibleTimeSet>,
}

impl<'a> BeliefSolver<'a> {
    pub fn new(log: &'a EventLog) -> Self {
        let sets = log
            .characters()
            .iter()
            .map(|c| {
                let chain = build_tbsc(log, c).expect("character taken from the log");
                (c.clone(), perceptible_time_set(&chain))
            })
            .collect();
        Self { log, sets }
    }

    /// Uses externally derived time sets, e.g. ones read back from a model's
    /// belief chains. Characters missing from `sets` keep their exact set.
    pub fn with_time_sets(log: &'a EventLog, sets: impl IntoIterator<Item = PerceptibleTimeSet>) -> Self {
        let mut solver = Self::new(log);
        for set in sets {
            if solver.sets.contains_key(&set.character) {
                solver.sets.insert(set.character.clone(), set);
            }
        }
        solver
    }

    pub fn log(&self) -> &'a EventLog {
        self.log
    }

    pub fn time_set(&self, character: &str) -> Result<&PerceptibleTimeSet> {
        self.sets.get(character).ok_or_else(|| Error::UnknownCharacter(character.to_string()))
    }

    pub fn window<S: AsRef<str>>(&self, chain: &[S]) -> Result<CommunicationWindow> {
        let sets = chain.iter().map(|c| self.time_set(c.as_ref()).cloned()).collect::<Result<Vec<_>>>()?;
        Ok(communication_window(&sets))
    }

    pub fn transform(&self, q: &ToMQuestion) -> Result<(ToMQuestion, CommunicationWindow)> {
        if q.flavor != QuestionFlavor::Belief || q.order < 2 {
            return Err(Error::NotHigherOrder { order: q.order });
        }
        let window = self.window(&q.chain)?;
        let last = q.chain.last().cloned().expect("order >= 2 implies a chain");
        let first_order = ToMQuestion { order: 1, chain: vec![last], ..q.clone() };
        Ok((first_order, window))
    }

    pub fn solve(&self, q: &ToMQuestion) -> Result<SolverAnswer> {
        if q.flavor.is_info() {
            self.solve_info(q)
        } else {
            self.solve_belief(q)
        }
    }

    pub fn solve_belief(&self, q: &ToMQuestion) -> Result<SolverAnswer> {
        if q.flavor.is_info() {
            return Err(Error::UnsupportedFlavor(q.flavor.name()));
        }
        if let Some(object) = &q.object {
            if !self.log.objects().contains(object) {
                return Err(Error::UnknownObject(object.clone()));
            }
        }
        for c in &q.chain {
            self.time_set(c)?;
        }
        let (value, window, mut trace) = match (q.flavor, q.object.as_deref()) {
            (QuestionFlavor::Reality, Some(object)) => {
                let value = last_state(self.log.events().iter(), object);
                (value.clone(), None, vec![format!("reality of {object}: {value}")])
            }
            (QuestionFlavor::Memory, Some(object)) => {
                let value = self
                    .log
                    .events()
                    .iter()
                    .find_map(|e| match &e.kind {
                        EventKind::ObjectState { object: o, container, .. } if o == object => {
                            Some(AnswerValue::Container(container.clone()))
                        }
                        _ => None,
                    })
                    .unwrap_or(AnswerValue::Unknown);
                (value.clone(), None, vec![format!("initial state of {object}: {value}")])
            }
            (QuestionFlavor::Belief, Some(object)) if q.order == 1 => {
                let set = self.time_set(&q.chain[0])?;
                let value = last_state(self.events_in(&set.times).filter(|e| is_self_world(&e.kind)), object);
                let window = self.window(&q.chain)?;
                let line = format!("{}; answer within window: {value}", window.label());
                (value, Some(window), vec![line])
            }
            (QuestionFlavor::Belief, Some(object)) => {
                let (first_order, window) = self.transform(q)?;
                let value = last_state(self.events_in(&window.times), object);
                let line =
                    format!("{}; transformed: {}; answer within window: {value}", window.label(), first_order.render());
                (value, Some(window), vec![line])
            }
            (QuestionFlavor::Belief, None) if !q.info_times.is_empty() && !q.chain.is_empty() => {
                let window = self.window(&q.chain)?;
                let value = AnswerValue::Knowledge(q.info_times.is_subset(&window.times));
                let line = if q.order >= 2 {
                    let (first_order, _) = self.transform(q)?;
                    format!("{}; transformed: {}; answer within window: {value}", window.label(), first_order.render())
                } else {
                    format!("{}; answer within window: {value}", window.label())
                };
                (value, Some(window), vec![line])
            }
            _ => (AnswerValue::Unknown, None, vec!["question has no object or information to track".into()]),
        };
        let value = restrict_to_candidates(value, &q.candidates, &mut trace);
        Ok(SolverAnswer { value, window, trace })
    }

    /// Characters who perceived every time in `q.info_times`.
    pub fn knowers(&self, info_times: &BTreeSet<TimePoint>) -> BTreeSet<String> {
        self.sets.values().filter(|s| info_times.is_subset(&s.times)).map(|s| s.character.clone()).collect()
    }

    pub fn solve_info(&self, q: &ToMQuestion) -> Result<SolverAnswer> {
        if !q.flavor.is_info() {
            return Err(Error::UnsupportedFlavor(q.flavor.name()));
        }
        let knowers = self.knowers(&q.info_times);
        let info = format_times(&q.info_times);
        let (value, line) = if q.flavor.is_list() {
            let value = AnswerValue::Characters(knowers);
            let line = format!("characters perceiving {info}: {value}");
            (value, line)
        } else {
            let target = q.target.as_deref().ok_or_else(|| Error::UnknownCharacter(String::new()))?;
            let set = self.time_set(target)?;
            let value = AnswerValue::Bool(knowers.contains(target));
            let line = format!("T({target}) = {}; contains {info}: {value}", format_times(&set.times));
            (value, line)
        };
        Ok(SolverAnswer { value, window: None, trace: vec![line] })
    }

    pub fn events_in<'s>(&'s self, times: &'s BTreeSet<TimePoint>) -> impl Iterator<Item = &'a Event> + 's {
        self.log.events().iter().filter(move |e| times.contains(&e.time))
    }
}

fn last_state<'e>(events: impl Iterator<Item = &'e Event>, object: &str) -> AnswerValue {
    events
        .filter_map(|e| e.state_of(object))
        .last()
        .map(|c| AnswerValue::Container(c.to_string()))
        .unwrap_or(AnswerValue::Unknown)
}

fn restrict_to_candidates(value: AnswerValue, candidates: &[String], trace: &mut Vec<String>) -> AnswerValue {
    let text = value.to_string();
    let scalar = matches!(value, AnswerValue::Container(_) | AnswerValue::Knowledge(_));
    if scalar && !candidates.is_empty() && !candidates.contains(&text) {
        trace.push(format!("{text} is not among the candidates"));
        return AnswerValue::Unknown;
    }
    value
}

pub fn transform_question(q: &ToMQuestion, log: &EventLog) -> Result<(ToMQuestion, CommunicationWindow)> {
    BeliefSolver::new(log).transform(q)
}

pub fn solve_belief(log: &EventLog, q: &ToMQuestion) -> Result<SolverAnswer> {
    BeliefSolver::new(log).solve_belief(q)
}

pub fn solve_info(log: &EventLog, q: &ToMQuestion) -> Result<SolverAnswer> {
    BeliefSolver::new(log).solve_info(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::tests::{times, worked_log};
    use crate::perception::time_set_of;

    fn window_of(log: &EventLog, chain: &[&str]) -> CommunicationWindow {
        let sets: Vec<_> = chain.iter().map(|c| time_set_of(log, c).unwrap()).collect();
        communication_window(&sets)
    }

    #[test]
    fn worked_example_windows() {
        let log = worked_log();
        assert_eq!(window_of(&log, &["John", "Bob"]).times, times(&[1, 2, 3, 4, 5]));
        assert_eq!(window_of(&log, &["John", "Bob", "Alice"]).times, times(&[1, 2, 3]));
        assert_eq!(window_of(&log, &["Alice"]).times, times(&[1, 2, 3, 6, 7]));
        let cyclic = window_of(&log, &["Alice", "Bob", "Alice"]);
        assert_eq!(cyclic.participants, vec!["Alice", "Bob"]);
        assert_eq!(cyclic.times, times(&[1, 2, 3]));
    }

    #[test]
    fn empty_input_gives_empty_window() {
        assert!(communication_window(&[]).times.is_empty());
    }

    #[test]
    fn time_formatting() {
        assert_eq!(format_times(&times(&[1, 2, 3, 4, 5])), "{t1..t5}");
        assert_eq!(format_times(&times(&[1, 2, 3, 6, 7])), "{t1..t3,t6..t7}");
        assert_eq!(format_times(&times(&[2, 5])), "{t2,t5}");
        assert_eq!(format_times(&times(&[])), "{}");
    }

    #[test]
    fn transform_examples() {
        let log = worked_log();
        let q = ToMQuestion::belief(&["John", "Bob"], "celery");
        let (first, window) = transform_question(&q, &log).unwrap();
        assert_eq!(first, ToMQuestion::belief(&["Bob"], "celery"));
        assert_eq!(window.times, times(&[1, 2, 3, 4, 5]));

        let q = ToMQuestion::belief(&["Alice", "Bob", "Alice"], "celery");
        let (first, window) = transform_question(&q, &log).unwrap();
        assert_eq!(first.chain, vec!["Alice"]);
        assert_eq!(window.participants, vec!["Alice", "Bob"]);

        let q = ToMQuestion::belief(&["Bob"], "celery");
        assert_eq!(transform_question(&q, &log), Err(Error::NotHigherOrder { order: 1 }));
    }

    #[test]
    fn worked_example_answers() {
        let log = worked_log();
        let solver = BeliefSolver::new(&log);
        let answer = |q: ToMQuestion| solver.solve_belief(&q).unwrap().value;
        let c = |s: &str| AnswerValue::Container(s.into());
        assert_eq!(answer(ToMQuestion::belief(&["John", "Bob"], "celery")), c("box"));
        assert_eq!(answer(ToMQuestion::belief(&["John"], "celery")), c("table"));
        assert_eq!(answer(ToMQuestion::belief(&["Bob"], "celery")), c("box"));
        assert_eq!(answer(ToMQuestion::belief(&["Alice"], "celery")), c("table"));
        assert_eq!(answer(ToMQuestion::belief(&["Alice", "Bob"], "celery")), c("basket"));
        assert_eq!(answer(ToMQuestion::memory("celery")), c("basket"));
        assert_eq!(answer(ToMQuestion::reality("celery")), c("table"));
    }

    #[test]
    fn trace_format() {
        let log = worked_log();
        let a = solve_belief(&log, &ToMQuestion::belief(&["John", "Bob"], "celery")).unwrap();
        assert_eq!(
            a.trace,
            vec![
                "BC(John,Bob) = {t1..t5}; transformed: Where will Bob look for the celery?; answer within window: box"
            ]
        );
    }

    #[test]
    fn solver_errors() {
        let log = worked_log();
        assert_eq!(
            solve_belief(&log, &ToMQuestion::belief(&["Bob"], "apple")).map(|a| a.value),
            Err(Error::UnknownObject("apple".into()))
        );
        assert_eq!(
            solve_belief(&log, &ToMQuestion::belief(&["Zed"], "celery")).map(|a| a.value),
            Err(Error::UnknownCharacter("Zed".into()))
        );
    }

    #[test]
    fn answers_outside_candidates_become_unknown() {
        let log = worked_log();
        let q = ToMQuestion::belief(&["Bob"], "celery").with_candidates(&["basket", "table"]);
        assert_eq!(solve_belief(&log, &q).unwrap().value, AnswerValue::Unknown);
    }

    fn dialogue() -> EventLog {
        use crate::event::{annotate_timeline, RawStory, ScenarioKind};
        let ts = annotate_timeline(&RawStory::from_text(
            "Sara: Hi everyone.\nJavier: Hi everyone.\nGianna: Hi everyone.\nGianna left the conversation.\n\
             Sara: I want to talk about hiking.\nGianna joined the conversation.\nJavier: I have two things to say about pets.\n\
             Gianna left the conversation.\nJavier: The second thing about pets.",
            ScenarioKind::Dialogue,
        ))
        .unwrap();
        crate::parser::parse_dialogue(&ts).unwrap()
    }

    #[test]
    fn info_questions() {
        let log = dialogue();
        let q = |flavor, info: &[u32], target: Option<&str>| {
            ToMQuestion::about_info::<&str>(flavor, &[], "x", times(info), target)
        };
        let a = solve_info(&log, &q(QuestionFlavor::AnswerabilityBinary, &[5], Some("Gianna"))).unwrap();
        assert_eq!(a.value, AnswerValue::Bool(false));
        let a = solve_info(&log, &q(QuestionFlavor::InfoaccessList, &[5], None)).unwrap();
        assert_eq!(a.value, AnswerValue::Characters(["Javier", "Sara"].map(String::from).into()));
        let a = solve_info(&log, &q(QuestionFlavor::AnswerabilityList, &[7, 9], None)).unwrap();
        assert_eq!(a.value, AnswerValue::Characters(["Javier", "Sara"].map(String::from).into()));
        let a = solve_info(&log, &q(QuestionFlavor::InfoaccessBinary, &[7], Some("Gianna"))).unwrap();
        assert_eq!(a.value, AnswerValue::Bool(true));
        assert!(matches!(
            solve_info(&log, &q(QuestionFlavor::InfoaccessBinary, &[7], Some("Zed"))),
            Err(Error::UnknownCharacter(_))
        ));
    }

    #[test]
    fn dialogue_belief_questions() {
        let log = dialogue();
        let q = |chain: &[&str], info: &[u32]| {
            ToMQuestion::about_info(QuestionFlavor::Belief, chain, "pets", times(info), None)
        };
        let solver = BeliefSolver::new(&log);
        assert_eq!(solver.solve_belief(&q(&["Sara"], &[7, 9])).unwrap().value, AnswerValue::Knowledge(true));
        assert_eq!(solver.solve_belief(&q(&["Gianna"], &[7, 9])).unwrap().value, AnswerValue::Knowledge(false));
        assert_eq!(
            solver.solve_belief(&q(&["Sara", "Gianna", "Sara"], &[7])).unwrap().value,
            AnswerValue::Knowledge(true)
        );
        assert_eq!(
            solver.solve_belief(&q(&["Sara", "Gianna", "Javier"], &[5])).unwrap().value,
            AnswerValue::Knowledge(false)
        );
    }
}
