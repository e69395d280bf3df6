//! Seeded generator of labeled stories and dialogues. Gold answers come only
//! from the oracle.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::{validate_log, Event, EventKind, EventLog, ScenarioKind, StoryEntry, TemporalStory, TimePoint};
use crate::oracle::oracle_answer;
use crate::parser::{render_story, QuestionFlavor, ToMQuestion, CONVERSATION};
use crate::solver::{AnswerValue, BeliefSolver, DOES_NOT_KNOW, KNOWS};

const CHARACTERS: [&str; 12] =
    ["Alice", "Bob", "John", "Sally", "Anne", "Mia", "Noah", "Liam", "Emma", "Olivia", "Lucas", "Chloe"];
const LOCATIONS: [&str; 6] = ["kitchen", "garden", "hallway", "office", "cellar", "attic"];
const CONTAINERS: [&str; 10] =
    ["basket", "box", "drawer", "cupboard", "suitcase", "bucket", "crate", "envelope", "bathtub", "pantry"];
const OBJECTS: [&str; 8] = ["celery", "apple", "key", "hat", "scarf", "ball", "book", "coin"];
const TOPICS: [&str; 10] = [
    "the trip to Lisbon",
    "training their pets",
    "the new bakery",
    "the chess tournament",
    "the garden project",
    "the jazz concert",
    "the cooking class",
    "the hiking trail",
    "the book club",
    "the science fair",
];
const FILLERS: [&str; 4] = ["That sounds great.", "I see.", "Interesting.", "Tell me more."];
const MAX_ATTEMPTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenParams {
    pub n_characters: usize,
    pub n_locations: usize,
    pub n_containers: usize,
    pub n_moves: usize,
    pub n_exit_reenter: usize,
    pub n_tells: usize,
    #[serde(default)]
    pub dialogue_mode: bool,
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            n_characters: 3,
            n_locations: 1,
            n_containers: 2,
            n_moves: 1,
            n_exit_reenter: 1,
            n_tells: 0,
            dialogue_mode: false,
            seed: 1,
        }
    }
}

impl GenParams {
    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, v: usize, lo: usize, hi: usize| {
            if (lo..=hi).contains(&v) {
                Ok(())
            } else {
                Err(Error::InfeasibleParams(format!("{name} = {v} outside {lo}..={hi}")))
            }
        };
        check("n_characters", self.n_characters, 2, 5)?;
        check("n_locations", self.n_locations, 1, 3)?;
        check("n_containers", self.n_containers, 2, 5)?;
        check("n_moves", self.n_moves, 1, 10)?;
        check("n_exit_reenter", self.n_exit_reenter, 0, 4)?;
        check("n_tells", self.n_tells, 0, 2)
    }

    /// Uniform draw over the parameter ranges.
    pub fn sample<R: Rng>(rng: &mut R, dialogue_mode: bool) -> Self {
        Self {
            n_characters: rng.random_range(2..=5),
            n_locations: rng.random_range(1..=3),
            n_containers: rng.random_range(2..=5),
            n_moves: rng.random_range(1..=10),
            n_exit_reenter: rng.random_range(0..=4),
            n_tells: rng.random_range(0..=2),
            dialogue_mode,
            seed: rng.random(),
        }
    }
}

/// A gold answer: one string, or a set of names for list questions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Gold {
    Text(String),
    List(Vec<String>),
}

impl From<&AnswerValue> for Gold {
    fn from(v: &AnswerValue) -> Self {
        match v {
            AnswerValue::Characters(cs) => Gold::List(cs.iter().cloned().collect()),
            other => Gold::Text(other.to_string()),
        }
    }
}

impl Gold {
    pub fn as_text(&self) -> String {
        match self {
            Gold::Text(s) => s.clone(),
            Gold::List(names) => names.join(", "),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct QuestionTags {
    /// reality, memory, first, second, third-acyc, third-cyc, or an info flavor.
    pub qtype: String,
    /// `true`/`false` belief for belief questions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub belief: Option<String>,
    /// Groups the five question types that share one reasoning target.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub set_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledQuestion {
    pub text: String,
    pub question: ToMQuestion,
    pub gold: Gold,
    pub tags: QuestionTags,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledInstance {
    pub id: String,
    pub params: GenParams,
    pub story: TemporalStory,
    pub log: EventLog,
    pub questions: Vec<LabeledQuestion>,
}

impl LabeledInstance {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("instance serializes")
    }
}

pub fn order_tag(chain: &[String]) -> &'static str {
    match chain.len() {
        0 => "reality",
        1 => "first",
        2 => "second",
        _ if chain.first() == chain.last() => "third-cyc",
        _ => "third-acyc",
    }
}

fn label(log: &EventLog, question: ToMQuestion, tags: QuestionTags) -> Result<LabeledQuestion> {
    let gold = oracle_answer(log, &question)?;
    Ok(LabeledQuestion { text: question.render(), gold: Gold::from(&gold), question, tags })
}

fn pick<'a, R: Rng>(rng: &mut R, pool: &[&'a str], n: usize) -> Vec<&'a str> {
    let mut v: Vec<&str> = pool.choose_multiple(rng, n).copied().collect();
    v.sort_unstable_by_key(|name| pool.iter().position(|p| p == name));
    v
}

/// Generates a story, regenerating with the same stream of randomness until a
/// false-belief question exists whenever characters leave the room.
pub fn generate_story(p: &GenParams) -> Result<LabeledInstance> {
    p.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    for _ in 0..MAX_ATTEMPTS {
        let log = simulate_story(p, &mut rng);
        debug_assert!(validate_log(&log).is_ok(), "{:?}", validate_log(&log));
        let questions = story_questions(&log)?;
        let has_false = questions.iter().any(|q| q.tags.belief.as_deref() == Some("false"));
        if p.n_exit_reenter == 0 || has_false {
            let story = render_story(&log)?;
            return Ok(LabeledInstance { id: format!("story-{}", p.seed), params: *p, story, log, questions });
        }
    }
    Err(Error::InfeasibleParams(format!("no false-belief instance after {MAX_ATTEMPTS} attempts")))
}

#[derive(Debug)]
struct Absent {
    character: String,
    /// Side room the character went to, if any.
    elsewhere: Option<String>,
    returns: bool,
}

struct Scene<'r> {
    rng: &'r mut ChaCha8Rng,
    events: Vec<Event>,
    room: String,
    side_rooms: Vec<String>,
    present: Vec<String>,
    absent: Vec<Absent>,
    object_in: BTreeMap<String, String>,
}

impl Scene<'_> {
    fn push(&mut self, kind: EventKind) {
        let time = TimePoint::from_position(self.events.len());
        self.events.push(Event::new(time, kind));
    }

    fn enter(&mut self, actor: &str, location: &str) {
        self.push(EventKind::Enter { actor: actor.into(), location: location.into() });
    }

    fn exit(&mut self, actor: &str, location: &str) {
        self.push(EventKind::Exit { actor: actor.into(), location: location.into() });
    }

    fn bring_back(&mut self, index: usize) {
        let a = self.absent.remove(index);
        if let Some(side) = &a.elsewhere {
            self.exit(&a.character, side);
        }
        let room = self.room.clone();
        self.enter(&a.character, &room);
        self.present.push(a.character);
    }

    fn ensure_someone_present(&mut self) {
        if self.present.is_empty() {
            let i = self.rng.random_range(0..self.absent.len());
            self.bring_back(i);
        }
    }

    fn do_move(&mut self, containers: &[&str]) {
        self.ensure_someone_present();
        let actor = self.present.choose(self.rng).unwrap().clone();
        let objects: Vec<String> = self.object_in.keys().cloned().collect();
        let object = objects.choose(self.rng).unwrap().clone();
        let current = self.object_in[&object].clone();
        let targets: Vec<&str> = containers.iter().copied().filter(|c| *c != current).collect();
        let container = targets.choose(self.rng).unwrap().to_string();
        self.object_in.insert(object.clone(), container.clone());
        let location = self.room.clone();
        self.push(EventKind::Move { actor, object, container, location });
    }

    fn do_exit(&mut self) {
        self.ensure_someone_present();
        let i = self.rng.random_range(0..self.present.len());
        let actor = self.present.remove(i);
        let room = self.room.clone();
        self.exit(&actor, &room);
        let elsewhere = if !self.side_rooms.is_empty() && self.rng.random_bool(0.5) {
            let side = self.side_rooms.choose(self.rng).unwrap().clone();
            self.enter(&actor, &side);
            Some(side)
        } else {
            None
        };
        let returns = self.rng.random_bool(0.6);
        self.absent.push(Absent { character: actor, elsewhere, returns });
    }

    /// A truthful tell: the speaker currently believes the real location.
    fn do_tell(&mut self) {
        let log = EventLog::new(self.events.clone());
        let solver = BeliefSolver::new(&log);
        let mut truthful = Vec::new();
        for (object, real) in &self.object_in {
            for speaker in log.characters() {
                let q = ToMQuestion::belief(&[speaker], object);
                if solver.solve_belief(&q).map(|a| a.value) != Ok(AnswerValue::Container(real.clone())) {
                    continue;
                }
                for listener in log.characters().iter().filter(|l| *l != speaker) {
                    let q = ToMQuestion::belief(&[listener], object);
                    let informative =
                        solver.solve_belief(&q).map(|a| a.value) != Ok(AnswerValue::Container(real.clone()));
                    truthful.push((informative, speaker.clone(), listener.clone(), object.clone(), real.clone()));
                }
            }
        }
        let informative: Vec<_> = truthful.iter().filter(|t| t.0).cloned().collect();
        let pool = if informative.is_empty() { truthful } else { informative };
        if let Some((_, actor, listener, object, container)) = pool.choose(self.rng).cloned() {
            self.push(EventKind::Tell { actor, listener, object, container });
        }
    }

    fn maybe_return(&mut self) {
        let mut i = 0;
        while i < self.absent.len() {
            if self.absent[i].returns && self.rng.random_bool(0.4) {
                self.bring_back(i);
            } else {
                i += 1;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Action {
    Move,
    Exit,
    Tell,
}

fn simulate_story(p: &GenParams, rng: &mut ChaCha8Rng) -> EventLog {
    let characters = pick(rng, &CHARACTERS, p.n_characters);
    let locations = pick(rng, &LOCATIONS, p.n_locations);
    let containers = pick(rng, &CONTAINERS, p.n_containers);
    let n_objects = if rng.random_bool(0.5) { 1 } else { 2 };
    let objects = pick(rng, &OBJECTS, n_objects);

    let mut scene = Scene {
        rng,
        events: Vec::new(),
        room: locations[0].to_string(),
        side_rooms: locations[1..].iter().map(|s| s.to_string()).collect(),
        present: Vec::new(),
        absent: Vec::new(),
        object_in: BTreeMap::new(),
    };
    let room = scene.room.clone();
    for c in &characters {
        scene.enter(c, &room);
        scene.present.push(c.to_string());
    }
    let mut free: Vec<&str> = containers.clone();
    free.shuffle(scene.rng);
    for (o, c) in objects.iter().zip(free) {
        scene.object_in.insert(o.to_string(), c.to_string());
        scene.push(EventKind::ObjectState { object: o.to_string(), container: c.to_string(), location: room.clone() });
    }

    let mut schedule: Vec<Action> = std::iter::repeat_n(Action::Move, p.n_moves)
        .chain(std::iter::repeat_n(Action::Exit, p.n_exit_reenter))
        .chain(std::iter::repeat_n(Action::Tell, p.n_tells))
        .collect();
    schedule.shuffle(scene.rng);
    // Make sure some move follows the first exit.
    if let Some(first_exit) = schedule.iter().position(|a| *a == Action::Exit) {
        if !schedule[first_exit..].contains(&Action::Move) {
            let last_move = schedule.iter().rposition(|a| *a == Action::Move).unwrap();
            schedule.swap(first_exit, last_move);
        }
    }
    for action in schedule {
        match action {
            Action::Move => scene.do_move(&containers),
            Action::Exit => scene.do_exit(),
            Action::Tell => scene.do_tell(),
        }
        if action != Action::Exit {
            scene.maybe_return();
        }
    }
    EventLog::new(scene.events)
}

/// Reality, memory, and every belief chain of order 1 to 3 for each object.
pub fn story_questions(log: &EventLog) -> Result<Vec<LabeledQuestion>> {
    let characters: Vec<&String> = log.characters().iter().collect();
    let mut out = Vec::new();
    for object in log.objects() {
        let reality = oracle_answer(log, &ToMQuestion::reality(object))?.to_string();
        let memory = oracle_answer(log, &ToMQuestion::memory(object))?.to_string();
        let mut chains: Vec<Vec<String>> = Vec::new();
        for a in &characters {
            chains.push(vec![a.to_string()]);
        }
        for a in &characters {
            for b in characters.iter().filter(|b| b != &a) {
                chains.push(vec![a.to_string(), b.to_string()]);
            }
        }
        for a in &characters {
            for b in characters.iter().filter(|b| b != &a) {
                for c in characters.iter().filter(|c| c != &b) {
                    chains.push(vec![a.to_string(), b.to_string(), c.to_string()]);
                }
            }
        }

        let candidates = |gold: &str| {
            let mut v: Vec<String> = Vec::new();
            for c in [memory.as_str(), reality.as_str(), gold] {
                if !v.iter().any(|x| x == c) {
                    v.push(c.to_string());
                }
            }
            v
        };
        for (q, qtype) in [(ToMQuestion::reality(object), "reality"), (ToMQuestion::memory(object), "memory")] {
            let q = q.with_candidates(&candidates(&reality));
            out.push(label(log, q, QuestionTags { qtype: qtype.into(), ..Default::default() })?);
        }
        for chain in chains {
            let q = ToMQuestion::belief(&chain, object);
            let gold = oracle_answer(log, &q)?.to_string();
            let q = q.with_candidates(&candidates(&gold));
            let tags = QuestionTags {
                qtype: order_tag(&chain).into(),
                belief: Some(if gold == reality { "true" } else { "false" }.into()),
                set_id: None,
            };
            out.push(label(log, q, tags)?);
        }
    }
    Ok(out)
}

struct Topic {
    name: &'static str,
    times: BTreeSet<TimePoint>,
    speakers: Vec<String>,
}

/// Generates a dialogue in which characters leave and rejoin, with all five
/// question types per (topic, target character) set.
pub fn generate_dialogue(p: &GenParams) -> Result<LabeledInstance> {
    if !p.dialogue_mode {
        return Err(Error::InfeasibleParams("dialogue_mode is not set".into()));
    }
    p.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let characters = pick(&mut rng, &CHARACTERS, p.n_characters);
    let n_topics = p.n_moves.clamp(1, TOPICS.len());
    let mut topic_names: Vec<&str> = TOPICS.choose_multiple(&mut rng, n_topics).copied().collect();
    topic_names.shuffle(&mut rng);

    let mut lines: Vec<String> = Vec::new();
    let mut kinds: Vec<EventKind> = Vec::new();
    let utter = |lines: &mut Vec<String>, kinds: &mut Vec<EventKind>, speaker: &str, text: &str| {
        lines.push(format!("{speaker}: {text}"));
        kinds.push(EventKind::Utterance {
            actor: speaker.into(),
            location: CONVERSATION.into(),
            info_id: format!("info_{}", kinds.len() + 1),
        });
    };
    for c in &characters {
        utter(&mut lines, &mut kinds, c, "Hi everyone.");
    }

    #[derive(Clone, Copy, PartialEq)]
    enum Step {
        Topic,
        Leave,
        Filler,
    }
    let mut steps: Vec<Step> = std::iter::repeat_n(Step::Topic, n_topics)
        .chain(std::iter::repeat_n(Step::Leave, p.n_exit_reenter))
        .chain(std::iter::repeat_n(Step::Filler, p.n_tells))
        .collect();
    steps.shuffle(&mut rng);
    // Every absence must miss at least one topic.
    if let Some(last_topic) = steps.iter().rposition(|s| *s == Step::Topic) {
        let late_leaves = steps[last_topic..].iter().filter(|s| **s == Step::Leave).count();
        steps.retain_mut({
            let mut seen = 0;
            move |s| {
                seen += 1;
                seen <= last_topic || *s != Step::Leave
            }
        });
        for _ in 0..late_leaves {
            steps.insert(last_topic, Step::Leave);
        }
    }

    let mut present: Vec<String> = characters.iter().map(|s| s.to_string()).collect();
    // Absent characters and whether a topic was discussed since they left.
    let mut away: Vec<(String, bool)> = Vec::new();
    let mut topics = Vec::new();
    let mut next_topic = topic_names.into_iter();
    for step in steps {
        match step {
            Step::Leave if present.len() >= 2 => {
                let i = rng.random_range(0..present.len());
                let who = present.remove(i);
                lines.push(format!("{who} left the conversation."));
                kinds.push(EventKind::Leave { actor: who.clone(), location: CONVERSATION.into() });
                away.push((who, false));
            }
            Step::Leave => {}
            Step::Filler => {
                let speaker = present.choose(&mut rng).unwrap().clone();
                let text = *FILLERS.choose(&mut rng).unwrap();
                utter(&mut lines, &mut kinds, &speaker, text);
            }
            Step::Topic => {
                let name = next_topic.next().expect("one topic per step");
                let first = present.choose(&mut rng).unwrap().clone();
                let mut times = BTreeSet::new();
                let mut speakers = vec![first.clone()];
                if rng.random_bool(0.5) {
                    utter(&mut lines, &mut kinds, &first, &format!("I have two things to say about {name}."));
                    times.insert(TimePoint::from_position(kinds.len() - 1));
                    let second = present.choose(&mut rng).unwrap().clone();
                    utter(&mut lines, &mut kinds, &second, &format!("The second thing about {name}."));
                    times.insert(TimePoint::from_position(kinds.len() - 1));
                    if second != first {
                        speakers.push(second);
                    }
                } else {
                    utter(&mut lines, &mut kinds, &first, &format!("I want to talk about {name}."));
                    times.insert(TimePoint::from_position(kinds.len() - 1));
                }
                topics.push(Topic { name, times, speakers });
                for a in away.iter_mut() {
                    a.1 = true;
                }
                let mut i = 0;
                while i < away.len() {
                    if away[i].1 && rng.random_bool(0.6) {
                        let (who, _) = away.remove(i);
                        lines.push(format!("{who} joined the conversation."));
                        kinds.push(EventKind::Join { actor: who.clone(), location: CONVERSATION.into() });
                        present.push(who);
                    } else {
                        i += 1;
                    }
                }
            }
        }
    }

    let events: Vec<Event> =
        kinds.into_iter().enumerate().map(|(i, k)| Event::new(TimePoint::from_position(i), k)).collect();
    let log = EventLog::new(events);
    let entries =
        lines.into_iter().enumerate().map(|(i, text)| StoryEntry { time: TimePoint::from_position(i), text }).collect();
    let story = TemporalStory::from_entries(entries, ScenarioKind::Dialogue)?;
    let id = format!("dialogue-{}", p.seed);
    let questions = dialogue_questions(&log, &topics, &id, &mut rng)?;
    Ok(LabeledInstance { id, params: *p, story, log, questions })
}

fn dialogue_questions(
    log: &EventLog,
    topics: &[Topic],
    id: &str,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<LabeledQuestion>> {
    let characters: Vec<String> = log.characters().iter().cloned().collect();
    let yes_no = ["yes", "no"];
    let knows = [KNOWS, DOES_NOT_KNOW];
    let mut out = Vec::new();
    for (ti, topic) in topics.iter().enumerate() {
        let mut targets: Vec<&String> = characters.iter().filter(|c| !topic.speakers.contains(c)).collect();
        if targets.is_empty() {
            targets = characters.iter().collect();
        }
        for target in targets {
            let set_id = Some(format!("{id}:{ti}:{target}"));
            let tags = |qtype: &str| QuestionTags { qtype: qtype.into(), belief: None, set_id: set_id.clone() };
            let info = |flavor, chain: &[String], target: Option<&str>| {
                ToMQuestion::about_info(flavor, chain, topic.name, topic.times.clone(), target)
            };

            let belief = info(QuestionFlavor::Belief, std::slice::from_ref(target), None).with_candidates(&knows);
            let mut belief = label(log, belief, tags("first"))?;
            belief.tags.belief = Some(belief_flavor(&belief.gold));
            out.push(belief);

            let q = info(QuestionFlavor::AnswerabilityList, &[], None).with_candidates(&characters);
            out.push(label(log, q, tags(QuestionFlavor::AnswerabilityList.name()))?);
            let q = info(QuestionFlavor::AnswerabilityBinary, &[], Some(target)).with_candidates(&yes_no);
            out.push(label(log, q, tags(QuestionFlavor::AnswerabilityBinary.name()))?);
            let q = ToMQuestion {
                order: 0,
                chain: topic.speakers.clone(),
                ..info(QuestionFlavor::InfoaccessList, &[], None)
            }
            .with_candidates(&characters);
            out.push(label(log, q, tags(QuestionFlavor::InfoaccessList.name()))?);
            let q = ToMQuestion {
                order: 0,
                chain: topic.speakers.clone(),
                ..info(QuestionFlavor::InfoaccessBinary, &[], Some(target))
            }
            .with_candidates(&yes_no);
            out.push(label(log, q, tags(QuestionFlavor::InfoaccessBinary.name()))?);
        }

        // A cyclic and, when possible, an acyclic third-order belief question.
        let a = characters.choose(rng).unwrap().clone();
        let others: Vec<&String> = characters.iter().filter(|c| **c != a).collect();
        let b = (*others.choose(rng).unwrap()).clone();
        let mut chains = vec![vec![a.clone(), b.clone(), a.clone()]];
        let thirds: Vec<&String> = characters.iter().filter(|c| **c != a && **c != b).collect();
        if let Some(c) = thirds.choose(rng) {
            chains.push(vec![a.clone(), b.clone(), (*c).clone()]);
        }
        for chain in chains {
            let q = ToMQuestion::about_info(QuestionFlavor::Belief, &chain, topic.name, topic.times.clone(), None)
                .with_candidates(&knows);
            let mut lq = label(log, q, QuestionTags { qtype: order_tag(&chain).into(), ..Default::default() })?;
            lq.tags.belief = Some(belief_flavor(&lq.gold));
            out.push(lq);
        }
    }
    Ok(out)
}

/// Believing the information unknown is the false belief: it was said.
fn belief_flavor(gold: &Gold) -> String {
    if gold.as_text() == KNOWS { "true" } else { "false" }.into()
}

/// Story or dialogue per `p.dialogue_mode`.
pub fn generate(p: &GenParams) -> Result<LabeledInstance> {
    if p.dialogue_mode {
        generate_dialogue(p)
    } else {
        generate_story(p)
    }
}

/// `n` instances whose parameters are drawn from a stream seeded by `seed`.
pub fn generate_corpus(seed: u64, n: usize, dialogue_mode: bool) -> Result<Vec<LabeledInstance>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| generate(&GenParams::sample(&mut rng, dialogue_mode))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_dialogue, parse_story, QuestionParser};

    #[test]
    fn same_seed_same_instance() {
        let p = GenParams { seed: 42, n_tells: 2, n_exit_reenter: 2, ..Default::default() };
        assert_eq!(generate_story(&p).unwrap().to_json_line(), generate_story(&p).unwrap().to_json_line());
        let d = GenParams { dialogue_mode: true, ..p };
        assert_eq!(generate_dialogue(&d).unwrap().to_json_line(), generate_dialogue(&d).unwrap().to_json_line());
    }

    #[test]
    fn sally_anne_shape() {
        let p = GenParams { seed: 1, n_characters: 3, n_containers: 2, n_exit_reenter: 1, ..Default::default() };
        let inst = generate_story(&p).unwrap();
        assert!(validate_log(&inst.log).is_ok());
        assert!(inst.questions.iter().any(|q| q.tags.qtype == "first" && q.tags.belief.as_deref() == Some("false")));
    }

    #[test]
    fn no_exits_means_true_beliefs_only() {
        for seed in 0..20 {
            let p = GenParams { seed, n_exit_reenter: 0, n_moves: 4, ..Default::default() };
            let inst = generate_story(&p).unwrap();
            for q in &inst.questions {
                assert!(
                    q.tags.belief.as_deref() != Some("false"),
                    "seed {seed} {} {:?}\n{}",
                    q.text,
                    q.gold,
                    inst.story.to_text()
                );
            }
        }
    }

    #[test]
    fn out_of_range_params_are_infeasible() {
        let p = GenParams { n_characters: 9, ..Default::default() };
        assert!(matches!(generate_story(&p), Err(Error::InfeasibleParams(_))));
        assert!(matches!(generate_dialogue(&GenParams::default()), Err(Error::InfeasibleParams(_))));
    }

    #[test]
    fn generated_text_parses_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let inst = generate_story(&GenParams::sample(&mut rng, false)).unwrap();
            assert_eq!(parse_story(&inst.story).unwrap(), inst.log);
            for q in inst.questions.iter().take(30) {
                let parsed = crate::parser::parse_question(&q.text, &inst.log).unwrap();
                assert_eq!(parsed.chain, q.question.chain);
            }
            let d = generate_dialogue(&GenParams::sample(&mut rng, true)).unwrap();
            assert_eq!(parse_dialogue(&d.story).unwrap(), d.log);
            let parser = QuestionParser::new(&d.log).with_transcript(&d.story);
            for q in &d.questions {
                let parsed = parser.parse(&q.text).unwrap();
                assert_eq!(
                    (parsed.flavor, &parsed.info_times),
                    (q.question.flavor, &q.question.info_times),
                    "{}",
                    q.text
                );
            }
        }
    }

    #[test]
    fn absent_character_misses_topics() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        for _ in 0..30 {
            let mut p = GenParams::sample(&mut rng, true);
            p.n_exit_reenter = 1;
            let d = generate_dialogue(&p).unwrap();
            if d.log.events().iter().any(|e| matches!(e.kind, EventKind::Leave { .. })) {
                assert!(d.questions.iter().any(|q| q.gold == Gold::Text("no".into())));
                checked += 1;
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn no_absences_means_everyone_knows() {
        let p = GenParams { dialogue_mode: true, n_exit_reenter: 0, n_moves: 3, seed: 5, ..Default::default() };
        let d = generate_dialogue(&p).unwrap();
        let everyone: Vec<String> = d.log.characters().iter().cloned().collect();
        for q in &d.questions {
            match q.question.flavor {
                f if f.is_list() => assert_eq!(q.gold, Gold::List(everyone.clone())),
                f if f.is_binary() => assert_eq!(q.gold, Gold::Text("yes".into())),
                _ => assert_eq!(q.gold, Gold::Text(KNOWS.into())),
            }
        }
    }

    #[test]
    fn gold_is_among_candidates() {
        for inst in generate_corpus(9, 20, false).unwrap().iter().chain(&generate_corpus(9, 20, true).unwrap()) {
            for q in &inst.questions {
                match &q.gold {
                    Gold::Text(t) => {
                        assert!(q.question.candidates.contains(t), "{} {:?}", q.text, q.question.candidates)
                    }
                    Gold::List(names) => assert!(names.iter().all(|n| q.question.candidates.contains(n))),
                }
            }
        }
    }

    #[test]
    fn instances_round_trip_through_json() {
        for inst in generate_corpus(4, 5, false).unwrap().into_iter().chain(generate_corpus(4, 5, true).unwrap()) {
            let back: LabeledInstance = serde_json::from_str(&inst.to_json_line()).unwrap();
            assert_eq!(back, inst);
        }
    }
}
