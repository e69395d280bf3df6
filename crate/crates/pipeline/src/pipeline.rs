//! Runs one question through the prompt stages against a [`ModelBackend`].
//!
//! Stage order: timeline annotation, one belief chain per distinct character
//! of the question, optional self-world compression for first-order
//! questions, the answer prompt, and for higher-order questions a feedback
//! prompt carrying the solver's answer over the communication window.
//! The solver works on time sets read back from the model's own chains.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use timetom_core::event::{annotate_timeline, parse_timed_lines, EventLog, RawStory, ScenarioKind, TemporalStory};
use timetom_core::parser::{join_names, parse_any, parse_dialogue, parse_story, QuestionFlavor, ToMQuestion};
use timetom_core::perception::PerceptibleTimeSet;
use timetom_core::solver::{AnswerValue, BeliefSolver, SolverAnswer};

use crate::backend::{BackendError, DecodingParams, ModelBackend};
use crate::template::{bind, render_prompt, TemplateError, TemplateId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineMode {
    /// One prompt: story and question.
    ZeroShot,
    /// Timeline annotation, then one prompt over the annotated story.
    ZeroShotTimeline,
    /// Every stage, with compression always on for first-order questions.
    TimetomFull,
    /// Higher-order questions are answered from the communication window
    /// events instead of the first character's chain; no feedback.
    SolverAsPrompt,
    /// Every stage; compression follows the policy flag.
    SolverAsFeedback,
    /// No model calls: the solver on the exact event log.
    SymbolicOnly,
}

impl PipelineMode {
    pub const ALL: [PipelineMode; 6] = [
        PipelineMode::ZeroShot,
        PipelineMode::ZeroShotTimeline,
        PipelineMode::TimetomFull,
        PipelineMode::SolverAsPrompt,
        PipelineMode::SolverAsFeedback,
        PipelineMode::SymbolicOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PipelineMode::ZeroShot => "zero_shot",
            PipelineMode::ZeroShotTimeline => "zero_shot_timeline",
            PipelineMode::TimetomFull => "timetom_full",
            PipelineMode::SolverAsPrompt => "solver_as_prompt",
            PipelineMode::SolverAsFeedback => "solver_as_feedback",
            PipelineMode::SymbolicOnly => "symbolic_only",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelinePolicy {
    pub mode: PipelineMode,
    pub compression_for_first_order: bool,
    pub decoding: DecodingParams,
}

impl PipelinePolicy {
    pub fn new(mode: PipelineMode) -> Self {
        Self { mode, compression_for_first_order: true, decoding: DecodingParams::default() }
    }

    fn compresses(&self) -> bool {
        self.mode == PipelineMode::TimetomFull || self.compression_for_first_order
    }
}

impl Default for PipelinePolicy {
    fn default() -> Self {
        Self::new(PipelineMode::TimetomFull)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub stage: String,
    pub template: Option<TemplateId>,
    pub prompt: String,
    pub reply: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineAnswer {
    /// The model's answer before feedback.
    pub initial: Option<String>,
    pub tool: Option<AnswerValue>,
    #[serde(rename = "final")]
    pub final_answer: String,
    pub trace: Vec<TraceStep>,
    pub calls: usize,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("could not read the {stage} reply: {message}")]
    StageParse { stage: String, message: String },
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Core(#[from] timetom_core::Error),
}

/// Question text as shown to the model, with the answer choices appended.
pub fn question_text(q: &ToMQuestion) -> String {
    if q.candidates.is_empty() {
        q.render()
    } else {
        format!("{}\nChoices: {}", q.render(), q.candidates.join(", "))
    }
}

/// Number of model calls `run_pipeline` makes for a question of `order` with
/// `k` distinct characters in its chain, when the solver's answer is definite
/// or not. Dialogue and info questions follow their own counts; see
/// [`dialogue_stage_count`].
pub fn stage_count(policy: &PipelinePolicy, order: usize, k: usize, tool_definite: bool) -> usize {
    match policy.mode {
        PipelineMode::SymbolicOnly => 0,
        PipelineMode::ZeroShot => 1,
        PipelineMode::ZeroShotTimeline => 2,
        mode => {
            let compress = usize::from(order == 1 && policy.compresses());
            let feedback = usize::from(mode != PipelineMode::SolverAsPrompt && order >= 2 && tool_definite);
            1 + k + compress + 1 + feedback
        }
    }
}

/// Call count for dialogue questions: belief questions have no compression
/// stage, list questions read every character's chain, binary questions only
/// the target's.
pub fn dialogue_stage_count(
    policy: &PipelinePolicy,
    q: &ToMQuestion,
    n_characters: usize,
    tool_definite: bool,
) -> usize {
    match policy.mode {
        PipelineMode::SymbolicOnly => 0,
        PipelineMode::ZeroShot => 1,
        PipelineMode::ZeroShotTimeline => 2,
        mode => {
            if q.flavor.is_list() {
                1 + n_characters + 1
            } else if q.flavor.is_binary() {
                3
            } else {
                let feedback = usize::from(mode != PipelineMode::SolverAsPrompt && q.order >= 2 && tool_definite);
                1 + q.distinct_chain().len() + 1 + feedback
            }
        }
    }
}

struct Run<'b> {
    backend: &'b dyn ModelBackend,
    decoding: DecodingParams,
    trace: Vec<TraceStep>,
}

impl Run<'_> {
    fn call(
        &mut self,
        stage: impl Into<String>,
        id: TemplateId,
        pairs: &[(&str, &str)],
    ) -> Result<String, PipelineError> {
        let prompt = render_prompt(id, &bind(pairs))?;
        let reply = self.backend.complete(&prompt, &self.decoding)?;
        self.trace.push(TraceStep { stage: stage.into(), template: Some(id), prompt, reply: reply.clone() });
        Ok(reply)
    }
}

fn stage_error(stage: &str, message: impl ToString) -> PipelineError {
    PipelineError::StageParse { stage: stage.to_string(), message: message.to_string() }
}

fn times_in_reply(stage: &str, character: &str, reply: &str) -> Result<PerceptibleTimeSet, PipelineError> {
    let lines = parse_timed_lines(reply).map_err(|e| stage_error(stage, e))?;
    Ok(PerceptibleTimeSet { character: character.to_string(), times: lines.into_iter().map(|(t, _)| t).collect() })
}

fn parse_log(timeline: &TemporalStory) -> Option<EventLog> {
    match timeline.kind() {
        ScenarioKind::Reading => parse_story(timeline),
        ScenarioKind::Dialogue => parse_dialogue(timeline),
    }
    .map_err(|e| log::warn!("model timeline does not parse into events: {e}"))
    .ok()
}

/// Event lines of `times`, read from the model's own timeline.
fn window_lines(timeline: &TemporalStory, times: &BTreeSet<timetom_core::event::TimePoint>) -> String {
    times.iter().filter_map(|&t| timeline.text_at(t).map(|s| format!("{t}: {s}"))).collect::<Vec<_>>().join("\n")
}

pub fn run_pipeline(
    backend: &dyn ModelBackend,
    story: &RawStory,
    question: &ToMQuestion,
    policy: &PipelinePolicy,
) -> Result<PipelineAnswer, PipelineError> {
    let mut run = Run { backend, decoding: policy.decoding, trace: Vec::new() };
    let text = question_text(question);
    let dialogue = story.kind() == ScenarioKind::Dialogue;
    let cts = if dialogue { TemplateId::DialogueCts } else { TemplateId::Cts };
    let story_key = if dialogue { "dialogue" } else { "story" };

    match policy.mode {
        PipelineMode::SymbolicOnly => {
            let log = parse_any(&annotate_timeline(story)?)?;
            let answer = BeliefSolver::new(&log).solve(question)?;
            let step = TraceStep {
                stage: "solver".into(),
                template: None,
                prompt: String::new(),
                reply: answer.trace.join("\n"),
            };
            return Ok(PipelineAnswer {
                initial: None,
                final_answer: answer.value.to_string(),
                tool: Some(answer.value),
                trace: vec![step],
                calls: 0,
            });
        }
        PipelineMode::ZeroShot => {
            let reply = run.call("qa", TemplateId::QaPlain, &[("story", &story.to_text()), ("question", &text)])?;
            return Ok(finish(run, Some(reply.clone()), None, reply));
        }
        PipelineMode::ZeroShotTimeline => {
            let timeline = run.call("cts", cts, &[(story_key, &story.to_text())])?;
            let reply = run.call("qa", TemplateId::QaPlain, &[("story", &timeline), ("question", &text)])?;
            return Ok(finish(run, Some(reply.clone()), None, reply));
        }
        _ => {}
    }

    let timeline_text = run.call("cts", cts, &[(story_key, &story.to_text())])?;
    let timeline = TemporalStory::parse_text(&timeline_text, story.kind()).map_err(|e| stage_error("cts", e))?;
    let model_log = parse_log(&timeline);

    if question.flavor.is_info() {
        return run_info(run, &timeline, &timeline_text, model_log.as_ref(), question);
    }

    // One belief chain per distinct character.
    let tbsc = if dialogue { TemplateId::DialogueTbsc } else { TemplateId::Tbsc };
    let mut chains = Vec::new();
    for c in question.distinct_chain() {
        let stage = format!("tbsc:{c}");
        let reply = run.call(&stage, tbsc, &[(story_key, &timeline_text), ("character", c)])?;
        let set = times_in_reply(&stage, c, &reply)?;
        chains.push((c.to_string(), reply, set));
    }

    let tool: Option<SolverAnswer> = match &model_log {
        Some(log) if question.chain.iter().all(|c| log.has_character(c)) => {
            let solver = BeliefSolver::with_time_sets(log, chains.iter().map(|(_, _, s)| s.clone()));
            match solver.solve(question) {
                Ok(answer) => Some(answer),
                Err(e) => {
                    log::warn!("solver failed on the model timeline: {e}");
                    None
                }
            }
        }
        _ => None,
    };
    let tool_value = tool.as_ref().map(|a| a.value.clone());

    if question.chain.is_empty() {
        let reply = run.call("qa", TemplateId::QaPlain, &[("story", &timeline_text), ("question", &text)])?;
        return Ok(finish(run, Some(reply.clone()), tool_value, reply));
    }

    let first = question.chain[0].as_str();
    let first_chain = chains[0].1.clone();
    let window_text = tool.as_ref().and_then(|a| a.window.as_ref()).map(|w| window_lines(&timeline, &w.times));
    let solver_prompt = policy.mode == PipelineMode::SolverAsPrompt && question.order >= 2;
    let perspective = match (&window_text, solver_prompt) {
        (Some(w), true) => w.clone(),
        _ => first_chain.clone(),
    };

    let initial = if dialogue {
        let id = if question.order >= 2 { TemplateId::DialogueQaHigher } else { TemplateId::DialogueQaFirst };
        run.call("qa", id, &[("name", first), ("perspective", &perspective), ("question", &text)])?
    } else if question.order == 1 && policy.compresses() {
        let own = run.call(
            "self_compress",
            TemplateId::SelfCompress,
            &[("character", first), ("perspective", &first_chain)],
        )?;
        run.call("qa", TemplateId::QaFirst, &[("perspective2", &own), ("name", first), ("question", &text)])?
    } else {
        run.call("qa", TemplateId::QaHigher, &[("perspective", &perspective), ("name", first), ("question", &text)])?
    };

    let final_answer = match (&tool, &window_text) {
        (Some(answer), Some(common)) if question.order >= 2 && !solver_prompt => {
            let request = FeedbackRequest {
                dialogue,
                name: first,
                perspective: &perspective,
                question: &text,
                chain: &question.chain,
                common_belief: common,
            };
            let (reply, step) = refine_with_feedback(backend, &request, &initial, answer, &policy.decoding)?;
            run.trace.extend(step);
            reply
        }
        _ => initial.clone(),
    };
    Ok(finish(run, Some(initial), tool_value, final_answer))
}

/// What the feedback prompt needs besides the two answers.
#[derive(Debug, Clone, Copy)]
pub struct FeedbackRequest<'a> {
    pub dialogue: bool,
    pub name: &'a str,
    pub perspective: &'a str,
    /// Question text as shown to the model.
    pub question: &'a str,
    pub chain: &'a [String],
    /// Event lines of the communication window.
    pub common_belief: &'a str,
}

/// Asks the model again with the solver's answer as feedback. An unknown
/// tool answer is not fed back: the initial answer is returned and no call
/// is made.
pub fn refine_with_feedback(
    backend: &dyn ModelBackend,
    request: &FeedbackRequest<'_>,
    initial: &str,
    tool: &SolverAnswer,
    decoding: &DecodingParams,
) -> Result<(String, Option<TraceStep>), PipelineError> {
    if tool.value.is_unknown() {
        return Ok((initial.to_string(), None));
    }
    let answer2 = tool.value.to_string();
    let (id, bindings) = if request.dialogue {
        let pad = |i: usize| request.chain.get(i).or(request.chain.last()).cloned().unwrap_or_default();
        let bindings = bind(&[
            ("name", request.name),
            ("perspective", request.perspective),
            ("question", request.question),
            ("answer", initial),
            ("character1", &pad(0)),
            ("character2", &pad(1)),
            ("character3", &pad(2)),
            ("common_belief", request.common_belief),
            ("answer2", &answer2),
        ]);
        (TemplateId::DialogueFeedback, bindings)
    } else {
        let (object, subject) = request.chain.split_last().map_or(("", &[][..]), |(o, s)| (o.as_str(), s));
        let bindings = bind(&[
            ("perspective", request.perspective),
            ("name", request.name),
            ("question", request.question),
            ("answer", initial),
            ("questionSubject", &join_names(subject)),
            ("questionObject", object),
            ("common_belief", request.common_belief),
            ("answer2", &answer2),
        ]);
        (TemplateId::Feedback, bindings)
    };
    let prompt = render_prompt(id, &bindings)?;
    let reply = backend.complete(&prompt, decoding)?;
    let step = TraceStep { stage: "feedback".into(), template: Some(id), prompt, reply: reply.clone() };
    Ok((reply, Some(step)))
}

fn run_info(
    mut run: Run<'_>,
    timeline: &TemporalStory,
    timeline_text: &str,
    model_log: Option<&EventLog>,
    question: &ToMQuestion,
) -> Result<PipelineAnswer, PipelineError> {
    let topic = question.topic.as_deref().unwrap_or("");
    let target_q = format!("Who discussed {topic}?");
    let target_a = format!("{} discussed {topic}.", join_names(&question.chain));
    let chain_of = |run: &mut Run<'_>, c: &str| -> Result<(String, PerceptibleTimeSet), PipelineError> {
        let stage = format!("tbsc:{c}");
        let reply = run.call(&stage, TemplateId::DialogueTbsc, &[("dialogue", timeline_text), ("character", c)])?;
        let set = times_in_reply(&stage, c, &reply)?;
        Ok((reply, set))
    };
    let answerability =
        matches!(question.flavor, QuestionFlavor::AnswerabilityList | QuestionFlavor::AnswerabilityBinary);

    let (reply, sets) = if question.flavor.is_list() {
        let characters: Vec<String> = match model_log {
            Some(log) => log.characters().iter().cloned().collect(),
            None => speakers_in(timeline),
        };
        let mut blocks = Vec::new();
        let mut sets = Vec::new();
        for c in &characters {
            let (reply, set) = chain_of(&mut run, c)?;
            blocks.push(format!("{c}'s belief state chain:\n{reply}"));
            sets.push(set);
        }
        let final_text = blocks.join("\n");
        let reply = if answerability {
            run.call("list", TemplateId::AnswerabilityList, &[("final_text", &final_text), ("target", &target_q)])?
        } else {
            run.call(
                "list",
                TemplateId::InfoaccessList,
                &[("final_text", &final_text), ("target_q", &target_q), ("target_a", &target_a)],
            )?
        };
        (reply, sets)
    } else {
        let target = question.target.as_deref().ok_or_else(|| stage_error("binary", "question has no target"))?;
        let (context, set) = chain_of(&mut run, target)?;
        let reply = if answerability {
            run.call(
                "binary",
                TemplateId::AnswerabilityBinary,
                &[("character", target), ("binary_context", &context), ("target", &target_q)],
            )?
        } else {
            run.call(
                "binary",
                TemplateId::InfoaccessBinary,
                &[
                    ("character", target),
                    ("binary_context", &context),
                    ("target_q", &target_q),
                    ("target_a", &target_a),
                ],
            )?
        };
        (reply, vec![set])
    };
    let tool = model_log.and_then(|log| BeliefSolver::with_time_sets(log, sets).solve(question).ok().map(|a| a.value));
    Ok(finish(run, Some(reply.clone()), tool, reply))
}

fn speakers_in(timeline: &TemporalStory) -> Vec<String> {
    let speakers: BTreeSet<String> = timeline
        .entries()
        .iter()
        .filter_map(|e| e.text.split_once(':').map(|(name, _)| name.trim().to_string()))
        .filter(|name| !name.is_empty() && !name.contains(' '))
        .collect();
    speakers.into_iter().collect()
}

fn finish(run: Run<'_>, initial: Option<String>, tool: Option<AnswerValue>, final_answer: String) -> PipelineAnswer {
    let calls = run.trace.iter().filter(|s| s.template.is_some()).count();
    PipelineAnswer { initial, tool, final_answer, trace: run.trace, calls }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::StubBackend;

    const WORKED_STORY: [&str; 7] = [
        "Alice entered the room.",
        "The celery is in the basket.",
        "Alice exited the room.",
        "Bob moved the celery to the box.",
        "Bob exited the room.",
        "Alice entered the room.",
        "John moved the celery to the table.",
    ];

    fn story() -> RawStory {
        RawStory::new(WORKED_STORY, ScenarioKind::Reading).unwrap()
    }

    #[test]
    fn second_order_feedback_corrects_the_model() {
        let q = ToMQuestion::belief(&["John", "Bob"], "celery").with_candidates(&["basket", "box", "table"]);
        let out = run_pipeline(&StubBackend::new(), &story(), &q, &PipelinePolicy::default()).unwrap();
        assert_eq!(out.initial.as_deref(), Some("The celery is in the table."));
        assert_eq!(out.tool, Some(AnswerValue::Container("box".into())));
        assert!(out.final_answer.contains("box"));
        assert_eq!(out.calls, stage_count(&PipelinePolicy::default(), 2, 2, true));
        let feedback = &out.trace.last().unwrap().prompt;
        assert!(feedback.contains("between characters John and Bob: t1: Alice entered the room."));
    }

    #[test]
    fn first_order_uses_compression() {
        let q = ToMQuestion::belief(&["Alice"], "celery");
        let out = run_pipeline(&StubBackend::new(), &story(), &q, &PipelinePolicy::default()).unwrap();
        let stages: Vec<&str> = out.trace.iter().map(|s| s.stage.as_str()).collect();
        assert_eq!(stages, vec!["cts", "tbsc:Alice", "self_compress", "qa"]);
        assert_eq!(out.final_answer, "The celery is in the table.");
    }

    #[test]
    fn solver_as_prompt_skips_feedback() {
        let policy = PipelinePolicy::new(PipelineMode::SolverAsPrompt);
        let q = ToMQuestion::belief(&["John", "Bob", "Alice"], "celery");
        let out = run_pipeline(&StubBackend::new(), &story(), &q, &policy).unwrap();
        assert_eq!(out.calls, stage_count(&policy, 3, 3, true));
        assert_eq!(out.final_answer, "The celery is in the basket.");
    }

    #[test]
    fn symbolic_only_makes_no_calls() {
        let policy = PipelinePolicy::new(PipelineMode::SymbolicOnly);
        let stub = StubBackend::new();
        let out = run_pipeline(&stub, &story(), &ToMQuestion::belief(&["Alice", "Bob"], "celery"), &policy).unwrap();
        assert_eq!((out.calls, stub.calls()), (0, 0));
        assert_eq!(out.final_answer, "basket");
        assert_eq!(out.trace.len(), 1);
    }

    #[test]
    fn zero_shot_modes() {
        let q = ToMQuestion::belief(&["Bob"], "celery");
        let plain =
            run_pipeline(&StubBackend::new(), &story(), &q, &PipelinePolicy::new(PipelineMode::ZeroShot)).unwrap();
        assert_eq!(plain.calls, 1);
        let timed =
            run_pipeline(&StubBackend::new(), &story(), &q, &PipelinePolicy::new(PipelineMode::ZeroShotTimeline))
                .unwrap();
        assert_eq!(timed.calls, 2);
    }

    #[test]
    fn unreadable_timeline_is_a_stage_error() {
        struct Garbage;
        impl ModelBackend for Garbage {
            fn name(&self) -> &str {
                "garbage"
            }
            fn complete(&self, _: &str, _: &DecodingParams) -> Result<String, BackendError> {
                Ok("no timeline here".into())
            }
            fn is_deterministic(&self) -> bool {
                true
            }
        }
        let err =
            run_pipeline(&Garbage, &story(), &ToMQuestion::belief(&["Bob"], "celery"), &PipelinePolicy::default());
        assert!(matches!(err, Err(PipelineError::StageParse { ref stage, .. }) if stage == "cts"), "{err:?}");
    }

    #[test]
    fn unknown_tool_answer_skips_feedback() {
        let stub = StubBackend::new();
        let chain = vec!["John".to_string(), "Bob".to_string()];
        let request = FeedbackRequest {
            dialogue: false,
            name: "John",
            perspective: "",
            question: "Where does John think that Bob searches for the celery?",
            chain: &chain,
            common_belief: "",
        };
        let tool = SolverAnswer { value: AnswerValue::Unknown, window: None, trace: vec![] };
        let (reply, step) = refine_with_feedback(&stub, &request, "basket", &tool, &DecodingParams::default()).unwrap();
        assert_eq!((reply.as_str(), step, stub.calls()), ("basket", None, 0));
        let tool = SolverAnswer { value: AnswerValue::Container("box".into()), ..tool };
        let (reply, step) = refine_with_feedback(&stub, &request, "basket", &tool, &DecodingParams::default()).unwrap();
        assert_eq!(reply, "Considering the feedback, the answer is box.");
        assert!(step.unwrap().prompt.contains("Answer1:basket"));
    }

    #[test]
    fn mode_names_round_trip() {
        for m in PipelineMode::ALL {
            assert_eq!(PipelineMode::from_name(m.name()), Some(m));
        }
    }
}
