//! Prompt templates and single-pass `{name}` substitution.
//!
//! The template texts are reproduced byte for byte, including their original
//! wording, spacing and the literal `\n` in the timeline instructions.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const CTS: &str = r#"The following is a story. Your task is to add timeline to the story.

Here are one rules: Each sentence corresponds to a moment t, Use \n as a delimiter, and the timeline is t1,t2,... ,tN.

Story:
{story}

Only output the story with the added timeline, do not provide explanations."#;

const TBSC: &str = r#"The following is a sequence of events with a timeline about some characters, that takes place in multiple locations.
Your job is to output only the events on the timeline that character {character} can aware of.

Here are a few commonsense rules:
1. If a character is in a certain room/location, they will be aware of all other events happening in that room. This includes other characters entering or leaving the location,  the locations of objects within it, and whether someone has moved an object to another location. 
2. If a character leaves a location and is no longer there, they will no longer be aware of any events occurring at that location. However, they can re-enter the location.
3. A character is aware of all the events that they do.

Story:
{story}

What events on the timeline does {character} aware of? Only output the events according to the above rules, do not provide an explanation."#;

const SELF_COMPRESS: &str = r#"Belief Compression: The following is information from the perspective of the character, {character}.

Perspective:
{perspective}

Output the remaining perspective information after removing the events of characters enter or leave/exit the room/location, do not provide an explanation."#;

const QA_FIRST: &str = r#"Time-Aware Belief Question Answer: 
{perspective2}
You are {name}.
Based on the above information, answer the following question:
{question}
Keep your answer concise, one sentence is enough. You must choose one of the above choices."#;

const QA_HIGHER: &str = r#"{perspective}
You are {name}.
Based on the above information, answer the following question:
{question}
Keep your answer concise, one sentence is enough. You must choose one of the above choices."#;

const FEEDBACK: &str = r#"Perspective1: {perspective}
You are {name}.
Based on the above information, answer the following question:
{question}
Answer1:{answer}
Feedback Perspective2: The event corresponding to the period of belief communication between characters {questionSubject} and {questionObject}: {common_belief} Based on this information, the answer we get to the question:{question} is Answer2: {answer2}
Consider Perspective1, Feedback Perspective2 and their answers, answer the question: {question} again. Keep your answer concise, one sentence is enough. You must choose onea of the above choices."#;

const DIALOGUE_CTS: &str = r#"The following is a dialogue. Your task is to add timeline to the dialogue.

Here are one rules: Each utterance spoken by a character corresponds to a moment t, Use \n as a delimiter, and the timeline is t1,t2,... ,tN.

Dialogue:
{dialogue}

Only output the dialogue content with the added timeline, do not provide explanations."#;

const DIALOGUE_TBSC: &str = r#"The following is a dialogue with a timeline between multiple characters. 
Your task is to only output the dialogue content on the timeline that the character {character} can aware of.

Here are two rules:
If a character leaves the conversation to do something else and then back after a few rounds of dialogue, they are unaware of the content of the conversation that took place during their absence, but they aware of the content of the conversation besides their absence.
If a character don't leaves the conversation to do something else and then back after a few rounds of dialogue. They are aware of all the content of dialogue with all timeline.

Dialogue:
{dialogue}

What dialogue content on the timeline does {character} aware of? Only output the dialogue content according to the above rules, do not provide an explanation."#;

const DIALOGUE_QA_FIRST: &str = r#"The following is the belief states chain of character {name}. This is the content known to {name}:[{perspective}]
You are {name}.
Based on the above information, answer the following question:
{question}
When answering questions, based on own belief, simply focus on the information of things asked in the question and ignore other distracting factors. You must choose one of the above choices."#;

const DIALOGUE_QA_HIGHER: &str = r#"The following is the belief states chain of character {name}. This is the content known to {name}:[{perspective}]
You are {name}.
Based on the above information, answer the following question:
{question}
You must choose one of the above choices."#;

const DIALOGUE_FEEDBACK: &str = r#"The following is the belief states chain of character {name}. This is the content known to {name}:[{perspective}]
You are {name}.
Based on the above information, answer the following question:
{question}
Answer:{answer}
Feedback: The event corresponding to the period of belief communication between characters {character1}, {character2} and {character3}: {common_belief} Based on this information, the answer we get to the question:{question} is [{answer2}]
Considering this feedback, answer the question: {question} again. Keep your answer concise, one sentence is enough. You must choose one of the above choices."#;

const ANSWERABILITY_LIST: &str = r#"The following is the belief states chain of each character. This is the content known to each character.
Each character only knows the contents within their own belief state chain and is unaware of the contents within the belief state chain of other characters.
{final_text}
Question:
{target}
Based on the belief state chain of the above-mentioned characters, only output all the characters who know the precise correct answer to this question, do not provide an explanation."#;

const ANSWERABILITY_BINARY: &str = r#"The following is the belief states chain of character {character}. This is the content known to {character}.
{binary_context}
Question:
{target}
Based on the belief state chain of character {character}, does {character} know the precise correct answer to this question? Answer yes or no. Answer:."#;

const INFOACCESS_LIST: &str = r#"The following is the belief states chain of each character. This is the content known to each character.
Each character only knows the contents within their own belief state chain and is unaware of the contents within the belief state chain of other characters.
{final_text}
Target:
{target_q}
{target_a}
Question:
Based on the belief state chain of the above-mentioned characters, only output all the characters who know the target information, do not provide an explanation."#;

const INFOACCESS_BINARY: &str = r#"The following is the belief states chain of character {character}. This is the content known to {character}.
{binary_context}
Target:
{target_q}
{target_a}
Question:
Based on the belief state chain of character {character}, does {character} know the target information? Answer yes or no. Answer:."#;

/// Plain question answering over a story, used when no perspective is built.
const QA_PLAIN: &str = r#"{story}

Answer the following question:
{question}
Keep your answer concise, one sentence is enough. You must choose one of the above choices."#;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    Cts,
    Tbsc,
    SelfCompress,
    QaFirst,
    QaHigher,
    Feedback,
    DialogueCts,
    DialogueTbsc,
    DialogueQaFirst,
    DialogueQaHigher,
    DialogueFeedback,
    AnswerabilityList,
    AnswerabilityBinary,
    InfoaccessList,
    InfoaccessBinary,
    QaPlain,
}

impl TemplateId {
    /// Every template, ordered so that the first one whose shape matches a
    /// prompt is the one that produced it.
    pub const ALL: [TemplateId; 16] = [
        TemplateId::Cts,
        TemplateId::Tbsc,
        TemplateId::SelfCompress,
        TemplateId::QaFirst,
        TemplateId::Feedback,
        TemplateId::DialogueCts,
        TemplateId::DialogueTbsc,
        TemplateId::DialogueFeedback,
        TemplateId::DialogueQaFirst,
        TemplateId::DialogueQaHigher,
        TemplateId::AnswerabilityList,
        TemplateId::AnswerabilityBinary,
        TemplateId::InfoaccessList,
        TemplateId::InfoaccessBinary,
        TemplateId::QaHigher,
        TemplateId::QaPlain,
    ];

    pub fn text(self) -> &'static str {
        match self {
            TemplateId::Cts => CTS,
            TemplateId::Tbsc => TBSC,
            TemplateId::SelfCompress => SELF_COMPRESS,
            TemplateId::QaFirst => QA_FIRST,
            TemplateId::QaHigher => QA_HIGHER,
            TemplateId::Feedback => FEEDBACK,
            TemplateId::DialogueCts => DIALOGUE_CTS,
            TemplateId::DialogueTbsc => DIALOGUE_TBSC,
            TemplateId::DialogueQaFirst => DIALOGUE_QA_FIRST,
            TemplateId::DialogueQaHigher => DIALOGUE_QA_HIGHER,
            TemplateId::DialogueFeedback => DIALOGUE_FEEDBACK,
            TemplateId::AnswerabilityList => ANSWERABILITY_LIST,
            TemplateId::AnswerabilityBinary => ANSWERABILITY_BINARY,
            TemplateId::InfoaccessList => INFOACCESS_LIST,
            TemplateId::InfoaccessBinary => INFOACCESS_BINARY,
            TemplateId::QaPlain => QA_PLAIN,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TemplateId::Cts => "cts",
            TemplateId::Tbsc => "tbsc",
            TemplateId::SelfCompress => "self_compress",
            TemplateId::QaFirst => "qa_first",
            TemplateId::QaHigher => "qa_higher",
            TemplateId::Feedback => "feedback",
            TemplateId::DialogueCts => "dialogue_cts",
            TemplateId::DialogueTbsc => "dialogue_tbsc",
            TemplateId::DialogueQaFirst => "dialogue_qa_first",
            TemplateId::DialogueQaHigher => "dialogue_qa_higher",
            TemplateId::DialogueFeedback => "dialogue_feedback",
            TemplateId::AnswerabilityList => "answerability_list",
            TemplateId::AnswerabilityBinary => "answerability_binary",
            TemplateId::InfoaccessList => "infoaccess_list",
            TemplateId::InfoaccessBinary => "infoaccess_binary",
            TemplateId::QaPlain => "qa_plain",
        }
    }

    /// Placeholder names in order of first appearance.
    pub fn placeholders(self) -> Vec<&'static str> {
        let mut seen = BTreeSet::new();
        PLACEHOLDER
            .captures_iter(self.text())
            .map(|c| c.get(1).unwrap().as_str())
            .filter(|name| seen.insert(*name))
            .collect()
    }
}

static PLACEHOLDER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\{([A-Za-z_][A-Za-z0-9_]*)\}").unwrap());

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("template {template} has no binding for {{{name}}}")]
    UnboundPlaceholder { template: &'static str, name: String },
}

pub type Bindings = BTreeMap<String, String>;

/// Builds bindings from `(name, value)` pairs.
pub fn bind<K: AsRef<str>, V: AsRef<str>>(pairs: &[(K, V)]) -> Bindings {
    pairs.iter().map(|(k, v)| (k.as_ref().to_string(), v.as_ref().to_string())).collect()
}

/// Substitutes every `{name}` in one pass; substituted values are never
/// re-scanned.
pub fn render_prompt(id: TemplateId, bindings: &Bindings) -> Result<String, TemplateError> {
    let text = id.text();
    let mut out = String::with_capacity(text.len() + bindings.values().map(String::len).sum::<usize>());
    let mut last = 0;
    for c in PLACEHOLDER.captures_iter(text) {
        let whole = c.get(0).unwrap();
        let name = &c[1];
        let value = bindings
            .get(name)
            .ok_or_else(|| TemplateError::UnboundPlaceholder { template: id.name(), name: name.to_string() })?;
        out.push_str(&text[last..whole.start()]);
        out.push_str(value);
        last = whole.end();
    }
    out.push_str(&text[last..]);
    Ok(out)
}

struct Shape {
    id: TemplateId,
    regex: Regex,
    /// Placeholder name per capture group.
    slots: Vec<&'static str>,
}

static SHAPES: LazyLock<Vec<Shape>> = LazyLock::new(|| {
    TemplateId::ALL
        .iter()
        .map(|&id| {
            let text = id.text();
            let mut pattern = String::from("(?s)^");
            let mut slots = Vec::new();
            let mut last = 0;
            for c in PLACEHOLDER.captures_iter(text) {
                let whole = c.get(0).unwrap();
                pattern.push_str(&regex::escape(&text[last..whole.start()]));
                pattern.push_str("(.*?)");
                slots.push(c.get(1).unwrap().as_str());
                last = whole.end();
            }
            pattern.push_str(&regex::escape(&text[last..]));
            pattern.push('$');
            Shape { id, regex: Regex::new(&pattern).unwrap(), slots }
        })
        .collect()
});

/// Recovers the bindings a prompt was rendered with, if it has the shape of
/// template `id`. A placeholder used twice must have the same value twice.
pub fn extract(id: TemplateId, prompt: &str) -> Option<Bindings> {
    let shape = SHAPES.iter().find(|s| s.id == id)?;
    match_shape(shape, prompt)
}

fn match_shape(shape: &Shape, prompt: &str) -> Option<Bindings> {
    let caps = shape.regex.captures(prompt)?;
    let mut out = Bindings::new();
    for (i, name) in shape.slots.iter().enumerate() {
        let value = caps.get(i + 1).map_or("", |m| m.as_str());
        match out.get(*name) {
            Some(prev) if prev != value => return None,
            Some(_) => {}
            None => {
                out.insert(name.to_string(), value.to_string());
            }
        }
    }
    Some(out)
}

/// The first template, in [`TemplateId::ALL`] order, that could have produced
/// `prompt`.
pub fn identify(prompt: &str) -> Option<(TemplateId, Bindings)> {
    SHAPES.iter().find_map(|s| match_shape(s, prompt).map(|b| (s.id, b)))
}
