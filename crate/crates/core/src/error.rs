use thiserror::Error;

use crate::event::TimePoint;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("story has no lines")]
    EmptyStory,
    #[error("line {index} is empty")]
    EmptyLine { index: usize },
    #[error("invalid timeline: {0}")]
    InvalidTimeline(String),
    #[error("unparsable sentence at {time}: {text:?}")]
    UnparsableSentence { time: TimePoint, text: String },
    #[error("unparsable question: {0:?}")]
    UnparsableQuestion(String),
    #[error("unknown entity {0:?}")]
    UnknownEntity(String),
    #[error("unknown character {0:?}")]
    UnknownCharacter(String),
    #[error("unknown object {0:?}")]
    UnknownObject(String),
    #[error("question of order {order} is not higher-order")]
    NotHigherOrder { order: usize },
    #[error("question flavor {0} is not handled by this operation")]
    UnsupportedFlavor(&'static str),
    #[error("infeasible generator parameters: {0}")]
    InfeasibleParams(String),
    #[error("schema error on line {line}: {message}")]
    Schema { line: usize, message: String },
}
