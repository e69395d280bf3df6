//! Prompt-level pipeline: timeline annotation, per-character belief chains,
//! question answering and solver feedback, run against any text model.

pub mod backend;
pub mod pipeline;
pub mod template;

pub use backend::{BackendError, DecodingParams, ModelBackend, RemoteBackend, RemoteConfig, StubBackend};
pub use pipeline::{
    refine_with_feedback, run_pipeline, FeedbackRequest, PipelineAnswer, PipelineError, PipelineMode, PipelinePolicy,
    TraceStep,
};
