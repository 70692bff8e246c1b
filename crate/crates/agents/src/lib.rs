//! Agent profiles, versioned prompts and the run pipeline.

pub mod events;
pub mod pipeline;
pub mod prompt;
pub mod synthetic;

pub use events::{EventKind, EventSink, NullSink, VecSink};
pub use pipeline::{Pipeline, PipelineError, QUALITY_FRAMEWORK};
pub use prompt::{render_prompt, PromptError, PROMPT_VERSION};
pub use synthetic::SyntheticResponder;
