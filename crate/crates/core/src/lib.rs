//! Core data model and deterministic algorithms for multi-agent user story
//! generation, quality checking and backlog prioritization.
//!
//! Nothing in this crate performs I/O besides [`quality::QualityRules::load`].

pub mod aggregation;
pub mod clock;
pub mod domain;
pub mod evaluation;
pub mod export;
pub mod numeric;
pub mod parser;
pub mod prioritization;
pub mod quality;

pub use domain::*;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DomainError {
    #[error("project body is empty")]
    EmptyProjectBody,
    #[error("unknown agent role '{0}'")]
    UnknownAgentRole(String),
    #[error("unknown technique '{0}'")]
    UnknownTechnique(String),
    #[error("invalid rank '{0}'")]
    InvalidRank(String),
    #[error("invalid rank assignment: {0}")]
    InvalidRankAssignment(String),
    #[error("invalid {field} '{value}'")]
    InvalidEnum { field: &'static str, value: String },
    #[error("transcript events out of order")]
    TranscriptOrder,
    #[error("prioritization meeting must be opened by the product owner")]
    MeetingNotOpenedByProductOwner,
    #[error("invalid model config: {0}")]
    InvalidModelConfig(String),
    #[error("at least one technique is required")]
    NoTechniques,
    #[error("technique listed twice")]
    DuplicateTechnique,
    #[error("dangling story id {0}")]
    DanglingStoryId(domain::StoryId),
}
