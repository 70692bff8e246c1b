//! Prompt templates and placeholder substitution.
//!
//! A placeholder is a lowercase identifier in braces, e.g. `{technique}`.
//! `{{` and `}}` produce literal braces; any other brace is copied as is, so
//! JSON examples need no escaping.

use std::collections::BTreeMap;

use reqagent_core::{AgentRole, PrioritizationTechnique};
use thiserror::Error;

pub const PROMPT_VERSION: &str = "v1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("missing placeholder '{0}'")]
    MissingPlaceholder(String),
}

pub mod templates {
    pub const GENERATION: &str = include_str!("../prompts/v1/generation.txt");
    pub const QUALITY: &str = include_str!("../prompts/v1/quality.txt");
    pub const OVERVIEW: &str = include_str!("../prompts/v1/overview.txt");
    pub const PRIORITIZATION: &str = include_str!("../prompts/v1/prioritization.txt");
    pub const MERGE: &str = include_str!("../prompts/v1/merge.txt");
    pub const CORRECTION: &str = include_str!("../prompts/v1/correction.txt");
}

pub fn system_prompt(role: AgentRole) -> &'static str {
    match role {
        AgentRole::ProductOwner => include_str!("../prompts/v1/system_product_owner.txt"),
        AgentRole::QualityAssurance => include_str!("../prompts/v1/system_quality_assurance.txt"),
        AgentRole::SeniorDeveloper => include_str!("../prompts/v1/system_senior_developer.txt"),
        AgentRole::Manager => include_str!("../prompts/v1/system_manager.txt"),
    }
}

pub fn technique_rules(technique: PrioritizationTechnique) -> &'static str {
    match technique {
        PrioritizationTechnique::HundredDollar => {
            include_str!("../prompts/v1/technique_100dollar.txt")
        }
        PrioritizationTechnique::Wsjf => include_str!("../prompts/v1/technique_wsjf.txt"),
        PrioritizationTechnique::Ahp => include_str!("../prompts/v1/technique_ahp.txt"),
    }
}

pub fn scores_schema(technique: PrioritizationTechnique) -> &'static str {
    match technique {
        PrioritizationTechnique::HundredDollar => {
            include_str!("../prompts/v1/schema_100dollar.txt")
        }
        PrioritizationTechnique::Wsjf => include_str!("../prompts/v1/schema_wsjf.txt"),
        PrioritizationTechnique::Ahp => include_str!("../prompts/v1/schema_ahp.txt"),
    }
}

pub type Context<'a> = BTreeMap<&'a str, String>;

/// Substitutes every placeholder in one pass; substituted text is not rescanned.
pub fn render_prompt(template: &str, context: &Context<'_>) -> Result<String, PromptError> {
    let mut out = String::with_capacity(template.len() * 2);
    let mut rest = template;
    while let Some(pos) = rest.find(['{', '}']) {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        if tail.starts_with("{{") || tail.starts_with("}}") {
            out.push_str(&tail[..1]);
            rest = &tail[2..];
            continue;
        }
        if let Some(inner) = tail.strip_prefix('{') {
            let name_len = inner
                .find(|c: char| !(c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_'))
                .unwrap_or(inner.len());
            if name_len > 0 && inner[name_len..].starts_with('}') {
                let name = &inner[..name_len];
                let value = context
                    .get(name)
                    .ok_or_else(|| PromptError::MissingPlaceholder(name.to_string()))?;
                out.push_str(value);
                rest = &tail[name_len + 2..];
                continue;
            }
        }
        out.push_str(&tail[..1]);
        rest = &tail[1..];
    }
    out.push_str(rest);
    Ok(out.trim_end().to_string())
}
