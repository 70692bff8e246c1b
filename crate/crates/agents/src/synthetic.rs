//! A deterministic stand-in for every agent, used by offline runs when no
//! recorded reply matches. It reads the same prompts a real model would and
//! answers in the requested JSON shapes.

use reqagent_core::evaluation::fnv1a;
use reqagent_core::parser::parse_score_sheet;
use reqagent_core::prioritization::{technique_ranking, technique_scores, ScoreSheet};
use reqagent_core::{AgentRole, ChatMessage, MessageRole, PrioritizationTechnique, StoryId};
use reqagent_gateway::mock::prompt_headers;
use reqagent_gateway::Responder;
use serde_json::{json, Value};

/// Upper bound on stories derived from one description.
const MAX_STORIES: usize = 12;

#[derive(Debug, Default, Clone, Copy)]
pub struct SyntheticResponder;

impl Responder for SyntheticResponder {
    fn respond(&self, model_name: &str, messages: &[ChatMessage]) -> Option<String> {
        let headers = prompt_headers(messages);
        let prompt = &messages
            .iter()
            .find(|m| m.role == MessageRole::User)?
            .content;
        let technique = headers
            .get("technique")
            .and_then(|t| t.parse::<PrioritizationTechnique>().ok());
        let agent = headers
            .get("agent")
            .and_then(|a| a.parse::<AgentRole>().ok());
        match (headers.get("task")?.as_str(), technique, agent) {
            ("generation", _, _) => Some(generation(prompt)),
            ("quality", _, _) => Some(quality(prompt)),
            ("overview", Some(t), _) => Some(overview(prompt, t)),
            ("prioritization", Some(t), Some(a)) => Some(sheet(model_name, a, t, prompt)),
            ("merge", Some(t), _) => merge(prompt, t),
            _ => None,
        }
    }
}

fn fenced(reply: String) -> String {
    format!("```json\n{reply}\n```")
}

/// Text between the first pair of `"""` lines.
fn quoted_body(prompt: &str) -> &str {
    let Some(start) = prompt.find("\"\"\"\n") else {
        return "";
    };
    let rest = &prompt[start + 4..];
    rest.find("\n\"\"\"").map_or(rest, |end| &rest[..end])
}

/// First fenced block's contents.
fn first_fence(prompt: &str) -> Option<&str> {
    let start = prompt.find("```")?;
    let after = &prompt[start + 3..];
    let body = &after[after.find('\n')? + 1..];
    Some(&body[..body.find("```")?])
}

fn story_ids(prompt: &str) -> Vec<StoryId> {
    let mut out: Vec<StoryId> = Vec::new();
    let mut rest = prompt;
    while let Some(pos) = rest.find("US-") {
        let digits: String = rest[pos + 3..]
            .chars()
            .take_while(char::is_ascii_digit)
            .collect();
        if !digits.is_empty() {
            let id = StoryId(format!("US-{digits}"));
            if !out.contains(&id) {
                out.push(id);
            }
        }
        rest = &rest[pos + 3..];
    }
    out
}

fn words(text: &str) -> Vec<&str> {
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|w| !w.is_empty())
        .collect()
}

fn capitalize(text: &str) -> String {
    let mut chars = text.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn sentences(paragraph: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    for ch in paragraph.chars() {
        current.push(ch);
        if matches!(ch, '.' | '!' | '?') {
            out.push(std::mem::take(&mut current));
        }
    }
    out.push(current);
    out.into_iter()
        .map(|s| s.split_whitespace().collect::<Vec<_>>().join(" "))
        .filter(|s| words(s).len() >= 3)
        .collect()
}

/// One story per sentence of the description; one epic per paragraph.
fn generation(prompt: &str) -> String {
    let body = quoted_body(prompt);
    let mut epics: Vec<Value> = Vec::new();
    let mut titles: Vec<String> = Vec::new();
    for paragraph in body.split("\n\n") {
        let mut stories = Vec::new();
        for sentence in sentences(paragraph) {
            if titles.len() == MAX_STORIES {
                break;
            }
            let w = words(&sentence);
            let mut title = capitalize(&w[..w.len().min(5)].join(" "));
            if titles.contains(&title) {
                title = format!("{title} {}", titles.len() + 1);
            }
            titles.push(title.clone());
            let activity = sentence.trim_end_matches(['.', '!', '?']).to_lowercase();
            stories.push(json!({
                "title": title,
                "role": "project stakeholder",
                "activity": format!("the system to support this: {activity}"),
                "goal": "the delivered product matches the project description",
                "acceptance_criteria": [format!("The system displays a confirmation when \"{title}\" is complete")],
            }));
        }
        if stories.is_empty() {
            continue;
        }
        let w = words(paragraph);
        let name = capitalize(&w[..w.len().min(3)].join(" "));
        epics.push(json!({"name": name, "stories": stories}));
    }
    fenced(serde_json::to_string_pretty(&json!({ "epics": epics })).expect("json values serialize"))
}

fn quality(prompt: &str) -> String {
    let reports: Vec<Value> = story_ids(prompt)
        .into_iter()
        .map(|id| {
            let verdicts: serde_json::Map<String, Value> = ["I", "N", "V", "E", "S", "T"]
                .iter()
                .map(|l| {
                    (
                        l.to_string(),
                        json!({"pass": true, "reason": "no issue found"}),
                    )
                })
                .collect();
            json!({"story_id": id, "verdicts": verdicts})
        })
        .collect();
    fenced(
        serde_json::to_string_pretty(&json!({ "reports": reports }))
            .expect("json values serialize"),
    )
}

fn overview(prompt: &str, technique: PrioritizationTechnique) -> String {
    let ids = story_ids(prompt);
    let urgent: Vec<&str> = ids.iter().take(2).map(StoryId::as_str).collect();
    format!(
        "Welcome everyone. We have {} stories to rank today and I would start with {}. Please score each one with {}.",
        ids.len(),
        urgent.join(" and "),
        technique.label()
    )
}

fn hash(model: &str, agent: AgentRole, technique: PrioritizationTechnique, id: &StoryId) -> u64 {
    fnv1a(
        format!(
            "{model}|{}|{}|{}",
            agent.slug(),
            technique.slug(),
            id.as_str()
        )
        .as_bytes(),
    )
}

fn sheet(
    model: &str,
    agent: AgentRole,
    technique: PrioritizationTechnique,
    prompt: &str,
) -> String {
    let ids = story_ids(prompt);
    let hashes: Vec<u64> = ids
        .iter()
        .map(|id| hash(model, agent, technique, id))
        .collect();
    let values: Vec<Value> = match technique {
        PrioritizationTechnique::HundredDollar => {
            let weights: Vec<u64> = hashes.iter().map(|h| 1 + h % 9).collect();
            let total: u64 = weights.iter().sum();
            let mut shares: Vec<u64> = weights.iter().map(|w| 100 * w / total).collect();
            let remainder = 100 - shares.iter().sum::<u64>();
            for share in shares.iter_mut().take(remainder as usize) {
                *share += 1;
            }
            shares.into_iter().map(Value::from).collect()
        }
        PrioritizationTechnique::Wsjf => hashes
            .iter()
            .map(|h| {
                let part = |shift: u32| 1 + (h >> shift) % 10;
                json!({"cod_value": part(0), "time_criticality": part(8), "risk_reduction": part(16), "job_size": part(24)})
            })
            .collect(),
        PrioritizationTechnique::Ahp => hashes.iter().map(|h| Value::from(1 + h % 9)).collect(),
    };
    let scores: Vec<Value> = ids
        .iter()
        .zip(values)
        .map(|(id, value)| {
            json!({"story_id": id, "value": value, "justification": format!("{} view on {}", agent.display_name(), id.as_str())})
        })
        .collect();
    fenced(
        serde_json::to_string_pretty(&json!({ "scores": scores })).expect("json values serialize"),
    )
}

/// Ranks by the technique's aggregate over every sheet in the prompt.
fn merge(prompt: &str, technique: PrioritizationTechnique) -> Option<String> {
    let items: Vec<Value> = serde_json::from_str(first_fence(prompt)?).ok()?;
    let mut sheets: Vec<ScoreSheet> = Vec::new();
    for item in &items {
        let agent: AgentRole = item.get("agent")?.as_str()?.parse().ok()?;
        let ids: Vec<StoryId> = item
            .get("scores")?
            .as_array()?
            .iter()
            .filter_map(|s| s.get("story_id")?.as_str().map(StoryId::from))
            .collect();
        sheets.push(
            parse_score_sheet(&item.to_string(), technique, &ids, agent)
                .result
                .ok()?,
        );
    }
    let ranks = technique_ranking(technique, &sheets).ok()?;
    let scores = technique_scores(technique, &sheets).ok()?;
    let ranking: Vec<Value> = ranks
        .iter()
        .map(|(id, rank)| {
            json!({
                "story_id": id,
                "rank": rank,
                "score": scores[id],
                "justification": format!("combined {} score across {} sheets", technique.label(), sheets.len()),
            })
        })
        .collect();
    Some(fenced(
        serde_json::to_string_pretty(&json!({ "ranking": ranking }))
            .expect("json values serialize"),
    ))
}
