//! Extraction of epics, stories, score sheets, QA verdicts and manager
//! rankings from model replies.
//!
//! Replies are expected to carry one JSON object, usually in a fenced code
//! block. Unknown fields are ignored; missing or malformed required fields are
//! reported with a JSON path such as `epics[0].stories[2].role`. No input makes
//! these functions panic.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::domain::AgentRole;
use crate::domain::{
    check_average_ranks, normalize_label, PrioritizationTechnique, Rank, StoryId, StoryStatus,
    UserStory,
};
use crate::numeric::serde_rational;
use crate::prioritization::{PrioritizationError, ScorePayload, ScoreSheet, WsjfInput};
use crate::quality::{InvestLetter, LlmVerdict, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    NoJsonFound,
    Syntax,
    Schema,
    CoverageMismatch,
    ConstraintViolation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathViolation {
    pub kind: ViolationKind,
    pub path: String,
    pub reason: String,
}

impl PathViolation {
    fn new(kind: ViolationKind, path: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            kind,
            path: path.into(),
            reason: reason.into(),
        }
    }

    fn schema(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Self::new(ViolationKind::Schema, path, reason)
    }
}

impl fmt::Display for PathViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.reason)
    }
}

/// Either a parsed value or the violations that prevented it, plus the raw reply.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseOutcome<T> {
    pub raw: String,
    pub result: Result<T, Vec<PathViolation>>,
}

impl<T> ParseOutcome<T> {
    fn new(raw: &str, result: Result<T, Vec<PathViolation>>) -> Self {
        Self {
            raw: raw.to_string(),
            result,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.result.is_ok()
    }

    pub fn violations(&self) -> &[PathViolation] {
        match &self.result {
            Ok(_) => &[],
            Err(v) => v,
        }
    }

    /// Violations rendered one per line, for corrective prompts and errors.
    pub fn violation_summary(&self) -> String {
        self.violations()
            .iter()
            .map(|v| format!("- {v}"))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoJsonFound;

impl fmt::Display for NoJsonFound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("no JSON found in reply")
    }
}

impl std::error::Error for NoJsonFound {}

/// Content of the first fenced code block, else the span from the first `{`
/// to the last `}`.
pub fn extract_json_block(reply: &str) -> Result<&str, NoJsonFound> {
    if let Some(start) = reply.find("```") {
        let after = &reply[start + 3..];
        // skip an info string such as `json`
        let body_start = after.find('\n').map(|i| i + 1).unwrap_or(after.len());
        let info = &after[..body_start];
        let body = if info
            .trim()
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
        {
            &after[body_start..]
        } else {
            after
        };
        let end = body.find("```").unwrap_or(body.len());
        let content = body[..end].trim();
        if !content.is_empty() {
            return Ok(content);
        }
    }
    match (reply.find('{'), reply.rfind('}')) {
        (Some(a), Some(b)) if a < b => Ok(&reply[a..=b]),
        _ => Err(NoJsonFound),
    }
}

fn parse_root(reply: &str) -> Result<Value, Vec<PathViolation>> {
    let block = extract_json_block(reply).map_err(|e| {
        vec![PathViolation::new(
            ViolationKind::NoJsonFound,
            "$",
            e.to_string(),
        )]
    })?;
    serde_json::from_str::<Value>(block)
        .or_else(|first_err| {
            // a fenced block may hold prose around the object
            match (block.find('{'), block.rfind('}')) {
                (Some(a), Some(b)) if a < b && (a > 0 || b + 1 < block.len()) => {
                    serde_json::from_str::<Value>(&block[a..=b]).map_err(|_| first_err)
                }
                _ => Err(first_err),
            }
        })
        .map_err(|e| {
            vec![PathViolation::new(
                ViolationKind::Syntax,
                "$",
                e.to_string(),
            )]
        })
}

fn required_text(
    obj: &Map<String, Value>,
    key: &str,
    path: &str,
    out: &mut Vec<PathViolation>,
) -> Option<String> {
    match obj.get(key) {
        None | Some(Value::Null) => {
            out.push(PathViolation::schema(format!("{path}.{key}"), "missing"));
            None
        }
        Some(Value::String(s)) if s.trim().is_empty() => {
            out.push(PathViolation::schema(format!("{path}.{key}"), "empty"));
            None
        }
        Some(Value::String(s)) => Some(s.trim().to_string()),
        Some(other) => {
            out.push(PathViolation::schema(
                format!("{path}.{key}"),
                format!("expected string, got {}", kind_of(other)),
            ));
            None
        }
    }
}

fn kind_of(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

fn as_object<'a>(
    v: &'a Value,
    path: &str,
    out: &mut Vec<PathViolation>,
) -> Option<&'a Map<String, Value>> {
    match v.as_object() {
        Some(o) => Some(o),
        None => {
            out.push(PathViolation::schema(
                path,
                format!("expected object, got {}", kind_of(v)),
            ));
            None
        }
    }
}

fn required_array<'a>(
    obj: &'a Map<String, Value>,
    key: &str,
    path: &str,
    out: &mut Vec<PathViolation>,
) -> Option<&'a Vec<Value>> {
    match obj.get(key) {
        Some(Value::Array(a)) => Some(a),
        None | Some(Value::Null) => {
            out.push(PathViolation::schema(format!("{path}.{key}"), "missing"));
            None
        }
        Some(other) => {
            out.push(PathViolation::schema(
                format!("{path}.{key}"),
                format!("expected array, got {}", kind_of(other)),
            ));
            None
        }
    }
}

fn join_path(base: &str, key: &str) -> String {
    if base == "$" {
        key.to_string()
    } else {
        format!("{base}.{key}")
    }
}

/// Result of a generation reply: epics in order of appearance and the stories
/// with ids assigned.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedBacklog {
    pub epics: Vec<String>,
    pub stories: Vec<UserStory>,
    /// Duplicate-collapse notes.
    pub notes: Vec<String>,
}

pub fn parse_generation(reply: &str) -> ParseOutcome<GeneratedBacklog> {
    ParseOutcome::new(
        reply,
        parse_root(reply).and_then(|root| generation_from_value(&root)),
    )
}

fn generation_from_value(root: &Value) -> Result<GeneratedBacklog, Vec<PathViolation>> {
    let mut violations = Vec::new();
    let Some(obj) = as_object(root, "$", &mut violations) else {
        return Err(violations);
    };
    let Some(epics) = required_array(obj, "epics", "$", &mut violations).map(|a| a.as_slice())
    else {
        return Err(violations);
    };
    if epics.is_empty() {
        return Err(vec![PathViolation::schema("epics", "no epics")]);
    }

    let mut epic_names = Vec::new();
    let mut seen_epics = BTreeMap::new();
    let mut stories: Vec<UserStory> = Vec::new();
    let mut seen_titles: BTreeMap<String, StoryId> = BTreeMap::new();
    let mut notes = Vec::new();

    for (ei, epic) in epics.iter().enumerate() {
        let epath = format!("epics[{ei}]");
        let Some(eobj) = as_object(epic, &epath, &mut violations) else {
            continue;
        };
        let name = required_text(eobj, "name", &epath, &mut violations);
        let story_values = required_array(eobj, "stories", &epath, &mut violations);
        let Some(name) = name else {
            continue;
        };
        match seen_epics.get(&normalize_label(&name)) {
            Some(first) if first != &name => {
                notes.push(format!("epic '{name}' merged with '{first}'"))
            }
            Some(_) => {}
            None => {
                seen_epics.insert(normalize_label(&name), name.clone());
                epic_names.push(name.clone());
            }
        }
        let epic_label = seen_epics[&normalize_label(&name)].clone();
        for (si, sv) in story_values.into_iter().flatten().enumerate() {
            let spath = format!("{epath}.stories[{si}]");
            let Some(sobj) = as_object(sv, &spath, &mut violations) else {
                continue;
            };
            let title = required_text(sobj, "title", &spath, &mut violations);
            let role = required_text(sobj, "role", &spath, &mut violations);
            let activity = required_text(sobj, "activity", &spath, &mut violations);
            let goal = required_text(sobj, "goal", &spath, &mut violations);
            let criteria = match sobj.get("acceptance_criteria") {
                Some(Value::Array(items)) => {
                    let mut list = Vec::new();
                    for (ci, c) in items.iter().enumerate() {
                        match c {
                            Value::String(s) if !s.trim().is_empty() => {
                                list.push(s.trim().to_string())
                            }
                            Value::String(_) => {}
                            other => violations.push(PathViolation::schema(
                                format!("{spath}.acceptance_criteria[{ci}]"),
                                format!("expected string, got {}", kind_of(other)),
                            )),
                        }
                    }
                    Some(list)
                }
                None | Some(Value::Null) => {
                    violations.push(PathViolation::schema(
                        format!("{spath}.acceptance_criteria"),
                        "missing",
                    ));
                    None
                }
                Some(other) => {
                    violations.push(PathViolation::schema(
                        format!("{spath}.acceptance_criteria"),
                        format!("expected array, got {}", kind_of(other)),
                    ));
                    None
                }
            };
            let (Some(title), Some(role), Some(activity), Some(goal), Some(criteria)) =
                (title, role, activity, goal, criteria)
            else {
                continue;
            };
            let key = normalize_label(&title);
            if let Some(existing) = seen_titles.get(&key) {
                notes.push(format!(
                    "duplicate story '{title}' at {spath} collapsed into {existing}"
                ));
                continue;
            }
            let id = StoryId::ordinal(stories.len() + 1);
            seen_titles.insert(key, id.clone());
            stories.push(UserStory {
                id,
                epic: epic_label.clone(),
                title,
                role,
                activity,
                goal,
                acceptance_criteria: criteria,
                status: StoryStatus::Draft,
            });
        }
    }
    if !violations.is_empty() {
        return Err(violations);
    }
    if stories.is_empty() {
        return Err(vec![PathViolation::schema("epics", "no stories")]);
    }
    Ok(GeneratedBacklog {
        epics: epic_names,
        stories,
        notes,
    })
}

/// Serializes stories back into the generation schema, grouped by epic in
/// order of first appearance.
pub fn generation_payload(stories: &[UserStory]) -> Value {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<&str, Vec<Value>> = BTreeMap::new();
    for s in stories {
        if !groups.contains_key(s.epic.as_str()) {
            order.push(&s.epic);
        }
        groups.entry(&s.epic).or_default().push(json!({
            "title": s.title,
            "role": s.role,
            "activity": s.activity,
            "goal": s.goal,
            "acceptance_criteria": s.acceptance_criteria,
        }));
    }
    json!({
        "epics": order
            .into_iter()
            .map(|e| json!({"name": e, "stories": groups.remove(e).unwrap_or_default()}))
            .collect::<Vec<_>>()
    })
}

/// Stories with their ids, as handed to the quality and prioritization prompts.
pub fn stories_json(stories: &[UserStory]) -> String {
    let list: Vec<Value> = stories
        .iter()
        .map(|s| {
            json!({
                "story_id": s.id,
                "epic": s.epic,
                "title": s.title,
                "description": s.description(),
                "acceptance_criteria": s.acceptance_criteria,
            })
        })
        .collect();
    serde_json::to_string_pretty(&list).unwrap_or_default()
}

fn number_at(
    v: Option<&Value>,
    path: &str,
    out: &mut Vec<PathViolation>,
) -> Option<num_rational::Rational64> {
    match v {
        None | Some(Value::Null) => {
            out.push(PathViolation::schema(path, "missing"));
            None
        }
        Some(value) => match serde_rational::from_json(value) {
            Some(r) => Some(r),
            None => {
                out.push(PathViolation::schema(
                    path,
                    format!("expected number, got {value}"),
                ));
                None
            }
        },
    }
}

fn story_id_at(
    obj: &Map<String, Value>,
    path: &str,
    out: &mut Vec<PathViolation>,
) -> Option<StoryId> {
    match obj.get("story_id") {
        Some(Value::String(s)) if !s.trim().is_empty() => Some(StoryId(s.trim().to_string())),
        Some(Value::Number(n)) => Some(StoryId(n.to_string())),
        _ => {
            out.push(PathViolation::schema(format!("{path}.story_id"), "missing"));
            None
        }
    }
}

fn coverage_check<'a>(
    found: impl IntoIterator<Item = &'a StoryId>,
    expected: &[StoryId],
    path: &str,
) -> Vec<PathViolation> {
    let mut seen = BTreeSet::new();
    let mut duplicates = Vec::new();
    for id in found {
        if !seen.insert(id.clone()) {
            duplicates.push(id.to_string());
        }
    }
    let expected: BTreeSet<StoryId> = expected.iter().cloned().collect();
    let missing: Vec<String> = expected
        .difference(&seen)
        .map(ToString::to_string)
        .collect();
    let extra: Vec<String> = seen
        .difference(&expected)
        .map(ToString::to_string)
        .collect();
    let mut out = Vec::new();
    if !missing.is_empty() {
        out.push(PathViolation::new(
            ViolationKind::CoverageMismatch,
            path,
            format!("missing {}", missing.join(", ")),
        ));
    }
    if !extra.is_empty() {
        out.push(PathViolation::new(
            ViolationKind::CoverageMismatch,
            path,
            format!("unknown {}", extra.join(", ")),
        ));
    }
    if !duplicates.is_empty() {
        out.push(PathViolation::new(
            ViolationKind::CoverageMismatch,
            path,
            format!("duplicate {}", duplicates.join(", ")),
        ));
    }
    out
}

/// Parses `{"scores": [{"story_id", "value", "justification"}]}` for one agent.
pub fn parse_score_sheet(
    reply: &str,
    technique: PrioritizationTechnique,
    story_ids: &[StoryId],
    agent: AgentRole,
) -> ParseOutcome<ScoreSheet> {
    let result =
        parse_root(reply).and_then(|root| sheet_from_value(&root, technique, story_ids, agent));
    ParseOutcome::new(reply, result)
}

fn sheet_from_value(
    root: &Value,
    technique: PrioritizationTechnique,
    story_ids: &[StoryId],
    agent: AgentRole,
) -> Result<ScoreSheet, Vec<PathViolation>> {
    let mut violations = Vec::new();
    let Some(obj) = as_object(root, "$", &mut violations) else {
        return Err(violations);
    };
    let Some(scores) = required_array(obj, "scores", "$", &mut violations) else {
        return Err(violations);
    };
    let mut sheet = ScoreSheet::new(agent, technique);
    let mut ids = Vec::new();
    for (i, entry) in scores.iter().enumerate() {
        let path = format!("scores[{i}]");
        let Some(eobj) = as_object(entry, &path, &mut violations) else {
            continue;
        };
        let id = story_id_at(eobj, &path, &mut violations);
        let vpath = format!("{path}.value");
        let payload = match technique {
            PrioritizationTechnique::HundredDollar => {
                number_at(eobj.get("value"), &vpath, &mut violations).map(ScorePayload::Allocation)
            }
            PrioritizationTechnique::Ahp => {
                number_at(eobj.get("value"), &vpath, &mut violations).map(ScorePayload::Importance)
            }
            PrioritizationTechnique::Wsjf => match eobj.get("value") {
                Some(Value::Object(w)) => {
                    let cod = number_at(
                        w.get("cod_value"),
                        &format!("{vpath}.cod_value"),
                        &mut violations,
                    );
                    let tc = number_at(
                        w.get("time_criticality"),
                        &format!("{vpath}.time_criticality"),
                        &mut violations,
                    );
                    let rr = number_at(
                        w.get("risk_reduction"),
                        &format!("{vpath}.risk_reduction"),
                        &mut violations,
                    );
                    let js = number_at(
                        w.get("job_size"),
                        &format!("{vpath}.job_size"),
                        &mut violations,
                    );
                    match (cod, tc, rr, js) {
                        (
                            Some(cod_value),
                            Some(time_criticality),
                            Some(risk_reduction),
                            Some(job_size),
                        ) => Some(ScorePayload::Wsjf(WsjfInput {
                            cod_value,
                            time_criticality,
                            risk_reduction,
                            job_size,
                        })),
                        _ => None,
                    }
                }
                other => {
                    violations.push(PathViolation::schema(
                        vpath,
                        format!(
                            "expected object with cod_value, time_criticality, risk_reduction, job_size, got {}",
                            other.map(kind_of).unwrap_or("nothing")
                        ),
                    ));
                    None
                }
            },
        };
        let justification = match eobj.get("justification") {
            Some(Value::String(s)) => s.trim().to_string(),
            _ => String::new(),
        };
        if let Some(id) = id {
            ids.push(id.clone());
            if let Some(payload) = payload {
                sheet.entries.insert(id.clone(), payload);
                sheet.justifications.insert(id, justification);
            }
        }
    }
    violations.extend(coverage_check(ids.iter(), story_ids, "scores"));
    if !violations.is_empty() {
        return Err(violations);
    }
    if let Err(e) = sheet.validate() {
        let reason = match &e {
            PrioritizationError::SumViolation(sum) => format!("sum={sum}≠100"),
            PrioritizationError::ConstraintViolation(msg) => msg.clone(),
            other => other.to_string(),
        };
        return Err(vec![PathViolation::new(
            ViolationKind::ConstraintViolation,
            "scores",
            reason,
        )]);
    }
    Ok(sheet)
}

/// Renders a sheet in the reply schema.
pub fn score_sheet_payload(sheet: &ScoreSheet) -> Value {
    let scores: Vec<Value> = sheet
        .entries
        .iter()
        .map(|(id, payload)| {
            let value = match payload {
                ScorePayload::Allocation(v) | ScorePayload::Importance(v) => rational_json(v),
                ScorePayload::Wsjf(w) => json!({
                    "cod_value": rational_json(&w.cod_value),
                    "time_criticality": rational_json(&w.time_criticality),
                    "risk_reduction": rational_json(&w.risk_reduction),
                    "job_size": rational_json(&w.job_size),
                }),
            };
            json!({
                "story_id": id,
                "value": value,
                "justification": sheet.justifications.get(id).cloned().unwrap_or_default(),
            })
        })
        .collect();
    json!({ "scores": scores })
}

fn rational_json(v: &num_rational::Rational64) -> Value {
    serde_rational::serialize(v, serde_json::value::Serializer).unwrap_or(Value::Null)
}

fn verdict_from_value(v: &Value, path: &str, out: &mut Vec<PathViolation>) -> Option<Verdict> {
    let pass_word = |s: &str| match s.trim().to_ascii_lowercase().as_str() {
        "pass" | "passed" | "yes" | "true" | "compliant" | "ok" => Some(true),
        "fail" | "failed" | "no" | "false" | "non-compliant" | "noncompliant" => Some(false),
        _ => None,
    };
    match v {
        Value::Bool(b) => Some(Verdict {
            pass: *b,
            reason: String::new(),
        }),
        Value::String(s) => match pass_word(s) {
            Some(pass) => Some(Verdict {
                pass,
                reason: String::new(),
            }),
            None => {
                out.push(PathViolation::schema(
                    path,
                    format!("expected pass|fail, got '{s}'"),
                ));
                None
            }
        },
        Value::Object(o) => {
            let pass = match o
                .get("pass")
                .or_else(|| o.get("verdict"))
                .or_else(|| o.get("status"))
            {
                Some(Value::Bool(b)) => Some(*b),
                Some(Value::String(s)) => pass_word(s),
                _ => None,
            };
            let reason = o
                .get("reason")
                .and_then(Value::as_str)
                .unwrap_or_default()
                .trim()
                .to_string();
            match pass {
                Some(pass) => Some(Verdict { pass, reason }),
                None => {
                    out.push(PathViolation::schema(
                        format!("{path}.pass"),
                        "missing pass|fail",
                    ));
                    None
                }
            }
        }
        other => {
            out.push(PathViolation::schema(
                path,
                format!("expected verdict, got {}", kind_of(other)),
            ));
            None
        }
    }
}

/// Parses QA verdicts: `{"reports": [...]}`, a bare array, or a single
/// `{"story_id", "verdicts"}` object. Each verdict keeps its JSON text verbatim.
pub fn parse_quality_verdicts(
    reply: &str,
    story_ids: &[StoryId],
) -> ParseOutcome<Vec<(LlmVerdict, String)>> {
    let result = parse_root(reply).and_then(|root| verdicts_from_value(&root, story_ids));
    ParseOutcome::new(reply, result)
}

fn verdicts_from_value(
    root: &Value,
    story_ids: &[StoryId],
) -> Result<Vec<(LlmVerdict, String)>, Vec<PathViolation>> {
    let mut violations = Vec::new();
    let (items, base): (Vec<&Value>, &str) = match root {
        Value::Array(a) => (a.iter().collect(), "$"),
        Value::Object(o) => match o.get("reports") {
            Some(Value::Array(a)) => (a.iter().collect(), "reports"),
            Some(other) => {
                return Err(vec![PathViolation::schema(
                    "reports",
                    format!("expected array, got {}", kind_of(other)),
                )])
            }
            None => (vec![root], "$"),
        },
        other => {
            return Err(vec![PathViolation::schema(
                "$",
                format!("expected object, got {}", kind_of(other)),
            )])
        }
    };
    let mut out = Vec::new();
    for (i, item) in items.iter().enumerate() {
        let path = if base == "$" && items.len() == 1 && root.is_object() {
            "$".to_string()
        } else {
            format!("{base}[{i}]")
        };
        let Some(obj) = as_object(item, &path, &mut violations) else {
            continue;
        };
        let id = story_id_at(obj, &path, &mut violations);
        let vpath = join_path(&path, "verdicts");
        let mut verdicts = BTreeMap::new();
        match obj.get("verdicts") {
            Some(Value::Object(map)) => {
                for (key, v) in map {
                    let lpath = format!("{vpath}.{key}");
                    match InvestLetter::parse(key) {
                        Some(letter) => {
                            if let Some(verdict) = verdict_from_value(v, &lpath, &mut violations) {
                                verdicts.insert(letter, verdict);
                            }
                        }
                        None => {
                            violations.push(PathViolation::schema(lpath, "not an INVEST letter"))
                        }
                    }
                }
            }
            _ => violations.push(PathViolation::schema(vpath, "missing")),
        }
        if let Some(id) = id {
            let verbatim = serde_json::to_string(item).unwrap_or_default();
            out.push((
                LlmVerdict {
                    story_id: id,
                    verdicts,
                },
                verbatim,
            ));
        }
    }
    violations.extend(coverage_check(
        out.iter().map(|(v, _)| &v.story_id),
        story_ids,
        base,
    ));
    if violations.is_empty() {
        Ok(out)
    } else {
        Err(violations)
    }
}

/// One line of the manager's final ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManagerRankEntry {
    pub story_id: StoryId,
    pub rank: Rank,
    pub score: Option<f64>,
    pub justification: String,
}

/// Parses `{"ranking": [{"story_id", "rank", "score", "justification"}]}`.
/// Ranks must form a valid average-rank assignment over exactly `story_ids`.
pub fn parse_manager_ranking(
    reply: &str,
    story_ids: &[StoryId],
) -> ParseOutcome<Vec<ManagerRankEntry>> {
    let result = parse_root(reply).and_then(|root| ranking_from_value(&root, story_ids));
    ParseOutcome::new(reply, result)
}

fn ranking_from_value(
    root: &Value,
    story_ids: &[StoryId],
) -> Result<Vec<ManagerRankEntry>, Vec<PathViolation>> {
    let mut violations = Vec::new();
    let Some(obj) = as_object(root, "$", &mut violations) else {
        return Err(violations);
    };
    let Some(items) = required_array(obj, "ranking", "$", &mut violations) else {
        return Err(violations);
    };
    let mut out = Vec::new();
    for (i, item) in items.iter().enumerate() {
        let path = format!("ranking[{i}]");
        let Some(eobj) = as_object(item, &path, &mut violations) else {
            continue;
        };
        let id = story_id_at(eobj, &path, &mut violations);
        let rank =
            number_at(eobj.get("rank"), &format!("{path}.rank"), &mut violations).and_then(|r| {
                if r <= num_rational::Rational64::from_integer(0) {
                    violations.push(PathViolation::new(
                        ViolationKind::ConstraintViolation,
                        format!("{path}.rank"),
                        "rank must be positive",
                    ));
                    None
                } else {
                    Some(Rank(r))
                }
            });
        let score = eobj
            .get("score")
            .and_then(serde_rational::from_json)
            .map(|r| crate::numeric::to_f64(&r));
        let justification = eobj
            .get("justification")
            .and_then(Value::as_str)
            .unwrap_or_default()
            .trim()
            .to_string();
        if let (Some(story_id), Some(rank)) = (id, rank) {
            out.push(ManagerRankEntry {
                story_id,
                rank,
                score,
                justification,
            });
        }
    }
    violations.extend(coverage_check(
        out.iter().map(|e| &e.story_id),
        story_ids,
        "ranking",
    ));
    if violations.is_empty() {
        let ranks: Vec<Rank> = out.iter().map(|e| e.rank).collect();
        if let Err(e) = check_average_ranks(&ranks) {
            violations.push(PathViolation::new(
                ViolationKind::ConstraintViolation,
                "ranking",
                e.to_string(),
            ));
        }
    }
    if violations.is_empty() {
        Ok(out)
    } else {
        Err(violations)
    }
}
