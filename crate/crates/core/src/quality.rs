//! Deterministic INVEST and ISO/IEC/IEEE 29148 lint, combined with the QA
//! agent's verdict.
//!
//! The frameworks define attributes, not rules, so each attribute is
//! operationalised by a keyword or threshold check from [`QualityRules`].
//! Thresholds and keyword lists can be overridden from a JSON file; any key
//! left out keeps its default.
//!
//! | Attribute | Passes when |
//! |---|---|
//! | I | description names no other story id and no dependency phrase |
//! | N | description contains no implementation-mandating term |
//! | V | goal ("so that") clause is non-empty |
//! | E | role, activity, goal present and activity ≤ 30 words |
//! | S | description ≤ 50 words and ≤ 7 acceptance criteria |
//! | T | at least one acceptance criterion uses a verifiable verb |
//! | unambiguous | no hedge phrase in description or criteria |
//! | singular | activity has at most one "and" |
//! | feasible_structure | title, role, activity, goal all filled |
//! | verifiable | same as T |
//! | complete | epic label present |

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{StoryId, UserStory};

#[derive(Debug, Error)]
pub enum QualityError {
    #[error("verdict for {verdict} cannot be combined with lint report for {lint}")]
    IdMismatch { lint: StoryId, verdict: StoryId },
    #[error("reading quality rules: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing quality rules: {0}")]
    Config(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum InvestLetter {
    I,
    N,
    V,
    E,
    S,
    T,
}

impl InvestLetter {
    pub const ALL: [InvestLetter; 6] = [
        InvestLetter::I,
        InvestLetter::N,
        InvestLetter::V,
        InvestLetter::E,
        InvestLetter::S,
        InvestLetter::T,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InvestLetter::I => "Independent",
            InvestLetter::N => "Negotiable",
            InvestLetter::V => "Valuable",
            InvestLetter::E => "Estimable",
            InvestLetter::S => "Small",
            InvestLetter::T => "Testable",
        }
    }

    /// Accepts the letter or the full attribute name, any case.
    pub fn parse(raw: &str) -> Option<Self> {
        let key = raw.trim().to_ascii_lowercase();
        InvestLetter::ALL.into_iter().find(|l| {
            key == format!("{l:?}").to_ascii_lowercase() || key == l.name().to_ascii_lowercase()
        })
    }
}

impl fmt::Display for InvestLetter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IsoAttribute {
    Unambiguous,
    Singular,
    FeasibleStructure,
    Verifiable,
    Complete,
}

impl IsoAttribute {
    pub const ALL: [IsoAttribute; 5] = [
        IsoAttribute::Unambiguous,
        IsoAttribute::Singular,
        IsoAttribute::FeasibleStructure,
        IsoAttribute::Verifiable,
        IsoAttribute::Complete,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub pass: bool,
    pub reason: String,
}

impl Verdict {
    fn pass(reason: impl Into<String>) -> Self {
        Self {
            pass: true,
            reason: reason.into(),
        }
    }

    fn fail(reason: impl Into<String>) -> Self {
        Self {
            pass: false,
            reason: reason.into(),
        }
    }

    fn check(ok: bool, pass_reason: &str, fail_reason: impl Into<String>) -> Self {
        if ok {
            Self::pass(pass_reason)
        } else {
            Self::fail(fail_reason)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualityReport {
    pub story_id: StoryId,
    pub invest: BTreeMap<InvestLetter, Verdict>,
    pub iso29148: BTreeMap<IsoAttribute, Verdict>,
    pub llm_verdict: Option<String>,
    pub overall_pass: bool,
}

impl QualityReport {
    fn recompute_overall(&mut self) {
        self.overall_pass =
            self.invest.values().all(|v| v.pass) && self.iso29148.values().all(|v| v.pass);
    }

    pub fn failed_letters(&self) -> Vec<InvestLetter> {
        self.invest
            .iter()
            .filter(|(_, v)| !v.pass)
            .map(|(l, _)| *l)
            .collect()
    }
}

/// The QA agent's per-story INVEST verdicts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmVerdict {
    pub story_id: StoryId,
    pub verdicts: BTreeMap<InvestLetter, Verdict>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct QualityRules {
    pub max_activity_words: usize,
    pub max_description_words: usize,
    pub max_acceptance_criteria: usize,
    pub max_activity_conjunctions: usize,
    pub dependency_phrases: Vec<String>,
    pub implementation_terms: Vec<String>,
    pub verifiable_verbs: Vec<String>,
    pub hedge_phrases: Vec<String>,
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

impl Default for QualityRules {
    fn default() -> Self {
        Self {
            max_activity_words: 30,
            max_description_words: 50,
            max_acceptance_criteria: 7,
            max_activity_conjunctions: 1,
            dependency_phrases: strings(&[
                "depends on",
                "dependent on",
                "after story",
                "blocked by",
            ]),
            implementation_terms: strings(&[
                "must use",
                "must be built with",
                "must be implemented in",
                "postgresql",
                "postgres",
                "mysql",
                "mongodb",
                "sqlite",
                "redis",
                "react",
                "angular",
                "vue",
                "django",
                "flask",
                "fastapi",
                "starlette",
                "spring boot",
                "kubernetes",
                "docker",
                "aws",
                "azure",
                "gcp",
                "pinecone",
                "qdrant",
                "chromadb",
                "jquery",
                "php",
            ]),
            verifiable_verbs: strings(&[
                "display",
                "show",
                "return",
                "store",
                "save",
                "validate",
                "allow",
                "reject",
                "send",
                "receive",
                "generate",
                "create",
                "update",
                "delete",
                "remove",
                "list",
                "search",
                "filter",
                "sort",
                "export",
                "import",
                "upload",
                "download",
                "notify",
                "respond",
                "redirect",
                "calculate",
                "rank",
                "parse",
                "translate",
                "extract",
                "load",
                "accept",
                "deny",
                "prevent",
                "block",
                "record",
                "retrieve",
                "compare",
                "answer",
                "cite",
                "highlight",
                "persist",
                "log",
                "appear",
                "contain",
                "include",
                "provide",
                "open",
                "complete",
                "scrape",
                "embed",
                "deploy",
                "index",
                "link",
                "match",
                "measure",
                "present",
                "reply",
                "require",
                "restrict",
                "select",
                "submit",
                "summarize",
                "summarise",
                "track",
                // irregular participles the prefix match would miss
                "sent",
                "shown",
                "written",
                "kept",
                "given",
                "hidden",
                "chosen",
                "built",
            ]),
            hedge_phrases: strings(&[
                "etc",
                "and/or",
                "as appropriate",
                "if possible",
                "as needed",
                "and so on",
                "tbd",
                "user-friendly",
                "as required",
                "where applicable",
            ]),
        }
    }
}

impl QualityRules {
    pub fn from_json(text: &str) -> Result<Self, QualityError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, QualityError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Lowercase, every non-alphanumeric run replaced by one space, padded with
/// spaces so phrases can be matched on word boundaries.
fn padded_words(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    out.push(' ');
    let mut last_space = true;
    for c in text.chars().flat_map(char::to_lowercase) {
        if c.is_alphanumeric() {
            out.push(c);
            last_space = false;
        } else if !last_space {
            out.push(' ');
            last_space = true;
        }
    }
    if !last_space {
        out.push(' ');
    }
    out
}

fn find_phrases<'a>(text: &str, phrases: &'a [String]) -> Vec<&'a str> {
    let haystack = padded_words(text);
    phrases
        .iter()
        .filter(|p| {
            let needle = padded_words(p);
            !needle.trim().is_empty() && haystack.contains(&needle)
        })
        .map(String::as_str)
        .collect()
}

fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

fn has_verifiable_verb(criterion: &str, verbs: &[String]) -> bool {
    let words = padded_words(criterion);
    words.split_whitespace().any(|w| {
        verbs
            .iter()
            .any(|v| w.starts_with(v.to_lowercase().as_str()))
    })
}

/// Rule-table evaluation of one story. `all_stories` supplies the ids that
/// count as cross-story references for the Independent check.
pub fn lint_story(
    story: &UserStory,
    all_stories: &[UserStory],
    rules: &QualityRules,
) -> QualityReport {
    let description = story.description();
    let filled = |s: &str| !s.trim().is_empty();

    let mut refs: Vec<&str> = all_stories
        .iter()
        .filter(|o| o.id != story.id)
        .map(|o| o.id.as_str())
        .filter(|id| description.contains(id))
        .collect();
    refs.extend(find_phrases(&description, &rules.dependency_phrases));
    let independent = Verdict::check(
        refs.is_empty(),
        "no references to other stories",
        format!("references other work: {}", refs.join(", ")),
    );

    let mandated = find_phrases(&description, &rules.implementation_terms);
    let negotiable = Verdict::check(
        mandated.is_empty(),
        "no implementation mandated",
        format!("mandates implementation: {}", mandated.join(", ")),
    );

    let valuable = Verdict::check(filled(&story.goal), "states a goal", "no so-that clause");

    let activity_words = word_count(&story.activity);
    let estimable = if !(filled(&story.role) && filled(&story.activity) && filled(&story.goal)) {
        Verdict::fail("role, activity and goal must all be stated")
    } else if activity_words > rules.max_activity_words {
        Verdict::fail(format!(
            "activity has {activity_words} words (max {})",
            rules.max_activity_words
        ))
    } else {
        Verdict::pass("template complete and activity concise")
    };

    let description_words = word_count(&description);
    let criteria = story.acceptance_criteria.len();
    let small = if description_words > rules.max_description_words {
        Verdict::fail(format!(
            "description has {description_words} words (max {})",
            rules.max_description_words
        ))
    } else if criteria > rules.max_acceptance_criteria {
        Verdict::fail(format!(
            "{criteria} acceptance criteria (max {})",
            rules.max_acceptance_criteria
        ))
    } else {
        Verdict::pass("fits the size limits")
    };

    let unverifiable: Vec<usize> = story
        .acceptance_criteria
        .iter()
        .enumerate()
        .filter(|(_, c)| !has_verifiable_verb(c, &rules.verifiable_verbs))
        .map(|(i, _)| i + 1)
        .collect();
    let testable = if criteria == 0 {
        Verdict::fail("no acceptance criteria")
    } else if unverifiable.len() == criteria {
        Verdict::fail("no acceptance criterion states a verifiable outcome")
    } else if unverifiable.is_empty() {
        Verdict::pass("every acceptance criterion is verifiable")
    } else {
        Verdict::pass(format!(
            "verifiable criteria present; criteria {:?} lack a verifiable verb",
            unverifiable
        ))
    };

    let mut all_text = description.clone();
    for c in &story.acceptance_criteria {
        all_text.push(' ');
        all_text.push_str(c);
    }
    let hedges = find_phrases(&all_text, &rules.hedge_phrases);
    let unambiguous = Verdict::check(
        hedges.is_empty(),
        "no hedge words",
        format!("ambiguous wording: {}", hedges.join(", ")),
    );

    let ands = padded_words(&story.activity).matches(" and ").count();
    let singular = Verdict::check(
        ands <= rules.max_activity_conjunctions,
        "single capability",
        format!("activity joins {} capabilities with 'and'", ands + 1),
    );

    let empty_slots: Vec<&str> = [
        ("title", &story.title),
        ("role", &story.role),
        ("activity", &story.activity),
        ("goal", &story.goal),
    ]
    .into_iter()
    .filter(|(_, v)| !filled(v))
    .map(|(k, _)| k)
    .collect();
    let feasible = Verdict::check(
        empty_slots.is_empty(),
        "all template slots filled",
        format!("empty slots: {}", empty_slots.join(", ")),
    );

    let complete = Verdict::check(filled(&story.epic), "assigned to an epic", "no epic label");

    let invest = BTreeMap::from([
        (InvestLetter::I, independent),
        (InvestLetter::N, negotiable),
        (InvestLetter::V, valuable),
        (InvestLetter::E, estimable),
        (InvestLetter::S, small),
        (InvestLetter::T, testable.clone()),
    ]);
    let iso29148 = BTreeMap::from([
        (IsoAttribute::Unambiguous, unambiguous),
        (IsoAttribute::Singular, singular),
        (IsoAttribute::FeasibleStructure, feasible),
        (IsoAttribute::Verifiable, testable),
        (IsoAttribute::Complete, complete),
    ]);
    let mut report = QualityReport {
        story_id: story.id.clone(),
        invest,
        iso29148,
        llm_verdict: None,
        overall_pass: false,
    };
    report.recompute_overall();
    report
}

/// Lint verdicts stay authoritative; a letter the QA agent fails is failed in
/// the combined report. The agent's verdict is attached verbatim.
pub fn combine(
    lint: &QualityReport,
    llm: &LlmVerdict,
    verbatim: &str,
) -> Result<QualityReport, QualityError> {
    if lint.story_id != llm.story_id {
        return Err(QualityError::IdMismatch {
            lint: lint.story_id.clone(),
            verdict: llm.story_id.clone(),
        });
    }
    let mut out = lint.clone();
    for (letter, agent) in &llm.verdicts {
        if agent.pass {
            continue;
        }
        let entry = out
            .invest
            .entry(*letter)
            .or_insert_with(|| Verdict::pass(""));
        entry.reason = if entry.pass {
            format!("qa agent: {}", agent.reason)
        } else {
            format!("{}; qa agent: {}", entry.reason, agent.reason)
        };
        entry.pass = false;
    }
    out.llm_verdict = Some(verbatim.to_string());
    out.recompute_overall();
    Ok(out)
}
