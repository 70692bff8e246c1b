//! Shared vocabulary: projects, stories, agents, techniques, ranks and sessions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use chrono::{DateTime, Utc};
use num_rational::Rational64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::evaluation::{EmbeddingVector, RunMetrics};
use crate::numeric::{format_rational, parse_rational, serde_rational};
use crate::prioritization::ScoreSheet;
use crate::quality::QualityReport;
use crate::DomainError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectDescription {
    pub id: String,
    pub title: String,
    pub body: String,
}

impl ProjectDescription {
    pub fn new(
        id: impl Into<String>,
        title: impl Into<String>,
        body: impl Into<String>,
    ) -> Result<Self, DomainError> {
        let project = Self {
            id: id.into(),
            title: title.into(),
            body: body.into(),
        };
        project.validate()?;
        Ok(project)
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        if self.body.trim().is_empty() {
            return Err(DomainError::EmptyProjectBody);
        }
        Ok(())
    }
}

/// Zero-padded ordinal within a session, e.g. `US-001`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StoryId(pub String);

impl StoryId {
    pub fn ordinal(n: usize) -> Self {
        StoryId(format!("US-{n:03}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for StoryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for StoryId {
    fn from(s: &str) -> Self {
        StoryId(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoryStatus {
    Draft,
    QualityChecked,
    Prioritized,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserStory {
    pub id: StoryId,
    pub epic: String,
    pub title: String,
    pub role: String,
    pub activity: String,
    pub goal: String,
    pub acceptance_criteria: Vec<String>,
    pub status: StoryStatus,
}

impl UserStory {
    /// The rendered "As a …, I want …, so that …." sentence.
    pub fn description(&self) -> String {
        format!(
            "As a {}, I want {}, so that {}.",
            self.role.trim(),
            self.activity.trim(),
            self.goal.trim().trim_end_matches('.')
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub reason: String,
}

impl Violation {
    pub fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.reason)
    }
}

pub fn validate_story(story: &UserStory) -> Vec<Violation> {
    let mut out = Vec::new();
    for (field, value) in [
        ("title", &story.title),
        ("role", &story.role),
        ("activity", &story.activity),
        ("goal", &story.goal),
    ] {
        if value.trim().is_empty() {
            out.push(Violation::new(field, "missing"));
        }
    }
    if story.acceptance_criteria.is_empty() && story.status != StoryStatus::Draft {
        out.push(Violation::new("acceptance_criteria", "required"));
    }
    out
}

/// Trims, collapses internal whitespace runs and case-folds.
pub fn normalize_label(raw: &str) -> String {
    raw.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentRole {
    ProductOwner,
    QualityAssurance,
    SeniorDeveloper,
    Manager,
}

impl AgentRole {
    pub const ALL: [AgentRole; 4] = [
        AgentRole::ProductOwner,
        AgentRole::QualityAssurance,
        AgentRole::SeniorDeveloper,
        AgentRole::Manager,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            AgentRole::ProductOwner => "product_owner",
            AgentRole::QualityAssurance => "quality_assurance",
            AgentRole::SeniorDeveloper => "senior_developer",
            AgentRole::Manager => "manager",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            AgentRole::ProductOwner => "Product Owner",
            AgentRole::QualityAssurance => "Quality Assurance",
            AgentRole::SeniorDeveloper => "Senior Developer",
            AgentRole::Manager => "Manager",
        }
    }
}

impl fmt::Display for AgentRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for AgentRole {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "productowner" | "po" => Ok(AgentRole::ProductOwner),
            "qualityassurance" | "qa" => Ok(AgentRole::QualityAssurance),
            "seniordeveloper" | "srdeveloper" | "developer" | "dev" => {
                Ok(AgentRole::SeniorDeveloper)
            }
            "manager" | "llmmanager" => Ok(AgentRole::Manager),
            _ => Err(DomainError::UnknownAgentRole(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PrioritizationTechnique {
    HundredDollar,
    #[serde(rename = "WSJF")]
    Wsjf,
    #[serde(rename = "AHP")]
    Ahp,
}

impl PrioritizationTechnique {
    pub const ALL: [PrioritizationTechnique; 3] = [
        PrioritizationTechnique::HundredDollar,
        PrioritizationTechnique::Wsjf,
        PrioritizationTechnique::Ahp,
    ];

    /// Short name used in file names and query strings.
    pub fn slug(self) -> &'static str {
        match self {
            PrioritizationTechnique::HundredDollar => "100dollar",
            PrioritizationTechnique::Wsjf => "wsjf",
            PrioritizationTechnique::Ahp => "ahp",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PrioritizationTechnique::HundredDollar => "HundredDollar",
            PrioritizationTechnique::Wsjf => "WSJF",
            PrioritizationTechnique::Ahp => "AHP",
        }
    }
}

impl fmt::Display for PrioritizationTechnique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PrioritizationTechnique {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "100dollar" | "100dollars" | "hundreddollar" | "100" | "dollar" => {
                Ok(PrioritizationTechnique::HundredDollar)
            }
            "wsjf" => Ok(PrioritizationTechnique::Wsjf),
            "ahp" => Ok(PrioritizationTechnique::Ahp),
            _ => Err(DomainError::UnknownTechnique(s.to_string())),
        }
    }
}

/// A fractional (average-rank) position. Ties share the mean of the positions
/// they span, so ranks are always multiples of one half.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rank(pub Rational64);

impl Rank {
    pub fn from_integer(n: i64) -> Self {
        Rank(Rational64::from_integer(n))
    }

    pub fn value(&self) -> Rational64 {
        self.0
    }
}

impl fmt::Display for Rank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_rational(&self.0))
    }
}

impl FromStr for Rank {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_rational(s)
            .map(Rank)
            .ok_or_else(|| DomainError::InvalidRank(s.to_string()))
    }
}

impl Serialize for Rank {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serde_rational::serialize(&self.0, serializer)
    }
}

impl<'de> Deserialize<'de> for Rank {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        serde_rational::deserialize(deserializer).map(Rank)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub story_id: StoryId,
    pub rank: Rank,
    pub score: f64,
    pub justification: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedBacklog {
    pub technique: PrioritizationTechnique,
    pub entries: Vec<RankedEntry>,
    /// True when the manager reply was unusable and the deterministic merge was used.
    #[serde(default)]
    pub merged_by_fallback: bool,
}

impl RankedBacklog {
    /// Sorts entries by ascending rank then story id and checks the rank-sum invariant.
    pub fn new(
        technique: PrioritizationTechnique,
        mut entries: Vec<RankedEntry>,
    ) -> Result<Self, DomainError> {
        entries.sort_by(|a, b| {
            a.rank
                .cmp(&b.rank)
                .then_with(|| a.story_id.cmp(&b.story_id))
        });
        let ranks: Vec<Rank> = entries.iter().map(|e| e.rank).collect();
        check_average_ranks(&ranks)?;
        Ok(Self {
            technique,
            entries,
            merged_by_fallback: false,
        })
    }

    pub fn rank_of(&self, id: &StoryId) -> Option<Rank> {
        self.entries
            .iter()
            .find(|e| &e.story_id == id)
            .map(|e| e.rank)
    }
}

/// Checks that `ranks` is exactly what average-rank tie handling would produce
/// for some ordering: every tie group of size k starting at position p carries
/// rank p + (k - 1)/2. This implies the n(n+1)/2 rank sum.
pub fn check_average_ranks(ranks: &[Rank]) -> Result<(), DomainError> {
    let mut sorted: Vec<Rational64> = ranks.iter().map(|r| r.0).collect();
    sorted.sort();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let expected = Rational64::new((i + 1 + j + 1) as i64, 2);
        if sorted[i] != expected {
            return Err(DomainError::InvalidRankAssignment(format!(
                "rank {} at positions {}..={} should be {}",
                format_rational(&sorted[i]),
                i + 1,
                j + 1,
                format_rational(&expected)
            )));
        }
        i = j + 1;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Satisfaction {
    Satisfactory,
    Good,
    Excellent,
    Poor,
}

impl FromStr for Satisfaction {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "satisfactory" => Ok(Satisfaction::Satisfactory),
            "good" => Ok(Satisfaction::Good),
            "excellent" => Ok(Satisfaction::Excellent),
            "poor" => Ok(Satisfaction::Poor),
            _ => Err(DomainError::InvalidEnum {
                field: "satisfaction",
                value: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackEntry {
    pub practitioner_role: String,
    pub experience: String,
    pub satisfaction: Satisfaction,
    #[serde(default)]
    pub comment: String,
    #[serde(default)]
    pub suggestion: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredFeedback {
    pub id: String,
    #[serde(flatten)]
    pub entry: FeedbackEntry,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Generation,
    Quality,
    Prioritization,
    Merge,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Generation => "generation",
            Phase::Quality => "quality",
            Phase::Prioritization => "prioritization",
            Phase::Merge => "merge",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeetingEvent {
    pub speaker: AgentRole,
    pub phase: Phase,
    pub content: String,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeetingTranscript {
    /// `None` for the generation/quality transcript, otherwise the meeting's technique.
    pub technique: Option<PrioritizationTechnique>,
    pub events: Vec<MeetingEvent>,
}

impl MeetingTranscript {
    pub fn new(technique: Option<PrioritizationTechnique>) -> Self {
        Self {
            technique,
            events: Vec::new(),
        }
    }

    /// Appends an event, nudging its timestamp forward by a microsecond when the
    /// clock did not advance so the transcript stays strictly ordered.
    pub fn push(&mut self, mut event: MeetingEvent) {
        if let Some(last) = self.events.last() {
            if event.timestamp <= last.timestamp {
                event.timestamp = last.timestamp + chrono::Duration::microseconds(1);
            }
        }
        self.events.push(event);
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        for pair in self.events.windows(2) {
            if pair[1].timestamp <= pair[0].timestamp {
                return Err(DomainError::TranscriptOrder);
            }
        }
        if let Some(first) = self
            .events
            .iter()
            .find(|e| e.phase == Phase::Prioritization)
        {
            if first.speaker != AgentRole::ProductOwner {
                return Err(DomainError::MeetingNotOpenedByProductOwner);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageRole {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: MessageRole,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: MessageRole::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: MessageRole::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: MessageRole::Assistant,
            content: content.into(),
        }
    }
}

/// One completed request/response round trip with a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatExchange {
    pub request: Vec<ChatMessage>,
    pub response_text: String,
    #[serde(with = "duration_secs")]
    pub latency: Duration,
    pub word_count: usize,
    pub attempt_count: u32,
}

pub mod duration_secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let secs = f64::deserialize(d)?;
        Duration::try_from_secs_f64(secs).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    OpenaiCompatible,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub provider: ProviderKind,
    pub base_url: String,
    pub model_name: String,
    /// Name of the environment variable holding the API key. Never the key itself.
    pub api_key_env: String,
    pub temperature: f64,
    #[serde(with = "duration_secs")]
    pub timeout: Duration,
    pub max_retries: u32,
}

impl ModelConfig {
    pub fn mock(model_name: impl Into<String>) -> Self {
        Self {
            provider: ProviderKind::Mock,
            base_url: "mock://local".into(),
            model_name: model_name.into(),
            api_key_env: String::new(),
            temperature: 0.2,
            timeout: Duration::from_secs(60),
            max_retries: 2,
        }
    }

    pub fn openai_compatible(
        base_url: impl Into<String>,
        model_name: impl Into<String>,
        api_key_env: impl Into<String>,
    ) -> Self {
        Self {
            provider: ProviderKind::OpenaiCompatible,
            base_url: base_url.into(),
            model_name: model_name.into(),
            api_key_env: api_key_env.into(),
            temperature: 0.2,
            timeout: Duration::from_secs(120),
            max_retries: 2,
        }
    }

    pub fn with_temperature(&self, temperature: f64) -> Self {
        Self {
            temperature,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        if self.timeout.is_zero() {
            return Err(DomainError::InvalidModelConfig(
                "timeout must be positive".into(),
            ));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(DomainError::InvalidModelConfig(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if self.model_name.trim().is_empty() {
            return Err(DomainError::InvalidModelConfig(
                "model_name is empty".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelConfig,
    /// Optional per-agent model overrides; agents not listed use `model`.
    #[serde(default)]
    pub agent_models: BTreeMap<AgentRole, ModelConfig>,
    pub techniques: Vec<PrioritizationTechnique>,
}

impl RunConfig {
    pub fn new(model: ModelConfig, techniques: Vec<PrioritizationTechnique>) -> Self {
        Self {
            model,
            agent_models: BTreeMap::new(),
            techniques,
        }
    }

    pub fn model_for(&self, role: AgentRole) -> &ModelConfig {
        self.agent_models.get(&role).unwrap_or(&self.model)
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        if self.techniques.is_empty() {
            return Err(DomainError::NoTechniques);
        }
        let unique: BTreeSet<_> = self.techniques.iter().collect();
        if unique.len() != self.techniques.len() {
            return Err(DomainError::DuplicateTechnique);
        }
        self.model.validate()?;
        for model in self.agent_models.values() {
            model.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExchangeRecord {
    pub phase: Phase,
    pub agent: AgentRole,
    pub technique: Option<PrioritizationTechnique>,
    pub model_name: String,
    pub exchange: ChatExchange,
}

/// Embeddings of the project body and each rendered story description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSet {
    pub model_name: String,
    pub project: EmbeddingVector,
    pub stories: BTreeMap<StoryId, EmbeddingVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub id: String,
    pub project: ProjectDescription,
    pub config: RunConfig,
    #[serde(default)]
    pub epics: Vec<String>,
    #[serde(default)]
    pub stories: Vec<UserStory>,
    #[serde(default)]
    pub parse_notes: Vec<String>,
    #[serde(default)]
    pub quality: Vec<QualityReport>,
    #[serde(default)]
    pub transcripts: Vec<MeetingTranscript>,
    #[serde(default)]
    pub score_sheets: Vec<ScoreSheet>,
    #[serde(default)]
    pub backlogs: Vec<RankedBacklog>,
    #[serde(default)]
    pub exchanges: Vec<ExchangeRecord>,
    #[serde(default)]
    pub embeddings: Option<EmbeddingSet>,
    #[serde(default)]
    pub metrics: Option<RunMetrics>,
    #[serde(default)]
    pub feedback: Vec<StoredFeedback>,
}

impl SessionRecord {
    pub fn new(id: impl Into<String>, project: ProjectDescription, config: RunConfig) -> Self {
        Self {
            id: id.into(),
            project,
            config,
            epics: Vec::new(),
            stories: Vec::new(),
            parse_notes: Vec::new(),
            quality: Vec::new(),
            transcripts: Vec::new(),
            score_sheets: Vec::new(),
            backlogs: Vec::new(),
            exchanges: Vec::new(),
            embeddings: None,
            metrics: None,
            feedback: Vec::new(),
        }
    }

    pub fn story(&self, id: &StoryId) -> Option<&UserStory> {
        self.stories.iter().find(|s| &s.id == id)
    }

    pub fn backlog(&self, technique: PrioritizationTechnique) -> Option<&RankedBacklog> {
        self.backlogs.iter().find(|b| b.technique == technique)
    }

    /// Every story id referenced by reports, sheets, backlogs or embeddings must
    /// resolve to a story in `stories`.
    pub fn check_references(&self) -> Result<(), DomainError> {
        let known: BTreeSet<&StoryId> = self.stories.iter().map(|s| &s.id).collect();
        let mut referenced: Vec<&StoryId> = Vec::new();
        referenced.extend(self.quality.iter().map(|q| &q.story_id));
        for sheet in &self.score_sheets {
            referenced.extend(sheet.entries.keys());
        }
        for backlog in &self.backlogs {
            referenced.extend(backlog.entries.iter().map(|e| &e.story_id));
        }
        if let Some(set) = &self.embeddings {
            referenced.extend(set.stories.keys());
        }
        if let Some(m) = &self.metrics {
            referenced.extend(m.story_similarities.keys());
        }
        match referenced.into_iter().find(|id| !known.contains(id)) {
            Some(id) => Err(DomainError::DanglingStoryId(id.clone())),
            None => Ok(()),
        }
    }
}
