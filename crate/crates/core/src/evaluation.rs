//! Per-run comparison metrics: response time, word count, distinct epics and
//! stories, and story-to-project semantic similarity.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::domain::{
    normalize_label, EmbeddingSet, Phase, ProjectDescription, SessionRecord, StoryId, UserStory,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvaluationError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("zero vector")]
    ZeroVector,
    #[error("missing phase: {0}")]
    MissingPhase(String),
    #[error("embedding failed: {0}")]
    Embedding(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EvaluationError> {
    if a.dimension() != b.dimension() {
        return Err(EvaluationError::DimensionMismatch(
            a.dimension(),
            b.dimension(),
        ));
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 || !na.is_finite() || !nb.is_finite() {
        return Err(EvaluationError::ZeroVector);
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Synchronous text embedder.
pub trait Embedder {
    fn model_name(&self) -> &str;
    fn embed(&self, text: &str) -> Result<EmbeddingVector, EvaluationError>;
}

/// Deterministic hashed bag-of-words embedding, L2-normalized.
///
/// Tokens are lowercase alphanumeric runs hashed with FNV-1a into `dimension`
/// buckets. Text without any alphanumeric token falls back to its raw
/// whitespace-separated pieces so that non-empty input never embeds to zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashedBagOfWords {
    pub dimension: usize,
}

impl Default for HashedBagOfWords {
    fn default() -> Self {
        Self { dimension: 64 }
    }
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

pub fn tokenize(text: &str) -> Vec<String> {
    let tokens: Vec<String> = text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect();
    if tokens.is_empty() {
        text.split_whitespace().map(str::to_string).collect()
    } else {
        tokens
    }
}

impl HashedBagOfWords {
    pub fn vector(&self, text: &str) -> EmbeddingVector {
        let mut values = vec![0.0; self.dimension.max(1)];
        let dim = values.len() as u64;
        for token in tokenize(text) {
            values[(fnv1a(token.as_bytes()) % dim) as usize] += 1.0;
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            values.iter_mut().for_each(|v| *v /= norm);
        }
        EmbeddingVector::new(values)
    }
}

impl Embedder for HashedBagOfWords {
    fn model_name(&self) -> &str {
        "hashed-bow"
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EvaluationError> {
        Ok(self.vector(text))
    }
}

/// Embeds the project once and every rendered story description.
pub fn embed_session(
    stories: &[UserStory],
    project: &ProjectDescription,
    embedder: &impl Embedder,
) -> Result<EmbeddingSet, EvaluationError> {
    let project_vec = embedder.embed(&project.body)?;
    let mut out = BTreeMap::new();
    for story in stories {
        out.insert(story.id.clone(), embedder.embed(&story.description())?);
    }
    Ok(EmbeddingSet {
        model_name: embedder.model_name().to_string(),
        project: project_vec,
        stories: out,
    })
}

pub fn similarities(set: &EmbeddingSet) -> Result<BTreeMap<StoryId, f64>, EvaluationError> {
    set.stories
        .iter()
        .map(|(id, v)| cosine(v, &set.project).map(|c| (id.clone(), c)))
        .collect()
}

pub fn story_similarity(
    stories: &[UserStory],
    project: &ProjectDescription,
    embedder: &impl Embedder,
) -> Result<BTreeMap<StoryId, f64>, EvaluationError> {
    similarities(&embed_session(stories, project, embedder)?)
}

pub fn count_words(text: &str) -> usize {
    text.split_whitespace().count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub project: String,
    pub model_name: String,
    /// Seconds, summed over generation-phase exchanges.
    pub api_response_time: f64,
    pub word_count: usize,
    pub distinct_epics: usize,
    pub distinct_stories: usize,
    pub story_similarities: BTreeMap<StoryId, f64>,
    pub mean_similarity: f64,
}

impl RunMetrics {
    pub fn recomputed_mean(&self) -> f64 {
        mean_of(&self.story_similarities)
    }
}

fn mean_of(values: &BTreeMap<StoryId, f64>) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.values().sum::<f64>() / values.len() as f64
    }
}

/// Metrics for the generation run of `model_name` held in `session`.
pub fn compute_run_metrics(
    session: &SessionRecord,
    model_name: &str,
) -> Result<RunMetrics, EvaluationError> {
    let generation: Vec<_> = session
        .exchanges
        .iter()
        .filter(|e| e.phase == Phase::Generation && e.model_name == model_name)
        .collect();
    if generation.is_empty() || session.stories.is_empty() {
        return Err(EvaluationError::MissingPhase(format!(
            "no generation run for {model_name}"
        )));
    }
    let embeddings = session
        .embeddings
        .as_ref()
        .ok_or_else(|| EvaluationError::MissingPhase("no embeddings recorded".into()))?;
    let api_response_time = generation
        .iter()
        .map(|e| e.exchange.latency.as_secs_f64())
        .sum();
    let word_count = generation
        .iter()
        .map(|e| count_words(&e.exchange.response_text))
        .sum();
    let distinct_epics = session
        .epics
        .iter()
        .chain(session.stories.iter().map(|s| &s.epic))
        .map(|e| normalize_label(e))
        .collect::<BTreeSet<_>>()
        .len();
    let distinct_stories = session
        .stories
        .iter()
        .map(|s| normalize_label(&s.title))
        .collect::<BTreeSet<_>>()
        .len();
    let story_similarities = similarities(embeddings)?;
    let mean_similarity = mean_of(&story_similarities);
    Ok(RunMetrics {
        project: session.project.id.clone(),
        model_name: model_name.to_string(),
        api_response_time,
        word_count,
        distinct_epics,
        distinct_stories,
        story_similarities,
        mean_similarity,
    })
}

pub const TABLE_METRICS: [&str; 4] = [
    "distinct_epics",
    "distinct_stories",
    "api_response_time",
    "mean_similarity",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub project: String,
    pub model: String,
    pub metric: String,
    pub value: f64,
}

impl MetricRow {
    /// Counts as integers, seconds and similarity with two decimals.
    pub fn formatted_value(&self) -> String {
        match self.metric.as_str() {
            "distinct_epics" | "distinct_stories" | "word_count" => {
                format!("{}", self.value.round() as i64)
            }
            _ => format!("{:.2}", self.value),
        }
    }
}

pub fn comparison_table(runs: &[RunMetrics]) -> Vec<MetricRow> {
    let mut rows = Vec::with_capacity(runs.len() * TABLE_METRICS.len());
    for run in runs {
        for metric in TABLE_METRICS {
            let value = match metric {
                "distinct_epics" => run.distinct_epics as f64,
                "distinct_stories" => run.distinct_stories as f64,
                "api_response_time" => run.api_response_time,
                _ => run.mean_similarity,
            };
            rows.push(MetricRow {
                project: run.project.clone(),
                model: run.model_name.clone(),
                metric: metric.to_string(),
                value,
            });
        }
    }
    rows
}

pub fn comparison_json(rows: &[MetricRow]) -> serde_json::Value {
    json!({ "rows": rows })
}

pub fn comparison_csv(rows: &[MetricRow]) -> String {
    let mut w = crate::export::CsvWriter::new();
    w.record(["project", "model", "metric", "value"]);
    for row in rows {
        w.record([
            row.project.as_str(),
            row.model.as_str(),
            row.metric.as_str(),
            &row.formatted_value(),
        ]);
    }
    w.finish()
}
