//! One-shot runs and metric comparison, shared by the `reqagent` binary and
//! its tests.
//!
//! Exit codes: 0 success, 1 I/O or internal failure, 2 configuration error
//! (including an unreadable description file), 3 model provider failure,
//! 4 unusable model output, 5 no metrics found for `compare`.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use reqagent_agents::{NullSink, Pipeline, PipelineError};
use reqagent_core::clock::{Clock, FrozenClock, SystemClock};
use reqagent_core::evaluation::{
    comparison_csv, comparison_json, comparison_table, MetricRow, RunMetrics,
};
use reqagent_core::export::backlog_csv;
use reqagent_core::{PrioritizationTechnique, ProjectDescription, RunConfig, SessionRecord};
use reqagent_service::registry::{build_gateway, load_recordings};
use reqagent_service::{ModelRegistry, ProviderMode};
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("model provider: {0}")]
    Gateway(String),
    #[error("model output: {0}")]
    Parse(String),
    #[error("no metrics: {0}")]
    MissingMetrics(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Gateway(_) => 3,
            CliError::Parse(_) => 4,
            CliError::MissingMetrics(_) => 5,
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Gateway { .. } => CliError::Gateway(e.to_string()),
            PipelineError::ParseFailure { .. } | PipelineError::InsufficientStories(_) => {
                CliError::Parse(e.to_string())
            }
            PipelineError::Precondition(_) | PipelineError::Prompt(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Io(other.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Reads a description file. A leading `# ` line is the title; the project
/// id is the file stem.
pub fn load_project(path: &Path) -> Result<ProjectDescription, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let stem = path
        .file_stem()
        .map_or("project".into(), |s| s.to_string_lossy().into_owned());
    let (title, body) = match text.split_once('\n') {
        Some((first, rest)) if first.starts_with("# ") => {
            (first[2..].trim().to_string(), rest.trim())
        }
        _ => (stem.clone(), text.trim()),
    };
    ProjectDescription::new(stem, title, body)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn parse_techniques(raw: &[String]) -> Result<Vec<PrioritizationTechnique>, CliError> {
    if raw.is_empty() || raw.iter().any(|t| t.eq_ignore_ascii_case("all")) {
        return Ok(PrioritizationTechnique::ALL.to_vec());
    }
    let mut out: Vec<PrioritizationTechnique> = Vec::new();
    for t in raw.iter().flat_map(|t| t.split(',')) {
        let technique = t
            .parse()
            .map_err(|e: reqagent_core::DomainError| CliError::Config(e.to_string()))?;
        if !out.contains(&technique) {
            out.push(technique);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub description: PathBuf,
    pub model: String,
    pub techniques: Vec<PrioritizationTechnique>,
    pub output_dir: PathBuf,
    pub mode: ProviderMode,
    pub recordings: Option<PathBuf>,
    pub frozen_clock: bool,
    pub openai_base_url: String,
    pub groq_base_url: String,
}

impl RunOptions {
    pub fn mock(
        description: impl Into<PathBuf>,
        model: &str,
        output_dir: impl Into<PathBuf>,
    ) -> Self {
        Self {
            description: description.into(),
            model: model.into(),
            techniques: PrioritizationTechnique::ALL.to_vec(),
            output_dir: output_dir.into(),
            mode: ProviderMode::Mock,
            recordings: None,
            frozen_clock: true,
            openai_base_url: reqagent_service::registry::DEFAULT_OPENAI_BASE_URL.into(),
            groq_base_url: reqagent_service::registry::DEFAULT_GROQ_BASE_URL.into(),
        }
    }
}

/// Runs the pipeline and writes the artifact set. The session is returned
/// even when the pipeline fails, so partial results can be inspected.
pub async fn run(opts: &RunOptions) -> Result<SessionRecord, CliError> {
    let project = load_project(&opts.description)?;
    let registry = ModelRegistry::new(opts.mode, &opts.openai_base_url, &opts.groq_base_url);
    let model = registry.resolve(&opts.model).map_err(CliError::Config)?;
    let config = RunConfig::new(model, opts.techniques.clone());
    config
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let recordings = match &opts.recordings {
        Some(path) => load_recordings(path).map_err(CliError::Config)?,
        None => Default::default(),
    };
    let clock: Arc<dyn Clock> = if opts.frozen_clock {
        Arc::new(FrozenClock::default())
    } else {
        Arc::new(SystemClock)
    };
    let mut pipeline = Pipeline::new(build_gateway(recordings), clock, Arc::new(NullSink));
    if let Some(embed) = registry.embed_model() {
        pipeline = pipeline.with_embed_model(embed.clone());
    }
    let id = format!("run-{}-{}", project.id, opts.model);
    let mut session = SessionRecord::new(id, project, config);
    pipeline.run(&mut session).await?;
    write_artifacts(&session, &opts.output_dir)?;
    Ok(session)
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn pretty(value: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("domain types serialize");
    s.push('\n');
    s
}

/// stories.json, quality.json, backlog_{technique}.csv, metrics.json,
/// transcript.ndjson and session.json.
pub fn write_artifacts(session: &SessionRecord, dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    write(
        &dir.join("stories.json"),
        &pretty(
            &json!({"project": session.project.id, "epics": session.epics, "stories": session.stories, "notes": session.parse_notes}),
        ),
    )?;
    write(&dir.join("quality.json"), &pretty(&session.quality))?;
    for backlog in &session.backlogs {
        let csv =
            backlog_csv(session, backlog.technique).map_err(|e| CliError::Io(e.to_string()))?;
        write(
            &dir.join(format!("backlog_{}.csv", backlog.technique.slug())),
            &csv,
        )?;
    }
    if let Some(metrics) = &session.metrics {
        write(&dir.join("metrics.json"), &pretty(metrics))?;
    }
    let mut transcript = String::new();
    for t in &session.transcripts {
        for e in &t.events {
            let line = json!({"technique": t.technique, "speaker": e.speaker, "phase": e.phase, "timestamp": e.timestamp, "content": e.content});
            transcript.push_str(&line.to_string());
            transcript.push('\n');
        }
    }
    write(&dir.join("transcript.ndjson"), &transcript)?;
    write(&dir.join("session.json"), &pretty(session))
}

/// Merges `metrics.json` from each run directory into one table.
pub fn compare(dirs: &[PathBuf], output_dir: &Path) -> Result<Vec<MetricRow>, CliError> {
    if dirs.is_empty() {
        return Err(CliError::MissingMetrics("no run directories given".into()));
    }
    let mut runs: Vec<RunMetrics> = Vec::new();
    for dir in dirs {
        let path = dir.join("metrics.json");
        let text = fs::read_to_string(&path)
            .map_err(|_| CliError::MissingMetrics(path.display().to_string()))?;
        runs.push(serde_json::from_str(&text).map_err(|e| io_err(&path, e))?);
    }
    let rows = comparison_table(&runs);
    fs::create_dir_all(output_dir).map_err(|e| io_err(output_dir, e))?;
    write(&output_dir.join("metrics.csv"), &comparison_csv(&rows))?;
    write(
        &output_dir.join("metrics.json"),
        &pretty(&comparison_json(&rows)),
    )?;
    Ok(rows)
}
