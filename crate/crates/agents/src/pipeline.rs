//! The three-phase run: generation, quality assessment and one prioritization
//! meeting per technique, followed by the similarity metrics.

use std::sync::Arc;

use reqagent_core::aggregation::{merge_borda, AggregationError, RankingVector};
use reqagent_core::clock::Clock;
use reqagent_core::evaluation::{compute_run_metrics, EvaluationError};
use reqagent_core::parser::{
    parse_generation, parse_manager_ranking, parse_quality_verdicts, parse_score_sheet,
    score_sheet_payload, stories_json, ParseOutcome,
};
use reqagent_core::prioritization::{
    technique_ranking, technique_scores, PrioritizationError, ScoreSheet,
};
use reqagent_core::quality::{combine, lint_story, QualityRules};
use reqagent_core::{
    AgentRole, ChatMessage, EmbeddingSet, ExchangeRecord, MeetingEvent, MeetingTranscript,
    ModelConfig, Phase, PrioritizationTechnique, RankedBacklog, RankedEntry, SessionRecord,
    StoryId, StoryStatus,
};
use reqagent_gateway::{Gateway, GatewayError};
use serde_json::{json, Value};
use thiserror::Error;

use crate::events::{EventKind, EventSink};
use crate::prompt::{
    render_prompt, scores_schema, system_prompt, technique_rules, templates, Context, PromptError,
};

pub const QUALITY_FRAMEWORK: &str = "INVEST";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{agent} call failed during {phase}: {source}")]
    Gateway {
        phase: Phase,
        agent: AgentRole,
        source: GatewayError,
    },
    #[error("{agent} reply unusable during {phase} after one corrective retry: {violations}")]
    ParseFailure {
        phase: Phase,
        agent: AgentRole,
        violations: String,
    },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("a prioritization meeting needs at least 2 stories, got {0}")]
    InsufficientStories(usize),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Prioritization(#[from] PrioritizationError),
    #[error(transparent)]
    Aggregation(#[from] AggregationError),
    #[error(transparent)]
    Evaluation(#[from] EvaluationError),
}

impl PipelineError {
    /// Stable machine-readable name used in error events and exit codes.
    pub fn kind(&self) -> &'static str {
        match self {
            PipelineError::Gateway { .. } => "gateway",
            PipelineError::ParseFailure { .. } => "parse_failure",
            PipelineError::Precondition(_) => "precondition",
            PipelineError::InsufficientStories(_) => "insufficient_stories",
            PipelineError::Prompt(_) => "missing_placeholder",
            PipelineError::Prioritization(_) => "prioritization",
            PipelineError::Aggregation(_) => "aggregation",
            PipelineError::Evaluation(_) => "evaluation",
        }
    }
}

/// Runs agents against a [`Gateway`] and writes results into a [`SessionRecord`].
#[derive(Clone)]
pub struct Pipeline {
    gateway: Gateway,
    clock: Arc<dyn Clock>,
    sink: Arc<dyn EventSink>,
    rules: QualityRules,
    embed_model: Option<ModelConfig>,
}

/// One agent call (plus its corrective retry) that has not been written to the
/// session yet, so concurrent calls never share mutable state.
struct Asked<T> {
    result: Result<T, PipelineError>,
    exchanges: Vec<ExchangeRecord>,
    reply: String,
}

impl Pipeline {
    pub fn new(gateway: Gateway, clock: Arc<dyn Clock>, sink: Arc<dyn EventSink>) -> Self {
        Self {
            gateway,
            clock,
            sink,
            rules: QualityRules::default(),
            embed_model: None,
        }
    }

    pub fn with_rules(mut self, rules: QualityRules) -> Self {
        self.rules = rules;
        self
    }

    /// Embedding model; defaults to the Product Owner's model.
    pub fn with_embed_model(mut self, model: ModelConfig) -> Self {
        self.embed_model = Some(model);
        self
    }

    /// Generation, quality, every configured meeting, then metrics. Errors are
    /// also reported to the sink as a terminal `error` event.
    pub async fn run(&self, session: &mut SessionRecord) -> Result<(), PipelineError> {
        let result = self.run_phases(session).await;
        if let Err(e) = &result {
            self.sink.emit(
                EventKind::Error,
                json!({"kind": e.kind(), "message": e.to_string()}),
            );
        }
        result
    }

    async fn run_phases(&self, session: &mut SessionRecord) -> Result<(), PipelineError> {
        session
            .project
            .validate()
            .map_err(|e| PipelineError::Precondition(e.to_string()))?;
        session
            .config
            .validate()
            .map_err(|e| PipelineError::Precondition(e.to_string()))?;
        self.generate(session).await?;
        self.assess_quality(session).await?;
        for technique in session.config.techniques.clone() {
            self.prioritize(session, technique).await?;
        }
        for story in &mut session.stories {
            story.status = StoryStatus::Prioritized;
        }
        self.evaluate(session).await
    }

    fn phase_started(&self, phase: Phase, technique: Option<PrioritizationTechnique>) {
        let mut payload = json!({"phase": phase});
        if let Some(t) = technique {
            payload["technique"] = json!(t);
        }
        self.sink.emit(EventKind::PhaseStarted, payload);
    }

    fn say(
        &self,
        transcript: &mut MeetingTranscript,
        speaker: AgentRole,
        phase: Phase,
        content: impl Into<String>,
    ) {
        let content = content.into();
        let mut payload = json!({"agent": speaker, "phase": phase, "content": content});
        if let Some(t) = transcript.technique {
            payload["technique"] = json!(t);
        }
        transcript.push(MeetingEvent {
            speaker,
            phase,
            content,
            timestamp: self.clock.now(),
        });
        self.sink.emit(EventKind::AgentMessage, payload);
    }

    /// One call with a single corrective retry when `parse` rejects the reply.
    async fn ask<T>(
        &self,
        config: &ModelConfig,
        phase: Phase,
        agent: AgentRole,
        technique: Option<PrioritizationTechnique>,
        prompt: String,
        parse: impl Fn(&str) -> ParseOutcome<T>,
    ) -> Asked<T> {
        let mut messages = vec![
            ChatMessage::system(system_prompt(agent)),
            ChatMessage::user(prompt),
        ];
        let mut exchanges = Vec::new();
        let mut reply = String::new();
        for attempt in 0..2 {
            let exchange = match self.gateway.chat(config, &messages).await {
                Ok(ex) => ex,
                Err(source) => {
                    return Asked {
                        result: Err(PipelineError::Gateway {
                            phase,
                            agent,
                            source,
                        }),
                        exchanges,
                        reply,
                    }
                }
            };
            reply = exchange.response_text.clone();
            exchanges.push(ExchangeRecord {
                phase,
                agent,
                technique,
                model_name: config.model_name.clone(),
                exchange,
            });
            let outcome = parse(&reply);
            if attempt == 1 || outcome.is_ok() {
                let result = outcome.result.map_err(|v| PipelineError::ParseFailure {
                    phase,
                    agent,
                    violations: v
                        .iter()
                        .map(ToString::to_string)
                        .collect::<Vec<_>>()
                        .join("; "),
                });
                return Asked {
                    result,
                    exchanges,
                    reply,
                };
            }
            match render_prompt(
                templates::CORRECTION,
                &Context::from([("violations", outcome.violation_summary())]),
            ) {
                Ok(text) => {
                    messages.push(ChatMessage::assistant(reply.clone()));
                    messages.push(ChatMessage::user(text));
                }
                Err(e) => {
                    return Asked {
                        result: Err(e.into()),
                        exchanges,
                        reply,
                    }
                }
            }
        }
        unreachable!("the loop returns on its second pass")
    }

    /// Plain-text call without parsing (the meeting overview).
    async fn say_freely(
        &self,
        config: &ModelConfig,
        phase: Phase,
        agent: AgentRole,
        technique: Option<PrioritizationTechnique>,
        prompt: String,
    ) -> Asked<()> {
        self.ask(config, phase, agent, technique, prompt, |reply| {
            ParseOutcome {
                raw: reply.to_string(),
                result: Ok(()),
            }
        })
        .await
    }

    fn unwrap_asked<T>(
        &self,
        session: &mut SessionRecord,
        asked: Asked<T>,
    ) -> Result<(T, String), PipelineError> {
        session.exchanges.extend(asked.exchanges);
        asked.result.map(|v| (v, asked.reply))
    }

    fn transcript_mut(
        session: &mut SessionRecord,
        technique: Option<PrioritizationTechnique>,
    ) -> &mut MeetingTranscript {
        match session
            .transcripts
            .iter()
            .position(|t| t.technique == technique)
        {
            Some(i) => &mut session.transcripts[i],
            None => {
                session.transcripts.push(MeetingTranscript::new(technique));
                session.transcripts.last_mut().expect("just pushed")
            }
        }
    }

    /// Product Owner writes epics and stories from the project description.
    pub async fn generate(&self, session: &mut SessionRecord) -> Result<(), PipelineError> {
        session
            .project
            .validate()
            .map_err(|e| PipelineError::Precondition(e.to_string()))?;
        self.phase_started(Phase::Generation, None);
        let agent = AgentRole::ProductOwner;
        let config = session.config.model_for(agent).clone();
        let prompt = render_prompt(
            templates::GENERATION,
            &Context::from([
                ("agent", agent.slug().to_string()),
                ("project_title", session.project.title.clone()),
                ("project_description", session.project.body.clone()),
            ]),
        )?;
        let asked = self
            .ask(
                &config,
                Phase::Generation,
                agent,
                None,
                prompt,
                parse_generation,
            )
            .await;
        let (backlog, reply) = self.unwrap_asked(session, asked)?;
        self.say(
            Self::transcript_mut(session, None),
            agent,
            Phase::Generation,
            reply,
        );
        session.epics = backlog.epics;
        session.stories = backlog.stories;
        session.parse_notes.extend(backlog.notes);
        self.sink.emit(
            EventKind::StoriesReady,
            json!({"epics": session.epics, "stories": session.stories, "notes": session.parse_notes}),
        );
        Ok(())
    }

    /// Lint every story and ask the QA agent for INVEST verdicts in one call.
    pub async fn assess_quality(&self, session: &mut SessionRecord) -> Result<(), PipelineError> {
        if session.stories.is_empty() {
            return Err(PipelineError::Precondition("no stories to assess".into()));
        }
        self.phase_started(Phase::Quality, None);
        let agent = AgentRole::QualityAssurance;
        let config = session.config.model_for(agent).with_temperature(0.0);
        let ids: Vec<StoryId> = session.stories.iter().map(|s| s.id.clone()).collect();
        let prompt = render_prompt(
            templates::QUALITY,
            &Context::from([
                ("agent", agent.slug().to_string()),
                ("framework", QUALITY_FRAMEWORK.to_string()),
                ("stories_json", stories_json(&session.stories)),
                ("story_ids", join_ids(&ids)),
            ]),
        )?;
        let asked = self
            .ask(&config, Phase::Quality, agent, None, prompt, |r| {
                parse_quality_verdicts(r, &ids)
            })
            .await;
        let (verdicts, reply) = self.unwrap_asked(session, asked)?;
        let mut reports = Vec::with_capacity(session.stories.len());
        for story in &session.stories {
            let lint = lint_story(story, &session.stories, &self.rules);
            let (verdict, verbatim) = verdicts
                .iter()
                .find(|(v, _)| v.story_id == story.id)
                .expect("coverage is checked by the parser");
            let report =
                combine(&lint, verdict, verbatim).map_err(|e| PipelineError::ParseFailure {
                    phase: Phase::Quality,
                    agent,
                    violations: format!("{}: {e}", story.id.as_str()),
                })?;
            reports.push(report);
        }
        self.say(
            Self::transcript_mut(session, None),
            agent,
            Phase::Quality,
            reply,
        );
        for story in &mut session.stories {
            story.status = StoryStatus::QualityChecked;
        }
        session.quality = reports;
        self.sink
            .emit(EventKind::QualityReady, json!({"reports": session.quality}));
        Ok(())
    }

    /// One meeting: PO overview, PO sheet, Dev and QA sheets issued
    /// concurrently, then the Manager's merge with a Borda fallback.
    pub async fn prioritize(
        &self,
        session: &mut SessionRecord,
        technique: PrioritizationTechnique,
    ) -> Result<(), PipelineError> {
        if session.stories.len() < 2 {
            return Err(PipelineError::InsufficientStories(session.stories.len()));
        }
        self.phase_started(Phase::Prioritization, Some(technique));
        let some = Some(technique);
        let ids: Vec<StoryId> = session.stories.iter().map(|s| s.id.clone()).collect();
        let stories = stories_json(&session.stories);
        let mut transcript = MeetingTranscript::new(some);

        let po = AgentRole::ProductOwner;
        let po_config = session.config.model_for(po).with_temperature(0.0);
        let prompt = render_prompt(
            templates::OVERVIEW,
            &Context::from([
                ("agent", po.slug().to_string()),
                ("technique", technique.label().to_string()),
                ("stories_json", stories.clone()),
            ]),
        )?;
        let asked = self
            .say_freely(&po_config, Phase::Prioritization, po, some, prompt)
            .await;
        let ((), overview) = self.unwrap_asked(session, asked)?;
        let overview = overview.trim().to_string();
        self.say(&mut transcript, po, Phase::Prioritization, overview.clone());

        let sheet_prompt = |agent: AgentRole| {
            render_prompt(
                templates::PRIORITIZATION,
                &Context::from([
                    ("agent", agent.slug().to_string()),
                    ("agent_name", agent.display_name().to_string()),
                    ("technique", technique.label().to_string()),
                    (
                        "technique_rules",
                        technique_rules(technique).trim().to_string(),
                    ),
                    ("overview", overview.clone()),
                    ("stories_json", stories.clone()),
                    ("story_ids", join_ids(&ids)),
                    ("scores_schema", scores_schema(technique).trim().to_string()),
                ]),
            )
        };
        let parse_for = |agent: AgentRole| {
            let ids = ids.clone();
            move |reply: &str| parse_score_sheet(reply, technique, &ids, agent)
        };

        let asked = self
            .ask(
                &po_config,
                Phase::Prioritization,
                po,
                some,
                sheet_prompt(po)?,
                parse_for(po),
            )
            .await;
        let (po_sheet, reply) = self.unwrap_asked(session, asked)?;
        self.say(&mut transcript, po, Phase::Prioritization, reply);

        let dev = AgentRole::SeniorDeveloper;
        let qa = AgentRole::QualityAssurance;
        let dev_config = session.config.model_for(dev).with_temperature(0.0);
        let qa_config = session.config.model_for(qa).with_temperature(0.0);
        let (dev_prompt, qa_prompt) = (sheet_prompt(dev)?, sheet_prompt(qa)?);
        let (dev_asked, qa_asked) = tokio::join!(
            self.ask(
                &dev_config,
                Phase::Prioritization,
                dev,
                some,
                dev_prompt,
                parse_for(dev)
            ),
            self.ask(
                &qa_config,
                Phase::Prioritization,
                qa,
                some,
                qa_prompt,
                parse_for(qa)
            ),
        );
        // Results are recorded in a fixed role order regardless of arrival.
        let (dev_sheet, dev_reply) = self.unwrap_asked(session, dev_asked)?;
        let (qa_sheet, qa_reply) = self.unwrap_asked(session, qa_asked)?;
        self.say(&mut transcript, dev, Phase::Prioritization, dev_reply);
        self.say(&mut transcript, qa, Phase::Prioritization, qa_reply);

        let sheets = vec![po_sheet, dev_sheet, qa_sheet];
        let backlog = self
            .merge(session, technique, &ids, &sheets, &mut transcript)
            .await?;
        session.score_sheets.retain(|s| s.technique != technique);
        session.score_sheets.extend(sheets);
        session.transcripts.retain(|t| t.technique != some);
        session.transcripts.push(transcript);
        session.backlogs.retain(|b| b.technique != technique);
        self.sink.emit(
            EventKind::BacklogReady,
            json!({"technique": technique, "backlog": backlog}),
        );
        session.backlogs.push(backlog);
        Ok(())
    }

    async fn merge(
        &self,
        session: &mut SessionRecord,
        technique: PrioritizationTechnique,
        ids: &[StoryId],
        sheets: &[ScoreSheet],
        transcript: &mut MeetingTranscript,
    ) -> Result<RankedBacklog, PipelineError> {
        let manager = AgentRole::Manager;
        let config = session.config.model_for(manager).with_temperature(0.0);
        let sheets_json: Vec<Value> = sheets
            .iter()
            .map(|s| {
                let mut v = score_sheet_payload(s);
                v["agent"] = json!(s.agent);
                v
            })
            .collect();
        let dialogue: Vec<String> = transcript
            .events
            .iter()
            .enumerate()
            .map(|(i, e)| match i {
                0 => format!("{}: {}", e.speaker.display_name(), e.content),
                _ => format!("{}: submitted a score sheet.", e.speaker.display_name()),
            })
            .collect();
        let prompt = render_prompt(
            templates::MERGE,
            &Context::from([
                ("agent", manager.slug().to_string()),
                ("technique", technique.label().to_string()),
                (
                    "sheets_json",
                    serde_json::to_string_pretty(&sheets_json).expect("json values serialize"),
                ),
                ("dialogue", dialogue.join("\n")),
                ("story_ids", join_ids(ids)),
            ]),
        )?;
        let asked = self
            .ask(
                &config,
                Phase::Merge,
                manager,
                Some(technique),
                prompt,
                |r| parse_manager_ranking(r, ids),
            )
            .await;
        let scores = technique_scores(technique, sheets)?;
        match self.unwrap_asked(session, asked) {
            Ok((ranking, reply)) => {
                self.say(transcript, manager, Phase::Merge, reply);
                let entries = ranking
                    .into_iter()
                    .map(|e| RankedEntry {
                        score: scores[&e.story_id],
                        story_id: e.story_id,
                        rank: e.rank,
                        justification: e.justification,
                    })
                    .collect();
                RankedBacklog::new(technique, entries).map_err(|e| PipelineError::ParseFailure {
                    phase: Phase::Merge,
                    agent: manager,
                    violations: e.to_string(),
                })
            }
            Err(PipelineError::ParseFailure { violations, .. }) => {
                let vectors = sheets
                    .iter()
                    .map(|s| {
                        Ok(RankingVector::new(
                            s.agent.slug(),
                            technique_ranking(technique, std::slice::from_ref(s))?,
                        ))
                    })
                    .collect::<Result<Vec<_>, PrioritizationError>>()?;
                let merged = merge_borda(&vectors)?;
                let why = format!("Borda merge of {} score sheets", vectors.len());
                let entries = merged
                    .ranks
                    .into_iter()
                    .map(|(id, rank)| RankedEntry {
                        score: scores[&id],
                        story_id: id,
                        rank,
                        justification: why.clone(),
                    })
                    .collect();
                let mut backlog = RankedBacklog::new(technique, entries).map_err(|e| {
                    PipelineError::ParseFailure {
                        phase: Phase::Merge,
                        agent: manager,
                        violations: e.to_string(),
                    }
                })?;
                backlog.merged_by_fallback = true;
                self.say(
                    transcript,
                    manager,
                    Phase::Merge,
                    format!("fallback: manager reply unusable ({violations}); backlog merged by Borda count over the {} score sheets", vectors.len()),
                );
                Ok(backlog)
            }
            Err(other) => Err(other),
        }
    }

    /// Embeds the project and stories, then computes the run metrics.
    pub async fn evaluate(&self, session: &mut SessionRecord) -> Result<(), PipelineError> {
        if session.stories.is_empty() {
            return Err(PipelineError::Precondition("no stories to evaluate".into()));
        }
        let po_model = session.config.model_for(AgentRole::ProductOwner).clone();
        let embed_model = self.embed_model.clone().unwrap_or_else(|| po_model.clone());
        let mut texts = vec![session.project.body.clone()];
        texts.extend(session.stories.iter().map(|s| s.description()));
        let vectors = self
            .gateway
            .embed(&embed_model, &texts)
            .await
            .map_err(|source| PipelineError::Gateway {
                phase: Phase::Generation,
                agent: AgentRole::ProductOwner,
                source,
            })?;
        let mut vectors = vectors.into_iter();
        let project = vectors.next().expect("one vector per text");
        session.embeddings = Some(EmbeddingSet {
            model_name: embed_model.model_name.clone(),
            project,
            stories: session
                .stories
                .iter()
                .map(|s| s.id.clone())
                .zip(vectors)
                .collect(),
        });
        let metrics = compute_run_metrics(session, &po_model.model_name)?;
        self.sink
            .emit(EventKind::MetricsReady, json!({"metrics": metrics}));
        session.metrics = Some(metrics);
        Ok(())
    }
}

fn join_ids(ids: &[StoryId]) -> String {
    ids.iter()
        .map(StoryId::as_str)
        .collect::<Vec<_>>()
        .join(", ")
}
