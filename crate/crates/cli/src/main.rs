use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use reqagent_cli::{compare, parse_techniques, run, CliError, RunOptions};
use reqagent_service::{ProviderMode, ServiceConfig};

/// Generate, check and prioritize user stories with a team of LLM agents.
#[derive(Parser)]
#[command(name = "reqagent", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline on one project description.
    Run(RunArgs),
    /// Merge metrics.json from several run directories.
    Compare {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        #[arg(long, default_value = ".")]
        output_dir: PathBuf,
    },
    /// Start the HTTP session service (configured by REQAGENT_* variables).
    Serve {
        #[arg(long)]
        bind: Option<String>,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// Call real providers instead of the offline mock.
        #[arg(long)]
        live: bool,
        #[arg(long)]
        recordings: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Project description (plain text or markdown; a leading "# " line is the title).
    description: PathBuf,
    #[arg(long, default_value = "gpt-3.5-turbo")]
    model: String,
    /// 100dollar, wsjf, ahp or all. Repeatable or comma separated.
    #[arg(long = "technique")]
    techniques: Vec<String>,
    #[arg(long, default_value = "out")]
    output_dir: PathBuf,
    /// Answer every call offline (default).
    #[arg(long, conflicts_with = "live")]
    mock: bool,
    /// Call the real provider for the model.
    #[arg(long)]
    live: bool,
    /// Recorded replies: one JSON file or a directory of them.
    #[arg(long)]
    recordings: Option<PathBuf>,
    /// Deterministic timestamps for reproducible artifacts.
    #[arg(long)]
    frozen_clock: bool,
}

async fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => {
            let env = ServiceConfig::from_env().map_err(CliError::Config)?;
            let opts = RunOptions {
                description: args.description,
                model: args.model,
                techniques: parse_techniques(&args.techniques)?,
                output_dir: args.output_dir,
                mode: if args.live {
                    ProviderMode::Live
                } else {
                    ProviderMode::Mock
                },
                recordings: args.recordings,
                frozen_clock: args.frozen_clock,
                openai_base_url: env.openai_base_url,
                groq_base_url: env.groq_base_url,
            };
            let session = run(&opts).await?;
            let m = session.metrics.as_ref();
            eprintln!(
                "{}: {} epics, {} stories, {} backlogs, mean similarity {:.2} -> {}",
                session.project.id,
                m.map_or(0, |m| m.distinct_epics),
                m.map_or(0, |m| m.distinct_stories),
                session.backlogs.len(),
                m.map_or(0.0, |m| m.mean_similarity),
                opts.output_dir.display()
            );
            Ok(())
        }
        Command::Compare { dirs, output_dir } => {
            let rows = compare(&dirs, &output_dir)?;
            for row in rows {
                println!(
                    "{}\t{}\t{}\t{}",
                    row.project,
                    row.model,
                    row.metric,
                    row.formatted_value()
                );
            }
            Ok(())
        }
        Command::Serve {
            bind,
            data_dir,
            live,
            recordings,
        } => {
            let mut config = ServiceConfig::from_env().map_err(CliError::Config)?;
            if let Some(bind) = bind {
                config.bind = bind
                    .parse()
                    .map_err(|e| CliError::Config(format!("--bind {bind}: {e}")))?;
            }
            if let Some(dir) = data_dir {
                config.data_dir = dir;
            }
            if live {
                config.mode = ProviderMode::Live;
            }
            if recordings.is_some() {
                config.recordings = recordings;
            }
            reqagent_service::serve(config).await.map_err(CliError::Io)
        }
    }
}

#[tokio::main]
async fn main() -> ExitCode {
    match dispatch(Cli::parse()).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
