use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use polemos::synth::SynthConfig;
use polemos_cli::{
    cmd_annotate_import, cmd_annotate_serve, cmd_clean, cmd_export, cmd_ingest, cmd_predict, cmd_report, cmd_sample,
    cmd_serve_model, cmd_status, cmd_synth, cmd_train, exit_code, Project,
};
use tracing_subscriber::EnvFilter;

/// Stance mapping over platform comment threads.
#[derive(Debug, Parser)]
#[command(name = "polemos", version)]
struct Cli {
    /// Project directory holding the corpus, session and outputs.
    #[arg(long, global = true, default_value = ".")]
    dir: PathBuf,
    /// Config file; defaults to <dir>/polemos.toml when present.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the sampling and training seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Proceed past stage-order refusals, replace an existing session and
    /// clear a stale lock.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic corpus, mock API fixture and gold labels.
    Synth {
        #[arg(long, default_value_t = 5000)]
        comments: usize,
        /// Give code 0 no vocabulary of its own.
        #[arg(long)]
        collapse: bool,
    },
    /// Fetch comments for the configured queries.
    Ingest {
        /// Serve this fixture directory instead of calling the platform.
        #[arg(long)]
        mock: Option<PathBuf>,
    },
    /// Filter the raw corpus into clean.jsonl.
    Clean,
    /// Draw the annotation sample and open a session.
    Sample,
    /// Serve the annotation API.
    AnnotateServe {
        #[arg(long)]
        bind: Option<String>,
    },
    /// Record labels from a comment_id,code CSV.
    AnnotateImport {
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value = "import")]
        annotator: String,
        /// Label only until every category meets its target, skipping the rest.
        #[arg(long)]
        fill_quota: bool,
    },
    /// Write training.csv from the session.
    Export,
    /// Train, evaluate the holdout and apply the accuracy gate.
    Train,
    /// Classify the clean corpus.
    Predict {
        /// Remote inference endpoint.
        #[arg(long)]
        remote: Option<String>,
    },
    /// Serve the trained model over the inference protocol.
    ServeModel {
        #[arg(long, default_value = "127.0.0.1:8090")]
        bind: String,
    },
    /// Write counts, trends, affinity and charts.
    Report,
    /// Show the pipeline stage and corpus figures.
    Status {
        #[arg(long)]
        json: bool,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Command::Synth { comments, collapse } = cli.command {
        let base = if collapse { SynthConfig::collapse() } else { SynthConfig::default() };
        let cfg = SynthConfig {
            seed: cli.seed.unwrap_or(base.seed),
            comments,
            ..base
        };
        let s = cmd_synth(&cli.dir, &cfg)?;
        println!(
            "{} comments on {} videos ({} with comments disabled); fixture in {}, gold labels in {}",
            s.comments,
            s.videos,
            s.disabled_videos,
            s.fixture_dir.display(),
            s.gold_path.display()
        );
        return Ok(());
    }

    let project = Project::open(&cli.dir, cli.config.as_deref())?.with_seed(cli.seed).with_force(cli.force);
    if let Command::Status { json } = cli.command {
        let status = cmd_status(&project)?;
        if json {
            println!("{}", serde_json::to_string_pretty(&status)?);
        } else {
            print!("{status}");
        }
        return Ok(());
    }

    let _lock = project.lock(cli.force)?;
    match cli.command {
        Command::Ingest { mock } => {
            let r = cmd_ingest(&project, mock.as_deref())?;
            println!(
                "{} videos, {} with comments disabled, {} comments fetched, {} appended, {} quota units",
                r.videos_found, r.videos_with_comments_disabled, r.comments_fetched, r.comments_appended, r.quota_spent
            );
        }
        Command::Clean => {
            let r = cmd_clean(&project)?;
            println!(
                "{} in, {} out (empty {}, no letters {}, out of window {}, duplicate {})",
                r.input_count,
                r.output_count,
                r.removed_empty,
                r.removed_non_referential,
                r.removed_out_of_window,
                r.removed_duplicate
            );
        }
        Command::Sample => {
            let s = cmd_sample(&project, cli.force)?;
            println!("sampled {} comments with seed {}", s.size, s.seed);
        }
        Command::AnnotateServe { bind } => cmd_annotate_serve(&project, bind.as_deref())?,
        Command::AnnotateImport {
            labels,
            annotator,
            fill_quota,
        } => {
            let p = cmd_annotate_import(&project, &labels, &annotator, fill_quota)?;
            println!("{}/{} labeled", p.total, p.total_target);
        }
        Command::Export => {
            let b = cmd_export(&project)?;
            println!("exported {} rows, counts {:?}", b.total, b.counts);
        }
        Command::Train => {
            let r = cmd_train(&project)?;
            println!(
                "trained on {}, held-out accuracy {:.4} over {} (gate {:.2} passed)",
                r.train_size, r.holdout.accuracy, r.holdout_size, r.gate.threshold
            );
        }
        Command::Predict { remote } => {
            let s = cmd_predict(&project, remote.as_deref())?;
            println!("classified {} comments, counts {:?}", s.total, s.counts);
        }
        Command::ServeModel { bind } => cmd_serve_model(&project, &bind)?,
        Command::Report => {
            let b = cmd_report(&project)?;
            println!("report written to {}", project.report_dir().display());
            println!("{}", serde_json::to_string_pretty(&b.summary.comparisons)?);
        }
        Command::Synth { .. } | Command::Status { .. } => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
