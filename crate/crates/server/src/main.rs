use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use shala_core::parser::AuxTask;
use shala_core::pipeline::TaskKind;
use shala_server::commands::{self, EvalOptions, Task, TrainOptions};
use shala_server::config::Config;
use shala_server::export::{self, Format};
use shala_server::store::SessionStore;
use shala_server::{api, Service};

#[derive(Parser)]
#[command(name = "shala", version, about = "Sanskrit analysis service and model tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve {
        #[arg(long, env = "SHALA_CONFIG")]
        config: Option<PathBuf>,
        #[arg(long)]
        listen: Option<String>,
        /// Train quick demo models for any task without a model file.
        #[arg(long)]
        demo: bool,
    },
    /// Train a model and print a JSON report.
    Train {
        task: Task,
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Model file; a directory for `all`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        /// Shorter schedules used by the demo service.
        #[arg(long)]
        quick: bool,
        /// Auxiliary task for `train aux`.
        #[arg(long, value_parser = parse_aux)]
        aux_task: Option<AuxTask>,
        /// Pretrained auxiliary encoder to gate into the parser; repeatable.
        #[arg(long)]
        aux_model: Vec<PathBuf>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        negatives: Option<usize>,
    },
    /// Evaluate a model and print a JSON report.
    Eval {
        task: Task,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Word vectors for `eval embeddings`.
        #[arg(long)]
        vectors: Option<PathBuf>,
        /// Evaluation inventory TSV; repeatable.
        #[arg(long)]
        inventory: Vec<PathBuf>,
    },
    /// Write a stored session as CoNLL-U or JSON.
    ExportSession {
        id: String,
        #[arg(long, default_value = "conllu")]
        format: String,
        #[arg(long, env = "SHALA_CONFIG")]
        config: Option<PathBuf>,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_aux(s: &str) -> Result<AuxTask, String> {
    AuxTask::ALL
        .into_iter()
        .find(|t| t.name().eq_ignore_ascii_case(s))
        .ok_or_else(|| format!("expected LT, MT or CT, found {s:?}"))
}

/// Writes to stdout; a closed pipe (`shala ... | head`) is not an error.
fn emit(text: &str) -> Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn print(v: &serde_json::Value) -> Result<()> {
    emit(&format!("{}\n", serde_json::to_string_pretty(v)?))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Serve { config, listen, demo } => {
            let mut c = Config::resolve(config.as_deref())?;
            if let Some(l) = listen {
                c.listen = l;
            }
            c.demo_models |= demo;
            let svc = Service::from_config(&c)?;
            let loaded = svc.pipeline.loaded();
            let missing: Vec<_> = TaskKind::ALL.into_iter().filter(|t| !loaded.contains(t)).collect();
            if !missing.is_empty() {
                eprintln!("no model for {missing:?}; those tasks will return 503 (use --demo for toy models)");
            }
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(api::serve(Arc::new(svc), &c.listen))?;
        }
        Command::Train {
            task,
            corpus,
            out,
            seed,
            epochs,
            lr,
            quick,
            aux_task,
            aux_model,
            dim,
            window,
            negatives,
        } => {
            let opts = TrainOptions {
                corpus,
                out,
                seed,
                epochs,
                learning_rate: lr,
                quick,
                aux_task,
                aux_models: aux_model,
                dim,
                window,
                negatives,
            };
            print(&commands::train(task, &opts)?)?;
        }
        Command::Eval {
            task,
            model,
            corpus,
            vectors,
            inventory,
        } => {
            let opts = EvalOptions {
                model,
                corpus,
                vectors,
                inventories: inventory,
            };
            print(&commands::eval(task, &opts)?)?;
        }
        Command::ExportSession {
            id,
            format,
            config,
            data_dir,
            out,
        } => {
            let mut c = Config::resolve(config.as_deref())?;
            if let Some(d) = data_dir {
                c.data_dir = d;
            }
            let format = Format::parse(&format)?;
            let store = SessionStore::new(&c.data_dir)?;
            let handle = store.get(&id)?;
            let doc = export::export(&handle.lock().expect("session lock"), format);
            match out {
                Some(p) => std::fs::write(&p, doc).with_context(|| format!("writing {}", p.display()))?,
                None => emit(&doc)?,
            }
        }
    }
    Ok(())
}
