use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use simmc_annotsvc::{export_paraphrased, StoreConfig, StoreError, SystemClock, TaskStore};
use simmc_core::catalog::{synth, Domain};
use simmc_core::corpus::{
    compute_stats, generate_corpus, generate_dialogs, split, Corpus, CorpusError, GenerationInfo, PoolFile, SplitInfo,
    SplitSpec,
};
use simmc_core::eval::{self, EvalError, FrameMode, MetricReport, PredictionSet, RetrievalCandidates};
use simmc_core::ontology::Ontology;
use simmc_core::scenegen::{generate_pool, Execution, SceneConfig};
use simmc_core::simulator::SimulatorConfig;
use thiserror::Error;

#[derive(Debug, Error)]
enum CliError {
    /// Inputs were read but failed a content check.
    #[error("{0}")]
    Validation(String),
    /// Files, configs and arguments.
    #[error("{0}")]
    Setup(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            Self::Validation(_) => 1,
            Self::Setup(_) => 2,
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Invalid { .. } | CorpusError::MissingSnapshot { .. } => Self::Validation(e.to_string()),
            _ => Self::Setup(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::MissingPredictions { .. } | EvalError::UnknownTurns(_) | EvalError::GoldMissing { .. } => {
                Self::Validation(e.to_string())
            }
            _ => Self::Setup(e.to_string()),
        }
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Io { .. } | StoreError::Corrupt { .. } | StoreError::CorruptSnapshot { .. } => {
                Self::Setup(e.to_string())
            }
            _ => Self::Validation(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "simmc",
    version,
    about = "Situated multimodal dialog simulation and evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Task {
    Disamb,
    Coref,
    Dst,
    Gen,
    Retrieval,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Cumulative,
    Delta,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the snapshot pool.
    GenScenes {
        /// Scene config (JSON); bundled seeds and catalogs by default.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Single-threaded generation (same output).
        #[arg(long)]
        serial: bool,
    },
    /// Generate a dialog corpus by self-play.
    GenDialogs {
        /// Simulator config (JSON); the shipped default when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Scene config used when no pool is given.
        #[arg(long)]
        scene_config: Option<PathBuf>,
        /// Reuse a pool written by gen-scenes.
        #[arg(long)]
        pool: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        serial: bool,
    },
    /// Check a corpus against the ontology and structural rules.
    Validate {
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Partition a corpus into train/dev/devtest/teststd.
    Split {
        #[arg(long)]
        corpus: PathBuf,
        /// Four comma-separated fractions.
        #[arg(long, value_delimiter = ',', default_values_t = [0.65, 0.10, 0.10, 0.15])]
        ratios: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        scene_disjoint: bool,
        /// Split assignment file.
        #[arg(long)]
        out: PathBuf,
        /// Also write the corpus with the split embedded.
        #[arg(long)]
        corpus_out: Option<PathBuf>,
    },
    /// Corpus statistics as JSON, plus CSV tables when --csv-dir is given.
    Stats {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        csv_dir: Option<PathBuf>,
    },
    /// Score a prediction file against a gold corpus.
    Eval {
        #[arg(long, value_enum)]
        task: Task,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Cumulative)]
        frame_mode: Mode,
        /// Candidate file from gen-candidates; required for retrieval.
        #[arg(long)]
        candidates: Option<PathBuf>,
        /// Write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build response-retrieval candidate sets for a corpus.
    GenCandidates {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = eval::DEFAULT_POOL_SIZE)]
        pool_size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic catalog.
    GenCatalog {
        #[arg(long)]
        domain: String,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long, default_value_t = synth::DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the paraphrase collection service.
    ServeAnnotation {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        journal: PathBuf,
        /// Enqueue this corpus on start (existing tasks are kept).
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Static annotation UI to serve for non-API paths.
        #[arg(long)]
        ui_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 30 * 60)]
        lease_ttl_secs: u64,
        /// Keep accepted submissions in `submitted` until approved.
        #[arg(long)]
        review: bool,
    },
    /// Approve a submitted task (review mode).
    Approve {
        #[arg(long)]
        journal: PathBuf,
        #[arg(long)]
        task: String,
    },
    /// Write the corpus with accepted paraphrases as utterances.
    ExportParaphrased {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        journal: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn execution(serial: bool) -> Execution {
    if serial {
        Execution::Serial
    } else {
        Execution::Parallel
    }
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Setup(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::Setup(format!("cannot write {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let bytes = simmc_core::canonical::to_canonical_bytes(value).map_err(|e| CliError::Setup(e.to_string()))?;
    write(path, &bytes)
}

fn scene_config(path: Option<&Path>) -> Result<SceneConfig, CliError> {
    match path {
        Some(p) => SceneConfig::load(p).map_err(|e| CliError::Setup(e.to_string())),
        None => Ok(SceneConfig::default()),
    }
}

fn sim_config(path: Option<&Path>) -> Result<SimulatorConfig, CliError> {
    let c = match path {
        Some(p) => SimulatorConfig::load(p).map_err(|e| CliError::Setup(e.to_string()))?,
        None => SimulatorConfig::default(),
    };
    c.validate().map_err(|e| CliError::Setup(e.to_string()))?;
    Ok(c)
}

fn open_store(journal: &Path, config: StoreConfig) -> Result<TaskStore, CliError> {
    Ok(TaskStore::open(journal, config, Arc::new(SystemClock))?)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenScenes {
            config,
            seed,
            out,
            serial,
        } => {
            let cfg = scene_config(config.as_deref())?;
            let seeds = cfg.load_seeds().map_err(|e| CliError::Setup(e.to_string()))?;
            let cats = cfg.load_catalogs().map_err(|e| CliError::Setup(e.to_string()))?;
            let pool = generate_pool(&seeds, &cats, &cfg, seed, execution(serial))
                .map_err(|e| CliError::Setup(e.to_string()))?;
            write(&out, &PoolFile::new(&pool, &cfg, seed).to_bytes())?;
            eprintln!("{} of {} snapshots kept", pool.snapshots.len(), pool.candidates);
        }
        Command::GenDialogs {
            config,
            scene_config: scene_path,
            pool,
            count,
            seed,
            out,
            serial,
        } => {
            let sim = sim_config(config.as_deref())?;
            let corpus = match pool {
                None => {
                    generate_corpus(
                        &scene_config(scene_path.as_deref())?,
                        &sim,
                        count,
                        seed,
                        execution(serial),
                    )?
                    .1
                }
                Some(p) => {
                    let file = PoolFile::load(&p)?;
                    let cats = file
                        .scene_config
                        .load_catalogs()
                        .map_err(|e| CliError::Setup(e.to_string()))?;
                    let mut c = generate_dialogs(&file.pool(), &cats, &sim, count, seed, execution(serial))?;
                    // Only a pool built from the same seed can be regenerated from the corpus alone.
                    if file.master_seed == seed {
                        c.generation = Some(GenerationInfo {
                            master_seed: seed,
                            dialog_count: count,
                            scene_config: file.scene_config.clone(),
                            simulator_config: sim.clone(),
                        });
                    }
                    c
                }
            };
            write(&out, &corpus.to_bytes())?;
            eprintln!(
                "{} dialogs over {} snapshots",
                corpus.dialogs.len(),
                corpus.snapshots.len()
            );
        }
        Command::Validate { corpus } => {
            let c = Corpus::load(&corpus)?;
            let problems = c.validate(Ontology::builtin());
            if !problems.is_empty() {
                for (id, v) in &problems {
                    for x in v {
                        println!("{id}: {x}");
                    }
                }
                return Err(CliError::Validation(format!("{} invalid dialog(s)", problems.len())));
            }
            println!("{} dialogs valid", c.dialogs.len());
        }
        Command::Split {
            corpus,
            ratios,
            seed,
            scene_disjoint,
            out,
            corpus_out,
        } => {
            let mut c = Corpus::load(&corpus)?;
            let ratios: [f64; 4] = ratios
                .try_into()
                .map_err(|_| CliError::Setup("--ratios takes four values".into()))?;
            let spec = SplitSpec {
                ratios,
                seed,
                scene_disjoint,
            };
            let assignment = split(&c, &spec)?;
            for (name, ids) in &assignment {
                eprintln!("{name}: {}", ids.len());
            }
            let info = SplitInfo { spec, assignment };
            write_json(&out, &info)?;
            if let Some(p) = corpus_out {
                c.split_info = Some(info);
                write(&p, &c.to_bytes())?;
            }
        }
        Command::Stats { corpus, out, csv_dir } => {
            let c = Corpus::load(&corpus)?;
            let s = compute_stats(&c)?;
            write_json(&out, &s)?;
            if let Some(dir) = csv_dir {
                write(&dir.join("coref_distance.csv"), s.histogram_csv().as_bytes())?;
                write(&dir.join("act_transitions.csv"), s.transitions_csv().as_bytes())?;
            }
        }
        Command::Eval {
            task,
            gold,
            pred,
            frame_mode,
            candidates,
            out,
        } => {
            let gold = Corpus::load(&gold)?;
            let preds = PredictionSet::load(&pred)?;
            preds.check_keys(&gold)?;
            let mode = match frame_mode {
                Mode::Cumulative => FrameMode::Cumulative,
                Mode::Delta => FrameMode::Delta,
            };
            let report: MetricReport = match task {
                Task::Disamb => eval::eval_disambiguation(&preds, &gold)?,
                Task::Coref => eval::eval_coref(&preds, &gold),
                Task::Dst => eval::eval_dst(&preds, &gold, mode),
                Task::Gen => eval::eval_generation(&preds, &gold),
                Task::Retrieval => {
                    let path = candidates.ok_or_else(|| CliError::Setup("retrieval needs --candidates".into()))?;
                    let cands = RetrievalCandidates::load(&path)?;
                    eval::eval_retrieval(&cands.ranked_turns(&preds)?)?
                }
            };
            print!("{}", report.table());
            if let Some(p) = out {
                write(&p, &report.to_bytes())?;
            }
        }
        Command::GenCandidates {
            corpus,
            pool_size,
            seed,
            out,
        } => {
            let c = Corpus::load(&corpus)?;
            let cands = eval::build_retrieval_candidates(&c, pool_size, seed)?;
            write(&out, &cands.to_bytes())?;
            eprintln!("{} candidate sets of {pool_size}", cands.len());
        }
        Command::GenCatalog {
            domain,
            count,
            seed,
            out,
        } => {
            let d = Domain::ALL
                .into_iter()
                .find(|d| d.as_str() == domain)
                .ok_or_else(|| CliError::Setup(format!("unknown domain {domain}")))?;
            let doc = synth::synthesize(d, count.unwrap_or_else(|| synth::default_count(d)), seed);
            write_json(&out, &doc)?;
        }
        Command::ServeAnnotation {
            port,
            host,
            journal,
            corpus,
            ui_dir,
            lease_ttl_secs,
            review,
        } => {
            let store = open_store(
                &journal,
                StoreConfig {
                    lease_ttl_ms: lease_ttl_secs.saturating_mul(1000),
                    auto_approve: !review,
                    ..StoreConfig::default()
                },
            )?;
            if let Some(p) = corpus {
                let c = Corpus::load(&p)?;
                let n = store.enqueue(&c)?;
                eprintln!("{n} tasks in queue");
            }
            if let Some(dir) = &ui_dir {
                if !dir.is_dir() {
                    return Err(CliError::Setup(format!(
                        "--ui-dir {} is not a directory",
                        dir.display()
                    )));
                }
            }
            let addr: SocketAddr = format!("{host}:{port}")
                .parse()
                .map_err(|e| CliError::Setup(format!("bad address {host}:{port}: {e}")))?;
            let store = Arc::new(store);
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Setup(e.to_string()))?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(addr)
                    .await
                    .map_err(|e| CliError::Setup(format!("cannot bind {addr}: {e}")))?;
                let local = listener.local_addr().map_err(|e| CliError::Setup(e.to_string()))?;
                eprintln!("listening on http://{local}");
                let app = simmc_annotsvc::router(store.clone(), ui_dir);
                simmc_annotsvc::serve(listener, app, async {
                    let _ = tokio::signal::ctrl_c().await;
                })
                .await
                .map_err(|e| CliError::Setup(e.to_string()))?;
                store.checkpoint()?;
                Ok::<(), CliError>(())
            })?;
        }
        Command::Approve { journal, task } => {
            let store = open_store(&journal, StoreConfig::default())?;
            store.approve(&task)?;
        }
        Command::ExportParaphrased { corpus, journal, out } => {
            let c = Corpus::load(&corpus)?;
            if !journal.exists() {
                return Err(CliError::Setup(format!("no journal at {}", journal.display())));
            }
            let store = open_store(&journal, StoreConfig::default())?;
            let subs = store.accepted_submissions();
            write(&out, &export_paraphrased(&c, &subs).to_bytes())?;
            eprintln!("{} of {} dialogs paraphrased", subs.len(), c.dialogs.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
