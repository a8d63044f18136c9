//! Command-line driver: synthetic data, training, offline and online
//! evaluation, reports and the competition server.

mod config;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use rankpromo::arena::{
    offline_eval, render_offline_table, render_series, render_table1, run_competition, summarize,
    CompetitionResult, Environment, OfflineConfig, OfflineQuery, OfflineReport,
};
use rankpromo::bot::{modify_document, PairModel};
use rankpromo::snapshot::{read_jsonl, write_jsonl, write_snapshots};
use rankpromo::synth::{SynthConfig, SynthWorld};
use rankpromo::training::{
    cross_validate, generate_training_set, read_dataset, write_dataset, EmbeddingCoherenceProxy,
    LabelMode,
};
use rankpromo_service::ServiceConfig;

use config::{create, read_json, read_model, write_text, OfflineSettings, Paths, Settings};

#[derive(Debug)]
pub enum CliError {
    /// Bad input or configuration; exit code 2.
    Validation(String),
    /// Everything else; exit code 3.
    Runtime(String),
}

impl CliError {
    fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Runtime(format!("{}: {e}", path.display()))
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<rankpromo::Error> for CliError {
    fn from(e: rankpromo::Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

#[derive(Parser)]
#[command(
    name = "rankpromo",
    version,
    about = "Rank-promoting document modification"
)]
struct Cli {
    /// TOML settings file.
    #[arg(long, short, global = true, env = "RANKPROMO_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Writes a synthetic corpus, competitions and a settings file.
    Generate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 30)]
        queries: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Rankings per training snapshot.
        #[arg(long, default_value_t = 6)]
        rounds: usize,
        /// Rounds per generated competition.
        #[arg(long, default_value_t = 5)]
        competition_rounds: usize,
    },
    /// Builds the labeled pair set and trains a pair model with cross-validation.
    Train {
        #[arg(long)]
        label_mode: Option<LabelMode>,
        /// Reuse a labeled pair set instead of generating one.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        dataset_out: Option<PathBuf>,
        /// Model output; `paths.model` when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs the bot once on a document of a stored snapshot.
    Modify {
        #[arg(long)]
        query: String,
        #[arg(long)]
        doc: String,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Print the decision audit as JSON instead of the text.
        #[arg(long)]
        explain: bool,
    },
    /// Runs the configured competitions without human players.
    Compete {
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Offline evaluation of the configured model variants.
    OfflineEval {
        #[arg(long)]
        snapshots: Option<PathBuf>,
        #[arg(long)]
        n_perm: Option<usize>,
    },
    /// Serves competitions over HTTP.
    Serve {
        #[arg(long, env = "RANKPROMO_BIND", default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        #[arg(long, env = "RANKPROMO_DATA_DIR", default_value = "data")]
        data_dir: PathBuf,
        #[arg(long, env = "RANKPROMO_ADMIN_TOKEN", hide_env_values = true)]
        admin_token: String,
        #[arg(long, env = "RANKPROMO_MODEL")]
        model: Option<PathBuf>,
        #[arg(long, env = "RANKPROMO_STATIC_DIR")]
        static_dir: Option<PathBuf>,
    },
    /// Renders tables from stored results.
    Report {
        /// `results.jsonl` from `compete`.
        #[arg(long)]
        results: Option<PathBuf>,
        /// `offline_report.json` from `offline-eval`.
        #[arg(long)]
        offline: Option<PathBuf>,
        /// A model file; prints its feature weights.
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Command::Generate {
        out,
        queries,
        seed,
        rounds,
        competition_rounds,
    } = &cli.command
    {
        return generate(out, *queries, *seed, *rounds, *competition_rounds);
    }
    let settings = Settings::load(cli.config.as_deref())?;
    match cli.command {
        Command::Generate { .. } => unreachable!(),
        Command::Train {
            label_mode,
            dataset,
            dataset_out,
            out,
        } => train(&settings, label_mode, dataset, dataset_out, out),
        Command::Modify {
            query,
            doc,
            model,
            explain,
        } => modify(&settings, &query, &doc, model, explain),
        Command::Compete { model } => compete(&settings, model),
        Command::OfflineEval { snapshots, n_perm } => offline(&settings, snapshots, n_perm),
        Command::Serve {
            bind,
            data_dir,
            admin_token,
            model,
            static_dir,
        } => {
            let model = model.or_else(|| settings.paths.model.clone());
            let config = ServiceConfig {
                data_dir,
                admin_token,
                model: model.as_deref().map(read_model).transpose()?,
                store: settings.store()?,
                static_dir,
            };
            let rt =
                tokio::runtime::Runtime::new().map_err(|e| CliError::Runtime(e.to_string()))?;
            rt.block_on(rankpromo_service::serve(bind, config))
                .map_err(CliError::Runtime)
        }
        Command::Report {
            results,
            offline,
            model,
        } => report(results, offline, model),
    }
}

fn print(text: &str) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| CliError::Runtime(e.to_string()))
}

fn generate(
    out: &Path,
    queries: usize,
    seed: u64,
    rounds: usize,
    competition_rounds: usize,
) -> Result<(), CliError> {
    if queries < 3 {
        return Err(CliError::Validation("need at least 3 queries".into()));
    }
    if rounds < 2 {
        return Err(CliError::Validation(
            "snapshots need at least 2 rounds".into(),
        ));
    }
    let world = SynthWorld::generate(SynthConfig {
        seed,
        queries,
        ..Default::default()
    })?;
    // Train, online and offline queries are disjoint thirds.
    let third = queries / 3;
    let train: Vec<_> = (0..third)
        .map(|q| world.evolve(q, rounds))
        .collect::<Result<_, _>>()?;
    let held_out: Vec<_> = (2 * third..queries)
        .map(|q| world.evolve(q, rounds))
        .collect::<Result<_, _>>()?;
    let competitions = (third..2 * third)
        .map(|q| world.online_spec(q, competition_rounds))
        .collect::<Result<Vec<_>, _>>()?;

    let snap_path = out.join("snapshots.jsonl");
    write_snapshots(&train, create(&snap_path)?)?;
    write_snapshots(&held_out, create(&out.join("offline.jsonl"))?)?;
    let stats =
        serde_json::to_string(&world.env.stats).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_text(&out.join("stats.json"), &stats)?;
    let mut emb = create(&out.join("embeddings.txt"))?;
    world.env.store.write(&mut emb)?;
    emb.flush().map_err(|e| CliError::Runtime(e.to_string()))?;

    let models: BTreeMap<String, PathBuf> = [LabelMode::L, LabelMode::ROnly, LabelMode::COnly]
        .into_iter()
        .map(|m| {
            (
                m.name().to_string(),
                PathBuf::from(format!("model_{}.json", m.name())),
            )
        })
        .collect();
    let settings = Settings {
        paths: Paths {
            snapshots: Some("snapshots.jsonl".into()),
            offline_snapshots: Some("offline.jsonl".into()),
            stats: Some("stats.json".into()),
            embeddings: Some("embeddings.txt".into()),
            model: Some("model_l.json".into()),
            out_dir: Some("out".into()),
        },
        embedding_dimension: world.env.store.dimension(),
        engine: world.engine(),
        offline: OfflineSettings {
            models,
            ..Default::default()
        },
        competitions,
        ..Default::default()
    };
    let toml = toml::to_string(&settings).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_text(&out.join("rankpromo.toml"), &toml)?;
    print(&format!(
        "wrote {} training snapshots, {} offline snapshots and {} competitions to {}\n",
        train.len(),
        held_out.len(),
        settings.competitions.len(),
        out.display()
    ))
}

fn train(
    settings: &Settings,
    label_mode: Option<LabelMode>,
    dataset: Option<PathBuf>,
    dataset_out: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let mut config = settings.training.clone();
    if let Some(m) = label_mode {
        config.label_mode = m;
    }
    let data = match dataset {
        Some(p) => {
            let f = File::open(&p).map_err(|e| CliError::io(&p, e))?;
            read_dataset(BufReader::new(f))?
        }
        None => {
            let snaps = settings.snapshots(settings.paths.snapshots.as_deref())?;
            let stats = settings.stats(&snaps)?;
            let store = settings.store()?;
            generate_training_set(
                &snaps,
                &settings.engine,
                &stats,
                &store,
                &settings.bot,
                &config,
                &EmbeddingCoherenceProxy,
            )?
        }
    };
    if let Some(p) = dataset_out {
        let mut f = create(&p)?;
        write_dataset(&data, &mut f)?;
        f.flush().map_err(|e| CliError::io(&p, e))?;
    }
    let trained = cross_validate(&data, &config)?;
    let out = out
        .or_else(|| settings.paths.model.clone())
        .ok_or_else(|| CliError::Validation("no model output path".into()))?;
    let mut f = create(&out)?;
    trained.write(&mut f)?;
    f.flush().map_err(|e| CliError::io(&out, e))?;

    let md = &trained.metadata;
    let mut text = format!(
        "label mode {}, {} pairs in {} groups\n",
        md.label_mode.name(),
        md.dataset.pairs,
        md.dataset.groups
    );
    for g in &md.grid {
        text.push_str(&format!("C={:<8} mean NDCG {:.4}\n", g.c, g.mean_ndcg));
    }
    text.push_str(&format!("chosen C={}\n", md.chosen_c));
    text.push_str(&rankpromo::arena::render_weights(&trained.model));
    print(&text)
}

fn model_or_default(
    settings: &Settings,
    model: Option<PathBuf>,
) -> Result<Option<Arc<PairModel>>, CliError> {
    model
        .or_else(|| settings.paths.model.clone())
        .as_deref()
        .map(read_model)
        .transpose()
}

fn modify(
    settings: &Settings,
    query: &str,
    doc: &str,
    model: Option<PathBuf>,
    explain: bool,
) -> Result<(), CliError> {
    let model = model_or_default(settings, model)?
        .ok_or_else(|| CliError::Validation("no model given".into()))?;
    let snaps = settings.snapshots(settings.paths.snapshots.as_deref())?;
    let snap = snaps
        .iter()
        .find(|s| s.query.id == query)
        .ok_or_else(|| CliError::Validation(format!("no snapshot for query `{query}`")))?;
    let stats = settings.stats(&snaps)?;
    let store = settings.store()?;
    let m = modify_document(
        doc,
        &snap.query,
        &snap.history,
        &model,
        &stats,
        &store,
        &settings.bot,
    )?;
    if explain {
        let json =
            serde_json::to_string_pretty(&m.audit).map_err(|e| CliError::Runtime(e.to_string()))?;
        print(&format!("{json}\n"))
    } else {
        print(&format!("{}\n", m.document.text()))
    }
}

fn compete(settings: &Settings, model: Option<PathBuf>) -> Result<(), CliError> {
    if settings.competitions.is_empty() {
        return Err(CliError::Validation("no competitions configured".into()));
    }
    let model = model_or_default(settings, model)?;
    let store = settings.store()?;
    let fixed_stats = match &settings.paths.stats {
        Some(p) => Some(read_json(p)?),
        None => None,
    };
    let mut results: Vec<CompetitionResult> = Vec::new();
    for spec in &settings.competitions {
        if spec.has_humans() {
            return Err(CliError::Validation(format!(
                "competition `{}` has human players; use `serve`",
                spec.query.id
            )));
        }
        let config = spec.build(model.as_ref(), &|_| None)?;
        let env = match &fixed_stats {
            Some(stats) => Environment {
                stats: Clone::clone(stats),
                store: store.clone(),
            },
            None => Environment::for_competition(&config, store.clone()),
        };
        results.push(run_competition(config, &env)?);
    }
    let dir = settings.out_dir();
    let mut f = create(&dir.join("results.jsonl"))?;
    write_jsonl(&results, &mut f)?;
    f.flush().map_err(|e| CliError::io(&dir, e))?;
    let summary = summarize(&results);
    let table = render_table1(&summary);
    write_text(&dir.join("table1.txt"), &table)?;
    write_text(&dir.join("series.jsonl"), &render_series(&summary))?;
    print(&table)
}

fn offline(
    settings: &Settings,
    snapshots: Option<PathBuf>,
    n_perm: Option<usize>,
) -> Result<(), CliError> {
    let o = &settings.offline;
    if o.models.is_empty() {
        return Err(CliError::Validation("no offline models configured".into()));
    }
    let path = snapshots.or_else(|| settings.paths.offline_snapshots.clone());
    let snaps = settings.snapshots(path.as_deref())?;
    let queries = snaps
        .iter()
        .map(|s| {
            let t = o.round.unwrap_or(s.history.len().saturating_sub(1));
            OfflineQuery::from_snapshot(s, t)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let variants = o
        .models
        .iter()
        .map(|(name, p)| Ok((name.clone(), read_model(p)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let config = OfflineConfig {
        variants,
        bot: settings.bot,
        ranks: o.ranks.clone(),
        comparisons: o
            .comparisons
            .iter()
            .map(|[a, b]| (a.clone(), b.clone()))
            .collect(),
        n_perm: n_perm.unwrap_or(o.n_perm),
        seed: o.seed,
    };
    let env = Environment {
        stats: settings.stats(&snaps)?,
        store: settings.store()?,
    };
    let report = offline_eval(&queries, &config, &settings.engine, &env)?;
    let json = serde_json::to_string(&report).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_text(&settings.out_dir().join("offline_report.json"), &json)?;
    print(&render_offline_table(&report))
}

fn report(
    results: Option<PathBuf>,
    offline: Option<PathBuf>,
    model: Option<PathBuf>,
) -> Result<(), CliError> {
    if results.is_none() && offline.is_none() && model.is_none() {
        return Err(CliError::Validation(
            "nothing to report; pass --results, --offline or --model".into(),
        ));
    }
    let mut text = String::new();
    if let Some(p) = results {
        let f = File::open(&p).map_err(|e| CliError::io(&p, e))?;
        let results: Vec<CompetitionResult> = read_jsonl(BufReader::new(f))?;
        text.push_str(&render_table1(&summarize(&results)));
    }
    if let Some(p) = offline {
        let r: OfflineReport = read_json(&p)?;
        text.push_str(&render_offline_table(&r));
    }
    if let Some(p) = model {
        text.push_str(&rankpromo::arena::render_weights(read_model(&p)?.as_ref()));
    }
    print(&text)
}
