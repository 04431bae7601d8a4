//! moodrec: ingest MovieLens-style data plus an emotion-label table,
//! build emotion profiles, pseudo-associate users across datasets, and
//! run/evaluate the five top-N recommenders.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use moodrec_core::associate::{
    associate_users, match_report, write_matches_csv, write_reports_jsonl, AssociateOptions,
};
use moodrec_core::emotion::EmotionMode;
use moodrec_core::evaluate::{run_experiment, ExperimentConfig, HoldoutSource};
use moodrec_core::ingest::ingest_dataset;
use moodrec_core::profile::{build_genre_vocab, build_user_profiles, ProfileBuild};
use moodrec_core::recommend::{
    build_catalog, build_rating_matrix, content_topn, ibcf_topn, list_csv_bytes, rerank_top5,
    ubcf_topn, Algorithm, ContentParams, ContentSpace, Orientation, RecommendationList,
};
use moodrec_core::store::{write_atomic, DatasetStore};
use moodrec_core::synth::{generate_tables, write_input_csvs, SynthSpec};
use moodrec_core::Error as CoreError;

#[derive(Parser)]
#[command(
    name = "moodrec",
    version,
    about = "Emotion-profile toolkit: dataset ingest, user pseudo-association and top-N recommenders",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse ratings/movies/links/labels files into a store directory
    Ingest(IngestArgs),
    /// Build user profiles for a store and write profiles.csv
    Profile(ProfileArgs),
    /// Link source users to their most similar target users
    Associate(AssociateArgs),
    /// Emit per-user association reports as JSON lines
    Report(ReportArgs),
    /// Generate a top-N list with one recommender
    Recommend(RecommendArgs),
    /// Re-rank a saved top-N list down to the best five by wvec/ivec similarity
    Rerank(RerankArgs),
    /// Run a configured experiment and write its report
    Evaluate(EvaluateArgs),
    /// Generate a deterministic synthetic input dataset
    Synth(SynthArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// ratings.csv (userId,movieId,rating,timestamp)
    #[arg(long)]
    ratings: PathBuf,
    /// movies.csv (movieId,title,genres)
    #[arg(long)]
    movies: PathBuf,
    /// links.csv (movieId,imdbId,tmdbId)
    #[arg(long)]
    links: PathBuf,
    /// emotion label table (index,tid,mid,iid,mood,<7 emotion columns>)
    #[arg(long)]
    labels: PathBuf,
    /// Dataset name; defaults to the output directory name
    #[arg(long)]
    name: Option<String>,
    /// Store directory to create
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ProfileArgs {
    /// Store directory
    #[arg(long)]
    store: PathBuf,
    /// Emotion mode: raw, onehot or multihot:<threshold>
    #[arg(long, default_value = "raw")]
    mode: String,
}

#[derive(Args)]
struct AssociateArgs {
    /// Source store directory
    #[arg(long)]
    source: PathBuf,
    /// Target store directory
    #[arg(long)]
    target: PathBuf,
    /// matches.csv output path
    #[arg(long)]
    out: PathBuf,
    /// Minimum labeled watch count on both sides
    #[arg(long, default_value_t = 1)]
    min_events: usize,
    /// Worker threads (output is identical for any count)
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args)]
struct ReportArgs {
    /// Source store directory
    #[arg(long)]
    source: PathBuf,
    /// Target store directory
    #[arg(long)]
    target: PathBuf,
    /// Source users to report on (default: all)
    #[arg(long, value_delimiter = ',')]
    users: Vec<u64>,
    /// JSON-lines output path
    #[arg(long)]
    out: PathBuf,
    /// Minimum labeled watch count on both sides
    #[arg(long, default_value_t = 1)]
    min_events: usize,
    /// Worker threads
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
    Table,
}

#[derive(Args)]
struct RecommendArgs {
    /// Store directory
    #[arg(long)]
    store: PathBuf,
    /// Algorithm: ibcf, ubcf, gar, ear or mar
    #[arg(long)]
    algo: String,
    /// Active user id
    #[arg(long)]
    user: u64,
    /// Seed movie id (required by every algorithm except ubcf)
    #[arg(long)]
    seed_movie: Option<u64>,
    /// List length
    #[arg(long, default_value_t = 20)]
    n: usize,
    /// UBCF neighborhood size
    #[arg(long, default_value_t = 50)]
    k: usize,
    /// Emotion mode: raw, onehot or multihot:<threshold>
    #[arg(long, default_value = "raw")]
    mode: String,
    /// Emotion block weight for mar
    #[arg(long, default_value_t = 1.0)]
    emotion_weight: f64,
    /// Genre block weight for mar
    #[arg(long, default_value_t = 1.0)]
    genre_weight: f64,
    /// Output format (default: table on stdout, csv with --out)
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    /// Write here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RerankArgs {
    /// Store directory
    #[arg(long)]
    store: PathBuf,
    /// User whose wvec drives the re-ranking
    #[arg(long)]
    user: u64,
    /// Input list (JSON, as written by recommend --format json)
    #[arg(long)]
    list: PathBuf,
    /// How many entries to keep
    #[arg(long, default_value_t = 5)]
    keep: usize,
    /// Emotion mode: raw, onehot or multihot:<threshold>
    #[arg(long, default_value = "raw")]
    mode: String,
    /// Output format (default: table on stdout, csv with --out)
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    /// Write here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Experiment config (TOML; see README for the schema)
    #[arg(long)]
    config: PathBuf,
    /// Write <prefix>.json and <prefix>.csv
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also print the table rendering
    #[arg(long, default_value_t = false)]
    table: bool,
    /// Override the config's worker count (cells are identical either way)
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct SynthArgs {
    /// Directory for ratings/movies/links/labels CSVs
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 50)]
    users: usize,
    #[arg(long, default_value_t = 120)]
    movies: usize,
    /// Distinct genre names in play
    #[arg(long, default_value_t = 8)]
    genres: usize,
    /// Fraction of movies that get an emotion label
    #[arg(long, default_value_t = 0.9)]
    label_coverage: f64,
    #[arg(long, default_value_t = 5)]
    min_ratings: usize,
    #[arg(long, default_value_t = 25)]
    max_ratings: usize,
    /// Generator seed; identical seeds give identical files
    #[arg(long, default_value_t = 42)]
    rng_seed: u64,
    /// Dataset name recorded when the files are ingested
    #[arg(long, default_value = "synth")]
    name: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<CoreError>() {
        Some(CoreError::InvalidArgument(_)) => 2,
        Some(CoreError::Io { .. }) | Some(CoreError::Format { .. }) => 3,
        Some(CoreError::EmptyDataset(_))
        | Some(CoreError::EmptyProfile(_))
        | Some(CoreError::NotFound(_))
        | Some(CoreError::NoLabel(_))
        | Some(CoreError::InsufficientHistory { .. })
        | Some(CoreError::UndefinedHit) => 4,
        Some(CoreError::DimensionMismatch { .. })
        | Some(CoreError::NonFiniteComponent { .. })
        | None => 5,
    }
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Ingest(args) => cmd_ingest(args),
        Command::Profile(args) => cmd_profile(args),
        Command::Associate(args) => cmd_associate(args),
        Command::Report(args) => cmd_report(args),
        Command::Recommend(args) => cmd_recommend(args),
        Command::Rerank(args) => cmd_rerank(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Synth(args) => cmd_synth(args),
    }
}

fn load_store(dir: &Path) -> anyhow::Result<DatasetStore> {
    let store =
        DatasetStore::load(dir).with_context(|| format!("loading store {}", dir.display()))?;
    Ok(store)
}

fn profiles_for(store: &DatasetStore, mode: EmotionMode) -> anyhow::Result<ProfileBuild> {
    let vocab = build_genre_vocab(store);
    Ok(build_user_profiles(store, &vocab, mode)?)
}

fn cmd_ingest(args: IngestArgs) -> anyhow::Result<()> {
    let name = args.name.unwrap_or_else(|| {
        args.out
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".to_string())
    });
    let store = ingest_dataset(
        &name,
        &args.ratings,
        &args.movies,
        &args.links,
        &args.labels,
    )?;
    store.persist(&args.out)?;
    let dropped = store.loss.total_dropped();
    println!(
        "store {:?}: {} movies, {} events, {} labels, {} users ({} rows dropped) -> {}",
        store.name,
        store.movies.len(),
        store.events.len(),
        store.labels.len(),
        store.user_ids().len(),
        dropped,
        args.out.display()
    );
    Ok(())
}

fn cmd_profile(args: ProfileArgs) -> anyhow::Result<()> {
    let mode = EmotionMode::parse(&args.mode)?;
    let store = load_store(&args.store)?;
    let vocab = build_genre_vocab(&store);
    let build = build_user_profiles(&store, &vocab, mode)?;
    moodrec_core::profile::write_profiles_csv(&build, &vocab, &args.store)?;
    println!(
        "{} profiles written to {} ({} users skipped: no labeled history)",
        build.profiles.len(),
        args.store.join("profiles.csv").display(),
        build.skipped_users.len()
    );
    Ok(())
}

fn cmd_associate(args: AssociateArgs) -> anyhow::Result<()> {
    let source_store = load_store(&args.source)?;
    let target_store = load_store(&args.target)?;
    let source = profiles_for(&source_store, EmotionMode::RawDistribution)?;
    let target = profiles_for(&target_store, EmotionMode::RawDistribution)?;
    let opts = AssociateOptions {
        min_event_count: args.min_events,
        workers: args.workers,
    };
    let table = associate_users(&source.profiles, &target.profiles, &opts)?;
    write_matches_csv(&table, &args.out)?;
    println!(
        "{} matches ({} -> {}) -> {}",
        table.rows.len(),
        table.source_dataset,
        table.target_dataset,
        args.out.display()
    );
    Ok(())
}

fn cmd_report(args: ReportArgs) -> anyhow::Result<()> {
    let source_store = load_store(&args.source)?;
    let target_store = load_store(&args.target)?;
    let source = profiles_for(&source_store, EmotionMode::RawDistribution)?;
    let target = profiles_for(&target_store, EmotionMode::RawDistribution)?;
    let opts = AssociateOptions {
        min_event_count: args.min_events,
        workers: args.workers,
    };
    let table = associate_users(&source.profiles, &target.profiles, &opts)?;
    let users: Vec<u64> = if args.users.is_empty() {
        table.rows.iter().map(|r| r.source_user).collect()
    } else {
        args.users.clone()
    };
    let mut reports = Vec::with_capacity(users.len());
    for user in users {
        reports.push(match_report(
            &table,
            user,
            &source.profiles,
            &target.profiles,
        )?);
    }
    write_reports_jsonl(&reports, &args.out)?;
    println!("{} reports -> {}", reports.len(), args.out.display());
    Ok(())
}

fn render_list(
    list: &RecommendationList,
    store: &DatasetStore,
    format: Option<OutputFormat>,
    out: Option<&Path>,
) -> anyhow::Result<()> {
    let format = format.unwrap_or(if out.is_some() {
        OutputFormat::Csv
    } else {
        OutputFormat::Table
    });
    let bytes = match format {
        OutputFormat::Csv => list_csv_bytes(list, store)?,
        OutputFormat::Json => {
            let mut b = serde_json::to_vec_pretty(list)?;
            b.push(b'\n');
            b
        }
        OutputFormat::Table => {
            let mut text = format!(
                "{} top-{} for user {}{}{}\n",
                list.algorithm.name(),
                list.entries.len(),
                list.user_id,
                list.seed_movie
                    .map(|s| format!(" (seed {s})"))
                    .unwrap_or_default(),
                if list.reranked { " [reranked]" } else { "" },
            );
            text.push_str(&format!(
                "{:>4}  {:>8}  {:<44}  {:>9}\n",
                "rank", "movie", "title", "score"
            ));
            for (rank, entry) in list.entries.iter().enumerate() {
                let title = store
                    .movies
                    .get(&entry.movie_id)
                    .map(|m| m.title.as_str())
                    .unwrap_or("");
                let title: String = title.chars().take(44).collect();
                text.push_str(&format!(
                    "{:>4}  {:>8}  {:<44}  {:>9.6}\n",
                    rank + 1,
                    entry.movie_id,
                    title,
                    entry.score
                ));
            }
            text.into_bytes()
        }
    };
    match out {
        Some(path) => {
            write_atomic(path, &bytes)?;
            println!("{} entries -> {}", list.entries.len(), path.display());
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            std::io::Write::write_all(&mut stdout, &bytes)?;
        }
    }
    Ok(())
}

fn cmd_recommend(args: RecommendArgs) -> anyhow::Result<()> {
    let algorithm = Algorithm::parse(&args.algo)?;
    let mode = EmotionMode::parse(&args.mode)?;
    let store = load_store(&args.store)?;
    let watched: BTreeSet<u64> = store
        .events
        .iter()
        .filter(|e| e.user_id == args.user)
        .map(|e| e.movie_id)
        .collect();
    if watched.is_empty() {
        return Err(CoreError::NotFound(format!("user {} has no events", args.user)).into());
    }
    let need_seed = || {
        args.seed_movie.ok_or_else(|| {
            CoreError::InvalidArgument(format!("--seed-movie is required for {}", algorithm.name()))
        })
    };

    let list = match algorithm {
        Algorithm::Ibcf => {
            let matrix = build_rating_matrix(&store.events, Orientation::ItemsByUsers)?;
            ibcf_topn(&matrix, need_seed()?, args.user, &watched, args.n)?
        }
        Algorithm::Ubcf => {
            let matrix = build_rating_matrix(&store.events, Orientation::UsersByItems)?;
            ubcf_topn(&matrix, args.user, args.k, args.n)?
        }
        Algorithm::Gar | Algorithm::Ear | Algorithm::Mar => {
            let space = match algorithm {
                Algorithm::Gar => ContentSpace::Genre,
                Algorithm::Ear => ContentSpace::Emotion,
                _ => ContentSpace::Multi,
            };
            let vocab = build_genre_vocab(&store);
            let catalog = build_catalog(&store, &vocab, mode)?;
            let params = ContentParams {
                emotion_weight: args.emotion_weight,
                genre_weight: args.genre_weight,
            };
            content_topn(
                space,
                need_seed()?,
                args.user,
                &watched,
                &catalog,
                &params,
                args.n,
            )?
        }
    };
    render_list(&list, &store, args.format, args.out.as_deref())
}

fn cmd_rerank(args: RerankArgs) -> anyhow::Result<()> {
    let mode = EmotionMode::parse(&args.mode)?;
    let store = load_store(&args.store)?;
    let text =
        std::fs::read_to_string(&args.list).map_err(|e| CoreError::io(args.list.clone(), e))?;
    let input: RecommendationList = serde_json::from_str(&text)
        .map_err(|e| CoreError::format(args.list.display().to_string(), e.to_string()))?;

    let vocab = build_genre_vocab(&store);
    let catalog = build_catalog(&store, &vocab, mode)?;
    let build = build_user_profiles(&store, &vocab, mode)?;
    let profile = build
        .profiles
        .iter()
        .find(|p| p.user_id == args.user)
        .ok_or_else(|| CoreError::NotFound(format!("profile for user {}", args.user)))?;
    let outcome = rerank_top5(&profile.wvec, &input, &catalog, args.keep)?;
    if outcome.dropped > 0 {
        eprintln!(
            "warning: {} entries had no item vector and were dropped",
            outcome.dropped
        );
    }
    render_list(&outcome.list, &store, args.format, args.out.as_deref())
}

fn cmd_evaluate(args: EvaluateArgs) -> anyhow::Result<()> {
    let text =
        std::fs::read_to_string(&args.config).map_err(|e| CoreError::io(args.config.clone(), e))?;
    let mut config = ExperimentConfig::from_toml_str(&text)?;
    if let Some(workers) = args.workers {
        config.workers = workers.max(1);
    }
    let store = load_store(&config.store)?;
    let linked = match (&config.holdout_source, &config.linked_store) {
        (HoldoutSource::Linked, Some(path)) => Some(load_store(path)?),
        _ => None,
    };
    let report = run_experiment(&config, &store, linked.as_ref())?;

    if let Some(prefix) = &args.out {
        let json_path = prefix.with_extension("json");
        let csv_path = prefix.with_extension("csv");
        write_atomic(&json_path, &report.to_json_bytes()?)?;
        write_atomic(&csv_path, &report.to_csv_bytes()?)?;
        println!(
            "{} cells -> {} and {}",
            report.cells.len(),
            json_path.display(),
            csv_path.display()
        );
    }
    if args.table || args.out.is_none() {
        print!("{}", report.to_table_string());
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> anyhow::Result<()> {
    let spec = SynthSpec {
        name: args.name,
        users: args.users,
        movies: args.movies,
        genres: args.genres,
        label_coverage: args.label_coverage,
        min_ratings: args.min_ratings,
        max_ratings: args.max_ratings,
        seed: args.rng_seed,
    };
    if !(0.0..=1.0).contains(&spec.label_coverage) {
        return Err(CoreError::InvalidArgument(format!(
            "label coverage {} must lie in [0, 1]",
            spec.label_coverage
        ))
        .into());
    }
    if spec.min_ratings == 0 || spec.min_ratings > spec.max_ratings {
        return Err(
            CoreError::InvalidArgument("need 0 < min-ratings <= max-ratings".to_string()).into(),
        );
    }
    let tables = generate_tables(&spec);
    write_input_csvs(&tables, &args.out)?;
    println!(
        "synthetic dataset {:?} (seed {}): {} movies, {} events, {} labels -> {}",
        spec.name,
        spec.seed,
        tables.movies.len(),
        tables.events.len(),
        tables.labels.len(),
        args.out.display()
    );
    Ok(())
}
