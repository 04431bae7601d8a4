//! Temporal splitting, hit-rate arithmetic and the experiment runner that
//! produces Table-shaped reports.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::associate::{associate_users, AssociateOptions};
use crate::emotion::{mean_vectors, EmotionMode, EmotionVector, EMOTION_DIM};
use crate::error::{Error, Result};
use crate::ingest::RatingEvent;
use crate::profile::{build_genre_vocab, build_ivec, GenreVocabulary, UserProfile};
use crate::recommend::{
    build_catalog, build_rating_matrix, content_topn, ibcf_topn, rerank_top5, ubcf_topn, Algorithm,
    ContentParams, ContentSpace, Orientation, RecommendationList, ScoredMovie,
};
use crate::store::DatasetStore;

/// One user's history split into an early train part and a later holdout.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitResult {
    pub user_id: u64,
    pub train: Vec<RatingEvent>,
    pub holdout: Vec<RatingEvent>,
    pub ratio: f64,
}

impl SplitResult {
    pub fn holdout_movie_ids(&self) -> BTreeSet<u64> {
        self.holdout.iter().map(|e| e.movie_id).collect()
    }

    pub fn train_movie_ids(&self) -> BTreeSet<u64> {
        self.train.iter().map(|e| e.movie_id).collect()
    }
}

/// Split one user's events by time: the earliest `ceil(ratio * n)` events
/// (clamped so both sides stay nonempty) become the train part.
///
/// Events are ordered by `(timestamp, movie_id)`; equal timestamps fall
/// back to the movie id, so the split is deterministic.
pub fn temporal_split(events: &[RatingEvent], ratio: f64) -> Result<SplitResult> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "split ratio {ratio} must lie in (0, 1)"
        )));
    }
    let user_id = events.first().map(|e| e.user_id).unwrap_or(0);
    if events.len() < 2 {
        return Err(Error::InsufficientHistory {
            user: user_id,
            events: events.len(),
        });
    }
    let mut sorted: Vec<RatingEvent> = events.to_vec();
    sorted.sort_by_key(|e| (e.timestamp, e.movie_id));
    let n = sorted.len();
    let train_len = ((ratio * n as f64).ceil() as usize).clamp(1, n - 1);
    let holdout = sorted.split_off(train_len);
    Ok(SplitResult {
        user_id,
        train: sorted,
        holdout,
        ratio,
    })
}

/// Hit percentage: `100 * |list ∩ holdout| / |list|`.
pub fn hit_rate(list: &RecommendationList, holdout: &BTreeSet<u64>) -> Result<f64> {
    if list.entries.is_empty() {
        return Err(Error::UndefinedHit);
    }
    let hits = list
        .entries
        .iter()
        .filter(|e| holdout.contains(&e.movie_id))
        .count();
    Ok(100.0 * hits as f64 / list.entries.len() as f64)
}

/// Render a hit percentage the way the tables print it: an integer when
/// exact, otherwise one decimal.
pub fn format_hit_percent(hits: usize, list_len: usize) -> String {
    if list_len == 0 {
        return "n/a".to_string();
    }
    if (100 * hits).is_multiple_of(list_len) {
        format!("{}%", 100 * hits / list_len)
    } else {
        format!("{:.1}%", 100.0 * hits as f64 / list_len as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileScope {
    /// Profiles and the rating matrix see only the user's train events.
    Train,
    /// Profiles and the matrix use full histories (reproduces the
    /// leak-prone variant).
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HoldoutSource {
    /// The user's own held-out events.
    SameDataset,
    /// The watch list of the pseudo-associated user in a linked store,
    /// minus the user's train movies.
    Linked,
}

fn default_algorithms() -> Vec<Algorithm> {
    Algorithm::ALL.to_vec()
}
fn default_top_n() -> usize {
    20
}
fn default_top5() -> usize {
    5
}
fn default_ratio() -> f64 {
    0.2
}
fn default_k() -> usize {
    50
}
fn default_emotion_mode() -> String {
    "raw".to_string()
}
fn default_profile_scope() -> ProfileScope {
    ProfileScope::Train
}
fn default_holdout_source() -> HoldoutSource {
    HoldoutSource::SameDataset
}
fn default_workers() -> usize {
    1
}

/// Declarative experiment configuration (TOML on disk).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Store directory; the CLI loads it, library callers may ignore it.
    pub store: PathBuf,
    /// Users to evaluate.
    pub users: Vec<u64>,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "default_top_n")]
    pub top_n: usize,
    #[serde(default = "default_top5")]
    pub top5: usize,
    #[serde(default = "default_ratio")]
    pub ratio: f64,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_emotion_mode")]
    pub emotion_mode: String,
    #[serde(default = "default_profile_scope")]
    pub profile_scope: ProfileScope,
    #[serde(default = "default_holdout_source")]
    pub holdout_source: HoldoutSource,
    #[serde(default)]
    pub linked_store: Option<PathBuf>,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Per-user seed movie overrides; the default seed is the
    /// highest-timestamp train event.
    #[serde(default)]
    pub seed_overrides: BTreeMap<String, u64>,
    #[serde(default)]
    pub emotion_weight: Option<f64>,
    #[serde(default)]
    pub genre_weight: Option<f64>,
}

impl ExperimentConfig {
    pub fn new(store: impl Into<PathBuf>, users: Vec<u64>) -> Self {
        Self {
            store: store.into(),
            users,
            algorithms: default_algorithms(),
            top_n: default_top_n(),
            top5: default_top5(),
            ratio: default_ratio(),
            k: default_k(),
            emotion_mode: default_emotion_mode(),
            profile_scope: default_profile_scope(),
            holdout_source: default_holdout_source(),
            linked_store: None,
            workers: default_workers(),
            seed_overrides: BTreeMap::new(),
            emotion_weight: None,
            genre_weight: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::format("experiment config", e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.users.is_empty() {
            return Err(Error::InvalidArgument("no users configured".to_string()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::InvalidArgument(
                "no algorithms configured".to_string(),
            ));
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "ratio {} must lie in (0, 1)",
                self.ratio
            )));
        }
        if self.top_n == 0 || self.top5 == 0 || self.k == 0 {
            return Err(Error::InvalidArgument(
                "top_n, top5 and k must be positive".to_string(),
            ));
        }
        if self.holdout_source == HoldoutSource::Linked && self.linked_store.is_none() {
            return Err(Error::InvalidArgument(
                "holdout-source linked requires linked_store".to_string(),
            ));
        }
        EmotionMode::parse(&self.emotion_mode)?;
        Ok(())
    }

    pub fn mode(&self) -> EmotionMode {
        EmotionMode::parse(&self.emotion_mode).expect("validated")
    }

    pub fn content_params(&self) -> ContentParams {
        ContentParams {
            emotion_weight: self.emotion_weight.unwrap_or(1.0),
            genre_weight: self.genre_weight.unwrap_or(1.0),
        }
    }

    pub fn seed_override(&self, user_id: u64) -> Option<u64> {
        self.seed_overrides.get(&user_id.to_string()).copied()
    }
}

/// One (user, algorithm) result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalCell {
    pub user_id: u64,
    pub algorithm: Algorithm,
    pub seed_movie: Option<u64>,
    /// Reason this cell produced nothing, when it did not run.
    pub skipped: Option<String>,
    pub top_n: Vec<ScoredMovie>,
    pub top5: Vec<ScoredMovie>,
    pub rerank_dropped: usize,
    pub holdout_size: usize,
    pub top_n_hits: usize,
    pub top_n_hit_pct: String,
    pub top5_hits: usize,
    pub top5_hit_pct: String,
}

impl EvalCell {
    fn skipped(user_id: u64, algorithm: Algorithm, reason: String) -> Self {
        Self {
            user_id,
            algorithm,
            seed_movie: None,
            skipped: Some(reason),
            top_n: Vec::new(),
            top5: Vec::new(),
            rerank_dropped: 0,
            holdout_size: 0,
            top_n_hits: 0,
            top_n_hit_pct: "n/a".to_string(),
            top5_hits: 0,
            top5_hit_pct: "n/a".to_string(),
        }
    }
}

/// The full experiment output: a config snapshot plus one cell per
/// (user, algorithm).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub dataset: String,
    pub config: ExperimentConfig,
    pub cells: Vec<EvalCell>,
}

struct UserContext {
    items_matrix: crate::recommend::SparseRatingMatrix,
    users_matrix: crate::recommend::SparseRatingMatrix,
    watched: BTreeSet<u64>,
    seed_movie: u64,
    profile: Option<UserProfile>,
    holdout: BTreeSet<u64>,
}

/// Build a single user's profile from an explicit event list.
fn profile_from_events(
    store: &DatasetStore,
    vocab: &GenreVocabulary,
    mode: EmotionMode,
    user_id: u64,
    events: &[RatingEvent],
) -> Result<Option<UserProfile>> {
    let mut watched: BTreeSet<u64> = BTreeSet::new();
    for event in events {
        if store.is_labeled(event.movie_id) {
            watched.insert(event.movie_id);
        }
    }
    if watched.is_empty() {
        return Ok(None);
    }
    let watched: Vec<u64> = watched.into_iter().collect();
    let mvecs: Vec<&[f64]> = watched
        .iter()
        .map(|m| store.labels[m].values.as_slice())
        .collect();
    let uvec_values = mean_vectors(&mvecs)?;
    let mut uvec = [0.0; EMOTION_DIM];
    uvec.copy_from_slice(&uvec_values);
    let ivecs: Vec<Vec<f64>> = watched
        .iter()
        .map(|m| build_ivec(*m, store, vocab, mode).map(|iv| iv.to_vec()))
        .collect::<Result<_>>()?;
    let wvec = mean_vectors(&ivecs)?;
    Ok(Some(UserProfile {
        user_id,
        dataset: store.name.clone(),
        event_count: watched.len(),
        watched,
        uvec: EmotionVector::new(uvec)?,
        wvec,
    }))
}

/// Run the configured experiment over one store (plus an optional linked
/// store for the linked holdout mode).
///
/// Per (user, algorithm): split the user's history, rebuild their profile
/// from the chosen scope, generate the top-N list, re-rank the top 5 by
/// wvec/ivec similarity, and score both lists against the holdout. The
/// run is deterministic for a given config and store.
pub fn run_experiment(
    config: &ExperimentConfig,
    store: &DatasetStore,
    linked: Option<&DatasetStore>,
) -> Result<EvaluationReport> {
    config.validate()?;
    if config.holdout_source == HoldoutSource::Linked && linked.is_none() {
        return Err(Error::InvalidArgument(
            "linked holdout requested but no linked store supplied".to_string(),
        ));
    }
    let mode = config.mode();
    let vocab = build_genre_vocab(store);
    let catalog = build_catalog(store, &vocab, mode)?;
    let params = config.content_params();

    // profiles of the linked store are needed once, in full scope
    let linked_profiles = match (config.holdout_source, linked) {
        (HoldoutSource::Linked, Some(linked_store)) => {
            let linked_vocab = build_genre_vocab(linked_store);
            Some(crate::profile::build_user_profiles(linked_store, &linked_vocab, mode)?.profiles)
        }
        _ => None,
    };

    let full_matrix_items = build_rating_matrix(&store.events, Orientation::ItemsByUsers)?;
    let full_matrix_users = build_rating_matrix(&store.events, Orientation::UsersByItems)?;

    let contexts: Vec<(u64, Result<UserContext>)> = {
        let build = |user_id: &u64| -> (u64, Result<UserContext>) {
            let context = build_user_context(
                config,
                store,
                &vocab,
                mode,
                linked,
                linked_profiles.as_deref(),
                &full_matrix_items,
                &full_matrix_users,
                *user_id,
            );
            (*user_id, context)
        };
        if config.workers > 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(config.workers)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
            pool.install(|| config.users.par_iter().map(build).collect())
        } else {
            config.users.iter().map(build).collect()
        }
    };

    let mut cells = Vec::new();
    for (user_id, context) in contexts {
        match context {
            Err(err) => {
                for algorithm in &config.algorithms {
                    cells.push(EvalCell::skipped(user_id, *algorithm, err.to_string()));
                }
            }
            Ok(context) => {
                for algorithm in &config.algorithms {
                    cells.push(evaluate_cell(
                        config, &catalog, &params, &context, user_id, *algorithm,
                    ));
                }
            }
        }
    }
    cells.sort_by_key(|c| {
        (
            c.user_id,
            config
                .algorithms
                .iter()
                .position(|a| *a == c.algorithm)
                .unwrap_or(usize::MAX),
        )
    });

    Ok(EvaluationReport {
        dataset: store.name.clone(),
        config: config.clone(),
        cells,
    })
}

#[allow(clippy::too_many_arguments)]
fn build_user_context(
    config: &ExperimentConfig,
    store: &DatasetStore,
    vocab: &GenreVocabulary,
    mode: EmotionMode,
    linked: Option<&DatasetStore>,
    linked_profiles: Option<&[UserProfile]>,
    full_matrix_items: &crate::recommend::SparseRatingMatrix,
    full_matrix_users: &crate::recommend::SparseRatingMatrix,
    user_id: u64,
) -> Result<UserContext> {
    let events: Vec<RatingEvent> = store
        .events
        .iter()
        .filter(|e| e.user_id == user_id)
        .cloned()
        .collect();
    if events.is_empty() {
        return Err(Error::NotFound(format!("user {user_id} has no events")));
    }
    let split = temporal_split(&events, config.ratio)?;

    let (items_matrix, users_matrix, profile_events, watched): (
        crate::recommend::SparseRatingMatrix,
        crate::recommend::SparseRatingMatrix,
        &[RatingEvent],
        BTreeSet<u64>,
    ) = match config.profile_scope {
        ProfileScope::Train => {
            // the user's holdout events leave the matrix entirely
            let holdout_ids = split.holdout_movie_ids();
            let scoped: Vec<RatingEvent> = store
                .events
                .iter()
                .filter(|e| e.user_id != user_id || !holdout_ids.contains(&e.movie_id))
                .cloned()
                .collect();
            (
                build_rating_matrix(&scoped, Orientation::ItemsByUsers)?,
                build_rating_matrix(&scoped, Orientation::UsersByItems)?,
                &split.train,
                split.train_movie_ids(),
            )
        }
        ProfileScope::Full => (
            full_matrix_items.clone(),
            full_matrix_users.clone(),
            &events[..],
            events.iter().map(|e| e.movie_id).collect(),
        ),
    };

    let profile = profile_from_events(store, vocab, mode, user_id, profile_events)?;

    let seed_movie = match config.seed_override(user_id) {
        Some(movie) => movie,
        None => {
            split
                .train
                .iter()
                .max_by_key(|e| (e.timestamp, e.movie_id))
                .expect("train side is nonempty")
                .movie_id
        }
    };

    let holdout: BTreeSet<u64> = match config.holdout_source {
        HoldoutSource::SameDataset => split.holdout_movie_ids(),
        HoldoutSource::Linked => {
            let linked_store = linked.expect("checked by caller");
            let profiles = linked_profiles.expect("built by caller");
            let own = profile.as_ref().ok_or_else(|| {
                Error::EmptyProfile(format!(
                    "user {user_id} has no labeled history to associate with"
                ))
            })?;
            let table = associate_users(
                std::slice::from_ref(own),
                profiles,
                &AssociateOptions::default(),
            )?;
            let target_user = table.rows[0].target_user;
            let target_movies: BTreeSet<u64> = linked_store
                .events
                .iter()
                .filter(|e| e.user_id == target_user)
                .map(|e| e.movie_id)
                .collect();
            target_movies.difference(&watched).copied().collect()
        }
    };

    Ok(UserContext {
        items_matrix,
        users_matrix,
        watched,
        seed_movie,
        profile,
        holdout,
    })
}

fn evaluate_cell(
    config: &ExperimentConfig,
    catalog: &crate::recommend::VectorCatalog,
    params: &ContentParams,
    context: &UserContext,
    user_id: u64,
    algorithm: Algorithm,
) -> EvalCell {
    let top = match algorithm {
        Algorithm::Ibcf => ibcf_topn(
            &context.items_matrix,
            context.seed_movie,
            user_id,
            &context.watched,
            config.top_n,
        ),
        Algorithm::Ubcf => ubcf_topn(&context.users_matrix, user_id, config.k, config.top_n),
        Algorithm::Gar => content_topn(
            ContentSpace::Genre,
            context.seed_movie,
            user_id,
            &context.watched,
            catalog,
            params,
            config.top_n,
        ),
        Algorithm::Ear => content_topn(
            ContentSpace::Emotion,
            context.seed_movie,
            user_id,
            &context.watched,
            catalog,
            params,
            config.top_n,
        ),
        Algorithm::Mar => content_topn(
            ContentSpace::Multi,
            context.seed_movie,
            user_id,
            &context.watched,
            catalog,
            params,
            config.top_n,
        ),
    };
    let top = match top {
        Ok(list) => list,
        Err(err) => return EvalCell::skipped(user_id, algorithm, err.to_string()),
    };

    let holdout = &context.holdout;
    let top_n_hits = top
        .entries
        .iter()
        .filter(|e| holdout.contains(&e.movie_id))
        .count();

    let (top5_entries, rerank_dropped, top5_hits, top5_pct) = match &context.profile {
        Some(profile) if !top.entries.is_empty() => {
            match rerank_top5(&profile.wvec, &top, catalog, config.top5) {
                Ok(outcome) => {
                    let hits = outcome
                        .list
                        .entries
                        .iter()
                        .filter(|e| holdout.contains(&e.movie_id))
                        .count();
                    let pct = format_hit_percent(hits, outcome.list.entries.len());
                    (outcome.list.entries, outcome.dropped, hits, pct)
                }
                Err(err) => return EvalCell::skipped(user_id, algorithm, format!("rerank: {err}")),
            }
        }
        Some(_) => (Vec::new(), 0, 0, "n/a".to_string()),
        None => (Vec::new(), 0, 0, "n/a (no labeled history)".to_string()),
    };

    EvalCell {
        user_id,
        algorithm,
        seed_movie: top.seed_movie,
        skipped: None,
        top_n_hit_pct: format_hit_percent(top_n_hits, top.entries.len()),
        top_n_hits,
        top_n: top.entries,
        top5: top5_entries,
        rerank_dropped,
        holdout_size: holdout.len(),
        top5_hits,
        top5_hit_pct: top5_pct,
    }
}

impl EvaluationReport {
    pub fn to_json_bytes(&self) -> Result<Vec<u8>> {
        let mut bytes = serde_json::to_vec_pretty(self)
            .map_err(|e| Error::format("report json", e.to_string()))?;
        bytes.push(b'\n');
        Ok(bytes)
    }

    fn users_in_order(&self) -> Vec<u64> {
        let mut users: Vec<u64> = self.cells.iter().map(|c| c.user_id).collect();
        users.sort_unstable();
        users.dedup();
        users
    }

    fn cell(&self, user_id: u64, algorithm: Algorithm) -> Option<&EvalCell> {
        self.cells
            .iter()
            .find(|c| c.user_id == user_id && c.algorithm == algorithm)
    }

    /// Table-shaped CSV: per user and list, one row per rank with one
    /// column per algorithm, closed by a `hit%` row.
    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let algorithms = &self.config.algorithms;
        let mut header = vec!["user".to_string(), "list".to_string(), "row".to_string()];
        header.extend(algorithms.iter().map(|a| a.name().to_string()));
        w.write_record(&header)
            .map_err(|e| Error::format("report csv", e.to_string()))?;

        for user in self.users_in_order() {
            for (list_name, len, select) in [
                (
                    "top20",
                    self.config.top_n,
                    Box::new(|c: &EvalCell| c.top_n.clone())
                        as Box<dyn Fn(&EvalCell) -> Vec<ScoredMovie>>,
                ),
                (
                    "top5",
                    self.config.top5,
                    Box::new(|c: &EvalCell| c.top5.clone()),
                ),
            ] {
                for rank in 0..len {
                    let mut record = vec![
                        user.to_string(),
                        list_name.to_string(),
                        (rank + 1).to_string(),
                    ];
                    let mut any = false;
                    for algorithm in algorithms {
                        let text = self
                            .cell(user, *algorithm)
                            .and_then(|c| select(c).get(rank).map(|e| e.movie_id.to_string()))
                            .unwrap_or_default();
                        any |= !text.is_empty();
                        record.push(text);
                    }
                    if !any {
                        continue;
                    }
                    w.write_record(&record)
                        .map_err(|e| Error::format("report csv", e.to_string()))?;
                }
                let mut record = vec![user.to_string(), list_name.to_string(), "hit%".to_string()];
                for algorithm in algorithms {
                    let text = match self.cell(user, *algorithm) {
                        Some(cell) if cell.skipped.is_none() => {
                            if list_name == "top20" {
                                cell.top_n_hit_pct.clone()
                            } else {
                                cell.top5_hit_pct.clone()
                            }
                        }
                        _ => "n/a".to_string(),
                    };
                    record.push(text);
                }
                w.write_record(&record)
                    .map_err(|e| Error::format("report csv", e.to_string()))?;
            }
        }
        w.into_inner()
            .map_err(|e| Error::format("report csv", e.to_string()))
    }

    /// Fixed-width rendering of the same table shape for terminals.
    pub fn to_table_string(&self) -> String {
        let algorithms = &self.config.algorithms;
        let mut out = String::new();
        for user in self.users_in_order() {
            for (list_name, len) in [("top-20", self.config.top_n), ("top-5", self.config.top5)] {
                out.push_str(&format!("U{user} {list_name}\n"));
                out.push_str(&format!("{:>6}", "rank"));
                for algorithm in algorithms {
                    out.push_str(&format!("{:>10}", algorithm.name()));
                }
                out.push('\n');
                for rank in 0..len {
                    let mut row = format!("{:>6}", rank + 1);
                    let mut any = false;
                    for algorithm in algorithms {
                        let entries = self.cell(user, *algorithm).map(|c| {
                            if list_name == "top-20" {
                                &c.top_n
                            } else {
                                &c.top5
                            }
                        });
                        let text = entries
                            .and_then(|e| e.get(rank).map(|s| s.movie_id.to_string()))
                            .unwrap_or_default();
                        any |= !text.is_empty();
                        row.push_str(&format!("{text:>10}"));
                    }
                    if !any {
                        break;
                    }
                    out.push_str(&row);
                    out.push('\n');
                }
                out.push_str(&format!("{:>6}", "Hit %"));
                for algorithm in algorithms {
                    let text = match self.cell(user, *algorithm) {
                        Some(cell) if cell.skipped.is_none() => {
                            if list_name == "top-20" {
                                cell.top_n_hit_pct.clone()
                            } else {
                                cell.top5_hit_pct.clone()
                            }
                        }
                        _ => "n/a".to_string(),
                    };
                    out.push_str(&format!("{text:>10}"));
                }
                out.push_str("\n\n");
            }
        }
        out
    }
}
