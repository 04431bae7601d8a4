//! Independent brute-force oracles used to cross-check the production
//! paths. Everything here recomputes from first principles with dense
//! vectors and plain loops; nothing calls the code it verifies.

// each test binary uses its own slice of these helpers
#![allow(dead_code)]

use std::collections::BTreeSet;

use moodrec_core::associate::{MatchRow, TIE_TOLERANCE};
use moodrec_core::emotion::{emotion_ohe, EmotionMode, EMOTION_DIM};
use moodrec_core::profile::{GenreVocabulary, UserProfile};
use moodrec_core::recommend::{Algorithm, ContentParams, ContentSpace, ScoredMovie};
use moodrec_core::store::DatasetStore;

/// Plain dense cosine; zero-norm operands yield 0.
pub fn dense_cosine(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut dot = 0.0;
    let mut norm_a = 0.0;
    let mut norm_b = 0.0;
    for i in 0..a.len() {
        dot += a[i] * b[i];
        norm_a += a[i] * a[i];
        norm_b += b[i] * b[i];
    }
    if norm_a == 0.0 || norm_b == 0.0 {
        return 0.0;
    }
    dot / (norm_a.sqrt() * norm_b.sqrt())
}

/// Naive double loop over every (source, target) pair.
pub fn oracle_associate(
    source: &[UserProfile],
    target: &[UserProfile],
    min_event_count: usize,
) -> Vec<MatchRow> {
    let mut sources: Vec<&UserProfile> = source
        .iter()
        .filter(|p| p.event_count >= min_event_count)
        .collect();
    sources.sort_by_key(|p| p.user_id);
    let mut targets: Vec<&UserProfile> = target
        .iter()
        .filter(|p| p.event_count >= min_event_count)
        .collect();
    targets.sort_by_key(|p| p.user_id);

    if targets.is_empty() || sources.is_empty() {
        return Vec::new();
    }
    let mut rows = Vec::new();
    for s in sources {
        let sims: Vec<f64> = targets
            .iter()
            .map(|t| dense_cosine(s.uvec.as_slice(), t.uvec.as_slice()))
            .collect();
        let best = sims.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let cutoff = best - TIE_TOLERANCE;
        let mut tie_count = 0;
        let mut matched = 0;
        for (j, sim) in sims.iter().enumerate() {
            if *sim >= cutoff {
                if tie_count == 0 {
                    matched = j;
                }
                tie_count += 1;
            }
        }
        rows.push(MatchRow {
            source_user: s.user_id,
            target_user: targets[matched].user_id,
            similarity: best,
            tie_count,
            source_count: s.event_count,
            target_count: targets[matched].event_count,
        });
    }
    rows
}

/// Sort by score descending then movie id ascending, truncate to n.
pub fn oracle_rank(mut scored: Vec<ScoredMovie>, n: usize) -> Vec<ScoredMovie> {
    scored.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap()
            .then(a.movie_id.cmp(&b.movie_id))
    });
    scored.truncate(n);
    scored
}

/// Dense rating rows: every movie (ascending id) as a vector over every
/// user (ascending id), absent ratings as zeros. Events must already be
/// deduplicated.
pub struct DenseRatings {
    pub user_ids: Vec<u64>,
    pub movie_ids: Vec<u64>,
    /// movie-major: `by_movie[i]` is movie `movie_ids[i]` over all users
    pub by_movie: Vec<Vec<f64>>,
    /// user-major mirror
    pub by_user: Vec<Vec<f64>>,
}

impl DenseRatings {
    pub fn build(events: &[moodrec_core::ingest::RatingEvent]) -> Self {
        let mut user_ids: Vec<u64> = events.iter().map(|e| e.user_id).collect();
        user_ids.sort_unstable();
        user_ids.dedup();
        let mut movie_ids: Vec<u64> = events.iter().map(|e| e.movie_id).collect();
        movie_ids.sort_unstable();
        movie_ids.dedup();
        let user_pos = |id: u64| user_ids.binary_search(&id).unwrap();
        let movie_pos = |id: u64| movie_ids.binary_search(&id).unwrap();
        let mut by_movie = vec![vec![0.0; user_ids.len()]; movie_ids.len()];
        let mut by_user = vec![vec![0.0; movie_ids.len()]; user_ids.len()];
        for e in events {
            by_movie[movie_pos(e.movie_id)][user_pos(e.user_id)] = e.rating;
            by_user[user_pos(e.user_id)][movie_pos(e.movie_id)] = e.rating;
        }
        Self {
            user_ids,
            movie_ids,
            by_movie,
            by_user,
        }
    }

    fn movie_row(&self, movie_id: u64) -> &[f64] {
        &self.by_movie[self.movie_ids.binary_search(&movie_id).unwrap()]
    }

    fn user_row(&self, user_id: u64) -> &[f64] {
        &self.by_user[self.user_ids.binary_search(&user_id).unwrap()]
    }
}

pub fn oracle_ibcf(
    dense: &DenseRatings,
    seed_movie: u64,
    watched: &BTreeSet<u64>,
    n: usize,
) -> Vec<ScoredMovie> {
    let seed_row = dense.movie_row(seed_movie);
    let mut scored = Vec::new();
    for (i, movie_id) in dense.movie_ids.iter().enumerate() {
        if *movie_id == seed_movie || watched.contains(movie_id) {
            continue;
        }
        scored.push(ScoredMovie {
            movie_id: *movie_id,
            score: dense_cosine(seed_row, &dense.by_movie[i]),
        });
    }
    oracle_rank(scored, n)
}

pub fn oracle_ubcf(dense: &DenseRatings, user_id: u64, k: usize, n: usize) -> Vec<ScoredMovie> {
    let user_row = dense.user_row(user_id);
    let mut neighbors: Vec<(u64, f64)> = Vec::new();
    for (i, other) in dense.user_ids.iter().enumerate() {
        if *other == user_id {
            continue;
        }
        let sim = dense_cosine(user_row, &dense.by_user[i]);
        if sim > 0.0 {
            neighbors.push((*other, sim));
        }
    }
    neighbors.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    neighbors.truncate(k);

    let mut scored = Vec::new();
    for (j, movie_id) in dense.movie_ids.iter().enumerate() {
        if user_row[j] != 0.0 {
            continue; // watched
        }
        let mut weighted = 0.0;
        let mut total = 0.0;
        for (other, sim) in &neighbors {
            let rating = dense.user_row(*other)[j];
            if rating != 0.0 {
                weighted += sim * rating;
                total += sim;
            }
        }
        if total > 0.0 {
            scored.push(ScoredMovie {
                movie_id: *movie_id,
                score: weighted / total,
            });
        }
    }
    oracle_rank(scored, n)
}

/// Dense content vectors straight from the store tables.
pub fn oracle_content_vector(
    store: &DatasetStore,
    vocab: &GenreVocabulary,
    mode: EmotionMode,
    params: &ContentParams,
    space: ContentSpace,
    movie_id: u64,
) -> Option<Vec<f64>> {
    let movie = store.movies.get(&movie_id)?;
    let mut genre = vec![0.0; vocab.len()];
    for g in &movie.genres {
        if let Some(i) = vocab.index_of(g) {
            genre[i] = 1.0;
        }
    }
    let emotion = store
        .labels
        .get(&movie_id)
        .map(|l| emotion_ohe(&l.values, mode));
    match space {
        ContentSpace::Genre => Some(genre),
        ContentSpace::Emotion => emotion.map(|e| e.to_vec()),
        ContentSpace::Multi => {
            let emotion = emotion?;
            let mut out = Vec::with_capacity(EMOTION_DIM + genre.len());
            out.extend(emotion.iter().map(|v| v * params.emotion_weight));
            out.extend(genre.iter().map(|v| v * params.genre_weight));
            Some(out)
        }
    }
}

fn oracle_is_candidate(store: &DatasetStore, space: ContentSpace, movie_id: u64) -> bool {
    match space {
        ContentSpace::Genre => store
            .movies
            .get(&movie_id)
            .map(|m| !m.genres.is_empty())
            .unwrap_or(false),
        ContentSpace::Emotion | ContentSpace::Multi => store.labels.contains_key(&movie_id),
    }
}

#[allow(clippy::too_many_arguments)]
pub fn oracle_content(
    store: &DatasetStore,
    vocab: &GenreVocabulary,
    mode: EmotionMode,
    params: &ContentParams,
    space: ContentSpace,
    seed_movie: u64,
    watched: &BTreeSet<u64>,
    n: usize,
) -> Option<Vec<ScoredMovie>> {
    let seed_vec = oracle_content_vector(store, vocab, mode, params, space, seed_movie)?;
    let mut scored = Vec::new();
    for movie_id in store.movies.keys() {
        if *movie_id == seed_movie || watched.contains(movie_id) {
            continue;
        }
        if !oracle_is_candidate(store, space, *movie_id) {
            continue;
        }
        let vec = oracle_content_vector(store, vocab, mode, params, space, *movie_id)
            .expect("candidate has the required vector");
        scored.push(ScoredMovie {
            movie_id: *movie_id,
            score: dense_cosine(&seed_vec, &vec),
        });
    }
    Some(oracle_rank(scored, n))
}

pub fn space_of(algorithm: Algorithm) -> Option<ContentSpace> {
    match algorithm {
        Algorithm::Gar => Some(ContentSpace::Genre),
        Algorithm::Ear => Some(ContentSpace::Emotion),
        Algorithm::Mar => Some(ContentSpace::Multi),
        _ => None,
    }
}
