//! The five top-N recommenders over a shared sparse rating matrix and the
//! content vector spaces, plus wvec-based top-5 re-ranking.
//!
//! All five produce a [`RecommendationList`]: entries sorted by score
//! descending with ties broken by ascending movie id, never containing
//! the seed movie or anything the user already watched.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::emotion::{cosine_with_norm, norm, EmotionMode, EMOTION_DIM};
use crate::error::{Error, Result};
use crate::ingest::RatingEvent;
use crate::profile::GenreVocabulary;
use crate::store::{write_atomic, DatasetStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    ItemsByUsers,
    UsersByItems,
}

impl Orientation {
    fn flip(self) -> Self {
        match self {
            Orientation::ItemsByUsers => Orientation::UsersByItems,
            Orientation::UsersByItems => Orientation::ItemsByUsers,
        }
    }
}

/// Compressed sparse rows of ratings; rows are movies or users depending
/// on the orientation. No explicit zeros are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRatingMatrix {
    orientation: Orientation,
    row_ids: Vec<u64>,
    row_lookup: HashMap<u64, usize>,
    col_ids: Vec<u64>,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    row_norms: Vec<f64>,
}

impl SparseRatingMatrix {
    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn row_ids(&self) -> &[u64] {
        &self.row_ids
    }

    pub fn col_ids(&self) -> &[u64] {
        &self.col_ids
    }

    pub fn num_rows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn contains_row(&self, id: u64) -> bool {
        self.row_lookup.contains_key(&id)
    }

    fn row(&self, index: usize) -> (&[u32], &[f64]) {
        let span = self.row_ptr[index]..self.row_ptr[index + 1];
        (&self.cols[span.clone()], &self.vals[span])
    }

    /// Column ids with a stored rating in this row.
    pub fn row_col_ids(&self, id: u64) -> Option<Vec<u64>> {
        let index = *self.row_lookup.get(&id)?;
        let (cols, _) = self.row(index);
        Some(cols.iter().map(|c| self.col_ids[*c as usize]).collect())
    }

    /// Cosine similarity between two rows; absent cells are zeros.
    pub fn cosine_rows(&self, id_a: u64, id_b: u64) -> Result<f64> {
        let a = *self
            .row_lookup
            .get(&id_a)
            .ok_or_else(|| Error::NotFound(format!("row {id_a}")))?;
        let b = *self
            .row_lookup
            .get(&id_b)
            .ok_or_else(|| Error::NotFound(format!("row {id_b}")))?;
        Ok(self.cosine_indexed(a, b))
    }

    fn cosine_indexed(&self, a: usize, b: usize) -> f64 {
        let (norm_a, norm_b) = (self.row_norms[a], self.row_norms[b]);
        if norm_a == 0.0 || norm_b == 0.0 {
            return 0.0;
        }
        let (cols_a, vals_a) = self.row(a);
        let (cols_b, vals_b) = self.row(b);
        let mut dot = 0.0;
        let (mut i, mut j) = (0, 0);
        while i < cols_a.len() && j < cols_b.len() {
            match cols_a[i].cmp(&cols_b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    dot += vals_a[i] * vals_b[j];
                    i += 1;
                    j += 1;
                }
            }
        }
        dot / (norm_a * norm_b)
    }

    /// Rebuild with rows and columns swapped. Transposing twice yields the
    /// original matrix.
    pub fn transpose(&self) -> Self {
        let mut events = Vec::with_capacity(self.vals.len());
        for row in 0..self.row_ids.len() {
            let (cols, vals) = self.row(row);
            for (c, v) in cols.iter().zip(vals) {
                events.push((self.col_ids[*c as usize], self.row_ids[row], *v));
            }
        }
        build_from_cells(events, self.orientation.flip())
    }
}

/// Build the rating matrix from deduplicated events. Duplicate
/// `(user, movie)` pairs keep the latest timestamp.
pub fn build_rating_matrix(
    events: &[RatingEvent],
    orientation: Orientation,
) -> Result<SparseRatingMatrix> {
    if events.is_empty() {
        return Err(Error::EmptyDataset("no rating events".to_string()));
    }
    let mut dedup: BTreeMap<(u64, u64), (f64, i64)> = BTreeMap::new();
    for event in events {
        let slot = dedup
            .entry((event.user_id, event.movie_id))
            .or_insert((event.rating, event.timestamp));
        if (event.timestamp, event.rating) > (slot.1, slot.0) {
            *slot = (event.rating, event.timestamp);
        }
    }
    let cells: Vec<(u64, u64, f64)> = dedup
        .into_iter()
        .map(|((user, movie), (rating, _))| match orientation {
            Orientation::ItemsByUsers => (movie, user, rating),
            Orientation::UsersByItems => (user, movie, rating),
        })
        .collect();
    Ok(build_from_cells(cells, orientation))
}

fn build_from_cells(cells: Vec<(u64, u64, f64)>, orientation: Orientation) -> SparseRatingMatrix {
    let mut row_ids: Vec<u64> = cells.iter().map(|(r, _, _)| *r).collect();
    row_ids.sort_unstable();
    row_ids.dedup();
    let mut col_ids: Vec<u64> = cells.iter().map(|(_, c, _)| *c).collect();
    col_ids.sort_unstable();
    col_ids.dedup();
    let row_lookup: HashMap<u64, usize> =
        row_ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let col_lookup: HashMap<u64, usize> =
        col_ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();

    let mut by_row: Vec<Vec<(u32, f64)>> = vec![Vec::new(); row_ids.len()];
    for (r, c, v) in cells {
        by_row[row_lookup[&r]].push((col_lookup[&c] as u32, v));
    }
    let mut row_ptr = Vec::with_capacity(row_ids.len() + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    let mut row_norms = Vec::with_capacity(row_ids.len());
    row_ptr.push(0);
    for row in &mut by_row {
        row.sort_by_key(|(c, _)| *c);
        let mut sq = 0.0;
        for (c, v) in row.iter() {
            cols.push(*c);
            vals.push(*v);
            sq += v * v;
        }
        row_norms.push(sq.sqrt());
        row_ptr.push(cols.len());
    }
    SparseRatingMatrix {
        orientation,
        row_ids,
        row_lookup,
        col_ids,
        row_ptr,
        cols,
        vals,
        row_norms,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Ibcf,
    Ubcf,
    Gar,
    Ear,
    Mar,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Ibcf,
        Algorithm::Ubcf,
        Algorithm::Gar,
        Algorithm::Ear,
        Algorithm::Mar,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Ibcf => "IBCF",
            Algorithm::Ubcf => "UBCF",
            Algorithm::Gar => "GAR",
            Algorithm::Ear => "EAR",
            Algorithm::Mar => "MAR",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text.trim().to_ascii_lowercase().as_str() {
            "ibcf" => Ok(Algorithm::Ibcf),
            "ubcf" => Ok(Algorithm::Ubcf),
            "gar" => Ok(Algorithm::Gar),
            "ear" => Ok(Algorithm::Ear),
            "mar" => Ok(Algorithm::Mar),
            other => Err(Error::InvalidArgument(format!(
                "unknown algorithm {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredMovie {
    pub movie_id: u64,
    pub score: f64,
}

/// A ranked top-N list for one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationList {
    pub algorithm: Algorithm,
    pub user_id: u64,
    pub seed_movie: Option<u64>,
    /// Set when the list came out of [`rerank_top5`].
    pub reranked: bool,
    pub entries: Vec<ScoredMovie>,
}

impl RecommendationList {
    pub fn movie_ids(&self) -> Vec<u64> {
        self.entries.iter().map(|e| e.movie_id).collect()
    }
}

/// Sort by score descending, movie id ascending, then truncate.
fn rank_and_truncate(mut scored: Vec<ScoredMovie>, n: usize) -> Vec<ScoredMovie> {
    scored.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("scores are finite")
            .then(a.movie_id.cmp(&b.movie_id))
    });
    scored.truncate(n);
    scored
}

/// Item-based collaborative filtering: rank candidates by the cosine of
/// their rating rows against the seed movie's row.
pub fn ibcf_topn(
    matrix: &SparseRatingMatrix,
    seed_movie: u64,
    user_id: u64,
    watched: &BTreeSet<u64>,
    n: usize,
) -> Result<RecommendationList> {
    debug_assert_eq!(matrix.orientation(), Orientation::ItemsByUsers);
    let seed_index = *matrix
        .row_lookup
        .get(&seed_movie)
        .ok_or_else(|| Error::NotFound(format!("seed movie {seed_movie} not in matrix")))?;
    let mut scored = Vec::with_capacity(matrix.num_rows());
    for (index, movie_id) in matrix.row_ids.iter().enumerate() {
        if *movie_id == seed_movie || watched.contains(movie_id) {
            continue;
        }
        scored.push(ScoredMovie {
            movie_id: *movie_id,
            score: matrix.cosine_indexed(seed_index, index),
        });
    }
    Ok(RecommendationList {
        algorithm: Algorithm::Ibcf,
        user_id,
        seed_movie: Some(seed_movie),
        reranked: false,
        entries: rank_and_truncate(scored, n),
    })
}

/// User-based collaborative filtering: the top-k most similar users vote
/// on their movies with similarity-weighted average ratings.
pub fn ubcf_topn(
    matrix: &SparseRatingMatrix,
    user_id: u64,
    k: usize,
    n: usize,
) -> Result<RecommendationList> {
    debug_assert_eq!(matrix.orientation(), Orientation::UsersByItems);
    let user_index = *matrix
        .row_lookup
        .get(&user_id)
        .ok_or_else(|| Error::NotFound(format!("user {user_id} not in matrix")))?;

    let mut neighbors: Vec<(usize, f64)> = Vec::new();
    for index in 0..matrix.num_rows() {
        if index == user_index {
            continue;
        }
        let sim = matrix.cosine_indexed(user_index, index);
        if sim > 0.0 {
            neighbors.push((index, sim));
        }
    }
    neighbors.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("similarities are finite")
            .then(matrix.row_ids[a.0].cmp(&matrix.row_ids[b.0]))
    });
    neighbors.truncate(k);

    let (user_cols, _) = matrix.row(user_index);
    let watched_cols: BTreeSet<u32> = user_cols.iter().copied().collect();

    // weighted-average accumulation in neighbor rank order
    let mut weight_sums: BTreeMap<u32, (f64, f64)> = BTreeMap::new();
    for (index, sim) in &neighbors {
        let (cols, vals) = matrix.row(*index);
        for (c, v) in cols.iter().zip(vals) {
            if watched_cols.contains(c) {
                continue;
            }
            let slot = weight_sums.entry(*c).or_insert((0.0, 0.0));
            slot.0 += sim * v;
            slot.1 += sim;
        }
    }
    let scored: Vec<ScoredMovie> = weight_sums
        .into_iter()
        .map(|(c, (weighted, total))| ScoredMovie {
            movie_id: matrix.col_ids[c as usize],
            score: weighted / total,
        })
        .collect();
    Ok(RecommendationList {
        algorithm: Algorithm::Ubcf,
        user_id,
        seed_movie: None,
        reranked: false,
        entries: rank_and_truncate(scored, n),
    })
}

/// Which vector space a content-based recommender scores in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContentSpace {
    Genre,
    Emotion,
    Multi,
}

impl ContentSpace {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            ContentSpace::Genre => Algorithm::Gar,
            ContentSpace::Emotion => Algorithm::Ear,
            ContentSpace::Multi => Algorithm::Mar,
        }
    }
}

/// Weights for the multi-channel concatenation; both default to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContentParams {
    pub emotion_weight: f64,
    pub genre_weight: f64,
}

impl Default for ContentParams {
    fn default() -> Self {
        Self {
            emotion_weight: 1.0,
            genre_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct CatalogEntry {
    genre: Vec<f64>,
    emotion: Option<[f64; EMOTION_DIM]>,
}

/// Per-movie content vectors for one store under one emotion mode.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorCatalog {
    mode: EmotionMode,
    genre_dim: usize,
    entries: BTreeMap<u64, CatalogEntry>,
}

impl VectorCatalog {
    pub fn mode(&self) -> EmotionMode {
        self.mode
    }

    pub fn genre_dim(&self) -> usize {
        self.genre_dim
    }

    pub fn contains(&self, movie_id: u64) -> bool {
        self.entries.contains_key(&movie_id)
    }

    pub fn is_labeled(&self, movie_id: u64) -> bool {
        self.entries
            .get(&movie_id)
            .map(|e| e.emotion.is_some())
            .unwrap_or(false)
    }

    /// Full item vector `emotion || genre`, if the movie has a label.
    pub fn ivec(&self, movie_id: u64) -> Option<Vec<f64>> {
        let entry = self.entries.get(&movie_id)?;
        let emotion = entry.emotion?;
        let mut out = Vec::with_capacity(EMOTION_DIM + entry.genre.len());
        out.extend_from_slice(&emotion);
        out.extend_from_slice(&entry.genre);
        Some(out)
    }
}

/// Build the content vectors for every movie in the store.
pub fn build_catalog(
    store: &DatasetStore,
    vocab: &GenreVocabulary,
    mode: EmotionMode,
) -> Result<VectorCatalog> {
    mode.validate()?;
    let mut entries = BTreeMap::new();
    for (movie_id, movie) in &store.movies {
        let genre = vocab.encode(&movie.genres).to_f64();
        let emotion = store
            .labels
            .get(movie_id)
            .map(|label| crate::emotion::emotion_ohe(&label.values, mode));
        entries.insert(*movie_id, CatalogEntry { genre, emotion });
    }
    Ok(VectorCatalog {
        mode,
        genre_dim: vocab.len(),
        entries,
    })
}

fn space_vector(
    entry: &CatalogEntry,
    space: ContentSpace,
    params: &ContentParams,
) -> Option<Vec<f64>> {
    match space {
        ContentSpace::Genre => Some(entry.genre.clone()),
        ContentSpace::Emotion => entry.emotion.map(|e| e.to_vec()),
        ContentSpace::Multi => {
            let emotion = entry.emotion?;
            let mut out = Vec::with_capacity(EMOTION_DIM + entry.genre.len());
            out.extend(emotion.iter().map(|v| v * params.emotion_weight));
            out.extend(entry.genre.iter().map(|v| v * params.genre_weight));
            Some(out)
        }
    }
}

fn candidate_in_space(entry: &CatalogEntry, space: ContentSpace) -> bool {
    match space {
        ContentSpace::Genre => entry.genre.iter().any(|v| *v != 0.0),
        ContentSpace::Emotion | ContentSpace::Multi => entry.emotion.is_some(),
    }
}

/// Content-based top-N: rank candidates by the cosine between the seed's
/// and the candidate's vector in the chosen space.
///
/// Candidate pools: genre space uses movies with at least one genre;
/// emotion and multi spaces use labeled movies only.
pub fn content_topn(
    space: ContentSpace,
    seed_movie: u64,
    user_id: u64,
    watched: &BTreeSet<u64>,
    catalog: &VectorCatalog,
    params: &ContentParams,
    n: usize,
) -> Result<RecommendationList> {
    let seed_entry = catalog
        .entries
        .get(&seed_movie)
        .ok_or_else(|| Error::NotFound(format!("seed movie {seed_movie} not in catalog")))?;
    let seed_vec = match space {
        ContentSpace::Genre => {
            space_vector(seed_entry, space, params).expect("genre is always present")
        }
        ContentSpace::Emotion | ContentSpace::Multi => {
            space_vector(seed_entry, space, params).ok_or(Error::NoLabel(seed_movie))?
        }
    };
    let seed_norm = norm(&seed_vec);

    let mut scored = Vec::new();
    for (movie_id, entry) in &catalog.entries {
        if *movie_id == seed_movie || watched.contains(movie_id) {
            continue;
        }
        if !candidate_in_space(entry, space) {
            continue;
        }
        let vec = space_vector(entry, space, params).expect("candidate checked for space");
        scored.push(ScoredMovie {
            movie_id: *movie_id,
            score: cosine_with_norm(&seed_vec, seed_norm, &vec, norm(&vec)),
        });
    }
    Ok(RecommendationList {
        algorithm: space.algorithm(),
        user_id,
        seed_movie: Some(seed_movie),
        reranked: false,
        entries: rank_and_truncate(scored, n),
    })
}

/// A reranked list plus the number of input entries dropped for lack of
/// an item vector.
#[derive(Debug, Clone, PartialEq)]
pub struct RerankOutcome {
    pub list: RecommendationList,
    pub dropped: usize,
}

/// Re-rank a top-N list by cosine between the user's wvec and each
/// entry's full ivec, keeping the best `keep` (5 in the standard flow).
///
/// Entries without an ivec are dropped and counted; a shorter input just
/// comes back re-sorted in full. The output is always a subset of the
/// input entries.
pub fn rerank_top5(
    wvec: &[f64],
    top_list: &RecommendationList,
    catalog: &VectorCatalog,
    keep: usize,
) -> Result<RerankOutcome> {
    let expected_dim = EMOTION_DIM + catalog.genre_dim;
    if wvec.len() != expected_dim {
        return Err(Error::DimensionMismatch {
            left: wvec.len(),
            right: expected_dim,
        });
    }
    let wvec_norm = norm(wvec);
    let mut scored = Vec::with_capacity(top_list.entries.len());
    let mut dropped = 0;
    for entry in &top_list.entries {
        match catalog.ivec(entry.movie_id) {
            Some(ivec) => scored.push(ScoredMovie {
                movie_id: entry.movie_id,
                score: cosine_with_norm(wvec, wvec_norm, &ivec, norm(&ivec)),
            }),
            None => dropped += 1,
        }
    }
    Ok(RerankOutcome {
        list: RecommendationList {
            algorithm: top_list.algorithm,
            user_id: top_list.user_id,
            seed_movie: top_list.seed_movie,
            reranked: true,
            entries: rank_and_truncate(scored, keep),
        },
        dropped,
    })
}

/// Write a list as CSV: rank, movie id, title, score to six decimals.
pub fn write_list_csv(
    list: &RecommendationList,
    store: &DatasetStore,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    write_atomic(path, list_csv_bytes(list, store)?.as_slice())
}

pub fn list_csv_bytes(list: &RecommendationList, store: &DatasetStore) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["rank", "movie_id", "title", "score"])
        .map_err(|e| Error::format("list csv", e.to_string()))?;
    for (rank, entry) in list.entries.iter().enumerate() {
        let title = store
            .movies
            .get(&entry.movie_id)
            .map(|m| m.title.clone())
            .unwrap_or_default();
        w.write_record([
            (rank + 1).to_string(),
            entry.movie_id.to_string(),
            title,
            format!("{:.6}", entry.score),
        ])
        .map_err(|e| Error::format("list csv", e.to_string()))?;
    }
    w.into_inner()
        .map_err(|e| Error::format("list csv", e.to_string()))
}

/// Write a list as pretty JSON.
pub fn write_list_json(list: &RecommendationList, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = serde_json::to_vec_pretty(list)
        .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}
