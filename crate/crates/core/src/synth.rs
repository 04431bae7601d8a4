//! Deterministic synthetic fixtures: a seeded generator for MovieLens-style
//! input files, merged stores and random profile sets, used by tests,
//! demos and the `synth` subcommand.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::emotion::{EmotionVector, EMOTION_DIM, EMOTION_LABELS};
use crate::error::Result;
use crate::ingest::{
    merge_dataset, EmotionLabelRow, LinkRow, LoadOutcome, MovieRecord, RatingEvent,
};
use crate::profile::UserProfile;
use crate::store::{write_atomic, DatasetStore};

const GENRE_POOL: [&str; 19] = [
    "Action",
    "Adventure",
    "Animation",
    "Children",
    "Comedy",
    "Crime",
    "Documentary",
    "Drama",
    "Fantasy",
    "Film-Noir",
    "Horror",
    "IMAX",
    "Musical",
    "Mystery",
    "Romance",
    "Sci-Fi",
    "Thriller",
    "War",
    "Western",
];

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub name: String,
    pub users: usize,
    pub movies: usize,
    /// How many genre names from the pool are in play.
    pub genres: usize,
    /// Fraction of movies that get an emotion label.
    pub label_coverage: f64,
    pub min_ratings: usize,
    pub max_ratings: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            name: "synth".to_string(),
            users: 50,
            movies: 120,
            genres: 8,
            label_coverage: 0.9,
            min_ratings: 5,
            max_ratings: 25,
            seed: 42,
        }
    }
}

impl SynthSpec {
    /// A small world for unit-scale tests.
    pub fn small(seed: u64) -> Self {
        Self {
            name: "small".to_string(),
            users: 12,
            movies: 30,
            genres: 5,
            label_coverage: 0.85,
            min_ratings: 3,
            max_ratings: 10,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthTables {
    pub movies: Vec<MovieRecord>,
    pub events: Vec<RatingEvent>,
    pub links: Vec<LinkRow>,
    pub labels: Vec<EmotionLabelRow>,
}

/// Draw a random 7-class distribution (normalized exponentials).
pub fn random_distribution(rng: &mut impl Rng) -> [f64; EMOTION_DIM] {
    let mut values = [0.0; EMOTION_DIM];
    let mut total = 0.0;
    for v in values.iter_mut() {
        let u: f64 = rng.gen_range(1e-9..1.0);
        *v = -u.ln();
        total += *v;
    }
    for v in values.iter_mut() {
        *v /= total;
    }
    values
}

/// Standard normal via Box-Muller.
pub fn gaussian(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Perturb a distribution with per-component Gaussian noise, clamp at
/// zero and renormalize to sum 1.
pub fn perturbed_distribution(
    base: &[f64; EMOTION_DIM],
    sigma: f64,
    rng: &mut impl Rng,
) -> [f64; EMOTION_DIM] {
    let mut values = *base;
    let mut total = 0.0;
    for v in values.iter_mut() {
        *v = (*v + sigma * gaussian(rng)).max(0.0);
        total += *v;
    }
    if total > 0.0 {
        for v in values.iter_mut() {
            *v /= total;
        }
    }
    values
}

pub fn generate_tables(spec: &SynthSpec) -> SynthTables {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let genre_count = spec.genres.min(GENRE_POOL.len());

    let mut movies = Vec::with_capacity(spec.movies);
    let mut links = Vec::with_capacity(spec.movies);
    let mut labels = Vec::new();
    for i in 0..spec.movies {
        let movie_id = (i + 1) as u64;
        let mut genres: Vec<String> = Vec::new();
        let n_genres = rng.gen_range(0..=3usize.min(genre_count));
        while genres.len() < n_genres {
            let pick = GENRE_POOL[rng.gen_range(0..genre_count)].to_string();
            if !genres.contains(&pick) {
                genres.push(pick);
            }
        }
        genres.sort();
        movies.push(MovieRecord {
            movie_id,
            title: format!("Synthetic Movie {movie_id} ({})", 1980 + (movie_id % 40)),
            genres,
            tmdb_id: None,
            imdb_id: None,
        });
        links.push(LinkRow {
            movie_id,
            imdb_id: Some(900_000 + movie_id),
            tmdb_id: if rng.gen_bool(0.95) {
                Some(10_000 + movie_id)
            } else {
                None
            },
        });
        if rng.gen_bool(spec.label_coverage) {
            let values = EmotionVector::new(random_distribution(&mut rng)).expect("valid");
            labels.push(EmotionLabelRow {
                tid: 10_000 + movie_id,
                mid: movie_id,
                iid: 900_000 + movie_id,
                mood: values.mood().to_string(),
                values,
            });
        }
    }

    let mut events = Vec::new();
    for u in 0..spec.users {
        let user_id = (u + 1) as u64;
        let count = rng.gen_range(spec.min_ratings..=spec.max_ratings.min(spec.movies));
        let mut rated: Vec<u64> = Vec::with_capacity(count);
        while rated.len() < count {
            let movie_id = rng.gen_range(1..=spec.movies as u64);
            if !rated.contains(&movie_id) {
                rated.push(movie_id);
            }
        }
        let mut timestamp = 1_000_000_000 + rng.gen_range(0..1_000_000i64);
        for movie_id in rated {
            timestamp += rng.gen_range(3_600..864_000i64);
            events.push(RatingEvent {
                user_id,
                movie_id,
                rating: rng.gen_range(1..=10) as f64 * 0.5,
                timestamp,
            });
        }
    }

    SynthTables {
        movies,
        events,
        links,
        labels,
    }
}

/// Generate and merge in one step.
pub fn synth_store(spec: &SynthSpec) -> Result<DatasetStore> {
    let tables = generate_tables(spec);
    merge_dataset(
        &spec.name,
        LoadOutcome::clean(tables.movies),
        LoadOutcome::clean(tables.events),
        LoadOutcome::clean(tables.links),
        LoadOutcome::clean(tables.labels),
    )
}

/// Random profiles with distribution-valued uvecs for association tests.
/// wvecs carry just the emotion block (an empty genre vocabulary).
pub fn random_profiles(
    dataset: &str,
    count: usize,
    first_user_id: u64,
    rng: &mut impl Rng,
) -> Vec<UserProfile> {
    (0..count)
        .map(|i| {
            let uvec = random_distribution(rng);
            profile_from_uvec(
                dataset,
                first_user_id + i as u64,
                uvec,
                rng.gen_range(1..60),
            )
        })
        .collect()
}

pub fn profile_from_uvec(
    dataset: &str,
    user_id: u64,
    uvec: [f64; EMOTION_DIM],
    event_count: usize,
) -> UserProfile {
    UserProfile {
        user_id,
        dataset: dataset.to_string(),
        watched: (1..=event_count as u64).collect(),
        uvec: EmotionVector::new(uvec).expect("valid uvec"),
        wvec: uvec.to_vec(),
        event_count,
    }
}

/// Write the four MovieLens-style input files for a generated world.
pub fn write_input_csvs(tables: &SynthTables, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| crate::Error::io(dir, e))?;

    let mut ratings = String::from("userId,movieId,rating,timestamp\n");
    for e in &tables.events {
        ratings.push_str(&format!(
            "{},{},{:.1},{}\n",
            e.user_id, e.movie_id, e.rating, e.timestamp
        ));
    }
    write_atomic(&dir.join("ratings.csv"), ratings.as_bytes())?;

    let mut movies = csv::Writer::from_writer(Vec::new());
    movies
        .write_record(["movieId", "title", "genres"])
        .map_err(|e| crate::Error::format("movies.csv", e.to_string()))?;
    for m in &tables.movies {
        let genres = if m.genres.is_empty() {
            crate::ingest::NO_GENRES_TOKEN.to_string()
        } else {
            m.genres.join("|")
        };
        movies
            .write_record([m.movie_id.to_string(), m.title.clone(), genres])
            .map_err(|e| crate::Error::format("movies.csv", e.to_string()))?;
    }
    let bytes = movies
        .into_inner()
        .map_err(|e| crate::Error::format("movies.csv", e.to_string()))?;
    write_atomic(&dir.join("movies.csv"), &bytes)?;

    let mut links = String::from("movieId,imdbId,tmdbId\n");
    for l in &tables.links {
        links.push_str(&format!(
            "{},{},{}\n",
            l.movie_id,
            l.imdb_id.map(|v| format!("{v:07}")).unwrap_or_default(),
            l.tmdb_id.map(|v| v.to_string()).unwrap_or_default()
        ));
    }
    write_atomic(&dir.join("links.csv"), links.as_bytes())?;

    let mut labels = String::from("index,tid,mid,iid,mood,");
    labels.push_str(&EMOTION_LABELS.join(","));
    labels.push('\n');
    for (i, l) in tables.labels.iter().enumerate() {
        labels.push_str(&format!(
            "{},{},{},{},{}",
            i + 1,
            l.tid,
            l.mid,
            l.iid,
            l.mood
        ));
        for v in l.values.values() {
            labels.push_str(&format!(",{v}"));
        }
        labels.push('\n');
    }
    write_atomic(&dir.join("labels.csv"), labels.as_bytes())?;
    Ok(())
}
