//! Per-movie item vectors and per-user profiles (watch list, uvec, wvec)
//! built from a [`DatasetStore`].

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use crate::emotion::{
    emotion_ohe, mean_vectors, EmotionMode, EmotionVector, GenreVector, ItemVector, EMOTION_DIM,
    EMOTION_LABELS,
};
use crate::error::{Error, Result};
use crate::store::{write_atomic, DatasetStore};

/// Sorted genre-name vocabulary with a stable name -> index lookup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenreVocabulary {
    names: Vec<String>,
    index: HashMap<String, usize>,
    fingerprint: u64,
}

impl GenreVocabulary {
    pub fn new(mut names: Vec<String>) -> Self {
        names.sort();
        names.dedup();
        let index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        let fingerprint = fnv1a(&names);
        Self {
            names,
            index,
            fingerprint,
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Multi-hot over this vocabulary. Unknown genre names are ignored.
    pub fn encode(&self, genres: &[String]) -> GenreVector {
        let mut bits = vec![0u8; self.names.len()];
        for genre in genres {
            if let Some(i) = self.index_of(genre) {
                bits[i] = 1;
            }
        }
        GenreVector::new(bits, self.fingerprint).expect("bits are binary")
    }
}

fn fnv1a(names: &[String]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for name in names {
        for byte in name.as_bytes() {
            hash ^= *byte as u64;
            hash = hash.wrapping_mul(0x100000001b3);
        }
        hash ^= 0xff;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// One user's emotion and taste profile.
#[derive(Debug, Clone, PartialEq)]
pub struct UserProfile {
    pub user_id: u64,
    pub dataset: String,
    /// Ascending movie ids of watched movies that carry an emotion label.
    pub watched: Vec<u64>,
    /// Mean of the watched movies' mvecs.
    pub uvec: EmotionVector,
    /// Mean of the watched movies' ivecs (dimension 7 + |vocab|).
    pub wvec: Vec<f64>,
    /// Number of labeled watched movies (equals `watched.len()`).
    pub event_count: usize,
}

/// Profiles plus the users that could not get one.
#[derive(Debug, Clone)]
pub struct ProfileBuild {
    pub profiles: Vec<UserProfile>,
    /// Users whose rating history contains no labeled movie.
    pub skipped_users: Vec<u64>,
}

impl ProfileBuild {
    pub fn by_user(&self) -> BTreeMap<u64, &UserProfile> {
        self.profiles.iter().map(|p| (p.user_id, p)).collect()
    }
}

/// Sorted union of all genre names in the store.
pub fn build_genre_vocab(store: &DatasetStore) -> GenreVocabulary {
    GenreVocabulary::new(store.genre_vocab.clone())
}

/// Build one movie's item vector: emotion block per `mode`, genre block as
/// a multi-hot over `vocab`.
pub fn build_ivec(
    movie_id: u64,
    store: &DatasetStore,
    vocab: &GenreVocabulary,
    mode: EmotionMode,
) -> Result<ItemVector> {
    let label = store
        .labels
        .get(&movie_id)
        .ok_or(Error::NoLabel(movie_id))?;
    let movie = store
        .movies
        .get(&movie_id)
        .ok_or_else(|| Error::NotFound(format!("movie {movie_id}")))?;
    let emotion = emotion_ohe(&label.values, mode);
    let genre = vocab.encode(&movie.genres);
    Ok(ItemVector::new(emotion, genre, mode))
}

/// Build profiles for every user with at least one labeled watched movie.
///
/// The uvec is the unweighted mean of the watched mvecs regardless of
/// `mode`; the wvec is the mean of the watched ivecs built with `mode`.
/// Ratings never weight either mean, and the result does not depend on
/// event order.
pub fn build_user_profiles(
    store: &DatasetStore,
    vocab: &GenreVocabulary,
    mode: EmotionMode,
) -> Result<ProfileBuild> {
    mode.validate()?;
    let mut watched_by_user: BTreeMap<u64, BTreeSet<u64>> = BTreeMap::new();
    let mut seen_users: BTreeSet<u64> = BTreeSet::new();
    for event in &store.events {
        seen_users.insert(event.user_id);
        if store.is_labeled(event.movie_id) {
            watched_by_user
                .entry(event.user_id)
                .or_default()
                .insert(event.movie_id);
        }
    }

    let mut ivec_cache: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for movie_id in store.labels.keys() {
        let ivec = build_ivec(*movie_id, store, vocab, mode)?;
        ivec_cache.insert(*movie_id, ivec.to_vec());
    }

    let mut profiles = Vec::with_capacity(watched_by_user.len());
    for (user_id, watched) in &watched_by_user {
        let watched: Vec<u64> = watched.iter().copied().collect();
        let mvecs: Vec<&[f64]> = watched
            .iter()
            .map(|m| store.labels[m].values.as_slice())
            .collect();
        let uvec_values = mean_vectors(&mvecs)?;
        let mut uvec = [0.0; EMOTION_DIM];
        uvec.copy_from_slice(&uvec_values);

        let ivecs: Vec<&[f64]> = watched.iter().map(|m| ivec_cache[m].as_slice()).collect();
        let wvec = mean_vectors(&ivecs)?;

        profiles.push(UserProfile {
            user_id: *user_id,
            dataset: store.name.clone(),
            event_count: watched.len(),
            watched,
            uvec: EmotionVector::new(uvec)?,
            wvec,
        });
    }

    let skipped_users = seen_users
        .iter()
        .filter(|u| !watched_by_user.contains_key(u))
        .copied()
        .collect();
    Ok(ProfileBuild {
        profiles,
        skipped_users,
    })
}

/// Write `profiles.csv`: user id, event count, the seven uvec columns,
/// then the wvec genre columns in vocabulary order.
pub fn write_profiles_csv(
    build: &ProfileBuild,
    vocab: &GenreVocabulary,
    dir: impl AsRef<Path>,
) -> Result<()> {
    let path = dir.as_ref().join(crate::store::PROFILES_FILE);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["user_id".to_string(), "event_count".to_string()];
    header.extend(EMOTION_LABELS.iter().map(|l| l.to_string()));
    header.extend(vocab.names().iter().cloned());
    w.write_record(&header)
        .map_err(|e| Error::format(crate::store::PROFILES_FILE, e.to_string()))?;
    for profile in &build.profiles {
        let mut record = vec![profile.user_id.to_string(), profile.event_count.to_string()];
        record.extend(profile.uvec.values().iter().map(|v| v.to_string()));
        record.extend(profile.wvec[EMOTION_DIM..].iter().map(|v| v.to_string()));
        w.write_record(&record)
            .map_err(|e| Error::format(crate::store::PROFILES_FILE, e.to_string()))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::format(crate::store::PROFILES_FILE, e.to_string()))?;
    write_atomic(&path, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{merge_dataset, EmotionLabelRow, LoadOutcome, MovieRecord, RatingEvent};

    fn label(mid: u64, values: [f64; EMOTION_DIM]) -> EmotionLabelRow {
        let values = EmotionVector::distribution(values).unwrap();
        EmotionLabelRow {
            tid: mid,
            mid,
            iid: mid,
            mood: values.mood().to_string(),
            values,
        }
    }

    fn movie(movie_id: u64, genres: &[&str]) -> MovieRecord {
        MovieRecord {
            movie_id,
            title: format!("M{movie_id}"),
            genres: genres.iter().map(|g| g.to_string()).collect(),
            tmdb_id: None,
            imdb_id: None,
        }
    }

    fn event(user_id: u64, movie_id: u64, timestamp: i64) -> RatingEvent {
        RatingEvent {
            user_id,
            movie_id,
            rating: 4.0,
            timestamp,
        }
    }

    fn two_movie_store() -> DatasetStore {
        merge_dataset(
            "t",
            LoadOutcome::clean(vec![
                movie(1, &["Drama"]),
                movie(2, &["Comedy", "Drama"]),
                movie(3, &[]),
            ]),
            LoadOutcome::clean(vec![
                event(1, 1, 10),
                event(1, 2, 20),
                event(2, 1, 30),
                event(3, 3, 40),
            ]),
            LoadOutcome::clean(vec![]),
            LoadOutcome::clean(vec![
                label(1, [0.2, 0.8, 0.0, 0.0, 0.0, 0.0, 0.0]),
                label(2, [0.4, 0.6, 0.0, 0.0, 0.0, 0.0, 0.0]),
            ]),
        )
        .unwrap()
    }

    #[test]
    fn vocab_is_sorted_union() {
        let store = two_movie_store();
        let vocab = build_genre_vocab(&store);
        assert_eq!(vocab.names(), &["Comedy".to_string(), "Drama".to_string()]);
        assert_eq!(vocab.index_of("Comedy"), Some(0));
        assert_eq!(vocab.index_of("Western"), None);
    }

    #[test]
    fn vocab_empty_when_all_movies_genre_less() {
        let store = merge_dataset(
            "t",
            LoadOutcome::clean(vec![movie(1, &[])]),
            LoadOutcome::clean(vec![event(1, 1, 10)]),
            LoadOutcome::clean(vec![]),
            LoadOutcome::clean(vec![label(1, [0.4, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1])]),
        )
        .unwrap();
        let vocab = build_genre_vocab(&store);
        assert!(vocab.is_empty());
        let ivec = build_ivec(1, &store, &vocab, EmotionMode::RawDistribution).unwrap();
        assert_eq!(ivec.dim(), EMOTION_DIM);
    }

    #[test]
    fn ivec_raw_mode_concatenates_label_and_genres() {
        let store = two_movie_store();
        let vocab = build_genre_vocab(&store);
        let ivec = build_ivec(1, &store, &vocab, EmotionMode::RawDistribution).unwrap();
        // movie 1: Drama only, vocab [Comedy, Drama]
        assert_eq!(
            ivec.to_vec(),
            vec![0.2, 0.8, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]
        );
    }

    #[test]
    fn ivec_onehot_mode() {
        let store = two_movie_store();
        let vocab = build_genre_vocab(&store);
        let ivec = build_ivec(1, &store, &vocab, EmotionMode::ArgmaxOnehot).unwrap();
        assert_eq!(
            ivec.to_vec(),
            vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]
        );
    }

    #[test]
    fn ivec_unlabeled_movie_errors() {
        let store = two_movie_store();
        let vocab = build_genre_vocab(&store);
        assert!(matches!(
            build_ivec(3, &store, &vocab, EmotionMode::RawDistribution),
            Err(Error::NoLabel(3))
        ));
    }

    #[test]
    fn profile_single_movie_equals_its_mvec() {
        let store = two_movie_store();
        let vocab = build_genre_vocab(&store);
        let build = build_user_profiles(&store, &vocab, EmotionMode::RawDistribution).unwrap();
        let by_user = build.by_user();
        let p2 = by_user[&2];
        assert_eq!(p2.watched, vec![1]);
        assert_eq!(p2.uvec.values()[..2], [0.2, 0.8]);
    }

    #[test]
    fn profile_two_movie_mean() {
        let store = two_movie_store();
        let vocab = build_genre_vocab(&store);
        let build = build_user_profiles(&store, &vocab, EmotionMode::RawDistribution).unwrap();
        let by_user = build.by_user();
        let p1 = by_user[&1];
        assert_eq!(p1.watched, vec![1, 2]);
        assert_eq!(p1.event_count, 2);
        assert!((p1.uvec.values()[0] - 0.3).abs() < 1e-15);
        assert!((p1.uvec.values()[1] - 0.7).abs() < 1e-15);
        // wvec emotion block equals uvec in raw mode
        assert_eq!(&p1.wvec[..EMOTION_DIM], p1.uvec.as_slice());
        // genre block: Comedy watched once of 2, Drama twice of 2
        assert!((p1.wvec[EMOTION_DIM] - 0.5).abs() < 1e-15);
        assert!((p1.wvec[EMOTION_DIM + 1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn user_with_only_unlabeled_movies_is_skipped() {
        let store = two_movie_store();
        let vocab = build_genre_vocab(&store);
        let build = build_user_profiles(&store, &vocab, EmotionMode::RawDistribution).unwrap();
        assert_eq!(build.skipped_users, vec![3]);
        assert_eq!(build.profiles.len(), 2);
    }

    #[test]
    fn profiles_are_event_order_independent() {
        let store = two_movie_store();
        let mut shuffled = store.clone();
        shuffled.events.reverse();
        let vocab = build_genre_vocab(&store);
        let a = build_user_profiles(&store, &vocab, EmotionMode::RawDistribution).unwrap();
        let b = build_user_profiles(&shuffled, &vocab, EmotionMode::RawDistribution).unwrap();
        assert_eq!(a.profiles, b.profiles);
    }

    #[test]
    fn recomputing_uvec_from_stored_mvecs_matches() {
        let store = two_movie_store();
        let vocab = build_genre_vocab(&store);
        let build = build_user_profiles(&store, &vocab, EmotionMode::RawDistribution).unwrap();
        for profile in &build.profiles {
            let mvecs: Vec<&[f64]> = profile
                .watched
                .iter()
                .map(|m| store.labels[m].values.as_slice())
                .collect();
            let recomputed = mean_vectors(&mvecs).unwrap();
            for (a, b) in recomputed.iter().zip(profile.uvec.as_slice()) {
                assert!((a - b).abs() <= 1e-12);
            }
            assert_eq!(profile.event_count, profile.watched.len());
        }
    }
}
