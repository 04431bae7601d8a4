//! Loaders for MovieLens-style CSV files and the emotion-label table, and
//! the merge step that joins them into a [`DatasetStore`].
//!
//! Parsing is strict RFC-style CSV. Each loader counts what it drops so
//! that for every input file `raw rows = retained rows + dropped rows`.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;

use crate::emotion::{canonical_label, EmotionVector, EMOTION_DIM, EMOTION_LABELS};
use crate::error::{Error, Result};
use crate::store::{DatasetStore, FileLoss, LossReport};

pub const NO_GENRES_TOKEN: &str = "(no genres listed)";

/// Fraction of parse-failure rows above which a ratings file is rejected
/// outright instead of skipped row by row.
pub const MALFORMED_ABORT_FRACTION: f64 = 0.01;

/// One `(user, movie, rating, timestamp)` row.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RatingEvent {
    pub user_id: u64,
    pub movie_id: u64,
    pub rating: f64,
    pub timestamp: i64,
}

/// One movie with its genre list and optional external ids from the links
/// file.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct MovieRecord {
    pub movie_id: u64,
    pub title: String,
    pub genres: Vec<String>,
    pub tmdb_id: Option<u64>,
    pub imdb_id: Option<u64>,
}

/// One row of the links cross-reference file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkRow {
    pub movie_id: u64,
    pub imdb_id: Option<u64>,
    pub tmdb_id: Option<u64>,
}

/// One row of the emotion-label table: external ids, the argmax mood and
/// the full distribution.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EmotionLabelRow {
    pub tid: u64,
    pub mid: u64,
    pub iid: u64,
    pub mood: String,
    pub values: EmotionVector,
}

/// Rows that survived loading one file, plus per-stage drop counts and
/// counters for rows that were repaired rather than dropped.
#[derive(Debug, Clone)]
pub struct LoadOutcome<T> {
    pub rows: Vec<T>,
    pub raw_rows: u64,
    pub drops: BTreeMap<String, u64>,
    pub notes: BTreeMap<String, u64>,
}

impl<T> LoadOutcome<T> {
    pub fn clean(rows: Vec<T>) -> Self {
        let raw_rows = rows.len() as u64;
        Self {
            rows,
            raw_rows,
            drops: BTreeMap::new(),
            notes: BTreeMap::new(),
        }
    }

    fn empty() -> Self {
        Self::clean(Vec::new())
    }

    fn drop_row(&mut self, stage: &str) {
        *self.drops.entry(stage.to_string()).or_insert(0) += 1;
    }

    fn note(&mut self, key: &str) {
        *self.notes.entry(key.to_string()).or_insert(0) += 1;
    }
}

fn open_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(file))
}

fn file_label(path: &Path) -> String {
    path.display().to_string()
}

fn check_header(path: &Path, reader: &mut csv::Reader<std::fs::File>, want: &[&str]) -> Result<()> {
    let headers = reader
        .headers()
        .map_err(|e| Error::format(file_label(path), format!("unreadable header: {e}")))?;
    let got: Vec<&str> = headers
        .iter()
        .map(|h| h.trim_start_matches('\u{feff}').trim())
        .collect();
    if got != want {
        return Err(Error::format(
            file_label(path),
            format!(
                "expected header {:?}, found {:?}",
                want.join(","),
                got.join(",")
            ),
        ));
    }
    Ok(())
}

fn is_valid_rating(r: f64) -> bool {
    (0.5..=5.0).contains(&r) && (r * 2.0).fract() == 0.0
}

/// Load `ratings.csv` (`userId,movieId,rating,timestamp`).
///
/// Unparseable rows are skipped and counted as `malformed`; rows with a
/// rating outside the half-step 0.5..=5.0 scale or a negative timestamp
/// are skipped and counted as `out_of_range`. If more than 1% of the rows
/// fail to parse the whole file is rejected.
pub fn load_ratings(path: impl AsRef<Path>) -> Result<LoadOutcome<RatingEvent>> {
    let path = path.as_ref();
    let mut reader = open_reader(path)?;
    check_header(
        path,
        &mut reader,
        &["userId", "movieId", "rating", "timestamp"],
    )?;

    let mut out = LoadOutcome::empty();
    for record in reader.records() {
        out.raw_rows += 1;
        let record = match record {
            Ok(r) => r,
            Err(_) => {
                out.drop_row("malformed");
                continue;
            }
        };
        let parsed = (
            record.get(0).and_then(|s| s.trim().parse::<u64>().ok()),
            record.get(1).and_then(|s| s.trim().parse::<u64>().ok()),
            record.get(2).and_then(|s| s.trim().parse::<f64>().ok()),
            record.get(3).and_then(|s| s.trim().parse::<i64>().ok()),
        );
        let (Some(user_id), Some(movie_id), Some(rating), Some(timestamp)) = parsed else {
            out.drop_row("malformed");
            continue;
        };
        if user_id == 0 || movie_id == 0 {
            out.drop_row("malformed");
            continue;
        }
        if !is_valid_rating(rating) || timestamp < 0 {
            out.drop_row("out_of_range");
            continue;
        }
        out.rows.push(RatingEvent {
            user_id,
            movie_id,
            rating,
            timestamp,
        });
    }

    let malformed = *out.drops.get("malformed").unwrap_or(&0);
    if out.raw_rows > 0 && malformed as f64 > MALFORMED_ABORT_FRACTION * out.raw_rows as f64 {
        return Err(Error::format(
            file_label(path),
            format!("{malformed} of {} rows are malformed", out.raw_rows),
        ));
    }
    Ok(out)
}

/// Load `movies.csv` (`movieId,title,genres`). The genre field is split on
/// `|`; the `(no genres listed)` token yields an empty list.
pub fn load_movies(path: impl AsRef<Path>) -> Result<LoadOutcome<MovieRecord>> {
    let path = path.as_ref();
    let mut reader = open_reader(path)?;
    check_header(path, &mut reader, &["movieId", "title", "genres"])?;

    let mut out = LoadOutcome::empty();
    let mut seen = HashSet::new();
    for record in reader.records() {
        out.raw_rows += 1;
        let record = match record {
            Ok(r) => r,
            Err(_) => {
                out.drop_row("malformed");
                continue;
            }
        };
        let movie_id = match record.get(0).and_then(|s| s.trim().parse::<u64>().ok()) {
            Some(id) if id > 0 => id,
            _ => {
                out.drop_row("malformed");
                continue;
            }
        };
        if !seen.insert(movie_id) {
            return Err(Error::format(
                file_label(path),
                format!("duplicate movie id {movie_id}"),
            ));
        }
        let title = record.get(1).unwrap_or("").to_string();
        let genres = parse_genres(record.get(2).unwrap_or(""));
        out.rows.push(MovieRecord {
            movie_id,
            title,
            genres,
            tmdb_id: None,
            imdb_id: None,
        });
    }
    Ok(out)
}

pub fn parse_genres(field: &str) -> Vec<String> {
    let field = field.trim();
    if field.is_empty() || field == NO_GENRES_TOKEN {
        return Vec::new();
    }
    field
        .split('|')
        .map(|g| g.trim().to_string())
        .filter(|g| !g.is_empty())
        .collect()
}

/// Load `links.csv` (`movieId,imdbId,tmdbId`). Blank external ids yield
/// absent values; the row is retained.
pub fn load_links(path: impl AsRef<Path>) -> Result<LoadOutcome<LinkRow>> {
    let path = path.as_ref();
    let mut reader = open_reader(path)?;
    check_header(path, &mut reader, &["movieId", "imdbId", "tmdbId"])?;

    let mut out = LoadOutcome::empty();
    let mut seen = HashSet::new();
    for record in reader.records() {
        out.raw_rows += 1;
        let record = match record {
            Ok(r) => r,
            Err(_) => {
                out.drop_row("malformed");
                continue;
            }
        };
        let movie_id = match record.get(0).and_then(|s| s.trim().parse::<u64>().ok()) {
            Some(id) if id > 0 => id,
            _ => {
                out.drop_row("malformed");
                continue;
            }
        };
        if !seen.insert(movie_id) {
            return Err(Error::format(
                file_label(path),
                format!("duplicate movie id {movie_id}"),
            ));
        }
        let imdb_id = parse_optional_id(record.get(1));
        let tmdb_id = parse_optional_id(record.get(2));
        out.rows.push(LinkRow {
            movie_id,
            imdb_id,
            tmdb_id,
        });
    }
    Ok(out)
}

fn parse_optional_id(field: Option<&str>) -> Option<u64> {
    let text = field.unwrap_or("").trim();
    if text.is_empty() {
        return None;
    }
    text.parse::<u64>().ok()
}

/// Load the emotion-label table. The header must contain `index`, `tid`,
/// `mid`, `iid`, `mood` and the seven emotion columns (aliases such as
/// `joy`/`sadness` are accepted and mapped to canonical labels).
///
/// Rows whose values fail the distribution check are dropped and counted;
/// a mood that disagrees with the distribution argmax is recomputed and
/// the row kept, with the disagreement counted separately.
pub fn load_emotion_labels(path: impl AsRef<Path>) -> Result<LoadOutcome<EmotionLabelRow>> {
    let path = path.as_ref();
    let mut reader = open_reader(path)?;
    let headers = reader
        .headers()
        .map_err(|e| Error::format(file_label(path), format!("unreadable header: {e}")))?
        .clone();

    let mut column = HashMap::new();
    let mut emotion_cols = [usize::MAX; EMOTION_DIM];
    for (pos, name) in headers.iter().enumerate() {
        let name = name.trim_start_matches('\u{feff}').trim();
        if let Some(idx) = canonical_label(name) {
            emotion_cols[idx] = pos;
        } else {
            column.insert(name.to_ascii_lowercase(), pos);
        }
    }
    for (idx, pos) in emotion_cols.iter().enumerate() {
        if *pos == usize::MAX {
            return Err(Error::format(
                file_label(path),
                format!("missing emotion column {:?}", EMOTION_LABELS[idx]),
            ));
        }
    }
    let need = |name: &str| -> Result<usize> {
        column
            .get(name)
            .copied()
            .ok_or_else(|| Error::format(file_label(path), format!("missing column {name:?}")))
    };
    let (tid_col, mid_col, iid_col, mood_col) =
        (need("tid")?, need("mid")?, need("iid")?, need("mood")?);

    let mut out = LoadOutcome::empty();
    for record in reader.records() {
        out.raw_rows += 1;
        let record = match record {
            Ok(r) => r,
            Err(_) => {
                out.drop_row("malformed");
                continue;
            }
        };
        let ids = (
            record
                .get(tid_col)
                .and_then(|s| s.trim().parse::<u64>().ok()),
            record
                .get(mid_col)
                .and_then(|s| s.trim().parse::<u64>().ok()),
            record
                .get(iid_col)
                .and_then(|s| s.trim().parse::<u64>().ok()),
        );
        let (Some(tid), Some(mid), Some(iid)) = ids else {
            out.drop_row("malformed");
            continue;
        };
        let mood_raw = record.get(mood_col).unwrap_or("").trim();
        let Some(mood_idx) = canonical_label(mood_raw) else {
            out.drop_row("malformed");
            continue;
        };

        let mut values = [0.0; EMOTION_DIM];
        let mut ok = true;
        for (i, col) in emotion_cols.iter().enumerate() {
            match record.get(*col).and_then(|s| s.trim().parse::<f64>().ok()) {
                Some(v) => values[i] = v,
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            out.drop_row("malformed");
            continue;
        }
        let values = match EmotionVector::distribution(values) {
            Ok(v) => v,
            Err(_) => {
                out.drop_row("bad_distribution");
                continue;
            }
        };

        let argmax = values.argmax();
        if argmax != mood_idx {
            out.note("mood_recomputed");
        }
        out.rows.push(EmotionLabelRow {
            tid,
            mid,
            iid,
            mood: EMOTION_LABELS[argmax].to_string(),
            values,
        });
    }
    Ok(out)
}

/// Join loaded tables into a validated [`DatasetStore`].
///
/// Movies keep their links ids where present; movies with no rating event
/// are dropped; events referencing unknown movies are dropped; duplicate
/// `(user, movie)` ratings keep the latest timestamp. Movies without an
/// emotion label are retained (the emotion-side consumers skip them).
pub fn merge_dataset(
    name: &str,
    movies: LoadOutcome<MovieRecord>,
    events: LoadOutcome<RatingEvent>,
    links: LoadOutcome<LinkRow>,
    labels: LoadOutcome<EmotionLabelRow>,
) -> Result<DatasetStore> {
    let mut movie_table: BTreeMap<u64, MovieRecord> = BTreeMap::new();
    for movie in movies.rows {
        movie_table.insert(movie.movie_id, movie);
    }

    // attach cross-reference ids
    let mut links_loss = FileLoss::new(links.raw_rows, links.drops, links.notes);
    let mut link_applied: BTreeMap<u64, LinkRow> = BTreeMap::new();
    for link in links.rows {
        if movie_table.contains_key(&link.movie_id) {
            link_applied.insert(link.movie_id, link);
        } else {
            links_loss.drop_row("unknown_movie");
        }
    }

    // events: drop unknown movies, then dedup (user, movie) keeping the
    // latest timestamp (ties break on the higher rating, so the outcome
    // does not depend on row order)
    let mut events_loss = FileLoss::new(events.raw_rows, events.drops, events.notes);
    let mut dedup: BTreeMap<(u64, u64), RatingEvent> = BTreeMap::new();
    for event in events.rows {
        if !movie_table.contains_key(&event.movie_id) {
            events_loss.drop_row("unknown_movie");
            continue;
        }
        match dedup.entry((event.user_id, event.movie_id)) {
            Entry::Vacant(slot) => {
                slot.insert(event);
            }
            Entry::Occupied(mut slot) => {
                events_loss.drop_row("duplicate");
                let kept = slot.get();
                if (event.timestamp, event.rating) > (kept.timestamp, kept.rating) {
                    slot.insert(event);
                }
            }
        }
    }

    let rated: BTreeSet<u64> = dedup.keys().map(|(_, movie_id)| *movie_id).collect();

    // movies without any rating are dropped
    let mut movies_loss = FileLoss::new(movies.raw_rows, movies.drops, movies.notes);
    let mut retained_movies: BTreeMap<u64, MovieRecord> = BTreeMap::new();
    for (movie_id, mut movie) in movie_table {
        if !rated.contains(&movie_id) {
            movies_loss.drop_row("no_ratings");
            continue;
        }
        if let Some(link) = link_applied.get(&movie_id) {
            movie.tmdb_id = link.tmdb_id;
            movie.imdb_id = link.imdb_id;
        }
        retained_movies.insert(movie_id, movie);
    }
    for link_id in link_applied.keys() {
        if !retained_movies.contains_key(link_id) {
            links_loss.drop_row("movie_dropped");
        }
    }
    links_loss.retained = links_loss.raw_rows - links_loss.dropped();

    // labels: keyed by MovieLens id, first row wins
    let mut labels_loss = FileLoss::new(labels.raw_rows, labels.drops, labels.notes);
    let mut label_table: BTreeMap<u64, EmotionLabelRow> = BTreeMap::new();
    for label in labels.rows {
        if !retained_movies.contains_key(&label.mid) {
            labels_loss.drop_row("unknown_movie");
            continue;
        }
        match label_table.entry(label.mid) {
            Entry::Vacant(slot) => {
                slot.insert(label);
            }
            Entry::Occupied(_) => labels_loss.drop_row("duplicate"),
        }
    }
    labels_loss.retained = labels_loss.raw_rows - labels_loss.dropped();

    // canonical event order: (user, timestamp, movie)
    let mut retained_events: Vec<RatingEvent> = dedup.into_values().collect();
    retained_events.sort_by_key(|e| (e.user_id, e.timestamp, e.movie_id));
    events_loss.retained = retained_events.len() as u64;

    movies_loss.retained = retained_movies.len() as u64;

    if retained_movies.is_empty() || retained_events.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "dataset {name:?} has no rated movies after the merge"
        )));
    }

    let mut genre_vocab: BTreeSet<String> = BTreeSet::new();
    for movie in retained_movies.values() {
        genre_vocab.extend(movie.genres.iter().cloned());
    }

    let mut loss = LossReport::default();
    loss.files.insert("movies".into(), movies_loss);
    loss.files.insert("ratings".into(), events_loss);
    loss.files.insert("links".into(), links_loss);
    loss.files.insert("labels".into(), labels_loss);

    Ok(DatasetStore {
        name: name.to_string(),
        movies: retained_movies,
        events: retained_events,
        labels: label_table,
        genre_vocab: genre_vocab.into_iter().collect(),
        loss,
    })
}

/// Convenience wrapper: load all four files and merge them.
pub fn ingest_dataset(
    name: &str,
    ratings_path: impl AsRef<Path>,
    movies_path: impl AsRef<Path>,
    links_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<DatasetStore> {
    let events = load_ratings(ratings_path)?;
    let movies = load_movies(movies_path)?;
    let links = load_links(links_path)?;
    let labels = load_emotion_labels(labels_path)?;
    merge_dataset(name, movies, events, links, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_file(dir: &tempfile::TempDir, name: &str, contents: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        path
    }

    #[test]
    fn ratings_well_formed_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            &dir,
            "ratings.csv",
            "userId,movieId,rating,timestamp\n1,1,4.0,100\n1,2,3.5,200\n2,1,5.0,300\n",
        );
        let out = load_ratings(path).unwrap();
        assert_eq!(out.rows.len(), 3);
        assert_eq!(out.raw_rows, 3);
        assert!(out.drops.is_empty());
        // file order preserved
        assert_eq!(out.rows[0].movie_id, 1);
        assert_eq!(out.rows[1].movie_id, 2);
    }

    #[test]
    fn ratings_out_of_range_skipped_and_counted() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            &dir,
            "ratings.csv",
            "userId,movieId,rating,timestamp\n1,1,7.5,100\n1,2,3.5,200\n1,3,3.7,300\n",
        );
        let out = load_ratings(path).unwrap();
        assert_eq!(out.rows.len(), 1);
        assert_eq!(out.drops.get("out_of_range"), Some(&2));
    }

    #[test]
    fn ratings_missing_header_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(&dir, "ratings.csv", "user,item,score,ts\n1,1,4.0,100\n");
        assert!(matches!(load_ratings(path), Err(Error::Format { .. })));
    }

    #[test]
    fn ratings_malformed_fraction_aborts() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            &dir,
            "ratings.csv",
            "userId,movieId,rating,timestamp\n1,1,4.0,100\nnot,a,valid,row\n2,1,3.0,50\n",
        );
        assert!(matches!(load_ratings(path), Err(Error::Format { .. })));
    }

    #[test]
    fn ratings_missing_file_is_io_error() {
        assert!(matches!(
            load_ratings("/nonexistent/ratings.csv"),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn movies_toy_story_has_five_genres() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            &dir,
            "movies.csv",
            "movieId,title,genres\n1,Toy Story (1995),Adventure|Animation|Children|Comedy|Fantasy\n",
        );
        let out = load_movies(path).unwrap();
        assert_eq!(out.rows[0].genres.len(), 5);
        assert_eq!(out.rows[0].title, "Toy Story (1995)");
    }

    #[test]
    fn movies_no_genres_sentinel_yields_empty_list() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            &dir,
            "movies.csv",
            "movieId,title,genres\n5,\"Movie, The (2000)\",(no genres listed)\n",
        );
        let out = load_movies(path).unwrap();
        assert!(out.rows[0].genres.is_empty());
        assert_eq!(out.rows[0].title, "Movie, The (2000)");
    }

    #[test]
    fn movies_duplicate_id_names_the_id() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            &dir,
            "movies.csv",
            "movieId,title,genres\n7,A,Drama\n7,B,Comedy\n",
        );
        match load_movies(path) {
            Err(Error::Format { message, .. }) => assert!(message.contains('7')),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn links_blank_tmdb_id_retained_as_absent() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            &dir,
            "links.csv",
            "movieId,imdbId,tmdbId\n1,0114709,862\n2,0113497,\n",
        );
        let out = load_links(path).unwrap();
        assert_eq!(out.rows[0].tmdb_id, Some(862));
        assert_eq!(out.rows[0].imdb_id, Some(114709));
        assert_eq!(out.rows[1].tmdb_id, None);
        assert_eq!(out.rows.len(), 2);
    }

    const LABELS_HEADER: &str =
        "index,tid,mid,iid,mood,neutral,happy,sad,hate,anger,disgust,surprise";

    #[test]
    fn labels_reference_row_parses() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            &dir,
            "labels.csv",
            &format!(
                "{LABELS_HEADER}\n1,2,4470,94675,disgust,0.157,0.086,0.156,0.075,0.085,0.266,0.175\n"
            ),
        );
        let out = load_emotion_labels(path).unwrap();
        assert_eq!(out.rows.len(), 1);
        let row = &out.rows[0];
        assert_eq!((row.tid, row.mid, row.iid), (2, 4470, 94675));
        assert_eq!(row.mood, "disgust");
        assert!((row.values.sum() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn labels_all_zero_row_dropped_on_sum_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            &dir,
            "labels.csv",
            &format!("{LABELS_HEADER}\n1,2,10,30,neutral,0,0,0,0,0,0,0\n"),
        );
        let out = load_emotion_labels(path).unwrap();
        assert!(out.rows.is_empty());
        assert_eq!(out.drops.get("bad_distribution"), Some(&1));
    }

    #[test]
    fn labels_joy_alias_normalizes_to_happy() {
        let dir = tempfile::tempdir().unwrap();
        let header = "index,tid,mid,iid,mood,neutral,joy,sadness,hate,anger,disgust,surprise";
        let path = write_file(
            &dir,
            "labels.csv",
            &format!("{header}\n1,2,10,30,joy,0.1,0.5,0.1,0.1,0.1,0.05,0.05\n"),
        );
        let out = load_emotion_labels(path).unwrap();
        assert_eq!(out.rows[0].mood, "happy");
        assert_eq!(out.rows[0].values.values()[1], 0.5);
    }

    #[test]
    fn labels_missing_emotion_column_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            &dir,
            "labels.csv",
            "index,tid,mid,iid,mood,neutral,happy,sad,hate,anger,disgust\n1,2,10,30,neutral,0.4,0.1,0.1,0.1,0.1,0.2\n",
        );
        match load_emotion_labels(path) {
            Err(Error::Format { message, .. }) => assert!(message.contains("surprise")),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn labels_mood_mismatch_kept_with_recomputed_mood() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            &dir,
            "labels.csv",
            &format!("{LABELS_HEADER}\n1,2,10,30,sad,0.5,0.1,0.1,0.1,0.1,0.05,0.05\n"),
        );
        let out = load_emotion_labels(path).unwrap();
        assert_eq!(out.rows.len(), 1);
        assert_eq!(out.rows[0].mood, "neutral");
    }

    fn fixture_store() -> DatasetStore {
        let movies = LoadOutcome::clean(vec![
            MovieRecord {
                movie_id: 1,
                title: "A".into(),
                genres: vec!["Action".into()],
                tmdb_id: None,
                imdb_id: None,
            },
            MovieRecord {
                movie_id: 2,
                title: "B".into(),
                genres: vec!["Action".into(), "Comedy".into()],
                tmdb_id: None,
                imdb_id: None,
            },
            MovieRecord {
                movie_id: 3,
                title: "C".into(),
                genres: vec![],
                tmdb_id: None,
                imdb_id: None,
            },
        ]);
        let events = LoadOutcome::clean(vec![
            RatingEvent {
                user_id: 1,
                movie_id: 1,
                rating: 4.0,
                timestamp: 10,
            },
            RatingEvent {
                user_id: 1,
                movie_id: 2,
                rating: 3.0,
                timestamp: 20,
            },
            RatingEvent {
                user_id: 2,
                movie_id: 2,
                rating: 5.0,
                timestamp: 30,
            },
            // duplicate pair, earlier timestamp loses
            RatingEvent {
                user_id: 2,
                movie_id: 2,
                rating: 1.0,
                timestamp: 5,
            },
            // unknown movie
            RatingEvent {
                user_id: 2,
                movie_id: 99,
                rating: 2.0,
                timestamp: 40,
            },
        ]);
        let links = LoadOutcome::clean(vec![LinkRow {
            movie_id: 1,
            imdb_id: Some(11),
            tmdb_id: Some(21),
        }]);
        let labels = LoadOutcome::clean(vec![
            EmotionLabelRow {
                tid: 21,
                mid: 1,
                iid: 11,
                mood: "neutral".into(),
                values: EmotionVector::distribution([0.4, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1]).unwrap(),
            },
            EmotionLabelRow {
                tid: 22,
                mid: 2,
                iid: 12,
                mood: "happy".into(),
                values: EmotionVector::distribution([0.1, 0.4, 0.1, 0.1, 0.1, 0.1, 0.1]).unwrap(),
            },
        ]);
        merge_dataset("fixture", movies, events, links, labels).unwrap()
    }

    #[test]
    fn merge_drops_unrated_movies_and_unknown_events() {
        let store = fixture_store();
        assert_eq!(store.movies.len(), 2); // movie 3 has no ratings
        assert_eq!(store.events.len(), 3);
        let ratings = &store.loss.files["ratings"];
        assert_eq!(ratings.drops.get("unknown_movie"), Some(&1));
        assert_eq!(ratings.drops.get("duplicate"), Some(&1));
        let movies = &store.loss.files["movies"];
        assert_eq!(movies.drops.get("no_ratings"), Some(&1));
        // duplicate kept the latest timestamp
        let kept = store
            .events
            .iter()
            .find(|e| e.user_id == 2 && e.movie_id == 2)
            .unwrap();
        assert_eq!(kept.rating, 5.0);
        // links applied
        assert_eq!(store.movies[&1].tmdb_id, Some(21));
    }

    #[test]
    fn merge_loss_accounting_balances() {
        let store = fixture_store();
        for (file, loss) in &store.loss.files {
            assert_eq!(
                loss.raw_rows,
                loss.retained + loss.drops.values().sum::<u64>(),
                "unbalanced loss for {file}"
            );
        }
    }

    #[test]
    fn merge_unlabeled_movie_retained_but_flagged() {
        let movies = LoadOutcome::clean(vec![
            MovieRecord {
                movie_id: 1,
                title: "A".into(),
                genres: vec![],
                tmdb_id: None,
                imdb_id: None,
            },
            MovieRecord {
                movie_id: 2,
                title: "B".into(),
                genres: vec![],
                tmdb_id: None,
                imdb_id: None,
            },
        ]);
        let events = LoadOutcome::clean(vec![
            RatingEvent {
                user_id: 1,
                movie_id: 1,
                rating: 4.0,
                timestamp: 1,
            },
            RatingEvent {
                user_id: 1,
                movie_id: 2,
                rating: 4.0,
                timestamp: 2,
            },
        ]);
        let labels = LoadOutcome::clean(vec![EmotionLabelRow {
            tid: 1,
            mid: 1,
            iid: 1,
            mood: "neutral".into(),
            values: EmotionVector::distribution([0.4, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1]).unwrap(),
        }]);
        let store = merge_dataset("f", movies, events, LoadOutcome::clean(vec![]), labels).unwrap();
        assert_eq!(store.movies.len(), 2);
        assert!(store.is_labeled(1));
        assert!(!store.is_labeled(2));
    }

    #[test]
    fn merge_empty_store_errors() {
        let movies = LoadOutcome::clean(vec![MovieRecord {
            movie_id: 1,
            title: "A".into(),
            genres: vec![],
            tmdb_id: None,
            imdb_id: None,
        }]);
        let events: LoadOutcome<RatingEvent> = LoadOutcome::clean(vec![]);
        let result = merge_dataset(
            "empty",
            movies,
            events,
            LoadOutcome::clean(vec![]),
            LoadOutcome::clean(vec![]),
        );
        assert!(matches!(result, Err(Error::EmptyDataset(_))));
    }

    #[test]
    fn merge_referential_integrity() {
        let store = fixture_store();
        for event in &store.events {
            assert!(store.movies.contains_key(&event.movie_id));
        }
        for movie_id in store.labels.keys() {
            assert!(store.movies.contains_key(movie_id));
        }
    }
}
