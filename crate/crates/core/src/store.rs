//! The persisted dataset store: one directory holding `manifest.json` and
//! one normalized CSV per table.
//!
//! Persisting is deterministic (tables ordered by id, floats written in
//! shortest round-trip form), so merging the same inputs twice produces
//! byte-identical store directories, and a persist/load round trip yields
//! element-wise identical tables.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::emotion::{EmotionVector, EMOTION_DIM, EMOTION_LABELS};
use crate::error::{Error, Result};
use crate::ingest::{parse_genres, EmotionLabelRow, MovieRecord, RatingEvent};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MOVIES_FILE: &str = "movies.csv";
pub const EVENTS_FILE: &str = "events.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const PROFILES_FILE: &str = "profiles.csv";

const FORMAT_VERSION: u32 = 1;

/// Row accounting for one input file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileLoss {
    pub raw_rows: u64,
    pub retained: u64,
    #[serde(default)]
    pub drops: BTreeMap<String, u64>,
    #[serde(default)]
    pub notes: BTreeMap<String, u64>,
}

impl FileLoss {
    pub fn new(raw_rows: u64, drops: BTreeMap<String, u64>, notes: BTreeMap<String, u64>) -> Self {
        Self {
            raw_rows,
            retained: 0,
            drops,
            notes,
        }
    }

    pub fn drop_row(&mut self, stage: &str) {
        *self.drops.entry(stage.to_string()).or_insert(0) += 1;
    }

    pub fn dropped(&self) -> u64 {
        self.drops.values().sum()
    }
}

/// Per-file row accounting for a whole merge.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LossReport {
    pub files: BTreeMap<String, FileLoss>,
}

impl LossReport {
    pub fn total_dropped(&self) -> u64 {
        self.files.values().map(FileLoss::dropped).sum()
    }
}

/// One named dataset's joined catalog: movies, rating events, emotion
/// labels keyed by movie id, the genre vocabulary and the loss report.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStore {
    pub name: String,
    pub movies: BTreeMap<u64, MovieRecord>,
    pub events: Vec<RatingEvent>,
    pub labels: BTreeMap<u64, EmotionLabelRow>,
    pub genre_vocab: Vec<String>,
    pub loss: LossReport,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    name: String,
    counts: ManifestCounts,
    genre_vocabulary: Vec<String>,
    emotion_mode_default: String,
    loss_report: LossReport,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestCounts {
    movies: u64,
    events: u64,
    labels: u64,
    users: u64,
}

impl DatasetStore {
    pub fn is_labeled(&self, movie_id: u64) -> bool {
        self.labels.contains_key(&movie_id)
    }

    /// Distinct user ids, ascending.
    pub fn user_ids(&self) -> Vec<u64> {
        let mut ids: Vec<u64> = self.events.iter().map(|e| e.user_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Events of one user, in the store's canonical order.
    pub fn events_of(&self, user_id: u64) -> Vec<&RatingEvent> {
        self.events
            .iter()
            .filter(|e| e.user_id == user_id)
            .collect()
    }

    /// Write the store as a directory. Files are staged with a `.tmp`
    /// suffix and renamed into place.
    pub fn persist(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            name: self.name.clone(),
            counts: ManifestCounts {
                movies: self.movies.len() as u64,
                events: self.events.len() as u64,
                labels: self.labels.len() as u64,
                users: self.user_ids().len() as u64,
            },
            genre_vocabulary: self.genre_vocab.clone(),
            emotion_mode_default: "raw".to_string(),
            loss_report: self.loss.clone(),
        };
        let mut manifest_bytes = serde_json::to_vec_pretty(&manifest)
            .map_err(|e| Error::format(MANIFEST_FILE, e.to_string()))?;
        manifest_bytes.push(b'\n');
        write_atomic(&dir.join(MANIFEST_FILE), &manifest_bytes)?;

        write_atomic(&dir.join(MOVIES_FILE), &self.movies_csv()?)?;
        write_atomic(&dir.join(EVENTS_FILE), &self.events_csv()?)?;
        write_atomic(&dir.join(LABELS_FILE), &self.labels_csv()?)?;
        Ok(())
    }

    fn movies_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["movieId", "title", "genres", "imdbId", "tmdbId"])
            .map_err(|e| Error::format(MOVIES_FILE, e.to_string()))?;
        for movie in self.movies.values() {
            w.write_record([
                movie.movie_id.to_string(),
                movie.title.clone(),
                movie.genres.join("|"),
                movie.imdb_id.map(|v| v.to_string()).unwrap_or_default(),
                movie.tmdb_id.map(|v| v.to_string()).unwrap_or_default(),
            ])
            .map_err(|e| Error::format(MOVIES_FILE, e.to_string()))?;
        }
        finish_csv(w, MOVIES_FILE)
    }

    fn events_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["userId", "movieId", "rating", "timestamp"])
            .map_err(|e| Error::format(EVENTS_FILE, e.to_string()))?;
        for event in &self.events {
            w.write_record([
                event.user_id.to_string(),
                event.movie_id.to_string(),
                format!("{:.1}", event.rating),
                event.timestamp.to_string(),
            ])
            .map_err(|e| Error::format(EVENTS_FILE, e.to_string()))?;
        }
        finish_csv(w, EVENTS_FILE)
    }

    fn labels_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![
            "movieId".to_string(),
            "tmdbId".to_string(),
            "imdbId".to_string(),
            "mood".to_string(),
        ];
        header.extend(EMOTION_LABELS.iter().map(|l| l.to_string()));
        w.write_record(&header)
            .map_err(|e| Error::format(LABELS_FILE, e.to_string()))?;
        for label in self.labels.values() {
            let mut record = vec![
                label.mid.to_string(),
                label.tid.to_string(),
                label.iid.to_string(),
                label.mood.clone(),
            ];
            record.extend(label.values.values().iter().map(|v| v.to_string()));
            w.write_record(&record)
                .map_err(|e| Error::format(LABELS_FILE, e.to_string()))?;
        }
        finish_csv(w, LABELS_FILE)
    }

    /// Load a store directory written by [`DatasetStore::persist`].
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest_path = dir.join(MANIFEST_FILE);
        let manifest_bytes =
            std::fs::read(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        let manifest: Manifest = serde_json::from_slice(&manifest_bytes)
            .map_err(|e| Error::format(manifest_path.display().to_string(), e.to_string()))?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(Error::format(
                manifest_path.display().to_string(),
                format!("unsupported format version {}", manifest.format_version),
            ));
        }

        let movies = read_movies_table(&dir.join(MOVIES_FILE))?;
        let events = read_events_table(&dir.join(EVENTS_FILE))?;
        let labels = read_labels_table(&dir.join(LABELS_FILE))?;

        Ok(DatasetStore {
            name: manifest.name,
            movies,
            events,
            labels,
            genre_vocab: manifest.genre_vocabulary,
            loss: manifest.loss_report,
        })
    }
}

/// Write `bytes` to `path` atomically: stage to `<path>.tmp`, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp: PathBuf = {
        let mut os = path.as_os_str().to_owned();
        os.push(".tmp");
        PathBuf::from(os)
    };
    {
        let mut file = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        file.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        file.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn finish_csv(w: csv::Writer<Vec<u8>>, file: &str) -> Result<Vec<u8>> {
    w.into_inner()
        .map_err(|e| Error::format(file, e.to_string()))
}

fn table_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file))
}

fn table_error(path: &Path, line: u64, what: &str) -> Error {
    Error::format(path.display().to_string(), format!("row {line}: {what}"))
}

fn read_movies_table(path: &Path) -> Result<BTreeMap<u64, MovieRecord>> {
    let mut reader = table_reader(path)?;
    let mut out = BTreeMap::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| table_error(path, line as u64 + 2, &e.to_string()))?;
        let movie_id: u64 = record
            .get(0)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| table_error(path, line as u64 + 2, "bad movieId"))?;
        out.insert(
            movie_id,
            MovieRecord {
                movie_id,
                title: record.get(1).unwrap_or("").to_string(),
                genres: parse_genres(record.get(2).unwrap_or("")),
                imdb_id: record.get(3).and_then(|s| s.parse().ok()),
                tmdb_id: record.get(4).and_then(|s| s.parse().ok()),
            },
        );
    }
    Ok(out)
}

fn read_events_table(path: &Path) -> Result<Vec<RatingEvent>> {
    let mut reader = table_reader(path)?;
    let mut out = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| table_error(path, line as u64 + 2, &e.to_string()))?;
        let field = |i: usize| record.get(i).unwrap_or("");
        out.push(RatingEvent {
            user_id: field(0)
                .parse()
                .map_err(|_| table_error(path, line as u64 + 2, "bad userId"))?,
            movie_id: field(1)
                .parse()
                .map_err(|_| table_error(path, line as u64 + 2, "bad movieId"))?,
            rating: field(2)
                .parse()
                .map_err(|_| table_error(path, line as u64 + 2, "bad rating"))?,
            timestamp: field(3)
                .parse()
                .map_err(|_| table_error(path, line as u64 + 2, "bad timestamp"))?,
        });
    }
    Ok(out)
}

fn read_labels_table(path: &Path) -> Result<BTreeMap<u64, EmotionLabelRow>> {
    let mut reader = table_reader(path)?;
    let mut out = BTreeMap::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| table_error(path, line as u64 + 2, &e.to_string()))?;
        let field = |i: usize| record.get(i).unwrap_or("");
        let mid: u64 = field(0)
            .parse()
            .map_err(|_| table_error(path, line as u64 + 2, "bad movieId"))?;
        let mut values = [0.0; EMOTION_DIM];
        for (i, v) in values.iter_mut().enumerate() {
            *v = field(4 + i)
                .parse()
                .map_err(|_| table_error(path, line as u64 + 2, "bad emotion value"))?;
        }
        out.insert(
            mid,
            EmotionLabelRow {
                mid,
                tid: field(1)
                    .parse()
                    .map_err(|_| table_error(path, line as u64 + 2, "bad tmdbId"))?,
                iid: field(2)
                    .parse()
                    .map_err(|_| table_error(path, line as u64 + 2, "bad imdbId"))?,
                mood: field(3).to_string(),
                values: EmotionVector::new(values)?,
            },
        );
    }
    Ok(out)
}
