//! Pseudo-association of disjoint users across datasets: every source user
//! is linked to the target user with the most similar uvec.
//!
//! The search is an exact blocked brute-force scan. At 7 dimensions this
//! is cheap, and exactness keeps the output reproducible: results are
//! byte-identical for any worker count.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::emotion::{cosine_with_norm, norm, EMOTION_DIM};
use crate::error::{Error, Result};
use crate::profile::UserProfile;
use crate::store::write_atomic;

/// Two similarities within this distance of the per-source maximum count
/// as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct AssociateOptions {
    /// Profiles with fewer labeled watched movies are excluded from both
    /// sides of the match.
    pub min_event_count: usize,
    /// Worker threads; 1 runs sequentially. Output is identical for any
    /// value.
    pub workers: usize,
}

impl Default for AssociateOptions {
    fn default() -> Self {
        Self {
            min_event_count: 1,
            workers: 1,
        }
    }
}

/// One source user's best match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRow {
    pub source_user: u64,
    pub target_user: u64,
    /// Maximum similarity attained over all target users.
    pub similarity: f64,
    /// Number of target users within [`TIE_TOLERANCE`] of the maximum.
    pub tie_count: usize,
    pub source_count: usize,
    pub target_count: usize,
}

/// Per-source-user argmax matches between two profile sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchTable {
    pub source_dataset: String,
    pub target_dataset: String,
    pub rows: Vec<MatchRow>,
}

impl MatchTable {
    pub fn row_for(&self, source_user: u64) -> Option<&MatchRow> {
        self.rows
            .binary_search_by_key(&source_user, |r| r.source_user)
            .ok()
            .map(|i| &self.rows[i])
    }
}

struct TargetIndex<'a> {
    profiles: Vec<&'a UserProfile>,
    norms: Vec<f64>,
}

impl<'a> TargetIndex<'a> {
    fn build(targets: &'a [UserProfile], min_events: usize) -> Self {
        let mut profiles: Vec<&UserProfile> = targets
            .iter()
            .filter(|p| p.event_count >= min_events)
            .collect();
        profiles.sort_by_key(|p| p.user_id);
        let norms = profiles.iter().map(|p| norm(p.uvec.as_slice())).collect();
        Self { profiles, norms }
    }
}

fn best_match(source: &UserProfile, index: &TargetIndex<'_>, sims: &mut Vec<f64>) -> MatchRow {
    let source_vec = source.uvec.as_slice();
    let source_norm = norm(source_vec);
    sims.clear();
    sims.extend(
        index.profiles.iter().zip(&index.norms).map(|(t, t_norm)| {
            cosine_with_norm(source_vec, source_norm, t.uvec.as_slice(), *t_norm)
        }),
    );
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
    let target = index.profiles[matched];
    MatchRow {
        source_user: source.user_id,
        target_user: target.user_id,
        similarity: best,
        tie_count,
        source_count: source.event_count,
        target_count: target.event_count,
    }
}

/// Match every source user to the target user whose uvec is most similar.
///
/// Ties within [`TIE_TOLERANCE`] break to the lowest target user id, and
/// the tie group size is recorded. Rows come back sorted by source user
/// id. Matching is many-to-one: several source users may map to the same
/// target.
pub fn associate_users(
    source: &[UserProfile],
    target: &[UserProfile],
    opts: &AssociateOptions,
) -> Result<MatchTable> {
    let index = TargetIndex::build(target, opts.min_event_count);
    if index.profiles.is_empty() {
        return Err(Error::EmptyDataset(
            "no target profiles left to match against".to_string(),
        ));
    }
    let mut sources: Vec<&UserProfile> = source
        .iter()
        .filter(|p| p.event_count >= opts.min_event_count)
        .collect();
    if sources.is_empty() {
        return Err(Error::EmptyDataset(
            "no source profiles left to match".to_string(),
        ));
    }
    sources.sort_by_key(|p| p.user_id);
    for profile in sources.iter().chain(index.profiles.iter()) {
        debug_assert_eq!(profile.uvec.as_slice().len(), EMOTION_DIM);
    }

    let rows: Vec<MatchRow> = if opts.workers <= 1 {
        let mut sims = Vec::with_capacity(index.profiles.len());
        sources
            .iter()
            .map(|s| best_match(s, &index, &mut sims))
            .collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.workers)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
        pool.install(|| {
            sources
                .par_iter()
                .map_init(
                    || Vec::with_capacity(index.profiles.len()),
                    |sims, s| best_match(s, &index, sims),
                )
                .collect()
        })
    };

    let (source_dataset, target_dataset) = (
        sources[0].dataset.clone(),
        index.profiles[0].dataset.clone(),
    );
    Ok(MatchTable {
        source_dataset,
        target_dataset,
        rows,
    })
}

/// Head and tail of a watch list, the way the association reports print
/// long lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WatchExcerpt {
    pub head: Vec<u64>,
    pub tail: Vec<u64>,
    pub total: usize,
}

impl WatchExcerpt {
    pub fn new(watched: &[u64]) -> Self {
        if watched.len() <= 8 {
            return Self {
                head: watched.to_vec(),
                tail: Vec::new(),
                total: watched.len(),
            };
        }
        Self {
            head: watched[..4].to_vec(),
            tail: watched[watched.len() - 4..].to_vec(),
            total: watched.len(),
        }
    }
}

/// One matched pair rendered with both users' ids, movie counts, watch
/// list excerpts, uvecs and the similarity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacReport {
    pub source_dataset: String,
    pub target_dataset: String,
    pub source_user: u64,
    pub target_user: u64,
    pub source_movie_count: usize,
    pub target_movie_count: usize,
    pub source_watch_list: WatchExcerpt,
    pub target_watch_list: WatchExcerpt,
    pub source_uvec: [f64; EMOTION_DIM],
    pub target_uvec: [f64; EMOTION_DIM],
    pub similarity: f64,
    pub tie_count: usize,
}

/// Build the report record for one source user's match row.
pub fn match_report(
    table: &MatchTable,
    source_user: u64,
    source_profiles: &[UserProfile],
    target_profiles: &[UserProfile],
) -> Result<PacReport> {
    let row = table
        .row_for(source_user)
        .ok_or_else(|| Error::NotFound(format!("no match row for user {source_user}")))?;
    let find = |profiles: &[UserProfile], user: u64, side: &str| {
        profiles
            .iter()
            .position(|p| p.user_id == user)
            .ok_or_else(|| Error::NotFound(format!("{side} profile for user {user}")))
    };
    let source = &source_profiles[find(source_profiles, row.source_user, "source")?];
    let target = &target_profiles[find(target_profiles, row.target_user, "target")?];
    Ok(PacReport {
        source_dataset: table.source_dataset.clone(),
        target_dataset: table.target_dataset.clone(),
        source_user: row.source_user,
        target_user: row.target_user,
        source_movie_count: source.event_count,
        target_movie_count: target.event_count,
        source_watch_list: WatchExcerpt::new(&source.watched),
        target_watch_list: WatchExcerpt::new(&target.watched),
        source_uvec: *source.uvec.values(),
        target_uvec: *target.uvec.values(),
        similarity: row.similarity,
        tie_count: row.tie_count,
    })
}

/// Write `matches.csv` with similarities at 17 significant digits.
pub fn write_matches_csv(table: &MatchTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "source_user",
        "target_user",
        "similarity",
        "tie_count",
        "source_count",
        "target_count",
    ])
    .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
    for row in &table.rows {
        w.write_record([
            row.source_user.to_string(),
            row.target_user.to_string(),
            format!("{:.16e}", row.similarity),
            row.tie_count.to_string(),
            row.source_count.to_string(),
            row.target_count.to_string(),
        ])
        .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
    write_atomic(path, &bytes)
}

/// Write one JSON line per report.
pub fn write_reports_jsonl(reports: &[PacReport], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    for report in reports {
        let line = serde_json::to_vec(report)
            .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
        bytes.extend_from_slice(&line);
        bytes.push(b'\n');
    }
    write_atomic(path, &bytes)
}
