//! Canonical emotion-vector representation and the vector math everything
//! else is built on: inner product, cosine similarity, means and one-hot
//! transforms.
//!
//! All arithmetic is 64-bit floating point with reductions in a fixed
//! left-to-right order, so every operation is deterministic and safe to
//! call from any number of threads.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of emotion classes.
pub const EMOTION_DIM: usize = 7;

/// Canonical label order. Every emotion block is indexed by this order.
pub const EMOTION_LABELS: [&str; EMOTION_DIM] = [
    "neutral", "happy", "sad", "hate", "anger", "disgust", "surprise",
];

/// Distributions must sum to 1 within this tolerance.
pub const DISTRIBUTION_SUM_TOL: f64 = 5e-3;

/// Resolve an emotion label (canonical or alias) to its canonical index.
///
/// Accepted aliases: joy/happiness -> happy, sadness -> sad, fear -> hate.
pub fn canonical_label(name: &str) -> Option<usize> {
    let name = name.trim().to_ascii_lowercase();
    let canonical = match name.as_str() {
        "joy" | "happiness" => "happy",
        "sadness" => "sad",
        "fear" => "hate",
        other => other,
    };
    EMOTION_LABELS.iter().position(|l| *l == canonical)
}

/// A 7-value non-negative emotion vector in canonical label order.
///
/// Holds both mvec (a movie's emotion distribution) and uvec (the mean of
/// a user's watched mvecs). Values are stored as-is and never renormalized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmotionVector {
    values: [f64; EMOTION_DIM],
}

impl EmotionVector {
    /// A raw emotion block: components must be finite and non-negative,
    /// the sum is unconstrained.
    pub fn new(values: [f64; EMOTION_DIM]) -> Result<Self> {
        for (index, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteComponent { index });
            }
            if *v < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "negative emotion component {v} at index {index}"
                )));
            }
        }
        Ok(Self { values })
    }

    /// A distribution-valued vector: additionally requires the components
    /// to sum to 1 within [`DISTRIBUTION_SUM_TOL`].
    pub fn distribution(values: [f64; EMOTION_DIM]) -> Result<Self> {
        let v = Self::new(values)?;
        if !v.is_distribution() {
            return Err(Error::InvalidArgument(format!(
                "emotion values sum to {}, expected 1 within {DISTRIBUTION_SUM_TOL}",
                v.sum()
            )));
        }
        Ok(v)
    }

    pub fn values(&self) -> &[f64; EMOTION_DIM] {
        &self.values
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc + v)
    }

    pub fn is_distribution(&self) -> bool {
        // ties sit exactly on the decimal boundary; allow representation slack
        (self.sum() - 1.0).abs() <= DISTRIBUTION_SUM_TOL + 1e-9
    }

    /// Index of the largest component; ties break to the lowest canonical
    /// index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for i in 1..EMOTION_DIM {
            if self.values[i] > self.values[best] {
                best = i;
            }
        }
        best
    }

    /// Canonical label of the largest component.
    pub fn mood(&self) -> &'static str {
        EMOTION_LABELS[self.argmax()]
    }
}

/// How the emotion block of an item vector is built from a movie's mvec.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EmotionMode {
    /// Keep the raw distribution.
    #[default]
    RawDistribution,
    /// One bit at the argmax.
    ArgmaxOnehot,
    /// Bits wherever the value reaches the threshold; the argmax is always
    /// marked.
    ThresholdMultihot { threshold: f64 },
}

impl EmotionMode {
    pub fn validate(&self) -> Result<()> {
        if let EmotionMode::ThresholdMultihot { threshold } = self {
            if !(threshold.is_finite() && *threshold > 0.0 && *threshold < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "multihot threshold {threshold} must lie in (0, 1)"
                )));
            }
        }
        Ok(())
    }

    /// Parse a mode name as used in manifests and CLI flags:
    /// `raw`, `onehot`, or `multihot:<threshold>`.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let mode = match text {
            "raw" | "raw-distribution" => EmotionMode::RawDistribution,
            "onehot" | "argmax-onehot" => EmotionMode::ArgmaxOnehot,
            other => match other.strip_prefix("multihot:") {
                Some(t) => {
                    let threshold: f64 = t.parse().map_err(|_| {
                        Error::InvalidArgument(format!("bad multihot threshold {t:?}"))
                    })?;
                    EmotionMode::ThresholdMultihot { threshold }
                }
                None => {
                    return Err(Error::InvalidArgument(format!(
                        "unknown emotion mode {text:?} (expected raw, onehot or multihot:<t>)"
                    )))
                }
            },
        };
        mode.validate()?;
        Ok(mode)
    }

    pub fn name(&self) -> String {
        match self {
            EmotionMode::RawDistribution => "raw".to_string(),
            EmotionMode::ArgmaxOnehot => "onehot".to_string(),
            EmotionMode::ThresholdMultihot { threshold } => format!("multihot:{threshold}"),
        }
    }
}

/// Genre multi-hot over a [`crate::profile::GenreVocabulary`]. All-zero is
/// legal (a movie with no listed genres).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenreVector {
    bits: Vec<u8>,
    vocab_id: u64,
}

impl GenreVector {
    pub fn new(bits: Vec<u8>, vocab_id: u64) -> Result<Self> {
        if let Some(bad) = bits.iter().find(|b| **b > 1) {
            return Err(Error::InvalidArgument(format!(
                "genre bit {bad} is not binary"
            )));
        }
        Ok(Self { bits, vocab_id })
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn vocab_id(&self) -> u64 {
        self.vocab_id
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|b| **b == 1).count()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.bits.iter().map(|b| *b as f64).collect()
    }
}

/// A movie's item vector: emotion block (per [`EmotionMode`]) concatenated
/// with its genre multi-hot. The per-user mean of item vectors is the wvec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemVector {
    emotion: [f64; EMOTION_DIM],
    genre: GenreVector,
    mode: EmotionMode,
}

impl ItemVector {
    pub fn new(emotion: [f64; EMOTION_DIM], genre: GenreVector, mode: EmotionMode) -> Self {
        Self {
            emotion,
            genre,
            mode,
        }
    }

    pub fn emotion(&self) -> &[f64; EMOTION_DIM] {
        &self.emotion
    }

    pub fn genre(&self) -> &GenreVector {
        &self.genre
    }

    pub fn mode(&self) -> EmotionMode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        EMOTION_DIM + self.genre.len()
    }

    /// Plain concatenation `emotion || genre`.
    pub fn to_vec(&self) -> Vec<f64> {
        self.weighted_vec(1.0, 1.0)
    }

    /// Concatenation with per-block weights (used by the multi-channel
    /// recommender; both default to 1).
    pub fn weighted_vec(&self, emotion_weight: f64, genre_weight: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        out.extend(self.emotion.iter().map(|v| v * emotion_weight));
        out.extend(self.genre.bits().iter().map(|b| *b as f64 * genre_weight));
        out
    }
}

/// Inner product of two equal-dimension vectors.
pub fn inner(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::DimensionMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    Ok(inner_unchecked(x, y))
}

#[inline]
fn inner_unchecked(x: &[f64], y: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..x.len() {
        acc += x[i] * y[i];
    }
    acc
}

#[inline]
fn check_finite(v: &[f64]) -> Result<()> {
    for (index, x) in v.iter().enumerate() {
        if !x.is_finite() {
            return Err(Error::NonFiniteComponent { index });
        }
    }
    Ok(())
}

/// Cosine similarity `<x,y> / (|x|·|y|)`.
///
/// Returns 0 when either operand has zero norm: all-zero genre vectors are
/// legal inputs and carry no evidence of similarity. The result is not
/// clamped; for non-negative inputs it lies in [0, 1] up to rounding.
pub fn cosine_similarity(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::DimensionMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    check_finite(x)?;
    check_finite(y)?;
    let norm_x = inner_unchecked(x, x).sqrt();
    let norm_y = inner_unchecked(y, y).sqrt();
    if norm_x == 0.0 || norm_y == 0.0 {
        return Ok(0.0);
    }
    Ok(inner_unchecked(x, y) / (norm_x * norm_y))
}

/// Cosine similarity against a pre-computed right-hand norm. Behaves
/// exactly like [`cosine_similarity`]; used by the association scan where
/// target norms are computed once.
pub(crate) fn cosine_with_norm(x: &[f64], norm_x: f64, y: &[f64], norm_y: f64) -> f64 {
    if norm_x == 0.0 || norm_y == 0.0 {
        return 0.0;
    }
    inner_unchecked(x, y) / (norm_x * norm_y)
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    inner_unchecked(x, x).sqrt()
}

/// Component-wise arithmetic mean of a nonempty list of equal-dimension
/// vectors.
pub fn mean_vectors<V: AsRef<[f64]>>(vs: &[V]) -> Result<Vec<f64>> {
    let first = vs
        .first()
        .ok_or_else(|| Error::EmptyProfile("mean of zero vectors".to_string()))?
        .as_ref();
    let dim = first.len();
    let mut acc = vec![0.0; dim];
    for v in vs {
        let v = v.as_ref();
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: v.len(),
            });
        }
        for (a, x) in acc.iter_mut().zip(v) {
            *a += x;
        }
    }
    let n = vs.len() as f64;
    for a in acc.iter_mut() {
        *a /= n;
    }
    Ok(acc)
}

/// One-hot / multi-hot encoding of a distribution-valued emotion vector.
///
/// Argmax mode sets exactly one bit; threshold mode sets every bit whose
/// value reaches the threshold and always includes the argmax. Raw mode is
/// an identity pass-through of the distribution, not an encoding.
pub fn emotion_ohe(m: &EmotionVector, mode: EmotionMode) -> [f64; EMOTION_DIM] {
    let mut bits = [0.0; EMOTION_DIM];
    match mode {
        EmotionMode::RawDistribution => {
            bits.copy_from_slice(m.values());
        }
        EmotionMode::ArgmaxOnehot => {
            bits[m.argmax()] = 1.0;
        }
        EmotionMode::ThresholdMultihot { threshold } => {
            for (bit, v) in bits.iter_mut().zip(m.values()) {
                if *v >= threshold {
                    *bit = 1.0;
                }
            }
            bits[m.argmax()] = 1.0;
        }
    }
    bits
}
