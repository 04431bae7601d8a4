//! Emotion-profile toolkit for MovieLens-style rating data.
//!
//! The crate builds per-movie and per-user emotion profiles from rating
//! histories and an emotion-label table, links disjoint users across
//! datasets by nearest emotion profile (pseudo-association), and runs five
//! top-N recommenders with wvec-based top-5 re-ranking and temporal-split
//! hit-rate scoring.
//!
//! Vector vocabulary used throughout:
//! - `mvec`: a movie's 7-value emotion distribution (from the label file)
//! - `uvec`: a user's emotion profile, the mean of watched movies' mvecs
//! - `ivec`: mvec (raw or one-hot) concatenated with the genre multi-hot
//! - `wvec`: a user's taste profile, the mean of watched movies' ivecs

pub mod associate;
pub mod emotion;
pub mod error;
pub mod evaluate;
pub mod ingest;
pub mod profile;
pub mod recommend;
pub mod store;
pub mod synth;

pub use error::{Error, Result};
