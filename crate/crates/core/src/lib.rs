//! Gender and location inference for Arabic social-media profiles.
//!
//! The pipeline: normalize text, bootstrap a gender-marker lexicon from
//! profile descriptions, train a character n-gram linear classifier on names
//! or other fields, optionally back it up with a friend-network vote, and
//! report corpus statistics.

pub mod analysis;
pub mod classifier;
pub mod dataset;
pub mod eval;
pub mod features;
pub mod geo;
pub mod lexicon;
pub mod network;
pub mod normalize;

pub use classifier::{GenderModel, Hyperparams, Prediction};
pub use dataset::{GenderLabel, UserProfile};
pub use features::{FeatureExtractor, FeatureSet, SparseVector, TweetMode};
pub use geo::{map_location, CountryCode, Gazetteer};
pub use normalize::{normalize_text, NormalizedText};
