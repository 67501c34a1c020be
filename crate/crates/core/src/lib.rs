//! ReCo code search: LLM-augmented queries and codebases, sparse and dense
//! retrieval, the CSSim style metric and the evaluation harness.

pub mod augmentor;
pub mod config;
pub mod corpus;
pub mod dense;
pub mod error;
pub mod eval;
pub mod sparse;
pub mod style;

pub use config::Config;
pub use corpus::{Dataset, Language, PairRecord};
pub use error::{Error, Result};
