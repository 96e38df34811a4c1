//! Emotional speech-corpus script construction.
//!
//! The pipeline samples polarity-routed seed words and NV phrases, renders few-shot
//! prompts, collects completions from an OpenAI-compatible endpoint, scores candidates
//! for emotion recognizability and fluency, selects a quota-balanced script set and
//! reports phoneme coverage (extended entropy, n-gram arrangements).

pub mod catalog;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod lexicon;
pub mod llm;
pub mod model;
pub mod phoneme;
pub mod pipeline;
pub mod promptgen;
pub mod scoring;
pub mod selection;
pub mod stub;

pub use model::{Emotion, NvPhrase, Polarity, Script, ScriptId, SeedWord, Session};
