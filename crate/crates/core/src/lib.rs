//! Target-conditional LSTM stance detection.
//!
//! Given a (target, tweet) pair, predict FAVOR / AGAINST / NONE. The crate
//! contains the full pipeline, built from scratch in double precision:
//!
//! * [`numcore`] — dense matrices, differentiable primitives with
//!   hand-derived backward passes, Adam, and a finite-difference gradient
//!   checker;
//! * [`textprep`] — tweet-aware tokenization and vocabulary construction;
//! * [`embed`] — skip-gram pretraining with negative sampling and
//!   embedding-table management (Random / PreFixed / PreCont, Sing / Sep);
//! * [`encoders`] — the LSTM cell and the model variants (TweetOnly,
//!   Concat, TarCondTweet, TweetCondTar, BiCond) plus the BoWV baseline;
//! * [`train`] — mini-batch Adam training with dev-based model selection
//!   and bit-exact checkpointing;
//! * [`weaklabel`] — rule-based automatic stance annotation;
//! * [`eval`] — the official metric (macro-F1 over FAVOR and AGAINST),
//!   prediction post-processing, and result tables;
//! * [`experiment`] — the unseen-target and weakly supervised protocols;
//! * [`corpus`] / [`config`] — file formats and configuration.
//!
//! Everything is deterministic for a fixed seed; training is
//! single-threaded by design so runs are bit-reproducible.

pub mod config;
pub mod corpus;
pub mod embed;
pub mod encoders;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod numcore;
pub mod textprep;
pub mod train;
pub mod util;
pub mod weaklabel;

pub use corpus::{Instance, Stance};
pub use encoders::{Model, Variant};
pub use error::{Error, Result};
pub use eval::EvalReport;
pub use train::ModelConfig;
