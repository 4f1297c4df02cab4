//! Seeded multi-agent simulation of news diffusion over synthetic social
//! networks.
//!
//! The crate is organised bottom-up:
//!
//! * [`persona`] samples agent demographics and Big Five trait scores.
//! * [`netgen`] builds random, scale-free and high-brokerage networks and
//!   computes their structural statistics.
//! * [`news`] and [`config`] load news items and experiment configuration.
//! * [`policy`] is the share/ignore decision boundary (offline stub or an
//!   OpenAI-compatible chat model with a replayable cache).
//! * [`engine`] runs the day-stepped diffusion state machine, including the
//!   commenting, accuracy-notice and blocking interventions.
//! * [`stats`] turns run records into diffusion rates and rank-sum
//!   comparisons.
//! * [`experiment`] expands configurations into seeded plans, executes them
//!   and writes result trees.
//!
//! Data-parallel loops (all-pairs BFS, batches of independent runs, stub
//! decisions within a day) go through [`par`], which uses rayon when the
//! `parallel` feature is enabled and falls back to plain iteration otherwise.

pub mod config;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod netgen;
pub mod news;
pub mod par;
pub mod persona;
pub mod policy;
pub mod seed;
pub mod stats;

pub use error::{Error, Result};
