//! Cournot model of AI-freelancer competition and the panel econometrics
//! used to detect its honeymoon and substitution phases in platform data.
//!
//! - [`market_model`]: equilibrium, inflection point, comparative statics.
//! - [`panel_synth`]: worker-month and market-week panels simulated from the model.
//! - [`econometrics`]: two-way fixed-effect DiD, event studies, cluster-robust inference.
//! - [`matching`]: propensity scores, caliper matching, balance tables.
//! - [`cli_io`]: scenario files, CSV schemas, the end-to-end pipeline.

pub mod cli_io;
pub mod econometrics;
pub mod fmt;
pub mod market_model;
pub mod matching;
pub mod panel_synth;
