//! Graffiti-level mapping from street-level imagery.
//!
//! Locations are sampled over a region ([`sampling`]), photographed at `k`
//! headings ([`acquisition`]), segmented by a pluggable detector
//! ([`detection`]) and aggregated into per-location and per-region levels
//! ([`metrics`]). [`evaluation`] measures detector quality, [`survey_sim`]
//! measures sampling error on synthetic fields and [`report`] writes
//! map-ready outputs.

pub mod acquisition;
pub mod cli;
pub mod detection;
pub mod error;
pub mod evaluation;
pub mod geo;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod report;
pub mod sampling;
pub mod survey_sim;

pub use error::{Error, Result};
