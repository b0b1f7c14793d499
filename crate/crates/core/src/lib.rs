//! Regional green-hydrogen cost-potential engine.
//!
//! The pipeline runs land eligibility ([`eligibility`]) on an equal-area
//! raster ([`grid`]), places wind turbines and PV parks ([`placement`]),
//! simulates hourly output and clusters it by LCOE ([`ressim`]), bounds water
//! supply ([`water`]), solves a per-region capacity-expansion LP to trace a
//! cost-potential curve ([`h2opt`]) and scores socio-economic impact
//! ([`socio`]). [`service`] ties the stages together behind a CLI and an HTTP
//! API.

pub mod eligibility;
pub mod error;
pub mod grid;
pub mod h2opt;
pub mod placement;
pub mod ressim;
pub mod service;
pub mod socio;
pub mod tech;
pub mod water;

pub use error::{Error, Result};
pub use tech::Tech;
