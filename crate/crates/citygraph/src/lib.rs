//! Synthetic urban social networks: a geo-referenced, age-stratified
//! population organized into households and wired with a probabilistic
//! friendship layer driven by age mixing, distance decay and per-person
//! sociability.
//!
//! The pipeline is: define a tile grid over the territory ([`geo`]),
//! synthesize the residents ([`population`]), group them into household
//! cliques ([`households`]), derive the age-mixing matrix from survey
//! contact data ([`mixing`]), sample the friendship layer ([`friendship`])
//! and measure the result ([`analysis`]). [`pipeline`] orchestrates all of
//! it behind the run configuration in [`config`], which is also what the
//! `citygraph` CLI drives.

pub mod analysis;
pub mod config;
pub mod error;
pub mod friendship;
pub mod geo;
pub mod graph;
pub mod households;
pub mod io;
pub mod mixing;
pub mod pipeline;
pub mod population;
pub mod rng;

pub use error::{Error, Result};
