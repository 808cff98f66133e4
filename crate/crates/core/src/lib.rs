//! Crowd-activity simulation on a procedural hex city, observed by a UAV camera.
//!
//! The pipeline is deterministic given a seed: [`world`] builds the map,
//! [`behavior`] advances agents, [`render`] rasterizes frames and
//! [`annotate`] turns segmentation into boxes. [`dataset`] records and splits
//! clips, [`server`] exposes a live session over TCP.

pub mod error;
pub mod rng;
pub mod geom;
pub mod hex;
pub mod world;
pub mod camera;
pub mod behavior;
pub mod render;
pub mod annotate;
pub mod bench;
pub mod session;
pub mod dataset;
pub mod server;

pub use error::{Error, Result};
