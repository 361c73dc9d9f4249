//! Light-transport engine for relighting indoor scenes from per-pixel
//! depth, normal and albedo rasters.

pub mod error;
pub mod light;
pub mod math;
pub mod optimize;
pub mod render;
pub mod scene;
pub mod sg;
pub mod synth;

pub use error::{Error, Result};
