pub mod analysis;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod grid;
pub mod io;
pub mod noise;
pub mod operator;
pub mod reaction;
pub mod tridiag;
pub mod verify;
pub mod wave_profile;

pub use error::{Error, Result};
pub use grid::SpatialGrid;
pub use reaction::ReactionFunction;
pub use wave_profile::{Frame, ProfileField, WaveProfile};
