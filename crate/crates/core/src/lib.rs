pub mod error;
pub mod gates;
pub mod geo;
pub mod numkit;
pub mod optimizer;
pub mod pulse;
pub mod recipes;
pub mod robustness;
pub mod transmon;
pub mod twoqubit;

pub use error::{GeoError, Result};
