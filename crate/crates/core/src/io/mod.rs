//! Snapshots, images, synthetic datasets and run configuration.

pub mod config;
pub mod image_io;
pub mod snapshot;
pub mod synthetic;

pub use config::{initial_scene, load_config, parse_config, InitSpec, RunConfig};
pub use image_io::{load_image, save_image};
pub use snapshot::{decode_snapshot, encode_snapshot, load_snapshot, save_snapshot};
pub use synthetic::{make_synthetic, SceneSpec, SyntheticScene};
