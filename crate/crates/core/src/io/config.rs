//! TOML run configuration and scene initialization.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::IoError;
use crate::io::synthetic::SceneSpec;
use crate::primitive::{GaussianPrimitive, Mode, Scene};
use crate::trainer::TrainConfig;

/// Initial opacity of every primitive.
pub const INIT_OPACITY: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitSpec {
    /// Regular `nx × ny` lattice over the image (2D only).
    Grid { nx: usize, ny: usize },
    /// Uniform positions: over the image in 2D, in a ball of `radius` in 3D.
    Random {
        count: usize,
        #[serde(default = "default_radius")]
        radius: f64,
    },
}

fn default_radius() -> f64 {
    1.0
}

impl Default for InitSpec {
    fn default() -> Self {
        InitSpec::Grid { nx: 16, ny: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scene: SceneSpec,
    pub init: InitSpec,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), IoError> {
        self.train.validate().map_err(IoError::Invalid)?;
        match (&self.init, self.scene.mode()) {
            (InitSpec::Grid { .. }, Mode::ThreeD) => Err(IoError::Invalid("grid initialization is only defined for 2D scenes".into())),
            (InitSpec::Grid { nx, ny }, _) if nx * ny == 0 => Err(IoError::Invalid("grid initialization needs nx, ny > 0".into())),
            (InitSpec::Random { count: 0, .. }, _) => Err(IoError::Invalid("random initialization needs count > 0".into())),
            _ => Ok(()),
        }
    }
}

pub fn parse_config(text: &str, path: &Path) -> Result<RunConfig, IoError> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| IoError::Config {
        path: path.to_path_buf(),
        source: Box::new(e),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig, IoError> {
    let text = std::fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text, path)
}

pub fn to_toml(cfg: &RunConfig) -> String {
    toml::to_string(cfg).expect("run config is always representable")
}

fn sample_color(dataset: &Dataset, x: f64, y: f64) -> [f64; 3] {
    let t = &dataset.views[0].target;
    let px = (x.floor().max(0.0) as usize).min(t.width - 1);
    let py = (y.floor().max(0.0) as usize).min(t.height - 1);
    let p = t.pixel(px, py);
    [p[0], p[1], p[2]]
}

/// Builds the initial scene. 2D primitives take their color from the first
/// target; 3D primitives start gray.
pub fn initial_scene(spec: &InitSpec, dataset: &Dataset, seed: u64) -> Result<Scene, IoError> {
    let mode = dataset.mode().ok_or_else(|| IoError::Invalid("dataset has no views".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1417);
    let mut prims = Vec::new();
    match (spec, mode) {
        (InitSpec::Grid { nx, ny }, Mode::TwoD) => {
            let cam = &dataset.views[0].camera;
            let (sx, sy) = (cam.width as f64 / *nx as f64, cam.height as f64 / *ny as f64);
            for j in 0..*ny {
                for i in 0..*nx {
                    let (x, y) = ((i as f64 + 0.5) * sx, (j as f64 + 0.5) * sy);
                    let rgb = sample_color(dataset, x, y);
                    prims.push(GaussianPrimitive::new_2d([x, y], [(0.5 * sx).ln(), (0.5 * sy).ln()], 0.0, INIT_OPACITY, rgb));
                }
            }
        }
        (InitSpec::Grid { .. }, Mode::ThreeD) => {
            return Err(IoError::Invalid("grid initialization is only defined for 2D scenes".into()));
        }
        (InitSpec::Random { count, .. }, Mode::TwoD) => {
            let cam = &dataset.views[0].camera;
            let (w, h) = (cam.width as f64, cam.height as f64);
            let s = (0.5 * (w * h / *count as f64).sqrt()).ln();
            for _ in 0..*count {
                let (x, y) = (rng.random_range(0.0..w), rng.random_range(0.0..h));
                let angle = rng.random_range(0.0..std::f64::consts::PI);
                prims.push(GaussianPrimitive::new_2d([x, y], [s, s], angle, INIT_OPACITY, sample_color(dataset, x, y)));
            }
        }
        (InitSpec::Random { count, radius }, Mode::ThreeD) => {
            let s = (radius / (*count as f64).cbrt()).ln();
            for _ in 0..*count {
                let pos = loop {
                    let v = [0, 1, 2].map(|_| rng.random_range(-1.0..1.0));
                    if v.iter().map(|x: &f64| x * x).sum::<f64>() <= 1.0 {
                        break v.map(|c| c * radius);
                    }
                };
                prims.push(GaussianPrimitive::new_3d(pos, [s; 3], [1.0, 0.0, 0.0, 0.0], INIT_OPACITY, [0.5; 3]));
            }
        }
    }
    let mut scene = Scene::with_primitives(mode, prims);
    scene.round_to_storage_precision();
    Ok(scene)
}
