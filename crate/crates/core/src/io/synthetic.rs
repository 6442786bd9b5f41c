//! Deterministic synthetic datasets.

use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::camera::Camera;
use crate::dataset::{Dataset, View};
use crate::error::IoError;
use crate::image::Image;
use crate::io::image_io::load_image;
use crate::primitive::{GaussianPrimitive, Mode, Scene};
use crate::raster::{render, Decoder};
use crate::splat::RenderSettings;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Checker2d {
    pub width: usize,
    pub height: usize,
    pub cell: usize,
    /// Mix of value noise into the checker, 0 gives a pure binary pattern.
    pub noise_amplitude: f64,
    /// Lattice spacing of the noise in pixels.
    pub noise_scale: f64,
    /// Number of views; views after the first see the pattern shifted by a
    /// random subpixel offset.
    pub views: usize,
    pub seed: u64,
}

impl Default for Checker2d {
    fn default() -> Self {
        Self {
            width: 64,
            height: 64,
            cell: 8,
            noise_amplitude: 0.0,
            noise_scale: 4.0,
            views: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Texture2d {
    /// Relative paths resolve against the config file's directory.
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Blobs3d {
    pub width: usize,
    pub height: usize,
    pub primitives: usize,
    pub cameras: usize,
    /// Camera ring radius; blobs fill a ball of radius 1 at the origin.
    pub radius: f64,
    /// Focal length in pixels; `None` uses the image width.
    pub focal: Option<f64>,
    pub seed: u64,
}

impl Default for Blobs3d {
    fn default() -> Self {
        Self {
            width: 48,
            height: 48,
            primitives: 20,
            cameras: 8,
            radius: 4.0,
            focal: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SceneSpec {
    Checker2d(Checker2d),
    Texture2d(Texture2d),
    Blobs3d(Blobs3d),
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec::Checker2d(Checker2d::default())
    }
}

impl SceneSpec {
    pub fn mode(&self) -> Mode {
        match self {
            SceneSpec::Blobs3d(_) => Mode::ThreeD,
            _ => Mode::TwoD,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub dataset: Dataset,
    /// Primitives the targets were rendered from, when they exist.
    pub ground_truth: Option<Scene>,
}

/// Smoothly interpolated lattice noise in `[0, 1]`.
struct ValueNoise {
    nx: usize,
    scale: f64,
    lattice: Vec<f64>,
}

impl ValueNoise {
    fn new(width: usize, height: usize, scale: f64, rng: &mut ChaCha8Rng) -> Self {
        let scale = scale.max(1e-3);
        let nx = (width as f64 / scale).ceil() as usize + 3;
        let ny = (height as f64 / scale).ceil() as usize + 3;
        let lattice = (0..nx * ny).map(|_| rng.random::<f64>()).collect();
        Self { nx, scale, lattice }
    }

    fn at(&self, x: f64, y: f64) -> f64 {
        let ny = self.lattice.len() / self.nx;
        let fx = (x / self.scale + 1.0).clamp(0.0, (self.nx - 2) as f64);
        let fy = (y / self.scale + 1.0).clamp(0.0, (ny - 2) as f64);
        let (ix, iy) = (fx.floor() as usize, fy.floor() as usize);
        let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
        let (tx, ty) = (smooth(fx - ix as f64), smooth(fy - iy as f64));
        let v = |i: usize, j: usize| self.lattice[j * self.nx + i];
        let top = v(ix, iy) * (1.0 - tx) + v(ix + 1, iy) * tx;
        let bottom = v(ix, iy + 1) * (1.0 - tx) + v(ix + 1, iy + 1) * tx;
        top * (1.0 - ty) + bottom * ty
    }
}

pub fn checker2d(p: &Checker2d) -> SyntheticScene {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let noise: Vec<ValueNoise> = (0..3).map(|_| ValueNoise::new(p.width, p.height, p.noise_scale, &mut rng)).collect();
    let cell = p.cell.max(1) as f64;
    let a = p.noise_amplitude.clamp(0.0, 1.0);
    let pattern = |x: f64, y: f64, c: usize| {
        let on = ((x / cell).floor() as i64 + (y / cell).floor() as i64).rem_euclid(2) == 1;
        let base = if on { 1.0 } else { 0.0 };
        if a == 0.0 {
            base
        } else {
            (1.0 - a) * base + a * noise[c].at(x, y)
        }
    };
    let views = (0..p.views.max(1))
        .map(|j| {
            let (dx, dy) = if j == 0 {
                (0.0, 0.0)
            } else {
                (rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5))
            };
            let camera = Camera::identity2d(p.width, p.height).with_offset(dx, dy);
            // pixel centre u sees scene point u − offset
            let target = Image::from_fn(p.width, p.height, 3, |x, y, c| pattern(x as f64 + 0.5 - dx, y as f64 + 0.5 - dy, c));
            View { camera, target }
        })
        .collect();
    SyntheticScene {
        dataset: Dataset::new(views),
        ground_truth: None,
    }
}

pub fn texture2d(p: &Texture2d, base_dir: &Path) -> Result<SyntheticScene, IoError> {
    let path = if p.path.is_absolute() { p.path.clone() } else { base_dir.join(&p.path) };
    let target = load_image(&path)?;
    let camera = Camera::identity2d(target.width, target.height);
    Ok(SyntheticScene {
        dataset: Dataset::new(vec![View { camera, target }]),
        ground_truth: None,
    })
}

/// Ring of cameras around the origin, slightly above the equator.
pub fn ring_cameras(count: usize, width: usize, height: usize, radius: f64, focal: f64) -> Vec<Camera> {
    (0..count)
        .map(|j| {
            let phi = std::f64::consts::TAU * j as f64 / count as f64;
            let eye = Vector3::new(radius * phi.cos(), -0.3 * radius, radius * phi.sin());
            Camera::look_at(width, height, focal, eye, Vector3::zeros(), Vector3::new(0.0, -1.0, 0.0))
        })
        .collect()
}

pub fn blobs3d(p: &Blobs3d) -> Result<SyntheticScene, IoError> {
    if p.cameras == 0 || p.width == 0 || p.height == 0 {
        return Err(IoError::Invalid("blobs3d needs at least one camera and a non-empty image".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut prims = Vec::with_capacity(p.primitives);
    for _ in 0..p.primitives {
        // rejection sample the unit ball
        let pos = loop {
            let v = [0, 1, 2].map(|_| rng.random_range(-1.0..1.0));
            if v.iter().map(|x: &f64| x * x).sum::<f64>() <= 1.0 {
                break v;
            }
        };
        let scale = [0, 1, 2].map(|_| rng.random_range(0.08f64..0.3).ln());
        let quat = [0, 1, 2, 3].map(|_| rng.random_range(-1.0..1.0));
        let rgb = [0, 1, 2].map(|_| rng.random_range(0.05..0.95));
        prims.push(GaussianPrimitive::new_3d(pos, scale, quat, rng.random_range(0.5..0.95), rgb));
    }
    let mut truth = Scene::with_primitives(Mode::ThreeD, prims);
    truth.round_to_storage_precision();

    let focal = p.focal.unwrap_or(p.width as f64);
    let settings = RenderSettings::default();
    let views = ring_cameras(p.cameras, p.width, p.height, p.radius, focal)
        .into_iter()
        .map(|camera| {
            let target = render(&truth, &camera, Decoder::Rgb, &settings).map(|o| o.image);
            target.map(|target| View { camera, target })
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| IoError::Invalid(e.to_string()))?;
    Ok(SyntheticScene {
        dataset: Dataset::new(views),
        ground_truth: Some(truth),
    })
}

pub fn make_synthetic(spec: &SceneSpec, base_dir: &Path) -> Result<SyntheticScene, IoError> {
    match spec {
        SceneSpec::Checker2d(p) => Ok(checker2d(p)),
        SceneSpec::Texture2d(p) => texture2d(p, base_dir),
        SceneSpec::Blobs3d(p) => blobs3d(p),
    }
}
