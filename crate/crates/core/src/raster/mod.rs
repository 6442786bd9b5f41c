//! Front-to-back alpha compositing of splatted primitives and its adjoint.
//!
//! A pixel's value is `Σ_k Φ_k ω_k` with `ω_k = α_k G_k Π_{j<k} (1 − α_j G_j)`
//! over primitives sorted by depth (ties, and every 2D scene, by index).
//! The sample point of pixel `(x, y)` is its center `(x + 0.5, y + 0.5)`.

mod backward;

pub use backward::{backward, GradientBuffer, PixelGradients};

use crate::camera::Camera;
use crate::error::RasterError;
use crate::image::Image;
use crate::primitive::Scene;
use crate::splat::{project, Projected, RenderSettings};

/// What each primitive contributes to a pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decoder {
    /// Sigmoid-decoded RGB feature.
    Rgb,
    /// Constant 1; the rendered value is the total opacity `1 − T`.
    Ones,
    /// The auxiliary per-primitive scalar `e_k`.
    ErrScalar,
}

impl Decoder {
    pub fn channels(self) -> usize {
        match self {
            Decoder::Rgb => 3,
            Decoder::Ones | Decoder::ErrScalar => 1,
        }
    }
}

/// One primitive's share of a pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contribution {
    pub primitive: usize,
    pub gaussian: f64,
    /// Compositing weight `ω`.
    pub weight: f64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Record {
    pub slot: u32,
    pub g: f64,
    pub t_before: f64,
    pub weight: f64,
}

/// Per-pixel compositing state kept for the backward pass.
#[derive(Debug, Clone)]
pub struct RenderCache {
    pub(crate) projected: Vec<Projected>,
    pub(crate) values: Vec<[f64; 3]>,
    pub(crate) ranges: Vec<(u32, u32)>,
    pub(crate) records: Vec<Record>,
    pub(crate) primitive_count: usize,
    pub(crate) decoder: Decoder,
}

#[derive(Debug, Clone)]
pub struct RenderOutput {
    pub image: Image,
    /// `T(u) = Π_k (1 − α_k G_k(u))` over the contributions actually composited.
    pub residual_transmittance: Image,
    pub cache: RenderCache,
}

impl RenderOutput {
    pub fn width(&self) -> usize {
        self.image.width
    }

    pub fn height(&self) -> usize {
        self.image.height
    }

    /// Front-to-back contributions at pixel `(x, y)`.
    pub fn contributions(&self, x: usize, y: usize) -> impl Iterator<Item = Contribution> + '_ {
        let (start, len) = self.cache.ranges[y * self.image.width + x];
        self.cache.records[start as usize..(start + len) as usize]
            .iter()
            .map(|r| Contribution {
                primitive: self.cache.projected[r.slot as usize].index,
                gaussian: r.g,
                weight: r.weight,
            })
    }

    /// Whether primitive `k` survived culling.
    pub fn visible(&self) -> Vec<bool> {
        let mut v = vec![false; self.cache.primitive_count];
        for p in &self.cache.projected {
            v[p.index] = true;
        }
        v
    }
}

pub fn render(scene: &Scene, camera: &Camera, decoder: Decoder, settings: &RenderSettings) -> Result<RenderOutput, RasterError> {
    if scene.mode != camera.mode() {
        return Err(RasterError::ModeMismatch {
            scene: scene.mode,
            camera: camera.mode(),
        });
    }
    let (w, h) = (camera.width, camera.height);
    let channels = decoder.channels();

    let mut projected: Vec<Projected> = scene
        .primitives
        .iter()
        .enumerate()
        .filter_map(|(i, p)| project(i, p, camera, settings))
        .collect();
    projected.sort_by(|a, b| a.splat.depth.total_cmp(&b.splat.depth).then(a.index.cmp(&b.index)));

    let values: Vec<[f64; 3]> = projected
        .iter()
        .map(|pr| {
            let p = &scene.primitives[pr.index];
            match decoder {
                Decoder::Rgb => p.color(),
                Decoder::Ones => [1.0, 0.0, 0.0],
                Decoder::ErrScalar => [p.err_scalar, 0.0, 0.0],
            }
        })
        .collect();

    // primitive-major front-to-back pass; each pixel still sees its
    // primitives in depth order
    let mut acc = vec![0.0; w * h * channels];
    let mut trans = Image::filled(w, h, 1, 1.0);
    let mut done = vec![false; w * h];
    let mut raw: Vec<(u32, Record)> = Vec::new();
    for (slot, pr) in projected.iter().enumerate() {
        let [bx0, bx1, by0, by1] = pr.bbox;
        let [a, b, c] = pr.conic;
        let v = &values[slot];
        for py in by0..=by1 {
            let dy = py as f64 + 0.5 - pr.splat.mean2d[1];
            for px in bx0..=bx1 {
                let i = py * w + px;
                if done[i] {
                    continue;
                }
                let dx = px as f64 + 0.5 - pr.splat.mean2d[0];
                let g = (-0.5 * (a * dx * dx + 2.0 * b * dx * dy + c * dy * dy)).exp();
                let ag = pr.alpha * g;
                if ag < settings.alpha_cutoff || ag == 0.0 {
                    continue;
                }
                let t = trans.data[i];
                let weight = t * ag;
                for ch in 0..channels {
                    acc[i * channels + ch] += v[ch] * weight;
                }
                raw.push((
                    i as u32,
                    Record {
                        slot: slot as u32,
                        g,
                        t_before: t,
                        weight,
                    },
                ));
                let t = t * (1.0 - ag);
                trans.data[i] = t;
                if t < settings.early_stop {
                    done[i] = true;
                }
            }
        }
    }

    // group records by pixel, keeping depth order within each pixel
    let mut ranges = vec![(0u32, 0u32); w * h];
    for (i, _) in &raw {
        ranges[*i as usize].1 += 1;
    }
    let mut offset = 0u32;
    for r in ranges.iter_mut() {
        r.0 = offset;
        offset += r.1;
    }
    let mut fill: Vec<u32> = ranges.iter().map(|r| r.0).collect();
    let mut records = vec![
        Record {
            slot: 0,
            g: 0.0,
            t_before: 0.0,
            weight: 0.0
        };
        raw.len()
    ];
    for (i, rec) in raw {
        let at = &mut fill[i as usize];
        records[*at as usize] = rec;
        *at += 1;
    }
    let image = Image {
        width: w,
        height: h,
        channels,
        data: acc,
    };

    Ok(RenderOutput {
        image,
        residual_transmittance: trans,
        cache: RenderCache {
            projected,
            values,
            ranges,
            records,
            primitive_count: scene.len(),
            decoder,
        },
    })
}

/// Renders the auxiliary scalars `e_k`. Identically zero while every `e_k`
/// is zero; it exists so its adjoint can deliver per-primitive errors.
pub fn render_error_scalar(scene: &Scene, camera: &Camera, settings: &RenderSettings) -> Result<RenderOutput, RasterError> {
    render(scene, camera, Decoder::ErrScalar, settings)
}
