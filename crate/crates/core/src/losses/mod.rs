//! Training objective, guiding-error maps and the auxiliary error loss.
//!
//! The SSIM guiding error is `(1 − SSIM)/2`, which lies in `[0, 1]`. The
//! revised growth threshold (`E_k > 0.1`) is calibrated against this scale.

pub mod ssim;

use serde::{Deserialize, Serialize};

use crate::camera::Camera;
use crate::error::{LossError, RasterError};
use crate::image::Image;
use crate::primitive::Scene;
use crate::raster::{backward, render_error_scalar, GradientBuffer, PixelGradients, RenderOutput};
use crate::splat::RenderSettings;

pub use ssim::{ssim_backward, ssim_map, ssim_map_and_backward};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GuidingError {
    #[default]
    Ssim,
    L1,
}

/// Non-negative per-pixel error `E_π(u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelErrorMap {
    pub kind: GuidingError,
    pub values: Image,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub photometric_l1: f64,
    pub photometric_dssim: f64,
    pub transmittance_reg: f64,
    /// Value of the auxiliary loss; zero by construction.
    pub aux: f64,
}

fn check_shapes(a: &Image, b: &Image) -> Result<(), LossError> {
    if a.shape() != b.shape() {
        return Err(LossError::ShapeMismatch {
            left: a.shape(),
            right: b.shape(),
        });
    }
    Ok(())
}

pub fn mean_abs_error(a: &Image, b: &Image) -> Result<f64, LossError> {
    check_shapes(a, b)?;
    if a.data.is_empty() {
        return Ok(0.0);
    }
    Ok(a.data.iter().zip(&b.data).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.data.len() as f64)
}

pub fn guiding_error_map(rendered: &Image, target: &Image, kind: GuidingError) -> Result<PixelErrorMap, LossError> {
    let values = match kind {
        GuidingError::Ssim => {
            let mut m = ssim_map(rendered, target)?;
            for v in &mut m.data {
                *v = ((1.0 - *v) * 0.5).max(0.0);
            }
            m
        }
        GuidingError::L1 => {
            check_shapes(rendered, target)?;
            let c = rendered.channels;
            Image::from_fn(rendered.width, rendered.height, 1, |x, y, _| {
                let (r, t) = (rendered.pixel(x, y), target.pixel(x, y));
                r.iter().zip(t).map(|(a, b)| (a - b).abs()).sum::<f64>() / c as f64
            })
        }
    };
    Ok(PixelErrorMap { kind, values })
}

/// Guiding error derived from an already computed SSIM map.
pub fn ssim_guiding_error(ssim: &Image) -> PixelErrorMap {
    let mut values = ssim.clone();
    for v in &mut values.data {
        *v = ((1.0 - *v) * 0.5).max(0.0);
    }
    PixelErrorMap {
        kind: GuidingError::Ssim,
        values,
    }
}

/// `(1 − λ)·L1 + λ·(1 − mean SSIM)/2`. Only the photometric fields of the
/// breakdown are filled.
pub fn photometric_loss(rendered: &Image, target: &Image, lambda: f64) -> Result<LossBreakdown, LossError> {
    let l1 = mean_abs_error(rendered, target)?;
    let dssim = (1.0 - ssim_map(rendered, target)?.mean()) * 0.5;
    Ok(LossBreakdown {
        total: (1.0 - lambda) * l1 + lambda * dssim,
        photometric_l1: l1,
        photometric_dssim: dssim,
        ..Default::default()
    })
}

/// Photometric loss together with its gradient wrt `rendered` and the SSIM
/// map it was computed from.
#[derive(Debug, Clone)]
pub struct PhotometricEval {
    pub loss: LossBreakdown,
    pub grad: Vec<f64>,
    pub ssim: Image,
}

pub fn photometric_loss_with_grad(rendered: &Image, target: &Image, lambda: f64) -> Result<PhotometricEval, LossError> {
    let l1 = mean_abs_error(rendered, target)?;
    // d/dx of λ·(1 − mean SSIM)/2
    let px = rendered.pixel_count().max(1) as f64;
    let up = vec![-0.5 * lambda / px; rendered.pixel_count()];
    let (ssim, ssim_grad) = ssim_map_and_backward(rendered, target, &up)?;
    let dssim = (1.0 - ssim.mean()) * 0.5;

    let n = rendered.data.len().max(1) as f64;
    let grad: Vec<f64> = rendered
        .data
        .iter()
        .zip(&target.data)
        .zip(&ssim_grad)
        .map(|((x, y), gs)| {
            let d = x - y;
            let s = if d > 0.0 {
                1.0
            } else if d < 0.0 {
                -1.0
            } else {
                0.0
            };
            (1.0 - lambda) * s / n + gs
        })
        .collect();
    Ok(PhotometricEval {
        loss: LossBreakdown {
            total: (1.0 - lambda) * l1 + lambda * dssim,
            photometric_l1: l1,
            photometric_dssim: dssim,
            ..Default::default()
        },
        grad,
        ssim,
    })
}

/// Mean residual transmittance over pixels.
pub fn transmittance_reg(out: &RenderOutput) -> f64 {
    out.residual_transmittance.mean()
}

/// Gradient of [`transmittance_reg`] scaled by `weight`, one value per pixel.
pub fn transmittance_reg_grad(out: &RenderOutput, weight: f64) -> Vec<f64> {
    let n = out.residual_transmittance.data.len().max(1);
    vec![weight / n as f64; out.residual_transmittance.data.len()]
}

/// Redistributes a pixel error map onto primitives by their compositing
/// weights, read directly from the forward cache:
/// `E_k = Σ_u E(u) ω_k(u)`.
pub fn per_primitive_error(map: &PixelErrorMap, out: &RenderOutput) -> Vec<f64> {
    let mut e = vec![0.0; out.cache.primitive_count];
    for y in 0..out.height() {
        for x in 0..out.width() {
            let err = map.values.get(x, y, 0);
            for c in out.contributions(x, y) {
                e[c.primitive] += err * c.weight;
            }
        }
    }
    e
}

/// The auxiliary loss `Σ_u stopgrad(E(u)) · R[Φ_ERR](u)` and its gradients.
#[derive(Debug, Clone)]
pub struct AuxErrorLoss {
    pub value: f64,
    pub gradients: GradientBuffer,
}

impl AuxErrorLoss {
    /// Per-primitive errors `E_k`, i.e. the gradient wrt each `e_k`.
    pub fn per_primitive(&self) -> Vec<f64> {
        self.gradients.params.iter().map(|g| g.err_scalar).collect()
    }
}

/// Evaluates the auxiliary loss through the error-scalar render and the
/// rasterizer's adjoint.
pub fn aux_error_loss(map: &PixelErrorMap, scene: &Scene, camera: &Camera, settings: &RenderSettings) -> Result<AuxErrorLoss, RasterError> {
    let out = render_error_scalar(scene, camera, settings)?;
    let value = out.image.data.iter().zip(&map.values.data).map(|(r, e)| r * e).sum();
    let gradients = backward(
        scene,
        camera,
        &out,
        &PixelGradients {
            image: Some(&map.values.data),
            ..Default::default()
        },
    )?;
    Ok(AuxErrorLoss { value, gradients })
}
