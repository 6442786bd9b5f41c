use crate::camera::Camera;
use crate::error::RasterError;
use crate::primitive::{PrimitiveGrad, Scene};
use crate::splat::{splat_backward, SplatGrad};

use super::{Decoder, RenderOutput};

/// Upstream gradients of the loss wrt rendered quantities. Every field is
/// optional; absent ones count as zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct PixelGradients<'a> {
    /// `∂L/∂image`, laid out like `RenderOutput::image`.
    pub image: Option<&'a [f64]>,
    /// `∂L/∂T(u)`, one value per pixel.
    pub transmittance: Option<&'a [f64]>,
    /// Upstream gradient of an error-scalar render sharing this pass's
    /// compositing weights, one value per pixel. Lets the auxiliary loss ride
    /// on the RGB pass instead of a second render.
    pub error: Option<&'a [f64]>,
}

/// Per-primitive gradients from one backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBuffer {
    pub params: Vec<PrimitiveGrad>,
    /// `∂L/∂mean2d` in pixel units.
    pub mean2d: Vec<[f64; 2]>,
    /// `∂L/∂mean2d` wrt normalized device coordinates (pixel gradient scaled
    /// by half the resolution). This is the screen-space positional gradient
    /// the baseline densification score averages.
    pub mean2d_ndc: Vec<[f64; 2]>,
    /// Primitives that survived culling in this view.
    pub visible: Vec<bool>,
}

impl GradientBuffer {
    pub fn zeros(n: usize) -> Self {
        Self {
            params: vec![PrimitiveGrad::default(); n],
            mean2d: vec![[0.0; 2]; n],
            mean2d_ndc: vec![[0.0; 2]; n],
            visible: vec![false; n],
        }
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }
}

fn check_len(slice: Option<&[f64]>, expected: usize) -> Result<(), RasterError> {
    match slice {
        Some(s) if s.len() != expected => Err(RasterError::UpstreamShape {
            expected,
            actual: s.len(),
        }),
        _ => Ok(()),
    }
}

/// Exact adjoint of [`super::render`]. `scene` and `camera` must be the ones
/// the output was rendered from.
pub fn backward(scene: &Scene, camera: &Camera, out: &RenderOutput, upstream: &PixelGradients) -> Result<GradientBuffer, RasterError> {
    let cache = &out.cache;
    if cache.primitive_count != scene.len() {
        return Err(RasterError::CacheMismatch {
            cached: cache.primitive_count,
            actual: scene.len(),
        });
    }
    let (w, h) = (out.width(), out.height());
    if w != camera.width || h != camera.height {
        return Err(RasterError::UpstreamShape {
            expected: w * h,
            actual: camera.pixel_count(),
        });
    }
    let channels = cache.decoder.channels();
    check_len(upstream.image, w * h * channels)?;
    check_len(upstream.transmittance, w * h)?;
    check_len(upstream.error, w * h)?;

    let mut acc = vec![SplatGrad::default(); cache.projected.len()];
    let err_values: Vec<f64> = cache
        .projected
        .iter()
        .map(|pr| scene.primitives[pr.index].err_scalar)
        .collect();

    for py in 0..h {
        for px in 0..w {
            let i = py * w + px;
            let (start, len) = cache.ranges[i];
            if len == 0 {
                continue;
            }
            let g_img = upstream.image.map(|g| &g[i * channels..(i + 1) * channels]);
            let g_t = upstream.transmittance.map_or(0.0, |g| g[i]);
            let g_e = upstream.error.map_or(0.0, |g| g[i]);
            if g_img.is_none_or(|g| g.iter().all(|v| *v == 0.0)) && g_t == 0.0 && g_e == 0.0 {
                continue;
            }
            let ux = px as f64 + 0.5;
            let uy = py as f64 + 0.5;

            // suffix state: decoded value seen from behind k, error likewise,
            // and the product of (1 − a_j) over j > k
            let mut behind = [0.0; 3];
            let mut behind_err = 0.0;
            let mut suffix = 1.0;
            for rec in cache.records[start as usize..(start + len) as usize].iter().rev() {
                let slot = rec.slot as usize;
                let pr = &cache.projected[slot];
                let a = pr.alpha * rec.g;
                let t = rec.t_before;
                let v = &cache.values[slot];
                let e = err_values[slot];
                let sg = &mut acc[slot];

                let mut d_a = 0.0;
                if let Some(g) = g_img {
                    for ch in 0..channels {
                        d_a += g[ch] * t * (v[ch] - behind[ch]);
                    }
                    match cache.decoder {
                        Decoder::Rgb => {
                            for ch in 0..3 {
                                sg.color[ch] += g[ch] * rec.weight;
                            }
                        }
                        Decoder::ErrScalar => sg.err += g[0] * rec.weight,
                        Decoder::Ones => {}
                    }
                }
                d_a -= g_t * t * suffix;
                d_a += g_e * t * (e - behind_err);
                sg.err += g_e * rec.weight;

                sg.alpha += d_a * rec.g;
                let d_g = d_a * pr.alpha * rec.g;
                let dx = ux - pr.splat.mean2d[0];
                let dy = uy - pr.splat.mean2d[1];
                let [qa, qb, qc] = pr.conic;
                sg.mean2d[0] += d_g * (qa * dx + qb * dy);
                sg.mean2d[1] += d_g * (qb * dx + qc * dy);
                sg.conic[0] -= 0.5 * d_g * dx * dx;
                sg.conic[1] -= 0.5 * d_g * dx * dy;
                sg.conic[2] -= 0.5 * d_g * dy * dy;

                for ch in 0..channels {
                    behind[ch] = v[ch] * a + (1.0 - a) * behind[ch];
                }
                behind_err = e * a + (1.0 - a) * behind_err;
                suffix *= 1.0 - a;
            }
        }
    }

    let mut buf = GradientBuffer::zeros(scene.len());
    for (pr, sg) in cache.projected.iter().zip(&acc) {
        let k = pr.index;
        buf.visible[k] = true;
        buf.mean2d[k] = sg.mean2d;
        buf.mean2d_ndc[k] = [sg.mean2d[0] * w as f64 * 0.5, sg.mean2d[1] * h as f64 * 0.5];
        let mut pg = splat_backward(&scene.primitives[k], scene.mode, camera, pr, sg);
        if cache.decoder != Decoder::Rgb {
            pg.feature = [0.0; 3];
        }
        buf.params[k] = pg;
    }
    Ok(buf)
}
