//! First-order projection of primitives to image-plane Gaussians, and the
//! adjoint of that projection.

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::camera::{Camera, CameraModel, NEAR_PLANE};
use crate::primitive::{normalize_quat, quat_to_rotation, sigmoid, GaussianPrimitive, Mode, PrimitiveGrad};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderSettings {
    /// Added to both diagonal entries of every splatted covariance, px².
    pub dilation: f64,
    /// Contributions with `α·G` below this are skipped. Zero disables both
    /// the cutoff and extent-based culling.
    pub alpha_cutoff: f64,
    /// Compositing stops once transmittance drops below this. Zero disables.
    pub early_stop: f64,
}

impl Default for RenderSettings {
    fn default() -> Self {
        Self {
            dilation: 0.3,
            alpha_cutoff: 1.0 / 255.0,
            early_stop: 1e-4,
        }
    }
}

impl RenderSettings {
    /// No cutoff, no early termination: every primitive in front of the
    /// camera reaches every pixel.
    pub fn exact() -> Self {
        Self {
            alpha_cutoff: 0.0,
            early_stop: 0.0,
            ..Self::default()
        }
    }

    pub fn with_dilation(mut self, dilation: f64) -> Self {
        self.dilation = dilation;
        self
    }
}

/// A primitive projected to the image plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplattedGaussian {
    pub mean2d: [f64; 2],
    /// `(xx, xy, yy)` of the symmetric 2×2 covariance, dilation included.
    pub cov2d: [f64; 3],
    /// Camera-space depth; zero in 2D mode where insertion order decides.
    pub depth: f64,
}

impl SplattedGaussian {
    /// `(a, b, c)` of the inverse covariance `[[a, b], [b, c]]`.
    pub fn conic(&self) -> [f64; 3] {
        let [xx, xy, yy] = self.cov2d;
        let det = xx * yy - xy * xy;
        [yy / det, -xy / det, xx / det]
    }
}

/// `exp(−½ dᵀ Σ⁻¹ d)` with `d = pixel − mean2d`.
pub fn gaussian_eval(splat: &SplattedGaussian, pixel: [f64; 2]) -> f64 {
    let [a, b, c] = splat.conic();
    let dx = pixel[0] - splat.mean2d[0];
    let dy = pixel[1] - splat.mean2d[1];
    (-0.5 * (a * dx * dx + 2.0 * b * dx * dy + c * dy * dy)).exp()
}

/// Everything the rasterizer needs about one visible primitive.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Projected {
    pub index: usize,
    pub splat: SplattedGaussian,
    pub conic: [f64; 3],
    pub alpha: f64,
    /// Inclusive pixel bounds `[x0, x1, y0, y1]`.
    pub bbox: [usize; 4],
}

/// Projects one primitive; `None` means culled.
pub fn splat(p: &GaussianPrimitive, camera: &Camera, settings: &RenderSettings) -> Option<SplattedGaussian> {
    project(0, p, camera, settings).map(|pr| pr.splat)
}

pub(crate) fn project(index: usize, p: &GaussianPrimitive, camera: &Camera, settings: &RenderSettings) -> Option<Projected> {
    let (mean2d, cov, depth) = match camera.model {
        CameraModel::Identity2d => {
            let c = p.covariance_2d();
            (
                [p.position[0] + camera.translation[0], p.position[1] + camera.translation[1]],
                c,
                0.0,
            )
        }
        CameraModel::Pinhole3d => {
            let w = camera.rotation_matrix();
            let pc = w * Vector3::from(p.position) + Vector3::from(camera.translation);
            if pc.z <= NEAR_PLANE {
                return None;
            }
            let j = pinhole_jacobian(camera, &pc);
            let t = j * w;
            let c = t * p.covariance_3d() * t.transpose();
            (
                [camera.fx * pc.x / pc.z + camera.cx, camera.fy * pc.y / pc.z + camera.cy],
                c,
                pc.z,
            )
        }
    };
    let xx = cov[(0, 0)] + settings.dilation;
    let yy = cov[(1, 1)] + settings.dilation;
    let xy = 0.5 * (cov[(0, 1)] + cov[(1, 0)]);
    let det = xx * yy - xy * xy;
    if !det.is_finite() || det <= 0.0 {
        return None;
    }
    let splat = SplattedGaussian {
        mean2d,
        cov2d: [xx, xy, yy],
        depth,
    };
    let alpha = sigmoid(p.opacity_logit);
    let bbox = if settings.alpha_cutoff > 0.0 {
        if alpha < settings.alpha_cutoff {
            return None;
        }
        // α·G ≥ cutoff implies a Mahalanobis radius of at most sqrt(2 ln(α/cutoff))
        let r = (2.0 * (alpha / settings.alpha_cutoff).ln()).sqrt().max(3.0);
        pixel_range(mean2d[0], r * xx.sqrt(), camera.width)
            .zip(pixel_range(mean2d[1], r * yy.sqrt(), camera.height))
            .map(|((x0, x1), (y0, y1))| [x0, x1, y0, y1])?
    } else {
        if camera.width == 0 || camera.height == 0 {
            return None;
        }
        [0, camera.width - 1, 0, camera.height - 1]
    };
    Some(Projected {
        index,
        splat,
        conic: splat.conic(),
        alpha,
        bbox,
    })
}

/// Pixels whose centers lie within `half` of `center`, clipped to `[0, n)`.
fn pixel_range(center: f64, half: f64, n: usize) -> Option<(usize, usize)> {
    let lo = (center - half - 0.5).ceil();
    let hi = (center + half - 0.5).floor();
    if lo.is_nan() || hi.is_nan() || lo > hi || hi < 0.0 || lo >= n as f64 {
        return None;
    }
    Some((lo.max(0.0) as usize, (hi.min(n as f64 - 1.0)) as usize))
}

fn pinhole_jacobian(camera: &Camera, pc: &Vector3<f64>) -> Matrix2x3<f64> {
    let iz = 1.0 / pc.z;
    let iz2 = iz * iz;
    Matrix2x3::new(
        camera.fx * iz,
        0.0,
        -camera.fx * pc.x * iz2,
        0.0,
        camera.fy * iz,
        -camera.fy * pc.y * iz2,
    )
}

/// Image-plane gradients of one primitive, accumulated over pixels.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct SplatGrad {
    pub mean2d: [f64; 2],
    /// Gradient wrt the full symmetric inverse covariance, `(aa, ab, bb)`
    /// where `ab` is the gradient of one off-diagonal entry.
    pub conic: [f64; 3],
    pub alpha: f64,
    pub color: [f64; 3],
    pub err: f64,
}


/// Chains image-plane gradients back to the primitive parameters.
pub(crate) fn splat_backward(p: &GaussianPrimitive, mode: Mode, camera: &Camera, pr: &Projected, g: &SplatGrad) -> PrimitiveGrad {
    let mut out = PrimitiveGrad::default();

    let [a, b, c] = pr.conic;
    let q = Matrix2::new(a, b, b, c);
    let gq = Matrix2::new(g.conic[0], g.conic[1], g.conic[1], g.conic[2]);
    // d(Σ⁻¹) = −Σ⁻¹ dΣ Σ⁻¹
    let g_cov = -(q * gq * q);

    let alpha = pr.alpha;
    out.opacity_logit = g.alpha * alpha * (1.0 - alpha);
    let col = p.color();
    for i in 0..3 {
        out.feature[i] = g.color[i] * col[i] * (1.0 - col[i]);
    }
    out.err_scalar = g.err;

    match mode {
        Mode::TwoD => {
            out.position[0] = g.mean2d[0];
            out.position[1] = g.mean2d[1];
            let theta = p.rotation[0];
            let (s, co) = theta.sin_cos();
            let v0 = (2.0 * p.log_scale[0]).exp();
            let v1 = (2.0 * p.log_scale[1]).exp();
            let r = Matrix2::new(co, -s, s, co);
            let m = r.transpose() * g_cov * r;
            out.log_scale[0] = 2.0 * v0 * m[(0, 0)];
            out.log_scale[1] = 2.0 * v1 * m[(1, 1)];
            let dv = v0 - v1;
            let d_xx = -2.0 * co * s * dv;
            let d_xy = (co * co - s * s) * dv;
            let d_yy = 2.0 * co * s * dv;
            out.rotation[0] = g_cov[(0, 0)] * d_xx + 2.0 * g_cov[(0, 1)] * d_xy + g_cov[(1, 1)] * d_yy;
        }
        Mode::ThreeD => {
            let w = camera.rotation_matrix();
            let pc = w * Vector3::from(p.position) + Vector3::from(camera.translation);
            let j = pinhole_jacobian(camera, &pc);
            let t = j * w;
            let sigma = p.covariance_3d();

            let g_sigma: Matrix3<f64> = t.transpose() * g_cov * t;
            let g_t: Matrix2x3<f64> = 2.0 * g_cov * t * sigma;
            let g_j: Matrix2x3<f64> = g_t * w.transpose();

            let (x, y, z) = (pc.x, pc.y, pc.z);
            let (fx, fy) = (camera.fx, camera.fy);
            let iz = 1.0 / z;
            let iz2 = iz * iz;
            let iz3 = iz2 * iz;
            let gm = Vector2::from(g.mean2d);
            let mut g_pc = Vector3::new(
                gm.x * fx * iz,
                gm.y * fy * iz,
                -gm.x * fx * x * iz2 - gm.y * fy * y * iz2,
            );
            g_pc.x += g_j[(0, 2)] * (-fx * iz2);
            g_pc.y += g_j[(1, 2)] * (-fy * iz2);
            g_pc.z += g_j[(0, 0)] * (-fx * iz2)
                + g_j[(0, 2)] * (2.0 * fx * x * iz3)
                + g_j[(1, 1)] * (-fy * iz2)
                + g_j[(1, 2)] * (2.0 * fy * y * iz3);
            let g_pos = w.transpose() * g_pc;
            out.position = [g_pos.x, g_pos.y, g_pos.z];

            let (g_scale, g_quat) = covariance_3d_backward(p, &g_sigma);
            out.log_scale = g_scale;
            out.rotation = g_quat;
        }
    }
    out
}

/// Adjoint of `Σ = R(q̂) S² R(q̂)ᵀ` with `S = diag(exp(s))`, `q̂ = q/|q|`.
fn covariance_3d_backward(p: &GaussianPrimitive, g_sigma: &Matrix3<f64>) -> ([f64; 3], [f64; 4]) {
    let n = normalize_quat(p.rotation);
    let r = quat_to_rotation(n);
    let sd = Vector3::new(p.log_scale[0].exp(), p.log_scale[1].exp(), p.log_scale[2].exp());
    let m = r * Matrix3::from_diagonal(&sd);
    let gs = 0.5 * (g_sigma + g_sigma.transpose());
    let g_m = 2.0 * gs * m;

    let mut g_scale = [0.0; 3];
    let mut g_r = Matrix3::zeros();
    for col in 0..3 {
        let mut acc = 0.0;
        for row in 0..3 {
            acc += g_m[(row, col)] * r[(row, col)];
            g_r[(row, col)] = g_m[(row, col)] * sd[col];
        }
        // dσ/ds = σ
        g_scale[col] = acc * sd[col];
    }

    let [qr, qx, qy, qz] = n;
    let d_r = Matrix3::new(0.0, -qz, qy, qz, 0.0, -qx, -qy, qx, 0.0) * 2.0;
    let d_x = Matrix3::new(0.0, qy, qz, qy, -2.0 * qx, -qr, qz, qr, -2.0 * qx) * 2.0;
    let d_y = Matrix3::new(-2.0 * qy, qx, qr, qx, 0.0, qz, -qr, qz, -2.0 * qy) * 2.0;
    let d_z = Matrix3::new(-2.0 * qz, -qr, qx, qr, -2.0 * qz, qy, qx, qy, 0.0) * 2.0;
    let g_n = [
        g_r.component_mul(&d_r).sum(),
        g_r.component_mul(&d_x).sum(),
        g_r.component_mul(&d_y).sum(),
        g_r.component_mul(&d_z).sum(),
    ];
    let norm = p.rotation.iter().map(|v| v * v).sum::<f64>().sqrt();
    let dot: f64 = (0..4).map(|i| n[i] * g_n[i]).sum();
    let g_q = [0, 1, 2, 3].map(|i| (g_n[i] - n[i] * dot) / norm);
    (g_scale, g_q)
}
