//! Scene representation: Gaussian primitives and their parameterization.
//!
//! Every primitive stores its parameters in fixed-size arrays regardless of
//! the scene mode. In [`Mode::TwoD`] only the leading components are live:
//! `position[..2]`, `log_scale[..2]` and `rotation[0]` (an angle in radians).
//! In [`Mode::ThreeD`] `rotation` is a quaternion `(w, x, y, z)` that need not
//! be normalized.

use nalgebra::{Matrix2, Matrix3};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[serde(rename = "2d")]
    TwoD,
    #[serde(rename = "3d")]
    ThreeD,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::TwoD => "2D",
            Mode::ThreeD => "3D",
        })
    }
}

impl Mode {
    pub fn dims(self) -> usize {
        match self {
            Mode::TwoD => 2,
            Mode::ThreeD => 3,
        }
    }
}

/// Optimizable parameter groups, each with its own learning rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamGroup {
    Position,
    LogScale,
    Rotation,
    Opacity,
    Feature,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 5] = [
        ParamGroup::Position,
        ParamGroup::LogScale,
        ParamGroup::Rotation,
        ParamGroup::Opacity,
        ParamGroup::Feature,
    ];

    /// Number of live scalars in this group for one primitive.
    pub fn width(self, mode: Mode) -> usize {
        match (self, mode) {
            (ParamGroup::Position | ParamGroup::LogScale, m) => m.dims(),
            (ParamGroup::Rotation, Mode::TwoD) => 1,
            (ParamGroup::Rotation, Mode::ThreeD) => 4,
            (ParamGroup::Opacity, _) => 1,
            (ParamGroup::Feature, _) => 3,
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// One splat. See the module docs for the layout of each field per mode.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GaussianPrimitive {
    pub position: [f64; 3],
    pub log_scale: [f64; 3],
    pub rotation: [f64; 4],
    pub opacity_logit: f64,
    /// Pre-activation RGB, decoded through a sigmoid.
    pub feature: [f64; 3],
    /// Auxiliary scalar rendered by the error decoder. Always zero outside
    /// of tests that probe the decoder directly.
    pub err_scalar: f64,
}

/// Per-primitive gradient with the same layout as [`GaussianPrimitive`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PrimitiveGrad {
    pub position: [f64; 3],
    pub log_scale: [f64; 3],
    pub rotation: [f64; 4],
    pub opacity_logit: f64,
    pub feature: [f64; 3],
    pub err_scalar: f64,
}

macro_rules! group_access {
    ($ty:ty) => {
        impl $ty {
            pub fn group(&self, group: ParamGroup, mode: Mode) -> &[f64] {
                let w = group.width(mode);
                match group {
                    ParamGroup::Position => &self.position[..w],
                    ParamGroup::LogScale => &self.log_scale[..w],
                    ParamGroup::Rotation => &self.rotation[..w],
                    ParamGroup::Opacity => std::slice::from_ref(&self.opacity_logit),
                    ParamGroup::Feature => &self.feature[..w],
                }
            }

            pub fn group_mut(&mut self, group: ParamGroup, mode: Mode) -> &mut [f64] {
                let w = group.width(mode);
                match group {
                    ParamGroup::Position => &mut self.position[..w],
                    ParamGroup::LogScale => &mut self.log_scale[..w],
                    ParamGroup::Rotation => &mut self.rotation[..w],
                    ParamGroup::Opacity => std::slice::from_mut(&mut self.opacity_logit),
                    ParamGroup::Feature => &mut self.feature[..w],
                }
            }
        }
    };
}

group_access!(GaussianPrimitive);
group_access!(PrimitiveGrad);

impl GaussianPrimitive {
    pub fn new_2d(position: [f64; 2], log_scale: [f64; 2], angle: f64, opacity: f64, rgb: [f64; 3]) -> Self {
        Self {
            position: [position[0], position[1], 0.0],
            log_scale: [log_scale[0], log_scale[1], 0.0],
            rotation: [angle, 0.0, 0.0, 0.0],
            opacity_logit: logit(opacity),
            feature: rgb.map(|c| logit(c.clamp(1e-6, 1.0 - 1e-6))),
            err_scalar: 0.0,
        }
    }

    pub fn new_3d(position: [f64; 3], log_scale: [f64; 3], quat: [f64; 4], opacity: f64, rgb: [f64; 3]) -> Self {
        Self {
            position,
            log_scale,
            rotation: quat,
            opacity_logit: logit(opacity),
            feature: rgb.map(|c| logit(c.clamp(1e-6, 1.0 - 1e-6))),
            err_scalar: 0.0,
        }
    }

    pub fn opacity(&self) -> f64 {
        sigmoid(self.opacity_logit)
    }

    pub fn set_opacity(&mut self, alpha: f64) {
        self.opacity_logit = logit(alpha);
    }

    pub fn color(&self) -> [f64; 3] {
        self.feature.map(sigmoid)
    }

    /// `R diag(exp(2 s)) Rᵀ` for the 2D parameterization.
    pub fn covariance_2d(&self) -> Matrix2<f64> {
        let (s, c) = self.rotation[0].sin_cos();
        let r = Matrix2::new(c, -s, s, c);
        let d = Matrix2::from_diagonal(&nalgebra::Vector2::new(
            (2.0 * self.log_scale[0]).exp(),
            (2.0 * self.log_scale[1]).exp(),
        ));
        let sigma = r * d * r.transpose();
        // exact symmetry; r * d * rᵀ can differ in the last ulp off-diagonal
        let off = 0.5 * (sigma[(0, 1)] + sigma[(1, 0)]);
        Matrix2::new(sigma[(0, 0)], off, off, sigma[(1, 1)])
    }

    pub fn covariance_3d(&self) -> Matrix3<f64> {
        let r = quat_to_rotation(normalize_quat(self.rotation));
        let d = Matrix3::from_diagonal(&nalgebra::Vector3::new(
            (2.0 * self.log_scale[0]).exp(),
            (2.0 * self.log_scale[1]).exp(),
            (2.0 * self.log_scale[2]).exp(),
        ));
        let sigma = r * d * r.transpose();
        (sigma + sigma.transpose()) * 0.5
    }

    /// Largest standard deviation, i.e. the square root of the largest
    /// covariance eigenvalue.
    pub fn max_std(&self, mode: Mode) -> f64 {
        self.log_scale[..mode.dims()]
            .iter()
            .fold(f64::NEG_INFINITY, |m, &s| m.max(s))
            .exp()
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.log_scale.iter().all(|v| v.is_finite())
            && self.rotation.iter().all(|v| v.is_finite())
            && self.opacity_logit.is_finite()
            && self.feature.iter().all(|v| v.is_finite())
    }
}

pub fn normalize_quat(q: [f64; 4]) -> [f64; 4] {
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n == 0.0 {
        [1.0, 0.0, 0.0, 0.0]
    } else {
        q.map(|v| v / n)
    }
}

/// Rotation matrix of a unit quaternion `(w, x, y, z)`.
pub fn quat_to_rotation(q: [f64; 4]) -> Matrix3<f64> {
    let [r, x, y, z] = q;
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - r * z),
        2.0 * (x * z + r * y),
        2.0 * (x * y + r * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - r * x),
        2.0 * (x * z - r * y),
        2.0 * (y * z + r * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// An ordered collection of primitives sharing one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub mode: Mode,
    pub primitives: Vec<GaussianPrimitive>,
}

impl Scene {
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            primitives: Vec::new(),
        }
    }

    pub fn with_primitives(mode: Mode, primitives: Vec<GaussianPrimitive>) -> Self {
        Self { mode, primitives }
    }

    pub fn len(&self) -> usize {
        self.primitives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primitives.is_empty()
    }

    /// Rounds every parameter to the nearest `f32`, the precision used by
    /// snapshots. After this, a save/load cycle is lossless.
    pub fn round_to_storage_precision(&mut self) {
        let mode = self.mode;
        for p in &mut self.primitives {
            for g in ParamGroup::ALL {
                for v in p.group_mut(g, mode) {
                    *v = *v as f32 as f64;
                }
            }
        }
    }
}
