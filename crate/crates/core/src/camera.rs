use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::primitive::Mode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CameraModel {
    /// Positions are pixel coordinates (plus the translation offset).
    Identity2d,
    Pinhole3d,
}

impl CameraModel {
    pub fn mode(self) -> Mode {
        match self {
            CameraModel::Identity2d => Mode::TwoD,
            CameraModel::Pinhole3d => Mode::ThreeD,
        }
    }
}

/// World-to-image map. For `Identity2d` only `translation[..2]` is used and
/// the Jacobian is the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Camera {
    pub model: CameraModel,
    pub width: usize,
    pub height: usize,
    #[serde(default = "identity_rows")]
    pub rotation: [[f64; 3]; 3],
    #[serde(default)]
    pub translation: [f64; 3],
    #[serde(default)]
    pub fx: f64,
    #[serde(default)]
    pub fy: f64,
    #[serde(default)]
    pub cx: f64,
    #[serde(default)]
    pub cy: f64,
}

fn identity_rows() -> [[f64; 3]; 3] {
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

/// Primitives closer than this in camera space are culled.
pub const NEAR_PLANE: f64 = 0.01;

impl Camera {
    pub fn identity2d(width: usize, height: usize) -> Self {
        Self {
            model: CameraModel::Identity2d,
            width,
            height,
            rotation: identity_rows(),
            translation: [0.0; 3],
            fx: 1.0,
            fy: 1.0,
            cx: 0.0,
            cy: 0.0,
        }
    }

    /// 2D camera whose pixel grid is shifted by `(dx, dy)` relative to the
    /// scene plane.
    pub fn with_offset(mut self, dx: f64, dy: f64) -> Self {
        self.translation[0] = dx;
        self.translation[1] = dy;
        self
    }

    pub fn pinhole(
        width: usize,
        height: usize,
        focal: f64,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
    ) -> Self {
        let mut rows = [[0.0; 3]; 3];
        for (i, row) in rows.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = rotation[(i, j)];
            }
        }
        Self {
            model: CameraModel::Pinhole3d,
            width,
            height,
            rotation: rows,
            translation: [translation.x, translation.y, translation.z],
            fx: focal,
            fy: focal,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
        }
    }

    /// Pinhole camera at `eye` looking at `target`, with +y pointing down in
    /// the image.
    pub fn look_at(width: usize, height: usize, focal: f64, eye: Vector3<f64>, target: Vector3<f64>, up: Vector3<f64>) -> Self {
        let forward = (target - eye).normalize();
        let right = forward.cross(&up).normalize();
        let down = forward.cross(&right);
        let r = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let t = -(r * eye);
        Self::pinhole(width, height, focal, r, t)
    }

    pub fn mode(&self) -> Mode {
        self.model.mode()
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        let r = &self.rotation;
        Matrix3::new(
            r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2],
        )
    }

    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation_matrix().transpose() * Vector3::from(self.translation))
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }
}
