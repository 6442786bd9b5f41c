//! Shared fixtures: random scenes and a brute-force compositing oracle that
//! re-derives projection and blending without the rasterizer's code paths.

#![allow(dead_code)]

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Quaternion, UnitQuaternion, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
pub mod checks;

use splat_adc::{Camera, CameraModel, GaussianPrimitive, Image, Mode, RenderSettings, Scene};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub struct Case {
    pub scene: Scene,
    pub camera: Camera,
}

/// 2D scene of `1..=max_prims` primitives on a `w × h` image.
pub fn random_2d(rng: &mut ChaCha8Rng, max_prims: usize, w: usize, h: usize) -> Case {
    let n = rng.random_range(1..=max_prims);
    let prims = (0..n)
        .map(|_| {
            GaussianPrimitive::new_2d(
                [rng.random_range(-1.0..w as f64 + 1.0), rng.random_range(-1.0..h as f64 + 1.0)],
                [rng.random_range(-0.7f64..1.3), rng.random_range(-0.7f64..1.3)],
                rng.random_range(-3.0..3.0),
                rng.random_range(0.05..0.95),
                [rng.random_range(0.05..0.95), rng.random_range(0.05..0.95), rng.random_range(0.05..0.95)],
            )
        })
        .collect();
    let dx = rng.random_range(-0.5..0.5);
    let dy = rng.random_range(-0.5..0.5);
    Case {
        scene: Scene::with_primitives(Mode::TwoD, prims),
        camera: Camera::identity2d(w, h).with_offset(dx, dy),
    }
}

/// 3D scene of `1..=max_prims` primitives in the unit ball, seen by a
/// pinhole camera at distance 4.
pub fn random_3d(rng: &mut ChaCha8Rng, max_prims: usize, w: usize, h: usize) -> Case {
    let n = rng.random_range(1..=max_prims);
    let prims = (0..n)
        .map(|_| {
            GaussianPrimitive::new_3d(
                [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
                [0, 1, 2].map(|_| rng.random_range(-2.5f64..-0.9)),
                [0, 1, 2, 3].map(|_| rng.random_range(-1.0..1.0)),
                rng.random_range(0.05..0.95),
                [0, 1, 2].map(|_| rng.random_range(0.05..0.95)),
            )
        })
        .collect();
    let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let eye = Vector3::new(4.0 * phi.cos(), rng.random_range(-1.0..1.0), 4.0 * phi.sin());
    let camera = Camera::look_at(w, h, w as f64 * 1.2, eye, Vector3::zeros(), Vector3::new(0.0, -1.0, 0.0));
    Case {
        scene: Scene::with_primitives(Mode::ThreeD, prims),
        camera,
    }
}

pub fn random_case(seed: u64, mode: Mode, max_prims: usize, w: usize, h: usize) -> Case {
    let mut r = rng(seed);
    match mode {
        Mode::TwoD => random_2d(&mut r, max_prims, w, h),
        Mode::ThreeD => random_3d(&mut r, max_prims, w, h),
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Mean, covariance and depth of a primitive on the image plane.
fn oracle_projection(p: &GaussianPrimitive, mode: Mode, cam: &Camera, dilation: f64) -> Option<(Vector2<f64>, Matrix2<f64>, f64)> {
    let (mean, cov, depth) = match (mode, cam.model) {
        (Mode::TwoD, CameraModel::Identity2d) => {
            let (s, c) = p.rotation[0].sin_cos();
            let r = Matrix2::new(c, -s, s, c);
            let d = Matrix2::from_diagonal(&Vector2::new((2.0 * p.log_scale[0]).exp(), (2.0 * p.log_scale[1]).exp()));
            let mean = Vector2::new(p.position[0] + cam.translation[0], p.position[1] + cam.translation[1]);
            (mean, r * d * r.transpose(), 0.0)
        }
        (Mode::ThreeD, CameraModel::Pinhole3d) => {
            let q = p.rotation;
            let r = UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3])).to_rotation_matrix().into_inner();
            let s = Matrix3::from_diagonal(&Vector3::from(p.log_scale.map(f64::exp)));
            let sigma = r * s * s * r.transpose();
            let w = Matrix3::from_fn(|i, j| cam.rotation[i][j]);
            let pc = w * Vector3::from(p.position) + Vector3::from(cam.translation);
            if pc.z <= 0.01 {
                return None;
            }
            let j = Matrix2x3::new(
                cam.fx / pc.z,
                0.0,
                -cam.fx * pc.x / (pc.z * pc.z),
                0.0,
                cam.fy / pc.z,
                -cam.fy * pc.y / (pc.z * pc.z),
            );
            let t = j * w;
            let mean = Vector2::new(cam.fx * pc.x / pc.z + cam.cx, cam.fy * pc.y / pc.z + cam.cy);
            (mean, t * sigma * t.transpose(), pc.z)
        }
        _ => panic!("mode mismatch"),
    };
    Some((mean, cov + Matrix2::identity() * dilation, depth))
}

pub struct OracleOutput {
    pub image: Image,
    pub transmittance: Image,
    /// Front-to-back `(primitive, ω)` per pixel, row-major.
    pub weights: Vec<Vec<(usize, f64)>>,
}

/// Brute force: every primitive evaluated at every pixel, front to back,
/// with the rasterizer's cutoff and termination rules.
pub fn oracle_render(scene: &Scene, cam: &Camera, settings: &RenderSettings, decode: impl Fn(&GaussianPrimitive) -> [f64; 3], channels: usize) -> OracleOutput {
    let mut items: Vec<(usize, Vector2<f64>, Matrix2<f64>, f64)> = scene
        .primitives
        .iter()
        .enumerate()
        .filter_map(|(i, p)| oracle_projection(p, scene.mode, cam, settings.dilation).map(|(m, c, d)| (i, m, c, d)))
        .collect();
    items.sort_by(|a, b| a.3.partial_cmp(&b.3).unwrap().then(a.0.cmp(&b.0)));
    let inv: Vec<Matrix2<f64>> = items.iter().map(|it| it.2.try_inverse().unwrap()).collect();
    let mut image = Image::new(cam.width, cam.height, channels);
    let mut trans = Image::filled(cam.width, cam.height, 1, 1.0);
    let mut weights = Vec::with_capacity(cam.width * cam.height);
    for y in 0..cam.height {
        for x in 0..cam.width {
            let u = Vector2::new(x as f64 + 0.5, y as f64 + 0.5);
            let mut t = 1.0;
            let mut w = Vec::new();
            for (k, (idx, mean, _, _)) in items.iter().enumerate() {
                let p = &scene.primitives[*idx];
                let d = u - mean;
                let g = (-0.5 * (d.transpose() * inv[k] * d)[(0, 0)]).exp();
                let a = sigmoid(p.opacity_logit) * g;
                if a < settings.alpha_cutoff || a == 0.0 {
                    continue;
                }
                let v = decode(p);
                for c in 0..channels {
                    let cur = image.get(x, y, c);
                    image.set(x, y, c, cur + v[c] * a * t);
                }
                w.push((*idx, a * t));
                t *= 1.0 - a;
                if t < settings.early_stop {
                    break;
                }
            }
            trans.set(x, y, 0, t);
            weights.push(w);
        }
    }
    OracleOutput {
        image,
        transmittance: trans,
        weights,
    }
}

pub fn rgb(p: &GaussianPrimitive) -> [f64; 3] {
    p.feature.map(sigmoid)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Relative error with an absolute floor for gradients that vanish.
pub fn rel_err(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}
