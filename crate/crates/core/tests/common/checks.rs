//! Measured quantities shared by the integration tests and the acceptance
//! report. Each check returns its worst observed error.

use rand::Rng;
use splat_adc::losses::{aux_error_loss, per_primitive_error};
use splat_adc::{
    backward, render, render_error_scalar, Decoder, GuidingError, Image, Mode, ParamGroup, PixelErrorMap, PixelGradients, PrimitiveGrad,
    RenderSettings, Scene,
};

use super::{max_abs_diff, oracle_render, random_case, random_vec, rel_err, rgb, rng, Case};

pub struct OracleReport {
    pub scenes: usize,
    pub forward: f64,
    pub transmittance: f64,
    /// Worst `|R[Φ≡1] + T − 1|`.
    pub ones_identity: f64,
}

/// Forward render against the brute-force loop; half the scenes 2D, half 3D.
pub fn raster_oracle(scenes: usize, seed: u64) -> OracleReport {
    let settings = RenderSettings::default();
    let mut rep = OracleReport {
        scenes,
        forward: 0.0,
        transmittance: 0.0,
        ones_identity: 0.0,
    };
    for s in 0..scenes {
        let mode = if s % 2 == 0 { Mode::TwoD } else { Mode::ThreeD };
        let Case { scene, camera } = random_case(seed + s as u64, mode, 20, 16, 16);
        let out = render(&scene, &camera, Decoder::Rgb, &settings).unwrap();
        let want = oracle_render(&scene, &camera, &settings, rgb, 3);
        rep.forward = rep.forward.max(max_abs_diff(&out.image.data, &want.image.data));
        rep.transmittance = rep
            .transmittance
            .max(max_abs_diff(&out.residual_transmittance.data, &want.transmittance.data));

        let ones = render(&scene, &camera, Decoder::Ones, &settings).unwrap();
        for (o, t) in ones.image.data.iter().zip(&ones.residual_transmittance.data) {
            rep.ones_identity = rep.ones_identity.max((o + t - 1.0).abs());
        }
    }
    rep
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Probe {
    gi: Vec<f64>,
    gt: Vec<f64>,
    ge: Vec<f64>,
}

impl Probe {
    fn loss(&self, scene: &Scene, case: &Case, settings: &RenderSettings) -> f64 {
        let out = render(scene, &case.camera, Decoder::Rgb, settings).unwrap();
        let err = render_error_scalar(scene, &case.camera, settings).unwrap();
        dot(&self.gi, &out.image.data) + dot(&self.gt, &out.residual_transmittance.data) + dot(&self.ge, &err.image.data)
    }
}

fn entries(mode: Mode) -> Vec<(Option<ParamGroup>, usize)> {
    let mut v: Vec<(Option<ParamGroup>, usize)> = ParamGroup::ALL
        .iter()
        .flat_map(|&g| (0..g.width(mode)).map(move |i| (Some(g), i)))
        .collect();
    v.push((None, 0));
    v
}

fn analytic(g: &PrimitiveGrad, entry: (Option<ParamGroup>, usize), mode: Mode) -> f64 {
    match entry {
        (Some(group), i) => g.group(group, mode)[i],
        (None, _) => g.err_scalar,
    }
}

fn nudge(scene: &mut Scene, k: usize, entry: (Option<ParamGroup>, usize), delta: f64) {
    let mode = scene.mode;
    let p = &mut scene.primitives[k];
    match entry {
        (Some(group), i) => p.group_mut(group, mode)[i] += delta,
        (None, _) => p.err_scalar += delta,
    }
}

pub struct AdjointReport {
    pub scenes: usize,
    pub checked: usize,
    pub worst_rel: f64,
}

/// Absolute floor below which gradients are compared absolutely.
pub const FD_FLOOR: f64 = 1e-6;
pub const FD_STEP: f64 = 1e-4;

/// Central differences of a random linear functional of the RGB image,
/// the transmittance and the error-scalar render, against one fused
/// backward pass. Every parameter of every primitive is probed.
pub fn adjoint_check(scenes: usize, seed: u64) -> AdjointReport {
    let settings = RenderSettings::exact();
    let mut rep = AdjointReport {
        scenes,
        checked: 0,
        worst_rel: 0.0,
    };
    for s in 0..scenes {
        let mode = if s % 2 == 0 { Mode::TwoD } else { Mode::ThreeD };
        let mut case = random_case(seed + s as u64, mode, 8, 12, 12);
        let mut r = rng(seed ^ (s as u64 + 1) << 20);
        for p in &mut case.scene.primitives {
            p.err_scalar = r.random_range(-1.0..1.0);
        }
        let px = 12 * 12;
        let probe = Probe {
            gi: random_vec(&mut r, px * 3),
            gt: random_vec(&mut r, px),
            ge: random_vec(&mut r, px),
        };
        let out = render(&case.scene, &case.camera, Decoder::Rgb, &settings).unwrap();
        let grads = backward(
            &case.scene,
            &case.camera,
            &out,
            &PixelGradients {
                image: Some(&probe.gi),
                transmittance: Some(&probe.gt),
                error: Some(&probe.ge),
            },
        )
        .unwrap();
        for k in 0..case.scene.len() {
            for entry in entries(mode) {
                let mut plus = case.scene.clone();
                nudge(&mut plus, k, entry, FD_STEP);
                let mut minus = case.scene.clone();
                nudge(&mut minus, k, entry, -FD_STEP);
                let numeric = (probe.loss(&plus, &case, &settings) - probe.loss(&minus, &case, &settings)) / (2.0 * FD_STEP);
                let a = analytic(&grads.params[k], entry, mode);
                let e = rel_err(a, numeric, FD_FLOOR);
                rep.checked += 1;
                rep.worst_rel = rep.worst_rel.max(e);
            }
        }
    }
    rep
}

pub struct AuxReport {
    pub scenes: usize,
    /// Worst relative gap between the `e_k` gradient and the oracle's
    /// weight-accumulated error.
    pub worst_rel: f64,
    /// Same against the cache-based accumulation.
    pub worst_rel_cache: f64,
    /// Nonzero entries among the non-`e_k` gradients.
    pub nonzero_other: usize,
}

/// Relative floor for primitives receiving almost no error.
pub const AUX_FLOOR: f64 = 1e-12;

pub fn aux_identity(scenes: usize, seed: u64) -> AuxReport {
    let settings = RenderSettings::default();
    let mut rep = AuxReport {
        scenes,
        worst_rel: 0.0,
        worst_rel_cache: 0.0,
        nonzero_other: 0,
    };
    for s in 0..scenes {
        let mode = if s % 2 == 0 { Mode::TwoD } else { Mode::ThreeD };
        let case = random_case(seed + s as u64, mode, 20, 16, 16);
        let mut r = rng(seed ^ 0xa0e ^ s as u64);
        let values: Vec<f64> = (0..16 * 16).map(|_| r.random_range(0.0..1.0)).collect();
        let map = PixelErrorMap {
            kind: GuidingError::Ssim,
            values: Image {
                width: 16,
                height: 16,
                channels: 1,
                data: values.clone(),
            },
        };
        let aux = aux_error_loss(&map, &case.scene, &case.camera, &settings).unwrap();
        let oracle = oracle_render(&case.scene, &case.camera, &settings, rgb, 3);
        let mut want = vec![0.0; case.scene.len()];
        for (u, ws) in oracle.weights.iter().enumerate() {
            for &(k, w) in ws {
                want[k] += values[u] * w;
            }
        }
        let out = render(&case.scene, &case.camera, Decoder::ErrScalar, &settings).unwrap();
        let cache = per_primitive_error(&map, &out);
        for (k, g) in aux.gradients.params.iter().enumerate() {
            rep.worst_rel = rep.worst_rel.max(rel_err(g.err_scalar, want[k], AUX_FLOOR));
            rep.worst_rel_cache = rep.worst_rel_cache.max(rel_err(g.err_scalar, cache[k], AUX_FLOOR));
            let others = ParamGroup::ALL.iter().flat_map(|&grp| g.group(grp, mode).to_vec());
            rep.nonzero_other += others.filter(|v| *v != 0.0).count();
        }
    }
    rep
}
