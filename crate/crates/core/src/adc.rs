//! Adaptive density control.
//!
//! Between runs, [`AdcStats`] collects per-primitive statistics from every
//! rendered view. A run then scores primitives, selects growth candidates,
//! clones or splits them, prunes transparent primitives and applies the
//! policy's opacity post-step, in that order.
//!
//! The baseline policy scores by the view-averaged screen-space positional
//! gradient norm; the revised policy by the maximum over views of the pixel
//! error redistributed onto each primitive. Opacity correction, growth
//! control and opacity regularization are independent toggles so every
//! ablation arm can be expressed.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::AdcError;
use crate::losses::GuidingError;
use crate::primitive::{logit, GaussianPrimitive, Mode, Scene};
use crate::raster::GradientBuffer;

/// Offspring of a split have their standard deviations divided by this.
pub const SPLIT_SCALE_DIVISOR: f64 = 1.6;
/// Lowest opacity the decay step leaves behind.
pub const OPACITY_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    #[default]
    Baseline,
    Revised,
}

/// Which positional gradient the baseline score averages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradSpace {
    /// Gradient wrt the projected mean in normalized device coordinates.
    #[default]
    Screen,
    /// Gradient wrt the primitive's position parameter.
    World,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdcConfig {
    pub policy: Policy,
    /// `None` follows the policy: on for revised, off for baseline.
    pub opacity_correction: Option<bool>,
    pub growth_control: Option<bool>,
    pub opacity_regularization: Option<bool>,
    /// Growth threshold on the view-averaged gradient norm (baseline).
    pub gradient_threshold: f64,
    /// Growth threshold on the per-primitive error (revised).
    pub error_threshold: f64,
    pub grad_space: GradSpace,
    pub guiding_error: GuidingError,
    /// Primitives whose largest standard deviation exceeds this fraction of
    /// the scene extent are split; smaller ones are cloned.
    pub split_size_fraction: f64,
    pub prune_opacity: f64,
    pub reset_opacity: f64,
    /// Iterations between baseline opacity resets; zero disables them.
    pub reset_interval: usize,
    /// `None` leaves the primitive count unbounded.
    pub max_primitives: Option<usize>,
    pub grow_fraction: f64,
    pub opacity_decay: f64,
    pub transmittance_weight: f64,
    pub densify_interval: usize,
    pub densify_start: usize,
    /// `None` means 90% of the training iterations.
    pub densify_end: Option<usize>,
}

impl Default for AdcConfig {
    fn default() -> Self {
        Self {
            policy: Policy::Baseline,
            opacity_correction: None,
            growth_control: None,
            opacity_regularization: None,
            gradient_threshold: 2e-4,
            error_threshold: 0.1,
            grad_space: GradSpace::Screen,
            guiding_error: GuidingError::Ssim,
            split_size_fraction: 0.01,
            prune_opacity: 0.005,
            reset_opacity: 0.01,
            reset_interval: 3000,
            max_primitives: None,
            grow_fraction: 0.05,
            opacity_decay: 0.001,
            transmittance_weight: 0.1,
            densify_interval: 100,
            densify_start: 100,
            densify_end: None,
        }
    }
}

impl AdcConfig {
    pub fn baseline() -> Self {
        Self::default()
    }

    pub fn revised() -> Self {
        Self {
            policy: Policy::Revised,
            ..Self::default()
        }
    }

    fn policy_default(&self) -> bool {
        self.policy == Policy::Revised
    }

    pub fn opacity_correction(&self) -> bool {
        self.opacity_correction.unwrap_or(self.policy_default())
    }

    pub fn growth_control(&self) -> bool {
        self.growth_control.unwrap_or(self.policy_default())
    }

    pub fn opacity_regularization(&self) -> bool {
        self.opacity_regularization.unwrap_or(self.policy_default())
    }

    pub fn threshold(&self) -> f64 {
        match self.policy {
            Policy::Baseline => self.gradient_threshold,
            Policy::Revised => self.error_threshold,
        }
    }

    pub fn densify_end_for(&self, total_iterations: usize) -> usize {
        self.densify_end.unwrap_or(total_iterations * 9 / 10)
    }

    /// Copy with every policy-dependent default written out.
    pub fn resolved(&self, total_iterations: usize) -> Self {
        Self {
            opacity_correction: Some(self.opacity_correction()),
            growth_control: Some(self.growth_control()),
            opacity_regularization: Some(self.opacity_regularization()),
            densify_end: Some(self.densify_end_for(total_iterations)),
            ..self.clone()
        }
    }

    /// Whether a run is due after `iteration` completed steps.
    pub fn is_scheduled(&self, iteration: usize, total_iterations: usize) -> bool {
        self.densify_interval > 0
            && iteration >= self.densify_start
            && iteration <= self.densify_end_for(total_iterations)
            && iteration.is_multiple_of(self.densify_interval)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.grow_fraction > 0.0 && self.grow_fraction <= 1.0) {
            return Err(format!("grow_fraction must lie in (0, 1], got {}", self.grow_fraction));
        }
        if !(0.0..1.0).contains(&self.prune_opacity) || !(0.0..1.0).contains(&self.reset_opacity) {
            return Err("prune_opacity and reset_opacity must lie in [0, 1)".into());
        }
        if !(self.opacity_decay >= 0.0 && self.transmittance_weight >= 0.0) || !self.opacity_decay.is_finite() || !self.transmittance_weight.is_finite() {
            return Err("opacity_decay and transmittance_weight must be finite and non-negative".into());
        }
        let thresholds = [self.gradient_threshold, self.error_threshold, self.split_size_fraction];
        if !thresholds.iter().all(|v| v.is_finite()) {
            return Err("thresholds must be finite".into());
        }
        Ok(())
    }
}

/// Per-primitive statistics gathered between two runs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AdcStats {
    pub grad_accum: Vec<f64>,
    pub grad_count: Vec<u32>,
    pub err_max: Vec<f64>,
}

impl AdcStats {
    pub fn new(n: usize) -> Self {
        Self {
            grad_accum: vec![0.0; n],
            grad_count: vec![0; n],
            err_max: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.grad_accum.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grad_accum.is_empty()
    }

    /// `τ_k`, the view-averaged gradient norm; zero for never-seen primitives.
    pub fn tau(&self, k: usize) -> f64 {
        match self.grad_count[k] {
            0 => 0.0,
            n => self.grad_accum[k] / n as f64,
        }
    }

    /// Folds one rendered view into the statistics. `errors` holds the
    /// per-primitive error of this view.
    pub fn accumulate_view(&mut self, grads: &GradientBuffer, errors: &[f64], space: GradSpace) -> Result<(), AdcError> {
        let n = self.len();
        for (what, len) in [("gradient buffer", grads.len()), ("error array", errors.len())] {
            if len != n {
                return Err(AdcError::LengthMismatch {
                    what,
                    expected: n,
                    actual: len,
                });
            }
        }
        for k in 0..n {
            if grads.visible[k] {
                let norm = match space {
                    GradSpace::Screen => {
                        let [x, y] = grads.mean2d_ndc[k];
                        x.hypot(y)
                    }
                    GradSpace::World => grads.params[k].position.iter().map(|v| v * v).sum::<f64>().sqrt(),
                };
                self.grad_accum[k] += norm;
                self.grad_count[k] += 1;
            }
            self.err_max[k] = self.err_max[k].max(errors[k]);
        }
        Ok(())
    }

    /// Keeps the entries listed in `kept`, in that order.
    pub fn retain(&mut self, kept: &[usize]) {
        self.grad_accum = kept.iter().map(|&k| self.grad_accum[k]).collect();
        self.grad_count = kept.iter().map(|&k| self.grad_count[k]).collect();
        self.err_max = kept.iter().map(|&k| self.err_max[k]).collect();
    }
}

pub fn densification_score(stats: &AdcStats, config: &AdcConfig) -> Vec<f64> {
    match config.policy {
        Policy::Baseline => (0..stats.len()).map(|k| stats.tau(k)).collect(),
        Policy::Revised => stats.err_max.clone(),
    }
}

/// Maximum number of primitives one run may add.
pub fn growth_cap(config: &AdcConfig, current_count: usize) -> usize {
    let room = config.max_primitives.map_or(usize::MAX, |m| m.saturating_sub(current_count));
    if config.growth_control() {
        room.min((config.grow_fraction * current_count as f64).floor() as usize)
    } else {
        room
    }
}

/// Ids of primitives to grow, highest score first (ties: lower id first).
pub fn select_candidates(scores: &[f64], config: &AdcConfig, current_count: usize) -> Vec<usize> {
    let threshold = config.threshold();
    let mut ids: Vec<usize> = (0..scores.len()).filter(|&k| scores[k] > threshold).collect();
    ids.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    ids.truncate(growth_cap(config, current_count));
    ids
}

/// Opacity for each of two identical copies so that together they occlude
/// what one copy of opacity `alpha` did: `(1 − α) = (1 − α̂)²`.
pub fn corrected_opacity(alpha: f64) -> f64 {
    let a = alpha.clamp(0.0, 1.0 - 1e-6);
    // α / (1 + √(1 − α)) is 1 − √(1 − α) without the cancellation near 0
    a / (1.0 + (1.0 - a).sqrt())
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GrowOutcome {
    pub clones: usize,
    pub splits: usize,
    /// For every primitive of the grown scene, the pre-grow index it carries
    /// optimizer state from; `None` for newly created primitives.
    pub origin: Vec<Option<usize>>,
}

/// Clones or splits every selected primitive. Split parents are replaced by
/// two offspring; clone copies and offspring are appended in ascending order
/// of their source id.
pub fn grow<R: Rng>(scene: &mut Scene, selected: &[usize], config: &AdcConfig, scene_extent: f64, rng: &mut R) -> GrowOutcome {
    let mode = scene.mode;
    let n = scene.len();
    let split_threshold = config.split_size_fraction * scene_extent;
    let mut ids = selected.to_vec();
    ids.sort_unstable();
    ids.dedup();

    let mut is_split = vec![false; n];
    let mut is_clone = vec![false; n];
    for &k in &ids {
        if scene.primitives[k].max_std(mode) > split_threshold {
            is_split[k] = true;
        } else {
            is_clone[k] = true;
        }
    }

    let oc = config.opacity_correction();
    let mut out = GrowOutcome::default();
    let mut next = Vec::with_capacity(n + ids.len());
    for (k, p) in scene.primitives.iter().enumerate() {
        if is_split[k] {
            continue;
        }
        let mut p = *p;
        if is_clone[k] && oc {
            p.set_opacity(corrected_opacity(p.opacity()));
        }
        next.push(p);
        out.origin.push(Some(k));
    }
    for &k in &ids {
        let parent = scene.primitives[k];
        if is_clone[k] {
            let mut c = parent;
            if oc {
                c.set_opacity(corrected_opacity(c.opacity()));
            }
            next.push(c);
            out.origin.push(None);
            out.clones += 1;
        } else {
            for _ in 0..2 {
                next.push(split_offspring(&parent, mode, rng));
                out.origin.push(None);
            }
            out.splits += 1;
        }
    }
    scene.primitives = next;
    out
}

fn split_offspring<R: Rng>(parent: &GaussianPrimitive, mode: Mode, rng: &mut R) -> GaussianPrimitive {
    let mut child = *parent;
    match mode {
        Mode::TwoD => {
            let z: [f64; 2] = [rng.sample(StandardNormal), rng.sample(StandardNormal)];
            let (s, c) = parent.rotation[0].sin_cos();
            let l0 = z[0] * parent.log_scale[0].exp();
            let l1 = z[1] * parent.log_scale[1].exp();
            child.position[0] += c * l0 - s * l1;
            child.position[1] += s * l0 + c * l1;
        }
        Mode::ThreeD => {
            let r = crate::primitive::quat_to_rotation(crate::primitive::normalize_quat(parent.rotation));
            let mut local = nalgebra::Vector3::zeros();
            for i in 0..3 {
                let z: f64 = rng.sample(StandardNormal);
                local[i] = z * parent.log_scale[i].exp();
            }
            let off = r * local;
            for i in 0..3 {
                child.position[i] += off[i];
            }
        }
    }
    for s in child.log_scale[..mode.dims()].iter_mut() {
        *s -= SPLIT_SCALE_DIVISOR.ln();
    }
    child
}

/// Removes primitives with opacity strictly below `prune_opacity` and
/// returns the kept ids.
pub fn prune(scene: &mut Scene, config: &AdcConfig) -> Vec<usize> {
    let kept: Vec<usize> = (0..scene.len())
        .filter(|&k| scene.primitives[k].opacity() >= config.prune_opacity)
        .collect();
    scene.primitives = kept.iter().map(|&k| scene.primitives[k]).collect();
    kept
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpacityStep {
    None,
    Decay,
    Reset,
}

/// Opacity decay (revised) or scheduled hard reset (baseline).
pub fn opacity_post_step(scene: &mut Scene, config: &AdcConfig, iteration: usize) -> OpacityStep {
    if config.opacity_regularization() {
        for p in &mut scene.primitives {
            let a = (p.opacity() - config.opacity_decay).max(OPACITY_FLOOR);
            p.opacity_logit = logit(a);
        }
        OpacityStep::Decay
    } else if config.reset_interval > 0 && iteration > 0 && iteration.is_multiple_of(config.reset_interval) {
        let cap = logit(config.reset_opacity);
        for p in &mut scene.primitives {
            p.opacity_logit = p.opacity_logit.min(cap);
        }
        OpacityStep::Reset
    } else {
        OpacityStep::None
    }
}

const HISTOGRAM_BINS: usize = 10;

/// Summary of one controller run, emitted to the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdcEvent {
    pub iteration: usize,
    pub count_before: usize,
    pub candidates: usize,
    pub clones: usize,
    pub splits: usize,
    pub pruned: usize,
    pub count_after: usize,
    pub opacity_step: OpacityStep,
    /// Upper edge of the last histogram bin; bins split `[0, max]` evenly.
    pub score_max: f64,
    pub score_histogram: Vec<usize>,
}

impl AdcEvent {
    pub fn added(&self) -> usize {
        self.clones + self.splits
    }
}

pub struct AdcRun {
    pub event: AdcEvent,
    /// Pre-run index for every surviving primitive; `None` for new ones.
    pub origin: Vec<Option<usize>>,
}

fn histogram(scores: &[f64]) -> (f64, Vec<usize>) {
    let max = scores.iter().copied().fold(0.0, f64::max);
    let mut bins = vec![0; HISTOGRAM_BINS];
    for &s in scores {
        let b = if max > 0.0 {
            ((s / max) * HISTOGRAM_BINS as f64).floor() as usize
        } else {
            0
        };
        bins[b.min(HISTOGRAM_BINS - 1)] += 1;
    }
    (max, bins)
}

/// One controller run: score, select, grow, prune, opacity post-step, then
/// reset the statistics for the new primitive set.
pub fn run_adc<R: Rng>(scene: &mut Scene, stats: &mut AdcStats, config: &AdcConfig, iteration: usize, scene_extent: f64, rng: &mut R) -> AdcRun {
    let count_before = scene.len();
    let scores = densification_score(stats, config);
    let threshold = config.threshold();
    let candidates = scores.iter().filter(|&&s| s > threshold).count();
    let selected = select_candidates(&scores, config, count_before);
    let grown = grow(scene, &selected, config, scene_extent, rng);
    let kept = prune(scene, config);
    let opacity_step = opacity_post_step(scene, config, iteration);
    *stats = AdcStats::new(scene.len());

    let (score_max, score_histogram) = histogram(&scores);
    AdcRun {
        event: AdcEvent {
            iteration,
            count_before,
            candidates,
            clones: grown.clones,
            splits: grown.splits,
            pruned: grown.origin.len() - kept.len(),
            count_after: scene.len(),
            opacity_step,
            score_max,
            score_histogram,
        },
        origin: kept.iter().map(|&k| grown.origin[k]).collect(),
    }
}
