//! The optimization loop.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adc::{run_adc, AdcConfig, AdcEvent, AdcStats};
use crate::dataset::{Dataset, View};
use crate::error::TrainError;
use crate::image::Image;
use crate::losses::{self, GuidingError, LossBreakdown};
use crate::optim::{Adam, AdamHyper};
use crate::primitive::{GaussianPrimitive, ParamGroup, Scene};
use crate::raster::{backward, render, Decoder, PixelGradients};
use crate::splat::RenderSettings;

/// PSNR reported for a perfect reconstruction, and the ceiling otherwise.
pub const PSNR_CAP: f64 = 99.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningRates {
    pub position: f64,
    pub position_final: f64,
    /// Steps over which the position rate decays; `None` uses the run length.
    pub position_decay_steps: Option<usize>,
    pub log_scale: f64,
    pub rotation: f64,
    pub opacity: f64,
    pub feature: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        Self {
            position: 1.6e-4,
            position_final: 1.6e-6,
            position_decay_steps: None,
            log_scale: 5e-3,
            rotation: 1e-3,
            opacity: 5e-2,
            feature: 2.5e-3,
        }
    }
}

impl LearningRates {
    /// Rate of `group` at 1-based `step`. Position rates are log-linearly
    /// interpolated and multiplied by the scene extent.
    pub fn at(&self, group: ParamGroup, step: usize, total: usize, extent: f64) -> f64 {
        match group {
            ParamGroup::Position => {
                let horizon = self.position_decay_steps.unwrap_or(total).max(1);
                let r = (step as f64 / horizon as f64).clamp(0.0, 1.0);
                let lr = (self.position.ln() * (1.0 - r) + self.position_final.ln() * r).exp();
                lr * extent
            }
            ParamGroup::LogScale => self.log_scale,
            ParamGroup::Rotation => self.rotation,
            ParamGroup::Opacity => self.opacity,
            ParamGroup::Feature => self.feature,
        }
    }

    fn all_positive(&self) -> bool {
        [self.position, self.position_final, self.log_scale, self.rotation, self.opacity, self.feature]
            .iter()
            .all(|&v| v > 0.0 && v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub total_iterations: usize,
    pub lr: LearningRates,
    pub adam: AdamHyper,
    /// SSIM share of the photometric loss.
    pub ssim_lambda: f64,
    /// Multiplier of the photometric term; zero leaves only the regularizers.
    pub photometric_weight: f64,
    pub adc: AdcConfig,
    pub seed: u64,
    /// Iterations between holdout evaluations; zero evaluates only at the end.
    pub eval_interval: usize,
    pub holdout_every: usize,
    /// Iterations between recorded loss values.
    pub loss_log_interval: usize,
    pub render: RenderSettings,
    /// Overrides the extent derived from the cameras.
    pub scene_extent: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            total_iterations: 3000,
            lr: LearningRates::default(),
            adam: AdamHyper::default(),
            ssim_lambda: 0.2,
            photometric_weight: 1.0,
            adc: AdcConfig::default(),
            seed: 0,
            eval_interval: 0,
            holdout_every: 8,
            loss_log_interval: 10,
            render: RenderSettings::default(),
            scene_extent: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.total_iterations == 0 {
            return Err("total_iterations must be positive".into());
        }
        if !self.lr.all_positive() {
            return Err("all learning rates must be positive".into());
        }
        if self.adc.densify_end_for(self.total_iterations) > self.total_iterations {
            return Err(format!(
                "densify_end {} exceeds total_iterations {}",
                self.adc.densify_end_for(self.total_iterations),
                self.total_iterations
            ));
        }
        if !(0.0..=1.0).contains(&self.ssim_lambda) {
            return Err(format!("ssim_lambda must lie in [0, 1], got {}", self.ssim_lambda));
        }
        if !(self.photometric_weight >= 0.0 && self.photometric_weight.is_finite()) {
            return Err("photometric_weight must be finite and non-negative".into());
        }
        self.adc.validate()
    }

    /// Copy with every policy default written out.
    pub fn resolved(&self) -> Self {
        Self {
            adc: self.adc.resolved(self.total_iterations),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewMetrics {
    pub view: usize,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub iteration: usize,
    pub primitive_count: usize,
    pub views: Vec<ViewMetrics>,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
}

pub fn psnr(mse: f64) -> f64 {
    if mse <= 0.0 {
        PSNR_CAP
    } else {
        (10.0 * (1.0 / mse).log10()).min(PSNR_CAP)
    }
}

pub fn mse(a: &Image, b: &Image) -> f64 {
    let n = a.data.len().max(1) as f64;
    a.data.iter().zip(&b.data).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n
}

/// PSNR and mean SSIM of `scene` on the views listed in `indices`.
pub fn evaluate(scene: &Scene, dataset: &Dataset, indices: &[usize], settings: &RenderSettings) -> Result<Vec<ViewMetrics>, TrainError> {
    indices
        .iter()
        .map(|&i| {
            let View { camera, target } = &dataset.views[i];
            let out = render(scene, camera, Decoder::Rgb, settings)?;
            let ssim = losses::ssim_map(&out.image, target)?.mean();
            Ok(ViewMetrics {
                view: i,
                psnr: psnr(mse(&out.image, target)),
                ssim,
            })
        })
        .collect()
}

fn summarize(iteration: usize, primitive_count: usize, views: Vec<ViewMetrics>) -> EvalMetrics {
    let n = views.len().max(1) as f64;
    EvalMetrics {
        iteration,
        primitive_count,
        mean_psnr: views.iter().map(|v| v.psnr).sum::<f64>() / n,
        mean_ssim: views.iter().map(|v| v.ssim).sum::<f64>() / n,
        views,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub iteration: usize,
    #[serde(flatten)]
    pub loss: LossBreakdown,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainReport {
    pub evals: Vec<EvalMetrics>,
    /// `(iteration, primitive count)`: the initial count, then one entry per
    /// controller run.
    pub counts: Vec<(usize, usize)>,
    pub losses: Vec<LossRecord>,
    pub adc_events: Vec<AdcEvent>,
}

impl TrainReport {
    pub fn final_eval(&self) -> Option<&EvalMetrics> {
        self.evals.last()
    }
}

/// One line of the structured training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LogRecord {
    Eval(EvalMetrics),
    Adc(AdcEvent),
}

/// Training state, advanced one step at a time.
pub struct Trainer<'a> {
    pub scene: Scene,
    pub optimizer: Adam,
    pub stats: AdcStats,
    pub report: TrainReport,
    dataset: &'a Dataset,
    config: TrainConfig,
    train_views: Vec<usize>,
    holdout_views: Vec<usize>,
    extent: f64,
    rng: ChaCha8Rng,
    iteration: usize,
    log: Box<dyn Write + 'a>,
}

impl<'a> Trainer<'a> {
    pub fn new(scene: Scene, dataset: &'a Dataset, config: &TrainConfig, log: Box<dyn Write + 'a>) -> Result<Self, TrainError> {
        config.validate().map_err(TrainError::Setup)?;
        if dataset.is_empty() {
            return Err(TrainError::Setup("dataset has no views".into()));
        }
        if scene.is_empty() {
            return Err(TrainError::Setup("initial scene has no primitives".into()));
        }
        if dataset.mode() != Some(scene.mode) {
            return Err(TrainError::Setup(format!(
                "scene is {} but the cameras are {}",
                scene.mode,
                dataset.mode().unwrap()
            )));
        }
        let (mut train_views, holdout_views) = dataset.split(config.holdout_every);
        if train_views.is_empty() {
            train_views = (0..dataset.len()).collect();
        }
        let n = scene.len();
        Ok(Self {
            optimizer: Adam::new(n, config.adam),
            stats: AdcStats::new(n),
            report: TrainReport {
                counts: vec![(0, n)],
                ..Default::default()
            },
            scene,
            dataset,
            config: config.clone(),
            train_views,
            holdout_views,
            extent: config.scene_extent.unwrap_or_else(|| dataset.scene_extent()),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            iteration: 0,
            log,
        })
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn scene_extent(&self) -> f64 {
        self.extent
    }

    pub fn holdout_views(&self) -> &[usize] {
        &self.holdout_views
    }

    /// Runs one optimization step and, when scheduled, the density controller.
    pub fn step(&mut self) -> Result<LossBreakdown, TrainError> {
        self.iteration += 1;
        let it = self.iteration;
        let cfg = &self.config;
        let view = &self.dataset.views[self.train_views[(it - 1) % self.train_views.len()]];

        let out = render(&self.scene, &view.camera, Decoder::Rgb, &cfg.render)?;
        let phot = losses::photometric_loss_with_grad(&out.image, &view.target, cfg.ssim_lambda)?;
        let guide = match cfg.adc.guiding_error {
            GuidingError::Ssim => losses::ssim_guiding_error(&phot.ssim),
            GuidingError::L1 => losses::guiding_error_map(&out.image, &view.target, GuidingError::L1)?,
        };

        let image_grad: Option<Vec<f64>> = (cfg.photometric_weight != 0.0)
            .then(|| phot.grad.iter().map(|g| g * cfg.photometric_weight).collect());
        let use_reg = cfg.adc.opacity_regularization() && cfg.adc.transmittance_weight != 0.0;
        let reg = if use_reg { losses::transmittance_reg(&out) } else { 0.0 };
        let reg_grad = use_reg.then(|| losses::transmittance_reg_grad(&out, cfg.adc.transmittance_weight));

        let grads = backward(
            &self.scene,
            &view.camera,
            &out,
            &PixelGradients {
                image: image_grad.as_deref(),
                transmittance: reg_grad.as_deref(),
                error: Some(&guide.values.data),
            },
        )?;
        let per_primitive: Vec<f64> = grads.params.iter().map(|g| g.err_scalar).collect();
        let aux: f64 = self
            .scene
            .primitives
            .iter()
            .zip(&per_primitive)
            .map(|(p, e)| p.err_scalar * e)
            .sum();

        let mut loss = phot.loss;
        loss.transmittance_reg = reg;
        loss.aux = aux;
        loss.total = cfg.photometric_weight * phot.loss.total + cfg.adc.transmittance_weight * reg + aux;
        if !loss.total.is_finite() {
            return Err(TrainError::NonFinite {
                iteration: it,
                loss: loss.total,
                snapshot: Box::new(self.scene.clone()),
            });
        }

        let (lr, total, extent) = (cfg.lr, cfg.total_iterations, self.extent);
        let before = self.scene.clone();
        self.optimizer
            .step(&mut self.scene, &grads.params, |g| lr.at(g, it, total, extent));
        if !self.scene.primitives.iter().all(GaussianPrimitive::is_finite) {
            return Err(TrainError::NonFinite {
                iteration: it,
                loss: loss.total,
                snapshot: Box::new(before),
            });
        }
        self.stats.accumulate_view(&grads, &per_primitive, cfg.adc.grad_space)?;

        if cfg.loss_log_interval > 0 && (it.is_multiple_of(cfg.loss_log_interval) || it == 1) {
            self.report.losses.push(LossRecord { iteration: it, loss });
        }

        if cfg.adc.is_scheduled(it, total) {
            let run = run_adc(&mut self.scene, &mut self.stats, &cfg.adc, it, extent, &mut self.rng);
            self.optimizer.remap(&run.origin);
            debug_assert_eq!(self.optimizer.len(), self.scene.len());
            self.report.counts.push((it, self.scene.len()));
            self.emit(&LogRecord::Adc(run.event.clone()));
            self.report.adc_events.push(run.event);
        }

        if self.config.eval_interval > 0 && it.is_multiple_of(self.config.eval_interval) && it < total {
            self.eval_now()?;
        }
        Ok(loss)
    }

    fn emit(&mut self, record: &LogRecord) {
        // logging is best effort; a failing sink must not abort training
        if let Ok(line) = serde_json::to_string(record) {
            let _ = writeln!(self.log, "{line}");
        }
    }

    fn eval_now(&mut self) -> Result<(), TrainError> {
        let views = evaluate(&self.scene, self.dataset, &self.holdout_views, &self.config.render)?;
        let metrics = summarize(self.iteration, self.scene.len(), views);
        self.emit(&LogRecord::Eval(metrics.clone()));
        self.report.evals.push(metrics);
        Ok(())
    }

    /// Runs the remaining steps, rounds the scene to snapshot precision and
    /// evaluates it on the holdout views.
    pub fn run(mut self) -> Result<(Scene, TrainReport), TrainError> {
        while self.iteration < self.config.total_iterations {
            self.step()?;
        }
        self.scene.round_to_storage_precision();
        self.eval_now()?;
        let _ = self.log.flush();
        Ok((self.scene, self.report))
    }
}

pub fn train(scene: Scene, dataset: &Dataset, config: &TrainConfig) -> Result<(Scene, TrainReport), TrainError> {
    train_with_log(scene, dataset, config, std::io::sink())
}

/// Like [`train`], writing one JSON record per line to `log`.
pub fn train_with_log<W: Write>(scene: Scene, dataset: &Dataset, config: &TrainConfig, log: W) -> Result<(Scene, TrainReport), TrainError> {
    Trainer::new(scene, dataset, config, Box::new(log))?.run()
}
