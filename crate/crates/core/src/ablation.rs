//! The eight-arm ablation grid under an equal primitive budget.

use serde::{Deserialize, Serialize};

use crate::adc::{AdcConfig, Policy};
use crate::dataset::Dataset;
use crate::error::TrainError;
use crate::primitive::Scene;
use crate::trainer::{train, EvalMetrics, TrainConfig, TrainReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arm {
    Baseline,
    BaselineOc,
    BaselineGc,
    BaselineOr,
    Revised,
    RevisedNoOc,
    RevisedNoGc,
    RevisedNoOr,
}

impl Arm {
    pub const ALL: [Arm; 8] = [
        Arm::Baseline,
        Arm::BaselineOc,
        Arm::BaselineGc,
        Arm::BaselineOr,
        Arm::Revised,
        Arm::RevisedNoOc,
        Arm::RevisedNoGc,
        Arm::RevisedNoOr,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Arm::Baseline => "baseline",
            Arm::BaselineOc => "baseline+oc",
            Arm::BaselineGc => "baseline+gc",
            Arm::BaselineOr => "baseline+or",
            Arm::Revised => "revised",
            Arm::RevisedNoOc => "revised-oc",
            Arm::RevisedNoGc => "revised-gc",
            Arm::RevisedNoOr => "revised-or",
        }
    }

    /// Applies this arm's policy and toggles on top of `base`, keeping all
    /// other settings. Toggles not named by the arm follow its policy.
    pub fn configure(self, base: &AdcConfig) -> AdcConfig {
        let (policy, oc, gc, or) = match self {
            Arm::Baseline => (Policy::Baseline, false, false, false),
            Arm::BaselineOc => (Policy::Baseline, true, false, false),
            Arm::BaselineGc => (Policy::Baseline, false, true, false),
            Arm::BaselineOr => (Policy::Baseline, false, false, true),
            Arm::Revised => (Policy::Revised, true, true, true),
            Arm::RevisedNoOc => (Policy::Revised, false, true, true),
            Arm::RevisedNoGc => (Policy::Revised, true, false, true),
            Arm::RevisedNoOr => (Policy::Revised, true, true, false),
        };
        AdcConfig {
            policy,
            opacity_correction: Some(oc),
            growth_control: Some(gc),
            opacity_regularization: Some(or),
            ..base.clone()
        }
    }
}

impl std::fmt::Display for Arm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmResult {
    pub arm: Arm,
    pub seed: u64,
    pub budget: Option<usize>,
    pub scene: Scene,
    pub report: TrainReport,
}

impl ArmResult {
    pub fn metrics(&self) -> &EvalMetrics {
        self.report.final_eval().expect("training always ends with an evaluation")
    }
}

/// Failure of one arm, with every arm finished before it.
#[derive(Debug)]
pub struct GridError {
    pub arm: Arm,
    pub seed: u64,
    pub error: TrainError,
    pub completed: Vec<ArmResult>,
}

/// Config of `arm` for one seed; `budget` overrides the primitive limit.
pub fn arm_config(base: &TrainConfig, arm: Arm, seed: u64, budget: Option<usize>) -> TrainConfig {
    let mut adc = arm.configure(&base.adc);
    if budget.is_some() {
        adc.max_primitives = budget;
    }
    TrainConfig {
        seed,
        adc,
        ..base.clone()
    }
}

/// Runs `arms` for every seed. The baseline arm runs first for each seed
/// and its final primitive count becomes the budget of every other arm of
/// that seed. `on_result` sees each arm as soon as it finishes.
pub fn run_grid(
    dataset: &Dataset,
    init: &dyn Fn(u64) -> Scene,
    base: &TrainConfig,
    seeds: &[u64],
    arms: &[Arm],
    mut on_result: impl FnMut(&ArmResult),
) -> Result<Vec<ArmResult>, Box<GridError>> {
    let mut done: Vec<ArmResult> = Vec::new();
    for &seed in seeds {
        let mut order = vec![Arm::Baseline];
        order.extend(arms.iter().copied().filter(|a| *a != Arm::Baseline));
        let mut budget = None;
        for arm in order {
            let cfg = arm_config(base, arm, seed, budget);
            match train(init(seed), dataset, &cfg) {
                Ok((scene, report)) => {
                    let result = ArmResult {
                        arm,
                        seed,
                        budget: cfg.adc.max_primitives,
                        scene,
                        report,
                    };
                    if arm == Arm::Baseline {
                        budget = Some(result.scene.len());
                    }
                    on_result(&result);
                    if arm != Arm::Baseline || arms.contains(&Arm::Baseline) {
                        done.push(result);
                    }
                }
                Err(error) => {
                    return Err(Box::new(GridError {
                        arm,
                        seed,
                        error,
                        completed: done,
                    }))
                }
            }
        }
    }
    Ok(done)
}

/// Per-arm means over seeds, in the order arms first appear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub arm: Arm,
    pub seeds: usize,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
    pub mean_count: f64,
}

pub fn summarize(results: &[ArmResult]) -> Vec<ArmSummary> {
    let mut arms: Vec<Arm> = Vec::new();
    for r in results {
        if !arms.contains(&r.arm) {
            arms.push(r.arm);
        }
    }
    arms.into_iter()
        .map(|arm| {
            let rs: Vec<&ArmResult> = results.iter().filter(|r| r.arm == arm).collect();
            let n = rs.len() as f64;
            ArmSummary {
                arm,
                seeds: rs.len(),
                mean_psnr: rs.iter().map(|r| r.metrics().mean_psnr).sum::<f64>() / n,
                mean_ssim: rs.iter().map(|r| r.metrics().mean_ssim).sum::<f64>() / n,
                mean_count: rs.iter().map(|r| r.scene.len() as f64).sum::<f64>() / n,
            }
        })
        .collect()
}
