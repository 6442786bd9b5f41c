//! Differentiable Gaussian splatting on the CPU with two adaptive density
//! control policies: the gradient-threshold original and an error-driven
//! revision with corrected clone opacity, budgeted growth and opacity decay.

pub mod camera;
pub mod dataset;
pub mod error;
pub mod image;
pub mod io;
pub mod losses;
pub mod optim;
pub mod trainer;
pub mod ablation;
pub mod adc;
pub mod primitive;
pub mod raster;
pub mod splat;

pub use camera::{Camera, CameraModel};
pub use error::{AdcError, IoError, LossError, RasterError, TrainError};
pub use image::Image;
pub use primitive::{GaussianPrimitive, Mode, ParamGroup, PrimitiveGrad, Scene};
pub use raster::{backward, render, render_error_scalar, Decoder, GradientBuffer, PixelGradients, RenderOutput};
pub use splat::{gaussian_eval, splat, RenderSettings, SplattedGaussian};
pub use losses::{GuidingError, LossBreakdown, PixelErrorMap};
pub use adc::{AdcConfig, AdcEvent, AdcStats, GradSpace, Policy};
pub use dataset::{Dataset, View};
pub use optim::{Adam, AdamHyper};
pub use trainer::{evaluate, train, train_with_log, EvalMetrics, LearningRates, TrainConfig, TrainReport, Trainer};
pub use ablation::{Arm, ArmResult, ArmSummary};
pub use io::{InitSpec, RunConfig, SceneSpec};
