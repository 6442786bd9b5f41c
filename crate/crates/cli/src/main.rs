mod ablate;
mod eval;
mod fit;
mod output;
mod render;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use splat_adc::{GuidingError, Policy, RunConfig, TrainError};

#[derive(Parser)]
#[command(name = "splat-adc", version, about = "Gaussian splatting fits with baseline and revised density control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one scene from a TOML config or a previous run's manifest.json.
    Fit(fit::FitArgs),
    /// Run the eight-arm ablation grid under the baseline's primitive budget.
    Ablate(ablate::AblateArgs),
    /// Render a snapshot to an RGB image and a transmittance image.
    Render(render::RenderArgs),
    /// Print PSNR/SSIM of a snapshot per view and their mean.
    Eval(eval::EvalArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Baseline,
    Revised,
}

#[derive(Clone, Copy, ValueEnum)]
enum GuidingArg {
    Ssim,
    L1,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Toggle {
    Oc(bool),
    Gc(bool),
    Or(bool),
}

fn parse_toggle(s: &str) -> Result<Toggle, String> {
    let (name, value) = s.split_once('=').ok_or_else(|| format!("expected NAME=on|off, got `{s}`"))?;
    let on = match value {
        "on" => true,
        "off" => false,
        _ => return Err(format!("toggle value must be `on` or `off`, got `{value}`")),
    };
    match name {
        "oc" => Ok(Toggle::Oc(on)),
        "gc" => Ok(Toggle::Gc(on)),
        "or" => Ok(Toggle::Or(on)),
        _ => Err(format!("unknown toggle `{name}`, expected oc, gc or or")),
    }
}

/// Config overrides shared by `fit` and `ablate`.
#[derive(Args, Clone, Default)]
struct Overrides {
    #[arg(long, value_enum)]
    policy: Option<PolicyArg>,
    /// Density-control mechanism switch, repeatable: oc=on|off, gc=on|off, or=on|off.
    #[arg(long = "toggle", value_parser = parse_toggle)]
    toggles: Vec<Toggle>,
    #[arg(long)]
    max_primitives: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    guiding_error: Option<GuidingArg>,
    /// Overrides train.total_iterations.
    #[arg(long)]
    iterations: Option<usize>,
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig) {
        let t = &mut cfg.train;
        if let Some(p) = self.policy {
            t.adc.policy = match p {
                PolicyArg::Baseline => Policy::Baseline,
                PolicyArg::Revised => Policy::Revised,
            };
        }
        for toggle in &self.toggles {
            match *toggle {
                Toggle::Oc(on) => t.adc.opacity_correction = Some(on),
                Toggle::Gc(on) => t.adc.growth_control = Some(on),
                Toggle::Or(on) => t.adc.opacity_regularization = Some(on),
            }
        }
        if let Some(m) = self.max_primitives {
            t.adc.max_primitives = Some(m);
        }
        if let Some(s) = self.seed {
            t.seed = s;
        }
        if let Some(g) = self.guiding_error {
            t.adc.guiding_error = match g {
                GuidingArg::Ssim => GuidingError::Ssim,
                GuidingArg::L1 => GuidingError::L1,
            };
        }
        if let Some(n) = self.iterations {
            t.total_iterations = n;
        }
    }
}

/// Marks a failure caused by the command's inputs (exit code 2).
#[derive(Debug)]
struct InputError(anyhow::Error);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for InputError {}

fn input(e: impl Into<anyhow::Error>) -> anyhow::Error {
    anyhow::Error::new(InputError(e.into()))
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err
        .chain()
        .any(|c| matches!(c.downcast_ref::<TrainError>(), Some(TrainError::NonFinite { .. })))
    {
        3
    } else if err.chain().any(|c| c.is::<InputError>()) {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(a) => fit::run(&a),
        Command::Ablate(a) => ablate::run(&a),
        Command::Render(a) => render::run(&a),
        Command::Eval(a) => eval::run(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// Default output directory for `command` next to the working directory.
fn default_out(command: &str) -> PathBuf {
    PathBuf::from("runs").join(command)
}
