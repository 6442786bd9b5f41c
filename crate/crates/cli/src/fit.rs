use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use splat_adc::io::{initial_scene, make_synthetic, save_snapshot, SyntheticScene};
use splat_adc::{train_with_log, RunConfig, TrainError};

use crate::output::{self, Manifest};
use crate::{default_out, input, Overrides};

#[derive(Args)]
pub struct FitArgs {
    /// TOML run config, or the manifest.json of an earlier run.
    config: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
    /// Output directory; defaults to runs/fit.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Loads the config named on the command line with overrides applied and
/// the training defaults materialized.
pub fn resolved_config(path: &Path, overrides: &Overrides) -> Result<RunConfig> {
    let mut cfg = output::load_run(path)?;
    overrides.apply(&mut cfg);
    cfg.train = cfg.train.resolved();
    cfg.validate().map_err(input)?;
    Ok(cfg)
}

pub fn build_scene(cfg: &RunConfig) -> Result<SyntheticScene> {
    make_synthetic(&cfg.scene, Path::new(".")).map_err(input)
}

const OUTPUTS: [(&str, &str); 9] = [
    ("manifest.json", "this file"),
    ("snapshot.splt", "final primitives"),
    ("metrics.csv", "holdout PSNR/SSIM per evaluation"),
    ("losses.csv", "training loss terms"),
    ("growth.csv", "primitive count after every density-control run"),
    ("log.jsonl", "evaluation and density-control records"),
    ("cameras.json", "dataset cameras"),
    ("holdout/", "final renders of the holdout views"),
    ("ground_truth.splt", "hidden primitives of blobs3d scenes"),
];

pub fn run(args: &FitArgs) -> Result<()> {
    let cfg = resolved_config(&args.config, &args.overrides)?;
    let out = args.out.clone().unwrap_or_else(|| default_out("fit"));
    let manifest = Manifest {
        command: "fit".into(),
        version: output::version(),
        seed: cfg.train.seed,
        config: cfg.clone(),
        outputs: OUTPUTS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect::<BTreeMap<_, _>>(),
    };
    output::write_manifest(&out, &manifest)?;

    let data = build_scene(&cfg)?;
    let dataset = &data.dataset;
    output::write_cameras(dataset, &out.join("cameras.json"))?;
    if let Some(truth) = &data.ground_truth {
        save_snapshot(truth, &out.join("ground_truth.splt"))?;
    }
    let scene = initial_scene(&cfg.init, dataset, cfg.train.seed).map_err(input)?;
    let log_path = out.join("log.jsonl");
    let log = BufWriter::new(File::create(&log_path).with_context(|| format!("creating {}", log_path.display()))?);

    let (scene, report) = match train_with_log(scene, dataset, &cfg.train, log) {
        Ok(r) => r,
        Err(TrainError::NonFinite {
            iteration,
            loss,
            snapshot,
        }) => {
            let path = out.join("nonfinite.splt");
            save_snapshot(&snapshot, &path)?;
            return Err(TrainError::NonFinite { iteration, loss, snapshot })
                .with_context(|| format!("training aborted; last finite scene saved to {}", path.display()));
        }
        Err(e) => return Err(e.into()),
    };

    save_snapshot(&scene, &out.join("snapshot.splt"))?;
    output::write_metrics(&report, &out.join("metrics.csv"))?;
    output::write_losses(&report, &out.join("losses.csv"))?;
    output::write_growth(&report, &out.join("growth.csv"))?;
    let (_, holdout) = dataset.split(cfg.train.holdout_every);
    output::write_view_images(&scene, dataset, &holdout, &cfg, &out.join("holdout"))?;

    let m = report.final_eval().expect("training ends with an evaluation");
    println!(
        "fit: {} primitives after {} iterations, holdout PSNR {:.3} dB, SSIM {:.4}; outputs in {}",
        scene.len(),
        cfg.train.total_iterations,
        m.mean_psnr,
        m.mean_ssim,
        out.display()
    );
    Ok(())
}
