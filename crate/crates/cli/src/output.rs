//! Run manifests and the delimited-text tables written next to them.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use splat_adc::io::{load_config, save_image};
use splat_adc::{render, ArmSummary, Dataset, Decoder, RunConfig, Scene, SceneSpec, TrainReport};

use crate::input;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    /// Fully resolved configuration; `fit` accepts this file in place of
    /// the original TOML.
    pub config: RunConfig,
    /// Output file name to its contents.
    pub outputs: BTreeMap<String, String>,
}

pub fn version() -> String {
    format!("v{}", env!("CARGO_PKG_VERSION"))
}

/// Loads a TOML config, or the config recorded in a manifest, and makes
/// input paths absolute so the resolved config stands alone.
pub fn load_run(path: &Path) -> Result<RunConfig> {
    let mut cfg = if path.extension().is_some_and(|e| e == "json") {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))
            .map_err(input)?;
        let m: Manifest = serde_json::from_str(&text)
            .with_context(|| format!("{}: not a run manifest", path.display()))
            .map_err(input)?;
        m.config.validate().map_err(input)?;
        m.config
    } else {
        load_config(path).map_err(input)?
    };
    if let SceneSpec::Texture2d(t) = &mut cfg.scene {
        if t.path.is_relative() {
            let base = path.parent().unwrap_or(Path::new("."));
            t.path = base.join(&t.path);
        }
    }
    Ok(cfg)
}

pub fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(MANIFEST);
    fs::write(&path, serde_json::to_string_pretty(manifest)?).with_context(|| format!("writing {}", path.display()))
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))
}

/// Per-view holdout metrics of every evaluation plus a `mean` row each.
pub fn write_metrics(report: &TrainReport, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["iteration", "primitives", "view", "psnr", "ssim"])?;
    for e in &report.evals {
        let (it, n) = (e.iteration.to_string(), e.primitive_count.to_string());
        for v in &e.views {
            w.write_record([&it, &n, &v.view.to_string(), &v.psnr.to_string(), &v.ssim.to_string()])?;
        }
        w.write_record([&it, &n, "mean", &e.mean_psnr.to_string(), &e.mean_ssim.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_losses(report: &TrainReport, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["iteration", "total", "photometric_l1", "photometric_dssim", "transmittance_reg", "aux"])?;
    for r in &report.losses {
        let l = &r.loss;
        w.write_record([r.iteration as f64, l.total, l.photometric_l1, l.photometric_dssim, l.transmittance_reg, l.aux].map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// The growth curve: primitive count after every controller run.
pub fn write_growth(report: &TrainReport, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["iteration", "primitives"])?;
    for (it, n) in &report.counts {
        w.write_record([it.to_string(), n.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub struct GrowthRow<'a> {
    pub arm: &'a str,
    pub seed: u64,
    pub report: &'a TrainReport,
}

pub fn write_combined_growth(rows: &[GrowthRow], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["arm", "seed", "iteration", "primitives"])?;
    for r in rows {
        for (it, n) in &r.report.counts {
            w.write_record([r.arm.to_string(), r.seed.to_string(), it.to_string(), n.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One row per arm: seed-averaged holdout metrics and final count.
pub fn write_ablation_table(summary: &[ArmSummary], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["arm", "seeds", "psnr", "ssim", "primitives"])?;
    for s in summary {
        w.write_record([
            s.arm.label().to_string(),
            s.seeds.to_string(),
            s.mean_psnr.to_string(),
            s.mean_ssim.to_string(),
            s.mean_count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Renders `views` of `dataset` to `dir/view_NNN.png`.
pub fn write_view_images(scene: &Scene, dataset: &Dataset, views: &[usize], cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    views
        .iter()
        .map(|&i| {
            let out = render(scene, &dataset.views[i].camera, Decoder::Rgb, &cfg.train.render)?;
            let path = dir.join(format!("view_{i:03}.png"));
            save_image(&out.image, &path)?;
            Ok(path)
        })
        .collect()
}

pub fn write_cameras(dataset: &Dataset, path: &Path) -> Result<()> {
    let cams: Vec<_> = dataset.views.iter().map(|v| &v.camera).collect();
    fs::write(path, serde_json::to_string_pretty(&cams)?).with_context(|| format!("writing {}", path.display()))
}
