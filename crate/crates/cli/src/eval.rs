use std::path::PathBuf;

use anyhow::{anyhow, Context, Result};
use clap::Args;
use splat_adc::io::load_snapshot;
use splat_adc::trainer::ViewMetrics;
use splat_adc::evaluate;

use crate::fit::{build_scene, resolved_config};
use crate::{input, Overrides};

#[derive(Args)]
pub struct EvalArgs {
    snapshot: PathBuf,
    /// Run config (or manifest) describing the dataset.
    #[arg(long)]
    config: PathBuf,
    /// Evaluate every view instead of the holdout views.
    #[arg(long)]
    all_views: bool,
    /// Also write the table to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn table(rows: &[ViewMetrics]) -> String {
    let n = rows.len().max(1) as f64;
    let psnr = rows.iter().map(|r| r.psnr).sum::<f64>() / n;
    let ssim = rows.iter().map(|r| r.ssim).sum::<f64>() / n;
    let mut s = String::from("view,psnr,ssim\n");
    for r in rows {
        s.push_str(&format!("{},{},{}\n", r.view, r.psnr, r.ssim));
    }
    s.push_str(&format!("mean,{psnr},{ssim}\n"));
    s
}

pub fn run(args: &EvalArgs) -> Result<()> {
    let scene = load_snapshot(&args.snapshot).map_err(input)?;
    let cfg = resolved_config(&args.config, &Overrides::default())?;
    let data = build_scene(&cfg)?;
    let dataset = &data.dataset;
    if dataset.mode() != Some(scene.mode) {
        return Err(input(anyhow!(
            "snapshot {} is {} but the dataset cameras are {}",
            args.snapshot.display(),
            scene.mode,
            dataset.mode().map_or("empty".to_string(), |m| m.to_string())
        )));
    }
    let views: Vec<usize> = if args.all_views {
        (0..dataset.len()).collect()
    } else {
        dataset.split(cfg.train.holdout_every).1
    };
    let rows = evaluate(&scene, dataset, &views, &cfg.train.render)?;
    let text = table(&rows);
    print!("{text}");
    if let Some(path) = &args.out {
        std::fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}
