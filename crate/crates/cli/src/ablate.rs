use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{anyhow, Result};
use clap::Args;
use splat_adc::ablation::{run_grid, summarize};
use splat_adc::io::{initial_scene, save_snapshot};
use splat_adc::{Arm, ArmResult};

use crate::fit::{build_scene, resolved_config};
use crate::output::{self, GrowthRow, Manifest};
use crate::{default_out, input, Overrides};

#[derive(Args)]
pub struct AblateArgs {
    /// TOML run config shared by every arm.
    config: PathBuf,
    /// Comma-separated training seeds.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
    seeds: Vec<u64>,
    #[command(flatten)]
    overrides: Overrides,
    /// Output directory; defaults to runs/ablate.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn arm_dir(r: &ArmResult) -> String {
    format!("{}-seed{}", r.arm.label(), r.seed)
}

fn save_arm(root: &std::path::Path, r: &ArmResult) -> Result<()> {
    let dir = root.join("arms").join(arm_dir(r));
    std::fs::create_dir_all(&dir)?;
    save_snapshot(&r.scene, &dir.join("snapshot.splt"))?;
    output::write_metrics(&r.report, &dir.join("metrics.csv"))?;
    output::write_losses(&r.report, &dir.join("losses.csv"))?;
    output::write_growth(&r.report, &dir.join("growth.csv"))?;
    Ok(())
}

fn write_tables(root: &std::path::Path, results: &[ArmResult]) -> Result<()> {
    let summary = summarize(results);
    output::write_ablation_table(&summary, &root.join("ablation.csv"))?;
    let rows: Vec<GrowthRow> = results
        .iter()
        .map(|r| GrowthRow {
            arm: r.arm.label(),
            seed: r.seed,
            report: &r.report,
        })
        .collect();
    output::write_combined_growth(&rows, &root.join("growth.csv"))?;
    println!("{:<12} {:>5} {:>8} {:>7} {:>10}", "arm", "seeds", "psnr", "ssim", "primitives");
    for s in &summary {
        println!("{:<12} {:>5} {:>8.3} {:>7.4} {:>10.1}", s.arm.label(), s.seeds, s.mean_psnr, s.mean_ssim, s.mean_count);
    }
    Ok(())
}

pub fn run(args: &AblateArgs) -> Result<()> {
    if args.seeds.is_empty() {
        return Err(input(anyhow!("--seeds needs at least one seed")));
    }
    let cfg = resolved_config(&args.config, &args.overrides)?;
    let out = args.out.clone().unwrap_or_else(|| default_out("ablate"));
    let mut outputs = BTreeMap::new();
    outputs.insert("ablation.csv".into(), "seed-averaged holdout metrics per arm".into());
    outputs.insert("growth.csv".into(), "growth curve of every arm and seed".into());
    outputs.insert("arms/".into(), "snapshot and tables of every arm and seed".into());
    output::write_manifest(
        &out,
        &Manifest {
            command: format!("ablate --seeds {}", args.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(",")),
            version: output::version(),
            seed: args.seeds[0],
            config: cfg.clone(),
            outputs,
        },
    )?;

    let data = build_scene(&cfg)?;
    let dataset = &data.dataset;
    // the initial scene depends on the seed only for random initialization
    let init_spec = cfg.init.clone();
    let init = |seed: u64| initial_scene(&init_spec, dataset, seed).expect("initialization was validated with the config");
    initial_scene(&cfg.init, dataset, args.seeds[0]).map_err(input)?;

    let mut save_error = None;
    let result = run_grid(dataset, &init, &cfg.train, &args.seeds, &Arm::ALL, |r| {
        let m = r.metrics();
        println!(
            "{:<12} seed {} primitives {:>6} PSNR {:.3} SSIM {:.4}",
            r.arm.label(),
            r.seed,
            r.scene.len(),
            m.mean_psnr,
            m.mean_ssim
        );
        if let Err(e) = save_arm(&out, r) {
            save_error.get_or_insert(e);
        }
    });
    match result {
        Ok(results) => {
            if let Some(e) = save_error {
                return Err(e);
            }
            write_tables(&out, &results)
        }
        Err(failure) => {
            let failure = *failure;
            write_tables(&out, &failure.completed)?;
            Err(anyhow::Error::new(failure.error).context(format!(
                "arm {} seed {} failed; {} completed arms kept in {}",
                failure.arm,
                failure.seed,
                failure.completed.len(),
                out.display()
            )))
        }
    }
}
