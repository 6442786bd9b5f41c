//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! Exits 0 after printing the report; set `ACCEPTANCE_STRICT=1` to exit 1
//! when any criterion fails.

mod common;

use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use splat_adc::ablation::{arm_config, run_grid, summarize};
use splat_adc::adc::corrected_opacity;
use splat_adc::io::synthetic::{checker2d, Checker2d};
use splat_adc::io::{initial_scene, make_synthetic, parse_config};
use splat_adc::{train, AdcConfig, Arm, ArmResult, Dataset, GuidingError, InitSpec, Scene, TrainConfig, TrainReport, Trainer};

use common::checks::{adjoint_check, aux_identity, raster_oracle, FD_FLOOR, FD_STEP};

const SEEDS: [u64; 3] = [0, 1, 2];

struct Report {
    lines: Vec<(bool, String)>,
}

impl Report {
    fn check(&mut self, name: &str, pass: bool, detail: String) {
        let line = format!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        println!("{line}");
        self.lines.push((pass, line));
    }
}

fn textured_scene() -> Dataset {
    checker2d(&Checker2d {
        width: 96,
        height: 96,
        cell: 6,
        noise_amplitude: 0.5,
        noise_scale: 3.0,
        views: 9,
        seed: 1,
    })
    .dataset
}

/// Shared training setup of every fit on the textured scene.
fn fit_config() -> TrainConfig {
    let iterations = 800;
    TrainConfig {
        total_iterations: iterations,
        adc: AdcConfig {
            densify_interval: 10,
            densify_start: 10,
            gradient_threshold: 6e-3,
            split_size_fraction: 0.03,
            reset_interval: iterations / 10,
            ..AdcConfig::default()
        },
        ..TrainConfig::default()
    }
}

fn opacity_law(rep: &mut Report) {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let alpha = if i == 0 { 0.0 } else if i == 1 { 1.0 - 1e-6 } else { rng.random_range(0.0..=1.0 - 1e-6) };
        let a = corrected_opacity(alpha);
        worst = worst.max(((1.0 - alpha) - (1.0 - a) * (1.0 - a)).abs());
    }
    let mut violations = 0;
    for _ in 0..1000 {
        let alpha: f64 = rng.random_range(1e-9..1.0);
        let g: f64 = 1.0 - rng.random_range(0.0..1.0);
        let a = corrected_opacity(alpha);
        let (single, corrected, naive) = (1.0 - alpha * g, (1.0 - a * g).powi(2), (1.0 - alpha * g).powi(2));
        if !(single >= corrected && corrected > naive) {
            violations += 1;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    rep.check(
        "opacity-correction law",
        worst <= 1e-12 && violations == 0 && secs < 1.0,
        format!("max |(1-a)-(1-a^)^2| = {worst:.3e} (tol 1e-12), bias-inequality violations {violations}/1000, {secs:.3}s (limit 1s)"),
    );
}

fn aux_gradient(rep: &mut Report) {
    let t = Instant::now();
    let r = aux_identity(24, 3000);
    let secs = t.elapsed().as_secs_f64();
    rep.check(
        "aux-loss gradient identity",
        r.worst_rel <= 1e-6 && r.nonzero_other == 0 && secs < 10.0,
        format!(
            "{} scenes, worst relative gap {:.3e} (tol 1e-6), nonzero non-err gradients {} (tol 0), {secs:.2}s (limit 10s)",
            r.scenes, r.worst_rel, r.nonzero_other
        ),
    );
}

fn rasterizer(rep: &mut Report) {
    let t = Instant::now();
    let r = raster_oracle(50, 1000);
    let secs = t.elapsed().as_secs_f64();
    rep.check(
        "rasterizer oracle",
        r.forward <= 1e-5 && r.ones_identity <= 1e-6 && secs < 30.0,
        format!(
            "{} scenes, max channel error {:.3e} (tol 1e-5), max |R[1]+T-1| {:.3e} (tol 1e-6), {secs:.2}s (limit 30s)",
            r.scenes, r.forward, r.ones_identity
        ),
    );
}

fn adjoint(rep: &mut Report) {
    let t = Instant::now();
    let r = adjoint_check(20, 2000);
    let secs = t.elapsed().as_secs_f64();
    rep.check(
        "adjoint check",
        r.worst_rel < 1e-3 && secs < 60.0,
        format!(
            "{} scenes, {} gradients, worst relative error {:.3e} (tol 1e-3, h {FD_STEP:e}, floor {FD_FLOOR:e}), {secs:.2}s (limit 60s)",
            r.scenes, r.checked, r.worst_rel
        ),
    );
}

/// Growth-control violations of one budgeted fit, empty when compliant.
fn growth_violations(report: &TrainReport, budget: usize, fraction: f64) -> Vec<String> {
    let mut out = Vec::new();
    for e in &report.adc_events {
        let cap = (fraction * e.count_before as f64).floor() as usize;
        if e.added() > cap {
            out.push(format!("it {} added {} > {cap}", e.iteration, e.added()));
        }
    }
    let mut reached = false;
    for &(it, count) in &report.counts {
        if count > budget {
            out.push(format!("it {it} count {count} > budget {budget}"));
        }
        if reached && (count as f64) < 0.95 * budget as f64 {
            out.push(format!("it {it} count {count} fell below 0.95 budget"));
        }
        reached |= count as f64 >= 0.99 * budget as f64;
    }
    out
}

fn write_growth_curves(results: &[(&str, &ArmResult)]) -> std::path::PathBuf {
    let path = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance_growth.csv");
    let mut csv = String::from("arm,seed,iteration,count\n");
    for (label, r) in results {
        for (it, n) in &r.report.counts {
            let _ = writeln!(csv, "{label},{},{it},{n}", r.seed);
        }
    }
    let _ = std::fs::write(&path, csv);
    path
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn textured_fits(rep: &mut Report) {
    let dataset = textured_scene();
    let base = fit_config();
    let init = |_seed: u64| -> Scene { initial_scene(&InitSpec::Grid { nx: 16, ny: 16 }, &dataset, 0).unwrap() };

    let t = Instant::now();
    let mut ab_secs = 0.0;
    let mut last = Instant::now();
    let grid = run_grid(&dataset, &init, &base, &SEEDS, &Arm::ALL, |r| {
        let secs = last.elapsed().as_secs_f64();
        last = Instant::now();
        if matches!(r.arm, Arm::Baseline | Arm::Revised) {
            ab_secs += secs;
        }
        let m = r.metrics();
        println!(
            "  fit {:<12} seed {} count {:>5} budget {:>5} psnr {:.3} ssim {:.4} ({secs:.1}s)",
            r.arm.label(),
            r.seed,
            r.scene.len(),
            r.budget.map_or("-".into(), |b| b.to_string()),
            m.mean_psnr,
            m.mean_ssim
        );
    })
    .unwrap_or_else(|e| panic!("{} seed {} failed: {}", e.arm, e.seed, e.error));

    let mut l1_fits = Vec::new();
    let mut l1_base = base.clone();
    l1_base.adc.guiding_error = GuidingError::L1;
    for &seed in &SEEDS {
        let budget = grid.iter().find(|r| r.arm == Arm::Baseline && r.seed == seed).unwrap().scene.len();
        let cfg = arm_config(&l1_base, Arm::Revised, seed, Some(budget));
        let s = Instant::now();
        let (scene, report) = train(init(seed), &dataset, &cfg).unwrap();
        let m = report.final_eval().unwrap().clone();
        println!(
            "  fit {:<12} seed {seed} count {:>5} budget {budget:>5} psnr {:.3} ssim {:.4} ({:.1}s)",
            "revised-l1",
            scene.len(),
            m.mean_psnr,
            m.mean_ssim,
            s.elapsed().as_secs_f64()
        );
        l1_fits.push(ArmResult {
            arm: Arm::Revised,
            seed,
            budget: Some(budget),
            scene,
            report,
        });
    }
    let total_secs = t.elapsed().as_secs_f64();

    // growth control, on every fit that runs with it
    let mut gc_fits: Vec<&ArmResult> = grid
        .iter()
        .filter(|r| arm_config(&base, r.arm, r.seed, r.budget).adc.growth_control())
        .collect();
    gc_fits.extend(l1_fits.iter());
    let mut violations = Vec::new();
    for r in &gc_fits {
        let budget = r.budget.expect("growth-controlled fits are budgeted");
        for v in growth_violations(&r.report, budget, base.adc.grow_fraction) {
            violations.push(format!("{} seed {}: {v}", r.arm, r.seed));
        }
    }
    let all: Vec<(&str, &ArmResult)> = grid
        .iter()
        .map(|r| (r.arm.label(), r))
        .chain(l1_fits.iter().map(|r| ("revised-l1", r)))
        .collect();
    let curves = write_growth_curves(&all);
    rep.check(
        "growth control",
        violations.is_empty(),
        format!(
            "{} growth-controlled fits, {} violations (additions <= floor(0.05 count), count <= budget, stays in [0.95, 1] budget after reaching 0.99){}; curves in {}",
            gc_fits.len(),
            violations.len(),
            violations.first().map(|v| format!(", first: {v}")).unwrap_or_default(),
            curves.display()
        ),
    );

    let not_decreasing: Vec<String> = all
        .iter()
        .filter(|(_, r)| {
            let l = &r.report.losses;
            l.last().unwrap().loss.total >= l.first().unwrap().loss.total
        })
        .map(|(label, r)| format!("{label} seed {}", r.seed))
        .collect();
    rep.check(
        "final loss below initial",
        not_decreasing.is_empty(),
        format!("{} fits, {} without a decrease {:?}", all.len(), not_decreasing.len(), not_decreasing),
    );

    let summary = summarize(&grid);
    let ssim_of = |arm: Arm| summary.iter().find(|s| s.arm == arm).unwrap().mean_ssim;
    let (base_ssim, rev_ssim) = (ssim_of(Arm::Baseline), ssim_of(Arm::Revised));
    let reduction = 1.0 - (1.0 - rev_ssim) / (1.0 - base_ssim);
    rep.check(
        "directional A/B",
        rev_ssim > base_ssim && reduction >= 0.05 && ab_secs < 600.0,
        format!(
            "mean SSIM revised {rev_ssim:.4} vs baseline {base_ssim:.4}, (1-SSIM) reduced by {:.1}% (need >= 5%), {} seeds, A/B fits {ab_secs:.0}s (limit 600s)",
            100.0 * reduction,
            SEEDS.len()
        ),
    );

    let best = summary
        .iter()
        .max_by(|a, b| a.mean_ssim.total_cmp(&b.mean_ssim))
        .unwrap();
    let no_oc = ssim_of(Arm::RevisedNoOc);
    let table: Vec<String> = summary.iter().map(|s| format!("{} {:.4}", s.arm, s.mean_ssim)).collect();
    rep.check(
        "ablation consistency",
        best.arm == Arm::Revised && no_oc < rev_ssim,
        format!("best arm {} ; revised-oc {no_oc:.4} vs revised {rev_ssim:.4} ; means [{}]", best.arm, table.join(", ")),
    );

    let l1_ssim = mean(l1_fits.iter().map(|r| r.metrics().mean_ssim));
    rep.check(
        "l1 guiding error",
        l1_ssim > base_ssim,
        format!("mean SSIM revised(l1) {l1_ssim:.4} vs baseline {base_ssim:.4}"),
    );
    println!("  textured fits took {total_secs:.0}s in total");
}

fn non_err_bits(g: &splat_adc::GaussianPrimitive) -> Vec<u64> {
    let mut v: Vec<u64> = Vec::new();
    v.extend(g.position.map(f64::to_bits));
    v.extend(g.log_scale.map(f64::to_bits));
    v.extend(g.rotation.map(f64::to_bits));
    v.push(g.opacity_logit.to_bits());
    v.extend(g.feature.map(f64::to_bits));
    v
}

fn aux_invariance(rep: &mut Report) {
    let dataset = textured_scene();
    let scene = initial_scene(&InitSpec::Grid { nx: 16, ny: 16 }, &dataset, 0).unwrap();
    let cfg = TrainConfig {
        total_iterations: 100,
        photometric_weight: 0.0,
        adc: AdcConfig {
            transmittance_weight: 0.0,
            densify_interval: 0,
            ..AdcConfig::revised()
        },
        ..TrainConfig::default()
    };
    let mut t = Trainer::new(scene.clone(), &dataset, &cfg, Box::new(std::io::sink())).unwrap();
    let mut errors_seen = false;
    for _ in 0..100 {
        t.step().unwrap();
        errors_seen |= t.stats.err_max.iter().any(|&e| e > 0.0);
    }
    let changed = t
        .scene
        .primitives
        .iter()
        .zip(&scene.primitives)
        .filter(|(p, q)| non_err_bits(p) != non_err_bits(q))
        .count();
    rep.check(
        "aux-loss parameter invariance",
        changed == 0 && errors_seen && t.scene.len() == scene.len(),
        format!("100 steps, {changed} of {} primitives changed (tol 0 bits), errors delivered: {errors_seen}", scene.len()),
    );
}

const MANIFEST: &str = r#"
[scene]
kind = "checker2d"
width = 48
height = 48
cell = 4
noise_amplitude = 0.5
views = 3
seed = 2

[init]
kind = "grid"
nx = 10
ny = 10

[train]
total_iterations = 300
seed = 5
eval_interval = 100

[train.adc]
policy = "revised"
densify_interval = 20
densify_start = 20
max_primitives = 250
"#;

fn metric_table(report: &TrainReport) -> String {
    let mut s = String::new();
    for e in &report.evals {
        for v in &e.views {
            let _ = writeln!(s, "{},{},{},{:e},{:e}", e.iteration, e.primitive_count, v.view, v.psnr, v.ssim);
        }
    }
    s
}

fn determinism(rep: &mut Report) {
    let run = || {
        let cfg = parse_config(MANIFEST, std::path::Path::new("acceptance.toml")).unwrap();
        let data = make_synthetic(&cfg.scene, std::path::Path::new(".")).unwrap();
        let scene = initial_scene(&cfg.init, &data.dataset, cfg.train.seed).unwrap();
        let (_, report) = train(scene, &data.dataset, &cfg.train).unwrap();
        (metric_table(&report), serde_json::to_string(&report).unwrap())
    };
    let (ta, ja) = run();
    let (tb, jb) = run();
    rep.check(
        "determinism",
        ta == tb && ja == jb && !ta.is_empty(),
        format!("metric tables identical: {}, full reports identical: {}, {} rows", ta == tb, ja == jb, ta.lines().count()),
    );
}

fn main() {
    let start = Instant::now();
    let mut rep = Report { lines: Vec::new() };
    opacity_law(&mut rep);
    aux_gradient(&mut rep);
    rasterizer(&mut rep);
    adjoint(&mut rep);
    aux_invariance(&mut rep);
    determinism(&mut rep);
    textured_fits(&mut rep);

    let passed = rep.lines.iter().filter(|l| l.0).count();
    println!("acceptance: {passed}/{} passed in {:.0}s", rep.lines.len(), start.elapsed().as_secs_f64());
    if passed < rep.lines.len() && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
