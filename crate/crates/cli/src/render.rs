use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use clap::Args;
use splat_adc::io::{load_snapshot, save_image};
use splat_adc::{render, Camera, Decoder, RenderSettings};

use crate::fit::{build_scene, resolved_config};
use crate::{input, Overrides};

#[derive(Args)]
pub struct CameraArgs {
    /// Take the camera from the dataset this run config describes.
    #[arg(long, conflicts_with_all = ["camera", "size"])]
    config: Option<PathBuf>,
    /// JSON file holding one camera or a list of cameras (cameras.json of a fit).
    #[arg(long, conflicts_with = "size")]
    camera: Option<PathBuf>,
    /// Index into the dataset views or the camera list.
    #[arg(long, default_value_t = 0)]
    view: usize,
    /// Identity 2D camera of the given size, e.g. 64x48.
    #[arg(long, value_parser = parse_size)]
    size: Option<(usize, usize)>,
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s.split_once('x').ok_or_else(|| format!("expected WIDTHxHEIGHT, got `{s}`"))?;
    let parse = |v: &str| v.parse::<usize>().ok().filter(|&n| n > 0).ok_or_else(|| format!("bad image size `{s}`"));
    Ok((parse(w)?, parse(h)?))
}

impl CameraArgs {
    /// The selected camera and the render settings that go with it.
    pub fn resolve(&self) -> Result<(Camera, RenderSettings)> {
        if let Some(path) = &self.config {
            let cfg = resolved_config(path, &Overrides::default())?;
            let data = build_scene(&cfg)?;
            let view = data
                .dataset
                .views
                .get(self.view)
                .ok_or_else(|| input(anyhow!("view {} out of range, dataset has {}", self.view, data.dataset.len())))?;
            return Ok((view.camera.clone(), cfg.train.render));
        }
        if let Some(path) = &self.camera {
            return Ok((load_camera(path, self.view).map_err(input)?, RenderSettings::default()));
        }
        if let Some((w, h)) = self.size {
            return Ok((Camera::identity2d(w, h), RenderSettings::default()));
        }
        Err(input(anyhow!("no camera given; pass --config, --camera or --size")))
    }
}

fn load_camera(path: &Path, view: usize) -> Result<Camera> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("{}: invalid JSON", path.display()))?;
    let cams: Vec<Camera> = if value.is_array() {
        serde_json::from_value(value)
    } else {
        serde_json::from_value(value).map(|c| vec![c])
    }
    .with_context(|| format!("{}: not a camera description", path.display()))?;
    let n = cams.len();
    cams.into_iter()
        .nth(view)
        .ok_or_else(|| anyhow!("{}: view {view} out of range, file has {n} cameras", path.display()))
}

#[derive(Args)]
pub struct RenderArgs {
    snapshot: PathBuf,
    #[command(flatten)]
    camera: CameraArgs,
    /// RGB output image.
    #[arg(long)]
    out: PathBuf,
    /// Residual transmittance image; defaults to <out>_transmittance.png.
    #[arg(long)]
    transmittance: Option<PathBuf>,
}

pub fn run(args: &RenderArgs) -> Result<()> {
    let scene = load_snapshot(&args.snapshot).map_err(input)?;
    let (camera, settings) = args.camera.resolve()?;
    if scene.mode != camera.mode() {
        return Err(input(anyhow!(
            "snapshot {} is {} but the camera is {}",
            args.snapshot.display(),
            scene.mode,
            camera.mode()
        )));
    }
    let out = render(&scene, &camera, Decoder::Rgb, &settings)?;
    save_image(&out.image, &args.out)?;
    let trans = args.transmittance.clone().unwrap_or_else(|| {
        let stem = args.out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        args.out.with_file_name(format!("{stem}_transmittance.png"))
    });
    save_image(&out.residual_transmittance, &trans)?;
    println!(
        "render: {} primitives to {} and {}",
        scene.len(),
        args.out.display(),
        trans.display()
    );
    Ok(())
}
