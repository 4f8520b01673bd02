use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use specula::calibration::{build_samples, calibrate_material, CalibrationReport};
use specula::experiment::{
    build_problem, preset_config, run_experiment, summarize, write_outputs, ExperimentConfig, Manifest, PoseSpec,
    RigSpec, ShapeSpec, ViewSpec,
};
use specula::geometry::io::{
    load_mesh, read_depth_png, read_intensity_png, read_normal_sidecar, write_depth_png, write_intensity_png,
    write_normal_sidecar, write_obj, write_scalar_sidecar, scalar_preview,
};
use specula::geometry::{raycast_view, Grid};
use specula::metrics::{completion_mask, depth_completion_pct, PoseEstimate};
use specula::planner::NbvSession;
use specula::response::{recover_response, ExposureStack};
use specula::sensor::simulate_capture;
use specula::{Error, PhongMaterial, RigidPose};

use crate::{Command, EvalArgs};

pub fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::CalibrateResponse { manifest, out, lambda, samples } => calibrate_response(&manifest, &out, lambda, samples),
        Command::CalibrateMaterial { manifest, out } => calibrate_material_cmd(&manifest, out.as_deref()),
        Command::Simulate { config, view, seed, out } => simulate(&config.config, view, seed, &out),
        Command::Plan { config, seed, out } => plan(&config.config, seed, out.as_deref()),
        Command::Run { config, manifest, seeds, out } => run(config.as_deref(), manifest.as_deref(), seeds, out),
        Command::Eval(args) => eval(&args),
        Command::GenScene { scene, out, seeds } => gen_scene(&scene, &out, seeds),
    }
}

/// A missing input file is the caller's mistake, not a runtime failure.
fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("no such file: {}", path.display())).into())
    }
}

fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    require_file(path)?;
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())).into())
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    require_file(path)?;
    Ok(ExperimentConfig::load(path)?)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Stdout when no path is given.
fn sink(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn calibrate_response(manifest: &Path, out: &Path, lambda: f64, samples: usize) -> Result<()> {
    require_file(manifest)?;
    let stack = ExposureStack::load_manifest(manifest)?;
    let curve = recover_response(&stack, lambda, samples)?;
    curve.save(out)?;
    eprintln!(
        "recovered response from {} exposures -> {}",
        stack.exposure_times().len(),
        out.display()
    );
    Ok(())
}

/// Inputs of `calibrate-material`; paths are relative to the manifest.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CalibrationManifest {
    image: PathBuf,
    /// Exposure in the response curve's time unit.
    exposure_time: f64,
    depth: PathBuf,
    normals: PathBuf,
    mask: Option<PathBuf>,
    response: PathBuf,
    /// Sensor geometry; `reference` is the pose the image was taken from.
    rig: RigSpec,
}

#[derive(Serialize)]
struct MaterialOutput {
    material: PhongMaterial,
    fit: FitSummary,
}

#[derive(Serialize)]
struct FitSummary {
    holdout_rms_relative: f64,
    fit_samples: usize,
    holdout_samples: usize,
    warnings: Vec<String>,
}

impl From<CalibrationReport> for MaterialOutput {
    fn from(r: CalibrationReport) -> Self {
        Self {
            material: r.material,
            fit: FitSummary {
                holdout_rms_relative: r.holdout_rms_relative,
                fit_samples: r.fit_samples,
                holdout_samples: r.holdout_samples,
                warnings: r.warnings,
            },
        }
    }
}

fn calibrate_material_cmd(manifest: &Path, out: Option<&Path>) -> Result<()> {
    let m: CalibrationManifest = read_toml(manifest)?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let image = read_intensity_png(base.join(&m.image))?;
    let depth = read_depth_png(base.join(&m.depth))?;
    let normals = read_normal_sidecar(base.join(&m.normals))?;
    let mask = match &m.mask {
        Some(p) => read_intensity_png(base.join(p))?.map(|&z| z > 0),
        None => depth.map(|d| !d.is_nan()),
    };
    let curve = specula::ResponseCurve::load(base.join(&m.response))?;
    let rig = m.rig.layout().place(&m.rig.reference.pose()?)?;
    let samples = build_samples(&image, m.exposure_time, &depth, &normals, &rig, &curve, &mask)?;
    let report = calibrate_material(&samples)?;
    let text = toml::to_string(&MaterialOutput::from(report))?;
    sink(out)?.write_all(text.as_bytes())?;
    Ok(())
}

/// The view spec that reproduces a `look_at` pose.
fn view_of(pose: &RigidPose) -> ViewSpec {
    let eye = pose.origin();
    let target = eye + pose.transform_vector(&Vector3::z()) * 100.0;
    let up = -pose.transform_vector(&Vector3::y());
    // `+ 0.0` turns -0.0 into 0.0 so written files stay readable.
    let tidy = |v: Vector3<f64>| v.map(|x| x + 0.0).into();
    ViewSpec { eye: tidy(eye.coords), target: tidy(target.coords), up: tidy(up) }
}

fn simulate(config: &Path, view: Option<usize>, seed: Option<u64>, out: &Path) -> Result<()> {
    let cfg = load_config(config)?;
    let problem = build_problem(&cfg)?;
    let pose = match view {
        None => problem.reference_pose,
        Some(id) => {
            problem
                .candidates
                .iter()
                .find(|c| c.id == id)
                .ok_or_else(|| {
                    Error::InvalidArgument(format!("no candidate viewpoint {id} (have {})", problem.candidates.len()))
                })?
                .pose
        }
    };
    let rig = problem.layout.place(&pose)?;
    let mut sensing = cfg.sensing;
    if let Some(s) = seed {
        sensing.seed = s;
    }
    let capture = simulate_capture(&problem.scene, &rig, &problem.curve, &sensing);
    let gt = raycast_view(&problem.scene, &rig.left);

    create_dir(out)?;
    write_intensity_png(&capture.left, out.join("left.png"))?;
    write_intensity_png(&capture.right, out.join("right.png"))?;
    write_depth_png(&capture.depth, out.join("depth.png"))?;
    write_scalar_sidecar(&capture.probability, out.join("probability.bin"))?;
    write_intensity_png(&scalar_preview(&capture.probability), out.join("probability.png"))?;
    write_depth_png(&gt.depth, out.join("gt_depth.png"))?;
    write_normal_sidecar(&gt.normals, out.join("normals.bin"))?;
    let mask = gt.depth.map(|d| if d.is_nan() { 0u8 } else { 255 });
    write_intensity_png(&mask, out.join("mask.png"))?;
    problem.curve.save(out.join("response.txt"))?;

    // Ready-made input for calibrate-material on this capture.
    let manifest = CalibrationManifest {
        image: "left.png".into(),
        exposure_time: sensing.exposure_time,
        depth: "gt_depth.png".into(),
        normals: "normals.bin".into(),
        mask: Some("mask.png".into()),
        response: "response.txt".into(),
        rig: RigSpec { reference: view_of(&pose), ..cfg.rig.clone() },
    };
    std::fs::write(out.join("calibration.toml"), toml::to_string(&manifest)?)?;

    let (w, h) = capture.depth.dims();
    eprintln!(
        "captured {w}x{h}: {} of {} object pixels measured -> {}",
        capture.depth.valid_count(),
        gt.depth.valid_count(),
        out.display()
    );
    Ok(())
}

fn plan(config: &Path, seed: u64, out: Option<&Path>) -> Result<()> {
    let cfg = load_config(config)?;
    let problem = build_problem(&cfg)?;
    let session = NbvSession::prepare(&problem, seed)?;
    let model = session.gain_model();
    let missing = session.missing_set(model, session.initial());
    let (chosen, report) = model.select_nbv(&problem.candidates, &missing)?;

    let mut w = csv::Writer::from_writer(sink(out)?);
    let k = session.hypothesis_set().len();
    let mut header = vec!["candidate_id".to_string(), "gain".to_string()];
    header.extend((0..k).map(|i| format!("hypothesis_{i}")));
    w.write_record(&header)?;
    for ((id, gain), terms) in report.ids.iter().zip(&report.gains).zip(&report.per_hypothesis) {
        let mut rec = vec![id.to_string(), gain.to_string()];
        rec.extend(terms.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    eprintln!("{} missing pixels; best viewpoint {} (gain {:.4})", missing.len(), chosen.id, report.chosen_gain());
    Ok(())
}

fn run(config: Option<&Path>, manifest: Option<&Path>, seeds: Option<Vec<u64>>, out: Option<PathBuf>) -> Result<()> {
    let (cfg, seeds) = match (config, manifest) {
        (_, Some(m)) => {
            require_file(m)?;
            let m = Manifest::load(m)?;
            let seeds = seeds.unwrap_or(m.seeds);
            (m.config, seeds)
        }
        (Some(c), None) => {
            let cfg = load_config(c)?;
            let seeds = seeds.unwrap_or_else(|| cfg.seeds.clone());
            (cfg, seeds)
        }
        (None, None) => unreachable!("clap requires one of config / --manifest"),
    };
    let result = run_experiment(&cfg, Some(&seeds))?;
    let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
    let paths = write_outputs(&cfg, &result, &dir)?;

    println!("{:<14} {:>5} {:>7} {:>13} {:>10} {:>10} {:>9}", "policy", "runs", "views", "completion_%", "add0_mm", "add_mm", "correct");
    let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3}"));
    for s in summarize(&result.rows) {
        println!(
            "{:<14} {:>5} {:>7.2} {:>13.2} {:>10} {:>10} {:>9}",
            s.policy.as_str(),
            s.runs,
            s.mean_views,
            s.mean_completion_pct,
            opt(s.mean_initial_add_mm),
            opt(s.mean_add_mm),
            opt(s.correct_rate)
        );
    }
    eprintln!("config {} -> {}", &result.config_hash[..12], paths.results.display());
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseFile {
    object: Vec<ObjectPoses>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectPoses {
    id: String,
    mesh: PathBuf,
    gt: PoseSpec,
    estimate: PoseSpec,
    mask: Option<PathBuf>,
}

#[derive(Serialize)]
struct MetricsRow {
    object_id: String,
    completion_pct: f64,
    add_mm: Option<f64>,
    correct: Option<bool>,
}

fn read_mask(path: &Path) -> Result<Grid<bool>> {
    require_file(path)?;
    Ok(read_intensity_png(path)?.map(|&z| z > 0))
}

fn eval(args: &EvalArgs) -> Result<()> {
    if !(args.tolerance_mm > 0.0) {
        return Err(Error::InvalidArgument(format!("--tolerance-mm must be > 0 (got {})", args.tolerance_mm)).into());
    }
    for p in [&args.gt, &args.before, &args.after] {
        require_file(p)?;
    }
    let gt = read_depth_png(&args.gt)?;
    let before = read_depth_png(&args.before)?;
    let after = read_depth_png(&args.after)?;
    let scene_mask = match &args.mask {
        Some(p) => read_mask(p)?,
        None => gt.map(|d| !d.is_nan()),
    };
    let completion = |object: &Grid<bool>| -> Result<f64> {
        let mask = completion_mask(&before, object)?;
        Ok(depth_completion_pct(&before, &after, &gt, args.tolerance_mm, &mask)?)
    };

    let mut rows = Vec::new();
    match &args.poses {
        None => rows.push(MetricsRow {
            object_id: "scene".into(),
            completion_pct: completion(&scene_mask)?,
            add_mm: None,
            correct: None,
        }),
        Some(path) => {
            let file: PoseFile = read_toml(path)?;
            let base = path.parent().unwrap_or(Path::new("."));
            for o in file.object {
                let mesh_path = base.join(&o.mesh);
                require_file(&mesh_path)?;
                let mesh = load_mesh(&mesh_path)?;
                let est = PoseEstimate::evaluate(o.estimate.pose(), &o.gt.pose(), &mesh);
                let object = match &o.mask {
                    Some(p) => read_mask(&base.join(p))?,
                    None => scene_mask.clone(),
                };
                rows.push(MetricsRow {
                    object_id: o.id,
                    completion_pct: completion(&object)?,
                    add_mm: Some(est.add_mm),
                    correct: Some(est.correct),
                });
            }
        }
    }
    let mut w = csv::Writer::from_writer(sink(args.out.as_deref())?);
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn gen_scene(scene: &str, out: &Path, seeds: Option<u64>) -> Result<()> {
    let mut cfg = preset_config(scene)?;
    if let Some(n) = seeds {
        if n == 0 {
            return Err(Error::InvalidArgument("--seeds must be >= 1".into()).into());
        }
        cfg.seeds = (0..n).collect();
    }
    create_dir(out)?;
    let mesh_name = format!("{scene}.obj");
    let object = &mut cfg.scene.objects[0];
    write_obj(&object.shape.build()?, out.join(&mesh_name))?;
    object.shape = ShapeSpec::Mesh { path: mesh_name.into() };
    cfg.output_dir = PathBuf::from("results").join(scene);
    let config_path = out.join(format!("{scene}.toml"));
    std::fs::write(&config_path, cfg.to_toml()?).with_context(|| format!("writing {}", config_path.display()))?;
    // Load it back so a broken template fails here rather than at run time.
    ExperimentConfig::load(&config_path)?;
    println!("{}", config_path.display());
    Ok(())
}
