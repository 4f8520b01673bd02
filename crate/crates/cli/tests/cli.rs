use std::path::Path;
use std::process::{Command, Output};

use specula::geometry::io::write_intensity_png;
use specula::IntensityImage;

fn specula(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_specula")).current_dir(dir).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&specula(dir.path(), &["frobnicate"])), 1);
    assert_eq!(code(&specula(dir.path(), &["run"])), 1);
    assert_eq!(code(&specula(dir.path(), &["--help"])), 0);
    let missing = specula(dir.path(), &["plan", "nowhere.toml"]);
    assert_eq!(code(&missing), 1);
    assert!(stderr(&missing).contains("nowhere.toml"));
    assert_eq!(code(&specula(dir.path(), &["gen-scene", "teapot"])), 1);
}

#[test]
fn invalid_config_names_every_bad_field() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&specula(dir.path(), &["gen-scene", "plate", "--out", "."])), 0);
    let text = std::fs::read_to_string(dir.path().join("plate.toml")).unwrap();
    let text = text.replace("sigma = 100.0", "sigma = -1.0").replace("max_views = 3", "max_views = 0");
    std::fs::write(dir.path().join("bad.toml"), text).unwrap();
    let out = specula(dir.path(), &["run", "bad.toml"]);
    assert_eq!(code(&out), 1);
    let err = stderr(&out);
    assert!(err.contains("sensing.sigma") && err.contains("stop.max_views"), "{err}");
}

#[test]
fn runtime_failures_exit_with_two() {
    // A flat plate seen head-on has no back-lobe pixels to fit the diffuse term.
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&specula(dir.path(), &["gen-scene", "plate", "--out", "."])), 0);
    assert_eq!(code(&specula(dir.path(), &["simulate", "plate.toml", "--out", "cap"])), 0);
    let out = specula(dir.path(), &["calibrate-material", "cap/calibration.toml"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn simulate_then_calibrate_material_recovers_the_preset() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&specula(dir.path(), &["gen-scene", "sphere", "--out", "."])), 0);
    let sim = specula(dir.path(), &["simulate", "sphere.toml", "--out", "cap"]);
    assert_eq!(code(&sim), 0, "{}", stderr(&sim));
    for f in ["left.png", "right.png", "depth.png", "probability.bin", "normals.bin", "response.txt"] {
        assert!(dir.path().join("cap").join(f).is_file(), "{f}");
    }
    let out = specula(dir.path(), &["calibrate-material", "cap/calibration.toml"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    #[derive(serde::Deserialize)]
    struct Fitted {
        material: specula::PhongMaterial,
    }
    let fitted: Fitted = toml::from_str(&stdout(&out)).unwrap();
    let truth = specula::PhongMaterial::TUBE_FITTING;
    // 8-bit images and whole-millimetre depth limit the accuracy here.
    assert!((fitted.material.k_d / truth.k_d - 1.0).abs() < 0.05);
    assert!((fitted.material.k_s / truth.k_s - 1.0).abs() < 0.05);
    assert!((fitted.material.n / truth.n - 1.0).abs() < 0.05);
}

#[test]
fn calibrate_response_from_png_stack() {
    let dir = tempfile::tempdir().unwrap();
    let mut manifest = String::new();
    for j in 0..6 {
        let dt = 0.5 * 2f64.powi(j);
        let img = IntensityImage::from_fn(48, 32, |u, v| {
            let e = (-5.0 + 7.0 * (v * 48 + u) as f64 / (48.0 * 32.0)).exp();
            (255.0 * (e * dt).powf(1.0 / 2.2)).round().clamp(0.0, 255.0) as u8
        });
        write_intensity_png(&img, dir.path().join(format!("e{j}.png"))).unwrap();
        manifest += &format!("[[exposure]]\nimage = \"e{j}.png\"\ntime_ms = {dt}\n\n");
    }
    std::fs::write(dir.path().join("stack.toml"), manifest).unwrap();
    let out = specula(dir.path(), &["calibrate-response", "stack.toml", "--out", "g.txt"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let curve = specula::ResponseCurve::load(dir.path().join("g.txt")).unwrap();
    let g = curve.table();
    assert!(g[20..=235].windows(2).all(|w| w[1] > w[0]));
    let truth = |z: f64| 2.2 * (z / 127.0).ln();
    assert!((g[200] - g[127] - truth(200.0)).abs() < 0.1);
}

#[test]
fn plan_writes_one_row_per_candidate() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&specula(dir.path(), &["gen-scene", "plate", "--out", "."])), 0);
    let out = specula(dir.path(), &["plan", "plate.toml", "--seed", "3"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "candidate_id,gain,hypothesis_0,hypothesis_1,hypothesis_2,hypothesis_3,hypothesis_4"
    );
    assert_eq!(lines.count(), 32);
}

#[test]
fn run_rerun_from_manifest_and_eval() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(code(&specula(p, &["gen-scene", "plate", "--out", ".", "--seeds", "2"])), 0);
    let first = specula(p, &["run", "plate.toml"]);
    assert_eq!(code(&first), 0, "{}", stderr(&first));
    assert!(stdout(&first).lines().any(|l| l.starts_with("nbv")));
    let results = p.join("results/plate");
    for f in ["results.csv", "summary.csv", "timings.csv", "manifest.json", "depth/nbv-s1.png"] {
        assert!(results.join(f).is_file(), "{f}");
    }

    let again = specula(p, &["run", "--manifest", "results/plate/manifest.json", "--out", "again"]);
    assert_eq!(code(&again), 0);
    assert_eq!(
        std::fs::read(results.join("results.csv")).unwrap(),
        std::fs::read(p.join("again/results.csv")).unwrap()
    );

    assert_eq!(code(&specula(p, &["simulate", "plate.toml", "--out", "cap"])), 0);
    std::fs::write(
        p.join("poses.toml"),
        "[[object]]\nid = \"plate\"\nmesh = \"plate.obj\"\ngt = {}\nestimate = { translation_mm = [3.0, 4.0, 0.0] }\n",
    )
    .unwrap();
    let eval = specula(
        p,
        &["eval", "--gt", "cap/gt_depth.png", "--before", "cap/depth.png", "--after", "cap/gt_depth.png", "--poses", "poses.toml"],
    );
    assert_eq!(code(&eval), 0, "{}", stderr(&eval));
    assert_eq!(stdout(&eval), "object_id,completion_pct,add_mm,correct\nplate,100.0,5.0,true\n");
}
