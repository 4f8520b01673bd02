//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use specula::calibration::{calibrate_material, samples_from_radiance};
use specula::experiment::{preset_config, run_experiment, summarize, write_outputs, Manifest, PolicySummary, ResultRow};
use specula::geometry::{raycast_view, shapes, DepthMap, Grid, Intrinsics, RigLayout, RigidPose, SceneModel, TriangleMesh};
use specula::metrics::{add_error, depth_completion_pct};
use specula::planner::{
    synthetic_hypotheses, GainModel, HypothesisConfig, PoseHypothesis, PoseHypothesisSet, Policy, ViewpointCandidate,
};
use specula::reflectance::{render_radiance, Illumination, PhongMaterial};
use specula::response::{recover_response, ExposureStack, ResponseCurve};
use specula::sensor::{sensing_probability, SensingConfig};
use specula::IntensityImage;

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(name: &str, outcome: &Outcome, elapsed: Duration) -> bool {
    let tag = if outcome.pass { "PASS" } else { "FAIL" };
    println!("{tag} {name}: {} [{:.1}s]", outcome.detail, elapsed.as_secs_f64());
    outcome.pass
}

fn rel(got: f64, want: f64) -> f64 {
    (got / want - 1.0).abs()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

// ---------------------------------------------------------------------------
// Phong round trip

const CALIBRATION_MATERIALS: [(&str, f64, f64, f64); 3] =
    [("tube-fitting", 0.037, 0.74, 19.9), ("din-connector", 0.04, 0.82, 38.9), ("matte", 0.45, 0.02, 8.65)];

/// A calibration sphere filling most of a 160×120 view.
struct CalibrationRig {
    rig: specula::StereoRig,
    depth: DepthMap,
    normals: specula::NormalMap,
    mask: Grid<bool>,
    scene_mesh: Arc<TriangleMesh>,
    pose: RigidPose,
}

fn calibration_rig() -> CalibrationRig {
    let mesh = Arc::new(shapes::sphere(40.0, 5).unwrap());
    let pose = RigidPose::identity();
    let layout = RigLayout::new(Intrinsics::centered(160, 120, 260.0), 40.0);
    let eye = Point3::new(0.0, 0.0, 220.0);
    let rig = layout.place(&RigidPose::look_at(eye, Point3::origin(), Vector3::y()).unwrap()).unwrap();
    let scene = SceneModel::single(Arc::clone(&mesh), pose, PhongMaterial::MATTE);
    let cast = raycast_view(&scene, &rig.left);
    let mask = cast.depth.map(|d| !d.is_nan());
    CalibrationRig { rig, depth: cast.depth, normals: cast.normals, mask, scene_mesh: mesh, pose }
}

fn phong_round_trip() -> Outcome {
    let cal = calibration_rig();
    let light = Illumination::from_rig(&cal.rig);
    let mut worst_exact: f64 = 0.0;
    let mut worst_noisy: f64 = 0.0;
    let mut notes = Vec::new();
    for (name, k_d, k_s, n) in CALIBRATION_MATERIALS {
        let mat = PhongMaterial::new(k_d, k_s, n).unwrap();
        let scene = SceneModel::single(Arc::clone(&cal.scene_mesh), cal.pose, mat);
        let radiance = render_radiance(&scene, &cal.rig.left, &light);
        let samples = samples_from_radiance(&radiance, &cal.depth, &cal.normals, &cal.rig, &cal.mask).unwrap();
        let fit = calibrate_material(&samples).unwrap().material;
        let exact = rel(fit.k_d, k_d).max(rel(fit.k_s, k_s)).max(rel(fit.n, n));
        worst_exact = worst_exact.max(exact);

        let mut errs = [Vec::new(), Vec::new(), Vec::new()];
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let noise = Normal::new(0.0, 0.01).unwrap();
            let noisy = radiance.map(|&e| if e.is_nan() { e } else { e * (1.0 + noise.sample(&mut rng)) });
            let s = samples_from_radiance(&noisy, &cal.depth, &cal.normals, &cal.rig, &cal.mask).unwrap();
            let m = calibrate_material(&s).unwrap().material;
            errs[0].push(rel(m.k_d, k_d));
            errs[1].push(rel(m.k_s, k_s));
            errs[2].push(rel(m.n, n));
        }
        let med: Vec<f64> = errs.into_iter().map(median).collect();
        let noisy_worst = med.iter().copied().fold(0.0, f64::max);
        worst_noisy = worst_noisy.max(noisy_worst);
        notes.push(format!("{name} median k_d/k_s/n {:.4}/{:.4}/{:.4}", med[0], med[1], med[2]));
    }
    Outcome {
        pass: worst_exact <= 1e-3 && worst_noisy <= 0.05,
        detail: format!(
            "noise-free max rel err {worst_exact:.2e} (tol 1e-3); 1% noise worst median rel err {worst_noisy:.4} (tol 0.05); {}",
            notes.join("; ")
        ),
    }
}

// ---------------------------------------------------------------------------
// Response curve round trip

fn response_round_trip() -> Outcome {
    // Forward model written out independently: Z = round(255·X^(1/2.2)).
    let (w, h) = (64, 48);
    let radiance = |u: usize, v: usize| (-6.0 + 9.0 * (v * w + u) as f64 / (w * h) as f64).exp();
    let times: Vec<f64> = (0..8).map(|j| 0.25 * 2f64.powi(j)).collect();
    let images: Vec<IntensityImage> = times
        .iter()
        .map(|&dt| {
            IntensityImage::from_fn(w, h, |u, v| {
                let x: f64 = radiance(u, v) * dt;
                (255.0 * x.powf(1.0 / 2.2)).round().clamp(0.0, 255.0) as u8
            })
        })
        .collect();
    let stack = ExposureStack::new(images, times).unwrap();
    let fit = recover_response(&stack, 100.0, 256).unwrap();
    let truth = |z: usize| 2.2 * ((z as f64) / 255.0).ln();
    let anchor = truth(127);
    let dev = (20..=235)
        .map(|z| (fit.table()[z] - fit.table()[127] - (truth(z) - anchor)).abs())
        .fold(0.0, f64::max);
    Outcome { pass: dev <= 0.05, detail: format!("max |g - g_true| on [20, 235] = {dev:.4} (tol 0.05)") }
}

// ---------------------------------------------------------------------------
// Probability model

fn probability_model() -> Outcome {
    let cfg = SensingConfig::default();
    let mut problems = Vec::new();
    let p: Vec<f64> = (0..=255).map(|z| sensing_probability(z as f64, &cfg)).collect();
    for z in 0..=255usize {
        let expected = if (5..=255).contains(&z) { ((z as f64 - 255.0) / 100.0).exp() } else { 0.0 };
        if (p[z] - expected).abs() > 1e-15 {
            problems.push(format!("P({z}) = {} expected {expected}", p[z]));
        }
    }
    if !p[5..].windows(2).all(|w| w[1] > w[0]) {
        problems.push("not increasing on [5, 255]".into());
    }
    if sensing_probability(256.0, &cfg) != 0.0 || sensing_probability(-1.0, &cfg) != 0.0 {
        problems.push("nonzero outside [0, 255]".into());
    }
    let spot = (p[155] - (-1f64).exp()).abs();
    if spot > 1e-12 {
        problems.push(format!("P(155) off by {spot:e}"));
    }
    Outcome {
        pass: problems.is_empty(),
        detail: if problems.is_empty() {
            format!("256 levels checked, |P(155) - 1/e| = {spot:.1e} (tol 1e-12)")
        } else {
            problems.join("; ")
        },
    }
}

// ---------------------------------------------------------------------------
// Brute-force gain oracle

type Tri = [Point3<f64>; 3];

fn world_triangles(mesh: &TriangleMesh, pose: &RigidPose) -> Vec<Tri> {
    mesh.triangles()
        .iter()
        .map(|t| t.map(|i| pose.transform_point(&mesh.vertices()[i as usize])))
        .collect()
}

/// Möller–Trumbore; distance along a unit ray.
fn ray_triangle(o: &Point3<f64>, d: &Vector3<f64>, tri: &Tri) -> Option<f64> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = d.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-12 {
        return None;
    }
    let inv = 1.0 / det;
    let s = o - tri[0];
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = d.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    Some(e2.dot(&q) * inv)
}

fn first_hit(o: &Point3<f64>, d: &Vector3<f64>, tris: &[Tri]) -> Option<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for (i, t) in tris.iter().enumerate() {
        if let Some(s) = ray_triangle(o, d, t) {
            if s > 1e-9 && best.is_none_or(|(b, _)| s < b) {
                best = Some((s, i));
            }
        }
    }
    best
}

/// Anything strictly between the ends, ignoring 1e-3 mm + 1e-6·length at each.
fn blocked(a: &Point3<f64>, b: &Point3<f64>, tris: &[Tri]) -> bool {
    let len = (b - a).norm();
    let d = (b - a) / len;
    let eps = 1e-3 + 1e-6 * len;
    tris.iter()
        .any(|t| ray_triangle(a, &d, t).is_some_and(|s| s > eps && s < len - eps))
}

fn pixel_dir(cam: &specula::PinholeCamera, u: f64, v: f64) -> Vector3<f64> {
    let k = &cam.intrinsics;
    let local = Vector3::new((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
    cam.pose.rotation * local.normalize()
}

/// Intensity by piecewise-linear inversion of the log-response table.
fn oracle_intensity(g: &[f64], e: f64, dt: f64) -> f64 {
    if e <= 0.0 {
        return 0.0;
    }
    let x = e.ln() + dt.ln();
    if x <= g[0] {
        return 0.0;
    }
    if x > g[255] {
        return 256.0; // saturated
    }
    if x == g[255] {
        return 255.0;
    }
    let z0 = (0..255).rev().find(|&z| g[z] <= x).unwrap();
    z0 as f64 + (x - g[z0]) / (g[z0 + 1] - g[z0])
}

struct OracleCamera {
    center: Point3<f64>,
    cam: specula::PinholeCamera,
}

#[allow(clippy::too_many_arguments)]
fn oracle_camera_probability(
    p: &Point3<f64>,
    n: &Vector3<f64>,
    cam: &OracleCamera,
    projector: &Point3<f64>,
    mat: &PhongMaterial,
    g: &[f64],
    cfg: &SensingConfig,
    tris: &[Tri],
) -> f64 {
    // In the image?
    let c = cam.cam.pose.rotation.transpose() * (p - cam.center);
    if c.z <= 1e-9 {
        return 0.0;
    }
    let k = &cam.cam.intrinsics;
    let (x, y) = ((k.fx * c.x / c.z + k.cx).round(), (k.fy * c.y / c.z + k.cy).round());
    if x < 0.0 || y < 0.0 || x >= k.width as f64 || y >= k.height as f64 {
        return 0.0;
    }
    if blocked(&cam.center, p, tris) {
        return 0.0;
    }
    let to_cam = (cam.center - p).normalize();
    let to_light = (projector - p).normalize();
    let n = if n.dot(&to_cam) < 0.0 { -n } else { *n };
    let cos_theta = n.dot(&to_light);
    let e = if cos_theta <= 0.0 || blocked(p, projector, tris) {
        0.0
    } else {
        let r = 2.0 * cos_theta * n - to_light;
        let cos_alpha = r.dot(&to_cam);
        let spec = if cos_alpha > 0.0 { cos_alpha.min(1.0).powf(mat.n) } else { 0.0 };
        mat.k_d * cos_theta + mat.k_s * spec
    };
    let z = oracle_intensity(g, e, cfg.exposure_time);
    if z < cfg.z_min_valid || z > cfg.z_max_valid {
        0.0
    } else {
        ((z - cfg.z_max_valid) / cfg.sigma).exp()
    }
}

struct GainFixture {
    reference: specula::PinholeCamera,
    layout: RigLayout,
    hypotheses: Vec<PoseHypothesis>,
    curve: ResponseCurve,
    sensing: SensingConfig,
    candidate: ViewpointCandidate,
    missing: Vec<(usize, usize)>,
}

fn random_mesh(rng: &mut ChaCha8Rng) -> Arc<TriangleMesh> {
    Arc::new(match rng.random_range(0..3) {
        0 => shapes::sphere(rng.random_range(20.0..40.0), 1).unwrap(),
        1 => shapes::bent_plate(rng.random_range(50.0..90.0), 50.0, rng.random_range(70.0..150.0), 4).unwrap(),
        _ => shapes::plate(rng.random_range(40.0..90.0), rng.random_range(40.0..90.0), 3).unwrap(),
    })
}

fn random_view(rng: &mut ChaCha8Rng, radius: f64) -> RigidPose {
    let theta = rng.random_range(0.0..1.2f64);
    let phi = rng.random_range(0.0..std::f64::consts::TAU);
    let eye = Point3::new(radius * theta.sin() * phi.cos(), radius * theta.sin() * phi.sin(), radius * theta.cos());
    let target = Point3::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0), 0.0);
    RigidPose::look_at(eye, target, Vector3::y()).unwrap()
}

fn gain_fixture(seed: u64) -> GainFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layout = RigLayout::new(Intrinsics::centered(24, 18, 30.0), rng.random_range(20.0..60.0));
    let reference = layout.place(&random_view(&mut rng, 250.0)).unwrap().left;
    let mesh = random_mesh(&mut rng);
    let mat = PhongMaterial::new(rng.random_range(0.01..0.5), rng.random_range(0.0..0.9), rng.random_range(2.0..40.0)).unwrap();
    let gt = RigidPose::from_euler_deg(
        [rng.random_range(-40.0..40.0), rng.random_range(-40.0..40.0), rng.random_range(0.0..90.0)],
        Vector3::zeros(),
    );
    let cfg = HypothesisConfig {
        count: rng.random_range(1..=4),
        rot_std_deg: 5.0,
        trans_std_mm: 4.0,
        ..Default::default()
    };
    let set = synthetic_hypotheses(&gt, mesh, mat, &cfg, rng.random()).unwrap();
    let hypotheses = set.hypotheses().to_vec();
    let budget = 1000 / hypotheses.len();
    let mut pixels: Vec<(usize, usize)> = (0..18).flat_map(|v| (0..24).map(move |u| (u, v))).collect();
    // Fisher-Yates with the fixture rng keeps this independent of library helpers.
    for i in (1..pixels.len()).rev() {
        pixels.swap(i, rng.random_range(0..=i));
    }
    pixels.truncate(budget.min(rng.random_range(50..=432)));
    let sensing = SensingConfig {
        exposure_time: rng.random_range(0.5..6.0),
        ..Default::default()
    };
    GainFixture {
        reference,
        layout,
        hypotheses,
        curve: ResponseCurve::gamma(rng.random_range(1.6..2.6), 1.0).unwrap(),
        sensing,
        candidate: {
            let radius = rng.random_range(200.0..320.0);
            ViewpointCandidate { id: 0, pose: random_view(&mut rng, radius) }
        },
        missing: pixels,
    }
}

fn oracle_gain(f: &GainFixture) -> f64 {
    let g = f.curve.table();
    let rig = f.layout.place(&f.candidate.pose).unwrap();
    let projector = rig.projector_pose.transform_point(&Point3::origin());
    let cams = [
        OracleCamera { center: rig.left.pose.transform_point(&Point3::origin()), cam: rig.left },
        OracleCamera { center: rig.right.pose.transform_point(&Point3::origin()), cam: rig.right },
    ];
    let conf: Vec<f64> = f.hypotheses.iter().map(|h| h.confidence).collect();
    let max = conf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = conf.iter().map(|c| (c - max).exp()).sum();
    let ref_eye = f.reference.pose.transform_point(&Point3::origin());
    let mut total = 0.0;
    for (k, h) in f.hypotheses.iter().enumerate() {
        let w = (conf[k] - max).exp() / z;
        let tris = world_triangles(&h.mesh, &h.pose);
        let mut sum = 0.0;
        for &(u, v) in &f.missing {
            let d = pixel_dir(&f.reference, u as f64, v as f64);
            let Some((t, tri)) = first_hit(&ref_eye, &d, &tris) else { continue };
            let p = ref_eye + d * t;
            let tr = &tris[tri];
            let n = (tr[1] - tr[0]).cross(&(tr[2] - tr[0])).normalize();
            let mut pmin = f64::INFINITY;
            for cam in &cams {
                pmin = pmin.min(oracle_camera_probability(&p, &n, cam, &projector, &h.material, g, &f.sensing, &tris));
            }
            sum += pmin;
        }
        total += w * sum;
    }
    total
}

fn gain_oracle_equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut nonzero = 0;
    let mut max_terms = 0;
    for seed in 0..50u64 {
        let f = gain_fixture(seed);
        let set = PoseHypothesisSet::new(f.hypotheses.clone()).unwrap();
        let model = GainModel::new(f.reference, f.layout, &set, f.curve.clone(), f.sensing);
        let lib = model.viewpoint_gain(&f.candidate, &f.missing).unwrap().total;
        let oracle = oracle_gain(&f);
        worst = worst.max((lib - oracle).abs());
        if oracle > 0.0 {
            nonzero += 1;
        }
        max_terms = max_terms.max(f.hypotheses.len() * f.missing.len());
    }
    Outcome {
        pass: worst <= 1e-12 && nonzero >= 25,
        detail: format!(
            "50 fixtures ({nonzero} with nonzero gain, <= {max_terms} terms each), max |G - G_oracle| = {worst:.1e} (tol 1e-12)"
        ),
    }
}

// ---------------------------------------------------------------------------
// Softmax / argmax invariance

fn softmax_invariance() -> Outcome {
    let mut worst_w: f64 = 0.0;
    let mut flips = 0;
    for seed in 0..100u64 {
        let f = gain_fixture(1000 + seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift = rng.random_range(-500.0..500.0);
        let shifted: Vec<PoseHypothesis> = f
            .hypotheses
            .iter()
            .map(|h| PoseHypothesis { confidence: h.confidence + shift, ..h.clone() })
            .collect();
        let a = PoseHypothesisSet::new(f.hypotheses.clone()).unwrap();
        let b = PoseHypothesisSet::new(shifted).unwrap();
        for (x, y) in a.weights().iter().zip(b.weights()) {
            worst_w = worst_w.max((x - y).abs());
        }
        let candidates: Vec<ViewpointCandidate> = (0..6)
            .map(|id| {
                let radius = rng.random_range(200.0..320.0);
                ViewpointCandidate { id, pose: random_view(&mut rng, radius) }
            })
            .collect();
        let ma = GainModel::new(f.reference, f.layout, &a, f.curve.clone(), f.sensing);
        let mb = GainModel::new(f.reference, f.layout, &b, f.curve.clone(), f.sensing);
        let (ca, _) = ma.select_nbv(&candidates, &f.missing).unwrap();
        let (cb, _) = mb.select_nbv(&candidates, &f.missing).unwrap();
        if ca.id != cb.id {
            flips += 1;
        }
    }
    Outcome {
        pass: worst_w <= 1e-12 && flips == 0,
        detail: format!("100 fixtures, max weight change {worst_w:.1e} (tol 1e-12), selection changes {flips} (tol 0)"),
    }
}

// ---------------------------------------------------------------------------
// End-to-end experiments

fn summary_of(rows: &[ResultRow], policy: Policy) -> PolicySummary {
    summarize(rows).into_iter().find(|s| s.policy == policy).unwrap()
}

fn directional(plate: &[ResultRow], sphere: &[ResultRow]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, rows) in [("plate", plate), ("sphere", sphere)] {
        let nbv = summary_of(rows, Policy::Nbv).mean_completion_pct;
        let random = summary_of(rows, Policy::Random).mean_completion_pct;
        let far = summary_of(rows, Policy::MaxDistance).mean_completion_pct;
        pass &= nbv >= random && nbv >= far;
        if name == "plate" {
            pass &= nbv - random >= 5.0;
        }
        parts.push(format!("{name}: nbv {nbv:.2}% random {random:.2}% max-distance {far:.2}%"));
    }
    parts.push("need nbv >= both, plate nbv - random >= 5 pp".into());
    Outcome { pass, detail: parts.join("; ") }
}

fn pose_trend(plate: &[ResultRow]) -> Outcome {
    let nbv = summary_of(plate, Policy::Nbv);
    let single = nbv.mean_initial_add_mm.unwrap();
    let fused = nbv.mean_add_mm.unwrap();
    Outcome {
        pass: fused < single,
        detail: format!(
            "plate, {} seeds: mean ADD reference-only {single:.3} mm, 3-view fused {fused:.3} mm (need fused < reference)",
            nbv.runs
        ),
    }
}

// ---------------------------------------------------------------------------
// Metric correctness

fn metric_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst_c: f64 = 0.0;
    let mut worst_a: f64 = 0.0;
    for _ in 0..200 {
        let (w, h) = (rng.random_range(1..20), rng.random_range(1..20));
        let mut gen = |p_nan: f64| {
            DepthMap::from_fn(w, h, |_, _| {
                if rng.random::<f64>() < p_nan {
                    f64::NAN
                } else {
                    rng.random_range(100.0..104.0)
                }
            })
        };
        let before = gen(0.6);
        let after = gen(0.3);
        let gt = gen(0.1);
        let mask = Grid::from_fn(w, h, |u, v| before.at(u, v).is_nan() && (u + v) % 3 != 0);
        let lib = depth_completion_pct(&before, &after, &gt, 2.0, &mask).unwrap();
        let (mut total, mut ok) = (0.0, 0.0);
        for v in 0..h {
            for u in 0..w {
                if *mask.at(u, v) {
                    total += 1.0;
                    let (a, g) = (*after.at(u, v), *gt.at(u, v));
                    if !a.is_nan() && !g.is_nan() && (a - g).abs() < 2.0 {
                        ok += 1.0;
                    }
                }
            }
        }
        let oracle = if total == 0.0 { 100.0 } else { 100.0 * ok / total };
        worst_c = worst_c.max((lib - oracle).abs());

        let mesh = shapes::sphere(rng.random_range(5.0..50.0), 1).unwrap();
        let pose = |rng: &mut ChaCha8Rng| {
            RigidPose::from_euler_deg(
                [rng.random_range(-180.0..180.0), rng.random_range(-90.0..90.0), rng.random_range(-180.0..180.0)],
                Vector3::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0), rng.random_range(0.0..500.0)),
            )
        };
        let (a, b) = (pose(&mut rng), pose(&mut rng));
        let lib = add_error(&a, &b, &mesh);
        let mut sum = 0.0;
        for x in mesh.vertices() {
            let pa = a.rotation.matrix() * x.coords + a.translation;
            let pb = b.rotation.matrix() * x.coords + b.translation;
            sum += (pa - pb).norm();
        }
        worst_a = worst_a.max((lib - sum / mesh.vertices().len() as f64).abs());
    }
    // Pure translation by (3, 4, 0) on integer vertices: every distance is exactly 5.
    let cube = shapes::cuboid(Vector3::new(2.0, 4.0, 6.0)).unwrap();
    let t = RigidPose::from_translation(Vector3::new(3.0, 4.0, 0.0));
    let translation_add = add_error(&t, &RigidPose::identity(), &cube);
    Outcome {
        pass: worst_c <= 1e-9 && worst_a <= 1e-9 && translation_add == 5.0,
        detail: format!(
            "200 fixtures: completion max diff {worst_c:.1e}, ADD max diff {worst_a:.1e} (tol 1e-9); translation ADD {translation_add} (exact 5)"
        ),
    }
}

// ---------------------------------------------------------------------------
// Determinism

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = preset_config("plate").unwrap();
    cfg.seeds = vec![0, 1, 2];
    let first = run_experiment(&cfg, None).unwrap();
    let paths_a = write_outputs(&cfg, &first, &dir.path().join("a")).unwrap();
    let manifest = Manifest::load(&paths_a.manifest).unwrap();
    let again = run_experiment(&manifest.config, Some(&manifest.seeds)).unwrap();
    let paths_b = write_outputs(&manifest.config, &again, &dir.path().join("b")).unwrap();
    let a = std::fs::read(&paths_a.results).unwrap();
    let b = std::fs::read(&paths_b.results).unwrap();
    let sa = std::fs::read(&paths_a.summary).unwrap();
    let sb = std::fs::read(&paths_b.summary).unwrap();
    Outcome {
        pass: a == b && sa == sb && !a.is_empty(),
        detail: format!("rerun from manifest: results.csv {} bytes identical = {}, summary identical = {}", a.len(), a == b, sa == sb),
    }
}

fn main() {
    let mut all = true;
    let total = Instant::now();

    let t = Instant::now();
    let o = phong_round_trip();
    let el = t.elapsed();
    let o = Outcome { pass: o.pass && el < Duration::from_secs(30), detail: format!("{}; runtime tol 30s", o.detail) };
    all &= report("phong-round-trip", &o, el);

    let t = Instant::now();
    let o = response_round_trip();
    let el = t.elapsed();
    let o = Outcome { pass: o.pass && el < Duration::from_secs(10), detail: format!("{}; runtime tol 10s", o.detail) };
    all &= report("response-round-trip", &o, el);

    let t = Instant::now();
    all &= report("probability-model", &probability_model(), t.elapsed());

    let t = Instant::now();
    all &= report("gain-oracle-equivalence", &gain_oracle_equivalence(), t.elapsed());

    let t = Instant::now();
    all &= report("softmax-argmax-invariance", &softmax_invariance(), t.elapsed());

    let t = Instant::now();
    let plate = run_experiment(&preset_config("plate").unwrap(), None).unwrap().rows;
    let sphere = run_experiment(&preset_config("sphere").unwrap(), None).unwrap().rows;
    let el = t.elapsed();
    let d = directional(&plate, &sphere);
    let d = Outcome { pass: d.pass && el < Duration::from_secs(300), detail: format!("{}; runtime tol 300s", d.detail) };
    let directional_ok = report("end-to-end-directional", &d, el);
    all &= directional_ok;

    let pose = pose_trend(&plate);
    let pose_ok = report("pose-refinement-trend", &pose, Duration::ZERO);
    all &= pose_ok;

    let t = Instant::now();
    all &= report("metric-correctness", &metric_correctness(), t.elapsed());

    let t = Instant::now();
    all &= report("determinism", &determinism(), t.elapsed());

    // Full-scale benchmark numbers need real bins of parts and a physical
    // sensor; the two directional experiments above stand in for them.
    let sub = Outcome {
        pass: directional_ok && pose_ok,
        detail: "desk-scale stand-ins for completion and pose accuracy hold (end-to-end-directional, pose-refinement-trend)".into(),
    };
    all &= report("desk-scale-substitution", &sub, Duration::ZERO);

    println!("acceptance total {:.1}s", total.elapsed().as_secs_f64());
    if !all {
        std::process::exit(1);
    }
}
