//! Camera response: recovery of the inverse log response `g(Z) = ln f⁻¹(Z)`
//! from an exposure stack, and the two conversions between radiance and
//! 8-bit intensity.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::io::read_intensity_png;
use crate::geometry::IntensityImage;

pub const LEVELS: usize = 256;

/// Tabulated inverse log response.
#[derive(Clone, Debug, PartialEq)]
pub struct ResponseCurve {
    g: Vec<f64>,
    z_min: u8,
    z_max: u8,
}

impl ResponseCurve {
    /// Builds a curve from a 256-entry table. The table is shifted so that
    /// `g[mid] = 0` and must be strictly increasing on `[z_min, z_max]`.
    pub fn from_table(mut g: Vec<f64>, z_min: u8, z_max: u8) -> Result<Self> {
        if g.len() != LEVELS {
            return Err(Error::InvalidArgument(format!("response table needs {LEVELS} entries, got {}", g.len())));
        }
        if z_max < z_min + 2 {
            return Err(Error::InvalidArgument(format!("bad intensity bounds [{z_min}, {z_max}]")));
        }
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("response table has non-finite entries".into()));
        }
        let violations = count_violations(&g[z_min as usize..=z_max as usize]);
        if violations > 0 {
            return Err(Error::NonMonotoneResponse { violations });
        }
        let mid = g[mid_level(z_min, z_max)];
        g.iter_mut().for_each(|x| *x -= mid);
        Ok(Self { g, z_min, z_max })
    }

    /// `f(X) = 255·(X/X_sat)^(1/γ)`; entry 0 (where `ln f⁻¹` diverges) is
    /// linearly extrapolated from entries 1 and 2.
    pub fn gamma(gamma: f64, x_sat: f64) -> Result<Self> {
        if !(gamma > 0.0 && x_sat > 0.0) {
            return Err(Error::InvalidArgument("gamma and x_sat must be positive".into()));
        }
        Self::from_inverse(|z| x_sat * (z / 255.0).powf(gamma))
    }

    /// Linear response `f(X) = 255·X/X_sat`.
    pub fn linear(x_sat: f64) -> Result<Self> {
        Self::gamma(1.0, x_sat)
    }

    fn from_inverse(f_inv: impl Fn(f64) -> f64) -> Result<Self> {
        let mut g: Vec<f64> = (0..LEVELS).map(|z| f_inv(z as f64).ln()).collect();
        g[0] = 2.0 * g[1] - g[2];
        Self::from_table(g, 0, 255)
    }

    pub fn table(&self) -> &[f64] {
        &self.g
    }

    pub fn z_min(&self) -> u8 {
        self.z_min
    }

    pub fn z_max(&self) -> u8 {
        self.z_max
    }

    pub fn mid(&self) -> usize {
        mid_level(self.z_min, self.z_max)
    }

    /// Continuous intensity for radiance `e` at exposure `dt`: piecewise
    /// linear inverse of the table, floored at `z_min`. Above `z_max` the
    /// last segment is extrapolated, so values > 255 flag over-exposure.
    pub fn intensity_continuous(&self, e: f64, dt: f64) -> f64 {
        let (lo, hi) = (self.z_min as usize, self.z_max as usize);
        if !(e > 0.0) {
            return lo as f64;
        }
        let x = e.ln() + dt.ln();
        if x <= self.g[lo] {
            return lo as f64;
        }
        if x >= self.g[hi] {
            let slope = self.g[hi] - self.g[hi - 1];
            return hi as f64 + (x - self.g[hi]) / slope;
        }
        // First level whose g exceeds x.
        let upper = lo + self.g[lo..=hi].partition_point(|&v| v <= x);
        let z0 = upper - 1;
        z0 as f64 + (x - self.g[z0]) / (self.g[upper] - self.g[z0])
    }

    /// Quantized intensity: saturates at `z_max`, floors at `z_min`.
    pub fn intensity_from_radiance(&self, e: f64, dt: f64) -> u8 {
        self.intensity_continuous(e, dt)
            .round()
            .clamp(self.z_min as f64, self.z_max as f64) as u8
    }

    /// `exp(g[Z] − ln dt)`, or `None` for saturated or floor pixels.
    pub fn radiance_from_intensity(&self, z: u8, dt: f64) -> Option<f64> {
        if z <= self.z_min || z >= self.z_max {
            return None;
        }
        Some((self.g[z as usize] - dt.ln()).exp())
    }

    /// Plain-text form: a comment header, then one `z g[z]` line per level.
    pub fn to_text(&self) -> String {
        let mut s = format!("# inverse log response g(z) = ln f^-1(z)\n# z_min {} z_max {}\n", self.z_min, self.z_max);
        for (z, g) in self.g.iter().enumerate() {
            writeln!(s, "{z} {g:.17e}").expect("write to string");
        }
        s
    }

    pub fn from_text(text: &str) -> std::result::Result<Self, String> {
        let mut bounds = (0u8, 255u8);
        let mut g = vec![f64::NAN; LEVELS];
        let mut seen = 0;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if let Some(comment) = line.strip_prefix('#') {
                let toks: Vec<&str> = comment.split_whitespace().collect();
                if let ["z_min", a, "z_max", b] = toks.as_slice() {
                    bounds = (
                        a.parse().map_err(|e| format!("line {}: {e}", lineno + 1))?,
                        b.parse().map_err(|e| format!("line {}: {e}", lineno + 1))?,
                    );
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let (Some(z), Some(v), None) = (it.next(), it.next(), it.next()) else {
                return Err(format!("line {}: expected `z g`", lineno + 1));
            };
            let z: usize = z.parse().map_err(|e| format!("line {}: {e}", lineno + 1))?;
            let v: f64 = v.parse().map_err(|e| format!("line {}: {e}", lineno + 1))?;
            if z >= LEVELS {
                return Err(format!("line {}: level {z} out of range", lineno + 1));
            }
            g[z] = v;
            seen += 1;
        }
        if seen != LEVELS || g.iter().any(|v| v.is_nan()) {
            return Err(format!("expected {LEVELS} levels, found {seen}"));
        }
        Self::from_table(g, bounds.0, bounds.1).map_err(|e| e.to_string())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text).map_err(|m| Error::parse(path, m))
    }
}

fn mid_level(z_min: u8, z_max: u8) -> usize {
    (z_min as usize + z_max as usize) / 2
}

fn count_violations(g: &[f64]) -> usize {
    g.windows(2).filter(|w| w[1] <= w[0]).count()
}

/// Images of one static scene at several known exposure times (ms).
#[derive(Clone, Debug)]
pub struct ExposureStack {
    images: Vec<IntensityImage>,
    exposure_times: Vec<f64>,
}

impl ExposureStack {
    pub fn new(images: Vec<IntensityImage>, exposure_times: Vec<f64>) -> Result<Self> {
        if images.len() < 2 {
            return Err(Error::InvalidArgument(format!("exposure stack needs at least 2 images, got {}", images.len())));
        }
        if images.len() != exposure_times.len() {
            return Err(Error::InvalidArgument(format!(
                "{} images but {} exposure times",
                images.len(),
                exposure_times.len()
            )));
        }
        for img in &images[1..] {
            images[0].ensure_same_dims(img)?;
        }
        for (i, &t) in exposure_times.iter().enumerate() {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidArgument(format!("exposure time {i} is not positive: {t}")));
            }
            if exposure_times[..i].contains(&t) {
                return Err(Error::InvalidArgument(format!("duplicate exposure time {t} ms")));
            }
        }
        Ok(Self {
            images,
            exposure_times,
        })
    }

    pub fn images(&self) -> &[IntensityImage] {
        &self.images
    }

    pub fn exposure_times(&self) -> &[f64] {
        &self.exposure_times
    }

    /// Loads a TOML manifest of `[[exposure]]` tables with `image` (path,
    /// relative to the manifest) and `time_ms`.
    pub fn load_manifest(path: impl AsRef<Path>) -> Result<Self> {
        #[derive(Deserialize)]
        struct Entry {
            image: PathBuf,
            time_ms: f64,
        }
        #[derive(Deserialize)]
        struct Manifest {
            exposure: Vec<Entry>,
        }
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: Manifest = toml::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut images = Vec::new();
        let mut times = Vec::new();
        for e in manifest.exposure {
            images.push(read_intensity_png(base.join(&e.image))?);
            times.push(e.time_ms);
        }
        Self::new(images, times)
    }
}

/// Knobs of the response fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseFitConfig {
    pub lambda: f64,
    pub samples: usize,
    /// Intensity bins used to stratify pixel selection.
    pub bins: usize,
    pub z_min: u8,
    pub z_max: u8,
    /// Widest run of unobserved intensity levels tolerated.
    pub max_gap: usize,
}

impl Default for ResponseFitConfig {
    fn default() -> Self {
        Self {
            lambda: 100.0,
            samples: 256,
            bins: 32,
            z_min: 0,
            z_max: 255,
            max_gap: 48,
        }
    }
}

/// Recovers `g` with smoothness weight `lambda` from `samples` pixels.
pub fn recover_response(stack: &ExposureStack, lambda: f64, samples: usize) -> Result<ResponseCurve> {
    recover_response_with(
        stack,
        &ResponseFitConfig {
            lambda,
            samples,
            ..Default::default()
        },
    )
}

pub fn recover_response_with(stack: &ExposureStack, cfg: &ResponseFitConfig) -> Result<ResponseCurve> {
    if cfg.samples < 50 {
        return Err(Error::InvalidArgument(format!("need at least 50 sample pixels, got {}", cfg.samples)));
    }
    if !(cfg.lambda >= 0.0) || cfg.bins == 0 || cfg.z_max < cfg.z_min + 2 {
        return Err(Error::InvalidArgument("bad response fit configuration".into()));
    }
    let (z_lo, z_hi) = (cfg.z_min as usize, cfg.z_max as usize);
    let mid = mid_level(cfg.z_min, cfg.z_max);
    let weight = |z: usize| -> f64 {
        if z <= mid {
            z.saturating_sub(z_lo) as f64
        } else {
            z_hi.saturating_sub(z) as f64
        }
    };

    let pixels = stratified_pixels(stack, cfg);
    let ln_dt: Vec<f64> = stack.exposure_times.iter().map(|t| t.ln()).collect();
    // Observations per sample, dropping samples with no weighted observation.
    let mut obs: Vec<Vec<(usize, f64, f64)>> = Vec::with_capacity(pixels.len());
    let mut seen = [false; LEVELS];
    for &p in &pixels {
        let row: Vec<(usize, f64, f64)> = stack
            .images
            .iter()
            .zip(&ln_dt)
            .filter_map(|(img, &ldt)| {
                let z = img.data()[p] as usize;
                let w = weight(z);
                (w > 0.0).then_some((z, w, ldt))
            })
            .collect();
        if !row.is_empty() {
            for &(z, _, _) in &row {
                seen[z] = true;
            }
            obs.push(row);
        }
    }
    check_coverage(&seen, z_lo + 1, z_hi - 1, cfg.max_gap)?;

    // Unknowns: g[z] for z != mid (g[mid] = 0 is eliminated), then ln E_i.
    // The ln E_i block of the normal equations is diagonal, so it is folded
    // into the g block via the Schur complement.
    let col = |z: usize| -> Option<usize> {
        match z.cmp(&mid) {
            std::cmp::Ordering::Less => Some(z),
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Greater => Some(z - 1),
        }
    };
    let n = LEVELS - 1;
    let mut h = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for row in &obs {
        // Equation: w (g[z] − lnE) = w ln dt.
        let hee: f64 = row.iter().map(|&(_, w, _)| w * w).sum();
        let be: f64 = -row.iter().map(|&(_, w, l)| w * w * l).sum::<f64>();
        // h_ge[z] = −w², b_g[z] = w² ln dt
        let mut hge: Vec<(usize, f64)> = Vec::with_capacity(row.len());
        for &(z, w, l) in row {
            if let Some(c) = col(z) {
                h[(c, c)] += w * w;
                rhs[c] += w * w * l;
                hge.push((c, -w * w));
            }
        }
        for &(a, ha) in &hge {
            rhs[a] -= ha * be / hee;
            for &(b, hb) in &hge {
                h[(a, b)] -= ha * hb / hee;
            }
        }
    }
    for z in z_lo + 1..z_hi {
        let s = cfg.lambda * weight(z);
        let terms = [(z - 1, s), (z, -2.0 * s), (z + 1, s)];
        for &(za, ca) in &terms {
            let Some(a) = col(za) else { continue };
            for &(zb, cb) in &terms {
                if let Some(b) = col(zb) {
                    h[(a, b)] += ca * cb;
                }
            }
        }
    }
    // Levels outside [z_min, z_max] are pinned by a weak identity so the
    // system stays regular; they are overwritten below.
    for z in (0..z_lo).chain(z_hi + 1..LEVELS) {
        if let Some(c) = col(z) {
            h[(c, c)] += 1.0;
        }
    }

    let sol = h
        .clone()
        .cholesky()
        .map(|c| c.solve(&rhs))
        .or_else(|| h.lu().solve(&rhs))
        .ok_or_else(|| Error::SingularResponse("normal equations are singular".into()))?;
    let mut g = vec![0.0; LEVELS];
    for (z, gz) in g.iter_mut().enumerate() {
        if let Some(c) = col(z) {
            *gz = sol[c];
        }
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularResponse("solution is not finite".into()));
    }
    // Levels outside the valid band continue the nearest end slope.
    for z in (0..z_lo).rev() {
        g[z] = g[z + 1] - (g[z_lo + 1] - g[z_lo]);
    }
    for z in z_hi + 1..LEVELS {
        g[z] = g[z - 1] + (g[z_hi] - g[z_hi - 1]);
    }

    let violations = count_violations(&g[z_lo..=z_hi]);
    if violations > 0 {
        let allowed = (LEVELS as f64 * 0.005).floor() as usize;
        if violations > allowed.max(1) {
            return Err(Error::NonMonotoneResponse { violations });
        }
        log::warn!("response curve had {violations} non-increasing steps; applying isotonic fix");
        let fixed = isotonic_increasing(&g[z_lo..=z_hi]);
        g[z_lo..=z_hi].copy_from_slice(&fixed);
    }
    ResponseCurve::from_table(g, cfg.z_min, cfg.z_max)
}

/// Pixels chosen round-robin across intensity bins of the middle exposure.
fn stratified_pixels(stack: &ExposureStack, cfg: &ResponseFitConfig) -> Vec<usize> {
    let mut order: Vec<usize> = (0..stack.exposure_times.len()).collect();
    order.sort_by(|&a, &b| stack.exposure_times[a].total_cmp(&stack.exposure_times[b]));
    let reference = &stack.images[order[order.len() / 2]];
    let mut bins: Vec<Vec<usize>> = vec![Vec::new(); cfg.bins];
    for (i, &z) in reference.data().iter().enumerate() {
        bins[(z as usize * cfg.bins / LEVELS).min(cfg.bins - 1)].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for b in &mut bins {
        b.shuffle(&mut rng);
    }
    let mut picked = Vec::with_capacity(cfg.samples);
    let mut round = 0;
    while picked.len() < cfg.samples {
        let before = picked.len();
        for b in &bins {
            if picked.len() == cfg.samples {
                break;
            }
            if let Some(&p) = b.get(round) {
                picked.push(p);
            }
        }
        if picked.len() == before {
            break;
        }
        round += 1;
    }
    picked
}

fn check_coverage(seen: &[bool; LEVELS], lo: usize, hi: usize, max_gap: usize) -> Result<()> {
    let mut run_start = None;
    let mut worst: Option<(usize, usize)> = None;
    for z in lo..=hi + 1 {
        let missing = z <= hi && !seen[z];
        match (missing, run_start) {
            (true, None) => run_start = Some(z),
            (false, Some(s)) => {
                if worst.is_none_or(|(a, b)| z - s > b - a + 1) {
                    worst = Some((s, z - 1));
                }
                run_start = None;
            }
            _ => {}
        }
    }
    match worst {
        Some((a, b)) if b - a + 1 > max_gap => Err(Error::SingularResponse(format!(
            "no sampled pixel has intensity in [{a}, {b}]; add exposures or a scene with more radiance range"
        ))),
        _ => Ok(()),
    }
}

/// Pool-adjacent-violators projection onto nondecreasing sequences, then a
/// tiny ramp so ties become strictly increasing.
fn isotonic_increasing(y: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::new();
    for &v in y {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (m2, n2) = blocks[blocks.len() - 1];
            let (m1, n1) = blocks[blocks.len() - 2];
            if m1 < m2 {
                break;
            }
            blocks.pop();
            let n = n1 + n2;
            *blocks.last_mut().expect("nonempty") = ((m1 * n1 as f64 + m2 * n2 as f64) / n as f64, n);
        }
    }
    let mut out: Vec<f64> = blocks.iter().flat_map(|&(m, n)| std::iter::repeat_n(m, n)).collect();
    let span = (out[out.len() - 1] - out[0]).abs().max(1.0);
    let step = span * 1e-9;
    for i in 1..out.len() {
        if out[i] <= out[i - 1] {
            out[i] = out[i - 1] + step;
        }
    }
    out
}
