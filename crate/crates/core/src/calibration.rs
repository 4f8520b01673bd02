//! Two-stage Phong parameter estimation from a white-pattern calibration
//! shot with known depth and normals.

use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DepthMap, Grid, IntensityImage, NormalMap, RadianceMap, StereoRig};
use crate::reflectance::{Illumination, PhongMaterial, ShadingFrame};
use crate::response::ResponseCurve;

/// Minimum samples on each side of the lobe.
pub const MIN_SAMPLES: usize = 10;
/// Specular subset uses `cos α > SPECULAR_COS_CUTOFF`.
pub const SPECULAR_COS_CUTOFF: f64 = 0.05;
/// Fraction dropped by the single trimming pass.
pub const TRIM_FRACTION: f64 = 0.05;
/// `Q/E` below this is treated as no specular signal (cancellation noise).
const SIGNAL_FLOOR: f64 = 1e-9;

/// One usable calibration pixel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSample {
    pub e_calib: f64,
    pub cos_theta: f64,
    pub cos_alpha: f64,
    /// Projector intensity reaching the point.
    pub l_in: f64,
    pub pixel: (usize, usize),
}

/// Samples from a white-pattern intensity image: radiance is recovered
/// through the response curve, saturated and floor pixels are skipped.
#[allow(clippy::too_many_arguments)]
pub fn build_samples(
    image: &IntensityImage,
    dt: f64,
    depth: &DepthMap,
    normals: &NormalMap,
    rig: &StereoRig,
    curve: &ResponseCurve,
    mask: &Grid<bool>,
) -> Result<Vec<CalibrationSample>> {
    image.ensure_same_dims(depth)?;
    let mut usable = 0usize;
    let mut saturated = 0usize;
    let radiance = RadianceMap::from_fn(image.width(), image.height(), |u, v| {
        if !*mask.at(u, v) || !depth.is_valid(u, v) {
            return f64::NAN;
        }
        usable += 1;
        let z = *image.at(u, v);
        if z >= curve.z_max() {
            saturated += 1;
        }
        curve.radiance_from_intensity(z, dt).unwrap_or(f64::NAN)
    });
    if usable > 0 && saturated == usable {
        return Err(Error::CalibrationSaturated);
    }
    samples_from_radiance(&radiance, depth, normals, rig, mask)
}

/// Samples from an already recovered radiance map (`NaN` = unusable).
pub fn samples_from_radiance(
    radiance: &RadianceMap,
    depth: &DepthMap,
    normals: &NormalMap,
    rig: &StereoRig,
    mask: &Grid<bool>,
) -> Result<Vec<CalibrationSample>> {
    radiance.ensure_same_dims(depth)?;
    radiance.ensure_same_dims(normals)?;
    radiance.ensure_same_dims(mask)?;
    if !mask.data().iter().any(|&m| m) {
        return Err(Error::EmptyMask);
    }
    let cam = &rig.left;
    let eye = cam.center();
    let light = Illumination::from_rig(rig);
    let samples: Vec<CalibrationSample> = (0..radiance.len())
        .into_par_iter()
        .filter_map(|i| {
            let (u, v) = radiance.coords(i);
            if !mask.data()[i] {
                return None;
            }
            let e = radiance.value(u, v)?;
            let d = depth.value(u, v)?;
            let n = normals.normal(u, v)?;
            if !(e > 0.0) {
                return None;
            }
            let p = cam.backproject(u, v, d);
            let frame = ShadingFrame::looking_at(p, n.normalize(), &light.projector, &eye);
            let cos_theta = frame.cos_theta();
            if cos_theta <= 0.0 {
                return None;
            }
            Some(CalibrationSample {
                e_calib: e,
                cos_theta: cos_theta.min(1.0),
                cos_alpha: frame.cos_alpha().clamp(-1.0, 1.0),
                l_in: light.incident(&p),
                pixel: (u, v),
            })
        })
        .collect();
    if samples.is_empty() {
        return Err(Error::EmptyMask);
    }
    Ok(samples)
}

/// Least squares `E = k_d·L_in·cos θ` over the back-lobe subset (`cos α < 0`).
pub fn fit_diffuse(samples: &[CalibrationSample]) -> Result<f64> {
    let back: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.cos_alpha < 0.0)
        .map(|s| (s.l_in * s.cos_theta, s.e_calib))
        .collect();
    if back.len() < MIN_SAMPLES {
        return Err(Error::TooFewDiffuseSamples {
            found: back.len(),
            required: MIN_SAMPLES,
        });
    }
    let fit = |pts: &[(f64, f64)]| {
        let sxx: f64 = pts.iter().map(|(x, _)| x * x).sum();
        let sxy: f64 = pts.iter().map(|(x, y)| x * y).sum();
        if sxx > 0.0 {
            sxy / sxx
        } else {
            0.0
        }
    };
    let k = fit(&back);
    let kept = trim(&back, |&(x, y)| (y - k * x).abs());
    Ok(fit(&kept).max(0.0))
}

/// Specular fit result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecularFit {
    pub k_s: f64,
    pub n: f64,
    /// Samples in the lobe subset.
    pub candidates: usize,
    /// Of those, samples with usable `Q > 0` in the log-linear stage.
    pub used: usize,
    pub warnings: Vec<String>,
}

/// Fits `Q = k_s·L_in·cos^n α` with `Q = E − k_d·L_in·cos θ`. The log-linear
/// solution is refined by Gauss-Newton on the relative residual in linear
/// space, which stays unbiased when `Q` is small next to the noise.
pub fn fit_specular(samples: &[CalibrationSample], k_d: f64) -> Result<SpecularFit> {
    let lobe: Vec<&CalibrationSample> = samples.iter().filter(|s| s.cos_alpha > SPECULAR_COS_CUTOFF).collect();
    if lobe.len() < MIN_SAMPLES {
        return Err(Error::NoSpecularSignal(format!(
            "only {} samples with cos α > {SPECULAR_COS_CUTOFF}",
            lobe.len()
        )));
    }
    let q = |s: &CalibrationSample| s.e_calib - k_d * s.l_in * s.cos_theta;
    // Log-linear points: (ln cos α, ln(Q/L_in), weight).
    let pts: Vec<(f64, f64, f64)> = lobe
        .iter()
        .filter_map(|s| {
            let qi = q(s);
            let rel = qi / s.e_calib;
            (rel > SIGNAL_FLOOR).then(|| (s.cos_alpha.ln(), (qi / s.l_in).ln(), rel * rel))
        })
        .collect();
    if pts.len() < MIN_SAMPLES {
        return Err(Error::NoSpecularSignal(format!(
            "{} of {} lobe samples have positive residual Q",
            pts.len(),
            lobe.len()
        )));
    }
    let mut warnings = Vec::new();
    let dropped = lobe.len() - pts.len();
    if dropped * 5 >= lobe.len() * 4 {
        warnings.push(format!(
            "{dropped} of {} lobe samples dropped for nonpositive Q",
            lobe.len()
        ));
    }
    let (ln_ks, n0) = weighted_line(&pts).ok_or_else(|| Error::NoSpecularSignal("degenerate cos α spread".into()))?;
    let first = trim(&pts, |&(x, y, _)| (y - ln_ks - n0 * x).abs());
    let (ln_ks, n0) = weighted_line(&first).unwrap_or((ln_ks, n0));

    let data: Vec<(f64, f64, f64, f64)> = lobe.iter().map(|s| (s.cos_alpha.ln(), s.l_in, q(s), s.e_calib)).collect();
    let (a, n) = refine(&data, ln_ks, n0);
    let resid = |&(lc, l, qi, e): &(f64, f64, f64, f64)| ((qi - a.exp() * l * (n * lc).exp()) / e).abs();
    let kept = trim(&data, resid);
    let (a, n) = refine(&kept, a, n);
    if !(n > 0.0) || !a.is_finite() {
        return Err(Error::NoSpecularSignal(format!("fit diverged (ln k_s = {a}, n = {n})")));
    }
    Ok(SpecularFit {
        k_s: a.exp(),
        n,
        candidates: lobe.len(),
        used: pts.len(),
        warnings,
    })
}

/// Closed-form `(ln k_s, n)` through weighted `(ln cos α, ln Q)` points.
pub fn log_linear_fit(ln_cos_alpha: &[f64], ln_q: &[f64]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64, f64)> = ln_cos_alpha.iter().zip(ln_q).map(|(&x, &y)| (x, y, 1.0)).collect();
    weighted_line(&pts)
}

fn weighted_line(pts: &[(f64, f64, f64)]) -> Option<(f64, f64)> {
    let sw: f64 = pts.iter().map(|p| p.2).sum();
    if !(sw > 0.0) {
        return None;
    }
    let mx = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let my = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > 1e-300) {
        return None;
    }
    let slope = sxy / sxx;
    Some((my - slope * mx, slope))
}

/// Levenberg-Marquardt on `Σ ((Q − e^a·L·cos^n α) / E)²`.
fn refine(data: &[(f64, f64, f64, f64)], mut a: f64, mut n: f64) -> (f64, f64) {
    let cost = |a: f64, n: f64| -> f64 {
        data.iter()
            .map(|&(lc, l, q, e)| ((q - (a + n * lc).exp() * l) / e).powi(2))
            .sum()
    };
    let mut current = cost(a, n);
    let mut mu = 1e-3;
    for _ in 0..100 {
        let mut jtj = Matrix2::zeros();
        let mut jtr = Vector2::zeros();
        for &(lc, l, q, e) in data {
            let m = (a + n * lc).exp() * l;
            let r = (q - m) / e;
            let j = Vector2::new(m / e, m * lc / e);
            jtj += j * j.transpose();
            jtr += j * r;
        }
        let mut improved = false;
        for _ in 0..20 {
            let damped = jtj + Matrix2::from_diagonal(&jtj.diagonal()) * mu;
            let Some(step) = damped.try_inverse().map(|inv| inv * jtr) else {
                mu *= 10.0;
                continue;
            };
            let (na, nn) = (a + step.x, n + step.y);
            let c = cost(na, nn);
            if c.is_finite() && c <= current {
                let done = step.norm() < 1e-12 * (1.0 + a.abs() + n.abs()) || current - c <= 1e-16 * current;
                a = na;
                n = nn;
                current = c;
                mu = (mu * 0.3).max(1e-12);
                improved = !done;
                break;
            }
            mu *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (a, n)
}

/// Keeps all but the worst `TRIM_FRACTION` by `key`.
fn trim<T: Copy>(items: &[T], key: impl Fn(&T) -> f64) -> Vec<T> {
    let drop = (items.len() as f64 * TRIM_FRACTION).floor() as usize;
    if drop == 0 {
        return items.to_vec();
    }
    let mut keyed: Vec<(f64, usize)> = items.iter().enumerate().map(|(i, t)| (key(t), i)).collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut keep: Vec<usize> = keyed[..items.len() - drop].iter().map(|&(_, i)| i).collect();
    keep.sort_unstable();
    keep.into_iter().map(|i| items[i]).collect()
}

/// Fitted material plus a goodness-of-fit summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub material: PhongMaterial,
    /// RMS of `(E_model − E)/E` over the held-out samples.
    pub holdout_rms_relative: f64,
    pub fit_samples: usize,
    pub holdout_samples: usize,
    pub warnings: Vec<String>,
}

/// Every fifth pixel on a diagonal lattice is held out, so the split does
/// not depend on sample order.
fn is_holdout(s: &CalibrationSample) -> bool {
    (s.pixel.0 + 2 * s.pixel.1).is_multiple_of(5)
}

/// Diffuse fit, then specular fit on the remaining signal, then a held-out
/// residual check. Missing specular signal yields `k_s = 0`.
pub fn calibrate_material(samples: &[CalibrationSample]) -> Result<CalibrationReport> {
    let (holdout, fit): (Vec<CalibrationSample>, Vec<CalibrationSample>) = samples.iter().partition(|s| is_holdout(s));
    let k_d = fit_diffuse(&fit)?;
    let mut warnings = Vec::new();
    let (k_s, n) = match fit_specular(&fit, k_d) {
        Ok(s) => {
            warnings.extend(s.warnings);
            (s.k_s, s.n)
        }
        Err(Error::NoSpecularSignal(msg)) => {
            warnings.push(format!("no specular signal ({msg}); using k_s = 0"));
            (0.0, 1.0)
        }
        Err(e) => return Err(e),
    };
    let material = PhongMaterial::new(k_d, k_s, n)?;
    let holdout_rms_relative = relative_rms(&material, &holdout);
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(CalibrationReport {
        material,
        holdout_rms_relative,
        fit_samples: fit.len(),
        holdout_samples: holdout.len(),
        warnings,
    })
}

/// Model radiance for one sample.
pub fn predict(mat: &PhongMaterial, s: &CalibrationSample) -> f64 {
    let spec = if s.cos_alpha > 0.0 { s.cos_alpha.powf(mat.n) } else { 0.0 };
    s.l_in * (mat.k_d * s.cos_theta + mat.k_s * spec)
}

pub fn relative_rms(mat: &PhongMaterial, samples: &[CalibrationSample]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let ss: f64 = samples.iter().map(|s| ((predict(mat, s) - s.e_calib) / s.e_calib).powi(2)).sum();
    (ss / samples.len() as f64).sqrt()
}
