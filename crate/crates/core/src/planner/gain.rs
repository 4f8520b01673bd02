use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::hypotheses::{hypothesis_maps, PoseHypothesisSet};
use crate::error::{Error, Result};
use crate::geometry::{DepthMap, NormalMap, PinholeCamera, RigLayout, RigidPose, SceneTracer, StereoRig};
use crate::reflectance::PhongMaterial;
use crate::response::ResponseCurve;
use crate::sensor::{point_probability, SensingConfig};

/// A place the whole rig can move to.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ViewpointCandidate {
    pub id: usize,
    /// Rig → world.
    pub pose: RigidPose,
}

/// Reference-view pixels still lacking depth.
pub type MissingPixelSet = Vec<(usize, usize)>;

/// One hypothesis prepared for scoring: its reference-view maps and a
/// tracer over its mesh for occlusion.
#[derive(Clone, Debug)]
pub struct HypothesisView {
    pub depth: DepthMap,
    pub normals: NormalMap,
    pub tracer: SceneTracer,
    pub material: PhongMaterial,
}

/// Expected depth-sensing probability of reference pixel `u` when the rig
/// sits at the candidate: the pixel is lifted with the hypothesis depth and
/// scored by the full reflectance → intensity → probability chain with the
/// stereo min rule. Zero when the hypothesis has no surface there, or the
/// point is outside either image or hidden by the hypothesis mesh.
#[allow(clippy::too_many_arguments)]
pub fn pixel_gain(
    u: (usize, usize),
    depth: &DepthMap,
    normals: &NormalMap,
    reference: &PinholeCamera,
    rig: &StereoRig,
    material: &PhongMaterial,
    curve: &ResponseCurve,
    cfg: &SensingConfig,
    occluders: &SceneTracer,
) -> f64 {
    let (Some(d), Some(n)) = (depth.value(u.0, u.1), normals.normal(u.0, u.1)) else {
        return 0.0;
    };
    let p = reference.backproject(u.0, u.1, d);
    point_probability(&p, &n, rig, material, curve, cfg, Some(occluders))
}

/// Everything needed to score candidates against a hypothesis set.
#[derive(Clone, Debug)]
pub struct GainModel {
    pub reference: PinholeCamera,
    pub layout: RigLayout,
    pub views: Vec<HypothesisView>,
    pub weights: Vec<f64>,
    pub curve: ResponseCurve,
    pub sensing: SensingConfig,
}

/// Gain of one candidate.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateGain {
    pub total: f64,
    /// Unweighted `Σ_u h` per hypothesis.
    pub per_hypothesis: Vec<f64>,
}

impl GainModel {
    pub fn new(
        reference: PinholeCamera,
        layout: RigLayout,
        hypotheses: &PoseHypothesisSet,
        curve: ResponseCurve,
        sensing: SensingConfig,
    ) -> Self {
        let views = hypotheses
            .hypotheses()
            .iter()
            .map(|h| {
                let maps = hypothesis_maps(h, &reference);
                HypothesisView {
                    depth: maps.depth,
                    normals: maps.normals,
                    tracer: SceneTracer::for_mesh(&h.mesh, &h.pose),
                    material: h.material,
                }
            })
            .collect();
        Self {
            reference,
            layout,
            views,
            weights: hypotheses.weights().to_vec(),
            curve,
            sensing,
        }
    }

    /// Pixels inside at least one hypothesis silhouette.
    pub fn in_any_silhouette(&self, u: usize, v: usize) -> bool {
        self.views.iter().any(|h| h.depth.is_valid(u, v))
    }

    /// `G_i = Σ_k w_k Σ_u h(u, Ď_k, Ň_k, v_i)`.
    pub fn viewpoint_gain(&self, candidate: &ViewpointCandidate, missing: &[(usize, usize)]) -> Result<CandidateGain> {
        let rig = self.layout.place(&candidate.pose)?;
        let per_hypothesis: Vec<f64> = self
            .views
            .iter()
            .map(|h| {
                missing
                    .iter()
                    .map(|&u| {
                        pixel_gain(
                            u,
                            &h.depth,
                            &h.normals,
                            &self.reference,
                            &rig,
                            &h.material,
                            &self.curve,
                            &self.sensing,
                            &h.tracer,
                        )
                    })
                    .sum()
            })
            .collect();
        let total = per_hypothesis.iter().zip(&self.weights).map(|(g, w)| g * w).sum();
        Ok(CandidateGain { total, per_hypothesis })
    }

    /// Scores every candidate (in parallel) and picks the best.
    pub fn select_nbv(
        &self,
        candidates: &[ViewpointCandidate],
        missing: &[(usize, usize)],
    ) -> Result<(ViewpointCandidate, GainReport)> {
        if candidates.is_empty() {
            return Err(Error::NoCandidates);
        }
        let gains: Vec<CandidateGain> = candidates
            .par_iter()
            .map(|c| self.viewpoint_gain(c, missing))
            .collect::<Result<_>>()?;
        let ids: Vec<usize> = candidates.iter().map(|c| c.id).collect();
        let totals: Vec<f64> = gains.iter().map(|g| g.total).collect();
        let best = argmax_lowest_id(&ids, &totals).expect("nonempty");
        let report = GainReport {
            ids,
            gains: totals,
            per_hypothesis: gains.into_iter().map(|g| g.per_hypothesis).collect(),
            chosen: candidates[best].id,
        };
        Ok((candidates[best], report))
    }
}

/// Gains of all scored candidates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainReport {
    pub ids: Vec<usize>,
    pub gains: Vec<f64>,
    pub per_hypothesis: Vec<Vec<f64>>,
    pub chosen: usize,
}

impl GainReport {
    pub fn chosen_gain(&self) -> f64 {
        let i = self.ids.iter().position(|&id| id == self.chosen).expect("chosen id present");
        self.gains[i]
    }
}

/// Position of the maximum; equal gains resolve to the lowest id.
pub fn argmax_lowest_id(ids: &[usize], gains: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for i in 0..gains.len() {
        best = match best {
            None => Some(i),
            Some(b) if gains[i] > gains[b] || (gains[i] == gains[b] && ids[i] < ids[b]) => Some(i),
            keep => keep,
        };
    }
    best
}
