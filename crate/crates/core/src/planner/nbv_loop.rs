use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use super::baselines::{baseline_max_distance, baseline_random};
use super::gain::{GainModel, GainReport, ViewpointCandidate};
use super::hypotheses::{synthetic_hypotheses, HypothesisConfig, PoseHypothesisSet};
use crate::error::{Error, Result};
use crate::fusion::{FusionConfig, FusionState};
use crate::geometry::{raycast_with, DepthMap, Grid, RigLayout, RigidPose, SceneModel, SceneTracer, TriangleMesh};
use crate::icp::{icp_refine, IcpConfig};
use crate::metrics::{completion_mask, depth_completion_pct, PoseEstimate, COMPLETION_TOLERANCE_MM};
use crate::reflectance::PhongMaterial;
use crate::response::ResponseCurve;
use crate::sensor::{simulate_capture_with, SensingConfig};

/// How the next view is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    Nbv,
    Random,
    MaxDistance,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::Nbv, Policy::Random, Policy::MaxDistance];

    pub fn as_str(&self) -> &'static str {
        match self {
            Policy::Nbv => "nbv",
            Policy::Random => "random",
            Policy::MaxDistance => "max-distance",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Policy::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown policy `{s}` (expected nbv, random or max-distance)"))
    }
}

/// Loop termination: best gain below `gain_threshold` (NBV only) or
/// `max_views` additional views taken.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StopConditions {
    pub gain_threshold: f64,
    pub max_views: usize,
}

impl Default for StopConditions {
    fn default() -> Self {
        Self {
            gain_threshold: 0.0,
            max_views: 3,
        }
    }
}

/// Everything fixed about one planning experiment.
#[derive(Clone, Debug)]
pub struct NbvProblem {
    /// Ground-truth world used for capturing.
    pub scene: SceneModel,
    /// The object being completed and its true pose.
    pub mesh: Arc<TriangleMesh>,
    pub gt_pose: RigidPose,
    /// Material the planner assumes (normally the calibrated one).
    pub planning_material: PhongMaterial,
    pub layout: RigLayout,
    /// Rig pose of the reference view.
    pub reference_pose: RigidPose,
    pub candidates: Vec<ViewpointCandidate>,
    pub curve: ResponseCurve,
    pub sensing: SensingConfig,
    pub hypotheses: HypothesisConfig,
    /// Draw fresh hypotheses every iteration instead of once.
    pub refresh_hypotheses: bool,
    pub fusion: FusionConfig,
    pub icp: IcpConfig,
    /// Run ICP after every iteration and record ADD.
    pub evaluate_pose: bool,
}

/// One row of a loop trajectory. Iteration 0 is the reference capture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub chosen: Option<usize>,
    /// Predicted gain of the chosen view (NaN for iteration 0).
    pub gain: f64,
    pub completion_pct: f64,
    pub missing_count: usize,
    pub add_mm: Option<f64>,
    pub correct: Option<bool>,
}

#[derive(Clone, Debug)]
pub struct NbvOutcome {
    pub policy: Policy,
    pub initial: DepthMap,
    pub fused: DepthMap,
    pub trajectory: Vec<IterationRecord>,
    /// Full gain reports of NBV planning steps.
    pub reports: Vec<GainReport>,
}

/// Mixes a run seed with a stream id.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    splitmix(seed ^ splitmix(stream))
}

const STREAM_REFERENCE: u64 = 0;
const STREAM_HYPOTHESES: u64 = 1;
const STREAM_VIEW: u64 = 1_000;
const STREAM_RANDOM: u64 = 2_000;
const STREAM_REFRESH: u64 = 3_000;

/// State shared by all policies for one seed: the reference capture,
/// ground truth in the reference view and the hypothesis set.
pub struct NbvSession<'a> {
    problem: &'a NbvProblem,
    seed: u64,
    tracer: SceneTracer,
    initial: DepthMap,
    gt_depth: DepthMap,
    mask: Grid<bool>,
    hypotheses: PoseHypothesisSet,
    model: GainModel,
}

impl<'a> NbvSession<'a> {
    pub fn prepare(problem: &'a NbvProblem, seed: u64) -> Result<Self> {
        if problem.candidates.is_empty() {
            return Err(Error::NoCandidates);
        }
        let tracer = SceneTracer::new(&problem.scene);
        let rig = problem.layout.place(&problem.reference_pose)?;
        let sensing = SensingConfig {
            seed: derive_seed(seed, STREAM_REFERENCE),
            ..problem.sensing
        };
        let capture = simulate_capture_with(&tracer, &problem.scene, &rig, &problem.curve, &sensing);
        let gt = raycast_with(&tracer, &rig.left);
        let object = gt.hits.map(|h| h.is_some());
        let mask = completion_mask(&capture.depth, &object)?;
        let hypotheses = Self::hypotheses(problem, derive_seed(seed, STREAM_HYPOTHESES))?;
        let model = GainModel::new(rig.left, problem.layout, &hypotheses, problem.curve.clone(), problem.sensing);
        Ok(Self {
            problem,
            seed,
            tracer,
            initial: capture.depth,
            gt_depth: gt.depth,
            mask,
            hypotheses,
            model,
        })
    }

    fn hypotheses(problem: &NbvProblem, seed: u64) -> Result<PoseHypothesisSet> {
        synthetic_hypotheses(
            &problem.gt_pose,
            Arc::clone(&problem.mesh),
            problem.planning_material,
            &problem.hypotheses,
            seed,
        )
    }

    pub fn initial(&self) -> &DepthMap {
        &self.initial
    }

    pub fn gt_depth(&self) -> &DepthMap {
        &self.gt_depth
    }

    pub fn hypothesis_set(&self) -> &PoseHypothesisSet {
        &self.hypotheses
    }

    pub fn gain_model(&self) -> &GainModel {
        &self.model
    }

    /// Reference pixels still missing and inside a hypothesis silhouette.
    pub fn missing_set(&self, model: &GainModel, fused: &DepthMap) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for v in 0..fused.height() {
            for u in 0..fused.width() {
                if !fused.is_valid(u, v) && model.in_any_silhouette(u, v) {
                    out.push((u, v));
                }
            }
        }
        out
    }

    fn pose_metrics(&self, state: &FusionState) -> (Option<f64>, Option<bool>) {
        if !self.problem.evaluate_pose {
            return (None, None);
        }
        let init = self.hypotheses.best().pose;
        let refined = icp_refine(&init, &self.problem.mesh, &state.fused_points(), &self.problem.icp);
        let est = PoseEstimate::evaluate(refined.pose, &self.problem.gt_pose, &self.problem.mesh);
        (Some(est.add_mm), Some(est.correct))
    }

    pub fn run(&self, policy: Policy, stop: &StopConditions) -> Result<NbvOutcome> {
        let p = self.problem;
        let mut state = FusionState::with_config(self.model.reference, self.initial.clone(), p.fusion)?;
        let mut pool = p.candidates.clone();
        let mut visited: Vec<Point3<f64>> = vec![p.reference_pose.origin()];
        let mut owned_model: Option<GainModel> = None;
        let mut missing = self.missing_set(&self.model, state.fused());
        let (add_mm, correct) = self.pose_metrics(&state);
        let mut trajectory = vec![IterationRecord {
            iteration: 0,
            chosen: None,
            gain: f64::NAN,
            completion_pct: self.completion(&state)?,
            missing_count: missing.len(),
            add_mm,
            correct,
        }];
        let mut reports = Vec::new();

        for iteration in 1..=stop.max_views {
            if pool.is_empty() {
                break;
            }
            let model = owned_model.as_ref().unwrap_or(&self.model);
            let (choice, gain) = match policy {
                Policy::Nbv => {
                    let (c, report) = model.select_nbv(&pool, &missing)?;
                    let g = report.chosen_gain();
                    reports.push(report);
                    if g < stop.gain_threshold {
                        break;
                    }
                    (c, g)
                }
                Policy::Random => {
                    let c = baseline_random(&pool, derive_seed(self.seed, STREAM_RANDOM + iteration as u64))?;
                    (c, model.viewpoint_gain(&c, &missing)?.total)
                }
                Policy::MaxDistance => {
                    let c = baseline_max_distance(&pool, &visited)?;
                    (c, model.viewpoint_gain(&c, &missing)?.total)
                }
            };
            let rig = p.layout.place(&choice.pose)?;
            let sensing = SensingConfig {
                seed: derive_seed(self.seed, STREAM_VIEW + choice.id as u64),
                ..p.sensing
            };
            let capture = simulate_capture_with(&self.tracer, &p.scene, &rig, &p.curve, &sensing);
            state.fuse_view(&capture.depth, &rig.left)?;
            pool.retain(|c| c.id != choice.id);
            visited.push(choice.pose.origin());

            if p.refresh_hypotheses {
                let set = Self::hypotheses(p, derive_seed(self.seed, STREAM_REFRESH + iteration as u64))?;
                owned_model = Some(GainModel::new(self.model.reference, p.layout, &set, p.curve.clone(), p.sensing));
            }
            let model = owned_model.as_ref().unwrap_or(&self.model);
            missing = self.missing_set(model, state.fused());
            let (add_mm, correct) = self.pose_metrics(&state);
            trajectory.push(IterationRecord {
                iteration,
                chosen: Some(choice.id),
                gain,
                completion_pct: self.completion(&state)?,
                missing_count: missing.len(),
                add_mm,
                correct,
            });
        }
        Ok(NbvOutcome {
            policy,
            initial: self.initial.clone(),
            fused: state.fused().clone(),
            trajectory,
            reports,
        })
    }

    fn completion(&self, state: &FusionState) -> Result<f64> {
        depth_completion_pct(&self.initial, state.fused(), &self.gt_depth, COMPLETION_TOLERANCE_MM, &self.mask)
    }
}

/// Prepares a session for `seed` and runs one policy.
pub fn run_nbv_loop(problem: &NbvProblem, policy: Policy, stop: &StopConditions, seed: u64) -> Result<NbvOutcome> {
    NbvSession::prepare(problem, seed)?.run(policy, stop)
}
