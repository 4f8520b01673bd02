//! Pose hypotheses, information gain, baselines and the planning loop.

pub mod baselines;
pub mod gain;
pub mod hypotheses;
pub mod nbv_loop;

pub use baselines::{baseline_max_distance, baseline_random};
pub use gain::{argmax_lowest_id, pixel_gain, CandidateGain, GainModel, GainReport, MissingPixelSet, ViewpointCandidate};
pub use hypotheses::{hypothesis_maps, softmax, synthetic_hypotheses, HypothesisConfig, PoseHypothesis, PoseHypothesisSet};
pub use nbv_loop::{derive_seed, run_nbv_loop, IterationRecord, NbvOutcome, NbvProblem, NbvSession, Policy, StopConditions};
