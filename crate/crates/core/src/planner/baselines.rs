use nalgebra::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::gain::ViewpointCandidate;
use crate::error::{Error, Result};

/// Uniform pick among the remaining candidates.
pub fn baseline_random(candidates: &[ViewpointCandidate], seed: u64) -> Result<ViewpointCandidate> {
    if candidates.is_empty() {
        return Err(Error::CandidatesExhausted);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(candidates[rng.random_range(0..candidates.len())])
}

/// Candidate whose rig centre is farthest from its nearest visited rig
/// centre; ties go to the earlier candidate.
pub fn baseline_max_distance(candidates: &[ViewpointCandidate], visited: &[Point3<f64>]) -> Result<ViewpointCandidate> {
    if candidates.is_empty() {
        return Err(Error::CandidatesExhausted);
    }
    if visited.is_empty() {
        return Err(Error::NoVisitedViewpoints);
    }
    let score = |c: &ViewpointCandidate| {
        let o = c.pose.origin();
        visited.iter().map(|v| (o - v).norm()).fold(f64::INFINITY, f64::min)
    };
    let mut best = 0;
    let mut best_score = score(&candidates[0]);
    for (i, c) in candidates.iter().enumerate().skip(1) {
        let s = score(c);
        if s > best_score {
            best = i;
            best_score = s;
        }
    }
    Ok(candidates[best])
}
