//! Shared fixtures for the benchmarks.

use specula::experiment::{build_problem, preset_config};
use specula::planner::NbvProblem;

/// The built-in preset problem for `scene` (plate, sphere, bent-plate).
pub fn preset_problem(scene: &str) -> NbvProblem {
    build_problem(&preset_config(scene).expect("built-in scene")).expect("preset builds")
}
