use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::geometry::io::write_depth_png;
use crate::geometry::DepthMap;
use crate::planner::{NbvOutcome, NbvProblem, NbvSession, Policy};

/// One iteration of one run. Column order is part of the CSV contract.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub run_id: String,
    pub policy: Policy,
    pub seed: u64,
    pub iteration: usize,
    pub chosen_viewpoint: Option<usize>,
    pub gain: Option<f64>,
    pub completion_pct: f64,
    pub missing_count: usize,
    pub add_mm: Option<f64>,
    pub correct: Option<bool>,
}

/// Wall time of one run; kept out of the result CSV so that file stays
/// reproducible byte for byte.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub run_id: String,
    pub wall_time_ms: f64,
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub rows: Vec<ResultRow>,
    pub timings: Vec<TimingRow>,
    /// Final fused depth of each run, keyed by run id.
    pub fused: Vec<(String, DepthMap)>,
}

/// Mean outcome of one policy over its runs, taken at each run's last
/// iteration (and at iteration 0 for the `initial_` columns).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub policy: Policy,
    pub runs: usize,
    pub mean_views: f64,
    pub mean_completion_pct: f64,
    pub mean_initial_add_mm: Option<f64>,
    pub mean_add_mm: Option<f64>,
    pub correct_rate: Option<f64>,
}

/// What was run, enough to run it again.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub policies: Vec<Policy>,
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
        m.config.validate()?;
        Ok(m)
    }
}

pub fn run_id(policy: Policy, seed: u64) -> String {
    format!("{policy}-s{seed}")
}

/// Turns a config into the loop's problem description.
pub fn build_problem(cfg: &ExperimentConfig) -> Result<NbvProblem> {
    let (scene, mesh, gt_pose, material) = cfg.build_scene()?;
    let planning_material = match &cfg.planning_material {
        Some(m) => m.resolve()?,
        None => material,
    };
    Ok(NbvProblem {
        scene,
        mesh,
        gt_pose,
        planning_material,
        layout: cfg.rig.layout(),
        reference_pose: cfg.rig.reference.pose()?,
        candidates: cfg.candidates.build()?,
        curve: cfg.response.build()?,
        sensing: cfg.sensing,
        hypotheses: cfg.hypotheses,
        refresh_hypotheses: cfg.refresh_hypotheses,
        fusion: cfg.fusion,
        icp: cfg.icp,
        evaluate_pose: cfg.evaluate_pose,
    })
}

fn rows_of(outcome: &NbvOutcome, seed: u64) -> Vec<ResultRow> {
    let id = run_id(outcome.policy, seed);
    outcome
        .trajectory
        .iter()
        .map(|r| ResultRow {
            run_id: id.clone(),
            policy: outcome.policy,
            seed,
            iteration: r.iteration,
            chosen_viewpoint: r.chosen,
            gain: r.chosen.map(|_| r.gain),
            completion_pct: r.completion_pct,
            missing_count: r.missing_count,
            add_mm: r.add_mm,
            correct: r.correct,
        })
        .collect()
}

/// Runs every configured policy for every seed (`seeds` overrides the
/// config's list). Seeds run in parallel; rows come back ordered by seed,
/// then policy, then iteration.
pub fn run_experiment(cfg: &ExperimentConfig, seeds: Option<&[u64]>) -> Result<ExperimentResult> {
    cfg.validate()?;
    let seeds = seeds.map(<[u64]>::to_vec).unwrap_or_else(|| cfg.seeds.clone());
    let problem = build_problem(cfg)?;
    type SeedOutput = (Vec<ResultRow>, Vec<TimingRow>, Vec<(String, DepthMap)>);
    let per_seed: Vec<SeedOutput> = seeds
        .par_iter()
        .map(|&seed| {
            let start = Instant::now();
            let session = NbvSession::prepare(&problem, seed).map_err(|e| e.context(format!("seed {seed}")))?;
            let shared_ms = start.elapsed().as_secs_f64() * 1e3;
            let mut rows = Vec::new();
            let mut timings = Vec::new();
            let mut fused = Vec::new();
            for &policy in &cfg.policies {
                let t = Instant::now();
                let outcome = session
                    .run(policy, &cfg.stop)
                    .map_err(|e| e.context(format!("run {}", run_id(policy, seed))))?;
                timings.push(TimingRow {
                    run_id: run_id(policy, seed),
                    wall_time_ms: shared_ms + t.elapsed().as_secs_f64() * 1e3,
                });
                rows.extend(rows_of(&outcome, seed));
                fused.push((run_id(policy, seed), outcome.fused));
            }
            Ok((rows, timings, fused))
        })
        .collect::<Result<_>>()?;
    let mut result = ExperimentResult {
        config_hash: cfg.hash()?,
        seeds,
        rows: Vec::new(),
        timings: Vec::new(),
        fused: Vec::new(),
    };
    for (rows, timings, fused) in per_seed {
        result.rows.extend(rows);
        result.timings.extend(timings);
        result.fused.extend(fused);
    }
    Ok(result)
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

/// Per-policy means, in order of first appearance.
pub fn summarize(rows: &[ResultRow]) -> Vec<PolicySummary> {
    let mut policies: Vec<Policy> = Vec::new();
    for r in rows {
        if !policies.contains(&r.policy) {
            policies.push(r.policy);
        }
    }
    policies
        .into_iter()
        .map(|policy| {
            let mut run_ids: Vec<&str> = Vec::new();
            for r in rows.iter().filter(|r| r.policy == policy) {
                if !run_ids.contains(&r.run_id.as_str()) {
                    run_ids.push(&r.run_id);
                }
            }
            let first: Vec<&ResultRow> = run_ids
                .iter()
                .filter_map(|id| rows.iter().filter(|r| r.run_id == *id).min_by_key(|r| r.iteration))
                .collect();
            let last: Vec<&ResultRow> = run_ids
                .iter()
                .filter_map(|id| rows.iter().filter(|r| r.run_id == *id).max_by_key(|r| r.iteration))
                .collect();
            PolicySummary {
                policy,
                runs: run_ids.len(),
                mean_views: mean(last.iter().map(|r| r.iteration as f64)).unwrap_or(0.0),
                mean_completion_pct: mean(last.iter().map(|r| r.completion_pct)).unwrap_or(f64::NAN),
                mean_initial_add_mm: mean(first.iter().filter_map(|r| r.add_mm)),
                mean_add_mm: mean(last.iter().filter_map(|r| r.add_mm)),
                correct_rate: mean(last.iter().filter_map(|r| r.correct.map(|c| if c { 1.0 } else { 0.0 }))),
            }
        })
        .collect()
}

fn write_csv<T: Serialize>(items: &[T], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for item in items {
        w.serialize(item)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn write_rows(rows: &[ResultRow], path: impl AsRef<Path>) -> Result<()> {
    write_csv(rows, path.as_ref())
}

pub fn read_rows(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path.as_ref())?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn write_summary(summary: &[PolicySummary], path: impl AsRef<Path>) -> Result<()> {
    write_csv(summary, path.as_ref())
}

/// Files written by [`write_outputs`].
#[derive(Clone, Debug)]
pub struct OutputPaths {
    pub results: PathBuf,
    pub summary: PathBuf,
    pub timings: PathBuf,
    pub manifest: PathBuf,
    /// Final fused depth PNGs, one per run.
    pub depth_dir: PathBuf,
}

impl OutputPaths {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            results: dir.join("results.csv"),
            summary: dir.join("summary.csv"),
            timings: dir.join("timings.csv"),
            manifest: dir.join("manifest.json"),
            depth_dir: dir.join("depth"),
        }
    }
}

/// Writes results, summary, timings, fused depth maps and the manifest into
/// `dir`.
pub fn write_outputs(cfg: &ExperimentConfig, result: &ExperimentResult, dir: &Path) -> Result<OutputPaths> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = OutputPaths::in_dir(dir);
    write_rows(&result.rows, &paths.results)?;
    write_summary(&summarize(&result.rows), &paths.summary)?;
    write_csv(&result.timings, &paths.timings)?;
    std::fs::create_dir_all(&paths.depth_dir).map_err(|e| Error::io(&paths.depth_dir, e))?;
    for (id, depth) in &result.fused {
        write_depth_png(depth, paths.depth_dir.join(format!("{id}.png")))?;
    }
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: result.config_hash.clone(),
        seeds: result.seeds.clone(),
        policies: cfg.policies.clone(),
        config: cfg.clone(),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    std::fs::write(&paths.manifest, json).map_err(|e| Error::io(&paths.manifest, e))?;
    Ok(paths)
}
