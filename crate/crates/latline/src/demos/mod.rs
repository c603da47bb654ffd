//! Demonstration dataset generation.
//!
//! Two sources produce state trajectories with their control tapes: the
//! random-shooting [`planner`] and the scripted [`expert`] controllers.
//! [`build_dataset`] rolls out whichever source is requested until it has
//! the asked-for number of successful trajectories, writes them as
//! JSON-lines next to a controls stream and a manifest, and aborts if the
//! success rate falls under the configured floor. Controls are stored so a
//! dataset can always be re-simulated and checked against its own states.

pub mod expert;
pub mod planner;

pub use expert::{scripted_expert, DemoRollout};
pub use planner::{plan_kinodynamic, PlanEnv, PlannerConfig, PlanResult};

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{path_length, save_trajectories, Trajectory};
use crate::envs::{Env, Task};
use crate::report::mean;
use crate::{Error, Result};

/// Where demonstrations come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DemoSource {
    Scripted,
    Planner,
}

impl DemoSource {
    pub fn from_id(id: &str) -> Result<Self> {
        match id {
            "scripted" => Ok(Self::Scripted),
            "planner" => Ok(Self::Planner),
            other => Err(Error::Config(format!(
                "unknown demo source '{other}' (expected scripted or planner)"
            ))),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            Self::Scripted => "scripted",
            Self::Planner => "planner",
        }
    }
}

/// Static summary written next to every dataset.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DemoManifest {
    pub env_id: String,
    pub source: String,
    pub seed: u64,
    pub requested: usize,
    pub attempts: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub path_length_mean: f64,
    pub path_length_min: f64,
    pub path_length_max: f64,
}

/// Output paths of [`build_dataset`].
#[derive(Clone, Debug)]
pub struct DemoFiles {
    pub trajectories: PathBuf,
    pub controls: PathBuf,
    pub manifest: PathBuf,
}

impl DemoFiles {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            trajectories: dir.join("demos.jsonl"),
            controls: dir.join("controls.jsonl"),
            manifest: dir.join("manifest.json"),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ControlsRecord {
    controls: Vec<Vec<f64>>,
}

/// Planner budget used when the planner is the demo source.
fn demo_planner_config(seed: u64) -> PlannerConfig {
    PlannerConfig {
        seed,
        ..PlannerConfig::default()
    }
}

fn attempt_rollout(task: Task, source: DemoSource, start: &[f64], plan_seed: u64) -> DemoRollout {
    match source {
        DemoSource::Scripted => scripted_expert(task, start),
        DemoSource::Planner => {
            let plan_env = planner::plan_env_for(task);
            let result = plan_kinodynamic(&plan_env, start, &demo_planner_config(plan_seed));
            DemoRollout {
                success: result.success,
                controls: result.controls.clone(),
                trajectory: result.into_trajectory(task.id(), task.spec().dt),
            }
        }
    }
}

/// Generate `count` successful demonstrations and write them (with controls
/// and a manifest) under `out_dir`. Deterministic: the same seed produces
/// byte-identical files.
///
/// Trajectories shorter than 3 states cannot be trained on and are counted
/// as failures. The build aborts with statistics when the success rate over
/// all attempts ends below `success_floor` or the attempt budget runs out.
pub fn build_dataset(
    task: Task,
    source: DemoSource,
    count: usize,
    seed: u64,
    success_floor: f64,
    out_dir: &Path,
) -> Result<(DemoManifest, DemoFiles)> {
    std::fs::create_dir_all(out_dir)?;
    let files = DemoFiles::in_dir(out_dir);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut env = Env::new(task);
    let mut kept: Vec<DemoRollout> = Vec::with_capacity(count);
    let mut attempts = 0usize;
    let cap = if count == 0 {
        0
    } else {
        (count * 5).max(20)
    };

    while kept.len() < count && attempts < cap {
        let start = env.reset(&mut rng).to_vec();
        let plan_seed: u64 = rng.random();
        attempts += 1;
        let rollout = attempt_rollout(task, source, &start, plan_seed);
        if rollout.success && rollout.trajectory.len() >= 3 {
            kept.push(rollout);
        }
    }

    let successes = kept.len();
    let success_rate = if attempts == 0 {
        1.0
    } else {
        successes as f64 / attempts as f64
    };
    if successes < count || success_rate < success_floor {
        return Err(Error::Gate(format!(
            "demo success rate {success_rate:.3} below floor {success_floor} \
             ({successes}/{attempts} attempts succeeded, {count} requested)"
        )));
    }

    let trajs: Vec<Trajectory> = kept.iter().map(|r| r.trajectory.clone()).collect();
    save_trajectories(&trajs, &files.trajectories)?;

    let mut w = BufWriter::new(File::create(&files.controls)?);
    for rollout in &kept {
        serde_json::to_writer(
            &mut w,
            &ControlsRecord {
                controls: rollout.controls.clone(),
            },
        )?;
        w.write_all(b"\n")?;
    }
    w.flush()?;

    let lengths: Vec<f64> = trajs.iter().map(path_length).collect();
    let manifest = DemoManifest {
        env_id: task.id().to_string(),
        source: source.id().to_string(),
        seed,
        requested: count,
        attempts,
        successes,
        success_rate,
        path_length_mean: mean(&lengths),
        path_length_min: lengths.iter().cloned().fold(f64::INFINITY, f64::min),
        path_length_max: lengths.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    };
    let mut w = BufWriter::new(File::create(&files.manifest)?);
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    w.write_all(b"\n")?;
    w.flush()?;

    Ok((manifest, files))
}

/// Load the controls stream written by [`build_dataset`], aligned by line
/// with the trajectory file.
pub fn load_controls(path: &Path) -> Result<Vec<Vec<Vec<f64>>>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ControlsRecord = serde_json::from_str(&line).map_err(|e| Error::Record {
            index,
            reason: e.to_string(),
        })?;
        out.push(rec.controls);
    }
    Ok(out)
}

/// Re-simulate a recorded control tape from the trajectory's first state and
/// check that it reproduces the stored states bit-for-bit.
pub fn verify_replay(traj: &Trajectory, controls: &[Vec<f64>]) -> Result<bool> {
    let task = Task::from_id(&traj.env_id)?;
    if traj.states.len() != controls.len() + 1 {
        return Ok(false);
    }
    let replayed = Env::rollout_controls(task, &traj.states[0], controls);
    let same = replayed
        .states
        .iter()
        .zip(&traj.states)
        .all(|(a, b)| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
    Ok(same)
}
