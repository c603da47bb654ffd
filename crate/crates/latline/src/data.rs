//! Trajectory storage, triplet extraction, and path-length computation.
//!
//! Trajectories are ordered raw-state sequences recorded from demonstrations.
//! Training data is derived from them as evenly spaced `(x_{t-k}, x_t,
//! x_{t+k})` triplets over a set of step spacings. Files are JSON-lines, one
//! trajectory per line, and round-trip losslessly at f64 precision.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One recorded state sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub env_id: String,
    pub dt: f64,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn state_dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Check the storage invariants: at least 3 states, uniform state width,
    /// every entry finite.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.states.len() < 3 {
            return Err(format!("trajectory has {} states, need >= 3", self.states.len()));
        }
        let n = self.states[0].len();
        for (t, s) in self.states.iter().enumerate() {
            if s.len() != n {
                return Err(format!("state {t} has length {}, expected {n}", s.len()));
            }
            if s.iter().any(|v| !v.is_finite()) {
                return Err(format!("state {t} contains a non-finite entry"));
            }
        }
        Ok(())
    }
}

/// Three states drawn from one trajectory at indices `(t-k, t, t+k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Triplet {
    pub x_prev: Vec<f64>,
    pub x_mid: Vec<f64>,
    pub x_next: Vec<f64>,
    pub step: usize,
}

/// All triplets extracted from a trajectory set, plus per-trajectory counts.
#[derive(Clone, Debug, Default)]
pub struct TripletDataset {
    pub triplets: Vec<Triplet>,
    pub per_trajectory_counts: Vec<usize>,
}

impl TripletDataset {
    pub fn from_trajectories(trajs: &[Trajectory], steps: &[usize]) -> Self {
        let mut triplets = Vec::new();
        let mut counts = Vec::with_capacity(trajs.len());
        for traj in trajs {
            let before = triplets.len();
            triplets.extend(sample_triplets(traj, steps));
            counts.push(triplets.len() - before);
        }
        Self {
            triplets,
            per_trajectory_counts: counts,
        }
    }

    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }
}

/// Emit every triplet `(t-k, t, t+k)` with both edges in range, for each
/// spacing `k` in `steps`. A trajectory too short for a spacing contributes
/// nothing for that spacing.
pub fn sample_triplets(traj: &Trajectory, steps: &[usize]) -> Vec<Triplet> {
    let n = traj.states.len();
    let mut out = Vec::new();
    for &k in steps {
        if k == 0 || n < 2 * k + 1 {
            continue;
        }
        for t in k..n - k {
            out.push(Triplet {
                x_prev: traj.states[t - k].clone(),
                x_mid: traj.states[t].clone(),
                x_next: traj.states[t + k].clone(),
                step: k,
            });
        }
    }
    out
}

/// Which state components hold angles (wrapped metrics) and which hold
/// positions, keyed by environment id. Unknown ids get no angle handling and
/// use the full state for the positions-only metric.
fn angle_dims(env_id: &str) -> &'static [usize] {
    match env_id {
        "cartpole-balance" | "cartpole-swingup" => &[2],
        "reacher" => &[0, 1],
        _ => &[],
    }
}

fn position_dims(env_id: &str) -> Option<&'static [usize]> {
    match env_id {
        "cartpole-balance" | "cartpole-swingup" => Some(&[0, 2]),
        "reacher" => Some(&[0, 1, 4, 5]),
        _ => None,
    }
}

/// Distance metric for [`path_length_with`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DistanceMode {
    /// Euclidean over the full state vector (default).
    FullState,
    /// Euclidean over position-like components only.
    PositionsOnly,
}

/// Wrap an angle difference into `[-pi, pi]`.
pub fn wrap_to_pi(x: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut r = x % two_pi;
    if r > std::f64::consts::PI {
        r -= two_pi;
    } else if r < -std::f64::consts::PI {
        r += two_pi;
    }
    r
}

/// Sum of Euclidean distances between consecutive states. Angle components
/// use the shortest angular displacement so the result does not depend on
/// the chart the angles were stored in.
pub fn path_length(traj: &Trajectory) -> f64 {
    path_length_with(traj, DistanceMode::FullState)
}

pub fn path_length_with(traj: &Trajectory, mode: DistanceMode) -> f64 {
    let angles = angle_dims(&traj.env_id);
    let dims: Option<&[usize]> = match mode {
        DistanceMode::FullState => None,
        DistanceMode::PositionsOnly => position_dims(&traj.env_id),
    };
    let mut total = 0.0;
    for pair in traj.states.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let mut sq = 0.0;
        let mut add = |j: usize| {
            let mut d = b[j] - a[j];
            if angles.contains(&j) {
                d = wrap_to_pi(d);
            }
            sq += d * d;
        };
        match dims {
            Some(dims) => dims.iter().copied().for_each(&mut add),
            None => (0..a.len()).for_each(&mut add),
        }
        total += sq.sqrt();
    }
    total
}

/// Deterministic Fisher-Yates permutation of `0..n`; a pure function of the
/// seed.
pub fn shuffled_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    idx
}

/// Write trajectories as JSON-lines. Each record is validated first.
pub fn save_trajectories(trajs: &[Trajectory], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (index, traj) in trajs.iter().enumerate() {
        traj.validate()
            .map_err(|reason| Error::Record { index, reason })?;
        serde_json::to_writer(&mut w, traj)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Load trajectories from JSON-lines, rejecting malformed records with their
/// record index. An empty file yields an empty list.
pub fn load_trajectories(path: &Path) -> Result<Vec<Trajectory>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let traj: Trajectory = serde_json::from_str(&line).map_err(|e| Error::Record {
            index,
            reason: e.to_string(),
        })?;
        traj.validate()
            .map_err(|reason| Error::Record { index, reason })?;
        out.push(traj);
    }
    Ok(out)
}

/// Straight-line constant-velocity trajectories in `dim` dimensions with
/// randomized starting points, directions, and speeds.
pub fn synthetic_linear_trajectories(
    count: usize,
    dim: usize,
    len: usize,
    seed: u64,
) -> Vec<Trajectory> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let start: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut dir: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt().max(1e-9);
        let speed = rng.random_range(0.01..0.05);
        for d in &mut dir {
            *d *= speed / norm;
        }
        let states = (0..len)
            .map(|t| {
                start
                    .iter()
                    .zip(&dir)
                    .map(|(s, v)| s + t as f64 * v)
                    .collect()
            })
            .collect();
        out.push(Trajectory {
            env_id: format!("linear{dim}"),
            dt: 1.0,
            states,
        });
    }
    out
}
