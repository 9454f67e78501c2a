//! Shared domain types, seedable randomness, and return computation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PgpeError {
    #[error("empty trajectory")]
    EmptyTrajectory,
    #[error("non-positive standard deviation")]
    NonPositiveStd,
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("empty sample list")]
    EmptySamples,
    #[error("degenerate baseline denominator")]
    DegenerateBaseline,
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("{0}")]
    InvalidConfig(String),
    #[error("i/o error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, PgpeError>;

/// Which plant the policy is bound to. Determines the basis-feature layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvKind {
    Reaching,
    CartPole,
}

/// Observation at one control step.
///
/// `extras` carries the cart-pole scalars `[z, z_dot, theta_pole, theta_pole_dot]`
/// and is empty for the reaching task.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub joints: Vec<f64>,
    pub joint_vels: Vec<f64>,
    pub extras: Vec<f64>,
}

impl State {
    pub fn new(joints: Vec<f64>, joint_vels: Vec<f64>, extras: Vec<f64>) -> Result<Self> {
        if joints.len() != joint_vels.len() {
            return Err(PgpeError::DimMismatch(format!(
                "joints ({}) vs joint_vels ({})",
                joints.len(),
                joint_vels.len()
            )));
        }
        let s = Self {
            joints,
            joint_vels,
            extras,
        };
        if !s.is_finite() {
            return Err(PgpeError::NonFinite("state".into()));
        }
        Ok(s)
    }

    pub fn is_finite(&self) -> bool {
        self.joints
            .iter()
            .chain(&self.joint_vels)
            .chain(&self.extras)
            .all(|v| v.is_finite())
    }
}

/// Desired joint velocities commanded by the policy, one per controlled joint.
#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    pub desired_joint_vels: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStep {
    pub state: State,
    pub action: Action,
    pub reward: f64,
}

/// Fixed-horizon record of one trial: `[x_1, u_1, ..., x_T, u_T]` with per-step rewards.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub steps: Vec<TrajectoryStep>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    pub fn push(&mut self, state: State, action: Action, reward: f64) {
        self.steps.push(TrajectoryStep {
            state,
            action,
            reward,
        });
    }
}

/// Discounted return R(h) = sum_{t=1..T} gamma^{t-1} r_t; the first reward is undiscounted.
pub fn compute_return(h: &Trajectory, gamma: f64) -> Result<f64> {
    if h.steps.is_empty() {
        return Err(PgpeError::EmptyTrajectory);
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(PgpeError::InvalidConfig("gamma must be in [0, 1)".into()));
    }
    let mut total = 0.0;
    let mut discount = 1.0;
    for step in &h.steps {
        total += discount * step.reward;
        discount *= gamma;
    }
    Ok(total)
}

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(GOLDEN_GAMMA);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic, seedable random stream. Identical seed and call sequence give
/// identical outputs; `substream` derives an independent stream from a path of
/// indices without consuming the parent's state, so parallel rollouts stay
/// reproducible across thread counts.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn substream(&self, path: &[u64]) -> Self {
        let mut s = self.seed;
        for &p in path {
            s = splitmix64(s ^ p.wrapping_mul(GOLDEN_GAMMA));
        }
        Self::new(s)
    }

    /// One draw from N(mean, std^2).
    pub fn gaussian(&mut self, mean: f64, std: f64) -> Result<f64> {
        if std <= 0.0 {
            return Err(PgpeError::NonPositiveStd);
        }
        let z: f64 = self.rng.sample(StandardNormal);
        Ok(mean + std * z)
    }

    pub fn uniform_01(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    pub fn uniform_usize(&mut self, bound: usize) -> usize {
        self.rng.gen_range(0..bound)
    }
}
