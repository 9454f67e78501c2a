//! Episodic simulation environments: the 5-DOF reaching arm, the arm-driven
//! cart-pole swing-up plant, and a 1-D analytic toy used as a test oracle.

pub mod arm;
pub mod cartpole;
pub mod toy;

use crate::core::{Result, RngStream, Trajectory};
use crate::policy::PolicyParams;

pub use arm::ReachingEnv;
pub use cartpole::CartPoleEnv;
pub use toy::ToyQuadratic;

pub const NUM_JOINTS: usize = 5;

/// Physical and task constants for one environment instance. Everything here
/// is overridable from the run configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    /// Control/integration step (s).
    pub dt: f64,
    /// Steps per trial; dt * horizon_t = 1.0 s by default.
    pub horizon_t: usize,
    /// PD gains.
    pub k_p: f64,
    pub k_d: f64,
    /// Reward sharpness alpha and action-cost weight beta.
    pub reward_alpha: f64,
    pub cost_beta: f64,
    /// Joint limit |psi_i| <= joint_limit.
    pub joint_limit: f64,
    /// Servo saturation on commanded joint velocities (rad/s): the plant
    /// tracks clamp(u, -vel_limit, vel_limit).
    pub vel_limit: f64,
    /// Arm geometry: shoulder offset from the torso-yaw origin, link lengths.
    pub shoulder_offset: [f64; 3],
    pub upper_arm_len: f64,
    pub forearm_len: f64,
    /// Reaching target position (m).
    pub target: [f64; 3],
    /// Cart-pole dynamics constants.
    pub cart_mass: f64,
    pub pole_mass: f64,
    pub pole_half_len: f64,
    pub gravity: f64,
    /// Wand-to-cart force law F = -force_k (z_dot - force_alpha * omega).
    pub force_k: f64,
    pub force_alpha: f64,
}

/// Paper target, used when it lies inside the reachable sphere around the
/// rest shoulder position.
pub const PAPER_TARGET: [f64; 3] = [0.5, 0.7, 0.0];
/// Fallback target for geometries where the paper target is out of reach.
pub const FALLBACK_TARGET: [f64; 3] = [0.35, 0.55, 0.0];

fn default_target(shoulder: [f64; 3], reach: f64) -> [f64; 3] {
    let d2: f64 = PAPER_TARGET
        .iter()
        .zip(&shoulder)
        .map(|(t, s)| (t - s) * (t - s))
        .sum();
    if d2.sqrt() <= reach {
        PAPER_TARGET
    } else {
        FALLBACK_TARGET
    }
}

impl EnvConfig {
    pub fn reaching_default() -> Self {
        let shoulder_offset = [0.0, 0.25, 0.0];
        let upper_arm_len = 0.30;
        let forearm_len = 0.35;
        Self {
            dt: 0.02,
            horizon_t: 50,
            k_p: 100.0,
            k_d: 20.0,
            reward_alpha: 10.0,
            cost_beta: 0.0005,
            joint_limit: std::f64::consts::PI,
            vel_limit: 2.0 * std::f64::consts::PI,
            shoulder_offset,
            upper_arm_len,
            forearm_len,
            target: default_target(shoulder_offset, upper_arm_len + forearm_len),
            cart_mass: 1.0,
            pole_mass: 0.1,
            pole_half_len: 0.5,
            gravity: 9.81,
            force_k: 100.0,
            force_alpha: 5.0,
        }
    }

    pub fn cartpole_default() -> Self {
        Self {
            reward_alpha: 1.0,
            ..Self::reaching_default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        use crate::core::PgpeError::InvalidConfig;
        if self.dt <= 0.0 {
            return Err(InvalidConfig("dt must be > 0".into()));
        }
        if self.horizon_t == 0 {
            return Err(InvalidConfig("horizon must be >= 1".into()));
        }
        if self.k_p <= 0.0 || self.k_d <= 0.0 {
            return Err(InvalidConfig("PD gains must be > 0".into()));
        }
        if self.reward_alpha <= 0.0 {
            return Err(InvalidConfig("reward alpha must be > 0".into()));
        }
        if self.cost_beta < 0.0 {
            return Err(InvalidConfig("cost beta must be >= 0".into()));
        }
        if self.vel_limit <= 0.0 {
            return Err(InvalidConfig("velocity limit must be > 0".into()));
        }
        Ok(())
    }
}

/// An episodic task the policy-search loop can roll out.
pub trait Environment: Sync {
    /// (action_dim, feature_len) of the bound linear policy.
    fn theta_shape(&self) -> (usize, usize);

    /// Total parameter count action_dim * feature_len.
    fn theta_len(&self) -> usize {
        let (a, f) = self.theta_shape();
        a * f
    }

    fn horizon(&self) -> usize;

    /// Runs one fixed-horizon trial from the initial state and returns the
    /// trajectory together with its discounted return.
    fn rollout(
        &self,
        theta: &PolicyParams,
        gamma: f64,
        rng: &mut RngStream,
    ) -> Result<(Trajectory, f64)>;
}

/// Classic fourth-order Runge-Kutta step for a first-order ODE system.
pub fn rk4_step(state: &[f64], dt: f64, deriv: impl Fn(&[f64]) -> Vec<f64>) -> Vec<f64> {
    let n = state.len();
    let k1 = deriv(state);
    let mid1: Vec<f64> = (0..n).map(|i| state[i] + 0.5 * dt * k1[i]).collect();
    let k2 = deriv(&mid1);
    let mid2: Vec<f64> = (0..n).map(|i| state[i] + 0.5 * dt * k2[i]).collect();
    let k3 = deriv(&mid2);
    let end: Vec<f64> = (0..n).map(|i| state[i] + dt * k3[i]).collect();
    let k4 = deriv(&end);
    (0..n)
        .map(|i| state[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Wraps an angle to (-pi, pi].
pub fn wrap_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut t = theta % two_pi;
    if t <= -std::f64::consts::PI {
        t += two_pi;
    } else if t > std::f64::consts::PI {
        t -= two_pi;
    }
    t
}
