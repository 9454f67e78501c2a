//! Arm-driven cart-pole swing-up: the policy moves the 5-DOF arm, the wand's
//! sagittal angular velocity is converted to a cart driving force, and a
//! standard underactuated cart-pole advances under that force.
//!
//! Pole angle convention: theta = 0 upright, trials start hanging at
//! theta = pi with everything at rest.

use super::arm::advance_arm;
use super::{rk4_step, wrap_angle, EnvConfig, Environment, NUM_JOINTS};
use crate::core::{
    compute_return, Action, EnvKind, PgpeError, Result, RngStream, State, Trajectory,
};
use crate::policy::{act, featurize, PolicyParams};

/// Indices of the sagittal-plane (pitch-axis) joints: shoulder pitch and elbow.
pub const SAGITTAL_JOINTS: [usize; 2] = [2, 4];

/// Wand angular velocity: the sum of the sagittal joint velocities.
pub fn wand_angular_velocity(x: &State) -> f64 {
    SAGITTAL_JOINTS.iter().map(|&i| x.joint_vels[i]).sum()
}

/// F = -k (z_dot - alpha * omega).
pub fn cart_force(z_dot: f64, omega: f64, cfg: &EnvConfig) -> f64 {
    -cfg.force_k * (z_dot - cfg.force_alpha * omega)
}

/// Time derivative of the cart-pole state [z, z_dot, theta, theta_dot] for a
/// uniform pole of half-length l pivoted on the cart, frictionless. The force
/// is re-evaluated from z_dot at every stage via `force`.
pub fn cartpole_deriv(s: &[f64], cfg: &EnvConfig, force: impl Fn(f64) -> f64) -> Vec<f64> {
    let (z_dot, th, th_dot) = (s[1], s[2], s[3]);
    let f = force(z_dot);
    let (m, mc, l, g) = (cfg.pole_mass, cfg.cart_mass, cfg.pole_half_len, cfg.gravity);
    let total = mc + m;
    let (sin_t, cos_t) = th.sin_cos();
    let th_acc = (g * sin_t - cos_t * (f + m * l * th_dot * th_dot * sin_t) / total)
        / (l * (4.0 / 3.0 - m * cos_t * cos_t / total));
    let z_acc = (f + m * l * (th_dot * th_dot * sin_t - th_acc * cos_t)) / total;
    vec![z_dot, z_acc, th_dot, th_acc]
}

/// Total mechanical energy of the cart-pole (kinetic + potential of the pole
/// about the cart height). Conserved when the applied force is zero.
pub fn cartpole_energy(s: &[f64], cfg: &EnvConfig) -> f64 {
    let (z_dot, th, th_dot) = (s[1], s[2], s[3]);
    let (m, mc, l, g) = (cfg.pole_mass, cfg.cart_mass, cfg.pole_half_len, cfg.gravity);
    let i_cm = m * l * l / 3.0;
    let vx = z_dot + l * th_dot * th.cos();
    let vy = l * th_dot * th.sin();
    0.5 * mc * z_dot * z_dot + 0.5 * m * (vx * vx + vy * vy) + 0.5 * i_cm * th_dot * th_dot
        + m * g * l * th.cos()
}

/// One control step: advance the arm under the PD law, read off the wand
/// angular velocity, then advance the cart-pole with the velocity-feedback
/// force (omega held over the step).
pub fn cartpole_step(x: &State, u: &Action, cfg: &EnvConfig) -> Result<(State, f64)> {
    if !x.is_finite() {
        return Err(PgpeError::NonFinite("state".into()));
    }
    if x.extras.len() != 4 {
        return Err(PgpeError::DimMismatch(
            "cart-pole state needs extras [z, z_dot, theta, theta_dot]".into(),
        ));
    }
    let (q, qd, psi_des) = advance_arm(&x.joints, &x.joint_vels, u, cfg)?;
    let arm_state = State::new(q, qd, x.extras.clone())?;
    let omega = wand_angular_velocity(&arm_state);

    let cart = rk4_step(&x.extras, cfg.dt, |s| {
        cartpole_deriv(s, cfg, |z_dot| cart_force(z_dot, omega, cfg))
    });
    let extras = vec![cart[0], cart[1], wrap_angle(cart[2]), cart[3]];
    let next = State::new(arm_state.joints, arm_state.joint_vels, extras)?;

    let (z, th) = (next.extras[0], next.extras[2]);
    let q_reward = (-cfg.reward_alpha * (z * z + th * th)).exp();
    let cost: f64 = next
        .joints
        .iter()
        .zip(&psi_des)
        .map(|(&p, &d)| (p - d) * (p - d))
        .sum();
    Ok((next, q_reward - cfg.cost_beta * cost))
}

/// The arm-driven cart-pole swing-up environment.
#[derive(Debug, Clone)]
pub struct CartPoleEnv {
    pub cfg: EnvConfig,
}

impl CartPoleEnv {
    pub fn new(cfg: EnvConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg })
    }

    /// Arm at rest, pole hanging straight down.
    pub fn initial_state(&self) -> State {
        State::new(
            vec![0.0; NUM_JOINTS],
            vec![0.0; NUM_JOINTS],
            vec![0.0, 0.0, std::f64::consts::PI, 0.0],
        )
        .unwrap()
    }
}

impl Environment for CartPoleEnv {
    fn theta_shape(&self) -> (usize, usize) {
        (NUM_JOINTS, 2 * (NUM_JOINTS + 2) + 1)
    }

    fn horizon(&self) -> usize {
        self.cfg.horizon_t
    }

    fn rollout(
        &self,
        theta: &PolicyParams,
        gamma: f64,
        _rng: &mut RngStream,
    ) -> Result<(Trajectory, f64)> {
        let mut x = self.initial_state();
        let mut h = Trajectory::default();
        for _ in 0..self.cfg.horizon_t {
            let u = act(theta, &featurize(&x, EnvKind::CartPole)?)?;
            let (next, r) = cartpole_step(&x, &u, &self.cfg)?;
            h.push(x, u, r);
            x = next;
        }
        let ret = compute_return(&h, gamma)?;
        Ok((h, ret))
    }
}
