//! 1-D analytic toy task with closed-form gradients, used to verify the
//! estimators. One step per episode:
//! R = -(theta - c*)^2 + sigma_n * xi with xi ~ N(0, 1).
//! Under theta ~ N(eta, tau^2) the expected return is
//! J = -(eta - c*)^2 - tau^2 + const, so
//! dJ/d eta = -2 (eta - c*) and dJ/d tau = -2 tau.

use super::Environment;
use crate::core::{Action, Result, RngStream, State, Trajectory};
use crate::policy::PolicyParams;

pub const TOY_OPTIMUM: f64 = 1.0;
pub const TOY_NOISE_STD: f64 = 0.1;

/// One noisy episode of the quadratic toy.
pub fn toy_rollout(theta_scalar: f64, rng: &mut RngStream) -> f64 {
    let xi = rng.gaussian(0.0, 1.0).expect("unit std");
    -(theta_scalar - TOY_OPTIMUM) * (theta_scalar - TOY_OPTIMUM) + TOY_NOISE_STD * xi
}

/// Closed-form gradient of the expected return at (eta, tau).
pub fn toy_true_gradient(eta: f64, tau: f64) -> (f64, f64) {
    (-2.0 * (eta - TOY_OPTIMUM), -2.0 * tau)
}

/// Closed-form expected return (up to the constant noise contribution).
pub fn toy_expected_return(eta: f64, tau: f64) -> f64 {
    -(eta - TOY_OPTIMUM) * (eta - TOY_OPTIMUM) - tau * tau
}

#[derive(Debug, Clone, Default)]
pub struct ToyQuadratic;

impl Environment for ToyQuadratic {
    fn theta_shape(&self) -> (usize, usize) {
        (1, 1)
    }

    fn horizon(&self) -> usize {
        1
    }

    fn rollout(
        &self,
        theta: &PolicyParams,
        _gamma: f64,
        rng: &mut RngStream,
    ) -> Result<(Trajectory, f64)> {
        let r = toy_rollout(theta.as_slice()[0], rng);
        let mut h = Trajectory::default();
        h.push(
            State::new(vec![], vec![], vec![])?,
            Action {
                desired_joint_vels: vec![],
            },
            r,
        );
        Ok((h, r))
    }
}
