//! Deterministic linear policy over basis features, plus the Gaussian
//! hyper-distribution over its flattened parameter vector.

use crate::core::{Action, EnvKind, PgpeError, Result, RngStream, State};

/// Basis feature vector; the last entry is always the bias term 1.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVec {
    pub values: Vec<f64>,
}

/// Linear controller parameters, a (action_dim x feat_len) matrix stored
/// flattened row-major. The hyper-distribution treats it as one vector of
/// length `action_dim * feat_len`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    theta: Vec<f64>,
    feat_len: usize,
}

impl PolicyParams {
    pub fn new(theta: Vec<f64>, feat_len: usize) -> Result<Self> {
        if feat_len == 0 || theta.len() % feat_len != 0 {
            return Err(PgpeError::DimMismatch(format!(
                "theta length {} not a multiple of feature length {}",
                theta.len(),
                feat_len
            )));
        }
        if !theta.iter().all(|v| v.is_finite()) {
            return Err(PgpeError::NonFinite("policy parameters".into()));
        }
        Ok(Self { theta, feat_len })
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn feat_len(&self) -> usize {
        self.feat_len
    }

    pub fn action_dim(&self) -> usize {
        self.theta.len() / self.feat_len
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.theta
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.theta[i * self.feat_len..(i + 1) * self.feat_len]
    }
}

/// Gaussian hyper-parameters rho = ({eta_i}, {tau_i}) over the policy vector.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    pub eta: Vec<f64>,
    pub tau: Vec<f64>,
}

impl HyperParams {
    pub fn new(eta: Vec<f64>, tau: Vec<f64>) -> Result<Self> {
        if eta.len() != tau.len() {
            return Err(PgpeError::DimMismatch(format!(
                "eta ({}) vs tau ({})",
                eta.len(),
                tau.len()
            )));
        }
        if !eta.iter().chain(&tau).all(|v| v.is_finite()) {
            return Err(PgpeError::NonFinite("hyper-parameters".into()));
        }
        if tau.iter().any(|&t| t <= 0.0) {
            return Err(PgpeError::NonPositiveStd);
        }
        Ok(Self { eta, tau })
    }

    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }

    /// Uniform initial distribution: eta = 0, tau = tau_init everywhere.
    pub fn initial(len: usize, tau_init: f64) -> Result<Self> {
        Self::new(vec![0.0; len], vec![tau_init; len])
    }
}

/// Stacked gradient estimate (d/d eta, d/d tau), same shape as `HyperParams`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientVec {
    pub d_eta: Vec<f64>,
    pub d_tau: Vec<f64>,
}

impl GradientVec {
    pub fn zeros(len: usize) -> Self {
        Self {
            d_eta: vec![0.0; len],
            d_tau: vec![0.0; len],
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.d_eta
            .iter()
            .chain(&self.d_tau)
            .map(|v| v * v)
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.d_eta
            .iter()
            .chain(&self.d_tau)
            .all(|v| v.is_finite())
    }

    pub fn scale(&mut self, c: f64) {
        for v in self.d_eta.iter_mut().chain(self.d_tau.iter_mut()) {
            *v *= c;
        }
    }

    /// self += c * other, component-wise.
    pub fn add_scaled(&mut self, other: &GradientVec, c: f64) {
        for (a, b) in self.d_eta.iter_mut().zip(&other.d_eta) {
            *a += c * b;
        }
        for (a, b) in self.d_tau.iter_mut().zip(&other.d_tau) {
            *a += c * b;
        }
    }
}

/// Builds the linear basis feature vector for a state.
///
/// Reaching: `[psi_1..psi_5, psi_dot_1..psi_dot_5, 1]` (length 11).
/// Cart-pole: `[psi_1..psi_5, z, theta, psi_dot_1..psi_dot_5, z_dot, theta_dot, 1]`
/// (length 15), i.e. `[s, s_dot, 1]` with s the joint angles plus cart state.
pub fn featurize(x: &State, env_kind: EnvKind) -> Result<FeatureVec> {
    if x.joints.len() != x.joint_vels.len() {
        return Err(PgpeError::DimMismatch("joints vs joint_vels".into()));
    }
    let mut values = Vec::new();
    match env_kind {
        EnvKind::Reaching => {
            if !x.extras.is_empty() {
                return Err(PgpeError::DimMismatch(
                    "reaching state must have no extras".into(),
                ));
            }
            values.extend_from_slice(&x.joints);
            values.extend_from_slice(&x.joint_vels);
        }
        EnvKind::CartPole => {
            if x.extras.len() != 4 {
                return Err(PgpeError::DimMismatch(
                    "cart-pole state needs extras [z, z_dot, theta, theta_dot]".into(),
                ));
            }
            let (z, z_dot, th, th_dot) = (x.extras[0], x.extras[1], x.extras[2], x.extras[3]);
            values.extend_from_slice(&x.joints);
            values.push(z);
            values.push(th);
            values.extend_from_slice(&x.joint_vels);
            values.push(z_dot);
            values.push(th_dot);
        }
    }
    values.push(1.0);
    if !values.iter().all(|v| v.is_finite()) {
        return Err(PgpeError::NonFinite("feature vector".into()));
    }
    Ok(FeatureVec { values })
}

/// Deterministic linear control law: action_i = theta_row_i . phi.
pub fn act(theta: &PolicyParams, phi: &FeatureVec) -> Result<Action> {
    if theta.feat_len() != phi.values.len() {
        return Err(PgpeError::DimMismatch(format!(
            "theta row length {} vs feature length {}",
            theta.feat_len(),
            phi.values.len()
        )));
    }
    let desired_joint_vels = (0..theta.action_dim())
        .map(|i| {
            theta
                .row(i)
                .iter()
                .zip(&phi.values)
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect();
    Ok(Action { desired_joint_vels })
}

/// Draws theta_i ~ N(eta_i, tau_i^2) independently for each component.
pub fn sample_params(rho: &HyperParams, feat_len: usize, rng: &mut RngStream) -> Result<PolicyParams> {
    let mut theta = Vec::with_capacity(rho.len());
    for (&eta, &tau) in rho.eta.iter().zip(&rho.tau) {
        theta.push(rng.gaussian(eta, tau)?);
    }
    PolicyParams::new(theta, feat_len)
}

/// log p(theta|rho) = sum_i [ -1/2 log(2 pi tau_i^2) - (theta_i - eta_i)^2 / (2 tau_i^2) ].
pub fn log_density(theta: &PolicyParams, rho: &HyperParams) -> Result<f64> {
    if theta.len() != rho.len() {
        return Err(PgpeError::DimMismatch(format!(
            "theta length {} vs rho length {}",
            theta.len(),
            rho.len()
        )));
    }
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    let mut total = 0.0;
    for ((&t, &eta), &tau) in theta.as_slice().iter().zip(&rho.eta).zip(&rho.tau) {
        let d = t - eta;
        total += -0.5 * (ln_2pi + (tau * tau).ln()) - d * d / (2.0 * tau * tau);
    }
    Ok(total)
}

/// Closed-form log-density gradients:
/// d/d eta_i = (theta_i - eta_i) / tau_i^2,
/// d/d tau_i = ((theta_i - eta_i)^2 - tau_i^2) / tau_i^3.
pub fn log_density_grad(theta: &PolicyParams, rho: &HyperParams) -> Result<GradientVec> {
    if theta.len() != rho.len() {
        return Err(PgpeError::DimMismatch(format!(
            "theta length {} vs rho length {}",
            theta.len(),
            rho.len()
        )));
    }
    let mut g = GradientVec::zeros(rho.len());
    for (i, ((&t, &eta), &tau)) in theta
        .as_slice()
        .iter()
        .zip(&rho.eta)
        .zip(&rho.tau)
        .enumerate()
    {
        let d = t - eta;
        g.d_eta[i] = d / (tau * tau);
        g.d_tau[i] = (d * d - tau * tau) / (tau * tau * tau);
    }
    Ok(g)
}
