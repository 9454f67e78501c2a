//! Gradient estimation: on-policy PGPE, importance-weighted PGPE, and the
//! variance-minimizing constant baseline.

use crate::core::{PgpeError, Result};
use crate::policy::{log_density, log_density_grad, GradientVec, HyperParams, PolicyParams};

/// One reusable experience: the sampled parameters, the trial return, and a
/// snapshot of the hyper-parameters the sample was drawn under.
#[derive(Debug, Clone)]
pub struct BufferSample {
    pub theta: PolicyParams,
    pub ret: f64,
    pub sampler_rho: HyperParams,
}

// Shared accumulation path: mean over samples of coeff_n * grad log p(theta_n | rho),
// reduced sequentially by sample index so results do not depend on thread count
// and so the on-policy and importance-weighted routes stay bit-comparable.
fn accumulate<'a, I>(terms: I, rho: &HyperParams, n: usize) -> Result<GradientVec>
where
    I: Iterator<Item = (&'a PolicyParams, f64)>,
{
    let mut total = GradientVec::zeros(rho.len());
    for (theta, coeff) in terms {
        let g = log_density_grad(theta, rho)?;
        total.add_scaled(&g, coeff);
    }
    total.scale(1.0 / n as f64);
    Ok(total)
}

/// On-policy PGPE estimate: (1/N) sum_n grad log p(theta_n|rho) R(h_n).
/// Every sample must have been drawn from `rho`.
pub fn pgpe_gradient(samples: &[(PolicyParams, f64)], rho: &HyperParams) -> Result<GradientVec> {
    if samples.is_empty() {
        return Err(PgpeError::EmptySamples);
    }
    accumulate(
        samples.iter().map(|(t, r)| (t, (r - 0.0) * 1.0)),
        rho,
        samples.len(),
    )
}

/// Importance weight w(theta) = p(theta|rho) / p(theta|sampler_rho),
/// evaluated in log space.
pub fn importance_weight(
    theta: &PolicyParams,
    rho: &HyperParams,
    sampler_rho: &HyperParams,
) -> Result<f64> {
    log_importance_weight(theta, rho, sampler_rho).map(f64::exp)
}

fn log_importance_weight(
    theta: &PolicyParams,
    rho: &HyperParams,
    sampler_rho: &HyperParams,
) -> Result<f64> {
    Ok(log_density(theta, rho)? - log_density(theta, sampler_rho)?)
}

/// Variance-minimizing constant baseline
/// b* = E[R w^2 ||grad log p||^2] / E[w^2 ||grad log p||^2], evaluated
/// empirically over the buffer with each sample weighted under its own
/// sampler snapshot.
pub fn optimal_baseline(buffer: &[BufferSample], rho: &HyperParams) -> Result<f64> {
    if buffer.is_empty() {
        return Err(PgpeError::EmptySamples);
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for s in buffer {
        let w = importance_weight(&s.theta, rho, &s.sampler_rho)?;
        let g = log_density_grad(&s.theta, rho)?.norm_sq();
        num += s.ret * w * w * g;
        den += w * w * g;
    }
    if den <= f64::MIN_POSITIVE {
        return Err(PgpeError::DegenerateBaseline);
    }
    Ok(num / den)
}

/// Importance-weighted PGPE estimate with a constant baseline:
/// (1/N') sum_n (R_n - b) w(theta_n) grad log p(theta_n|rho).
/// With b = 0 this is the plain importance-weighted estimator.
pub fn iwpgpe_gradient(
    buffer: &[BufferSample],
    rho: &HyperParams,
    baseline: f64,
) -> Result<GradientVec> {
    iwpgpe_gradient_clamped(buffer, rho, baseline, None)
}

/// Same as [`iwpgpe_gradient`] with an optional clamp on |log w|, a safety
/// valve for pathological configurations (disabled by default).
pub fn iwpgpe_gradient_clamped(
    buffer: &[BufferSample],
    rho: &HyperParams,
    baseline: f64,
    log_weight_clamp: Option<f64>,
) -> Result<GradientVec> {
    if buffer.is_empty() {
        return Err(PgpeError::EmptySamples);
    }
    let mut coeffs = Vec::with_capacity(buffer.len());
    for s in buffer {
        let mut lw = log_importance_weight(&s.theta, rho, &s.sampler_rho)?;
        if let Some(c) = log_weight_clamp {
            lw = lw.clamp(-c, c);
        }
        coeffs.push((&s.theta, (s.ret - baseline) * lw.exp()));
    }
    accumulate(coeffs.into_iter(), rho, buffer.len())
}
