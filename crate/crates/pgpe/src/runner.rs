//! Training loop: sample policies, roll out trials, maintain the reuse
//! buffer, estimate gradients, update hyper-parameters, record learning
//! curves.

use std::collections::VecDeque;

use rayon::prelude::*;

use crate::core::{PgpeError, Result, RngStream, Trajectory};
use crate::envs::Environment;
use crate::estimators::{iwpgpe_gradient_clamped, optimal_baseline, pgpe_gradient, BufferSample};
use crate::policy::{sample_params, GradientVec, HyperParams, PolicyParams};

pub const GRADIENT_NORM_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    Pgpe,
    IwPgpe,
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EstimatorKind::Pgpe => write!(f, "pgpe"),
            EstimatorKind::IwPgpe => write!(f, "iwpgpe"),
        }
    }
}

/// Experiment configuration; defaults follow the original task constants
/// (N=5, N'=10, gamma=0.999, epsilon=0.1).
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub batch_n: usize,
    pub buffer_nprime: usize,
    pub gamma: f64,
    pub lr_eta: f64,
    pub lr_tau: f64,
    pub iterations: usize,
    pub seeds: Vec<u64>,
    pub estimator: EstimatorKind,
    pub use_baseline: bool,
    pub tau_init: f64,
    pub tau_min: f64,
    pub eval_every: usize,
    pub log_weight_clamp: Option<f64>,
    /// Rollout worker threads; 0 or 1 runs serially. Results are identical
    /// for any setting.
    pub rollout_threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            batch_n: 5,
            buffer_nprime: 10,
            gamma: 0.999,
            lr_eta: 0.1,
            lr_tau: 0.1,
            iterations: 100,
            seeds: vec![1],
            estimator: EstimatorKind::IwPgpe,
            use_baseline: true,
            tau_init: 0.1,
            tau_min: 1e-3,
            eval_every: 1,
            log_weight_clamp: None,
            rollout_threads: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        use PgpeError::InvalidConfig;
        if self.batch_n < 1 {
            return Err(InvalidConfig("batch must be >= 1".into()));
        }
        if self.buffer_nprime < self.batch_n {
            return Err(InvalidConfig("buffer must be >= batch".into()));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(InvalidConfig(if self.gamma >= 1.0 {
                "gamma must be < 1".into()
            } else {
                "gamma must be >= 0".into()
            }));
        }
        if self.lr_eta <= 0.0 || self.lr_tau <= 0.0 {
            return Err(InvalidConfig("lr must be > 0".into()));
        }
        if self.tau_init <= 0.0 {
            return Err(InvalidConfig("tau-init must be > 0".into()));
        }
        if self.tau_min <= 0.0 {
            return Err(InvalidConfig("tau-min must be > 0".into()));
        }
        if self.eval_every == 0 {
            return Err(InvalidConfig("eval-every must be >= 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(InvalidConfig("at least one seed is required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub iteration: usize,
    pub mean_return: f64,
    pub std_return: f64,
    pub eval_return: f64,
    pub baseline_b: f64,
    pub mean_tau: f64,
}

/// Per-iteration training record: batch statistics, the deterministic
/// mean-policy evaluation, the baseline used, and the mean exploration width.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LearningCurve {
    pub rows: Vec<CurveRow>,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub curve: LearningCurve,
    pub final_rho: HyperParams,
    /// hyper-parameters after each iteration's update, one entry per iteration
    pub rho_history: Vec<HyperParams>,
}

/// Mean and (population) std of `mean_return` across seeds, per iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryCurve {
    pub rows: Vec<(usize, f64, f64)>,
}

/// Executes one trial with fixed parameters and returns the trajectory and
/// its discounted return. The controller is deterministic within the trial;
/// `rng` is only consumed by stochastic environments (the toy).
pub fn run_trial(
    env: &dyn Environment,
    theta: &PolicyParams,
    gamma: f64,
    rng: &mut RngStream,
) -> Result<(Trajectory, f64)> {
    env.rollout(theta, gamma, rng)
}

/// Gradient-ascent update rho <- rho + epsilon * g with tau clamped from
/// below afterwards.
pub fn apply_update(
    rho: &HyperParams,
    grad: &GradientVec,
    lr_eta: f64,
    lr_tau: f64,
    tau_min: f64,
) -> Result<HyperParams> {
    let eta: Vec<f64> = rho
        .eta
        .iter()
        .zip(&grad.d_eta)
        .map(|(e, g)| e + lr_eta * g)
        .collect();
    let tau: Vec<f64> = rho
        .tau
        .iter()
        .zip(&grad.d_tau)
        .map(|(t, g)| (t + lr_tau * g).max(tau_min))
        .collect();
    HyperParams::new(eta, tau)
}

fn rollout_batch(
    env: &dyn Environment,
    thetas: &[PolicyParams],
    gamma: f64,
    root: &RngStream,
    iteration: usize,
    threads: usize,
) -> Result<Vec<f64>> {
    let work = |(n, theta): (usize, &PolicyParams)| -> Result<f64> {
        let mut rng = root.substream(&[3, iteration as u64, n as u64]);
        let (_, ret) = env.rollout(theta, gamma, &mut rng)?;
        Ok(ret)
    };
    if threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| PgpeError::InvalidConfig(format!("thread pool: {e}")))?;
        pool.install(|| thetas.par_iter().enumerate().map(work).collect())
    } else {
        thetas.iter().enumerate().map(work).collect()
    }
}

/// Runs the full training loop for one seed.
pub fn train(cfg: &RunConfig, env: &dyn Environment, seed: u64) -> Result<TrainResult> {
    cfg.validate()?;
    let (_, feat_len) = env.theta_shape();
    let dim = env.theta_len();
    let mut rho = HyperParams::initial(dim, cfg.tau_init)?;
    let root = RngStream::new(seed);
    let mut buffer: VecDeque<BufferSample> = VecDeque::with_capacity(cfg.buffer_nprime);
    let mut curve = LearningCurve::default();
    let mut rho_history = Vec::with_capacity(cfg.iterations);
    let mut last_eval = 0.0;

    for it in 0..cfg.iterations {
        // fresh batch under the current rho
        let thetas: Result<Vec<PolicyParams>> = (0..cfg.batch_n)
            .map(|n| {
                let mut rng = root.substream(&[1, it as u64, n as u64]);
                sample_params(&rho, feat_len, &mut rng)
            })
            .collect();
        let thetas = thetas?;
        let returns = rollout_batch(env, &thetas, cfg.gamma, &root, it, cfg.rollout_threads)?;

        for (theta, &ret) in thetas.iter().zip(&returns) {
            if buffer.len() == cfg.buffer_nprime {
                buffer.pop_front();
            }
            buffer.push_back(BufferSample {
                theta: theta.clone(),
                ret,
                sampler_rho: rho.clone(),
            });
        }

        let mean = returns.iter().sum::<f64>() / returns.len() as f64;
        let std = (returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>()
            / returns.len() as f64)
            .sqrt();

        if it % cfg.eval_every == 0 {
            let mean_theta = PolicyParams::new(rho.eta.clone(), feat_len)?;
            let mut rng = root.substream(&[2, it as u64]);
            let (_, eval_ret) = env.rollout(&mean_theta, cfg.gamma, &mut rng)?;
            last_eval = eval_ret;
        }

        let buf: Vec<BufferSample> = buffer.iter().cloned().collect();
        let (grad, baseline) = match cfg.estimator {
            EstimatorKind::Pgpe => {
                // on-policy: only the newest batch, all drawn from the current rho
                let fresh = &buf[buf.len() - cfg.batch_n..];
                if cfg.use_baseline {
                    // importance weights are exactly 1 on the fresh batch, so the
                    // weighted estimator reduces to the plain one with b subtracted
                    let b = optimal_baseline(fresh, &rho)?;
                    (iwpgpe_gradient_clamped(fresh, &rho, b, None)?, b)
                } else {
                    let pairs: Vec<(PolicyParams, f64)> =
                        fresh.iter().map(|s| (s.theta.clone(), s.ret)).collect();
                    (pgpe_gradient(&pairs, &rho)?, 0.0)
                }
            }
            EstimatorKind::IwPgpe => {
                let b = if cfg.use_baseline {
                    optimal_baseline(&buf, &rho)?
                } else {
                    0.0
                };
                (
                    iwpgpe_gradient_clamped(&buf, &rho, b, cfg.log_weight_clamp)?,
                    b,
                )
            }
        };

        if !grad.is_finite() {
            return Err(PgpeError::NonFinite(format!(
                "gradient at iteration {it} (seed {seed})"
            )));
        }
        if grad.norm_sq().sqrt() > GRADIENT_NORM_LIMIT {
            log::warn!(
                "skipping update at iteration {it}: gradient norm {:.3e} exceeds {GRADIENT_NORM_LIMIT:.0e}",
                grad.norm_sq().sqrt()
            );
        } else {
            rho = apply_update(&rho, &grad, cfg.lr_eta, cfg.lr_tau, cfg.tau_min)?;
        }

        rho_history.push(rho.clone());
        let mean_tau = rho.tau.iter().sum::<f64>() / rho.tau.len().max(1) as f64;
        curve.rows.push(CurveRow {
            iteration: it,
            mean_return: mean,
            std_return: std,
            eval_return: last_eval,
            baseline_b: baseline,
            mean_tau,
        });
    }

    Ok(TrainResult {
        curve,
        final_rho: rho,
        rho_history,
    })
}

/// Trains every configured seed and aggregates mean/std of the batch mean
/// return per iteration.
pub fn multi_seed_summary(
    cfg: &RunConfig,
    env: &dyn Environment,
) -> Result<(Vec<TrainResult>, SummaryCurve)> {
    cfg.validate()?;
    let results: Result<Vec<TrainResult>> =
        cfg.seeds.iter().map(|&s| train(cfg, env, s)).collect();
    let results = results?;
    let mut rows = Vec::with_capacity(cfg.iterations);
    for it in 0..cfg.iterations {
        let vals: Vec<f64> = results
            .iter()
            .map(|r| r.curve.rows[it].mean_return)
            .collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let std =
            (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64).sqrt();
        rows.push((it, mean, std));
    }
    Ok((results, SummaryCurve { rows }))
}
