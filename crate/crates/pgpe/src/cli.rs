//! Command-line orchestration: configuration resolution, experiment
//! execution, and on-disk artifacts (curves, manifests, policies).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::core::{PgpeError, Result, RngStream};
use crate::envs::toy::{toy_true_gradient, ToyQuadratic};
use crate::envs::{CartPoleEnv, EnvConfig, Environment, ReachingEnv};
use crate::estimators::{
    iwpgpe_gradient, optimal_baseline, pgpe_gradient, BufferSample,
};
use crate::policy::{sample_params, HyperParams, PolicyParams};
use crate::runner::{multi_seed_summary, EstimatorKind, LearningCurve, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvChoice {
    Reaching,
    CartPole,
    Toy,
}

impl EnvChoice {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "reaching" => Ok(Self::Reaching),
            "cartpole" => Ok(Self::CartPole),
            "toy" => Ok(Self::Toy),
            other => Err(PgpeError::InvalidConfig(format!(
                "env must be one of reaching|cartpole|toy, got '{other}'"
            ))),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Self::Reaching => "reaching",
            Self::CartPole => "cartpole",
            Self::Toy => "toy",
        }
    }

    fn default_env_cfg(&self) -> EnvConfig {
        match self {
            Self::CartPole => EnvConfig::cartpole_default(),
            _ => EnvConfig::reaching_default(),
        }
    }

    fn build(&self, cfg: &EnvConfig) -> Result<Box<dyn Environment>> {
        Ok(match self {
            Self::Reaching => Box::new(ReachingEnv::new(cfg.clone())?),
            Self::CartPole => Box::new(CartPoleEnv::new(cfg.clone())?),
            Self::Toy => Box::new(ToyQuadratic),
        })
    }
}

#[derive(Parser, Debug)]
#[command(name = "pgpe", version, about = "PGPE / IW-PGPE policy search experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Run a training experiment and write learning curves to disk.
    Train(TrainArgs),
    /// Roll out a saved mean policy and print its return.
    Eval(EvalArgs),
    /// Run the estimator-verification suite on the 1-D toy.
    Oracle(OracleArgs),
}

#[derive(Args, Debug, Default, Clone)]
pub struct TrainArgs {
    /// Environment: reaching | cartpole | toy.
    #[arg(long)]
    pub env: Option<String>,
    /// Gradient estimator: pgpe | iwpgpe.
    #[arg(long)]
    pub estimator: Option<String>,
    /// Number of hyper-parameter updates.
    #[arg(long)]
    pub iters: Option<usize>,
    /// Fresh trials per update (N).
    #[arg(long)]
    pub batch: Option<usize>,
    /// Reuse-buffer capacity (N').
    #[arg(long)]
    pub buffer: Option<usize>,
    /// Discount factor.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Learning rate epsilon (applied to both eta and tau).
    #[arg(long)]
    pub lr: Option<f64>,
    /// Separate learning rate for tau (defaults to --lr).
    #[arg(long)]
    pub lr_tau: Option<f64>,
    /// Random seed; repeat for multiple runs.
    #[arg(long)]
    pub seed: Vec<u64>,
    /// Initial exploration standard deviation.
    #[arg(long)]
    pub tau_init: Option<f64>,
    /// Lower clamp on tau.
    #[arg(long)]
    pub tau_min: Option<f64>,
    /// Disable the optimal constant baseline.
    #[arg(long)]
    pub no_baseline: bool,
    /// Evaluate the mean policy every K iterations.
    #[arg(long)]
    pub eval_every: Option<usize>,
    /// Clamp |log w| at this value (safety valve; off by default).
    #[arg(long)]
    pub log_weight_clamp: Option<f64>,
    /// Rollout worker threads (0 = serial; identical results either way).
    #[arg(long)]
    pub rollout_threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write a gnuplot script next to the CSV.
    #[arg(long)]
    pub plot: bool,
    /// Flat key = value configuration file; CLI flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Environment: reaching | cartpole | toy.
    #[arg(long)]
    pub env: String,
    /// Path to a final_policy.txt written by `train`.
    #[arg(long)]
    pub policy: PathBuf,
    #[arg(long, default_value_t = 0.999)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    /// Monte-Carlo sample count for the gradient checks.
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 3)]
    pub seed: u64,
}

/// Fully resolved run description: defaults, then config file, then flags.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub env: EnvChoice,
    pub run: RunConfig,
    pub env_cfg: EnvConfig,
    pub out: PathBuf,
    pub plot: bool,
}

fn parse_key<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| PgpeError::InvalidConfig(format!("invalid value '{value}' for {key}")))
}

fn parse_vec3(key: &str, value: &str) -> Result<[f64; 3]> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(PgpeError::InvalidConfig(format!(
            "{key} must be three comma-separated numbers"
        )));
    }
    Ok([
        parse_key(key, parts[0])?,
        parse_key(key, parts[1])?,
        parse_key(key, parts[2])?,
    ])
}

fn parse_estimator(s: &str) -> Result<EstimatorKind> {
    match s {
        "pgpe" => Ok(EstimatorKind::Pgpe),
        "iwpgpe" => Ok(EstimatorKind::IwPgpe),
        other => Err(PgpeError::InvalidConfig(format!(
            "estimator must be pgpe|iwpgpe, got '{other}'"
        ))),
    }
}

/// Merges a flat `key = value` config file and the CLI flags over the
/// defaults. Flags win over the file.
pub fn resolve_config(args: &TrainArgs) -> Result<ResolvedConfig> {
    let mut file_args = TrainArgs::default();
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).map_err(|e| PgpeError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        parse_config_file(&text, &mut file_args)?;
    }
    let pick = |a: &Option<String>, b: &Option<String>| a.clone().or_else(|| b.clone());

    let env = EnvChoice::parse(
        pick(&args.env, &file_args.env)
            .as_deref()
            .unwrap_or("reaching"),
    )?;
    let mut env_cfg = env.default_env_cfg();
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).map_err(|e| PgpeError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        apply_env_overrides(&text, &mut env_cfg)?;
    }

    let defaults = RunConfig::default();
    let lr = args.lr.or(file_args.lr).unwrap_or(defaults.lr_eta);
    let run = RunConfig {
        batch_n: args.batch.or(file_args.batch).unwrap_or(defaults.batch_n),
        buffer_nprime: args
            .buffer
            .or(file_args.buffer)
            .unwrap_or(defaults.buffer_nprime),
        gamma: args.gamma.or(file_args.gamma).unwrap_or(defaults.gamma),
        lr_eta: lr,
        lr_tau: args.lr_tau.or(file_args.lr_tau).unwrap_or(lr),
        iterations: args
            .iters
            .or(file_args.iters)
            .unwrap_or(defaults.iterations),
        seeds: if !args.seed.is_empty() {
            args.seed.clone()
        } else if !file_args.seed.is_empty() {
            file_args.seed.clone()
        } else {
            defaults.seeds.clone()
        },
        estimator: match pick(&args.estimator, &file_args.estimator) {
            Some(s) => parse_estimator(&s)?,
            None => defaults.estimator,
        },
        use_baseline: !(args.no_baseline || file_args.no_baseline),
        tau_init: args
            .tau_init
            .or(file_args.tau_init)
            .unwrap_or(defaults.tau_init),
        tau_min: args
            .tau_min
            .or(file_args.tau_min)
            .unwrap_or(defaults.tau_min),
        eval_every: args
            .eval_every
            .or(file_args.eval_every)
            .unwrap_or(defaults.eval_every),
        log_weight_clamp: args.log_weight_clamp.or(file_args.log_weight_clamp),
        rollout_threads: args
            .rollout_threads
            .or(file_args.rollout_threads)
            .unwrap_or(defaults.rollout_threads),
    };
    run.validate()?;
    env_cfg.validate()?;
    Ok(ResolvedConfig {
        env,
        run,
        env_cfg,
        out: args
            .out
            .clone()
            .or(file_args.out.clone())
            .unwrap_or_else(|| PathBuf::from("runs/out")),
        plot: args.plot || file_args.plot,
    })
}

fn parse_config_file(text: &str, out: &mut TrainArgs) -> Result<()> {
    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            PgpeError::InvalidConfig(format!("malformed config line '{line}' (expected key = value)"))
        })?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "env" => out.env = Some(value.to_string()),
            "estimator" => out.estimator = Some(value.to_string()),
            "iters" => out.iters = Some(parse_key(key, value)?),
            "batch" => out.batch = Some(parse_key(key, value)?),
            "buffer" => out.buffer = Some(parse_key(key, value)?),
            "gamma" => out.gamma = Some(parse_key(key, value)?),
            "lr" => out.lr = Some(parse_key(key, value)?),
            "lr_tau" => out.lr_tau = Some(parse_key(key, value)?),
            "seed" => {
                out.seed = value
                    .split(',')
                    .map(|s| parse_key("seed", s.trim()))
                    .collect::<Result<Vec<u64>>>()?
            }
            "tau_init" => out.tau_init = Some(parse_key(key, value)?),
            "tau_min" => out.tau_min = Some(parse_key(key, value)?),
            "use_baseline" => out.no_baseline = !parse_key::<bool>(key, value)?,
            "eval_every" => out.eval_every = Some(parse_key(key, value)?),
            "log_weight_clamp" => out.log_weight_clamp = Some(parse_key(key, value)?),
            "rollout_threads" => out.rollout_threads = Some(parse_key(key, value)?),
            "out" => out.out = Some(PathBuf::from(value)),
            "plot" => out.plot = parse_key(key, value)?,
            k if k.starts_with("env.") => {} // handled by apply_env_overrides
            other => {
                return Err(PgpeError::InvalidConfig(format!(
                    "unknown config key '{other}'"
                )))
            }
        }
    }
    Ok(())
}

fn apply_env_overrides(text: &str, cfg: &mut EnvConfig) -> Result<()> {
    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        match key {
            "env.dt" => cfg.dt = parse_key(key, value)?,
            "env.horizon" => cfg.horizon_t = parse_key(key, value)?,
            "env.kp" => cfg.k_p = parse_key(key, value)?,
            "env.kd" => cfg.k_d = parse_key(key, value)?,
            "env.alpha" => cfg.reward_alpha = parse_key(key, value)?,
            "env.beta" => cfg.cost_beta = parse_key(key, value)?,
            "env.joint_limit" => cfg.joint_limit = parse_key(key, value)?,
            "env.vel_limit" => cfg.vel_limit = parse_key(key, value)?,
            "env.shoulder_offset" => cfg.shoulder_offset = parse_vec3(key, value)?,
            "env.upper_arm_len" => cfg.upper_arm_len = parse_key(key, value)?,
            "env.forearm_len" => cfg.forearm_len = parse_key(key, value)?,
            "env.target" => cfg.target = parse_vec3(key, value)?,
            "env.cart_mass" => cfg.cart_mass = parse_key(key, value)?,
            "env.pole_mass" => cfg.pole_mass = parse_key(key, value)?,
            "env.pole_half_len" => cfg.pole_half_len = parse_key(key, value)?,
            "env.gravity" => cfg.gravity = parse_key(key, value)?,
            "env.force_k" => cfg.force_k = parse_key(key, value)?,
            "env.force_alpha" => cfg.force_alpha = parse_key(key, value)?,
            _ => {}
        }
    }
    Ok(())
}

/// Nine significant digits, scientific notation, locale-independent.
pub fn fmt_sig(v: f64) -> String {
    format!("{v:.8e}")
}

/// Writes the per-iteration curve as CSV with LF line endings.
pub fn write_curve(curve: &LearningCurve, path: &Path) -> Result<()> {
    let mut text = String::from("iteration,mean_return,std_return,eval_return,baseline_b,mean_tau\n");
    for r in &curve.rows {
        let _ = writeln!(
            text,
            "{},{},{},{},{},{}",
            r.iteration,
            fmt_sig(r.mean_return),
            fmt_sig(r.std_return),
            fmt_sig(r.eval_return),
            fmt_sig(r.baseline_b),
            fmt_sig(r.mean_tau)
        );
    }
    fs::write(path, text).map_err(|e| PgpeError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Parses a curve CSV back; inverse of [`write_curve`] at printed precision.
pub fn read_curve(path: &Path) -> Result<LearningCurve> {
    let text = fs::read_to_string(path).map_err(|e| PgpeError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut rows = Vec::new();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(PgpeError::InvalidConfig(format!(
                "malformed curve row '{line}'"
            )));
        }
        rows.push(crate::runner::CurveRow {
            iteration: parse_key("iteration", f[0])?,
            mean_return: parse_key("mean_return", f[1])?,
            std_return: parse_key("std_return", f[2])?,
            eval_return: parse_key("eval_return", f[3])?,
            baseline_b: parse_key("baseline_b", f[4])?,
            mean_tau: parse_key("mean_tau", f[5])?,
        });
    }
    Ok(LearningCurve { rows })
}

fn write_policy(rho: &HyperParams, path: &Path) -> Result<()> {
    let mut text = String::new();
    for (i, v) in rho.eta.iter().enumerate() {
        let _ = writeln!(text, "eta {i} {v:.17e}");
    }
    for (i, v) in rho.tau.iter().enumerate() {
        let _ = writeln!(text, "tau {i} {v:.17e}");
    }
    fs::write(path, text).map_err(|e| PgpeError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn read_policy(path: &Path) -> Result<HyperParams> {
    let text = fs::read_to_string(path).map_err(|e| PgpeError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let (mut eta, mut tau) = (Vec::new(), Vec::new());
    for line in text.lines() {
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(PgpeError::InvalidConfig(format!(
                "malformed policy line '{line}'"
            )));
        }
        let value: f64 = parse_key("policy value", parts[2])?;
        match parts[0] {
            "eta" => eta.push(value),
            "tau" => tau.push(value),
            other => {
                return Err(PgpeError::InvalidConfig(format!(
                    "unknown policy row kind '{other}'"
                )))
            }
        }
    }
    HyperParams::new(eta, tau)
}

fn manifest_text(cfg: &ResolvedConfig, seed_paths: &[(u64, PathBuf)], started: &str, ended: &str) -> String {
    let mut m = String::new();
    let kv = |m: &mut String, k: &str, v: String| {
        let _ = writeln!(m, "{k} = {v}");
    };
    kv(&mut m, "code_version", env!("CARGO_PKG_VERSION").to_string());
    kv(&mut m, "start_time", started.to_string());
    kv(&mut m, "end_time", ended.to_string());
    kv(&mut m, "env", cfg.env.name().to_string());
    kv(&mut m, "estimator", cfg.run.estimator.to_string());
    kv(&mut m, "iters", cfg.run.iterations.to_string());
    kv(&mut m, "batch", cfg.run.batch_n.to_string());
    kv(&mut m, "buffer", cfg.run.buffer_nprime.to_string());
    kv(&mut m, "gamma", format!("{}", cfg.run.gamma));
    kv(&mut m, "lr", format!("{}", cfg.run.lr_eta));
    kv(&mut m, "lr_tau", format!("{}", cfg.run.lr_tau));
    kv(
        &mut m,
        "seed",
        cfg.run
            .seeds
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    kv(&mut m, "tau_init", format!("{}", cfg.run.tau_init));
    kv(&mut m, "tau_min", format!("{}", cfg.run.tau_min));
    kv(&mut m, "use_baseline", cfg.run.use_baseline.to_string());
    kv(&mut m, "eval_every", cfg.run.eval_every.to_string());
    if let Some(c) = cfg.run.log_weight_clamp {
        kv(&mut m, "log_weight_clamp", format!("{c}"));
    }
    kv(
        &mut m,
        "rollout_threads",
        cfg.run.rollout_threads.to_string(),
    );
    let e = &cfg.env_cfg;
    kv(&mut m, "env.dt", format!("{}", e.dt));
    kv(&mut m, "env.horizon", e.horizon_t.to_string());
    kv(&mut m, "env.kp", format!("{}", e.k_p));
    kv(&mut m, "env.kd", format!("{}", e.k_d));
    kv(&mut m, "env.alpha", format!("{}", e.reward_alpha));
    kv(&mut m, "env.beta", format!("{}", e.cost_beta));
    kv(&mut m, "env.joint_limit", format!("{}", e.joint_limit));
    kv(&mut m, "env.vel_limit", format!("{}", e.vel_limit));
    kv(
        &mut m,
        "env.shoulder_offset",
        format!("{},{},{}", e.shoulder_offset[0], e.shoulder_offset[1], e.shoulder_offset[2]),
    );
    kv(&mut m, "env.upper_arm_len", format!("{}", e.upper_arm_len));
    kv(&mut m, "env.forearm_len", format!("{}", e.forearm_len));
    kv(
        &mut m,
        "env.target",
        format!("{},{},{}", e.target[0], e.target[1], e.target[2]),
    );
    kv(&mut m, "env.cart_mass", format!("{}", e.cart_mass));
    kv(&mut m, "env.pole_mass", format!("{}", e.pole_mass));
    kv(&mut m, "env.pole_half_len", format!("{}", e.pole_half_len));
    kv(&mut m, "env.gravity", format!("{}", e.gravity));
    kv(&mut m, "env.force_k", format!("{}", e.force_k));
    kv(&mut m, "env.force_alpha", format!("{}", e.force_alpha));
    for (seed, path) in seed_paths {
        kv(&mut m, &format!("output.seed.{seed}"), path.display().to_string());
    }
    m
}

const PLOT_SCRIPT: &str = "\
set datafile separator ','
set xlabel 'number of update'
set ylabel 'cumulative reward'
set key left top
plot 'curve.csv' skip 1 using 1:2 with lines title 'batch mean return', \\
     'curve.csv' skip 1 using 1:4 with lines title 'mean-policy eval'
";

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| PgpeError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| PgpeError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn run_train(args: &TrainArgs) -> Result<()> {
    let cfg = resolve_config(args)?;
    let started = chrono::Utc::now().to_rfc3339();
    let env = cfg.env.build(&cfg.env_cfg)?;
    let (results, summary) = multi_seed_summary(&cfg.run, env.as_ref())?;

    ensure_dir(&cfg.out)?;
    let single = cfg.run.seeds.len() == 1;
    let mut seed_paths = Vec::new();
    for (seed, res) in cfg.run.seeds.iter().zip(&results) {
        let dir = if single {
            cfg.out.clone()
        } else {
            cfg.out.join(format!("seed_{seed}"))
        };
        ensure_dir(&dir)?;
        write_curve(&res.curve, &dir.join("curve.csv"))?;
        write_policy(&res.final_rho, &dir.join("final_policy.txt"))?;
        if cfg.plot {
            write_file(&dir.join("plot.gp"), PLOT_SCRIPT)?;
        }
        if let Some(last) = res.curve.rows.last() {
            println!(
                "seed {seed}: final mean return {:.6}, eval return {:.6}",
                last.mean_return, last.eval_return
            );
        }
        seed_paths.push((*seed, dir.join("curve.csv")));
    }
    if !single {
        let mut text = String::from("iteration,mean_return,std_return\n");
        for (it, mean, std) in &summary.rows {
            let _ = writeln!(text, "{},{},{}", it, fmt_sig(*mean), fmt_sig(*std));
        }
        write_file(&cfg.out.join("summary.csv"), &text)?;
    }
    let ended = chrono::Utc::now().to_rfc3339();
    write_file(
        &cfg.out.join("manifest.txt"),
        &manifest_text(&cfg, &seed_paths, &started, &ended),
    )?;
    Ok(())
}

pub fn run_eval(args: &EvalArgs) -> Result<()> {
    let env_choice = EnvChoice::parse(&args.env)?;
    let env = env_choice.build(&env_choice.default_env_cfg())?;
    let rho = read_policy(&args.policy)?;
    if rho.len() != env.theta_len() {
        return Err(PgpeError::DimMismatch(format!(
            "policy length {} vs environment parameter count {}",
            rho.len(),
            env.theta_len()
        )));
    }
    let (_, feat_len) = env.theta_shape();
    let theta = PolicyParams::new(rho.eta.clone(), feat_len)?;
    let mut rng = RngStream::new(args.seed);
    let (_, ret) = env.rollout(&theta, args.gamma, &mut rng)?;
    println!("mean-policy return: {}", fmt_sig(ret));
    Ok(())
}

/// Estimator verification on the analytic toy; returns true iff every check
/// passed.
pub fn run_oracle(args: &OracleArgs) -> Result<bool> {
    let n = args.samples.max(10);
    let root = RngStream::new(args.seed);
    let mut all_pass = true;
    let mut report = |name: &str, pass: bool, detail: String| {
        println!("{name}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
        all_pass &= pass;
    };

    // on-policy PGPE vs closed-form gradient at (eta, tau) = (0, 0.3)
    let rho = HyperParams::new(vec![0.0], vec![0.3])?;
    let (true_eta, true_tau) = toy_true_gradient(0.0, 0.3);
    let mut rng = root.substream(&[1]);
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let theta = sample_params(&rho, 1, &mut rng)?;
        let r = crate::envs::toy::toy_rollout(theta.as_slice()[0], &mut rng);
        samples.push((theta, r));
    }
    let g = pgpe_gradient(&samples, &rho)?;
    let rel_e = (g.d_eta[0] - true_eta).abs() / true_eta.abs();
    let rel_t = (g.d_tau[0] - true_tau).abs() / true_tau.abs();
    report(
        "PGPE gradient check",
        rel_e < 0.05 && rel_t < 0.05,
        format!("d_eta rel err {rel_e:.4}, d_tau rel err {rel_t:.4}"),
    );

    // importance-weighted estimate from an off-policy sampler, with the
    // optimal baseline subtracted (the raw estimator's tau component is too
    // noisy for a tight check even at 10^5 samples); median relative error
    // over independent replicates
    let sampler = HyperParams::new(vec![0.2], vec![0.3])?;
    let replicates = 20;
    let mut errs_e = Vec::with_capacity(replicates);
    let mut errs_t = Vec::with_capacity(replicates);
    for rep in 0..replicates {
        let mut rng = root.substream(&[2, rep as u64]);
        let buffer: Vec<BufferSample> = (0..n)
            .map(|_| {
                let theta = sample_params(&sampler, 1, &mut rng).unwrap();
                let ret = crate::envs::toy::toy_rollout(theta.as_slice()[0], &mut rng);
                BufferSample {
                    theta,
                    ret,
                    sampler_rho: sampler.clone(),
                }
            })
            .collect();
        let b = optimal_baseline(&buffer, &rho)?;
        let g = iwpgpe_gradient(&buffer, &rho, b)?;
        errs_e.push((g.d_eta[0] - true_eta).abs() / true_eta.abs());
        errs_t.push((g.d_tau[0] - true_tau).abs() / true_tau.abs());
    }
    let median = |xs: &mut Vec<f64>| {
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        0.5 * (xs[xs.len() / 2] + xs[(xs.len() - 1) / 2])
    };
    let rel_e = median(&mut errs_e);
    let rel_t = median(&mut errs_t);
    report(
        "IW-PGPE consistency check",
        rel_e < 0.05 && rel_t < 0.05,
        format!("median d_eta rel err {rel_e:.4}, median d_tau rel err {rel_t:.4}"),
    );

    // optimal baseline reduces the small-buffer estimator variance
    let mut rng = root.substream(&[3]);
    let reps = 1000;
    let mut plain = Vec::with_capacity(reps);
    let mut with_b = Vec::with_capacity(reps);
    for _ in 0..reps {
        let buf: Vec<BufferSample> = (0..10)
            .map(|_| {
                let theta = sample_params(&sampler, 1, &mut rng).unwrap();
                let ret = crate::envs::toy::toy_rollout(theta.as_slice()[0], &mut rng);
                BufferSample {
                    theta,
                    ret,
                    sampler_rho: sampler.clone(),
                }
            })
            .collect();
        let b = optimal_baseline(&buf, &rho)?;
        plain.push(iwpgpe_gradient(&buf, &rho, 0.0)?);
        with_b.push(iwpgpe_gradient(&buf, &rho, b)?);
    }
    let var = |xs: &[f64]| {
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
    };
    let v0: f64 = var(&plain.iter().map(|g| g.d_eta[0]).collect::<Vec<_>>())
        + var(&plain.iter().map(|g| g.d_tau[0]).collect::<Vec<_>>());
    let vb: f64 = var(&with_b.iter().map(|g| g.d_eta[0]).collect::<Vec<_>>())
        + var(&with_b.iter().map(|g| g.d_tau[0]).collect::<Vec<_>>());
    report(
        "optimal baseline variance check",
        vb < v0,
        format!("var with b* {vb:.4} < var with b=0 {v0:.4}"),
    );

    Ok(all_pass)
}

/// Top-level dispatch; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let outcome = match &cli.cmd {
        Cmd::Train(args) => run_train(args).map(|_| 0),
        Cmd::Eval(args) => run_eval(args).map(|_| 0),
        Cmd::Oracle(args) => run_oracle(args).map(|ok| if ok { 0 } else { 1 }),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
