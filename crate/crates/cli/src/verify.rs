use crate::input::{emit, parse_reals};
use crate::EXIT_CHECK_FAILED;
use anyhow::{anyhow, Result};
use attrsparse::theory::{
    check_theorem1_bound, check_theorem1_limit, check_theorem1_zero, check_theorem3_random, draw_bound_configuration,
    FeatureSampler, LemmaConstruction, NoiseKind, TheoremCheckResult, VerifyReport,
};
use attrsparse::LossSpec;
use clap::Args;
use serde_json::json;
use std::path::PathBuf;
use std::process::ExitCode;

pub const THEOREM_IDS: [&str; 4] = ["thm1-zero", "thm1-bound", "thm3", "lemmaD1"];

/// Scales at which the limit residual is tracked.
const LIMIT_SCALES: [f64; 4] = [1.0, 0.1, 0.01, 0.001];

/// Offsets Monte-Carlo seeds away from configuration seeds.
const MC_SEED_OFFSET: u64 = 1 << 32;

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// thm1-zero, thm1-bound, thm3 or lemmaD1.
    theorem: String,
    /// Monte-Carlo samples per check.
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    /// Random draws: configurations per loss for thm1-bound (default 50),
    /// identity draws per loss for thm3 (1000), constructions for lemmaD1 (100).
    #[arg(long)]
    trials: Option<usize>,
    /// thm1-bound: how many of the configurations also get the limit check.
    #[arg(long, default_value_t = 10)]
    limit_configs: usize,
    /// thm1-bound: number of features per configuration (1 to 12).
    #[arg(long, default_value_t = 6)]
    dim: usize,
    /// Restrict to one loss (default: all three).
    #[arg(long)]
    loss: Option<String>,
    /// thm1-zero: adversarial budget.
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    /// thm1-zero: class-conditional feature means.
    #[arg(long, default_value = "1,0.5,0,-0.5,-1", allow_hyphen_values = true)]
    a: String,
    /// thm1-zero: noise standard deviations.
    #[arg(long, default_value = "1,0.5,1.5,1,2")]
    noise_sd: String,
    /// thm1-zero: probability of the positive class.
    #[arg(long, default_value_t = 0.4)]
    balance: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report JSON (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn limit_as_check(spec: LossSpec, k: usize, l: &attrsparse::theory::LimitCheck) -> TheoremCheckResult {
    let last = l.steps.last().expect("at least one scale");
    TheoremCheckResult {
        label: format!("{spec} limit config {k} (monotone {}, limit {})", l.monotone, l.equal_in_limit),
        estimate: last.covariance_residual,
        bound: 3.0 * last.covariance_se,
        standard_error: last.covariance_se,
        passed: l.passed(),
        samples: l.samples,
    }
}

fn report(args: &VerifyArgs, losses: &[LossSpec]) -> Result<VerifyReport> {
    let loss_names: Vec<&str> = losses.iter().map(|l| l.name()).collect();
    let mut checks = Vec::new();
    let r = match args.theorem.as_str() {
        "thm1-zero" => {
            let sampler = FeatureSampler::new(parse_reals(&args.a)?, parse_reals(&args.noise_sd)?, NoiseKind::Gaussian, args.balance)?;
            for (k, &spec) in losses.iter().enumerate() {
                checks.extend(check_theorem1_zero(spec, args.eps, &sampler, args.n, args.seed + k as u64)?);
            }
            let config = json!({"losses": loss_names, "sampler": sampler, "epsilon": args.eps, "n": args.n, "seed": args.seed});
            VerifyReport::new("thm1-zero", config, checks)
        }
        "thm1-bound" => {
            let trials = args.trials.unwrap_or(50);
            let mut configs = Vec::new();
            for &spec in losses {
                for k in 0..trials {
                    let c = draw_bound_configuration(spec, args.dim, args.seed + k as u64)?;
                    let mc_seed = args.seed + k as u64 + MC_SEED_OFFSET;
                    checks.push(check_theorem1_bound(spec, &c.wspec, c.epsilon, &c.sampler, args.n, mc_seed)?);
                    if k < args.limit_configs {
                        let l = check_theorem1_limit(spec, &c.wspec, c.epsilon, &c.sampler, args.n, mc_seed, &LIMIT_SCALES)?;
                        checks.push(limit_as_check(spec, k, &l));
                    }
                    configs.push(json!({"loss": spec, "index": k, "configuration": c}));
                }
            }
            let config = json!({
                "losses": loss_names, "trials": trials, "limit_configs": args.limit_configs,
                "dim": args.dim, "n": args.n, "seed": args.seed, "scales": LIMIT_SCALES,
                "configurations": configs,
            });
            VerifyReport::new("thm1-bound", config, checks)
        }
        "thm3" => {
            let trials = args.trials.unwrap_or(1000);
            for (k, &spec) in losses.iter().enumerate() {
                checks.extend(check_theorem3_random(spec, trials, args.seed + k as u64)?);
            }
            let config = json!({"losses": loss_names, "trials": trials, "seed": args.seed});
            VerifyReport::new("thm3", config, checks)
        }
        "lemmaD1" => {
            let trials = args.trials.unwrap_or(100);
            let mut constructions = Vec::new();
            for k in 0..trials as u64 {
                let c = LemmaConstruction::random(args.seed + k);
                checks.push(c.check(args.n, args.seed + k + MC_SEED_OFFSET)?);
                constructions.push(c);
            }
            let config = json!({"trials": trials, "n": args.n, "seed": args.seed, "constructions": constructions});
            VerifyReport::new("lemmaD1", config, checks)
        }
        other => {
            return Err(anyhow!(
                "unknown theorem id `{other}`; valid ids: {}",
                THEOREM_IDS.join(", ")
            ))
        }
    };
    Ok(r)
}

pub fn run(args: VerifyArgs) -> Result<ExitCode> {
    let losses = match &args.loss {
        Some(l) => vec![l.parse::<LossSpec>()?],
        None => LossSpec::ALL.to_vec(),
    };
    let r = report(&args, &losses)?;
    emit(args.out.as_deref(), &serde_json::to_string_pretty(&r)?)?;
    let failed = r.checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        eprintln!("{}: {failed} of {} checks failed", r.theorem, r.checks.len());
        return Ok(ExitCode::from(EXIT_CHECK_FAILED));
    }
    eprintln!("{}: all {} checks passed", r.theorem, r.checks.len());
    Ok(ExitCode::SUCCESS)
}
