use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use accel_rb::fisher;
use accel_rb::gatesim;
use accel_rb::harness::{self, ExperimentConfig, Scenario};
use accel_rb::lsf::{lsf_interleaved_estimate, split_points};
use accel_rb::smc::run_smc;
use accel_rb::{Error, ModelParams, Result};

#[derive(Parser)]
#[command(name = "accel-rb", version, about = "Bayesian and least-squares interleaved randomized benchmarking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path; stdout for single-document commands when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of trials; overrides the configuration.
    #[arg(long)]
    trials: Option<usize>,
    /// SMC particle count; overrides the configuration.
    #[arg(long)]
    particles: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PriorChoice {
    Bad,
    Good,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a dataset (mode,m,shots,survivals) from the configured truth or noise.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Shots per sequence length.
        #[arg(long)]
        shots: Option<u64>,
    },
    /// Least-squares fit of a dataset; the starting point is drawn from the prior.
    FitLsf {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
    },
    /// Sequential Monte Carlo posterior for a dataset.
    FitSmc {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
    },
    /// Information, bounds and optimal lengths; the optimal-length landscape for `fisher_landscape` configs.
    Fisher {
        #[command(flatten)]
        common: Common,
    },
    /// Risk sweep over shots or largest length.
    Risk {
        #[command(flatten)]
        common: Common,
    },
    /// Gate-level study against the twirl ground truth.
    GateStudy {
        #[command(flatten)]
        common: Common,
        /// Preset prior used when no configuration is given.
        #[arg(long, value_enum, default_value = "bad")]
        prior: PriorChoice,
    },
}

fn load(common: &Common, default: impl FnOnce() -> ExperimentConfig) -> Result<ExperimentConfig> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => default(),
    };
    if let Some(seed) = common.seed {
        config.rng_seed = seed;
    }
    if let Some(t) = common.trials {
        config.n_trials = t;
    }
    if let Some(n) = common.particles {
        config.smc.n_particles = n;
    }
    if let Some(out) = &common.out {
        config.output_path = out.clone();
    }
    config.validate()?;
    Ok(config)
}

fn emit_json(out: Option<&Path>, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.into()))?;
    match out {
        Some(p) => writeln!(File::create(p)?, "{text}")?,
        None => writeln!(io::stdout().lock(), "{text}")?,
    }
    Ok(())
}

fn read_data(path: &Path) -> Result<Vec<accel_rb::Datum>> {
    harness::read_dataset(File::open(path)?)
}

fn truth_or_prior_mean(config: &ExperimentConfig) -> ModelParams {
    config.true_params.unwrap_or(config.prior.mean)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { common, shots } => {
            let config = load(&common, || ExperimentConfig::preset(Scenario::RiskVsK))?;
            let shots = shots.unwrap_or(config.shots);
            let designs = harness::interleave_designs(
                &config.reference_lengths.values()?,
                &config.interleaved_lengths.values()?,
                shots,
            );
            let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
            let data = match &config.noise {
                Some(noise) => {
                    let gs = gatesim::make_noisy_gateset(noise)?;
                    gatesim::sample_gate_data(&gs, &designs, &config.interleaved_gate, false, &mut rng)?.data
                }
                None => gatesim::sample_model_data(&truth_or_prior_mean(&config), &designs, &mut rng)?,
            };
            match &common.out {
                Some(p) => harness::write_dataset(File::create(p)?, &data),
                None => harness::write_dataset(io::stdout().lock(), &data),
            }
        }
        Command::FitLsf { common, data } => {
            let config = load(&common, || ExperimentConfig::preset(Scenario::RiskVsK))?;
            let data = read_data(&data)?;
            let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
            let guess = config.prior.sample(&mut rng)?;
            let (r, i) = split_points(&data);
            let est = lsf_interleaved_estimate(&r, &i, &guess)?;
            emit_json(
                common.out.as_deref(),
                &serde_json::json!({ "guess": guess, "estimate": est.estimate, "diagnostics": est.diagnostics }),
            )
        }
        Command::FitSmc { common, data } => {
            let config = load(&common, || ExperimentConfig::preset(Scenario::RiskVsK))?;
            let data = read_data(&data)?;
            let smc = accel_rb::smc::SmcConfig {
                rng_seed: config.rng_seed,
                ..config.smc
            };
            let out = run_smc(&config.prior, &data, &smc)?;
            let cov: Vec<Vec<f64>> = (0..4).map(|i| (0..4).map(|j| out.covariance[(i, j)]).collect()).collect();
            emit_json(
                common.out.as_deref(),
                &serde_json::json!({
                    "estimate": out.estimate,
                    "covariance": cov,
                    "posterior_variance_trace": out.posterior_variance(),
                    "diagnostics": out.diagnostics,
                }),
            )
        }
        Command::Fisher { common } => {
            let config = load(&common, || ExperimentConfig::preset(Scenario::FisherLandscape))?;
            if config.scenario == Scenario::FisherLandscape {
                for p in harness::run_and_write(&config)? {
                    eprintln!("wrote {}", p.display());
                }
                return Ok(());
            }
            let x = truth_or_prior_mean(&config);
            let designs = harness::interleave_designs(
                &config.reference_lengths.values()?,
                &config.interleaved_lengths.values()?,
                config.shots,
            );
            let info = fisher::total_information(&x, &designs)?;
            let bound = info.pseudo_inverse();
            let mut rng = harness::trial_rng(config.rng_seed, u64::MAX);
            let j = fisher::bayesian_information_matrix(&config.prior, &designs, config.bim_samples, &mut rng)?;
            let rows = |m: &nalgebra::Matrix4<f64>| -> Vec<Vec<f64>> {
                (0..4).map(|i| (0..4).map(|k| m[(i, k)]).collect()).collect()
            };
            let m_range = 1..=config.landscape.m_max;
            emit_json(
                common.out.as_deref(),
                &serde_json::json!({
                    "params": x,
                    "information": rows(info.matrix()),
                    "rank": info.rank(),
                    "crb": rows(bound.matrix()),
                    "crb_trace": bound.trace(),
                    "bcrb_trace": j.pseudo_inverse().trace(),
                    "optimal_m_interleaved": fisher::optimal_m(&x, accel_rb::Mode::Interleaved, m_range.clone())?,
                    "optimal_m_reference": fisher::optimal_m(&x, accel_rb::Mode::Reference, m_range)?,
                }),
            )
        }
        Command::Risk { common } => {
            let config = load(&common, || ExperimentConfig::preset(Scenario::RiskVsK))?;
            if !matches!(config.scenario, Scenario::RiskVsK | Scenario::RiskVsMmax) {
                return Err(Error::Config("risk needs a risk_vs_K or risk_vs_mmax configuration".into()));
            }
            for p in harness::run_and_write(&config)? {
                eprintln!("wrote {}", p.display());
            }
            Ok(())
        }
        Command::GateStudy { common, prior } => {
            let config = load(&common, || match prior {
                PriorChoice::Bad => ExperimentConfig::gate_study_bad_prior(),
                PriorChoice::Good => ExperimentConfig::gate_study_good_prior(),
            })?;
            if config.scenario != Scenario::GateStudy {
                return Err(Error::Config("gate-study needs a gate_study configuration".into()));
            }
            for p in harness::run_and_write(&config)? {
                eprintln!("wrote {}", p.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
