//! Experiment orchestration: risk sweeps, gate-level studies and the
//! optimal-length landscape, written as deterministic CSV plus a JSON sidecar.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fisher::{self, InfoMatrix};
use crate::gatesim::{self, GateNoise, NoiseConfig, TrueParams};
use crate::lsf::{lsf_interleaved_estimate, split_points};
use crate::model::{Datum, ExperimentDesign, Mode, ModelParams};
use crate::prior::PriorSpec;
use crate::smc::{run_smc, ParticleCloud, SmcConfig};

/// Stream reserved for Bayesian-information sampling; trial streams count up from zero.
const BIM_STREAM: u64 = u64::MAX;

const HISTOGRAM_BINS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    #[serde(rename = "risk_vs_K", alias = "risk_vs_k")]
    RiskVsK,
    #[serde(rename = "risk_vs_mmax")]
    RiskVsMmax,
    #[serde(rename = "gate_study")]
    GateStudy,
    #[serde(rename = "fisher_landscape")]
    FisherLandscape,
}

/// Sequence lengths, either listed or as an inclusive arithmetic range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LengthGrid {
    List(Vec<u32>),
    Range { start: u32, stop: u32, step: u32 },
}

impl LengthGrid {
    pub fn range(start: u32, stop: u32, step: u32) -> Self {
        LengthGrid::Range { start, stop, step }
    }

    pub fn values(&self) -> Result<Vec<u32>> {
        let v = match self {
            LengthGrid::List(v) => v.clone(),
            LengthGrid::Range { start, stop, step } => {
                if *step == 0 {
                    return Err(Error::Config("length grid step must be positive".into()));
                }
                (*start..=*stop).step_by(*step as usize).collect()
            }
        };
        if v.is_empty() {
            return Err(Error::Config("length grid is empty".into()));
        }
        if v.contains(&0) {
            return Err(Error::Config("sequence lengths must be at least 1".into()));
        }
        Ok(v)
    }
}

/// Prior placed relative to the ground truth:
/// `mean = truth + offset_sigmas * sigma` componentwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativePrior {
    pub sigma: [f64; 4],
    pub offset_sigmas: [f64; 4],
}

impl RelativePrior {
    pub fn resolve(&self, truth: &ModelParams) -> Result<PriorSpec> {
        let t = truth.to_array();
        let mut mean = [0.0; 4];
        for i in 0..4 {
            mean[i] = t[i] + self.offset_sigmas[i] * self.sigma[i];
        }
        PriorSpec::new(ModelParams::from_array(mean), self.sigma)
            .map_err(|e| Error::Config(format!("relative prior: {e}")))
    }

    pub fn offset_distance(&self) -> f64 {
        self.offset_sigmas.iter().map(|o| o * o).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeConfig {
    pub p_tilde: f64,
    pub p_ref: f64,
    pub a_values: Vec<f64>,
    /// B held fixed across the A sweep.
    pub fixed_b: f64,
    pub b_values: Vec<f64>,
    /// A held fixed across the B sweep.
    pub fixed_a: f64,
    pub fidelities: Vec<f64>,
    pub m_max: u32,
}

impl Default for LandscapeConfig {
    fn default() -> Self {
        LandscapeConfig {
            p_tilde: 0.9988,
            p_ref: 0.9978,
            a_values: (1..=10).map(|i| i as f64 * 0.05).collect(),
            fixed_b: 0.5,
            b_values: (0..=15).map(|i| i as f64 * 0.05).collect(),
            fixed_a: 0.25,
            fidelities: vec![0.99, 0.995, 0.999],
            m_max: 5000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub prior: PriorSpec,
    /// Overrides `prior` with one centred relative to the ground truth.
    pub relative_prior: Option<RelativePrior>,
    /// Fixed truth for risk sweeps; drawn from the prior per trial when absent.
    pub true_params: Option<ModelParams>,
    pub noise: Option<NoiseConfig>,
    /// Gate interleaved in the gate-level study.
    pub interleaved_gate: String,
    pub reference_lengths: LengthGrid,
    pub interleaved_lengths: LengthGrid,
    /// Shot counts swept by `risk_vs_K`.
    pub k_values: Vec<u64>,
    /// Largest lengths swept by `risk_vs_mmax`, each using `{1, 11, ..., m_max}`.
    pub m_max_values: Vec<u32>,
    /// Shots per length where the shot count is not swept.
    pub shots: u64,
    pub n_trials: usize,
    pub smc: SmcConfig,
    pub bim_samples: usize,
    pub landscape: LandscapeConfig,
    pub output_path: PathBuf,
    /// Write one row per trial next to the summary.
    pub per_trial_output: bool,
    /// Dump every sampled sequence of the first gate-study trial.
    pub record_sequences: bool,
    pub rng_seed: u64,
}

impl ExperimentConfig {
    /// Desk-scale defaults for `scenario`.
    pub fn preset(scenario: Scenario) -> Self {
        let base = ExperimentConfig {
            scenario,
            prior: PriorSpec::standard(),
            relative_prior: None,
            true_params: None,
            noise: None,
            interleaved_gate: "X".into(),
            reference_lengths: LengthGrid::range(1, 100, 1),
            interleaved_lengths: LengthGrid::range(1, 50, 1),
            k_values: vec![1, 3, 10, 32, 100],
            m_max_values: vec![21, 51, 101, 201, 401],
            shots: 1000,
            n_trials: 100,
            smc: SmcConfig::default(),
            bim_samples: fisher::DEFAULT_BIM_SAMPLES,
            landscape: LandscapeConfig::default(),
            output_path: PathBuf::from(format!("{}.csv", scenario.file_stem())),
            per_trial_output: false,
            record_sequences: false,
            rng_seed: 0,
        };
        match scenario {
            Scenario::RiskVsK | Scenario::FisherLandscape => base,
            Scenario::RiskVsMmax => ExperimentConfig {
                n_trials: 50,
                ..base
            },
            Scenario::GateStudy => ExperimentConfig::gate_study_bad_prior(),
        }
    }

    /// Gate-level study with the prior mean 6.9 prior standard deviations
    /// from the truth along the decay parameters, `m_ref in {1, 11, ..., 191}`, `m_C in {2, 12, ..., 192}`, K = 1000.
    pub fn gate_study_bad_prior() -> Self {
        let o = 6.9 / std::f64::consts::SQRT_2;
        ExperimentConfig {
            scenario: Scenario::GateStudy,
            prior: PriorSpec::standard(),
            relative_prior: Some(RelativePrior {
                sigma: [0.005, 0.005, 0.02, 0.02],
                offset_sigmas: [-o, -o, 0.0, 0.0],
            }),
            true_params: None,
            noise: Some(tuned_noise()),
            interleaved_gate: "X".into(),
            reference_lengths: LengthGrid::range(1, 191, 10),
            interleaved_lengths: LengthGrid::range(2, 192, 10),
            k_values: Vec::new(),
            m_max_values: Vec::new(),
            shots: 1000,
            n_trials: 20,
            // A prior far from the truth needs wider jitter and gentler
            // updates for the cloud to migrate before it collapses.
            smc: SmcConfig {
                liu_west_a: 0.85,
                max_shots_per_update: 50,
                ..SmcConfig::default()
            },
            bim_samples: fisher::DEFAULT_BIM_SAMPLES,
            landscape: LandscapeConfig::default(),
            output_path: PathBuf::from("gate_study_bad_prior.csv"),
            per_trial_output: false,
            record_sequences: false,
            rng_seed: 0,
        }
    }

    /// Gate-level study with a prior one standard deviation from the truth,
    /// `m_ref in {1, 11, ..., 91}`, `m_C in {2, 12, ..., 192}`, K = 100.
    pub fn gate_study_good_prior() -> Self {
        ExperimentConfig {
            relative_prior: Some(RelativePrior {
                sigma: [0.005, 0.005, 0.02, 0.02],
                offset_sigmas: [-FRAC_1_SQRT_2, -FRAC_1_SQRT_2, 0.0, 0.0],
            }),
            reference_lengths: LengthGrid::range(1, 91, 10),
            shots: 100,
            output_path: PathBuf::from("gate_study_good_prior.csv"),
            ..ExperimentConfig::gate_study_bad_prior()
        }
    }

    /// Parses TOML, filling unspecified fields from the preset of its `scenario`.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let user: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        let scenario: Scenario = user
            .get("scenario")
            .ok_or_else(|| Error::Config("missing field `scenario`".into()))?
            .clone()
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("scenario: {e}")))?;
        let preset = match user.get("preset").and_then(|v| v.as_str()) {
            None => ExperimentConfig::preset(scenario),
            Some("bad_prior") if scenario == Scenario::GateStudy => ExperimentConfig::gate_study_bad_prior(),
            Some("good_prior") if scenario == Scenario::GateStudy => ExperimentConfig::gate_study_good_prior(),
            Some(other) => return Err(Error::Config(format!("unknown preset `{other}`"))),
        };
        let mut merged = toml::Table::try_from(&preset).map_err(|e| Error::Config(e.to_string()))?;
        let mut user = user;
        user.remove("preset");
        merge_tables(&mut merged, user);
        let config: ExperimentConfig = toml::Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        ExperimentConfig::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::Config("n_trials must be at least 1".into()));
        }
        self.smc.validate()?;
        self.prior.validate().map_err(|e| Error::Config(format!("prior: {e}")))?;
        match self.scenario {
            Scenario::RiskVsK | Scenario::GateStudy => {
                self.reference_lengths.values()?;
                self.interleaved_lengths.values()?;
            }
            _ => {}
        }
        match self.scenario {
            Scenario::RiskVsK if self.k_values.is_empty() || self.k_values.contains(&0) => {
                Err(Error::Config("k_values must be nonempty and positive".into()))
            }
            Scenario::RiskVsMmax if self.m_max_values.is_empty() || self.m_max_values.contains(&0) => {
                Err(Error::Config("m_max_values must be nonempty and positive".into()))
            }
            Scenario::RiskVsMmax | Scenario::GateStudy if self.shots == 0 => {
                Err(Error::Config("shots must be positive".into()))
            }
            Scenario::GateStudy if self.noise.is_none() => {
                Err(Error::Config("gate_study needs a noise configuration".into()))
            }
            Scenario::FisherLandscape if self.landscape.m_max == 0 => {
                Err(Error::Config("landscape m_max must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    /// Differences from the published study sizes, echoed into the metadata.
    pub fn scale_notes(&self) -> Vec<String> {
        let mut notes = Vec::new();
        match self.scenario {
            Scenario::RiskVsK => {
                notes.push(format!("shot grid K = {:?} (log-spaced)", self.k_values));
                if self.n_trials != 100 {
                    notes.push(format!("{} trials per grid point instead of 100", self.n_trials));
                }
            }
            Scenario::RiskVsMmax => {
                notes.push(format!("m_max grid = {:?}", self.m_max_values));
                if self.n_trials != 100 {
                    notes.push(format!("{} trials per grid point instead of 100", self.n_trials));
                }
                if self.shots != 1000 {
                    notes.push(format!("K = {} instead of 1000", self.shots));
                }
            }
            Scenario::GateStudy => {
                notes.push("analytic depolarizing-plus-overrotation noise replaces the cumulant simulation".into());
                notes.push(format!("{} repetitions", self.n_trials));
            }
            Scenario::FisherLandscape => {
                notes.push(format!("integer scan over m in 1..={}", self.landscape.m_max));
            }
        }
        if self.smc.n_particles != 4000 {
            notes.push(format!("{} particles instead of 4000", self.smc.n_particles));
        }
        notes
    }
}

impl Scenario {
    fn file_stem(self) -> &'static str {
        match self {
            Scenario::RiskVsK => "risk_vs_K",
            Scenario::RiskVsMmax => "risk_vs_mmax",
            Scenario::GateStudy => "gate_study",
            Scenario::FisherLandscape => "fisher_landscape",
        }
    }
}

fn merge_tables(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge_tables(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Noise giving `(p_tilde, p_ref)` close to `(0.998, 0.996)` with `X` interleaved.
pub fn tuned_noise() -> NoiseConfig {
    let mut noise = NoiseConfig {
        depolarizing_strength: 0.00395,
        overrotation_angle: 0.02,
        ..Default::default()
    };
    noise.per_gate.insert(
        "X".into(),
        GateNoise {
            depolarizing_strength: 0.00213,
            overrotation_angle: 0.02,
        },
    );
    noise
}

/// Generator for one trial: the master seed with a dedicated stream.
pub fn trial_rng(master: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng
}

fn trial_stream(coordinate: usize, trial: usize) -> u64 {
    ((coordinate as u64) << 32) | trial as u64
}

/// Designs ordered by ascending `m`, reference before interleaved at equal `m`.
pub fn interleave_designs(reference: &[u32], interleaved: &[u32], shots: u64) -> Vec<(ExperimentDesign, u64)> {
    let mut out: Vec<(ExperimentDesign, u64)> = reference
        .iter()
        .map(|&m| (ExperimentDesign::reference(m), shots))
        .chain(interleaved.iter().map(|&m| (ExperimentDesign::interleaved(m), shots)))
        .collect();
    out.sort_by_key(|(e, _)| (e.m, e.mode == Mode::Interleaved));
    out
}

fn squared_errors(est: &ModelParams, truth: &ModelParams) -> [f64; 4] {
    let (e, t) = (est.to_array(), truth.to_array());
    [0, 1, 2, 3].map(|i| (e[i] - t[i]).powi(2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Estimator {
    Smc,
    Lsf,
}

/// One estimator on one trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub coordinate: u64,
    pub trial: usize,
    pub estimator: Estimator,
    pub seed_stream: u64,
    pub failed: bool,
    pub error: String,
    pub true_p_tilde: f64,
    pub true_p_ref: f64,
    pub true_a: f64,
    pub true_b: f64,
    pub guess_p_tilde: Option<f64>,
    pub guess_p_ref: Option<f64>,
    pub guess_a: Option<f64>,
    pub guess_b: Option<f64>,
    pub est_p_tilde: Option<f64>,
    pub est_p_ref: Option<f64>,
    pub est_a: Option<f64>,
    pub est_b: Option<f64>,
    pub sq_err_p_tilde: Option<f64>,
    pub sq_err_p_ref: Option<f64>,
    pub sq_err_a: Option<f64>,
    pub sq_err_b: Option<f64>,
    pub mse_trace: Option<f64>,
    pub posterior_var_trace: Option<f64>,
    pub bcrb_trace: f64,
    pub min_ess: Option<f64>,
    pub resample_count: Option<usize>,
    pub ess_warning: Option<bool>,
}

impl TrialRecord {
    fn new(coordinate: u64, trial: usize, estimator: Estimator, stream: u64, truth: &ModelParams, bcrb_trace: f64) -> Self {
        TrialRecord {
            coordinate,
            trial,
            estimator,
            seed_stream: stream,
            failed: false,
            error: String::new(),
            true_p_tilde: truth.p_tilde,
            true_p_ref: truth.p_ref,
            true_a: truth.a,
            true_b: truth.b,
            guess_p_tilde: None,
            guess_p_ref: None,
            guess_a: None,
            guess_b: None,
            est_p_tilde: None,
            est_p_ref: None,
            est_a: None,
            est_b: None,
            sq_err_p_tilde: None,
            sq_err_p_ref: None,
            sq_err_a: None,
            sq_err_b: None,
            mse_trace: None,
            posterior_var_trace: None,
            bcrb_trace,
            min_ess: None,
            resample_count: None,
            ess_warning: None,
        }
    }

    fn set_estimate(&mut self, est: &ModelParams, truth: &ModelParams) {
        self.est_p_tilde = Some(est.p_tilde);
        self.est_p_ref = Some(est.p_ref);
        self.est_a = Some(est.a);
        self.est_b = Some(est.b);
        let se = squared_errors(est, truth);
        self.sq_err_p_tilde = Some(se[0]);
        self.sq_err_p_ref = Some(se[1]);
        self.sq_err_a = Some(se[2]);
        self.sq_err_b = Some(se[3]);
        self.mse_trace = Some(se.iter().sum());
    }

    fn set_guess(&mut self, g: &ModelParams) {
        self.guess_p_tilde = Some(g.p_tilde);
        self.guess_p_ref = Some(g.p_ref);
        self.guess_a = Some(g.a);
        self.guess_b = Some(g.b);
    }

    fn fail(&mut self, e: &Error) {
        self.failed = true;
        self.error = format!("{}: {e}", e.category());
    }

    pub fn estimate(&self) -> Option<ModelParams> {
        Some(ModelParams::new(self.est_p_tilde?, self.est_p_ref?, self.est_a?, self.est_b?))
    }

    pub fn truth(&self) -> ModelParams {
        ModelParams::new(self.true_p_tilde, self.true_p_ref, self.true_a, self.true_b)
    }
}

/// Runs SMC and LSF on one simulated dataset.
#[allow(clippy::too_many_arguments)]
fn run_trial(
    config: &ExperimentConfig,
    prior: &PriorSpec,
    designs: &[(ExperimentDesign, u64)],
    coordinate: u64,
    stream: u64,
    bcrb_trace: f64,
    data_source: &dyn Fn(&ModelParams, &mut ChaCha8Rng) -> Result<Vec<Datum>>,
    fixed_truth: Option<ModelParams>,
    trial: usize,
) -> Result<(TrialRecord, TrialRecord)> {
    let mut rng = trial_rng(config.rng_seed, stream);
    let truth = match fixed_truth {
        Some(t) => t,
        None => prior.sample(&mut rng)?,
    };
    let data = data_source(&truth, &mut rng)?;
    debug_assert_eq!(data.len(), designs.len());
    let guess = prior.sample(&mut rng)?;
    let smc_seed: u64 = rng.random();

    let mut smc_rec = TrialRecord::new(coordinate, trial, Estimator::Smc, stream, &truth, bcrb_trace);
    let smc_config = SmcConfig {
        rng_seed: smc_seed,
        ..config.smc
    };
    match run_smc(prior, &data, &smc_config) {
        Ok(out) => {
            smc_rec.set_estimate(&out.estimate, &truth);
            smc_rec.posterior_var_trace = Some(out.posterior_variance());
            smc_rec.min_ess = Some(out.diagnostics.min_ess);
            smc_rec.resample_count = Some(out.diagnostics.resample_count);
            smc_rec.ess_warning = Some(out.diagnostics.ess_warning);
        }
        Err(e) => smc_rec.fail(&e),
    }

    let mut lsf_rec = TrialRecord::new(coordinate, trial, Estimator::Lsf, stream, &truth, bcrb_trace);
    lsf_rec.set_guess(&guess);
    let (ref_pts, int_pts) = split_points(&data);
    match lsf_interleaved_estimate(&ref_pts, &int_pts, &guess) {
        Ok(est) => lsf_rec.set_estimate(&est.estimate, &truth),
        Err(e) => lsf_rec.fail(&e),
    }
    Ok((smc_rec, lsf_rec))
}

/// Aggregate of one estimator at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskRow {
    pub estimator: Estimator,
    /// `K` or `m_max`, depending on the scenario.
    pub coordinate: u64,
    pub n_trials: usize,
    pub n_failed: usize,
    pub mse_trace: f64,
    pub mse_trace_se: f64,
    pub mse_p_tilde: f64,
    pub mse_p_tilde_se: f64,
    /// Trace of the pseudo-inverse of the Bayesian information matrix.
    pub bcrb_trace: f64,
    /// Trace of `(J + J_prior)^-1`, which includes the prior's own information.
    pub bcrb_prior_trace: Option<f64>,
    pub mean_posterior_var_trace: Option<f64>,
    /// `mse_trace` divided by the previous grid point's value for this estimator.
    pub mse_ratio_prev: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RiskReport {
    pub scenario: Scenario,
    pub rows: Vec<RiskRow>,
    #[serde(skip)]
    pub trials: Vec<TrialRecord>,
}

impl RiskReport {
    pub fn row(&self, estimator: Estimator, coordinate: u64) -> Option<&RiskRow> {
        self.rows
            .iter()
            .find(|r| r.estimator == estimator && r.coordinate == coordinate)
    }
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

fn aggregate(
    estimator: Estimator,
    coordinate: u64,
    records: &[&TrialRecord],
    bounds: (f64, Option<f64>),
) -> RiskRow {
    let ok: Vec<&&TrialRecord> = records.iter().filter(|r| !r.failed).collect();
    let traces: Vec<f64> = ok.iter().filter_map(|r| r.mse_trace).collect();
    let pt: Vec<f64> = ok.iter().filter_map(|r| r.sq_err_p_tilde).collect();
    let (mse_trace, mse_trace_se) = mean_and_se(&traces);
    let (mse_p_tilde, mse_p_tilde_se) = mean_and_se(&pt);
    let post: Vec<f64> = ok.iter().filter_map(|r| r.posterior_var_trace).collect();
    RiskRow {
        estimator,
        coordinate,
        n_trials: records.len(),
        n_failed: records.len() - ok.len(),
        mse_trace,
        mse_trace_se,
        mse_p_tilde,
        mse_p_tilde_se,
        bcrb_trace: bounds.0,
        bcrb_prior_trace: bounds.1,
        mean_posterior_var_trace: (!post.is_empty()).then(|| post.iter().sum::<f64>() / post.len() as f64),
        mse_ratio_prev: None,
    }
}

/// Bayesian bounds for one design set: the plain pseudo-inverse and the
/// form including prior information (absent for pinned priors).
fn bayesian_bounds(j: &InfoMatrix, prior: &PriorSpec) -> (f64, Option<f64>) {
    let plain = j.pseudo_inverse().trace();
    let with_prior = fisher::prior_information(prior)
        .ok()
        .map(|jp| (*j + jp).pseudo_inverse().trace());
    (plain, with_prior)
}

type BimFn<'a> = dyn Fn(usize, &[(ExperimentDesign, u64)]) -> Result<InfoMatrix> + 'a;

fn run_sweep(
    config: &ExperimentConfig,
    grid: &[(u64, Vec<(ExperimentDesign, u64)>)],
    bim: &BimFn<'_>,
) -> Result<RiskReport> {
    let prior = config.prior;
    let mut rows = Vec::new();
    let mut trials = Vec::new();
    let sampler = |designs: Vec<(ExperimentDesign, u64)>| {
        move |x: &ModelParams, rng: &mut ChaCha8Rng| gatesim::sample_model_data(x, &designs, rng)
    };
    for (ci, (coordinate, designs)) in grid.iter().enumerate() {
        let j = bim(ci, designs)?;
        let bounds = bayesian_bounds(&j, &prior);
        let source = sampler(designs.clone());
        let results: Vec<Result<(TrialRecord, TrialRecord)>> = (0..config.n_trials)
            .into_par_iter()
            .map(|t| {
                run_trial(
                    config,
                    &prior,
                    designs,
                    *coordinate,
                    trial_stream(ci, t),
                    bounds.0,
                    &source,
                    config.true_params,
                    t,
                )
            })
            .collect();
        let mut smc = Vec::with_capacity(config.n_trials);
        let mut lsf = Vec::with_capacity(config.n_trials);
        for r in results {
            let (s, l) = r?;
            smc.push(s);
            lsf.push(l);
        }
        rows.push(aggregate(Estimator::Smc, *coordinate, &smc.iter().collect::<Vec<_>>(), bounds));
        rows.push(aggregate(Estimator::Lsf, *coordinate, &lsf.iter().collect::<Vec<_>>(), bounds));
        trials.extend(smc.into_iter().zip(lsf).flat_map(|(s, l)| [s, l]));
    }
    for est in [Estimator::Smc, Estimator::Lsf] {
        let mut prev: Option<f64> = None;
        for row in rows.iter_mut().filter(|r| r.estimator == est) {
            row.mse_ratio_prev = prev.map(|p| row.mse_trace / p);
            prev = Some(row.mse_trace);
        }
    }
    Ok(RiskReport {
        scenario: config.scenario,
        rows,
        trials,
    })
}

/// Risk of SMC and LSF against shots per length.
pub fn run_risk_vs_k(config: &ExperimentConfig) -> Result<RiskReport> {
    expect_scenario(config, Scenario::RiskVsK)?;
    config.validate()?;
    let reference = config.reference_lengths.values()?;
    let interleaved = config.interleaved_lengths.values()?;
    // Information is linear in the shot count, so one unit-shot estimate serves every K.
    let unit = interleave_designs(&reference, &interleaved, 1);
    let mut bim_rng = trial_rng(config.rng_seed, BIM_STREAM);
    let j1 = fisher::bayesian_information_matrix(&config.prior, &unit, config.bim_samples, &mut bim_rng)?;
    let grid: Vec<_> = config
        .k_values
        .iter()
        .map(|&k| (k, interleave_designs(&reference, &interleaved, k)))
        .collect();
    run_sweep(config, &grid, &|ci, _| Ok(j1.scaled(grid[ci].0 as f64)))
}

/// Risk of SMC and LSF against the largest sequence length.
pub fn run_risk_vs_mmax(config: &ExperimentConfig) -> Result<RiskReport> {
    expect_scenario(config, Scenario::RiskVsMmax)?;
    config.validate()?;
    let grid: Vec<_> = config
        .m_max_values
        .iter()
        .map(|&m_max| {
            let lengths: Vec<u32> = (1..=m_max).step_by(10).collect();
            (m_max as u64, interleave_designs(&lengths, &lengths, config.shots))
        })
        .collect();
    let prior = config.prior;
    let seed = config.rng_seed;
    let samples = config.bim_samples;
    run_sweep(config, &grid, &|ci, designs| {
        let mut rng = trial_rng(seed, BIM_STREAM - ci as u64);
        fisher::bayesian_information_matrix(&prior, designs, samples, &mut rng)
    })
}

fn expect_scenario(config: &ExperimentConfig, s: Scenario) -> Result<()> {
    if config.scenario != s {
        return Err(Error::Config(format!(
            "scenario mismatch: expected {:?}, got {:?}",
            s, config.scenario
        )));
    }
    Ok(())
}

/// Row of the gate-study table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GateTableRow {
    pub label: String,
    pub p_tilde: f64,
    pub p_ref: f64,
    pub a: f64,
    pub b: f64,
    pub median_abs_err_p_tilde: Option<f64>,
    pub median_abs_err_p_ref: Option<f64>,
    pub n_ok: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GateTrialRecord {
    pub trial: usize,
    pub seed_stream: u64,
    pub smc_p_tilde: Option<f64>,
    pub smc_p_ref: Option<f64>,
    pub smc_sd_p_tilde: Option<f64>,
    pub smc_abs_err_p_tilde: Option<f64>,
    pub smc_min_ess: Option<f64>,
    pub smc_resample_count: Option<usize>,
    pub smc_ess_warning: Option<bool>,
    pub smc_error: String,
    pub lsf_guess_p_tilde: f64,
    pub lsf_p_tilde: Option<f64>,
    pub lsf_p_ref: Option<f64>,
    pub lsf_abs_err_p_tilde: Option<f64>,
    pub lsf_error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramBin {
    pub source: String,
    pub lo: f64,
    pub hi: f64,
    pub weight: f64,
}

/// Prior and posterior moments of `p_tilde` in the first repetition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PTildeSummary {
    pub prior_mean: f64,
    pub prior_var: f64,
    pub posterior_mean: Option<f64>,
    pub posterior_var: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GateStudyReport {
    pub truth: TrueParams,
    pub truth_params: ModelParams,
    pub prior: PriorSpec,
    pub prior_offset_sigmas: f64,
    pub total_bits: u64,
    pub table: Vec<GateTableRow>,
    pub p_tilde_summary: PTildeSummary,
    pub any_ess_warning: bool,
    #[serde(skip)]
    pub trials: Vec<GateTrialRecord>,
    #[serde(skip)]
    pub histogram: Vec<HistogramBin>,
    #[serde(skip)]
    pub sequences: Vec<gatesim::SequenceRecord>,
}

impl GateStudyReport {
    pub fn median_smc_error(&self) -> Option<f64> {
        median(self.trials.iter().filter_map(|t| t.smc_abs_err_p_tilde).collect())
    }

    pub fn median_lsf_error(&self) -> Option<f64> {
        median(self.trials.iter().filter_map(|t| t.lsf_abs_err_p_tilde).collect())
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

fn weighted_histogram(source: &str, values: &[f64], weights: &[f64], lo: f64, hi: f64) -> Vec<HistogramBin> {
    let width = (hi - lo) / HISTOGRAM_BINS as f64;
    let mut bins = vec![0.0; HISTOGRAM_BINS];
    for (v, w) in values.iter().zip(weights) {
        let k = if width > 0.0 {
            (((v - lo) / width) as usize).min(HISTOGRAM_BINS - 1)
        } else {
            0
        };
        bins[k] += w;
    }
    bins.into_iter()
        .enumerate()
        .map(|(k, weight)| HistogramBin {
            source: source.into(),
            lo: lo + k as f64 * width,
            hi: lo + (k + 1) as f64 * width,
            weight,
        })
        .collect()
}

/// Gate-level study: simulated noisy Cliffords, SMC and LSF against the twirl ground truth.
pub fn run_gate_study(config: &ExperimentConfig) -> Result<GateStudyReport> {
    expect_scenario(config, Scenario::GateStudy)?;
    config.validate()?;
    let noise = config.noise.as_ref().expect("validated");
    let gateset = gatesim::make_noisy_gateset(noise)?;
    let truth = gatesim::true_params_from_gateset(&gateset, Some(&config.interleaved_gate))?;
    let x_true = truth.model_params();
    x_true.check_support()?;
    let prior = match &config.relative_prior {
        Some(rel) => rel.resolve(&x_true)?,
        None => config.prior,
    };
    let designs = interleave_designs(
        &config.reference_lengths.values()?,
        &config.interleaved_lengths.values()?,
        config.shots,
    );
    let total_bits = designs.iter().map(|(_, k)| k).sum();

    type TrialOut = (GateTrialRecord, Option<ParticleCloud>, ParticleCloud, Vec<gatesim::SequenceRecord>);
    let results: Vec<Result<TrialOut>> = (0..config.n_trials)
        .into_par_iter()
        .map(|t| {
            let stream = trial_stream(0, t);
            let mut rng = trial_rng(config.rng_seed, stream);
            let keep = config.record_sequences && t == 0;
            let data = gatesim::sample_gate_data(&gateset, &designs, &config.interleaved_gate, keep, &mut rng)?;
            let guess = prior.sample(&mut rng)?;
            let smc_seed: u64 = rng.random();
            let prior_cloud = ParticleCloud::from_prior(&prior, config.smc.n_particles, &mut rng)?;
            let mut rec = GateTrialRecord {
                trial: t,
                seed_stream: stream,
                smc_p_tilde: None,
                smc_p_ref: None,
                smc_sd_p_tilde: None,
                smc_abs_err_p_tilde: None,
                smc_min_ess: None,
                smc_resample_count: None,
                smc_ess_warning: None,
                smc_error: String::new(),
                lsf_guess_p_tilde: guess.p_tilde,
                lsf_p_tilde: None,
                lsf_p_ref: None,
                lsf_abs_err_p_tilde: None,
                lsf_error: String::new(),
            };
            let smc_config = SmcConfig {
                rng_seed: smc_seed,
                ..config.smc
            };
            let mut posterior = None;
            match run_smc(&prior, &data.data, &smc_config) {
                Ok(out) => {
                    rec.smc_p_tilde = Some(out.estimate.p_tilde);
                    rec.smc_p_ref = Some(out.estimate.p_ref);
                    rec.smc_sd_p_tilde = Some(out.covariance[(0, 0)].max(0.0).sqrt());
                    rec.smc_abs_err_p_tilde = Some((out.estimate.p_tilde - x_true.p_tilde).abs());
                    rec.smc_min_ess = Some(out.diagnostics.min_ess);
                    rec.smc_resample_count = Some(out.diagnostics.resample_count);
                    rec.smc_ess_warning = Some(out.diagnostics.ess_warning);
                    posterior = Some(out.cloud);
                }
                Err(e) => rec.smc_error = format!("{}: {e}", e.category()),
            }
            let (ref_pts, int_pts) = split_points(&data.data);
            match lsf_interleaved_estimate(&ref_pts, &int_pts, &guess) {
                Ok(est) => {
                    rec.lsf_p_tilde = Some(est.estimate.p_tilde);
                    rec.lsf_p_ref = Some(est.estimate.p_ref);
                    rec.lsf_abs_err_p_tilde = Some((est.estimate.p_tilde - x_true.p_tilde).abs());
                }
                Err(e) => rec.lsf_error = format!("{}: {e}", e.category()),
            }
            Ok((rec, posterior, prior_cloud, data.records))
        })
        .collect();

    let mut trials = Vec::with_capacity(config.n_trials);
    let mut first = None;
    let mut sequences = Vec::new();
    for (t, r) in results.into_iter().enumerate() {
        let (rec, posterior, prior_cloud, records) = r?;
        if t == 0 {
            first = Some((posterior, prior_cloud));
            sequences = records;
        }
        trials.push(rec);
    }
    let (posterior, prior_cloud) = first.expect("n_trials >= 1");

    let moments = |cloud: &ParticleCloud| {
        let mean = cloud.mean().p_tilde;
        (mean, cloud.covariance()[(0, 0)])
    };
    let (prior_mean, prior_var) = moments(&prior_cloud);
    let post = posterior.as_ref().map(moments);
    let p_tilde_summary = PTildeSummary {
        prior_mean,
        prior_var,
        posterior_mean: post.map(|p| p.0),
        posterior_var: post.map(|p| p.1),
    };

    let values = |c: &ParticleCloud| c.locations().iter().map(|x| x.p_tilde).collect::<Vec<_>>();
    let prior_values = values(&prior_cloud);
    let post_values = posterior.as_ref().map(values).unwrap_or_default();
    let all = prior_values.iter().chain(&post_values).chain([&x_true.p_tilde]);
    let lo = all.clone().copied().fold(f64::INFINITY, f64::min);
    let hi = all.copied().fold(f64::NEG_INFINITY, f64::max);
    let mut histogram = weighted_histogram("prior", &prior_values, prior_cloud.weights(), lo, hi);
    if let Some(c) = &posterior {
        histogram.extend(weighted_histogram("posterior", &post_values, c.weights(), lo, hi));
    }

    let ok_smc: Vec<&GateTrialRecord> = trials.iter().filter(|t| t.smc_p_tilde.is_some()).collect();
    let ok_lsf: Vec<&GateTrialRecord> = trials.iter().filter(|t| t.lsf_p_tilde.is_some()).collect();
    let med = |f: &dyn Fn(&GateTrialRecord) -> Option<f64>, set: &[&GateTrialRecord]| {
        median(set.iter().filter_map(|t| f(t)).collect())
    };
    let smc_pt = med(&|t| t.smc_p_tilde, &ok_smc);
    let smc_pr = med(&|t| t.smc_p_ref, &ok_smc);
    let lsf_pt = med(&|t| t.lsf_p_tilde, &ok_lsf);
    let lsf_pr = med(&|t| t.lsf_p_ref, &ok_lsf);
    let table = vec![
        GateTableRow {
            label: "true".into(),
            p_tilde: x_true.p_tilde,
            p_ref: x_true.p_ref,
            a: x_true.a,
            b: x_true.b,
            median_abs_err_p_tilde: Some(0.0),
            median_abs_err_p_ref: Some(0.0),
            n_ok: config.n_trials,
        },
        GateTableRow {
            label: "smc_median".into(),
            p_tilde: smc_pt.unwrap_or(f64::NAN),
            p_ref: smc_pr.unwrap_or(f64::NAN),
            a: f64::NAN,
            b: f64::NAN,
            median_abs_err_p_tilde: med(&|t| t.smc_abs_err_p_tilde, &ok_smc),
            median_abs_err_p_ref: med(&|t| t.smc_p_ref.map(|v| (v - x_true.p_ref).abs()), &ok_smc),
            n_ok: ok_smc.len(),
        },
        GateTableRow {
            label: "lsf_median".into(),
            p_tilde: lsf_pt.unwrap_or(f64::NAN),
            p_ref: lsf_pr.unwrap_or(f64::NAN),
            a: f64::NAN,
            b: f64::NAN,
            median_abs_err_p_tilde: med(&|t| t.lsf_abs_err_p_tilde, &ok_lsf),
            median_abs_err_p_ref: med(&|t| t.lsf_p_ref.map(|v| (v - x_true.p_ref).abs()), &ok_lsf),
            n_ok: ok_lsf.len(),
        },
    ];
    let any_ess_warning = trials.iter().any(|t| t.smc_ess_warning == Some(true));
    if any_ess_warning {
        log::warn!("effective sample size collapsed in at least one repetition");
    }
    Ok(GateStudyReport {
        truth,
        truth_params: x_true,
        prior,
        prior_offset_sigmas: prior.mahalanobis(&x_true),
        total_bits,
        table,
        p_tilde_summary,
        any_ess_warning,
        trials,
        histogram,
        sequences,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LandscapeRow {
    /// `A`, `B` or `large_d`.
    pub sweep: String,
    /// Swept value: `A`, `B` or the fidelity.
    pub value: f64,
    pub p_tilde: f64,
    pub p_ref: f64,
    pub a: f64,
    pub b: f64,
    pub m_opt_interleaved: u32,
    pub m_opt_reference: u32,
    pub m_large_d: Option<f64>,
}

/// Optimal sequence lengths over `A`, over `B`, and against fidelity.
pub fn run_fisher_landscape(config: &ExperimentConfig) -> Result<Vec<LandscapeRow>> {
    expect_scenario(config, Scenario::FisherLandscape)?;
    config.validate()?;
    let l = &config.landscape;
    let range = 1..=l.m_max;
    let row = |sweep: &str, value: f64, x: ModelParams, large_d: Option<f64>| -> Result<LandscapeRow> {
        Ok(LandscapeRow {
            sweep: sweep.into(),
            value,
            p_tilde: x.p_tilde,
            p_ref: x.p_ref,
            a: x.a,
            b: x.b,
            m_opt_interleaved: fisher::optimal_m(&x, Mode::Interleaved, range.clone())?,
            m_opt_reference: fisher::optimal_m(&x, Mode::Reference, range.clone())?,
            m_large_d: large_d,
        })
    };
    let mut rows = Vec::new();
    for &a in &l.a_values {
        rows.push(row("A", a, ModelParams::new(l.p_tilde, l.p_ref, a, l.fixed_b), None)?);
    }
    for &b in &l.b_values {
        rows.push(row("B", b, ModelParams::new(l.p_tilde, l.p_ref, l.fixed_a, b), None)?);
    }
    for &f in &l.fidelities {
        let approx = fisher::optimal_m_large_d(f, f)?;
        rows.push(row("large_d", f, ModelParams::new(f, f, 1.0, 0.0), Some(approx))?);
    }
    Ok(rows)
}

/// Everything written for one run.
#[derive(Debug, Clone, Serialize)]
pub struct Metadata<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub scenario: Scenario,
    pub rng_seed: u64,
    pub config: &'a ExperimentConfig,
    pub scale_notes: Vec<String>,
    pub outputs: Vec<String>,
    pub summary: serde_json::Value,
}

/// Sidecar path: `out.csv` becomes `out.meta.json`.
pub fn sidecar_path(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("output");
    out.with_file_name(format!("{stem}.{suffix}"))
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value).map_err(|e| Error::Io(e.into()))?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    for r in rows {
        serde_json::to_writer(&mut f, r).map_err(|e| Error::Io(e.into()))?;
        writeln!(f)?;
    }
    f.flush()?;
    Ok(())
}

/// Runs the configured scenario and writes its artifacts; returns their paths.
pub fn run_and_write(config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    config.validate()?;
    let out = config.output_path.clone();
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut outputs = vec![out.clone()];
    let summary = match config.scenario {
        Scenario::RiskVsK | Scenario::RiskVsMmax => {
            let report = if config.scenario == Scenario::RiskVsK {
                run_risk_vs_k(config)?
            } else {
                run_risk_vs_mmax(config)?
            };
            write_csv(&out, &report.rows)?;
            if config.per_trial_output {
                let p = sidecar_path(&out, "trials.csv");
                write_csv(&p, &report.trials)?;
                outputs.push(p);
            }
            serde_json::json!({
                "failed_trials": report.trials.iter().filter(|t| t.failed).count(),
                "ess_warnings": report.trials.iter().filter(|t| t.ess_warning == Some(true)).count(),
            })
        }
        Scenario::GateStudy => {
            let report = run_gate_study(config)?;
            write_csv(&out, &report.table)?;
            let p = sidecar_path(&out, "trials.csv");
            write_csv(&p, &report.trials)?;
            outputs.push(p);
            let p = sidecar_path(&out, "hist.csv");
            write_csv(&p, &report.histogram)?;
            outputs.push(p);
            if config.record_sequences {
                let p = sidecar_path(&out, "sequences.jsonl");
                write_jsonl(&p, &report.sequences)?;
                outputs.push(p);
            }
            serde_json::to_value(&report).map_err(|e| Error::Io(e.into()))?
        }
        Scenario::FisherLandscape => {
            write_csv(&out, &run_fisher_landscape(config)?)?;
            serde_json::Value::Null
        }
    };
    let meta_path = sidecar_path(&out, "meta.json");
    outputs.push(meta_path.clone());
    let meta = Metadata {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        scenario: config.scenario,
        rng_seed: config.rng_seed,
        config,
        scale_notes: config.scale_notes(),
        outputs: outputs
            .iter()
            .map(|p| p.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned()))
            .collect(),
        summary,
    };
    write_json(&meta_path, &meta)?;
    Ok(outputs)
}

/// Dataset interchange: CSV with header `mode,m,shots,survivals`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct DatumRow {
    mode: Mode,
    m: u32,
    shots: u64,
    survivals: u64,
}

pub fn write_dataset<W: std::io::Write>(writer: W, data: &[Datum]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for d in data {
        w.serialize(DatumRow {
            mode: d.design.mode,
            m: d.design.m,
            shots: d.shots,
            survivals: d.survivals,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset<R: std::io::Read>(reader: R) -> Result<Vec<Datum>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    r.deserialize::<DatumRow>()
        .enumerate()
        .map(|(i, row)| {
            let row = row.map_err(|e| Error::Parse(format!("dataset record {}: {e}", i + 1)))?;
            Datum::new(ExperimentDesign::new(row.m, row.mode), row.shots, row.survivals)
        })
        .collect()
}
