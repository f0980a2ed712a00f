//! Sequential Monte Carlo posterior over [`ModelParams`].
//!
//! A [`ParticleCloud`] holds weighted hypotheses. Each datum reweights the
//! cloud by its binomial likelihood; when the effective sample size drops
//! below a fraction of the particle count the cloud is resampled with the
//! Liu-West kernel, which shrinks parents toward the posterior mean and adds
//! Gaussian jitter so that mean and covariance are preserved in expectation.

use nalgebra::{Matrix4, SymmetricEigen, Vector4};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{survival_unchecked, Datum, ModelParams};
use crate::prior::PriorSpec;

/// Proposals rejected per particle before resampling gives up.
pub const MAX_RESAMPLE_ATTEMPTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmcConfig {
    pub n_particles: usize,
    /// Resample when ESS falls below this fraction of `n_particles`.
    pub resample_threshold: f64,
    /// Liu-West shrinkage `a`; `1` is a plain bootstrap.
    pub liu_west_a: f64,
    /// ESS below this fraction of `n_particles` at any step raises the
    /// reliability warning.
    pub ess_warning_fraction: f64,
    /// Split data with more shots than this into consecutive updates of at
    /// most this many shots, with survivals spread evenly; 0 disables
    /// splitting. The product of the pieces' likelihoods equals the
    /// original likelihood up to a constant.
    pub max_shots_per_update: u64,
    pub rng_seed: u64,
}

impl Default for SmcConfig {
    fn default() -> Self {
        SmcConfig {
            n_particles: 4000,
            resample_threshold: 0.5,
            liu_west_a: 0.98,
            ess_warning_fraction: 0.01,
            max_shots_per_update: 0,
            rng_seed: 0,
        }
    }
}

impl SmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 2 {
            return Err(Error::Config("n_particles must be at least 2".into()));
        }
        if !(self.resample_threshold > 0.0 && self.resample_threshold < 1.0) {
            return Err(Error::Config("resample_threshold must lie in (0, 1)".into()));
        }
        if !(self.liu_west_a > 0.0 && self.liu_west_a <= 1.0) {
            return Err(Error::Config("liu_west_a must lie in (0, 1]".into()));
        }
        if !(0.0..1.0).contains(&self.ess_warning_fraction) {
            return Err(Error::Config("ess_warning_fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleCloud {
    locations: Vec<ModelParams>,
    weights: Vec<f64>,
}

impl ParticleCloud {
    /// Builds a cloud from explicit particles; weights are renormalized.
    pub fn new(locations: Vec<ModelParams>, weights: Vec<f64>) -> Result<Self> {
        if locations.len() != weights.len() {
            return Err(Error::Domain("locations and weights differ in length".into()));
        }
        if locations.len() < 2 {
            return Err(Error::Domain("a particle cloud needs at least 2 particles".into()));
        }
        for x in &locations {
            x.check_support()?;
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Domain("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::Domain("weights sum to zero".into()));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(ParticleCloud { locations, weights })
    }

    /// `n` draws from the truncated prior with uniform weights.
    pub fn from_prior<R: Rng + ?Sized>(prior: &PriorSpec, n: usize, rng: &mut R) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain("a particle cloud needs at least 2 particles".into()));
        }
        let locations = prior.sample_n(n, rng)?;
        Ok(ParticleCloud {
            locations,
            weights: vec![1.0 / n as f64; n],
        })
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn locations(&self) -> &[ModelParams] {
        &self.locations
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn effective_sample_size(&self) -> f64 {
        1.0 / self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    pub fn mean(&self) -> ModelParams {
        ModelParams::from_vector(&self.mean_vector())
    }

    fn mean_vector(&self) -> Vector4<f64> {
        self.locations
            .iter()
            .zip(&self.weights)
            .fold(Vector4::zeros(), |acc, (x, w)| acc + x.to_vector() * *w)
    }

    pub fn covariance(&self) -> Matrix4<f64> {
        let mu = self.mean_vector();
        let cov = self
            .locations
            .iter()
            .zip(&self.weights)
            .fold(Matrix4::zeros(), |acc, (x, w)| {
                let d = x.to_vector() - mu;
                acc + d * d.transpose() * *w
            });
        (cov + cov.transpose()) * 0.5
    }

    /// Applies per-particle log-likelihood increments and renormalizes.
    /// The cloud is left untouched when every weight would vanish.
    fn reweight(&mut self, log_like: impl Fn(&ModelParams) -> f64) -> std::result::Result<(), ()> {
        let logw: Vec<f64> = self
            .locations
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| if *w > 0.0 { w.ln() + log_like(x) } else { f64::NEG_INFINITY })
            .collect();
        let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(());
        }
        let unnorm: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = unnorm.iter().sum();
        self.weights = unnorm.into_iter().map(|w| w / total).collect();
        Ok(())
    }

    /// Bayes-rule update on one datum.
    pub fn update(&mut self, datum: &Datum) -> Result<()> {
        self.reweight(|x| datum_log_likelihood(x, datum))
            .map_err(|_| Error::DegeneratePosterior {
                step: 0,
                min_ess: 0.0,
                resample_count: 0,
            })
    }

    /// Bayes-rule update on several data at once (no intermediate resampling).
    pub fn update_batch(&mut self, data: &[Datum]) -> Result<()> {
        self.reweight(|x| data.iter().map(|d| datum_log_likelihood(x, d)).sum())
            .map_err(|_| Error::DegeneratePosterior {
                step: 0,
                min_ess: 0.0,
                resample_count: 0,
            })
    }

    /// Liu-West resampling with shrinkage `a`; returns a uniformly weighted cloud.
    pub fn liu_west_resample<R: Rng + ?Sized>(&self, a: f64, rng: &mut R) -> Result<Self> {
        if !(a > 0.0 && a <= 1.0) {
            return Err(Error::Domain(format!("Liu-West parameter {a} outside (0, 1]")));
        }
        let n = self.len();
        let index = WeightedIndex::new(&self.weights)
            .map_err(|e| Error::Domain(format!("cannot resample: {e}")))?;
        let mu = self.mean_vector();
        let jitter = jitter_factor(&self.covariance(), 1.0 - a * a);
        let mut locations = Vec::with_capacity(n);
        for _ in 0..n {
            let parent = self.locations[index.sample(rng)];
            let Some(l) = jitter.as_ref() else {
                locations.push(parent);
                continue;
            };
            let centre = parent.to_vector() * a + mu * (1.0 - a);
            let mut attempts = 0usize;
            loop {
                let z = Vector4::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
                let candidate = ModelParams::from_vector(&(centre + l * z));
                if candidate.in_support() {
                    locations.push(candidate);
                    break;
                }
                attempts += 1;
                if attempts >= MAX_RESAMPLE_ATTEMPTS {
                    return Err(Error::SupportCollision { attempts });
                }
            }
        }
        Ok(ParticleCloud {
            locations,
            weights: vec![1.0 / n as f64; n],
        })
    }
}

/// Square-root factor of `scale * cov`, or `None` if the kernel is degenerate.
fn jitter_factor(cov: &Matrix4<f64>, scale: f64) -> Option<Matrix4<f64>> {
    if scale <= 0.0 {
        return None;
    }
    let eig = SymmetricEigen::new(*cov * scale);
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    if roots.iter().all(|r| *r == 0.0) {
        return None;
    }
    Some(eig.eigenvectors * Matrix4::from_diagonal(&roots))
}

/// Binomial log-likelihood up to the data-only binomial coefficient.
#[inline]
fn datum_log_likelihood(x: &ModelParams, d: &Datum) -> f64 {
    let q = survival_unchecked(x, d.design).clamp(0.0, 1.0);
    let fails = d.shots - d.survivals;
    let mut ll = 0.0;
    if d.survivals > 0 {
        ll += d.survivals as f64 * q.ln();
    }
    if fails > 0 {
        ll += fails as f64 * (-q).ln_1p();
    }
    ll
}

pub fn init_particles<R: Rng + ?Sized>(prior: &PriorSpec, n: usize, rng: &mut R) -> Result<ParticleCloud> {
    ParticleCloud::from_prior(prior, n, rng)
}

pub fn effective_sample_size(cloud: &ParticleCloud) -> f64 {
    cloud.effective_sample_size()
}

pub fn posterior_mean(cloud: &ParticleCloud) -> ModelParams {
    cloud.mean()
}

pub fn posterior_covariance(cloud: &ParticleCloud) -> Matrix4<f64> {
    cloud.covariance()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmcDiagnostics {
    pub min_ess: f64,
    pub final_ess: f64,
    pub resample_count: usize,
    /// Indices of the data after which the cloud was resampled.
    pub resample_points: Vec<usize>,
    /// ESS dropped below the warning fraction at some step.
    pub ess_warning: bool,
}

#[derive(Debug, Clone)]
pub struct SmcOutcome {
    pub estimate: ModelParams,
    pub covariance: Matrix4<f64>,
    pub diagnostics: SmcDiagnostics,
    pub cloud: ParticleCloud,
}

impl SmcOutcome {
    /// Trace of the posterior covariance.
    pub fn posterior_variance(&self) -> f64 {
        self.covariance.trace()
    }
}

/// Splits `d` into pieces of at most `max_shots` shots; survivals are
/// apportioned by cumulative rounding so the totals are preserved.
pub fn split_datum(d: &Datum, max_shots: u64) -> Vec<Datum> {
    if max_shots == 0 || d.shots <= max_shots {
        return vec![*d];
    }
    let mut out = Vec::with_capacity(d.shots.div_ceil(max_shots) as usize);
    let (mut done, mut hits) = (0u64, 0u64);
    while done < d.shots {
        let k = max_shots.min(d.shots - done);
        done += k;
        let cum = (d.survivals as u128 * done as u128 / d.shots as u128) as u64;
        out.push(Datum {
            design: d.design,
            shots: k,
            survivals: cum - hits,
        });
        hits = cum;
    }
    out
}

/// Runs the full filter over `dataset` in the given order.
pub fn run_smc(prior: &PriorSpec, dataset: &[Datum], config: &SmcConfig) -> Result<SmcOutcome> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Domain("dataset is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut cloud = ParticleCloud::from_prior(prior, config.n_particles, &mut rng)?;
    let n = config.n_particles as f64;
    let mut diag = SmcDiagnostics {
        min_ess: n,
        final_ess: n,
        resample_count: 0,
        resample_points: Vec::new(),
        ess_warning: false,
    };
    let pieces = dataset
        .iter()
        .enumerate()
        .flat_map(|(step, d)| split_datum(d, config.max_shots_per_update).into_iter().map(move |p| (step, p)));
    for (step, datum) in pieces {
        if cloud.update(&datum).is_err() {
            return Err(Error::DegeneratePosterior {
                step,
                min_ess: diag.min_ess,
                resample_count: diag.resample_count,
            });
        }
        let ess = cloud.effective_sample_size();
        diag.min_ess = diag.min_ess.min(ess);
        if ess < config.ess_warning_fraction * n {
            diag.ess_warning = true;
        }
        if ess < config.resample_threshold * n {
            cloud = cloud.liu_west_resample(config.liu_west_a, &mut rng)?;
            diag.resample_count += 1;
            diag.resample_points.push(step);
        }
    }
    diag.final_ess = cloud.effective_sample_size();
    if diag.ess_warning {
        log::warn!(
            "SMC effective sample size fell to {:.1} of {} particles; inference may be unreliable",
            diag.min_ess,
            config.n_particles
        );
    }
    Ok(SmcOutcome {
        estimate: cloud.mean(),
        covariance: cloud.covariance(),
        diagnostics: diag,
        cloud,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ExperimentDesign;
    use approx::assert_relative_eq;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn prior_cloud_construction() {
        let prior = PriorSpec::standard();
        let cloud = init_particles(&prior, 4000, &mut rng(1)).unwrap();
        assert_eq!(cloud.len(), 4000);
        assert!(cloud.locations().iter().all(ModelParams::in_support));
        assert!(cloud.weights().iter().all(|w| *w == 1.0 / 4000.0));
        assert!(init_particles(&prior, 1, &mut rng(1)).is_err());

        let mean = cloud.mean().to_array();
        let cov = cloud.covariance();
        let mu = prior.mean.to_array();
        for i in 0..4 {
            let se = 0.01 / (4000f64).sqrt();
            assert!((mean[i] - mu[i]).abs() < 5.0 * se, "component {i}");
            let sd = cov[(i, i)].sqrt();
            assert!((sd - 0.01).abs() < 0.001, "component {i}: sd {sd}");
        }
    }

    fn two_points(x: ModelParams, y: ModelParams) -> ParticleCloud {
        ParticleCloud::new(vec![x, y], vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn bayes_rule_arithmetic() {
        // Two hypotheses with survival probabilities 0.8 and 0.2.
        let x = ModelParams::new(0.9, 0.9, 0.0, 0.8);
        let y = ModelParams::new(0.9, 0.9, 0.0, 0.2);
        let mut cloud = two_points(x, y);
        let d = Datum::new(ExperimentDesign::reference(5), 1, 1).unwrap();
        cloud.update(&d).unwrap();
        assert_relative_eq!(cloud.weights()[0], 0.8, epsilon = 1e-14);
        assert_relative_eq!(cloud.weights()[1], 0.2, epsilon = 1e-14);
    }

    #[test]
    fn constant_likelihood_leaves_weights() {
        let x = ModelParams::new(0.9, 0.8, 0.0, 0.4);
        let y = ModelParams::new(0.7, 0.6, 0.0, 0.4);
        let mut cloud = ParticleCloud::new(vec![x, y], vec![0.3, 0.7]).unwrap();
        cloud.update(&Datum::new(ExperimentDesign::interleaved(3), 5, 2).unwrap()).unwrap();
        assert_relative_eq!(cloud.weights()[0], 0.3, epsilon = 1e-14);
        assert_relative_eq!(cloud.weights()[1], 0.7, epsilon = 1e-14);
    }

    #[test]
    fn impossible_datum_zeroes_particle() {
        let certain = ModelParams::new(1.0, 1.0, 0.5, 0.5);
        let other = ModelParams::new(0.9, 0.9, 0.4, 0.5);
        let mut cloud = two_points(certain, other);
        cloud.update(&Datum::new(ExperimentDesign::reference(4), 10, 7).unwrap()).unwrap();
        assert_eq!(cloud.weights()[0], 0.0);
        assert_eq!(cloud.weights()[1], 1.0);

        // Nothing survives a datum that is impossible for every particle.
        let mut all_certain = two_points(certain, certain);
        let before = all_certain.clone();
        let err = all_certain
            .update(&Datum::new(ExperimentDesign::reference(4), 10, 7).unwrap())
            .unwrap_err();
        assert!(matches!(err, Error::DegeneratePosterior { .. }));
        assert_eq!(all_certain, before);
    }

    #[test]
    fn ess_examples() {
        let xs = vec![ModelParams::new(0.9, 0.9, 0.4, 0.5); 4];
        let uniform = ParticleCloud::new(xs.clone(), vec![1.0; 4]).unwrap();
        assert_relative_eq!(effective_sample_size(&uniform), 4.0);
        let single = ParticleCloud::new(xs.clone(), vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(effective_sample_size(&single), 1.0);
        let half = ParticleCloud::new(xs, vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        assert_relative_eq!(effective_sample_size(&half), 2.0);
    }

    #[test]
    fn moments_of_small_clouds() {
        let x = ModelParams::new(0.9, 0.8, 0.3, 0.5);
        let y = ModelParams::new(0.7, 0.6, 0.1, 0.3);
        let single = ParticleCloud::new(vec![x, y], vec![1.0, 0.0]).unwrap();
        assert_eq!(posterior_mean(&single), x);
        assert!(posterior_covariance(&single).abs().max() < 1e-15);
        let mid = two_points(x, y).mean().to_array();
        for (m, e) in mid.iter().zip([0.8, 0.7, 0.2, 0.4]) {
            assert_relative_eq!(*m, e, epsilon = 1e-15);
        }
    }

    #[test]
    fn bootstrap_resample_reuses_locations() {
        let cloud = init_particles(&PriorSpec::standard(), 200, &mut rng(2)).unwrap();
        let out = cloud.liu_west_resample(1.0, &mut rng(3)).unwrap();
        assert!(out.locations().iter().all(|x| cloud.locations().contains(x)));
        assert!(out.weights().iter().all(|w| *w == 1.0 / 200.0));
    }

    #[test]
    fn liu_west_preserves_mean_in_expectation() {
        let mut cloud = init_particles(&PriorSpec::standard(), 500, &mut rng(4)).unwrap();
        let d = Datum::new(ExperimentDesign::interleaved(20), 30, 12).unwrap();
        cloud.update(&d).unwrap();
        let target = cloud.mean().to_array();
        let cov = cloud.covariance();
        let reps = 400;
        let mut r = rng(5);
        let mut sums = [0.0; 4];
        for _ in 0..reps {
            let out = cloud.liu_west_resample(0.98, &mut r).unwrap();
            assert!(out.locations().iter().all(ModelParams::in_support));
            let m = out.mean().to_array();
            for i in 0..4 {
                sums[i] += m[i];
            }
        }
        for i in 0..4 {
            // Each resampled mean has variance about cov_ii / n.
            let se = (cov[(i, i)] / 500.0 / reps as f64).sqrt();
            let avg = sums[i] / reps as f64;
            assert!((avg - target[i]).abs() < 5.0 * se, "component {i}");
        }
    }

    #[test]
    fn resample_rejects_bad_shrinkage() {
        let cloud = init_particles(&PriorSpec::standard(), 10, &mut rng(6)).unwrap();
        assert!(cloud.liu_west_resample(0.0, &mut rng(7)).is_err());
        assert!(cloud.liu_west_resample(1.5, &mut rng(7)).is_err());
    }

    #[test]
    fn batch_and_sequential_updates_agree() {
        let data: Vec<_> = (1..=12)
            .map(|m| Datum::new(ExperimentDesign::reference(m * 3), 20, 14 - u64::from(m % 5)).unwrap())
            .chain((1..=6).map(|m| Datum::new(ExperimentDesign::interleaved(m * 4), 20, 12).unwrap()))
            .collect();
        let base = init_particles(&PriorSpec::standard(), 300, &mut rng(8)).unwrap();
        let mut seq = base.clone();
        for d in &data {
            seq.update(d).unwrap();
        }
        let mut batch = base;
        batch.update_batch(&data).unwrap();
        for (a, b) in seq.weights().iter().zip(batch.weights()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn uninformative_data_keeps_prior_mean() {
        // A = 0 makes every particle predict the same survival.
        let prior = PriorSpec::new(ModelParams::new(0.95, 0.95, 0.0, 0.5), [0.01, 0.01, 0.0, 0.0]).unwrap();
        let data = vec![Datum::new(ExperimentDesign::reference(10), 100, 50).unwrap()];
        let cfg = SmcConfig { n_particles: 1000, rng_seed: 3, ..Default::default() };
        let out = run_smc(&prior, &data, &cfg).unwrap();
        assert_eq!(out.diagnostics.resample_count, 0);
        assert!((out.estimate.p_tilde - 0.95).abs() < 5.0 * 0.01 / 1000f64.sqrt());
        assert!((out.estimate.p_ref - 0.95).abs() < 5.0 * 0.01 / 1000f64.sqrt());
    }

    #[test]
    fn run_is_deterministic_and_reports_diagnostics() {
        let data: Vec<_> = (1..=40)
            .map(|m| Datum::new(ExperimentDesign::reference(m), 50, 38).unwrap())
            .collect();
        let cfg = SmcConfig { n_particles: 500, rng_seed: 17, ..Default::default() };
        let a = run_smc(&PriorSpec::standard(), &data, &cfg).unwrap();
        let b = run_smc(&PriorSpec::standard(), &data, &cfg).unwrap();
        assert_eq!(a.estimate, b.estimate);
        assert_eq!(a.diagnostics, b.diagnostics);
        assert!(a.diagnostics.resample_count > 0);
        assert!(a.diagnostics.min_ess >= 1.0 && a.diagnostics.min_ess <= 500.0);
        assert!(run_smc(&PriorSpec::standard(), &[], &cfg).is_err());
    }

    #[test]
    fn degenerate_posterior_carries_step() {
        let prior = PriorSpec::point_mass(ModelParams::new(1.0, 1.0, 0.5, 0.5)).unwrap();
        let data = vec![
            Datum::new(ExperimentDesign::reference(1), 5, 5).unwrap(),
            Datum::new(ExperimentDesign::reference(2), 5, 3).unwrap(),
        ];
        let cfg = SmcConfig { n_particles: 10, ..Default::default() };
        match run_smc(&prior, &data, &cfg) {
            Err(Error::DegeneratePosterior { step, .. }) => assert_eq!(step, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn split_datum_preserves_totals_and_likelihood_ratios() {
        let d = Datum::new(ExperimentDesign::interleaved(30), 1003, 617).unwrap();
        let pieces = split_datum(&d, 50);
        assert_eq!(pieces.len(), 21);
        assert_eq!(pieces.iter().map(|p| p.shots).sum::<u64>(), 1003);
        assert_eq!(pieces.iter().map(|p| p.survivals).sum::<u64>(), 617);
        assert!(pieces.iter().all(|p| p.shots <= 50 && p.survivals <= p.shots));

        let x = ModelParams::new(0.97, 0.96, 0.35, 0.48);
        let y = ModelParams::new(0.99, 0.95, 0.3, 0.5);
        let whole = datum_log_likelihood(&x, &d) - datum_log_likelihood(&y, &d);
        let split: f64 = pieces
            .iter()
            .map(|p| datum_log_likelihood(&x, p) - datum_log_likelihood(&y, p))
            .sum();
        assert_relative_eq!(whole, split, max_relative = 1e-10);

        assert_eq!(split_datum(&d, 0), vec![d]);
        assert_eq!(split_datum(&d, 5000), vec![d]);
    }

    #[test]
    fn split_updates_match_whole_updates_without_resampling() {
        let prior = PriorSpec::standard();
        let d = Datum::new(ExperimentDesign::reference(20), 400, 300).unwrap();
        let mut whole = init_particles(&prior, 500, &mut rng(21)).unwrap();
        let mut split = whole.clone();
        whole.update(&d).unwrap();
        split.update_batch(&split_datum(&d, 37)).unwrap();
        for (a, b) in whole.weights().iter().zip(split.weights()) {
            assert_relative_eq!(a, b, max_relative = 1e-9, epsilon = 1e-300);
        }
    }
}
