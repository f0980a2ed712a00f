//! Diagonal normal prior intersected with the model support.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Rejection sampling gives up below this acceptance rate.
pub const MIN_ACCEPTANCE: f64 = 1e-3;

/// Number of attempts before the acceptance-rate check kicks in.
const WARMUP_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub mean: ModelParams,
    /// Per-component standard deviation. Zero pins the component to the mean.
    pub sigma: [f64; 4],
}

impl PriorSpec {
    pub fn new(mean: ModelParams, sigma: [f64; 4]) -> Result<Self> {
        let prior = PriorSpec { mean, sigma };
        prior.validate()?;
        Ok(prior)
    }

    pub fn isotropic(mean: ModelParams, sigma: f64) -> Result<Self> {
        PriorSpec::new(mean, [sigma; 4])
    }

    /// Mean (0.95, 0.95, 0.3, 0.5), sigma 0.01 on every component.
    pub fn standard() -> Self {
        PriorSpec {
            mean: ModelParams::new(0.95, 0.95, 0.3, 0.5),
            sigma: [0.01; 4],
        }
    }

    pub fn point_mass(x: ModelParams) -> Result<Self> {
        PriorSpec::new(x, [0.0; 4])
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::Domain(format!(
                "prior sigma must be finite and nonnegative, got {:?}",
                self.sigma
            )));
        }
        self.mean.check_support()
    }

    pub fn is_point_mass(&self) -> bool {
        self.sigma.iter().all(|s| *s == 0.0)
    }

    /// Mahalanobis distance of `x` from the prior mean, ignoring pinned components.
    pub fn mahalanobis(&self, x: &ModelParams) -> f64 {
        let mu = self.mean.to_array();
        x.to_array()
            .iter()
            .zip(mu)
            .zip(self.sigma)
            .filter(|(_, s)| *s > 0.0)
            .map(|((v, m), s)| ((v - m) / s).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    fn propose<R: Rng + ?Sized>(&self, rng: &mut R) -> ModelParams {
        let mu = self.mean.to_array();
        let mut v = [0.0; 4];
        for i in 0..4 {
            let z: f64 = rng.sample(StandardNormal);
            v[i] = mu[i] + self.sigma[i] * z;
        }
        ModelParams::from_array(v)
    }

    /// Draws `n` samples from the truncated prior.
    pub fn sample_n<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<ModelParams>> {
        if self.is_point_mass() {
            return Ok(vec![self.mean; n]);
        }
        let mut out = Vec::with_capacity(n);
        let mut attempts = 0usize;
        while out.len() < n {
            let x = self.propose(rng);
            attempts += 1;
            if x.in_support() {
                out.push(x);
            } else if attempts >= WARMUP_ATTEMPTS {
                let rate = out.len() as f64 / attempts as f64;
                if rate < MIN_ACCEPTANCE {
                    return Err(Error::Sampling {
                        rate,
                        min: MIN_ACCEPTANCE,
                    });
                }
            }
        }
        Ok(out)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ModelParams> {
        Ok(self.sample_n(1, rng)?[0])
    }
}
