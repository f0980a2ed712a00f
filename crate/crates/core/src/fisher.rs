//! Fisher score, Fisher information and Cramér-Rao style bounds.
//!
//! Information matrices are indexed in the order `(p_tilde, p_ref, A, B)` and
//! carry per-shot units: one Bernoulli trial at a design contributes
//! [`fisher_information`], and [`total_information`] scales by shot counts.

use std::ops::RangeInclusive;

use nalgebra::{Matrix4, SymmetricEigen, Vector4};
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{powu, survival_unchecked, ExperimentDesign, Mode, ModelParams};
use crate::prior::PriorSpec;

/// Relative singular-value cutoff for the pseudo-inverse.
pub const PINV_RCOND: f64 = 1e-10;

/// Default number of prior draws for the Bayesian information matrix.
pub const DEFAULT_BIM_SAMPLES: usize = 10_000;

/// Symmetric 4x4 information (or bound) matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfoMatrix(pub Matrix4<f64>);

impl InfoMatrix {
    pub fn zeros() -> Self {
        InfoMatrix(Matrix4::zeros())
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn scaled(&self, k: f64) -> Self {
        InfoMatrix(self.0 * k)
    }

    pub fn eigenvalues(&self) -> Vector4<f64> {
        SymmetricEigen::new(symmetrize(&self.0)).eigenvalues
    }

    /// Numerical rank with the [`PINV_RCOND`] relative cutoff.
    pub fn rank(&self) -> usize {
        let sv = self.0.singular_values();
        let cutoff = sv.max() * PINV_RCOND;
        if sv.max() == 0.0 {
            return 0;
        }
        sv.iter().filter(|s| **s > cutoff).count()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (self.0 - self.0.transpose()).abs().max() <= tol
    }

    /// PSD up to `-rel_tol` times the largest eigenvalue magnitude.
    pub fn is_psd(&self, rel_tol: f64) -> bool {
        let ev = self.eigenvalues();
        let scale = ev.abs().max();
        ev.min() >= -rel_tol * scale
    }

    /// Moore-Penrose pseudo-inverse (plain inverse when well conditioned).
    pub fn pseudo_inverse(&self) -> Self {
        InfoMatrix(pseudo_inverse(&self.0))
    }
}

impl std::ops::Add for InfoMatrix {
    type Output = InfoMatrix;

    fn add(self, rhs: InfoMatrix) -> InfoMatrix {
        InfoMatrix(self.0 + rhs.0)
    }
}

fn symmetrize(m: &Matrix4<f64>) -> Matrix4<f64> {
    (m + m.transpose()) * 0.5
}

/// Pseudo-inverse through the SVD, zeroing singular values below
/// `PINV_RCOND` times the largest.
pub fn pseudo_inverse(m: &Matrix4<f64>) -> Matrix4<f64> {
    let svd = m.svd(true, true);
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return Matrix4::zeros();
    }
    let cutoff = smax * PINV_RCOND;
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut s_inv = Matrix4::zeros();
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s > cutoff {
            s_inv[(i, i)] = 1.0 / s;
        }
    }
    v_t.transpose() * s_inv * u.transpose()
}

/// `m p^(m-1)` with the `m = 0` case pinned to zero.
#[inline]
fn dpow(p: f64, m: u32) -> f64 {
    if m == 0 {
        0.0
    } else {
        m as f64 * powu(p, m - 1)
    }
}

/// Gradient of the survival probability with respect to `(p_tilde, p_ref, A, B)`.
pub fn survival_gradient(x: &ModelParams, e: ExperimentDesign) -> Vector4<f64> {
    let m = e.m;
    match e.mode {
        Mode::Reference => Vector4::new(0.0, x.a * dpow(x.p_ref, m), powu(x.p_ref, m), 1.0),
        Mode::Interleaved => Vector4::new(
            x.a * dpow(x.p_tilde, m) * powu(x.p_ref, m),
            x.a * powu(x.p_tilde, m) * dpow(x.p_ref, m),
            powu(x.p_ref * x.p_tilde, m),
            1.0,
        ),
    }
}

fn interior_survival(x: &ModelParams, e: ExperimentDesign) -> Result<f64> {
    x.check_support()?;
    let q = survival_unchecked(x, e);
    if q <= 0.0 || q >= 1.0 {
        return Err(Error::SingularLikelihood { q });
    }
    Ok(q)
}

/// Gradient of the log-likelihood of a single outcome (`true` = survival).
pub fn fisher_score(x: &ModelParams, survived: bool, e: ExperimentDesign) -> Result<Vector4<f64>> {
    let q = interior_survival(x, e)?;
    let g = survival_gradient(x, e);
    Ok(if survived { g / q } else { -g / (1.0 - q) })
}

/// Per-shot Fisher information `(grad q)(grad q)^T / (q (1 - q))`.
pub fn fisher_information(x: &ModelParams, e: ExperimentDesign) -> Result<InfoMatrix> {
    let q = interior_survival(x, e)?;
    let g = survival_gradient(x, e);
    Ok(InfoMatrix(g * g.transpose() / (q * (1.0 - q))))
}

/// Information summed over independent shots at each design.
pub fn total_information(x: &ModelParams, designs: &[(ExperimentDesign, u64)]) -> Result<InfoMatrix> {
    let mut total = Matrix4::zeros();
    for &(e, shots) in designs {
        total += fisher_information(x, e)?.0 * shots as f64;
    }
    Ok(InfoMatrix(total))
}

/// Cramér-Rao bound on the error matrix: the (pseudo-)inverse of the total information.
pub fn crb(x: &ModelParams, designs: &[(ExperimentDesign, u64)]) -> Result<InfoMatrix> {
    if designs.is_empty() {
        return Err(Error::Domain("crb needs at least one design".into()));
    }
    Ok(total_information(x, designs)?.pseudo_inverse())
}

/// Lower bound `1 / I[p_tilde, p_tilde]` on the error in `p_tilde` alone.
/// Reference-only designs carry no information about `p_tilde` and give `+inf`.
pub fn single_param_bound(x: &ModelParams, designs: &[(ExperimentDesign, u64)]) -> Result<f64> {
    let info = total_information(x, designs)?.get(0, 0);
    Ok(if info > 0.0 { 1.0 / info } else { f64::INFINITY })
}

/// Sequence length in `m_range` maximizing the per-shot information about
/// the decay parameter of `mode` (`p_tilde` for interleaved, `p_ref` for
/// reference). Ties go to the shorter sequence; lengths whose survival
/// probability sits on 0 or 1 carry no information and are skipped.
pub fn optimal_m(x: &ModelParams, mode: Mode, m_range: RangeInclusive<u32>) -> Result<u32> {
    x.check_support()?;
    if m_range.is_empty() {
        return Err(Error::Domain("empty sequence-length range".into()));
    }
    let idx = match mode {
        Mode::Interleaved => 0,
        Mode::Reference => 1,
    };
    let mut best = (*m_range.start(), f64::NEG_INFINITY);
    for m in m_range {
        let e = ExperimentDesign::new(m, mode);
        let q = survival_unchecked(x, e);
        let info = if q > 0.0 && q < 1.0 {
            let g = survival_gradient(x, e)[idx];
            g * g / (q * (1.0 - q))
        } else {
            0.0
        };
        if info > best.1 {
            best = (m, info);
        }
    }
    Ok(best.0)
}

/// Large-dimension approximation `1 / (1 - F_tilde F_ref)` of the optimal length.
pub fn optimal_m_large_d(f_tilde: f64, f_ref: f64) -> Result<f64> {
    let prod = f_tilde * f_ref;
    if prod == 1.0 {
        return Err(Error::Divergence(
            "optimal length diverges for unit fidelities".into(),
        ));
    }
    if !(prod > 0.0 && prod < 1.0) {
        return Err(Error::Domain(format!(
            "fidelity product {prod} outside (0, 1)"
        )));
    }
    Ok(1.0 / (1.0 - prod))
}

/// Monte Carlo estimate of the Bayesian information matrix with entrywise
/// standard errors.
#[derive(Debug, Clone, Copy)]
pub struct BimEstimate {
    pub mean: InfoMatrix,
    pub std_error: Matrix4<f64>,
    pub n_samples: usize,
}

/// Prior expectation of the total information, with standard errors.
pub fn bim_estimate<R: Rng + ?Sized>(
    prior: &PriorSpec,
    designs: &[(ExperimentDesign, u64)],
    n_samples: usize,
    rng: &mut R,
) -> Result<BimEstimate> {
    if n_samples == 0 {
        return Err(Error::Domain("n_samples must be at least 1".into()));
    }
    let draws = prior.sample_n(n_samples, rng)?;
    let mut sum = Matrix4::zeros();
    let mut sum_sq = Matrix4::zeros();
    for x in &draws {
        let info = total_information(x, designs)?.0;
        sum += info;
        sum_sq += info.component_mul(&info);
    }
    let n = n_samples as f64;
    let mean = sum / n;
    let std_error = if n_samples > 1 {
        let var = (sum_sq / n - mean.component_mul(&mean)).map(|v| v.max(0.0)) * (n / (n - 1.0));
        var.map(|v| (v / n).sqrt())
    } else {
        Matrix4::zeros()
    };
    Ok(BimEstimate {
        mean: InfoMatrix(mean),
        std_error,
        n_samples,
    })
}

/// `J = E_{x ~ prior}[I(x)]`, estimated from `n_samples` prior draws.
pub fn bayesian_information_matrix<R: Rng + ?Sized>(
    prior: &PriorSpec,
    designs: &[(ExperimentDesign, u64)],
    n_samples: usize,
    rng: &mut R,
) -> Result<InfoMatrix> {
    Ok(bim_estimate(prior, designs, n_samples, rng)?.mean)
}

/// (Pseudo-)inverse of the Bayesian information matrix.
pub fn bcrb<R: Rng + ?Sized>(
    prior: &PriorSpec,
    designs: &[(ExperimentDesign, u64)],
    n_samples: usize,
    rng: &mut R,
) -> Result<InfoMatrix> {
    Ok(bayesian_information_matrix(prior, designs, n_samples, rng)?.pseudo_inverse())
}

/// Fisher information of the prior density itself, `diag(1 / sigma^2)`.
///
/// Truncation to the support is ignored; it only matters when the prior
/// has appreciable mass at the support boundary.
pub fn prior_information(prior: &PriorSpec) -> Result<InfoMatrix> {
    if prior.sigma.iter().any(|s| *s <= 0.0) {
        return Err(Error::Domain(
            "prior information is unbounded for a pinned component".into(),
        ));
    }
    let d = Vector4::from(prior.sigma.map(|s| 1.0 / (s * s)));
    Ok(InfoMatrix(Matrix4::from_diagonal(&d)))
}

/// Van Trees form of the Bayesian bound: `(J + J_prior)^-1`.
///
/// Unlike [`bcrb`], this stays below the error of every estimator when the
/// true parameters are drawn from the prior, including estimators that
/// lean on the prior when data are scarce.
pub fn bcrb_with_prior<R: Rng + ?Sized>(
    prior: &PriorSpec,
    designs: &[(ExperimentDesign, u64)],
    n_samples: usize,
    rng: &mut R,
) -> Result<InfoMatrix> {
    let j = bayesian_information_matrix(prior, designs, n_samples, rng)?;
    Ok((j + prior_information(prior)?).pseudo_inverse())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::survival_probability;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const X: ModelParams = ModelParams::new(0.97, 0.96, 0.35, 0.48);

    fn fd_gradient(f: impl Fn(&ModelParams) -> f64, x: &ModelParams, h: f64) -> Vector4<f64> {
        let base = x.to_array();
        let mut g = Vector4::zeros();
        for i in 0..4 {
            let mut up = base;
            let mut dn = base;
            up[i] += h;
            dn[i] -= h;
            g[i] = (f(&ModelParams::from_array(up)) - f(&ModelParams::from_array(dn))) / (2.0 * h);
        }
        g
    }

    fn log_q(x: &ModelParams, e: ExperimentDesign) -> f64 {
        survival_unchecked(x, e).ln()
    }

    #[test]
    fn score_at_zero_length() {
        let s = fisher_score(&X, true, ExperimentDesign::reference(0)).unwrap();
        let q = X.a + X.b;
        assert_relative_eq!(s, Vector4::new(0.0, 0.0, 1.0, 1.0) / q, epsilon = 1e-14);
    }

    #[test]
    fn interleaved_score_first_component_at_m1() {
        let e = ExperimentDesign::interleaved(1);
        let q = survival_probability(&X, e).unwrap();
        let s = fisher_score(&X, true, e).unwrap();
        assert_relative_eq!(s[0], X.a * X.p_ref / q, epsilon = 1e-14);
    }

    #[test]
    fn score_matches_finite_differences() {
        for mode in [Mode::Reference, Mode::Interleaved] {
            for m in [1, 5, 40, 200] {
                let e = ExperimentDesign::new(m, mode);
                let fd = fd_gradient(|x| log_q(x, e), &X, 1e-7);
                let s = fisher_score(&X, true, e).unwrap();
                for i in 0..4 {
                    let scale = s[i].abs().max(1e-3);
                    assert!((s[i] - fd[i]).abs() / scale < 1e-6, "{mode} m={m} i={i}");
                }
                let fd0 = fd_gradient(|x| (1.0 - survival_unchecked(x, e)).ln(), &X, 1e-7);
                let s0 = fisher_score(&X, false, e).unwrap();
                for i in 0..4 {
                    let scale = s0[i].abs().max(1e-3);
                    assert!((s0[i] - fd0[i]).abs() / scale < 1e-6);
                }
            }
        }
    }

    #[test]
    fn boundary_survival_is_singular() {
        let x = ModelParams::new(1.0, 1.0, 0.5, 0.5);
        assert!(matches!(
            fisher_score(&x, true, ExperimentDesign::reference(3)),
            Err(Error::SingularLikelihood { .. })
        ));
        assert!(fisher_information(&x, ExperimentDesign::reference(3)).is_err());
    }

    #[test]
    fn information_is_rank_one_and_matches_score_expectation() {
        for e in [ExperimentDesign::reference(7), ExperimentDesign::interleaved(13)] {
            let info = fisher_information(&X, e).unwrap();
            assert_eq!(info.rank(), 1);
            let q = survival_probability(&X, e).unwrap();
            let s1 = fisher_score(&X, true, e).unwrap();
            let s0 = fisher_score(&X, false, e).unwrap();
            let expect = s1 * s1.transpose() * q + s0 * s0.transpose() * (1.0 - q);
            assert!((info.0 - expect).abs().max() < 1e-12 * expect.abs().max().max(1.0));
        }
        let info = fisher_information(&X, ExperimentDesign::reference(9)).unwrap();
        for k in 0..4 {
            assert_eq!(info.get(0, k), 0.0);
            assert_eq!(info.get(k, 0), 0.0);
        }
    }

    #[test]
    fn information_equals_negative_expected_hessian() {
        // Oracle: central-difference Hessian of the log-likelihood for each
        // outcome, averaged with the outcome probabilities.
        let h = 1e-4;
        for e in [ExperimentDesign::reference(10), ExperimentDesign::interleaved(6)] {
            let q = survival_unchecked(&X, e);
            let ll = |x: &ModelParams, survived: bool| {
                let qq = survival_unchecked(x, e);
                if survived { qq.ln() } else { (1.0 - qq).ln() }
            };
            let base = X.to_array();
            let mut hess = Matrix4::zeros();
            for i in 0..4 {
                for j in 0..4 {
                    let eval = |di: f64, dj: f64, survived: bool| {
                        let mut v = base;
                        v[i] += di;
                        v[j] += dj;
                        ll(&ModelParams::from_array(v), survived)
                    };
                    for (survived, w) in [(true, q), (false, 1.0 - q)] {
                        let d2 = (eval(h, h, survived) - eval(h, -h, survived)
                            - eval(-h, h, survived)
                            + eval(-h, -h, survived))
                            / (4.0 * h * h);
                        hess[(i, j)] -= w * d2;
                    }
                }
            }
            let info = fisher_information(&X, e).unwrap().0;
            let scale = info.abs().max();
            assert!((info - hess).abs().max() / scale < 1e-5, "{e:?}");
        }
    }

    #[test]
    fn total_information_additivity_and_rank() {
        let e = ExperimentDesign::interleaved(8);
        let one = fisher_information(&X, e).unwrap();
        let many = total_information(&X, &[(e, 37)]).unwrap();
        assert!((many.0 - one.0 * 37.0).abs().max() < 1e-9);

        let refs: Vec<_> = (1..=30).map(|m| (ExperimentDesign::reference(m), 5)).collect();
        assert!(total_information(&X, &refs).unwrap().rank() <= 3);

        let mixed = [
            (ExperimentDesign::reference(1), 10),
            (ExperimentDesign::reference(20), 10),
            (ExperimentDesign::interleaved(5), 10),
            (ExperimentDesign::interleaved(40), 10),
        ];
        assert_eq!(total_information(&X, &mixed).unwrap().rank(), 4);
    }

    #[test]
    fn crb_inverts_full_rank_information() {
        let designs: Vec<_> = (1..=20)
            .map(|m| (ExperimentDesign::reference(m), 10))
            .chain((1..=10).map(|m| (ExperimentDesign::interleaved(m), 10)))
            .collect();
        let info = total_information(&X, &designs).unwrap();
        let bound = crb(&X, &designs).unwrap();
        let id = bound.0 * info.0;
        assert!((id - Matrix4::identity()).abs().max() < 1e-8);
    }

    #[test]
    fn single_length_uses_pseudo_inverse() {
        let designs = [
            (ExperimentDesign::reference(10), 100),
            (ExperimentDesign::interleaved(10), 100),
        ];
        let info = total_information(&X, &designs).unwrap();
        assert!(info.rank() < 4);
        let p = crb(&X, &designs).unwrap();
        assert!((p.0 * info.0 * p.0 - p.0).abs().max() < 1e-8 * p.0.abs().max());
        assert!((info.0 * p.0 * info.0 - info.0).abs().max() < 1e-8 * info.0.abs().max());
    }

    #[test]
    fn restricted_bound_is_scalar_inverse() {
        // Only p_ref varies: the 1x1 information block inverts to 1 / I_rr.
        let designs: Vec<_> = (1..=15).map(|m| (ExperimentDesign::reference(m), 3)).collect();
        let info = total_information(&X, &designs).unwrap();
        let explicit: f64 = designs
            .iter()
            .map(|&(e, k)| {
                let q = survival_unchecked(&X, e);
                let d = X.a * e.m as f64 * X.p_ref.powi(e.m as i32 - 1);
                k as f64 * d * d / (q * (1.0 - q))
            })
            .sum();
        assert_relative_eq!(info.get(1, 1), explicit, max_relative = 1e-12);
        let sub = Matrix4::from_diagonal(&Vector4::new(0.0, info.get(1, 1), 0.0, 0.0));
        assert_relative_eq!(pseudo_inverse(&sub)[(1, 1)], 1.0 / explicit, max_relative = 1e-12);
    }

    #[test]
    fn single_param_bound_cases() {
        let refs = [(ExperimentDesign::reference(4), 10)];
        assert_eq!(single_param_bound(&X, &refs).unwrap(), f64::INFINITY);

        let (m, k) = (12u32, 50u64);
        let e = ExperimentDesign::interleaved(m);
        let q = X.a * (X.p_tilde * X.p_ref).powi(m as i32) + X.b;
        let d = X.a * m as f64 * X.p_tilde.powi(m as i32 - 1) * X.p_ref.powi(m as i32);
        let closed = q * (1.0 - q) / (k as f64 * d * d);
        let b1 = single_param_bound(&X, &[(e, k)]).unwrap();
        assert_relative_eq!(b1, closed, max_relative = 1e-12);
        let b2 = single_param_bound(&X, &[(e, 2 * k)]).unwrap();
        assert_relative_eq!(b2, b1 / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn optimal_m_matches_continuous_stationary_point() {
        // With A = 1, B = 0 and P = p_tilde p_ref, the information about
        // p_tilde is proportional to m^2 P^m / (1 - P^m). Its stationary
        // point satisfies 2/u = 1 + 1/(e^u - 1) with u = -m ln P.
        let mut u: f64 = 1.5;
        for _ in 0..60 {
            let f = 2.0 / u - 1.0 - 1.0 / (u.exp() - 1.0);
            let df = -2.0 / (u * u) + u.exp() / (u.exp() - 1.0).powi(2);
            u -= f / df;
        }
        for f in [0.99, 0.995, 0.999] {
            let x = ModelParams::new(f, f, 1.0, 0.0);
            let m = optimal_m(&x, Mode::Interleaved, 1..=20_000).unwrap();
            let continuous = u / -(f * f).ln();
            assert!((m as f64 - continuous).abs() <= 1.0, "F={f}: {m} vs {continuous}");
        }
    }

    #[test]
    fn optimal_m_fig1_anchor() {
        let x = ModelParams::new(0.9988, 0.9978, 0.25, 0.5);
        let m = optimal_m(&x, Mode::Interleaved, 1..=2000).unwrap();
        assert!((1..=2000).contains(&m));
        // Regression value from the exhaustive scan.
        assert_eq!(m, 283);
    }

    #[test]
    fn optimal_m_ties_and_range() {
        // A = 0 carries no information anywhere: every m ties at zero.
        let x = ModelParams::new(0.99, 0.99, 0.0, 0.5);
        assert_eq!(optimal_m(&x, Mode::Interleaved, 5..=50).unwrap(), 5);
        #[allow(clippy::reversed_empty_ranges)]
        let empty = 5..=4;
        assert!(optimal_m(&x, Mode::Interleaved, empty).is_err());
        let x = ModelParams::new(0.99, 0.98, 0.5, 0.5);
        let m_ref = optimal_m(&x, Mode::Reference, 1..=2000).unwrap();
        assert!(m_ref > 1 && m_ref < 2000);
    }

    #[test]
    fn large_d_law() {
        assert_relative_eq!(optimal_m_large_d(0.999, 0.999).unwrap(), 500.250_125_062_5, epsilon = 1e-6);
        assert_relative_eq!(optimal_m_large_d(0.5, 1.0).unwrap(), 2.0);
        assert_relative_eq!(optimal_m_large_d(1.0, 0.99).unwrap(), 100.0, epsilon = 1e-9);
        assert!(matches!(optimal_m_large_d(1.0, 1.0), Err(Error::Divergence(_))));
        assert!(optimal_m_large_d(0.0, 0.5).is_err());
    }

    #[test]
    fn bim_point_mass_and_single_draw() {
        let designs: Vec<_> = (1..=10)
            .map(|m| (ExperimentDesign::reference(m), 4))
            .chain((1..=5).map(|m| (ExperimentDesign::interleaved(m), 4)))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let prior = PriorSpec::point_mass(X).unwrap();
        let j = bayesian_information_matrix(&prior, &designs, 5, &mut rng).unwrap();
        let i = total_information(&X, &designs).unwrap();
        assert!((j.0 - i.0).abs().max() < 1e-9 * i.0.abs().max());
        let b = bcrb(&prior, &designs, 5, &mut rng).unwrap();
        let c = crb(&X, &designs).unwrap();
        assert!((b.0 - c.0).abs().max() < 1e-9 * c.0.abs().max());

        let prior = PriorSpec::standard();
        let mut r1 = ChaCha8Rng::seed_from_u64(9);
        let j1 = bayesian_information_matrix(&prior, &designs, 1, &mut r1).unwrap();
        let mut r2 = ChaCha8Rng::seed_from_u64(9);
        let x1 = prior.sample(&mut r2).unwrap();
        assert_eq!(j1, total_information(&x1, &designs).unwrap());
    }

    #[test]
    fn bim_runs_agree_within_standard_error() {
        let designs: Vec<_> = (1..=20)
            .map(|m| (ExperimentDesign::reference(m), 1))
            .chain((1..=10).map(|m| (ExperimentDesign::interleaved(m), 1)))
            .collect();
        let prior = PriorSpec::standard();
        let a = bim_estimate(&prior, &designs, 10_000, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let b = bim_estimate(&prior, &designs, 10_000, &mut ChaCha8Rng::seed_from_u64(12)).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let se = (a.std_error[(i, j)].powi(2) + b.std_error[(i, j)].powi(2)).sqrt();
                let diff = (a.mean.get(i, j) - b.mean.get(i, j)).abs();
                assert!(diff <= 3.0 * se + 1e-12, "entry ({i},{j}): {diff} vs {se}");
            }
        }
    }

    #[test]
    fn bcrb_trace_shrinks_with_shots() {
        let prior = PriorSpec::standard();
        let mut last = f64::INFINITY;
        for k in [1u64, 4, 16, 64] {
            let designs: Vec<_> = (1..=20)
                .map(|m| (ExperimentDesign::reference(m), k))
                .chain((1..=10).map(|m| (ExperimentDesign::interleaved(m), k)))
                .collect();
            let t = bcrb(&prior, &designs, 2000, &mut ChaCha8Rng::seed_from_u64(5)).unwrap().trace();
            assert!(t < last);
            last = t;
        }
    }

    #[test]
    fn prior_information_tightens_the_bound() {
        let prior = PriorSpec::standard();
        let designs = [(ExperimentDesign::reference(3), 1), (ExperimentDesign::interleaved(3), 1)];
        let plain = bcrb(&prior, &designs, 200, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let vt = bcrb_with_prior(&prior, &designs, 200, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(vt.trace() <= 4.0 * 1e-4 + 1e-12);
        assert!(vt.trace() < plain.trace());
        assert!(prior_information(&PriorSpec::point_mass(X).unwrap()).is_err());
    }
}
