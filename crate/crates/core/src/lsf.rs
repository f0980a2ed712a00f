//! Least-squares baseline: separate fits of `A p^m + B` to the reference and
//! interleaved survival frequencies, with `p_tilde` taken as the ratio of
//! the fitted decays.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{powu, Datum, Mode, ModelParams};

pub const MAX_ITERATIONS: usize = 500;
pub const STEP_TOLERANCE: f64 = 1e-10;

/// One averaged point of a decay curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    pub m: u32,
    pub frequency: f64,
    pub shots: u64,
}

impl From<&Datum> for FitPoint {
    fn from(d: &Datum) -> Self {
        FitPoint {
            m: d.design.m,
            frequency: d.frequency(),
            shots: d.shots,
        }
    }
}

/// `(A, B, p)` of a single decay curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayParams {
    pub a: f64,
    pub b: f64,
    pub p: f64,
}

impl DecayParams {
    pub fn eval(&self, m: u32) -> f64 {
        self.a * powu(self.p, m) + self.b
    }

    fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.a, self.b, self.p)
    }

    fn from_vector(v: &Vector3<f64>) -> Self {
        DecayParams {
            a: v[0].clamp(-1.0, 1.0),
            b: v[1].clamp(0.0, 1.0),
            p: v[2].clamp(0.0, 1.0),
        }
    }

    /// Partial derivatives with respect to `(A, B, p)`.
    pub fn jacobian_row(&self, m: u32) -> Vector3<f64> {
        let dp = if m == 0 {
            0.0
        } else {
            m as f64 * self.a * powu(self.p, m - 1)
        };
        Vector3::new(powu(self.p, m), 1.0, dp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FitOptions {
    /// Weight residuals by the square root of the shot count.
    pub shot_weighted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: DecayParams,
    /// Euclidean norm of the (weighted) residual vector.
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
}

fn residuals(points: &[FitPoint], w: &[f64], params: &DecayParams) -> Vec<f64> {
    points
        .iter()
        .zip(w)
        .map(|(pt, wi)| wi * (pt.frequency - params.eval(pt.m)))
        .collect()
}

fn cost(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Fits `A p^m + B` to `points` by Levenberg-Marquardt, starting at `guess`.
///
/// Parameters are clipped to `[-1, 1] x [0, 1] x [0, 1]` after every step.
/// The fit stops once an accepted step is shorter than [`STEP_TOLERANCE`],
/// once no damping level reduces the cost, or after [`MAX_ITERATIONS`].
pub fn fit_zeroth_order(points: &[FitPoint], guess: DecayParams) -> Result<FitResult> {
    fit_zeroth_order_with(points, guess, FitOptions::default())
}

pub fn fit_zeroth_order_with(
    points: &[FitPoint],
    guess: DecayParams,
    options: FitOptions,
) -> Result<FitResult> {
    let mut lengths: Vec<u32> = points.iter().map(|p| p.m).collect();
    lengths.sort_unstable();
    lengths.dedup();
    if lengths.len() < 3 {
        return Err(Error::Underdetermined {
            distinct: lengths.len(),
            needed: 3,
        });
    }
    if let Some(pt) = points.iter().find(|p| !(0.0..=1.0).contains(&p.frequency)) {
        return Err(Error::Domain(format!(
            "frequency {} at m = {} outside [0, 1]",
            pt.frequency, pt.m
        )));
    }

    // Canonical order keeps the result independent of how the caller sorted points.
    let mut points = points.to_vec();
    points.sort_by(|a, b| {
        (a.m, a.shots)
            .cmp(&(b.m, b.shots))
            .then(a.frequency.total_cmp(&b.frequency))
    });
    let weights: Vec<f64> = points
        .iter()
        .map(|p| if options.shot_weighted { (p.shots as f64).sqrt() } else { 1.0 })
        .collect();

    let mut params = DecayParams::from_vector(&guess.to_vector());
    let mut r = residuals(&points, &weights, &params);
    let mut current = cost(&r);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for ((pt, wi), ri) in points.iter().zip(&weights).zip(&r) {
            let row = params.jacobian_row(pt.m) * *wi;
            jtj += row * row.transpose();
            jtr += row * *ri;
        }
        if jtr.norm() < 1e-15 {
            converged = true;
            break;
        }

        let mut accepted = false;
        while lambda < 1e16 {
            let damped = jtj + Matrix3::identity() * lambda;
            let Some(step) = damped.cholesky().map(|c| c.solve(&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = DecayParams::from_vector(&(params.to_vector() + step));
            let r_trial = residuals(&points, &weights, &trial);
            let c_trial = cost(&r_trial);
            if c_trial <= current {
                let moved = (trial.to_vector() - params.to_vector()).norm();
                params = trial;
                r = r_trial;
                current = c_trial;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if moved < STEP_TOLERANCE {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // No damping level reduces the cost: a (constrained) minimum.
            converged = true;
        }
        if converged {
            break;
        }
    }

    let residual_norm = current.sqrt();
    Ok(FitResult {
        params,
        residual_norm,
        converged: converged && residual_norm.is_finite(),
        iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LsfDiagnostics {
    pub reference: FitResult,
    pub interleaved: FitResult,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LsfEstimate {
    /// May lie outside the model support: the ratio estimator is unconstrained.
    pub estimate: ModelParams,
    pub diagnostics: LsfDiagnostics,
}

/// Fits each mode separately and reports `p_tilde = p_int / p_ref`, with
/// `A`, `B` taken from the reference fit.
pub fn lsf_interleaved_estimate(
    ref_points: &[FitPoint],
    int_points: &[FitPoint],
    guess: &ModelParams,
) -> Result<LsfEstimate> {
    let ref_guess = DecayParams {
        a: guess.a,
        b: guess.b,
        p: guess.p_ref,
    };
    let int_guess = DecayParams {
        p: guess.p_ref * guess.p_tilde,
        ..ref_guess
    };
    let reference = fit_zeroth_order(ref_points, ref_guess)?;
    let interleaved = fit_zeroth_order(int_points, int_guess)?;
    if reference.params.p == 0.0 {
        return Err(Error::RatioUndefined);
    }
    let estimate = ModelParams::new(
        interleaved.params.p / reference.params.p,
        reference.params.p,
        reference.params.a,
        reference.params.b,
    );
    Ok(LsfEstimate {
        estimate,
        diagnostics: LsfDiagnostics {
            reference,
            interleaved,
        },
    })
}

/// Splits a dataset into per-mode fit points.
pub fn split_points(data: &[Datum]) -> (Vec<FitPoint>, Vec<FitPoint>) {
    let pick = |mode| {
        data.iter()
            .filter(|d| d.design.mode == mode)
            .map(FitPoint::from)
            .collect::<Vec<_>>()
    };
    (pick(Mode::Reference), pick(Mode::Interleaved))
}
