//! Zeroth-order interleaved benchmarking likelihood.
//!
//! The survival probability after a sequence of `m` Clifford slots is
//! `A p_ref^m + B` for reference sequences and `A (p_ref p_tilde)^m + B` for
//! sequences interleaved with the gate under study. Every shot is assumed to
//! come from a freshly drawn sequence, so counts at a fixed design are
//! binomial in that probability.

use std::fmt;

use nalgebra::Vector4;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};

/// Parameter vector `(p_tilde, p_ref, A, B)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Depolarizing parameter attributed to the interleaved gate.
    pub p_tilde: f64,
    /// Depolarizing parameter of the average reference Clifford.
    pub p_ref: f64,
    /// SPAM scale.
    pub a: f64,
    /// SPAM offset.
    pub b: f64,
}

/// Component names in storage order.
pub const PARAM_NAMES: [&str; 4] = ["p_tilde", "p_ref", "A", "B"];

impl ModelParams {
    pub const fn new(p_tilde: f64, p_ref: f64, a: f64, b: f64) -> Self {
        ModelParams {
            p_tilde,
            p_ref,
            a,
            b,
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.p_tilde, self.p_ref, self.a, self.b]
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        ModelParams::new(v[0], v[1], v[2], v[3])
    }

    pub fn to_vector(self) -> Vector4<f64> {
        Vector4::from(self.to_array())
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        ModelParams::new(v[0], v[1], v[2], v[3])
    }

    /// Decay parameter governing sequences of the given mode.
    pub fn decay(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Reference => self.p_ref,
            Mode::Interleaved => self.p_ref * self.p_tilde,
        }
    }

    /// Returns the first violated support constraint, if any.
    pub fn check_support(&self) -> Result<()> {
        let ModelParams {
            p_tilde,
            p_ref,
            a,
            b,
        } = *self;
        let fail = |what: &str| Err(Error::Domain(format!("{what} (params {self})")));
        if !self.to_array().iter().all(|v| v.is_finite()) {
            return fail("non-finite parameter");
        }
        if !(-1.0..=1.0).contains(&a) {
            return fail("A outside [-1, 1]");
        }
        if !(0.0..=1.0).contains(&b) {
            return fail("B outside [0, 1]");
        }
        if !(0.0..=1.0).contains(&p_tilde) {
            return fail("p_tilde outside [0, 1]");
        }
        if !(0.0..=1.0).contains(&p_ref) {
            return fail("p_ref outside [0, 1]");
        }
        // p_ref * p_tilde is in [0, 1] once both factors are, and A p^m + B
        // then lies between its m -> infinity value B and its m = 0 value A + B.
        if !(0.0..=1.0).contains(&(a + b)) {
            return fail("A + B outside [0, 1]");
        }
        Ok(())
    }

    pub fn in_support(&self) -> bool {
        self.check_support().is_ok()
    }
}

impl fmt::Display for ModelParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(p_tilde={}, p_ref={}, A={}, B={})",
            self.p_tilde, self.p_ref, self.a, self.b
        )
    }
}

/// Free function form of [`ModelParams::in_support`].
pub fn in_support(x: &ModelParams) -> bool {
    x.in_support()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Reference,
    Interleaved,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Reference => "reference",
            Mode::Interleaved => "interleaved",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "reference" | "ref" => Ok(Mode::Reference),
            "interleaved" | "int" => Ok(Mode::Interleaved),
            other => Err(Error::Parse(format!("unknown mode `{other}`"))),
        }
    }
}

/// A sequence length together with the sequence family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ExperimentDesign {
    pub m: u32,
    pub mode: Mode,
}

impl ExperimentDesign {
    pub const fn new(m: u32, mode: Mode) -> Self {
        ExperimentDesign { m, mode }
    }

    pub const fn reference(m: u32) -> Self {
        ExperimentDesign::new(m, Mode::Reference)
    }

    pub const fn interleaved(m: u32) -> Self {
        ExperimentDesign::new(m, Mode::Interleaved)
    }
}

/// Aggregated single-shot outcomes at one design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Datum {
    pub design: ExperimentDesign,
    pub shots: u64,
    pub survivals: u64,
}

impl Datum {
    pub fn new(design: ExperimentDesign, shots: u64, survivals: u64) -> Result<Self> {
        if shots == 0 {
            return Err(Error::Domain("datum must have at least one shot".into()));
        }
        if survivals > shots {
            return Err(Error::Domain(format!(
                "survivals {survivals} exceed shots {shots}"
            )));
        }
        Ok(Datum {
            design,
            shots,
            survivals,
        })
    }

    pub fn frequency(&self) -> f64 {
        self.survivals as f64 / self.shots as f64
    }
}

/// Hilbert-space dimension, at least 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dimension(u32);

impl Dimension {
    pub const QUBIT: Dimension = Dimension(2);

    pub fn new(d: u32) -> Result<Self> {
        if d < 2 {
            return Err(Error::Domain(format!("dimension {d} < 2")));
        }
        Ok(Dimension(d))
    }

    pub fn get(self) -> u32 {
        self.0
    }
}

/// `A p^m + B` with no support check; callers guarantee validity.
#[inline]
pub(crate) fn survival_unchecked(x: &ModelParams, e: ExperimentDesign) -> f64 {
    x.a * powu(x.decay(e.mode), e.m) + x.b
}

#[inline]
pub(crate) fn powu(base: f64, exp: u32) -> f64 {
    if exp <= i32::MAX as u32 {
        base.powi(exp as i32)
    } else {
        base.powf(exp as f64)
    }
}

/// Survival probability of a design under the zeroth-order model.
pub fn survival_probability(x: &ModelParams, e: ExperimentDesign) -> Result<f64> {
    x.check_support()?;
    Ok(survival_unchecked(x, e).clamp(0.0, 1.0))
}

/// Binomial log-likelihood of `survivals` given `q`, dropping nothing.
#[inline]
pub(crate) fn binomial_log_pmf(q: f64, shots: u64, survivals: u64) -> f64 {
    let q = q.clamp(0.0, 1.0);
    let failures = shots - survivals;
    let hits = if survivals == 0 {
        0.0
    } else if q == 0.0 {
        return f64::NEG_INFINITY;
    } else {
        survivals as f64 * q.ln()
    };
    let misses = if failures == 0 {
        0.0
    } else if q == 1.0 {
        return f64::NEG_INFINITY;
    } else {
        failures as f64 * (-q).ln_1p()
    };
    ln_binomial(shots, survivals) + hits + misses
}

/// Log of the binomial probability of the datum.
///
/// Impossible data (survivals with `q = 0`, failures with `q = 1`) give
/// `-inf` rather than an error.
pub fn log_likelihood(x: &ModelParams, d: &Datum) -> Result<f64> {
    let q = survival_probability(x, d.design)?;
    Ok(binomial_log_pmf(q, d.shots, d.survivals))
}

/// Ideal SPAM constants `(A, B) = (1 - 1/d, 1/d)`.
pub fn ideal_params(dim: Dimension) -> (f64, f64) {
    let d = dim.get() as f64;
    (1.0 - 1.0 / d, 1.0 / d)
}

/// `p = (d F - 1) / (d - 1)`. Fidelities below `1/d` map to negative `p`,
/// which is returned as-is and fails [`ModelParams::in_support`].
pub fn p_from_fidelity(fidelity: f64, dim: Dimension) -> Result<f64> {
    if !(0.0..=1.0).contains(&fidelity) {
        return Err(Error::Domain(format!("fidelity {fidelity} outside [0, 1]")));
    }
    let d = dim.get() as f64;
    Ok((d * fidelity - 1.0) / (d - 1.0))
}

/// `F = (p (d - 1) + 1) / d`.
pub fn fidelity_from_p(p: f64, dim: Dimension) -> Result<f64> {
    if !p.is_finite() || p > 1.0 {
        return Err(Error::Domain(format!("depolarizing parameter {p} > 1")));
    }
    let d = dim.get() as f64;
    Ok((p * (d - 1.0) + 1.0) / d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const TABLE_TRUE: ModelParams = ModelParams::new(0.9983, 0.9957, 0.3185, 0.5012);

    #[test]
    fn survival_at_zero_length_is_a_plus_b() {
        let x = ModelParams::new(0.7, 0.4, 0.3185, 0.5012);
        for mode in [Mode::Reference, Mode::Interleaved] {
            let q = survival_probability(&x, ExperimentDesign::new(0, mode)).unwrap();
            assert_relative_eq!(q, 0.8197, epsilon = 1e-12);
        }
    }

    #[test]
    fn survival_table_row_m1() {
        let q = survival_probability(&TABLE_TRUE, ExperimentDesign::reference(1)).unwrap();
        assert_relative_eq!(q, 0.3185 * 0.9957 + 0.5012, epsilon = 1e-15);
        assert_relative_eq!(q, 0.818_330_45, epsilon = 1e-12);
    }

    #[test]
    fn ideal_gates_never_decay() {
        let x = ModelParams::new(1.0, 1.0, 0.4, 0.5);
        for m in [0, 1, 7, 1000] {
            for mode in [Mode::Reference, Mode::Interleaved] {
                let q = survival_probability(&x, ExperimentDesign::new(m, mode)).unwrap();
                assert_relative_eq!(q, 0.9, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn survival_rejects_out_of_support() {
        let err = survival_probability(
            &ModelParams::new(0.95, 0.95, 1.2, 0.5),
            ExperimentDesign::reference(3),
        )
        .unwrap_err();
        assert!(err.to_string().contains("A outside"), "{err}");
    }

    #[test]
    fn log_likelihood_examples() {
        let half = ModelParams::new(0.9, 0.9, 0.0, 0.5);
        let d = Datum::new(ExperimentDesign::reference(4), 1, 1).unwrap();
        assert_relative_eq!(log_likelihood(&half, &d).unwrap(), 0.5f64.ln(), epsilon = 1e-14);

        let certain = ModelParams::new(1.0, 1.0, 0.5, 0.5);
        let d = Datum::new(ExperimentDesign::interleaved(12), 10, 10).unwrap();
        assert_eq!(log_likelihood(&certain, &d).unwrap(), 0.0);

        let d = Datum::new(ExperimentDesign::reference(1), 2, 1).unwrap();
        let q: f64 = survival_probability(&TABLE_TRUE, d.design).unwrap();
        assert_relative_eq!(q, 0.818_330_45, epsilon = 1e-8);
        assert_relative_eq!(
            log_likelihood(&TABLE_TRUE, &d).unwrap(),
            (2.0 * q * (1.0 - q)).ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn contradicting_boundary_data_is_impossible() {
        let certain = ModelParams::new(1.0, 1.0, 0.5, 0.5);
        let d = Datum::new(ExperimentDesign::reference(3), 10, 9).unwrap();
        assert_eq!(log_likelihood(&certain, &d).unwrap(), f64::NEG_INFINITY);

        let never = ModelParams::new(0.9, 0.9, 0.0, 0.0);
        let d = Datum::new(ExperimentDesign::reference(3), 4, 1).unwrap();
        assert_eq!(log_likelihood(&never, &d).unwrap(), f64::NEG_INFINITY);
        let d = Datum::new(ExperimentDesign::reference(3), 4, 0).unwrap();
        assert_eq!(log_likelihood(&never, &d).unwrap(), 0.0);
    }

    #[test]
    fn datum_validation() {
        assert!(Datum::new(ExperimentDesign::reference(1), 0, 0).is_err());
        assert!(Datum::new(ExperimentDesign::reference(1), 3, 4).is_err());
    }

    #[test]
    fn support_examples() {
        assert!(in_support(&ModelParams::new(0.95, 0.95, 0.3, 0.5)));
        assert!(!in_support(&ModelParams::new(0.95, 0.95, 1.2, 0.5)));
        assert!(!in_support(&ModelParams::new(1.0, 1.0, 0.6, 0.6)));
        assert!(!in_support(&ModelParams::new(1.01, 0.9, 0.3, 0.5)));
        assert!(!in_support(&ModelParams::new(0.9, -0.01, 0.3, 0.5)));
        assert!(!in_support(&ModelParams::new(0.9, 0.9, -0.6, 0.5)));
        assert!(!in_support(&ModelParams::new(0.9, 0.9, 0.3, f64::NAN)));
        // Negative A is fine as long as B + A stays nonnegative.
        assert!(in_support(&ModelParams::new(0.9, 0.9, -0.4, 0.5)));
    }

    #[test]
    fn ideal_spam() {
        assert_eq!(ideal_params(Dimension::new(2).unwrap()), (0.5, 0.5));
        assert_eq!(ideal_params(Dimension::new(4).unwrap()), (0.75, 0.25));
        let (a, b) = ideal_params(Dimension::new(1 << 20).unwrap());
        assert!(a > 1.0 - 1e-5 && b < 1e-5);
        assert!(Dimension::new(1).is_err());
    }

    #[test]
    fn fidelity_conversions() {
        let q = Dimension::QUBIT;
        for d in [2, 3, 8] {
            let dim = Dimension::new(d).unwrap();
            assert_relative_eq!(p_from_fidelity(1.0, dim).unwrap(), 1.0);
        }
        assert_relative_eq!(p_from_fidelity(0.5, q).unwrap(), 0.0);
        let p = p_from_fidelity(0.9983, q).unwrap();
        assert_relative_eq!(fidelity_from_p(p, q).unwrap(), 0.9983, epsilon = 1e-15);
        let low = p_from_fidelity(0.3, q).unwrap();
        assert!(low < 0.0);
        assert!(!ModelParams::new(1.0, low, 0.5, 0.5).in_support());
        assert!(p_from_fidelity(1.5, q).is_err());
    }

    fn arb_params() -> impl Strategy<Value = ModelParams> {
        (0.0..=1.0f64, 0.0..=1.0f64, -1.0..=1.0f64, 0.0..=1.0f64)
            .prop_map(|(pt, pr, a, b)| ModelParams::new(pt, pr, a, b))
            .prop_filter("in support", |x| x.in_support())
    }

    fn arb_mode() -> impl Strategy<Value = Mode> {
        prop_oneof![Just(Mode::Reference), Just(Mode::Interleaved)]
    }

    proptest! {
        #[test]
        fn survival_is_a_probability(x in arb_params(), m in 0u32..5000, mode in arb_mode()) {
            let q = survival_probability(&x, ExperimentDesign::new(m, mode)).unwrap();
            prop_assert!((0.0..=1.0).contains(&q));
        }

        #[test]
        fn survival_nonincreasing_in_m(
            x in arb_params().prop_filter("A >= 0", |x| x.a >= 0.0),
            m in 0u32..2000,
            mode in arb_mode(),
        ) {
            let now = survival_probability(&x, ExperimentDesign::new(m, mode)).unwrap();
            let next = survival_probability(&x, ExperimentDesign::new(m + 1, mode)).unwrap();
            prop_assert!(next <= now + 1e-15);
        }

        #[test]
        fn interleaved_is_reference_with_substituted_decay(x in arb_params(), m in 0u32..500) {
            let sub = ModelParams { p_ref: x.p_ref * x.p_tilde, ..x };
            let a = survival_probability(&x, ExperimentDesign::interleaved(m)).unwrap();
            let b = survival_probability(&sub, ExperimentDesign::reference(m)).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn binomial_normalizes(x in arb_params(), m in 0u32..300, shots in 1u64..60, mode in arb_mode()) {
            let design = ExperimentDesign::new(m, mode);
            let total: f64 = (0..=shots)
                .map(|k| log_likelihood(&x, &Datum::new(design, shots, k).unwrap()).unwrap().exp())
                .sum();
            prop_assert!((total - 1.0).abs() < 1e-12, "total = {}", total);
        }
    }
}
