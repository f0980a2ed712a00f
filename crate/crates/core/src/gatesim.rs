//! Data generators: Bernoulli sampling straight from the zeroth-order model,
//! and a single-qubit gate-level simulator built on Pauli transfer matrices
//! of noisy Clifford gates.
//!
//! PTMs act on real 4-vectors in the normalized Pauli basis `{I, X, Y, Z}/sqrt(2)`;
//! composing channels is matrix multiplication. A sequence of length `m`
//! holds `m` uniformly random Cliffords followed by the exact group inverse
//! of their ideal product. In interleaved mode the gate under study follows
//! every random Clifford; the closing inverse undoes it as well.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use nalgebra::{Complex, Matrix2, Matrix4, SymmetricEigen, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    fidelity_from_p, survival_unchecked, Datum, Dimension, ExperimentDesign, Mode, ModelParams,
};

/// Order of the single-qubit Clifford group modulo phase.
pub const GROUP_ORDER: usize = 24;

/// Survival probabilities this far outside `[0, 1]` are logged before clamping.
const CLAMP_LOG_THRESHOLD: f64 = 1e-9;

/// Real PTM of a single-qubit channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Superoperator(pub Matrix4<f64>);

impl Superoperator {
    pub fn identity() -> Self {
        Superoperator(Matrix4::identity())
    }

    pub fn ptm(&self) -> &Matrix4<f64> {
        &self.0
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Superoperator) -> Superoperator {
        Superoperator(self.0 * other.0)
    }

    /// `diag(1, 1-eps, 1-eps, 1-eps)`.
    pub fn depolarizing(eps: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::Construction(format!(
                "depolarizing strength {eps} outside [0, 1]"
            )));
        }
        let r = 1.0 - eps;
        Ok(Superoperator(Matrix4::from_diagonal(&Vector4::new(1.0, r, r, r))))
    }

    /// Unitary rotation about the Z axis by `theta` radians.
    pub fn z_rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        #[rustfmt::skip]
        let m = Matrix4::new(
            1.0, 0.0, 0.0, 0.0,
            0.0, c,   -s,  0.0,
            0.0, s,   c,   0.0,
            0.0, 0.0, 0.0, 1.0,
        );
        Superoperator(m)
    }

    pub fn is_trace_preserving(&self, tol: f64) -> bool {
        let row = self.0.row(0);
        (row[0] - 1.0).abs() <= tol && row.iter().skip(1).all(|v| v.abs() <= tol)
    }

    /// Eigenvalues of the Choi matrix (unit trace normalization).
    pub fn choi_eigenvalues(&self) -> Vector4<f64> {
        let paulis = pauli_matrices();
        let mut choi = Matrix4::<Complex<f64>>::zeros();
        for i in 0..4 {
            for j in 0..4 {
                let r = self.0[(i, j)];
                if r == 0.0 {
                    continue;
                }
                choi += kron2(&paulis[j].transpose(), &paulis[i]) * Complex::new(r / 4.0, 0.0);
            }
        }
        SymmetricEigen::new(choi).eigenvalues
    }

    pub fn is_completely_positive(&self, tol: f64) -> bool {
        self.choi_eigenvalues().min() >= -tol
    }

    /// Mean of the unital-block diagonal, the depolarizing parameter of the twirl.
    pub fn unital_trace_mean(&self) -> f64 {
        (self.0[(1, 1)] + self.0[(2, 2)] + self.0[(3, 3)]) / 3.0
    }
}

fn pauli_matrices() -> [Matrix2<Complex<f64>>; 4] {
    let o = Complex::new(0.0, 0.0);
    let l = Complex::new(1.0, 0.0);
    let i = Complex::new(0.0, 1.0);
    [
        Matrix2::new(l, o, o, l),
        Matrix2::new(o, l, l, o),
        Matrix2::new(o, -i, i, o),
        Matrix2::new(l, o, o, -l),
    ]
}

fn kron2(a: &Matrix2<Complex<f64>>, b: &Matrix2<Complex<f64>>) -> Matrix4<Complex<f64>> {
    Matrix4::from_fn(|r, c| a[(r / 2, c / 2)] * b[(r % 2, c % 2)])
}

/// Signed permutation of the Pauli axes, the unital block of a Clifford PTM.
type SignedPerm = [[i8; 3]; 3];

fn perm_mul(a: &SignedPerm, b: &SignedPerm) -> SignedPerm {
    let mut out = [[0i8; 3]; 3];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = (0..3).map(|k| a[r][k] * b[k][c]).sum();
        }
    }
    out
}

fn perm_to_ptm(p: &SignedPerm) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    m[(0, 0)] = 1.0;
    for r in 0..3 {
        for c in 0..3 {
            m[(r + 1, c + 1)] = p[r][c] as f64;
        }
    }
    m
}

const PERM_I: SignedPerm = [[1, 0, 0], [0, 1, 0], [0, 0, 1]];
const PERM_X: SignedPerm = [[1, 0, 0], [0, -1, 0], [0, 0, -1]];
const PERM_Y: SignedPerm = [[-1, 0, 0], [0, 1, 0], [0, 0, -1]];
const PERM_Z: SignedPerm = [[-1, 0, 0], [0, -1, 0], [0, 0, 1]];
// Columns are the images of X, Y, Z.
const PERM_H: SignedPerm = [[0, 0, 1], [0, -1, 0], [1, 0, 0]];
const PERM_P: SignedPerm = [[0, -1, 0], [1, 0, 0], [0, 0, 1]];

/// Named target gates, all members of the group.
pub const TARGET_LABELS: [&str; 6] = ["I", "X", "Y", "Z", "H", "P"];

/// The 24-element single-qubit Clifford group with exact tables.
#[derive(Debug)]
pub struct CliffordGroup {
    perms: Vec<SignedPerm>,
    elements: Vec<Superoperator>,
    labels: Vec<String>,
    /// `mul[g][h]` is the index of `G_g G_h` (apply `h` first).
    mul: Vec<[u8; GROUP_ORDER]>,
    inv: [u8; GROUP_ORDER],
}

impl CliffordGroup {
    fn generate() -> Self {
        let mut perms = vec![PERM_I];
        let mut frontier = 0;
        while frontier < perms.len() {
            let g = perms[frontier];
            for s in [PERM_H, PERM_P] {
                let h = perm_mul(&s, &g);
                if !perms.contains(&h) {
                    perms.push(h);
                }
            }
            frontier += 1;
        }
        assert_eq!(perms.len(), GROUP_ORDER, "Clifford closure");
        let index = |p: &SignedPerm| perms.iter().position(|q| q == p).unwrap() as u8;
        let mul = perms
            .iter()
            .map(|a| {
                let mut row = [0u8; GROUP_ORDER];
                for (j, b) in perms.iter().enumerate() {
                    row[j] = index(&perm_mul(a, b));
                }
                row
            })
            .collect::<Vec<_>>();
        let mut inv = [0u8; GROUP_ORDER];
        for (g, row) in mul.iter().enumerate() {
            inv[g] = row.iter().position(|k| *k == 0).unwrap() as u8;
        }
        let named = [
            (PERM_I, "I"),
            (PERM_X, "X"),
            (PERM_Y, "Y"),
            (PERM_Z, "Z"),
            (PERM_H, "H"),
            (PERM_P, "P"),
        ];
        let labels = perms
            .iter()
            .enumerate()
            .map(|(i, p)| {
                named
                    .iter()
                    .find(|(q, _)| q == p)
                    .map(|(_, l)| l.to_string())
                    .unwrap_or_else(|| format!("C{i}"))
            })
            .collect();
        let elements = perms.iter().map(|p| Superoperator(perm_to_ptm(p))).collect();
        CliffordGroup {
            perms,
            elements,
            labels,
            mul,
            inv,
        }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn identity_index(&self) -> usize {
        0
    }

    pub fn element(&self, g: usize) -> &Superoperator {
        &self.elements[g]
    }

    pub fn elements(&self) -> &[Superoperator] {
        &self.elements
    }

    pub fn label(&self, g: usize) -> &str {
        &self.labels[g]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn mul(&self, g: usize, h: usize) -> usize {
        self.mul[g][h] as usize
    }

    pub fn inverse(&self, g: usize) -> usize {
        self.inv[g] as usize
    }

    /// Determinant of the unital block; +1 for every element.
    pub fn determinant(&self, g: usize) -> i32 {
        let p = &self.perms[g];
        let d = |r: usize, c: usize| p[r][c] as i32;
        d(0, 0) * (d(1, 1) * d(2, 2) - d(1, 2) * d(2, 1))
            - d(0, 1) * (d(1, 0) * d(2, 2) - d(1, 2) * d(2, 0))
            + d(0, 2) * (d(1, 0) * d(2, 1) - d(1, 1) * d(2, 0))
    }
}

/// Shared, immutable group tables.
pub fn clifford_group() -> &'static CliffordGroup {
    static GROUP: OnceLock<CliffordGroup> = OnceLock::new();
    GROUP.get_or_init(CliffordGroup::generate)
}

/// Group average `(1/24) sum_g G^-1 Λ G`.
pub fn twirl(channel: &Superoperator) -> Superoperator {
    let group = clifford_group();
    let sum = group
        .elements()
        .iter()
        .fold(Matrix4::zeros(), |acc, g| acc + g.0.transpose() * channel.0 * g.0);
    Superoperator(sum / GROUP_ORDER as f64)
}

/// Noise on one gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateNoise {
    pub depolarizing_strength: f64,
    pub overrotation_angle: f64,
}

/// Preparation and measurement. The state is a Bloch vector; the effect is
/// `identity * I + bloch . sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpamConfig {
    pub state_bloch: [f64; 3],
    pub effect_identity: f64,
    pub effect_bloch: [f64; 3],
}

impl Default for SpamConfig {
    fn default() -> Self {
        SpamConfig {
            state_bloch: [0.0, 0.0, 1.0],
            effect_identity: 0.5,
            effect_bloch: [0.0, 0.0, 0.5],
        }
    }
}

impl SpamConfig {
    pub fn validate(&self) -> Result<()> {
        let norm = |v: &[f64; 3]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm(&self.state_bloch) > 1.0 + 1e-12 {
            return Err(Error::Construction("state Bloch vector longer than 1".into()));
        }
        let e = norm(&self.effect_bloch);
        let (lo, hi) = (self.effect_identity - e, self.effect_identity + e);
        if lo < -1e-12 || hi > 1.0 + 1e-12 {
            return Err(Error::Construction(format!(
                "measurement effect eigenvalues ({lo}, {hi}) leave [0, 1]"
            )));
        }
        Ok(())
    }

    pub fn state_vector(&self) -> Vector4<f64> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let [x, y, z] = self.state_bloch;
        Vector4::new(s, s * x, s * y, s * z)
    }

    pub fn effect_vector(&self) -> Vector4<f64> {
        let r = std::f64::consts::SQRT_2;
        let [x, y, z] = self.effect_bloch;
        Vector4::new(r * self.effect_identity, r * x, r * y, r * z)
    }
}

/// Maximally mixed state `I/2` as a PTM vector.
pub fn maximally_mixed_vector() -> Vector4<f64> {
    Vector4::new(std::f64::consts::FRAC_1_SQRT_2, 0.0, 0.0, 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    pub depolarizing_strength: f64,
    /// Z rotation composed with every gate, in radians.
    pub overrotation_angle: f64,
    /// Replacement noise for individual gates, keyed by label.
    pub per_gate: BTreeMap<String, GateNoise>,
    /// Apply the noise before the ideal gate instead of after it.
    pub noise_before_gate: bool,
    pub spam: SpamConfig,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            depolarizing_strength: 0.0,
            overrotation_angle: 0.0,
            per_gate: BTreeMap::new(),
            noise_before_gate: false,
            spam: SpamConfig::default(),
        }
    }
}

impl NoiseConfig {
    pub fn depolarizing(eps: f64) -> Self {
        NoiseConfig {
            depolarizing_strength: eps,
            ..Default::default()
        }
    }

    fn channel(noise: GateNoise) -> Result<Superoperator> {
        Ok(Superoperator::depolarizing(noise.depolarizing_strength)?
            .compose(&Superoperator::z_rotation(noise.overrotation_angle)))
    }
}

#[derive(Debug, Clone)]
pub struct GateSet {
    pub ideal: Vec<Superoperator>,
    pub noisy: Vec<Superoperator>,
    pub state: Vector4<f64>,
    pub effect: Vector4<f64>,
}

impl GateSet {
    pub fn noiseless() -> Self {
        make_noisy_gateset(&NoiseConfig::default()).expect("ideal gate set")
    }

    pub fn noisy_by_label(&self, label: &str) -> Option<&Superoperator> {
        clifford_group().index_of(label).map(|g| &self.noisy[g])
    }

    /// Error channel `noisy_g ∘ ideal_g^-1` of gate `g`.
    pub fn error_channel(&self, g: usize) -> Superoperator {
        Superoperator(self.noisy[g].0 * self.ideal[g].0.transpose())
    }

    /// Uniform average of the error channels over the group.
    pub fn average_error_channel(&self) -> Superoperator {
        let sum = (0..GROUP_ORDER).fold(Matrix4::zeros(), |acc, g| acc + self.error_channel(g).0);
        Superoperator(sum / GROUP_ORDER as f64)
    }
}

/// Builds noisy gates `Λ_label ∘ U` with `Λ = depolarizing ∘ overrotation`.
pub fn make_noisy_gateset(noise: &NoiseConfig) -> Result<GateSet> {
    noise.spam.validate()?;
    let group = clifford_group();
    for label in noise.per_gate.keys() {
        if group.index_of(label).is_none() {
            return Err(Error::Construction(format!("unknown gate label `{label}`")));
        }
    }
    let default = GateNoise {
        depolarizing_strength: noise.depolarizing_strength,
        overrotation_angle: noise.overrotation_angle,
    };
    let mut noisy = Vec::with_capacity(GROUP_ORDER);
    for g in 0..GROUP_ORDER {
        let gate_noise = noise.per_gate.get(group.label(g)).copied().unwrap_or(default);
        let lambda = NoiseConfig::channel(gate_noise)?;
        if !lambda.is_trace_preserving(1e-12) || !lambda.is_completely_positive(1e-10) {
            return Err(Error::Construction(format!(
                "noise on gate {} is not CPTP",
                group.label(g)
            )));
        }
        let u = group.element(g);
        noisy.push(if noise.noise_before_gate {
            u.compose(&lambda)
        } else {
            lambda.compose(u)
        });
    }
    Ok(GateSet {
        ideal: group.elements().to_vec(),
        noisy,
        state: noise.spam.state_vector(),
        effect: noise.spam.effect_vector(),
    })
}

/// One random benchmarking sequence and its single-shot outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceRecord {
    /// Group indices in application order; the last one closes the sequence.
    pub gates: Vec<u8>,
    pub interleaved_with: Option<String>,
    pub survival_prob: f64,
    pub outcome: Option<bool>,
}

/// Draws `m` random Cliffords plus the closing inverse. With `interleave`,
/// the named gate follows each random Clifford.
pub fn random_sequence<R: Rng + ?Sized>(
    m: u32,
    gateset: &GateSet,
    interleave: Option<&str>,
    rng: &mut R,
) -> Result<SequenceRecord> {
    if m == 0 {
        return Err(Error::Domain("sequence length must be at least 1".into()));
    }
    let group = clifford_group();
    let c = interleave
        .map(|label| {
            group
                .index_of(label)
                .ok_or_else(|| Error::Domain(format!("unknown gate label `{label}`")))
        })
        .transpose()?;
    let mut gates = Vec::with_capacity(m as usize + 1);
    let mut total = group.identity_index();
    for _ in 0..m {
        let g = rng.random_range(0..GROUP_ORDER);
        gates.push(g as u8);
        total = group.mul(g, total);
        if let Some(c) = c {
            total = group.mul(c, total);
        }
    }
    gates.push(group.inverse(total) as u8);
    let mut seq = SequenceRecord {
        gates,
        interleaved_with: interleave.map(str::to_string),
        survival_prob: 0.0,
        outcome: None,
    };
    seq.survival_prob = sequence_survival(gateset, &seq)?;
    Ok(seq)
}

fn resolve_interleave(seq: &SequenceRecord) -> Result<Option<usize>> {
    seq.interleaved_with
        .as_deref()
        .map(|label| {
            clifford_group()
                .index_of(label)
                .ok_or_else(|| Error::Domain(format!("unknown gate label `{label}`")))
        })
        .transpose()
}

fn apply_sequence(ops: &[Superoperator], seq: &SequenceRecord, c: Option<usize>, v: Vector4<f64>) -> Vector4<f64> {
    let last = seq.gates.len().saturating_sub(1);
    seq.gates.iter().enumerate().fold(v, |v, (k, &g)| {
        let v = ops[g as usize].0 * v;
        match c {
            Some(c) if k < last => ops[c].0 * v,
            _ => v,
        }
    })
}

/// Ideal composition of the sequence; the identity for well-formed records.
pub fn ideal_composition(gateset: &GateSet, seq: &SequenceRecord) -> Result<Superoperator> {
    let c = resolve_interleave(seq)?;
    let mut acc = Matrix4::identity();
    let last = seq.gates.len().saturating_sub(1);
    for (k, &g) in seq.gates.iter().enumerate() {
        acc = gateset.ideal[g as usize].0 * acc;
        if let (Some(c), true) = (c, k < last) {
            acc = gateset.ideal[c].0 * acc;
        }
    }
    Ok(Superoperator(acc))
}

/// `E · S_seq · ρ` through the noisy gates, clamped to `[0, 1]`.
pub fn sequence_survival(gateset: &GateSet, seq: &SequenceRecord) -> Result<f64> {
    let c = resolve_interleave(seq)?;
    let out = apply_sequence(&gateset.noisy, seq, c, gateset.state);
    let q = gateset.effect.dot(&out);
    let clamped = q.clamp(0.0, 1.0);
    if (q - clamped).abs() > CLAMP_LOG_THRESHOLD {
        log::warn!("survival probability {q} clamped to [0, 1]");
    }
    Ok(clamped)
}

/// Exact Bernoulli sampling from the zeroth-order model.
pub fn sample_model_data<R: Rng + ?Sized>(
    x_true: &ModelParams,
    designs: &[(ExperimentDesign, u64)],
    rng: &mut R,
) -> Result<Vec<Datum>> {
    x_true.check_support()?;
    designs
        .iter()
        .map(|&(design, shots)| {
            let q = survival_unchecked(x_true, design).clamp(0.0, 1.0);
            let survivals = Binomial::new(shots, q)
                .map_err(|e| Error::Domain(format!("binomial({shots}, {q}): {e}")))?
                .sample(rng);
            Datum::new(design, shots, survivals)
        })
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct GateDataset {
    pub data: Vec<Datum>,
    /// Per-shot sequences, present when requested.
    pub records: Vec<SequenceRecord>,
}

/// Draws a fresh sequence for every shot and samples one outcome from it.
///
/// Each design gets its own generator stream seeded from `rng`, so the
/// result does not depend on how the designs are scheduled across threads.
pub fn sample_gate_data<R: Rng + ?Sized>(
    gateset: &GateSet,
    designs: &[(ExperimentDesign, u64)],
    interleave: &str,
    keep_records: bool,
    rng: &mut R,
) -> Result<GateDataset> {
    let group = clifford_group();
    if group.index_of(interleave).is_none() {
        return Err(Error::Domain(format!("unknown gate label `{interleave}`")));
    }
    let seeds: Vec<u64> = designs.iter().map(|_| rng.random()).collect();
    let per_design: Vec<Result<(Datum, Vec<SequenceRecord>)>> = designs
        .par_iter()
        .zip(seeds)
        .map(|(&(design, shots), seed)| {
            let mut local = ChaCha8Rng::seed_from_u64(seed);
            let label = match design.mode {
                Mode::Reference => None,
                Mode::Interleaved => Some(interleave),
            };
            let mut survivals = 0u64;
            let mut records = Vec::new();
            for _ in 0..shots {
                let mut seq = random_sequence(design.m, gateset, label, &mut local)?;
                let hit = local.random::<f64>() < seq.survival_prob;
                survivals += hit as u64;
                if keep_records {
                    seq.outcome = Some(hit);
                    records.push(seq);
                }
            }
            Ok((Datum::new(design, shots, survivals)?, records))
        })
        .collect();
    let mut out = GateDataset::default();
    for item in per_design {
        let (datum, records) = item?;
        out.data.push(datum);
        out.records.extend(records);
    }
    Ok(out)
}

/// Zeroth-order parameters implied by a gate set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueParams {
    pub p: f64,
    pub a: f64,
    pub b: f64,
    pub f_ave: f64,
    /// Decay of sequences interleaved with the studied gate.
    pub p_interleaved: Option<f64>,
    pub p_tilde: Option<f64>,
}

impl TrueParams {
    /// `(p_tilde, p_ref, A, B)`; `p_tilde` is 1 when no gate was interleaved.
    pub fn model_params(&self) -> ModelParams {
        ModelParams::new(self.p_tilde.unwrap_or(1.0), self.p, self.a, self.b)
    }
}

/// Reads `(p, A, B, F_ave)` off the twirled average error channel.
pub fn true_params_from_gateset(gateset: &GateSet, interleave: Option<&str>) -> Result<TrueParams> {
    let lambda = gateset.average_error_channel();
    let p = twirl(&lambda).unital_trace_mean();
    let mm = maximally_mixed_vector();
    let a = gateset.effect.dot(&(lambda.0 * (gateset.state - mm)));
    let b = gateset.effect.dot(&(lambda.0 * mm));
    let f_ave = fidelity_from_p(p, Dimension::QUBIT)?;
    let (p_interleaved, p_tilde) = match interleave {
        None => (None, None),
        Some(label) => {
            let c = clifford_group()
                .index_of(label)
                .ok_or_else(|| Error::Domain(format!("unknown gate label `{label}`")))?;
            let ideal = gateset.ideal[c].0;
            let slot = gateset.error_channel(c).0 * ideal * lambda.0 * ideal.transpose();
            let pc = twirl(&Superoperator(slot)).unital_trace_mean();
            (Some(pc), Some(pc / p))
        }
    };
    Ok(TrueParams {
        p,
        a,
        b,
        f_ave,
        p_interleaved,
        p_tilde,
    })
}

/// Split of the single-shot variance at fixed `m` into the spread of
/// per-sequence survival probabilities and the mean per-sequence variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceDecomposition {
    pub mean_survival: f64,
    pub total: f64,
    pub between: f64,
    pub within: f64,
}

pub fn variance_decomposition<R: Rng + ?Sized>(
    gateset: &GateSet,
    m: u32,
    n_sequences: usize,
    interleave: Option<&str>,
    rng: &mut R,
) -> Result<VarianceDecomposition> {
    if n_sequences < 2 {
        return Err(Error::Domain("need at least 2 sequences".into()));
    }
    let probs = (0..n_sequences)
        .map(|_| random_sequence(m, gateset, interleave, rng).map(|s| s.survival_prob))
        .collect::<Result<Vec<_>>>()?;
    let n = n_sequences as f64;
    let mean = probs.iter().sum::<f64>() / n;
    let between = probs.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / n;
    let within = probs.iter().map(|p| p * (1.0 - p)).sum::<f64>() / n;
    Ok(VarianceDecomposition {
        mean_survival: mean,
        total: mean * (1.0 - mean),
        between,
        within,
    })
}
