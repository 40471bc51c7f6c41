//! Multi-qubit density matrices built from thermal qubits.
//!
//! Qubit 0 is the most significant bit of a computational-basis index, so
//! on four qubits the index of `|1000⟩` is 8 and denotes qubit 0 excited.
//! Energies are in units of the level spacing with `k_B = 1`.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, CMatrix, ZERO};
use crate::math;

/// Default cap on the number of qubits in a dense state.
pub const DEFAULT_MAX_QUBITS: usize = 8;
/// Tolerance on `|ρ − ρ†|` and on `|Tr ρ − 1|`.
pub const STATE_TOL: f64 = 1e-12;
/// Most negative eigenvalue accepted in a density matrix.
pub const PSD_TOL: f64 = -1e-10;

/// A thermal qubit: excited population `p` and level spacing `e1` (ground
/// energy fixed at zero).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawQubitSpec")]
pub struct QubitSpec {
    p: f64,
    e1: f64,
}

#[derive(Deserialize)]
struct RawQubitSpec {
    p: f64,
    #[serde(default = "unit_spacing")]
    e1: f64,
}

fn unit_spacing() -> f64 {
    1.0
}

impl TryFrom<RawQubitSpec> for QubitSpec {
    type Error = Error;

    fn try_from(raw: RawQubitSpec) -> Result<Self> {
        QubitSpec::new(raw.p, raw.e1)
    }
}

impl QubitSpec {
    pub fn new(p: f64, e1: f64) -> Result<Self> {
        check_population(p)?;
        if !(e1 > 0.0 && e1.is_finite()) {
            return Err(Error::InvalidLevelSpacing(e1));
        }
        Ok(Self { p, e1 })
    }

    /// Qubit with unit level spacing.
    pub fn unit(p: f64) -> Result<Self> {
        Self::new(p, 1.0)
    }

    /// Thermal qubit at temperature `t` with spacing `e1`.
    pub fn at_temperature(t: f64, e1: f64) -> Result<Self> {
        let p = population_from_temperature(t, e1)?;
        Self::new(p, e1)
    }

    #[inline]
    pub fn p(&self) -> f64 {
        self.p
    }

    #[inline]
    pub fn e1(&self) -> f64 {
        self.e1
    }

    pub fn temperature(&self) -> f64 {
        self.e1 / math::ln((1.0 - self.p) / self.p)
    }
}

fn check_population(p: f64) -> Result<()> {
    if p > 0.0 && p < 0.5 {
        Ok(())
    } else {
        Err(Error::InvalidPopulation(p))
    }
}

/// The free Hamiltonian: diagonal, with basis-state energy equal to the
/// sum of the spacings of the excited qubits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hamiltonian0 {
    spacings: Vec<f64>,
}

impl Hamiltonian0 {
    pub fn new(spacings: Vec<f64>) -> Result<Self> {
        if spacings.is_empty() {
            return Err(Error::EmptySystem);
        }
        if let Some(&bad) = spacings.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return Err(Error::InvalidLevelSpacing(bad));
        }
        Ok(Self { spacings })
    }

    /// All spacings equal to one.
    pub fn uniform(n: usize) -> Self {
        Self {
            spacings: vec![1.0; n],
        }
    }

    pub fn from_specs(specs: &[QubitSpec]) -> Result<Self> {
        Self::new(specs.iter().map(QubitSpec::e1).collect())
    }

    #[inline]
    pub fn n_qubits(&self) -> usize {
        self.spacings.len()
    }

    pub fn spacings(&self) -> &[f64] {
        &self.spacings
    }

    /// Energy of a computational-basis state.
    pub fn energy_of(&self, index: usize) -> f64 {
        let n = self.n_qubits();
        self.spacings
            .iter()
            .enumerate()
            .filter(|(q, _)| index & bit_mask(n, *q) != 0)
            .map(|(_, e)| e)
            .sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..1usize << self.n_qubits())
            .map(|i| self.energy_of(i))
            .collect()
    }

    /// Restriction to a subset of qubits, in the given order.
    pub fn restrict(&self, qubits: &[usize]) -> Result<Self> {
        let n = self.n_qubits();
        let spacings = qubits
            .iter()
            .map(|&q| {
                self.spacings
                    .get(q)
                    .copied()
                    .ok_or(Error::InvalidQubit { index: q, n })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(spacings)
    }

    pub fn to_matrix(&self) -> CMatrix {
        CMatrix::from_diagonal(&self.diagonal())
    }
}

/// Hermitian, unit-trace, positive semidefinite operator on `n` qubits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix {
    n_qubits: usize,
    matrix: CMatrix,
}

impl DensityMatrix {
    /// Validating constructor.
    pub fn new(n_qubits: usize, matrix: CMatrix) -> Result<Self> {
        let rho = Self::from_parts(n_qubits, matrix)?;
        rho.validate()?;
        Ok(rho)
    }

    /// Checks only the dimension. Callers that produce states by unitary
    /// conjugation, tensor products or partial traces of valid states use
    /// this to skip the eigenvalue check.
    pub(crate) fn from_parts(n_qubits: usize, matrix: CMatrix) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::EmptySystem);
        }
        if matrix.dim() != 1 << n_qubits {
            return Err(Error::DimensionMismatch {
                expected: 1 << n_qubits,
                found: matrix.dim(),
            });
        }
        Ok(Self { n_qubits, matrix })
    }

    /// Diagonal state with the given basis-state probabilities.
    pub fn from_diagonal(n_qubits: usize, probabilities: &[f64]) -> Result<Self> {
        Self::new(n_qubits, CMatrix::from_diagonal(probabilities))
    }

    /// Projector onto a normalised pure state.
    pub fn pure(n_qubits: usize, amplitudes: &[Complex64]) -> Result<Self> {
        let norm = math::sqrt(amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>());
        if norm == 0.0 {
            return Err(Error::BadTrace(0.0));
        }
        let dim = amplitudes.len();
        let mut m = CMatrix::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = amplitudes[i] * amplitudes[j].conj() / (norm * norm);
            }
        }
        Self::new(n_qubits, m)
    }

    /// All qubits in the ground state.
    pub fn ground(n_qubits: usize) -> Result<Self> {
        let mut diag = vec![0.0; 1 << n_qubits];
        diag[0] = 1.0;
        Self::from_diagonal(n_qubits, &diag)
    }

    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        let dim = 1usize << n_qubits;
        Self::from_diagonal(n_qubits, &vec![1.0 / dim as f64; dim])
    }

    /// Checks Hermiticity, unit trace and positivity.
    pub fn validate(&self) -> Result<()> {
        let defect = self.matrix.hermiticity_defect();
        if defect >= STATE_TOL {
            return Err(Error::NotHermitian(defect));
        }
        let trace = self.matrix.trace();
        if (trace.re - 1.0).abs() >= STATE_TOL || trace.im.abs() >= STATE_TOL {
            return Err(Error::BadTrace(trace.re));
        }
        let min = hermitian_eigenvalues(&self.matrix)
            .last()
            .copied()
            .unwrap_or(0.0);
        if min < PSD_TOL {
            return Err(Error::NotPositive(min));
        }
        Ok(())
    }

    #[inline]
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    #[inline]
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub(crate) fn matrix_mut(&mut self) -> &mut CMatrix {
        &mut self.matrix
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.matrix[(i, j)]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.matrix.diagonal()
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    /// Excited-state population of every qubit, read from the diagonal.
    pub fn qubit_populations(&self) -> Vec<f64> {
        let n = self.n_qubits;
        let mut pops = vec![0.0; n];
        for (i, d) in self.diagonal().into_iter().enumerate() {
            for (q, pop) in pops.iter_mut().enumerate() {
                if i & bit_mask(n, q) != 0 {
                    *pop += d;
                }
            }
        }
        pops
    }

    /// Modulus of the off-diagonal entry of each single-qubit reduced
    /// state, without forming the reduced matrices.
    pub fn qubit_coherences(&self) -> Vec<f64> {
        let n = self.n_qubits;
        (0..n)
            .map(|q| {
                let mask = bit_mask(n, q);
                let mut acc = ZERO;
                for i in (0..self.dim()).filter(|i| i & mask == 0) {
                    acc += self.matrix[(i, i | mask)];
                }
                acc.norm()
            })
            .collect()
    }
}

/// Bit of qubit `q` in an `n`-qubit basis index.
#[inline]
pub(crate) fn bit_mask(n: usize, q: usize) -> usize {
    1 << (n - 1 - q)
}

/// Global basis index contributed by each local index of `qubits`, where
/// the first listed qubit is the most significant local bit.
pub(crate) fn subset_offsets(n: usize, qubits: &[usize]) -> Vec<usize> {
    let m = qubits.len();
    (0..1usize << m)
        .map(|local| {
            qubits
                .iter()
                .enumerate()
                .filter(|(k, _)| local & (1 << (m - 1 - k)) != 0)
                .fold(0, |g, (_, &q)| g | bit_mask(n, q))
        })
        .collect()
}

pub(crate) fn check_qubit_set(n: usize, qubits: &[usize]) -> Result<()> {
    if qubits.is_empty() {
        return Err(Error::InvalidSelection("empty qubit set"));
    }
    for (k, &q) in qubits.iter().enumerate() {
        if q >= n {
            return Err(Error::InvalidQubit { index: q, n });
        }
        if qubits[..k].contains(&q) {
            return Err(Error::InvalidSelection("repeated qubit index"));
        }
    }
    Ok(())
}

/// `diag(1 − p, p)`.
pub fn thermal_qubit(spec: QubitSpec) -> DensityMatrix {
    DensityMatrix {
        n_qubits: 1,
        matrix: CMatrix::from_diagonal(&[1.0 - spec.p(), spec.p()]),
    }
}

/// Tensor product of thermal qubits, capped at [`DEFAULT_MAX_QUBITS`].
pub fn product_state(specs: &[QubitSpec]) -> Result<DensityMatrix> {
    product_state_capped(specs, DEFAULT_MAX_QUBITS)
}

pub fn product_state_capped(specs: &[QubitSpec], cap: usize) -> Result<DensityMatrix> {
    let n = specs.len();
    if n == 0 {
        return Err(Error::EmptySystem);
    }
    if n > cap {
        return Err(Error::TooManyQubits { n, cap });
    }
    let diag: Vec<f64> = (0..1usize << n)
        .map(|i| {
            specs
                .iter()
                .enumerate()
                .map(|(q, s)| {
                    if i & bit_mask(n, q) != 0 {
                        s.p()
                    } else {
                        1.0 - s.p()
                    }
                })
                .product()
        })
        .collect();
    DensityMatrix::from_parts(n, CMatrix::from_diagonal(&diag))
}

/// Kronecker product `a ⊗ b`; qubits of `a` come first.
pub fn tensor(a: &DensityMatrix, b: &DensityMatrix) -> DensityMatrix {
    DensityMatrix {
        n_qubits: a.n_qubits + b.n_qubits,
        matrix: a.matrix.kron(&b.matrix),
    }
}

/// Reduced state on `keep`. The kept qubits appear in ascending order
/// whatever order they are listed in.
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let n = rho.n_qubits;
    check_qubit_set(n, keep)?;
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    let traced: Vec<usize> = (0..n).filter(|q| !kept.contains(q)).collect();
    let kept_off = subset_offsets(n, &kept);
    let traced_off = subset_offsets(n, &traced);
    let m = kept_off.len();
    let mut out = CMatrix::zeros(m);
    for &t in &traced_off {
        for (a, &ka) in kept_off.iter().enumerate() {
            for (b, &kb) in kept_off.iter().enumerate() {
                out[(a, b)] += rho.matrix[(ka | t, kb | t)];
            }
        }
    }
    DensityMatrix::from_parts(kept.len(), out)
}

/// Excited-state occupancy of a one-qubit state.
pub fn population_fraction(rho: &DensityMatrix) -> Result<f64> {
    if rho.n_qubits != 1 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: rho.dim(),
        });
    }
    Ok(rho.matrix[(1, 1)].re)
}

/// How `temperature_from_population` treats `p = 0.5`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BoundaryPolicy {
    /// Reject `p` outside (0, 0.5).
    #[default]
    Reject,
    /// Map `p = 0.5` to `T = +∞`; everything else outside (0, 0.5) is
    /// still rejected.
    InfiniteAtHalf,
}

/// `T = e1 / ln((1 − p)/p)` with `k_B = 1`.
pub fn temperature_from_population(p: f64, e1: f64) -> Result<f64> {
    temperature_from_population_with(p, e1, BoundaryPolicy::Reject)
}

pub fn temperature_from_population_with(p: f64, e1: f64, policy: BoundaryPolicy) -> Result<f64> {
    if !(e1 > 0.0 && e1.is_finite()) {
        return Err(Error::InvalidLevelSpacing(e1));
    }
    if p == 0.5 && policy == BoundaryPolicy::InfiniteAtHalf {
        return Ok(f64::INFINITY);
    }
    check_population(p)?;
    Ok(e1 / math::ln((1.0 - p) / p))
}

/// `p = 1 / (1 + e^{e1/T})`; `T = +∞` gives 0.5.
pub fn population_from_temperature(t: f64, e1: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidTemperature(t));
    }
    if !(e1 > 0.0 && e1.is_finite()) {
        return Err(Error::InvalidLevelSpacing(e1));
    }
    if t.is_infinite() {
        return Ok(0.5);
    }
    Ok(1.0 / (1.0 + math::exp(e1 / t)))
}

/// `Tr(ρ H0)`.
pub fn expected_energy(rho: &DensityMatrix, h0: &Hamiltonian0) -> Result<f64> {
    if h0.n_qubits() != rho.n_qubits {
        return Err(Error::DimensionMismatch {
            expected: rho.n_qubits,
            found: h0.n_qubits(),
        });
    }
    Ok(rho
        .diagonal()
        .iter()
        .enumerate()
        .map(|(i, d)| d * h0.energy_of(i))
        .sum())
}
