//! Excitation-number sectors and the block-diagonal unitaries that act
//! within them.
//!
//! With equal level spacings every unitary commuting with `H0` is block
//! diagonal over the sectors of fixed excitation count. A unitary is stored
//! as one block per sector, with untouched sectors left implicit, and is
//! applied by acting only on the rows and columns of the affected basis
//! states.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, ONE, ZERO};
use crate::math;
use crate::qstate::{
    bit_mask, check_qubit_set, subset_offsets, DensityMatrix, Hamiltonian0, DEFAULT_MAX_QUBITS,
};

/// Tolerance for unitarity and commutation checks.
pub const UNITARY_TOL: f64 = 1e-12;

/// Basis states with a fixed number of excitations, in ascending
/// computational order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sector {
    pub excitations: usize,
    pub indices: Vec<usize>,
}

impl Sector {
    #[inline]
    pub fn dim(&self) -> usize {
        self.indices.len()
    }
}

/// Excitation-major ordering of the computational basis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnergySectorDecomposition {
    n_qubits: usize,
    sectors: Vec<Sector>,
    /// basis index → (sector, offset within sector)
    position: Vec<(usize, usize)>,
}

impl EnergySectorDecomposition {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptySystem);
        }
        if n > DEFAULT_MAX_QUBITS {
            return Err(Error::TooManyQubits {
                n,
                cap: DEFAULT_MAX_QUBITS,
            });
        }
        let mut sectors: Vec<Sector> = (0..=n)
            .map(|m| Sector {
                excitations: m,
                indices: Vec::new(),
            })
            .collect();
        let mut position = vec![(0, 0); 1 << n];
        for i in 0..1usize << n {
            let m = i.count_ones() as usize;
            position[i] = (m, sectors[m].indices.len());
            sectors[m].indices.push(i);
        }
        Ok(Self {
            n_qubits: n,
            sectors,
            position,
        })
    }

    #[inline]
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn sectors(&self) -> &[Sector] {
        &self.sectors
    }

    pub fn sector_dims(&self) -> Vec<usize> {
        self.sectors.iter().map(Sector::dim).collect()
    }

    /// `(sector, offset)` of a computational-basis index.
    #[inline]
    pub fn locate(&self, index: usize) -> (usize, usize) {
        self.position[index]
    }

    /// Computational index at each position of the energy-ordered basis.
    pub fn energy_ordered_basis(&self) -> Vec<usize> {
        self.sectors
            .iter()
            .flat_map(|s| s.indices.iter().copied())
            .collect()
    }
}

/// A rotation in the plane of two basis states of one sector:
/// `⟨first|G|second⟩ = e^{iφ} sin θ`, `⟨second|G|first⟩ = −e^{−iφ} sin θ`,
/// `cos θ` on both diagonal entries. Offsets are positions within the
/// sector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GivensRotation {
    pub sector: usize,
    pub first: usize,
    pub second: usize,
    pub theta: f64,
    pub phi: f64,
}

/// Which pairs of sector states get a random Givens rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum RandomFamily {
    /// Every unordered pair of states, in lexicographic order:
    /// `C(d, 2)` rotations for a sector of dimension `d`.
    #[default]
    AllPairs,
    /// The closed chain `(0,1), (1,2), …, (d−1, 0)`: `d` rotations per
    /// sector of dimension `d ≥ 3` and one for `d = 2`. Gives 6 angles on
    /// three qubits and 14 on four.
    Cyclic,
}

impl RandomFamily {
    fn pairs(self, d: usize) -> Vec<(usize, usize)> {
        match self {
            RandomFamily::AllPairs => (0..d)
                .flat_map(|a| (a + 1..d).map(move |b| (a, b)))
                .collect(),
            RandomFamily::Cyclic => {
                let mut pairs: Vec<(usize, usize)> = (0..d.saturating_sub(1)).map(|a| (a, a + 1)).collect();
                if d >= 3 {
                    pairs.push((d - 1, 0));
                }
                pairs
            }
        }
    }
}

/// Options for [`random_sector_unitary`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RandomUnitaryOptions {
    pub family: RandomFamily,
    /// Draw a phase φ for every rotation as well as the angle θ.
    pub sample_phases: bool,
}

/// Enough information to rebuild a unitary exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Provenance {
    Identity {
        n: usize,
    },
    PartialSwap {
        n: usize,
        pair: (usize, usize),
        theta: f64,
        phi: f64,
    },
    ConditionalSwap {
        n: usize,
        pair: (usize, usize),
        condition: Vec<(usize, bool)>,
        theta: f64,
    },
    SimultaneousPairSwap {
        n: usize,
        pairs: ((usize, usize), (usize, usize)),
        theta: f64,
    },
    RandomSector {
        n: usize,
        options: RandomUnitaryOptions,
        rotations: Vec<GivensRotation>,
    },
    /// Matrix product `factors[0] · factors[1] · …`.
    Product {
        factors: Vec<Provenance>,
    },
    Adjoint {
        inner: Box<Provenance>,
    },
}

impl Provenance {
    /// Reconstructs the unitary this record describes.
    pub fn build(&self) -> Result<EnergyConservingUnitary> {
        match self {
            Provenance::Identity { n } => EnergyConservingUnitary::identity(*n),
            Provenance::PartialSwap {
                n,
                pair,
                theta,
                phi,
            } => two_qubit_partial_swap(*n, *pair, *theta, *phi),
            Provenance::ConditionalSwap {
                n,
                pair,
                condition,
                theta,
            } => conditional_swap(*n, *pair, condition, *theta),
            Provenance::SimultaneousPairSwap { n, pairs, theta } => {
                simultaneous_pair_swap(*n, *pairs, *theta)
            }
            Provenance::RandomSector {
                n,
                options,
                rotations,
            } => from_rotations(*n, *options, rotations.clone()),
            Provenance::Product { factors } => {
                let mut iter = factors.iter();
                let first = iter
                    .next()
                    .ok_or(Error::InvalidConfig("empty product".into()))?
                    .build()?;
                iter.try_fold(first, |acc, f| compose(&acc, &f.build()?))
            }
            Provenance::Adjoint { inner } => Ok(inner.build()?.adjoint()),
        }
    }
}

/// Nontrivial part of a sector block: the positions whose rows and
/// columns differ from the identity, and the block restricted to them.
#[derive(Debug, Clone, PartialEq)]
struct ActiveBlock {
    /// local computational indices
    support: Vec<usize>,
    /// `support.len()²` entries, row-major
    matrix: Vec<Complex64>,
}

/// Unitary commuting with `H0`, stored as one block per sector.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyConservingUnitary {
    n_qubits: usize,
    blocks: Vec<Option<CMatrix>>,
    provenance: Provenance,
    active: Vec<ActiveBlock>,
}

impl EnergyConservingUnitary {
    pub fn identity(n: usize) -> Result<Self> {
        Self::from_blocks(n, vec![None; n + 1], Provenance::Identity { n })
    }

    fn from_blocks(n: usize, blocks: Vec<Option<CMatrix>>, provenance: Provenance) -> Result<Self> {
        let dec = EnergySectorDecomposition::new(n)?;
        let mut active = Vec::new();
        for (s, block) in blocks.iter().enumerate() {
            let Some(b) = block else { continue };
            let d = b.dim();
            let moved: Vec<usize> = (0..d)
                .filter(|&a| (0..d).any(|r| b[(r, a)] != if r == a { ONE } else { ZERO }))
                .collect();
            if moved.is_empty() {
                continue;
            }
            let mut matrix = Vec::with_capacity(moved.len() * moved.len());
            for &r in &moved {
                for &c in &moved {
                    matrix.push(b[(r, c)]);
                }
            }
            active.push(ActiveBlock {
                support: moved.iter().map(|&a| dec.sectors[s].indices[a]).collect(),
                matrix,
            });
        }
        Ok(Self {
            n_qubits: n,
            blocks,
            provenance,
            active,
        })
    }

    #[inline]
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Block for a sector; `None` means identity.
    pub fn block(&self, sector: usize) -> Option<&CMatrix> {
        self.blocks.get(sector).and_then(Option::as_ref)
    }

    /// Largest `|B B† − I|` over the stored blocks.
    pub fn unitarity_defect(&self) -> f64 {
        self.blocks
            .iter()
            .flatten()
            .map(CMatrix::unitarity_defect)
            .fold(0.0, f64::max)
    }

    pub fn adjoint(&self) -> Self {
        let blocks = self
            .blocks
            .iter()
            .map(|b| b.as_ref().map(CMatrix::adjoint))
            .collect();
        Self::from_blocks(
            self.n_qubits,
            blocks,
            Provenance::Adjoint {
                inner: Box::new(self.provenance.clone()),
            },
        )
        .expect("adjoint keeps the qubit count")
    }

    /// The full `2^n × 2^n` matrix in the computational basis.
    pub fn to_dense(&self) -> CMatrix {
        let dec = EnergySectorDecomposition::new(self.n_qubits).expect("validated at construction");
        let mut u = CMatrix::identity(1 << self.n_qubits);
        for (s, block) in self.blocks.iter().enumerate() {
            let Some(b) = block else { continue };
            let idx = &dec.sectors[s].indices;
            for (a, &i) in idx.iter().enumerate() {
                for (c, &j) in idx.iter().enumerate() {
                    u[(i, j)] = b[(a, c)];
                }
            }
        }
        u
    }
}

fn check_pair(n: usize, (i, j): (usize, usize)) -> Result<()> {
    for q in [i, j] {
        if q >= n {
            return Err(Error::InvalidQubit { index: q, n });
        }
    }
    if i == j {
        return Err(Error::InvalidSelection("pair needs two distinct qubits"));
    }
    Ok(())
}

/// Builds a unitary from rotations between pairs of computational basis
/// states. Each pair must lie in one sector.
fn plane_rotations(
    n: usize,
    planes: &[(usize, usize)],
    theta: f64,
    phi: f64,
    provenance: Provenance,
) -> Result<EnergyConservingUnitary> {
    let dec = EnergySectorDecomposition::new(n)?;
    let mut blocks: Vec<Option<CMatrix>> = vec![None; n + 1];
    for &(first, second) in planes {
        let (s, a) = dec.locate(first);
        let (s2, b) = dec.locate(second);
        debug_assert_eq!(s, s2, "rotation plane crosses sectors");
        let g = GivensRotation {
            sector: s,
            first: a,
            second: b,
            theta,
            phi,
        };
        let block = blocks[s].get_or_insert_with(|| CMatrix::identity(dec.sectors[s].dim()));
        left_multiply_givens(block, &g);
    }
    EnergyConservingUnitary::from_blocks(n, blocks, provenance)
}

/// `block ← G · block`.
fn left_multiply_givens(block: &mut CMatrix, g: &GivensRotation) {
    let (s, c) = math::sin_cos(g.theta);
    let (sp, cp) = math::sin_cos(g.phi);
    let e = Complex64::new(cp, sp);
    let d = block.dim();
    for col in 0..d {
        let x = block[(g.first, col)];
        let y = block[(g.second, col)];
        block[(g.first, col)] = x * c + e * s * y;
        block[(g.second, col)] = -e.conj() * s * x + y * c;
    }
}

/// Every basis index of `n` qubits whose bits on `qubits` equal `pattern`
/// (first listed qubit is the most significant pattern bit).
fn with_pattern(n: usize, qubits: &[usize], pattern: usize) -> Vec<usize> {
    let fixed = subset_offsets(n, qubits);
    let rest: Vec<usize> = (0..n).filter(|q| !qubits.contains(q)).collect();
    subset_offsets(n, &rest)
        .into_iter()
        .map(|r| r | fixed[pattern])
        .collect()
}

/// The two-qubit partial swap on `pair`, identity on every other qubit.
///
/// Writing `|01⟩` for `pair.0` ground and `pair.1` excited, the rotation
/// has `⟨01|U|10⟩ = e^{iφ} sin θ` and `⟨10|U|01⟩ = −e^{−iφ} sin θ`. For
/// `n = 2` and `pair = (0, 1)` this is the general two-qubit
/// energy-preserving unitary.
pub fn two_qubit_partial_swap(
    n: usize,
    pair: (usize, usize),
    theta: f64,
    phi: f64,
) -> Result<EnergyConservingUnitary> {
    check_pair(n, pair)?;
    let (mi, mj) = (bit_mask(n, pair.0), bit_mask(n, pair.1));
    let planes: Vec<(usize, usize)> = (0..1usize << n)
        .filter(|i| i & mi == 0 && i & mj != 0)
        .map(|i| (i, (i & !mj) | mi))
        .collect();
    plane_rotations(
        n,
        &planes,
        theta,
        phi,
        Provenance::PartialSwap {
            n,
            pair,
            theta,
            phi,
        },
    )
}

/// Partial swap on `pair` that acts only when every other qubit matches
/// `condition`. The condition must name each spectator exactly once.
pub fn conditional_swap(
    n: usize,
    pair: (usize, usize),
    condition: &[(usize, bool)],
    theta: f64,
) -> Result<EnergyConservingUnitary> {
    check_pair(n, pair)?;
    let mut spectators = Vec::with_capacity(condition.len());
    for &(q, _) in condition {
        if q == pair.0 || q == pair.1 {
            return Err(Error::InvalidSelection("condition overlaps the swapped pair"));
        }
        spectators.push(q);
    }
    if !spectators.is_empty() {
        check_qubit_set(n, &spectators)?;
    }
    if spectators.len() != n - 2 {
        return Err(Error::InvalidSelection("condition must fix every spectator qubit"));
    }
    let (mi, mj) = (bit_mask(n, pair.0), bit_mask(n, pair.1));
    let base = condition
        .iter()
        .filter(|(_, set)| *set)
        .fold(0, |acc, &(q, _)| acc | bit_mask(n, q));
    plane_rotations(
        n,
        &[(base | mj, base | mi)],
        theta,
        0.0,
        Provenance::ConditionalSwap {
            n,
            pair,
            condition: condition.to_vec(),
            theta,
        },
    )
}

/// Simultaneous partial swap of two qubit pairs: a rotation between the
/// state with `pairs.0` excited and the state with `pairs.1` excited (the
/// other two of the four qubits in the ground state), acting for every
/// configuration of any further qubits.
///
/// With `pairs = ((0, 3), (1, 2))` on four qubits this rotates `|1001⟩`
/// and `|0110⟩` with `⟨0110|U|1001⟩ = sin θ`: excitations hop
/// `0 → 1` and `3 → 2`.
pub fn simultaneous_pair_swap(
    n: usize,
    pairs: ((usize, usize), (usize, usize)),
    theta: f64,
) -> Result<EnergyConservingUnitary> {
    let ((a, b), (c, d)) = pairs;
    if n < 4 {
        return Err(Error::InvalidSelection("simultaneous pair swap needs four qubits"));
    }
    check_qubit_set(n, &[a, b, c, d])?;
    let roles = [a, b, c, d];
    let from = with_pattern(n, &roles, 0b1100);
    let to = with_pattern(n, &roles, 0b0011);
    let planes: Vec<(usize, usize)> = to.into_iter().zip(from).collect();
    plane_rotations(
        n,
        &planes,
        theta,
        0.0,
        Provenance::SimultaneousPairSwap { n, pairs, theta },
    )
}

/// Number of random rotation angles drawn for `n` qubits.
pub fn random_parameter_count(n: usize, family: RandomFamily) -> usize {
    (0..=n)
        .map(|m| family.pairs(math::binomial(n, m)).len())
        .sum()
}

/// A random sector unitary: within each sector of dimension ≥ 2 the
/// family's Givens rotations are composed in order (later rotations act
/// last), with θ uniform on `[0, 2π)` and φ uniform on `[0, 2π)` when
/// phases are sampled (zero otherwise). All angles are drawn before any
/// phase.
pub fn random_sector_unitary<R: Rng + ?Sized>(
    n: usize,
    options: RandomUnitaryOptions,
    rng: &mut R,
) -> Result<EnergyConservingUnitary> {
    let dec = EnergySectorDecomposition::new(n)?;
    let mut rotations = Vec::new();
    for sector in dec.sectors() {
        for (first, second) in options.family.pairs(sector.dim()) {
            rotations.push(GivensRotation {
                sector: sector.excitations,
                first,
                second,
                theta: rng.random_range(0.0..math::TAU),
                phi: 0.0,
            });
        }
    }
    // phases come after every angle so the angles do not depend on the flag
    if options.sample_phases {
        for g in &mut rotations {
            g.phi = rng.random_range(0.0..math::TAU);
        }
    }
    from_rotations(n, options, rotations)
}

fn from_rotations(
    n: usize,
    options: RandomUnitaryOptions,
    rotations: Vec<GivensRotation>,
) -> Result<EnergyConservingUnitary> {
    let dec = EnergySectorDecomposition::new(n)?;
    let mut blocks: Vec<Option<CMatrix>> = vec![None; n + 1];
    for g in &rotations {
        let dim = dec
            .sectors()
            .get(g.sector)
            .map(Sector::dim)
            .ok_or(Error::InvalidConfig("rotation sector out of range".into()))?;
        if g.first >= dim || g.second >= dim || g.first == g.second {
            return Err(Error::InvalidConfig("rotation plane out of range".into()));
        }
        let block = blocks[g.sector].get_or_insert_with(|| CMatrix::identity(dim));
        left_multiply_givens(block, g);
    }
    EnergyConservingUnitary::from_blocks(
        n,
        blocks,
        Provenance::RandomSector {
            n,
            options,
            rotations,
        },
    )
}

/// Matrix product `u1 · u2` (apply `u2` first), computed block by block.
pub fn compose(
    u1: &EnergyConservingUnitary,
    u2: &EnergyConservingUnitary,
) -> Result<EnergyConservingUnitary> {
    if u1.n_qubits != u2.n_qubits {
        return Err(Error::DimensionMismatch {
            expected: u1.n_qubits,
            found: u2.n_qubits,
        });
    }
    let blocks = u1
        .blocks
        .iter()
        .zip(&u2.blocks)
        .map(|(a, b)| match (a, b) {
            (None, None) => None,
            (Some(a), None) => Some(a.clone()),
            (None, Some(b)) => Some(b.clone()),
            (Some(a), Some(b)) => Some(a.matmul(b)),
        })
        .collect();
    let factors = [&u1.provenance, &u2.provenance]
        .into_iter()
        .flat_map(|p| match p {
            Provenance::Product { factors } => factors.clone(),
            other => vec![other.clone()],
        })
        .collect();
    EnergyConservingUnitary::from_blocks(u1.n_qubits, blocks, Provenance::Product { factors })
}

/// `U ρ U†` on a state of the same size.
pub fn apply(u: &EnergyConservingUnitary, rho: &DensityMatrix) -> Result<DensityMatrix> {
    if u.n_qubits != rho.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: rho.n_qubits(),
            found: u.n_qubits,
        });
    }
    let roles: Vec<usize> = (0..u.n_qubits).collect();
    apply_on(u, rho, &roles)
}

/// Applies `u` to the qubits `roles` of a larger state: `roles[k]` is the
/// qubit of `rho` playing the unitary's qubit `k`. Only rows and columns of
/// the basis states moved by `u` are touched.
pub fn apply_on(
    u: &EnergyConservingUnitary,
    rho: &DensityMatrix,
    roles: &[usize],
) -> Result<DensityMatrix> {
    let mut out = rho.clone();
    apply_on_in_place(u, &mut out, roles)?;
    Ok(out)
}

pub fn apply_on_in_place(
    u: &EnergyConservingUnitary,
    rho: &mut DensityMatrix,
    roles: &[usize],
) -> Result<()> {
    let n = rho.n_qubits();
    if roles.len() != u.n_qubits {
        return Err(Error::DimensionMismatch {
            expected: u.n_qubits,
            found: roles.len(),
        });
    }
    check_qubit_set(n, roles)?;
    let local = subset_offsets(n, roles);
    let rest: Vec<usize> = (0..n).filter(|q| !roles.contains(q)).collect();
    let complement = subset_offsets(n, &rest);
    let dim = rho.dim();
    let m = rho.matrix_mut().as_mut_slice();

    let mut global = Vec::new();
    let mut rows: Vec<Complex64> = Vec::new();
    for blk in &u.active {
        let s = blk.support.len();
        rows.resize(s * dim, ZERO);
        for &c in &complement {
            global.clear();
            global.extend(blk.support.iter().map(|&a| local[a] | c));
            // rows ← B · rows
            for (a, out_row) in rows.chunks_mut(dim).enumerate() {
                out_row.fill(ZERO);
                for (b, &g) in global.iter().enumerate() {
                    let w = blk.matrix[a * s + b];
                    if w == ZERO {
                        continue;
                    }
                    let src = &m[g * dim..(g + 1) * dim];
                    for (o, &x) in out_row.iter_mut().zip(src) {
                        *o += w * x;
                    }
                }
            }
            for (a, &g) in global.iter().enumerate() {
                m[g * dim..(g + 1) * dim].copy_from_slice(&rows[a * dim..(a + 1) * dim]);
            }
        }
    }
    let mut x = Vec::new();
    for blk in &u.active {
        let s = blk.support.len();
        for &c in &complement {
            global.clear();
            global.extend(blk.support.iter().map(|&a| local[a] | c));
            // columns ← columns · B†
            for r in 0..dim {
                let row = &mut m[r * dim..(r + 1) * dim];
                x.clear();
                x.extend(global.iter().map(|&g| row[g]));
                for (a, &g) in global.iter().enumerate() {
                    let mut acc = ZERO;
                    for (b, &xb) in x.iter().enumerate() {
                        acc += xb * blk.matrix[a * s + b].conj();
                    }
                    row[g] = acc;
                }
            }
        }
    }
    Ok(())
}

/// `true` iff `u` is unitary and commutes with `H0`, both to
/// [`UNITARY_TOL`].
pub fn verify_energy_conserving(u: &CMatrix, h0: &Hamiltonian0) -> bool {
    if u.dim() != 1 << h0.n_qubits() {
        return false;
    }
    let h = h0.to_matrix();
    let commutator = u.matmul(&h).max_abs_diff(&h.matmul(u));
    commutator < UNITARY_TOL && u.unitarity_defect() < UNITARY_TOL
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{partial_trace, product_state, QubitSpec};
    use crate::thermo::trace_distance;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit(p: f64) -> QubitSpec {
        QubitSpec::unit(p).unwrap()
    }

    /// `U ρ U†` with the assembled dense matrix, embedded on `roles`.
    fn dense_apply(u: &EnergyConservingUnitary, rho: &DensityMatrix, roles: &[usize]) -> CMatrix {
        let n = rho.n_qubits();
        let k = u.n_qubits();
        let small = u.to_dense();
        let local = subset_offsets(n, roles);
        let rest: Vec<usize> = (0..n).filter(|q| !roles.contains(q)).collect();
        let comp = subset_offsets(n, &rest);
        let mut big = CMatrix::zeros(1 << n);
        for &c in &comp {
            for a in 0..1usize << k {
                for b in 0..1usize << k {
                    big[(local[a] | c, local[b] | c)] = small[(a, b)];
                }
            }
        }
        rho.matrix().conjugate_by(&big)
    }

    /// Matrix exponential by Taylor series; adequate for `‖A‖ ≤ 1`.
    fn expm(a: &CMatrix) -> CMatrix {
        let mut term = CMatrix::identity(a.dim());
        let mut sum = term.clone();
        for k in 1..40 {
            term = term.matmul(a).scale(1.0 / k as f64);
            sum = CMatrix::from_rows(
                a.dim(),
                sum.as_slice().iter().zip(term.as_slice()).map(|(x, y)| x + y).collect(),
            )
            .unwrap();
        }
        sum
    }

    #[test]
    fn sector_dimensions() {
        for (n, dims) in [
            (2, vec![1, 2, 1]),
            (3, vec![1, 3, 3, 1]),
            (4, vec![1, 4, 6, 4, 1]),
        ] {
            let dec = EnergySectorDecomposition::new(n).unwrap();
            assert_eq!(dec.sector_dims(), dims);
            assert_eq!(dec.sector_dims().iter().sum::<usize>(), 1 << n);
        }
        assert!(EnergySectorDecomposition::new(0).is_err());
        assert!(EnergySectorDecomposition::new(9).is_err());
    }

    #[test]
    fn energy_ordering_matches_three_qubit_listing() {
        let dec = EnergySectorDecomposition::new(3).unwrap();
        // |000⟩,|001⟩,|010⟩,|100⟩,|011⟩,|101⟩,|110⟩,|111⟩
        assert_eq!(dec.energy_ordered_basis(), vec![0, 1, 2, 4, 3, 5, 6, 7]);
        for s in dec.sectors() {
            assert!(s.indices.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn two_qubit_family_is_the_general_form() {
        let (theta, phi) = (0.7, 0.3);
        let u = two_qubit_partial_swap(2, (0, 1), theta, phi).unwrap().to_dense();
        let e = Complex64::new(phi.cos(), phi.sin());
        assert_eq!(u[(0, 0)], ONE);
        assert_eq!(u[(3, 3)], ONE);
        assert!((u[(1, 1)] - theta.cos()).norm() < 1e-15);
        assert!((u[(2, 2)] - theta.cos()).norm() < 1e-15);
        assert!((u[(1, 2)] - e * theta.sin()).norm() < 1e-15);
        assert!((u[(2, 1)] + e.conj() * theta.sin()).norm() < 1e-15);
        assert!(verify_energy_conserving(&u, &Hamiltonian0::uniform(2)));
    }

    #[test]
    fn partial_swap_limits() {
        let id = two_qubit_partial_swap(2, (0, 1), 0.0, 0.0).unwrap();
        assert!(id.to_dense().max_abs_diff(&CMatrix::identity(4)) < 1e-15);
        let rho = product_state(&[unit(0.4), unit(0.2)]).unwrap();
        let full = two_qubit_partial_swap(2, (0, 1), core::f64::consts::FRAC_PI_2, 0.0).unwrap();
        let out = apply(&full, &rho).unwrap();
        assert!((out.entry(1, 1).re - rho.entry(2, 2).re).abs() < 1e-15);
        assert!((out.entry(2, 2).re - rho.entry(1, 1).re).abs() < 1e-15);
        assert!(two_qubit_partial_swap(2, (0, 0), 0.1, 0.0).is_err());
        assert!(two_qubit_partial_swap(2, (0, 2), 0.1, 0.0).is_err());
    }

    #[test]
    fn embedded_partial_swap_matches_generator_exponential() {
        let theta = 0.1;
        // G = |10⟩⟨01| + h.c. on qubits (0, 1) of four
        let mut g = CMatrix::zeros(16);
        for rest in 0..4usize {
            let (i01, i10) = (0b0100 | rest, 0b1000 | rest);
            g[(i10, i01)] = ONE;
            g[(i01, i10)] = ONE;
        }
        let minus_i_theta = Complex64::new(0.0, -theta);
        let a = CMatrix::from_rows(16, g.as_slice().iter().map(|z| z * minus_i_theta).collect()).unwrap();
        let expected = expm(&a);
        let u = two_qubit_partial_swap(4, (0, 1), theta, -core::f64::consts::FRAC_PI_2).unwrap();
        assert!(u.to_dense().max_abs_diff(&expected) < 1e-13);

        // φ = 0 is generated by the real antisymmetric |01⟩⟨10| − |10⟩⟨01|
        let mut k = CMatrix::zeros(16);
        for rest in 0..4usize {
            let (i01, i10) = (0b0100 | rest, 0b1000 | rest);
            k[(i01, i10)] = ONE * theta;
            k[(i10, i01)] = -ONE * theta;
        }
        let u0 = two_qubit_partial_swap(4, (0, 1), theta, 0.0).unwrap();
        assert!(u0.to_dense().max_abs_diff(&expm(&k)) < 1e-13);
    }

    #[test]
    fn conditional_swap_touches_one_plane() {
        let u = conditional_swap(4, (0, 1), &[(2, false), (3, false)], 0.3).unwrap();
        let dense = u.to_dense();
        let (a, b) = (0b0100, 0b1000);
        for i in 0..16 {
            for j in 0..16 {
                let touched = (i == a || i == b) && (j == a || j == b);
                if !touched {
                    let e = if i == j { ONE } else { ZERO };
                    assert_eq!(dense[(i, j)], e, "({i},{j})");
                }
            }
        }
        assert!((dense[(a, b)] - 0.3f64.sin()).norm() < 1e-15);
        assert!(verify_energy_conserving(&dense, &Hamiltonian0::uniform(4)));

        let id = conditional_swap(4, (0, 1), &[(2, false), (3, false)], 0.0).unwrap();
        assert!(id.to_dense().max_abs_diff(&CMatrix::identity(16)) < 1e-15);

        let mut basis = vec![0.0; 16];
        basis[b] = 1.0;
        let rho = DensityMatrix::from_diagonal(4, &basis).unwrap();
        let half_pi = conditional_swap(4, (0, 1), &[(2, false), (3, false)], core::f64::consts::FRAC_PI_2).unwrap();
        let out = apply(&half_pi, &rho).unwrap();
        assert!((out.entry(a, a).re - 1.0).abs() < 1e-15);

        assert!(conditional_swap(4, (0, 1), &[(1, false), (3, false)], 0.1).is_err());
        assert!(conditional_swap(4, (0, 1), &[(2, false)], 0.1).is_err());
    }

    #[test]
    fn simultaneous_swap_matches_two_pair_form() {
        let theta = 0.1;
        let u = simultaneous_pair_swap(4, ((0, 3), (1, 2)), theta).unwrap().to_dense();
        let (x, y) = (0b1001, 0b0110);
        for i in 0..16 {
            if i != x && i != y {
                assert_eq!(u[(i, i)], ONE);
            }
        }
        assert!((u[(x, x)] - theta.cos()).norm() < 1e-15);
        assert!((u[(y, y)] - theta.cos()).norm() < 1e-15);
        assert!((u[(x, y)] + theta.sin()).norm() < 1e-15);
        assert!((u[(y, x)] - theta.sin()).norm() < 1e-15);
        assert!(verify_energy_conserving(&u, &Hamiltonian0::uniform(4)));

        let id = simultaneous_pair_swap(4, ((0, 3), (1, 2)), 0.0).unwrap();
        assert!(id.to_dense().max_abs_diff(&CMatrix::identity(16)) < 1e-15);

        let mut basis = vec![0.0; 16];
        basis[x] = 1.0;
        let rho = DensityMatrix::from_diagonal(4, &basis).unwrap();
        let swap = simultaneous_pair_swap(4, ((0, 3), (1, 2)), core::f64::consts::FRAC_PI_2).unwrap();
        let out = apply(&swap, &rho).unwrap();
        assert!((out.entry(y, y).re - 1.0).abs() < 1e-15);
        assert!(out.entry(x, x).re.abs() < 1e-15);

        assert!(simultaneous_pair_swap(4, ((0, 3), (1, 3)), 0.1).is_err());
        assert!(simultaneous_pair_swap(3, ((0, 1), (2, 0)), 0.1).is_err());
    }

    #[test]
    fn hadamard_is_not_energy_conserving() {
        let s = 1.0 / 2f64.sqrt();
        let h = CMatrix::from_rows(2, vec![ONE * s, ONE * s, ONE * s, -ONE * s]).unwrap();
        let u = h.kron(&CMatrix::identity(2));
        assert!(u.unitarity_defect() < 1e-15);
        assert!(!verify_energy_conserving(&u, &Hamiltonian0::uniform(2)));
    }

    #[test]
    fn random_parameter_counts() {
        assert_eq!(random_parameter_count(2, RandomFamily::AllPairs), 1);
        assert_eq!(random_parameter_count(2, RandomFamily::Cyclic), 1);
        assert_eq!(random_parameter_count(3, RandomFamily::AllPairs), 6);
        assert_eq!(random_parameter_count(3, RandomFamily::Cyclic), 6);
        assert_eq!(random_parameter_count(4, RandomFamily::Cyclic), 14);
        assert_eq!(random_parameter_count(4, RandomFamily::AllPairs), 27);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (n, family, count) in [
            (2, RandomFamily::AllPairs, 1),
            (3, RandomFamily::AllPairs, 6),
            (4, RandomFamily::Cyclic, 14),
        ] {
            let opts = RandomUnitaryOptions { family, sample_phases: true };
            let u = random_sector_unitary(n, opts, &mut rng).unwrap();
            match u.provenance() {
                Provenance::RandomSector { rotations, .. } => assert_eq!(rotations.len(), count),
                other => panic!("unexpected provenance {other:?}"),
            }
        }
    }

    #[test]
    fn random_two_qubit_unitary_is_the_general_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let opts = RandomUnitaryOptions { family: RandomFamily::AllPairs, sample_phases: true };
        let u = random_sector_unitary(2, opts, &mut rng).unwrap();
        let Provenance::RandomSector { rotations, .. } = u.provenance() else { unreachable!() };
        let g = rotations[0];
        let expected = two_qubit_partial_swap(2, (0, 1), g.theta, g.phi).unwrap();
        assert!(u.to_dense().max_abs_diff(&expected.to_dense()) < 1e-15);
    }

    #[test]
    fn provenance_rebuilds_bit_identically() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u = random_sector_unitary(4, RandomUnitaryOptions::default(), &mut rng).unwrap();
        let v = compose(&u, &simultaneous_pair_swap(4, ((0, 3), (1, 2)), 0.4).unwrap()).unwrap();
        for w in [&u, &v, &v.adjoint()] {
            let rebuilt = w.provenance().build().unwrap();
            assert_eq!(rebuilt.to_dense(), w.to_dense());
        }
    }

    #[test]
    fn compose_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_sector_unitary(3, RandomUnitaryOptions::default(), &mut rng).unwrap();
        let id = EnergyConservingUnitary::identity(3).unwrap();
        assert!(compose(&u, &id).unwrap().to_dense().max_abs_diff(&u.to_dense()) < 1e-15);
        let back = compose(&u, &u.adjoint()).unwrap();
        assert!(back.to_dense().max_abs_diff(&CMatrix::identity(8)) < 1e-12);

        let a = conditional_swap(3, (0, 2), &[(1, true)], 0.2).unwrap();
        let b = conditional_swap(3, (0, 2), &[(1, true)], 0.5).unwrap();
        let ab = compose(&a, &b).unwrap();
        let direct = conditional_swap(3, (0, 2), &[(1, true)], 0.7).unwrap();
        assert!(ab.to_dense().max_abs_diff(&direct.to_dense()) < 1e-15);

        assert!(compose(&u, &EnergyConservingUnitary::identity(2).unwrap()).is_err());
    }

    #[test]
    fn apply_examples() {
        let rho = product_state(&[unit(0.4), unit(0.2)]).unwrap();
        let id = EnergyConservingUnitary::identity(2).unwrap();
        assert_eq!(apply(&id, &rho).unwrap(), rho);

        let u = two_qubit_partial_swap(2, (0, 1), core::f64::consts::FRAC_PI_4, 0.0).unwrap();
        let out = apply(&u, &rho).unwrap();
        let q = out.qubit_populations();
        assert!((q[0] - 0.3).abs() < 1e-15 && (q[1] - 0.3).abs() < 1e-15);

        let three = product_state(&[unit(0.1); 3]).unwrap();
        assert!(apply(&u, &three).is_err());
    }

    #[test]
    fn two_qubit_trace_distance_law() {
        let (p1, p2) = (0.4, 0.2);
        let rho = product_state(&[unit(p1), unit(p2)]).unwrap();
        for k in 0..50 {
            let theta = k as f64 * core::f64::consts::PI / 49.0;
            let u = two_qubit_partial_swap(2, (0, 1), theta, 0.0).unwrap();
            let out = apply(&u, &rho).unwrap();
            let d = trace_distance(&partial_trace(&out, &[0]).unwrap(), &partial_trace(&out, &[1]).unwrap()).unwrap();
            assert!((d - ((p1 - p2) * (2.0 * theta).cos()).abs()).abs() < 1e-10);
        }
    }

    fn arb_specs(n: usize) -> impl Strategy<Value = Vec<QubitSpec>> {
        prop::collection::vec((0.01f64..0.49).prop_map(|p| QubitSpec::unit(p).unwrap()), n)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn constructed_unitaries_conserve_energy(seed in any::<u64>(), n in 2usize..6, phases in any::<bool>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let opts = RandomUnitaryOptions { family: RandomFamily::AllPairs, sample_phases: phases };
            let u = random_sector_unitary(n, opts, &mut rng).unwrap();
            prop_assert!(u.unitarity_defect() < UNITARY_TOL);
            prop_assert!(verify_energy_conserving(&u.to_dense(), &Hamiltonian0::uniform(n)));
        }

        #[test]
        fn sector_apply_equals_dense_conjugation(seed in any::<u64>(), specs in arb_specs(6)) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho0 = product_state(&specs).unwrap();
            // correlate the input first so off-diagonal entries are exercised
            let pre = random_sector_unitary(6, RandomUnitaryOptions { family: RandomFamily::Cyclic, sample_phases: true }, &mut rng).unwrap();
            let rho = apply(&pre, &rho0).unwrap();
            let u = random_sector_unitary(4, RandomUnitaryOptions { family: RandomFamily::AllPairs, sample_phases: true }, &mut rng).unwrap();
            let roles = [4, 1, 5, 2];
            let fast = apply_on(&u, &rho, &roles).unwrap();
            let slow = dense_apply(&u, &rho, &roles);
            prop_assert!(fast.matrix().max_abs_diff(&slow) < 1e-12);
            prop_assert!(rho.matrix().max_abs_diff(&dense_apply(&pre, &rho0, &[0, 1, 2, 3, 4, 5])) < 1e-12);
        }

        #[test]
        fn evolution_keeps_qubits_diagonal_and_energy_fixed(seed in any::<u64>(), specs in arb_specs(4)) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = random_sector_unitary(4, RandomUnitaryOptions { family: RandomFamily::AllPairs, sample_phases: true }, &mut rng).unwrap();
            let rho = product_state(&specs).unwrap();
            let out = apply(&u, &rho).unwrap();
            out.validate().unwrap();
            for c in out.qubit_coherences() {
                prop_assert!(c < 1e-12);
            }
            for q in 0..4 {
                let r = partial_trace(&out, &[q]).unwrap();
                prop_assert!(r.matrix().max_off_diagonal() < 1e-12);
            }
            let h0 = Hamiltonian0::uniform(4);
            let e0 = crate::qstate::expected_energy(&rho, &h0).unwrap();
            let e1 = crate::qstate::expected_energy(&out, &h0).unwrap();
            prop_assert!((e0 - e1).abs() < 1e-12);
            // fully polarised states only pick up phases
            prop_assert!((out.entry(0, 0).re - rho.entry(0, 0).re).abs() < 1e-15);
            prop_assert!((out.entry(15, 15).re - rho.entry(15, 15).re).abs() < 1e-15);
        }
    }
}
