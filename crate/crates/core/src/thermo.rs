//! Entropies, distances, concurrence, free energy and extractable work.
//!
//! Entropies are in bits. Free energies are `⟨E⟩ − T ln2 S` with `k_B = 1`,
//! so `W_ex = T ln2 D(ρ‖ρ_th)` holds literally.

use alloc::vec::Vec;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, hermitian_eigenvalues, CMatrix};
use crate::math;
use crate::qstate::{
    expected_energy, partial_trace, population_from_temperature, product_state, DensityMatrix,
    Hamiltonian0, QubitSpec,
};

/// Eigenvalues below this are treated as zero.
pub const EIGEN_CLIP: f64 = 1e-12;
/// Tolerance on the forbidden entries of an X-shaped two-qubit state.
pub const X_FORM_TOL: f64 = 1e-12;

fn check_temperature(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidTemperature(t))
    }
}

fn check_same_dim(a: &DensityMatrix, b: &DensityMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}

fn check_two_qubits(rho: &DensityMatrix) -> Result<()> {
    if rho.n_qubits() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: rho.dim(),
        });
    }
    Ok(())
}

/// `−Σ λ log2 λ` over a spectrum; slightly negative values count as zero.
pub fn spectrum_entropy(values: &[f64]) -> f64 {
    -values.iter().map(|&l| math::xlog2x(l.max(0.0))).sum::<f64>()
}

/// Von Neumann entropy in bits.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    spectrum_entropy(&hermitian_eigenvalues(rho.matrix()))
}

/// `H(p) = −p log2 p − (1−p) log2(1−p)`.
pub fn binary_entropy(p: f64) -> f64 {
    -(math::xlog2x(p) + math::xlog2x(1.0 - p))
}

/// Relative entropy of two diagonal qubit states with excited populations
/// `q` and `p`, in bits.
pub fn binary_relative_entropy(q: f64, p: f64) -> f64 {
    let term = |a: f64, b: f64| if a > 0.0 { a * math::log2(a / b) } else { 0.0 };
    term(q, p) + term(1.0 - q, 1.0 - p)
}

/// `(4/3)(1 − Tr ρ²)` for a two-qubit state.
pub fn linear_entropy(rho: &DensityMatrix) -> Result<f64> {
    check_two_qubits(rho)?;
    let purity: f64 = rho.matrix().as_slice().iter().map(Complex64::norm_sqr).sum();
    Ok(4.0 / 3.0 * (1.0 - purity))
}

/// Half the trace norm of `a − b`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    check_same_dim(a, b)?;
    let diff = a.matrix().sub(b.matrix());
    Ok(0.5 * hermitian_eigenvalues(&diff).iter().map(|l| l.abs()).sum::<f64>())
}

/// What [`relative_entropy_with`] does when `supp a ⊄ supp b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SupportPolicy {
    #[default]
    Error,
    Infinity,
}

/// `D(a‖b) = Tr[a(log2 a − log2 b)]` in bits.
pub fn relative_entropy(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    relative_entropy_with(a, b, SupportPolicy::Error)
}

pub fn relative_entropy_with(
    a: &DensityMatrix,
    b: &DensityMatrix,
    policy: SupportPolicy,
) -> Result<f64> {
    check_same_dim(a, b)?;
    let violation = || match policy {
        SupportPolicy::Error => Err(Error::SupportViolation),
        SupportPolicy::Infinity => Ok(f64::INFINITY),
    };
    let d = if a.matrix().is_diagonal() && b.matrix().is_diagonal() {
        let mut acc = 0.0;
        for (x, y) in a.diagonal().into_iter().zip(b.diagonal()) {
            if x <= EIGEN_CLIP {
                continue;
            }
            if y <= EIGEN_CLIP {
                return violation();
            }
            acc += x * math::log2(x / y);
        }
        acc
    } else {
        let neg_entropy = -von_neumann_entropy(a);
        let eig = hermitian_eigen(b.matrix());
        let weights = eig.expectations(a.matrix());
        let mut cross = 0.0;
        for (&mu, &w) in eig.values.iter().zip(&weights) {
            if mu <= EIGEN_CLIP {
                if w > EIGEN_CLIP {
                    return violation();
                }
                continue;
            }
            cross += w * math::log2(mu);
        }
        neg_entropy - cross
    };
    // rounding can leave a hair below zero
    Ok(if d < 0.0 && d > -EIGEN_CLIP { 0.0 } else { d })
}

/// `(σy ⊗ σy) ρ* (σy ⊗ σy)`.
fn spin_flip(m: &CMatrix) -> CMatrix {
    // σy ⊗ σy is the real anti-diagonal with signs (−1, 1, 1, −1)
    let sign = [-1.0, 1.0, 1.0, -1.0];
    let mut out = CMatrix::zeros(4);
    for i in 0..4 {
        for j in 0..4 {
            out[(i, j)] = m[(3 - i, 3 - j)].conj() * (sign[i] * sign[j]);
        }
    }
    out
}

/// Wootters concurrence of a two-qubit state.
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    check_two_qubits(rho)?;
    let sqrt_rho = hermitian_eigen(rho.matrix()).map_spectrum(|l| math::sqrt(l.max(0.0)));
    let r = sqrt_rho.matmul(&spin_flip(rho.matrix())).matmul(&sqrt_rho);
    let s: Vec<f64> = hermitian_eigenvalues(&r)
        .into_iter()
        .map(|l| math::sqrt(l.max(0.0)))
        .collect();
    Ok((s[0] - s[1] - s[2] - s[3]).clamp(0.0, 1.0))
}

/// `2 max(0, |ρ23| − √(ρ11 ρ44))` for a state whose only off-diagonal
/// entries are `ρ23` and its conjugate.
pub fn concurrence_x_form(rho: &DensityMatrix) -> Result<f64> {
    check_two_qubits(rho)?;
    let m = rho.matrix();
    for i in 0..4 {
        for j in 0..4 {
            if i == j || (i, j) == (1, 2) || (i, j) == (2, 1) {
                continue;
            }
            let v = m[(i, j)].norm();
            if v > X_FORM_TOL {
                return Err(Error::PatternViolation(v));
            }
        }
    }
    let r11 = m[(0, 0)].re.max(0.0);
    let r44 = m[(3, 3)].re.max(0.0);
    Ok(2.0 * (m[(1, 2)].norm() - math::sqrt(r11 * r44)).max(0.0))
}

/// `S(A) + S(B) − S(AB)` for the cut `part_a | rest`.
pub fn mutual_information(rho: &DensityMatrix, part_a: &[usize]) -> Result<f64> {
    let n = rho.n_qubits();
    let part_b: Vec<usize> = (0..n).filter(|q| !part_a.contains(q)).collect();
    if part_a.is_empty() || part_b.is_empty() {
        return Err(Error::InvalidSelection("cut must leave both sides non-empty"));
    }
    let sa = von_neumann_entropy(&partial_trace(rho, part_a)?);
    let sb = von_neumann_entropy(&partial_trace(rho, &part_b)?);
    Ok((sa + sb - von_neumann_entropy(rho)).max(0.0))
}

/// Product of single-qubit Gibbs states at `t` with the spacings of `h0`.
pub fn gibbs_state(h0: &Hamiltonian0, t: f64) -> Result<DensityMatrix> {
    check_temperature(t)?;
    let specs = h0
        .spacings()
        .iter()
        .map(|&e1| QubitSpec::new(population_from_temperature(t, e1)?, e1))
        .collect::<Result<Vec<_>>>()?;
    product_state(&specs)
}

/// `F(ρ) = ⟨E⟩ − T ln2 S(ρ)`.
pub fn free_energy(rho: &DensityMatrix, t: f64, h0: &Hamiltonian0) -> Result<f64> {
    check_temperature(t)?;
    Ok(expected_energy(rho, h0)? - t * math::LN_2 * von_neumann_entropy(rho))
}

/// `F(ρ, T) − F(ρ_th(T), T)`.
pub fn extractable_work(rho: &DensityMatrix, t: f64, h0: &Hamiltonian0) -> Result<f64> {
    let f = free_energy(rho, t, h0)?;
    let f_th = free_energy(&gibbs_state(h0, t)?, t, h0)?;
    Ok(f - f_th)
}

/// `T ln2 D(ρ‖ρ_th(T))`; equal to [`extractable_work`].
pub fn extractable_work_relative(rho: &DensityMatrix, t: f64, h0: &Hamiltonian0) -> Result<f64> {
    check_temperature(t)?;
    Ok(t * math::LN_2 * relative_entropy(rho, &gibbs_state(h0, t)?)?)
}

/// `W_ex(ρ1, T1) − W_ex(ρ0, T0)`.
pub fn delta_extractable_work(
    rho0: &DensityMatrix,
    t0: f64,
    rho1: &DensityMatrix,
    t1: f64,
    h0: &Hamiltonian0,
) -> Result<f64> {
    Ok(extractable_work(rho1, t1, h0)? - extractable_work(rho0, t0, h0)?)
}

/// Extractable work of a diagonal qubit with population `q` against a
/// bath at `t`: `T ln2 D(q‖p(T))`.
pub fn qubit_extractable_work(q: f64, t: f64, e1: f64) -> Result<f64> {
    check_temperature(t)?;
    let p = population_from_temperature(t, e1)?;
    Ok(t * math::LN_2 * binary_relative_entropy(q, p))
}

/// Observables of one state against one reference temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermoReport {
    pub energy: f64,
    pub von_neumann_entropy: f64,
    pub linear_entropy: Option<f64>,
    pub free_energy: f64,
    pub temperature_ref: f64,
    pub extractable_work: f64,
    pub concurrence: Option<f64>,
    pub mutual_information: Option<f64>,
}

impl ThermoReport {
    pub fn new(rho: &DensityMatrix, t: f64, h0: &Hamiltonian0) -> Result<Self> {
        let two = rho.n_qubits() == 2;
        let energy = expected_energy(rho, h0)?;
        let s = von_neumann_entropy(rho);
        check_temperature(t)?;
        Ok(Self {
            energy,
            von_neumann_entropy: s,
            linear_entropy: if two { Some(linear_entropy(rho)?) } else { None },
            free_energy: energy - t * math::LN_2 * s,
            temperature_ref: t,
            extractable_work: extractable_work(rho, t, h0)?,
            concurrence: if two { Some(concurrence(rho)?) } else { None },
            mutual_information: if rho.n_qubits() >= 2 {
                Some(mutual_information(rho, &[0])?)
            } else {
                None
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{ONE, ZERO};
    use crate::qstate::{thermal_qubit, temperature_from_population};
    use crate::sectors::{apply, random_sector_unitary, two_qubit_partial_swap, RandomUnitaryOptions, RandomFamily};
    use alloc::vec;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn qubit(p: f64) -> DensityMatrix {
        thermal_qubit(QubitSpec::unit(p).unwrap())
    }

    fn diag(values: &[f64]) -> DensityMatrix {
        let n = values.len().trailing_zeros() as usize;
        DensityMatrix::from_diagonal(n, values).unwrap()
    }

    fn bell() -> DensityMatrix {
        let s = 1.0 / 2f64.sqrt();
        DensityMatrix::pure(2, &[ONE * s, ZERO, ZERO, ONE * s]).unwrap()
    }

    fn specs(ps: &[f64]) -> Vec<QubitSpec> {
        ps.iter().map(|&p| QubitSpec::unit(p).unwrap()).collect()
    }

    /// Independent binary entropy with std logarithms.
    fn h2(p: f64) -> f64 {
        -(p * p.log2() + (1.0 - p) * (1.0 - p).log2())
    }

    #[test]
    fn entropy_examples() {
        assert!(von_neumann_entropy(&bell()).abs() < 1e-12);
        assert!((von_neumann_entropy(&diag(&[0.5, 0.5])) - 1.0).abs() < 1e-15);
        let s = von_neumann_entropy(&diag(&[0.8, 0.2]));
        assert!((s - h2(0.2)).abs() < 1e-14);
        assert!((s - 0.72193).abs() < 1e-5);
        assert!((binary_entropy(0.2) - s).abs() < 1e-15);
    }

    #[test]
    fn linear_entropy_examples() {
        assert!(linear_entropy(&bell()).unwrap().abs() < 1e-14);
        let mixed = DensityMatrix::maximally_mixed(2).unwrap();
        assert!((linear_entropy(&mixed).unwrap() - 1.0).abs() < 1e-15);
        let rho = product_state(&specs(&[0.2, 0.2])).unwrap();
        let expected = 4.0 / 3.0 * (1.0 - (0.64f64.powi(2) + 2.0 * 0.16f64.powi(2) + 0.04f64.powi(2)));
        assert!((linear_entropy(&rho).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.7168).abs() < 1e-12);
        assert!(linear_entropy(&qubit(0.2)).is_err());
    }

    #[test]
    fn trace_distance_examples() {
        let a = qubit(0.4);
        assert_eq!(trace_distance(&a, &a).unwrap(), 0.0);
        assert!((trace_distance(&a, &qubit(0.2)).unwrap() - 0.2).abs() < 1e-15);
        let up = DensityMatrix::pure(1, &[ONE, ZERO]).unwrap();
        let plus = DensityMatrix::pure(1, &[ZERO, ONE]).unwrap();
        assert!((trace_distance(&up, &plus).unwrap() - 1.0).abs() < 1e-15);
        assert!(trace_distance(&a, &bell()).is_err());
    }

    #[test]
    fn relative_entropy_examples() {
        let a = diag(&[0.8, 0.2]);
        assert_eq!(relative_entropy(&a, &a).unwrap(), 0.0);
        let b = diag(&[0.6, 0.4]);
        let expected = 0.8 * (0.8f64 / 0.6).log2() + 0.2 * (0.2f64 / 0.4).log2();
        assert!((relative_entropy(&a, &b).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.13203).abs() < 1e-5);
        assert!((binary_relative_entropy(0.2, 0.4) - expected).abs() < 1e-15);

        let pure = DensityMatrix::pure(1, &[ONE, ZERO]).unwrap();
        let other = DensityMatrix::pure(1, &[ZERO, ONE]).unwrap();
        assert!(matches!(relative_entropy(&a, &pure), Err(Error::SupportViolation)));
        assert_eq!(relative_entropy_with(&other, &pure, SupportPolicy::Infinity).unwrap(), f64::INFINITY);
        assert!((relative_entropy(&pure, &a).unwrap() + 0.8f64.log2()).abs() < 1e-15);
    }

    #[test]
    fn relative_entropy_general_path_matches_diagonal_path() {
        // rotate both states by the same unitary; D is invariant
        let a = product_state(&specs(&[0.3, 0.1])).unwrap();
        let b = product_state(&specs(&[0.2, 0.25])).unwrap();
        let u = crate::linalg::CMatrix::from_rows(4, {
            let s = 1.0 / 2f64.sqrt();
            vec![
                ONE * s, ONE * s, ZERO, ZERO,
                -ONE * s, ONE * s, ZERO, ZERO,
                ZERO, ZERO, ONE, ZERO,
                ZERO, ZERO, ZERO, ONE,
            ]
        })
        .unwrap();
        let ra = DensityMatrix::new(2, a.matrix().conjugate_by(&u)).unwrap();
        let rb = DensityMatrix::new(2, b.matrix().conjugate_by(&u)).unwrap();
        let d0 = relative_entropy(&a, &b).unwrap();
        let d1 = relative_entropy(&ra, &rb).unwrap();
        assert!((d0 - d1).abs() < 1e-12);
    }

    #[test]
    fn concurrence_examples() {
        assert!((concurrence(&bell()).unwrap() - 1.0).abs() < 1e-6);
        let prod = product_state(&specs(&[0.3, 0.1])).unwrap();
        assert!(concurrence(&prod).unwrap() < 1e-12);
        assert_eq!(concurrence_x_form(&prod).unwrap(), 0.0);

        let rho = product_state(&specs(&[0.4, 0.2])).unwrap();
        let u = two_qubit_partial_swap(2, (0, 1), core::f64::consts::FRAC_PI_4, 0.0).unwrap();
        let out = apply(&u, &rho).unwrap();
        let c = concurrence(&out).unwrap();
        let cx = concurrence_x_form(&out).unwrap();
        assert!((c - cx).abs() < 1e-10);
        // closed form at θ = π/4
        let (p1, p2) = (0.4f64, 0.2f64);
        let closed = ((p1 - p2).abs() - 2.0 * (p1 * p2 * (1.0 - p1) * (1.0 - p2)).sqrt()).max(0.0);
        assert!((cx - closed).abs() < 1e-14);

        assert!(matches!(concurrence_x_form(&bell()), Err(Error::PatternViolation(_))));
        assert!(concurrence(&qubit(0.1)).is_err());
    }

    #[test]
    fn x_form_boundary() {
        let m = crate::linalg::CMatrix::from_rows(
            2 * 2,
            vec![
                ZERO, ZERO, ZERO, ZERO,
                ZERO, ONE * 0.5, ONE * 0.3, ZERO,
                ZERO, ONE * 0.3, ONE * 0.5, ZERO,
                ZERO, ZERO, ZERO, ZERO,
            ],
        )
        .unwrap();
        let rho = DensityMatrix::new(2, m).unwrap();
        assert!((concurrence_x_form(&rho).unwrap() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn mutual_information_examples() {
        let prod = product_state(&specs(&[0.3, 0.1])).unwrap();
        assert!(mutual_information(&prod, &[0]).unwrap() < 1e-12);
        assert!((mutual_information(&bell(), &[0]).unwrap() - 2.0).abs() < 1e-6);
        assert!(mutual_information(&bell(), &[0, 1]).is_err());
        assert!(mutual_information(&bell(), &[]).is_err());
    }

    #[test]
    fn mutual_information_peaks_when_energy_is_shared_evenly() {
        // over one swap period the populations equalise at θ = π/4
        for (p1, p2) in [(0.4, 0.2), (0.45, 0.05), (0.3, 0.25)] {
            let rho = product_state(&specs(&[p1, p2])).unwrap();
            let mut best = (0.0, f64::MIN);
            for k in 0..=100 {
                let theta = k as f64 * core::f64::consts::FRAC_PI_2 / 100.0;
                let u = two_qubit_partial_swap(2, (0, 1), theta, 0.0).unwrap();
                let mi = mutual_information(&apply(&u, &rho).unwrap(), &[0]).unwrap();
                if mi > best.1 {
                    best = (theta, mi);
                }
            }
            assert!((best.0 - core::f64::consts::FRAC_PI_4).abs() < 1e-12, "({p1}, {p2}) peaks at {}", best.0);
        }
        // equal initial populations stay uncorrelated
        let even = product_state(&specs(&[0.3, 0.3])).unwrap();
        let u = two_qubit_partial_swap(2, (0, 1), core::f64::consts::FRAC_PI_4, 0.0).unwrap();
        assert!(mutual_information(&apply(&u, &even).unwrap(), &[0]).unwrap() < 1e-12);
    }

    #[test]
    fn free_energy_examples() {
        let h1 = Hamiltonian0::uniform(1);
        let ground = DensityMatrix::ground(1).unwrap();
        assert_eq!(free_energy(&ground, 0.7, &h1).unwrap(), 0.0);
        let f = free_energy(&diag(&[0.8, 0.2]), 1.0, &h1).unwrap();
        assert!((f - (0.2 - 2f64.ln() * h2(0.2))).abs() < 1e-15);
        assert!((f + 0.300402).abs() < 1e-6);
        assert!(free_energy(&ground, 0.0, &h1).is_err());
        assert!(free_energy(&ground, -1.0, &h1).is_err());
    }

    #[test]
    fn thermal_state_minimises_free_energy() {
        let h1 = Hamiltonian0::uniform(1);
        for t in [0.3, 1.0, 2.5] {
            let p_th = population_from_temperature(t, 1.0).unwrap();
            let f_th = free_energy(&qubit(p_th), t, &h1).unwrap();
            for k in 0..=200 {
                let q = k as f64 / 200.0;
                let f = free_energy(&diag(&[1.0 - q, q]), t, &h1).unwrap();
                assert!(f >= f_th - 1e-14);
            }
        }
    }

    #[test]
    fn extractable_work_examples() {
        let h1 = Hamiltonian0::uniform(1);
        let t = temperature_from_population(0.3, 1.0).unwrap();
        assert!(extractable_work(&qubit(0.3), t, &h1).unwrap().abs() < 1e-15);
        let w = extractable_work(&qubit(0.2), t, &h1).unwrap();
        let d = relative_entropy(&diag(&[0.8, 0.2]), &diag(&[0.7, 0.3])).unwrap();
        assert!((w - t * 2f64.ln() * d).abs() < 1e-12);
        assert!((qubit_extractable_work(0.2, t, 1.0).unwrap() - w).abs() < 1e-12);

        let h2q = Hamiltonian0::uniform(2);
        let rho = product_state(&specs(&[0.3, 0.1])).unwrap();
        assert_eq!(delta_extractable_work(&rho, 1.0, &rho, 1.0, &h2q).unwrap(), 0.0);
    }

    #[test]
    fn gibbs_state_uses_each_spacing() {
        let h0 = Hamiltonian0::new(vec![1.0, 2.0]).unwrap();
        let g = gibbs_state(&h0, 1.5).unwrap();
        let pops = g.qubit_populations();
        assert!((pops[0] - 1.0 / (1.0 + (1.0f64 / 1.5).exp())).abs() < 1e-15);
        assert!((pops[1] - 1.0 / (1.0 + (2.0f64 / 1.5).exp())).abs() < 1e-15);
    }

    #[test]
    fn report_fields() {
        let rho = product_state(&specs(&[0.3, 0.1])).unwrap();
        let r = ThermoReport::new(&rho, 1.0, &Hamiltonian0::uniform(2)).unwrap();
        assert!((r.energy - 0.4).abs() < 1e-15);
        assert!(r.concurrence.unwrap() < 1e-12);
        assert!((r.von_neumann_entropy - h2(0.3) - h2(0.1)).abs() < 1e-12);
        assert!((r.free_energy - (r.energy - 2f64.ln() * r.von_neumann_entropy)).abs() < 1e-15);
    }

    fn evolved(seed: u64, ps: &[f64]) -> DensityMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let opts = RandomUnitaryOptions { family: RandomFamily::AllPairs, sample_phases: true };
        let u = random_sector_unitary(ps.len(), opts, &mut rng).unwrap();
        apply(&u, &product_state(&specs(ps)).unwrap()).unwrap()
    }

    fn pops(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.01f64..0.49, n)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn concurrence_routes_agree(theta in 0.0f64..core::f64::consts::TAU, phi in 0.0f64..core::f64::consts::TAU, ps in pops(2)) {
            let u = two_qubit_partial_swap(2, (0, 1), theta, phi).unwrap();
            let out = apply(&u, &product_state(&specs(&ps)).unwrap()).unwrap();
            let c = concurrence(&out).unwrap();
            let cx = concurrence_x_form(&out).unwrap();
            prop_assert!((c - cx).abs() < 1e-10, "{c} vs {cx}");
            prop_assert!((0.0..=1.0).contains(&c));
            let sl = linear_entropy(&out).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&sl));
        }

        #[test]
        fn subadditivity_and_unitary_invariance(seed in any::<u64>(), ps in pops(3)) {
            let rho0 = product_state(&specs(&ps)).unwrap();
            let rho = evolved(seed, &ps);
            let s = von_neumann_entropy(&rho);
            prop_assert!((s - von_neumann_entropy(&rho0)).abs() < 1e-10);
            let s1 = von_neumann_entropy(&partial_trace(&rho, &[0]).unwrap());
            let s23 = von_neumann_entropy(&partial_trace(&rho, &[1, 2]).unwrap());
            prop_assert!(s1 + s23 >= s - 1e-10);
        }

        #[test]
        fn work_routes_agree(seed in any::<u64>(), ps in pops(3), t in 0.2f64..5.0) {
            let rho = evolved(seed, &ps);
            let h0 = Hamiltonian0::uniform(3);
            let w8 = extractable_work(&rho, t, &h0).unwrap();
            let w10 = extractable_work_relative(&rho, t, &h0).unwrap();
            prop_assert!((w8 - w10).abs() < 1e-10, "{w8} vs {w10}");
            prop_assert!(w8 >= -1e-12);
        }

        #[test]
        fn gibbs_preserving_maps_lose_work(theta in 0.0f64..core::f64::consts::TAU, ps in pops(2), p_ref in 0.01f64..0.49) {
            // the actor in contact with a reference at its own temperature
            let t = temperature_from_population(p_ref, 1.0).unwrap();
            let u = two_qubit_partial_swap(2, (0, 1), theta, 0.0).unwrap();
            let rho = product_state(&specs(&[ps[0], p_ref])).unwrap();
            let out = apply(&u, &rho).unwrap();
            let h1 = Hamiltonian0::uniform(1);
            let before = partial_trace(&rho, &[0]).unwrap();
            let after = partial_trace(&out, &[0]).unwrap();
            let dw = delta_extractable_work(&before, t, &after, t, &h1).unwrap();
            prop_assert!(dw <= 1e-12);
        }
    }
}
