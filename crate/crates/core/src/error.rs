use alloc::string::String;
use core::fmt;

/// Errors raised by state construction, unitary construction and the
/// thermodynamic observables.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Excited-state population outside the open interval (0, 0.5).
    InvalidPopulation(f64),
    /// Level spacing must be strictly positive and finite.
    InvalidLevelSpacing(f64),
    /// Temperature must be strictly positive.
    InvalidTemperature(f64),
    /// A state was requested on zero qubits.
    EmptySystem,
    /// Qubit count above the configured cap.
    TooManyQubits { n: usize, cap: usize },
    /// Operands of incompatible size.
    DimensionMismatch { expected: usize, found: usize },
    /// A qubit index outside `0..n`.
    InvalidQubit { index: usize, n: usize },
    /// Repeated or empty qubit selection.
    InvalidSelection(&'static str),
    NotHermitian(f64),
    BadTrace(f64),
    NotPositive(f64),
    NotUnitary(f64),
    /// The matrix does not commute with the free Hamiltonian.
    NotEnergyConserving(f64),
    /// An eigenvalue below the clipping tolerance was fed to a logarithm.
    NegativeEigenvalue(f64),
    /// A two-qubit state does not have the X-form sparsity pattern.
    PatternViolation(f64),
    /// `supp(a)` is not contained in `supp(b)` for a relative entropy.
    SupportViolation,
    /// Actor, reference and enabler slots do not partition the machine.
    InvalidSlots(&'static str),
    /// No partition of the landscape respects the connectivity graph.
    NoAdmissiblePartition,
    /// Too few points for a fit.
    InsufficientData { needed: usize, found: usize },
    /// A fit input was zero or negative.
    NonPositiveValue(f64),
    InvalidConfig(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidPopulation(p) => {
                write!(f, "population {p} outside the open interval (0, 0.5)")
            }
            Error::InvalidLevelSpacing(e) => write!(f, "level spacing {e} must be positive"),
            Error::InvalidTemperature(t) => write!(f, "temperature {t} must be positive"),
            Error::EmptySystem => f.write_str("at least one qubit is required"),
            Error::TooManyQubits { n, cap } => write!(f, "{n} qubits exceeds the cap of {cap}"),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::InvalidQubit { index, n } => {
                write!(f, "qubit index {index} out of range for {n} qubits")
            }
            Error::InvalidSelection(why) => write!(f, "invalid qubit selection: {why}"),
            Error::NotHermitian(d) => write!(f, "matrix is not Hermitian (deviation {d:e})"),
            Error::BadTrace(t) => write!(f, "trace {t} differs from 1"),
            Error::NotPositive(l) => write!(f, "negative eigenvalue {l:e}"),
            Error::NotUnitary(d) => write!(f, "matrix is not unitary (deviation {d:e})"),
            Error::NotEnergyConserving(d) => {
                write!(f, "matrix does not commute with H0 (deviation {d:e})")
            }
            Error::NegativeEigenvalue(l) => write!(f, "eigenvalue {l:e} below clipping tolerance"),
            Error::PatternViolation(m) => {
                write!(f, "state is not of X form (forbidden entry magnitude {m:e})")
            }
            Error::SupportViolation => f.write_str("support of first state not contained in second"),
            Error::InvalidSlots(why) => write!(f, "invalid machine slots: {why}"),
            Error::NoAdmissiblePartition => {
                f.write_str("no partition is admissible under this connectivity and unitary class")
            }
            Error::InsufficientData { needed, found } => {
                write!(f, "need at least {needed} points, found {found}")
            }
            Error::NonPositiveValue(v) => write!(f, "value {v} must be positive"),
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
