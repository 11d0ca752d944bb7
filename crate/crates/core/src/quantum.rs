//! States, POVMs and projectors, with validation and direct Born-rule
//! probabilities. `born_distribution` is the oracle every compiled tree is
//! checked against.

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numerics::{
    self, hermitian_residual, identity, ket_bra, min_eigenvalue, scale, ComplexMatrix,
    ComplexVector, C64, HERMITIAN_TOL, PSD_TOL, RANK_TOL,
};

/// Per-dimension tolerance on `||sum E_k - I||_F`.
pub const POVM_SUM_TOL: f64 = 1e-9;
/// Allowed idempotency defect `||P^2 - P||_F`.
pub const PROJECTOR_TOL: f64 = 1e-9;
/// Pure vectors within this distance of unit norm are renormalized.
pub const RENORMALIZE_TOL: f64 = 1e-6;
/// Slack below zero tolerated for probabilities before clamping.
pub const PROBABILITY_SLACK: f64 = 1e-12;

/// A pure or mixed state of a `dim`-level system.
#[derive(Debug, Clone, PartialEq)]
pub enum QuantumState {
    Pure(ComplexVector),
    Mixed(ComplexMatrix),
}

/// Unvalidated state data as read from a file or the FFI.
#[derive(Debug, Clone)]
pub enum RawState {
    Pure(ComplexVector),
    Density(ComplexMatrix),
}

impl QuantumState {
    pub fn dim(&self) -> usize {
        match self {
            QuantumState::Pure(v) => v.len(),
            QuantumState::Mixed(rho) => rho.nrows(),
        }
    }

    pub fn density(&self) -> ComplexMatrix {
        match self {
            QuantumState::Pure(v) => ket_bra(v),
            QuantumState::Mixed(rho) => rho.clone(),
        }
    }

    /// `<psi|A|psi>` or `tr(rho A)`, real part.
    pub fn expectation(&self, a: &ComplexMatrix) -> f64 {
        match self {
            QuantumState::Pure(v) => v.dotc(&(a * v)).re,
            QuantumState::Mixed(rho) => (rho * a).trace().re,
        }
    }

    /// `tr(M rho M^dag)`, the probability of the branch whose accumulated
    /// operator is `M`.
    pub fn branch_weight(&self, m: &ComplexMatrix) -> f64 {
        match self {
            QuantumState::Pure(v) => (m * v).norm_squared(),
            QuantumState::Mixed(rho) => (m * rho * m.adjoint()).trace().re,
        }
    }

    pub fn is_pure(&self) -> bool {
        matches!(self, QuantumState::Pure(_))
    }
}

/// Check and normalize raw state data.
pub fn validate_state(raw: RawState) -> Result<QuantumState> {
    match raw {
        RawState::Pure(v) => {
            if v.is_empty() {
                return Err(Error::NotAState("empty vector".into()));
            }
            if !v.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                return Err(Error::NotAState("non-finite amplitude".into()));
            }
            let norm = v.norm();
            if (norm - 1.0).abs() > RENORMALIZE_TOL {
                return Err(Error::NotAState(format!("norm {norm} is not 1")));
            }
            Ok(QuantumState::Pure(v / C64::from(norm)))
        }
        RawState::Density(rho) => {
            if rho.nrows() != rho.ncols() {
                return Err(Error::NotAState(format!(
                    "density matrix is {}x{}",
                    rho.nrows(),
                    rho.ncols()
                )));
            }
            if rho.nrows() == 0 {
                return Err(Error::NotAState("empty density matrix".into()));
            }
            if !numerics::is_finite(&rho) {
                return Err(Error::NotAState("non-finite entry".into()));
            }
            let asym = hermitian_residual(&rho);
            if asym > HERMITIAN_TOL * scale(rho.norm()) {
                return Err(Error::NotAState(format!("not Hermitian ({asym:.3e})")));
            }
            let tr = numerics::trace_re(&rho);
            if (tr - 1.0).abs() > 1e-10 {
                return Err(Error::NotAState(format!("trace {tr} is not 1")));
            }
            let min = min_eigenvalue(&rho)?;
            if min < -PSD_TOL * scale(rho.norm()) {
                return Err(Error::NotAState(format!(
                    "not positive semidefinite (min eigenvalue {min:.3e})"
                )));
            }
            Ok(QuantumState::Mixed(rho))
        }
    }
}

/// Validated POVM `{E_1, ..., E_m}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    elements: Vec<ComplexMatrix>,
    labels: Vec<String>,
}

impl Povm {
    pub fn dim(&self) -> usize {
        self.elements[0].nrows()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[ComplexMatrix] {
        &self.elements
    }

    pub fn element(&self, k: usize) -> &ComplexMatrix {
        &self.elements[k]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Replace the outcome labels. Length must match the element count.
    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.elements.len() {
            return Err(Error::DimensionMismatch {
                expected: self.elements.len(),
                got: labels.len(),
            });
        }
        self.labels = labels;
        Ok(self)
    }

    /// SHA-256 over the dimension, element count and raw entry bits.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.dim() as u64).to_le_bytes());
        h.update((self.len() as u64).to_le_bytes());
        for e in &self.elements {
            for row in 0..e.nrows() {
                for col in 0..e.ncols() {
                    let z = e[(row, col)];
                    h.update(z.re.to_bits().to_le_bytes());
                    h.update(z.im.to_bits().to_le_bytes());
                }
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn default_labels(m: usize) -> Vec<String> {
    (1..=m).map(|k| k.to_string()).collect()
}

/// Validate raw matrices as a POVM with default labels `1..m`.
pub fn validate_povm(elements: Vec<ComplexMatrix>) -> Result<Povm> {
    let Some(first) = elements.first() else {
        return Err(Error::EmptyPovm);
    };
    let dim = first.nrows();
    if dim == 0 {
        return Err(Error::NotSquare(0, first.ncols()));
    }
    let mut sum = ComplexMatrix::zeros(dim, dim);
    for (k, e) in elements.iter().enumerate() {
        if e.nrows() != e.ncols() {
            return Err(Error::NotSquare(e.nrows(), e.ncols()));
        }
        if e.nrows() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: e.nrows(),
            });
        }
        if !numerics::is_finite(e) {
            return Err(Error::NonFinite);
        }
        if hermitian_residual(e) > HERMITIAN_TOL * scale(e.norm()) {
            return Err(Error::ElementNotHermitian(k));
        }
        let min = min_eigenvalue(e)?;
        if min < -PSD_TOL * scale(e.norm()) {
            return Err(Error::ElementNotPsd {
                index: k,
                min_eigenvalue: min,
            });
        }
        sum += e;
    }
    let residual = (sum - identity(dim)).norm();
    if residual > POVM_SUM_TOL * dim as f64 {
        return Err(Error::SumNotIdentity(residual));
    }
    let m = elements.len();
    Ok(Povm {
        elements,
        labels: default_labels(m),
    })
}

/// Outcome probabilities `tr(rho E_k)`, clamped into `[0, 1]`.
pub fn born_distribution(povm: &Povm, state: &QuantumState) -> Result<Vec<f64>> {
    if state.dim() != povm.dim() {
        return Err(Error::DimensionMismatch {
            expected: povm.dim(),
            got: state.dim(),
        });
    }
    povm.elements()
        .iter()
        .map(|e| clamp_probability(state.expectation(e)))
        .collect()
}

pub(crate) fn clamp_probability(p: f64) -> Result<f64> {
    if p < -PROBABILITY_SLACK || !p.is_finite() {
        return Err(Error::NumericalFailure(format!(
            "probability {p:.3e} out of range"
        )));
    }
    Ok(p.clamp(0.0, 1.0))
}

/// Orthogonal projector with cached numeric rank.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    matrix: ComplexMatrix,
    rank: usize,
}

impl Projector {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::NotSquare(matrix.nrows(), matrix.ncols()));
        }
        if !numerics::is_finite(&matrix) {
            return Err(Error::NonFinite);
        }
        let asym = hermitian_residual(&matrix);
        if asym > HERMITIAN_TOL * scale(matrix.norm()) {
            return Err(Error::NotAProjector(format!("not Hermitian ({asym:.3e})")));
        }
        let defect = (&matrix * &matrix - &matrix).norm();
        if defect > PROJECTOR_TOL {
            return Err(Error::NotAProjector(format!(
                "not idempotent ({defect:.3e})"
            )));
        }
        let rank = numerics::matrix_rank(&matrix, RANK_TOL)?;
        Ok(Projector { matrix, rank })
    }

    /// Projector onto the span of an orthonormal family.
    pub fn from_orthonormal(dim: usize, vectors: &[ComplexVector]) -> Result<Self> {
        Projector::new(numerics::span_projector(dim, vectors))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `I - P`
    pub fn complement(&self) -> Projector {
        Projector {
            matrix: identity(self.dim()) - &self.matrix,
            rank: self.dim() - self.rank,
        }
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }
}
