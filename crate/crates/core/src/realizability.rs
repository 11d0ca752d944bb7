//! Deciding whether a POVM can be realized by projective measurements on
//! the original space: a projector `P` with `0 < rank(P) < d` commuting with
//! every element must exist.
//!
//! The commutant `{X Hermitian : [X, E_k] = 0 for all k}` is computed as the
//! null space of a real linear system over the `d^2`-dimensional space of
//! Hermitian matrices. The commutant of a Hermitian family is a *-algebra,
//! so spectral projectors of any of its elements also commute with the POVM.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{
    self, commutator, identity, kernel_basis, scale, ComplexMatrix, ComplexVector, C64,
};
use crate::quantum::{Povm, Projector, QuantumState};

/// Relative singular-value cutoff for the commutation system's null space.
pub const COMMUTANT_TOL: f64 = 1e-9;
/// `||[E_k, P]||_F <= COMMUTATION_TOL * max(1, ||E_k||_F)`.
pub const COMMUTATION_TOL: f64 = 1e-9;
/// Relative gap separating eigenvalue clusters when splitting a commutant element.
pub const CLUSTER_GAP: f64 = 1e-8;
/// Eigenvalues below this fraction of the largest are outside the support.
pub const SUPPORT_TOL: f64 = 1e-10;

/// Frobenius-orthonormal Hermitian basis of the commutant.
#[derive(Debug, Clone)]
pub struct CommutantBasis {
    pub dim: usize,
    pub basis: Vec<ComplexMatrix>,
}

impl CommutantBasis {
    pub fn dimension(&self) -> usize {
        self.basis.len()
    }
}

#[derive(Debug, Clone)]
pub struct RealizabilityVerdict {
    pub projector: Option<Projector>,
    pub commutant_dimension: usize,
}

impl RealizabilityVerdict {
    pub fn realizable(&self) -> bool {
        self.projector.is_some()
    }
}

/// Summary for reports and the CLI.
#[derive(Debug, Clone, Serialize)]
pub struct VerdictSummary {
    pub realizable: bool,
    pub commutant_dimension: usize,
    pub projector_rank: Option<usize>,
}

impl From<&RealizabilityVerdict> for VerdictSummary {
    fn from(v: &RealizabilityVerdict) -> Self {
        VerdictSummary {
            realizable: v.realizable(),
            commutant_dimension: v.commutant_dimension,
            projector_rank: v.projector.as_ref().map(Projector::rank),
        }
    }
}

// Orthonormal (under Re tr(X^dag Y)) basis of d x d Hermitian matrices:
// diagonal units, then (E_jk + E_kj)/sqrt2 and i(E_jk - E_kj)/sqrt2 for j < k.
fn hermitian_basis(dim: usize) -> Vec<ComplexMatrix> {
    let mut out = Vec::with_capacity(dim * dim);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for j in 0..dim {
        let mut h = ComplexMatrix::zeros(dim, dim);
        h[(j, j)] = C64::new(1.0, 0.0);
        out.push(h);
    }
    for j in 0..dim {
        for k in (j + 1)..dim {
            let mut sym = ComplexMatrix::zeros(dim, dim);
            sym[(j, k)] = C64::new(s, 0.0);
            sym[(k, j)] = C64::new(s, 0.0);
            out.push(sym);
            let mut anti = ComplexMatrix::zeros(dim, dim);
            anti[(j, k)] = C64::new(0.0, s);
            anti[(k, j)] = C64::new(0.0, -s);
            out.push(anti);
        }
    }
    out
}

/// Hermitian basis of the matrices commuting with every POVM element.
pub fn commutant_basis(povm: &Povm) -> Result<CommutantBasis> {
    let dim = povm.dim();
    let herm = hermitian_basis(dim);
    let n = herm.len();
    let block = 2 * dim * dim;
    let rows = block * povm.len();
    let mut system = ComplexMatrix::zeros(rows, n);
    for (k, e) in povm.elements().iter().enumerate() {
        for (b, h) in herm.iter().enumerate() {
            let c = commutator(h, e);
            for (idx, z) in c.iter().enumerate() {
                system[(k * block + idx, b)] = C64::new(z.re, 0.0);
                system[(k * block + dim * dim + idx, b)] = C64::new(z.im, 0.0);
            }
        }
    }
    // Real input keeps the right singular vectors real; the phase convention
    // makes the largest-magnitude coefficient positive.
    let dec = numerics::svd(&system)?;
    let top = dec.singular_values.first().copied().unwrap_or(0.0);
    let threshold = COMMUTANT_TOL * scale(top);
    let basis = dec
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= threshold)
        .map(|(idx, _)| {
            let coeffs = dec.right_vectors.column(idx);
            let mut x = ComplexMatrix::zeros(dim, dim);
            for (c, h) in coeffs.iter().zip(&herm) {
                x += h * C64::new(c.re, 0.0);
            }
            x
        })
        .collect();
    Ok(CommutantBasis { dim, basis })
}

fn distance_from_identity_span(x: &ComplexMatrix) -> f64 {
    let d = x.nrows() as f64;
    let tr = x.trace();
    (x.norm_squared() - tr.norm_sqr() / d).max(0.0).sqrt()
}

/// Spectral projector onto the top eigenvalue cluster of a Hermitian matrix,
/// or `None` when the spectrum is a single cluster.
fn top_cluster_projector(x: &ComplexMatrix) -> Result<Option<ComplexMatrix>> {
    let eig = numerics::hermitian_eig(x)?;
    let spread = eig
        .eigenvalues
        .iter()
        .fold(0.0_f64, |acc, l| acc.max(l.abs()));
    let gap = CLUSTER_GAP * scale(spread);
    let size = eig
        .eigenvalues
        .windows(2)
        .position(|w| w[0] - w[1] > gap)
        .map(|p| p + 1);
    let Some(size) = size else {
        return Ok(None);
    };
    let vectors: Vec<ComplexVector> = (0..size).map(|k| eig.eigenvector(k)).collect();
    Ok(Some(numerics::span_projector(x.nrows(), &vectors)))
}

/// Search the commutant for a nontrivial projector.
pub fn find_commuting_projector(povm: &Povm) -> Result<RealizabilityVerdict> {
    let commutant = commutant_basis(povm)?;
    let commutant_dimension = commutant.dimension();
    if commutant_dimension < 2 {
        return Ok(RealizabilityVerdict {
            projector: None,
            commutant_dimension,
        });
    }
    let mut candidates: Vec<(usize, f64)> = commutant
        .basis
        .iter()
        .map(distance_from_identity_span)
        .enumerate()
        .collect();
    // Largest distance first; stable sort keeps lower index on ties.
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1));

    for (idx, _) in candidates {
        let Some(p) = top_cluster_projector(&commutant.basis[idx])? else {
            continue;
        };
        let Ok(p) = Projector::new(p) else {
            continue;
        };
        let p = if p.rank() == povm.dim() {
            p.complement()
        } else {
            p
        };
        if check_condition(povm, &p)? {
            return Ok(RealizabilityVerdict {
                projector: Some(p),
                commutant_dimension,
            });
        }
    }
    Err(Error::NumericalFailure(format!(
        "commutant has dimension {commutant_dimension} but no element yields a commuting projector"
    )))
}

/// Largest relative commutator norm `||[E_k, P]|| / max(1, ||E_k||)`.
pub fn max_commutator(povm: &Povm, p: &Projector) -> Result<f64> {
    if p.dim() != povm.dim() {
        return Err(Error::DimensionMismatch {
            expected: povm.dim(),
            got: p.dim(),
        });
    }
    Ok(povm
        .elements()
        .iter()
        .map(|e| commutator(e, p.matrix()).norm() / scale(e.norm()))
        .fold(0.0, f64::max))
}

/// `[E_k, P] = 0` for all `k` and `0 < rank(P) < d`.
pub fn check_condition(povm: &Povm, p: &Projector) -> Result<bool> {
    check_condition_with(povm, p, COMMUTATION_TOL)
}

pub fn check_condition_with(povm: &Povm, p: &Projector, tol: f64) -> Result<bool> {
    let worst = max_commutator(povm, p)?;
    Ok(worst <= tol && p.rank() > 0 && p.rank() < povm.dim())
}

fn support_complement(state: &QuantumState) -> Result<ComplexMatrix> {
    let rho = state.density();
    let eig = numerics::hermitian_eig(&rho)?;
    let top = eig.eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    let mut q = identity(rho.nrows());
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        if l > SUPPORT_TOL * top {
            let v = eig.eigenvector(k);
            q -= numerics::ket_bra(&v);
        }
    }
    Ok(q)
}

/// Orthonormal basis of `supp(rho1) ∩ supp(rho2)`, as the kernel of `Q1 + Q2`
/// where `Q_i` projects onto `ker(rho_i)`.
pub fn support_intersection(
    rho1: &QuantumState,
    rho2: &QuantumState,
) -> Result<Vec<ComplexVector>> {
    if rho1.dim() != rho2.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho1.dim(),
            got: rho2.dim(),
        });
    }
    let q = support_complement(rho1)? + support_complement(rho2)?;
    kernel_basis(&q, numerics::RANK_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::numerics::{basis_vector, ket_bra};
    use crate::quantum::validate_povm;

    // Independent oracle: null space dimension of the complex linear map
    // X -> ([X, E_1], ..., [X, E_m]) on all d x d complex matrices. For a
    // Hermitian family it equals the real dimension of the Hermitian commutant.
    fn complex_commutant_dimension(povm: &Povm) -> usize {
        let d = povm.dim();
        let mut map = ComplexMatrix::zeros(d * d * povm.len(), d * d);
        for (k, e) in povm.elements().iter().enumerate() {
            for col in 0..d * d {
                let mut x = ComplexMatrix::zeros(d, d);
                x[(col / d, col % d)] = C64::new(1.0, 0.0);
                let c = &x * e - e * &x;
                for (idx, z) in c.iter().enumerate() {
                    map[(k * d * d + idx, col)] = *z;
                }
            }
        }
        let sv = numerics::svd(&map).unwrap().singular_values;
        d * d - numerics::numeric_rank(&sv, 1e-9)
    }

    #[test]
    fn identity_commutant_is_everything() {
        for d in 1..=4 {
            let povm = validate_povm(vec![identity(d)]).unwrap();
            assert_eq!(commutant_basis(&povm).unwrap().dimension(), d * d);
        }
    }

    #[test]
    fn qutrit_commutant_is_two_dimensional() {
        let povm = fixtures::qutrit_povm();
        assert_eq!(complex_commutant_dimension(&povm), 2);
        let basis = commutant_basis(&povm).unwrap();
        assert_eq!(basis.dimension(), 2);
        // span{P, |2><2|} == span{|0><0|+|1><1|, |2><2|}
        let p = fixtures::qutrit_projector().into_matrix();
        let q = ket_bra(&basis_vector(3, 2));
        for x in &basis.basis {
            let a = (x * &p).trace().re / 2.0;
            let b = (x * &q).trace().re;
            assert!((x - &p * C64::from(a) - &q * C64::from(b)).norm() < 1e-10);
        }
    }

    #[test]
    fn commutant_basis_invariants() {
        let povm = fixtures::qutrit_povm();
        let basis = commutant_basis(&povm).unwrap();
        for (i, x) in basis.basis.iter().enumerate() {
            assert!(numerics::hermitian_residual(x) < 1e-12);
            for e in povm.elements() {
                assert!(commutator(x, e).norm() < 1e-9);
            }
            for (j, y) in basis.basis.iter().enumerate() {
                let ip = (x.adjoint() * y).trace().re;
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((ip - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn trine_and_sic_commutants_are_trivial() {
        for povm in [fixtures::trine_povm(), fixtures::sic_povm()] {
            assert_eq!(complex_commutant_dimension(&povm), 1);
            assert_eq!(commutant_basis(&povm).unwrap().dimension(), 1);
            let verdict = find_commuting_projector(&povm).unwrap();
            assert!(!verdict.realizable());
            assert_eq!(verdict.commutant_dimension, 1);
        }
    }

    #[test]
    fn qutrit_projector_found() {
        let povm = fixtures::qutrit_povm();
        let verdict = find_commuting_projector(&povm).unwrap();
        let p = verdict.projector.expect("realizable");
        let block = fixtures::qutrit_projector().into_matrix();
        let corner = ket_bra(&basis_vector(3, 2));
        assert!((p.matrix() - &block).norm() < 1e-9 || (p.matrix() - &corner).norm() < 1e-9);
        assert!(check_condition(&povm, &p).unwrap());
    }

    #[test]
    fn projective_povm_is_realizable() {
        let e0 = ket_bra(&basis_vector(2, 0));
        let e1 = ket_bra(&basis_vector(2, 1));
        let povm = validate_povm(vec![e0, e1]).unwrap();
        let p = find_commuting_projector(&povm).unwrap().projector.unwrap();
        assert_eq!(p.rank(), 1);
        assert!(p.matrix()[(0, 1)].norm() < 1e-12);
    }

    #[test]
    fn condition_examples() {
        let povm = fixtures::qutrit_povm();
        assert!(check_condition(&povm, &fixtures::qutrit_projector()).unwrap());
        let full = Projector::new(identity(3)).unwrap();
        assert!(!check_condition(&povm, &full).unwrap());
        let zero_one = Projector::new(ket_bra(&basis_vector(3, 0))).unwrap();
        assert!(!check_condition(&povm, &zero_one).unwrap());
        let wrong_dim = Projector::new(ket_bra(&basis_vector(2, 0))).unwrap();
        assert!(check_condition(&povm, &wrong_dim).is_err());
    }

    #[test]
    fn support_intersection_examples() {
        let ud = fixtures::ud_fixture(0.5, 0.5);
        let v = support_intersection(&ud.rho1, &ud.rho2).unwrap();
        assert_eq!(v.len(), 1);
        assert!((&v[0] - basis_vector(3, 1)).norm() < 1e-12);

        let mixed = QuantumState::Mixed(identity(3) / C64::from(3.0));
        assert_eq!(support_intersection(&mixed, &mixed).unwrap().len(), 3);

        let a = QuantumState::Pure(basis_vector(3, 0));
        let b = QuantumState::Pure(basis_vector(3, 1));
        assert!(support_intersection(&a, &b).unwrap().is_empty());
    }
}
