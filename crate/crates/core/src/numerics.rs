//! Dense complex linear algebra on small matrices.
//!
//! Everything downstream works with [`ComplexMatrix`] (a `nalgebra` dynamic
//! matrix of `Complex64`). Decompositions are sorted in descending order and
//! every returned vector is put into a canonical phase: the entry of largest
//! modulus (lowest index among ties) is made real and positive. This makes
//! compilation bit-reproducible.
//!
//! All thresholds are relative and scaled by `max(1, norm)`.
//!
//! Both decompositions are Jacobi methods: cyclic two-sided rotations for
//! Hermitian eigenproblems and one-sided (Hestenes) rotations for the SVD.
//! For the tiny dimensions handled here they are fast and keep singular
//! vectors orthogonal to working precision even for tiny singular values.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;
pub type ComplexVector = DVector<C64>;

/// Relative threshold for numeric rank and kernel extraction.
pub const RANK_TOL: f64 = 1e-10;
/// Slack allowed below zero when testing positive semidefiniteness.
pub const PSD_TOL: f64 = 1e-10;
/// Hermiticity tolerance on inputs to the eigensolver.
pub const HERMITIAN_TOL: f64 = 1e-10;

// Entries whose modulus is within this relative distance of the maximum tie
// for the phase convention.
const PHASE_TIE: f64 = 1e-12;

/// Eigendecomposition of a Hermitian matrix, eigenvalues descending.
#[derive(Debug, Clone)]
pub struct EigDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Columns are the orthonormal eigenvectors.
    pub eigenvectors: ComplexMatrix,
}

impl EigDecomposition {
    pub fn eigenvector(&self, k: usize) -> ComplexVector {
        self.eigenvectors.column(k).into_owned()
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        let d = self.eigenvectors.nrows();
        let mut out = ComplexMatrix::zeros(d, d);
        for (k, &lambda) in self.eigenvalues.iter().enumerate() {
            let v = self.eigenvectors.column(k);
            out += (v * v.adjoint()) * C64::from(lambda);
        }
        out
    }
}

/// Singular value decomposition `M = sum_k s_k u_k v_k^dag`, values descending.
#[derive(Debug, Clone)]
pub struct SvdDecomposition {
    pub singular_values: Vec<f64>,
    /// Left singular vectors as columns.
    pub left_vectors: ComplexMatrix,
    /// Right singular vectors as columns.
    pub right_vectors: ComplexMatrix,
}

impl SvdDecomposition {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.left_vectors.nrows(), self.right_vectors.nrows());
        for (k, &s) in self.singular_values.iter().enumerate() {
            let u = self.left_vectors.column(k);
            let v = self.right_vectors.column(k);
            out += (u * v.adjoint()) * C64::from(s);
        }
        out
    }
}

#[inline]
pub fn scale(norm: f64) -> f64 {
    norm.max(1.0)
}

pub fn identity(dim: usize) -> ComplexMatrix {
    ComplexMatrix::identity(dim, dim)
}

/// `|u><v|`
pub fn outer(u: &ComplexVector, v: &ComplexVector) -> ComplexMatrix {
    u * v.adjoint()
}

/// Rank-one projector onto the (assumed normalized) vector.
pub fn ket_bra(v: &ComplexVector) -> ComplexMatrix {
    outer(v, v)
}

pub fn basis_vector(dim: usize, k: usize) -> ComplexVector {
    let mut v = ComplexVector::zeros(dim);
    v[k] = C64::new(1.0, 0.0);
    v
}

pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b - b * a
}

pub fn trace_re(a: &ComplexMatrix) -> f64 {
    a.trace().re
}

pub fn is_finite(a: &ComplexMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn hermitian_residual(a: &ComplexMatrix) -> f64 {
    (a - a.adjoint()).norm()
}

fn ensure_square(a: &ComplexMatrix) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::NotSquare(a.nrows(), a.ncols()));
    }
    Ok(())
}

fn ensure_finite(a: &ComplexMatrix) -> Result<()> {
    if !is_finite(a) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// Rotate `v` so its largest-modulus entry (lowest index among ties) is real positive.
pub fn canonical_phase(v: &mut ComplexVector) {
    let max = v.iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
    if max == 0.0 {
        return;
    }
    let pivot = v
        .iter()
        .position(|z| z.norm() >= max * (1.0 - PHASE_TIE))
        .unwrap_or(0);
    let z = v[pivot];
    let phase = z.conj() / z.norm();
    for x in v.iter_mut() {
        *x *= phase;
    }
    v[pivot] = C64::new(v[pivot].norm(), 0.0);
}

/// Eigendecomposition of a Hermitian matrix.
pub fn hermitian_eig(a: &ComplexMatrix) -> Result<EigDecomposition> {
    ensure_square(a)?;
    ensure_finite(a)?;
    let asym = hermitian_residual(a);
    if asym > HERMITIAN_TOL * scale(a.norm()) {
        return Err(Error::NotHermitian(asym));
    }
    let dim = a.nrows();
    if dim == 0 {
        return Ok(EigDecomposition {
            eigenvalues: vec![],
            eigenvectors: ComplexMatrix::zeros(0, 0),
        });
    }
    let sym = (a + a.adjoint()) * C64::from(0.5);
    let (values, vectors) = jacobi_eigen(sym)?;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));

    let mut eigenvectors = ComplexMatrix::zeros(dim, dim);
    let mut eigenvalues = Vec::with_capacity(dim);
    for (dst, &src) in order.iter().enumerate() {
        let mut v = vectors.column(src).into_owned();
        canonical_phase(&mut v);
        eigenvectors.set_column(dst, &v);
        eigenvalues.push(values[src]);
    }
    Ok(EigDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Full-rank-count SVD. For an `r x c` input the decomposition carries
/// `min(r, c)` triples; callers that need a complete left basis pad first
/// (see [`kernel_basis`]).
pub fn svd(m: &ComplexMatrix) -> Result<SvdDecomposition> {
    ensure_finite(m)?;
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return Ok(SvdDecomposition {
            singular_values: vec![],
            left_vectors: ComplexMatrix::zeros(rows, 0),
            right_vectors: ComplexMatrix::zeros(cols, 0),
        });
    }
    let (values, u, v) = if rows >= cols {
        jacobi_svd(m.clone())?
    } else {
        let (values, u, v) = jacobi_svd(m.adjoint())?;
        (values, v, u)
    };

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));

    let mut left = ComplexMatrix::zeros(rows, k);
    let mut right = ComplexMatrix::zeros(cols, k);
    let mut singular_values = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        let mut rv = v.column(src).into_owned();
        let before = rv.clone();
        canonical_phase(&mut rv);
        // Same phase on u keeps u s v^dag unchanged.
        let phase = phase_between(&before, &rv);
        let lv: ComplexVector = u.column(src).into_owned() * phase;
        left.set_column(dst, &lv);
        right.set_column(dst, &rv);
        singular_values.push(values[src]);
    }
    Ok(SvdDecomposition {
        singular_values,
        left_vectors: left,
        right_vectors: right,
    })
}

const JACOBI_SWEEPS: usize = 100;

// Unitary G = [[c, s], [-s e^{-i phi}, c e^{-i phi}]] on coordinates (p, q),
// chosen so that the (p, q) entry of G^dag A G vanishes.
struct Rotation {
    c: f64,
    s: f64,
    phase: C64,
}

impl Rotation {
    // Symmetric Schur rotation for the 2x2 Hermitian block
    // [[app, apq], [conj(apq), aqq]].
    fn annihilating(app: f64, aqq: f64, apq: C64) -> Rotation {
        let mag = apq.norm();
        let phase = (apq / mag).conj();
        let theta = (aqq - app) / (2.0 * mag);
        let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
        let c = 1.0 / (t * t + 1.0).sqrt();
        Rotation { c, s: t * c, phase }
    }

    // Right-multiply columns p and q of `a` by G.
    fn apply_columns(&self, a: &mut ComplexMatrix, p: usize, q: usize) {
        for k in 0..a.nrows() {
            let x = a[(k, p)];
            let y = a[(k, q)] * self.phase;
            a[(k, p)] = x * self.c - y * self.s;
            a[(k, q)] = x * self.s + y * self.c;
        }
    }

    // Left-multiply rows p and q of `a` by G^dag.
    fn apply_rows(&self, a: &mut ComplexMatrix, p: usize, q: usize) {
        let conj = self.phase.conj();
        for k in 0..a.ncols() {
            let x = a[(p, k)];
            let y = a[(q, k)] * conj;
            a[(p, k)] = x * self.c - y * self.s;
            a[(q, k)] = x * self.s + y * self.c;
        }
    }
}

fn off_diagonal_norm(a: &ComplexMatrix) -> f64 {
    let n = a.nrows();
    let mut total = 0.0;
    for p in 0..n {
        for q in 0..n {
            if p != q {
                total += a[(p, q)].norm_sqr();
            }
        }
    }
    total.sqrt()
}

/// Cyclic Jacobi on a Hermitian matrix; returns unsorted eigenpairs.
fn jacobi_eigen(mut a: ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    let n = a.nrows();
    let mut v = identity(n);
    let target = f64::EPSILON * a.norm();
    let mut converged = false;
    for _ in 0..JACOBI_SWEEPS {
        if off_diagonal_norm(&a) <= target {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.norm() <= f64::MIN_POSITIVE {
                    continue;
                }
                let rot = Rotation::annihilating(a[(p, p)].re, a[(q, q)].re, apq);
                rot.apply_columns(&mut a, p, q);
                rot.apply_rows(&mut a, p, q);
                rot.apply_columns(&mut v, p, q);
                a[(p, q)] = C64::new(0.0, 0.0);
                a[(q, p)] = C64::new(0.0, 0.0);
                a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
            }
        }
    }
    if !converged && off_diagonal_norm(&a) > target {
        return Err(Error::NumericalFailure(
            "Jacobi eigensolver did not converge".into(),
        ));
    }
    Ok(((0..n).map(|k| a[(k, k)].re).collect(), v))
}

/// One-sided Jacobi SVD of a matrix with `rows >= cols`. Returns unsorted
/// `(sigma, U, V)` with `U` of shape `rows x cols`.
fn jacobi_svd(mut a: ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix, ComplexMatrix)> {
    let (rows, cols) = a.shape();
    let mut v = identity(cols);
    let mut converged = false;
    for _ in 0..JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dotc(&a.column(q));
                if gamma.norm() <= f64::EPSILON * (alpha * beta).sqrt()
                    || gamma.norm() <= f64::MIN_POSITIVE
                {
                    continue;
                }
                rotated = true;
                let rot = Rotation::annihilating(alpha, beta, gamma);
                rot.apply_columns(&mut a, p, q);
                rot.apply_columns(&mut v, p, q);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NumericalFailure(
            "Jacobi SVD did not converge".into(),
        ));
    }

    let sigma: Vec<f64> = (0..cols).map(|k| a.column(k).norm()).collect();
    let mut u = ComplexMatrix::zeros(rows, cols);
    let mut missing = Vec::new();
    for (k, &s) in sigma.iter().enumerate() {
        if s > f64::MIN_POSITIVE * 1e10 {
            let col = a.column(k) / C64::new(s, 0.0);
            u.set_column(k, &col);
        } else {
            missing.push(k);
        }
    }
    // Complete left vectors of exactly-zero columns to an orthonormal set.
    if !missing.is_empty() {
        let mut basis: Vec<ComplexVector> = (0..cols)
            .filter(|k| !missing.contains(k))
            .map(|k| u.column(k).into_owned())
            .collect();
        let mut slots = missing.into_iter();
        let mut next = slots.next();
        for e in 0..rows {
            let Some(slot) = next else { break };
            let mut w = basis_vector(rows, e);
            for _ in 0..2 {
                for b in &basis {
                    let c = b.dotc(&w);
                    w -= b * c;
                }
            }
            let norm = w.norm();
            if norm > 1e-6 {
                let w = w / C64::new(norm, 0.0);
                u.set_column(slot, &w);
                basis.push(w);
                next = slots.next();
            }
        }
    }
    Ok((sigma, u, v))
}

// Unit-modulus c with after = c * before.
fn phase_between(before: &ComplexVector, after: &ComplexVector) -> C64 {
    let overlap = before.dotc(after);
    if overlap.norm() == 0.0 {
        C64::new(1.0, 0.0)
    } else {
        overlap / overlap.norm()
    }
}

/// Number of singular values above `tol_rel * max(1, sv[0])`.
pub fn numeric_rank(sv: &[f64], tol_rel: f64) -> usize {
    let Some(&top) = sv.first() else {
        return 0;
    };
    let threshold = tol_rel * scale(top);
    sv.iter().filter(|&&s| s > threshold).count()
}

/// Orthonormal basis of `ker(M^dag)`, i.e. the orthogonal complement of `range(M)`.
pub fn kernel_basis(m: &ComplexMatrix, tol_rel: f64) -> Result<Vec<ComplexVector>> {
    let (rows, cols) = m.shape();
    if rows == 0 {
        return Ok(vec![]);
    }
    // Pad with zero columns so the SVD yields a complete left basis.
    let padded = if cols < rows {
        let mut p = ComplexMatrix::zeros(rows, rows);
        p.view_mut((0, 0), (rows, cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let dec = svd(&padded)?;
    let rank = numeric_rank(&dec.singular_values, tol_rel);
    Ok((rank..rows)
        .map(|k| {
            let mut v = dec.left_vectors.column(k).into_owned();
            canonical_phase(&mut v);
            v
        })
        .collect())
}

/// Orthonormal basis of `range(M)` (left singular vectors above threshold).
pub fn range_basis(m: &ComplexMatrix, tol_rel: f64) -> Result<Vec<ComplexVector>> {
    let dec = svd(m)?;
    let rank = numeric_rank(&dec.singular_values, tol_rel);
    Ok((0..rank)
        .map(|k| dec.left_vectors.column(k).into_owned())
        .collect())
}

pub fn matrix_rank(m: &ComplexMatrix, tol_rel: f64) -> Result<usize> {
    let dec = svd(m)?;
    Ok(numeric_rank(&dec.singular_values, tol_rel))
}

/// Minimum eigenvalue test: `min eig >= -tol * max(1, ||A||_F)`.
pub fn is_psd(a: &ComplexMatrix, tol: f64) -> Result<bool> {
    Ok(min_eigenvalue(a)? >= -tol * scale(a.norm()))
}

pub fn min_eigenvalue(a: &ComplexMatrix) -> Result<f64> {
    let eig = hermitian_eig(a)?;
    Ok(eig.eigenvalues.last().copied().unwrap_or(0.0))
}

/// Projector onto the span of an orthonormal family.
pub fn span_projector(dim: usize, vectors: &[ComplexVector]) -> ComplexMatrix {
    let mut p = ComplexMatrix::zeros(dim, dim);
    for v in vectors {
        p += ket_bra(v);
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn real(rows: usize, cols: usize, data: &[f64]) -> ComplexMatrix {
        ComplexMatrix::from_row_iterator(rows, cols, data.iter().map(|&x| C64::new(x, 0.0)))
    }

    fn vec_r(data: &[f64]) -> ComplexVector {
        ComplexVector::from_iterator(data.len(), data.iter().map(|&x| C64::new(x, 0.0)))
    }

    #[test]
    fn eig_identity() {
        let eig = hermitian_eig(&identity(2)).unwrap();
        assert_eq!(eig.eigenvalues.len(), 2);
        assert!(eig.eigenvalues.iter().all(|&l| close(l, 1.0, 1e-14)));
    }

    #[test]
    fn eig_pauli_x() {
        let x = real(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let eig = hermitian_eig(&x).unwrap();
        assert!(close(eig.eigenvalues[0], 1.0, 1e-14));
        assert!(close(eig.eigenvalues[1], -1.0, 1e-14));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v0 = eig.eigenvector(0);
        assert!((v0 - vec_r(&[s, s])).norm() < 1e-12);
        // second eigenvector: (1,-1)/sqrt2 up to the phase convention
        let v1 = eig.eigenvector(1);
        assert!(close(v1[0].norm(), s, 1e-12) && close(v1[1].norm(), s, 1e-12));
        assert!((v1[0] + v1[1]).norm() < 1e-12);
    }

    #[test]
    fn eig_rank_one_qutrit_element() {
        let psi = vec_r(&[1.0, 2.0, 0.0]) / C64::from(5f64.sqrt());
        let e1 = ket_bra(&psi) * C64::from(5.0 / 14.0);
        let eig = hermitian_eig(&e1).unwrap();
        assert!(close(eig.eigenvalues[0], 5.0 / 14.0, 1e-14));
        assert!(eig.eigenvalues[1].abs() < 1e-14);
        assert!((eig.eigenvector(0) - psi).norm() < 1e-12);
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let a = real(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(hermitian_eig(&a), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn svd_small_examples() {
        let d = real(2, 2, &[3.0, 0.0, 0.0, 0.0]);
        assert_eq!(svd(&d).unwrap().singular_values, vec![3.0, 0.0]);

        let p = real(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let sv = svd(&p).unwrap().singular_values;
        assert!(close(sv[0], 1.0, 1e-14) && close(sv[1], 1.0, 1e-14) && sv[2].abs() < 1e-14);

        let h = real(2, 2, &[1.0, 0.0, 0.0, 0.5]);
        let sv = svd(&h).unwrap().singular_values;
        assert!(close(sv[0], 1.0, 1e-14) && close(sv[1], 0.5, 1e-14));
    }

    #[test]
    fn rank_threshold() {
        assert_eq!(numeric_rank(&[1.0, 1e-13, 0.0], 1e-10), 1);
        assert_eq!(numeric_rank(&[1.0, 0.5, 1e-13], 1e-10), 2);
        assert_eq!(numeric_rank(&[0.0, 0.0], 1e-10), 0);
        assert_eq!(numeric_rank(&[], 1e-10), 0);
    }

    #[test]
    fn kernel_of_rank_two_projector() {
        let p = real(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let ker = kernel_basis(&p, RANK_TOL).unwrap();
        assert_eq!(ker.len(), 1);
        assert!((&ker[0] - basis_vector(3, 2)).norm() < 1e-12);
    }

    #[test]
    fn kernel_of_invertible_is_empty() {
        let a = real(2, 2, &[2.0, 1.0, 0.0, 1.0]);
        assert!(kernel_basis(&a, RANK_TOL).unwrap().is_empty());
    }

    #[test]
    fn kernel_of_rank_one_qutrit() {
        let psi = vec_r(&[1.0, 1.0, 1.0]) / C64::from(3f64.sqrt());
        let m = ket_bra(&psi);
        let ker = kernel_basis(&m, RANK_TOL).unwrap();
        assert_eq!(ker.len(), 2);
        for v in &ker {
            assert!(psi.dotc(v).norm() < 1e-12);
            assert!(close(v.norm(), 1.0, 1e-12));
        }
        assert!(ker[0].dotc(&ker[1]).norm() < 1e-12);
    }

    #[test]
    fn kernel_of_tall_matrix() {
        // 3x1 column: kernel of M^dag is the 2-dim complement of the column.
        let m = real(3, 1, &[1.0, 0.0, 0.0]);
        let ker = kernel_basis(&m, RANK_TOL).unwrap();
        assert_eq!(ker.len(), 2);
        for v in &ker {
            assert!((m.adjoint() * v).norm() < 1e-12);
        }
    }

    #[test]
    fn psd_checks() {
        assert!(is_psd(&identity(3), PSD_TOL).unwrap());
        assert!(!is_psd(&real(2, 2, &[1.0, 0.0, 0.0, -0.1]), PSD_TOL).unwrap());
    }

    #[test]
    fn canonical_phase_makes_pivot_real_positive() {
        let mut v = ComplexVector::from_vec(vec![C64::new(0.0, 0.6), C64::new(0.0, -0.8)]);
        canonical_phase(&mut v);
        assert!(close(v[1].re, 0.8, 1e-15) && v[1].im == 0.0);
        assert!(close(v[0].re, -0.6, 1e-15));
    }
}
