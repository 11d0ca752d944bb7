//! Named POVMs and random instance generators used by the demos, the CLI and
//! the test suites.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::numerics::{
    basis_vector, hermitian_eig, identity, ket_bra, ComplexMatrix, ComplexVector, C64,
};
use crate::quantum::{validate_povm, Povm, Projector, QuantumState};

fn vector(entries: &[C64]) -> ComplexVector {
    ComplexVector::from_column_slice(entries)
}

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// The qutrit POVM `{E_0, E_1, E_2}` with
/// `E_0 = 2/3 |psi_0><psi_0|`, `E_1 = 5/14 |psi_1><psi_1|`, `E_2 = I - E_0 - E_1`,
/// `psi_0 = (|0> + |1>)/sqrt2`, `psi_1 = (|0> + 2|1>)/sqrt5`.
pub fn qutrit_povm() -> Povm {
    let e0 = ket_bra(&qutrit_psi0()) * re(2.0 / 3.0);
    let e1 = ket_bra(&qutrit_psi1()) * re(5.0 / 14.0);
    let e2 = identity(3) - &e0 - &e1;
    validate_povm(vec![e0, e1, e2]).expect("qutrit fixture is a POVM")
}

pub fn qutrit_psi0() -> ComplexVector {
    vector(&[re(1.0), re(1.0), re(0.0)]) / re(2f64.sqrt())
}

pub fn qutrit_psi1() -> ComplexVector {
    vector(&[re(1.0), re(2.0), re(0.0)]) / re(5f64.sqrt())
}

/// First-stage projector `|0><0| + |1><1|` of the qutrit protocol.
pub fn qutrit_projector() -> Projector {
    Projector::from_orthonormal(3, &[basis_vector(3, 0), basis_vector(3, 1)])
        .expect("valid projector")
}

/// `(|0> + |1> + |2>)/sqrt3`
pub fn qutrit_phi0() -> ComplexVector {
    vector(&[re(1.0), re(1.0), re(1.0)]) / re(3f64.sqrt())
}

/// Qubit trine: `(2/3)|t_k><t_k|` with Bloch angles 0, 120 and 240 degrees
/// in the x-z plane.
pub fn trine_povm() -> Povm {
    let elements = (0..3)
        .map(|k| {
            let angle = 2.0 * PI * k as f64 / 3.0;
            let t = vector(&[re((angle / 2.0).cos()), re((angle / 2.0).sin())]);
            ket_bra(&t) * re(2.0 / 3.0)
        })
        .collect();
    validate_povm(elements).expect("trine is a POVM")
}

/// Qubit SIC POVM: four tetrahedral rank-one effects `|s_k><s_k|/2`.
pub fn sic_povm() -> Povm {
    let s = 2f64.sqrt();
    let bloch = [
        [0.0, 0.0, 1.0],
        [2.0 * s / 3.0, 0.0, -1.0 / 3.0],
        [-s / 3.0, (2.0f64 / 3.0).sqrt(), -1.0 / 3.0],
        [-s / 3.0, -(2.0f64 / 3.0).sqrt(), -1.0 / 3.0],
    ];
    let elements = bloch
        .iter()
        .map(|n| {
            // (I + n.sigma) / 4
            let m = ComplexMatrix::from_row_slice(
                2,
                2,
                &[
                    re(1.0 + n[2]),
                    C64::new(n[0], -n[1]),
                    C64::new(n[0], n[1]),
                    re(1.0 - n[2]),
                ],
            );
            m * re(0.25)
        })
        .collect();
    validate_povm(elements).expect("SIC is a POVM")
}

/// Unambiguous-discrimination instance on a qutrit.
#[derive(Debug, Clone)]
pub struct UdFixture {
    pub rho1: QuantumState,
    pub rho2: QuantumState,
    /// `{E_0 (inconclusive), E_1 (rho1), E_2 (rho2)}`
    pub povm: Povm,
}

/// `rho1` uniform on span{|0>,|1>}, `rho2` uniform on span{|1>,|2>},
/// `E_1 = a|0><0|`, `E_2 = b|2><2|`, `E_0 = I - E_1 - E_2`.
pub fn ud_fixture(a: f64, b: f64) -> UdFixture {
    let uniform = |i: usize, j: usize| {
        QuantumState::Mixed((ket_bra(&basis_vector(3, i)) + ket_bra(&basis_vector(3, j))) * re(0.5))
    };
    let e1 = ket_bra(&basis_vector(3, 0)) * re(a);
    let e2 = ket_bra(&basis_vector(3, 2)) * re(b);
    let e0 = identity(3) - &e1 - &e2;
    let povm = validate_povm(vec![e0, e1, e2])
        .and_then(|p| p.with_labels(vec!["inconclusive".into(), "rho1".into(), "rho2".into()]))
        .expect("UD fixture is a POVM");
    UdFixture {
        rho1: uniform(0, 1),
        rho2: uniform(1, 2),
        povm,
    }
}

fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    DMatrix::from_fn(rows, cols, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// Haar-random unitary via QR of a Ginibre matrix.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    let qr = ginibre(dim, dim, rng).qr();
    let (mut q, r) = qr.unpack();
    for k in 0..dim {
        let d = r[(k, k)];
        if d.norm() > 0.0 {
            let phase = d / d.norm();
            for row in 0..dim {
                q[(row, k)] *= phase;
            }
        }
    }
    q
}

pub fn random_pure_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> QuantumState {
    let v: ComplexVector = ginibre(dim, 1, rng).column(0).into_owned();
    QuantumState::Pure(&v / re(v.norm()))
}

/// Random density matrix of random rank.
pub fn random_mixed_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> QuantumState {
    let rank = rng.gen_range(1..=dim);
    let g = ginibre(dim, rank, rng);
    let rho = &g * g.adjoint();
    let tr = rho.trace().re;
    let rho = rho / re(tr);
    QuantumState::Mixed(hermitize(rho))
}

fn hermitize(a: ComplexMatrix) -> ComplexMatrix {
    (&a + a.adjoint()) * re(0.5)
}

/// Random POVM with `m` elements of random ranks, built as
/// `E_k = S^{-1/2} A_k S^{-1/2}` with `A_k = G_k G_k^dag`, `S = sum A_k`.
pub fn random_povm<R: Rng + ?Sized>(dim: usize, m: usize, rng: &mut R) -> Povm {
    assert!(m >= 1 && dim >= 1);
    let mut ranks: Vec<usize> = (0..m).map(|_| rng.gen_range(1..=dim)).collect();
    // The normalizer S must be invertible.
    if ranks.iter().sum::<usize>() < dim {
        ranks[m - 1] = dim;
    }
    let raw: Vec<ComplexMatrix> = ranks
        .iter()
        .map(|&rank| {
            let g = ginibre(dim, rank, rng);
            &g * g.adjoint()
        })
        .collect();
    let total = raw
        .iter()
        .fold(ComplexMatrix::zeros(dim, dim), |acc, a| acc + a);
    let eig = hermitian_eig(&hermitize(total)).expect("Hermitian");
    let mut inv_sqrt = ComplexMatrix::zeros(dim, dim);
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvector(k);
        inv_sqrt += ket_bra(&v) * re(1.0 / l.sqrt());
    }
    let elements = raw
        .iter()
        .map(|a| hermitize(&inv_sqrt * a * &inv_sqrt))
        .collect();
    validate_povm(elements).expect("normalized construction is a POVM")
}

/// Direct sum of two random `m`-outcome POVMs on `C^d1 (+) C^d2`, conjugated
/// by a Haar unitary. Returns the POVM and the rotated block projector.
pub fn random_direct_sum_povm<R: Rng + ?Sized>(
    d1: usize,
    d2: usize,
    m: usize,
    rng: &mut R,
) -> (Povm, Projector) {
    let first = random_povm(d1, m, rng);
    let second = random_povm(d2, m, rng);
    let dim = d1 + d2;
    let u = random_unitary(dim, rng);
    let elements = first
        .elements()
        .iter()
        .zip(second.elements())
        .map(|(a, b)| {
            let mut block = ComplexMatrix::zeros(dim, dim);
            block.view_mut((0, 0), (d1, d1)).copy_from(a);
            block.view_mut((d1, d1), (d2, d2)).copy_from(b);
            hermitize(&u * block * u.adjoint())
        })
        .collect();
    let mut p = ComplexMatrix::zeros(dim, dim);
    for k in 0..d1 {
        p[(k, k)] = re(1.0);
    }
    let p = hermitize(&u * p * u.adjoint());
    let povm = validate_povm(elements).expect("direct sum is a POVM");
    (povm, Projector::new(p).expect("rotated block projector"))
}

/// Random realizable instance with `dim` in `3..=6` and `m` in `2..=5`.
pub fn random_realizable_instance<R: Rng + ?Sized>(rng: &mut R) -> (Povm, Projector) {
    let dim = rng.gen_range(3..=6);
    let d1 = rng.gen_range(1..dim);
    let m = rng.gen_range(2..=5);
    random_direct_sum_povm(d1, dim - d1, m, rng)
}
