//! Compilation of a realizable POVM into a binary tree of projective
//! measurements.
//!
//! Given a projector `P` commuting with every element, each element splits
//! into `E_i0 = P E_i P` and `E_i1 = (I-P) E_i (I-P)`. After the root
//! measurement `{P, I-P}` selects a branch `a`, every spectral item
//! `lambda |phi><phi|` of `E_ia` (for all but the last element) is realized
//! by one rank-one measurement `{|psi><psi|, I - |psi><psi|}` whose hit
//! outcome reports `i`. The final miss reports the last element, which
//! receives the residual probability.
//!
//! With `M` the operator accumulated so far, the measured direction is
//! `psi = sqrt(lambda/mu) theta + sqrt(1 - lambda/mu) xi`, where
//! `M^dag theta = sqrt(mu) phi` ([`lemma1_f`]) and `xi` spans part of
//! `ker(M^dag)`. Then `M^dag |psi><psi| M = lambda |phi><phi|`, so each item
//! contributes exactly its share to the outcome statistics.

use crate::error::{Error, Result};
use crate::numerics::{
    self, basis_vector, hermitian_eig, identity, kernel_basis, ket_bra, scale, ComplexMatrix,
    ComplexVector, C64, RANK_TOL,
};
use crate::quantum::{validate_povm, Povm, Projector, QuantumState};
use crate::realizability::{check_condition, COMMUTATION_TOL};
use crate::tree::{BinaryStep, ProtocolNode, ProtocolTree};

/// Tolerance on the positivity of `M^dag M - lambda |phi><phi|`.
pub const LEMMA_PSD_TOL: f64 = 1e-9;
/// Maximum distance of `phi` from `range(M^dag)`.
pub const LEMMA_RANGE_TOL: f64 = 1e-9;
/// Roundoff below `lambda` for which `mu` is clamped up to `lambda`.
pub const MU_CLAMP_TOL: f64 = 1e-10;

/// One rank-one term `lambda |phi><phi|` of `E_ia`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralItem {
    /// 0-based POVM element index.
    pub outcome: usize,
    pub branch: u8,
    /// 0-based position within the `(outcome, branch)` block, by descending weight.
    pub index: usize,
    pub weight: f64,
    pub vector: ComplexVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaFResult {
    pub mu: f64,
    pub theta: ComplexVector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompileOptions {
    /// Start directly on the `I - P` branch without measuring `{P, I-P}`.
    pub skip_stage1: bool,
    /// Choose the residual (last) element to minimize the depth bound.
    pub reorder: bool,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions {
            skip_stage1: false,
            reorder: true,
        }
    }
}

/// `Q E Q` for the branch projector `Q` (`P` for branch 0, `I - P` for 1).
pub fn compress(e: &ComplexMatrix, p: &Projector, branch: u8) -> ComplexMatrix {
    let q = branch_projector(p, branch);
    let c = &q * e * &q;
    (&c + c.adjoint()) * C64::from(0.5)
}

fn branch_projector(p: &Projector, branch: u8) -> ComplexMatrix {
    match branch {
        0 => p.matrix().clone(),
        _ => identity(p.dim()) - p.matrix(),
    }
}

fn item_threshold(block: &ComplexMatrix) -> f64 {
    RANK_TOL * scale(block.norm())
}

/// Spectral items of `E_i` on both branches: branch 0 first, each block by
/// descending weight. Items at or below the rank threshold are dropped.
pub fn spectral_items(
    e: &ComplexMatrix,
    p: &Projector,
    outcome: usize,
) -> Result<Vec<SpectralItem>> {
    if e.shape() != p.matrix().shape() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: e.nrows(),
        });
    }
    if numerics::commutator(e, p.matrix()).norm() > COMMUTATION_TOL * scale(e.norm()) {
        return Err(Error::NotCommuting(outcome));
    }
    let mut items = Vec::new();
    for branch in [0u8, 1] {
        items.extend(branch_items(e, p, outcome, branch)?);
    }
    Ok(items)
}

fn branch_items(
    e: &ComplexMatrix,
    p: &Projector,
    outcome: usize,
    branch: u8,
) -> Result<Vec<SpectralItem>> {
    let block = compress(e, p, branch);
    let threshold = item_threshold(&block);
    let eig = hermitian_eig(&block)?;
    Ok(eig
        .eigenvalues
        .iter()
        .enumerate()
        .take_while(|(_, &l)| l > threshold)
        .map(|(k, &weight)| SpectralItem {
            outcome,
            branch,
            index: k,
            weight,
            vector: eig.eigenvector(k),
        })
        .collect())
}

/// Number of spectral items of `E_ia`, i.e. its numeric rank.
pub fn branch_rank(e: &ComplexMatrix, p: &Projector, branch: u8) -> Result<usize> {
    let block = compress(e, p, branch);
    let threshold = item_threshold(&block);
    let eig = hermitian_eig(&block)?;
    Ok(eig.eigenvalues.iter().filter(|&&l| l > threshold).count())
}

/// For `M^dag M >= lambda |phi><phi|`, find a unit `theta` and `mu >= lambda`
/// with `M^dag theta = sqrt(mu) phi`.
///
/// Uses the pseudoinverse: `theta ~ (M^dag)^+ phi`, `mu = 1/||(M^dag)^+ phi||^2`,
/// equivalently `mu = 1 / <phi|(M^dag M)^+|phi>`.
pub fn lemma1_f(m: &ComplexMatrix, lambda: f64, phi: &ComplexVector) -> Result<LemmaFResult> {
    let dim = m.ncols();
    if phi.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: phi.len(),
        });
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::PreconditionViolated(lambda));
    }
    let gram = m.adjoint() * m;
    let gap = &gram - ket_bra(phi) * C64::from(lambda);
    let min = numerics::min_eigenvalue(&((&gap + gap.adjoint()) * C64::from(0.5)))?;
    if min < -LEMMA_PSD_TOL * scale(gram.norm()) {
        return Err(Error::PreconditionViolated(min));
    }

    let svd = numerics::svd(m)?;
    let rank = numerics::numeric_rank(&svd.singular_values, RANK_TOL);
    let mut theta = ComplexVector::zeros(m.nrows());
    let mut in_range = ComplexVector::zeros(dim);
    for k in 0..rank {
        let u = svd.left_vectors.column(k);
        let v = svd.right_vectors.column(k);
        let c = v.dotc(phi);
        theta += u * (c / C64::from(svd.singular_values[k]));
        in_range += v * c;
    }
    let outside = (phi - in_range).norm();
    if outside > LEMMA_RANGE_TOL {
        return Err(Error::PhiOutsideRange(outside));
    }
    let norm = theta.norm();
    if norm == 0.0 {
        return Err(Error::PhiOutsideRange(phi.norm()));
    }
    let mut mu = 1.0 / (norm * norm);
    if mu < lambda {
        if lambda - mu <= MU_CLAMP_TOL {
            mu = lambda;
        } else {
            return Err(Error::PreconditionViolated(mu - lambda));
        }
    }
    Ok(LemmaFResult {
        mu,
        theta: theta / C64::from(norm),
    })
}

/// Permutation of element indices whose last entry is the residual outcome.
///
/// The last element `k` minimizes `max_a sum_{i != k} rank(E_ia)` over the
/// branches that are compiled (only `a = 1` when stage 1 is skipped). Ties go
/// to the largest original index; the other elements keep their order.
pub fn reorder_last_element(povm: &Povm, p: &Projector, skip_stage1: bool) -> Result<Vec<usize>> {
    let m = povm.len();
    let branches: &[u8] = if skip_stage1 { &[1] } else { &[0, 1] };
    let mut ranks = vec![[0usize; 2]; m];
    for (k, e) in povm.elements().iter().enumerate() {
        for &a in branches {
            ranks[k][a as usize] = branch_rank(e, p, a)?;
        }
    }
    let totals: Vec<usize> = branches
        .iter()
        .map(|&a| ranks.iter().map(|r| r[a as usize]).sum())
        .collect();
    let cost = |k: usize| {
        branches
            .iter()
            .zip(&totals)
            .map(|(&a, t)| t - ranks[k][a as usize])
            .max()
            .unwrap_or(0)
    };
    let mut best = m - 1;
    for k in (0..m).rev() {
        if cost(k) < cost(best) {
            best = k;
        }
    }
    let mut order: Vec<usize> = (0..m).filter(|&k| k != best).collect();
    order.push(best);
    Ok(order)
}

/// Depth bound `max_a sum_{i != last} rank(E_ia) (+1 for stage 1)`.
pub fn depth_bound(
    povm: &Povm,
    p: &Projector,
    order: &[usize],
    skip_stage1: bool,
) -> Result<usize> {
    let branches: &[u8] = if skip_stage1 { &[1] } else { &[0, 1] };
    let (_, head) = order.split_last().ok_or(Error::EmptyPovm)?;
    let mut worst = 0;
    for &a in branches {
        let mut total = 0;
        for &k in head {
            total += branch_rank(povm.element(k), p, a)?;
        }
        worst = worst.max(total);
    }
    Ok(worst + usize::from(!skip_stage1))
}

/// Extend a POVM on `C^d` to `C^(d+1)` by zero-padding and appending the
/// projector onto the new basis vector, which is also returned as `P`.
pub fn embed_povm(povm: &Povm) -> (Povm, Projector) {
    let d = povm.dim();
    let mut elements: Vec<ComplexMatrix> = povm
        .elements()
        .iter()
        .map(|e| {
            let mut padded = ComplexMatrix::zeros(d + 1, d + 1);
            padded.view_mut((0, 0), (d, d)).copy_from(e);
            padded
        })
        .collect();
    let extra = ket_bra(&basis_vector(d + 1, d));
    elements.push(extra.clone());
    let mut labels = povm.labels().to_vec();
    labels.push("extra".into());
    let embedded = validate_povm(elements)
        .and_then(|p| p.with_labels(labels))
        .expect("zero-padded POVM plus the new corner is a POVM");
    let p = Projector::new(extra).expect("basis projector");
    (embedded, p)
}

/// Zero-pad a state on `C^d` into `C^(d+1)`, matching [`embed_povm`].
pub fn embed_state(state: &QuantumState) -> QuantumState {
    let d = state.dim();
    match state {
        QuantumState::Pure(v) => {
            let mut w = ComplexVector::zeros(d + 1);
            w.rows_mut(0, d).copy_from(v);
            QuantumState::Pure(w)
        }
        QuantumState::Mixed(rho) => {
            let mut r = ComplexMatrix::zeros(d + 1, d + 1);
            r.view_mut((0, 0), (d, d)).copy_from(rho);
            QuantumState::Mixed(r)
        }
    }
}

/// Compile with reordering enabled.
pub fn compile_tree(povm: &Povm, p: &Projector, skip_stage1: bool) -> Result<ProtocolTree> {
    compile(
        povm,
        p,
        CompileOptions {
            skip_stage1,
            reorder: true,
        },
    )
}

pub fn compile(povm: &Povm, p: &Projector, options: CompileOptions) -> Result<ProtocolTree> {
    if p.dim() != povm.dim() {
        return Err(Error::DimensionMismatch {
            expected: povm.dim(),
            got: p.dim(),
        });
    }
    if !check_condition(povm, p)? {
        return Err(Error::NotRealizable(
            "projector must commute with every element and satisfy 0 < rank < d".into(),
        ));
    }
    let order = if options.reorder {
        reorder_last_element(povm, p, options.skip_stage1)?
    } else {
        (0..povm.len()).collect()
    };
    let dim = povm.dim();
    let last = *order.last().expect("nonempty POVM");

    let (entry, root) = if options.skip_stage1 {
        let entry = branch_projector(p, 1);
        let root = compile_branch(povm, p, &order, 1, entry.clone())?;
        (entry, root)
    } else {
        let inside = compile_branch(povm, p, &order, 0, branch_projector(p, 0))?;
        let outside = compile_branch(povm, p, &order, 1, branch_projector(p, 1))?;
        let root = ProtocolNode::Stage1 {
            projector: p.matrix().clone(),
            accumulated: Some(identity(dim)),
            hit: Box::new(inside),
            miss: Box::new(outside),
        };
        (identity(dim), root)
    };
    debug_assert!(last < povm.len());

    Ok(ProtocolTree {
        dim,
        outcome_labels: povm.labels().to_vec(),
        element_order: order,
        skip_stage1: options.skip_stage1,
        entry,
        povm_digest: povm.digest(),
        root,
    })
}

struct ChainLink {
    step: BinaryStep,
    incoming: ComplexMatrix,
}

/// Chain of rank-one measurements for one branch, ending in the residual leaf.
fn compile_branch(
    povm: &Povm,
    p: &Projector,
    order: &[usize],
    branch: u8,
    start: ComplexMatrix,
) -> Result<ProtocolNode> {
    let dim = povm.dim();
    let (&last, head) = order.split_last().expect("nonempty order");
    let mut links = Vec::new();
    let mut m = start;
    for &outcome in head {
        for item in branch_items(povm.element(outcome), p, outcome, branch)? {
            let f = lemma1_f(&m, item.weight, &item.vector)?;
            let xi = kernel_basis(&m, RANK_TOL)?
                .into_iter()
                .next()
                .ok_or(Error::EmptyKernel {
                    outcome,
                    branch,
                    index: item.index,
                })?;
            let ratio = (item.weight / f.mu).clamp(0.0, 1.0);
            let psi = &f.theta * C64::from(ratio.sqrt()) + &xi * C64::from((1.0 - ratio).sqrt());
            let next = (identity(dim) - ket_bra(&psi)) * &m;
            links.push(ChainLink {
                step: BinaryStep {
                    outcome,
                    branch,
                    index: item.index,
                    lambda: item.weight,
                    mu: f.mu,
                    phi: item.vector,
                    theta: f.theta,
                    xi,
                    psi,
                },
                incoming: std::mem::replace(&mut m, next),
            });
        }
    }
    let mut node = ProtocolNode::Leaf {
        outcome: last,
        accumulated: Some(m),
    };
    for link in links.into_iter().rev() {
        let projector = ket_bra(&link.step.psi);
        let hit = ProtocolNode::Leaf {
            outcome: link.step.outcome,
            accumulated: Some(&projector * &link.incoming),
        };
        node = ProtocolNode::Binary {
            step: link.step,
            projector,
            accumulated: Some(link.incoming),
            hit: Box::new(hit),
            miss: Box::new(node),
        };
    }
    Ok(node)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::numerics::basis_vector;

    fn real_vec(x: &[f64]) -> ComplexVector {
        ComplexVector::from_iterator(x.len(), x.iter().map(|&v| C64::new(v, 0.0)))
    }

    fn same_ray(a: &ComplexVector, b: &ComplexVector) -> f64 {
        1.0 - a.dotc(b).norm()
    }

    #[test]
    fn spectral_items_of_e0() {
        let povm = fixtures::qutrit_povm();
        let p = fixtures::qutrit_projector();
        let items = spectral_items(povm.element(0), &p, 0).unwrap();
        assert_eq!(items.len(), 1);
        assert_eq!(items[0].branch, 0);
        assert!((items[0].weight - 2.0 / 3.0).abs() < 1e-14);
        assert!(same_ray(&items[0].vector, &fixtures::qutrit_psi0()) < 1e-14);
    }

    #[test]
    fn spectral_items_of_e2() {
        let povm = fixtures::qutrit_povm();
        let p = fixtures::qutrit_projector();
        let e2 = povm.element(2);
        let items = spectral_items(e2, &p, 2).unwrap();
        let outside: Vec<_> = items.iter().filter(|i| i.branch == 1).collect();
        assert_eq!(outside.len(), 1);
        assert!((outside[0].weight - 1.0).abs() < 1e-14);
        assert!(same_ray(&outside[0].vector, &basis_vector(3, 2)) < 1e-14);
        let inside_total: f64 = items
            .iter()
            .filter(|i| i.branch == 0)
            .map(|i| i.weight)
            .sum();
        let want = (p.matrix() * e2 * p.matrix()).trace().re;
        assert!((inside_total - want).abs() < 1e-13);
    }

    #[test]
    fn spectral_items_of_zero_and_noncommuting() {
        let p = fixtures::qutrit_projector();
        assert!(spectral_items(&ComplexMatrix::zeros(3, 3), &p, 0)
            .unwrap()
            .is_empty());
        let bad = ket_bra(&fixtures::qutrit_phi0());
        assert!(matches!(
            spectral_items(&bad, &p, 4),
            Err(Error::NotCommuting(4))
        ));
    }

    #[test]
    fn rank_one_step_with_projector() {
        let p = fixtures::qutrit_projector().into_matrix();
        let phi = fixtures::qutrit_psi0();
        let f = lemma1_f(&p, 1.0, &phi).unwrap();
        assert!((f.mu - 1.0).abs() < 1e-14);
        assert!(same_ray(&f.theta, &phi) < 1e-14);
        let f = lemma1_f(&p, 2.0 / 3.0, &phi).unwrap();
        assert!((f.mu - 1.0).abs() < 1e-14);
        assert!((&f.theta - &phi).norm() < 1e-14);
    }

    #[test]
    fn rank_one_step_with_diagonal() {
        // Pseudoinverse oracle: (M^dag)^-1 phi = (1, 2)/sqrt2, so mu = 2/5.
        let m = ComplexMatrix::from_diagonal(&real_vec(&[1.0, 0.5]));
        let phi = real_vec(&[1.0, 1.0]) / C64::from(2f64.sqrt());
        let f = lemma1_f(&m, 0.2, &phi).unwrap();
        assert!((f.mu - 0.4).abs() < 1e-14);
        let want = real_vec(&[1.0, 2.0]) / C64::from(5f64.sqrt());
        assert!((&f.theta - &want).norm() < 1e-14);
        let lhs = m.adjoint() * &f.theta;
        assert!((lhs - &phi * C64::from(0.4f64.sqrt())).norm() < 1e-14);
    }

    #[test]
    fn rank_one_step_rejects_violated_precondition() {
        let m = ComplexMatrix::from_diagonal(&real_vec(&[1.0, 0.5]));
        let phi = real_vec(&[1.0, 1.0]) / C64::from(2f64.sqrt());
        assert!(matches!(
            lemma1_f(&m, 0.5, &phi),
            Err(Error::PreconditionViolated(_))
        ));
        let p = fixtures::qutrit_projector().into_matrix();
        assert!(matches!(
            lemma1_f(&p, 0.5, &basis_vector(3, 2)),
            Err(Error::PreconditionViolated(_))
        ));
    }

    #[test]
    fn reorder_examples() {
        let povm = fixtures::qutrit_povm();
        let p = fixtures::qutrit_projector();
        assert_eq!(
            reorder_last_element(&povm, &p, false).unwrap(),
            vec![0, 1, 2]
        );
        assert_eq!(depth_bound(&povm, &p, &[0, 1, 2], false).unwrap(), 3);
        // P E_2 P = [[25, -20], [-20, 16]] / 42 has rank one, so every choice
        // of residual element gives bound 3 and the tie keeps E_2 last.
        assert_eq!(branch_rank(povm.element(2), &p, 0).unwrap(), 1);
        assert_eq!(depth_bound(&povm, &p, &[1, 2, 0], false).unwrap(), 3);
        assert_eq!(depth_bound(&povm, &p, &[0, 2, 1], false).unwrap(), 3);

        let single = validate_povm(vec![identity(2)]).unwrap();
        let q = Projector::new(ket_bra(&basis_vector(2, 0))).unwrap();
        assert_eq!(reorder_last_element(&single, &q, false).unwrap(), vec![0]);

        let diag: Vec<_> = (0..3).map(|k| ket_bra(&basis_vector(3, k))).collect();
        let proj = validate_povm(diag).unwrap();
        let q = Projector::new(ket_bra(&basis_vector(3, 0))).unwrap();
        assert_eq!(
            reorder_last_element(&proj, &q, false).unwrap(),
            vec![0, 1, 2]
        );
    }

    #[test]
    fn qutrit_tree_shape() {
        let povm = fixtures::qutrit_povm();
        let p = fixtures::qutrit_projector();
        let tree = compile_tree(&povm, &p, false).unwrap();
        assert_eq!(tree.depth(), 3);
        let ProtocolNode::Stage1 { hit, miss, .. } = &tree.root else {
            panic!("root must be stage 1");
        };
        let ProtocolNode::Binary { step, .. } = hit.as_ref() else {
            panic!("branch 0 starts with a binary node");
        };
        assert!(same_ray(&step.psi, &fixtures::qutrit_phi0()) < 1e-12);
        assert!(matches!(
            miss.as_ref(),
            ProtocolNode::Leaf { outcome: 2, .. }
        ));
    }

    #[test]
    fn projective_tree_shape() {
        let e0 = ket_bra(&basis_vector(2, 0));
        let e1 = ket_bra(&basis_vector(2, 1));
        let povm = validate_povm(vec![e0.clone(), e1]).unwrap();
        let p = Projector::new(e0).unwrap();
        let tree = compile_tree(&povm, &p, false).unwrap();
        assert_eq!(tree.depth(), 2);
        let ProtocolNode::Stage1 { hit, miss, .. } = &tree.root else {
            panic!()
        };
        let ProtocolNode::Binary {
            step,
            hit: h,
            miss: m,
            ..
        } = hit.as_ref()
        else {
            panic!()
        };
        assert!(same_ray(&step.psi, &basis_vector(2, 0)) < 1e-14);
        assert!(matches!(h.as_ref(), ProtocolNode::Leaf { outcome: 0, .. }));
        let ProtocolNode::Leaf {
            outcome: 1,
            accumulated: Some(zero),
        } = m.as_ref()
        else {
            panic!()
        };
        assert!(zero.norm() < 1e-14);
        assert!(matches!(
            miss.as_ref(),
            ProtocolNode::Leaf { outcome: 1, .. }
        ));
    }

    #[test]
    fn compile_rejects_noncommuting_projector() {
        let povm = fixtures::qutrit_povm();
        let p = Projector::new(ket_bra(&basis_vector(3, 0))).unwrap();
        assert!(matches!(
            compile_tree(&povm, &p, false),
            Err(Error::NotRealizable(_))
        ));
    }

    #[test]
    fn embedding_identity() {
        let povm = validate_povm(vec![identity(2)]).unwrap();
        let (embedded, p) = embed_povm(&povm);
        assert_eq!(embedded.dim(), 3);
        assert_eq!(embedded.len(), 2);
        let mut want = ComplexMatrix::zeros(3, 3);
        want[(0, 0)] = C64::new(1.0, 0.0);
        want[(1, 1)] = C64::new(1.0, 0.0);
        assert_eq!(embedded.element(0), &want);
        assert_eq!(p.matrix(), &ket_bra(&basis_vector(3, 2)));
        // Residual outcome is the padded identity: no measurement is needed.
        let tree = compile_tree(&embedded, &p, true).unwrap();
        assert_eq!(tree.depth(), 0);
        assert!(matches!(tree.root, ProtocolNode::Leaf { outcome: 0, .. }));
    }
}
