//! Independent checks of a compiled tree against its POVM.
//!
//! Nothing here trusts the compiler: block ranks, branch projectors and
//! targets are recomputed from the POVM and the tree's own projectors.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{identity, ket_bra, matrix_rank, ComplexMatrix, RANK_TOL};
use crate::quantum::Povm;
use crate::tree::{BinaryStep, ProtocolNode, ProtocolTree};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub leaf: f64,
    pub node: f64,
    pub telescoping: f64,
    pub decomposition: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            leaf: 1e-8,
            node: 1e-9,
            telescoping: 1e-8,
            decomposition: 1e-9,
        }
    }
}

impl Tolerances {
    /// Same tolerance for every check.
    pub fn uniform(tol: f64) -> Self {
        Tolerances {
            leaf: tol,
            node: tol,
            telescoping: tol,
            decomposition: tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeafSumReport {
    /// `||sum_leaves L^dag L - entry^dag E_k entry||` per outcome.
    pub per_outcome: Vec<f64>,
    pub max_residual: f64,
    /// `||sum_all L^dag L - entry^dag entry||`.
    pub completeness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub passed: bool,
    pub leaf_sums: LeafSumReport,
    /// Stored operators against products of branch projectors; 0 when none are stored.
    pub operator_consistency: f64,
    pub node_identity: f64,
    pub telescoping: f64,
    pub decomposition: f64,
    pub depth: usize,
    pub depth_bound: usize,
    pub tolerances: Tolerances,
}

fn hermitian_part(a: ComplexMatrix) -> ComplexMatrix {
    (&a + a.adjoint()) * crate::numerics::C64::from(0.5)
}

/// Leaf sums per outcome and completeness. Fails with
/// [`Error::DigestMismatch`] when the tree was compiled for another POVM.
pub fn check_leaf_sums(tree: &ProtocolTree, povm: &Povm) -> Result<LeafSumReport> {
    if tree.povm_digest != povm.digest() {
        return Err(Error::DigestMismatch);
    }
    tree.validate_structure()?;
    let dim = tree.dim;
    let m = tree.outcome_count();
    let mut sums = vec![ComplexMatrix::zeros(dim, dim); m];
    for leaf in tree.leaf_operators() {
        sums[leaf.outcome] += leaf.operator.adjoint() * &leaf.operator;
    }
    let entry = &tree.entry;
    let mut total = ComplexMatrix::zeros(dim, dim);
    let per_outcome: Vec<f64> = sums
        .iter()
        .enumerate()
        .map(|(k, s)| {
            total += s;
            let target = entry.adjoint() * povm.element(k) * entry;
            (s - target).norm()
        })
        .collect();
    let completeness = (total - entry.adjoint() * entry).norm();
    let max_residual = per_outcome.iter().copied().fold(0.0, f64::max);
    Ok(LeafSumReport {
        per_outcome,
        max_residual,
        completeness,
    })
}

/// Largest distance between a stored operator and the product of the branch
/// projectors leading to it.
pub fn check_operator_consistency(tree: &ProtocolTree) -> f64 {
    fn walk(node: &ProtocolNode, expected: ComplexMatrix, worst: &mut f64) {
        let here = match node.accumulated() {
            Some(stored) => {
                *worst = worst.max((stored - &expected).norm());
                stored.clone()
            }
            None => expected,
        };
        if let (Some(p), Some((hit, miss))) = (node.projector(), node.children()) {
            walk(hit, p * &here, worst);
            walk(miss, (identity(p.nrows()) - p) * &here, worst);
        }
    }
    let mut worst = 0.0;
    walk(&tree.root, tree.entry.clone(), &mut worst);
    worst
}

/// `max ||M^dag |psi><psi| M - lambda |phi><phi|||` over binary nodes, using
/// the stored accumulated operators.
pub fn check_node_identities(tree: &ProtocolTree) -> Result<f64> {
    if !tree.has_operators() {
        return Err(Error::MissingOperators);
    }
    let mut worst: f64 = 0.0;
    for visit in tree.measurement_nodes() {
        let Some(step) = visit.node.step() else {
            continue;
        };
        let m = visit.node.accumulated().ok_or(Error::MissingOperators)?;
        let lhs = m.adjoint() * ket_bra(&step.psi) * m;
        let rhs = ket_bra(&step.phi) * crate::numerics::C64::from(step.lambda);
        worst = worst.max((lhs - rhs).norm());
    }
    Ok(worst)
}

// Branch projectors (P, I - P) as seen by the tree; `None` for a branch that
// the tree never enters.
fn tree_branches(tree: &ProtocolTree) -> Result<[Option<ComplexMatrix>; 2]> {
    if tree.skip_stage1 {
        return Ok([None, Some(tree.entry.clone())]);
    }
    match &tree.root {
        ProtocolNode::Stage1 { projector, .. } => {
            let q = identity(tree.dim) - projector;
            Ok([Some(projector.clone()), Some(q)])
        }
        _ => Err(Error::MalformedTree("missing stage-1 root".into())),
    }
}

/// Projector onto the subspace the tree splits off at the root.
pub fn tree_projector(tree: &ProtocolTree) -> Result<ComplexMatrix> {
    let [inside, outside] = tree_branches(tree)?;
    Ok(match inside {
        Some(p) => p,
        None => identity(tree.dim) - outside.expect("skip trees keep branch 1"),
    })
}

/// At every chain node on branch `a`, before consuming an item of outcome
/// `i`, the operator must satisfy
/// `M^dag M = sum_{i' >= i} E_i'a - (items of i already consumed)`.
/// The residual leaf of each chain must carry exactly the last block.
pub fn check_telescoping(tree: &ProtocolTree, povm: &Povm) -> Result<f64> {
    if tree.povm_digest != povm.digest() {
        return Err(Error::DigestMismatch);
    }
    let branches = tree_branches(tree)?;
    let order = &tree.element_order;
    let position = |outcome: usize| order.iter().position(|&k| k == outcome);
    let block = |k: usize, q: &ComplexMatrix| hermitian_part(q * povm.element(k) * q);

    let mut worst: f64 = 0.0;
    let mut check = |m: &ComplexMatrix,
                     path: &[&BinaryStep],
                     next: Option<&BinaryStep>,
                     branch: u8|
     -> Result<()> {
        let q = branches[branch as usize]
            .as_ref()
            .ok_or_else(|| Error::MalformedTree(format!("tree has no branch {branch}")))?;
        // Position in the element order of the outcome about to be consumed;
        // the residual element when the chain has ended.
        let current = match next {
            Some(step) => position(step.outcome).ok_or_else(|| {
                Error::OrderingMismatch(format!("outcome {} not in order", step.outcome))
            })?,
            None => order.len() - 1,
        };
        let mut target = ComplexMatrix::zeros(tree.dim, tree.dim);
        for &k in &order[current..] {
            target += block(k, q);
        }
        let current_outcome = order[current];
        for step in path {
            if step.branch != branch {
                return Err(Error::OrderingMismatch("path changes branch".into()));
            }
            let pos = position(step.outcome).ok_or_else(|| {
                Error::OrderingMismatch(format!("outcome {} not in order", step.outcome))
            })?;
            if pos > current {
                return Err(Error::OrderingMismatch(format!(
                    "outcome {} consumed before outcome {}",
                    step.outcome, current_outcome
                )));
            }
            if step.outcome == current_outcome {
                target -= ket_bra(&step.phi) * crate::numerics::C64::from(step.lambda);
            }
        }
        worst = worst.max((m.adjoint() * m - target).norm());
        Ok(())
    };

    for visit in tree.measurement_nodes() {
        let ProtocolNode::Binary { step, miss, .. } = visit.node else {
            continue;
        };
        if let Some(prev) = visit.path_steps.last() {
            let (pp, pc) = (position(prev.outcome), position(step.outcome));
            let ordered = pp < pc || (pp == pc && prev.index + 1 == step.index);
            if !ordered {
                return Err(Error::OrderingMismatch(format!(
                    "step ({}, {}) follows ({}, {})",
                    step.outcome, step.index, prev.outcome, prev.index
                )));
            }
        }
        check(&visit.incoming, &visit.path_steps, Some(step), step.branch)?;
        if let ProtocolNode::Leaf { outcome, .. } = miss.as_ref() {
            if *outcome != *order.last().expect("nonempty order") {
                return Err(Error::OrderingMismatch(format!(
                    "chain ends on outcome {outcome}, not the residual element"
                )));
            }
            let mut path = visit.path_steps.clone();
            path.push(step);
            let (_, m) = crate::tree::branch_operators(
                visit.node.projector().expect("binary"),
                &visit.incoming,
            );
            check(&m, &path, None, step.branch)?;
        }
    }

    // Chains without binary nodes: the branch root itself is the residual leaf.
    let roots: Vec<(u8, &ProtocolNode, ComplexMatrix)> = match &tree.root {
        ProtocolNode::Stage1 {
            projector,
            hit,
            miss,
            ..
        } => {
            let incoming = tree
                .root
                .accumulated()
                .cloned()
                .unwrap_or_else(|| tree.entry.clone());
            let (h, m) = crate::tree::branch_operators(projector, &incoming);
            vec![(0, hit.as_ref(), h), (1, miss.as_ref(), m)]
        }
        node => vec![(1, node, tree.entry.clone())],
    };
    for (branch, node, incoming) in roots {
        if node.is_leaf() {
            let m = node.accumulated().cloned().unwrap_or(incoming);
            check(&m, &[], None, branch)?;
        }
    }
    Ok(worst)
}

/// `max_k ||E_k - (P E_k P + (I-P) E_k (I-P))||`; zero exactly when every
/// element commutes with `P`.
pub fn check_decomposition(povm: &Povm, p: &ComplexMatrix) -> Result<f64> {
    if p.shape() != (povm.dim(), povm.dim()) {
        return Err(Error::DimensionMismatch {
            expected: povm.dim(),
            got: p.nrows(),
        });
    }
    let q = identity(povm.dim()) - p;
    Ok(povm
        .elements()
        .iter()
        .map(|e| (e - (p * e * p + &q * e * &q)).norm())
        .fold(0.0, f64::max))
}

/// `max_a sum_{i != last} rank(Q_a E_i Q_a)`, plus one for the stage-1 root.
pub fn depth_bound(tree: &ProtocolTree, povm: &Povm) -> Result<usize> {
    let branches = tree_branches(tree)?;
    let (_, head) = tree.element_order.split_last().ok_or(Error::EmptyPovm)?;
    let mut worst = 0;
    for q in branches.iter().flatten() {
        let mut total = 0;
        for &k in head {
            total += matrix_rank(&hermitian_part(q * povm.element(k) * q), RANK_TOL)?;
        }
        worst = worst.max(total);
    }
    Ok(worst + usize::from(!tree.skip_stage1))
}

/// Run every check. Trees without stored operators are checked after
/// recomputing them from the branch projectors.
pub fn verify(tree: &ProtocolTree, povm: &Povm, tol: Tolerances) -> Result<VerificationReport> {
    let leaf_sums = check_leaf_sums(tree, povm)?;
    let operator_consistency = check_operator_consistency(tree);
    let filled;
    let full = if tree.has_operators() {
        tree
    } else {
        let mut t = tree.clone();
        t.fill_operators();
        filled = t;
        &filled
    };
    let node_identity = check_node_identities(full)?;
    let telescoping = check_telescoping(full, povm)?;
    let decomposition = check_decomposition(povm, &tree_projector(tree)?)?;
    let depth = tree.depth();
    let bound = depth_bound(tree, povm)?;
    let passed = leaf_sums.max_residual <= tol.leaf
        && leaf_sums.completeness <= tol.leaf
        && operator_consistency <= tol.node
        && node_identity <= tol.node
        && telescoping <= tol.telescoping
        && decomposition <= tol.decomposition
        && depth <= bound;
    Ok(VerificationReport {
        passed,
        leaf_sums,
        operator_consistency,
        node_identity,
        telescoping,
        decomposition,
        depth,
        depth_bound: bound,
        tolerances: tol,
    })
}
