//! Binary measurement trees.
//!
//! Each internal node performs a two-outcome projective measurement
//! `{Pi, I - Pi}`; the "hit" child follows `Pi`, the "miss" child follows
//! `I - Pi`. Every node may carry its accumulated operator `M`, the product
//! of branch projectors from the root down to (but not including) the node's
//! own measurement, so that a leaf is reached with probability
//! `tr(M rho M^dag)`.

use crate::error::{Error, Result};
use crate::numerics::{identity, ComplexMatrix, ComplexVector};

/// Metadata of one rank-one measurement `{|psi><psi|, I - |psi><psi|}`
/// realizing a single spectral item `lambda |phi><phi|` of outcome `outcome`
/// on branch `branch`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryStep {
    /// 0-based POVM element index.
    pub outcome: usize,
    /// 0 for the `P` branch, 1 for `I - P`.
    pub branch: u8,
    /// 0-based position of the item within its `(outcome, branch)` block.
    pub index: usize,
    pub lambda: f64,
    pub mu: f64,
    pub phi: ComplexVector,
    pub theta: ComplexVector,
    pub xi: ComplexVector,
    pub psi: ComplexVector,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProtocolNode {
    /// Root measurement `{P, I - P}`; `hit` is branch 0.
    Stage1 {
        projector: ComplexMatrix,
        accumulated: Option<ComplexMatrix>,
        hit: Box<ProtocolNode>,
        miss: Box<ProtocolNode>,
    },
    Binary {
        step: BinaryStep,
        projector: ComplexMatrix,
        accumulated: Option<ComplexMatrix>,
        hit: Box<ProtocolNode>,
        miss: Box<ProtocolNode>,
    },
    Leaf {
        outcome: usize,
        accumulated: Option<ComplexMatrix>,
    },
}

impl ProtocolNode {
    pub fn accumulated(&self) -> Option<&ComplexMatrix> {
        match self {
            ProtocolNode::Stage1 { accumulated, .. }
            | ProtocolNode::Binary { accumulated, .. }
            | ProtocolNode::Leaf { accumulated, .. } => accumulated.as_ref(),
        }
    }

    fn accumulated_mut(&mut self) -> &mut Option<ComplexMatrix> {
        match self {
            ProtocolNode::Stage1 { accumulated, .. }
            | ProtocolNode::Binary { accumulated, .. }
            | ProtocolNode::Leaf { accumulated, .. } => accumulated,
        }
    }

    /// Measurement projector, `None` for leaves.
    pub fn projector(&self) -> Option<&ComplexMatrix> {
        match self {
            ProtocolNode::Stage1 { projector, .. } | ProtocolNode::Binary { projector, .. } => {
                Some(projector)
            }
            ProtocolNode::Leaf { .. } => None,
        }
    }

    /// `(hit, miss)` children, `None` for leaves.
    pub fn children(&self) -> Option<(&ProtocolNode, &ProtocolNode)> {
        match self {
            ProtocolNode::Stage1 { hit, miss, .. } | ProtocolNode::Binary { hit, miss, .. } => {
                Some((hit, miss))
            }
            ProtocolNode::Leaf { .. } => None,
        }
    }

    fn children_mut(&mut self) -> Option<(&mut ProtocolNode, &mut ProtocolNode)> {
        match self {
            ProtocolNode::Stage1 { hit, miss, .. } | ProtocolNode::Binary { hit, miss, .. } => {
                Some((hit, miss))
            }
            ProtocolNode::Leaf { .. } => None,
        }
    }

    pub fn step(&self) -> Option<&BinaryStep> {
        match self {
            ProtocolNode::Binary { step, .. } => Some(step),
            _ => None,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, ProtocolNode::Leaf { .. })
    }

    /// Measurements on the longest path from this node to a leaf.
    pub fn depth(&self) -> usize {
        match self.children() {
            None => 0,
            Some((hit, miss)) => 1 + hit.depth().max(miss.depth()),
        }
    }

    pub fn node_count(&self) -> usize {
        match self.children() {
            None => 1,
            Some((hit, miss)) => 1 + hit.node_count() + miss.node_count(),
        }
    }
}

/// A leaf reached through the tree together with its accumulated operator.
#[derive(Debug, Clone)]
pub struct LeafOperator {
    pub outcome: usize,
    pub operator: ComplexMatrix,
}

/// Binary node visited during a walk, with the operator that reaches it.
#[derive(Debug, Clone)]
pub struct NodeVisit<'a> {
    pub node: &'a ProtocolNode,
    pub incoming: ComplexMatrix,
    /// Steps consumed on the path from the root, in order.
    pub path_steps: Vec<&'a BinaryStep>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolTree {
    pub dim: usize,
    pub outcome_labels: Vec<String>,
    /// Compilation order of POVM elements; the last entry is the residual outcome.
    pub element_order: Vec<usize>,
    pub skip_stage1: bool,
    /// Operator applied before the root measurement: `I`, or `I - P` when stage 1 is skipped.
    pub entry: ComplexMatrix,
    pub povm_digest: String,
    pub root: ProtocolNode,
}

impl ProtocolTree {
    pub fn outcome_count(&self) -> usize {
        self.outcome_labels.len()
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn has_operators(&self) -> bool {
        fn all(node: &ProtocolNode) -> bool {
            node.accumulated().is_some() && node.children().is_none_or(|(h, m)| all(h) && all(m))
        }
        all(&self.root)
    }

    /// Walk every leaf, using stored operators when present and recomputing
    /// them from the branch projectors otherwise.
    pub fn leaf_operators(&self) -> Vec<LeafOperator> {
        let mut out = Vec::new();
        walk_leaves(&self.root, self.entry.clone(), &mut out);
        out
    }

    /// Every measurement node with the operator reaching it.
    pub fn measurement_nodes(&self) -> Vec<NodeVisit<'_>> {
        let mut out = Vec::new();
        walk_nodes(&self.root, self.entry.clone(), Vec::new(), &mut out);
        out
    }

    /// Recompute and store accumulated operators on every node.
    pub fn fill_operators(&mut self) {
        fill(&mut self.root, self.entry.clone());
    }

    pub fn strip_operators(&mut self) {
        fn strip(node: &mut ProtocolNode) {
            *node.accumulated_mut() = None;
            if let Some((h, m)) = node.children_mut() {
                strip(h);
                strip(m);
            }
        }
        strip(&mut self.root);
    }

    /// Structural sanity: dimensions, outcomes in range, projector shapes.
    pub fn validate_structure(&self) -> Result<()> {
        let m = self.outcome_count();
        if m == 0 {
            return Err(Error::MalformedTree("no outcomes".into()));
        }
        if self.entry.shape() != (self.dim, self.dim) {
            return Err(Error::MalformedTree(
                "entry operator has wrong shape".into(),
            ));
        }
        let mut sorted = self.element_order.clone();
        sorted.sort_unstable();
        if sorted != (0..m).collect::<Vec<_>>() {
            return Err(Error::MalformedTree(
                "element order is not a permutation".into(),
            ));
        }
        fn check(node: &ProtocolNode, dim: usize, m: usize, is_root: bool) -> Result<()> {
            if let Some(acc) = node.accumulated() {
                if acc.shape() != (dim, dim) {
                    return Err(Error::MalformedTree("operator has wrong shape".into()));
                }
            }
            match node {
                ProtocolNode::Leaf { outcome, .. } => {
                    if *outcome >= m {
                        return Err(Error::MalformedTree(format!(
                            "leaf outcome {outcome} out of range"
                        )));
                    }
                    Ok(())
                }
                ProtocolNode::Stage1 {
                    projector,
                    hit,
                    miss,
                    ..
                } => {
                    if !is_root {
                        return Err(Error::MalformedTree("stage-1 node below the root".into()));
                    }
                    if projector.shape() != (dim, dim) {
                        return Err(Error::MalformedTree("projector has wrong shape".into()));
                    }
                    check(hit, dim, m, false)?;
                    check(miss, dim, m, false)
                }
                ProtocolNode::Binary {
                    step,
                    projector,
                    hit,
                    miss,
                    ..
                } => {
                    if projector.shape() != (dim, dim) {
                        return Err(Error::MalformedTree("projector has wrong shape".into()));
                    }
                    if step.outcome >= m {
                        return Err(Error::MalformedTree("step outcome out of range".into()));
                    }
                    for v in [&step.phi, &step.theta, &step.xi, &step.psi] {
                        if v.len() != dim {
                            return Err(Error::MalformedTree(
                                "step vector has wrong length".into(),
                            ));
                        }
                    }
                    check(hit, dim, m, false)?;
                    check(miss, dim, m, false)
                }
            }
        }
        check(&self.root, self.dim, m, true)
    }
}

pub(crate) fn branch_operators(
    projector: &ComplexMatrix,
    incoming: &ComplexMatrix,
) -> (ComplexMatrix, ComplexMatrix) {
    let hit = projector * incoming;
    let miss = (identity(projector.nrows()) - projector) * incoming;
    (hit, miss)
}

fn walk_leaves(node: &ProtocolNode, incoming: ComplexMatrix, out: &mut Vec<LeafOperator>) {
    let here = node.accumulated().cloned().unwrap_or(incoming);
    match node {
        ProtocolNode::Leaf { outcome, .. } => out.push(LeafOperator {
            outcome: *outcome,
            operator: here,
        }),
        _ => {
            let (hit, miss) = node.children().expect("internal node");
            let (h, m) = branch_operators(node.projector().expect("internal node"), &here);
            walk_leaves(hit, h, out);
            walk_leaves(miss, m, out);
        }
    }
}

fn walk_nodes<'a>(
    node: &'a ProtocolNode,
    incoming: ComplexMatrix,
    path: Vec<&'a BinaryStep>,
    out: &mut Vec<NodeVisit<'a>>,
) {
    let here = node.accumulated().cloned().unwrap_or(incoming);
    let Some((hit, miss)) = node.children() else {
        return;
    };
    let (h, m) = branch_operators(node.projector().expect("internal node"), &here);
    let mut next = path.clone();
    if let Some(step) = node.step() {
        next.push(step);
    }
    out.push(NodeVisit {
        node,
        incoming: here,
        path_steps: path,
    });
    walk_nodes(hit, h, next.clone(), out);
    walk_nodes(miss, m, next, out);
}

fn fill(node: &mut ProtocolNode, incoming: ComplexMatrix) {
    let projector = node.projector().cloned();
    *node.accumulated_mut() = Some(incoming.clone());
    if let (Some(p), Some((hit, miss))) = (projector, node.children_mut()) {
        let (h, m) = branch_operators(&p, &incoming);
        fill(hit, h);
        fill(miss, m);
    }
}
