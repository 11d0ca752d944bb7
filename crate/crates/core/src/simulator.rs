//! Running compiled trees on input states.
//!
//! Exact probabilities come from leaf operators, `p(leaf) = tr(M rho M^dag)`.
//! Single shots walk the tree with Born-rule collapse at every node, drawing
//! from a ChaCha stream keyed by `(seed, shot index)` so histograms are
//! identical regardless of how shots are scheduled across threads.
//!
//! Histograms only need outcomes, so they walk a table of conditional hit
//! probabilities `tr(M_hit rho M_hit^dag) / tr(M rho M^dag)`, computed once per
//! state. This is the same distribution over paths as sequential collapse and
//! uses the same draws, so a histogram shot and [`run_shot`] with the same
//! stream agree.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{ComplexMatrix, C64};
use crate::quantum::{clamp_probability, QuantumState};
use crate::tree::{branch_operators, ProtocolNode, ProtocolTree};

/// Allowed deviation of total probability from one.
pub const RESIDUAL_TOL: f64 = 1e-9;
/// Branches below this probability count as impossible when drawn.
pub const DEGENERATE_BRANCH: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeDistribution {
    pub labels: Vec<String>,
    pub probabilities: Vec<f64>,
    /// `1 - sum(probabilities)`
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PathStep {
    /// Pre-order index of the measured node (root is 0).
    pub node: usize,
    pub hit: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShotRecord {
    pub outcome: usize,
    pub path: Vec<PathStep>,
    pub final_state: QuantumState,
}

fn check_input(tree: &ProtocolTree, state: &QuantumState) -> Result<()> {
    if state.dim() != tree.dim {
        return Err(Error::DimensionMismatch {
            expected: tree.dim,
            got: state.dim(),
        });
    }
    if tree.skip_stage1 {
        // The tree only accepts states inside range(entry).
        let outside = 1.0 - state.branch_weight(&tree.entry);
        if outside > RESIDUAL_TOL {
            return Err(Error::OutsideSupport(outside));
        }
    }
    Ok(())
}

/// Outcome probabilities of the tree on `state`.
pub fn exact_distribution(
    tree: &ProtocolTree,
    state: &QuantumState,
) -> Result<OutcomeDistribution> {
    check_input(tree, state)?;
    let mut probabilities = vec![0.0; tree.outcome_count()];
    for leaf in tree.leaf_operators() {
        probabilities[leaf.outcome] += state.branch_weight(&leaf.operator);
    }
    let probabilities = probabilities
        .into_iter()
        .map(clamp_probability)
        .collect::<Result<Vec<_>>>()?;
    let residual = 1.0 - probabilities.iter().sum::<f64>();
    if residual.abs() > RESIDUAL_TOL {
        return Err(Error::NumericalFailure(format!(
            "leaf probabilities sum to 1 - {residual:.3e}"
        )));
    }
    Ok(OutcomeDistribution {
        labels: tree.outcome_labels.clone(),
        probabilities,
        residual,
    })
}

/// Independent random stream for shot `shot` under `seed`.
pub fn shot_rng(seed: u64, shot: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shot);
    rng
}

fn project(state: &QuantumState, pi: &ComplexMatrix, complement: bool) -> (f64, QuantumState) {
    let dim = pi.nrows();
    let branch = if complement {
        ComplexMatrix::identity(dim, dim) - pi
    } else {
        pi.clone()
    };
    match state {
        QuantumState::Pure(v) => {
            let w = &branch * v;
            let p = w.norm_squared();
            let out = if p > 0.0 { w / C64::from(p.sqrt()) } else { w };
            (p, QuantumState::Pure(out))
        }
        QuantumState::Mixed(rho) => {
            let r = &branch * rho * &branch;
            let p = r.trace().re;
            let out = if p > 0.0 { r / C64::from(p) } else { r };
            (p, QuantumState::Mixed(out))
        }
    }
}

// Hit with probability `p_hit`; a draw landing on a branch below
// DEGENERATE_BRANCH is redrawn once.
fn draw<R: Rng + ?Sized>(rng: &mut R, p_hit: f64) -> Result<bool> {
    let chosen = |h: bool| if h { p_hit } else { 1.0 - p_hit };
    let mut hit = rng.gen::<f64>() < p_hit;
    if chosen(hit) < DEGENERATE_BRANCH {
        hit = rng.gen::<f64>() < p_hit;
        if chosen(hit) < DEGENERATE_BRANCH {
            return Err(Error::DegenerateState(chosen(hit)));
        }
    }
    Ok(hit)
}

fn descend<R: Rng + ?Sized>(
    tree: &ProtocolTree,
    state: &QuantumState,
    rng: &mut R,
    path: Option<&mut Vec<PathStep>>,
) -> Result<(usize, QuantumState)> {
    let mut path = path;
    let mut node = &tree.root;
    let mut id = 0usize;
    let mut current = state.clone();
    loop {
        let (hit_child, miss_child) = match node {
            ProtocolNode::Leaf { outcome, .. } => return Ok((*outcome, current)),
            _ => node.children().expect("internal node"),
        };
        let pi = node.projector().expect("internal node");
        let (p_hit, hit_state) = project(&current, pi, false);
        let p_hit = p_hit.clamp(0.0, 1.0);

        let hit = draw(rng, p_hit)?;
        if let Some(p) = path.as_deref_mut() {
            p.push(PathStep { node: id, hit });
        }
        if hit {
            current = hit_state;
            node = hit_child;
            id += 1;
        } else {
            current = project(&current, pi, true).1;
            id += 1 + hit_child.node_count();
            node = miss_child;
        }
    }
}

/// One shot with full path record.
pub fn run_shot<R: Rng + ?Sized>(
    tree: &ProtocolTree,
    state: &QuantumState,
    rng: &mut R,
) -> Result<ShotRecord> {
    check_input(tree, state)?;
    let mut path = Vec::new();
    let (outcome, final_state) = descend(tree, state, rng, Some(&mut path))?;
    Ok(ShotRecord {
        outcome,
        path,
        final_state,
    })
}

#[derive(Debug, Clone, Copy)]
enum FlatNode {
    Measure { p_hit: f64, hit: usize, miss: usize },
    Leaf(usize),
}

// Pre-order table of conditional hit probabilities for one state.
fn flatten(tree: &ProtocolTree, state: &QuantumState) -> Vec<FlatNode> {
    fn visit(
        node: &ProtocolNode,
        incoming: ComplexMatrix,
        state: &QuantumState,
        out: &mut Vec<FlatNode>,
    ) {
        let here = node.accumulated().cloned().unwrap_or(incoming);
        let (Some(pi), Some((hit, miss))) = (node.projector(), node.children()) else {
            if let ProtocolNode::Leaf { outcome, .. } = node {
                out.push(FlatNode::Leaf(*outcome));
            }
            return;
        };
        let (h, m) = branch_operators(pi, &here);
        let total = state.branch_weight(&here);
        let p_hit = if total > 0.0 {
            (state.branch_weight(&h) / total).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let slot = out.len();
        out.push(FlatNode::Leaf(usize::MAX));
        let hit_id = out.len();
        visit(hit, h, state, out);
        let miss_id = out.len();
        visit(miss, m, state, out);
        out[slot] = FlatNode::Measure {
            p_hit,
            hit: hit_id,
            miss: miss_id,
        };
    }
    let mut out = Vec::with_capacity(tree.root.node_count());
    visit(&tree.root, tree.entry.clone(), state, &mut out);
    out
}

fn walk_table<R: Rng + ?Sized>(table: &[FlatNode], rng: &mut R) -> Result<usize> {
    let mut id = 0;
    loop {
        match table[id] {
            FlatNode::Leaf(outcome) => return Ok(outcome),
            FlatNode::Measure { p_hit, hit, miss } => {
                id = if draw(rng, p_hit)? { hit } else { miss };
            }
        }
    }
}

/// Outcome counts over `shots` independent shots.
pub fn sample_histogram(
    tree: &ProtocolTree,
    state: &QuantumState,
    shots: u64,
    seed: u64,
) -> Result<Vec<u64>> {
    check_input(tree, state)?;
    let m = tree.outcome_count();
    let table = flatten(tree, state);
    (0..shots)
        .into_par_iter()
        .try_fold(
            || vec![0u64; m],
            |mut counts, shot| {
                let mut rng = shot_rng(seed, shot);
                counts[walk_table(&table, &mut rng)?] += 1;
                Ok(counts)
            },
        )
        .try_reduce(
            || vec![0u64; m],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                Ok(a)
            },
        )
}
