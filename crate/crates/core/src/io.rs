//! JSON file formats.
//!
//! Complex numbers are `[re, im]` pairs and matrices are row-major arrays of
//! rows. Floats are written in shortest round-trip form, so a value that is
//! saved and loaded again is bit-for-bit identical.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ComplexMatrix, ComplexVector, C64};
use crate::quantum::{validate_povm, validate_state, Povm, Projector, QuantumState, RawState};
use crate::tree::{BinaryStep, ProtocolNode, ProtocolTree};

pub type ComplexJson = [f64; 2];
pub type MatrixJson = Vec<Vec<ComplexJson>>;
pub type VectorJson = Vec<ComplexJson>;

pub const TREE_FORMAT: &str = "projseq-tree";
pub const TREE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PovmFile {
    pub dim: usize,
    pub elements: Vec<MatrixJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateFile {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pure: Option<VectorJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<MatrixJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectorFile {
    pub dim: usize,
    pub matrix: MatrixJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepFile {
    pub outcome: usize,
    pub branch: u8,
    pub index: usize,
    pub lambda: f64,
    pub mu: f64,
    pub phi: VectorJson,
    pub theta: VectorJson,
    pub xi: VectorJson,
    pub psi: VectorJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NodeFile {
    Stage1 {
        projector: MatrixJson,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        accumulated: Option<MatrixJson>,
        hit: Box<NodeFile>,
        miss: Box<NodeFile>,
    },
    Binary {
        step: StepFile,
        projector: MatrixJson,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        accumulated: Option<MatrixJson>,
        hit: Box<NodeFile>,
        miss: Box<NodeFile>,
    },
    Leaf {
        outcome: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        accumulated: Option<MatrixJson>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeFile {
    pub format: String,
    pub version: u32,
    pub dim: usize,
    pub outcome_labels: Vec<String>,
    pub element_order: Vec<usize>,
    pub skip_stage1: bool,
    pub povm_digest: String,
    pub entry: MatrixJson,
    pub root: NodeFile,
}

pub fn complex_to_json(z: C64) -> ComplexJson {
    [z.re, z.im]
}

fn complex_from_json(z: &ComplexJson) -> Result<C64> {
    if z[0].is_finite() && z[1].is_finite() {
        Ok(C64::new(z[0], z[1]))
    } else {
        Err(Error::NonFinite)
    }
}

pub fn vector_to_json(v: &ComplexVector) -> VectorJson {
    v.iter().copied().map(complex_to_json).collect()
}

pub fn vector_from_json(dim: usize, v: &VectorJson) -> Result<ComplexVector> {
    if v.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: v.len(),
        });
    }
    let entries = v
        .iter()
        .map(complex_from_json)
        .collect::<Result<Vec<_>>>()?;
    Ok(ComplexVector::from_vec(entries))
}

pub fn matrix_to_json(m: &ComplexMatrix) -> MatrixJson {
    m.row_iter()
        .map(|row| row.iter().copied().map(complex_to_json).collect())
        .collect()
}

pub fn matrix_from_json(dim: usize, rows: &MatrixJson) -> Result<ComplexMatrix> {
    if rows.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: rows.len(),
        });
    }
    let mut m = ComplexMatrix::zeros(dim, dim);
    for (r, row) in rows.iter().enumerate() {
        if row.len() != dim {
            return Err(Error::NotSquare(dim, row.len()));
        }
        for (c, z) in row.iter().enumerate() {
            m[(r, c)] = complex_from_json(z)?;
        }
    }
    Ok(m)
}

impl PovmFile {
    pub fn from_povm(povm: &Povm) -> Self {
        PovmFile {
            dim: povm.dim(),
            elements: povm.elements().iter().map(matrix_to_json).collect(),
            labels: Some(povm.labels().to_vec()),
        }
    }

    pub fn to_povm(&self) -> Result<Povm> {
        let elements = self
            .elements
            .iter()
            .map(|e| matrix_from_json(self.dim, e))
            .collect::<Result<Vec<_>>>()?;
        let povm = validate_povm(elements)?;
        match &self.labels {
            Some(labels) => povm.with_labels(labels.clone()),
            None => Ok(povm),
        }
    }
}

impl StateFile {
    pub fn from_state(state: &QuantumState) -> Self {
        match state {
            QuantumState::Pure(v) => StateFile {
                dim: v.len(),
                pure: Some(vector_to_json(v)),
                density: None,
            },
            QuantumState::Mixed(rho) => StateFile {
                dim: rho.nrows(),
                pure: None,
                density: Some(matrix_to_json(rho)),
            },
        }
    }

    pub fn to_state(&self) -> Result<QuantumState> {
        let raw = match (&self.pure, &self.density) {
            (Some(v), None) => RawState::Pure(vector_from_json(self.dim, v)?),
            (None, Some(m)) => RawState::Density(matrix_from_json(self.dim, m)?),
            _ => {
                return Err(Error::NotAState(
                    "exactly one of \"pure\" or \"density\" must be given".into(),
                ))
            }
        };
        validate_state(raw)
    }
}

impl ProjectorFile {
    pub fn from_projector(p: &Projector) -> Self {
        ProjectorFile {
            dim: p.dim(),
            matrix: matrix_to_json(p.matrix()),
        }
    }

    pub fn to_projector(&self) -> Result<Projector> {
        Projector::new(matrix_from_json(self.dim, &self.matrix)?)
    }
}

fn step_to_file(step: &BinaryStep) -> StepFile {
    StepFile {
        outcome: step.outcome,
        branch: step.branch,
        index: step.index,
        lambda: step.lambda,
        mu: step.mu,
        phi: vector_to_json(&step.phi),
        theta: vector_to_json(&step.theta),
        xi: vector_to_json(&step.xi),
        psi: vector_to_json(&step.psi),
    }
}

fn step_from_file(dim: usize, s: &StepFile) -> Result<BinaryStep> {
    if !(s.lambda.is_finite() && s.mu.is_finite()) {
        return Err(Error::NonFinite);
    }
    if s.branch > 1 {
        return Err(Error::MalformedTree(format!(
            "branch {} is not 0 or 1",
            s.branch
        )));
    }
    Ok(BinaryStep {
        outcome: s.outcome,
        branch: s.branch,
        index: s.index,
        lambda: s.lambda,
        mu: s.mu,
        phi: vector_from_json(dim, &s.phi)?,
        theta: vector_from_json(dim, &s.theta)?,
        xi: vector_from_json(dim, &s.xi)?,
        psi: vector_from_json(dim, &s.psi)?,
    })
}

fn node_to_file(node: &ProtocolNode) -> NodeFile {
    let acc = |a: Option<&ComplexMatrix>| a.map(matrix_to_json);
    match node {
        ProtocolNode::Stage1 {
            projector,
            accumulated,
            hit,
            miss,
        } => NodeFile::Stage1 {
            projector: matrix_to_json(projector),
            accumulated: acc(accumulated.as_ref()),
            hit: Box::new(node_to_file(hit)),
            miss: Box::new(node_to_file(miss)),
        },
        ProtocolNode::Binary {
            step,
            projector,
            accumulated,
            hit,
            miss,
        } => NodeFile::Binary {
            step: step_to_file(step),
            projector: matrix_to_json(projector),
            accumulated: acc(accumulated.as_ref()),
            hit: Box::new(node_to_file(hit)),
            miss: Box::new(node_to_file(miss)),
        },
        ProtocolNode::Leaf {
            outcome,
            accumulated,
        } => NodeFile::Leaf {
            outcome: *outcome,
            accumulated: acc(accumulated.as_ref()),
        },
    }
}

fn node_from_file(dim: usize, node: &NodeFile) -> Result<ProtocolNode> {
    let acc = |a: &Option<MatrixJson>| a.as_ref().map(|m| matrix_from_json(dim, m)).transpose();
    Ok(match node {
        NodeFile::Stage1 {
            projector,
            accumulated,
            hit,
            miss,
        } => ProtocolNode::Stage1 {
            projector: matrix_from_json(dim, projector)?,
            accumulated: acc(accumulated)?,
            hit: Box::new(node_from_file(dim, hit)?),
            miss: Box::new(node_from_file(dim, miss)?),
        },
        NodeFile::Binary {
            step,
            projector,
            accumulated,
            hit,
            miss,
        } => ProtocolNode::Binary {
            step: step_from_file(dim, step)?,
            projector: matrix_from_json(dim, projector)?,
            accumulated: acc(accumulated)?,
            hit: Box::new(node_from_file(dim, hit)?),
            miss: Box::new(node_from_file(dim, miss)?),
        },
        NodeFile::Leaf {
            outcome,
            accumulated,
        } => ProtocolNode::Leaf {
            outcome: *outcome,
            accumulated: acc(accumulated)?,
        },
    })
}

impl TreeFile {
    pub fn from_tree(tree: &ProtocolTree) -> Self {
        TreeFile {
            format: TREE_FORMAT.into(),
            version: TREE_VERSION,
            dim: tree.dim,
            outcome_labels: tree.outcome_labels.clone(),
            element_order: tree.element_order.clone(),
            skip_stage1: tree.skip_stage1,
            povm_digest: tree.povm_digest.clone(),
            entry: matrix_to_json(&tree.entry),
            root: node_to_file(&tree.root),
        }
    }

    pub fn to_tree(&self) -> Result<ProtocolTree> {
        if self.format != TREE_FORMAT || self.version != TREE_VERSION {
            return Err(Error::MalformedTree(format!(
                "unsupported format {} version {}",
                self.format, self.version
            )));
        }
        let tree = ProtocolTree {
            dim: self.dim,
            outcome_labels: self.outcome_labels.clone(),
            element_order: self.element_order.clone(),
            skip_stage1: self.skip_stage1,
            entry: matrix_from_json(self.dim, &self.entry)?,
            povm_digest: self.povm_digest.clone(),
            root: node_from_file(self.dim, &self.root)?,
        };
        tree.validate_structure()?;
        Ok(tree)
    }
}

/// Parse JSON without a nesting limit; deep trees nest one level per node.
pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    de.disable_recursion_limit();
    let value = T::deserialize(&mut de).map_err(|e| Error::Parse(e.to_string()))?;
    de.end().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(value)
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    from_json(&text)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = to_json(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn load_povm(path: &Path) -> Result<Povm> {
    read_json::<PovmFile>(path)?.to_povm()
}

pub fn load_state(path: &Path) -> Result<QuantumState> {
    read_json::<StateFile>(path)?.to_state()
}

pub fn load_projector(path: &Path) -> Result<Projector> {
    read_json::<ProjectorFile>(path)?.to_projector()
}

pub fn load_tree(path: &Path) -> Result<ProtocolTree> {
    read_json::<TreeFile>(path)?.to_tree()
}

pub fn tree_to_json(tree: &ProtocolTree) -> Result<String> {
    to_json(&TreeFile::from_tree(tree))
}

pub fn tree_from_json(text: &str) -> Result<ProtocolTree> {
    from_json::<TreeFile>(text)?.to_tree()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compiler::{compile_tree, embed_povm};
    use crate::fixtures;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn povm_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let povm = fixtures::random_povm(4, 3, &mut rng);
        let text = to_json(&PovmFile::from_povm(&povm)).unwrap();
        let back = from_json::<PovmFile>(&text).unwrap().to_povm().unwrap();
        assert_eq!(back, povm);
        assert_eq!(back.digest(), povm.digest());
    }

    #[test]
    fn tree_round_trip_is_bit_exact() {
        let povm = fixtures::qutrit_povm();
        let mut tree = compile_tree(&povm, &fixtures::qutrit_projector(), false).unwrap();
        let back = tree_from_json(&tree_to_json(&tree).unwrap()).unwrap();
        assert_eq!(back, tree);
        tree.strip_operators();
        let back = tree_from_json(&tree_to_json(&tree).unwrap()).unwrap();
        assert_eq!(back, tree);
        assert!(!back.has_operators());
    }

    #[test]
    fn skip_tree_round_trip() {
        let (povm, p) = embed_povm(&fixtures::sic_povm());
        let tree = compile_tree(&povm, &p, true).unwrap();
        let back = tree_from_json(&tree_to_json(&tree).unwrap()).unwrap();
        assert_eq!(back, tree);
    }

    #[test]
    fn states_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for state in [
            fixtures::random_pure_state(3, &mut rng),
            fixtures::random_mixed_state(3, &mut rng),
        ] {
            let text = to_json(&StateFile::from_state(&state)).unwrap();
            let back = from_json::<StateFile>(&text).unwrap().to_state().unwrap();
            assert_eq!(back, state);
        }
    }

    #[test]
    fn povm_without_labels_gets_defaults() {
        let text = r#"{"dim": 1, "elements": [[[[1.0, 0.0]]]]}"#;
        let povm = from_json::<PovmFile>(text).unwrap().to_povm().unwrap();
        assert_eq!(povm.labels(), ["1"]);
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        assert!(matches!(from_json::<PovmFile>("{"), Err(Error::Parse(_))));
        let wrong_shape = r#"{"dim": 2, "elements": [[[[1.0, 0.0]]]]}"#;
        let file = from_json::<PovmFile>(wrong_shape).unwrap();
        assert!(matches!(
            file.to_povm(),
            Err(Error::DimensionMismatch { .. })
        ));
        let both = StateFile {
            dim: 1,
            pure: Some(vec![[1.0, 0.0]]),
            density: Some(vec![vec![[1.0, 0.0]]]),
        };
        assert!(matches!(both.to_state(), Err(Error::NotAState(_))));
        let unknown = r#"{"dim": 1, "elements": [], "extra": 1}"#;
        assert!(from_json::<PovmFile>(unknown).is_err());
    }

    #[test]
    fn wrong_tree_format_is_rejected() {
        let povm = fixtures::qutrit_povm();
        let tree = compile_tree(&povm, &fixtures::qutrit_projector(), false).unwrap();
        let mut file = TreeFile::from_tree(&tree);
        file.version = 99;
        assert!(matches!(file.to_tree(), Err(Error::MalformedTree(_))));
    }
}
