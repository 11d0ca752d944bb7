//! C ABI for projseq.
//!
//! Conventions:
//! - Every fallible function returns a [`ProjseqStatus`]; on failure a
//!   message is available from [`projseq_last_error`] on the same thread.
//! - POVMs and trees are opaque handles, created by this library and released
//!   with the matching `*_free` function.
//! - Complex matrices are passed as `dim * dim` row-major entries with real
//!   and imaginary parts interleaved (`2 * dim * dim` doubles); vectors as
//!   `2 * dim` doubles.
//! - Strings returned by the library are released with [`projseq_string_free`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use projseq::compiler::{self, CompileOptions};
use projseq::error::Error;
use projseq::io;
use projseq::numerics::{ComplexMatrix, ComplexVector, C64};
use projseq::quantum::{validate_povm, validate_state, Povm, Projector, QuantumState, RawState};
use projseq::realizability;
use projseq::simulator;
use projseq::tree::ProtocolTree;
use projseq::verifier::{self, Tolerances};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjseqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    NotRealizable = 3,
    VerificationFailed = 4,
    DigestMismatch = 5,
    NumericalFailure = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Opaque POVM handle.
pub struct ProjseqPovm {
    povm: Povm,
}

/// Opaque measurement-tree handle.
pub struct ProjseqTree {
    tree: ProtocolTree,
}

/// Embed the POVM into one extra dimension before compiling.
pub const PROJSEQ_COMPILE_EMBED: u32 = 1;
/// Keep the input element order.
pub const PROJSEQ_COMPILE_NO_REORDER: u32 = 2;

/// `state` holds a pure state vector (`2 * dim` doubles).
pub const PROJSEQ_STATE_PURE: u32 = 0;
/// `state` holds a density matrix (`2 * dim * dim` doubles).
pub const PROJSEQ_STATE_DENSITY: u32 = 1;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).expect("NULs removed"));
}

struct Failure(ProjseqStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::NotRealizable(_) => ProjseqStatus::NotRealizable,
            Error::DigestMismatch => ProjseqStatus::DigestMismatch,
            Error::NumericalFailure(_) | Error::DegenerateState(_) => {
                ProjseqStatus::NumericalFailure
            }
            _ => ProjseqStatus::InvalidInput,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(ProjseqStatus::NullPointer, format!("{what} is null"))
}

// Run `body`, recording its error message and converting panics.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> ProjseqStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error("");
            ProjseqStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            ProjseqStatus::Panic
        }
    }
}

unsafe fn doubles<'a>(data: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if data.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(data, len))
}

unsafe fn out_slice<'a, T>(data: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if data.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(data, len))
}

unsafe fn c_str<'a>(text: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if text.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(text)
        .to_str()
        .map_err(|_| Failure(ProjseqStatus::InvalidInput, format!("{what} is not UTF-8")))
}

fn matrix_from(dim: usize, data: &[f64]) -> ComplexMatrix {
    ComplexMatrix::from_fn(dim, dim, |r, c| {
        let k = 2 * (r * dim + c);
        C64::new(data[k], data[k + 1])
    })
}

unsafe fn read_state(dim: usize, kind: u32, data: *const f64) -> Result<QuantumState, Failure> {
    let raw = match kind {
        PROJSEQ_STATE_PURE => {
            let d = doubles(data, 2 * dim, "state")?;
            RawState::Pure(ComplexVector::from_fn(dim, |k, _| {
                C64::new(d[2 * k], d[2 * k + 1])
            }))
        }
        PROJSEQ_STATE_DENSITY => {
            RawState::Density(matrix_from(dim, doubles(data, 2 * dim * dim, "state")?))
        }
        other => {
            return Err(Failure(
                ProjseqStatus::InvalidInput,
                format!("unknown state kind {other}"),
            ))
        }
    };
    Ok(validate_state(raw)?)
}

// A state one dimension short of an embedded tree is zero-padded.
fn fit_state(tree: &ProtocolTree, state: QuantumState) -> QuantumState {
    if tree.skip_stage1 && state.dim() + 1 == tree.dim {
        compiler::embed_state(&state)
    } else {
        state
    }
}

unsafe fn tree_ref<'a>(tree: *const ProjseqTree) -> Result<&'a ProtocolTree, Failure> {
    tree.as_ref().map(|t| &t.tree).ok_or_else(|| null("tree"))
}

unsafe fn povm_ref<'a>(povm: *const ProjseqPovm) -> Result<&'a Povm, Failure> {
    povm.as_ref().map(|p| &p.povm).ok_or_else(|| null("povm"))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message of the last failed call on this thread, or an empty string. The
/// pointer stays valid until the next call into this library on the thread.
#[no_mangle]
pub extern "C" fn projseq_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Release a string returned by this library. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn projseq_string_free(text: *mut c_char) {
    if !text.is_null() {
        drop(CString::from_raw(text));
    }
}

/// Build a POVM from `count` elements of size `dim x dim`, stored one after
/// another in `data` (`2 * count * dim * dim` doubles).
#[no_mangle]
pub unsafe extern "C" fn projseq_povm_new(
    dim: usize,
    count: usize,
    data: *const f64,
    out: *mut *mut ProjseqPovm,
) -> ProjseqStatus {
    guard(|| {
        if dim == 0 || count == 0 {
            return Err(Failure(
                ProjseqStatus::InvalidInput,
                "dim and count must be positive".into(),
            ));
        }
        let stride = 2 * dim * dim;
        let total = count
            .checked_mul(stride)
            .ok_or_else(|| Failure(ProjseqStatus::InvalidInput, "size overflow".into()))?;
        let data = doubles(data, total, "data")?;
        let elements = data
            .chunks_exact(stride)
            .map(|c| matrix_from(dim, c))
            .collect();
        store(
            out,
            ProjseqPovm {
                povm: validate_povm(elements)?,
            },
        )
    })
}

/// Parse a POVM from its JSON file format.
#[no_mangle]
pub unsafe extern "C" fn projseq_povm_from_json(
    json: *const c_char,
    out: *mut *mut ProjseqPovm,
) -> ProjseqStatus {
    guard(|| {
        let text = c_str(json, "json")?;
        let povm = io::from_json::<io::PovmFile>(text)?.to_povm()?;
        store(out, ProjseqPovm { povm })
    })
}

#[no_mangle]
pub unsafe extern "C" fn projseq_povm_free(povm: *mut ProjseqPovm) {
    if !povm.is_null() {
        drop(Box::from_raw(povm));
    }
}

/// Hilbert-space dimension, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn projseq_povm_dim(povm: *const ProjseqPovm) -> usize {
    povm.as_ref().map_or(0, |p| p.povm.dim())
}

/// Number of elements, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn projseq_povm_len(povm: *const ProjseqPovm) -> usize {
    povm.as_ref().map_or(0, |p| p.povm.len())
}

/// Decide realizability. Either output pointer may be null.
#[no_mangle]
pub unsafe extern "C" fn projseq_povm_check(
    povm: *const ProjseqPovm,
    realizable: *mut bool,
    commutant_dimension: *mut usize,
) -> ProjseqStatus {
    guard(|| {
        let verdict = realizability::find_commuting_projector(povm_ref(povm)?)?;
        if let Some(r) = realizable.as_mut() {
            *r = verdict.realizable();
        }
        if let Some(c) = commutant_dimension.as_mut() {
            *c = verdict.commutant_dimension;
        }
        Ok(())
    })
}

/// Compile a POVM. `projector` (`2 * dim * dim` doubles) may be null, in
/// which case one is searched for. `flags` combines `PROJSEQ_COMPILE_*`.
/// Returns `NotRealizable` when no projector exists and embedding was not
/// requested.
#[no_mangle]
pub unsafe extern "C" fn projseq_compile(
    povm: *const ProjseqPovm,
    projector: *const f64,
    flags: u32,
    out: *mut *mut ProjseqTree,
) -> ProjseqStatus {
    guard(|| {
        let povm = povm_ref(povm)?;
        let reorder = flags & PROJSEQ_COMPILE_NO_REORDER == 0;
        let tree = if flags & PROJSEQ_COMPILE_EMBED != 0 {
            let (embedded, p) = compiler::embed_povm(povm);
            compiler::compile(
                &embedded,
                &p,
                CompileOptions {
                    skip_stage1: true,
                    reorder,
                },
            )?
        } else {
            let p = if projector.is_null() {
                realizability::find_commuting_projector(povm)?
                    .projector
                    .ok_or_else(|| {
                        Failure(
                            ProjseqStatus::NotRealizable,
                            "no nontrivial commuting projector".into(),
                        )
                    })?
            } else {
                let dim = povm.dim();
                Projector::new(matrix_from(
                    dim,
                    doubles(projector, 2 * dim * dim, "projector")?,
                ))?
            };
            compiler::compile(
                povm,
                &p,
                CompileOptions {
                    skip_stage1: false,
                    reorder,
                },
            )?
        };
        store(out, ProjseqTree { tree })
    })
}

/// Parse a tree from its JSON file format.
#[no_mangle]
pub unsafe extern "C" fn projseq_tree_from_json(
    json: *const c_char,
    out: *mut *mut ProjseqTree,
) -> ProjseqStatus {
    guard(|| {
        let tree = io::tree_from_json(c_str(json, "json")?)?;
        store(out, ProjseqTree { tree })
    })
}

/// Serialize a tree to JSON; release `*out` with `projseq_string_free`.
#[no_mangle]
pub unsafe extern "C" fn projseq_tree_to_json(
    tree: *const ProjseqTree,
    with_operators: bool,
    out: *mut *mut c_char,
) -> ProjseqStatus {
    guard(|| {
        let tree = tree_ref(tree)?;
        if out.is_null() {
            return Err(null("output string"));
        }
        let text = if with_operators {
            let mut t = tree.clone();
            t.fill_operators();
            io::tree_to_json(&t)?
        } else {
            let mut t = tree.clone();
            t.strip_operators();
            io::tree_to_json(&t)?
        };
        *out = CString::new(text).expect("JSON has no NUL").into_raw();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn projseq_tree_free(tree: *mut ProjseqTree) {
    if !tree.is_null() {
        drop(Box::from_raw(tree));
    }
}

/// Dimension the tree acts on, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn projseq_tree_dim(tree: *const ProjseqTree) -> usize {
    tree.as_ref().map_or(0, |t| t.tree.dim)
}

/// Number of outcomes, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn projseq_tree_outcome_count(tree: *const ProjseqTree) -> usize {
    tree.as_ref().map_or(0, |t| t.tree.outcome_count())
}

/// Measurements on the longest root-to-leaf path, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn projseq_tree_depth(tree: *const ProjseqTree) -> usize {
    tree.as_ref().map_or(0, |t| t.tree.depth())
}

/// Exact outcome probabilities. `probabilities` must hold at least
/// `projseq_tree_outcome_count` doubles. A state one dimension smaller than
/// an embedded tree is zero-padded.
#[no_mangle]
pub unsafe extern "C" fn projseq_tree_exact_distribution(
    tree: *const ProjseqTree,
    state_dim: usize,
    state_kind: u32,
    state: *const f64,
    probabilities: *mut f64,
    len: usize,
) -> ProjseqStatus {
    guard(|| {
        let tree = tree_ref(tree)?;
        let m = tree.outcome_count();
        if len < m {
            return Err(Failure(
                ProjseqStatus::BufferTooSmall,
                format!("need {m} entries, got {len}"),
            ));
        }
        let state = fit_state(tree, read_state(state_dim, state_kind, state)?);
        let dist = simulator::exact_distribution(tree, &state)?;
        out_slice(probabilities, m, "probabilities")?.copy_from_slice(&dist.probabilities);
        Ok(())
    })
}

/// Outcome counts over `shots` seeded shots. `counts` must hold at least
/// `projseq_tree_outcome_count` entries.
#[no_mangle]
pub unsafe extern "C" fn projseq_tree_sample(
    tree: *const ProjseqTree,
    state_dim: usize,
    state_kind: u32,
    state: *const f64,
    shots: u64,
    seed: u64,
    counts: *mut u64,
    len: usize,
) -> ProjseqStatus {
    guard(|| {
        let tree = tree_ref(tree)?;
        let m = tree.outcome_count();
        if len < m {
            return Err(Failure(
                ProjseqStatus::BufferTooSmall,
                format!("need {m} entries, got {len}"),
            ));
        }
        let state = fit_state(tree, read_state(state_dim, state_kind, state)?);
        let hist = simulator::sample_histogram(tree, &state, shots, seed)?;
        out_slice(counts, m, "counts")?.copy_from_slice(&hist);
        Ok(())
    })
}

/// Verify a tree against a POVM (or its one-dimension embedding, for trees
/// compiled with `PROJSEQ_COMPILE_EMBED`). `tol <= 0` selects the default
/// tolerances. Returns `VerificationFailed` when a check is out of tolerance;
/// `passed` (may be null) receives the verdict either way.
#[no_mangle]
pub unsafe extern "C" fn projseq_tree_verify(
    tree: *const ProjseqTree,
    povm: *const ProjseqPovm,
    tol: f64,
    passed: *mut bool,
) -> ProjseqStatus {
    guard(|| {
        let tree = tree_ref(tree)?;
        let povm = povm_ref(povm)?;
        let embedded;
        let target = if tree.povm_digest == povm.digest() {
            povm
        } else {
            embedded = compiler::embed_povm(povm).0;
            &embedded
        };
        let tolerances = if tol > 0.0 {
            Tolerances::uniform(tol)
        } else {
            Tolerances::default()
        };
        let report = verifier::verify(tree, target, tolerances)?;
        if let Some(p) = passed.as_mut() {
            *p = report.passed;
        }
        if report.passed {
            Ok(())
        } else {
            Err(Failure(
                ProjseqStatus::VerificationFailed,
                format!(
                    "leaf {:.3e}, node {:.3e}, telescoping {:.3e}, depth {}/{}",
                    report.leaf_sums.max_residual,
                    report.node_identity,
                    report.telescoping,
                    report.depth,
                    report.depth_bound
                ),
            ))
        }
    })
}
