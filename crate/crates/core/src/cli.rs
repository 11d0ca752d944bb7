//! Command-line interface. [`run`] is the whole program minus process exit,
//! so it can be driven from tests.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::compiler::{self, CompileOptions};
use crate::error::{Error, Result};
use crate::fixtures;
use crate::io::{self, ProjectorFile, TreeFile};
use crate::numerics::{ket_bra, ComplexVector, C64};
use crate::quantum::{born_distribution, Povm, Projector, QuantumState};
use crate::realizability::{self, VerdictSummary, COMMUTATION_TOL};
use crate::simulator;
use crate::tree::ProtocolTree;
use crate::verifier::{self, Tolerances};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOT_REALIZABLE: i32 = 1;
pub const EXIT_INVALID_INPUT: i32 = 2;
pub const EXIT_VERIFICATION_FAILED: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "projseq",
    version,
    about = "Realize POVMs as sequences of projective measurements"
)]
struct Cli {
    /// Override the commutation and verification tolerances.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decide whether a POVM admits a nontrivial commuting projector.
    Check {
        povm: PathBuf,
        /// Test this projector instead of searching for one.
        #[arg(long)]
        projector: Option<PathBuf>,
        /// Write the projector that was found.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Compile a POVM into a measurement tree.
    Compile {
        povm: PathBuf,
        #[arg(long)]
        projector: Option<PathBuf>,
        /// Keep the input element order.
        #[arg(long)]
        no_reorder: bool,
        /// Embed into one extra dimension first (for non-realizable POVMs).
        #[arg(long)]
        embed: bool,
        /// Store the accumulated operator on every node.
        #[arg(long)]
        with_operators: bool,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Exact outcome distribution of a tree on a state.
    Simulate { tree: PathBuf, state: PathBuf },
    /// Sampled outcome counts.
    Sample {
        tree: PathBuf,
        state: PathBuf,
        #[arg(long)]
        shots: u64,
        #[arg(long)]
        seed: u64,
    },
    /// Check a tree against the POVM it claims to realize.
    Verify { tree: PathBuf, povm: PathBuf },
    /// Built-in worked examples.
    Demo {
        #[arg(value_enum)]
        name: DemoName,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DemoName {
    Qutrit,
    Ud,
    Trine,
}

enum Outcome {
    Done,
    NotRealizable,
    VerificationFailed,
}

/// Run the CLI on `argv` (including the program name) and return the exit code.
pub fn run<I, S>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_INVALID_INPUT
            } else {
                EXIT_OK
            };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(stderr, "{text}")
            } else {
                write!(stdout, "{text}")
            };
            return code;
        }
    };
    if let Some(tol) = cli.tol {
        if !(tol.is_finite() && tol > 0.0) {
            let _ = writeln!(stderr, "error: --tol must be a positive number");
            return EXIT_INVALID_INPUT;
        }
    }
    match execute(&cli, stdout) {
        Ok(Outcome::Done) => EXIT_OK,
        Ok(Outcome::NotRealizable) => EXIT_NOT_REALIZABLE,
        Ok(Outcome::VerificationFailed) => EXIT_VERIFICATION_FAILED,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            match e {
                Error::NotRealizable(_) => EXIT_NOT_REALIZABLE,
                _ => EXIT_INVALID_INPUT,
            }
        }
    }
}

fn emit<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    let text = io::to_json(value)?;
    writeln!(out, "{text}").map_err(|e| Error::Io(e.to_string()))
}

fn line(out: &mut dyn Write, text: impl AsRef<str>) -> Result<()> {
    writeln!(out, "{}", text.as_ref()).map_err(|e| Error::Io(e.to_string()))
}

fn tolerances(cli: &Cli) -> Tolerances {
    cli.tol.map(Tolerances::uniform).unwrap_or_default()
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<Outcome> {
    match &cli.command {
        Command::Check {
            povm,
            projector,
            output,
        } => check(cli, povm, projector.as_deref(), output.as_deref(), out),
        Command::Compile {
            povm,
            projector,
            no_reorder,
            embed,
            with_operators,
            output,
        } => {
            let povm = io::load_povm(povm)?;
            let projector = projector.as_deref().map(io::load_projector).transpose()?;
            let options = CompileArgs {
                reorder: !no_reorder,
                embed: *embed,
                with_operators: *with_operators,
            };
            compile(&povm, projector, options, output, out)
        }
        Command::Simulate { tree, state } => {
            let tree = io::load_tree(tree)?;
            let state = fit_state(&tree, io::load_state(state)?)?;
            emit(out, &simulator::exact_distribution(&tree, &state)?)?;
            Ok(Outcome::Done)
        }
        Command::Sample {
            tree,
            state,
            shots,
            seed,
        } => {
            let tree = io::load_tree(tree)?;
            let state = fit_state(&tree, io::load_state(state)?)?;
            let counts = simulator::sample_histogram(&tree, &state, *shots, *seed)?;
            emit(
                out,
                &json!({
                    "labels": tree.outcome_labels,
                    "counts": counts,
                    "shots": shots,
                    "seed": seed,
                }),
            )?;
            Ok(Outcome::Done)
        }
        Command::Verify { tree, povm } => {
            let tree = io::load_tree(tree)?;
            let povm = io::load_povm(povm)?;
            let povm = match_digest(&tree, povm)?;
            let report = verifier::verify(&tree, &povm, tolerances(cli))?;
            emit(out, &report)?;
            Ok(if report.passed {
                Outcome::Done
            } else {
                Outcome::VerificationFailed
            })
        }
        Command::Demo { name } => match name {
            DemoName::Qutrit => demo_qutrit(cli, out),
            DemoName::Ud => demo_ud(cli, out),
            DemoName::Trine => demo_trine(cli, out),
        },
    }
}

fn check(
    cli: &Cli,
    povm: &Path,
    projector: Option<&Path>,
    output: Option<&Path>,
    out: &mut dyn Write,
) -> Result<Outcome> {
    let povm = io::load_povm(povm)?;
    let tol = cli.tol.unwrap_or(COMMUTATION_TOL);
    let (found, summary) = match projector {
        Some(path) => {
            let p = io::load_projector(path)?;
            let ok = realizability::check_condition_with(&povm, &p, tol)?;
            let summary = json!({
                "realizable": ok,
                "projector_rank": p.rank(),
                "max_commutator": realizability::max_commutator(&povm, &p)?,
            });
            (ok.then_some(p), summary)
        }
        None => {
            let verdict = realizability::find_commuting_projector(&povm)?;
            let summary = serde_json::to_value(VerdictSummary::from(&verdict))
                .map_err(|e| Error::Parse(e.to_string()))?;
            (verdict.projector, summary)
        }
    };
    emit(out, &summary)?;
    match found {
        Some(p) => {
            if let Some(path) = output {
                io::write_json(path, &ProjectorFile::from_projector(&p))?;
            }
            Ok(Outcome::Done)
        }
        None => Ok(Outcome::NotRealizable),
    }
}

#[derive(Debug, Clone, Copy)]
struct CompileArgs {
    reorder: bool,
    embed: bool,
    with_operators: bool,
}

fn compile(
    povm: &Povm,
    projector: Option<Projector>,
    args: CompileArgs,
    output: &Path,
    out: &mut dyn Write,
) -> Result<Outcome> {
    let (target, p, skip_stage1) = if args.embed {
        let (embedded, p) = compiler::embed_povm(povm);
        (embedded, p, true)
    } else {
        let p = match projector {
            Some(p) => p,
            None => match realizability::find_commuting_projector(povm)?.projector {
                Some(p) => p,
                None => {
                    emit(
                        out,
                        &json!({"realizable": false, "hint": "use --embed to compile in one extra dimension"}),
                    )?;
                    return Ok(Outcome::NotRealizable);
                }
            },
        };
        (povm.clone(), p, false)
    };
    let mut tree = compiler::compile(
        &target,
        &p,
        CompileOptions {
            skip_stage1,
            reorder: args.reorder,
        },
    )?;
    let bound = compiler::depth_bound(&target, &p, &tree.element_order, skip_stage1)?;
    if !args.with_operators {
        tree.strip_operators();
    }
    io::write_json(output, &TreeFile::from_tree(&tree))?;
    emit(
        out,
        &json!({
            "dim": tree.dim,
            "embedded": args.embed,
            "depth": tree.depth(),
            "depth_bound": bound,
            "nodes": tree.root.node_count(),
            "element_order": tree.element_order,
        }),
    )?;
    Ok(Outcome::Done)
}

// A state of dimension d given to a tree compiled for the d+1 embedding is
// zero-padded.
fn fit_state(tree: &ProtocolTree, state: QuantumState) -> Result<QuantumState> {
    if !tree.skip_stage1 || state.dim() + 1 != tree.dim {
        return Ok(state);
    }
    Ok(compiler::embed_state(&state))
}

// Trees compiled with --embed carry the digest of the embedded POVM.
fn match_digest(tree: &ProtocolTree, povm: Povm) -> Result<Povm> {
    if tree.povm_digest == povm.digest() {
        return Ok(povm);
    }
    let (embedded, _) = compiler::embed_povm(&povm);
    if tree.povm_digest == embedded.digest() {
        Ok(embedded)
    } else {
        Err(Error::DigestMismatch)
    }
}

fn format_probs(p: &[f64]) -> String {
    let parts: Vec<String> = p.iter().map(|x| format!("{x:.12}")).collect();
    format!("[{}]", parts.join(", "))
}

fn verdict_line(out: &mut dyn Write, report: &verifier::VerificationReport) -> Result<()> {
    line(
        out,
        format!(
            "verify: {} (leaf {:.2e}, node {:.2e}, telescoping {:.2e}, depth {}/{})",
            if report.passed { "pass" } else { "FAIL" },
            report.leaf_sums.max_residual,
            report.node_identity,
            report.telescoping,
            report.depth,
            report.depth_bound
        ),
    )
}

fn demo_qutrit(cli: &Cli, out: &mut dyn Write) -> Result<Outcome> {
    let povm = fixtures::qutrit_povm();
    let p = fixtures::qutrit_projector();
    line(
        out,
        "qutrit POVM: E0 = 2/3 |psi0><psi0|, E1 = 5/14 |psi1><psi1|, E2 = I - E0 - E1",
    )?;
    line(
        out,
        format!(
            "P = |0><0| + |1><1| commutes: {}",
            realizability::check_condition(&povm, &p)?
        ),
    )?;
    let tree = compiler::compile_tree(&povm, &p, false)?;
    line(
        out,
        format!(
            "tree depth {} with {} nodes",
            tree.depth(),
            tree.root.node_count()
        ),
    )?;
    if let crate::tree::ProtocolNode::Stage1 { hit, .. } = &tree.root {
        if let Some(step) = hit.step() {
            let overlap = step.psi.dotc(&fixtures::qutrit_phi0()).norm();
            line(
                out,
                format!("first branch-0 direction overlaps phi0 with |<psi|phi0>| = {overlap:.12}"),
            )?;
        }
    }
    let state = QuantumState::Pure(fixtures::qutrit_phi0());
    let tree_p = simulator::exact_distribution(&tree, &state)?.probabilities;
    let born = born_distribution(&povm, &state)?;
    line(out, format!("tree  on phi0: {}", format_probs(&tree_p)))?;
    line(out, format!("Born  on phi0: {}", format_probs(&born)))?;
    let report = verifier::verify(&tree, &povm, tolerances(cli))?;
    verdict_line(out, &report)?;
    Ok(if report.passed {
        Outcome::Done
    } else {
        Outcome::VerificationFailed
    })
}

fn demo_ud(cli: &Cli, out: &mut dyn Write) -> Result<Outcome> {
    let ud = fixtures::ud_fixture(0.5, 0.5);
    let common = realizability::support_intersection(&ud.rho1, &ud.rho2)?;
    line(
        out,
        format!(
            "supp(rho1) and supp(rho2) intersect in {} dimension(s)",
            common.len()
        ),
    )?;
    let Some(v) = common.first() else {
        return Err(Error::NotRealizable("supports do not intersect".into()));
    };
    let p = Projector::new(ket_bra(v))?;
    let comm = realizability::max_commutator(&ud.povm, &p)?;
    line(
        out,
        format!("P = |v><v| on the intersection, max commutator {comm:.2e}"),
    )?;
    if !realizability::check_condition(&ud.povm, &p)? {
        line(out, "projector does not commute with the UD POVM")?;
        return Ok(Outcome::NotRealizable);
    }
    let tree = compiler::compile_tree(&ud.povm, &p, false)?;
    line(out, format!("tree depth {}", tree.depth()))?;
    let e1 = ud.povm.element(1);
    let e2 = ud.povm.element(2);
    line(
        out,
        format!(
            "tr(E1 rho2) = {:.3e}, tr(E2 rho1) = {:.3e}",
            ud.rho2.expectation(e1),
            ud.rho1.expectation(e2)
        ),
    )?;
    for (name, rho) in [("rho1", &ud.rho1), ("rho2", &ud.rho2)] {
        let d = simulator::exact_distribution(&tree, rho)?;
        line(
            out,
            format!(
                "outcomes on {name} {:?}: {}",
                d.labels,
                format_probs(&d.probabilities)
            ),
        )?;
    }
    let report = verifier::verify(&tree, &ud.povm, tolerances(cli))?;
    verdict_line(out, &report)?;
    Ok(if report.passed {
        Outcome::Done
    } else {
        Outcome::VerificationFailed
    })
}

fn demo_trine(cli: &Cli, out: &mut dyn Write) -> Result<Outcome> {
    let povm = fixtures::trine_povm();
    let verdict = realizability::find_commuting_projector(&povm)?;
    line(
        out,
        format!(
            "trine: commutant dimension {}, realizable without ancilla: {}",
            verdict.commutant_dimension,
            verdict.realizable()
        ),
    )?;
    let (embedded, p) = compiler::embed_povm(&povm);
    let tree = compiler::compile_tree(&embedded, &p, true)?;
    line(
        out,
        format!(
            "embedded in dimension {}: tree depth {}",
            tree.dim,
            tree.depth()
        ),
    )?;
    let plus = ComplexVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
    let state = QuantumState::Pure(plus);
    let tree_p =
        simulator::exact_distribution(&tree, &compiler::embed_state(&state))?.probabilities;
    line(out, format!("tree on |0>: {}", format_probs(&tree_p)))?;
    line(
        out,
        format!(
            "Born on |0>: {}",
            format_probs(&born_distribution(&povm, &state)?)
        ),
    )?;
    let report = verifier::verify(&tree, &embedded, tolerances(cli))?;
    verdict_line(out, &report)?;
    Ok(if report.passed {
        Outcome::Done
    } else {
        Outcome::VerificationFailed
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(args.iter().copied(), &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn demos_succeed() {
        for name in ["qutrit", "ud", "trine"] {
            let (code, out, err) = run_capture(&["projseq", "demo", name]);
            assert_eq!(code, EXIT_OK, "{name}: {out}{err}");
            assert!(out.contains("verify: pass"), "{out}");
        }
    }

    #[test]
    fn bad_arguments_exit_2() {
        let (code, _, err) = run_capture(&["projseq", "frobnicate"]);
        assert_eq!(code, EXIT_INVALID_INPUT);
        assert!(!err.is_empty());
        let (code, _, _) = run_capture(&["projseq", "--tol", "-1", "demo", "qutrit"]);
        assert_eq!(code, EXIT_INVALID_INPUT);
    }

    #[test]
    fn help_exits_0() {
        let (code, out, _) = run_capture(&["projseq", "--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("compile"));
    }

    #[test]
    fn missing_file_exits_2() {
        let (code, _, err) = run_capture(&["projseq", "check", "/nonexistent/povm.json"]);
        assert_eq!(code, EXIT_INVALID_INPUT);
        assert!(err.contains("I/O error"));
    }
}
