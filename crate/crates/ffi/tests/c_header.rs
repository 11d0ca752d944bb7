//! Compiles a small C program against the generated header and the static
//! library, then runs it.

use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "projseq.h"

int main(void) {
    /* Qubit POVM {|0><0|, |1><1|} is projective; P = |0><0| commutes. */
    const double data[] = {
        1, 0, 0, 0, 0, 0, 0, 0,
        0, 0, 0, 0, 0, 0, 1, 0,
    };
    ProjseqPovm *povm = NULL;
    if (projseq_povm_new(2, 2, data, &povm) != PROJSEQ_STATUS_OK) {
        fprintf(stderr, "povm: %s\n", projseq_last_error());
        return 1;
    }
    ProjseqTree *tree = NULL;
    if (projseq_compile(povm, NULL, 0, &tree) != PROJSEQ_STATUS_OK) {
        fprintf(stderr, "compile: %s\n", projseq_last_error());
        return 2;
    }
    const double plus[] = {0.7071067811865476, 0, 0.7071067811865476, 0};
    double probs[2];
    if (projseq_tree_exact_distribution(tree, 2, PROJSEQ_STATE_PURE, plus, probs, 2) != PROJSEQ_STATUS_OK) {
        fprintf(stderr, "simulate: %s\n", projseq_last_error());
        return 3;
    }
    if (fabs(probs[0] - 0.5) > 1e-12 || fabs(probs[1] - 0.5) > 1e-12) {
        return 4;
    }
    bool passed = false;
    if (projseq_tree_verify(tree, povm, 0.0, &passed) != PROJSEQ_STATUS_OK || !passed) {
        return 5;
    }
    if (projseq_compile(NULL, NULL, 0, &tree) != PROJSEQ_STATUS_NULL_POINTER) {
        return 6;
    }
    char *json = NULL;
    projseq_tree_to_json(tree, false, &json);
    printf("%zu bytes of JSON, p = (%.3f, %.3f)\n", strlen(json), probs[0], probs[1]);
    projseq_string_free(json);
    projseq_tree_free(tree);
    projseq_povm_free(povm);
    return 0;
}
"#;

// target/<profile>/deps/<test binary> -> target/<profile>
fn profile_dir() -> PathBuf {
    let exe = std::env::current_exe().expect("test binary path");
    exe.parent()
        .and_then(Path::parent)
        .expect("target layout")
        .to_path_buf()
}

#[test]
fn header_compiles_links_and_runs() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let include = manifest.join("include");
    assert!(
        include.join("projseq.h").exists(),
        "build script writes the header"
    );
    let lib = profile_dir().join("libprojseq_ffi.a");
    assert!(lib.exists(), "static library at {}", lib.display());

    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    let bin = dir.path().join("smoke");
    std::fs::write(
        &src,
        PROGRAM.replace(
            "#include <stdio.h>",
            "#include <stdio.h>\n#include <string.h>",
        ),
    )
    .unwrap();
    let status = Command::new("cc")
        .args(["-std=c11", "-Wall", "-Werror", "-o"])
        .arg(&bin)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .expect("C compiler available");
    assert!(status.success(), "C program failed to build");

    let out = Command::new(&bin).output().unwrap();
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("p = (0.500, 0.500)"));
}
