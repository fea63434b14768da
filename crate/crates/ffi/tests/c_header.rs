//! Checks the generated header and, when a C compiler is available, builds
//! and runs a small C program against the static library.

use std::path::{Path, PathBuf};
use std::process::Command;

fn header_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/slmarkov.h")
}

fn target_dir() -> PathBuf {
    // .../target/<profile>/deps/<test-binary>
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

fn have_cc() -> bool {
    Command::new("cc")
        .arg("--version")
        .output()
        .is_ok_and(|o| o.status.success())
}

#[test]
fn header_declares_the_public_surface() {
    let h = std::fs::read_to_string(header_path()).expect("header generated by build script");
    assert!(h.contains("#ifndef SLMARKOV_H"));
    for item in [
        "typedef struct SlmIdentifier SlmIdentifier;",
        "typedef struct SlmTrace SlmTrace;",
        "SLM_STATUS_OK = 0",
        "SLM_STATUS_PANIC",
        "slm_last_error_message(void)",
        "slm_opinion_fuse(",
        "slm_opinion_degree_of_conflict(",
        "slm_identifier_new(",
        "slm_identifier_free(",
        "slm_trace_reference(",
        "slm_delay_classify(",
    ] {
        assert!(h.contains(item), "header lacks `{item}`");
    }
}

#[test]
fn header_compiles_as_c() {
    if !have_cc() {
        eprintln!("cc not found; skipping");
        return;
    }
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-x", "c"])
        .arg(header_path())
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

const PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "slmarkov.h"

int main(void) {
    double a[2] = {0.5, 0.5}, b1[2] = {0.7, 0.1}, b2[2] = {0.5, 0.3};
    SlmOpinion x = {2, b1, 0.2, a}, y = {2, b2, 0.2, a};
    double fb[2], fu;
    if (slm_opinion_fuse(&x, &y, fb, &fu, NULL) != SLM_STATUS_OK) return 1;
    if (fabs(fu - 2.0 / 18.0) > 1e-12) return 2;

    SlmIdentifierParams p;
    SlmIdentifier *id = NULL;
    slm_identifier_default_params(2, &p);
    if (slm_identifier_new(&p, &id) != SLM_STATUS_OK) return 3;

    SlmTrace *t = NULL;
    size_t n = 0;
    if (slm_trace_reference(42, &t) != SLM_STATUS_OK) return 4;
    slm_trace_len(t, &n);
    static uint32_t states[100000];
    if (n != 100000 || slm_trace_states(t, states, n) != SLM_STATUS_OK) return 5;
    for (size_t i = 0; i < n; i++) {
        if (slm_identifier_push(id, states[i], NULL) != SLM_STATUS_OK) return 6;
    }
    double tm[4];
    size_t windows = 0;
    slm_identifier_windows(id, &windows);
    if (windows != 1000 || slm_identifier_transition(id, tm, 4) != SLM_STATUS_OK) return 7;
    if (fabs(tm[0] + tm[1] - 1.0) > 1e-9) return 8;

    if (slm_identifier_push(id, 9, NULL) != SLM_STATUS_DATA) return 9;
    if (slm_last_error_message() == NULL) return 10;

    slm_trace_free(t);
    slm_identifier_free(id);
    printf("ok %s %.4f\n", slm_version(), tm[0]);
    return 0;
}
"#;

#[test]
fn c_program_links_against_static_library() {
    let lib = target_dir().join("libslmarkov_ffi.a");
    if !have_cc() || !lib.exists() {
        eprintln!("cc or {} not available; skipping", lib.display());
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let src = dir.join("smoke.c");
    let exe = dir.join("smoke");
    std::fs::write(&src, PROGRAM).unwrap();
    let build = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(header_path().parent().unwrap())
        .arg(&src)
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(
        build.status.success(),
        "{}",
        String::from_utf8_lossy(&build.stderr)
    );
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}
