// SPDX-License-Identifier: MIT OR Apache-2.0

//! Compiles and runs a small C program against the generated header and the
//! static library. Skipped when no C compiler is on the PATH.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include "parcs.h"

int main(void) {
    double data[100];
    for (int t = 0; t < 100; ++t) data[t] = t > 49 ? 4.0 : 0.0;
    ParcsSeries *series = NULL;
    if (parcs_series_new(data, 100, 1, &series) != PARCS_STATUS_OK) return 10;
    ParcsDetectOptions opts;
    parcs_detect_options_default(&opts);
    opts.permutations = 200;
    opts.seed = 3;
    ParcsResult *result = NULL;
    if (parcs_detect(series, &opts, &result) != PARCS_STATUS_OK) return 11;
    if (parcs_result_count(result, true) != 1) return 12;
    ParcsChangePoint cp;
    if (parcs_result_change_point(result, true, 0, &cp) != PARCS_STATUS_OK) return 13;
    printf("%zu\n", cp.location);
    ParcsSeries *too_short = NULL;
    if (parcs_series_new(data, 2, 1, &too_short) != PARCS_STATUS_INVALID_INPUT) return 14;
    if (parcs_last_error_message() == NULL) return 15;
    parcs_result_free(result);
    parcs_series_free(series);
    return 0;
}
"#;

#[test]
fn c_program_links_and_runs() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("no C compiler; skipping");
        return;
    }
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap().to_path_buf();
    let lib = profile_dir.join("libparcs_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built; skipping", lib.display());
        return;
    }
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let tmp = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let src = tmp.join("parcs_smoke.c");
    let bin = tmp.join("parcs_smoke");
    std::fs::write(&src, PROGRAM).unwrap();
    let status = Command::new(&cc)
        .arg("-std=c11")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "50");
}
