//! Compiles and runs a small C client against the generated header and
//! the static library, proving the ABI from the consumer side.

use std::path::PathBuf;
use std::process::Command;

const C_SOURCE: &str = r#"
#include <stdio.h>
#include "fieldprobe.h"

int main(void) {
    FpLattice *lattice = NULL;
    if (fp_lattice_new(20, 48, 0.7, 1.0, &lattice) != FP_STATUS_OK) return 1;
    FpGrid *rho = NULL;
    FpGrid *h = NULL;
    if (fp_grid_new(lattice, &rho) != FP_STATUS_OK) return 2;
    if (fp_grid_new(lattice, &h) != FP_STATUS_OK) return 3;
    for (unsigned t = 6; t <= 8; t++)
        for (unsigned x = 20; x <= 26; x++)
            fp_grid_set(rho, t, x, 0.8, 0.0);
    fp_grid_set(h, 14, 22, 1.0, 0.0);
    FpGrid *f_minus = NULL;
    FpGrid *h_minus = NULL;
    FpStatus status = fp_scattered_pair(lattice, 0.9, 0.6, rho, 0.5, h, &f_minus, &h_minus);
    if (status != FP_STATUS_OK) {
        fprintf(stderr, "scatter failed: %s\n", fp_last_error_message());
        return 4;
    }
    double re = 0.0, im = 0.0;
    int nonzero = 0;
    for (unsigned t = 0; t < 20; t++)
        for (unsigned x = 0; x < 48; x++) {
            fp_grid_get(f_minus, t, x, &re, &im);
            if (re != 0.0 || im != 0.0) {
                if (t < 6 || t > 8 || x < 20 || x > 26) return 5;
                nonzero++;
            }
        }
    if (nonzero == 0) return 6;
    printf("ok %s nonzero=%d\n", fp_version(), nonzero);
    fp_grid_free(f_minus);
    fp_grid_free(h_minus);
    fp_grid_free(h);
    fp_grid_free(rho);
    fp_lattice_free(lattice);
    return 0;
}
"#;

#[test]
fn c_client_links_and_runs() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let include_dir = manifest.join("include");
    // workspace target dir: the staticlib is built alongside the test
    let profile_dir = {
        let mut p = std::env::current_exe().unwrap();
        p.pop(); // test binary
        p.pop(); // deps/
        p
    };
    let staticlib = profile_dir.join("libfieldprobe_ffi.a");
    assert!(
        staticlib.exists(),
        "static library missing at {staticlib:?}; build the lib target first"
    );
    let work = std::env::temp_dir().join(format!("fieldprobe-c-{}", std::process::id()));
    std::fs::create_dir_all(&work).unwrap();
    let c_file = work.join("smoke.c");
    std::fs::write(&c_file, C_SOURCE).unwrap();
    let exe = work.join("smoke");
    let compile = Command::new("cc")
        .arg(&c_file)
        .arg("-I")
        .arg(&include_dir)
        .arg(&staticlib)
        .args(["-lpthread", "-ldl", "-lm"])
        .arg("-o")
        .arg(&exe)
        .output()
        .expect("cc is available");
    assert!(
        compile.status.success(),
        "compile failed:\n{}",
        String::from_utf8_lossy(&compile.stderr)
    );
    let run = Command::new(&exe).output().unwrap();
    assert!(
        run.status.success(),
        "c client exited with {:?}: {}",
        run.status.code(),
        String::from_utf8_lossy(&run.stderr)
    );
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(stdout.starts_with("ok "), "{stdout}");
}
