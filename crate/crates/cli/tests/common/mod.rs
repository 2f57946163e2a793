#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_rc-lab"));
    c.env_remove("RC_LAB_OUTPUT_DIR");
    c
}

/// Runs the binary with `args`, writing into `dir`.
pub fn rc_lab(dir: &Path, args: &[&str]) -> Output {
    bin()
        .args(args)
        .arg("--output-dir")
        .arg(dir)
        .output()
        .expect("spawn rc-lab")
}

/// Like [`rc_lab`] but panics with stderr when the run fails.
pub fn rc_lab_ok(dir: &Path, args: &[&str]) {
    let out = rc_lab(dir, args);
    assert!(
        out.status.success(),
        "rc-lab {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

pub fn read_json(path: impl AsRef<Path>) -> Value {
    let text = fs::read_to_string(path.as_ref())
        .unwrap_or_else(|e| panic!("read {}: {e}", path.as_ref().display()));
    serde_json::from_str(&text).expect("valid JSON")
}

/// CSV rows keyed by header, skipping `#` comment lines.
pub fn read_csv(path: impl AsRef<Path>) -> Vec<BTreeMap<String, String>> {
    let text = fs::read_to_string(path.as_ref()).expect("read CSV");
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<String> = lines
        .next()
        .expect("header")
        .split(',')
        .map(str::to_string)
        .collect();
    lines
        .map(|l| {
            header
                .iter()
                .cloned()
                .zip(l.split(',').map(str::to_string))
                .collect()
        })
        .collect()
}

pub fn num(row: &BTreeMap<String, String>, key: &str) -> f64 {
    row[key]
        .parse()
        .unwrap_or_else(|_| panic!("{key} = {} is not a number", row[key]))
}

/// Every regular file under `dir` with its bytes, by file name.
pub fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).expect("read output dir") {
        let entry = entry.unwrap();
        out.insert(entry.file_name().into(), fs::read(entry.path()).unwrap());
    }
    out
}

/// Composite Simpson rule refined until successive halvings agree.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}
