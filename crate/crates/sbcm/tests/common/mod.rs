#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn sbcm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sbcm")).args(args).output().expect("binary runs")
}

/// Runs the binary and panics with its stderr unless it exits 0.
pub fn ok(args: &[&str]) -> String {
    let out = sbcm(args);
    assert!(out.status.success(), "sbcm {args:?} failed:\n{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

/// Small mixtures and a 2x2 band grid, for quick end-to-end runs.
pub const TINY_CONFIG: &str = "\
seed = 7

[gmm]
components = 2
max_iters = 20

[grid]
cut_in = [0.0, 2000.0]
cut_off = [4000.0, 8000.0]
min_width = 800.0

[fusion]
gmm_components = 2
";

pub const TINY_SYNTH: &str = "\
n_bona = 6
duration_s = 0.5

[[attacks]]
attack_id = \"A01\"
count = 6
f_lo = 2000.0
f_hi = 4000.0
";

/// Parses report rows `name n_bona n_spoof eer min_tdcf`.
pub fn report_rows(text: &str) -> Vec<(String, usize, usize, f64, f64)> {
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("name\t"))
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            (f[0].to_string(), f[1].parse().unwrap(), f[2].parse().unwrap(), f[3].parse().unwrap(), f[4].parse().unwrap())
        })
        .collect()
}
