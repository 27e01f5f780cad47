#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn manifest_dir() -> &'static Path {
    Path::new(env!("CARGO_MANIFEST_DIR"))
}

pub fn run_env(args: &[&str], env: &[(&str, &str)]) -> Run {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dppchains"));
    // Inputs are passed as relative paths so the echoed header is stable across machines.
    cmd.current_dir(manifest_dir()).args(args).env_remove("DPPCHAINS_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("binary runs");
    Run {
        code: out.status.code().expect("exited normally"),
        stdout: String::from_utf8(out.stdout).expect("utf-8 stdout"),
        stderr: String::from_utf8(out.stderr).expect("utf-8 stderr"),
    }
}

pub fn run(args: &[&str]) -> Run {
    run_env(args, &[])
}

pub const DIAMOND: &str = "tests/data/diamond.json";
pub const RENEWAL: &str = "tests/data/renewal.json";
pub const SEMI: &str = "tests/data/semimarkov.json";
pub const SKEWED: &str = "tests/data/skewed.json";

/// Golden file name and arguments; every subcommand appears at least once.
pub const GOLDEN_CASES: &[(&str, &[&str])] = &[
    ("validate_diamond.json", &["validate", DIAMOND]),
    ("validate_renewal.json", &["validate", RENEWAL]),
    ("kernel_diamond.json", &["kernel", DIAMOND]),
    ("kernel_diamond.csv", &["kernel", DIAMOND, "--format", "csv"]),
    ("kernel_renewal.csv", &["kernel", RENEWAL, "--format", "csv"]),
    ("correlate_diamond.json", &["correlate", DIAMOND, "--set", "2,3"]),
    ("correlate_renewal.json", &["correlate", RENEWAL, "--set", "2,4,5"]),
    ("correlate_semimarkov.json", &["correlate", SEMI, "--set", "(a,1),(b,3)"]),
    ("gap_diamond.json", &["gap", DIAMOND, "--window", "3"]),
    ("gap_renewal.json", &["gap", RENEWAL, "--window", "3,4"]),
    ("lensemble_diamond.json", &["lensemble", DIAMOND, "--window", "2"]),
    ("lensemble_renewal.json", &["lensemble", RENEWAL, "--window", "6"]),
    ("lensemble_skewed.json", &["lensemble", SKEWED, "--window", "2,3,4"]),
    ("noise_diamond.csv", &["noise", DIAMOND, "--p", "0.1", "--q", "0.2", "--format", "csv"]),
    ("noise_renewal.json", &["noise", RENEWAL, "--p", "0.1", "--q", "0.1,0,0,0,0,0.3"]),
    ("sample_diamond.jsonl", &["sample", DIAMOND, "-n", "12", "--seed", "7"]),
    ("sample_renewal_noisy.jsonl", &["sample", RENEWAL, "-n", "12", "--seed", "7", "--p", "0.2", "--q", "0.1"]),
    ("enumerate_diamond.csv", &["enumerate", DIAMOND, "--format", "csv"]),
    ("enumerate_renewal.json", &["enumerate", RENEWAL]),
    ("renewal.json", &["renewal", RENEWAL]),
    ("semimarkov.json", &["semimarkov", SEMI]),
    ("renewalfn.json", &["renewalfn", RENEWAL, "--nmax", "40"]),
    ("renewalfn.csv", &["renewalfn", RENEWAL, "--nmax", "8", "--format", "csv"]),
    ("firstpassage.csv", &["firstpassage", SEMI, "--from", "a", "--to", "a", "--format", "csv"]),
    ("firstpassage.json", &["firstpassage", SEMI, "--from", "a", "--to", "b", "--tmax", "3"]),
    ("moments_diamond.json", &["moments", DIAMOND, "--window", "all"]),
    ("moments_renewal_noisy.json", &["moments", RENEWAL, "--window", "2,3,4,5", "--p", "0.1", "--q", "0.1"]),
    ("distribution_diamond.csv", &["distribution", DIAMOND, "--window", "all", "--format", "csv"]),
    ("distribution_renewal.json", &["distribution", RENEWAL, "--window", "all"]),
    ("clt_renewal.json", &["clt", RENEWAL, "--windows", "2,4,6", "-n", "2000", "--seed", "3"]),
    ("clt_renewal.csv", &["clt", RENEWAL, "--windows", "2,4,6", "-n", "2000", "--seed", "3", "--format", "csv"]),
];

pub fn golden_path(name: &str) -> PathBuf {
    manifest_dir().join("tests/golden").join(name)
}

/// Runs one golden case. With `DPPCHAINS_BLESS` set the golden is rewritten instead of compared.
pub fn check_golden(name: &str, args: &[&str]) -> Result<(), String> {
    let r = run(args);
    if r.code != 0 {
        return Err(format!("{args:?} exited {}: {}", r.code, r.stderr));
    }
    let path = golden_path(name);
    if std::env::var_os("DPPCHAINS_BLESS").is_some() {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(&path, &r.stdout).unwrap();
        return Ok(());
    }
    let want = fs::read_to_string(&path)
        .map_err(|e| format!("missing golden {}: {e}; run with DPPCHAINS_BLESS=1", path.display()))?;
    if r.stdout != want {
        return Err(format!("output of {args:?} differs from {name}"));
    }
    Ok(())
}

/// Arguments of randomized invocations used for the rerun and thread-count checks.
pub const RANDOMIZED_CASES: &[&[&str]] = &[
    &["sample", RENEWAL, "-n", "500", "--seed", "11", "--p", "0.1", "--q", "0.2"],
    &["sample", DIAMOND, "-n", "500", "--seed", "11"],
    &["clt", RENEWAL, "--windows", "3,6", "-n", "3000", "--seed", "5", "--format", "csv"],
];

/// Reruns each randomized case with one and four worker threads and with the default pool.
pub fn check_byte_identical_reruns() -> Result<(), String> {
    for args in RANDOMIZED_CASES {
        let a = run_env(args, &[("DPPCHAINS_THREADS", "1")]);
        let b = run_env(args, &[("DPPCHAINS_THREADS", "4")]);
        let c = run(args);
        if a.code != 0 {
            return Err(format!("{args:?} exited {}: {}", a.code, a.stderr));
        }
        if a.stdout != b.stdout {
            return Err(format!("{args:?}: thread count changed the output"));
        }
        if a.stdout != c.stdout {
            return Err(format!("{args:?}: rerun changed the output"));
        }
    }
    Ok(())
}

/// (arguments, expected exit code) for each documented failure class.
pub const EXIT_CASES: &[(&[&str], i32)] = &[
    (&["validate", "tests/data/bad.json"], 2),
    (&["validate", "tests/data/missing.json"], 2),
    (&["renewalfn", DIAMOND], 2),
    (&["correlate", DIAMOND, "--set", "2,9"], 2),
    (&["noise", DIAMOND, "--p", "0.1,0.2", "--q", "0"], 2),
    (&["frobnicate", DIAMOND], 2),
    (&["sample", DIAMOND], 2),
    (&["sample", DIAMOND, "-n", "5", "--strict"], 2),
    (&["validate", "tests/data/cycle.json"], 3),
    (&["gap", DIAMOND, "--window", "1,3"], 3),
    (&["lensemble", DIAMOND, "--window", "2,3"], 3),
    (&["lensemble", SKEWED, "--window", "2,3,4", "--tol", "0"], 4),
    (&["gap", SKEWED, "--window", "2,3,4", "--tol", "0"], 4),
    (&["correlate", DIAMOND, "--set", "2,3"], 0),
];

pub fn check_exit_codes() -> Result<(), String> {
    for (args, want) in EXIT_CASES {
        let r = run(args);
        if r.code != *want {
            return Err(format!("{args:?} exited {} (expected {want}): {}", r.code, r.stderr.trim()));
        }
    }
    Ok(())
}
