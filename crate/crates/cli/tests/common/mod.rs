#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

use tempfile::TempDir;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

/// Fixture copied into a fresh directory, since runs write mapcache.csv
/// next to their inputs.
pub fn workdir(name: &str) -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    for entry in std::fs::read_dir(fixture(name)).unwrap() {
        let entry = entry.unwrap();
        std::fs::copy(entry.path(), dir.path().join(entry.file_name())).unwrap();
    }
    dir
}

pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn carat(dir: &Path, args: &[&str]) -> Outcome {
    carat_env(dir, args, &[])
}

pub fn carat_env(dir: &Path, args: &[&str], env: &[(&str, &str)]) -> Outcome {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_carat"));
    cmd.current_dir(dir).args(args);
    for (k, _) in std::env::vars() {
        if k.starts_with("CARAT_") {
            cmd.env_remove(k);
        }
    }
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().unwrap();
    Outcome {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

pub fn tables<'a>(inlet: &'a str, out: &'a str) -> Vec<&'a str> {
    vec!["--bom", "bom.csv", "--bos", "bos.csv", "--mix", "mix.csv", "--inlet", inlet, "--mapper", "file:mapped.csv", "--out", out]
}

/// share column of beta.csv for one (node, smiles, attribute) row.
pub fn beta(path: &Path, location: &str, smiles: &str, attribute: &str) -> f64 {
    let text = std::fs::read_to_string(path).unwrap();
    let mut hits = text.lines().skip(1).filter_map(|line| {
        let f: Vec<&str> = line.split(',').collect();
        let loc = if f[0] == "mix" {
            format!("d:{}|{}", f[1], f[4])
        } else {
            format!("t:{}|{}|{}/{}", f[1], f[2], f[3], f[4])
        };
        (loc == location && f[5] == smiles && f[7] == attribute).then(|| f[8].parse::<f64>().unwrap())
    });
    let v = hits.next().unwrap_or_else(|| panic!("no beta row for {location} {smiles} {attribute}"));
    assert!(hits.next().is_none());
    v
}
