#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

pub const BIN: &str = env!("CARGO_BIN_EXE_dsod");

pub fn dsod(args: &[&str]) -> Output {
    dsod_in(args, None)
}

/// Runs the binary with OUTPUT_DIR set to `dir` (or cleared).
pub fn dsod_in(args: &[&str], dir: Option<&Path>) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).env_remove("OUTPUT_DIR").env_remove("RUST_LOG");
    if let Some(dir) = dir {
        cmd.env("OUTPUT_DIR", dir);
    }
    cmd.output().expect("binary runs")
}

#[derive(Debug, Default)]
pub struct Csv {
    pub meta: BTreeMap<String, String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn parse(text: &str) -> Csv {
        let mut csv = Csv::default();
        for line in text.lines() {
            if let Some(m) = line.strip_prefix("# ") {
                if let Some((k, v)) = m.split_once(": ") {
                    csv.meta.entry(k.to_string()).or_insert_with(|| v.to_string());
                }
            } else if csv.columns.is_empty() {
                csv.columns = line.split(',').map(String::from).collect();
            } else {
                csv.rows.push(line.split(',').map(String::from).collect());
            }
        }
        csv
    }

    pub fn meta_f64(&self, key: &str) -> f64 {
        self.meta.get(key).unwrap_or_else(|| panic!("missing meta {key}")).parse().expect("numeric meta")
    }

    pub fn column(&self, name: &str) -> Vec<f64> {
        let i = self.columns.iter().position(|c| c == name).unwrap_or_else(|| panic!("missing column {name}"));
        self.rows.iter().map(|r| r[i].parse().expect("numeric cell")).collect()
    }
}

/// Runs a command expected to succeed and parses its standard output.
pub fn table(args: &[&str]) -> Csv {
    let out = dsod(args);
    assert!(
        out.status.success(),
        "dsod {args:?} exited with {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    Csv::parse(&String::from_utf8(out.stdout).expect("utf-8 output"))
}
