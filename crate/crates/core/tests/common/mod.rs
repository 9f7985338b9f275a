// SPDX-License-Identifier: Apache-2.0

// Each test binary uses a different subset of these helpers.
#![allow(dead_code)]

pub mod cli;
pub mod golden;
pub mod oracle;
pub mod refparse;
pub mod rounds;
pub mod scenarios;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use proptest::prelude::*;

use uvmforge::agent::MockBackend;
use uvmforge::harness::{RunOptions, Session};
use uvmforge::planner::TestPlan;
use uvmforge::tbgen::Testbench;

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn toy_workspace() -> PathBuf {
    fixture_dir().join("uart_ws")
}

pub fn copy_tree(src: &Path, dst: &Path) {
    fs::create_dir_all(dst).unwrap();
    for entry in fs::read_dir(src).unwrap() {
        let entry = entry.unwrap();
        let to = dst.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            if entry.file_name() == "out" {
                continue;
            }
            copy_tree(&entry.path(), &to);
        } else {
            fs::copy(entry.path(), to).unwrap();
        }
    }
}

/// Copy of the toy workspace inside a fresh temporary directory.
pub fn toy_copy() -> (tempfile::TempDir, PathBuf) {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("uart_ws");
    copy_tree(&toy_workspace(), &root);
    (tmp, root)
}

pub fn toy_backend(root: &Path) -> MockBackend {
    MockBackend::new(root.join("fixtures"))
}

/// Toy session with its plan and a freshly generated testbench.
pub fn toy_session(root: &Path) -> (Session, TestPlan, Testbench) {
    let session = Session::open(root, &RunOptions::default()).unwrap();
    let backend = toy_backend(root);
    let plan = session.plan(&backend).unwrap();
    let tb = session.generate(&plan, &backend).unwrap();
    (session, plan, tb)
}

/// Contents of every file in `dir`, keyed by name.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpectedPort {
    pub name: String,
    pub direction: &'static str,
    pub msb: i64,
    pub lsb: i64,
}

#[derive(Debug, Clone)]
pub struct Header {
    pub module: String,
    pub source: String,
    pub params: BTreeMap<String, i64>,
    pub ports: Vec<ExpectedPort>,
}

const PARAM_NAMES: [&str; 4] = ["WIDTH", "DEPTH", "N", "ADDR_W"];
const PORT_NAMES: [&str; 12] = [
    "data_in", "data_out", "valid", "ready", "addr", "wdata", "rdata", "we", "irq", "sel", "bus", "status",
];

struct Draw<'a>(&'a [u32], usize);

impl Draw<'_> {
    fn below(&mut self, n: u32) -> u32 {
        let v = self.0[self.1 % self.0.len()];
        self.1 += 1;
        v % n
    }
}

/// Builds a synthetic ANSI module header from a pool of random numbers.
/// `clocked` puts `clk` and `rst_n` first.
pub fn build_header(pool: &[u32], clocked: bool) -> Header {
    let mut d = Draw(pool, 0);
    let module = format!("dut_{}", d.below(1000));
    let n_params = d.below(4) as usize;
    let mut params: Vec<(String, i64)> = Vec::new();
    for name in PARAM_NAMES.iter().take(n_params) {
        params.push((name.to_string(), 1 + d.below(32) as i64));
    }
    let mut src = String::new();
    if d.below(2) == 0 {
        src.push_str("// synthetic header\n");
    }
    src.push_str(&format!("module {module}"));
    if !params.is_empty() {
        let items: Vec<String> = params
            .iter()
            .enumerate()
            .map(|(i, (n, v))| {
                if i == 0 || d.below(2) == 0 {
                    format!("parameter {n} = {v}")
                } else {
                    format!("{n} = {v}")
                }
            })
            .collect();
        src.push_str(&format!(" #(\n    {}\n)", items.join(",\n    ")));
    }
    src.push_str(" (\n");

    let mut ports = Vec::new();
    let mut items = Vec::new();
    if clocked {
        items.push("    input wire clk".to_string());
        items.push("    input wire rst_n".to_string());
        for n in ["clk", "rst_n"] {
            ports.push(ExpectedPort {
                name: n.into(),
                direction: "input",
                msb: 0,
                lsb: 0,
            });
        }
    }
    let n_ports = 1 + d.below(8) as usize;
    for i in 0..n_ports {
        let name = format!("{}_{i}", PORT_NAMES[d.below(PORT_NAMES.len() as u32) as usize]);
        let direction = ["input", "output", "inout"][d.below(3) as usize];
        let kind = match (direction, d.below(4)) {
            (_, 0) => "",
            ("output", 1) => "reg ",
            (_, 2) => "logic ",
            _ => "wire ",
        };
        let (range, msb, lsb) = match d.below(4) {
            0 => (String::new(), 0, 0),
            1 if !params.is_empty() => {
                let (p, v) = &params[d.below(params.len() as u32) as usize];
                (format!("[{p}-1:0] "), v - 1, 0)
            }
            2 if !params.is_empty() => {
                let (p, v) = &params[d.below(params.len() as u32) as usize];
                (format!("[{p}*2-1:0] "), 2 * v - 1, 0)
            }
            _ => {
                let w = 1 + d.below(64) as i64;
                (format!("[{}:0] ", w - 1), w - 1, 0)
            }
        };
        let comment = if d.below(3) == 0 {
            format!(" /* port {i} */")
        } else {
            String::new()
        };
        items.push(format!("    {direction} {kind}{range}{name}{comment}"));
        ports.push(ExpectedPort {
            name,
            direction,
            msb,
            lsb,
        });
    }
    src.push_str(&items.join(",\n"));
    src.push_str("\n);\n  // body\n  assign unused = 1'b0;\nendmodule\n");
    Header {
        module,
        source: src,
        params: params.into_iter().collect(),
        ports,
    }
}

pub fn header_strategy(clocked: bool) -> impl Strategy<Value = Header> {
    prop::collection::vec(any::<u32>(), 64).prop_map(move |pool| build_header(&pool, clocked))
}

/// `n` headers drawn with proptest's deterministic RNG.
pub fn header_corpus(n: usize, clocked: bool) -> Vec<Header> {
    use proptest::strategy::ValueTree;
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    let strategy = header_strategy(clocked);
    (0..n)
        .map(|_| strategy.new_tree(&mut runner).unwrap().current())
        .collect()
}
