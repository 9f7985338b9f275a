// SPDX-License-Identifier: Apache-2.0

//! Rendered templates against checked-in files. Set `UPDATE_GOLDEN=1` to
//! rewrite them after an intended template change.

use std::fs;
use std::path::PathBuf;

use uvmforge::rtl::{classify_ports, extract_interface, DutInterface};
use uvmforge::tbgen::{render_template, ComponentKind};
use uvmforge::workspace::{parse_config, DutConfig};

pub const UART3: &str = "module uart(input clk, input rst_n, output reg [7:0] data);\nendmodule\n";

pub fn uart_cfg(top: &str) -> DutConfig {
    parse_config(&format!(
        r#"{{"top_module":"{top}","clock":{{"signal":"clk","period_ns":10}},"reset":{{"signal":"rst_n","active_level":0,"duration_cycles":5}}}}"#
    ))
    .unwrap()
}

pub fn classified(src: &str, top: &str) -> (DutInterface, DutConfig) {
    let cfg = uart_cfg(top);
    let iface = classify_ports(&extract_interface(&[src], top).unwrap(), &cfg).unwrap();
    (iface, cfg)
}

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Compares every template rendering with its golden; returns the
/// mismatching file names.
pub fn golden_mismatches() -> Vec<String> {
    let (iface, cfg) = classified(UART3, "uart");
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    let mut bad = Vec::new();
    for kind in ComponentKind::TEMPLATES {
        let c = render_template(kind, &iface, &cfg).unwrap();
        let path = golden_dir().join(&c.file_name);
        if update {
            fs::create_dir_all(golden_dir()).unwrap();
            fs::write(&path, &c.source).unwrap();
        }
        match fs::read_to_string(&path) {
            Ok(text) if text == c.source => {}
            _ => bad.push(c.file_name),
        }
    }
    bad
}

/// Number of `.port(` connections per port name in the rendered top.
pub fn connection_counts(iface: &DutInterface, top_text: &str) -> Vec<(String, usize)> {
    iface
        .ports
        .iter()
        .map(|p| (p.name.clone(), top_text.matches(&format!(".{}(", p.name)).count()))
        .collect()
}
