// SPDX-License-Identifier: Apache-2.0

//! Rendering of the template-generated components.
//!
//! Templates are plain text with `{{name}}` placeholders. All computed text
//! (declarations, connection lists) is produced here and substituted whole.

use std::collections::BTreeMap;

use super::{ComponentKind, Provenance, TbGenError, UvmComponent};
use crate::rtl::{Direction, DutInterface, Port};
use crate::workspace::DutConfig;

const INTERFACE_TMPL: &str = include_str!("templates/interface.sv.tmpl");
const TOP_TMPL: &str = include_str!("templates/top.sv.tmpl");
const SEQUENCER_TMPL: &str = include_str!("templates/sequencer.sv.tmpl");

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("template {template}: no value for placeholder `{name}`")]
    UnboundPlaceholder { template: String, name: String },
    #[error("template {template}: unterminated placeholder at byte {offset}")]
    Unterminated { template: String, offset: usize },
}

/// Replaces every `{{name}}` in `text` with its binding.
pub fn substitute(template_id: &str, text: &str, bindings: &BTreeMap<&str, String>) -> Result<String, TemplateError> {
    let mut out = String::with_capacity(text.len() * 2);
    let mut rest = text;
    let mut consumed = 0usize;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after.find("}}").ok_or(TemplateError::Unterminated {
            template: template_id.into(),
            offset: consumed + start,
        })?;
        let name = after[..end].trim();
        let value = bindings.get(name).ok_or_else(|| TemplateError::UnboundPlaceholder {
            template: template_id.into(),
            name: name.into(),
        })?;
        out.push_str(value);
        let advance = start + 2 + end + 2;
        consumed += advance;
        rest = &rest[advance..];
    }
    out.push_str(rest);
    Ok(out)
}

fn range(p: &Port) -> String {
    if p.width() == 1 && p.msb == 0 && p.lsb == 0 {
        String::new()
    } else {
        format!("[{}:{}] ", p.msb, p.lsb)
    }
}

/// Delay literal for half a clock period, without trailing zeros.
fn half_period(period_ns: f64) -> String {
    let half = period_ns / 2.0;
    let mut s = format!("{half:.6}");
    while s.ends_with('0') {
        s.pop();
    }
    if s.ends_with('.') {
        s.pop();
    }
    s
}

fn format_period(period_ns: f64) -> String {
    half_period(period_ns * 2.0)
}

/// Renders Interface, Top or Sequencer for a classified interface.
pub fn render_template(kind: ComponentKind, iface: &DutInterface, cfg: &DutConfig) -> Result<UvmComponent, TbGenError> {
    let (template, text) = match kind {
        ComponentKind::Interface => ("interface", INTERFACE_TMPL),
        ComponentKind::Top => ("top", TOP_TMPL),
        ComponentKind::Sequencer => ("sequencer", SEQUENCER_TMPL),
        other => return Err(TbGenError::NotATemplateKind(other)),
    };
    let (clock, reset) = match (iface.clock(), iface.reset()) {
        (Some(c), Some(r)) if c.name == cfg.clock.signal && r.name == cfg.reset.signal => (c, r),
        _ => return Err(TbGenError::UnclassifiedClock),
    };

    let prefix = cfg.top_module.to_lowercase();
    let mut b: BTreeMap<&str, String> = BTreeMap::new();
    b.insert("file_name", kind.file_name(&prefix));
    b.insert("prefix", prefix.clone());
    b.insert("dut_module", cfg.top_module.clone());
    b.insert("clock", clock.name.clone());
    b.insert("reset", reset.name.clone());

    match kind {
        ComponentKind::Interface => {
            let decls: Vec<String> = iface
                .ports
                .iter()
                .map(|p| format!("  logic {}{};", range(p), p.name))
                .collect();
            b.insert("signal_decls", decls.join("\n"));
            let mut drv = Vec::new();
            let mut mon = Vec::new();
            for p in iface.ports.iter().filter(|p| !p.is_clock) {
                let drv_dir = match (p.is_reset, p.direction) {
                    (true, _) | (_, Direction::Output) => "input ",
                    (_, Direction::Input) => "output",
                    (_, Direction::Inout) => "inout ",
                };
                drv.push(format!("    {drv_dir} {};", p.name));
                mon.push(format!("    input  {};", p.name));
            }
            b.insert("drv_cb_items", drv.join("\n"));
            b.insert("mon_cb_items", mon.join("\n"));
        }
        ComponentKind::Top => {
            b.insert("period", format_period(cfg.clock.period_ns));
            b.insert("half_period", half_period(cfg.clock.period_ns));
            let active = cfg.reset.active_level.min(1);
            b.insert("reset_active", active.to_string());
            b.insert("reset_inactive", (1 - active).to_string());
            b.insert("reset_cycles", cfg.reset.duration_cycles.to_string());
            let conns: Vec<String> = iface
                .ports
                .iter()
                .map(|p| format!("    .{0}(dut_if.{0})", p.name))
                .collect();
            b.insert("port_connections", conns.join(",\n"));
        }
        _ => {}
    }

    let source = substitute(template, text, &b)?;
    Ok(UvmComponent {
        kind,
        file_name: kind.file_name(&prefix),
        source,
        version: 1,
        provenance: Provenance::Template {
            template_id: template.into(),
        },
    })
}
