// SPDX-License-Identifier: Apache-2.0

//! Generation-agent prompts for the behavioural component kinds.

use std::collections::BTreeMap;

use super::{predecessors, ComponentKind, TbGenError, UvmComponent};
use crate::agent::{assemble_prompt, AgentPrompt, AgentRole, StageLabel};
use crate::planner::{FunctionPoint, TestPlan};
use crate::rtl::DutInterface;

/// What the component of `kind` is expected to do.
pub fn kind_responsibility(kind: ComponentKind, dut: &str) -> String {
    let n = |k: ComponentKind| k.type_name(dut);
    use ComponentKind::*;
    match kind {
        SeqItem => format!(
            "Write class {} extending uvm_sequence_item. Declare one rand field per DUT input that \
             carries data and one plain field per DUT output the scoreboard compares. Register every \
             field with the uvm_object_utils_begin/uvm_field_* macros and add constraints that keep \
             values legal for the design.",
            n(SeqItem)
        ),
        Sequence => format!(
            "Write class {} extending uvm_sequence #({}). Its body() creates, randomizes and sends \
             items with start_item/finish_item so that every listed function point is stimulated at \
             least once.",
            n(Sequence),
            n(SeqItem)
        ),
        Driver => format!(
            "Write class {} extending uvm_driver #({}). Fetch the virtual interface {} from \
             uvm_config_db under the key \"vif\" in build_phase. In run_phase wait for reset release, \
             then loop on seq_item_port.get_next_item, drive the item through the drv_cb clocking \
             block and call item_done.",
            n(Driver),
            n(SeqItem),
            n(Interface)
        ),
        Monitor => format!(
            "Write class {} extending uvm_monitor. Fetch the virtual interface {} from uvm_config_db \
             under \"vif\". Sample DUT activity through the mon_cb clocking block, rebuild {} objects \
             and publish them on a uvm_analysis_port named ap.",
            n(Monitor),
            n(Interface),
            n(SeqItem)
        ),
        Agent => format!(
            "Write class {} extending uvm_agent. Create {}, {} and {} in build_phase and connect the \
             driver's seq_item_port to the sequencer's seq_item_export in connect_phase. Expose the \
             monitor's analysis port as ap.",
            n(Agent),
            n(Sequencer),
            n(Driver),
            n(Monitor)
        ),
        Scoreboard => format!(
            "Write class {} extending uvm_scoreboard. Declare uvm_analysis_imp_decl-based or plain \
             uvm_analysis_imp exports that receive {} objects, model the expected DUT response and \
             report mismatches with `uvm_error using the id CMP.",
            n(Scoreboard),
            n(SeqItem)
        ),
        Env => format!(
            "Write class {} extending uvm_env. Create {} and {} in build_phase and connect the agent's \
             analysis port to the scoreboard's export in connect_phase.",
            n(Env),
            n(Agent),
            n(Scoreboard)
        ),
        Testcase => format!(
            "Write class {} extending uvm_test. Build {} in build_phase. In run_phase raise an \
             objection, start {} on the agent's sequencer, then drop the objection.",
            n(Testcase),
            n(Env),
            n(Sequence)
        ),
        Interface | Top | Sequencer => String::new(),
    }
}

/// Recurring mistakes the agent is warned about for `kind`.
pub fn kind_pitfalls(kind: ComponentKind) -> Vec<&'static str> {
    let mut list = vec![
        "Use exactly the class, interface and signal names given above; do not rename or invent identifiers.",
        "Start the file with `include \"uvm_macros.svh\" and import uvm_pkg::*; and register the class with the matching uvm_*_utils macro.",
        "Return one complete SystemVerilog file in a single ```systemverilog code block.",
    ];
    use ComponentKind::*;
    match kind {
        Driver => list.extend([
            "Drive DUT inputs only; outputs of the DUT are never assigned.",
            "Hold off driving until reset has been released and return idle values during reset.",
            "Every get_next_item must be paired with item_done.",
        ]),
        Monitor => list.extend([
            "Declare and construct the uvm_analysis_port before writing to it.",
            "Sample through the clocking block, never with blocking reads of raw signals mid-cycle.",
            "Ignore bus activity while reset is asserted.",
        ]),
        Scoreboard => list.extend([
            "Declare the analysis implementation (uvm_analysis_imp or the `uvm_analysis_imp_decl macro) and provide the matching write function.",
            "Clear the reference model state on reset.",
        ]),
        Agent | Env => list.extend([
            "Create children with type_id::create in build_phase and make TLM connections only in connect_phase.",
            "Connect ports to exports of matching transaction type.",
        ]),
        SeqItem => list.extend([
            "Field widths must match the DUT port widths exactly.",
            "Call super.new(name) in the constructor.",
        ]),
        Sequence | Testcase => list.extend([
            "Raise and drop objections around stimulus so the test does not end at time zero.",
            "Randomize items with randomize() and check the result.",
        ]),
        Interface | Top | Sequencer => {}
    }
    list
}

fn format_point(fp: &FunctionPoint, detailed: bool) -> String {
    let mut s = format!("- {}: {}\n", fp.id, fp.description);
    if detailed {
        for (label, value) in [
            ("stimulus", &fp.stimulus_conditions),
            ("observe", &fp.observability),
            ("coverage goal", &fp.coverage_goal),
            ("draft testcase", &fp.draft_testcase),
        ] {
            if !value.trim().is_empty() {
                let indented = value.replace('\n', "\n    ");
                s.push_str(&format!("  {label}: {indented}\n"));
            }
        }
    }
    s
}

/// Stage bodies of the generation prompt for `kind`.
pub(crate) fn generation_parts(
    kind: ComponentKind,
    plan: &TestPlan,
    deps: &[&UvmComponent],
    iface: &DutInterface,
) -> Result<BTreeMap<StageLabel, String>, TbGenError> {
    if kind.is_template() {
        return Err(TbGenError::NotAnAgentKind(kind));
    }
    let dut = iface.module_name.to_lowercase();
    let mut dep_text = String::new();
    for pred in predecessors(kind) {
        let dep = deps
            .iter()
            .find(|d| d.kind == pred)
            .ok_or(TbGenError::MissingDependency { kind, missing: pred })?;
        dep_text.push_str(&format!(
            "### {} ({})\n```systemverilog\n{}\n```\n\n",
            pred.type_name(&dut),
            dep.file_name,
            dep.source.trim_end()
        ));
    }
    if dep_text.is_empty() {
        dep_text.push_str("This component has no testbench dependencies.\n\n");
    }
    dep_text.push_str(&format!("DUT interface:\n{}", iface.summary()));

    let detailed = matches!(
        kind,
        ComponentKind::SeqItem
            | ComponentKind::Sequence
            | ComponentKind::Monitor
            | ComponentKind::Scoreboard
            | ComponentKind::Testcase
    );
    let mut expectation = kind_responsibility(kind, &dut);
    expectation.push_str(&format!("\n\nThe file is named {}.\n", kind.file_name(&dut)));
    if !plan.points.is_empty() {
        expectation.push_str("\nFunction points from the test plan:\n");
        for fp in &plan.points {
            expectation.push_str(&format_point(fp, detailed));
        }
    }

    let pitfalls: String = kind_pitfalls(kind).into_iter().map(|p| format!("- {p}\n")).collect();

    let role = format!(
        "You are an experienced UVM verification engineer writing the {} component of a UVM 1.2 \
         testbench for the {} design. You write synthesizable-quality, compilable SystemVerilog.",
        kind.slug(),
        iface.module_name
    );

    Ok(BTreeMap::from([
        (StageLabel::RoleCustomisation, role),
        (StageLabel::DependencyDefinition, dep_text),
        (StageLabel::FunctionExpectation, expectation),
        (StageLabel::MistakeMitigation, pitfalls),
    ]))
}

/// Four-stage generation prompt: role, dependency sources, expected
/// behaviour with the relevant function points, known pitfalls.
pub fn build_generation_prompt(
    kind: ComponentKind,
    plan: &TestPlan,
    deps: &[&UvmComponent],
    iface: &DutInterface,
) -> Result<AgentPrompt, TbGenError> {
    let parts = generation_parts(kind, plan, deps, iface)?;
    Ok(assemble_prompt(AgentRole::Generation(kind), parts)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::parse_test_plan;
    use crate::rtl::extract_interface;
    use crate::tbgen::Provenance;

    fn dep(kind: ComponentKind, body: &str) -> UvmComponent {
        UvmComponent {
            kind,
            file_name: kind.file_name("uart"),
            source: body.into(),
            version: 1,
            provenance: Provenance::Template {
                template_id: "t".into(),
            },
        }
    }

    fn iface() -> DutInterface {
        extract_interface(
            &["module uart(input clk, input rst_n, output [7:0] data); endmodule"],
            "uart",
        )
        .unwrap()
    }

    fn plan() -> TestPlan {
        parse_test_plan(
            "[FUNCTION_POINT]\nid: FP-1\ndescription: transmit a byte\nstimulus_conditions: write data\n\
             [FUNCTION_POINT]\nid: FP-2\ndescription: parity error flagged\n",
        )
        .unwrap()
    }

    #[test]
    fn monitor_embeds_interface_and_item() {
        let intf = dep(ComponentKind::Interface, "interface uart_if; logic clk; endinterface");
        let item = dep(
            ComponentKind::SeqItem,
            "class uart_seq_item extends uvm_sequence_item; endclass",
        );
        let p = build_generation_prompt(ComponentKind::Monitor, &plan(), &[&intf, &item], &iface()).unwrap();
        let deps = p.stage(StageLabel::DependencyDefinition).unwrap();
        assert!(deps.contains(&intf.source));
        assert!(deps.contains(&item.source));
        assert_eq!(p.stages.len(), 4);
    }

    #[test]
    fn driver_without_interface() {
        let item = dep(ComponentKind::SeqItem, "class x; endclass");
        assert!(matches!(
            build_generation_prompt(ComponentKind::Driver, &plan(), &[&item], &iface()),
            Err(TbGenError::MissingDependency {
                kind: ComponentKind::Driver,
                missing: ComponentKind::Interface
            })
        ));
    }

    #[test]
    fn scoreboard_lists_points_and_pitfalls() {
        let item = dep(ComponentKind::SeqItem, "class x; endclass");
        let p = build_generation_prompt(ComponentKind::Scoreboard, &plan(), &[&item], &iface()).unwrap();
        let fe = p.stage(StageLabel::FunctionExpectation).unwrap();
        assert!(fe.contains("FP-1: transmit a byte"));
        assert!(fe.contains("FP-2"));
        assert!(p
            .stage(StageLabel::MistakeMitigation)
            .unwrap()
            .contains("analysis implementation"));
    }

    #[test]
    fn template_kinds_have_no_prompt() {
        assert!(matches!(
            build_generation_prompt(ComponentKind::Top, &plan(), &[], &iface()),
            Err(TbGenError::NotAnAgentKind(ComponentKind::Top))
        ));
    }
}
