// SPDX-License-Identifier: Apache-2.0

mod common;

use proptest::prelude::*;
use pulldown_cmark::{Event, Parser, Tag, TagEnd};

use uvmforge::agent::StageLabel;
use uvmforge::planner::build_analysis_prompt;
use uvmforge::rtl::extract_interface;
use uvmforge::workspace::index_spec;

/// Headings and their byte offsets as a CommonMark parser sees them.
fn cmark_headings(doc: &str) -> Vec<(String, usize)> {
    let mut out = Vec::new();
    let mut current: Option<(String, usize)> = None;
    for (event, range) in Parser::new(doc).into_offset_iter() {
        match event {
            Event::Start(Tag::Heading { .. }) => current = Some((String::new(), range.start)),
            Event::End(TagEnd::Heading(_)) => out.extend(current.take()),
            Event::Text(t) | Event::Code(t) => {
                if let Some((text, _)) = current.as_mut() {
                    text.push_str(&t);
                }
            }
            _ => {}
        }
    }
    out
}

fn word() -> impl Strategy<Value = String> {
    "[A-Za-z][a-z0-9]{0,7}"
}

fn block() -> impl Strategy<Value = String> {
    prop_oneof![
        (
            1usize..=6,
            0usize..=3,
            prop::collection::vec(word(), 1..4),
            any::<bool>()
        )
            .prop_map(|(level, indent, words, closing)| {
                let hashes = "#".repeat(level);
                let tail = if closing { format!(" {hashes}") } else { String::new() };
                format!("{}{hashes} {}{tail}\n", " ".repeat(indent), words.join(" "))
            }),
        prop::collection::vec(word(), 1..10).prop_map(|w| format!("{}\n", w.join(" "))),
        (
            prop_oneof![Just('`'), Just('~')],
            3usize..6,
            prop::collection::vec(word(), 0..3)
        )
            .prop_map(|(ch, len, words)| {
                let fence = ch.to_string().repeat(len);
                format!("{fence}text\n# not a heading {}\n{fence}\n", words.join(" "))
            }),
        prop::collection::vec(word(), 1..4).prop_map(|w| format!("- {}\n", w.join(" "))),
    ]
}

fn document() -> impl Strategy<Value = String> {
    prop::collection::vec(block(), 0..16).prop_map(|blocks| blocks.join("\n"))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn index_matches_commonmark(doc in document()) {
        let ours: Vec<(String, usize)> = index_spec(&doc)
            .section_index
            .into_iter()
            .map(|s| (s.heading, s.offset))
            .collect();
        prop_assert_eq!(ours, cmark_headings(&doc));
    }
}

#[test]
fn toy_spec_headings() {
    let text = std::fs::read_to_string(common::toy_workspace().join("spec.md")).unwrap();
    let ours: Vec<String> = index_spec(&text).headings().map(str::to_string).collect();
    let theirs: Vec<String> = cmark_headings(&text).into_iter().map(|h| h.0).collect();
    assert_eq!(ours, theirs);
    assert_eq!(ours.len(), 5);
}

#[test]
fn ten_sections_reach_the_prompt() {
    let doc: String = (1..=10).map(|i| format!("## Section {i}\n\nbody {i}\n\n")).collect();
    let spec = index_spec(&doc);
    let iface = extract_interface(
        &["module uart(input clk, input rst_n, output reg [7:0] data);\nendmodule"],
        "uart",
    )
    .unwrap();
    let prompt = build_analysis_prompt(&spec, &iface);
    let stage = prompt.stage(StageLabel::TestPlanFormulation).unwrap();
    let outline = &stage[..stage.find("<<<").unwrap()];
    for i in 1..=10 {
        assert!(outline.contains(&format!("- Section {i}\n")), "missing heading {i}");
    }
}
