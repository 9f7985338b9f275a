// SPDX-License-Identifier: Apache-2.0

//! Code extraction from free-form model output.

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FencedBlock<'a> {
    /// Info string after the opening fence, trimmed.
    pub info: &'a str,
    pub body: &'a str,
}

impl FencedBlock<'_> {
    pub fn line_count(&self) -> usize {
        self.body.lines().count()
    }

    fn is_hdl(&self) -> bool {
        let lang = self.info.split_whitespace().next().unwrap_or("");
        lang.is_empty() || lang.eq_ignore_ascii_case("systemverilog") || lang.eq_ignore_ascii_case("verilog")
    }
}

/// All fenced code blocks of `text`, in order. An unclosed fence runs to the
/// end of the text.
pub fn fenced_blocks(text: &str) -> Vec<FencedBlock<'_>> {
    let mut blocks = Vec::new();
    let mut open: Option<(u8, usize, &str, usize)> = None; // char, len, info, body start
    let mut offset = 0usize;
    for line in text.split_inclusive('\n') {
        let line_start = offset;
        offset += line.len();
        let content = line.trim_end_matches(['\n', '\r']);
        let indent = content.bytes().take_while(|&b| b == b' ').count();
        if indent > 3 {
            continue;
        }
        let rest = &content[indent..];
        let Some(&ch) = rest.as_bytes().first() else {
            continue;
        };
        if ch != b'`' && ch != b'~' {
            continue;
        }
        let run = rest.bytes().take_while(|&b| b == ch).count();
        if run < 3 {
            continue;
        }
        match open {
            Some((och, olen, info, start)) => {
                if ch == och && run >= olen && rest[run..].trim().is_empty() {
                    blocks.push(FencedBlock {
                        info,
                        body: strip_final_newline(&text[start..line_start]),
                    });
                    open = None;
                }
            }
            None => {
                let info = rest[run..].trim();
                if ch == b'`' && info.contains('`') {
                    continue;
                }
                open = Some((ch, run, info, offset));
            }
        }
    }
    if let Some((_, _, info, start)) = open {
        blocks.push(FencedBlock {
            info,
            body: strip_final_newline(&text[start.min(text.len())..]),
        });
    }
    blocks
}

fn strip_final_newline(s: &str) -> &str {
    s.strip_suffix("\r\n").or_else(|| s.strip_suffix('\n')).unwrap_or(s)
}

/// Picks the generated source out of a model response.
///
/// The longest fenced block tagged `systemverilog`, `verilog` or untagged
/// wins (first one on ties). Without any fence, text that opens with a
/// `module`/`class`/`interface`/`package` declaration is taken whole.
pub fn extract_code(resp_text: &str) -> Option<String> {
    let blocks = fenced_blocks(resp_text);
    if blocks.is_empty() {
        let first_word = resp_text
            .trim_start()
            .split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .next()
            .unwrap_or("");
        return matches!(first_word, "module" | "class" | "interface" | "package").then(|| resp_text.to_string());
    }
    let mut best: Option<&FencedBlock<'_>> = None;
    for block in blocks.iter().filter(|b| b.is_hdl()) {
        if best.is_none_or(|b| block.line_count() > b.line_count()) {
            best = Some(block);
        }
    }
    best.map(|b| b.body.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn numbered(n: usize, tag: &str) -> String {
        (1..=n).map(|i| format!("// {tag} line {i}\n")).collect()
    }

    #[test]
    fn single_systemverilog_fence() {
        let body = numbered(40, "a");
        let text = format!("Here is the driver:\n```systemverilog\n{body}```\nDone.");
        let code = extract_code(&text).unwrap();
        assert_eq!(code.lines().count(), 40);
        assert_eq!(code, body.trim_end());
        assert!(text.contains(&code));
    }

    #[test]
    fn prose_only_is_absent() {
        assert_eq!(extract_code("I cannot help with that."), None);
        assert_eq!(extract_code(""), None);
    }

    #[test]
    fn longest_of_two_fences() {
        let text = format!(
            "```verilog\n{}```\nand\n```\n{}```\n",
            numbered(10, "short"),
            numbered(30, "long")
        );
        let code = extract_code(&text).unwrap();
        assert_eq!(code.lines().count(), 30);
        assert!(code.contains("long line 30"));
    }

    #[test]
    fn other_languages_skipped() {
        let text = "```python\nprint(1)\nprint(2)\n```\n```sv\nx\n```\n```SystemVerilog\nclass a; endclass\n```";
        assert_eq!(extract_code(text).unwrap(), "class a; endclass");
        assert_eq!(extract_code("```python\nprint(1)\n```"), None);
    }

    #[test]
    fn bare_declaration_taken_whole() {
        let text = "class uart_seq_item extends uvm_sequence_item;\nendclass\n";
        assert_eq!(extract_code(text).as_deref(), Some(text));
        assert_eq!(
            extract_code("  module m; endmodule").as_deref(),
            Some("  module m; endmodule")
        );
        assert_eq!(extract_code("modules are great"), None);
    }

    #[test]
    fn unclosed_fence_runs_to_end() {
        let text = "```systemverilog\nclass a;\nendclass\n";
        assert_eq!(extract_code(text).unwrap(), "class a;\nendclass");
    }

    #[test]
    fn tilde_fences_and_crlf() {
        let text = "~~~verilog\r\nmodule m;\r\nendmodule\r\n~~~\r\n";
        assert_eq!(extract_code(text).unwrap(), "module m;\r\nendmodule");
    }
}
