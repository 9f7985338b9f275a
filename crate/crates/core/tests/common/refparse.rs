// SPDX-License-Identifier: Apache-2.0

//! Deliberately naive ANSI header reader used as a test oracle. It works on
//! characters rather than tokens and only understands what the synthetic
//! corpus emits.

use std::collections::BTreeMap;

use super::ExpectedPort;

pub struct RefInterface {
    pub module: String,
    pub params: BTreeMap<String, i64>,
    pub ports: Vec<ExpectedPort>,
}

fn strip_comments(src: &str) -> String {
    let b = src.as_bytes();
    let mut out = String::with_capacity(src.len());
    let mut i = 0;
    while i < b.len() {
        if b[i..].starts_with(b"//") {
            while i < b.len() && b[i] != b'\n' {
                i += 1;
            }
        } else if b[i..].starts_with(b"/*") {
            i += 2;
            while i + 1 < b.len() && !b[i..].starts_with(b"*/") {
                i += 1;
            }
            i += 2;
            out.push(' ');
        } else {
            out.push(b[i] as char);
            i += 1;
        }
    }
    out
}

/// Text between the bracket at `open` and its partner, and the index after
/// the partner.
fn balanced(s: &[char], open: usize) -> (String, usize) {
    let mut depth = 0;
    for (j, c) in s.iter().enumerate().skip(open) {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 {
                    return (s[open + 1..j].iter().collect(), j + 1);
                }
            }
            _ => {}
        }
    }
    panic!("unbalanced header");
}

fn split_top(s: &str) -> Vec<String> {
    let mut out = vec![String::new()];
    let mut depth = 0;
    for c in s.chars() {
        match c {
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            ',' if depth == 0 => {
                out.push(String::new());
                continue;
            }
            _ => {}
        }
        out.last_mut().unwrap().push(c);
    }
    out.into_iter()
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

/// Sum/product evaluator over integers and known names, no precedence
/// climbing: `a*b-c` style left to right with `*` binding first.
fn eval(expr: &str, env: &BTreeMap<String, i64>) -> i64 {
    let expr: String = expr.chars().filter(|c| !c.is_whitespace()).collect();
    let mut total = 0i64;
    let mut sign = 1i64;
    for (k, term) in expr.split_inclusive(['+', '-']).enumerate() {
        let (body, next_sign) = match term.chars().last() {
            Some('+') => (&term[..term.len() - 1], 1),
            Some('-') => (&term[..term.len() - 1], -1),
            _ => (term, 1),
        };
        if body.is_empty() && k == 0 {
            sign = next_sign;
            continue;
        }
        let product: i64 = body
            .split('*')
            .map(|f| f.parse::<i64>().unwrap_or_else(|_| env[f]))
            .product();
        total += sign * product;
        sign = next_sign;
    }
    total
}

pub fn parse(src: &str, top: &str) -> Option<RefInterface> {
    let text = strip_comments(src);
    let needle = format!("module {top}");
    let start = text.match_indices(&needle).find(|(i, _)| {
        let after = text[i + needle.len()..].chars().next();
        !after.is_some_and(|c| c.is_alphanumeric() || c == '_')
    })?;
    let chars: Vec<char> = text[start.0 + needle.len()..].chars().collect();
    let mut i = 0;
    let skip_ws = |i: &mut usize| {
        while chars[*i].is_whitespace() {
            *i += 1;
        }
    };
    skip_ws(&mut i);
    let mut params = BTreeMap::new();
    if chars[i] == '#' {
        i += 1;
        skip_ws(&mut i);
        let (body, next) = balanced(&chars, i);
        i = next;
        for item in split_top(&body) {
            let item = item.trim_start_matches("parameter").trim();
            let (name, value) = item.split_once('=')?;
            let v = eval(value, &params);
            params.insert(name.trim().to_string(), v);
        }
        skip_ws(&mut i);
    }
    let (body, _) = balanced(&chars, i);
    let mut ports = Vec::new();
    let mut last: Option<(&'static str, i64, i64)> = None;
    for item in split_top(&body) {
        let mut rest = item.as_str();
        let mut direction = None;
        for d in ["input", "output", "inout"] {
            if let Some(r) = rest.strip_prefix(d) {
                direction = Some(d);
                rest = r.trim_start();
            }
        }
        for t in ["wire", "reg", "logic"] {
            if let Some(r) = rest.strip_prefix(t) {
                if r.starts_with([' ', '[']) {
                    rest = r.trim_start();
                }
            }
        }
        let (msb, lsb, name) = if let Some(r) = rest.strip_prefix('[') {
            let (range, name) = r.split_once(']')?;
            let (m, l) = range.split_once(':')?;
            (eval(m, &params), eval(l, &params), name.trim())
        } else if direction.is_none() {
            let (_, m, l) = last?;
            (m, l, rest.trim())
        } else {
            (0, 0, rest.trim())
        };
        let direction = direction.or(last.map(|l| l.0))?;
        last = Some((direction, msb, lsb));
        ports.push(ExpectedPort {
            name: name.to_string(),
            direction,
            msb,
            lsb,
        });
    }
    Some(RefInterface {
        module: top.to_string(),
        params,
        ports,
    })
}
