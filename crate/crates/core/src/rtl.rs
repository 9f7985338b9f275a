// SPDX-License-Identifier: Apache-2.0

//! DUT interface extraction from Verilog/SystemVerilog source text.
//!
//! Only the module header is understood: ANSI port lists, simple non-ANSI
//! `input`/`output`/`inout` declarations in the body, and `parameter`
//! defaults made of constant integer arithmetic. Interface ports, user
//! defined types and array ports are rejected as unsupported.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::workspace::DutConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Location {
    /// Index into the list of sources handed to [`extract_interface`].
    pub source: usize,
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "source {}, {}:{}", self.source, self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IfaceError {
    #[error("module `{0}` not found in the RTL sources")]
    ModuleNotFound(String),
    #[error("module `{name}` is defined more than once (sources {first} and {second})")]
    DuplicateModule { name: String, first: usize, second: usize },
    #[error("{location}: unsupported construct: {construct}")]
    UnsupportedConstruct { location: Location, construct: String },
    #[error("{location}: {message}")]
    Syntax { location: Location, message: String },
    #[error("signal `{0}` named in the configuration is not a port of the DUT")]
    SignalNotFound(String),
    #[error("clock `{signal}` must be 1 bit wide, found {width}")]
    InvalidClock { signal: String, width: u64 },
    #[error("reset `{signal}` must be 1 bit wide, found {width}")]
    InvalidReset { signal: String, width: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Input,
    Output,
    Inout,
}

impl Direction {
    pub fn keyword(self) -> &'static str {
        match self {
            Direction::Input => "input",
            Direction::Output => "output",
            Direction::Inout => "inout",
        }
    }

    fn from_keyword(s: &str) -> Option<Self> {
        match s {
            "input" => Some(Direction::Input),
            "output" => Some(Direction::Output),
            "inout" => Some(Direction::Inout),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Port {
    pub name: String,
    pub direction: Direction,
    pub msb: i64,
    pub lsb: i64,
    #[serde(default)]
    pub is_clock: bool,
    #[serde(default)]
    pub is_reset: bool,
}

impl Port {
    pub fn width(&self) -> u64 {
        port_width(self)
    }
}

/// `|msb - lsb| + 1`; ranges may be declared ascending or descending.
pub fn port_width(p: &Port) -> u64 {
    p.msb.abs_diff(p.lsb) + 1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DutInterface {
    pub module_name: String,
    pub ports: Vec<Port>,
    pub parameters: BTreeMap<String, i64>,
}

impl DutInterface {
    pub fn port(&self, name: &str) -> Option<&Port> {
        self.ports.iter().find(|p| p.name == name)
    }

    pub fn clock(&self) -> Option<&Port> {
        self.ports.iter().find(|p| p.is_clock)
    }

    pub fn reset(&self) -> Option<&Port> {
        self.ports.iter().find(|p| p.is_reset)
    }

    /// Ports other than the classified clock and reset.
    pub fn data_ports(&self) -> impl Iterator<Item = &Port> {
        self.ports.iter().filter(|p| !p.is_clock && !p.is_reset)
    }

    /// One line per port, e.g. `input  [7:0] data`.
    pub fn summary(&self) -> String {
        if self.ports.is_empty() {
            return format!("module {}: no ports", self.module_name);
        }
        let mut out = format!("module {}:\n", self.module_name);
        for (name, value) in &self.parameters {
            out.push_str(&format!("  parameter {name} = {value}\n"));
        }
        for p in &self.ports {
            let mut role = String::new();
            if p.is_clock {
                role.push_str(" (clock)");
            }
            if p.is_reset {
                role.push_str(" (reset)");
            }
            out.push_str(&format!(
                "  {:<6} [{}:{}] {} ({} bit{}){}\n",
                p.direction.keyword(),
                p.msb,
                p.lsb,
                p.name,
                p.width(),
                if p.width() == 1 { "" } else { "s" },
                role
            ));
        }
        out
    }

    /// Renders the interface as an ANSI module header with resolved ranges.
    pub fn to_ansi_header(&self) -> String {
        let mut out = format!("module {}", self.module_name);
        if !self.parameters.is_empty() {
            let params: Vec<String> = self
                .parameters
                .iter()
                .map(|(k, v)| format!("  parameter {k} = {v}"))
                .collect();
            out.push_str(&format!(" #(\n{}\n)", params.join(",\n")));
        }
        let ports: Vec<String> = self
            .ports
            .iter()
            .map(|p| {
                if p.msb == 0 && p.lsb == 0 {
                    format!("  {} {}", p.direction.keyword(), p.name)
                } else {
                    format!("  {} [{}:{}] {}", p.direction.keyword(), p.msb, p.lsb, p.name)
                }
            })
            .collect();
        if ports.is_empty() {
            out.push_str(" ();\nendmodule\n");
        } else {
            out.push_str(&format!(" (\n{}\n);\nendmodule\n", ports.join(",\n")));
        }
        out
    }

    /// Port names that never occur in `spec_text`, a weak consistency hint.
    pub fn unmentioned_ports<'a>(&'a self, spec_text: &str) -> Vec<&'a str> {
        self.ports
            .iter()
            .map(|p| p.name.as_str())
            .filter(|name| !contains_word(spec_text, name))
            .collect()
    }
}

fn contains_word(haystack: &str, word: &str) -> bool {
    haystack.match_indices(word).any(|(i, _)| {
        let before = haystack[..i].chars().next_back();
        let after = haystack[i + word.len()..].chars().next();
        let is_word = |c: Option<char>| c.is_some_and(|c| c.is_alphanumeric() || c == '_');
        !is_word(before) && !is_word(after)
    })
}

/// Marks the configured clock and reset ports.
pub fn classify_ports(iface: &DutInterface, cfg: &DutConfig) -> Result<DutInterface, IfaceError> {
    let mut out = iface.clone();
    for p in &mut out.ports {
        p.is_clock = false;
        p.is_reset = false;
    }
    let clock = out
        .ports
        .iter_mut()
        .find(|p| p.name == cfg.clock.signal)
        .ok_or_else(|| IfaceError::SignalNotFound(cfg.clock.signal.clone()))?;
    if clock.width() != 1 {
        return Err(IfaceError::InvalidClock {
            signal: clock.name.clone(),
            width: clock.width(),
        });
    }
    clock.is_clock = true;
    let reset = out
        .ports
        .iter_mut()
        .find(|p| p.name == cfg.reset.signal)
        .ok_or_else(|| IfaceError::SignalNotFound(cfg.reset.signal.clone()))?;
    if reset.width() != 1 {
        return Err(IfaceError::InvalidReset {
            signal: reset.name.clone(),
            width: reset.width(),
        });
    }
    reset.is_reset = true;
    Ok(out)
}

/// Extracts the interface of module `top_name` from the given sources.
///
/// Sources are searched in order. A second definition of `top_name` is an
/// error.
pub fn extract_interface<S: AsRef<str>>(sources: &[S], top_name: &str) -> Result<DutInterface, IfaceError> {
    let mut found: Option<(usize, Vec<Token>, usize)> = None;
    for (idx, src) in sources.iter().enumerate() {
        let tokens = lex(src.as_ref(), idx);
        for start in module_starts(&tokens, top_name) {
            if let Some((first, _, _)) = &found {
                return Err(IfaceError::DuplicateModule {
                    name: top_name.to_string(),
                    first: *first,
                    second: idx,
                });
            }
            found = Some((idx, tokens.clone(), start));
        }
    }
    let (idx, tokens, start) = found.ok_or_else(|| IfaceError::ModuleNotFound(top_name.into()))?;
    HeaderParser::new(&tokens, start, idx).parse(top_name)
}

// ---------------------------------------------------------------------------
// lexer

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Str,
    Punct(char),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    loc: Location,
}

impl Token {
    fn is_ident(&self, s: &str) -> bool {
        matches!(&self.tok, Tok::Ident(i) if i == s)
    }

    fn is_punct(&self, c: char) -> bool {
        self.tok == Tok::Punct(c)
    }

    fn ident(&self) -> Option<&str> {
        match &self.tok {
            Tok::Ident(s) => Some(s),
            _ => None,
        }
    }

    fn describe(&self) -> String {
        match &self.tok {
            Tok::Ident(s) | Tok::Number(s) => format!("`{s}`"),
            Tok::Str => "string literal".into(),
            Tok::Punct(c) => format!("`{c}`"),
        }
    }
}

fn lex(src: &str, source: usize) -> Vec<Token> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);

    // advances over chars[i], tracking line/column
    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        let loc = Location { source, line, col };
        if c.is_whitespace() {
            bump!();
        } else if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
        } else if c == '/' && chars.get(i + 1) == Some(&'*') {
            bump!();
            bump!();
            while i < chars.len() && !(chars[i] == '*' && chars.get(i + 1) == Some(&'/')) {
                bump!();
            }
            if i < chars.len() {
                bump!();
                bump!();
            }
        } else if c == '`' {
            // compiler directive: drop the rest of the line
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
        } else if c == '"' {
            bump!();
            while i < chars.len() && chars[i] != '"' && chars[i] != '\n' {
                if chars[i] == '\\' && i + 1 < chars.len() {
                    bump!();
                }
                bump!();
            }
            if i < chars.len() && chars[i] == '"' {
                bump!();
            }
            out.push(Token { tok: Tok::Str, loc });
        } else if c.is_ascii_alphabetic() || c == '_' || c == '$' {
            let mut s = String::new();
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '$') {
                s.push(chars[i]);
                bump!();
            }
            out.push(Token {
                tok: Tok::Ident(s),
                loc,
            });
        } else if c == '\\' {
            // escaped identifier runs to the next whitespace
            bump!();
            let mut s = String::new();
            while i < chars.len() && !chars[i].is_whitespace() {
                s.push(chars[i]);
                bump!();
            }
            out.push(Token {
                tok: Tok::Ident(s),
                loc,
            });
        } else if c.is_ascii_digit() || c == '\'' {
            let mut s = String::new();
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '_') {
                s.push(chars[i]);
                bump!();
            }
            if i < chars.len() && chars[i] == '.' && chars.get(i + 1).is_some_and(|c| c.is_ascii_digit()) {
                s.push('.');
                bump!();
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '_') {
                    s.push(chars[i]);
                    bump!();
                }
            }
            if i < chars.len() && chars[i] == '\'' {
                s.push('\'');
                bump!();
                if i < chars.len() && matches!(chars[i], 's' | 'S') {
                    s.push(chars[i]);
                    bump!();
                }
                if i < chars.len() && matches!(chars[i], 'b' | 'B' | 'o' | 'O' | 'd' | 'D' | 'h' | 'H') {
                    s.push(chars[i]);
                    bump!();
                }
                while i < chars.len() && chars[i].is_whitespace() && chars[i] != '\n' {
                    bump!();
                }
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '?') {
                    s.push(chars[i]);
                    bump!();
                }
            }
            if s.is_empty() {
                bump!();
                out.push(Token {
                    tok: Tok::Punct('\''),
                    loc,
                });
            } else {
                out.push(Token {
                    tok: Tok::Number(s),
                    loc,
                });
            }
        } else {
            bump!();
            out.push(Token {
                tok: Tok::Punct(c),
                loc,
            });
        }
    }
    out
}

/// Token indices just past `module <name>` for every definition of `name`.
fn module_starts(tokens: &[Token], name: &str) -> Vec<usize> {
    let mut starts = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        if tokens[i].is_ident("module") || tokens[i].is_ident("macromodule") {
            let mut j = i + 1;
            if tokens
                .get(j)
                .is_some_and(|t| t.is_ident("automatic") || t.is_ident("static"))
            {
                j += 1;
            }
            if tokens.get(j).is_some_and(|t| t.is_ident(name)) {
                starts.push(j + 1);
            }
            i = j;
        }
        i += 1;
    }
    starts
}

// ---------------------------------------------------------------------------
// constant expressions

#[derive(Debug)]
enum EvalError {
    Unresolved(String),
    Other(String),
}

fn parse_number(raw: &str) -> Result<i64, String> {
    let cleaned: String = raw.chars().filter(|&c| c != '_').collect();
    if cleaned.contains('.') {
        return Err(format!("real literal {raw}"));
    }
    match cleaned.split_once('\'') {
        None => cleaned.parse::<i64>().map_err(|_| format!("bad literal {raw}")),
        Some((_, based)) => {
            let based = based.trim_start_matches(['s', 'S']);
            let (radix, digits) = match based.chars().next() {
                Some('b' | 'B') => (2, &based[1..]),
                Some('o' | 'O') => (8, &based[1..]),
                Some('d' | 'D') => (10, &based[1..]),
                Some('h' | 'H') => (16, &based[1..]),
                _ => return Err(format!("unbased literal {raw}")),
            };
            i64::from_str_radix(digits, radix).map_err(|_| format!("non-constant literal {raw}"))
        }
    }
}

struct ExprEval<'a> {
    toks: &'a [Token],
    pos: usize,
    env: &'a HashMap<String, i64>,
}

impl<'a> ExprEval<'a> {
    fn eval(toks: &'a [Token], env: &'a HashMap<String, i64>) -> Result<i64, EvalError> {
        if toks.is_empty() {
            return Err(EvalError::Other("empty expression".into()));
        }
        let mut ev = ExprEval { toks, pos: 0, env };
        let v = ev.additive()?;
        if ev.pos != toks.len() {
            return Err(EvalError::Other(format!(
                "unexpected {} in constant expression",
                toks[ev.pos].describe()
            )));
        }
        Ok(v)
    }

    fn peek_punct(&self) -> Option<char> {
        match self.toks.get(self.pos).map(|t| &t.tok) {
            Some(Tok::Punct(c)) => Some(*c),
            _ => None,
        }
    }

    fn additive(&mut self) -> Result<i64, EvalError> {
        let mut v = self.multiplicative()?;
        while let Some(op @ ('+' | '-')) = self.peek_punct() {
            self.pos += 1;
            let rhs = self.multiplicative()?;
            v = if op == '+' {
                v.checked_add(rhs)
            } else {
                v.checked_sub(rhs)
            }
            .ok_or_else(|| EvalError::Other("arithmetic overflow".into()))?;
        }
        Ok(v)
    }

    fn multiplicative(&mut self) -> Result<i64, EvalError> {
        let mut v = self.unary()?;
        while let Some(op @ ('*' | '/' | '%')) = self.peek_punct() {
            self.pos += 1;
            let rhs = self.unary()?;
            v = match op {
                '*' => v.checked_mul(rhs),
                _ if rhs == 0 => return Err(EvalError::Other("division by zero".into())),
                '/' => v.checked_div(rhs),
                _ => v.checked_rem(rhs),
            }
            .ok_or_else(|| EvalError::Other("arithmetic overflow".into()))?;
        }
        Ok(v)
    }

    fn unary(&mut self) -> Result<i64, EvalError> {
        match self.peek_punct() {
            Some('-') => {
                self.pos += 1;
                self.unary()?
                    .checked_neg()
                    .ok_or_else(|| EvalError::Other("arithmetic overflow".into()))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<i64, EvalError> {
        let tok = self
            .toks
            .get(self.pos)
            .ok_or_else(|| EvalError::Other("truncated expression".into()))?;
        self.pos += 1;
        match &tok.tok {
            Tok::Number(raw) => parse_number(raw).map_err(EvalError::Other),
            Tok::Ident(name) => self
                .env
                .get(name)
                .copied()
                .ok_or_else(|| EvalError::Unresolved(name.clone())),
            Tok::Punct('(') => {
                let v = self.additive()?;
                if self.peek_punct() != Some(')') {
                    return Err(EvalError::Other("missing `)`".into()));
                }
                self.pos += 1;
                Ok(v)
            }
            _ => Err(EvalError::Other(format!("unexpected {}", tok.describe()))),
        }
    }
}

// ---------------------------------------------------------------------------
// header parser

const NET_AND_VAR_TYPES: &[&str] = &[
    "wire", "reg", "logic", "var", "tri", "tri0", "tri1", "wand", "wor", "triand", "trior", "supply0", "supply1",
    "uwire", "bit", "signed", "unsigned",
];

/// Keywords for 2-state/4-state integer types with an implicit width.
fn implicit_width(kw: &str) -> Option<i64> {
    match kw {
        "byte" => Some(8),
        "shortint" => Some(16),
        "int" | "integer" => Some(32),
        "longint" => Some(64),
        _ => None,
    }
}

#[derive(Clone)]
struct PortShape {
    direction: Direction,
    range: Option<(Vec<Token>, Vec<Token>)>,
    implicit: Option<i64>,
}

struct PendingPort {
    name: String,
    loc: Location,
    shape: PortShape,
}

struct HeaderParser<'a> {
    toks: &'a [Token],
    pos: usize,
    source: usize,
    env: HashMap<String, i64>,
    parameters: BTreeMap<String, i64>,
}

type PResult<T> = Result<T, IfaceError>;

impl<'a> HeaderParser<'a> {
    fn new(toks: &'a [Token], pos: usize, source: usize) -> Self {
        HeaderParser {
            toks,
            pos,
            source,
            env: HashMap::new(),
            parameters: BTreeMap::new(),
        }
    }

    fn peek(&self) -> Option<&'a Token> {
        self.toks.get(self.pos)
    }

    fn loc(&self) -> Location {
        self.peek().map(|t| t.loc).unwrap_or_else(|| {
            self.toks.last().map(|t| t.loc).unwrap_or(Location {
                source: self.source,
                line: 1,
                col: 1,
            })
        })
    }

    fn syntax(&self, message: impl Into<String>) -> IfaceError {
        IfaceError::Syntax {
            location: self.loc(),
            message: message.into(),
        }
    }

    fn unsupported(loc: Location, construct: impl Into<String>) -> IfaceError {
        IfaceError::UnsupportedConstruct {
            location: loc,
            construct: construct.into(),
        }
    }

    fn expect_punct(&mut self, c: char) -> PResult<()> {
        match self.peek() {
            Some(t) if t.is_punct(c) => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(self.syntax(format!("expected `{c}`, found {}", t.describe()))),
            None => Err(self.syntax(format!("expected `{c}`, found end of input"))),
        }
    }

    /// Splits the parenthesised list starting at `self.pos` into
    /// comma-separated items and moves past the closing paren.
    fn paren_items(&mut self) -> PResult<Vec<&'a [Token]>> {
        self.expect_punct('(')?;
        let mut depth = 0usize;
        let mut items = Vec::new();
        let mut start = self.pos;
        loop {
            let t = self.peek().ok_or_else(|| self.syntax("unterminated `(`"))?;
            match t.tok {
                Tok::Punct('(' | '[' | '{') => depth += 1,
                Tok::Punct(')') if depth == 0 => {
                    if self.pos > start || !items.is_empty() {
                        items.push(&self.toks[start..self.pos]);
                    }
                    self.pos += 1;
                    return Ok(items);
                }
                Tok::Punct(')' | ']' | '}') => depth = depth.saturating_sub(1),
                Tok::Punct(',') if depth == 0 => {
                    items.push(&self.toks[start..self.pos]);
                    start = self.pos + 1;
                }
                _ => {}
            }
            self.pos += 1;
        }
    }

    fn parse(mut self, top_name: &str) -> PResult<DutInterface> {
        let mut header_ports: Option<Vec<&'a [Token]>> = None;

        // `import pkg::*;` between the name and the parameter list
        while self.peek().is_some_and(|t| t.is_ident("import")) {
            while self.peek().is_some_and(|t| !t.is_punct(';')) {
                self.pos += 1;
            }
            self.pos += 1;
        }
        if self.peek().is_some_and(|t| t.is_punct('#')) {
            self.pos += 1;
            let items = self.paren_items()?;
            self.parameter_items(&items, true)?;
        }
        if self.peek().is_some_and(|t| t.is_punct('(')) {
            let is_param_list = self
                .toks
                .get(self.pos + 1)
                .is_some_and(|t| t.is_ident("parameter") || t.is_ident("localparam"));
            let items = self.paren_items()?;
            if is_param_list {
                self.parameter_items(&items, true)?;
                if self.peek().is_some_and(|t| t.is_punct('(')) {
                    header_ports = Some(self.paren_items()?);
                }
            } else {
                header_ports = Some(items);
            }
        }
        self.expect_punct(';')?;

        let header_ports = header_ports.unwrap_or_default();
        let non_ansi = !header_ports.is_empty()
            && header_ports
                .iter()
                .all(|item| item.len() == 1 && item[0].ident().is_some_and(|s| !is_keyword(s)));

        let mut pending: Vec<PendingPort> = Vec::new();
        if !non_ansi {
            let mut shape: Option<PortShape> = None;
            for item in &header_ports {
                pending.push(self.ansi_port(item, &mut shape)?);
            }
        }
        let body = self.body(non_ansi)?;

        if non_ansi {
            for item in &header_ports {
                let tok = &item[0];
                let name = tok.ident().unwrap_or_default();
                let (loc, mut shape) = body.directions.get(name).cloned().ok_or_else(|| IfaceError::Syntax {
                    location: tok.loc,
                    message: format!("port `{name}` has no direction declaration"),
                })?;
                if shape.range.is_none() && shape.implicit.is_none() {
                    if let Some(r) = body.net_ranges.get(name) {
                        shape.range = Some(r.clone());
                    }
                }
                pending.push(PendingPort {
                    name: name.to_string(),
                    loc,
                    shape,
                });
            }
        }

        let mut ports: Vec<Port> = Vec::with_capacity(pending.len());
        for p in pending {
            if ports.iter().any(|q| q.name == p.name) {
                return Err(IfaceError::Syntax {
                    location: p.loc,
                    message: format!("duplicate port `{}`", p.name),
                });
            }
            let (msb, lsb) = self.resolve_range(&p)?;
            ports.push(Port {
                name: p.name,
                direction: p.shape.direction,
                msb,
                lsb,
                is_clock: false,
                is_reset: false,
            });
        }

        Ok(DutInterface {
            module_name: top_name.to_string(),
            ports,
            parameters: self.parameters,
        })
    }

    fn resolve_range(&self, p: &PendingPort) -> PResult<(i64, i64)> {
        match (&p.shape.range, p.shape.implicit) {
            (Some((msb, lsb)), _) => {
                let eval = |toks: &[Token]| {
                    ExprEval::eval(toks, &self.env).map_err(|e| {
                        let what = match e {
                            EvalError::Unresolved(id) => {
                                format!("width of port `{}` depends on `{id}`", p.name)
                            }
                            EvalError::Other(msg) => {
                                format!("width of port `{}` is not constant: {msg}", p.name)
                            }
                        };
                        Self::unsupported(toks.first().map(|t| t.loc).unwrap_or(p.loc), what)
                    })
                };
                Ok((eval(msb)?, eval(lsb)?))
            }
            (None, Some(w)) => Ok((w - 1, 0)),
            (None, None) => Ok((0, 0)),
        }
    }

    /// `parameter [type] [range] NAME = expr` items of a parameter list or
    /// declaration. Only `parameter` entries are exported.
    fn parameter_items(&mut self, items: &[&'a [Token]], mut exported: bool) -> PResult<()> {
        for item in items {
            let mut i = 0;
            while let Some(kw) = item.get(i).and_then(|t| t.ident()) {
                match kw {
                    "parameter" => exported = true,
                    "localparam" => exported = false,
                    "type" => {
                        // type parameters carry no integer value
                        return Ok(());
                    }
                    _ if is_param_type_keyword(kw) => {}
                    _ => break,
                }
                i += 1;
            }
            while item.get(i).is_some_and(|t| t.is_punct('[')) {
                i = skip_bracket(item, i);
            }
            let Some(name_tok) = item.get(i) else {
                continue;
            };
            let Some(name) = name_tok.ident() else {
                return Err(IfaceError::Syntax {
                    location: name_tok.loc,
                    message: format!("expected parameter name, found {}", name_tok.describe()),
                });
            };
            i += 1;
            if !item.get(i).is_some_and(|t| t.is_punct('=')) {
                // parameter without a default: nothing to evaluate
                continue;
            }
            match ExprEval::eval(&item[i + 1..], &self.env) {
                Ok(v) => {
                    self.env.insert(name.to_string(), v);
                    if exported {
                        self.parameters.insert(name.to_string(), v);
                    }
                }
                Err(e) => {
                    log::debug!("parameter `{name}` has no constant integer value: {e:?}");
                }
            }
        }
        Ok(())
    }

    fn ansi_port(&self, item: &'a [Token], shape: &mut Option<PortShape>) -> PResult<PendingPort> {
        let first = item.first().ok_or_else(|| self.syntax("empty port declaration"))?;
        let mut i = 0;
        let mut direction = None;
        if let Some(d) = first.ident().and_then(Direction::from_keyword) {
            direction = Some(d);
            i += 1;
        }
        let mut implicit = None;
        let mut saw_type = false;
        while let Some(t) = item.get(i) {
            let Some(word) = t.ident() else { break };
            if word == "interface" {
                return Err(Self::unsupported(t.loc, "interface port"));
            }
            if word == "struct" || word == "union" || word == "enum" {
                return Err(Self::unsupported(t.loc, format!("{word} port")));
            }
            if matches!(word, "real" | "realtime" | "shortreal" | "string" | "event" | "chandle") {
                return Err(Self::unsupported(t.loc, format!("`{word}` port")));
            }
            if NET_AND_VAR_TYPES.contains(&word) {
                saw_type = true;
                i += 1;
                continue;
            }
            if let Some(w) = implicit_width(word) {
                saw_type = true;
                implicit = Some(w);
                i += 1;
                continue;
            }
            break;
        }
        let mut range = None;
        if item.get(i).is_some_and(|t| t.is_punct('[')) {
            let end = skip_bracket(item, i);
            range = Some(split_range(&item[i + 1..end - 1], item[i].loc)?);
            i = end;
            if item.get(i).is_some_and(|t| t.is_punct('[')) {
                return Err(Self::unsupported(item[i].loc, "multi-dimensional packed port"));
            }
            implicit = None;
        }
        let name_tok = item.get(i).ok_or_else(|| IfaceError::Syntax {
            location: first.loc,
            message: "port declaration without a name".into(),
        })?;
        let Some(name) = name_tok.ident().filter(|s| !is_keyword(s)) else {
            return Err(IfaceError::Syntax {
                location: name_tok.loc,
                message: format!("expected port name, found {}", name_tok.describe()),
            });
        };
        i += 1;
        if let Some(t) = item.get(i) {
            if t.is_punct('.') {
                return Err(Self::unsupported(name_tok.loc, "interface port"));
            }
            if t.ident().is_some() {
                return Err(Self::unsupported(
                    name_tok.loc,
                    format!("user-defined type `{name}` port"),
                ));
            }
            if t.is_punct('[') {
                return Err(Self::unsupported(t.loc, "unpacked array port"));
            }
            if !t.is_punct('=') {
                return Err(IfaceError::Syntax {
                    location: t.loc,
                    message: format!("unexpected {} in port declaration", t.describe()),
                });
            }
        }

        let new_shape = match (direction, shape.as_ref()) {
            (Some(d), _) => PortShape {
                direction: d,
                range,
                implicit,
            },
            (None, Some(prev)) if !saw_type && range.is_none() => prev.clone(),
            (None, Some(prev)) => PortShape {
                direction: prev.direction,
                range,
                implicit,
            },
            (None, None) => {
                return Err(IfaceError::Syntax {
                    location: first.loc,
                    message: format!("port `{name}` has no direction"),
                })
            }
        };
        *shape = Some(new_shape.clone());
        Ok(PendingPort {
            name: name.to_string(),
            loc: name_tok.loc,
            shape: new_shape,
        })
    }

    /// Walks the module body up to `endmodule`, collecting parameter
    /// declarations and, for non-ANSI headers, port directions.
    fn body(&mut self, collect_ports: bool) -> PResult<BodyDecls> {
        let mut decls = BodyDecls::default();
        loop {
            let Some(t) = self.peek() else {
                return Err(self.syntax("missing `endmodule`"));
            };
            let word = t.ident().unwrap_or("");
            match word {
                "endmodule" => return Ok(decls),
                "function" | "task" => {
                    let end = if word == "function" { "endfunction" } else { "endtask" };
                    while self.peek().is_some_and(|t| !t.is_ident(end)) {
                        self.pos += 1;
                    }
                    self.pos += 1;
                }
                "parameter" | "localparam" => {
                    let stmt = self.statement();
                    let items = split_commas(stmt);
                    self.parameter_items(&items, word == "parameter")?;
                }
                "input" | "output" | "inout" if collect_ports => {
                    let stmt = self.statement();
                    let items = split_commas(stmt);
                    let mut shape = None;
                    for item in items {
                        let p = self.ansi_port(item, &mut shape)?;
                        decls.directions.insert(p.name, (p.loc, p.shape));
                    }
                }
                "wire" | "reg" | "logic" if collect_ports => {
                    let stmt = self.statement();
                    let mut i = 1;
                    while stmt
                        .get(i)
                        .is_some_and(|t| t.is_ident("signed") || t.is_ident("unsigned"))
                    {
                        i += 1;
                    }
                    if stmt.get(i).is_some_and(|t| t.is_punct('[')) {
                        let end = skip_bracket(stmt, i);
                        if let Ok(range) = split_range(&stmt[i + 1..end - 1], stmt[i].loc) {
                            for item in split_commas(&stmt[end..]) {
                                if let Some(name) = item.first().and_then(|t| t.ident()) {
                                    decls.net_ranges.insert(name.to_string(), range.clone());
                                }
                            }
                        }
                    }
                }
                _ => self.pos += 1,
            }
        }
    }

    /// Tokens of the statement at `self.pos` up to (excluding) `;`.
    fn statement(&mut self) -> &'a [Token] {
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|t| !t.is_punct(';') && !t.is_ident("endmodule"))
        {
            self.pos += 1;
        }
        let stmt = &self.toks[start..self.pos];
        if self.peek().is_some_and(|t| t.is_punct(';')) {
            self.pos += 1;
        }
        stmt
    }
}

#[derive(Default)]
struct BodyDecls {
    directions: HashMap<String, (Location, PortShape)>,
    net_ranges: HashMap<String, (Vec<Token>, Vec<Token>)>,
}

fn is_keyword(s: &str) -> bool {
    Direction::from_keyword(s).is_some()
        || NET_AND_VAR_TYPES.contains(&s)
        || implicit_width(s).is_some()
        || matches!(s, "parameter" | "localparam" | "interface" | "module" | "endmodule")
}

fn is_param_type_keyword(s: &str) -> bool {
    NET_AND_VAR_TYPES.contains(&s) || implicit_width(s).is_some()
}

/// Index just past the `]` matching the `[` at `start`.
fn skip_bracket(toks: &[Token], start: usize) -> usize {
    let mut depth = 0usize;
    let mut i = start;
    while i < toks.len() {
        match toks[i].tok {
            Tok::Punct('[') => depth += 1,
            Tok::Punct(']') => {
                depth -= 1;
                if depth == 0 {
                    return i + 1;
                }
            }
            _ => {}
        }
        i += 1;
    }
    toks.len()
}

fn split_range(inner: &[Token], loc: Location) -> PResult<(Vec<Token>, Vec<Token>)> {
    let mut depth = 0usize;
    for (i, t) in inner.iter().enumerate() {
        match t.tok {
            Tok::Punct('(' | '[' | '{') => depth += 1,
            Tok::Punct(')' | ']' | '}') => depth = depth.saturating_sub(1),
            Tok::Punct(':') if depth == 0 => {
                if inner.get(i + 1).is_some_and(|t| t.is_punct(':')) {
                    break;
                }
                return Ok((inner[..i].to_vec(), inner[i + 1..].to_vec()));
            }
            Tok::Punct('+' | '-') if depth == 0 && inner.get(i + 1).is_some_and(|t| t.is_punct(':')) => {
                return Err(HeaderParser::unsupported(t.loc, "indexed part-select range"));
            }
            _ => {}
        }
    }
    Err(HeaderParser::unsupported(loc, "port range without `msb:lsb`"))
}

fn split_commas(toks: &[Token]) -> Vec<&[Token]> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut start = 0;
    for (i, t) in toks.iter().enumerate() {
        match t.tok {
            Tok::Punct('(' | '[' | '{') => depth += 1,
            Tok::Punct(')' | ']' | '}') => depth = depth.saturating_sub(1),
            Tok::Punct(',') if depth == 0 => {
                out.push(&toks[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    if start < toks.len() {
        out.push(&toks[start..]);
    }
    out
}
