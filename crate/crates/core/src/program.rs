//! Line-indexed Python-subset programs.
//!
//! The parser is deliberately shallow: it tokenizes just enough (strings,
//! brackets, comments, continuations, indentation) to recover the statement
//! structure that control flow depends on. Expressions are never parsed.

use std::fmt;

use thiserror::Error;

/// One physical source line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceLine {
    /// 1-based.
    pub line_no: u32,
    pub text: String,
    /// True exactly for lines that produce a CFG node.
    pub is_executable: bool,
}

/// Which body the CFG is built for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    ModuleBody,
    FunctionBody(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: u32,
        column: u32,
        message: String,
    },
    #[error("program has no executable line")]
    EmptyProgram,
}

impl ParseError {
    fn syntax(line: u32, column: u32, message: impl Into<String>) -> Self {
        ParseError::Syntax {
            line,
            column,
            message: message.into(),
        }
    }
}

/// A parsed program: the source as numbered lines plus the statement tree of
/// the CFG target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceProgram {
    pub raw_text: String,
    pub lines: Vec<SourceLine>,
    pub target: Target,
    pub(crate) body: Vec<Stmt>,
}

impl SourceProgram {
    pub fn executable_lines(&self) -> impl Iterator<Item = u32> + '_ {
        self.lines
            .iter()
            .filter(|l| l.is_executable)
            .map(|l| l.line_no)
    }

    pub fn line(&self, line_no: u32) -> Option<&SourceLine> {
        if line_no == 0 {
            return None;
        }
        self.lines.get(line_no as usize - 1)
    }

    /// Maps every physical line to the first line of the logical statement
    /// that owns it. Lines outside any statement (blank, comment) map to
    /// `None`.
    pub fn statement_starts(&self) -> Vec<Option<u32>> {
        let mut owners = vec![None; self.lines.len() + 1];
        fn walk(stmts: &[Stmt], owners: &mut [Option<u32>]) {
            for stmt in stmts {
                for l in stmt.line..=stmt.last_line {
                    owners[l as usize] = Some(stmt.line);
                }
                match &stmt.kind {
                    StmtKind::If {
                        body,
                        elifs,
                        orelse,
                    } => {
                        walk(body, owners);
                        for clause in elifs {
                            for l in clause.line..=clause.last_line {
                                owners[l as usize] = Some(clause.line);
                            }
                            walk(&clause.body, owners);
                        }
                        if let Some(orelse) = orelse {
                            walk(orelse, owners);
                        }
                    }
                    StmtKind::Loop { body, .. } => walk(body, owners),
                    StmtKind::Unsupported { body, .. } => walk(body, owners),
                    StmtKind::Simple(_) | StmtKind::Inert => {}
                }
            }
        }
        walk(&self.body, &mut owners);
        owners
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum SimpleKind {
    Plain,
    Pass,
    Return,
    Raise,
    Break,
    Continue,
}

impl SimpleKind {
    pub(crate) fn is_terminal(self) -> bool {
        matches!(self, SimpleKind::Return | SimpleKind::Raise)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LoopKind {
    For,
    While,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Stmt {
    pub line: u32,
    pub last_line: u32,
    pub label: String,
    pub kind: StmtKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct ElifClause {
    pub line: u32,
    pub last_line: u32,
    pub label: String,
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum StmtKind {
    Simple(SimpleKind),
    /// Docstrings, bare constants, `global`/`nonlocal`: no runtime step.
    Inert,
    If {
        body: Vec<Stmt>,
        elifs: Vec<ElifClause>,
        orelse: Option<Vec<Stmt>>,
    },
    Loop {
        kind: LoopKind,
        body: Vec<Stmt>,
    },
    Unsupported {
        construct: &'static str,
        body: Vec<Stmt>,
    },
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::ModuleBody => f.write_str("module"),
            Target::FunctionBody(name) => write!(f, "function {name}"),
        }
    }
}

/// Parses `source_text` into a line-indexed program.
pub fn parse_program(source_text: &str) -> Result<SourceProgram, ParseError> {
    let physical: Vec<&str> = split_physical_lines(source_text);
    let logical = logical_lines(&physical)?;
    let mut parser = BlockParser {
        lines: &logical,
        pos: 0,
    };
    let top = parser.parse_block(0, Ctx::default())?;

    let (target, body, def_line) = match top.as_slice() {
        [Stmt {
            kind: StmtKind::Unsupported {
                construct: "def",
                body,
            },
            label,
            line,
            ..
        }] => {
            let name = def_name(label).unwrap_or_default();
            let body = reparse_function_body(&logical, *line)?.unwrap_or_else(|| body.clone());
            (Target::FunctionBody(name), body, Some(*line))
        }
        _ => (Target::ModuleBody, top, None),
    };

    let mut executable = vec![false; physical.len() + 1];
    mark_executable(&body, &mut executable);
    if let Some(l) = def_line {
        executable[l as usize] = false;
    }
    let lines: Vec<SourceLine> = physical
        .iter()
        .enumerate()
        .map(|(i, text)| SourceLine {
            line_no: i as u32 + 1,
            text: (*text).to_string(),
            is_executable: executable[i + 1],
        })
        .collect();
    if !lines.iter().any(|l| l.is_executable) {
        return Err(ParseError::EmptyProgram);
    }
    Ok(SourceProgram {
        raw_text: source_text.to_string(),
        lines,
        target,
        body,
    })
}

fn split_physical_lines(text: &str) -> Vec<&str> {
    if text.is_empty() {
        return Vec::new();
    }
    let trimmed = text.strip_suffix('\n').unwrap_or(text);
    trimmed
        .split('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .collect()
}

fn def_name(label: &str) -> Option<String> {
    let rest = label.strip_prefix("def")?.trim_start();
    let name: String = rest
        .chars()
        .take_while(|c| c.is_alphanumeric() || *c == '_')
        .collect();
    (!name.is_empty()).then_some(name)
}

/// The top level was parsed as a script, where `return` is illegal; parse the
/// function body again with function context.
fn reparse_function_body(
    logical: &[LogicalLine],
    def_line: u32,
) -> Result<Option<Vec<Stmt>>, ParseError> {
    let Some(idx) = logical.iter().position(|l| l.first == def_line) else {
        return Ok(None);
    };
    let Some(next) = logical.get(idx + 1) else {
        return Ok(None);
    };
    let mut parser = BlockParser {
        lines: logical,
        pos: idx + 1,
    };
    let ctx = Ctx {
        in_function: true,
        in_loop: false,
        nested_def: false,
    };
    parser.parse_block(next.indent, ctx).map(Some)
}

fn mark_executable(stmts: &[Stmt], out: &mut [bool]) {
    for stmt in stmts {
        if stmt.kind != StmtKind::Inert {
            out[stmt.line as usize] = true;
        }
        match &stmt.kind {
            StmtKind::If {
                body,
                elifs,
                orelse,
            } => {
                mark_executable(body, out);
                for clause in elifs {
                    out[clause.line as usize] = true;
                    mark_executable(&clause.body, out);
                }
                if let Some(orelse) = orelse {
                    mark_executable(orelse, out);
                }
            }
            StmtKind::Loop { body, .. } | StmtKind::Unsupported { body, .. } => {
                mark_executable(body, out)
            }
            StmtKind::Simple(_) | StmtKind::Inert => {}
        }
    }
}

/// A logical line: one statement possibly spanning several physical lines.
#[derive(Debug, Clone)]
struct LogicalLine {
    first: u32,
    last: u32,
    indent: usize,
    /// Trimmed first physical line without comment or trailing backslash.
    label: String,
    /// Whole statement with string literal bodies blanked to `""` and
    /// comments removed.
    skeleton: String,
    /// Byte offset in `skeleton` of the first top-level `:` (not `:=`).
    header_colon: Option<usize>,
    /// Column (1-based) of the end of the first physical line, for errors.
    end_column: u32,
}

#[derive(Clone, Copy)]
struct OpenString {
    quote: char,
    triple: bool,
    line: u32,
    column: u32,
}

fn logical_lines(physical: &[&str]) -> Result<Vec<LogicalLine>, ParseError> {
    let mut out = Vec::new();
    let mut current: Option<LogicalLine> = None;
    let mut brackets: Vec<(char, u32, u32)> = Vec::new();
    let mut string: Option<OpenString> = None;

    for (idx, raw) in physical.iter().enumerate() {
        let line_no = idx as u32 + 1;
        let chars: Vec<char> = raw.chars().collect();
        let continuing = current.is_some();
        let mut col = 0usize;

        if !continuing {
            let indent_chars = chars.iter().take_while(|c| **c == ' ' || **c == '\t').count();
            let rest = &chars[indent_chars..];
            if rest.is_empty() || rest[0] == '#' || rest[0] == '\x0c' {
                continue;
            }
            let mut width = 0usize;
            for c in &chars[..indent_chars] {
                width = if *c == '\t' { (width / 8 + 1) * 8 } else { width + 1 };
            }
            current = Some(LogicalLine {
                first: line_no,
                last: line_no,
                indent: width,
                label: String::new(),
                skeleton: String::new(),
                header_colon: None,
                end_column: chars.len() as u32 + 1,
            });
            col = indent_chars;
        }
        let logical = current.as_mut().expect("logical line open");
        logical.last = line_no;
        let on_first = logical.first == line_no;
        let mut label_end = chars.len();
        let mut explicit_continuation = false;

        while col < chars.len() {
            let c = chars[col];
            if let Some(open) = string {
                if c == '\\' {
                    col += 2;
                    continue;
                }
                if c == open.quote {
                    if !open.triple {
                        string = None;
                        logical.skeleton.push(c);
                        col += 1;
                        continue;
                    }
                    if chars.get(col + 1) == Some(&c) && chars.get(col + 2) == Some(&c) {
                        string = None;
                        logical.skeleton.push(c);
                        col += 3;
                        continue;
                    }
                }
                col += 1;
                continue;
            }
            match c {
                '#' => {
                    if on_first {
                        label_end = col;
                    }
                    break;
                }
                '\'' | '"' => {
                    let triple =
                        chars.get(col + 1) == Some(&c) && chars.get(col + 2) == Some(&c);
                    string = Some(OpenString {
                        quote: c,
                        triple,
                        line: line_no,
                        column: col as u32 + 1,
                    });
                    logical.skeleton.push(c);
                    col += if triple { 3 } else { 1 };
                    continue;
                }
                '(' | '[' | '{' => brackets.push((c, line_no, col as u32 + 1)),
                ')' | ']' | '}' => {
                    let expected = match c {
                        ')' => '(',
                        ']' => '[',
                        _ => '{',
                    };
                    match brackets.pop() {
                        Some((open, _, _)) if open == expected => {}
                        Some((open, l, cc)) => {
                            return Err(ParseError::syntax(
                                line_no,
                                col as u32 + 1,
                                format!(
                                    "closing parenthesis '{c}' does not match opening parenthesis '{open}' on line {l} column {cc}"
                                ),
                            ))
                        }
                        None => {
                            return Err(ParseError::syntax(
                                line_no,
                                col as u32 + 1,
                                format!("unmatched '{c}'"),
                            ))
                        }
                    }
                }
                ':' if brackets.is_empty() && logical.header_colon.is_none() => {
                    if chars.get(col + 1) != Some(&'=') {
                        logical.header_colon = Some(logical.skeleton.len());
                    }
                }
                '\\' => {
                    if col + 1 == chars.len() {
                        explicit_continuation = true;
                        if on_first {
                            label_end = col;
                        }
                        col += 1;
                        continue;
                    }
                    return Err(ParseError::syntax(
                        line_no,
                        col as u32 + 1,
                        "unexpected character after line continuation character",
                    ));
                }
                _ => {}
            }
            logical.skeleton.push(c);
            col += 1;
        }

        if on_first {
            let label: String = chars[..label_end.min(chars.len())].iter().collect();
            logical.label = label.trim().to_string();
        }

        if let Some(open) = string {
            if !open.triple {
                // A backslash-newline inside a short string continues it.
                if raw.ends_with('\\') {
                    continue;
                }
                return Err(ParseError::syntax(
                    open.line,
                    open.column,
                    "unterminated string literal",
                ));
            }
            logical.skeleton.push('\n');
            continue;
        }
        if explicit_continuation || !brackets.is_empty() {
            logical.skeleton.push(' ');
            continue;
        }
        out.push(current.take().expect("logical line open"));
    }

    if let Some(open) = string {
        return Err(ParseError::syntax(
            open.line,
            open.column,
            if open.triple {
                "unterminated triple-quoted string literal"
            } else {
                "unterminated string literal"
            },
        ));
    }
    if let Some(&(c, line, column)) = brackets.last() {
        return Err(ParseError::syntax(
            line,
            column,
            format!("'{c}' was never closed"),
        ));
    }
    if let Some(logical) = current {
        return Err(ParseError::syntax(
            logical.last,
            logical.end_column,
            "unexpected end of file after line continuation",
        ));
    }
    Ok(out)
}

#[derive(Clone, Copy, Default)]
struct Ctx {
    in_function: bool,
    in_loop: bool,
    /// Inside an unsupported nested definition: anything goes.
    nested_def: bool,
}

struct BlockParser<'a> {
    lines: &'a [LogicalLine],
    pos: usize,
}

const HEADER_KEYWORDS: &[&str] = &[
    "if", "elif", "else", "for", "while", "def", "class", "try", "except", "finally", "with",
    "async",
];

impl LogicalLine {
    fn first_word(&self) -> &str {
        let s = self.skeleton.trim_start();
        let end = s
            .find(|c: char| !(c.is_alphanumeric() || c == '_'))
            .unwrap_or(s.len());
        &s[..end]
    }

    fn after_colon(&self) -> Option<&str> {
        self.header_colon.map(|i| self.skeleton[i + 1..].trim())
    }

    fn syntax(&self, message: impl Into<String>) -> ParseError {
        let column = self.indent as u32 + 1;
        ParseError::syntax(self.first, column, message)
    }

    fn is_literal_only(&self) -> bool {
        let compact: String = self.skeleton.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return false;
        }
        if compact == "..." {
            return true;
        }
        if compact
            .chars()
            .all(|c| c.is_ascii_digit() || c == '.' || c == '_')
            && compact.chars().any(|c| c.is_ascii_digit())
        {
            return true;
        }
        // String literals survive in the skeleton as a bare pair of quotes.
        compact.len().is_multiple_of(2)
            && compact
                .as_bytes()
                .chunks(2)
                .all(|pair| pair[0] == pair[1] && matches!(pair[0], b'"' | b'\''))
    }

    fn has_word(&self, word: &str) -> bool {
        self.skeleton
            .split(|c: char| !(c.is_alphanumeric() || c == '_'))
            .any(|w| w == word)
    }
}

impl<'a> BlockParser<'a> {
    fn peek(&self) -> Option<&'a LogicalLine> {
        self.lines.get(self.pos)
    }

    fn parse_block(&mut self, indent: usize, ctx: Ctx) -> Result<Vec<Stmt>, ParseError> {
        let mut stmts = Vec::new();
        let mut after_nested = false;
        while let Some(line) = self.peek() {
            if line.indent < indent {
                break;
            }
            if line.indent > indent {
                return Err(line.syntax(if after_nested {
                    "unindent does not match any outer indentation level"
                } else {
                    "unexpected indent"
                }));
            }
            let stmt = self.parse_stmt(indent, ctx)?;
            after_nested = !matches!(stmt.kind, StmtKind::Simple(_) | StmtKind::Inert);
            stmts.push(stmt);
        }
        Ok(stmts)
    }

    /// Parses the indented suite following the header at `header`.
    fn parse_suite(
        &mut self,
        header: &LogicalLine,
        what: &str,
        ctx: Ctx,
    ) -> Result<Vec<Stmt>, ParseError> {
        match header.after_colon() {
            None => return Err(header.syntax("expected ':'")),
            Some(rest) if !rest.is_empty() => return Ok(Vec::new()),
            Some(_) => {}
        }
        match self.peek() {
            Some(next) if next.indent > header.indent => self.parse_block(next.indent, ctx),
            Some(next) => Err(next.syntax(format!(
                "expected an indented block after '{what}' statement on line {}",
                header.first
            ))),
            None => Err(ParseError::syntax(
                header.last + 1,
                1,
                format!(
                    "expected an indented block after '{what}' statement on line {}",
                    header.first
                ),
            )),
        }
    }

    fn parse_stmt(&mut self, indent: usize, ctx: Ctx) -> Result<Stmt, ParseError> {
        let line = self.peek().expect("caller checked");
        self.pos += 1;
        let word = line.first_word();
        let inline_body = line.after_colon().is_some_and(|rest| !rest.is_empty());
        let is_header = HEADER_KEYWORDS.contains(&word)
            || line.skeleton.trim_start().starts_with('@')
            || (matches!(word, "match" | "case")
                && line.after_colon().is_some_and(str::is_empty)
                && self.peek().is_some_and(|n| n.indent > indent));

        let stmt = |kind| Stmt {
            line: line.first,
            last_line: line.last,
            label: line.label.clone(),
            kind,
        };

        if !is_header {
            let kind = self.simple_kind(line, word, ctx)?;
            return Ok(stmt(kind));
        }

        match word {
            "if" => {
                let body = self.parse_suite(line, "if", ctx)?;
                let mut elifs = Vec::new();
                let mut orelse = None;
                let mut inline = inline_body;
                while let Some(next) = self.peek().filter(|n| n.indent == indent) {
                    match next.first_word() {
                        "elif" => {
                            self.pos += 1;
                            inline |= next.after_colon().is_some_and(|r| !r.is_empty());
                            let body = self.parse_suite(next, "elif", ctx)?;
                            elifs.push(ElifClause {
                                line: next.first,
                                last_line: next.last,
                                label: next.label.clone(),
                                body,
                            });
                        }
                        "else" => {
                            self.pos += 1;
                            inline |= next.after_colon().is_some_and(|r| !r.is_empty());
                            orelse = Some(self.parse_suite(next, "else", ctx)?);
                            break;
                        }
                        _ => break,
                    }
                }
                if inline {
                    return Ok(stmt(StmtKind::Unsupported {
                        construct: "inline-body",
                        body: Vec::new(),
                    }));
                }
                Ok(stmt(StmtKind::If {
                    body,
                    elifs,
                    orelse,
                }))
            }
            "for" | "while" => {
                let loop_ctx = Ctx {
                    in_loop: true,
                    ..ctx
                };
                let body = self.parse_suite(line, word, loop_ctx)?;
                let mut construct = None;
                if let Some(next) = self
                    .peek()
                    .filter(|n| n.indent == indent && n.first_word() == "else")
                {
                    self.pos += 1;
                    self.parse_suite(next, "else", ctx)?;
                    construct = Some("loop-else");
                }
                if inline_body {
                    construct = Some("inline-body");
                }
                let kind = if word == "for" {
                    LoopKind::For
                } else {
                    LoopKind::While
                };
                Ok(stmt(match construct {
                    Some(construct) => StmtKind::Unsupported { construct, body },
                    None => StmtKind::Loop { kind, body },
                }))
            }
            "def" => {
                let def_ctx = Ctx {
                    in_function: true,
                    in_loop: false,
                    nested_def: true,
                };
                let body = self.parse_suite(line, "def", def_ctx)?;
                Ok(stmt(StmtKind::Unsupported {
                    construct: "def",
                    body,
                }))
            }
            "class" => {
                let body = self.parse_suite(line, "class", Ctx::default())?;
                Ok(stmt(StmtKind::Unsupported {
                    construct: "class",
                    body,
                }))
            }
            "try" => {
                let body = self.parse_suite(line, "try", ctx)?;
                while let Some(next) = self.peek().filter(|n| {
                    n.indent == indent
                        && matches!(n.first_word(), "except" | "else" | "finally")
                }) {
                    self.pos += 1;
                    self.parse_suite(next, next.first_word(), ctx)?;
                }
                Ok(stmt(StmtKind::Unsupported {
                    construct: "try",
                    body,
                }))
            }
            "with" | "async" | "match" | "case" => {
                let body = self.parse_suite(line, word, ctx)?;
                Ok(stmt(StmtKind::Unsupported {
                    construct: match word {
                        "with" => "with",
                        "async" => "async",
                        "match" => "match",
                        _ => "case",
                    },
                    body,
                }))
            }
            "elif" | "else" | "except" | "finally" => Err(line.syntax("invalid syntax")),
            _ => {
                // Decorator line: the decorated definition follows.
                if self.peek().is_some_and(|n| n.indent == indent) {
                    let inner = self.parse_stmt(indent, ctx)?;
                    let body = match inner.kind {
                        StmtKind::Unsupported { body, .. } => body,
                        _ => Vec::new(),
                    };
                    return Ok(stmt(StmtKind::Unsupported {
                        construct: "decorator",
                        body,
                    }));
                }
                Err(line.syntax("invalid syntax"))
            }
        }
    }

    fn simple_kind(&self, line: &LogicalLine, word: &str, ctx: Ctx) -> Result<StmtKind, ParseError> {
        if line.has_word("yield") {
            return Ok(StmtKind::Unsupported {
                construct: "yield",
                body: Vec::new(),
            });
        }
        if line.has_word("await") {
            return Ok(StmtKind::Unsupported {
                construct: "await",
                body: Vec::new(),
            });
        }
        if line.skeleton.contains(';') && has_top_level_semicolon(&line.skeleton) {
            return Ok(StmtKind::Unsupported {
                construct: "multiple-statements",
                body: Vec::new(),
            });
        }
        let kind = match word {
            "return" => {
                if !ctx.in_function {
                    return Err(line.syntax("'return' outside function"));
                }
                SimpleKind::Return
            }
            "break" | "continue" => {
                if !ctx.in_loop && !ctx.nested_def {
                    return Err(line.syntax(format!("'{word}' outside loop")));
                }
                if word == "break" {
                    SimpleKind::Break
                } else {
                    SimpleKind::Continue
                }
            }
            "pass" => SimpleKind::Pass,
            "raise" => SimpleKind::Raise,
            "global" | "nonlocal" => return Ok(StmtKind::Inert),
            _ if line.is_literal_only() => return Ok(StmtKind::Inert),
            _ => SimpleKind::Plain,
        };
        Ok(StmtKind::Simple(kind))
    }
}

fn has_top_level_semicolon(skeleton: &str) -> bool {
    // Skeleton strings are blanked, so only brackets need tracking.
    let mut depth = 0i32;
    for c in skeleton.chars() {
        match c {
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth -= 1,
            ';' if depth == 0 => return true,
            _ => {}
        }
    }
    false
}
