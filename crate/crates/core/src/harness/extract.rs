//! Pulling the answer out of a free-form model response.

use serde::Serialize;

use super::tasks::TaskKind;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum Extracted {
    Single(String),
    Ranked(Vec<String>),
}

impl Extracted {
    pub fn candidates(&self) -> Vec<&str> {
        match self {
            Extracted::Single(s) => vec![s.as_str()],
            Extracted::Ranked(v) => v.iter().map(String::as_str).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExtractError {
    #[error("empty response")]
    EmptyResponse,
}

/// Splits text into fenced block contents and the text with fence marker
/// lines removed. An unterminated fence runs to the end.
fn fences(raw: &str) -> (Vec<String>, String) {
    let mut blocks = Vec::new();
    let mut outside = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in raw.lines() {
        if line.trim_start().starts_with("```") {
            match current.take() {
                Some(block) => blocks.push(block.join("\n")),
                None => current = Some(Vec::new()),
            }
            continue;
        }
        outside.push(line);
        if let Some(block) = current.as_mut() {
            block.push(line);
        }
    }
    if let Some(block) = current {
        blocks.push(block.join("\n"));
    }
    (blocks, outside.join("\n"))
}

fn last_non_empty_line(text: &str) -> Option<&str> {
    text.lines().map(str::trim).rev().find(|l| !l.is_empty())
}

fn strip_backticks(s: &str) -> &str {
    let s = s.trim();
    match s.strip_prefix('`').and_then(|t| t.strip_suffix('`')) {
        Some(inner) if !inner.contains('`') => inner.trim(),
        _ => s,
    }
}

/// `(number, item)` for lines like `3. text` or `3) text`.
fn enumerated_item(line: &str) -> Option<(u32, &str)> {
    let line = line.trim_start();
    let digits = line.bytes().take_while(u8::is_ascii_digit).count();
    if digits == 0 {
        return None;
    }
    let rest = &line[digits..];
    let rest = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')'))?;
    if !rest.is_empty() && !rest.starts_with(char::is_whitespace) {
        return None;
    }
    Some((line[..digits].parse().ok()?, rest.trim()))
}

/// Byte offset of the first `==` outside brackets and string literals.
fn top_level_eq(s: &str) -> Option<usize> {
    let b = s.as_bytes();
    let mut depth = 0i32;
    let mut quote: Option<u8> = None;
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        if let Some(q) = quote {
            if c == b'\\' {
                i += 1;
            } else if c == q {
                quote = None;
            }
        } else {
            match c {
                b'\'' | b'"' => quote = Some(c),
                b'(' | b'[' | b'{' => depth += 1,
                b')' | b']' | b'}' => depth -= 1,
                b'=' if depth == 0 && b.get(i + 1) == Some(&b'=') => return Some(i),
                _ => {}
            }
        }
        i += 1;
    }
    None
}

/// Content of the last `[ANSWER]` block, to its closing tag or the end.
fn answer_tag(raw: &str) -> Option<&str> {
    let start = raw.rfind("[ANSWER]")? + "[ANSWER]".len();
    let body = &raw[start..];
    Some(body.find("[/ANSWER]").map_or(body, |end| &body[..end]).trim())
}

/// Reduces `assert f(ARGS) == VALUE` to the part the task asks for.
fn from_assertion(kind: TaskKind, text: &str) -> Option<String> {
    let body = text.trim().strip_prefix("assert ")?;
    let eq = top_level_eq(body)?;
    let (lhs, rhs) = (body[..eq].trim(), body[eq + 2..].trim());
    match kind {
        TaskKind::OutputPred => Some(rhs.to_string()),
        TaskKind::InputPred => {
            let args = lhs.strip_prefix("f(")?.strip_suffix(')')?;
            Some(args.trim().to_string())
        }
        _ => None,
    }
}

pub fn extract_answer(kind: TaskKind, raw: &str) -> Result<Extracted, ExtractError> {
    if raw.trim().is_empty() {
        return Err(ExtractError::EmptyResponse);
    }
    let (blocks, unfenced) = fences(raw);
    let last_block = blocks.iter().rev().find(|b| !b.trim().is_empty());
    let single = |text: &str| {
        last_non_empty_line(text)
            .map(|l| Extracted::Single(strip_backticks(l).to_string()))
            .ok_or(ExtractError::EmptyResponse)
    };
    match kind {
        TaskKind::FaultLoc => {
            let scope = last_block.map_or(unfenced.as_str(), String::as_str);
            let items: Vec<(u32, &str)> = scope.lines().filter_map(enumerated_item).collect();
            if items.first().is_some_and(|(n, _)| *n == 1) {
                return Ok(Extracted::Ranked(
                    items.iter().map(|(_, s)| strip_backticks(s).to_string()).collect(),
                ));
            }
            single(scope)
        }
        TaskKind::OutputPred | TaskKind::InputPred => {
            if let Some(tagged) = answer_tag(raw) {
                let (inner_blocks, inner_text) = fences(tagged);
                let inner = inner_blocks.last().map_or(inner_text.as_str(), String::as_str).trim();
                if let Some(value) = from_assertion(kind, inner) {
                    return Ok(Extracted::Single(value));
                }
                if !inner.is_empty() {
                    return Ok(Extracted::Single(inner.to_string()));
                }
            }
            let text = last_block.map_or(unfenced.as_str(), String::as_str);
            let line = last_non_empty_line(text).ok_or(ExtractError::EmptyResponse)?;
            let line = strip_backticks(line);
            Ok(Extracted::Single(from_assertion(kind, line).unwrap_or_else(|| line.to_string())))
        }
        TaskKind::Repair => match last_block {
            Some(block) => Ok(Extracted::Single(block.clone())),
            None => Ok(Extracted::Single(raw.trim().to_string())),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(kind: TaskKind, raw: &str) -> String {
        match extract_answer(kind, raw).unwrap() {
            Extracted::Single(s) => s,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn fault_loc_fence() {
        assert_eq!(one(TaskKind::FaultLoc, "The bug is:\n```\nx = lst[0]\n```"), "x = lst[0]");
        assert_eq!(one(TaskKind::FaultLoc, "Reasoning...\n\n`for i in range(0, N):`\n"), "for i in range(0, N):");
    }

    #[test]
    fn fault_loc_enumeration() {
        assert_eq!(
            extract_answer(TaskKind::FaultLoc, "1. a = b\n2. c = d").unwrap(),
            Extracted::Ranked(vec!["a = b".into(), "c = d".into()])
        );
        // A list that does not start at 1 is not a ranking.
        assert_eq!(one(TaskKind::FaultLoc, "see:\n2. a = b\n3. c = d"), "3. c = d");
    }

    #[test]
    fn empty() {
        assert_eq!(extract_answer(TaskKind::FaultLoc, ""), Err(ExtractError::EmptyResponse));
        assert_eq!(extract_answer(TaskKind::Repair, " \n\t"), Err(ExtractError::EmptyResponse));
    }

    #[test]
    fn prediction_tags() {
        let raw = "[THOUGHT]\nsteps\n[/THOUGHT]\n[ANSWER]\nassert f(\"a==b\", [1, 2]) == 'x == y'\n[/ANSWER]";
        assert_eq!(one(TaskKind::OutputPred, raw), "'x == y'");
        assert_eq!(one(TaskKind::InputPred, raw), "\"a==b\", [1, 2]");
        assert_eq!(one(TaskKind::OutputPred, "so the answer is\n```python\n[1, 2]\n```"), "[1, 2]");
        assert_eq!(one(TaskKind::OutputPred, "thinking\n42"), "42");
        assert_eq!(one(TaskKind::OutputPred, "[ANSWER]\n17\n"), "17");
    }

    #[test]
    fn repair_program() {
        let raw = "Fixed:\n```python\nx = 1\nprint(x)\n```\nDone.";
        assert_eq!(one(TaskKind::Repair, raw), "x = 1\nprint(x)");
        assert_eq!(one(TaskKind::Repair, "  print(2)\n"), "print(2)");
    }
}
