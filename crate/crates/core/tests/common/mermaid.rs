//! Parser for the emitted Mermaid subset, written independently of the
//! emitter.

use std::collections::BTreeSet;

use cfglens::{Branch, Cfg};

/// Undoes label escaping, scanning left to right.
fn unescape(s: &str) -> String {
    let mut out = String::new();
    let mut rest = s;
    while !rest.is_empty() {
        if let Some(r) = rest.strip_prefix("#quot;") {
            out.push('"');
            rest = r;
        } else if let Some(r) = rest.strip_prefix("#35;") {
            out.push('#');
            rest = r;
        } else {
            let c = rest.chars().next().unwrap();
            out.push(c);
            rest = &rest[c.len_utf8()..];
        }
    }
    out
}

/// `ID["label"]` at the start of `s`; returns id, label and the remainder.
fn node_ref(s: &str) -> (String, String, &str) {
    let open = s.find("[\"").expect("node opens");
    let close = s[open + 2..].find("\"]").expect("node closes") + open + 2;
    (s[..open].to_string(), unescape(&s[open + 2..close]), &s[close + 2..])
}

pub type Parsed = (BTreeSet<(String, String)>, Vec<(String, String, Branch)>);

pub fn parse_mermaid(text: &str) -> Parsed {
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("graph TD"));
    let mut nodes = BTreeSet::new();
    let mut edges = Vec::new();
    for line in lines {
        let line = line.strip_prefix("    ").expect("indented");
        let (from, label, rest) = node_ref(line);
        nodes.insert((from.clone(), label));
        if rest.is_empty() {
            continue;
        }
        let (branch, rest) = if let Some(r) = rest.strip_prefix(" -->|T| ") {
            (Branch::True, r)
        } else if let Some(r) = rest.strip_prefix(" -->|F| ") {
            (Branch::False, r)
        } else {
            (Branch::Unconditional, rest.strip_prefix(" --> ").expect("arrow"))
        };
        let (to, label, tail) = node_ref(rest);
        assert!(tail.is_empty());
        nodes.insert((to.clone(), label));
        edges.push((from, to, branch));
    }
    (nodes, edges)
}

/// Node set and sorted edge list of `cfg` in the parser's terms.
pub fn graph_of(cfg: &Cfg) -> Parsed {
    let nodes = cfg.nodes.iter().map(|n| (n.id.as_str().to_string(), n.label.clone())).collect();
    let mut edges: Vec<(String, String, Branch)> = cfg
        .edges
        .iter()
        .map(|e| (e.from.as_str().to_string(), e.to.as_str().to_string(), e.branch))
        .collect();
    edges.sort();
    (nodes, edges)
}

/// Whether the Mermaid text parses back to exactly `cfg`.
pub fn round_trips(cfg: &Cfg, text: &str) -> bool {
    let (nodes, mut edges) = parse_mermaid(text);
    edges.sort();
    (nodes, edges) == graph_of(cfg)
}
