//! Statement-level control flow graphs.
//!
//! One node per executable statement line; no synthetic entry, exit or call
//! nodes. Control that falls off the end of the target body is recorded in
//! [`Cfg::exits`] instead of pointing at an exit node.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::program::{SimpleKind, SourceProgram, Stmt, StmtKind, Target};

/// Node identifier: `A`, `B`, ..., `Z`, `AA`, `AB`, ...
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    /// Column-style identifier for the `index`-th node (0-based).
    pub fn from_index(index: usize) -> Self {
        let mut n = index + 1;
        let mut letters = Vec::new();
        while n > 0 {
            let rem = (n - 1) % 26;
            letters.push(b'A' + rem as u8);
            n = (n - 1) / 26;
        }
        letters.reverse();
        NodeId(String::from_utf8(letters).expect("ascii"))
    }

    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Statement,
    Branch,
    LoopHeader,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Branch {
    #[serde(rename = "T")]
    True,
    #[serde(rename = "F")]
    False,
    #[serde(rename = "U")]
    Unconditional,
}

impl Branch {
    /// Edge annotation, `None` for unconditional flow.
    pub fn tag(self) -> Option<&'static str> {
        match self {
            Branch::True => Some("T"),
            Branch::False => Some("F"),
            Branch::Unconditional => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CfgNode {
    pub id: NodeId,
    pub label: String,
    #[serde(rename = "line")]
    pub line_no: u32,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct CfgEdge {
    pub from: NodeId,
    pub to: NodeId,
    pub branch: Branch,
}

/// Control leaving the target body from `from` along `branch`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CfgExit {
    pub from: NodeId,
    pub branch: Branch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Cfg {
    pub entry: NodeId,
    pub nodes: Vec<CfgNode>,
    pub edges: Vec<CfgEdge>,
    #[serde(skip)]
    pub exits: Vec<CfgExit>,
    #[serde(skip)]
    pub line_map: BTreeMap<u32, NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BuildError {
    #[error("unsupported construct '{construct_name}' at line {line}")]
    UnsupportedConstruct { line: u32, construct_name: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {0} has no CFG node")]
pub struct NoSuchLine(pub u32);

/// A broken CFG invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub rule_name: &'static str,
    pub node_or_edge: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}: {}", self.rule_name, self.node_or_edge, self.message)
    }
}

impl Cfg {
    pub fn node(&self, id: &NodeId) -> Option<&CfgNode> {
        self.nodes.iter().find(|n| &n.id == id)
    }

    pub fn outgoing<'a>(&'a self, id: &'a NodeId) -> impl Iterator<Item = &'a CfgEdge> + 'a {
        self.edges.iter().filter(move |e| &e.from == id)
    }

    pub fn has_edge(&self, from: &NodeId, to: &NodeId) -> bool {
        self.edges.iter().any(|e| &e.from == from && &e.to == to)
    }

    /// Canonical JSON: `{"entry","nodes":[{"id","label","line","kind"}],"edges":[{"from","to","branch"}]}`.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("cfg serializes")
    }

    pub fn line_to_node(&self, line_no: u32) -> Result<NodeId, NoSuchLine> {
        self.line_map.get(&line_no).cloned().ok_or(NoSuchLine(line_no))
    }

    /// Nodes with no directed path from the entry.
    pub fn unreachable_nodes(&self) -> BTreeSet<NodeId> {
        let mut seen: BTreeSet<&NodeId> = BTreeSet::new();
        let mut queue = VecDeque::from([&self.entry]);
        seen.insert(&self.entry);
        while let Some(id) = queue.pop_front() {
            for edge in self.outgoing(id) {
                if seen.insert(&edge.to) {
                    queue.push_back(&edge.to);
                }
            }
        }
        self.nodes
            .iter()
            .filter(|n| !seen.contains(&n.id))
            .map(|n| n.id.clone())
            .collect()
    }

    /// Checks every structural invariant; an empty result means the graph is
    /// well formed.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut push = |rule_name, subject: String, message: String| {
            out.push(Violation {
                rule_name,
                node_or_edge: subject,
                message,
            })
        };
        let by_id: HashMap<&NodeId, &CfgNode> = self.nodes.iter().map(|n| (&n.id, n)).collect();

        if by_id.len() != self.nodes.len() {
            push("unique-ids", "nodes".into(), "node ids are not unique".into());
        }
        match by_id.get(&self.entry) {
            None => push(
                "entry",
                self.entry.to_string(),
                "entry does not name a node".into(),
            ),
            Some(entry) => {
                if self.nodes.iter().any(|n| n.line_no < entry.line_no) {
                    push(
                        "entry",
                        self.entry.to_string(),
                        "entry is not the lowest-line node".into(),
                    );
                }
            }
        }
        for pair in self.nodes.windows(2) {
            if pair[0].line_no >= pair[1].line_no {
                push(
                    "node-order",
                    pair[1].id.to_string(),
                    format!("line {} does not follow line {}", pair[1].line_no, pair[0].line_no),
                );
            }
        }
        for node in &self.nodes {
            if node.label.trim().is_empty() {
                push("label-non-empty", node.id.to_string(), "empty label".into());
            }
            let expected = kind_for_label(&node.label);
            if node.kind != expected {
                push(
                    "node-kind",
                    node.id.to_string(),
                    format!("kind {:?} does not match label {:?}", node.kind, node.label),
                );
            }
        }

        let mut seen_edges = BTreeSet::new();
        for edge in &self.edges {
            let subject = edge_subject(edge);
            let (Some(from), Some(_)) = (by_id.get(&edge.from), by_id.get(&edge.to)) else {
                push("dangling-edge", subject, "edge endpoint is not a node".into());
                continue;
            };
            if !seen_edges.insert((&edge.from, &edge.to, edge.branch)) {
                push(
                    "no-duplicate-edges",
                    subject.clone(),
                    "edge appears more than once".into(),
                );
            }
            let labeled = edge.branch != Branch::Unconditional;
            if labeled != (from.kind != NodeKind::Statement) {
                push(
                    "branch-label-source",
                    subject,
                    format!("{:?} edge leaves a {:?} node", edge.branch, from.kind),
                );
            }
        }
        for exit in &self.exits {
            if !by_id.contains_key(&exit.from) {
                push(
                    "dangling-edge",
                    format!("{} -> (exit)", exit.from),
                    "exit leaves a missing node".into(),
                );
            }
        }

        for node in &self.nodes {
            let count = |b: Branch| {
                self.edges
                    .iter()
                    .filter(|e| e.from == node.id && e.branch == b)
                    .count()
                    + self
                        .exits
                        .iter()
                        .filter(|x| x.from == node.id && x.branch == b)
                        .count()
            };
            match node.kind {
                NodeKind::Branch | NodeKind::LoopHeader => {
                    let (t, f, u) = (
                        count(Branch::True),
                        count(Branch::False),
                        count(Branch::Unconditional),
                    );
                    if t != 1 || f != 1 || u != 0 {
                        push(
                            "branch-arity",
                            node.id.to_string(),
                            format!("expected one T and one F successor, found T={t} F={f} U={u}"),
                        );
                    }
                }
                NodeKind::Statement => {
                    let edges = self.outgoing(&node.id).count();
                    let exits = self.exits.iter().filter(|x| x.from == node.id).count();
                    if edges + exits > 1 {
                        push(
                            "statement-arity",
                            node.id.to_string(),
                            format!("{} successors", edges + exits),
                        );
                    } else if edges + exits == 0 && !is_terminal_label(&node.label) {
                        push(
                            "statement-arity",
                            node.id.to_string(),
                            "non-terminal statement has no successor".into(),
                        );
                    }
                }
            }
        }

        let mapped: Vec<&NodeId> = self.line_map.values().collect();
        let mapped_set: BTreeSet<&NodeId> = mapped.iter().copied().collect();
        if mapped.len() != mapped_set.len() || mapped.len() != self.nodes.len() {
            push(
                "line-map-bijection",
                "line_map".into(),
                format!(
                    "{} lines map onto {} distinct ids for {} nodes",
                    mapped.len(),
                    mapped_set.len(),
                    self.nodes.len()
                ),
            );
        }
        for (line, id) in &self.line_map {
            match by_id.get(id) {
                Some(node) if node.line_no == *line => {}
                _ => push(
                    "line-map-bijection",
                    format!("line {line}"),
                    format!("maps to {id}, which is not the node on that line"),
                ),
            }
        }
        out
    }
}

fn edge_subject(edge: &CfgEdge) -> String {
    match edge.branch.tag() {
        Some(tag) => format!("{} -{}-> {}", edge.from, tag, edge.to),
        None => format!("{} -> {}", edge.from, edge.to),
    }
}

fn leading_keyword(label: &str) -> &str {
    let end = label
        .find(|c: char| !(c.is_alphanumeric() || c == '_'))
        .unwrap_or(label.len());
    &label[..end]
}

fn kind_for_label(label: &str) -> NodeKind {
    match leading_keyword(label) {
        "if" | "elif" => NodeKind::Branch,
        "for" | "while" => NodeKind::LoopHeader,
        _ => NodeKind::Statement,
    }
}

fn is_terminal_label(label: &str) -> bool {
    matches!(leading_keyword(label), "return" | "raise")
}

/// Builds the statement-level CFG of `program`'s target body.
pub fn build_cfg(program: &SourceProgram) -> Result<Cfg, BuildError> {
    let in_function = matches!(program.target, Target::FunctionBody(_));
    if let Some((line, construct)) = first_unsupported(&program.body) {
        let construct_name = match construct {
            "def" if in_function => "nested-def",
            other => other,
        };
        return Err(BuildError::UnsupportedConstruct {
            line,
            construct_name: construct_name.to_string(),
        });
    }

    let mut collected = Vec::new();
    collect_nodes(&program.body, &mut collected);
    collected.sort_by_key(|(line, _, _)| *line);
    let nodes: Vec<CfgNode> = collected
        .into_iter()
        .enumerate()
        .map(|(i, (line_no, label, kind))| CfgNode {
            id: NodeId::from_index(i),
            label,
            line_no,
            kind,
        })
        .collect();
    let index_of_line: HashMap<u32, usize> =
        nodes.iter().enumerate().map(|(i, n)| (n.line_no, i)).collect();

    let mut builder = EdgeBuilder {
        index_of_line: &index_of_line,
        edges: Vec::new(),
        exits: Vec::new(),
    };
    builder.block(&program.body, None, None);

    let mut edges = builder.edges;
    edges.sort_by_key(|&(from, _, branch)| (from, branch));
    let mut exits = builder.exits;
    exits.sort_by_key(|&(from, branch)| (from, branch));

    let line_map = nodes.iter().map(|n| (n.line_no, n.id.clone())).collect();
    let entry = nodes
        .first()
        .map(|n| n.id.clone())
        .unwrap_or_else(|| NodeId::from_index(0));
    Ok(Cfg {
        entry,
        edges: edges
            .into_iter()
            .map(|(from, to, branch)| CfgEdge {
                from: nodes[from].id.clone(),
                to: nodes[to].id.clone(),
                branch,
            })
            .collect(),
        exits: exits
            .into_iter()
            .map(|(from, branch)| CfgExit {
                from: nodes[from].id.clone(),
                branch,
            })
            .collect(),
        nodes,
        line_map,
    })
}

fn first_unsupported(stmts: &[Stmt]) -> Option<(u32, &'static str)> {
    stmts.iter().find_map(|s| match &s.kind {
        StmtKind::Unsupported { construct, .. } => Some((s.line, *construct)),
        StmtKind::If {
            body,
            elifs,
            orelse,
        } => first_unsupported(body)
            .or_else(|| elifs.iter().find_map(|c| first_unsupported(&c.body)))
            .or_else(|| orelse.as_deref().and_then(first_unsupported)),
        StmtKind::Loop { body, .. } => first_unsupported(body),
        StmtKind::Simple(_) | StmtKind::Inert => None,
    })
}

fn collect_nodes(stmts: &[Stmt], out: &mut Vec<(u32, String, NodeKind)>) {
    for stmt in stmts {
        match &stmt.kind {
            StmtKind::Inert => {}
            StmtKind::Simple(_) => out.push((stmt.line, stmt.label.clone(), NodeKind::Statement)),
            StmtKind::If {
                body,
                elifs,
                orelse,
            } => {
                out.push((stmt.line, stmt.label.clone(), NodeKind::Branch));
                collect_nodes(body, out);
                for clause in elifs {
                    out.push((clause.line, clause.label.clone(), NodeKind::Branch));
                    collect_nodes(&clause.body, out);
                }
                if let Some(orelse) = orelse {
                    collect_nodes(orelse, out);
                }
            }
            StmtKind::Loop { body, .. } => {
                out.push((stmt.line, stmt.label.clone(), NodeKind::LoopHeader));
                collect_nodes(body, out);
            }
            StmtKind::Unsupported { .. } => unreachable!("rejected before collection"),
        }
    }
}

#[derive(Clone, Copy)]
struct LoopCtx {
    header: usize,
    after: Option<usize>,
}

struct EdgeBuilder<'a> {
    index_of_line: &'a HashMap<u32, usize>,
    edges: Vec<(usize, usize, Branch)>,
    exits: Vec<(usize, Branch)>,
}

impl EdgeBuilder<'_> {
    fn node(&self, line: u32) -> usize {
        self.index_of_line[&line]
    }

    fn link(&mut self, from: usize, to: Option<usize>, branch: Branch) {
        match to {
            Some(to) => self.edges.push((from, to, branch)),
            None => self.exits.push((from, branch)),
        }
    }

    /// First node executed by `stmts`, or `succ` when the block has none.
    fn entry_of(&self, stmts: &[Stmt], succ: Option<usize>) -> Option<usize> {
        stmts
            .iter()
            .find(|s| s.kind != StmtKind::Inert)
            .map(|s| self.node(s.line))
            .or(succ)
    }

    fn block(&mut self, stmts: &[Stmt], succ: Option<usize>, lp: Option<LoopCtx>) {
        for (i, stmt) in stmts.iter().enumerate() {
            let next = self.entry_of(&stmts[i + 1..], succ);
            self.stmt(stmt, next, lp);
        }
    }

    fn stmt(&mut self, stmt: &Stmt, next: Option<usize>, lp: Option<LoopCtx>) {
        match &stmt.kind {
            StmtKind::Inert => {}
            StmtKind::Simple(kind) => {
                let n = self.node(stmt.line);
                match kind {
                    k if k.is_terminal() => {}
                    SimpleKind::Break => self.link(n, lp.and_then(|l| l.after), Branch::Unconditional),
                    SimpleKind::Continue => {
                        self.link(n, lp.map(|l| l.header), Branch::Unconditional)
                    }
                    _ => self.link(n, next, Branch::Unconditional),
                }
            }
            StmtKind::If {
                body,
                elifs,
                orelse,
            } => {
                let mut cond = self.node(stmt.line);
                let target = self.entry_of(body, next);
                self.link(cond, target, Branch::True);
                self.block(body, next, lp);
                for clause in elifs {
                    let elif = self.node(clause.line);
                    self.link(cond, Some(elif), Branch::False);
                    let target = self.entry_of(&clause.body, next);
                    self.link(elif, target, Branch::True);
                    self.block(&clause.body, next, lp);
                    cond = elif;
                }
                match orelse {
                    Some(orelse) => {
                        let target = self.entry_of(orelse, next);
                        self.link(cond, target, Branch::False);
                        self.block(orelse, next, lp);
                    }
                    None => self.link(cond, next, Branch::False),
                }
            }
            StmtKind::Loop { body, .. } => {
                let header = self.node(stmt.line);
                let target = self.entry_of(body, Some(header));
                self.link(header, target, Branch::True);
                self.block(
                    body,
                    Some(header),
                    Some(LoopCtx {
                        header,
                        after: next,
                    }),
                );
                self.link(header, next, Branch::False);
            }
            StmtKind::Unsupported { .. } => unreachable!("rejected before edge building"),
        }
    }
}
