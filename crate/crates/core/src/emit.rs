//! Text and image renderings of a [`Cfg`].
//!
//! All emitters are byte-stable: output depends only on node and edge order.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::cfg::{Cfg, CfgNode, NodeId};

/// Escapes a label for a double-quoted Mermaid node. `#` is escaped as well so
/// that entity text already present in a label survives a round trip.
pub fn mermaid_escape(label: &str) -> String {
    let mut out = String::with_capacity(label.len());
    for c in label.chars() {
        match c {
            '#' => out.push_str("#35;"),
            '"' => out.push_str("#quot;"),
            c => out.push(c),
        }
    }
    out
}

/// Inverse of [`mermaid_escape`].
pub fn mermaid_unescape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(pos) = rest.find('#') {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        if let Some(after) = tail.strip_prefix("#quot;") {
            out.push('"');
            rest = after;
        } else if let Some(after) = tail.strip_prefix("#35;") {
            out.push('#');
            rest = after;
        } else {
            out.push('#');
            rest = &tail[1..];
        }
    }
    out.push_str(rest);
    out
}

fn mermaid_node(node: &CfgNode) -> String {
    format!("{}[\"{}\"]", node.id, mermaid_escape(&node.label))
}

/// Mermaid `graph TD` text: one line per edge carrying both endpoint
/// declarations, then one bare declaration per node without edges.
pub fn to_mermaid(cfg: &Cfg) -> String {
    let by_id: BTreeMap<&NodeId, &CfgNode> = cfg.nodes.iter().map(|n| (&n.id, n)).collect();
    let mut out = String::from("graph TD\n");
    for edge in &cfg.edges {
        let arrow = match edge.branch.tag() {
            Some(tag) => format!("-->|{tag}|"),
            None => "-->".to_string(),
        };
        let _ = writeln!(
            out,
            "    {} {} {}",
            mermaid_node(by_id[&edge.from]),
            arrow,
            mermaid_node(by_id[&edge.to])
        );
    }
    for node in &cfg.nodes {
        if !cfg.edges.iter().any(|e| e.from == node.id || e.to == node.id) {
            let _ = writeln!(out, "    {}", mermaid_node(node));
        }
    }
    out
}

fn dot_escape(label: &str) -> String {
    label.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz document: node declarations in node order, then edges.
pub fn to_dot(cfg: &Cfg) -> String {
    let mut out = String::from("digraph cfg {\n");
    out.push_str("    node [shape=box, fontname=\"monospace\"];\n");
    for node in &cfg.nodes {
        let _ = writeln!(out, "    {} [label=\"{}\"];", node.id, dot_escape(&node.label));
    }
    for edge in &cfg.edges {
        match edge.branch.tag() {
            Some(tag) => {
                let _ = writeln!(out, "    {} -> {} [label=\"{tag}\"];", edge.from, edge.to);
            }
            None => {
                let _ = writeln!(out, "    {} -> {};", edge.from, edge.to);
            }
        }
    }
    out.push_str("}\n");
    out
}

pub const CHAR_WIDTH: i32 = 10;
pub const NODE_PADDING: i32 = 20;
pub const NODE_HEIGHT: i32 = 36;
pub const H_GAP: i32 = 40;
pub const V_GAP: i32 = 60;
pub const MARGIN: i32 = 20;
/// Horizontal spacing of back-edge lanes in the left gutter.
pub const LANE_WIDTH: i32 = 12;

/// Pixel placement of every node. Positions are `(center x, top y)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayoutPlan {
    pub positions: BTreeMap<NodeId, (i32, i32)>,
    pub node_size: BTreeMap<NodeId, (i32, i32)>,
    pub layers: BTreeMap<NodeId, usize>,
    pub canvas: (i32, i32),
    /// Back-edges (by index into `cfg.edges`) with their gutter lane x.
    pub back_edge_lanes: BTreeMap<usize, i32>,
}

impl LayoutPlan {
    /// `(left, top, right, bottom)` of a node rectangle.
    pub fn rect(&self, id: &NodeId) -> (i32, i32, i32, i32) {
        let (cx, top) = self.positions[id];
        let (w, h) = self.node_size[id];
        (cx - w / 2, top, cx + w / 2, top + h)
    }
}

pub fn node_width(label: &str) -> i32 {
    CHAR_WIDTH * label.chars().count() as i32 + NODE_PADDING
}

fn line_of(cfg: &Cfg) -> BTreeMap<&NodeId, u32> {
    cfg.nodes.iter().map(|n| (&n.id, n.line_no)).collect()
}

/// Edges whose target sits on an earlier line than their source.
pub fn is_back_edge(cfg: &Cfg, index: usize) -> bool {
    let lines = line_of(cfg);
    let e = &cfg.edges[index];
    lines[&e.to] < lines[&e.from]
}

/// Layered top-down layout. A node's layer is the longest back-edge-free
/// path from the entry; nodes the entry cannot reach that way are stacked
/// below the reachable ones.
pub fn layout(cfg: &Cfg) -> LayoutPlan {
    let lines = line_of(cfg);
    let index: BTreeMap<&NodeId, usize> =
        cfg.nodes.iter().enumerate().map(|(i, n)| (&n.id, i)).collect();
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); cfg.nodes.len()];
    let mut back_edges = Vec::new();
    for (i, e) in cfg.edges.iter().enumerate() {
        if lines[&e.to] < lines[&e.from] {
            back_edges.push(i);
        } else {
            preds[index[&e.to]].push(index[&e.from]);
        }
    }

    // Forward edges strictly increase line number, so node order is a
    // topological order.
    let entry = index.get(&cfg.entry).copied();
    let mut layer: Vec<Option<usize>> = vec![None; cfg.nodes.len()];
    for i in 0..cfg.nodes.len() {
        if Some(i) == entry {
            layer[i] = Some(0);
            continue;
        }
        layer[i] = preds[i].iter().filter_map(|&p| layer[p]).max().map(|l| l + 1);
    }
    let reachable_depth = layer.iter().flatten().max().map_or(0, |m| m + 1);
    let mut orphan_layer: Vec<Option<usize>> = vec![None; cfg.nodes.len()];
    for i in 0..cfg.nodes.len() {
        if layer[i].is_some() {
            continue;
        }
        let below = preds[i]
            .iter()
            .filter_map(|&p| layer[p].or(orphan_layer[p]))
            .max()
            .map_or(reachable_depth, |l| (l + 1).max(reachable_depth));
        orphan_layer[i] = Some(below);
    }
    let layer: Vec<usize> = layer
        .iter()
        .zip(&orphan_layer)
        .map(|(a, b)| a.or(*b).unwrap_or(0))
        .collect();

    let depth = layer.iter().max().map_or(0, |m| m + 1);
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); depth];
    for (i, &l) in layer.iter().enumerate() {
        rows[l].push(i);
    }
    let widths: Vec<i32> = cfg.nodes.iter().map(|n| node_width(&n.label)).collect();
    let row_width = |row: &Vec<usize>| -> i32 {
        row.iter().map(|&i| widths[i]).sum::<i32>() + H_GAP * (row.len() as i32 - 1).max(0)
    };
    let content_width = rows.iter().map(row_width).max().unwrap_or(0);
    let side = MARGIN + LANE_WIDTH * back_edges.len() as i32;
    let canvas_w = 2 * side + content_width;
    let canvas_h = 2 * MARGIN + depth as i32 * NODE_HEIGHT + (depth as i32 - 1).max(0) * V_GAP;
    let center = canvas_w / 2;

    let mut positions = BTreeMap::new();
    let mut node_size = BTreeMap::new();
    let mut layers = BTreeMap::new();
    for (l, row) in rows.iter().enumerate() {
        let top = MARGIN + l as i32 * (NODE_HEIGHT + V_GAP);
        let mut x = center - row_width(row) / 2;
        for &i in row {
            let id = cfg.nodes[i].id.clone();
            positions.insert(id.clone(), (x + widths[i] / 2, top));
            node_size.insert(id.clone(), (widths[i], NODE_HEIGHT));
            layers.insert(id, l);
            x += widths[i] + H_GAP;
        }
    }
    let back_edge_lanes = back_edges
        .iter()
        .enumerate()
        .map(|(k, &e)| (e, side - LANE_WIDTH / 2 - k as i32 * LANE_WIDTH))
        .collect();

    LayoutPlan {
        positions,
        node_size,
        layers,
        canvas: (canvas_w, canvas_h),
        back_edge_lanes,
    }
}

fn xml_escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn polyline_midpoint(points: &[(i32, i32)]) -> (f64, f64) {
    let seg_len = |a: (i32, i32), b: (i32, i32)| {
        (((b.0 - a.0) as f64).powi(2) + ((b.1 - a.1) as f64).powi(2)).sqrt()
    };
    let total: f64 = points.windows(2).map(|w| seg_len(w[0], w[1])).sum();
    let mut remaining = total / 2.0;
    for w in points.windows(2) {
        let len = seg_len(w[0], w[1]);
        if len > 0.0 && remaining <= len {
            let t = remaining / len;
            return (
                w[0].0 as f64 + t * (w[1].0 - w[0].0) as f64,
                w[0].1 as f64 + t * (w[1].1 - w[0].1) as f64,
            );
        }
        remaining -= len;
    }
    let last = points[points.len() - 1];
    (last.0 as f64, last.1 as f64)
}

fn edge_points(plan: &LayoutPlan, cfg: &Cfg, index: usize) -> Vec<(i32, i32)> {
    let edge = &cfg.edges[index];
    let (sl, st, sr, sb) = plan.rect(&edge.from);
    let (tl, tt, tr, tb) = plan.rect(&edge.to);
    let (sx, tx) = ((sl + sr) / 2, (tl + tr) / 2);
    let (smid, tmid) = ((st + sb) / 2, (tt + tb) / 2);
    if let Some(&lane) = plan.back_edge_lanes.get(&index) {
        return vec![(sl, smid), (lane, smid), (lane, tmid), (tl, tmid)];
    }
    if sx > tl && sx < tr {
        return vec![(sx, sb), (sx, tt)];
    }
    let side = if sx < tl { tl } else { tr };
    if sx == tx {
        vec![(sx, sb), (tx, tt)]
    } else {
        vec![(sx, sb), (sx, tmid), (side, tmid)]
    }
}

/// Standalone SVG 1.1 image of the CFG.
pub fn to_svg(cfg: &Cfg) -> String {
    let plan = layout(cfg);
    let (w, h) = plan.canvas;
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">"
    );
    out.push_str("  <defs>\n");
    out.push_str("    <marker id=\"arrow\" viewBox=\"0 0 10 10\" refX=\"10\" refY=\"5\" markerWidth=\"8\" markerHeight=\"8\" orient=\"auto\">\n");
    out.push_str("      <path d=\"M 0 0 L 10 5 L 0 10 z\" fill=\"black\"/>\n");
    out.push_str("    </marker>\n");
    out.push_str("  </defs>\n");
    let _ = writeln!(out, "  <path d=\"M0 0H{w}V{h}H0Z\" fill=\"white\"/>");

    let mut labels = Vec::new();
    out.push_str("  <g class=\"edges\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\">\n");
    for (i, edge) in cfg.edges.iter().enumerate() {
        let points = edge_points(&plan, cfg, i);
        let coords: Vec<String> = points.iter().map(|(x, y)| format!("{x},{y}")).collect();
        let _ = writeln!(
            out,
            "    <polyline points=\"{}\" marker-end=\"url(#arrow)\"/>",
            coords.join(" ")
        );
        if let Some(tag) = edge.branch.tag() {
            labels.push((polyline_midpoint(&points), tag));
        }
    }
    out.push_str("  </g>\n");

    out.push_str("  <g class=\"nodes\">\n");
    for node in &cfg.nodes {
        let (l, t, r, b) = plan.rect(&node.id);
        let _ = writeln!(
            out,
            "    <rect x=\"{l}\" y=\"{t}\" width=\"{}\" height=\"{}\" rx=\"6\" ry=\"6\" fill=\"white\" stroke=\"black\" stroke-width=\"1.5\"/>",
            r - l,
            b - t
        );
        let _ = writeln!(
            out,
            "    <text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"16\" text-anchor=\"middle\" dominant-baseline=\"central\" fill=\"black\">{}</text>",
            (l + r) / 2,
            (t + b) / 2,
            xml_escape(&node.label)
        );
    }
    out.push_str("  </g>\n");

    out.push_str("  <g class=\"edge-labels\">\n");
    for ((x, y), tag) in labels {
        let _ = writeln!(
            out,
            "    <text x=\"{:.1}\" y=\"{:.1}\" font-family=\"monospace\" font-size=\"13\" font-weight=\"bold\" fill=\"black\">{tag}</text>",
            x + 4.0,
            y - 4.0
        );
    }
    out.push_str("  </g>\n");
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{build_cfg, parse_program};

    fn cfg(src: &str) -> Cfg {
        build_cfg(&parse_program(src).unwrap()).unwrap()
    }

    #[test]
    fn mermaid_straight_line() {
        assert_eq!(
            to_mermaid(&cfg("x = 1\ny = x + 1")),
            "graph TD\n    A[\"x = 1\"] --> B[\"y = x + 1\"]\n"
        );
    }

    #[test]
    fn mermaid_single_node() {
        assert_eq!(to_mermaid(&cfg("x = 1")), "graph TD\n    A[\"x = 1\"]\n");
    }

    #[test]
    fn mermaid_escaping_round_trips() {
        for label in ["s = \"a\"", "x = '#'", "t = '#quot;'", "u = \"#35;\"", "plain"] {
            let escaped = mermaid_escape(label);
            assert!(!escaped.contains('"'));
            assert_eq!(mermaid_unescape(&escaped), label);
        }
    }

    #[test]
    fn dot_documents() {
        let dot = to_dot(&cfg("x = 1\ny = 2"));
        assert!(dot.starts_with("digraph cfg {\n"));
        assert!(dot.contains("    A -> B;\n"));
        assert!(dot.ends_with("}\n"));

        let single = to_dot(&cfg("x = \"q\\\\\""));
        assert_eq!(single.matches(" [label=").count(), 1);
        assert!(!single.contains("->"));
        assert!(single.contains(r#"A [label="x = \"q\\\\\""];"#), "{single}");
    }

    #[test]
    fn dot_branch_edges() {
        // C is the `if`, D the then-arm, E the else-arm.
        let dot = to_dot(&cfg("a = 1\nb = 2\nif a:\n    c = 3\nelse:\n    c = 4\n"));
        assert!(dot.contains("    C -> D [label=\"T\"];\n"));
        assert!(dot.contains("    C -> E [label=\"F\"];\n"));
    }

    #[test]
    fn layout_single_node() {
        let g = cfg("x = 1");
        let plan = layout(&g);
        assert_eq!(plan.positions[&NodeId::new("A")], (plan.canvas.0 / 2, MARGIN));
        assert_eq!(plan.node_size[&NodeId::new("A")], (70, 36));
    }

    #[test]
    fn layout_chain() {
        let plan = layout(&cfg("a = 1\nb = 2\nc = 3"));
        let xs: Vec<i32> = plan.positions.values().map(|p| p.0).collect();
        let ys: Vec<i32> = plan.positions.values().map(|p| p.1).collect();
        assert!(xs.iter().all(|&x| x == xs[0]));
        assert_eq!(ys, vec![20, 116, 212]);
    }

    #[test]
    fn layout_diamond() {
        // Hand layering: if(0) -> then(1), else(1) -> join(2).
        let g = cfg("if a:\n    b = 1\nelse:\n    b = 2\nc = b");
        let plan = layout(&g);
        let layer = |id: &str| plan.layers[&NodeId::new(id)];
        assert_eq!((layer("A"), layer("B"), layer("C"), layer("D")), (0, 1, 1, 2));
        let (bx, by) = plan.positions[&NodeId::new("B")];
        let (cx, cy) = plan.positions[&NodeId::new("C")];
        assert_eq!(by, cy);
        // "b = 1" is 70 px wide, so centers sit 70 + 40 apart.
        assert_eq!(cx - bx, 110);
    }

    #[test]
    fn svg_counts() {
        let single = to_svg(&cfg("x = 1"));
        assert_eq!(single.matches("<rect").count(), 1);
        assert_eq!(single.matches("<text").count(), 1);

        let branchy = to_svg(&cfg("if a:\n    b = 1\nelse:\n    b = 2\n"));
        assert_eq!(branchy.matches(">T</text>").count(), 1);
        assert_eq!(branchy.matches(">F</text>").count(), 1);
        assert_eq!(branchy.matches("class=\"edge-labels\"").count(), 1);
    }

    #[test]
    fn svg_escapes_labels() {
        let svg = to_svg(&cfg("x = a < b & c"));
        assert!(svg.contains(">x = a &lt; b &amp; c</text>"));
    }

    #[test]
    fn back_edges_use_left_gutter() {
        let g = cfg("while x:\n    x -= 1\n");
        let plan = layout(&g);
        let (lane_index, lane_x) = plan.back_edge_lanes.iter().next().map(|(a, b)| (*a, *b)).unwrap();
        assert!(is_back_edge(&g, lane_index));
        let leftmost = plan.positions.keys().map(|id| plan.rect(id).0).min().unwrap();
        assert!(lane_x < leftmost && lane_x > 0);
    }
}
