//! Property checks over seeded random programs: Mermaid round-trip, layout
//! geometry, emission determinism and trace containment.

mod common;

use cfglens::emit::{layout, to_dot, to_mermaid, to_svg};
use cfglens::harness::Sandbox;
use cfglens::oracle::{check_source, OracleStatus, DEFAULT_TIMEOUT_MS};
use cfglens::{build_cfg, parse_program, Cfg};
use common::gen::program;
use common::mermaid::{graph_of, parse_mermaid, round_trips};

fn cfg_of(seed: u64) -> Cfg {
    let g = program(seed);
    let p = parse_program(&g.source).unwrap_or_else(|e| panic!("seed {seed}: {e}\n{}", g.source));
    build_cfg(&p).unwrap_or_else(|e| panic!("seed {seed}: {e}\n{}", g.source))
}

#[test]
fn mermaid_round_trips() {
    for seed in 0..200 {
        let cfg = cfg_of(seed);
        let text = to_mermaid(&cfg);
        let (nodes, mut edges) = parse_mermaid(&text);
        edges.sort();
        assert_eq!((nodes, edges), graph_of(&cfg), "seed {seed}");
        assert!(round_trips(&cfg, &text));
    }
}

#[test]
fn layout_is_disjoint_and_in_bounds() {
    for seed in 0..200 {
        let cfg = cfg_of(seed);
        let plan = layout(&cfg);
        let rects: Vec<_> = cfg.nodes.iter().map(|n| plan.rect(&n.id)).collect();
        for (i, a) in rects.iter().enumerate() {
            assert!(a.0 >= 0 && a.1 >= 0 && a.2 <= plan.canvas.0 && a.3 <= plan.canvas.1, "seed {seed}");
            for b in &rects[i + 1..] {
                let apart = a.2 <= b.0 || b.2 <= a.0 || a.3 <= b.1 || b.3 <= a.1;
                assert!(apart, "seed {seed}: {a:?} overlaps {b:?}");
            }
        }
        for lane in plan.back_edge_lanes.values() {
            assert!((0..plan.canvas.0).contains(lane), "seed {seed}");
        }
    }
}

#[test]
fn emission_is_deterministic() {
    for seed in 0..50 {
        let (a, b) = (cfg_of(seed), cfg_of(seed));
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(to_mermaid(&a), to_mermaid(&b));
        assert_eq!(to_dot(&a), to_dot(&b));
        assert_eq!(to_svg(&a), to_svg(&b));
    }
}

#[test]
fn executions_stay_inside_the_graph() {
    let sandbox = Sandbox::default();
    for seed in 0..40 {
        let g = program(seed);
        let status = check_source(&g.source, &sandbox, &build_cfg, DEFAULT_TIMEOUT_MS);
        assert_eq!(status, OracleStatus::Pass, "seed {seed} (function: {})\n{}", g.is_function, g.source);
    }
}

