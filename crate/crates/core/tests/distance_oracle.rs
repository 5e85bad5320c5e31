//! Graph distances against two independent references: Dijkstra on a finely
//! subdivided copy of the graph, and brute-force enumeration of simple paths
//! between vertices.

mod common;

use common::{random_graph, random_point, refined_distance};
use graphdiff::{GraphPoint, GraphSpec, VertexId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn matches_refined_dijkstra_on_random_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let h = 1e-3;
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let g = random_graph(&mut rng).build().unwrap();
        assert!(g.num_edges() <= 8);
        for _ in 0..10 {
            let (x, y) = (random_point(&g, &mut rng), random_point(&g, &mut rng));
            let d = g.graph_distance(x, y).unwrap();
            let reference = refined_distance(&g, h, x, y);
            worst = worst.max((d - reference).abs());
        }
    }
    assert!(worst <= 2e-3, "worst difference {worst}");
}

#[test]
fn parallel_edge_shortcut() {
    // points on the long edge of a 1/3 pair: going around through the short
    // edge beats staying on the long one
    let g = GraphSpec::new(["a", "b"])
        .edge("a", "b", 1.0)
        .edge("a", "b", 3.0)
        .ray("a")
        .build()
        .unwrap();
    let x = GraphPoint::new(1, 0.2);
    let y = GraphPoint::new(1, 2.8);
    let d = g.graph_distance(x, y).unwrap();
    assert!((d - 1.4).abs() < 1e-14, "{d}");
    assert!((refined_distance(&g, 1e-3, x, y) - 1.4).abs() < 1e-9);
    // and directly along the edge when that is shorter
    let z = GraphPoint::new(1, 1.0);
    assert!((g.distance(x, z) - 0.8).abs() < 1e-14);
}

#[test]
fn self_loop_distances() {
    let g = GraphSpec::new(["a"]).edge("a", "a", 4.0).ray("a").build().unwrap();
    let x = GraphPoint::new(0, 3.5);
    assert!((g.distance(x, GraphPoint::new(1, 0.0)) - 0.5).abs() < 1e-14);
    assert!((g.distance(x, GraphPoint::new(0, 0.5)) - 1.0).abs() < 1e-14);
    assert!((refined_distance(&g, 1e-3, x, GraphPoint::new(0, 0.5)) - 1.0).abs() < 1e-9);
}

/// Shortest simple path between `s` and `t` by exhaustive search.
fn brute_force(adj: &[Vec<(usize, f64)>], s: usize, t: usize) -> f64 {
    fn go(adj: &[Vec<(usize, f64)>], v: usize, t: usize, seen: &mut Vec<bool>, acc: f64, best: &mut f64) {
        if v == t {
            *best = best.min(acc);
            return;
        }
        for &(w, len) in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                go(adj, w, t, seen, acc + len, best);
                seen[w] = false;
            }
        }
    }
    let mut seen = vec![false; adj.len()];
    seen[s] = true;
    let mut best = f64::INFINITY;
    go(adj, s, t, &mut seen, 0.0, &mut best);
    best
}

#[test]
fn vertex_distances_match_simple_path_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let nv = 10;
    let names: Vec<String> = (0..nv).map(|i| format!("v{i}")).collect();
    let mut spec = GraphSpec::new(names.clone()).ray("v0");
    let mut adj = vec![Vec::new(); nv];
    let mut add = |spec: GraphSpec, a: usize, b: usize, len: f64| {
        adj[a].push((b, len));
        adj[b].push((a, len));
        spec.edge(&names[a], &names[b], len)
    };
    for i in 1..nv {
        let j = rng.gen_range(0..i);
        spec = add(spec, i, j, rng.gen_range(0.1..5.0));
    }
    for _ in 0..8 {
        let (a, b) = (rng.gen_range(0..nv), rng.gen_range(0..nv));
        if a != b {
            spec = add(spec, a, b, rng.gen_range(0.1..5.0));
        }
    }
    let g = spec.build().unwrap();
    for s in 0..nv {
        for t in 0..nv {
            let d = g.vertex_distance(VertexId(s), VertexId(t));
            let reference = brute_force(&adj, s, t);
            assert!((d - reference).abs() < 1e-12, "{s}->{t}: {d} vs {reference}");
        }
    }
}
