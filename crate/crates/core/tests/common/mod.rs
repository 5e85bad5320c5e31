//! Helpers shared by the integration tests.

#![allow(dead_code)]

use std::collections::HashMap;

use graphdiff::{GraphPoint, GraphSpec, MetricGraph};
use petgraph::algo::dijkstra;
use petgraph::graph::{NodeIndex, UnGraph};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const RAY_CUT: f64 = 30.0;

/// Subdivides every edge into pieces no longer than `h`, with the query points
/// inserted as extra nodes, and returns the Dijkstra distance between them.
pub fn refined_distance(g: &MetricGraph, h: f64, x: GraphPoint, y: GraphPoint) -> f64 {
    let mut net: UnGraph<(), f64> = UnGraph::new_undirected();
    let vertices: Vec<NodeIndex> = (0..g.num_vertices()).map(|_| net.add_node(())).collect();
    let mut marks: HashMap<(usize, u64), NodeIndex> = HashMap::new();
    for (e, edge) in g.edges().iter().enumerate() {
        let len = if edge.is_infinite() { RAY_CUT } else { edge.length };
        let n = (len / h).ceil() as usize;
        let mut coords: Vec<f64> = (0..n).map(|k| len * k as f64 / n as f64).collect();
        // the far end must compare equal to `len` to land on the vertex
        coords.push(len);
        for p in [x, y] {
            if p.edge.0 == e {
                coords.push(p.coord);
            }
        }
        coords.sort_by(f64::total_cmp);
        coords.dedup();
        let node_at = |net: &mut UnGraph<(), f64>, c: f64| -> NodeIndex {
            if c == 0.0 {
                vertices[edge.initial.0]
            } else if c == len && !edge.is_infinite() {
                vertices[edge.terminal.unwrap().0]
            } else {
                net.add_node(())
            }
        };
        let mut prev = node_at(&mut net, coords[0]);
        marks.insert((e, coords[0].to_bits()), prev);
        for w in coords.windows(2) {
            let next = node_at(&mut net, w[1]);
            marks.insert((e, w[1].to_bits()), next);
            net.add_edge(prev, next, w[1] - w[0]);
            prev = next;
        }
    }
    let a = marks[&(x.edge.0, x.coord.to_bits())];
    let b = marks[&(y.edge.0, y.coord.to_bits())];
    let dist = dijkstra(&net, a, Some(b), |e| *e.weight());
    dist[&b]
}

pub fn random_graph(rng: &mut ChaCha8Rng) -> GraphSpec {
    let nv = rng.gen_range(2..=4);
    let names: Vec<String> = (0..nv).map(|i| format!("v{i}")).collect();
    let mut spec = GraphSpec::new(names.clone());
    let mut count = 0;
    // a spanning path keeps the graph connected
    for i in 1..nv {
        spec = spec.edge(&names[i - 1], &names[i], rng.gen_range(0.5..3.0));
        count += 1;
    }
    let rays = rng.gen_range(1..=2);
    for _ in 0..rays {
        spec = spec.ray(&names[rng.gen_range(0..nv)]);
        count += 1;
    }
    // always one parallel edge much shorter than the path it shadows
    spec = spec.edge(&names[0], &names[nv - 1], rng.gen_range(0.2..0.6));
    count += 1;
    while count < 8 && rng.gen_bool(0.6) {
        let (a, b) = (rng.gen_range(0..nv), rng.gen_range(0..nv));
        spec = spec.edge(&names[a], &names[b], rng.gen_range(0.3..2.5));
        count += 1;
    }
    spec
}

pub fn random_point(g: &MetricGraph, rng: &mut ChaCha8Rng) -> GraphPoint {
    let e = rng.gen_range(0..g.num_edges());
    let edge = &g.edges()[e];
    let top = if edge.is_infinite() { 8.0 } else { edge.length };
    // a grid of 1e-4 keeps the points exactly representable in the reference
    GraphPoint::new(e, (rng.gen_range(0.0..=top) * 1e4).round() / 1e4)
}

