//! Metric graphs: vertices glued by edges that are intervals `[0, l_e]` or
//! rays `[0, ∞)`, together with the induced shortest-path distance.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VertexId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeId(pub usize);

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

/// Which end of an edge touches a vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum End {
    Initial,
    Terminal,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub id: EdgeId,
    pub initial: VertexId,
    /// `None` exactly when the edge is an infinite ray.
    pub terminal: Option<VertexId>,
    pub length: f64,
}

impl Edge {
    pub fn is_infinite(&self) -> bool {
        self.length.is_infinite()
    }

    /// Vertices attached to this edge, each paired with the coordinate of
    /// the attachment point.
    pub fn ends(&self) -> impl Iterator<Item = (VertexId, End, f64)> + '_ {
        std::iter::once((self.initial, End::Initial, 0.0)).chain(
            self.terminal
                .map(|t| (t, End::Terminal, self.length)),
        )
    }
}

/// The compact core `Γ_f` or the union of rays `Γ_∞`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Finite,
    Infinite,
}

/// A point of the graph: an edge and a coordinate along it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GraphPoint {
    pub edge: EdgeId,
    pub coord: f64,
}

impl GraphPoint {
    pub fn new(edge: usize, coord: f64) -> Self {
        Self {
            edge: EdgeId(edge),
            coord,
        }
    }
}

impl std::str::FromStr for GraphPoint {
    type Err = Error;

    /// Parses `edge:coord`, e.g. `2:0.35`.
    fn from_str(s: &str) -> Result<Self> {
        let (edge, coord) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidPoint(format!("expected edge:coord, got `{s}`")))?;
        let edge = edge
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::InvalidPoint(format!("bad edge index in `{s}`")))?;
        let coord = coord
            .trim()
            .parse::<f64>()
            .map_err(|_| Error::InvalidPoint(format!("bad coordinate in `{s}`")))?;
        Ok(GraphPoint::new(edge, coord))
    }
}

/// Edge length as written in a graph description: a positive number or `inf`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeLength(pub f64);

impl EdgeLength {
    pub const INFINITE: EdgeLength = EdgeLength(f64::INFINITY);
}

impl Serialize for EdgeLength {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for EdgeLength {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(EdgeLength(x)),
            Raw::Text(s) => match s.trim().to_ascii_lowercase().as_str() {
                "inf" | ".inf" | "infinity" | "+inf" => Ok(EdgeLength::INFINITE),
                other => other
                    .parse::<f64>()
                    .map(EdgeLength)
                    .map_err(|_| serde::de::Error::custom(format!("bad edge length `{s}`"))),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub from: String,
    #[serde(default)]
    pub to: Option<String>,
    pub length: EdgeLength,
}

/// Unvalidated graph description.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub vertices: Vec<String>,
    pub edges: Vec<EdgeSpec>,
    #[serde(default)]
    pub strict_topology: bool,
    /// Accept graphs without an infinite edge (single intervals, cycles).
    /// Used for verification runs only.
    #[serde(default)]
    pub allow_compact: bool,
}

impl GraphSpec {
    pub fn new<S: Into<String>>(vertices: impl IntoIterator<Item = S>) -> Self {
        Self {
            vertices: vertices.into_iter().map(Into::into).collect(),
            ..Default::default()
        }
    }

    pub fn edge(mut self, from: &str, to: &str, length: f64) -> Self {
        self.edges.push(EdgeSpec {
            from: from.into(),
            to: Some(to.into()),
            length: EdgeLength(length),
        });
        self
    }

    pub fn ray(mut self, from: &str) -> Self {
        self.edges.push(EdgeSpec {
            from: from.into(),
            to: None,
            length: EdgeLength::INFINITE,
        });
        self
    }

    pub fn strict(mut self, strict: bool) -> Self {
        self.strict_topology = strict;
        self
    }

    pub fn compact(mut self, allow: bool) -> Self {
        self.allow_compact = allow;
        self
    }

    pub fn build(&self) -> Result<MetricGraph> {
        build_graph(self)
    }
}

/// A validated, immutable metric graph with precomputed vertex distances.
#[derive(Clone, Debug)]
pub struct MetricGraph {
    vertex_names: Vec<String>,
    edges: Vec<Edge>,
    incidence: Vec<Vec<(EdgeId, End)>>,
    vertex_dist: Vec<Vec<f64>>,
    warnings: Vec<String>,
}

pub fn build_graph(spec: &GraphSpec) -> Result<MetricGraph> {
    if spec.vertices.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let mut index = HashMap::new();
    for (i, name) in spec.vertices.iter().enumerate() {
        if index.insert(name.as_str(), i).is_some() {
            return Err(Error::DuplicateVertex(name.clone()));
        }
    }
    let lookup = |edge: usize, name: &str| {
        index
            .get(name)
            .map(|&i| VertexId(i))
            .ok_or_else(|| Error::UnknownVertex {
                edge,
                vertex: name.to_string(),
            })
    };

    let mut edges = Vec::with_capacity(spec.edges.len());
    for (i, e) in spec.edges.iter().enumerate() {
        let length = e.length.0;
        if length.is_nan() || length <= 0.0 {
            return Err(Error::NonPositiveLength { edge: i, length });
        }
        let initial = lookup(i, &e.from)?;
        let terminal = match (&e.to, length.is_infinite()) {
            (Some(_), true) => return Err(Error::InfiniteEdgeWithTwoEndpoints { edge: i }),
            (None, false) => return Err(Error::FiniteEdgeWithoutTerminal { edge: i }),
            (Some(to), false) => Some(lookup(i, to)?),
            (None, true) => None,
        };
        edges.push(Edge {
            id: EdgeId(i),
            initial,
            terminal,
            length,
        });
    }

    let nv = spec.vertices.len();
    let mut incidence = vec![Vec::new(); nv];
    for e in &edges {
        for (v, end, _) in e.ends() {
            incidence[v.0].push((e.id, end));
        }
    }

    // connectivity through finite edges; rays attach to a single vertex
    let mut seen = vec![false; nv];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(v) = queue.pop_front() {
        for &(eid, _) in &incidence[v] {
            for (w, _, _) in edges[eid.0].ends() {
                if !seen[w.0] {
                    seen[w.0] = true;
                    queue.push_back(w.0);
                }
            }
        }
    }
    if let Some(v) = seen.iter().position(|s| !s) {
        return Err(Error::Disconnected(spec.vertices[v].clone()));
    }

    if !spec.allow_compact && !edges.iter().any(Edge::is_infinite) {
        return Err(Error::NoInfiniteEdge);
    }

    let mut warnings = Vec::new();
    for (v, inc) in incidence.iter().enumerate() {
        let degree = inc.len();
        if degree <= 2 {
            if spec.strict_topology {
                return Err(Error::LowDegree {
                    vertex: spec.vertices[v].clone(),
                    degree,
                });
            }
            warnings.push(format!(
                "vertex `{}` has degree {degree}; the standing assumption is degree >= 3",
                spec.vertices[v]
            ));
        }
    }

    let vertex_dist = floyd_warshall(nv, &edges);
    Ok(MetricGraph {
        vertex_names: spec.vertices.clone(),
        edges,
        incidence,
        vertex_dist,
        warnings,
    })
}

fn floyd_warshall(nv: usize, edges: &[Edge]) -> Vec<Vec<f64>> {
    let mut d = vec![vec![f64::INFINITY; nv]; nv];
    for (v, row) in d.iter_mut().enumerate() {
        row[v] = 0.0;
    }
    for e in edges {
        if let Some(t) = e.terminal {
            let (a, b) = (e.initial.0, t.0);
            if e.length < d[a][b] {
                d[a][b] = e.length;
                d[b][a] = e.length;
            }
        }
    }
    for k in 0..nv {
        for i in 0..nv {
            let dik = d[i][k];
            if dik.is_infinite() {
                continue;
            }
            for j in 0..nv {
                let through = dik + d[k][j];
                if through < d[i][j] {
                    d[i][j] = through;
                }
            }
        }
    }
    d
}

impl MetricGraph {
    pub fn num_vertices(&self) -> usize {
        self.vertex_names.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex_name(&self, v: VertexId) -> &str {
        &self.vertex_names[v.0]
    }

    pub fn vertex_names(&self) -> &[String] {
        &self.vertex_names
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: EdgeId) -> &Edge {
        &self.edges[e.0]
    }

    /// Edge ends incident to `v` (the set `E_v`; a self-loop appears twice).
    pub fn incident(&self, v: VertexId) -> &[(EdgeId, End)] {
        &self.incidence[v.0]
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.incidence[v.0].len()
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn num_infinite(&self) -> usize {
        self.edges.iter().filter(|e| e.is_infinite()).count()
    }

    pub fn edges_in(&self, part: Part) -> impl Iterator<Item = &Edge> + '_ {
        self.edges.iter().filter(move |e| match part {
            Part::Finite => !e.is_infinite(),
            Part::Infinite => e.is_infinite(),
        })
    }

    pub fn has_finite_part(&self) -> bool {
        self.edges.iter().any(|e| !e.is_infinite())
    }

    /// Whether two edges have a vertex in common.
    pub fn adjacent(&self, a: EdgeId, b: EdgeId) -> bool {
        let ea = self.edge(a);
        let eb = self.edge(b);
        ea.ends()
            .any(|(v, _, _)| eb.ends().any(|(w, _, _)| v == w))
    }

    /// All-pairs shortest vertex-to-vertex distances along finite edges.
    pub fn vertex_distance_matrix(&self) -> &[Vec<f64>] {
        &self.vertex_dist
    }

    pub fn vertex_distance(&self, v: VertexId, w: VertexId) -> f64 {
        self.vertex_dist[v.0][w.0]
    }

    pub fn validate_point(&self, p: GraphPoint) -> Result<()> {
        let edge = self
            .edges
            .get(p.edge.0)
            .ok_or_else(|| Error::InvalidPoint(format!("no edge {}", p.edge.0)))?;
        if !p.coord.is_finite() || p.coord < 0.0 || p.coord > edge.length {
            return Err(Error::InvalidPoint(format!(
                "coordinate {} outside [0, {}] on edge {}",
                p.coord, edge.length, p.edge.0
            )));
        }
        Ok(())
    }

    /// Distance from `p` to every vertex.
    pub fn distances_to_vertices(&self, p: GraphPoint) -> Vec<f64> {
        let edge = self.edge(p.edge);
        let mut out = vec![f64::INFINITY; self.num_vertices()];
        for (v, _, at) in edge.ends() {
            let dv = (p.coord - at).abs();
            for (w, slot) in out.iter_mut().enumerate() {
                let d = dv + self.vertex_dist[v.0][w];
                if d < *slot {
                    *slot = d;
                }
            }
        }
        out
    }

    /// Shortest-path distance between two points. The direct distance along
    /// a shared edge is always a candidate, then every route leaving both
    /// edges through one of their endpoints.
    pub fn distance(&self, x: GraphPoint, y: GraphPoint) -> f64 {
        let ex = self.edge(x.edge);
        let ey = self.edge(y.edge);
        let mut best = if x.edge == y.edge {
            (x.coord - y.coord).abs()
        } else {
            f64::INFINITY
        };
        for (v, _, at_v) in ex.ends() {
            let dv = (x.coord - at_v).abs();
            for (w, _, at_w) in ey.ends() {
                // grouped so that swapping x and y gives the same rounding
                let d = (dv + (y.coord - at_w).abs()) + self.vertex_dist[v.0][w.0];
                if d < best {
                    best = d;
                }
            }
        }
        best
    }

    /// Checked version of [`MetricGraph::distance`].
    pub fn graph_distance(&self, x: GraphPoint, y: GraphPoint) -> Result<f64> {
        self.validate_point(x)?;
        self.validate_point(y)?;
        Ok(self.distance(x, y))
    }

    /// The graph `Γ^λ`: finite lengths divided by `λ`, rays unchanged.
    pub fn rescale(&self, lambda: f64) -> Result<MetricGraph> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "rescaling factor must be positive, got {lambda}"
            )));
        }
        let mut g = self.clone();
        for e in &mut g.edges {
            if !e.is_infinite() {
                e.length /= lambda;
            }
        }
        g.vertex_dist = floyd_warshall(g.num_vertices(), &g.edges);
        Ok(g)
    }

    /// Back to a description, e.g. for serialization.
    pub fn to_spec(&self) -> GraphSpec {
        GraphSpec {
            vertices: self.vertex_names.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeSpec {
                    from: self.vertex_names[e.initial.0].clone(),
                    to: e.terminal.map(|t| self.vertex_names[t.0].clone()),
                    length: EdgeLength(e.length),
                })
                .collect(),
            strict_topology: false,
            allow_compact: true,
        }
    }
}

pub fn rescale_graph(g: &MetricGraph, lambda: f64) -> Result<MetricGraph> {
    g.rescale(lambda)
}

/// Named graphs used by the built-in checks and the test suites.
pub mod samples {
    use super::GraphSpec;

    /// One vertex with `n` rays.
    pub fn star(n: usize) -> GraphSpec {
        (0..n).fold(GraphSpec::new(["o"]), |g, _| g.ray("o"))
    }

    /// Two vertices joined by edges of lengths 1, 2, 2, with a ray at `b`.
    pub fn tadpole_ray() -> GraphSpec {
        GraphSpec::new(["a", "b"])
            .edge("a", "b", 1.0)
            .edge("a", "b", 2.0)
            .edge("a", "b", 2.0)
            .ray("b")
    }

    /// Two vertices joined by a cycle of lengths 1 and 2, with one ray at `a`
    /// and two rays at `b`. Five edges, nonempty compact core.
    pub fn mixed5() -> GraphSpec {
        GraphSpec::new(["a", "b"])
            .edge("a", "b", 1.0)
            .edge("a", "b", 2.0)
            .ray("a")
            .ray("b")
            .ray("b")
            .strict(true)
    }

    /// A single segment `[0, length]`; compact, for verification only.
    pub fn interval(length: f64) -> GraphSpec {
        GraphSpec::new(["a", "b"]).edge("a", "b", length).compact(true)
    }

    /// A star whose rays 0 and 1 sit at vertices `a` and `b`, joined by
    /// parallel edges of lengths 1 and 2. Rays 0 and 1 are at distance 1
    /// and share no vertex.
    pub fn separated_rays() -> GraphSpec {
        GraphSpec::new(["a", "b"])
            .ray("a")
            .ray("b")
            .edge("a", "b", 1.0)
            .edge("a", "b", 2.0)
            .strict(true)
    }
}
