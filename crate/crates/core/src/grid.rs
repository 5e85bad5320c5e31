//! Per-edge uniform cell decompositions. Infinite edges are cut at a common
//! truncation length and closed by a zero-flux far end.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeId, GraphPoint, MetricGraph};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    /// Target cell size.
    pub h: f64,
    /// Truncation length of the rays.
    #[serde(rename = "L_trunc", alias = "l_trunc")]
    pub l_trunc: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            h: 1e-2,
            l_trunc: 100.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeCells {
    pub cells: usize,
    pub h: f64,
    /// Index of the first cell in the flattened numbering.
    pub offset: usize,
    /// `l_e` for finite edges, the truncation length for rays.
    pub length: f64,
    pub infinite: bool,
}

impl EdgeCells {
    pub fn center(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.h
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.cells
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    edges: Vec<EdgeCells>,
    l_trunc: f64,
    total: usize,
}

impl Grid {
    /// Uniform target spacing `h`; each edge gets `max(2, ⌈len/h⌉)` cells.
    pub fn new(g: &MetricGraph, spec: &GridSpec) -> Result<Grid> {
        if !(spec.h > 0.0 && spec.h.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "grid spacing must be positive, got {}",
                spec.h
            )));
        }
        let cells = g
            .edges()
            .iter()
            .map(|e| {
                let len = if e.is_infinite() { spec.l_trunc } else { e.length };
                ((len / spec.h - 1e-9).ceil() as usize).max(2)
            })
            .collect();
        Grid::with_cells(g, cells, spec.l_trunc)
    }

    pub fn with_cells(g: &MetricGraph, cells: Vec<usize>, l_trunc: f64) -> Result<Grid> {
        if cells.len() != g.num_edges() {
            return Err(Error::GridMismatch(format!(
                "{} cell counts for {} edges",
                cells.len(),
                g.num_edges()
            )));
        }
        if g.num_infinite() > 0 && !(l_trunc > 0.0 && l_trunc.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "truncation length must be positive, got {l_trunc}"
            )));
        }
        let mut offset = 0;
        let mut edges = Vec::with_capacity(cells.len());
        for (e, &n) in g.edges().iter().zip(&cells) {
            if n < 2 {
                return Err(Error::InvalidParameter(format!(
                    "edge {} needs at least 2 cells, got {n}",
                    e.id.0
                )));
            }
            let length = if e.is_infinite() { l_trunc } else { e.length };
            edges.push(EdgeCells {
                cells: n,
                h: length / n as f64,
                offset,
                length,
                infinite: e.is_infinite(),
            });
            offset += n;
        }
        Ok(Grid {
            edges,
            l_trunc,
            total: offset,
        })
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn l_trunc(&self) -> f64 {
        self.l_trunc
    }

    pub fn edges(&self) -> &[EdgeCells] {
        &self.edges
    }

    pub fn edge(&self, e: EdgeId) -> &EdgeCells {
        &self.edges[e.0]
    }

    pub fn max_h(&self) -> f64 {
        self.edges.iter().map(|e| e.h).fold(0.0, f64::max)
    }

    /// Edge and local index of flattened cell `i`.
    pub fn locate(&self, i: usize) -> (EdgeId, usize) {
        let e = self.edges.partition_point(|ec| ec.offset + ec.cells <= i);
        (EdgeId(e), i - self.edges[e].offset)
    }

    pub fn point(&self, i: usize) -> GraphPoint {
        let (e, k) = self.locate(i);
        GraphPoint {
            edge: e,
            coord: self.edges[e.0].center(k),
        }
    }

    /// Cell measures in flattened order.
    pub fn weights(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.total);
        for ec in &self.edges {
            w.extend(std::iter::repeat_n(ec.h, ec.cells));
        }
        w
    }

    /// Whether this grid discretizes `g` (same edges, same lengths).
    pub fn matches(&self, g: &MetricGraph) -> bool {
        self.edges.len() == g.num_edges()
            && self.edges.iter().zip(g.edges()).all(|(ec, e)| {
                ec.infinite == e.is_infinite()
                    && (ec.infinite || (ec.length - e.length).abs() <= 1e-12 * e.length)
            })
    }

    pub fn check_matches(&self, g: &MetricGraph) -> Result<()> {
        if self.matches(g) {
            Ok(())
        } else {
            Err(Error::GridMismatch("grid does not discretize this graph".into()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::samples;

    #[test]
    fn cells_tile_each_edge() {
        let g = samples::tadpole_ray().build().unwrap();
        let grid = Grid::new(&g, &GridSpec { h: 0.3, l_trunc: 10.0 }).unwrap();
        for (ec, e) in grid.edges().iter().zip(g.edges()) {
            let len = if e.is_infinite() { 10.0 } else { e.length };
            assert!((ec.cells as f64 * ec.h - len).abs() < 1e-12);
            assert!(ec.h <= 0.3 + 1e-12);
            assert!(ec.cells >= 2);
        }
        assert_eq!(grid.len(), grid.edges().iter().map(|e| e.cells).sum::<usize>());
    }

    #[test]
    fn locate_inverts_offsets() {
        let g = samples::mixed5().build().unwrap();
        let grid = Grid::new(&g, &GridSpec { h: 0.25, l_trunc: 3.0 }).unwrap();
        for i in 0..grid.len() {
            let (e, k) = grid.locate(i);
            assert_eq!(grid.edge(e).offset + k, i);
        }
    }

    #[test]
    fn coarse_edges_get_two_cells() {
        let g = samples::interval(0.1).build().unwrap();
        let grid = Grid::new(&g, &GridSpec { h: 1.0, l_trunc: 1.0 }).unwrap();
        assert_eq!(grid.edge(EdgeId(0)).cells, 2);
    }
}
