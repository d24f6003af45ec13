//! Directed 4-neighbor grid graph of the urban environment.
//!
//! Vertices are labeled 1..n1*n2 row-major from the bottom-left corner, so the
//! bottom row is 1..n1. The top and bottom rows exist only as boundary
//! conditions for the wind model: they carry vertical edges but no horizontal
//! ones, and no traversable edge touches them. The start is the bottom-left
//! corner of the traversable interior (vertex n1+1) and the goal is its
//! top-right corner (vertex n1*(n2-1)); on a 5x7 lattice that is 6 and 30.

use std::collections::HashMap;

use crate::{Error, Result};

/// Index into the canonical directed-edge list of a [`GridGraph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeId(pub usize);

/// Axis an edge is aligned with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Horizontal (along x1, spacing dx1).
    X1,
    /// Vertical (along x2, spacing dx2).
    X2,
}

/// One directed edge of the lattice.
#[derive(Debug, Clone)]
pub struct GridEdge {
    pub from: u32,
    pub to: u32,
    pub axis: Axis,
    /// False for vertical edges incident to a boundary row; those exist only
    /// for the wind model and are never planned over.
    pub traversable: bool,
}

#[derive(Debug, Clone)]
pub struct GridGraph {
    n1: usize,
    n2: usize,
    dx1: f64,
    dx2: f64,
    edges: Vec<GridEdge>,
    index: HashMap<(u32, u32), EdgeId>,
    /// Traversable out-neighbors per vertex (1-based labels), ascending.
    adjacency: Vec<Vec<(u32, EdgeId)>>,
    start: u32,
    goal: u32,
}

/// Builds the lattice. `n2` counts all rows including the two boundary rows,
/// so the smallest legal grid (3x3) has a single traversable row.
pub fn build_grid(n1: usize, n2: usize, dx1: f64, dx2: f64) -> Result<GridGraph> {
    GridGraph::build(n1, n2, dx1, dx2)
}

impl GridGraph {
    pub fn build(n1: usize, n2: usize, dx1: f64, dx2: f64) -> Result<Self> {
        if n1 < 3 || n2 < 3 {
            return Err(Error::GridTooSmall { n1, n2 });
        }
        if !(dx1 > 0.0) || !(dx2 > 0.0) {
            return Err(Error::NonpositiveSpacing);
        }

        let label = |row: usize, col: usize| ((row - 1) * n1 + col) as u32;
        let mut edges = Vec::new();
        for row in 1..=n2 {
            let interior = row > 1 && row < n2;
            for col in 1..=n1 {
                let v = label(row, col);
                // Horizontal edges exist only in interior rows.
                if interior && col < n1 {
                    let u = label(row, col + 1);
                    edges.push(GridEdge { from: v, to: u, axis: Axis::X1, traversable: true });
                    edges.push(GridEdge { from: u, to: v, axis: Axis::X1, traversable: true });
                }
                // Vertical edges exist everywhere; the wind model needs the
                // boundary ones even though the planner never uses them.
                if row < n2 {
                    let u = label(row + 1, col);
                    let traversable = interior && row + 1 < n2;
                    edges.push(GridEdge { from: v, to: u, axis: Axis::X2, traversable });
                    edges.push(GridEdge { from: u, to: v, axis: Axis::X2, traversable });
                }
            }
        }
        edges.sort_by_key(|e| (e.from, e.to));
        let index: HashMap<(u32, u32), EdgeId> = edges
            .iter()
            .enumerate()
            .map(|(k, e)| ((e.from, e.to), EdgeId(k)))
            .collect();

        let mut adjacency = vec![Vec::new(); n1 * n2];
        for (k, e) in edges.iter().enumerate() {
            if e.traversable {
                adjacency[(e.from - 1) as usize].push((e.to, EdgeId(k)));
            }
        }

        let start = label(2, 1);
        let goal = label(n2 - 1, n1);
        Ok(GridGraph { n1, n2, dx1, dx2, edges, index, adjacency, start, goal })
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn dx1(&self) -> f64 {
        self.dx1
    }

    pub fn dx2(&self) -> f64 {
        self.dx2
    }

    pub fn vertex_count(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn start(&self) -> u32 {
        self.start
    }

    pub fn goal(&self) -> u32 {
        self.goal
    }

    /// 1-based row of a vertex, counted from the bottom.
    pub fn row(&self, v: u32) -> usize {
        (v as usize - 1) / self.n1 + 1
    }

    /// 1-based column of a vertex.
    pub fn col(&self, v: u32) -> usize {
        (v as usize - 1) % self.n1 + 1
    }

    pub fn vertex_at(&self, row: usize, col: usize) -> u32 {
        debug_assert!(row >= 1 && row <= self.n2 && col >= 1 && col <= self.n1);
        ((row - 1) * self.n1 + col) as u32
    }

    pub fn is_boundary_vertex(&self, v: u32) -> bool {
        let r = self.row(v);
        r == 1 || r == self.n2
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edge(&self, id: EdgeId) -> &GridEdge {
        &self.edges[id.0]
    }

    pub fn edges(&self) -> impl Iterator<Item = (EdgeId, &GridEdge)> {
        self.edges.iter().enumerate().map(|(k, e)| (EdgeId(k), e))
    }

    pub fn edge_id(&self, from: u32, to: u32) -> Result<EdgeId> {
        self.index.get(&(from, to)).copied().ok_or(Error::UnknownEdge(from, to))
    }

    /// Id of the opposite-direction edge; both directions always exist.
    pub fn reverse(&self, id: EdgeId) -> EdgeId {
        let e = &self.edges[id.0];
        self.index[&(e.to, e.from)]
    }

    pub fn distance(&self, id: EdgeId) -> f64 {
        match self.edges[id.0].axis {
            Axis::X1 => self.dx1,
            Axis::X2 => self.dx2,
        }
    }

    /// Traversable out-neighbors of `v` with their edge ids, ascending by label.
    pub fn traversable_neighbors(&self, v: u32) -> &[(u32, EdgeId)] {
        &self.adjacency[(v - 1) as usize]
    }

    /// Vertices of the traversable interior, ascending.
    pub fn traversable_vertices(&self) -> impl Iterator<Item = u32> + '_ {
        (1..=self.vertex_count() as u32).filter(|&v| !self.is_boundary_vertex(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Brute-force 4-neighbor adjacency over the lattice, independent of the
    /// builder: returns directed (from, to, horizontal?) triples under the
    /// same boundary-row rules.
    fn enumerate_edges(n1: usize, n2: usize) -> Vec<(u32, u32, bool)> {
        let mut out = Vec::new();
        for a in 1..=(n1 * n2) as u32 {
            for b in 1..=(n1 * n2) as u32 {
                let (ra, ca) = (((a - 1) as usize) / n1 + 1, ((a - 1) as usize) % n1 + 1);
                let (rb, cb) = (((b - 1) as usize) / n1 + 1, ((b - 1) as usize) % n1 + 1);
                let horiz = ra == rb && ca.abs_diff(cb) == 1;
                let vert = ca == cb && ra.abs_diff(rb) == 1;
                if horiz && ra > 1 && ra < n2 {
                    out.push((a, b, true));
                } else if vert {
                    out.push((a, b, false));
                }
            }
        }
        out
    }

    #[test]
    fn paper_layout_start_and_goal() {
        // The 5x5 traversable block sits on a 5x7 lattice: start 6, goal 30,
        // rows 1-5 and 31-35 are boundary.
        let g = build_grid(5, 7, 100.0, 250.0).unwrap();
        assert_eq!(g.start(), 6);
        assert_eq!(g.goal(), 30);
        for v in 1..=5 {
            assert!(g.is_boundary_vertex(v));
        }
        for v in 31..=35 {
            assert!(g.is_boundary_vertex(v));
        }
        assert!(!g.is_boundary_vertex(6));
        assert!(!g.is_boundary_vertex(30));
        // No traversable edge touches a boundary row.
        for (_, e) in g.edges() {
            if e.traversable {
                assert!(!g.is_boundary_vertex(e.from) && !g.is_boundary_vertex(e.to));
            }
        }
    }

    #[test]
    fn smallest_grid_has_one_traversable_row() {
        let g = build_grid(3, 3, 1.0, 1.0).unwrap();
        assert_eq!(g.vertex_count(), 9);
        let traversable: Vec<_> = g.traversable_vertices().collect();
        assert_eq!(traversable, vec![4, 5, 6]);
        let horiz: Vec<_> = g
            .edges()
            .filter(|(_, e)| e.traversable && matches!(e.axis, Axis::X1))
            .map(|(_, e)| (e.from, e.to))
            .collect();
        assert_eq!(horiz.len(), 4);
        // Vertical edges to the boundary exist but are not traversable.
        assert!(g.edge_id(4, 1).is_ok());
        assert!(!g.edge(g.edge_id(4, 1).unwrap()).traversable);
    }

    #[test]
    fn edge_counts_match_brute_force_enumeration() {
        let g = build_grid(5, 5, 100.0, 250.0).unwrap();
        let oracle = enumerate_edges(5, 5);
        let n_vert = oracle.iter().filter(|(_, _, h)| !h).count();
        let n_horiz = oracle.iter().filter(|(_, _, h)| *h).count();
        assert_eq!(n_vert, 2 * 5 * 4); // 2*n1*(n2-1) = 40
        assert_eq!(n_horiz, 2 * 4 * 3); // 2*(n1-1)*(n2-2) = 24
        assert_eq!(g.edge_count(), oracle.len());
        for (a, b, h) in oracle {
            let id = g.edge_id(a, b).unwrap();
            assert_eq!(matches!(g.edge(id).axis, Axis::X1), h);
        }
    }

    #[test]
    fn distances_follow_axis() {
        let g = build_grid(5, 7, 100.0, 250.0).unwrap();
        let h = g.edge_id(6, 7).unwrap();
        let v = g.edge_id(6, 11).unwrap();
        assert_eq!(g.distance(h), 100.0);
        assert_eq!(g.distance(v), 250.0);
        assert_eq!(g.distance(g.reverse(h)), 100.0);
    }

    #[test]
    fn rejects_small_grids_and_bad_spacing() {
        assert!(matches!(build_grid(2, 5, 1.0, 1.0), Err(Error::GridTooSmall { .. })));
        assert!(matches!(build_grid(5, 2, 1.0, 1.0), Err(Error::GridTooSmall { .. })));
        assert!(matches!(build_grid(5, 5, 0.0, 1.0), Err(Error::NonpositiveSpacing)));
        assert!(matches!(build_grid(5, 5, 1.0, -2.0), Err(Error::NonpositiveSpacing)));
    }

    /// Breadth-first reachability over traversable edges only; independent of
    /// the planner.
    fn reachable(g: &GridGraph, from: u32, to: u32) -> bool {
        let mut seen = vec![false; g.vertex_count() + 1];
        let mut queue = std::collections::VecDeque::from([from]);
        seen[from as usize] = true;
        while let Some(v) = queue.pop_front() {
            if v == to {
                return true;
            }
            for &(u, _) in g.traversable_neighbors(v) {
                if !seen[u as usize] {
                    seen[u as usize] = true;
                    queue.push_back(u);
                }
            }
        }
        false
    }

    proptest! {
        #[test]
        fn symmetry_degree_and_connectivity(n1 in 3usize..12, n2 in 3usize..12) {
            let g = build_grid(n1, n2, 10.0, 25.0).unwrap();
            for (id, e) in g.edges() {
                let rev = g.reverse(id);
                let r = g.edge(rev);
                prop_assert_eq!((r.from, r.to), (e.to, e.from));
                prop_assert_eq!(r.traversable, e.traversable);
            }
            for v in 1..=g.vertex_count() as u32 {
                prop_assert!(g.traversable_neighbors(v).len() <= 4);
            }
            prop_assert!(reachable(&g, g.start(), g.goal()));
        }
    }
}
