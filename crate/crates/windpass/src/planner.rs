//! Minimum-cost path planning over the agent's cost table.
//!
//! Dijkstra's algorithm with one twist: when several fringe entries tie for
//! the minimum label (within 1e-9 absolute), the pop chooses uniformly at
//! random among them. Neighbor expansion order stays deterministic, so the
//! randomness lives only in the pop step. A deterministic variant and an
//! exhaustive simple-path enumerator serve as verification oracles.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::estimator::CostTable;
use crate::grid::GridGraph;
use crate::windfield::WindField;
use crate::{Error, Result};

/// Absolute tolerance within which fringe labels count as tied.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlannedPath {
    pub vertices: Vec<u32>,
    /// Sum of the cost-table entries along the path, seconds.
    pub expected_cost: f64,
}

struct FringeEntry {
    label: f64,
    vertex: u32,
}

impl PartialEq for FringeEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for FringeEntry {}
impl PartialOrd for FringeEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for FringeEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed for a min-heap; ties broken by label order for determinism.
        other
            .label
            .total_cmp(&self.label)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

fn validate_costs(graph: &GridGraph, table: &CostTable) -> Result<()> {
    for (id, e) in graph.edges() {
        if e.traversable {
            let c = table.get(id);
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::NonpositiveCost(e.from, e.to));
            }
        }
    }
    Ok(())
}

/// Dijkstra with uniformly random choice among fringe entries tied for the
/// minimum label. Returns an exactly optimal path for the given table.
pub fn plan<R: Rng>(
    graph: &GridGraph,
    table: &CostTable,
    start: u32,
    goal: u32,
    rng: &mut R,
) -> Result<PlannedPath> {
    if start == goal {
        return Err(Error::DegenerateQuery);
    }
    validate_costs(graph, table)?;

    let n = graph.vertex_count();
    let mut dist = vec![f64::INFINITY; n + 1];
    let mut parent = vec![0u32; n + 1];
    let mut settled = vec![false; n + 1];
    let mut heap = BinaryHeap::new();
    dist[start as usize] = 0.0;
    heap.push(FringeEntry { label: 0.0, vertex: start });

    while let Some(top) = heap.pop() {
        if settled[top.vertex as usize] || top.label > dist[top.vertex as usize] {
            continue; // stale entry
        }
        // Gather every live entry tied with the minimum and pick one uniformly.
        let mut tied = vec![top];
        while let Some(peek) = heap.peek() {
            if peek.label <= tied[0].label + TIE_TOLERANCE {
                let e = heap.pop().unwrap();
                if !settled[e.vertex as usize] && e.label <= dist[e.vertex as usize] {
                    tied.push(e);
                }
            } else {
                break;
            }
        }
        let pick = rng.random_range(0..tied.len());
        let chosen = tied.swap_remove(pick);
        for other in tied {
            heap.push(other);
        }

        let v = chosen.vertex;
        settled[v as usize] = true;
        if v == goal {
            break;
        }
        for &(u, id) in graph.traversable_neighbors(v) {
            if settled[u as usize] {
                continue;
            }
            let cand = dist[v as usize] + table.get(id);
            if cand < dist[u as usize] {
                dist[u as usize] = cand;
                parent[u as usize] = v;
                heap.push(FringeEntry { label: cand, vertex: u });
            }
        }
    }

    if !dist[goal as usize].is_finite() {
        return Err(Error::Disconnected);
    }
    let vertices = reconstruct(&parent, start, goal);
    let expected_cost = path_cost(graph, table, &vertices)?;
    debug_assert!((expected_cost - dist[goal as usize]).abs() < 1e-9);
    Ok(PlannedPath { vertices, expected_cost })
}

/// Deterministic Dijkstra: ties on the fringe break toward the lowest vertex
/// label.
pub fn plan_deterministic(
    graph: &GridGraph,
    table: &CostTable,
    start: u32,
    goal: u32,
) -> Result<PlannedPath> {
    if start == goal {
        return Err(Error::DegenerateQuery);
    }
    validate_costs(graph, table)?;

    let n = graph.vertex_count();
    let mut dist = vec![f64::INFINITY; n + 1];
    let mut parent = vec![0u32; n + 1];
    let mut settled = vec![false; n + 1];
    let mut heap = BinaryHeap::new();
    dist[start as usize] = 0.0;
    heap.push(FringeEntry { label: 0.0, vertex: start });
    while let Some(top) = heap.pop() {
        if settled[top.vertex as usize] || top.label > dist[top.vertex as usize] {
            continue;
        }
        let v = top.vertex;
        settled[v as usize] = true;
        if v == goal {
            break;
        }
        for &(u, id) in graph.traversable_neighbors(v) {
            if settled[u as usize] {
                continue;
            }
            let cand = dist[v as usize] + table.get(id);
            if cand < dist[u as usize] {
                dist[u as usize] = cand;
                parent[u as usize] = v;
                heap.push(FringeEntry { label: cand, vertex: u });
            }
        }
    }
    if !dist[goal as usize].is_finite() {
        return Err(Error::Disconnected);
    }
    let vertices = reconstruct(&parent, start, goal);
    let expected_cost = path_cost(graph, table, &vertices)?;
    Ok(PlannedPath { vertices, expected_cost })
}

fn reconstruct(parent: &[u32], start: u32, goal: u32) -> Vec<u32> {
    let mut vertices = vec![goal];
    let mut v = goal;
    while v != start {
        v = parent[v as usize];
        vertices.push(v);
    }
    vertices.reverse();
    vertices
}

/// Sum of table costs along a vertex sequence.
pub fn path_cost(graph: &GridGraph, table: &CostTable, path: &[u32]) -> Result<f64> {
    let mut total = 0.0;
    for hop in path.windows(2) {
        total += table.get(graph.edge_id(hop[0], hop[1])?);
    }
    Ok(total)
}

/// Exhaustive depth-first enumeration of all simple start-to-goal paths over
/// traversable edges, returning the minimum cost and every path attaining it
/// within `TIE_TOLERANCE`. Independent of Dijkstra; intended for desk-scale
/// grids (25 traversable vertices or fewer).
pub fn enumerate_optimal(
    graph: &GridGraph,
    table: &CostTable,
    start: u32,
    goal: u32,
) -> Result<(f64, Vec<Vec<u32>>)> {
    let mut best = f64::INFINITY;
    let mut optimal: Vec<Vec<u32>> = Vec::new();
    let mut on_path = vec![false; graph.vertex_count() + 1];
    let mut path = vec![start];
    on_path[start as usize] = true;

    fn dfs(
        graph: &GridGraph,
        table: &CostTable,
        goal: u32,
        cost: f64,
        path: &mut Vec<u32>,
        on_path: &mut Vec<bool>,
        best: &mut f64,
        optimal: &mut Vec<Vec<u32>>,
    ) {
        let v = *path.last().unwrap();
        if v == goal {
            if cost < *best - TIE_TOLERANCE {
                *best = cost;
                optimal.clear();
                optimal.push(path.clone());
            } else if cost <= *best + TIE_TOLERANCE {
                *best = best.min(cost);
                optimal.push(path.clone());
            }
            return;
        }
        for &(u, id) in graph.traversable_neighbors(v) {
            if on_path[u as usize] {
                continue;
            }
            on_path[u as usize] = true;
            path.push(u);
            dfs(graph, table, goal, cost + table.get(id), path, on_path, best, optimal);
            path.pop();
            on_path[u as usize] = false;
        }
    }

    dfs(graph, table, goal, 0.0, &mut path, &mut on_path, &mut best, &mut optimal);
    if optimal.is_empty() {
        return Err(Error::Disconnected);
    }
    Ok((best, optimal))
}

/// Plans against the true time-averaged wind field: edge cost is
/// distance / (u0 + coeff * mean dpx2), with deterministic tie-breaking.
/// On grids with at most 25 traversable vertices the result is cross-checked
/// against exhaustive enumeration.
pub fn oracle_plan(graph: &GridGraph, field: &WindField, u0: f64) -> Result<PlannedPath> {
    let table = oracle_table(graph, field, u0)?;
    let planned = plan_deterministic(graph, &table, graph.start(), graph.goal())?;
    if graph.traversable_vertices().count() <= 25 {
        let (best, _) = enumerate_optimal(graph, &table, graph.start(), graph.goal())?;
        debug_assert!(
            (planned.expected_cost - best).abs() <= TIE_TOLERANCE,
            "oracle mismatch: dijkstra {} vs enumeration {}",
            planned.expected_cost,
            best
        );
    }
    Ok(planned)
}

/// True static edge costs under the time-averaged gradient.
pub fn oracle_table(graph: &GridGraph, field: &WindField, u0: f64) -> Result<CostTable> {
    let mean = field.signal().mean();
    let mut table = CostTable::infinite(graph.edge_count());
    for (id, e) in graph.edges() {
        if e.traversable {
            let ground = u0 + field.coeff(id) * mean;
            if ground <= 0.0 {
                return Err(Error::NonpositiveGroundSpeed(ground));
            }
            table.set(id, graph.distance(id) / ground);
        }
    }
    Ok(table)
}
