//! W_1 as a transshipment problem on a sparse graph.
//!
//! When a metric is the shortest-path metric of a sparse weighted graph,
//! W_1 equals the min-cost flow of `mu - nu` along the graph's edges. The
//! Chebyshev metric on a cubic lattice is such a metric (26-neighbour moves),
//! which makes large grid instances cheap.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_traits::ToPrimitive;

use super::simplex::{self, FlowProblem};
use crate::error::{Error, Result};
use crate::measure::FiniteMetricSpace;
use crate::rational::{self, Rational};

#[derive(Debug, Clone)]
pub struct GraphMetric {
    nodes: usize,
    /// Undirected edges `(u, v, length)`.
    edges: Vec<(usize, usize, f64)>,
}

#[derive(PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl GraphMetric {
    pub fn new(nodes: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        for &(u, v, w) in &edges {
            if u >= nodes || v >= nodes || !(w >= 0.0) || !w.is_finite() {
                return Err(Error::domain("malformed graph edge"));
            }
        }
        Ok(GraphMetric { nodes, edges })
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    /// Dijkstra from `src`.
    pub fn shortest_paths(&self, src: usize) -> Vec<f64> {
        let mut adj = vec![Vec::new(); self.nodes];
        for &(u, v, w) in &self.edges {
            adj[u].push((v, w));
            adj[v].push((u, w));
        }
        let mut dist = vec![f64::INFINITY; self.nodes];
        dist[src] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(Item(0.0, src));
        while let Some(Item(d, u)) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &(v, w) in &adj[u] {
                let nd = d + w;
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(Item(nd, v));
                }
            }
        }
        dist
    }

    /// Largest relative gap between the graph metric and `space`.
    pub fn max_relative_gap(&self, space: &FiniteMetricSpace) -> f64 {
        let mut gap: f64 = 0.0;
        for i in 0..self.nodes {
            let sp = self.shortest_paths(i);
            for (j, &d) in sp.iter().enumerate() {
                let e = space.d(i, j);
                gap = gap.max((d - e).abs() / (1.0 + e));
            }
        }
        gap
    }

    /// `W_1(a, b)` for two weight vectors of equal total mass.
    pub fn w1(&self, a: &[Rational], b: &[Rational]) -> Result<f64> {
        if a.len() != self.nodes || b.len() != self.nodes {
            return Err(Error::domain("weight vectors do not match the graph"));
        }
        let scale = rational::lcm_of_denominators(a.iter().chain(b));
        let ua = rational::to_units(a, &scale)?;
        let ub = rational::to_units(b, &scale)?;
        let supply: Vec<i64> = ua.iter().zip(&ub).map(|(x, y)| x - y).collect();
        let mut arcs = Vec::with_capacity(2 * self.edges.len());
        for &(u, v, w) in &self.edges {
            arcs.push((u, v, w));
            arcs.push((v, u, w));
        }
        let sol = simplex::solve(&FlowProblem { supply, arcs })?;
        Ok((sol.cost / scale.to_f64().unwrap_or(f64::INFINITY)).max(0.0))
    }
}
