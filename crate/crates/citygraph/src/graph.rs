//! The two-layer social graph and its adjacency structure.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::population::Person;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Layer {
    H,
    F,
}

impl Layer {
    pub fn tag(&self) -> &'static str {
        match self {
            Layer::H => "H",
            Layer::F => "F",
        }
    }

    pub fn parse(s: &str) -> Result<Layer> {
        match s {
            "H" => Ok(Layer::H),
            "F" => Ok(Layer::F),
            other => Err(Error::Data(format!("unknown edge layer `{other}`"))),
        }
    }
}

/// Node table plus the household and friendship edge sets. The layers are
/// kept disjoint: a friendship draw that coincides with a household edge
/// stays in both layer tallies but contributes one edge to simple-graph
/// metrics.
#[derive(Debug, Clone)]
pub struct SocialGraph {
    pub persons: Vec<Person>,
    pub household_edges: Vec<(u32, u32)>,
    pub friendship_edges: Vec<(u32, u32)>,
}

impl SocialGraph {
    pub fn assemble(
        persons: Vec<Person>,
        mut household_edges: Vec<(u32, u32)>,
        mut friendship_edges: Vec<(u32, u32)>,
    ) -> Result<SocialGraph> {
        if persons
            .iter()
            .enumerate()
            .any(|(idx, p)| p.id as usize != idx)
        {
            return Err(Error::Data(
                "duplicate or non-dense person ids in the node table".into(),
            ));
        }
        let n = persons.len() as u32;
        for set in [&mut household_edges, &mut friendship_edges] {
            for (u, v) in set.iter_mut() {
                if u == v {
                    return Err(Error::Data(format!("self loop on vertex {u}")));
                }
                if *u >= n || *v >= n {
                    return Err(Error::Data(format!(
                        "edge ({u}, {v}) references a vertex outside the population"
                    )));
                }
                if *u > *v {
                    std::mem::swap(u, v);
                }
            }
            set.sort_unstable();
            set.dedup();
        }
        Ok(SocialGraph {
            persons,
            household_edges,
            friendship_edges,
        })
    }

    pub fn node_count(&self) -> usize {
        self.persons.len()
    }

    /// Household-layer mean degree.
    pub fn nu(&self) -> f64 {
        2.0 * self.household_edges.len() as f64 / self.node_count() as f64
    }

    /// Realized friendship-layer mean degree.
    pub fn mu_hat(&self) -> f64 {
        2.0 * self.friendship_edges.len() as f64 / self.node_count() as f64
    }

    /// Mean degree of the flattened graph, `K = nu + mu_hat`.
    pub fn mean_degree(&self) -> f64 {
        self.nu() + self.mu_hat()
    }

    /// Pairs present in both layers.
    pub fn cross_layer_duplicates(&self) -> usize {
        let mut dup = 0;
        for e in &self.friendship_edges {
            if self.household_edges.binary_search(e).is_ok() {
                dup += 1;
            }
        }
        dup
    }

    /// Union of both layers with duplicates merged, sorted.
    pub fn simple_edges(&self) -> Vec<(u32, u32)> {
        let mut edges =
            Vec::with_capacity(self.household_edges.len() + self.friendship_edges.len());
        edges.extend_from_slice(&self.household_edges);
        edges.extend_from_slice(&self.friendship_edges);
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    pub fn friendship_only(&self) -> Adjacency {
        Adjacency::from_edges(self.node_count(), &self.friendship_edges)
    }

    pub fn adjacency(&self) -> Adjacency {
        Adjacency::from_edges(self.node_count(), &self.simple_edges())
    }
}

/// Compressed sparse adjacency over a simple undirected edge list.
pub struct Adjacency {
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
}

impl Adjacency {
    pub fn from_edges(node_count: usize, edges: &[(u32, u32)]) -> Adjacency {
        let mut degree = vec![0usize; node_count];
        for &(u, v) in edges {
            degree[u as usize] += 1;
            degree[v as usize] += 1;
        }
        let mut offsets = vec![0usize; node_count + 1];
        for i in 0..node_count {
            offsets[i + 1] = offsets[i] + degree[i];
        }
        let mut cursor = offsets.clone();
        let mut neighbors = vec![0u32; offsets[node_count]];
        for &(u, v) in edges {
            neighbors[cursor[u as usize]] = v;
            cursor[u as usize] += 1;
            neighbors[cursor[v as usize]] = u;
            cursor[v as usize] += 1;
        }
        for i in 0..node_count {
            neighbors[offsets[i]..offsets[i + 1]].sort_unstable();
        }
        Adjacency { offsets, neighbors }
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    #[inline]
    pub fn neighbors(&self, u: usize) -> &[u32] {
        &self.neighbors[self.offsets[u]..self.offsets[u + 1]]
    }

    #[inline]
    pub fn degree(&self, u: usize) -> usize {
        self.offsets[u + 1] - self.offsets[u]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.node_count()).map(|u| self.degree(u)).collect()
    }
}
