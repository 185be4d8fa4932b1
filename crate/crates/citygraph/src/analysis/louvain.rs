//! Louvain modularity maximization at resolution 1.
//!
//! Local moves scan nodes in a seeded random order; among candidate
//! communities of equal gain the lowest community id wins, so a run is
//! fully determined by `(graph, seed)`.

use rand::seq::SliceRandom;

use crate::rng::{self, domain};

struct LevelGraph {
    /// Adjacency with accumulated weights, excluding self loops.
    adj: Vec<Vec<(u32, f64)>>,
    /// Self-loop weight per node (each internal edge counted twice).
    self_loops: Vec<f64>,
    /// Sum of all degrees including self loops (= 2m).
    total_weight: f64,
}

impl LevelGraph {
    fn node_count(&self) -> usize {
        self.adj.len()
    }

    fn weighted_degree(&self, u: usize) -> f64 {
        self.self_loops[u] + self.adj[u].iter().map(|(_, w)| w).sum::<f64>()
    }
}

fn level_from_edges(node_count: usize, edges: &[(u32, u32)]) -> LevelGraph {
    let mut adj = vec![Vec::new(); node_count];
    for &(u, v) in edges {
        adj[u as usize].push((v, 1.0));
        adj[v as usize].push((u, 1.0));
    }
    LevelGraph {
        self_loops: vec![0.0; node_count],
        total_weight: 2.0 * edges.len() as f64,
        adj,
    }
}

/// One pass of local moves; returns the partition and whether any node moved.
fn local_moves(graph: &LevelGraph, seed: u64, level: u64) -> (Vec<u32>, bool) {
    let n = graph.node_count();
    let mut node_to_com: Vec<u32> = (0..n as u32).collect();
    let degrees: Vec<f64> = (0..n).map(|u| graph.weighted_degree(u)).collect();
    let mut com_total: Vec<f64> = degrees.clone();
    let two_m = graph.total_weight;
    if two_m == 0.0 {
        return (node_to_com, false);
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rng::stream(seed, domain::ANALYSIS, level, 2);
    order.shuffle(&mut rng);

    let mut moved_any = false;
    let mut neighbor_weights: Vec<f64> = vec![0.0; n];
    let mut touched: Vec<u32> = Vec::new();
    loop {
        let mut moved_this_pass = false;
        for &u in &order {
            let current = node_to_com[u];
            // Weight from u to each neighboring community.
            touched.clear();
            for &(v, w) in &graph.adj[u] {
                let c = node_to_com[v as usize];
                if neighbor_weights[c as usize] == 0.0 {
                    touched.push(c);
                }
                neighbor_weights[c as usize] += w;
            }
            com_total[current as usize] -= degrees[u];
            // Strictly better gain wins; ties prefer the smaller community id.
            let mut best_com = current;
            let mut best_gain = neighbor_weights[current as usize]
                - com_total[current as usize] * degrees[u] / two_m;
            for &c in &touched {
                if c == current {
                    continue;
                }
                let gain =
                    neighbor_weights[c as usize] - com_total[c as usize] * degrees[u] / two_m;
                if gain > best_gain + 1e-12 || ((gain - best_gain).abs() <= 1e-12 && c < best_com)
                {
                    best_gain = gain;
                    best_com = c;
                }
            }
            com_total[best_com as usize] += degrees[u];
            node_to_com[u] = best_com;
            if best_com != current {
                moved_this_pass = true;
                moved_any = true;
            }
            for &c in &touched {
                neighbor_weights[c as usize] = 0.0;
            }
        }
        if !moved_this_pass {
            break;
        }
    }
    (node_to_com, moved_any)
}

fn renumber(partition: &mut [u32]) -> usize {
    let mut map: std::collections::HashMap<u32, u32> = std::collections::HashMap::new();
    for p in partition.iter_mut() {
        let next = map.len() as u32;
        *p = *map.entry(*p).or_insert(next);
    }
    map.len()
}

fn aggregate(graph: &LevelGraph, partition: &[u32], community_count: usize) -> LevelGraph {
    let mut adj_maps: Vec<std::collections::HashMap<u32, f64>> =
        vec![std::collections::HashMap::new(); community_count];
    let mut self_loops = vec![0.0; community_count];
    for u in 0..graph.node_count() {
        let cu = partition[u];
        self_loops[cu as usize] += graph.self_loops[u];
        for &(v, w) in &graph.adj[u] {
            let cv = partition[v as usize];
            if cu == cv {
                // Seen from both endpoints: adds 2w in total.
                self_loops[cu as usize] += w;
            } else {
                *adj_maps[cu as usize].entry(cv).or_insert(0.0) += w;
            }
        }
    }
    let adj = adj_maps
        .into_iter()
        .map(|m| {
            let mut v: Vec<(u32, f64)> = m.into_iter().collect();
            v.sort_unstable_by_key(|(c, _)| *c);
            v
        })
        .collect();
    LevelGraph {
        adj,
        self_loops,
        total_weight: graph.total_weight,
    }
}

/// Modularity of a partition over an unweighted simple edge list.
pub fn modularity(edges: &[(u32, u32)], partition: &[u32]) -> f64 {
    let m = edges.len() as f64;
    if m == 0.0 {
        return 0.0;
    }
    let communities = partition.iter().copied().max().map_or(0, |c| c as usize + 1);
    let mut internal = vec![0.0f64; communities];
    let mut degree_sum = vec![0.0f64; communities];
    for &(u, v) in edges {
        let (cu, cv) = (partition[u as usize], partition[v as usize]);
        if cu == cv {
            internal[cu as usize] += 1.0;
        }
        degree_sum[cu as usize] += 1.0;
        degree_sum[cv as usize] += 1.0;
    }
    (0..communities)
        .map(|c| internal[c] / m - (degree_sum[c] / (2.0 * m)).powi(2))
        .sum()
}

/// Runs Louvain and returns the node partition plus its modularity on the
/// input graph.
pub fn louvain(node_count: usize, edges: &[(u32, u32)], seed: u64) -> (Vec<u32>, f64) {
    if node_count == 0 {
        return (Vec::new(), 0.0);
    }
    let mut graph = level_from_edges(node_count, edges);
    let mut mapping: Vec<u32> = (0..node_count as u32).collect();
    let mut level = 0u64;
    loop {
        let (mut partition, moved) = local_moves(&graph, seed, level);
        let communities = renumber(&mut partition);
        if !moved || communities == graph.node_count() {
            break;
        }
        for m in mapping.iter_mut() {
            *m = partition[*m as usize];
        }
        graph = aggregate(&graph, &partition, communities);
        level += 1;
        if level > 64 {
            break;
        }
    }
    let q = modularity(edges, &mapping);
    (mapping, q)
}
