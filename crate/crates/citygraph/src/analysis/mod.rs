//! Structural metrics of the generated graph: connectivity, clustering,
//! assortativity, path lengths, degree diagnostics, communities and
//! spatial statistics.

mod louvain;

pub use louvain::louvain;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geo::Grid;
use crate::graph::{Adjacency, SocialGraph};
use crate::rng::{self, domain};

/// Exact all-sources path lengths are used when the giant component is at
/// most this large; above it, sources are sampled.
pub const EXACT_PATH_LENGTH_LIMIT: usize = 20_000;

/// Connected components via union-find.
pub struct ComponentSummary {
    /// Component id per node.
    pub membership: Vec<u32>,
    /// Component sizes, descending.
    pub sizes: Vec<usize>,
    pub giant_id: u32,
}

impl ComponentSummary {
    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    pub fn giant_size(&self) -> usize {
        self.sizes.first().copied().unwrap_or(0)
    }

    pub fn giant_fraction(&self) -> f64 {
        self.giant_size() as f64 / self.membership.len() as f64
    }
}

struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> UnionFind {
        UnionFind {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grandparent = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grandparent;
            x = grandparent;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra as usize] < self.size[rb as usize] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb as usize] = ra;
        self.size[ra as usize] += self.size[rb as usize];
    }
}

pub fn components(node_count: usize, edges: &[(u32, u32)]) -> ComponentSummary {
    let mut uf = UnionFind::new(node_count);
    for &(u, v) in edges {
        uf.union(u, v);
    }
    let mut membership = vec![0u32; node_count];
    let mut root_to_component: std::collections::HashMap<u32, u32> =
        std::collections::HashMap::new();
    let mut sizes = Vec::new();
    for node in 0..node_count as u32 {
        let root = uf.find(node);
        let id = *root_to_component.entry(root).or_insert_with(|| {
            sizes.push(0usize);
            (sizes.len() - 1) as u32
        });
        membership[node as usize] = id;
        sizes[id as usize] += 1;
    }
    // Relabel so that component 0 is the giant.
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by_key(|&c| std::cmp::Reverse(sizes[c]));
    let mut relabel = vec![0u32; sizes.len()];
    for (new_id, &old_id) in order.iter().enumerate() {
        relabel[old_id] = new_id as u32;
    }
    for m in &mut membership {
        *m = relabel[*m as usize];
    }
    sizes.sort_unstable_by_key(|&s| std::cmp::Reverse(s));
    ComponentSummary {
        membership,
        sizes,
        giant_id: 0,
    }
}

/// Triangles containing each node: `tri[u] = 1/2 sum_{v in N(u)} |N(u) cap N(v)|`.
fn triangles_per_node(adj: &Adjacency) -> Vec<u64> {
    (0..adj.node_count())
        .into_par_iter()
        .map(|u| {
            let nu = adj.neighbors(u);
            let mut twice: u64 = 0;
            for &v in nu {
                twice += sorted_intersection_count(nu, adj.neighbors(v as usize));
            }
            twice / 2
        })
        .collect()
}

fn sorted_intersection_count(a: &[u32], b: &[u32]) -> u64 {
    let (mut i, mut j, mut count) = (0, 0, 0u64);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

/// Global transitivity and mean local clustering.
pub fn clustering(adj: &Adjacency) -> (f64, f64) {
    let tri = triangles_per_node(adj);
    let triangles: u64 = tri.iter().sum::<u64>() / 3;
    let mut triples: f64 = 0.0;
    let mut local_sum = 0.0;
    for (u, &triangles_at_u) in tri.iter().enumerate() {
        let d = adj.degree(u) as f64;
        let t = d * (d - 1.0) / 2.0;
        triples += t;
        if t > 0.0 {
            local_sum += triangles_at_u as f64 / t;
        }
    }
    let global = if triples > 0.0 {
        3.0 * triangles as f64 / triples
    } else {
        0.0
    };
    (global, local_sum / adj.node_count() as f64)
}

/// Pearson correlation of endpoint degrees over both edge orientations.
/// `None` when the degree variance at edge endpoints is zero.
pub fn assortativity(adj: &Adjacency) -> Option<f64> {
    let mut stubs = 0.0f64;
    let mut sum_x = 0.0;
    let mut sum_x2 = 0.0;
    let mut sum_xy = 0.0;
    for u in 0..adj.node_count() {
        let du = adj.degree(u) as f64;
        for &v in adj.neighbors(u) {
            let dv = adj.degree(v as usize) as f64;
            stubs += 1.0;
            sum_x += du;
            sum_x2 += du * du;
            sum_xy += du * dv;
        }
    }
    if stubs == 0.0 {
        return None;
    }
    let mean = sum_x / stubs;
    let var = sum_x2 / stubs - mean * mean;
    if var <= 1e-12 * mean.max(1.0).powi(2) {
        return None;
    }
    Some((sum_xy / stubs - mean * mean) / var)
}

/// Mean shortest-path distance inside the giant component, from BFS trees
/// rooted at sampled sources (all giant nodes when the giant is small).
pub fn avg_path_length(
    adj: &Adjacency,
    comp: &ComponentSummary,
    sample_size: usize,
    seed: u64,
) -> Result<(f64, usize)> {
    let n = adj.node_count();
    if n == 0 {
        return Err(Error::Data("average path length of an empty graph".into()));
    }
    let giant: Vec<u32> = (0..n as u32)
        .filter(|&u| comp.membership[u as usize] == comp.giant_id)
        .collect();
    if giant.len() < 2 {
        return Ok((0.0, 0));
    }
    let sources: Vec<u32> = if giant.len() <= EXACT_PATH_LENGTH_LIMIT {
        giant.clone()
    } else {
        let mut rng = rng::stream(seed, domain::ANALYSIS, 0, 0);
        let mut pool = giant.clone();
        pool.shuffle(&mut rng);
        pool.truncate(sample_size.max(1).min(giant.len()));
        pool
    };

    // Bit-parallel BFS: 64 sources advance together, one u64 lane each.
    let results: Vec<(u64, u64)> = sources
        .par_chunks(64)
        .map(|chunk| bfs_block_distance_sum(adj, chunk))
        .collect();
    let total: u64 = results.iter().map(|(t, _)| t).sum();
    let pairs: u64 = results.iter().map(|(_, r)| r).sum();
    Ok((total as f64 / pairs as f64, sources.len()))
}

/// Sum of BFS distances (and reached-pair count) from up to 64 sources,
/// advanced simultaneously with one bit lane per source.
fn bfs_block_distance_sum(adj: &Adjacency, sources: &[u32]) -> (u64, u64) {
    let n = adj.node_count();
    let mut reached = vec![0u64; n];
    let mut frontier = vec![0u64; n];
    let mut next = vec![0u64; n];
    let mut frontier_nodes: Vec<u32> = Vec::new();
    // Sources within a chunk are distinct by construction.
    for (lane, &src) in sources.iter().enumerate() {
        let bit = 1u64 << lane;
        if frontier[src as usize] == 0 {
            frontier_nodes.push(src);
        }
        reached[src as usize] |= bit;
        frontier[src as usize] |= bit;
    }
    let mut touched: Vec<u32> = Vec::new();
    let mut total: u64 = 0;
    let mut pairs: u64 = 0;
    let mut depth: u64 = 0;
    while !frontier_nodes.is_empty() {
        depth += 1;
        touched.clear();
        for &u in &frontier_nodes {
            let bits = frontier[u as usize];
            for &v in adj.neighbors(u as usize) {
                if next[v as usize] == 0 {
                    touched.push(v);
                }
                next[v as usize] |= bits;
            }
        }
        for &u in &frontier_nodes {
            frontier[u as usize] = 0;
        }
        frontier_nodes.clear();
        for &v in &touched {
            let new_bits = next[v as usize] & !reached[v as usize];
            next[v as usize] = 0;
            if new_bits != 0 {
                reached[v as usize] |= new_bits;
                frontier[v as usize] = new_bits;
                frontier_nodes.push(v);
                let count = new_bits.count_ones() as u64;
                total += depth * count;
                pairs += count;
            }
        }
    }
    (total, pairs)
}

/// Natural log of `k!` (table below 1024, Stirling series above).
fn ln_factorial(k: u64) -> f64 {
    const TABLE_SIZE: usize = 1024;
    thread_local! {
        static TABLE: Vec<f64> = {
            let mut t = vec![0.0; TABLE_SIZE];
            for k in 2..TABLE_SIZE {
                t[k] = t[k - 1] + (k as f64).ln();
            }
            t
        };
    }
    if (k as usize) < TABLE_SIZE {
        TABLE.with(|t| t[k as usize])
    } else {
        let x = k as f64;
        x * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI * x).ln() + 1.0 / (12.0 * x)
            - 1.0 / (360.0 * x.powi(3))
    }
}

fn poisson_ln_pmf(k: u64, lambda: f64) -> f64 {
    k as f64 * lambda.ln() - lambda - ln_factorial(k)
}

/// `KL(p || q) = sum_k p_k ln(p_k / q_k)` over bins where `p_k > 0`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q.iter())
        .filter(|(pk, _)| **pk > 0.0)
        .map(|(pk, qk)| pk * (pk / qk).ln())
        .sum()
}

fn normal_cdf(z: f64) -> f64 {
    // Abramowitz & Stegun 7.1.26, |error| < 1.5e-7.
    let x = z / std::f64::consts::SQRT_2;
    let t = 1.0 / (1.0 + 0.3275911 * x.abs());
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    let erf = 1.0 - poly * (-x * x).exp();
    let erf = if x >= 0.0 { erf } else { -erf };
    0.5 * (1.0 + erf)
}

#[derive(Debug, Clone, Serialize)]
pub struct LognormalTailFit {
    /// MLE location of ln(degree) over the tail.
    pub lambda: f64,
    /// MLE scale of ln(degree) over the tail.
    pub sigma: f64,
    pub threshold: u64,
    pub tail_nodes: usize,
    /// Sum of squared residuals of the discretized fits against the
    /// tail-renormalized empirical distribution.
    pub sse_lognormal: f64,
    pub sse_poisson: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DegreeDiagnostics {
    /// `histogram[k]` = number of nodes of degree `k`.
    pub histogram: Vec<u64>,
    pub mean_degree: f64,
    /// KL distance of the empirical degree distribution from the Poisson
    /// distribution with the same mean.
    pub kl_vs_poisson: f64,
    pub lognormal_tail: Option<LognormalTailFit>,
}

pub fn degree_diagnostics(degrees: &[usize], mu: f64) -> DegreeDiagnostics {
    let n = degrees.len();
    let max_degree = degrees.iter().copied().max().unwrap_or(0);
    let mut histogram = vec![0u64; max_degree + 1];
    for &d in degrees {
        histogram[d] += 1;
    }
    let mean = degrees.iter().map(|&d| d as f64).sum::<f64>() / n.max(1) as f64;

    let kl = if mean > 0.0 {
        histogram
            .iter()
            .enumerate()
            .filter(|(_, c)| **c > 0)
            .map(|(k, &c)| {
                let pk = c as f64 / n as f64;
                pk * (pk.ln() - poisson_ln_pmf(k as u64, mean))
            })
            .sum()
    } else {
        0.0
    };

    let threshold = mu.ceil().max(1.0) as u64;
    let tail: Vec<f64> = degrees
        .iter()
        .filter(|&&d| d as u64 >= threshold)
        .map(|&d| (d as f64).ln())
        .collect();
    let lognormal_tail = if tail.len() >= 2 {
        let lambda = tail.iter().sum::<f64>() / tail.len() as f64;
        let var = tail.iter().map(|x| (x - lambda).powi(2)).sum::<f64>() / tail.len() as f64;
        if var > 0.0 {
            let sigma = var.sqrt();
            let ks: Vec<u64> = (threshold..=max_degree as u64).collect();
            let tail_total: u64 = ks.iter().map(|&k| histogram[k as usize]).sum();
            let empirical: Vec<f64> = ks
                .iter()
                .map(|&k| histogram[k as usize] as f64 / tail_total as f64)
                .collect();
            let mut ln_model: Vec<f64> = ks
                .iter()
                .map(|&k| {
                    let hi = ((k as f64 + 0.5).ln() - lambda) / sigma;
                    let lo = ((k as f64 - 0.5).ln() - lambda) / sigma;
                    (normal_cdf(hi) - normal_cdf(lo)).max(0.0)
                })
                .collect();
            let ln_total: f64 = ln_model.iter().sum();
            if ln_total > 0.0 {
                for v in &mut ln_model {
                    *v /= ln_total;
                }
            }
            let mut poisson_model: Vec<f64> =
                ks.iter().map(|&k| poisson_ln_pmf(k, mean).exp()).collect();
            let poisson_total: f64 = poisson_model.iter().sum();
            if poisson_total > 0.0 {
                for v in &mut poisson_model {
                    *v /= poisson_total;
                }
            }
            let sse = |model: &[f64]| -> f64 {
                empirical
                    .iter()
                    .zip(model.iter())
                    .map(|(e, m)| (e - m).powi(2))
                    .sum()
            };
            Some(LognormalTailFit {
                lambda,
                sigma,
                threshold,
                tail_nodes: tail.len(),
                sse_lognormal: sse(&ln_model),
                sse_poisson: sse(&poisson_model),
            })
        } else {
            None
        }
    } else {
        None
    };

    DegreeDiagnostics {
        histogram,
        mean_degree: mean,
        kl_vs_poisson: kl,
        lognormal_tail,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ClusterStat {
    pub size: usize,
    /// Mean and max tile distance over intra-cluster edges, in km; zero
    /// for clusters without internal edges.
    pub mean_intra_distance_km: f64,
    pub max_intra_distance_km: f64,
}

/// Louvain communities plus geographic spread of the largest clusters.
pub fn communities(
    graph: &SocialGraph,
    grid: &Grid,
    seed: u64,
) -> Result<(Vec<u32>, f64, Vec<ClusterStat>)> {
    let edges = graph.simple_edges();
    let (partition, modularity) = louvain(graph.node_count(), &edges, seed);
    let community_count = partition.iter().copied().max().map_or(0, |m| m as usize + 1);
    let mut sizes = vec![0usize; community_count];
    for &c in &partition {
        sizes[c as usize] += 1;
    }
    let mut by_size: Vec<usize> = (0..community_count).collect();
    by_size.sort_by_key(|&c| std::cmp::Reverse(sizes[c]));
    by_size.truncate(50);
    let rank: std::collections::HashMap<usize, usize> = by_size
        .iter()
        .enumerate()
        .map(|(rank, &c)| (c, rank))
        .collect();

    let mut stats: Vec<(usize, f64, f64, u64)> = by_size
        .iter()
        .map(|&c| (sizes[c], 0.0, 0.0, 0))
        .collect();
    for &(u, v) in &edges {
        let cu = partition[u as usize];
        if cu != partition[v as usize] {
            continue;
        }
        if let Some(&r) = rank.get(&(cu as usize)) {
            let d = grid.distance(
                graph.persons[u as usize].tile as usize,
                graph.persons[v as usize].tile as usize,
            )?;
            let entry = &mut stats[r];
            entry.1 += d;
            entry.2 = entry.2.max(d);
            entry.3 += 1;
        }
    }
    let clusters = stats
        .into_iter()
        .map(|(size, sum, max, count)| ClusterStat {
            size,
            mean_intra_distance_km: if count > 0 { sum / count as f64 } else { 0.0 },
            max_intra_distance_km: max,
        })
        .collect();
    Ok((partition, modularity, clusters))
}

#[derive(Debug, Clone, Serialize)]
pub struct TileStat {
    pub row: usize,
    pub col: usize,
    pub population: u64,
    pub mean_degree: f64,
    pub max_degree: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpatialStats {
    /// `(bin_low_km, count)` histogram of edge lengths over the simple
    /// graph, bin width = half a tile side.
    pub edge_length_histogram: Vec<(f64, u64)>,
    pub tile_stats: Vec<TileStat>,
    /// Unordered group-pair edge fractions of the friendship layer
    /// (upper triangle sums to 1) and of the whole graph.
    pub group_edge_fractions_friendship: Vec<f64>,
    pub group_edge_fractions_all: Vec<f64>,
    /// Mean friendship degree per group, and within the group-induced
    /// peer subgraph.
    pub group_mean_degree: Vec<f64>,
    pub group_peer_mean_degree: Vec<f64>,
    pub group_count: usize,
}

pub fn spatial_stats(graph: &SocialGraph, grid: &Grid) -> Result<SpatialStats> {
    let n_groups = graph
        .persons
        .iter()
        .map(|p| p.group as usize)
        .max()
        .unwrap_or(0)
        + 1;
    let simple = graph.simple_edges();
    let bin_width = grid.tile_km() / 2.0;
    let mut hist: Vec<u64> = Vec::new();
    for &(u, v) in &simple {
        let d = grid.distance(
            graph.persons[u as usize].tile as usize,
            graph.persons[v as usize].tile as usize,
        )?;
        let bin = (d / bin_width).floor() as usize;
        if bin >= hist.len() {
            hist.resize(bin + 1, 0);
        }
        hist[bin] += 1;
    }
    let edge_length_histogram = hist
        .iter()
        .enumerate()
        .filter(|(_, c)| **c > 0)
        .map(|(b, &c)| (b as f64 * bin_width, c))
        .collect();

    let adj = graph.adjacency();
    let mut tile_sum: std::collections::HashMap<u32, (u64, f64, usize)> =
        std::collections::HashMap::new();
    for p in &graph.persons {
        let d = adj.degree(p.id as usize);
        let entry = tile_sum.entry(p.tile).or_insert((0, 0.0, 0));
        entry.0 += 1;
        entry.1 += d as f64;
        entry.2 = entry.2.max(d);
    }
    let mut tile_stats: Vec<TileStat> = tile_sum
        .into_iter()
        .map(|(tile, (count, deg_sum, max))| {
            let (row, col) = grid.row_col(tile as usize)?;
            Ok(TileStat {
                row,
                col,
                population: count,
                mean_degree: deg_sum / count as f64,
                max_degree: max,
            })
        })
        .collect::<Result<_>>()?;
    tile_stats.sort_by_key(|t| (t.row, t.col));

    let fractions = |edges: &[(u32, u32)]| -> Vec<f64> {
        let mut counts = vec![0.0; n_groups * n_groups];
        for &(u, v) in edges {
            let (a, b) = (
                graph.persons[u as usize].group as usize,
                graph.persons[v as usize].group as usize,
            );
            let (i, j) = (a.min(b), a.max(b));
            counts[i * n_groups + j] += 1.0;
        }
        let total: f64 = counts.iter().sum();
        if total > 0.0 {
            for c in &mut counts {
                *c /= total;
            }
        }
        counts
    };
    let group_edge_fractions_friendship = fractions(&graph.friendship_edges);
    let group_edge_fractions_all = fractions(&simple);

    let mut group_sizes = vec![0u64; n_groups];
    for p in &graph.persons {
        group_sizes[p.group as usize] += 1;
    }
    let mut overall = vec![0.0; n_groups];
    let mut peer = vec![0.0; n_groups];
    for &(u, v) in &graph.friendship_edges {
        let (gu, gv) = (
            graph.persons[u as usize].group as usize,
            graph.persons[v as usize].group as usize,
        );
        overall[gu] += 1.0;
        overall[gv] += 1.0;
        if gu == gv {
            peer[gu] += 2.0;
        }
    }
    for g in 0..n_groups {
        if group_sizes[g] > 0 {
            overall[g] /= group_sizes[g] as f64;
            peer[g] /= group_sizes[g] as f64;
        }
    }

    Ok(SpatialStats {
        edge_length_histogram,
        tile_stats,
        group_edge_fractions_friendship,
        group_edge_fractions_all,
        group_mean_degree: overall,
        group_peer_mean_degree: peer,
        group_count: n_groups,
    })
}

/// Everything the `analyze` pipeline reports for one run.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    /// Hash of the configuration that produced the analyzed run; filled
    /// by the pipeline, empty when metrics are computed standalone.
    pub config_hash: String,
    pub seed: u64,
    pub nodes: usize,
    pub household_edge_count: usize,
    pub friendship_edge_count: usize,
    pub cross_layer_duplicates: usize,
    pub simple_edge_count: usize,
    pub nu: f64,
    pub mu_hat: f64,
    pub mean_degree: f64,
    pub avg_path_length: f64,
    pub path_length_sources: usize,
    pub global_clustering: f64,
    pub mean_local_clustering: f64,
    pub assortativity: Option<f64>,
    pub component_count: usize,
    pub giant_fraction: f64,
    /// Connectivity of the friendship layer alone.
    pub component_count_friendship: usize,
    pub giant_fraction_friendship: f64,
    pub largest_components: Vec<usize>,
    pub modularity: f64,
    pub community_count: usize,
    pub mean_degree_empirical: f64,
    pub kl_vs_poisson: f64,
    pub lognormal_tail: Option<LognormalTailFit>,
}

pub struct FullAnalysis {
    pub report: MetricsReport,
    pub degree_histogram: Vec<u64>,
    pub spatial: SpatialStats,
    pub clusters: Vec<ClusterStat>,
}

/// Runs the whole metric suite on a graph.
pub fn analyze(
    graph: &SocialGraph,
    grid: &Grid,
    mu: f64,
    path_sample_size: usize,
    seed: u64,
) -> Result<FullAnalysis> {
    let adj = graph.adjacency();
    let comp = components(graph.node_count(), &graph.simple_edges());
    let comp_friendship = components(graph.node_count(), &graph.friendship_edges);
    let (global_clustering, mean_local) = clustering(&adj);
    let rho = assortativity(&adj);
    let (dist, sources) = avg_path_length(&adj, &comp, path_sample_size, seed)?;
    let degrees = adj.degrees();
    let diagnostics = degree_diagnostics(&degrees, mu);
    let (partition, modularity, clusters) = communities(graph, grid, seed)?;
    let community_count = partition.iter().copied().max().map_or(0, |m| m as usize + 1);
    let spatial = spatial_stats(graph, grid)?;

    let report = MetricsReport {
        config_hash: String::new(),
        seed,
        nodes: graph.node_count(),
        household_edge_count: graph.household_edges.len(),
        friendship_edge_count: graph.friendship_edges.len(),
        cross_layer_duplicates: graph.cross_layer_duplicates(),
        simple_edge_count: graph.simple_edges().len(),
        nu: graph.nu(),
        mu_hat: graph.mu_hat(),
        mean_degree: graph.mean_degree(),
        avg_path_length: dist,
        path_length_sources: sources,
        global_clustering,
        mean_local_clustering: mean_local,
        assortativity: rho,
        component_count: comp.count(),
        giant_fraction: comp.giant_fraction(),
        component_count_friendship: comp_friendship.count(),
        giant_fraction_friendship: comp_friendship.giant_fraction(),
        largest_components: comp.sizes.iter().copied().take(50).collect(),
        modularity,
        community_count,
        mean_degree_empirical: diagnostics.mean_degree,
        kl_vs_poisson: diagnostics.kl_vs_poisson,
        lognormal_tail: diagnostics.lognormal_tail.clone(),
    };
    Ok(FullAnalysis {
        report,
        degree_histogram: diagnostics.histogram,
        spatial,
        clusters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::Person;

    fn adjacency(n: usize, edges: &[(u32, u32)]) -> Adjacency {
        Adjacency::from_edges(n, edges)
    }

    fn complete_graph(n: u32) -> Vec<(u32, u32)> {
        let mut e = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                e.push((u, v));
            }
        }
        e
    }

    #[test]
    fn complete_graph_is_one_component() {
        let edges = complete_graph(5);
        let comp = components(5, &edges);
        assert_eq!(comp.count(), 1);
        assert_eq!(comp.giant_fraction(), 1.0);
    }

    #[test]
    fn isolated_nodes_are_singleton_components() {
        let comp = components(10, &[]);
        assert_eq!(comp.count(), 10);
        assert!((comp.giant_fraction() - 0.1).abs() < 1e-12);
        assert_eq!(comp.sizes.iter().sum::<usize>(), 10);
    }

    #[test]
    fn component_sizes_sorted_descending() {
        let comp = components(7, &[(0, 1), (1, 2), (3, 4)]);
        assert_eq!(comp.sizes, vec![3, 2, 1, 1]);
    }

    #[test]
    fn triangle_clustering_is_one() {
        let adj = adjacency(3, &[(0, 1), (1, 2), (0, 2)]);
        let (c, c_loc) = clustering(&adj);
        assert_eq!(c, 1.0);
        assert_eq!(c_loc, 1.0);
    }

    #[test]
    fn path_graph_has_no_triangles() {
        let adj = adjacency(3, &[(0, 1), (1, 2)]);
        let (c, c_loc) = clustering(&adj);
        assert_eq!(c, 0.0);
        assert_eq!(c_loc, 0.0);
    }

    #[test]
    fn handshake_holds() {
        let edges = [(0u32, 1u32), (1, 2), (2, 3), (0, 3), (0, 2)];
        let adj = adjacency(4, &edges);
        let degree_sum: usize = adj.degrees().iter().sum();
        assert_eq!(degree_sum, 2 * edges.len());
    }

    #[test]
    fn adding_household_cliques_never_loses_triangles() {
        let friend = [(0u32, 1u32), (1, 2), (2, 0), (3, 4)];
        let adj_f = adjacency(6, &friend);
        let tri_f: u64 = triangles_per_node(&adj_f).iter().sum();
        let mut merged = friend.to_vec();
        merged.extend_from_slice(&[(3, 5), (4, 5), (3, 4)]);
        merged.sort_unstable();
        merged.dedup();
        let adj_m = adjacency(6, &merged);
        let tri_m: u64 = triangles_per_node(&adj_m).iter().sum();
        assert!(tri_m >= tri_f);
    }

    #[test]
    fn star_is_perfectly_disassortative() {
        let adj = adjacency(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]);
        let rho = assortativity(&adj).unwrap();
        assert!((rho + 1.0).abs() < 1e-12);
    }

    #[test]
    fn regular_ring_has_undefined_assortativity() {
        let adj = adjacency(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]);
        assert!(assortativity(&adj).is_none());
    }

    #[test]
    fn path_length_of_three_node_path() {
        let adj = adjacency(3, &[(0, 1), (1, 2)]);
        let comp = components(3, &[(0, 1), (1, 2)]);
        let (dist, sources) = avg_path_length(&adj, &comp, 100, 1).unwrap();
        assert_eq!(sources, 3);
        assert!((dist - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn path_length_of_empty_graph_is_an_error() {
        let adj = adjacency(0, &[]);
        let comp = components(0, &[]);
        assert!(avg_path_length(&adj, &comp, 10, 1).is_err());
    }

    #[test]
    fn path_length_of_complete_graph_is_one() {
        let edges = complete_graph(5);
        let adj = adjacency(5, &edges);
        let comp = components(5, &edges);
        let (dist, _) = avg_path_length(&adj, &comp, 100, 1).unwrap();
        assert_eq!(dist, 1.0);
    }

    #[test]
    fn kl_of_identical_distributions_is_zero() {
        let p = [0.1, 0.4, 0.3, 0.2];
        assert_eq!(kl_divergence(&p, &p), 0.0);
        let q = [0.25, 0.25, 0.25, 0.25];
        assert!(kl_divergence(&p, &q) > 0.0);
    }

    #[test]
    fn poisson_shaped_degrees_have_tiny_kl() {
        // Build a histogram with counts proportional to Poisson(4) over a
        // large population; the KL against the fitted Poisson mean stays
        // near zero.
        let lambda: f64 = 4.0;
        let n = 1_000_000u64;
        let mut degrees = Vec::new();
        for k in 0..30u64 {
            let pk = (k as f64 * lambda.ln() - lambda - ln_factorial(k)).exp();
            let count = (pk * n as f64).round() as usize;
            degrees.extend(std::iter::repeat_n(k as usize, count));
        }
        let diag = degree_diagnostics(&degrees, 4.0);
        assert!(diag.kl_vs_poisson < 1e-6, "kl {}", diag.kl_vs_poisson);
    }

    #[test]
    fn ln_factorial_matches_direct_product() {
        let mut acc = 0.0;
        for k in 1..40u64 {
            acc += (k as f64).ln();
            assert!((ln_factorial(k) - acc).abs() < 1e-9);
        }
        // Stirling branch.
        let direct: f64 = (1..=2000u64).map(|k| (k as f64).ln()).sum();
        assert!((ln_factorial(2000) - direct).abs() < 1e-6);
    }

    fn one_tile_persons(n: u32) -> Vec<Person> {
        (0..n)
            .map(|id| Person {
                id,
                tile: 0,
                group: (id % 2) as u8,
                fitness: 1.0,
                role: None,
                household: None,
            })
            .collect()
    }

    #[test]
    fn all_edges_in_one_tile_have_floor_length() {
        let grid = Grid::new((0.0, 0.0), 1.0, 1, 1).unwrap();
        let graph = SocialGraph::assemble(
            one_tile_persons(6),
            vec![(0, 1), (2, 3)],
            vec![(1, 2), (4, 5)],
        )
        .unwrap();
        let stats = spatial_stats(&graph, &grid).unwrap();
        assert_eq!(stats.edge_length_histogram.len(), 1);
        let (bin_low, count) = stats.edge_length_histogram[0];
        assert_eq!(bin_low, 0.5);
        assert_eq!(count, 4);
        let total: f64 = stats.group_edge_fractions_friendship.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn group_degree_split_counts_peers() {
        let grid = Grid::new((0.0, 0.0), 1.0, 1, 1).unwrap();
        // Groups: even ids 0, odd ids 1. Friendship edges: (0,2) same group,
        // (0,1) cross.
        let graph =
            SocialGraph::assemble(one_tile_persons(4), vec![], vec![(0, 1), (0, 2)]).unwrap();
        let stats = spatial_stats(&graph, &grid).unwrap();
        assert!((stats.group_mean_degree[0] - 3.0 / 2.0).abs() < 1e-12);
        assert!((stats.group_peer_mean_degree[0] - 1.0).abs() < 1e-12);
    }
}
