//! Friendship layer: the edge-probability model and its exact sampler.
//!
//! The probability of a friendship edge factorizes into the target mean
//! degree, the age-mixing share of the pair's group combination, and the
//! pair's attraction (distance kernel times both fitness scores) relative
//! to the total attraction of that group combination:
//!
//! ```text
//! Pr[u,v] = (mu N / 2) * M(gu,gv)/M * D(u,v) f_u f_v / A(gu,gv)
//! ```
//!
//! Group totals `A(i,j)` are computed exactly by aggregating fitness per
//! (group, tile) cell, which costs `O(T^2 n^2)` independently of the
//! population size. Sampling decomposes all vertex pairs into blocks
//! (group pair x tile pair); inside a block the probability is a constant
//! times `f_u f_v`, so candidates are drawn by geometric skips under the
//! block's uniform upper bound and thinned by the exact fitness ratio.
//! Each block consumes its own RNG stream, which makes the edge set
//! reproducible regardless of thread count.

use rand::prelude::*;
use rand_distr::Geometric;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geo::Grid;
use crate::mixing::{pair_counts, MixingMatrix};
use crate::population::Person;
use crate::rng::{self, domain};

/// Non-increasing function of the tile-approximated distance.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceKernel {
    kind: KernelKind,
    scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelKind {
    ConstantOne,
    InversePower { beta: f64 },
}

impl DistanceKernel {
    pub fn constant_one() -> DistanceKernel {
        DistanceKernel {
            kind: KernelKind::ConstantOne,
            scale: 1.0,
        }
    }

    pub fn inverse_power(beta: f64) -> Result<DistanceKernel> {
        if beta < 0.0 || !beta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "distance exponent must be nonnegative, got {beta}"
            )));
        }
        Ok(DistanceKernel {
            kind: KernelKind::InversePower { beta },
            scale: 1.0,
        })
    }

    /// Multiplies the kernel by a positive constant. The model is invariant
    /// under this; it exists for diagnostics and invariance checks.
    pub fn scaled(mut self, c: f64) -> Result<DistanceKernel> {
        if c <= 0.0 || !c.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "kernel scale must be positive, got {c}"
            )));
        }
        self.scale *= c;
        Ok(self)
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    #[inline]
    pub fn eval(&self, distance_km: f64) -> f64 {
        let base = match self.kind {
            KernelKind::ConstantOne => 1.0,
            KernelKind::InversePower { beta } => distance_km.powf(-beta),
        };
        self.scale * base
    }
}

/// Precomputed state for edge probabilities and sampling.
pub struct FriendshipContext {
    mu: f64,
    group_count: usize,
    population: usize,
    group_sizes: Vec<u64>,
    person_group: Vec<u8>,
    person_tile: Vec<u32>,
    person_fitness: Vec<f64>,
    kernel: DistanceKernel,
    half_tile_km: f64,
    /// Tiles that hold at least one person, ascending.
    active_tiles: Vec<u32>,
    active_centers: Vec<(f64, f64)>,
    /// Per cell `(group, active-tile slot)`: members ascending by id.
    cell_members: Vec<Vec<u32>>,
    cell_fit_sum: Vec<f64>,
    cell_fit_max: Vec<f64>,
    pair_count_mat: Vec<f64>,
    mixing_mat: Vec<f64>,
    total_mixing: f64,
    attraction: Vec<f64>,
    /// `(mu N / 2) * (M(i,j)/M) / A(i,j)`, zero where `M(i,j) = 0`.
    prob_base: Vec<f64>,
    mu_max: f64,
    mean_kernel: f64,
    mean_fitness: f64,
}

impl FriendshipContext {
    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn group_count(&self) -> usize {
        self.group_count
    }

    pub fn population(&self) -> usize {
        self.population
    }

    pub fn group_sizes(&self) -> &[u64] {
        &self.group_sizes
    }

    pub fn mu_max(&self) -> f64 {
        self.mu_max
    }

    pub fn pair_count(&self, i: usize, j: usize) -> f64 {
        self.pair_count_mat[i * self.group_count + j]
    }

    /// `M(i,j) = m_{i,j} s_{i,j}`.
    pub fn mixing(&self, i: usize, j: usize) -> f64 {
        self.mixing_mat[i * self.group_count + j]
    }

    pub fn total_mixing(&self) -> f64 {
        self.total_mixing
    }

    pub fn attraction(&self, i: usize, j: usize) -> f64 {
        self.attraction[i * self.group_count + j]
    }

    /// Expected number of friendship edges between groups `i <= j`.
    pub fn expected_group_edges(&self, i: usize, j: usize) -> f64 {
        self.mu * self.population as f64 / 2.0 * self.mixing(i, j) / self.total_mixing
    }

    /// Mean kernel value over distinct pairs and mean fitness; diagnostics
    /// for the aggregate approximation of the attraction totals.
    pub fn means(&self) -> (f64, f64) {
        (self.mean_kernel, self.mean_fitness)
    }

    #[inline]
    fn tile_distance_by_slot(&self, a: usize, b: usize) -> f64 {
        let (xa, ya) = self.active_centers[a];
        let (xb, yb) = self.active_centers[b];
        let d = ((xa - xb).powi(2) + (ya - yb).powi(2)).sqrt();
        d.max(self.half_tile_km)
    }

    fn cell(&self, group: usize, slot: usize) -> usize {
        group * self.active_tiles.len() + slot
    }
}

/// Builds the sampling context from a synthesized population.
pub fn build_context(
    persons: &[Person],
    grid: &Grid,
    s: &MixingMatrix,
    kernel: &DistanceKernel,
    mu: f64,
) -> Result<FriendshipContext> {
    if persons.is_empty() {
        return Err(Error::EmptyPopulation);
    }
    if mu < 0.0 || !mu.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "mu must be nonnegative, got {mu}"
        )));
    }
    if persons
        .iter()
        .enumerate()
        .any(|(idx, p)| p.id as usize != idx)
    {
        return Err(Error::Data(
            "population ids must be dense and ordered".into(),
        ));
    }
    let n = s.group_count();
    if let Some(p) = persons.iter().find(|p| p.group as usize >= n) {
        return Err(Error::Config(format!(
            "person {} has age group {} outside the {}-group mixing matrix",
            p.id, p.group, n
        )));
    }

    let population = persons.len();
    let mut group_sizes = vec![0u64; n];
    for p in persons {
        group_sizes[p.group as usize] += 1;
    }

    let pair_count_mat = pair_counts(&group_sizes);
    let mut mixing_mat = vec![0.0; n * n];
    let mut total_mixing = 0.0;
    for i in 0..n {
        for j in i..n {
            let m = pair_count_mat[i * n + j] * s.get(i, j);
            mixing_mat[i * n + j] = m;
            mixing_mat[j * n + i] = m;
            total_mixing += m;
        }
    }
    if total_mixing <= 0.0 {
        return Err(Error::DegenerateModel(
            "every group pair has zero mixing mass; no edges can be placed".into(),
        ));
    }
    for i in 0..n {
        for j in i..n {
            if mixing_mat[i * n + j] == 0.0 && pair_count_mat[i * n + j] > 0.0 {
                log::warn!(
                    "group pair ({i}, {j}) has zero mixing mass; no friendship edges will connect it"
                );
            }
        }
    }

    let mut active_tiles: Vec<u32> = persons.iter().map(|p| p.tile).collect();
    active_tiles.sort_unstable();
    active_tiles.dedup();
    let slot_of = |tile: u32| -> usize {
        active_tiles
            .binary_search(&tile)
            .expect("person tile present in active set")
    };
    let ta = active_tiles.len();
    let active_centers: Vec<(f64, f64)> = active_tiles
        .iter()
        .map(|&t| grid.center_km(t as usize))
        .collect::<Result<_>>()?;

    let mut cell_members = vec![Vec::new(); n * ta];
    let mut cell_fit_sum = vec![0.0f64; n * ta];
    let mut cell_fit_sq_sum = vec![0.0; n * ta];
    let mut cell_fit_max = vec![0.0f64; n * ta];
    let mut cell_counts = vec![0u64; n * ta];
    for p in persons {
        if p.fitness <= 0.0 || !p.fitness.is_finite() {
            return Err(Error::Data(format!(
                "person {} has non-positive fitness {}",
                p.id, p.fitness
            )));
        }
        let c = p.group as usize * ta + slot_of(p.tile);
        cell_members[c].push(p.id);
        cell_fit_sum[c] += p.fitness;
        cell_fit_sq_sum[c] += p.fitness * p.fitness;
        cell_fit_max[c] = cell_fit_max[c].max(p.fitness);
        cell_counts[c] += 1;
    }

    let half_tile_km = grid.tile_km() / 2.0;
    let dist = |a: usize, b: usize| -> f64 {
        let (xa, ya) = active_centers[a];
        let (xb, yb) = active_centers[b];
        ((xa - xb).powi(2) + (ya - yb).powi(2))
            .sqrt()
            .max(half_tile_km)
    };

    // Exact attraction totals by tile aggregation, plus the extreme
    // attraction per group pair needed for the feasibility bound.
    let mut full = vec![0.0; n * n];
    let mut max_att = vec![0.0; n * n];
    let mut kernel_pair_sum = 0.0;
    for a in 0..ta {
        for b in 0..ta {
            let w = kernel.eval(dist(a, b));
            for i in 0..n {
                let fa = cell_fit_sum[i * ta + a];
                let ca = cell_counts[i * ta + a];
                if ca == 0 {
                    continue;
                }
                for j in i..n {
                    let cb = cell_counts[j * ta + b];
                    if cb == 0 {
                        continue;
                    }
                    full[i * n + j] += w * fa * cell_fit_sum[j * ta + b];
                    let has_pair = i != j || a != b || ca >= 2;
                    if has_pair {
                        let am = w * cell_fit_max[i * ta + a] * cell_fit_max[j * ta + b];
                        if am > max_att[i * n + j] {
                            max_att[i * n + j] = am;
                        }
                    }
                }
            }
            let count_a: f64 = (0..n).map(|i| cell_counts[i * ta + a] as f64).sum();
            let count_b: f64 = (0..n).map(|j| cell_counts[j * ta + b] as f64).sum();
            kernel_pair_sum += w * count_a * count_b;
        }
    }
    // Remove self pairs from the kernel average and the diagonal totals.
    let mut self_kernel = 0.0;
    for a in 0..ta {
        let w = kernel.eval(dist(a, a));
        let count_a: f64 = (0..n).map(|i| cell_counts[i * ta + a] as f64).sum();
        self_kernel += w * count_a;
    }
    let nf = population as f64;
    let mean_kernel = (kernel_pair_sum - self_kernel) / (nf * (nf - 1.0)).max(1.0);
    let mean_fitness = persons.iter().map(|p| p.fitness).sum::<f64>() / nf;

    let mut attraction = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let value = if i == j {
                let self_term: f64 = (0..ta)
                    .map(|a| kernel.eval(dist(a, a)) * cell_fit_sq_sum[i * ta + a])
                    .sum();
                (full[i * n + i] - self_term) / 2.0
            } else {
                full[i * n + j]
            };
            attraction[i * n + j] = value;
            attraction[j * n + i] = value;
        }
    }

    let mut prob_base = vec![0.0; n * n];
    let mut mu_max = f64::INFINITY;
    let half_edges = mu * nf / 2.0;
    for i in 0..n {
        for j in i..n {
            let m = mixing_mat[i * n + j];
            if m <= 0.0 {
                continue;
            }
            let a = attraction[i * n + j];
            if a <= 0.0 {
                // No realizable pair carries the mixing mass of (i, j).
                if pair_count_mat[i * n + j] > 0.0 {
                    return Err(Error::DegenerateModel(format!(
                        "group pair ({i}, {j}) has mixing mass but zero attraction"
                    )));
                }
                continue;
            }
            let base = half_edges * (m / total_mixing) / a;
            prob_base[i * n + j] = base;
            prob_base[j * n + i] = base;
            if max_att[i * n + j] > 0.0 {
                let bound = (2.0 * total_mixing / nf) * a / (m * max_att[i * n + j]);
                if bound < mu_max {
                    mu_max = bound;
                }
            }
        }
    }

    Ok(FriendshipContext {
        mu,
        group_count: n,
        population,
        group_sizes,
        person_group: persons.iter().map(|p| p.group).collect(),
        person_tile: persons.iter().map(|p| p.tile).collect(),
        person_fitness: persons.iter().map(|p| p.fitness).collect(),
        kernel: kernel.clone(),
        half_tile_km,
        active_tiles,
        active_centers,
        cell_members,
        cell_fit_sum,
        cell_fit_max,
        pair_count_mat,
        mixing_mat,
        total_mixing,
        attraction,
        prob_base,
        mu_max,
        mean_kernel,
        mean_fitness,
    })
}

/// Probability that the friendship edge `(u, v)` exists.
pub fn edge_probability(ctx: &FriendshipContext, u: u32, v: u32) -> Result<f64> {
    if u == v {
        return Err(Error::InvalidParameter(
            "edge probability requires two distinct vertices".into(),
        ));
    }
    let (u, v) = (u as usize, v as usize);
    if u >= ctx.population || v >= ctx.population {
        return Err(Error::InvalidIndex(format!(
            "vertex pair ({u}, {v}) outside population of {}",
            ctx.population
        )));
    }
    let gu = ctx.person_group[u] as usize;
    let gv = ctx.person_group[v] as usize;
    let slot_u = ctx
        .active_tiles
        .binary_search(&ctx.person_tile[u])
        .expect("resident tile is active");
    let slot_v = ctx
        .active_tiles
        .binary_search(&ctx.person_tile[v])
        .expect("resident tile is active");
    let d = ctx.tile_distance_by_slot(slot_u, slot_v);
    // Fitness product first so the result is bitwise symmetric in (u, v).
    let p = ctx.prob_base[gu * ctx.group_count + gv]
        * ctx.kernel.eval(d)
        * (ctx.person_fitness[u] * ctx.person_fitness[v]);
    if p > 1.0 {
        return Err(Error::ProbabilityOverflow {
            u: u as u32,
            v: v as u32,
            probability: p,
        });
    }
    Ok(p)
}

/// Largest feasible mean degree for this context. Errors when the
/// configured `mu` exceeds it.
pub fn validate_mu(ctx: &FriendshipContext) -> Result<f64> {
    if ctx.mu > ctx.mu_max {
        return Err(Error::Infeasible {
            mu: ctx.mu,
            mu_max: ctx.mu_max,
        });
    }
    Ok(ctx.mu_max)
}

/// Expected friendship degree of vertex `u`, via tile aggregation.
pub fn expected_degree(ctx: &FriendshipContext, u: u32) -> f64 {
    let u = u as usize;
    let n = ctx.group_count;
    let gu = ctx.person_group[u] as usize;
    let fu = ctx.person_fitness[u];
    let slot_u = ctx
        .active_tiles
        .binary_search(&ctx.person_tile[u])
        .expect("resident tile is active");
    let ta = ctx.active_tiles.len();
    let mut sum = 0.0;
    for t in 0..ta {
        let w = ctx.kernel.eval(ctx.tile_distance_by_slot(slot_u, t));
        let mut inner = 0.0;
        for j in 0..n {
            inner += ctx.prob_base[gu * n + j] * ctx.cell_fit_sum[j * ta + t];
        }
        sum += w * inner;
    }
    let self_term = ctx.prob_base[gu * n + gu]
        * ctx.kernel.eval(ctx.tile_distance_by_slot(slot_u, slot_u))
        * fu;
    fu * (sum - self_term)
}

#[derive(Clone, Copy)]
struct Block {
    group_i: u32,
    group_j: u32,
    slot_a: u32,
    slot_b: u32,
}

/// Draws the friendship edge set: every unordered pair enters
/// independently with exactly its model probability.
pub fn sample_friendship_edges(ctx: &FriendshipContext, seed: u64) -> Result<Vec<(u32, u32)>> {
    validate_mu(ctx)?;
    if ctx.mu == 0.0 {
        return Ok(Vec::new());
    }
    let n = ctx.group_count;
    let ta = ctx.active_tiles.len();
    let mut blocks = Vec::new();
    for i in 0..n {
        for j in i..n {
            if ctx.mixing_mat[i * n + j] <= 0.0 {
                continue;
            }
            for a in 0..ta {
                if ctx.cell_members[ctx.cell(i, a)].is_empty() {
                    continue;
                }
                let b_start = if i == j { a } else { 0 };
                for b in b_start..ta {
                    if ctx.cell_members[ctx.cell(j, b)].is_empty() {
                        continue;
                    }
                    blocks.push(Block {
                        group_i: i as u32,
                        group_j: j as u32,
                        slot_a: a as u32,
                        slot_b: b as u32,
                    });
                }
            }
        }
    }

    let chunks: Vec<Vec<(u32, u32)>> = blocks
        .par_iter()
        .map(|blk| sample_block(ctx, blk, seed))
        .collect();
    let mut edges: Vec<(u32, u32)> = chunks.into_iter().flatten().collect();
    edges.sort_unstable();
    debug_assert!(edges.windows(2).all(|w| w[0] < w[1]), "duplicate edges");
    Ok(edges)
}

fn sample_block(ctx: &FriendshipContext, blk: &Block, seed: u64) -> Vec<(u32, u32)> {
    let n = ctx.group_count;
    let (i, j) = (blk.group_i as usize, blk.group_j as usize);
    let (a, b) = (blk.slot_a as usize, blk.slot_b as usize);
    let members_a = &ctx.cell_members[ctx.cell(i, a)];
    let members_b = &ctx.cell_members[ctx.cell(j, b)];
    let diagonal_cell = i == j && a == b;
    let len: u64 = if diagonal_cell {
        let c = members_a.len() as u64;
        c * (c - 1) / 2
    } else {
        members_a.len() as u64 * members_b.len() as u64
    };
    if len == 0 {
        return Vec::new();
    }

    let c_block = ctx.prob_base[i * n + j] * ctx.kernel.eval(ctx.tile_distance_by_slot(a, b));
    let fmax_a = ctx.cell_fit_max[ctx.cell(i, a)];
    let fmax_b = ctx.cell_fit_max[ctx.cell(j, b)];
    let pbar = (c_block * fmax_a * fmax_b).min(1.0);
    debug_assert!(
        c_block * fmax_a * fmax_b <= 1.0 + 1e-9,
        "infeasible block slipped past the mu bound"
    );
    if pbar <= 0.0 {
        return Vec::new();
    }

    let tile_a = ctx.active_tiles[a] as u64;
    let tile_b = ctx.active_tiles[b] as u64;
    let mut rng = rng::stream(
        seed,
        domain::FRIENDSHIP,
        (i * n + j) as u64,
        (tile_a << 32) | tile_b,
    );
    let geometric = Geometric::new(pbar).expect("pbar in (0, 1]");
    let inv_fmax = 1.0 / (fmax_a * fmax_b);
    let mut edges = Vec::new();
    let mut cursor: u64 = 0;
    loop {
        let skip = geometric.sample(&mut rng);
        cursor = match cursor.checked_add(skip) {
            Some(c) => c,
            None => break,
        };
        if cursor >= len {
            break;
        }
        let (u, v) = if diagonal_cell {
            let (r, s) = triangular_decode(cursor, members_a.len() as u64);
            (members_a[r as usize], members_a[s as usize])
        } else {
            (
                members_a[(cursor / members_b.len() as u64) as usize],
                members_b[(cursor % members_b.len() as u64) as usize],
            )
        };
        let accept = ctx.person_fitness[u as usize] * ctx.person_fitness[v as usize] * inv_fmax;
        if accept >= 1.0 || rng.random::<f64>() < accept {
            edges.push((u.min(v), u.max(v)));
        }
        cursor += 1;
    }
    edges
}

/// Maps a linear index into the ordered enumeration of pairs `(r, s)`,
/// `r < s < c`: (0,1), (0,2), ..., (0,c-1), (1,2), ...
fn triangular_decode(k: u64, c: u64) -> (u64, u64) {
    let row_start = |r: u64| -> u64 { r * (2 * c - r - 1) / 2 };
    let disc = ((2 * c - 1) * (2 * c - 1)) as f64 - 8.0 * k as f64;
    let mut r = (((2 * c - 1) as f64 - disc.max(0.0).sqrt()) / 2.0) as u64;
    r = r.min(c - 2);
    while r > 0 && row_start(r) > k {
        r -= 1;
    }
    while r < c - 2 && row_start(r + 1) <= k {
        r += 1;
    }
    let s = k - row_start(r) + r + 1;
    (r, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::TileMask;
    use crate::mixing;
    use crate::population::{synthesize_population, AgeDistribution, FitnessSpec};

    fn person(id: u32, tile: u32, group: u8, fitness: f64) -> Person {
        Person {
            id,
            tile,
            group,
            fitness,
            role: None,
            household: None,
        }
    }

    fn two_tile_grid() -> Grid {
        Grid::new((0.0, 0.0), 1.0, 1, 2).unwrap()
    }

    /// 5 people, one group, tiles (2, 3), unit fitness.
    fn two_tile_population() -> Vec<Person> {
        vec![
            person(0, 0, 0, 1.0),
            person(1, 0, 0, 1.0),
            person(2, 1, 0, 1.0),
            person(3, 1, 0, 1.0),
            person(4, 1, 0, 1.0),
        ]
    }

    #[test]
    fn triangular_decode_enumerates_all_pairs() {
        for c in [2u64, 3, 5, 17, 101] {
            let mut expected = Vec::new();
            for r in 0..c {
                for s in (r + 1)..c {
                    expected.push((r, s));
                }
            }
            for (k, want) in expected.iter().enumerate() {
                assert_eq!(triangular_decode(k as u64, c), *want, "c={c} k={k}");
            }
        }
    }

    #[test]
    fn attraction_matches_bruteforce_on_two_tiles() {
        let grid = two_tile_grid();
        let persons = two_tile_population();
        let s = mixing::homogeneous(1).unwrap();
        let kernel = DistanceKernel::inverse_power(2.0).unwrap();
        let ctx = build_context(&persons, &grid, &s, &kernel, 1.0).unwrap();
        // D(0.5) = 4 for the 1+3 intra-tile pairs, D(1) = 1 for the 6
        // cross pairs: A(0,0) = 4*4 + 6 = 22.
        assert!((ctx.attraction(0, 0) - 22.0).abs() < 1e-12);
        // Brute force over all 10 pairs.
        let mut brute = 0.0;
        for u in 0..5u32 {
            for v in (u + 1)..5 {
                let d = grid
                    .distance(persons[u as usize].tile as usize, persons[v as usize].tile as usize)
                    .unwrap();
                brute += kernel.eval(d);
            }
        }
        assert!((ctx.attraction(0, 0) - brute).abs() < 1e-12);
    }

    #[test]
    fn single_tile_unit_attraction_equals_pair_count() {
        let grid = Grid::new((0.0, 0.0), 2.0, 1, 1).unwrap();
        let persons: Vec<Person> = (0..7).map(|k| person(k, 0, 0, 1.0)).collect();
        let s = mixing::homogeneous(1).unwrap();
        let ctx =
            build_context(&persons, &grid, &s, &DistanceKernel::constant_one(), 1.0).unwrap();
        assert_eq!(ctx.attraction(0, 0), 21.0);
        assert_eq!(ctx.pair_count(0, 0), 21.0);
    }

    #[test]
    fn er_reduction_gives_constant_pair_probability() {
        // Constant S and kernel and unit fitness: every pair gets mu/(N-1)
        // regardless of the group sizes.
        let grid = Grid::new((0.0, 0.0), 1.0, 2, 2).unwrap();
        let mut persons = Vec::new();
        for k in 0..40u32 {
            persons.push(person(k, k % 4, (k % 3) as u8, 1.0));
        }
        let s = mixing::homogeneous(3).unwrap();
        let mu = 5.0;
        let ctx =
            build_context(&persons, &grid, &s, &DistanceKernel::constant_one(), mu).unwrap();
        let expected = mu / 39.0;
        for u in 0..40u32 {
            for v in (u + 1)..40 {
                let p = edge_probability(&ctx, u, v).unwrap();
                assert!((p - expected).abs() / expected < 1e-12, "pair ({u},{v})");
            }
        }
    }

    #[test]
    fn probability_is_exactly_symmetric() {
        let grid = two_tile_grid();
        let persons = vec![
            person(0, 0, 0, 1.2),
            person(1, 0, 1, 3.4),
            person(2, 1, 0, 2.2),
            person(3, 1, 1, 1.9),
        ];
        let s = mixing::homogeneous(2).unwrap();
        let kernel = DistanceKernel::inverse_power(0.5).unwrap();
        let ctx = build_context(&persons, &grid, &s, &kernel, 0.5).unwrap();
        for u in 0..4u32 {
            for v in 0..4u32 {
                if u == v {
                    continue;
                }
                let puv = edge_probability(&ctx, u, v).unwrap();
                let pvu = edge_probability(&ctx, v, u).unwrap();
                assert_eq!(puv.to_bits(), pvu.to_bits());
            }
        }
    }

    #[test]
    fn intra_to_cross_probability_ratio_follows_kernel() {
        let grid = two_tile_grid();
        let persons = two_tile_population();
        let s = mixing::homogeneous(1).unwrap();
        let kernel = DistanceKernel::inverse_power(2.0).unwrap();
        let ctx = build_context(&persons, &grid, &s, &kernel, 1.0).unwrap();
        let intra = edge_probability(&ctx, 0, 1).unwrap();
        let cross = edge_probability(&ctx, 0, 2).unwrap();
        assert!((intra / cross - 4.0).abs() < 1e-12);
    }

    #[test]
    fn zero_mu_means_no_edges() {
        let grid = two_tile_grid();
        let persons = two_tile_population();
        let s = mixing::homogeneous(1).unwrap();
        let ctx =
            build_context(&persons, &grid, &s, &DistanceKernel::constant_one(), 0.0).unwrap();
        assert_eq!(edge_probability(&ctx, 0, 1).unwrap(), 0.0);
        assert!(sample_friendship_edges(&ctx, 3).unwrap().is_empty());
    }

    #[test]
    fn scale_invariance_of_probabilities() {
        let grid = Grid::new((0.0, 0.0), 1.0, 2, 3).unwrap();
        let mut persons = Vec::new();
        for k in 0..60u32 {
            persons.push(person(k, k % 6, (k % 4) as u8, 1.0 + (k % 7) as f64 * 0.5));
        }
        let base_s = mixing::homogeneous(4).unwrap();
        let kernel = DistanceKernel::inverse_power(2.0).unwrap();
        let mu = 2.0;
        let base = build_context(&persons, &grid, &base_s, &kernel, mu).unwrap();

        let scaled_s = mixing::homogeneous(4).unwrap().scaled(7.0).unwrap();
        let with_s = build_context(&persons, &grid, &scaled_s, &kernel, mu).unwrap();

        let mut scaled_people = persons.clone();
        for p in &mut scaled_people {
            p.fitness *= 3.0;
        }
        let with_f = build_context(&scaled_people, &grid, &base_s, &kernel, mu).unwrap();

        let scaled_kernel = kernel.clone().scaled(7.0).unwrap();
        let with_d = build_context(&persons, &grid, &base_s, &scaled_kernel, mu).unwrap();

        // Attraction scales with the square of the fitness factor.
        assert!(
            (with_f.attraction(0, 0) / base.attraction(0, 0) - 9.0).abs() < 1e-9
        );
        for u in 0..60u32 {
            for v in (u + 1)..60 {
                let p0 = edge_probability(&base, u, v).unwrap();
                for ctx in [&with_s, &with_f, &with_d] {
                    let p1 = edge_probability(ctx, u, v).unwrap();
                    assert!(
                        (p1 - p0).abs() <= 1e-12 * p0.abs().max(1e-300),
                        "pair ({u},{v}): {p0} vs {p1}"
                    );
                }
            }
        }
    }

    #[test]
    fn uniform_configuration_bound_is_population_size() {
        let grid = Grid::new((0.0, 0.0), 1.0, 1, 1).unwrap();
        let persons: Vec<Person> = (0..50).map(|k| person(k, 0, (k % 2) as u8, 1.0)).collect();
        let s = mixing::homogeneous(2).unwrap();
        let ctx =
            build_context(&persons, &grid, &s, &DistanceKernel::constant_one(), 5.0).unwrap();
        assert!((ctx.mu_max() - 49.0).abs() < 1e-9);
        assert!(validate_mu(&ctx).is_ok());

        // Doubling all fitness leaves the bound unchanged.
        let mut doubled: Vec<Person> = persons.clone();
        for p in &mut doubled {
            p.fitness *= 2.0;
        }
        let ctx2 =
            build_context(&doubled, &grid, &s, &DistanceKernel::constant_one(), 5.0).unwrap();
        assert!((ctx2.mu_max() - ctx.mu_max()).abs() < 1e-9);
    }

    #[test]
    fn zero_mixing_mass_is_degenerate() {
        let grid = Grid::new((0.0, 0.0), 1.0, 1, 1).unwrap();
        let persons: Vec<Person> = (0..4).map(|k| person(k, 0, 0, 1.0)).collect();
        let s = MixingMatrix::from_values(1, vec![0.0]).unwrap();
        assert!(matches!(
            build_context(&persons, &grid, &s, &DistanceKernel::constant_one(), 1.0),
            Err(Error::DegenerateModel(_))
        ));
    }

    #[test]
    fn infeasible_mu_is_rejected() {
        let grid = two_tile_grid();
        let persons = two_tile_population();
        let s = mixing::homogeneous(1).unwrap();
        let ctx =
            build_context(&persons, &grid, &s, &DistanceKernel::constant_one(), 10.0).unwrap();
        // mu_max = N - 1 = 4 here.
        match validate_mu(&ctx) {
            Err(Error::Infeasible { mu, mu_max }) => {
                assert_eq!(mu, 10.0);
                assert!((mu_max - 4.0).abs() < 1e-9);
            }
            other => panic!("expected infeasibility, got {other:?}"),
        }
        assert!(sample_friendship_edges(&ctx, 1).is_err());
    }

    #[test]
    fn oversized_mu_overflows_pair_probability() {
        let grid = Grid::new((0.0, 0.0), 1.0, 1, 1).unwrap();
        let persons: Vec<Person> = (0..10).map(|k| person(k, 0, 0, 1.0)).collect();
        let s = mixing::homogeneous(1).unwrap();
        let ctx =
            build_context(&persons, &grid, &s, &DistanceKernel::constant_one(), 20.0).unwrap();
        assert!(matches!(
            edge_probability(&ctx, 0, 1),
            Err(Error::ProbabilityOverflow { .. })
        ));
    }

    #[test]
    fn doubling_one_fitness_doubles_its_expected_degree_to_first_order() {
        let grid = Grid::new((0.0, 0.0), 1.0, 1, 1).unwrap();
        let mut persons: Vec<Person> = (0..800).map(|k| person(k, 0, 0, 1.0)).collect();
        let s = mixing::homogeneous(1).unwrap();
        let mu = 2.0;
        let base = build_context(&persons, &grid, &s, &DistanceKernel::constant_one(), mu)
            .unwrap();
        let before = expected_degree(&base, 0);
        persons[0].fitness = 2.0;
        let bumped = build_context(&persons, &grid, &s, &DistanceKernel::constant_one(), mu)
            .unwrap();
        let after = expected_degree(&bumped, 0);
        // Exactly 2x up to the O(1/N) renormalization of the group total.
        assert!(
            (after / before - 2.0).abs() < 0.01,
            "ratio {}",
            after / before
        );
    }

    #[test]
    fn expected_degree_matches_bruteforce_sum() {
        let grid = Grid::new((0.0, 0.0), 1.0, 2, 3).unwrap();
        let mut persons = Vec::new();
        for k in 0..90u32 {
            persons.push(person(k, k % 6, (k % 3) as u8, 1.0 + (k % 5) as f64));
        }
        let s = mixing::homogeneous(3).unwrap();
        let kernel = DistanceKernel::inverse_power(2.0).unwrap();
        let mu = 3.0;
        let ctx = build_context(&persons, &grid, &s, &kernel, mu).unwrap();
        validate_mu(&ctx).unwrap();
        let mut mean = 0.0;
        for u in 0..90u32 {
            let direct: f64 = (0..90u32)
                .filter(|&v| v != u)
                .map(|v| edge_probability(&ctx, u, v).unwrap())
                .sum();
            let fast = expected_degree(&ctx, u);
            assert!(
                (fast - direct).abs() <= 1e-9 * direct.max(1e-12),
                "vertex {u}: {fast} vs {direct}"
            );
            mean += fast;
        }
        mean /= 90.0;
        assert!((mean - mu).abs() <= 1e-9 * mu);
    }

    #[test]
    fn uniform_configuration_has_constant_expected_degree() {
        let grid = Grid::new((0.0, 0.0), 1.0, 1, 1).unwrap();
        let persons: Vec<Person> = (0..30).map(|k| person(k, 0, (k % 2) as u8, 1.0)).collect();
        let s = mixing::homogeneous(2).unwrap();
        let ctx =
            build_context(&persons, &grid, &s, &DistanceKernel::constant_one(), 4.0).unwrap();
        for u in 0..30u32 {
            assert!((expected_degree(&ctx, u) - 4.0).abs() < 1e-9);
        }
    }

    #[test]
    fn pair_probability_sum_is_half_mu_n() {
        let grid = Grid::new((0.0, 0.0), 1.0, 2, 2).unwrap();
        let mask = {
            let mut m = TileMask::all_active(&grid);
            m.set_population(0, 80).unwrap();
            m.set_population(1, 120).unwrap();
            m.set_population(2, 40).unwrap();
            m.set_population(3, 60).unwrap();
            m
        };
        let ages = AgeDistribution::new(vec![0, 18, 35, 65], vec![0.151, 0.169, 0.431, 0.249])
            .unwrap();
        let persons = synthesize_population(&mask, &ages, &FitnessSpec::standard_lognormal(), 5)
            .unwrap();
        let s = mixing::homogeneous(4).unwrap();
        let kernel = DistanceKernel::inverse_power(0.5).unwrap();
        let mu = 2.5;
        let ctx = build_context(&persons, &grid, &s, &kernel, mu).unwrap();
        let n = persons.len() as u32;
        let mut sum = 0.0;
        let mut compensation = 0.0;
        for u in 0..n {
            for v in (u + 1)..n {
                let term = edge_probability(&ctx, u, v).unwrap() - compensation;
                let t = sum + term;
                compensation = (t - sum) - term;
                sum = t;
            }
        }
        let expected = mu * n as f64 / 2.0;
        assert!(
            (sum - expected).abs() <= 1e-9 * expected,
            "sum {sum} vs {expected}"
        );
    }

    #[test]
    fn sampler_is_deterministic_and_canonical() {
        let grid = Grid::new((0.0, 0.0), 1.0, 2, 2).unwrap();
        let mut persons = Vec::new();
        for k in 0..500u32 {
            persons.push(person(k, k % 4, (k % 4) as u8, 1.0 + (k % 3) as f64));
        }
        let s = mixing::homogeneous(4).unwrap();
        let kernel = DistanceKernel::inverse_power(2.0).unwrap();
        let ctx = build_context(&persons, &grid, &s, &kernel, 4.0).unwrap();
        let e1 = sample_friendship_edges(&ctx, 99).unwrap();
        let e2 = sample_friendship_edges(&ctx, 99).unwrap();
        assert_eq!(e1, e2);
        assert!(e1.windows(2).all(|w| w[0] < w[1]));
        assert!(e1.iter().all(|&(u, v)| u < v));
        let e3 = sample_friendship_edges(&ctx, 100).unwrap();
        assert_ne!(e1, e3);
    }

    #[test]
    fn per_pair_inclusion_frequency_matches_probability() {
        // Micro-scale distribution check: across many seeds, each pair's
        // empirical inclusion frequency converges to its exact model
        // probability (heterogeneous fitness, two tiles, steep kernel).
        let grid = two_tile_grid();
        let persons: Vec<Person> = (0..10)
            .map(|k| person(k, k % 2, (k % 2) as u8, 1.0 + (k % 4) as f64 * 0.7))
            .collect();
        let s = mixing::homogeneous(2).unwrap();
        let kernel = DistanceKernel::inverse_power(2.0).unwrap();
        let ctx = build_context(&persons, &grid, &s, &kernel, 2.0).unwrap();
        validate_mu(&ctx).unwrap();
        let seeds = 6000u64;
        let mut hits = vec![0u32; 45];
        for seed in 0..seeds {
            for &(u, v) in &sample_friendship_edges(&ctx, seed).unwrap() {
                let idx = (0..u).map(|a| 9 - a as usize).sum::<usize>() + (v - u - 1) as usize;
                hits[idx] += 1;
            }
        }
        let mut idx = 0;
        for u in 0..10u32 {
            for v in (u + 1)..10 {
                let p = edge_probability(&ctx, u, v).unwrap();
                let freq = hits[idx] as f64 / seeds as f64;
                let sigma = (p * (1.0 - p) / seeds as f64).sqrt();
                assert!(
                    (freq - p).abs() <= 4.0 * sigma + 1e-9,
                    "pair ({u},{v}): freq {freq:.4} vs p {p:.4}"
                );
                idx += 1;
            }
        }
    }

    #[test]
    fn er_limit_edge_count_concentrates() {
        let grid = Grid::new((0.0, 0.0), 1.0, 1, 1).unwrap();
        let persons: Vec<Person> = (0..1000).map(|k| person(k, 0, (k % 4) as u8, 1.0)).collect();
        let s = mixing::homogeneous(4).unwrap();
        let mu = 5.0;
        let ctx =
            build_context(&persons, &grid, &s, &DistanceKernel::constant_one(), mu).unwrap();
        // mean 2500, 3 sigma ~ 150
        for seed in 0..5 {
            let edges = sample_friendship_edges(&ctx, seed).unwrap();
            let count = edges.len() as f64;
            assert!(
                (count - 2500.0).abs() <= 150.0,
                "seed {seed}: {count} edges"
            );
        }
    }
}
