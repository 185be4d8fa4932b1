#![allow(dead_code)] // shared across test targets; each uses a subset

//! Shared helpers for the acceptance suite: independent oracles,
//! statistical tests and fixture loading. Everything here stays separate
//! from the library's own sampling path so the two can be compared.

use std::path::{Path, PathBuf};

use rand::RngExt as _;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use citygraph::friendship::DistanceKernel;
use citygraph::geo::{Grid, TileMask};
use citygraph::mixing::MixingMatrix;
use citygraph::population::Person;

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// Grid matching the shipped city fixtures.
pub fn fixture_grid() -> Grid {
    Grid::new((43.72, 11.15), 1.0, 15, 12).unwrap()
}

/// Mask with the fixture's spatial shape rescaled to `target` residents
/// (largest-remainder rounding, so the total is exact).
pub fn scaled_fixture_mask(target: u64) -> TileMask {
    let grid = fixture_grid();
    let rows = citygraph::io::read_tiles_csv(&fixtures_dir().join("tiles.csv")).unwrap();
    let total: i64 = rows.iter().map(|r| r.population).sum();
    let mut mask = TileMask::all_active(&grid);
    let raw: Vec<(usize, f64)> = rows
        .iter()
        .map(|r| {
            let tile = grid.index(r.row, r.col).unwrap();
            (tile, target as f64 * r.population as f64 / total as f64)
        })
        .collect();
    let mut counts: Vec<(usize, u64, f64)> = raw
        .iter()
        .map(|&(t, x)| (t, x.floor() as u64, x - x.floor()))
        .collect();
    let assigned: u64 = counts.iter().map(|(_, c, _)| c).sum();
    let mut remainder = (target - assigned) as usize;
    counts.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap());
    for entry in counts.iter_mut() {
        if remainder == 0 {
            break;
        }
        entry.1 += 1;
        remainder -= 1;
    }
    for (tile, count, _) in counts {
        mask.set_population(tile, count).unwrap();
    }
    assert_eq!(mask.total_population(), target);
    mask
}

/// Independent per-pair Bernoulli oracle.
///
/// Recomputes every edge probability from the raw model quantities
/// (pair counts, mixing entries, brute-force attraction totals) without
/// touching the library's context or block decomposition, then tosses one
/// coin per vertex pair.
pub struct NaiveModel {
    prob_base: Vec<f64>,
    group_count: usize,
    groups: Vec<u8>,
    tiles: Vec<u32>,
    fitness: Vec<f64>,
    grid: Grid,
    kernel: DistanceKernel,
}

impl NaiveModel {
    pub fn new(
        persons: &[Person],
        grid: &Grid,
        s: &MixingMatrix,
        kernel: &DistanceKernel,
        mu: f64,
    ) -> NaiveModel {
        let n = s.group_count();
        let big_n = persons.len() as f64;
        let mut sizes = vec![0u64; n];
        for p in persons {
            sizes[p.group as usize] += 1;
        }
        // Pair counts straight from the definition.
        let mut pairs = vec![0.0f64; n * n];
        for i in 0..n {
            for j in 0..n {
                pairs[i * n + j] = if i == j {
                    sizes[i] as f64 * (sizes[i] as f64 - 1.0) / 2.0
                } else {
                    sizes[i] as f64 * sizes[j] as f64
                };
            }
        }
        let mut total_mixing = 0.0;
        for i in 0..n {
            for j in i..n {
                total_mixing += pairs[i * n + j] * s.get(i, j);
            }
        }
        // Brute-force attraction totals over all vertex pairs.
        let mut attraction = vec![0.0f64; n * n];
        for u in 0..persons.len() {
            for v in (u + 1)..persons.len() {
                let (pu, pv) = (&persons[u], &persons[v]);
                let d = grid
                    .distance(pu.tile as usize, pv.tile as usize)
                    .unwrap();
                let a = kernel.eval(d) * (pu.fitness * pv.fitness);
                let (i, j) = (
                    (pu.group.min(pv.group)) as usize,
                    (pu.group.max(pv.group)) as usize,
                );
                attraction[i * n + j] += a;
            }
        }
        let mut prob_base = vec![0.0f64; n * n];
        for i in 0..n {
            for j in i..n {
                let m = pairs[i * n + j] * s.get(i, j);
                if m > 0.0 && attraction[i * n + j] > 0.0 {
                    let base = mu * big_n / 2.0 * (m / total_mixing) / attraction[i * n + j];
                    prob_base[i * n + j] = base;
                    prob_base[j * n + i] = base;
                }
            }
        }
        NaiveModel {
            prob_base,
            group_count: n,
            groups: persons.iter().map(|p| p.group).collect(),
            tiles: persons.iter().map(|p| p.tile).collect(),
            fitness: persons.iter().map(|p| p.fitness).collect(),
            grid: grid.clone(),
            kernel: kernel.clone(),
        }
    }

    pub fn probability(&self, u: usize, v: usize) -> f64 {
        let d = self
            .grid
            .distance(self.tiles[u] as usize, self.tiles[v] as usize)
            .unwrap();
        self.prob_base[self.groups[u] as usize * self.group_count + self.groups[v] as usize]
            * self.kernel.eval(d)
            * (self.fitness[u] * self.fitness[v])
    }

    /// Kahan-compensated sum of all pair probabilities.
    pub fn probability_sum(&self) -> f64 {
        let mut sum = 0.0;
        let mut compensation = 0.0;
        for u in 0..self.groups.len() {
            for v in (u + 1)..self.groups.len() {
                let term = self.probability(u, v) - compensation;
                let t = sum + term;
                compensation = (t - sum) - term;
                sum = t;
            }
        }
        sum
    }

    /// One coin per pair, in fixed pair order, from a dedicated stream.
    pub fn sample(&self, seed: u64) -> Vec<(u32, u32)> {
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&0xBEEF_u64.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        let mut edges = Vec::new();
        for u in 0..self.groups.len() {
            for v in (u + 1)..self.groups.len() {
                if rng.random::<f64>() < self.probability(u, v) {
                    edges.push((u as u32, v as u32));
                }
            }
        }
        edges
    }

    /// Block key of a pair: normalized (group pair, tile pair).
    pub fn block_of(&self, u: usize, v: usize) -> (u8, u8, u32, u32) {
        let (gu, gv) = (self.groups[u], self.groups[v]);
        let (tu, tv) = (self.tiles[u], self.tiles[v]);
        if gu < gv {
            (gu, gv, tu, tv)
        } else if gv < gu {
            (gv, gu, tv, tu)
        } else {
            (gu, gv, tu.min(tv), tu.max(tv))
        }
    }
}

/// Two-sample Kolmogorov-Smirnov p-value (asymptotic), for equal-weight
/// samples of possibly different sizes.
pub fn ks_two_sample_p(a: &[f64], b: &[f64]) -> f64 {
    let mut xs: Vec<f64> = a.to_vec();
    let mut ys: Vec<f64> = b.to_vec();
    xs.sort_by(|p, q| p.partial_cmp(q).unwrap());
    ys.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let mut d: f64 = 0.0;
    let (mut i, mut j) = (0usize, 0usize);
    while i < xs.len() && j < ys.len() {
        let x = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= x {
            i += 1;
        }
        while j < ys.len() && ys[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let ne = (n * m / (n + m)).sqrt();
    let lambda = (ne + 0.12 + 0.11 / ne) * d;
    // Q_KS(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2)
    let mut p = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64 * lambda).powi(2)).exp();
        p += 2.0 * sign * term;
        sign = -sign;
        if term < 1e-12 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

/// Upper 1% critical value of the chi-square distribution, per degrees of
/// freedom (standard table values).
pub fn chi2_crit_1pct(df: usize) -> f64 {
    const TABLE: [f64; 16] = [
        0.0, 6.635, 9.210, 11.345, 13.277, 15.086, 16.812, 18.475, 20.090, 21.666, 23.209, 24.725,
        26.217, 27.688, 29.141, 30.578,
    ];
    TABLE[df]
}

/// Peak resident set size of this process in bytes: VmHWM when the kernel
/// exposes it, getrusage otherwise.
pub fn peak_memory_bytes() -> Option<u64> {
    if let Ok(status) = std::fs::read_to_string("/proc/self/status") {
        for line in status.lines() {
            if let Some(rest) = line.strip_prefix("VmHWM:") {
                if let Ok(kb) = rest.trim().trim_end_matches(" kB").trim().parse::<u64>() {
                    return Some(kb * 1024);
                }
            }
        }
    }
    let mut usage = std::mem::MaybeUninit::<libc::rusage>::zeroed();
    let rc = unsafe { libc::getrusage(libc::RUSAGE_SELF, usage.as_mut_ptr()) };
    if rc == 0 {
        let usage = unsafe { usage.assume_init() };
        if usage.ru_maxrss > 0 {
            // ru_maxrss is in KiB on Linux.
            return Some(usage.ru_maxrss as u64 * 1024);
        }
    }
    None
}

/// Household invariant checks shared by the acceptance criteria; panics
/// with the violated invariant.
pub fn check_household_invariants(
    persons: &[Person],
    set: &citygraph::households::HouseholdSet,
) {
    use citygraph::households::RoleKind;
    let mut seen = vec![false; persons.len()];
    for h in &set.households {
        assert!(!h.members.is_empty(), "empty household {}", h.id);
        let tile = persons[h.members[0] as usize].tile;
        let mut parents: Vec<u8> = Vec::new();
        let mut children: Vec<u8> = Vec::new();
        let mut peers: Vec<u8> = Vec::new();
        for &m in &h.members {
            assert!(!seen[m as usize], "person {m} in two households");
            seen[m as usize] = true;
            let p = &persons[m as usize];
            assert_eq!(p.tile, tile, "household {} spans tiles", h.id);
            match p.role.expect("role assigned").kind {
                RoleKind::Parent => parents.push(p.group),
                RoleKind::Child => children.push(p.group),
                RoleKind::Peer => peers.push(p.group),
                _ => {}
            }
        }
        for c in &children {
            for p in &parents {
                assert!(c < p, "child group {c} not strictly below parent group {p}");
            }
        }
        if parents.len() == 2 {
            assert!(parents[0].abs_diff(parents[1]) <= 1, "partners too far apart");
        }
        if peers.len() == 2 {
            assert!(peers[0].abs_diff(peers[1]) <= 1, "couple too far apart");
        }
    }
    for &u in &set.unassigned {
        assert!(!seen[u as usize], "unassigned person {u} is in a household");
        seen[u as usize] = true;
    }
    assert!(
        seen.iter().all(|s| *s),
        "some person neither placed nor reported unassigned"
    );
}

pub struct CriterionTimer {
    start: std::time::Instant,
}

impl CriterionTimer {
    pub fn start() -> CriterionTimer {
        CriterionTimer {
            start: std::time::Instant::now(),
        }
    }

    pub fn elapsed_secs(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }
}

/// One pass/fail line per criterion, matching the suite's output contract.
pub fn report(criterion: &str, pass: bool, details: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("[{tag}] {criterion}: {details}");
    assert!(pass, "{criterion}: {details}");
}
