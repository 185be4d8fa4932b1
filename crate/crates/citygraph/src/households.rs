//! Household synthesis: roles by age, household composition per tile, and
//! the clique edge layer.
//!
//! Composition runs independently inside each tile (households never span
//! tiles) in five phases: partner matching for two-parent families, size
//! draws, round-robin child claiming, partner matching for couples, and
//! the residual "various" households. Shortages never abort a run; people
//! that cannot be placed are collected as unassigned and reported.

use std::collections::HashMap;

use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::population::Person;
use crate::rng::{self, domain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HouseholdType {
    Singles,
    SingleParent,
    Couples,
    TwoParents,
    Various,
}

impl HouseholdType {
    pub const ALL: [HouseholdType; 5] = [
        HouseholdType::Singles,
        HouseholdType::SingleParent,
        HouseholdType::Couples,
        HouseholdType::TwoParents,
        HouseholdType::Various,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            HouseholdType::Singles => "singles",
            HouseholdType::SingleParent => "single-parent",
            HouseholdType::Couples => "couples",
            HouseholdType::TwoParents => "two-parents",
            HouseholdType::Various => "various",
        }
    }

    pub fn parse(s: &str) -> Result<HouseholdType> {
        HouseholdType::ALL
            .iter()
            .copied()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown household type `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoleKind {
    Single,
    Parent,
    Child,
    Peer,
    Various,
}

impl RoleKind {
    pub fn name(&self) -> &'static str {
        match self {
            RoleKind::Single => "single",
            RoleKind::Parent => "parent",
            RoleKind::Child => "child",
            RoleKind::Peer => "peer",
            RoleKind::Various => "various",
        }
    }

    pub fn parse(s: &str) -> Result<RoleKind> {
        [
            RoleKind::Single,
            RoleKind::Parent,
            RoleKind::Child,
            RoleKind::Peer,
            RoleKind::Various,
        ]
        .iter()
        .copied()
        .find(|k| k.name() == s)
        .ok_or_else(|| Error::Config(format!("unknown role `{s}`")))
    }
}

/// A (household-type, role) pair; only the seven combinations that occur
/// in the census tables are valid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Role {
    pub household_type: HouseholdType,
    pub kind: RoleKind,
}

pub const ROLES: [Role; 7] = [
    Role { household_type: HouseholdType::Singles, kind: RoleKind::Single },
    Role { household_type: HouseholdType::SingleParent, kind: RoleKind::Parent },
    Role { household_type: HouseholdType::SingleParent, kind: RoleKind::Child },
    Role { household_type: HouseholdType::Couples, kind: RoleKind::Peer },
    Role { household_type: HouseholdType::TwoParents, kind: RoleKind::Parent },
    Role { household_type: HouseholdType::TwoParents, kind: RoleKind::Child },
    Role { household_type: HouseholdType::Various, kind: RoleKind::Various },
];

const SINGLES_SINGLE: usize = 0;
const SP_PARENT: usize = 1;
const SP_CHILD: usize = 2;
const COUPLES_PEER: usize = 3;
const TP_PARENT: usize = 4;
const TP_CHILD: usize = 5;
const VARIOUS_VARIOUS: usize = 6;

impl Role {
    pub fn new(household_type: HouseholdType, kind: RoleKind) -> Result<Role> {
        let role = Role {
            household_type,
            kind,
        };
        role.index().map(|_| role)
    }

    pub fn index(&self) -> Result<usize> {
        ROLES
            .iter()
            .position(|r| r == self)
            .ok_or_else(|| {
                Error::Config(format!(
                    "role `{}` is not valid for household type `{}`",
                    self.kind.name(),
                    self.household_type.name()
                ))
            })
    }
}

/// Conditional distribution of roles given the age group.
#[derive(Debug, Clone)]
pub struct RoleTable {
    /// `probs[g][r]` = Pr[role r | age group g], r indexing `ROLES`.
    probs: Vec<[f64; 7]>,
}

impl RoleTable {
    pub fn new(probs: Vec<[f64; 7]>) -> Result<RoleTable> {
        if probs.is_empty() {
            return Err(Error::Config("role table has no age groups".into()));
        }
        for (g, row) in probs.iter().enumerate() {
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::Config(format!(
                    "role probabilities for age group {g} must be nonnegative"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "role probabilities for age group {g} sum to {sum}, expected 1"
                )));
            }
        }
        Ok(RoleTable { probs })
    }

    /// Builds the table from sparse `(age_group, role, probability)` rows;
    /// unlisted roles get probability zero.
    pub fn from_rows(group_count: usize, rows: &[(usize, Role, f64)]) -> Result<RoleTable> {
        let mut probs = vec![[0.0; 7]; group_count];
        for &(g, role, p) in rows {
            if g >= group_count {
                return Err(Error::Config(format!(
                    "role table references age group {g}, but only {group_count} groups exist"
                )));
            }
            probs[g][role.index()?] += p;
        }
        RoleTable::new(probs)
    }

    pub fn group_count(&self) -> usize {
        self.probs.len()
    }

    pub fn prob(&self, group: usize, role_index: usize) -> f64 {
        self.probs[group][role_index]
    }
}

/// Distribution of the number of members per household type.
#[derive(Debug, Clone)]
pub struct SizeTable {
    /// Per household type: `(size, probability)` rows, sizes ascending.
    sizes: HashMap<HouseholdType, Vec<(usize, f64)>>,
}

impl SizeTable {
    pub fn from_rows(rows: &[(HouseholdType, usize, f64)]) -> Result<SizeTable> {
        let mut sizes: HashMap<HouseholdType, Vec<(usize, f64)>> = HashMap::new();
        for &(t, k, p) in rows {
            if k == 0 {
                return Err(Error::Config("household size 0 is invalid".into()));
            }
            if !p.is_finite() || p < 0.0 {
                return Err(Error::Config(format!(
                    "size probability for `{}` must be nonnegative",
                    t.name()
                )));
            }
            sizes.entry(t).or_default().push((k, p));
        }
        for t in HouseholdType::ALL {
            let rows = sizes
                .get_mut(&t)
                .ok_or_else(|| Error::Config(format!("size table misses type `{}`", t.name())))?;
            rows.sort_by_key(|(k, _)| *k);
            let sum: f64 = rows.iter().map(|(_, p)| p).sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "size probabilities for `{}` sum to {sum}, expected 1",
                    t.name()
                )));
            }
            let min_size = rows.iter().find(|(_, p)| *p > 0.0).map(|(k, _)| *k).unwrap_or(0);
            let valid = match t {
                HouseholdType::Singles => rows
                    .iter()
                    .all(|(k, p)| (*k == 1 && (*p - 1.0).abs() <= 1e-9) || *p == 0.0),
                HouseholdType::Couples => rows
                    .iter()
                    .all(|(k, p)| (*k == 2 && (*p - 1.0).abs() <= 1e-9) || *p == 0.0),
                HouseholdType::TwoParents => min_size >= 3,
                HouseholdType::SingleParent => min_size >= 2,
                HouseholdType::Various => min_size >= 1,
            };
            if !valid {
                return Err(Error::Config(format!(
                    "size distribution for `{}` violates its structural bounds",
                    t.name()
                )));
            }
        }
        Ok(SizeTable { sizes })
    }

    pub fn rows(&self, t: HouseholdType) -> &[(usize, f64)] {
        &self.sizes[&t]
    }

    pub fn expected_size(&self, t: HouseholdType) -> f64 {
        self.sizes[&t]
            .iter()
            .map(|(k, p)| *k as f64 * p)
            .sum()
    }

    fn sampler(&self, t: HouseholdType) -> Result<(Vec<usize>, WeightedIndex<f64>)> {
        let rows = &self.sizes[&t];
        let ks: Vec<usize> = rows.iter().map(|(k, _)| *k).collect();
        let w = WeightedIndex::new(rows.iter().map(|(_, p)| *p))
            .map_err(|e| Error::Config(format!("size table for `{}`: {e}", t.name())))?;
        Ok((ks, w))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Household {
    pub id: u32,
    pub household_type: HouseholdType,
    /// Member ids, ascending.
    pub members: Vec<u32>,
}

#[derive(Debug, Clone)]
pub struct HouseholdSet {
    pub households: Vec<Household>,
    pub unassigned: Vec<u32>,
}

impl HouseholdSet {
    pub fn assigned_count(&self) -> usize {
        self.households.iter().map(|h| h.members.len()).sum()
    }

    /// Average degree of the clique layer: `sum k(k-1) / N`.
    pub fn household_layer_degree(&self, population: usize) -> f64 {
        let twice_edges: usize = self
            .households
            .iter()
            .map(|h| h.members.len() * (h.members.len() - 1))
            .sum();
        twice_edges as f64 / population as f64
    }
}

/// Draws a household role for every person, conditioned on the age group.
pub fn assign_roles(population: &mut [Person], table: &RoleTable, seed: u64) -> Result<()> {
    let n = table.group_count();
    if let Some(p) = population.iter().find(|p| p.group as usize >= n) {
        return Err(Error::Config(format!(
            "age group {} of person {} is missing from the role table",
            p.group, p.id
        )));
    }
    let pickers: Vec<WeightedIndex<f64>> = (0..n)
        .map(|g| {
            WeightedIndex::new((0..7).map(|r| table.prob(g, r)))
                .map_err(|e| Error::Config(format!("role table row {g}: {e}")))
        })
        .collect::<Result<_>>()?;

    // Group persons by tile so each tile consumes its own stream.
    let mut by_tile: HashMap<u32, Vec<usize>> = HashMap::new();
    for (idx, p) in population.iter().enumerate() {
        by_tile.entry(p.tile).or_default().push(idx);
    }
    let mut tiles: Vec<(u32, Vec<usize>)> = by_tile.into_iter().collect();
    tiles.sort_by_key(|(t, _)| *t);

    let assignments: Vec<Vec<(usize, Role)>> = tiles
        .par_iter()
        .map(|(tile, idxs)| {
            let mut rng = rng::stream(seed, domain::ROLES, *tile as u64, 0);
            idxs.iter()
                .map(|&idx| {
                    let g = population[idx].group as usize;
                    (idx, ROLES[pickers[g].sample(&mut rng)])
                })
                .collect()
        })
        .collect();
    for chunk in assignments {
        for (idx, role) in chunk {
            population[idx].role = Some(role);
        }
    }
    Ok(())
}

/// A pool of person ids supporting O(1) removal by position or by id.
#[derive(Default)]
struct Pool {
    ids: Vec<u32>,
    pos: HashMap<u32, usize>,
}

impl Pool {
    fn push(&mut self, id: u32) {
        self.pos.insert(id, self.ids.len());
        self.ids.push(id);
    }

    fn len(&self) -> usize {
        self.ids.len()
    }

    fn remove_at(&mut self, idx: usize) -> u32 {
        let id = self.ids.swap_remove(idx);
        self.pos.remove(&id);
        if idx < self.ids.len() {
            self.pos.insert(self.ids[idx], idx);
        }
        id
    }

    fn remove_id(&mut self, id: u32) -> bool {
        match self.pos.get(&id).copied() {
            Some(idx) => {
                self.remove_at(idx);
                true
            }
            None => false,
        }
    }
}

/// Uniform draw over the union of `pools[lo..=hi]`, removing the pick.
fn pick_from_groups(pools: &mut [Pool], lo: usize, hi: usize, rng: &mut ChaCha8Rng) -> Option<u32> {
    let total: usize = pools[lo..=hi].iter().map(Pool::len).sum();
    if total == 0 {
        return None;
    }
    let mut r = rng.random_range(0..total);
    for pool in &mut pools[lo..=hi] {
        if r < pool.len() {
            return Some(pool.remove_at(r));
        }
        r -= pool.len();
    }
    unreachable!("weighted pick within total");
}

struct PendingFamily {
    household_type: HouseholdType,
    members: Vec<u32>,
    children_needed: usize,
    min_parent_group: usize,
    child_role: usize,
}

struct TileOutcome {
    households: Vec<(HouseholdType, Vec<u32>)>,
    unassigned: Vec<u32>,
}

fn build_tile(
    member_idxs: &[usize],
    population: &[Person],
    group_count: usize,
    samplers: &HashMap<HouseholdType, (Vec<usize>, WeightedIndex<f64>)>,
    mut rng: ChaCha8Rng,
) -> TileOutcome {
    let mut pools: Vec<Vec<Pool>> = (0..7)
        .map(|_| (0..group_count).map(|_| Pool::default()).collect())
        .collect();
    let mut singles = Vec::new();
    let mut tp_parents = Vec::new();
    let mut sp_parents = Vec::new();
    let mut couple_peers = Vec::new();
    for &idx in member_idxs {
        let p = &population[idx];
        let role = p.role.expect("roles assigned before household construction");
        let r = role.index().expect("stored roles are valid");
        match r {
            SINGLES_SINGLE => singles.push(p.id),
            TP_PARENT => tp_parents.push(p.id),
            SP_PARENT => sp_parents.push(p.id),
            COUPLES_PEER => couple_peers.push(p.id),
            _ => {}
        }
        pools[r][p.group as usize].push(p.id);
    }

    let mut households: Vec<(HouseholdType, Vec<u32>)> = Vec::new();
    let mut unassigned: Vec<u32> = Vec::new();
    let group_of = |id: u32| population[id as usize].group as usize;

    // Singles form their own household outright.
    for id in singles {
        pools[SINGLES_SINGLE][group_of(id)].remove_id(id);
        households.push((HouseholdType::Singles, vec![id]));
    }

    // Two-parent partner matching plus size draws.
    let (tp_sizes, tp_weights) = &samplers[&HouseholdType::TwoParents];
    let (sp_sizes, sp_weights) = &samplers[&HouseholdType::SingleParent];
    let mut pending: Vec<PendingFamily> = Vec::new();
    tp_parents.shuffle(&mut rng);
    for u in tp_parents {
        let g = group_of(u);
        if !pools[TP_PARENT][g].remove_id(u) {
            continue; // already matched as someone's partner
        }
        let lo = g.saturating_sub(1);
        let hi = (g + 1).min(group_count - 1);
        match pick_from_groups(&mut pools[TP_PARENT], lo, hi, &mut rng) {
            Some(v) => {
                let k = tp_sizes[tp_weights.sample(&mut rng)];
                pending.push(PendingFamily {
                    household_type: HouseholdType::TwoParents,
                    min_parent_group: g.min(group_of(v)),
                    members: vec![u, v],
                    children_needed: k.saturating_sub(2),
                    child_role: TP_CHILD,
                });
            }
            None => unassigned.push(u),
        }
    }
    sp_parents.shuffle(&mut rng);
    for u in sp_parents {
        let g = group_of(u);
        pools[SP_PARENT][g].remove_id(u);
        let k = sp_sizes[sp_weights.sample(&mut rng)];
        pending.push(PendingFamily {
            household_type: HouseholdType::SingleParent,
            min_parent_group: g,
            members: vec![u],
            children_needed: k.saturating_sub(1),
            child_role: SP_CHILD,
        });
    }

    // Round-robin child claiming: in round i every family still owed an
    // i-th child picks one eligible child, in fresh random order.
    let max_rounds = pending.iter().map(|f| f.children_needed).max().unwrap_or(0);
    for round in 1..=max_rounds {
        let mut order: Vec<usize> = (0..pending.len())
            .filter(|&i| pending[i].children_needed >= round)
            .collect();
        order.shuffle(&mut rng);
        for i in order {
            let fam = &mut pending[i];
            if fam.min_parent_group == 0 {
                continue; // children must be strictly younger than every parent
            }
            if let Some(w) = pick_from_groups(
                &mut pools[fam.child_role],
                0,
                fam.min_parent_group - 1,
                &mut rng,
            ) {
                fam.members.push(w);
            }
        }
    }
    for fam in pending {
        match fam.household_type {
            // A single parent that found no child cannot form a household.
            HouseholdType::SingleParent if fam.members.len() == 1 => {
                unassigned.push(fam.members[0]);
            }
            _ => households.push((fam.household_type, fam.members)),
        }
    }

    // Couples.
    couple_peers.shuffle(&mut rng);
    for u in couple_peers {
        let g = group_of(u);
        if !pools[COUPLES_PEER][g].remove_id(u) {
            continue;
        }
        let lo = g.saturating_sub(1);
        let hi = (g + 1).min(group_count - 1);
        match pick_from_groups(&mut pools[COUPLES_PEER], lo, hi, &mut rng) {
            Some(v) => households.push((HouseholdType::Couples, vec![u, v])),
            None => unassigned.push(u),
        }
    }

    // Various households: sample sizes and fill uniformly from the pool;
    // a short final household is kept as long as one member remains.
    let (va_sizes, va_weights) = &samplers[&HouseholdType::Various];
    let mut various: Vec<u32> = Vec::new();
    for pool in &pools[VARIOUS_VARIOUS] {
        various.extend(pool.ids.iter().copied());
    }
    while !various.is_empty() {
        let k = va_sizes[va_weights.sample(&mut rng)];
        let take = k.min(various.len());
        let mut members = Vec::with_capacity(take);
        for _ in 0..take {
            members.push(various.swap_remove(rng.random_range(0..various.len())));
        }
        households.push((HouseholdType::Various, members));
    }

    // Unclaimed children stay unassigned.
    for role in [SP_CHILD, TP_CHILD] {
        for pool in &pools[role] {
            unassigned.extend(pool.ids.iter().copied());
        }
    }

    for (_, members) in &mut households {
        members.sort_unstable();
    }
    unassigned.sort_unstable();
    TileOutcome {
        households,
        unassigned,
    }
}

/// Groups the population into households following the per-tile heuristic;
/// persons receive their household id in place.
pub fn build_households(
    population: &mut [Person],
    sizes: &SizeTable,
    seed: u64,
) -> Result<HouseholdSet> {
    if population.iter().any(|p| p.role.is_none()) {
        return Err(Error::Config(
            "household construction requires roles to be assigned first".into(),
        ));
    }
    // Persons are addressed by id inside the tile builder.
    if population
        .iter()
        .enumerate()
        .any(|(idx, p)| p.id as usize != idx)
    {
        return Err(Error::Data(
            "population ids must be dense and ordered".into(),
        ));
    }
    let group_count = population.iter().map(|p| p.group as usize).max().unwrap_or(0) + 1;
    let samplers: HashMap<HouseholdType, (Vec<usize>, WeightedIndex<f64>)> = HouseholdType::ALL
        .iter()
        .map(|&t| Ok((t, sizes.sampler(t)?)))
        .collect::<Result<_>>()?;

    let mut by_tile: HashMap<u32, Vec<usize>> = HashMap::new();
    for (idx, p) in population.iter().enumerate() {
        by_tile.entry(p.tile).or_default().push(idx);
    }
    let mut tiles: Vec<(u32, Vec<usize>)> = by_tile.into_iter().collect();
    tiles.sort_by_key(|(t, _)| *t);

    let outcomes: Vec<TileOutcome> = tiles
        .par_iter()
        .map(|(tile, idxs)| {
            build_tile(
                idxs,
                population,
                group_count,
                &samplers,
                rng::stream(seed, domain::HOUSEHOLDS, *tile as u64, 0),
            )
        })
        .collect();

    let mut set = HouseholdSet {
        households: Vec::new(),
        unassigned: Vec::new(),
    };
    for outcome in outcomes {
        for (household_type, members) in outcome.households {
            let id = set.households.len() as u32;
            for &m in &members {
                population[m as usize].household = Some(id);
            }
            set.households.push(Household {
                id,
                household_type,
                members,
            });
        }
        set.unassigned.extend(outcome.unassigned);
    }
    Ok(set)
}

/// Clique edges: within each household every pair of members is linked.
pub fn household_edges(set: &HouseholdSet) -> Vec<(u32, u32)> {
    let mut edges = Vec::new();
    for h in &set.households {
        for (a_idx, &a) in h.members.iter().enumerate() {
            for &b in &h.members[a_idx + 1..] {
                edges.push((a.min(b), a.max(b)));
            }
        }
    }
    edges
}
