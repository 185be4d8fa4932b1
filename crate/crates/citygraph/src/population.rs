//! Vertex synthesis: tile placement, age labels and sociability fitness.
//!
//! Tile counts are treated as ground truth and reproduced exactly; age
//! groups and fitness scores are sampled independently per person. Each
//! tile consumes its own RNG stream, so synthesis parallelizes over tiles
//! without losing determinism.

use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_distr::{LogNormal, Normal, Pareto, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::TileMask;
use crate::households::Role;
use crate::rng::{self, domain};

/// Age stratification: cut points and the probability of each group.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgeDistribution {
    breaks: Vec<u32>,
    probs: Vec<f64>,
}

impl AgeDistribution {
    pub fn new(breaks: Vec<u32>, probs: Vec<f64>) -> Result<AgeDistribution> {
        if probs.is_empty() || breaks.len() != probs.len() {
            return Err(Error::Config(format!(
                "age distribution needs matching breaks and fractions, got {} and {}",
                breaks.len(),
                probs.len()
            )));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Config(
                "age-group fractions must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "age-group fractions must sum to 1, got {total}"
            )));
        }
        if breaks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "age breaks must be strictly increasing".into(),
            ));
        }
        Ok(AgeDistribution { breaks, probs })
    }

    pub fn uniform(n: usize) -> Result<AgeDistribution> {
        if n == 0 {
            return Err(Error::Config("need at least one age group".into()));
        }
        let breaks = (0..n as u32).map(|g| g * 20).collect();
        AgeDistribution::new(breaks, vec![1.0 / n as f64; n])
    }

    pub fn group_count(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn breaks(&self) -> &[u32] {
        &self.breaks
    }

    /// Same cut points, different group fractions.
    pub fn with_probs(&self, probs: Vec<f64>) -> Result<AgeDistribution> {
        AgeDistribution::new(self.breaks.clone(), probs)
    }
}

/// Sociability fitness distribution. Every supported kind keeps the
/// support in `[1, +inf)` so expected degrees stay bounded away from zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FitnessSpec {
    Constant {
        value: f64,
    },
    /// `shift + LN(lambda, sigma_sq)`, with lambda and sigma_sq the mean
    /// and variance of the associated Normal distribution (not of the
    /// Lognormal itself).
    ShiftedLognormal {
        lambda: f64,
        sigma_sq: f64,
        #[serde(default = "default_shift")]
        shift: f64,
    },
    Pareto {
        scale: f64,
        shape: f64,
    },
    Uniform {
        low: f64,
        high: f64,
    },
}

fn default_shift() -> f64 {
    1.0
}

impl FitnessSpec {
    /// Short comma-free tag for file names and CSV cells.
    pub fn label(&self) -> String {
        match self {
            FitnessSpec::Constant { value } => format!("const({value})"),
            FitnessSpec::ShiftedLognormal {
                lambda,
                sigma_sq,
                shift,
            } => format!("{shift}+LN({lambda:.4};{sigma_sq})"),
            FitnessSpec::Pareto { scale, shape } => format!("pareto({scale};{shape})"),
            FitnessSpec::Uniform { low, high } => format!("uniform({low};{high})"),
        }
    }

    pub fn standard_lognormal() -> FitnessSpec {
        FitnessSpec::ShiftedLognormal {
            lambda: std::f64::consts::LN_2,
            sigma_sq: 0.25,
            shift: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            FitnessSpec::Constant { value } => *value >= 1.0 && value.is_finite(),
            FitnessSpec::ShiftedLognormal {
                lambda,
                sigma_sq,
                shift,
            } => lambda.is_finite() && *sigma_sq >= 0.0 && sigma_sq.is_finite() && *shift >= 1.0,
            FitnessSpec::Pareto { scale, shape } => *scale >= 1.0 && *shape > 0.0,
            FitnessSpec::Uniform { low, high } => *low >= 1.0 && high >= low,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "fitness spec violates the support requirement f >= 1: {self:?}"
            )))
        }
    }

    fn sampler(&self) -> Result<FitnessSampler> {
        self.validate()?;
        Ok(match *self {
            FitnessSpec::Constant { value } => FitnessSampler::Constant(value),
            FitnessSpec::ShiftedLognormal {
                lambda,
                sigma_sq,
                shift,
            } => FitnessSampler::Lognormal {
                dist: LogNormal::new(lambda, sigma_sq.sqrt())
                    .map_err(|e| Error::Config(format!("lognormal parameters: {e}")))?,
                shift,
            },
            FitnessSpec::Pareto { scale, shape } => FitnessSampler::Pareto(
                Pareto::new(scale, shape)
                    .map_err(|e| Error::Config(format!("pareto parameters: {e}")))?,
            ),
            FitnessSpec::Uniform { low, high } => FitnessSampler::Uniform(
                Uniform::new_inclusive(low, high)
                    .map_err(|e| Error::Config(format!("uniform parameters: {e}")))?,
            ),
        })
    }
}

enum FitnessSampler {
    Constant(f64),
    Lognormal { dist: LogNormal<f64>, shift: f64 },
    Pareto(Pareto<f64>),
    Uniform(Uniform<f64>),
}

impl FitnessSampler {
    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            FitnessSampler::Constant(v) => *v,
            FitnessSampler::Lognormal { dist, shift } => shift + dist.sample(rng),
            FitnessSampler::Pareto(d) => d.sample(rng),
            FitnessSampler::Uniform(d) => d.sample(rng),
        }
    }
}

/// One synthesized individual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Person {
    pub id: u32,
    /// Tile of residence (always an active tile).
    pub tile: u32,
    /// Age-group label in `0..n`.
    pub group: u8,
    /// Sociability fitness, `>= 1` for the supported specs.
    pub fitness: f64,
    /// Household role, assigned by the household module.
    pub role: Option<Role>,
    pub household: Option<u32>,
}

/// Draws the full population prescribed by the mask: per-tile counts are
/// matched exactly, ages and fitness are i.i.d.
pub fn synthesize_population(
    mask: &TileMask,
    ages: &AgeDistribution,
    fitness: &FitnessSpec,
    seed: u64,
) -> Result<Vec<Person>> {
    let total = mask.total_population();
    if total == 0 {
        return Err(Error::EmptyPopulation);
    }
    if total > u32::MAX as u64 {
        return Err(Error::InvalidParameter(format!(
            "population {total} exceeds the supported maximum"
        )));
    }
    if ages.group_count() > u8::MAX as usize + 1 {
        return Err(Error::Config("too many age groups".into()));
    }
    fitness.validate()?;
    let group_picker = WeightedIndex::new(ages.probs())
        .map_err(|e| Error::Config(format!("age distribution: {e}")))?;

    let tiles: Vec<usize> = mask.populated_tiles().collect();
    let mut offsets = Vec::with_capacity(tiles.len());
    let mut next = 0u64;
    for &t in &tiles {
        offsets.push(next);
        next += mask.population(t);
    }

    let chunks: Vec<Vec<Person>> = tiles
        .par_iter()
        .zip(offsets.par_iter())
        .map(|(&tile, &offset)| {
            let mut rng = rng::stream(seed, domain::POPULATION, tile as u64, 0);
            let sampler = fitness.sampler().expect("validated above");
            let count = mask.population(tile);
            (0..count)
                .map(|k| Person {
                    id: (offset + k) as u32,
                    tile: tile as u32,
                    group: group_picker.sample(&mut rng) as u8,
                    fitness: sampler.sample(&mut rng),
                    role: None,
                    household: None,
                })
                .collect()
        })
        .collect();

    Ok(chunks.into_iter().flatten().collect())
}

/// Redistributes the mask population uniformly at random over the active
/// tiles that are non-empty in the input data, keeping the total size.
pub fn uniform_density_mask(mask: &TileMask, seed: u64) -> Result<TileMask> {
    let total = mask.total_population();
    if total == 0 {
        return Err(Error::EmptyPopulation);
    }
    let candidates: Vec<usize> = mask.populated_tiles().collect();
    let mut counts = vec![0u64; candidates.len()];
    let mut rng = rng::stream(seed, domain::UNIFORM_TILES, 0, 0);
    for _ in 0..total {
        counts[rng.random_range(0..candidates.len())] += 1;
    }
    let mut out = mask.clone();
    for &t in &candidates {
        out.set_population(t, 0)?;
    }
    for (&t, &c) in candidates.iter().zip(counts.iter()) {
        out.set_population(t, c)?;
    }
    Ok(out)
}

/// Perturbs each group fraction by an independent relative noise term
/// drawn from the symmetric two-component normal mixture with location
/// `omega` and variance `omega^2`, then renormalizes. Negative
/// intermediate values are clamped to zero.
pub fn perturb_age_distribution(
    ages: &AgeDistribution,
    omega: f64,
    seed: u64,
) -> Result<AgeDistribution> {
    if omega < 0.0 || !omega.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "omega must be nonnegative, got {omega}"
        )));
    }
    let mut rng = rng::stream(seed, domain::PERTURBATION, 0, 0);
    let mut perturbed = Vec::with_capacity(ages.group_count());
    for &p in ages.probs() {
        let mean = if rng.random::<bool>() { omega } else { -omega };
        let noise = Normal::new(mean, omega)
            .map_err(|e| Error::InvalidParameter(format!("perturbation noise: {e}")))?
            .sample(&mut rng);
        perturbed.push((p * (1.0 + noise)).max(0.0));
    }
    let total: f64 = perturbed.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegeneratePerturbation);
    }
    for p in &mut perturbed {
        *p /= total;
    }
    ages.with_probs(perturbed)
}
