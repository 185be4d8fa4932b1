//! Run configuration: the single JSON document that pins every knob of a
//! generation run, plus the experiment-matrix variant.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::friendship::DistanceKernel;
use crate::geo::Grid;
use crate::population::FitnessSpec;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub origin_lat: f64,
    pub origin_lon: f64,
    pub tile_km: f64,
    pub rows: usize,
    pub cols: usize,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        Grid::new(
            (self.origin_lat, self.origin_lon),
            self.tile_km,
            self.rows,
            self.cols,
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KernelSpec {
    ConstantOne,
    InversePower { beta: f64 },
}

impl KernelSpec {
    pub fn build(&self) -> Result<DistanceKernel> {
        match self {
            KernelSpec::ConstantOne => Ok(DistanceKernel::constant_one()),
            KernelSpec::InversePower { beta } => DistanceKernel::inverse_power(*beta),
        }
    }

    pub fn label(&self) -> String {
        match self {
            KernelSpec::ConstantOne => "1".to_string(),
            KernelSpec::InversePower { beta } => format!("d^-{beta}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SMode {
    /// Derive S from the configured contact matrix.
    Data,
    /// Age-homogeneous mixing (constant S).
    Homogeneous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PopulationMode {
    /// Per-tile counts from the tiles table.
    RealDensity,
    /// Residents spread uniformly over the active non-empty tiles.
    UniformDensity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupSizeMode {
    /// Group fractions from the age-distribution table.
    Real,
    /// Equally frequent age groups.
    Uniform,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputPaths {
    pub tiles: PathBuf,
    #[serde(default)]
    pub polygon: Option<PathBuf>,
    pub age_distribution: PathBuf,
    #[serde(default)]
    pub roles: Option<PathBuf>,
    #[serde(default)]
    pub sizes: Option<PathBuf>,
    #[serde(default)]
    pub contact_matrix: Option<PathBuf>,
}

fn default_runs() -> usize {
    1
}

fn default_path_sample() -> usize {
    1000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub inputs: InputPaths,
    pub mu: f64,
    pub kernel: KernelSpec,
    pub fitness: FitnessSpec,
    pub s_mode: SMode,
    pub population_mode: PopulationMode,
    pub group_size_mode: GroupSizeMode,
    pub include_households: bool,
    pub seed: u64,
    #[serde(default = "default_runs")]
    pub runs: usize,
    pub output_dir: PathBuf,
    #[serde(default = "default_path_sample")]
    pub path_length_sample: usize,
}

impl RunConfig {
    /// Loads a config file, resolving relative input paths against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let mut config: RunConfig = crate::io::read_json(path).map_err(reclassify_config_error)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        config.resolve_inputs(base);
        Ok(config)
    }

    pub fn resolve_inputs(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&p);
            }
        };
        resolve(&mut self.inputs.tiles);
        resolve(&mut self.inputs.age_distribution);
        if let Some(p) = self.inputs.polygon.as_mut() {
            if p.is_relative() {
                *p = base.join(&p);
            }
        }
        if let Some(p) = self.inputs.roles.as_mut() {
            if p.is_relative() {
                *p = base.join(&p);
            }
        }
        if let Some(p) = self.inputs.sizes.as_mut() {
            if p.is_relative() {
                *p = base.join(&p);
            }
        }
        if let Some(p) = self.inputs.contact_matrix.as_mut() {
            if p.is_relative() {
                *p = base.join(&p);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mu < 0.0 || !self.mu.is_finite() {
            return Err(Error::Config(format!(
                "mu must be nonnegative, got {}",
                self.mu
            )));
        }
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        self.grid.build()?;
        self.kernel.build()?;
        self.fitness.validate()?;
        let mut required: Vec<(&str, &Path)> = vec![
            ("tiles", &self.inputs.tiles),
            ("age_distribution", &self.inputs.age_distribution),
        ];
        if let Some(p) = &self.inputs.polygon {
            required.push(("polygon", p));
        }
        if self.include_households {
            match (&self.inputs.roles, &self.inputs.sizes) {
                (Some(r), Some(s)) => {
                    required.push(("roles", r));
                    required.push(("sizes", s));
                }
                _ => {
                    return Err(Error::Config(
                        "include_households requires both roles and sizes inputs".into(),
                    ))
                }
            }
        }
        if self.s_mode == SMode::Data {
            match &self.inputs.contact_matrix {
                Some(p) => required.push(("contact_matrix", p)),
                None => {
                    return Err(Error::Config(
                        "s_mode = data requires a contact_matrix input".into(),
                    ))
                }
            }
        }
        for (name, path) in required {
            if !path.exists() {
                return Err(Error::Config(format!(
                    "{name} input not found: {}",
                    path.display()
                )));
            }
        }
        Ok(())
    }

    /// Hash of the effective configuration; recorded in every artifact so
    /// `analyze` can refuse mismatched outputs.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Seed of run `r`: the base seed for run 0, stream-split seeds after.
    pub fn seed_for_run(&self, run: usize) -> u64 {
        if run == 0 {
            self.seed
        } else {
            crate::rng::run_seed(self.seed, run as u64)
        }
    }
}

/// Experiment matrix: a base config plus per-axis alternatives. Axes that
/// are omitted keep the base value.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub base: RunConfig,
    #[serde(default)]
    pub axes: ExperimentAxes,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentAxes {
    #[serde(default)]
    pub mu: Vec<f64>,
    #[serde(default)]
    pub kernel: Vec<KernelSpec>,
    #[serde(default)]
    pub fitness: Vec<FitnessSpec>,
    #[serde(default)]
    pub s_mode: Vec<SMode>,
    #[serde(default)]
    pub population_mode: Vec<PopulationMode>,
}

/// One cell of the experiment cross product.
#[derive(Debug, Clone)]
pub struct ExperimentCell {
    pub label: String,
    pub config: RunConfig,
}

/// Malformed config documents are configuration errors (exit code 2),
/// not I/O errors; missing files stay I/O.
fn reclassify_config_error(e: Error) -> Error {
    match e {
        Error::Json { path, source } => {
            Error::Config(format!("invalid configuration {path}: {source}"))
        }
        other => other,
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let mut config: ExperimentConfig =
            crate::io::read_json(path).map_err(reclassify_config_error)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        config.base.resolve_inputs(base);
        Ok(config)
    }

    pub fn cells(&self) -> Result<Vec<ExperimentCell>> {
        let mus = if self.axes.mu.is_empty() {
            vec![self.base.mu]
        } else {
            self.axes.mu.clone()
        };
        let kernels = if self.axes.kernel.is_empty() {
            vec![self.base.kernel.clone()]
        } else {
            self.axes.kernel.clone()
        };
        let fitnesses = if self.axes.fitness.is_empty() {
            vec![self.base.fitness.clone()]
        } else {
            self.axes.fitness.clone()
        };
        let s_modes = if self.axes.s_mode.is_empty() {
            vec![self.base.s_mode]
        } else {
            self.axes.s_mode.clone()
        };
        let population_modes = if self.axes.population_mode.is_empty() {
            vec![self.base.population_mode]
        } else {
            self.axes.population_mode.clone()
        };

        let mut cells = Vec::new();
        for mu in &mus {
            for kernel in &kernels {
                for fitness in &fitnesses {
                    for &s_mode in &s_modes {
                        for &population_mode in &population_modes {
                            let mut config = self.base.clone();
                            config.mu = *mu;
                            config.kernel = kernel.clone();
                            config.fitness = fitness.clone();
                            config.s_mode = s_mode;
                            config.population_mode = population_mode;
                            let label = cell_label(&config);
                            config.output_dir = self.base.output_dir.join(&label);
                            cells.push(ExperimentCell { label, config });
                        }
                    }
                }
            }
        }
        Ok(cells)
    }
}

fn cell_label(config: &RunConfig) -> String {
    let kernel = match &config.kernel {
        KernelSpec::ConstantOne => "d1".to_string(),
        KernelSpec::InversePower { beta } => format!("beta{beta}"),
    };
    let fitness = match &config.fitness {
        FitnessSpec::Constant { .. } => "fconst".to_string(),
        FitnessSpec::ShiftedLognormal { .. } => "flognormal".to_string(),
        FitnessSpec::Pareto { .. } => "fpareto".to_string(),
        FitnessSpec::Uniform { .. } => "funiform".to_string(),
    };
    let s = match config.s_mode {
        SMode::Data => "sdata",
        SMode::Homogeneous => "shom",
    };
    let pop = match config.population_mode {
        PopulationMode::RealDensity => "popreal",
        PopulationMode::UniformDensity => "popuniform",
    };
    format!("mu{}_{kernel}_{fitness}_{s}_{pop}", config.mu)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_config_json() -> String {
        r#"{
            "grid": {"origin_lat": 43.7, "origin_lon": 11.2, "tile_km": 1.0, "rows": 2, "cols": 2},
            "inputs": {
                "tiles": "tiles.csv",
                "age_distribution": "ages.csv"
            },
            "mu": 5.0,
            "kernel": {"kind": "inverse-power", "beta": 2.0},
            "fitness": {"kind": "constant", "value": 1.0},
            "s_mode": "homogeneous",
            "population_mode": "real-density",
            "group_size_mode": "real",
            "include_households": false,
            "seed": 42,
            "output_dir": "out"
        }"#
        .to_string()
    }

    #[test]
    fn parses_and_hashes_deterministically() {
        let config: RunConfig = serde_json::from_str(&minimal_config_json()).unwrap();
        assert_eq!(config.runs, 1);
        assert_eq!(config.path_length_sample, 1000);
        let h1 = config.hash();
        let h2 = config.hash();
        assert_eq!(h1, h2);
        assert_eq!(h1.len(), 64);
        let mut other = config.clone();
        other.mu = 6.0;
        assert_ne!(other.hash(), h1);
    }

    #[test]
    fn seeds_derive_per_run() {
        let config: RunConfig = serde_json::from_str(&minimal_config_json()).unwrap();
        assert_eq!(config.seed_for_run(0), 42);
        let s1 = config.seed_for_run(1);
        let s2 = config.seed_for_run(2);
        assert_ne!(s1, 43);
        assert_ne!(s1, s2);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let mut json: serde_json::Value = serde_json::from_str(&minimal_config_json()).unwrap();
        json["surprise"] = serde_json::json!(1);
        assert!(serde_json::from_value::<RunConfig>(json).is_err());
    }

    #[test]
    fn missing_household_tables_fail_validation() {
        let mut config: RunConfig = serde_json::from_str(&minimal_config_json()).unwrap();
        config.include_households = true;
        assert!(config.validate().is_err());
    }

    #[test]
    fn experiment_cells_cross_product() {
        let base: RunConfig = serde_json::from_str(&minimal_config_json()).unwrap();
        let experiment = ExperimentConfig {
            base,
            axes: ExperimentAxes {
                mu: vec![1.0, 5.0],
                kernel: vec![
                    KernelSpec::InversePower { beta: 0.5 },
                    KernelSpec::InversePower { beta: 2.0 },
                ],
                fitness: vec![],
                s_mode: vec![],
                population_mode: vec![],
            },
        };
        let cells = experiment.cells().unwrap();
        assert_eq!(cells.len(), 4);
        let labels: Vec<&str> = cells.iter().map(|c| c.label.as_str()).collect();
        assert!(labels.contains(&"mu1_beta0.5_fconst_shom_popreal"));
        assert!(labels.contains(&"mu5_beta2_fconst_shom_popreal"));
    }
}
