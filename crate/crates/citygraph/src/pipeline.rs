//! Orchestration: generate -> analyze -> report, single runs and
//! experiment matrices.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{self, FullAnalysis, MetricsReport};
use crate::config::{ExperimentConfig, GroupSizeMode, PopulationMode, RunConfig, SMode};
use crate::error::{Error, Result};
use crate::friendship::{self, FriendshipContext};
use crate::geo::{self, Grid, LoadReport, TileMask};
use crate::graph::SocialGraph;
use crate::households::{self, HouseholdSet, RoleTable, SizeTable};
use crate::io;
use crate::mixing::{self, ContactMatrix, MixingMatrix};
use crate::population::{self, AgeDistribution};

/// Input files parsed once and shared across the runs of a config.
pub struct LoadedInputs {
    pub grid: Grid,
    pub mask: TileMask,
    pub mask_report: LoadReport,
    pub ages: AgeDistribution,
    pub roles: Option<RoleTable>,
    pub sizes: Option<SizeTable>,
    pub contacts: Option<ContactMatrix>,
}

pub fn load_inputs(config: &RunConfig) -> Result<LoadedInputs> {
    let grid = config.grid.build()?;
    let base_mask = match &config.inputs.polygon {
        Some(path) => {
            let polygon = io::read_polygon_json(path)?;
            geo::filter_tiles(&grid, &polygon)
        }
        None => TileMask::all_active(&grid),
    };
    let rows = io::read_tiles_csv(&config.inputs.tiles)?;
    let (mask, mask_report) = geo::load_tile_population(&grid, &base_mask, &rows)?;
    let ages = io::read_age_distribution_csv(&config.inputs.age_distribution)?;
    let roles = match (&config.inputs.roles, config.include_households) {
        (Some(path), true) => Some(io::read_roles_csv(path, ages.group_count())?),
        _ => None,
    };
    let sizes = match (&config.inputs.sizes, config.include_households) {
        (Some(path), true) => Some(io::read_sizes_csv(path)?),
        _ => None,
    };
    let contacts = match (&config.inputs.contact_matrix, config.s_mode) {
        (Some(path), SMode::Data) => Some(io::read_contact_matrix_csv(path)?),
        _ => None,
    };
    Ok(LoadedInputs {
        grid,
        mask,
        mask_report,
        ages,
        roles,
        sizes,
        contacts,
    })
}

pub struct GenerationResult {
    pub graph: SocialGraph,
    pub households: Option<HouseholdSet>,
    pub group_sizes: Vec<u64>,
    pub mu_max: f64,
    pub seed: u64,
    /// Mean kernel value over pairs and mean fitness; the ingredients of
    /// the aggregate approximation of the attraction totals.
    pub mean_kernel: f64,
    pub mean_fitness: f64,
}

/// Builds the mixing matrix for the realized group sizes.
pub fn mixing_for(
    config_mode: SMode,
    contacts: Option<&ContactMatrix>,
    group_sizes: &[u64],
) -> Result<MixingMatrix> {
    match config_mode {
        SMode::Homogeneous => mixing::homogeneous(group_sizes.len()),
        SMode::Data => {
            let gamma = contacts.ok_or_else(|| {
                Error::Config("data-driven mixing requires a contact matrix".into())
            })?;
            let alpha = mixing::reciprocity_correct(gamma, group_sizes)?;
            mixing::edge_frequency_matrix(&alpha, group_sizes)?.normalized()
        }
    }
}

/// One generation run: population, households, friendship layer.
pub fn generate(config: &RunConfig, inputs: &LoadedInputs, seed: u64) -> Result<GenerationResult> {
    let mask = match config.population_mode {
        PopulationMode::RealDensity => inputs.mask.clone(),
        PopulationMode::UniformDensity => population::uniform_density_mask(&inputs.mask, seed)?,
    };
    let ages = match config.group_size_mode {
        GroupSizeMode::Real => inputs.ages.clone(),
        GroupSizeMode::Uniform => {
            let n = inputs.ages.group_count();
            inputs.ages.with_probs(vec![1.0 / n as f64; n])?
        }
    };
    let mut persons = population::synthesize_population(&mask, &ages, &config.fitness, seed)?;

    let (household_set, household_edges) = if config.include_households {
        let roles = inputs
            .roles
            .as_ref()
            .ok_or_else(|| Error::Config("household generation requires a role table".into()))?;
        let sizes = inputs
            .sizes
            .as_ref()
            .ok_or_else(|| Error::Config("household generation requires a size table".into()))?;
        households::assign_roles(&mut persons, roles, seed)?;
        let set = households::build_households(&mut persons, sizes, seed)?;
        let edges = households::household_edges(&set);
        (Some(set), edges)
    } else {
        (None, Vec::new())
    };

    let mut group_sizes = vec![0u64; ages.group_count()];
    for p in &persons {
        group_sizes[p.group as usize] += 1;
    }
    let s = mixing_for(config.s_mode, inputs.contacts.as_ref(), &group_sizes)?;
    let kernel = config.kernel.build()?;
    let ctx = friendship::build_context(&persons, &inputs.grid, &s, &kernel, config.mu)?;
    let mu_max = ctx.mu_max();
    let (mean_kernel, mean_fitness) = ctx.means();
    friendship::validate_mu(&ctx)?;
    let friendship_edges = friendship::sample_friendship_edges(&ctx, seed)?;
    let graph = SocialGraph::assemble(persons, household_edges, friendship_edges)?;
    Ok(GenerationResult {
        graph,
        households: household_set,
        group_sizes,
        mu_max,
        seed,
        mean_kernel,
        mean_fitness,
    })
}

/// Builds the friendship context alone; used by diagnostics and tests
/// that need probabilities without sampling.
pub fn context_for(
    config: &RunConfig,
    inputs: &LoadedInputs,
    persons: &[crate::population::Person],
) -> Result<FriendshipContext> {
    let mut group_sizes = vec![0u64; inputs.ages.group_count()];
    for p in persons {
        group_sizes[p.group as usize] += 1;
    }
    let s = mixing_for(config.s_mode, inputs.contacts.as_ref(), &group_sizes)?;
    let kernel = config.kernel.build()?;
    friendship::build_context(persons, &inputs.grid, &s, &kernel, config.mu)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub base_seed: u64,
    pub run_index: usize,
    pub seed: u64,
    pub nodes: usize,
    pub group_sizes: Vec<u64>,
    pub household_count: usize,
    pub unassigned: usize,
    pub household_edge_count: usize,
    pub friendship_edge_count: usize,
    pub nu: f64,
    pub mu: f64,
    pub mu_hat: f64,
    pub mu_max: f64,
    pub mean_kernel: f64,
    pub mean_fitness: f64,
    pub dropped_tile_rows: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub mu: f64,
    pub mu_max: f64,
    pub feasible: bool,
}

fn run_dirs(config: &RunConfig) -> Vec<PathBuf> {
    if config.runs == 1 {
        vec![config.output_dir.clone()]
    } else {
        (0..config.runs)
            .map(|r| config.output_dir.join(format!("run_{r:03}")))
            .collect()
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))
}

/// Generates every run of the config and writes nodes, edges, households,
/// feasibility report and manifest per run. Returns the run directories.
pub fn run_generate(config: &RunConfig) -> Result<Vec<PathBuf>> {
    config.validate()?;
    let inputs = load_inputs(config)?;
    let hash = config.hash();
    let dirs = run_dirs(config);
    for (run_index, dir) in dirs.iter().enumerate() {
        ensure_dir(dir)?;
        let seed = config.seed_for_run(run_index);
        let result = match generate(config, &inputs, seed) {
            Ok(result) => result,
            Err(Error::Infeasible { mu, mu_max }) => {
                io::write_json(
                    &dir.join("feasibility.json"),
                    &FeasibilityReport {
                        mu,
                        mu_max,
                        feasible: false,
                    },
                )?;
                return Err(Error::Infeasible { mu, mu_max });
            }
            Err(e) => return Err(e),
        };
        io::write_nodes_csv(&dir.join("nodes.csv"), &result.graph.persons, &inputs.grid)?;
        io::write_edges_csv(
            &dir.join("edges.csv"),
            &result.graph.household_edges,
            &result.graph.friendship_edges,
        )?;
        if let Some(set) = &result.households {
            io::write_households_csv(&dir.join("households.csv"), set)?;
        }
        io::write_json(
            &dir.join("feasibility.json"),
            &FeasibilityReport {
                mu: config.mu,
                mu_max: result.mu_max,
                feasible: true,
            },
        )?;
        io::write_json(
            &dir.join("manifest.json"),
            &Manifest {
                config_hash: hash.clone(),
                base_seed: config.seed,
                run_index,
                seed,
                nodes: result.graph.node_count(),
                group_sizes: result.group_sizes.clone(),
                household_count: result.households.as_ref().map_or(0, |s| s.households.len()),
                unassigned: result.households.as_ref().map_or(0, |s| s.unassigned.len()),
                household_edge_count: result.graph.household_edges.len(),
                friendship_edge_count: result.graph.friendship_edges.len(),
                nu: result.graph.nu(),
                mu: config.mu,
                mu_hat: result.graph.mu_hat(),
                mu_max: result.mu_max,
                mean_kernel: result.mean_kernel,
                mean_fitness: result.mean_fitness,
                dropped_tile_rows: inputs.mask_report.dropped_inactive_rows,
            },
        )?;
    }
    Ok(dirs)
}

/// Reads one generated run back and computes the full metric suite,
/// writing the report files next to the inputs.
pub fn analyze_run(config: &RunConfig, grid: &Grid, dir: &Path, force: bool) -> Result<MetricsReport> {
    let manifest: Manifest = io::read_json(&dir.join("manifest.json"))?;
    if !force && manifest.config_hash != config.hash() {
        return Err(Error::Config(format!(
            "manifest in {} was produced by a different configuration; pass --force to analyze anyway",
            dir.display()
        )));
    }
    let persons = io::read_nodes_csv(&dir.join("nodes.csv"), grid)?;
    let (household_edges, friendship_edges) = io::read_edges_csv(&dir.join("edges.csv"))?;
    let graph = SocialGraph::assemble(persons, household_edges, friendship_edges)?;
    let FullAnalysis {
        mut report,
        degree_histogram,
        spatial,
        clusters,
    } = analysis::analyze(
        &graph,
        grid,
        config.mu,
        config.path_length_sample,
        manifest.seed,
    )?;
    report.config_hash = manifest.config_hash;
    io::write_json(&dir.join("metrics.json"), &report)?;
    io::write_degree_hist_csv(&dir.join("degree_hist.csv"), &degree_histogram)?;
    io::write_edge_length_hist_csv(
        &dir.join("edge_length_hist.csv"),
        &spatial.edge_length_histogram,
    )?;
    io::write_tile_stats_csv(&dir.join("tile_stats.csv"), &spatial.tile_stats)?;
    io::write_g2g_csv(&dir.join("g2g_matrix.csv"), &spatial)?;
    io::write_cluster_stats_csv(&dir.join("cluster_stats.csv"), &clusters)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct AggregateMetric {
    pub mean: f64,
    /// 2.5% and 97.5% percentiles across runs (percentile intervals).
    pub p025: f64,
    pub p975: f64,
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

fn aggregate_metric(values: &[f64]) -> AggregateMetric {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    AggregateMetric {
        mean: sorted.iter().sum::<f64>() / sorted.len().max(1) as f64,
        p025: percentile(&sorted, 0.025),
        p975: percentile(&sorted, 0.975),
    }
}

#[derive(Debug, Serialize)]
pub struct AggregateReport {
    pub runs: usize,
    pub interval: &'static str,
    pub metrics: BTreeMap<String, AggregateMetric>,
}

pub fn aggregate_reports(reports: &[MetricsReport]) -> AggregateReport {
    let mut metrics = BTreeMap::new();
    let mut put = |name: &str, f: &dyn Fn(&MetricsReport) -> f64| {
        let values: Vec<f64> = reports.iter().map(f).collect();
        metrics.insert(name.to_string(), aggregate_metric(&values));
    };
    put("mean_degree", &|r| r.mean_degree);
    put("nu", &|r| r.nu);
    put("mu_hat", &|r| r.mu_hat);
    put("avg_path_length", &|r| r.avg_path_length);
    put("global_clustering", &|r| r.global_clustering);
    put("mean_local_clustering", &|r| r.mean_local_clustering);
    put("assortativity", &|r| r.assortativity.unwrap_or(f64::NAN));
    put("component_count", &|r| r.component_count as f64);
    put("giant_fraction", &|r| r.giant_fraction);
    put("component_count_friendship", &|r| {
        r.component_count_friendship as f64
    });
    put("giant_fraction_friendship", &|r| r.giant_fraction_friendship);
    put("kl_vs_poisson", &|r| r.kl_vs_poisson);
    put("modularity", &|r| r.modularity);
    AggregateReport {
        runs: reports.len(),
        interval: "percentile",
        metrics,
    }
}

/// Analyzes every run of a generated config; multi-run configs also get a
/// mean / percentile-interval aggregate.
pub fn run_analyze(config: &RunConfig, force: bool) -> Result<Vec<MetricsReport>> {
    let grid = config.grid.build()?;
    let dirs = run_dirs(config);
    let reports: Vec<MetricsReport> = dirs
        .iter()
        .map(|dir| analyze_run(config, &grid, dir, force))
        .collect::<Result<_>>()?;
    if reports.len() > 1 {
        io::write_json(
            &config.output_dir.join("metrics_aggregate.json"),
            &aggregate_reports(&reports),
        )?;
    }
    Ok(reports)
}

#[derive(Debug, Serialize)]
pub struct CellSummary {
    pub label: String,
    pub mu: f64,
    pub kernel: String,
    pub fitness: String,
    pub s_mode: String,
    pub population_mode: String,
    pub runs: usize,
    pub giant_fraction_friendship: f64,
    pub giant_fraction: f64,
    pub mean_degree: f64,
    pub avg_path_length: f64,
    pub global_clustering: f64,
    pub mean_local_clustering: f64,
    pub assortativity: f64,
    pub component_count: f64,
    pub error: Option<String>,
}

/// Runs the whole experiment matrix; cell failures are recorded and the
/// remaining cells continue.
pub fn run_experiment(experiment: &ExperimentConfig) -> Result<Vec<CellSummary>> {
    let cells = experiment.cells()?;
    ensure_dir(&experiment.base.output_dir)?;
    let summaries: Vec<CellSummary> = cells
        .par_iter()
        .map(|cell| {
            let config = &cell.config;
            let outcome = run_generate(config).and_then(|_| run_analyze(config, false));
            match outcome {
                Ok(reports) => {
                    let agg = aggregate_reports(&reports);
                    let get = |k: &str| agg.metrics[k].mean;
                    CellSummary {
                        label: cell.label.clone(),
                        mu: config.mu,
                        kernel: config.kernel.label(),
                        fitness: config.fitness.label(),
                        s_mode: match config.s_mode {
                            SMode::Data => "data".into(),
                            SMode::Homogeneous => "homogeneous".into(),
                        },
                        population_mode: match config.population_mode {
                            PopulationMode::RealDensity => "real-density".into(),
                            PopulationMode::UniformDensity => "uniform-density".into(),
                        },
                        runs: reports.len(),
                        giant_fraction_friendship: get("giant_fraction_friendship"),
                        giant_fraction: get("giant_fraction"),
                        mean_degree: get("mean_degree"),
                        avg_path_length: get("avg_path_length"),
                        global_clustering: get("global_clustering"),
                        mean_local_clustering: get("mean_local_clustering"),
                        assortativity: get("assortativity"),
                        component_count: get("component_count"),
                        error: None,
                    }
                }
                Err(e) => CellSummary {
                    label: cell.label.clone(),
                    mu: config.mu,
                    kernel: config.kernel.label(),
                    fitness: config.fitness.label(),
                    s_mode: String::new(),
                    population_mode: String::new(),
                    runs: 0,
                    giant_fraction_friendship: f64::NAN,
                    giant_fraction: f64::NAN,
                    mean_degree: f64::NAN,
                    avg_path_length: f64::NAN,
                    global_clustering: f64::NAN,
                    mean_local_clustering: f64::NAN,
                    assortativity: f64::NAN,
                    component_count: f64::NAN,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    write_experiment_tables(&experiment.base.output_dir, &summaries)?;
    io::write_json(
        &experiment.base.output_dir.join("experiment_report.json"),
        &summaries,
    )?;
    Ok(summaries)
}

fn write_experiment_tables(dir: &Path, summaries: &[CellSummary]) -> Result<()> {
    use std::io::Write;
    let giant_path = dir.join("table_giant.csv");
    let file =
        fs::File::create(&giant_path).map_err(|e| Error::io(giant_path.display().to_string(), e))?;
    let mut w = std::io::BufWriter::new(file);
    let io_err = |e| Error::io(dir.display().to_string(), e);
    writeln!(
        w,
        "label,mu,kernel,fitness,s_mode,population_mode,giant_friendship_pct,giant_pct"
    )
    .map_err(io_err)?;
    for s in summaries {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            s.label,
            s.mu,
            s.kernel,
            s.fitness,
            s.s_mode,
            s.population_mode,
            100.0 * s.giant_fraction_friendship,
            100.0 * s.giant_fraction
        )
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;

    let metrics_path = dir.join("table_metrics.csv");
    let file = fs::File::create(&metrics_path)
        .map_err(|e| Error::io(metrics_path.display().to_string(), e))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(
        w,
        "label,mu,kernel,fitness,s_mode,population_mode,K,avg_dist,C,C_loc,rho,components,giant_pct"
    )
    .map_err(io_err)?;
    for s in summaries {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            s.label,
            s.mu,
            s.kernel,
            s.fitness,
            s.s_mode,
            s.population_mode,
            s.mean_degree,
            s.avg_path_length,
            s.global_clustering,
            s.mean_local_clustering,
            s.assortativity,
            s.component_count,
            100.0 * s.giant_fraction
        )
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}
