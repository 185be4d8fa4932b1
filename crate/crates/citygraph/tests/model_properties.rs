//! Qualitative model behavior on the shipped city fixture: community
//! structure, cluster geography and age-mixing shares, plus coherence of
//! the fixture files themselves.

mod support;

use std::path::Path;

use citygraph::analysis;
use citygraph::friendship::{build_context, sample_friendship_edges, DistanceKernel};
use citygraph::geo::{filter_tiles, load_tile_population, Grid};
use citygraph::graph::SocialGraph;
use citygraph::households::{assign_roles, build_households, household_edges};
use citygraph::io;
use citygraph::mixing;
use citygraph::population::{synthesize_population, uniform_density_mask, FitnessSpec};

use support::{fixture_grid, fixtures_dir, scaled_fixture_mask};

fn fixture(path: &str) -> std::path::PathBuf {
    fixtures_dir().join(path)
}

#[test]
fn fixture_city_is_coherent() {
    let grid = fixture_grid();
    assert_eq!(grid.tile_count(), 180);
    let polygon = io::read_polygon_json(&fixture("polygon.json")).unwrap();
    let mask = filter_tiles(&grid, &polygon);
    let rows = io::read_tiles_csv(&fixture("tiles.csv")).unwrap();
    // Every populated tile lies inside the boundary and the total matches
    // the advertised city size.
    let (mask, report) = load_tile_population(&grid, &mask, &rows).unwrap();
    assert_eq!(report.dropped_inactive_rows, 0);
    assert_eq!(mask.total_population(), 363_060);
    assert_eq!(mask.populated_tiles().count(), rows.len());

    let ages = io::read_age_distribution_csv(&fixture("age_distribution.csv")).unwrap();
    assert_eq!(ages.group_count(), 4);
    assert_eq!(ages.breaks(), &[0, 18, 35, 65]);
    io::read_roles_csv(&fixture("roles.csv"), 4).unwrap();
    io::read_sizes_csv(&fixture("sizes.csv")).unwrap();
    let gamma = io::read_contact_matrix_csv(&fixture("contact_matrix.csv")).unwrap();
    assert_eq!(gamma.group_count(), 4);
}

fn full_graph(n: u64, mu: f64, beta: f64, seed: u64) -> (SocialGraph, Grid) {
    let grid = fixture_grid();
    let mask = scaled_fixture_mask(n);
    let ages = io::read_age_distribution_csv(&fixture("age_distribution.csv")).unwrap();
    let roles = io::read_roles_csv(&fixture("roles.csv"), 4).unwrap();
    let sizes = io::read_sizes_csv(&fixture("sizes.csv")).unwrap();
    let gamma = io::read_contact_matrix_csv(&fixture("contact_matrix.csv")).unwrap();
    let mut persons =
        synthesize_population(&mask, &ages, &FitnessSpec::standard_lognormal(), seed).unwrap();
    assign_roles(&mut persons, &roles, seed).unwrap();
    let set = build_households(&mut persons, &sizes, seed).unwrap();
    let e_h = household_edges(&set);
    let mut group_sizes = vec![0u64; 4];
    for p in &persons {
        group_sizes[p.group as usize] += 1;
    }
    let alpha = mixing::reciprocity_correct(&gamma, &group_sizes).unwrap();
    let s = mixing::edge_frequency_matrix(&alpha, &group_sizes)
        .unwrap()
        .normalized()
        .unwrap();
    let kernel = DistanceKernel::inverse_power(beta).unwrap();
    let ctx = build_context(&persons, &grid, &s, &kernel, mu).unwrap();
    let e_f = sample_friendship_edges(&ctx, seed).unwrap();
    (
        SocialGraph::assemble(persons, e_h, e_f).unwrap(),
        grid,
    )
}

/// Sparse distance-bound graphs organize into strong communities; denser
/// graphs with weak distance decay do not. Steep kernels also keep
/// cluster edges geographically short (around one tile side), while flat
/// kernels stretch them to several tiles.
#[test]
fn community_structure_follows_density_and_distance_decay() {
    let n = 50_000;
    let (sparse_steep, grid) = full_graph(n, 5.0, 2.0, 7);
    let (q_sparse, clusters_sparse) = {
        let (_, q, clusters) = analysis::communities(&sparse_steep, &grid, 7).unwrap();
        (q, clusters)
    };
    let (dense_flat, _) = full_graph(n, 10.0, 0.5, 7);
    let (q_dense, clusters_dense) = {
        let (_, q, clusters) = analysis::communities(&dense_flat, &grid, 7).unwrap();
        (q, clusters)
    };
    assert!(q_sparse > 0.4, "Q(mu=5, beta=2) = {q_sparse}");
    assert!(q_dense < 0.3, "Q(mu=10, beta=0.5) = {q_dense}");
    assert!(q_sparse > q_dense);

    let median_intra = |clusters: &[analysis::ClusterStat]| -> f64 {
        let mut means: Vec<f64> = clusters
            .iter()
            .filter(|c| c.size > 50)
            .map(|c| c.mean_intra_distance_km)
            .collect();
        means.sort_by(|a, b| a.partial_cmp(b).unwrap());
        means[means.len() / 2]
    };
    let steep = median_intra(&clusters_sparse);
    let flat = median_intra(&clusters_dense);
    // Tile side is 1 km in the fixture.
    assert!(steep < 1.0, "steep-kernel intra-cluster median {steep} km");
    assert!(flat > 1.25, "flat-kernel intra-cluster median {flat} km");
    assert!(steep < flat);
}

/// With constant S and a uniform population the unordered group-pair edge
/// shares reduce to the pair-count proportions m_ij / sum(m).
#[test]
fn group_pair_shares_follow_pair_counts_in_the_uniform_limit() {
    let n: u64 = 20_000;
    let mu = 5.0;
    let grid = fixture_grid();
    let seed = 11;
    let mask = uniform_density_mask(&scaled_fixture_mask(n), seed).unwrap();
    let ages = io::read_age_distribution_csv(&fixture("age_distribution.csv")).unwrap();
    let uniform_ages = ages.with_probs(vec![0.25; 4]).unwrap();
    let persons = synthesize_population(
        &mask,
        &uniform_ages,
        &FitnessSpec::Constant { value: 1.0 },
        seed,
    )
    .unwrap();
    let s = mixing::homogeneous(4).unwrap();
    let ctx = build_context(
        &persons,
        &grid,
        &s,
        &DistanceKernel::constant_one(),
        mu,
    )
    .unwrap();
    let edges = sample_friendship_edges(&ctx, seed).unwrap();
    let graph = SocialGraph::assemble(persons, Vec::new(), edges).unwrap();
    let stats = analysis::spatial_stats(&graph, &grid).unwrap();

    // Oracle: expected share of pair (i, j) is m_ij over all pairs,
    // computed from the realized group sizes.
    let mut sizes = vec![0u64; 4];
    for p in &graph.persons {
        sizes[p.group as usize] += 1;
    }
    let m = mixing::pair_counts(&sizes);
    let mut total = 0.0;
    for i in 0..4 {
        for j in i..4 {
            total += m[i * 4 + j];
        }
    }
    for i in 0..4 {
        for j in i..4 {
            let expected = m[i * 4 + j] / total;
            let observed = stats.group_edge_fractions_friendship[i * 4 + j];
            assert!(
                (observed - expected).abs() < 0.01,
                "pair ({i},{j}): observed {observed:.4} expected {expected:.4}"
            );
        }
    }
}

/// Age-dependent mixing shifts per-group degrees: with the survey matrix,
/// the younger groups keep a higher peer degree than the elderly, and all
/// per-group means stay near the configured mu overall.
#[test]
fn data_driven_mixing_differentiates_group_degrees() {
    let n = 20_000;
    let (graph, grid) = full_graph(n, 5.0, 0.5, 3);
    let stats = analysis::spatial_stats(&graph, &grid).unwrap();
    // Children (group 0) report far more same-group contacts than the
    // elderly (group 3) in the fixture survey matrix.
    assert!(
        stats.group_peer_mean_degree[0] > 2.0 * stats.group_peer_mean_degree[3],
        "peer degrees {:?}",
        stats.group_peer_mean_degree
    );
    let overall_mean = graph.mu_hat();
    for g in 0..4 {
        assert!(
            (stats.group_mean_degree[g] - overall_mean).abs() < 0.6 * overall_mean,
            "group {g} degree {:.2} vs mu_hat {overall_mean:.2}",
            stats.group_mean_degree[g]
        );
    }
}

#[test]
fn config_fixtures_validate() {
    for name in ["city_full.json", "city_er.json"] {
        let config =
            citygraph::config::RunConfig::load(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name).as_path())
                .unwrap();
        config.validate().unwrap();
    }
    for name in ["experiment_table5.json", "giant_table3.json"] {
        let experiment = citygraph::config::ExperimentConfig::load(
            Path::new(env!("CARGO_MANIFEST_DIR"))
                .join("../../configs")
                .join(name)
                .as_path(),
        )
        .unwrap();
        let cells = experiment.cells().unwrap();
        assert_eq!(cells.len(), 8);
        for cell in cells {
            cell.config.validate().unwrap();
        }
    }
}
