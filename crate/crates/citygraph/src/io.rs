//! Readers and writers for every external file format.
//!
//! Inputs: `tiles.csv` (row,col,population), `polygon.json` (array of
//! rings of `[lat,lon]` pairs), `age_distribution.csv`
//! (group_index,age_break_low,fraction), `roles.csv`
//! (age_group,household_type,role,probability), `sizes.csv`
//! (household_type,size,probability) and `contact_matrix.csv` (survey-export
//! layout: label column plus one column per contacted group).
//!
//! Outputs: `nodes.csv`, `edges.csv`, `households.csv` and the analysis
//! tables. All writers are deterministic so identical runs produce
//! byte-identical files.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::analysis::{ClusterStat, SpatialStats, TileStat};
use crate::error::{Error, Result};
use crate::geo::{Grid, Polygon, TilePopulationRow};
use crate::graph::Layer;
use crate::households::{Household, HouseholdSet, HouseholdType, Role, RoleKind, RoleTable, SizeTable};
use crate::population::{AgeDistribution, Person};

fn display(path: &Path) -> String {
    path.display().to_string()
}

fn open_reader(path: &Path) -> Result<csv::Reader<BufReader<File>>> {
    let file = File::open(path).map_err(|e| Error::io(display(path), e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(BufReader::new(file)))
}

fn parse_error(path: &Path, record: &csv::StringRecord, message: impl Into<String>) -> Error {
    Error::Parse {
        path: display(path),
        line: record.position().map(|p| p.line()).unwrap_or(0),
        message: message.into(),
    }
}

fn field<T: std::str::FromStr>(
    path: &Path,
    record: &csv::StringRecord,
    idx: usize,
    name: &str,
) -> Result<T> {
    let raw = record
        .get(idx)
        .ok_or_else(|| parse_error(path, record, format!("missing column `{name}`")))?;
    raw.parse::<T>()
        .map_err(|_| parse_error(path, record, format!("invalid {name}: `{raw}`")))
}

pub fn read_tiles_csv(path: &Path) -> Result<Vec<TilePopulationRow>> {
    let mut reader = open_reader(path)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            path: display(path),
            line: 0,
            message: e.to_string(),
        })?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        rows.push(TilePopulationRow {
            row: field(path, &record, 0, "row")?,
            col: field(path, &record, 1, "col")?,
            population: field(path, &record, 2, "population")?,
        });
    }
    Ok(rows)
}

pub fn read_polygon_json(path: &Path) -> Result<Polygon> {
    let rings: Vec<Vec<(f64, f64)>> = read_json(path)?;
    Polygon::new(rings)
}

pub fn read_age_distribution_csv(path: &Path) -> Result<AgeDistribution> {
    let mut reader = open_reader(path)?;
    let mut rows: Vec<(usize, u32, f64)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            path: display(path),
            line: 0,
            message: e.to_string(),
        })?;
        rows.push((
            field(path, &record, 0, "group_index")?,
            field(path, &record, 1, "age_break_low")?,
            field(path, &record, 2, "fraction")?,
        ));
    }
    rows.sort_by_key(|(g, _, _)| *g);
    for (expected, (g, _, _)) in rows.iter().enumerate() {
        if *g != expected {
            return Err(Error::Config(format!(
                "age distribution groups must be 0..n, found index {g}"
            )));
        }
    }
    let breaks = rows.iter().map(|(_, b, _)| *b).collect();
    let probs = rows.iter().map(|(_, _, p)| *p).collect();
    AgeDistribution::new(breaks, probs)
}

pub fn read_roles_csv(path: &Path, group_count: usize) -> Result<RoleTable> {
    let mut reader = open_reader(path)?;
    let mut rows: Vec<(usize, Role, f64)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            path: display(path),
            line: 0,
            message: e.to_string(),
        })?;
        let group: usize = field(path, &record, 0, "age_group")?;
        let household: String = field(path, &record, 1, "household_type")?;
        let role: String = field(path, &record, 2, "role")?;
        let probability: f64 = field(path, &record, 3, "probability")?;
        let role = Role::new(HouseholdType::parse(&household)?, RoleKind::parse(&role)?)?;
        rows.push((group, role, probability));
    }
    RoleTable::from_rows(group_count, &rows)
}

pub fn read_sizes_csv(path: &Path) -> Result<SizeTable> {
    let mut reader = open_reader(path)?;
    let mut rows: Vec<(HouseholdType, usize, f64)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            path: display(path),
            line: 0,
            message: e.to_string(),
        })?;
        let household: String = field(path, &record, 0, "household_type")?;
        rows.push((
            HouseholdType::parse(&household)?,
            field(path, &record, 1, "size")?,
            field(path, &record, 2, "probability")?,
        ));
    }
    SizeTable::from_rows(&rows)
}

/// Survey-export layout: a header line, then one labeled row per
/// respondent group with the contacted-group averages.
pub fn read_contact_matrix_csv(path: &Path) -> Result<crate::mixing::ContactMatrix> {
    let mut reader = open_reader(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            path: display(path),
            line: 0,
            message: e.to_string(),
        })?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        // First field may be a row label; keep only what parses as f64.
        let mut values = Vec::new();
        for (idx, raw) in record.iter().enumerate() {
            match raw.parse::<f64>() {
                Ok(v) => values.push(v),
                Err(_) if idx == 0 => continue,
                Err(_) => {
                    return Err(parse_error(
                        path,
                        &record,
                        format!("invalid contact value `{raw}`"),
                    ))
                }
            }
        }
        rows.push(values);
    }
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::Config(format!(
            "contact matrix in {} is not square",
            display(path)
        )));
    }
    crate::mixing::ContactMatrix::new(n, rows.into_iter().flatten().collect())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| Error::io(display(path), e))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Json {
        path: display(path),
        source: e,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(display(path), e))?;
    let mut writer = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut writer, value).map_err(|e| Error::Json {
        path: display(path),
        source: e,
    })?;
    writer
        .write_all(b"\n")
        .map_err(|e| Error::io(display(path), e))
}

fn role_tag(role: &Role) -> String {
    format!("{}:{}", role.household_type.name(), role.kind.name())
}

fn parse_role_tag(tag: &str) -> Result<Role> {
    let (t, k) = tag
        .split_once(':')
        .ok_or_else(|| Error::Data(format!("invalid role tag `{tag}`")))?;
    Role::new(HouseholdType::parse(t)?, RoleKind::parse(k)?)
}

pub fn write_nodes_csv(path: &Path, persons: &[Person], grid: &Grid) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(display(path), e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(display(path), e);
    writeln!(w, "id,tile_row,tile_col,age_group,fitness,household_id,role").map_err(io_err)?;
    for p in persons {
        let (row, col) = grid.row_col(p.tile as usize)?;
        let household = p.household.map(|h| h.to_string()).unwrap_or_default();
        let role = p.role.as_ref().map(role_tag).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            p.id, row, col, p.group, p.fitness, household, role
        )
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn read_nodes_csv(path: &Path, grid: &Grid) -> Result<Vec<Person>> {
    let mut reader = open_reader(path)?;
    let mut persons = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            path: display(path),
            line: 0,
            message: e.to_string(),
        })?;
        let row: usize = field(path, &record, 1, "tile_row")?;
        let col: usize = field(path, &record, 2, "tile_col")?;
        let household = match record.get(5) {
            Some("") | None => None,
            Some(raw) => Some(raw.parse::<u32>().map_err(|_| {
                parse_error(path, &record, format!("invalid household id `{raw}`"))
            })?),
        };
        let role = match record.get(6) {
            Some("") | None => None,
            Some(raw) => Some(parse_role_tag(raw)?),
        };
        persons.push(Person {
            id: field(path, &record, 0, "id")?,
            tile: grid.index(row, col)? as u32,
            group: field(path, &record, 3, "age_group")?,
            fitness: field(path, &record, 4, "fitness")?,
            role,
            household,
        });
    }
    Ok(persons)
}

pub fn write_edges_csv(
    path: &Path,
    household_edges: &[(u32, u32)],
    friendship_edges: &[(u32, u32)],
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(display(path), e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(display(path), e);
    writeln!(w, "u,v,layer").map_err(io_err)?;
    for &(u, v) in household_edges {
        writeln!(w, "{u},{v},H").map_err(io_err)?;
    }
    for &(u, v) in friendship_edges {
        writeln!(w, "{u},{v},F").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Household and friendship edge lists, in file order.
pub type LayeredEdges = (Vec<(u32, u32)>, Vec<(u32, u32)>);

pub fn read_edges_csv(path: &Path) -> Result<LayeredEdges> {
    let mut reader = open_reader(path)?;
    let mut household = Vec::new();
    let mut friendship = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            path: display(path),
            line: 0,
            message: e.to_string(),
        })?;
        let u: u32 = field(path, &record, 0, "u")?;
        let v: u32 = field(path, &record, 1, "v")?;
        let layer: String = field(path, &record, 2, "layer")?;
        match Layer::parse(&layer)? {
            Layer::H => household.push((u, v)),
            Layer::F => friendship.push((u, v)),
        }
    }
    Ok((household, friendship))
}

pub fn write_households_csv(path: &Path, set: &HouseholdSet) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(display(path), e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(display(path), e);
    writeln!(w, "household_id,type,member_ids").map_err(io_err)?;
    for Household {
        id,
        household_type,
        members,
    } in &set.households
    {
        let ids: Vec<String> = members.iter().map(|m| m.to_string()).collect();
        writeln!(w, "{},{},{}", id, household_type.name(), ids.join(";")).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn write_degree_hist_csv(path: &Path, histogram: &[u64]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(display(path), e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(display(path), e);
    writeln!(w, "degree,count").map_err(io_err)?;
    for (degree, count) in histogram.iter().enumerate() {
        if *count > 0 {
            writeln!(w, "{degree},{count}").map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

pub fn write_edge_length_hist_csv(path: &Path, histogram: &[(f64, u64)]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(display(path), e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(display(path), e);
    writeln!(w, "bin_low_km,count").map_err(io_err)?;
    for (bin_low, count) in histogram {
        writeln!(w, "{bin_low},{count}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn write_tile_stats_csv(path: &Path, stats: &[TileStat]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(display(path), e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(display(path), e);
    writeln!(w, "row,col,population,mean_degree,max_degree").map_err(io_err)?;
    for t in stats {
        writeln!(
            w,
            "{},{},{},{},{}",
            t.row, t.col, t.population, t.mean_degree, t.max_degree
        )
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn write_g2g_csv(path: &Path, spatial: &SpatialStats) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(display(path), e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(display(path), e);
    writeln!(w, "layer,group_i,group_j,edge_fraction").map_err(io_err)?;
    let n = spatial.group_count;
    for (layer, matrix) in [
        ("F", &spatial.group_edge_fractions_friendship),
        ("all", &spatial.group_edge_fractions_all),
    ] {
        for i in 0..n {
            for j in i..n {
                writeln!(w, "{layer},{i},{j},{}", matrix[i * n + j]).map_err(io_err)?;
            }
        }
    }
    w.flush().map_err(io_err)
}

pub fn write_cluster_stats_csv(path: &Path, clusters: &[ClusterStat]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(display(path), e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(display(path), e);
    writeln!(w, "rank,size,mean_intra_distance_km,max_intra_distance_km").map_err(io_err)?;
    for (rank, c) in clusters.iter().enumerate() {
        writeln!(
            w,
            "{rank},{},{},{}",
            c.size, c.mean_intra_distance_km, c.max_intra_distance_km
        )
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}
