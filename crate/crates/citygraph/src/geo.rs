//! Territory grid: a regular lattice of square tiles.
//!
//! The grid is anchored at its South-West corner and laid out on a local
//! planar approximation (kilometre offsets from the origin, converted to
//! degrees with an equirectangular projection fixed at the origin
//! latitude). Distances between individuals are approximated by the
//! distance between the centers of their tiles, floored at half a tile
//! side so that same-tile pairs are never at distance zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const KM_PER_DEG_LAT: f64 = 110.574;
const KM_PER_DEG_LON_AT_EQUATOR: f64 = 111.320;

/// Regular lattice of `rows x cols` square tiles of side `tile_km`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Grid {
    origin_lat: f64,
    origin_lon: f64,
    tile_km: f64,
    rows: usize,
    cols: usize,
}

impl Grid {
    /// `origin` is the (lat, lon) of the South-West corner; `rows` counts
    /// tiles along the latitudinal axis, `cols` along the longitudinal one.
    pub fn new(origin: (f64, f64), tile_km: f64, rows: usize, cols: usize) -> Result<Grid> {
        if tile_km <= 0.0 || !tile_km.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "tile side must be positive, got {tile_km}"
            )));
        }
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter(format!(
                "tile counts must be at least 1, got {rows}x{cols}"
            )));
        }
        if !origin.0.is_finite() || !origin.1.is_finite() {
            return Err(Error::InvalidParameter("origin must be finite".into()));
        }
        Ok(Grid {
            origin_lat: origin.0,
            origin_lon: origin.1,
            tile_km,
            rows,
            cols,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn tile_km(&self) -> f64 {
        self.tile_km
    }

    pub fn tile_count(&self) -> usize {
        self.rows * self.cols
    }

    /// Bijective tile index for `(row, col)`.
    pub fn index(&self, row: usize, col: usize) -> Result<usize> {
        if row >= self.rows || col >= self.cols {
            return Err(Error::InvalidIndex(format!(
                "tile ({row}, {col}) outside {}x{} grid",
                self.rows, self.cols
            )));
        }
        Ok(row * self.cols + col)
    }

    pub fn row_col(&self, tile: usize) -> Result<(usize, usize)> {
        if tile >= self.tile_count() {
            return Err(Error::InvalidIndex(format!(
                "tile {tile} outside grid with {} tiles",
                self.tile_count()
            )));
        }
        Ok((tile / self.cols, tile % self.cols))
    }

    /// Center of `tile` in km east/north of the origin.
    pub fn center_km(&self, tile: usize) -> Result<(f64, f64)> {
        let (row, col) = self.row_col(tile)?;
        Ok((
            (col as f64 + 0.5) * self.tile_km,
            (row as f64 + 0.5) * self.tile_km,
        ))
    }

    /// Center of `tile` in (lat, lon) degrees.
    pub fn center_lat_lon(&self, tile: usize) -> Result<(f64, f64)> {
        let (x_east, y_north) = self.center_km(tile)?;
        let lat = self.origin_lat + y_north / KM_PER_DEG_LAT;
        let km_per_deg_lon = KM_PER_DEG_LON_AT_EQUATOR * self.origin_lat.to_radians().cos();
        let lon = self.origin_lon + x_east / km_per_deg_lon;
        Ok((lat, lon))
    }

    /// Tile-approximated distance in km: the euclidean distance between
    /// tile centers, floored at half a tile side.
    pub fn distance(&self, t1: usize, t2: usize) -> Result<f64> {
        let (x1, y1) = self.center_km(t1)?;
        let (x2, y2) = self.center_km(t2)?;
        Ok(self.center_distance((x1, y1), (x2, y2)))
    }

    /// Same floor rule applied to precomputed centers; used by hot loops.
    #[inline]
    pub fn center_distance(&self, a: (f64, f64), b: (f64, f64)) -> f64 {
        let d = ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
        d.max(self.tile_km / 2.0)
    }
}

/// Closed polygon in (lat, lon) coordinates, possibly with several rings.
/// Containment follows the even-odd rule; a point exactly on the boundary
/// counts as inside.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Polygon {
    rings: Vec<Vec<(f64, f64)>>,
}

impl Polygon {
    pub fn new(rings: Vec<Vec<(f64, f64)>>) -> Result<Polygon> {
        if rings.is_empty() {
            return Err(Error::InvalidParameter("polygon has no rings".into()));
        }
        let mut normalized = Vec::with_capacity(rings.len());
        for mut ring in rings {
            // Accept rings given with an explicit closing vertex.
            if ring.len() >= 2 && ring.first() == ring.last() {
                ring.pop();
            }
            if ring.len() < 3 {
                return Err(Error::InvalidParameter(
                    "polygon ring needs at least 3 distinct vertices".into(),
                ));
            }
            if ring.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
                return Err(Error::InvalidParameter(
                    "polygon vertices must be finite".into(),
                ));
            }
            normalized.push(ring);
        }
        Ok(Polygon { rings: normalized })
    }

    pub fn rings(&self) -> &[Vec<(f64, f64)>] {
        &self.rings
    }

    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        let mut inside = false;
        for ring in &self.rings {
            let m = ring.len();
            for k in 0..m {
                let (ay, ax) = ring[k];
                let (by, bx) = ring[(k + 1) % m];
                if on_segment((lon, lat), (ax, ay), (bx, by)) {
                    return true;
                }
                // Even-odd ray cast towards +lon with half-open vertices.
                if ((ay > lat) != (by > lat))
                    && lon < (bx - ax) * (lat - ay) / (by - ay) + ax
                {
                    inside = !inside;
                }
            }
        }
        inside
    }
}

fn on_segment(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> bool {
    let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
    if cross.abs() > 1e-12 {
        return false;
    }
    let dot = (p.0 - a.0) * (b.0 - a.0) + (p.1 - a.1) * (b.1 - a.1);
    let len2 = (b.0 - a.0).powi(2) + (b.1 - a.1).powi(2);
    dot >= 0.0 && dot <= len2
}

/// Active-tile selection plus the resident count of each active tile.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileMask {
    active: Vec<bool>,
    population: Vec<u64>,
}

impl TileMask {
    pub fn all_active(grid: &Grid) -> TileMask {
        TileMask {
            active: vec![true; grid.tile_count()],
            population: vec![0; grid.tile_count()],
        }
    }

    pub fn tile_count(&self) -> usize {
        self.active.len()
    }

    pub fn is_active(&self, tile: usize) -> bool {
        self.active[tile]
    }

    pub fn population(&self, tile: usize) -> u64 {
        self.population[tile]
    }

    pub fn set_population(&mut self, tile: usize, count: u64) -> Result<()> {
        if tile >= self.active.len() {
            return Err(Error::InvalidIndex(format!("tile {tile} out of range")));
        }
        if !self.active[tile] {
            return Err(Error::Data(format!(
                "tile {tile} is inactive and cannot hold population"
            )));
        }
        self.population[tile] = count;
        Ok(())
    }

    pub fn total_population(&self) -> u64 {
        self.population.iter().sum()
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|a| **a).count()
    }

    pub fn active_tiles(&self) -> impl Iterator<Item = usize> + '_ {
        self.active
            .iter()
            .enumerate()
            .filter_map(|(t, a)| a.then_some(t))
    }

    /// Active tiles that actually hold residents.
    pub fn populated_tiles(&self) -> impl Iterator<Item = usize> + '_ {
        self.active_tiles().filter(|&t| self.population[t] > 0)
    }
}

/// Activates exactly the tiles whose center falls inside the polygon.
pub fn filter_tiles(grid: &Grid, polygon: &Polygon) -> TileMask {
    let mut active = vec![false; grid.tile_count()];
    for (tile, slot) in active.iter_mut().enumerate() {
        let (lat, lon) = grid
            .center_lat_lon(tile)
            .expect("tile index within grid by construction");
        *slot = polygon.contains(lat, lon);
    }
    let mask = TileMask {
        population: vec![0; active.len()],
        active,
    };
    if mask.active_count() == 0 {
        log::warn!("polygon selects no tile centers; the mask is empty");
    }
    mask
}

/// One parsed row of a per-tile population table.
#[derive(Debug, Clone, Copy)]
pub struct TilePopulationRow {
    pub row: usize,
    pub col: usize,
    pub population: i64,
}

/// Summary of a population-table load.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct LoadReport {
    pub loaded_rows: usize,
    pub dropped_inactive_rows: usize,
}

/// Fills the mask with per-tile counts. Rows pointing at inactive tiles
/// are dropped and counted in the report; negative counts are data errors.
pub fn load_tile_population(
    grid: &Grid,
    mask: &TileMask,
    table: &[TilePopulationRow],
) -> Result<(TileMask, LoadReport)> {
    let mut out = mask.clone();
    let mut report = LoadReport::default();
    for entry in table {
        if entry.population < 0 {
            return Err(Error::Data(format!(
                "negative population {} for tile ({}, {})",
                entry.population, entry.row, entry.col
            )));
        }
        let tile = grid.index(entry.row, entry.col)?;
        if !out.is_active(tile) {
            report.dropped_inactive_rows += 1;
            continue;
        }
        out.population[tile] += entry.population as u64;
        report.loaded_rows += 1;
    }
    Ok((out, report))
}
