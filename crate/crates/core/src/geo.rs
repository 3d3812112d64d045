//! Point-in-polygon geocoding and location × category activity counts.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{Cell, Region, Table};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }
}

/// Closed ring: first vertex repeated as last.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Ring(pub Vec<GeoPoint>);

#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub exterior: Ring,
    pub holes: Vec<Ring>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiPolygon(pub Vec<Polygon>);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GeoError {
    #[error("invalid_geometry: ring has {0} vertices, at least 4 required")]
    DegenerateRing(usize),
    #[error("invalid_geometry: ring is not closed")]
    UnclosedRing,
    #[error("invalid_geometry: ring spans more than 180 degrees of longitude")]
    AntimeridianSpan,
    #[error("invalid_geometry: empty multipolygon")]
    Empty,
}

impl GeoError {
    pub fn reason_code(&self) -> &'static str {
        match self {
            GeoError::DegenerateRing(_) => "degenerate_ring",
            GeoError::UnclosedRing => "unclosed_ring",
            GeoError::AntimeridianSpan => "antimeridian_span",
            GeoError::Empty => "empty_geometry",
        }
    }
}

pub fn validate_ring(ring: &Ring) -> Result<(), GeoError> {
    let pts = &ring.0;
    if pts.len() < 4 {
        return Err(GeoError::DegenerateRing(pts.len()));
    }
    if pts.first() != pts.last() {
        return Err(GeoError::UnclosedRing);
    }
    let (lo, hi) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.lon), hi.max(p.lon)));
    if hi - lo > 180.0 {
        return Err(GeoError::AntimeridianSpan);
    }
    Ok(())
}

pub fn validate_multipolygon(mp: &MultiPolygon) -> Result<(), GeoError> {
    if mp.0.is_empty() {
        return Err(GeoError::Empty);
    }
    for poly in &mp.0 {
        validate_ring(&poly.exterior)?;
        for hole in &poly.holes {
            validate_ring(hole)?;
        }
    }
    Ok(())
}

fn on_segment(p: GeoPoint, a: GeoPoint, b: GeoPoint) -> bool {
    let cross = (b.lon - a.lon) * (p.lat - a.lat) - (b.lat - a.lat) * (p.lon - a.lon);
    cross == 0.0
        && p.lon >= a.lon.min(b.lon)
        && p.lon <= a.lon.max(b.lon)
        && p.lat >= a.lat.min(b.lat)
        && p.lat <= a.lat.max(b.lat)
}

enum RingSide {
    Inside,
    Outside,
    Boundary,
}

// Even-odd crossing count of a ray cast towards +lon.
fn ring_side(p: GeoPoint, ring: &Ring) -> RingSide {
    let mut inside = false;
    for edge in ring.0.windows(2) {
        let (a, b) = (edge[0], edge[1]);
        if on_segment(p, a, b) {
            return RingSide::Boundary;
        }
        if (a.lat > p.lat) != (b.lat > p.lat) {
            let x = a.lon + (p.lat - a.lat) * (b.lon - a.lon) / (b.lat - a.lat);
            if p.lon < x {
                inside = !inside;
            }
        }
    }
    if inside {
        RingSide::Inside
    } else {
        RingSide::Outside
    }
}

/// Ray-casting containment. Points on any edge or vertex, including hole
/// edges, count as inside; points strictly inside a hole do not.
pub fn point_in_polygon(point: GeoPoint, polygon: &Polygon) -> Result<bool, GeoError> {
    validate_ring(&polygon.exterior)?;
    for hole in &polygon.holes {
        validate_ring(hole)?;
    }
    match ring_side(point, &polygon.exterior) {
        RingSide::Outside => return Ok(false),
        RingSide::Boundary => return Ok(true),
        RingSide::Inside => {}
    }
    for hole in &polygon.holes {
        match ring_side(point, hole) {
            RingSide::Inside => return Ok(false),
            RingSide::Boundary => return Ok(true),
            RingSide::Outside => {}
        }
    }
    Ok(true)
}

pub fn point_in_multipolygon(point: GeoPoint, mp: &MultiPolygon) -> Result<bool, GeoError> {
    for poly in &mp.0 {
        if point_in_polygon(point, poly)? {
            return Ok(true);
        }
    }
    Ok(false)
}

#[derive(Debug, Clone, Copy)]
struct BoundingBox {
    min_lat: f64,
    max_lat: f64,
    min_lon: f64,
    max_lon: f64,
}

impl BoundingBox {
    fn of(mp: &MultiPolygon) -> Self {
        let mut b = BoundingBox {
            min_lat: f64::INFINITY,
            max_lat: f64::NEG_INFINITY,
            min_lon: f64::INFINITY,
            max_lon: f64::NEG_INFINITY,
        };
        for p in mp.0.iter().flat_map(|poly| poly.exterior.0.iter()) {
            b.min_lat = b.min_lat.min(p.lat);
            b.max_lat = b.max_lat.max(p.lat);
            b.min_lon = b.min_lon.min(p.lon);
            b.max_lon = b.max_lon.max(p.lon);
        }
        b
    }

    fn contains(&self, p: GeoPoint) -> bool {
        p.lat >= self.min_lat && p.lat <= self.max_lat && p.lon >= self.min_lon && p.lon <= self.max_lon
    }
}

/// Regions sorted by id with precomputed bounding boxes.
#[derive(Debug, Clone)]
pub struct RegionIndex<'a> {
    entries: Vec<(&'a Region, BoundingBox)>,
}

impl<'a> RegionIndex<'a> {
    pub fn new(regions: &'a [Region]) -> Self {
        let mut entries: Vec<_> = regions.iter().map(|r| (r, BoundingBox::of(&r.boundary))).collect();
        entries.sort_by(|a, b| a.0.region_id.cmp(&b.0.region_id));
        Self { entries }
    }

    /// Every region containing the point, in id order.
    pub fn containing(&self, point: GeoPoint) -> Vec<&'a Region> {
        self.entries
            .iter()
            .filter(|(_, bbox)| bbox.contains(point))
            .filter(|(region, _)| match point_in_multipolygon(point, &region.boundary) {
                Ok(hit) => hit,
                Err(e) => {
                    log::warn!("skipping region {}: {e}", region.region_id);
                    false
                }
            })
            .map(|(region, _)| *region)
            .collect()
    }

    /// The containing region; overlaps resolve to the smallest id with a
    /// logged warning.
    pub fn assign(&self, point: GeoPoint) -> Option<&'a Region> {
        let hits = self.containing(point);
        if hits.len() > 1 {
            log::warn!(
                "point ({}, {}) lies in {} overlapping regions {:?}; using {}",
                point.lat,
                point.lon,
                hits.len(),
                hits.iter().map(|r| r.region_id.as_str()).collect::<Vec<_>>(),
                hits[0].region_id
            );
        }
        hits.first().copied()
    }
}

pub fn assign_region(point: GeoPoint, regions: &[Region]) -> Option<String> {
    RegionIndex::new(regions).assign(point).map(|r| r.region_id.clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Country,
    Region,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Country => "country",
            Level::Region => "region",
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MatrixError {
    #[error("cell ({row}, {column}) is negative or not finite: {value}")]
    InvalidCell {
        row: String,
        column: String,
        value: f64,
    },
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("malformed activity table: {0}")]
    Malformed(String),
}

/// Counts by location × category. Row and column ids are kept sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivityMatrix {
    level: Level,
    rows: Vec<String>,
    columns: Vec<String>,
    cells: Vec<Vec<f64>>,
}

impl ActivityMatrix {
    pub fn empty(level: Level) -> Self {
        Self {
            level,
            rows: Vec::new(),
            columns: Vec::new(),
            cells: Vec::new(),
        }
    }

    /// Builds a matrix from sparse `(location, category) → count` entries;
    /// absent pairs are zero.
    pub fn from_counts(
        level: Level,
        counts: &BTreeMap<(String, String), f64>,
    ) -> Result<Self, MatrixError> {
        let rows: Vec<String> = counts.keys().map(|(r, _)| r.clone()).collect::<BTreeSet<_>>().into_iter().collect();
        let columns: Vec<String> =
            counts.keys().map(|(_, c)| c.clone()).collect::<BTreeSet<_>>().into_iter().collect();
        let mut m = Self::zeros(level, rows, columns)?;
        for ((r, c), &v) in counts {
            let (i, j) = (m.row_index(r).unwrap(), m.column_index(c).unwrap());
            m.set(i, j, v)?;
        }
        Ok(m)
    }

    pub fn zeros(level: Level, mut rows: Vec<String>, mut columns: Vec<String>) -> Result<Self, MatrixError> {
        for ids in [&mut rows, &mut columns] {
            ids.sort();
            if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
                return Err(MatrixError::DuplicateId(w[0].clone()));
            }
        }
        let cells = vec![vec![0.0; columns.len()]; rows.len()];
        Ok(Self {
            level,
            rows,
            columns,
            cells,
        })
    }

    pub fn set(&mut self, row: usize, column: usize, value: f64) -> Result<(), MatrixError> {
        if !(value.is_finite() && value >= 0.0) {
            return Err(MatrixError::InvalidCell {
                row: self.rows[row].clone(),
                column: self.columns[column].clone(),
                value,
            });
        }
        self.cells[row][column] = value;
        Ok(())
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn rows(&self) -> &[String] {
        &self.rows
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn row_index(&self, id: &str) -> Option<usize> {
        self.rows.binary_search_by(|r| r.as_str().cmp(id)).ok()
    }

    pub fn column_index(&self, id: &str) -> Option<usize> {
        self.columns.binary_search_by(|c| c.as_str().cmp(id)).ok()
    }

    pub fn at(&self, row: usize, column: usize) -> f64 {
        self.cells[row][column]
    }

    /// Zero for unknown ids.
    pub fn get(&self, row: &str, column: &str) -> f64 {
        match (self.row_index(row), self.column_index(column)) {
            (Some(i), Some(j)) => self.cells[i][j],
            _ => 0.0,
        }
    }

    pub fn row_total(&self, row: usize) -> f64 {
        self.cells[row].iter().sum()
    }

    pub fn column_total(&self, column: usize) -> f64 {
        self.cells.iter().map(|r| r[column]).sum()
    }

    pub fn total(&self) -> f64 {
        self.cells.iter().flatten().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty() || self.columns.is_empty()
    }

    /// Every cell multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut m = self.clone();
        for v in m.cells.iter_mut().flatten() {
            *v *= factor;
        }
        m
    }

    /// Long format: location, category, count (zero cells omitted).
    pub fn to_long_table(&self) -> Table {
        let mut t = Table::new(&["location", "category", "count"]);
        for (i, r) in self.rows.iter().enumerate() {
            for (j, c) in self.columns.iter().enumerate() {
                if self.cells[i][j] != 0.0 {
                    t.push(vec![Cell::text(r), Cell::text(c), Cell::Float(self.cells[i][j])]);
                }
            }
        }
        t
    }

    /// Wide format: one row per location, one column per category.
    pub fn to_wide_table(&self) -> Table {
        let mut header = vec!["location".to_string()];
        header.extend(self.columns.iter().cloned());
        let mut t = Table::new(&header);
        for (i, r) in self.rows.iter().enumerate() {
            let mut row = vec![Cell::text(r)];
            row.extend(self.cells[i].iter().map(|&v| Cell::Float(v)));
            t.push(row);
        }
        t
    }

    pub fn from_long_table(level: Level, table: &Table) -> Result<Self, MatrixError> {
        let col = |name: &str| table.column_index(name).ok_or_else(|| MatrixError::Malformed(format!("missing column {name}")));
        let (li, ci, vi) = (col("location")?, col("category")?, col("count")?);
        let mut counts = BTreeMap::new();
        for row in &table.rows {
            let key = (
                row[li].as_str().ok_or_else(|| MatrixError::Malformed("location".into()))?.to_string(),
                row[ci].as_str().ok_or_else(|| MatrixError::Malformed("category".into()))?.to_string(),
            );
            let v = row[vi].as_f64().ok_or_else(|| MatrixError::Malformed("count".into()))?;
            counts.insert(key, v);
        }
        Self::from_counts(level, &counts)
    }
}

/// Full counting: each record adds 1 to every (distinct location, distinct
/// category) pair it touches.
pub fn aggregate_activity<R, L, C>(records: &[R], level: Level, locations: L, categories: C) -> ActivityMatrix
where
    L: Fn(&R) -> Vec<String>,
    C: Fn(&R) -> Vec<String>,
{
    let mut counts: BTreeMap<(String, String), f64> = BTreeMap::new();
    for record in records {
        let locs: BTreeSet<String> = locations(record).into_iter().collect();
        let cats: BTreeSet<String> = categories(record).into_iter().collect();
        for l in &locs {
            for c in &cats {
                *counts.entry((l.clone(), c.clone())).or_insert(0.0) += 1.0;
            }
        }
    }
    ActivityMatrix::from_counts(level, &counts).expect("counts are non-negative and keys unique")
}
