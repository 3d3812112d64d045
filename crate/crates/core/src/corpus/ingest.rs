use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CompanyRecord, InstituteEntry, PaperRecord, Region};
use crate::geo::{self, GeoPoint, MultiPolygon, Polygon, Ring};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("schema mismatch in {path} at line {line}: {message}")]
    SchemaMismatch {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("cannot write rejection report: {0}")]
    Report(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Papers,
    Registry,
    Companies,
    Boundaries,
}

impl DatasetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetKind::Papers => "papers",
            DatasetKind::Registry => "registry",
            DatasetKind::Companies => "companies",
            DatasetKind::Boundaries => "boundaries",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestConfig {
    pub min_year: i32,
    pub max_year: i32,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            min_year: 1990,
            max_year: 2030,
        }
    }
}

/// A rejected input row. `line_no` is 1-based; for GeoJSON it is the
/// 1-based feature index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub line_no: usize,
    pub reason_code: String,
    /// Offending id, when the row had one.
    pub detail: Option<String>,
}

impl Rejection {
    fn new(line_no: usize, reason: &str, detail: Option<&str>) -> Self {
        Self {
            line_no,
            reason_code: reason.to_string(),
            detail: detail.map(str::to_string),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested<T> {
    pub records: Vec<T>,
    pub rejections: Vec<Rejection>,
    /// Non-blank rows (or features) read.
    pub rows_read: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    Papers(Ingested<PaperRecord>),
    Registry(Ingested<InstituteEntry>),
    Companies(Ingested<CompanyRecord>),
    Boundaries(Ingested<Region>),
}

impl Dataset {
    pub fn rejections(&self) -> &[Rejection] {
        match self {
            Dataset::Papers(d) => &d.rejections,
            Dataset::Registry(d) => &d.rejections,
            Dataset::Companies(d) => &d.rejections,
            Dataset::Boundaries(d) => &d.rejections,
        }
    }

    pub fn retained(&self) -> usize {
        match self {
            Dataset::Papers(d) => d.records.len(),
            Dataset::Registry(d) => d.records.len(),
            Dataset::Companies(d) => d.records.len(),
            Dataset::Boundaries(d) => d.records.len(),
        }
    }
}

pub fn ingest_dataset(
    kind: DatasetKind,
    path: &Path,
    config: &IngestConfig,
) -> Result<Dataset, IngestError> {
    Ok(match kind {
        DatasetKind::Papers => Dataset::Papers(ingest_papers(path, config)?),
        DatasetKind::Registry => Dataset::Registry(ingest_registry(path)?),
        DatasetKind::Companies => Dataset::Companies(ingest_companies(path)?),
        DatasetKind::Boundaries => Dataset::Boundaries(ingest_boundaries(path)?),
    })
}

/// SHA-256 of a file's bytes, hex encoded.
pub fn file_digest(path: &Path) -> Result<String, IngestError> {
    let bytes = read_bytes(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Writes `line_no,reason_code` rows.
pub fn write_rejection_report<W: Write>(
    rejections: &[Rejection],
    writer: W,
) -> Result<(), IngestError> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["line_no", "reason_code"])?;
    for r in rejections {
        out.write_record([r.line_no.to_string(), r.reason_code.clone()])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, IngestError> {
    fs::read(path).map_err(|source| IngestError::Unreadable {
        path: path.to_path_buf(),
        source,
    })
}

fn read_text(path: &Path) -> Result<String, IngestError> {
    let bytes = read_bytes(path)?;
    String::from_utf8(bytes).map_err(|e| IngestError::SchemaMismatch {
        path: path.to_path_buf(),
        line: 0,
        message: format!("not valid UTF-8: {e}"),
    })
}

/// Parses every non-blank line as `T`; any line that does not fit the schema
/// aborts the whole load.
fn parse_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>, IngestError> {
    let text = read_text(path)?;
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(line).map_err(|e| IngestError::SchemaMismatch {
            path: path.to_path_buf(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        rows.push((idx + 1, row));
    }
    Ok(rows)
}

#[derive(Deserialize)]
struct RawPaper {
    id: String,
    title: String,
    #[serde(rename = "abstract")]
    abstract_text: String,
    subjects: Vec<String>,
    pub_year: i64,
    citations: i64,
    affiliations: Vec<String>,
}

pub fn ingest_papers(
    path: &Path,
    config: &IngestConfig,
) -> Result<Ingested<PaperRecord>, IngestError> {
    let rows: Vec<(usize, RawPaper)> = parse_jsonl(path)?;
    let rows_read = rows.len();
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    let mut rejections = Vec::new();
    for (line, raw) in rows {
        let subjects: BTreeSet<String> = raw
            .subjects
            .iter()
            .map(|s| s.trim())
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect();
        let reason = if raw.citations < 0 {
            Some("negative_citations")
        } else if raw.pub_year < i64::from(config.min_year)
            || raw.pub_year > i64::from(config.max_year)
        {
            Some("year_out_of_range")
        } else if subjects.is_empty() {
            Some("empty_subjects")
        } else if seen.contains(&raw.id) {
            Some("duplicate_id")
        } else {
            None
        };
        if let Some(reason) = reason {
            rejections.push(Rejection::new(line, reason, Some(&raw.id)));
            continue;
        }
        seen.insert(raw.id.clone());
        records.push(PaperRecord {
            id: raw.id,
            title: raw.title,
            abstract_text: raw.abstract_text,
            subjects,
            pub_year: raw.pub_year as i32,
            citations: raw.citations as u64,
            affiliations: raw.affiliations,
            resolved_regions: None,
        });
    }
    Ok(Ingested {
        records,
        rejections,
        rows_read,
    })
}

fn coordinate_reason(lat: f64, lon: f64) -> Option<&'static str> {
    if !(-90.0..=90.0).contains(&lat) {
        Some("invalid_latitude")
    } else if !(-180.0..=180.0).contains(&lon) {
        Some("invalid_longitude")
    } else {
        None
    }
}

#[derive(Deserialize)]
struct RawInstitute {
    registry_id: String,
    name: String,
    #[serde(default)]
    aliases: Vec<String>,
    lat: f64,
    lon: f64,
}

pub fn ingest_registry(path: &Path) -> Result<Ingested<InstituteEntry>, IngestError> {
    let rows: Vec<(usize, RawInstitute)> = parse_jsonl(path)?;
    let rows_read = rows.len();
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    let mut rejections = Vec::new();
    for (line, raw) in rows {
        let reason = if raw.name.trim().is_empty() {
            Some("empty_name")
        } else if let Some(r) = coordinate_reason(raw.lat, raw.lon) {
            Some(r)
        } else if seen.contains(&raw.registry_id) {
            Some("duplicate_id")
        } else {
            None
        };
        if let Some(reason) = reason {
            rejections.push(Rejection::new(line, reason, Some(&raw.registry_id)));
            continue;
        }
        seen.insert(raw.registry_id.clone());
        records.push(InstituteEntry {
            registry_id: raw.registry_id,
            canonical_name: raw.name,
            aliases: raw.aliases,
            location: GeoPoint::new(raw.lat, raw.lon),
        });
    }
    Ok(Ingested {
        records,
        rejections,
        rows_read,
    })
}

#[derive(Deserialize)]
struct RawCompany {
    id: String,
    description: String,
    categories: Vec<String>,
    #[serde(default)]
    founded_year: Option<i64>,
    lat: f64,
    lon: f64,
}

pub fn ingest_companies(path: &Path) -> Result<Ingested<CompanyRecord>, IngestError> {
    let rows: Vec<(usize, RawCompany)> = parse_jsonl(path)?;
    let rows_read = rows.len();
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    let mut rejections = Vec::new();
    for (line, raw) in rows {
        let reason = if let Some(r) = coordinate_reason(raw.lat, raw.lon) {
            Some(r)
        } else if seen.contains(&raw.id) {
            Some("duplicate_id")
        } else {
            None
        };
        if let Some(reason) = reason {
            rejections.push(Rejection::new(line, reason, Some(&raw.id)));
            continue;
        }
        seen.insert(raw.id.clone());
        records.push(CompanyRecord {
            id: raw.id,
            description: raw.description,
            categories: raw
                .categories
                .iter()
                .map(|c| c.trim())
                .filter(|c| !c.is_empty())
                .map(str::to_string)
                .collect(),
            founded_year: raw.founded_year.map(|y| y as i32),
            location: GeoPoint::new(raw.lat, raw.lon),
            resolved_region: None,
        });
    }
    Ok(Ingested {
        records,
        rejections,
        rows_read,
    })
}

pub fn ingest_boundaries(path: &Path) -> Result<Ingested<Region>, IngestError> {
    parse_boundaries(&read_text(path)?, path)
}

/// Parses a GeoJSON FeatureCollection already in memory; `path` only labels
/// errors.
pub fn parse_boundaries(text: &str, path: &Path) -> Result<Ingested<Region>, IngestError> {
    let mismatch = |line: usize, message: String| IngestError::SchemaMismatch {
        path: path.to_path_buf(),
        line,
        message,
    };
    let collection = match text.parse::<geojson::GeoJson>() {
        Ok(geojson::GeoJson::FeatureCollection(fc)) => fc,
        Ok(_) => return Err(mismatch(0, "expected a FeatureCollection".into())),
        Err(e) => return Err(mismatch(0, e.to_string())),
    };

    let rows_read = collection.features.len();
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    let mut rejections = Vec::new();
    for (idx, feature) in collection.features.into_iter().enumerate() {
        let line = idx + 1;
        let prop = |key: &str| {
            feature
                .property(key)
                .and_then(|v| v.as_str())
                .map(str::to_string)
                .ok_or_else(|| mismatch(line, format!("feature lacks string property `{key}`")))
        };
        let region_id = prop("region_id")?;
        let country_code = prop("country_code")?;

        let boundary = match feature.geometry.as_ref().map(|g| &g.value) {
            Some(geojson::Value::Polygon(rings)) => Ok(vec![polygon_from_rings(rings)]),
            Some(geojson::Value::MultiPolygon(polys)) => {
                Ok(polys.iter().map(|p| polygon_from_rings(p)).collect())
            }
            _ => Err("unsupported_geometry"),
        };
        let outcome = boundary.and_then(|b| {
            let mp = MultiPolygon(b);
            geo::validate_multipolygon(&mp).map(|_| mp).map_err(|e| e.reason_code())
        });
        let outcome = outcome.and_then(|mp| {
            if seen.contains(&region_id) {
                Err("duplicate_id")
            } else {
                Ok(mp)
            }
        });
        match outcome {
            Ok(boundary) => {
                seen.insert(region_id.clone());
                records.push(Region {
                    region_id,
                    country_code,
                    boundary,
                });
            }
            Err(reason) => rejections.push(Rejection::new(line, reason, Some(&region_id))),
        }
    }
    Ok(Ingested {
        records,
        rejections,
        rows_read,
    })
}

// GeoJSON positions are [lon, lat].
fn polygon_from_rings(rings: &[Vec<Vec<f64>>]) -> Polygon {
    let mut rings = rings.iter().map(|ring| {
        Ring(
            ring.iter()
                .map(|pos| GeoPoint::new(pos.get(1).copied().unwrap_or(f64::NAN), pos[0]))
                .collect(),
        )
    });
    let exterior = rings.next().unwrap_or_else(|| Ring(Vec::new()));
    Polygon {
        exterior,
        holes: rings.collect(),
    }
}
