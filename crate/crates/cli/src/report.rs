//! Plot-ready report files and the run manifest.

use std::collections::BTreeMap;
use std::path::Path;

use gptatlas_core::corpus::{load_artifact, ArtifactError, Cell, PipelineArtifact, Region, Table};
use gptatlas_core::geo::Ring;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::pipeline::{
    artifact_file, Workspace, METRICS_TABLES, MODEL_REPORT, MODEL_SUITE, RELATEDNESS_MATRIX,
};
use crate::stages::{self, Files};
use crate::CliError;

pub const MANIFEST: &str = "manifest.json";

/// Every report file with the artifact it is derived from and, for tables,
/// the table inside that artifact.
pub const REPORT_FILES: [(&str, &str, &str); 13] = [
    ("rca_by_country.csv", METRICS_TABLES, "rca_country"),
    ("rca_by_region.csv", METRICS_TABLES, "rca_region"),
    ("rca_changes.csv", METRICS_TABLES, "rca_changes"),
    ("concentration_timeseries.csv", METRICS_TABLES, "concentration"),
    ("dispersion_timeseries.csv", METRICS_TABLES, "dispersion"),
    ("dl_share_timeseries.csv", METRICS_TABLES, "dl_share"),
    ("subject_shares.csv", METRICS_TABLES, "subject_shares"),
    ("impact_shares.csv", METRICS_TABLES, "impact"),
    ("relatedness_subjects.csv", RELATEDNESS_MATRIX, "subjects"),
    ("relatedness_industry.csv", RELATEDNESS_MATRIX, "industry"),
    ("regression_table.json", MODEL_SUITE, ""),
    ("per_subject_coefficients.csv", MODEL_REPORT, "per_subject"),
    ("choropleth.geojson", METRICS_TABLES, "rca_region"),
];

fn ring_coords(ring: &Ring) -> Value {
    Value::Array(ring.0.iter().map(|p| json!([p.lon, p.lat])).collect())
}

fn cell_json(c: Option<&Cell>) -> Value {
    match c.and_then(Cell::as_f64) {
        Some(v) => json!(v),
        None => Value::Null,
    }
}

/// Regions as a FeatureCollection carrying their DL RCA per period, read
/// from the same table as `rca_by_region.csv`.
pub fn choropleth(regions: &[Region], rca_region: &Table) -> Result<Value, CliError> {
    let (li, pi, ci, vi) = (
        stages::column(rca_region, "location")?,
        stages::column(rca_region, "period")?,
        stages::column(rca_region, "category")?,
        stages::column(rca_region, "rca")?,
    );
    let mut values: BTreeMap<(&str, &str), &Cell> = BTreeMap::new();
    for row in &rca_region.rows {
        if row[ci].as_str() == Some(stages::DL) {
            values.insert((row[li].as_str().unwrap_or_default(), row[pi].as_str().unwrap_or_default()), &row[vi]);
        }
    }
    let mut sorted: Vec<&Region> = regions.iter().collect();
    sorted.sort_by(|a, b| a.region_id.cmp(&b.region_id));
    let features: Vec<Value> = sorted
        .into_iter()
        .map(|r| {
            let polygons: Vec<Value> = r
                .boundary
                .0
                .iter()
                .map(|p| Value::Array(std::iter::once(&p.exterior).chain(&p.holes).map(ring_coords).collect()))
                .collect();
            json!({
                "type": "Feature",
                "properties": {
                    "region_id": r.region_id,
                    "country_code": r.country_code,
                    "rca_dl_t0": cell_json(values.get(&(r.region_id.as_str(), "t0")).copied()),
                    "rca_dl_t1": cell_json(values.get(&(r.region_id.as_str(), "t1")).copied()),
                },
                "geometry": {"type": "MultiPolygon", "coordinates": polygons},
            })
        })
        .collect();
    Ok(json!({"type": "FeatureCollection", "features": features}))
}

fn pretty(v: &Value) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(v).expect("json serializes");
    bytes.push(b'\n');
    bytes
}

fn read_artifact(dir: &Path, name: &str) -> Result<Option<PipelineArtifact>, CliError> {
    let path = dir.join(artifact_file(name));
    if !path.is_file() {
        return Ok(None);
    }
    match load_artifact(&path) {
        Ok(a) => Ok(Some(a)),
        Err(e @ ArtifactError::IncompatibleSchema { .. }) => Err(CliError::Validation(e.to_string())),
        Err(e) => Err(CliError::Internal(anyhow::anyhow!(e))),
    }
}

/// Writes every report computable from the artifacts under `out_dir`; the
/// manifest lists the rest with the artifact each one is waiting for.
/// `header` is copied into the manifest.
pub fn emit_reports(out_dir: &Path, regions: &[Region], header: Value) -> Result<BTreeMap<String, Vec<u8>>, CliError> {
    let mut loaded: BTreeMap<&str, Option<PipelineArtifact>> = BTreeMap::new();
    for (_, source, _) in REPORT_FILES {
        if source != MODEL_SUITE && !loaded.contains_key(source) {
            loaded.insert(source, read_artifact(out_dir, source)?);
        }
    }
    let mut files = BTreeMap::new();
    let mut listed = Vec::new();
    let mut omitted = Vec::new();
    for (name, source, table) in REPORT_FILES {
        let (bytes, records) = if source == MODEL_SUITE {
            match std::fs::read(out_dir.join(artifact_file(MODEL_SUITE))) {
                Ok(b) => {
                    let v: Value = serde_json::from_slice(&b).map_err(|e| CliError::Internal(e.into()))?;
                    let models = v["models"].as_array().map_or(0, Vec::len);
                    (b, models)
                }
                Err(_) => {
                    omitted.push(json!({"name": name, "missing": source}));
                    continue;
                }
            }
        } else {
            let Some(art) = loaded[source].as_ref() else {
                omitted.push(json!({"name": name, "missing": source}));
                continue;
            };
            let t = art.table(table).map_err(|e| CliError::Internal(anyhow::anyhow!(e)))?;
            if name.ends_with(".geojson") {
                let v = choropleth(regions, t)?;
                let n = v["features"].as_array().map_or(0, Vec::len);
                (pretty(&v), n)
            } else {
                (t.to_csv_string().into_bytes(), t.len())
            }
        };
        let format = name.rsplit('.').next().unwrap_or_default();
        listed.push(json!({
            "name": name,
            "format": format,
            "source": source,
            "records": records,
            "sha256": hex::encode(Sha256::digest(&bytes)),
        }));
        files.insert(name.to_string(), bytes);
    }
    let mut manifest = header;
    manifest["files"] = Value::Array(listed);
    manifest["omitted"] = Value::Array(omitted);
    files.insert(MANIFEST.to_string(), pretty(&manifest));
    Ok(files)
}

pub(crate) fn emit(ws: &Workspace) -> Result<Files, CliError> {
    let regions = stages::regions(ws)?;
    let mut parameters = serde_json::to_value(&ws.cfg).expect("config serializes");
    if let Some(obj) = parameters.as_object_mut() {
        obj.remove("inputs");
        obj.remove("out_dir");
    }
    let header = json!({
        "config_hash": ws.config_hash,
        "seed": ws.cfg.seed,
        "input_digests": ws.input_digests,
        "period_split": {"t0": format!("year <= {}", ws.cfg.split.t0_max_year), "t1": format!("year > {}", ws.cfg.split.t0_max_year)},
        "quantiles": "nearest-rank",
        "parameters": parameters,
    });
    Ok(emit_reports(&ws.out, &regions.records, header)?
        .into_iter()
        .map(|(name, bytes)| (format!("reports/{name}"), bytes))
        .collect())
}
