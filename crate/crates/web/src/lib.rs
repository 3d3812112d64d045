//! Browser bindings for three interactive views: affiliation matching,
//! topic-threshold labeling and point-in-region lookup. Every export takes
//! and returns plain strings so the page needs no generated glue beyond
//! wasm-bindgen's.

use std::collections::BTreeSet;
use std::path::Path;

use gptatlas_core::corpus::{parse_boundaries, InstituteEntry};
use gptatlas_core::geo::{GeoPoint, RegionIndex};
use gptatlas_core::linkage::{
    convolved_score, match_institute, normalize_title, partial_ratio, token_sort_ratio, FuzzyMatchConfig, MatchCache,
    RegistryIndex,
};
use gptatlas_core::nlp::{assigned, preprocess_abstract, topic_score, PreprocessConfig, TopicModel};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn to_js(v: Value) -> String {
    v.to_string()
}

fn err(msg: impl std::fmt::Display) -> JsError {
    JsError::new(&msg.to_string())
}

/// Scores `query` against every line of `registry` (one institute name per
/// line, ids assigned by line order) and reports the cascade's decision.
#[wasm_bindgen]
pub fn match_affiliation(query: &str, registry: &str, min_accept_score: f64) -> Result<String, JsError> {
    let cfg = FuzzyMatchConfig {
        min_accept_score,
        ..Default::default()
    };
    cfg.validate().map_err(err)?;
    let entries: Vec<InstituteEntry> = registry
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(i, name)| InstituteEntry {
            registry_id: format!("inst-{:03}", i + 1),
            canonical_name: name.to_string(),
            aliases: Vec::new(),
            location: GeoPoint::new(0.0, 0.0),
        })
        .collect();
    let q = normalize_title(query);
    let mut candidates: Vec<Value> = entries
        .iter()
        .map(|e| {
            let n = normalize_title(&e.canonical_name);
            json!({
                "id": e.registry_id,
                "name": e.canonical_name,
                "token_sort": token_sort_ratio(&q, &n),
                "partial": partial_ratio(&q, &n),
                "combined": convolved_score(&q, &n, &cfg),
            })
        })
        .collect();
    candidates.sort_by(|a, b| b["combined"].as_f64().unwrap_or(0.0).total_cmp(&a["combined"].as_f64().unwrap_or(0.0)));
    let index = RegistryIndex::new(&entries);
    let result = match_institute(query, &index, &mut MatchCache::new(), &cfg);
    Ok(to_js(json!({
        "normalized": q,
        "matched_id": result.matched_id,
        "score": result.score,
        "method": result.method.as_str(),
        "candidates": candidates,
    })))
}

/// Labels `text` with a topic model given as CSV `topic_id,word,weight`.
/// Topics listed in `dl_topics` (comma separated ids) decide the DL flag.
#[wasm_bindgen]
pub fn label_text(text: &str, topics_csv: &str, dl_topics: &str, gamma: f64) -> Result<String, JsError> {
    if !(gamma >= 0.0) {
        return Err(err(format!("gamma must be non-negative, got {gamma}")));
    }
    let model = TopicModel::from_csv(topics_csv.as_bytes()).map_err(err)?;
    let dl: BTreeSet<u32> = dl_topics
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<u32>().map_err(|_| err(format!("bad topic id `{s}`"))))
        .collect::<Result<_, _>>()?;
    let cfg = PreprocessConfig {
        rare_min_count: 1,
        ngram_min_count: usize::MAX,
        min_tokens: 0,
        ..Default::default()
    };
    let tokens = preprocess_abstract(text, &cfg).map(|d| d.tokens).unwrap_or_default();
    let mut is_dl = false;
    let rows: Vec<Value> = model
        .topics()
        .iter()
        .map(|t| {
            let score = topic_score(&tokens, t);
            let hit = assigned(score, t, gamma, true);
            is_dl |= hit && dl.contains(&t.id());
            json!({
                "topic_id": t.id(),
                "score": score,
                "threshold": gamma * t.max_weight(),
                "assigned": hit,
                "dl": dl.contains(&t.id()),
                "matched": t.terms().iter().filter(|(w, _)| tokens.contains(w)).map(|(w, _)| w).collect::<Vec<_>>(),
            })
        })
        .collect();
    Ok(to_js(json!({"tokens": tokens, "topics": rows, "is_dl": is_dl})))
}

/// Regions of a GeoJSON FeatureCollection containing the point.
#[wasm_bindgen]
pub fn locate_point(lat: f64, lon: f64, geojson: &str) -> Result<String, JsError> {
    let regions = parse_boundaries(geojson, Path::new("boundaries")).map_err(err)?;
    let index = RegionIndex::new(&regions.records);
    let point = GeoPoint::new(lat, lon);
    let hits: Vec<Value> = index
        .containing(point)
        .iter()
        .map(|r| json!({"region_id": r.region_id, "country_code": r.country_code}))
        .collect();
    Ok(to_js(json!({
        "assigned": index.assign(point).map(|r| r.region_id.clone()),
        "containing": hits,
        "regions": regions.records.len(),
        "rejected": regions.rejections.len(),
    })))
}
