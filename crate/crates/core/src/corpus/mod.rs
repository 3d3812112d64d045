//! Shared data model for the three input corpora plus region boundaries,
//! validated ingestion from local dumps, and persisted pipeline artifacts.

mod artifact;
mod ingest;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::geo::{GeoPoint, MultiPolygon};

pub use artifact::{
    load_artifact, persist_artifact, ArtifactError, ArtifactKind, Cell, PipelineArtifact,
    Provenance, Table,
};
pub use ingest::{
    file_digest, ingest_boundaries, parse_boundaries, ingest_companies, ingest_dataset, ingest_papers,
    ingest_registry, write_rejection_report, Dataset, DatasetKind, IngestConfig, IngestError,
    Ingested, Rejection,
};

/// One publication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperRecord {
    pub id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub subjects: BTreeSet<String>,
    pub pub_year: i32,
    pub citations: u64,
    pub affiliations: Vec<String>,
    /// Filled by the geocoding stage.
    #[serde(default)]
    pub resolved_regions: Option<BTreeSet<String>>,
}

/// A row of the institute registry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstituteEntry {
    pub registry_id: String,
    pub canonical_name: String,
    pub aliases: Vec<String>,
    pub location: GeoPoint,
}

impl InstituteEntry {
    /// Canonical name followed by aliases.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.canonical_name.as_str()).chain(self.aliases.iter().map(String::as_str))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompanyRecord {
    pub id: String,
    pub description: String,
    pub categories: BTreeSet<String>,
    pub founded_year: Option<i32>,
    pub location: GeoPoint,
    #[serde(default)]
    pub resolved_region: Option<String>,
}

impl CompanyRecord {
    /// Rows usable for classifier training carry both a description and at
    /// least one sector label.
    pub fn is_training_row(&self) -> bool {
        !self.categories.is_empty() && !self.description.trim().is_empty()
    }
}

/// An administrative region with its boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub region_id: String,
    pub country_code: String,
    pub boundary: MultiPolygon,
}
