use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum ArtifactError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed artifact {path}: {source}")]
    Malformed {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("incompatible_schema: {kind} artifact has schema_version {found}, expected {expected}")]
    IncompatibleSchema {
        kind: ArtifactKind,
        found: u32,
        expected: u32,
    },
    #[error("table `{table}`: {message}")]
    Table { table: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    LinkedCorpus,
    LabeledCorpus,
    ActivityMatrix,
    RelatednessMatrix,
    MetricsTables,
    FeatureTable,
    ModelReport,
}

impl ArtifactKind {
    /// Current on-disk schema version for the kind.
    pub fn schema_version(self) -> u32 {
        1
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ArtifactKind::LinkedCorpus => "linked_corpus",
            ArtifactKind::LabeledCorpus => "labeled_corpus",
            ArtifactKind::ActivityMatrix => "activity_matrix",
            ArtifactKind::RelatednessMatrix => "relatedness_matrix",
            ArtifactKind::MetricsTables => "metrics_tables",
            ArtifactKind::FeatureTable => "feature_table",
            ArtifactKind::ModelReport => "model_report",
        }
    }
}

impl std::fmt::Display for ArtifactKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One table cell. Serialized untagged so artifacts read as plain JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
    List(Vec<String>),
}

impl Cell {
    /// Non-finite floats have no JSON form and become null.
    pub fn float(v: f64) -> Cell {
        if v.is_finite() {
            Cell::Float(v)
        } else {
            Cell::Null
        }
    }

    pub fn opt_float(v: Option<f64>) -> Cell {
        v.map_or(Cell::Null, Cell::float)
    }

    pub fn text(s: impl Into<String>) -> Cell {
        Cell::Text(s.into())
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Float(v) => Some(*v),
            Cell::Int(v) => Some(*v as f64),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            Cell::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Cell::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Cell::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[String]> {
        match self {
            Cell::List(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Cell::Null)
    }

    /// CSV rendering: lists are `;`-joined, null is empty.
    pub fn to_csv_field(&self) -> String {
        match self {
            Cell::Null => String::new(),
            Cell::Bool(b) => b.to_string(),
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::List(v) => v.join(";"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Panics when the row width differs from the header; tables are built
    /// internally so a mismatch is a programming error.
    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width mismatch");
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = csv::WriterBuilder::new().from_writer(Vec::new());
        out.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            out.write_record(row.iter().map(Cell::to_csv_field))
                .expect("in-memory write");
        }
        String::from_utf8(out.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    /// Input label → SHA-256 digest.
    pub input_digests: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineArtifact {
    pub kind: ArtifactKind,
    pub schema_version: u32,
    pub provenance: Provenance,
    /// Named tables; a BTreeMap keeps serialization order stable.
    pub payload: BTreeMap<String, Table>,
}

impl PipelineArtifact {
    pub fn new(kind: ArtifactKind, provenance: Provenance) -> Self {
        Self {
            kind,
            schema_version: kind.schema_version(),
            provenance,
            payload: BTreeMap::new(),
        }
    }

    pub fn with_table(mut self, name: &str, table: Table) -> Self {
        self.payload.insert(name.to_string(), table);
        self
    }

    pub fn table(&self, name: &str) -> Result<&Table, ArtifactError> {
        self.payload.get(name).ok_or_else(|| ArtifactError::Table {
            table: name.to_string(),
            message: format!("missing from {} artifact", self.kind),
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut bytes = serde_json::to_vec_pretty(self).expect("artifact serializes");
        bytes.push(b'\n');
        bytes
    }

    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_bytes()))
    }
}

/// Writes the artifact and returns the SHA-256 of the bytes written.
pub fn persist_artifact(artifact: &PipelineArtifact, path: &Path) -> Result<String, ArtifactError> {
    let bytes = artifact.to_bytes();
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| ArtifactError::Io {
            path: parent.display().to_string(),
            source,
        })?;
    }
    fs::write(path, &bytes).map_err(|source| ArtifactError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn load_artifact(path: &Path) -> Result<PipelineArtifact, ArtifactError> {
    let bytes = fs::read(path).map_err(|source| ArtifactError::Io {
        path: path.display().to_string(),
        source,
    })?;
    // Check the version before the full decode so a newer payload layout
    // reports as incompatible rather than malformed.
    #[derive(Deserialize)]
    struct Header {
        kind: ArtifactKind,
        schema_version: u32,
    }
    let malformed = |source| ArtifactError::Malformed {
        path: path.display().to_string(),
        source,
    };
    let header: Header = serde_json::from_slice(&bytes).map_err(malformed)?;
    let expected = header.kind.schema_version();
    if header.schema_version != expected {
        return Err(ArtifactError::IncompatibleSchema {
            kind: header.kind,
            found: header.schema_version,
            expected,
        });
    }
    serde_json::from_slice(&bytes).map_err(malformed)
}
