//! Offline analytics for research-activity geography.
//!
//! The crate covers the whole measurement pipeline: loading paper, institute
//! and company dumps ([`corpus`]), resolving affiliation strings against an
//! institute registry ([`linkage`]), point-in-polygon geocoding and activity
//! aggregation ([`geo`]), topic-threshold document labeling ([`nlp`]),
//! co-occurrence and classifier based relatedness ([`relatedness`]),
//! specialization and concentration measures ([`metrics`]) and the regional
//! drivers regression with country-clustered errors ([`econometrics`]).

pub mod corpus;
pub mod econometrics;
pub mod geo;
pub mod linkage;
pub mod metrics;
pub mod nlp;
pub mod relatedness;
pub mod stats;

pub use corpus::{
    CompanyRecord, Dataset, DatasetKind, IngestConfig, Ingested, InstituteEntry, PaperRecord,
    Region,
};
