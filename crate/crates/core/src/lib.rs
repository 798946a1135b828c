//! Patent analytics: bulk XML ingestion, a single-file patent store with
//! inventor/organisation analytics, grant-lag regression with conformal
//! confidence scores, and a JSON HTTP API.

pub mod api;
pub mod cli;
pub mod document;
pub mod error;
pub mod features;
pub mod ingest;
pub mod model;
pub mod store;
pub mod synthetic;

pub use document::{Claim, DocKind, PatentDocument, PersonName};
pub use error::{Error, Result};
