//! Analytics over binary behavioral datasets: users × boolean attributes
//! (installed browser extensions, active web logins), with anonymity-set
//! and entropy metrics, greedy fingerprint-selection attacks, a deterministic
//! detection-protocol simulator, and a seeded synthetic population generator.
//!
//! The pipeline is: obtain raw records (from a detection scenario, the
//! synthetic generator, or a JSON Lines file), clean them, build an immutable
//! [`dataset::BinaryDataset`] against an [`catalog::AttributeCatalog`], then
//! run metrics and attacks on it.

pub mod bits;
pub mod catalog;
pub mod clean;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod record;
pub mod select;
pub mod sim;
pub mod snapshot;
pub mod synth;

pub use catalog::{AttributeCatalog, AttributeDescriptor, AttributeKind, DetectionMethod};
pub use clean::{clean, CleaningConfig, CleaningReport, CleaningRule};
pub use dataset::{build_dataset, AttributePredicate, BinaryDataset, UserMeta, UserPredicate};
pub use error::{Error, Result};
pub use record::{BrowserFamily, RawRecord};
