//! Attribute catalog: the ordered universe of detectable attributes.
//!
//! The catalog fixes the canonical column order of every dataset built from
//! it. Attributes are either browser extensions (detectable through web
//! accessible resources) or web logins (detectable through a login-redirect
//! image probe or a CSP violation report).

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AttributeKind {
    Extension,
    Login,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DetectionMethod {
    /// Web-accessible-resource load probe (extensions).
    WAR,
    /// Login-redirect image probe (logins; requires JavaScript).
    RedirectImage,
    /// CSP violation report triggered by a cross-domain login redirect
    /// (logins; works without JavaScript).
    CSPReport,
}

/// One detectable attribute plus the months of the observation window in
/// which it was detectable (bit k set = detectable in month k).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeDescriptor {
    pub id: String,
    pub kind: AttributeKind,
    pub detection: DetectionMethod,
    pub stability: u64,
}

impl AttributeDescriptor {
    pub fn new(
        id: impl Into<String>,
        kind: AttributeKind,
        detection: DetectionMethod,
        stability: u64,
    ) -> Self {
        Self {
            id: id.into(),
            kind,
            detection,
            stability,
        }
    }

    /// Extension detectable in every month 0..month_count.
    pub fn extension(id: impl Into<String>, month_count: u32) -> Self {
        Self::new(
            id,
            AttributeKind::Extension,
            DetectionMethod::WAR,
            full_bitmap(month_count),
        )
    }

    /// Login detectable in every month 0..month_count.
    pub fn login(id: impl Into<String>, detection: DetectionMethod, month_count: u32) -> Self {
        Self::new(
            id,
            AttributeKind::Login,
            detection,
            full_bitmap(month_count),
        )
    }

    pub fn detectable_in_month(&self, month: u32) -> bool {
        month < 64 && self.stability & (1 << month) != 0
    }

    /// Detectable in every month of the observation window.
    pub fn is_stable(&self, month_count: u32) -> bool {
        self.stability & full_bitmap(month_count) == full_bitmap(month_count)
    }

    fn validate(&self) -> Result<()> {
        let ok = match self.kind {
            AttributeKind::Extension => self.detection == DetectionMethod::WAR,
            AttributeKind::Login => matches!(
                self.detection,
                DetectionMethod::RedirectImage | DetectionMethod::CSPReport
            ),
        };
        if !ok {
            return Err(Error::KindDetectionMismatch {
                id: self.id.clone(),
                kind: kind_name(self.kind),
                detection: detection_name(self.detection),
            });
        }
        if self.stability == 0 {
            return Err(Error::EmptyStability(self.id.clone()));
        }
        Ok(())
    }
}

fn full_bitmap(month_count: u32) -> u64 {
    debug_assert!((1..=64).contains(&month_count));
    if month_count >= 64 {
        u64::MAX
    } else {
        (1u64 << month_count) - 1
    }
}

fn kind_name(k: AttributeKind) -> &'static str {
    match k {
        AttributeKind::Extension => "Extension",
        AttributeKind::Login => "Login",
    }
}

fn detection_name(d: DetectionMethod) -> &'static str {
    match d {
        DetectionMethod::WAR => "WAR",
        DetectionMethod::RedirectImage => "RedirectImage",
        DetectionMethod::CSPReport => "CSPReport",
    }
}

/// Ordered attribute registry; attribute order is the canonical column order
/// of every dataset built from this catalog.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeCatalog {
    attributes: Vec<AttributeDescriptor>,
    month_count: u32,
    index: HashMap<String, usize>,
}

impl AttributeCatalog {
    pub fn new(attributes: Vec<AttributeDescriptor>) -> Result<Self> {
        if attributes.is_empty() {
            return Err(Error::EmptyCatalog);
        }
        let mut index = HashMap::with_capacity(attributes.len());
        let mut widest = 1u32;
        for (i, attr) in attributes.iter().enumerate() {
            attr.validate()?;
            if index.insert(attr.id.clone(), i).is_some() {
                return Err(Error::DuplicateAttributeId(attr.id.clone()));
            }
            widest = widest.max(64 - attr.stability.leading_zeros());
        }
        Ok(Self {
            attributes,
            month_count: widest,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn attributes(&self) -> &[AttributeDescriptor] {
        &self.attributes
    }

    pub fn attribute(&self, column: usize) -> &AttributeDescriptor {
        &self.attributes[column]
    }

    /// Number of months in the observation window (widest stability bitmap).
    pub fn month_count(&self) -> u32 {
        self.month_count
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownAttribute(id.to_string()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    /// Column indices of all attributes of the given kind.
    pub fn columns_of_kind(&self, kind: AttributeKind) -> Vec<usize> {
        self.attributes
            .iter()
            .enumerate()
            .filter(|(_, a)| a.kind == kind)
            .map(|(i, _)| i)
            .collect()
    }

    /// Column indices of all attributes using the given detection method.
    pub fn columns_of_detection(&self, detection: DetectionMethod) -> Vec<usize> {
        self.attributes
            .iter()
            .enumerate()
            .filter(|(_, a)| a.detection == detection)
            .map(|(i, _)| i)
            .collect()
    }

    /// Column indices of attributes detectable in every month.
    pub fn stable_columns(&self) -> Vec<usize> {
        self.attributes
            .iter()
            .enumerate()
            .filter(|(_, a)| a.is_stable(self.month_count))
            .map(|(i, _)| i)
            .collect()
    }

    /// SHA-256 over the canonical encoding of the catalog; stored in dataset
    /// snapshots so a snapshot cannot be silently paired with the wrong
    /// catalog.
    pub fn digest(&self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        hasher.update(self.month_count.to_le_bytes());
        for attr in &self.attributes {
            hasher.update((attr.id.len() as u64).to_le_bytes());
            hasher.update(attr.id.as_bytes());
            hasher.update([attr.kind as u8, attr.detection as u8]);
            hasher.update(attr.stability.to_le_bytes());
        }
        hasher.finalize().into()
    }

    pub fn from_reader(reader: impl Read) -> Result<Self> {
        let entries: Vec<CatalogEntry> = serde_json::from_reader(reader)?;
        let attributes = entries
            .into_iter()
            .map(CatalogEntry::into_descriptor)
            .collect::<Result<Vec<_>>>()?;
        Self::new(attributes)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(std::io::BufReader::new(file))
    }

    pub fn to_writer(&self, writer: impl std::io::Write) -> Result<()> {
        let entries: Vec<CatalogEntry> = self.attributes.iter().map(CatalogEntry::from).collect();
        serde_json::to_writer_pretty(writer, &entries)?;
        Ok(())
    }
}

/// Catalog file entry: `{"id", "kind", "detection", "stability_months": [0, 1]}`.
#[derive(Debug, Serialize, Deserialize)]
struct CatalogEntry {
    id: String,
    kind: AttributeKind,
    detection: DetectionMethod,
    stability_months: Vec<u32>,
}

impl CatalogEntry {
    fn into_descriptor(self) -> Result<AttributeDescriptor> {
        let mut stability = 0u64;
        for month in self.stability_months {
            if month >= 64 {
                return Err(Error::StabilityMonthOutOfRange { id: self.id, month });
            }
            stability |= 1 << month;
        }
        Ok(AttributeDescriptor {
            id: self.id,
            kind: self.kind,
            detection: self.detection,
            stability,
        })
    }
}

impl From<&AttributeDescriptor> for CatalogEntry {
    fn from(attr: &AttributeDescriptor) -> Self {
        CatalogEntry {
            id: attr.id.clone(),
            kind: attr.kind,
            detection: attr.detection,
            stability_months: (0..64).filter(|m| attr.stability & (1 << m) != 0).collect(),
        }
    }
}

/// Load a catalog from a JSON file: an array of
/// `{"id", "kind", "detection", "stability_months"}` objects.
pub fn load_catalog(path: impl AsRef<Path>) -> Result<AttributeCatalog> {
    AttributeCatalog::from_path(path)
}
