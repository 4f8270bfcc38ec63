//! Raw observation records, one per experiment run, as collected by a
//! detection page (or produced by the simulator / synthetic generator).
//!
//! The interchange format is JSON Lines: one record per line, unknown fields
//! ignored. Only `user_id` is mandatory; all other fields have neutral
//! defaults so partial records parse (and are then handled by cleaning).

use std::collections::BTreeSet;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum BrowserFamily {
    Chrome,
    Firefox,
    Brave,
    Opera,
    Safari,
    IE,
    #[default]
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRecord {
    pub user_id: String,
    #[serde(default = "one")]
    pub experiment_seq: u32,
    #[serde(default)]
    pub browser_family: BrowserFamily,
    #[serde(default)]
    pub is_mobile: bool,
    #[serde(default)]
    pub user_agent: String,
    #[serde(default)]
    pub screen_resolution: String,
    #[serde(default)]
    pub fonts: String,
    #[serde(default)]
    pub canvas_hash: String,
    #[serde(default)]
    pub extension_detection_error: bool,
    #[serde(default = "yes")]
    pub js_enabled: bool,
    #[serde(default)]
    pub detected_extensions: BTreeSet<String>,
    #[serde(default)]
    pub detected_logins: BTreeSet<String>,
}

fn one() -> u32 {
    1
}

fn yes() -> bool {
    true
}

impl RawRecord {
    /// Fresh record with neutral non-empty environment fields, so it survives
    /// the empty-field cleaning rule unless a test wants otherwise.
    pub fn new(user_id: impl Into<String>) -> Self {
        Self {
            user_id: user_id.into(),
            experiment_seq: 1,
            browser_family: BrowserFamily::Chrome,
            is_mobile: false,
            user_agent: "Mozilla/5.0".to_string(),
            screen_resolution: "1920x1080".to_string(),
            fonts: "Arial,Helvetica".to_string(),
            canvas_hash: "c0ffee".to_string(),
            extension_detection_error: false,
            js_enabled: true,
            detected_extensions: BTreeSet::new(),
            detected_logins: BTreeSet::new(),
        }
    }

    /// Total count of detected attributes (extensions plus logins).
    pub fn detected_count(&self) -> usize {
        self.detected_extensions.len() + self.detected_logins.len()
    }
}

/// Parse JSON Lines records; blank lines are skipped, parse errors carry the
/// 1-based line number.
pub fn read_jsonl(reader: impl BufRead) -> Result<Vec<RawRecord>> {
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|source| Error::JsonLine {
            line: idx + 1,
            source,
        })?;
        records.push(record);
    }
    Ok(records)
}

pub fn read_jsonl_path(path: impl AsRef<Path>) -> Result<Vec<RawRecord>> {
    let file = std::fs::File::open(path)?;
    read_jsonl(std::io::BufReader::new(file))
}

pub fn write_jsonl(mut writer: impl Write, records: &[RawRecord]) -> Result<()> {
    for record in records {
        serde_json::to_writer(&mut writer, record)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}
