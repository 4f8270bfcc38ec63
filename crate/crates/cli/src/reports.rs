//! Machine-readable report shapes emitted by the CLI. Everything here
//! round-trips through serde_json.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use uqfp_core::clean::CleaningReport;
use uqfp_core::metrics::{AnonymityHistogram, EntropyResult, ThresholdUniqueness};
use uqfp_core::select::{FingerprintPattern, FingerprintTemplate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub report: CleaningReport,
    pub snapshot: String,
    pub users: usize,
    pub attributes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeReport {
    pub selector: String,
    pub n: usize,
    pub m: usize,
    pub uniqueness: f64,
    pub histogram: AnonymityHistogram,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub binned: Option<Vec<(String, usize)>>,
    pub entropy: BTreeMap<String, EntropyResult>,
    pub min_detected: BTreeMap<String, Vec<ThresholdUniqueness>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csp: Option<CspBreakdown>,
}

/// Uniqueness of the JavaScript-less view: CSP-detectable login bits, the
/// user-agent string, and both combined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CspBreakdown {
    pub csp_columns: usize,
    pub uniqueness_csp_bits: f64,
    pub uniqueness_user_agent: f64,
    pub uniqueness_combined: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetedReport {
    pub pattern: FingerprintPattern,
    pub matched_users: Vec<String>,
    pub detected_attributes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternLengthStats {
    pub users: usize,
    pub mean_pattern_length: f64,
    pub mean_detected_attributes: f64,
    pub length_histogram: BTreeMap<usize, usize>,
}

/// Pattern-size distributions for users the attack could and could not
/// isolate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetedSweepReport {
    pub unique: PatternLengthStats,
    pub non_unique: PatternLengthStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralReport {
    pub template: FingerprintTemplate,
    pub attributes_tested: usize,
    pub level_a: f64,
    pub final_uniqueness: f64,
    pub histogram: AnonymityHistogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffRow {
    pub combination: Vec<String>,
    pub uniqueness: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub external: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffReport {
    pub privacy_attributes: Vec<String>,
    pub rows: Vec<TradeoffRow>,
}

/// External metric entry joined onto tradeoff rows by combination equality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalMetric {
    pub combination: Vec<String>,
    pub value: f64,
}
