use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by catalog loading, dataset construction, metrics and
/// attack operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate attribute id `{0}` in catalog")]
    DuplicateAttributeId(String),
    #[error("attribute `{id}`: kind {kind} cannot use detection method {detection}")]
    KindDetectionMismatch {
        id: String,
        kind: &'static str,
        detection: &'static str,
    },
    #[error("catalog has no attributes")]
    EmptyCatalog,
    #[error("attribute `{0}`: stability bitmap has no months set")]
    EmptyStability(String),
    #[error("attribute `{id}`: stability month {month} out of supported range 0..64")]
    StabilityMonthOutOfRange { id: String, month: u32 },

    #[error("unknown attribute id `{0}`")]
    UnknownAttribute(String),
    #[error("attribute `{id}` is not of kind {expected}")]
    WrongKind { id: String, expected: &'static str },
    #[error("unknown user id `{0}`")]
    UnknownUser(String),
    #[error("duplicate user id `{0}` in dataset input")]
    DuplicateUserId(String),
    #[error("no records to build a dataset from")]
    EmptyDataset,
    #[error("attribute filter selects zero attributes")]
    NoAttributesSelected,
    #[error("selection produced an empty dataset")]
    EmptySelection,

    #[error("attribute subset is empty")]
    EmptyAttributeSubset,
    #[error("attribute index {index} out of range for {m} columns")]
    AttributeIndexOutOfRange { index: usize, m: usize },
    #[error("column `{0}` is constant; correlation is undefined")]
    ConstantColumn(String),
    #[error("column `{0}` has no set bits; cosine similarity is undefined")]
    ZeroColumn(String),
    #[error("subset size {k} exceeds dataset size {n}")]
    SubsampleTooLarge { k: usize, n: usize },
    #[error("combination contains attribute not listed in the privacy set: `{0}`")]
    CombinationNotInPrivacySet(String),
    #[error("min-detected threshold must be at least 1")]
    InvalidThreshold,

    #[error("tolerance {0} must lie in [0, 1)")]
    InvalidTolerance(f64),
    #[error("allowed attribute set is empty")]
    EmptyAllowedSet,

    #[error("unknown extension id `{0}` in scenario")]
    UnknownExtension(String),
    #[error("unknown site id `{0}` in scenario")]
    UnknownSite(String),
    #[error("site `{0}` has no login redirect; redirect probe is not applicable")]
    SiteNotProbeable(String),
    #[error("duplicate id `{0}` in scenario")]
    DuplicateScenarioId(String),

    #[error("popularity list has {got} entries, expected {expected}")]
    PopularityLengthMismatch { got: usize, expected: usize },
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("mean target {target} infeasible: attribute {index} would need probability {prob}")]
    InfeasibleMeanTarget {
        target: f64,
        index: usize,
        prob: f64,
    },
    #[error("population spec invalid: {0}")]
    InvalidPopulationSpec(String),

    #[error("cleaning config invalid: {0}")]
    InvalidCleaningConfig(String),

    #[error("parse error at line {line}: {source}")]
    JsonLine {
        line: usize,
        source: serde_json::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("snapshot: bad magic (not a dataset snapshot)")]
    SnapshotBadMagic,
    #[error("snapshot: catalog digest mismatch (snapshot was built from a different catalog)")]
    SnapshotDigestMismatch,
    #[error("snapshot: truncated or corrupt ({0})")]
    SnapshotCorrupt(&'static str),
}
