//! Record cleaning: removes users that tampered with detection or cannot be
//! probed reliably, then collapses each surviving user to a single best
//! experiment.
//!
//! Rules apply per user (a user removed by a rule loses all of their
//! experiments) and in a fixed top-to-bottom order, so each removed user is
//! counted under exactly one rule.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record::{BrowserFamily, RawRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CleaningRule {
    Mobile,
    ChromeExtensionError,
    NonChromeWithExtensions,
    Brave,
    EmptyFields,
    TooManyExperiments,
}

impl CleaningRule {
    pub const ALL: [CleaningRule; 6] = [
        CleaningRule::Mobile,
        CleaningRule::ChromeExtensionError,
        CleaningRule::NonChromeWithExtensions,
        CleaningRule::Brave,
        CleaningRule::EmptyFields,
        CleaningRule::TooManyExperiments,
    ];

    pub fn label(self) -> &'static str {
        match self {
            CleaningRule::Mobile => "Mobile browser users",
            CleaningRule::ChromeExtensionError => {
                "Chrome browser users with extension detection error"
            }
            CleaningRule::NonChromeWithExtensions => {
                "Non Chrome users with at least one extension detected"
            }
            CleaningRule::Brave => "Brave browser users",
            CleaningRule::EmptyFields => {
                "Users with an empty user-agent string, screen resolution, fonts, or canvas fingerprint"
            }
            CleaningRule::TooManyExperiments => "Users with too many experiments",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleaningConfig {
    pub drop_mobile: bool,
    pub drop_chrome_ext_error: bool,
    pub drop_nonchrome_with_extensions: bool,
    pub drop_brave: bool,
    pub drop_empty_fields: bool,
    /// Users with more experiments than this are removed entirely; `None`
    /// disables the rule.
    pub max_experiments: Option<u32>,
    /// Keep, per surviving user, only the experiment with the most detected
    /// attributes (ties: lowest experiment_seq).
    pub keep_best_experiment: bool,
}

impl Default for CleaningConfig {
    fn default() -> Self {
        Self {
            drop_mobile: true,
            drop_chrome_ext_error: true,
            drop_nonchrome_with_extensions: true,
            drop_brave: true,
            drop_empty_fields: true,
            max_experiments: Some(4),
            keep_best_experiment: true,
        }
    }
}

impl CleaningConfig {
    /// All rules disabled; records pass through unchanged.
    pub fn disabled() -> Self {
        Self {
            drop_mobile: false,
            drop_chrome_ext_error: false,
            drop_nonchrome_with_extensions: false,
            drop_brave: false,
            drop_empty_fields: false,
            max_experiments: None,
            keep_best_experiment: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.max_experiments == Some(0) {
            return Err(Error::InvalidCleaningConfig(
                "max_experiments must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Per-rule removed-user accounting; `initial_users - sum(removed) == final_users`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub initial_users: usize,
    pub removed: Vec<(CleaningRule, usize)>,
    pub final_users: usize,
}

impl CleaningReport {
    pub fn removed_by(&self, rule: CleaningRule) -> usize {
        self.removed
            .iter()
            .find(|(r, _)| *r == rule)
            .map(|(_, n)| *n)
            .unwrap_or(0)
    }

    pub fn total_removed(&self) -> usize {
        self.removed.iter().map(|(_, n)| n).sum()
    }
}

fn empty(field: &str) -> bool {
    field.trim().is_empty()
}

fn first_violated_rule(records: &[&RawRecord], config: &CleaningConfig) -> Option<CleaningRule> {
    if config.drop_mobile && records.iter().any(|r| r.is_mobile) {
        return Some(CleaningRule::Mobile);
    }
    if config.drop_chrome_ext_error
        && records
            .iter()
            .any(|r| r.browser_family == BrowserFamily::Chrome && r.extension_detection_error)
    {
        return Some(CleaningRule::ChromeExtensionError);
    }
    // Extension hits on a non-Chromium browser mean tampering. Brave is
    // Chromium-engined (its default extensions are legitimately detectable),
    // so it is exempt here and handled by its own rule below.
    if config.drop_nonchrome_with_extensions
        && records.iter().any(|r| {
            r.browser_family != BrowserFamily::Chrome
                && r.browser_family != BrowserFamily::Brave
                && !r.detected_extensions.is_empty()
        })
    {
        return Some(CleaningRule::NonChromeWithExtensions);
    }
    if config.drop_brave
        && records
            .iter()
            .any(|r| r.browser_family == BrowserFamily::Brave)
    {
        return Some(CleaningRule::Brave);
    }
    if config.drop_empty_fields
        && records.iter().any(|r| {
            empty(&r.user_agent)
                || empty(&r.screen_resolution)
                || empty(&r.fonts)
                || empty(&r.canvas_hash)
        })
    {
        return Some(CleaningRule::EmptyFields);
    }
    if let Some(max) = config.max_experiments {
        if records.len() > max as usize {
            return Some(CleaningRule::TooManyExperiments);
        }
    }
    None
}

/// Apply the cleaning rules and per-user experiment selection.
///
/// Surviving records keep their first-appearance user order; with
/// `keep_best_experiment` each user contributes exactly one record, the one
/// with the largest extensions+logins count (ties broken by lowest
/// `experiment_seq`).
pub fn clean(
    records: &[RawRecord],
    config: &CleaningConfig,
) -> Result<(Vec<RawRecord>, CleaningReport)> {
    config.validate()?;

    // Group records per user, preserving first-appearance order.
    let mut order: Vec<&str> = Vec::new();
    let mut by_user: HashMap<&str, Vec<&RawRecord>> = HashMap::new();
    for record in records {
        by_user
            .entry(record.user_id.as_str())
            .or_insert_with(|| {
                order.push(record.user_id.as_str());
                Vec::new()
            })
            .push(record);
    }

    let mut counts: HashMap<CleaningRule, usize> = HashMap::new();
    let mut kept: Vec<RawRecord> = Vec::new();
    for user in &order {
        let user_records = &by_user[user];
        if let Some(rule) = first_violated_rule(user_records, config) {
            *counts.entry(rule).or_insert(0) += 1;
            continue;
        }
        if config.keep_best_experiment {
            let best = user_records
                .iter()
                .max_by(|a, b| {
                    a.detected_count()
                        .cmp(&b.detected_count())
                        // On equal counts prefer the lower experiment_seq.
                        .then(b.experiment_seq.cmp(&a.experiment_seq))
                })
                .expect("user group is non-empty");
            kept.push((*best).clone());
        } else {
            kept.extend(user_records.iter().map(|r| (*r).clone()));
        }
    }

    let final_users = if config.keep_best_experiment {
        kept.len()
    } else {
        order.len() - counts.values().sum::<usize>()
    };
    let report = CleaningReport {
        initial_users: order.len(),
        removed: CleaningRule::ALL
            .iter()
            .map(|rule| (*rule, counts.get(rule).copied().unwrap_or(0)))
            .collect(),
        final_users,
    };
    debug_assert_eq!(
        report.initial_users - report.total_removed(),
        report.final_users
    );
    Ok((kept, report))
}
