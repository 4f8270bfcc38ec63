//! Seeded synthetic population generator.
//!
//! Users draw each attribute independently from a per-attribute popularity
//! (a Zipf shape scaled to a mean-detections target, or an explicit list).
//! Per-user flags mirror the collection protocol: a JavaScript-disabled user
//! has no extensions detected and only CSP-detectable logins; a user with
//! third-party cookies blocked has no logins detected at all.
//!
//! Generation uses ChaCha8 with one stream per user index, so users can be
//! generated in parallel (or in any order) with identical output.

use std::io::Read;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::{AttributeCatalog, AttributeDescriptor, DetectionMethod};
use crate::error::{Error, Result};
use crate::record::{BrowserFamily, RawRecord};

/// Popularity shape for one attribute family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Popularity {
    /// Rank-r weight 1 / r^s; requires a mean-detections target to fix the
    /// scale.
    Zipf { s: f64 },
    /// Explicit per-attribute probabilities (used verbatim unless a mean
    /// target rescales them).
    Empirical(Vec<f64>),
}

/// Optional co-installation coupling between two extensions: after the
/// independent draws, `second` is overwritten with `first`'s outcome with
/// probability `weight`. `weight` 0 is a no-op, 1 makes the columns equal;
/// in between it pulls the pair towards positive correlation (and shifts
/// `second`'s marginal towards `first`'s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationPair {
    pub first: usize,
    pub second: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub n_users: usize,
    pub n_extensions: usize,
    pub n_logins: usize,
    pub extension_popularity: Popularity,
    pub login_popularity: Popularity,
    #[serde(default)]
    pub mean_extensions_per_user: Option<f64>,
    #[serde(default)]
    pub mean_logins_per_user: Option<f64>,
    #[serde(default)]
    pub fraction_js_disabled: f64,
    #[serde(default)]
    pub fraction_cookies_blocked: f64,
    /// Fraction of login sites detectable through CSP reports (the leading
    /// ones in column order).
    #[serde(default = "default_csp_fraction")]
    pub csp_login_fraction: f64,
    /// Pairwise extension coupling, applied in order after the independent
    /// draws. Empty by default: attributes are sampled independently.
    #[serde(default)]
    pub correlation_mixer: Vec<CorrelationPair>,
    pub seed: u64,
}

fn default_csp_fraction() -> f64 {
    0.3
}

impl PopulationSpec {
    /// Zipf-extension-only population with everything else neutral.
    pub fn zipf_extensions(
        n_users: usize,
        n_extensions: usize,
        s: f64,
        mean: f64,
        seed: u64,
    ) -> Self {
        Self {
            n_users,
            n_extensions,
            n_logins: 0,
            extension_popularity: Popularity::Zipf { s },
            login_popularity: Popularity::Empirical(vec![]),
            mean_extensions_per_user: Some(mean),
            mean_logins_per_user: None,
            fraction_js_disabled: 0.0,
            fraction_cookies_blocked: 0.0,
            csp_login_fraction: default_csp_fraction(),
            correlation_mixer: Vec::new(),
            seed,
        }
    }

    pub fn from_reader(reader: impl Read) -> Result<Self> {
        let spec: PopulationSpec = serde_json::from_reader(reader)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(std::io::BufReader::new(file))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_users == 0 {
            return Err(Error::InvalidPopulationSpec(
                "n_users must be at least 1".into(),
            ));
        }
        for (name, f) in [
            ("fraction_js_disabled", self.fraction_js_disabled),
            ("fraction_cookies_blocked", self.fraction_cookies_blocked),
            ("csp_login_fraction", self.csp_login_fraction),
        ] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::InvalidPopulationSpec(format!(
                    "{name} must be in [0, 1]"
                )));
            }
        }
        for pair in &self.correlation_mixer {
            if pair.first >= self.n_extensions || pair.second >= self.n_extensions {
                return Err(Error::InvalidPopulationSpec(format!(
                    "correlation pair ({}, {}) out of range for {} extensions",
                    pair.first, pair.second, self.n_extensions
                )));
            }
            if pair.first == pair.second {
                return Err(Error::InvalidPopulationSpec(
                    "correlation pair must couple two distinct extensions".into(),
                ));
            }
            if !(0.0..=1.0).contains(&pair.weight) {
                return Err(Error::InvalidPopulationSpec(
                    "correlation weight must be in [0, 1]".into(),
                ));
            }
        }
        self.extension_probabilities()?;
        self.login_probabilities()?;
        Ok(())
    }

    fn number_of_csp_logins(&self) -> usize {
        ((self.csp_login_fraction * self.n_logins as f64).round() as usize).min(self.n_logins)
    }

    pub fn extension_probabilities(&self) -> Result<Vec<f64>> {
        resolve_probabilities(
            &self.extension_popularity,
            self.n_extensions,
            self.mean_extensions_per_user,
        )
    }

    pub fn login_probabilities(&self) -> Result<Vec<f64>> {
        resolve_probabilities(
            &self.login_popularity,
            self.n_logins,
            self.mean_logins_per_user,
        )
    }

    /// Catalog matching this spec: extensions first, then logins; the first
    /// `csp_login_fraction` of logins report through CSP.
    pub fn catalog(&self) -> Result<AttributeCatalog> {
        let csp_count = self.number_of_csp_logins();
        let mut attrs = Vec::with_capacity(self.n_extensions + self.n_logins);
        for i in 0..self.n_extensions {
            attrs.push(AttributeDescriptor::extension(extension_id(i), 1));
        }
        for i in 0..self.n_logins {
            let detection = if i < csp_count {
                DetectionMethod::CSPReport
            } else {
                DetectionMethod::RedirectImage
            };
            attrs.push(AttributeDescriptor::login(login_id(i), detection, 1));
        }
        AttributeCatalog::new(attrs)
    }
}

pub fn extension_id(index: usize) -> String {
    format!("ext{index:05}")
}

pub fn login_id(index: usize) -> String {
    format!("log{index:04}")
}

/// Zipf weights for ranks 1..=m: weight(r) = 1 / r^s.
pub fn zipf_weights(m: usize, s: f64) -> Vec<f64> {
    (1..=m).map(|r| 1.0 / (r as f64).powf(s)).collect()
}

/// Scale a base shape so the expected detections per user (the sum of the
/// per-attribute probabilities) hits `target_mean`; shape is preserved up to
/// the common factor. Errors when any scaled probability would exceed 1.
pub fn calibrate_popularity(target_mean: f64, base: &[f64]) -> Result<Vec<f64>> {
    if target_mean < 0.0 {
        return Err(Error::InvalidPopulationSpec(
            "mean target must be non-negative".into(),
        ));
    }
    if target_mean == 0.0 {
        return Ok(vec![0.0; base.len()]);
    }
    let total: f64 = base.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidPopulationSpec(
            "cannot scale an all-zero shape to a positive mean".into(),
        ));
    }
    let factor = target_mean / total;
    let probs: Vec<f64> = base.iter().map(|w| w * factor).collect();
    if let Some((index, &prob)) = probs.iter().enumerate().find(|(_, p)| **p > 1.0 + 1e-12) {
        return Err(Error::InfeasibleMeanTarget {
            target: target_mean,
            index,
            prob,
        });
    }
    Ok(probs.into_iter().map(|p| p.min(1.0)).collect())
}

fn resolve_probabilities(
    popularity: &Popularity,
    m: usize,
    mean_target: Option<f64>,
) -> Result<Vec<f64>> {
    if m == 0 {
        return Ok(Vec::new());
    }
    match popularity {
        Popularity::Zipf { s } => {
            let target = mean_target.ok_or_else(|| {
                Error::InvalidPopulationSpec(
                    "zipf popularity needs a mean-detections target".into(),
                )
            })?;
            calibrate_popularity(target, &zipf_weights(m, *s))
        }
        Popularity::Empirical(probs) => {
            if probs.len() != m {
                return Err(Error::PopularityLengthMismatch {
                    got: probs.len(),
                    expected: m,
                });
            }
            if let Some(&bad) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(Error::InvalidProbability(bad));
            }
            match mean_target {
                Some(target) => calibrate_popularity(target, probs),
                None => Ok(probs.clone()),
            }
        }
    }
}

/// Generate one raw record per user, deterministically under the spec seed.
pub fn generate(spec: &PopulationSpec) -> Result<Vec<RawRecord>> {
    spec.validate()?;
    let ext_p = spec.extension_probabilities()?;
    let log_p = spec.login_probabilities()?;
    let csp_count = spec.number_of_csp_logins();
    let ext_ids: Vec<String> = (0..spec.n_extensions).map(extension_id).collect();
    let log_ids: Vec<String> = (0..spec.n_logins).map(login_id).collect();

    let records: Vec<RawRecord> = (0..spec.n_users)
        .into_par_iter()
        .map(|u| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(u as u64);
            let js_disabled = rng.gen::<f64>() < spec.fraction_js_disabled;
            let cookies_blocked = rng.gen::<f64>() < spec.fraction_cookies_blocked;

            let mut record = RawRecord::new(format!("u{u:06}"));
            record.browser_family = BrowserFamily::Chrome;
            record.js_enabled = !js_disabled;
            record.user_agent = "synth/1.0".into();
            record.screen_resolution = "1920x1080".into();
            record.fonts = "synth-fonts".into();
            record.canvas_hash = "synth-canvas".into();

            if !js_disabled {
                let mut has: Vec<bool> = ext_p.iter().map(|&p| rng.gen::<f64>() < p).collect();
                for pair in &spec.correlation_mixer {
                    if rng.gen::<f64>() < pair.weight {
                        has[pair.second] = has[pair.first];
                    }
                }
                for (j, &h) in has.iter().enumerate() {
                    if h {
                        record.detected_extensions.insert(ext_ids[j].clone());
                    }
                }
            }
            if !cookies_blocked {
                for (j, &p) in log_p.iter().enumerate() {
                    if js_disabled && j >= csp_count {
                        continue; // redirect probe needs JavaScript
                    }
                    if rng.gen::<f64>() < p {
                        record.detected_logins.insert(log_ids[j].clone());
                    }
                }
            }
            record
        })
        .collect();
    Ok(records)
}
