//! Deterministic simulation of the three detection protocols over mock
//! browser profiles: web-accessible-resource probes for extensions,
//! login-redirect image probes, and CSP-violation-report probes for logins.
//!
//! No network I/O happens; each probe is a pure function of the profile and
//! the probed object, mirroring what the corresponding page script could
//! observe. [`run_scenario`] composes all probes into raw records ready for
//! cleaning and dataset construction.

use std::collections::{BTreeSet, HashSet};
use std::io::Read;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{AttributeCatalog, AttributeDescriptor, DetectionMethod};
use crate::error::{Error, Result};
use crate::record::{BrowserFamily, RawRecord};

/// Extension under test; detectable iff it exposes at least one
/// web-accessible resource.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimExtension {
    pub id: String,
    #[serde(default)]
    pub wars: Vec<String>,
}

impl SimExtension {
    pub fn new(id: impl Into<String>, wars: &[&str]) -> Self {
        Self {
            id: id.into(),
            wars: wars.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn war_detectable(&self) -> bool {
        !self.wars.is_empty()
    }
}

/// How a site behaves towards logged-in visitors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum LoginRedirect {
    /// No login redirection; neither probe applies.
    #[default]
    None,
    /// Logged-out visitors are bounced to a login page on the same domain;
    /// an internal image (e.g. the favicon) loads only when logged in.
    SameDomainImage,
    /// Logged-in visitors land on a different domain, which a CSP rule can
    /// turn into an observable violation report.
    CrossDomainRedirect,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimSite {
    pub id: String,
    #[serde(default)]
    pub login_redirect: LoginRedirect,
}

impl SimSite {
    pub fn new(id: impl Into<String>, login_redirect: LoginRedirect) -> Self {
        Self {
            id: id.into(),
            login_redirect,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Engine {
    #[default]
    Chromium,
    Gecko,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimProfile {
    pub user_id: String,
    #[serde(default)]
    pub engine: Engine,
    /// Reported browser family; derived from the engine when absent. Brave
    /// profiles keep `engine: Chromium` but report `Brave` here.
    #[serde(default)]
    pub browser_family: Option<BrowserFamily>,
    #[serde(default = "default_true")]
    pub js_enabled: bool,
    #[serde(default = "default_true")]
    pub third_party_cookies: bool,
    #[serde(default)]
    pub installed: BTreeSet<String>,
    #[serde(default)]
    pub logged_in: BTreeSet<String>,
    #[serde(default = "default_ua")]
    pub user_agent: String,
}

fn default_true() -> bool {
    true
}

fn default_ua() -> String {
    "Mozilla/5.0 (sim)".to_string()
}

impl SimProfile {
    pub fn new(user_id: impl Into<String>) -> Self {
        Self {
            user_id: user_id.into(),
            engine: Engine::Chromium,
            browser_family: None,
            js_enabled: true,
            third_party_cookies: true,
            installed: BTreeSet::new(),
            logged_in: BTreeSet::new(),
            user_agent: default_ua(),
        }
    }

    pub fn family(&self) -> BrowserFamily {
        self.browser_family.unwrap_or(match self.engine {
            Engine::Chromium => BrowserFamily::Chrome,
            Engine::Gecko => BrowserFamily::Firefox,
            Engine::Other => BrowserFamily::Other,
        })
    }
}

/// Extensions every Brave profile ships with; detectable by WARs, which is
/// what makes Brave itself recognizable.
pub const BRAVE_DEFAULT_EXTENSION_IDS: [&str; 2] = ["brave-shields", "brave-rewards"];

/// Registrations for the Brave default extensions.
pub fn brave_default_extensions() -> Vec<SimExtension> {
    BRAVE_DEFAULT_EXTENSION_IDS
        .iter()
        .map(|id| SimExtension::new(*id, &["img/icon16.png"]))
        .collect()
}

/// A Chromium-engine profile reporting itself as Brave, with the default
/// extension set pre-installed.
pub fn brave_profile(user_id: impl Into<String>) -> SimProfile {
    let mut p = SimProfile::new(user_id);
    p.browser_family = Some(BrowserFamily::Brave);
    p.installed
        .extend(BRAVE_DEFAULT_EXTENSION_IDS.iter().map(|s| s.to_string()));
    p
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    WAR,
    RedirectImage,
    CSPReport,
    Undetectable,
}

/// Result of a single probe: whether the target was detected and through
/// which channel the probe could observe anything at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionOutcome {
    pub detected: bool,
    pub channel: Channel,
}

impl DetectionOutcome {
    fn undetectable() -> Self {
        Self {
            detected: false,
            channel: Channel::Undetectable,
        }
    }

    fn probe(channel: Channel, detected: bool) -> Self {
        Self { detected, channel }
    }
}

/// Scenario: the probed universe plus the simulated population.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct SimScenario {
    #[serde(default)]
    pub extensions: Vec<SimExtension>,
    #[serde(default)]
    pub sites: Vec<SimSite>,
    #[serde(default)]
    pub profiles: Vec<SimProfile>,
}

impl SimScenario {
    pub fn from_reader(reader: impl Read) -> Result<Self> {
        let scenario: SimScenario = serde_json::from_reader(reader)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(std::io::BufReader::new(file))
    }

    pub fn validate(&self) -> Result<()> {
        let mut ext_ids = HashSet::new();
        for e in &self.extensions {
            if !ext_ids.insert(e.id.as_str()) {
                return Err(Error::DuplicateScenarioId(e.id.clone()));
            }
        }
        let mut site_ids = HashSet::new();
        for s in &self.sites {
            if !site_ids.insert(s.id.as_str()) {
                return Err(Error::DuplicateScenarioId(s.id.clone()));
            }
        }
        for p in &self.profiles {
            for id in &p.installed {
                if !ext_ids.contains(id.as_str()) {
                    return Err(Error::UnknownExtension(id.clone()));
                }
            }
            for id in &p.logged_in {
                if !site_ids.contains(id.as_str()) {
                    return Err(Error::UnknownSite(id.clone()));
                }
            }
        }
        Ok(())
    }

    /// Attribute catalog matching this scenario: one extension column per
    /// registered extension (WAR detection), one login column per site.
    /// Cross-domain sites map to CSP-report detection, the rest to the
    /// redirect-image probe.
    pub fn catalog(&self) -> Result<AttributeCatalog> {
        let mut attrs = Vec::with_capacity(self.extensions.len() + self.sites.len());
        for e in &self.extensions {
            attrs.push(AttributeDescriptor::extension(e.id.clone(), 1));
        }
        for s in &self.sites {
            let detection = match s.login_redirect {
                LoginRedirect::CrossDomainRedirect => DetectionMethod::CSPReport,
                _ => DetectionMethod::RedirectImage,
            };
            attrs.push(AttributeDescriptor::login(s.id.clone(), detection, 1));
        }
        AttributeCatalog::new(attrs)
    }
}

/// WAR probe: loading a web-accessible resource succeeds iff the extension
/// is installed. Only runs on Chromium engines with JavaScript on; an
/// extension without WARs is invisible either way.
pub fn detect_extension(profile: &SimProfile, ext: &SimExtension) -> DetectionOutcome {
    if profile.engine != Engine::Chromium || !profile.js_enabled || !ext.war_detectable() {
        return DetectionOutcome::undetectable();
    }
    DetectionOutcome::probe(Channel::WAR, profile.installed.contains(&ext.id))
}

/// Redirect-image probe: an internal image behind the login redirect loads
/// iff the visitor is logged in. Needs JavaScript and third-party cookies;
/// errors for sites without any login redirect.
pub fn detect_login_redirect(profile: &SimProfile, site: &SimSite) -> Result<DetectionOutcome> {
    if site.login_redirect == LoginRedirect::None {
        return Err(Error::SiteNotProbeable(site.id.clone()));
    }
    if !profile.js_enabled || !profile.third_party_cookies {
        return Ok(DetectionOutcome::undetectable());
    }
    Ok(DetectionOutcome::probe(
        Channel::RedirectImage,
        profile.logged_in.contains(&site.id),
    ))
}

/// CSP probe: a violation report fires iff logged-in visitors are redirected
/// cross-domain. Works with JavaScript disabled but still needs third-party
/// cookies.
pub fn detect_login_csp(profile: &SimProfile, site: &SimSite) -> DetectionOutcome {
    if site.login_redirect != LoginRedirect::CrossDomainRedirect || !profile.third_party_cookies {
        return DetectionOutcome::undetectable();
    }
    DetectionOutcome::probe(Channel::CSPReport, profile.logged_in.contains(&site.id))
}

/// Knobs for [`run_scenario`]; `drop_probability` models flaky probes by
/// discarding each positive outcome with that probability (seeded, default
/// off).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOptions {
    pub drop_probability: f64,
    pub seed: u64,
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        Self {
            drop_probability: 0.0,
            seed: 0,
        }
    }
}

const SIM_SCREEN: &str = "1920x1080";
const SIM_FONTS: &str = "Arial,Courier,Helvetica";
const SIM_CANVAS: &str = "sim-canvas";

/// Run every applicable probe against every profile, in registration order,
/// and assemble one raw record per profile. Output is deterministic:
/// identical scenarios (and options) produce identical records.
pub fn run_scenario(scenario: &SimScenario, options: &ScenarioOptions) -> Result<Vec<RawRecord>> {
    scenario.validate()?;
    let mut records = Vec::with_capacity(scenario.profiles.len());
    for (idx, profile) in scenario.profiles.iter().enumerate() {
        // One independent stream per profile so profile order or parallel
        // evaluation cannot change per-user draws.
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        rng.set_stream(idx as u64);
        let keep = |rng: &mut ChaCha8Rng| -> bool {
            options.drop_probability <= 0.0 || rng.gen::<f64>() >= options.drop_probability
        };

        let mut record = RawRecord::new(&profile.user_id);
        record.browser_family = profile.family();
        record.js_enabled = profile.js_enabled;
        record.user_agent = profile.user_agent.clone();
        record.screen_resolution = SIM_SCREEN.into();
        record.fonts = SIM_FONTS.into();
        record.canvas_hash = SIM_CANVAS.into();

        for ext in &scenario.extensions {
            if detect_extension(profile, ext).detected && keep(&mut rng) {
                record.detected_extensions.insert(ext.id.clone());
            }
        }
        for site in &scenario.sites {
            let redirect_hit = match site.login_redirect {
                LoginRedirect::None => false,
                _ => detect_login_redirect(profile, site)?.detected,
            };
            if redirect_hit && keep(&mut rng) {
                record.detected_logins.insert(site.id.clone());
            }
        }
        for site in &scenario.sites {
            if detect_login_csp(profile, site).detected && keep(&mut rng) {
                record.detected_logins.insert(site.id.clone());
            }
        }
        records.push(record);
    }
    Ok(records)
}
