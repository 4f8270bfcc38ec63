//! `uqfp`: ingest raw detection records into dataset snapshots, analyze
//! anonymity and entropy, run the fingerprint-selection attacks, evaluate
//! privacy-extension tradeoffs, and produce records from the detection
//! simulator or the synthetic population generator.
//!
//! Data goes to stdout (or `--out`); human-readable summaries and all
//! diagnostics go to stderr. Exit code is 0 exactly when the command
//! succeeded.

mod reports;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use uqfp_core::catalog::{AttributeCatalog, AttributeKind, DetectionMethod};
use uqfp_core::clean::{clean, CleaningConfig};
use uqfp_core::dataset::{build_dataset, AttributePredicate, BinaryDataset, UserPredicate};
use uqfp_core::metrics::{self, AnonymityHistogram};
use uqfp_core::record::{read_jsonl_path, write_jsonl, RawRecord};
use uqfp_core::select::{self, StopCriteria};
use uqfp_core::sim::{run_scenario, ScenarioOptions, SimScenario};
use uqfp_core::snapshot;
use uqfp_core::synth::{self, PopulationSpec};

use reports::*;

#[derive(Parser)]
#[command(
    name = "uqfp",
    version,
    about = "Uniqueness analytics over binary behavioral datasets"
)]
struct Cli {
    /// Seed for seeded operations (probe dropping; overrides the population
    /// spec seed for `synth`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Report format (record streams are always JSON Lines).
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the data stream to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BinPreset {
    /// Unique / 2-5 / 6-10 / 11-50 / 51+.
    PaperBins,
    /// One row per anonymity-set size.
    Raw,
}

#[derive(Subcommand)]
enum Command {
    /// Parse raw records, clean them, and write a dataset snapshot.
    Ingest(IngestArgs),
    /// Anonymity sets, uniqueness, and entropy for a dataset selection.
    Analyze(AnalyzeArgs),
    /// Targeted or general fingerprint-selection attack.
    Attack(AttackArgs),
    /// Uniqueness per privacy-attribute combination (optionally joined with
    /// externally measured blocking metrics).
    Tradeoff(TradeoffArgs),
    /// Run a detection scenario and emit raw records.
    Simulate(SimulateArgs),
    /// Generate a synthetic population and emit raw records.
    Synth(SynthArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Raw records, JSON Lines.
    #[arg(long)]
    records: PathBuf,
    /// Attribute catalog (JSON array).
    #[arg(long)]
    catalog: PathBuf,
    /// Snapshot file to write.
    #[arg(long)]
    snapshot: PathBuf,
    #[arg(long)]
    no_drop_mobile: bool,
    #[arg(long)]
    no_drop_chrome_ext_error: bool,
    #[arg(long)]
    no_drop_nonchrome_with_extensions: bool,
    #[arg(long)]
    no_drop_brave: bool,
    #[arg(long)]
    no_drop_empty_fields: bool,
    /// Remove users with more experiments than this.
    #[arg(long, default_value_t = 4)]
    max_experiments: u32,
    /// Disable the experiment-count rule entirely.
    #[arg(long)]
    no_experiment_limit: bool,
    /// Keep every experiment of surviving users instead of the best one.
    #[arg(long)]
    keep_all_experiments: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Selector {
    /// Users with at least one extension; extension columns.
    Ext,
    /// Users with at least one login; login columns.
    Log,
    /// Users with at least one extension and one login; all columns.
    BothAnd,
    /// Users with at least one extension or one login; all columns.
    BothOr,
    /// Login users viewed without JavaScript: user agent plus CSP-detectable
    /// login columns.
    CspOnly,
}

impl Selector {
    fn name(self) -> &'static str {
        match self {
            Selector::Ext => "ext",
            Selector::Log => "log",
            Selector::BothAnd => "both-and",
            Selector::BothOr => "both-or",
            Selector::CspOnly => "csp-only",
        }
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    snapshot: PathBuf,
    #[arg(long)]
    catalog: PathBuf,
    #[arg(long, value_enum)]
    selector: Selector,
    /// Min-detected thresholds for the per-threshold uniqueness curves.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
    thresholds: Vec<usize>,
    #[arg(long, value_enum, default_value_t = BinPreset::PaperBins)]
    bins: BinPreset,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AttackMode {
    Targeted,
    General,
}

#[derive(Args)]
struct AttackArgs {
    #[arg(long)]
    snapshot: PathBuf,
    #[arg(long)]
    catalog: PathBuf,
    #[arg(long, value_enum)]
    mode: AttackMode,
    /// Target user id (targeted mode).
    #[arg(long)]
    user: Option<String>,
    /// Run the targeted attack for every user and report pattern-size
    /// distributions.
    #[arg(long)]
    all_users: bool,
    /// Stop once uniqueness is within this fraction of the reachable level.
    #[arg(long, default_value_t = 0.01)]
    tolerance: f64,
    /// Interpret the tolerance as an absolute uniqueness gap.
    #[arg(long)]
    absolute: bool,
    #[arg(long)]
    max_attributes: Option<usize>,
    /// Only select attributes detectable in every month.
    #[arg(long)]
    stable_only: bool,
    /// Attribute ids the attack must not use.
    #[arg(long, value_delimiter = ',')]
    exclude: Vec<String>,
    /// Split-quality objective for the general attack.
    #[arg(long, value_enum, default_value_t = Objective::PartitionEntropy)]
    objective: Objective,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Objective {
    /// Maximize entropy of the refined partition (balanced splits).
    PartitionEntropy,
    /// Minimize the largest anonymity set after each split.
    LargestSet,
    /// Maximize users made unique by each split.
    Singletons,
}

impl From<Objective> for select::SplitObjective {
    fn from(o: Objective) -> Self {
        match o {
            Objective::PartitionEntropy => select::SplitObjective::PartitionEntropy,
            Objective::LargestSet => select::SplitObjective::MinimizeLargestSet,
            Objective::Singletons => select::SplitObjective::MaximizeSingletons,
        }
    }
}

#[derive(Args)]
struct TradeoffArgs {
    #[arg(long)]
    snapshot: PathBuf,
    #[arg(long)]
    catalog: PathBuf,
    /// Privacy attribute ids (at most 5).
    #[arg(long, value_delimiter = ',', required = true)]
    privacy: Vec<String>,
    /// External per-combination metrics to join (JSON).
    #[arg(long)]
    external: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario description (JSON).
    #[arg(long)]
    scenario: PathBuf,
    /// Also write the catalog implied by the scenario.
    #[arg(long)]
    catalog_out: Option<PathBuf>,
    /// Probability of discarding each positive probe outcome.
    #[arg(long, default_value_t = 0.0)]
    drop_probability: f64,
}

#[derive(Args)]
struct SynthArgs {
    /// Population spec (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Also write the catalog implied by the spec.
    #[arg(long)]
    catalog_out: Option<PathBuf>,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Ingest(args) => cmd_ingest(&cli, args),
        Command::Analyze(args) => cmd_analyze(&cli, args),
        Command::Attack(args) => cmd_attack(&cli, args),
        Command::Tradeoff(args) => cmd_tradeoff(&cli, args),
        Command::Simulate(args) => cmd_simulate(&cli, args),
        Command::Synth(args) => cmd_synth(&cli, args),
    }
}

fn emit(cli: &Cli, data: &[u8]) -> Result<()> {
    match &cli.out {
        Some(path) => {
            std::fs::write(path, data).with_context(|| format!("writing {}", path.display()))?
        }
        None => std::io::stdout().write_all(data)?,
    }
    Ok(())
}

fn emit_json<T: serde::Serialize>(cli: &Cli, value: &T) -> Result<()> {
    let mut data = serde_json::to_vec_pretty(value)?;
    data.push(b'\n');
    emit(cli, &data)
}

fn load_catalog(path: &Path) -> Result<Arc<AttributeCatalog>> {
    Ok(Arc::new(
        uqfp_core::catalog::load_catalog(path)
            .with_context(|| format!("loading catalog {}", path.display()))?,
    ))
}

fn load_snapshot(snapshot: &Path, catalog: &Arc<AttributeCatalog>) -> Result<BinaryDataset> {
    snapshot::load_path(snapshot, Arc::clone(catalog))
        .with_context(|| format!("loading snapshot {}", snapshot.display()))
}

fn percent(x: f64) -> String {
    format!("{:.2}%", 100.0 * x)
}

fn cmd_ingest(cli: &Cli, args: &IngestArgs) -> Result<()> {
    let catalog = load_catalog(&args.catalog)?;
    let records = read_jsonl_path(&args.records)
        .with_context(|| format!("reading records {}", args.records.display()))?;
    if records.is_empty() {
        bail!("no records in {}", args.records.display());
    }
    let config = CleaningConfig {
        drop_mobile: !args.no_drop_mobile,
        drop_chrome_ext_error: !args.no_drop_chrome_ext_error,
        drop_nonchrome_with_extensions: !args.no_drop_nonchrome_with_extensions,
        drop_brave: !args.no_drop_brave,
        drop_empty_fields: !args.no_drop_empty_fields,
        max_experiments: if args.no_experiment_limit {
            None
        } else {
            Some(args.max_experiments)
        },
        keep_best_experiment: !args.keep_all_experiments,
    };
    let (cleaned, report) = clean(&records, &config)?;
    let dataset = build_dataset(&cleaned, Arc::clone(&catalog))?;
    snapshot::save_path(&dataset, &args.snapshot)
        .with_context(|| format!("writing snapshot {}", args.snapshot.display()))?;

    eprintln!("{:<60} {:>8}", "Initial users", report.initial_users);
    for (rule, removed) in &report.removed {
        eprintln!("{:<60} {removed:>8}", rule.label());
    }
    eprintln!("{:<60} {:>8}", "Final dataset", report.final_users);

    let out = IngestReport {
        report,
        snapshot: args.snapshot.display().to_string(),
        users: dataset.n(),
        attributes: dataset.m(),
    };
    match cli.format {
        Format::Json => emit_json(cli, &out),
        Format::Csv => {
            let mut csv = String::from("rule,removed\n");
            csv.push_str(&format!("initial,{}\n", out.report.initial_users));
            for (rule, removed) in &out.report.removed {
                csv.push_str(&format!(
                    "{},{removed}\n",
                    serde_json::to_value(rule)?.as_str().unwrap()
                ));
            }
            csv.push_str(&format!("final,{}\n", out.report.final_users));
            emit(cli, csv.as_bytes())
        }
    }
}

fn selection(ds: &BinaryDataset, selector: Selector) -> Result<BinaryDataset> {
    let ext1 = UserPredicate::MinDetected {
        kind: Some(AttributeKind::Extension),
        threshold: 1,
    };
    let log1 = UserPredicate::MinDetected {
        kind: Some(AttributeKind::Login),
        threshold: 1,
    };
    let projected = match selector {
        Selector::Ext => ds.project(&ext1, &AttributePredicate::Kind(AttributeKind::Extension))?,
        Selector::Log => ds.project(&log1, &AttributePredicate::Kind(AttributeKind::Login))?,
        Selector::BothAnd => ds.project(
            &UserPredicate::AllOf(vec![ext1, log1]),
            &AttributePredicate::True,
        )?,
        Selector::BothOr => ds.project(
            &UserPredicate::AnyOf(vec![ext1, log1]),
            &AttributePredicate::True,
        )?,
        Selector::CspOnly => ds.project(&log1, &AttributePredicate::True)?,
    };
    if projected.n() == 0 {
        bail!("selection `{}` produced an empty dataset", selector.name());
    }
    Ok(projected)
}

/// Anonymity histogram of users grouped by an arbitrary string key.
fn histogram_by_key(keys: &[&str]) -> AnonymityHistogram {
    let mut groups: BTreeMap<&str, usize> = BTreeMap::new();
    for k in keys {
        *groups.entry(k).or_insert(0) += 1;
    }
    let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
    for c in groups.values() {
        *sizes.entry(*c).or_insert(0) += c;
    }
    let n = keys.len();
    let unique = sizes.get(&1).copied().unwrap_or(0);
    AnonymityHistogram {
        sizes,
        n,
        uniqueness: if n == 0 {
            0.0
        } else {
            unique as f64 / n as f64
        },
    }
}

fn cmd_analyze(cli: &Cli, args: &AnalyzeArgs) -> Result<()> {
    let catalog = load_catalog(&args.catalog)?;
    let ds = load_snapshot(&args.snapshot, &catalog)?;
    let view = selection(&ds, args.selector)?;
    let view_catalog = Arc::clone(view.catalog());

    let mut csp = None;
    let histogram = if args.selector == Selector::CspOnly {
        let csp_cols = view_catalog.columns_of_detection(DetectionMethod::CSPReport);
        if csp_cols.is_empty() {
            bail!("selection `csp-only` is empty: no CSP-detectable login attributes");
        }
        let agents: Vec<&str> = view.users().iter().map(|u| u.user_agent.as_str()).collect();
        let combined = metrics::anonymity_histogram_keyed(&view, Some(&csp_cols), &agents)?;
        csp = Some(CspBreakdown {
            csp_columns: csp_cols.len(),
            uniqueness_csp_bits: metrics::anonymity_histogram(&view, Some(&csp_cols))?.uniqueness,
            uniqueness_user_agent: histogram_by_key(&agents).uniqueness,
            uniqueness_combined: combined.uniqueness,
        });
        combined
    } else {
        metrics::anonymity_histogram(&view, None)?
    };

    let mut entropy = BTreeMap::new();
    entropy.insert("all".to_string(), metrics::shannon_entropy(&view, None)?);
    let mut min_detected = BTreeMap::new();
    for (label, kind) in [
        ("extensions", AttributeKind::Extension),
        ("logins", AttributeKind::Login),
    ] {
        let cols = view_catalog.columns_of_kind(kind);
        if cols.is_empty() {
            continue;
        }
        entropy.insert(
            label.to_string(),
            metrics::shannon_entropy(&view, Some(&cols))?,
        );
        min_detected.insert(
            label.to_string(),
            metrics::uniqueness_by_min_detected(&view, Some(kind), &args.thresholds)?,
        );
    }

    let binned = match args.bins {
        BinPreset::PaperBins => Some(histogram.binned()),
        BinPreset::Raw => None,
    };
    let report = AnalyzeReport {
        selector: args.selector.name().to_string(),
        n: view.n(),
        m: view.m(),
        uniqueness: histogram.uniqueness,
        histogram,
        binned,
        entropy,
        min_detected,
        csp,
    };

    eprintln!(
        "selector {}: {} users x {} attributes, {} unique",
        report.selector,
        report.n,
        report.m,
        percent(report.uniqueness)
    );

    match cli.format {
        Format::Json => emit_json(cli, &report),
        Format::Csv => {
            let mut csv = String::from("bin,count\n");
            match args.bins {
                BinPreset::PaperBins => {
                    for (bin, count) in report.binned.as_deref().unwrap_or(&[]) {
                        csv.push_str(&format!("{bin},{count}\n"));
                    }
                }
                BinPreset::Raw => {
                    for (size, count) in &report.histogram.sizes {
                        csv.push_str(&format!("{size},{count}\n"));
                    }
                }
            }
            emit(cli, csv.as_bytes())
        }
    }
}

fn pattern_stats(rows: &[(usize, usize)]) -> PatternLengthStats {
    let users = rows.len();
    let mut length_histogram = BTreeMap::new();
    let mut len_sum = 0usize;
    let mut det_sum = 0usize;
    for &(len, detected) in rows {
        *length_histogram.entry(len).or_insert(0) += 1;
        len_sum += len;
        det_sum += detected;
    }
    let denom = users.max(1) as f64;
    PatternLengthStats {
        users,
        mean_pattern_length: len_sum as f64 / denom,
        mean_detected_attributes: det_sum as f64 / denom,
        length_histogram,
    }
}

fn cmd_attack(cli: &Cli, args: &AttackArgs) -> Result<()> {
    let catalog = load_catalog(&args.catalog)?;
    let ds = load_snapshot(&args.snapshot, &catalog)?;

    match args.mode {
        AttackMode::Targeted => {
            if args.all_users {
                let mut unique_rows = Vec::new();
                let mut shared_rows = Vec::new();
                for u in 0..ds.n() {
                    let id = ds.users()[u].id.clone();
                    let pattern = select::targeted_pattern(&ds, &id)?;
                    let row = (pattern.len(), ds.detected_count(u, None));
                    if pattern.achieved_unique {
                        unique_rows.push(row);
                    } else {
                        shared_rows.push(row);
                    }
                }
                let report = TargetedSweepReport {
                    unique: pattern_stats(&unique_rows),
                    non_unique: pattern_stats(&shared_rows),
                };
                eprintln!(
                    "targeted sweep: {} unique users (mean pattern {:.2}), {} non-unique (mean pattern {:.2})",
                    report.unique.users,
                    report.unique.mean_pattern_length,
                    report.non_unique.users,
                    report.non_unique.mean_pattern_length
                );
                match cli.format {
                    Format::Json => emit_json(cli, &report),
                    Format::Csv => {
                        let mut csv =
                            String::from("pattern_length,unique_users,non_unique_users\n");
                        let lengths: std::collections::BTreeSet<usize> = report
                            .unique
                            .length_histogram
                            .keys()
                            .chain(report.non_unique.length_histogram.keys())
                            .copied()
                            .collect();
                        for len in lengths {
                            csv.push_str(&format!(
                                "{len},{},{}\n",
                                report.unique.length_histogram.get(&len).unwrap_or(&0),
                                report.non_unique.length_histogram.get(&len).unwrap_or(&0)
                            ));
                        }
                        emit(cli, csv.as_bytes())
                    }
                }
            } else {
                let user = args
                    .user
                    .as_deref()
                    .context("targeted mode needs --user <id> (or --all-users)")?;
                let pattern = select::targeted_pattern(&ds, user)?;
                let matched = select::apply_pattern(&ds, &pattern)?;
                let row = ds.user_row(user)?;
                let report = TargetedReport {
                    detected_attributes: ds.detected_count(row, None),
                    matched_users: matched,
                    pattern,
                };
                eprintln!(
                    "targeted {}: {} checks, unique: {}",
                    user,
                    report.pattern.len(),
                    report.pattern.achieved_unique
                );
                match cli.format {
                    Format::Json => emit_json(cli, &report),
                    Format::Csv => {
                        let mut csv = String::from("attribute,required\n");
                        for (id, required) in &report.pattern.entries {
                            csv.push_str(&format!("{id},{required}\n"));
                        }
                        emit(cli, csv.as_bytes())
                    }
                }
            }
        }
        AttackMode::General => {
            let stop = StopCriteria {
                target_uniqueness: None,
                tolerance: args.tolerance,
                absolute: args.absolute,
                max_attributes: args.max_attributes,
            };
            let mut allowed: Vec<usize> = if args.stable_only {
                catalog.stable_columns()
            } else {
                (0..ds.m()).collect()
            };
            if !args.exclude.is_empty() {
                let banned = ds.columns_for_ids(&args.exclude)?;
                allowed.retain(|c| !banned.contains(c));
            }
            let template = if allowed.len() == ds.m() {
                select::general_template_with(&ds, &stop, args.objective.into())?
            } else {
                select::restrict_template_with(&ds, &stop, &allowed, args.objective.into())?
            };
            let level_a =
                ds.group_users(Some(&allowed), None, None)?.unique_users() as f64 / ds.n() as f64;
            let final_uniqueness =
                template
                    .trace
                    .last()
                    .copied()
                    .unwrap_or(if ds.n() == 1 { 1.0 } else { 0.0 });
            let template_cols = ds.columns_for_ids(&template.attributes)?;
            let histogram = if template_cols.is_empty() {
                metrics::AnonymityHistogram {
                    sizes: BTreeMap::from([(ds.n(), ds.n())]),
                    n: ds.n(),
                    uniqueness: final_uniqueness,
                }
            } else {
                metrics::anonymity_histogram(&ds, Some(&template_cols))?
            };
            let report = GeneralReport {
                attributes_tested: template.len(),
                level_a,
                final_uniqueness,
                histogram,
                template,
            };
            eprintln!(
                "general template: {} attributes, uniqueness {} (reachable {})",
                report.attributes_tested,
                percent(report.final_uniqueness),
                percent(report.level_a)
            );
            match cli.format {
                Format::Json => emit_json(cli, &report),
                Format::Csv => {
                    let mut csv = String::from("attributes_tested,uniqueness\n");
                    for (i, u) in report.template.trace.iter().enumerate() {
                        csv.push_str(&format!("{},{u}\n", i + 1));
                    }
                    emit(cli, csv.as_bytes())
                }
            }
        }
    }
}

fn cmd_tradeoff(cli: &Cli, args: &TradeoffArgs) -> Result<()> {
    let catalog = load_catalog(&args.catalog)?;
    let ds = load_snapshot(&args.snapshot, &catalog)?;
    if args.privacy.len() > 5 {
        bail!(
            "{} privacy attributes would need {} combinations; at most 5 are supported",
            args.privacy.len(),
            1u64 << args.privacy.len()
        );
    }
    let privacy_cols = ds.columns_for_ids(&args.privacy)?;

    let external: Vec<ExternalMetric> = match &args.external {
        None => Vec::new(),
        Some(path) => {
            let file =
                std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
            serde_json::from_reader(std::io::BufReader::new(file))
                .with_context(|| format!("parsing {}", path.display()))?
        }
    };
    let lookup = |combo: &[String]| -> Option<f64> {
        let mut key: Vec<&String> = combo.iter().collect();
        key.sort();
        external
            .iter()
            .find(|e| {
                let mut other: Vec<&String> = e.combination.iter().collect();
                other.sort();
                other == key
            })
            .map(|e| e.value)
    };

    let k = args.privacy.len();
    let mut rows = Vec::with_capacity(1 << k);
    for mask in 0u32..(1 << k) {
        let combo_ids: Vec<String> = (0..k)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| args.privacy[i].clone())
            .collect();
        let combo_cols: Vec<usize> = (0..k)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| privacy_cols[i])
            .collect();
        let (uniqueness, _) = metrics::combination_uniqueness(&ds, &privacy_cols, &combo_cols)?;
        rows.push(TradeoffRow {
            external: lookup(&combo_ids),
            combination: combo_ids,
            uniqueness,
        });
    }
    let report = TradeoffReport {
        privacy_attributes: args.privacy.clone(),
        rows,
    };

    eprintln!(
        "tradeoff over {} combinations of {:?}",
        report.rows.len(),
        report.privacy_attributes
    );
    match cli.format {
        Format::Json => emit_json(cli, &report),
        Format::Csv => {
            let mut csv = String::from("combination,uniqueness,external\n");
            for row in &report.rows {
                let combo = if row.combination.is_empty() {
                    "(none)".to_string()
                } else {
                    row.combination.join("+")
                };
                let ext = row.external.map(|v| v.to_string()).unwrap_or_default();
                csv.push_str(&format!("{combo},{},{ext}\n", row.uniqueness));
            }
            emit(cli, csv.as_bytes())
        }
    }
}

fn emit_records(cli: &Cli, records: &[RawRecord]) -> Result<()> {
    let mut buf = Vec::new();
    write_jsonl(&mut buf, records)?;
    emit(cli, &buf)
}

fn cmd_simulate(cli: &Cli, args: &SimulateArgs) -> Result<()> {
    let scenario = SimScenario::from_path(&args.scenario)
        .with_context(|| format!("loading scenario {}", args.scenario.display()))?;
    let options = ScenarioOptions {
        drop_probability: args.drop_probability,
        seed: cli.seed.unwrap_or(0),
    };
    let records = run_scenario(&scenario, &options)?;
    if let Some(path) = &args.catalog_out {
        let file = std::fs::File::create(path)
            .with_context(|| format!("writing catalog {}", path.display()))?;
        scenario
            .catalog()?
            .to_writer(std::io::BufWriter::new(file))?;
    }
    eprintln!("simulated {} profiles", records.len());
    emit_records(cli, &records)
}

fn cmd_synth(cli: &Cli, args: &SynthArgs) -> Result<()> {
    let mut spec = PopulationSpec::from_path(&args.spec)
        .with_context(|| format!("loading population spec {}", args.spec.display()))?;
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    let records = synth::generate(&spec)?;
    if let Some(path) = &args.catalog_out {
        let file = std::fs::File::create(path)
            .with_context(|| format!("writing catalog {}", path.display()))?;
        spec.catalog()?.to_writer(std::io::BufWriter::new(file))?;
    }
    eprintln!("generated {} users", records.len());
    emit_records(cli, &records)
}
