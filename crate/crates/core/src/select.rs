//! Greedy fingerprint selection.
//!
//! Two attacks over a [`BinaryDataset`]:
//!
//! * [`targeted_pattern`] builds, for one user, the fingerprint pattern: an
//!   ordered list of (attribute, required value) checks, grown by repeatedly
//!   picking the attribute whose value the target shares with the fewest
//!   remaining candidates. Negative entries (attribute must be absent) are
//!   first-class: not having a popular extension distinguishes.
//! * [`general_template`] builds the fingerprint template, one global
//!   ordered attribute list, by iterative partition refinement, at each step
//!   choosing the attribute that splits the current anonymity sets into the
//!   most balanced pieces (scored by partition entropy by default).
//!
//! Both loops are sequential by nature; per-candidate scoring inside one
//! step is a pure function and runs on the current rayon pool, so results
//! are identical for any worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::{iter_ones, words_for};
use crate::dataset::BinaryDataset;
use crate::error::{Error, Result};

/// Per-target ordered list of (attribute id, required boolean) checks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FingerprintPattern {
    pub owner: String,
    pub entries: Vec<(String, bool)>,
    pub achieved_unique: bool,
}

impl FingerprintPattern {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Global ordered attribute list plus the uniqueness reached after each
/// prefix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingerprintTemplate {
    pub attributes: Vec<String>,
    pub trace: Vec<f64>,
}

impl FingerprintTemplate {
    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn final_uniqueness(&self) -> f64 {
        self.trace.last().copied().unwrap_or(0.0)
    }
}

/// Termination control for template construction.
///
/// Construction stops when the template's uniqueness B is close enough to
/// the target level A: `A - B <= tolerance * A` (relative, the default) or
/// `A - B <= tolerance` (absolute). A is the uniqueness over every column
/// the attack may use, unless overridden via `target_uniqueness`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopCriteria {
    pub target_uniqueness: Option<f64>,
    pub tolerance: f64,
    pub absolute: bool,
    pub max_attributes: Option<usize>,
}

impl Default for StopCriteria {
    fn default() -> Self {
        Self {
            target_uniqueness: None,
            tolerance: 0.01,
            absolute: false,
            max_attributes: None,
        }
    }
}

impl StopCriteria {
    pub fn exact() -> Self {
        Self {
            tolerance: 0.0,
            ..Self::default()
        }
    }

    pub fn with_max_attributes(mut self, max: usize) -> Self {
        self.max_attributes = Some(max);
        self
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.tolerance) {
            return Err(Error::InvalidTolerance(self.tolerance));
        }
        Ok(())
    }

    fn reached(&self, target: f64, current: f64) -> bool {
        let gap = target - current;
        if self.absolute {
            gap <= self.tolerance
        } else {
            gap <= self.tolerance * target
        }
    }
}

/// How template construction scores a candidate split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitObjective {
    /// Maximize Shannon entropy of the refined partition (prefers balanced
    /// splits).
    #[default]
    PartitionEntropy,
    /// Minimize the size of the largest anonymity set after the split.
    MinimizeLargestSet,
    /// Maximize the number of users made unique by the split.
    MaximizeSingletons,
}

fn and_popcount(a: &[u64], b: &[u64]) -> usize {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x & y).count_ones() as usize)
        .sum()
}

/// Greedily build the pattern that separates `user_id` from everyone else.
///
/// Candidate set S starts as all users; each step picks the unused attribute
/// whose value the target shares with the fewest members of S (ties: lowest
/// column), provided it strictly shrinks S. Stops once S is the target alone
/// (`achieved_unique`) or no attribute shrinks S further.
pub fn targeted_pattern(ds: &BinaryDataset, user_id: &str) -> Result<FingerprintPattern> {
    let target = ds.user_row(user_id)?;
    let n = ds.n();
    let m = ds.m();
    let matrix = ds.matrix();
    let col_words = words_for(n);

    let mut tail_mask = vec![u64::MAX; col_words];
    if !n.is_multiple_of(64) {
        tail_mask[col_words - 1] = (1u64 << (n % 64)) - 1;
    }
    // Everyone but the target.
    let mut others = tail_mask.clone();
    others[target / 64] &= !(1 << (target % 64));
    let mut others_size = n - 1;

    let mut used = vec![false; m];
    let mut entries = Vec::new();
    // Below this size, scanning the member list beats whole-column ANDs.
    const SPARSE_LIMIT: usize = 512;

    let achieved_unique = loop {
        if others_size == 0 {
            break true;
        }
        let members: Option<Vec<usize>> = if others_size <= SPARSE_LIMIT {
            Some(iter_ones(&others).collect())
        } else {
            None
        };
        let mut best: Option<(usize, usize)> = None; // (agreeing, column)
        for (j, j_used) in used.iter().enumerate() {
            if *j_used {
                continue;
            }
            let target_value = matrix.get(target, j);
            let ones_in_others = match &members {
                Some(list) => list.iter().filter(|&&u| matrix.get(u, j)).count(),
                None => and_popcount(&others, matrix.col(j)),
            };
            let agreeing = if target_value {
                ones_in_others
            } else {
                others_size - ones_in_others
            };
            if agreeing < others_size && best.is_none_or(|(c, _)| agreeing < c) {
                best = Some((agreeing, j));
            }
        }
        let Some((_, j)) = best else {
            break false; // nothing shrinks S any further
        };
        used[j] = true;
        let target_value = matrix.get(target, j);
        entries.push((ds.catalog().attribute(j).id.clone(), target_value));
        let col = matrix.col(j);
        if target_value {
            for (w, c) in others.iter_mut().zip(col) {
                *w &= c;
            }
        } else {
            for ((w, c), t) in others.iter_mut().zip(col).zip(&tail_mask) {
                *w &= !c & t;
            }
        }
        others_size = others.iter().map(|w| w.count_ones() as usize).sum();
    };

    Ok(FingerprintPattern {
        owner: user_id.to_string(),
        entries,
        achieved_unique,
    })
}

/// Ids of the users whose rows satisfy every (attribute, value) entry.
pub fn apply_pattern(ds: &BinaryDataset, pattern: &FingerprintPattern) -> Result<Vec<String>> {
    let n = ds.n();
    let matrix = ds.matrix();
    let col_words = words_for(n);
    let mut matching = vec![u64::MAX; col_words];
    if !n.is_multiple_of(64) {
        matching[col_words - 1] = (1u64 << (n % 64)) - 1;
    }
    let tail = matching.clone();
    for (id, required) in &pattern.entries {
        let j = ds.catalog().index_of(id)?;
        let col = matrix.col(j);
        if *required {
            for (w, c) in matching.iter_mut().zip(col) {
                *w &= c;
            }
        } else {
            for ((w, c), t) in matching.iter_mut().zip(col).zip(&tail) {
                *w &= !c & t;
            }
        }
    }
    Ok(iter_ones(&matching)
        .map(|u| ds.users()[u].id.clone())
        .collect())
}

/// Current anonymity-set partition during template construction.
struct Partition {
    group_of: Vec<u32>,
    group_sizes: Vec<u32>,
    /// Users in groups of size >= 2 (the only rows a split can affect).
    active: Vec<u64>,
    unique_users: usize,
}

impl Partition {
    fn new(n: usize) -> Self {
        let mut p = Self {
            group_of: vec![0; n],
            group_sizes: vec![n as u32],
            active: vec![0; words_for(n)],
            unique_users: 0,
        };
        p.refresh_active();
        p
    }

    fn refresh_active(&mut self) {
        self.active.iter_mut().for_each(|w| *w = 0);
        self.unique_users = 0;
        for (u, &g) in self.group_of.iter().enumerate() {
            if self.group_sizes[g as usize] >= 2 {
                self.active[u / 64] |= 1 << (u % 64);
            } else {
                self.unique_users += 1;
            }
        }
    }

    fn uniqueness(&self) -> f64 {
        if self.group_of.is_empty() {
            0.0
        } else {
            self.unique_users as f64 / self.group_of.len() as f64
        }
    }

    /// Ones of `col` restricted to active users.
    fn active_ones<'a>(&'a self, col: &'a [u64]) -> impl Iterator<Item = usize> + 'a {
        self.active
            .iter()
            .zip(col)
            .enumerate()
            .flat_map(|(wi, (a, c))| {
                let mut w = a & c;
                std::iter::from_fn(move || {
                    if w == 0 {
                        return None;
                    }
                    let bit = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(wi * 64 + bit)
                })
            })
    }

    /// Split every group along `col`; call only for refining columns.
    fn apply(&mut self, col: &[u64]) {
        let ones: Vec<usize> = self.active_ones(col).collect();
        // First pass: how many ones each touched group has.
        let mut ones_count: Vec<u32> = vec![0; self.group_sizes.len()];
        let mut touched: Vec<u32> = Vec::new();
        for &u in &ones {
            let g = self.group_of[u];
            if ones_count[g as usize] == 0 {
                touched.push(g);
            }
            ones_count[g as usize] += 1;
        }
        // Allocate a child group for every proper split.
        let mut child: Vec<u32> = vec![u32::MAX; self.group_sizes.len()];
        for &g in &touched {
            let c1 = ones_count[g as usize];
            let size = self.group_sizes[g as usize];
            if c1 < size {
                child[g as usize] = self.group_sizes.len() as u32;
                self.group_sizes.push(c1);
                self.group_sizes[g as usize] = size - c1;
            }
        }
        for &u in &ones {
            let g = self.group_of[u];
            if child[g as usize] != u32::MAX {
                self.group_of[u] = child[g as usize];
            }
        }
        self.refresh_active();
    }
}

/// Score of one candidate column, `None` when it refines nothing.
///
/// `size_counts` (group size -> number of groups of that size) is only
/// consulted for [`SplitObjective::MinimizeLargestSet`].
fn score_candidate(
    partition: &Partition,
    col: &[u64],
    objective: SplitObjective,
    n: f64,
    size_counts: &std::collections::BTreeMap<u32, u32>,
    scratch: &mut Vec<u32>,
    touched: &mut Vec<u32>,
) -> Option<f64> {
    scratch.resize(partition.group_sizes.len(), 0);
    touched.clear();
    for u in partition.active_ones(col) {
        let g = partition.group_of[u] as usize;
        if scratch[g] == 0 {
            touched.push(g as u32);
        }
        scratch[g] += 1;
    }
    let mut refines = false;
    let mut entropy_gain = 0.0;
    let mut largest_part = 0u32;
    let mut singletons = 0u32;
    let mut split_sizes: Vec<u32> = Vec::new();
    let h = |c: f64| {
        if c == 0.0 {
            0.0
        } else {
            -(c / n) * (c / n).log2()
        }
    };
    for &g in touched.iter() {
        let c1 = scratch[g as usize];
        let size = partition.group_sizes[g as usize];
        scratch[g as usize] = 0;
        if c1 == size {
            continue; // column is constant within this group
        }
        refines = true;
        match objective {
            SplitObjective::PartitionEntropy => {
                entropy_gain += h(c1 as f64) + h((size - c1) as f64) - h(size as f64);
            }
            SplitObjective::MinimizeLargestSet => {
                largest_part = largest_part.max(c1.max(size - c1));
                split_sizes.push(size);
            }
            SplitObjective::MaximizeSingletons => {
                singletons += u32::from(c1 == 1) + u32::from(size - c1 == 1);
            }
        }
    }
    if !refines {
        return None;
    }
    match objective {
        SplitObjective::PartitionEntropy => Some(entropy_gain),
        SplitObjective::MinimizeLargestSet => {
            // Largest unsplit group: walk sizes downward, skipping groups
            // this column splits.
            split_sizes.sort_unstable();
            let mut unsplit_max = 0u32;
            for (&size, &count) in size_counts.iter().rev() {
                let split_here = split_sizes.partition_point(|&s| s <= size)
                    - split_sizes.partition_point(|&s| s < size);
                if count > split_here as u32 {
                    unsplit_max = size;
                    break;
                }
            }
            Some(-f64::from(largest_part.max(unsplit_max)))
        }
        SplitObjective::MaximizeSingletons => Some(f64::from(singletons)),
    }
}

fn template_target(ds: &BinaryDataset, allowed: &[usize], stop: &StopCriteria) -> Result<f64> {
    if let Some(t) = stop.target_uniqueness {
        return Ok(t);
    }
    if ds.n() == 0 {
        return Ok(0.0);
    }
    let grouping = ds.group_users(Some(allowed), None, None)?;
    Ok(grouping.unique_users() as f64 / ds.n() as f64)
}

fn build_template(
    ds: &BinaryDataset,
    stop: &StopCriteria,
    allowed: &[usize],
    objective: SplitObjective,
) -> Result<FingerprintTemplate> {
    stop.validate()?;
    let allowed = ds.normalize_subset(Some(allowed))?;
    let target = template_target(ds, &allowed, stop)?;
    let n = ds.n();
    let matrix = ds.matrix();

    let mut partition = Partition::new(n);
    let mut used = vec![false; ds.m()];
    let mut attributes = Vec::new();
    let mut trace = Vec::new();

    loop {
        if stop.reached(target, partition.uniqueness()) {
            break;
        }
        if let Some(max) = stop.max_attributes {
            if attributes.len() >= max {
                break;
            }
        }
        let nf = n as f64;
        let size_counts: std::collections::BTreeMap<u32, u32> =
            if objective == SplitObjective::MinimizeLargestSet {
                let mut counts = std::collections::BTreeMap::new();
                for &size in &partition.group_sizes {
                    *counts.entry(size).or_insert(0) += 1;
                }
                counts
            } else {
                std::collections::BTreeMap::new()
            };
        let best = allowed
            .par_iter()
            .filter(|&&j| !used[j])
            .map_init(
                || (Vec::new(), Vec::new()),
                |(scratch, touched), &j| {
                    score_candidate(
                        &partition,
                        matrix.col(j),
                        objective,
                        nf,
                        &size_counts,
                        scratch,
                        touched,
                    )
                    .map(|score| (score, j))
                },
            )
            .flatten()
            .reduce_with(|a, b| {
                // Higher score wins; ties go to the lower column index.
                if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                    b
                } else {
                    a
                }
            });
        let Some((_, j)) = best else {
            break; // no remaining attribute refines the partition
        };
        used[j] = true;
        partition.apply(matrix.col(j));
        attributes.push(ds.catalog().attribute(j).id.clone());
        trace.push(partition.uniqueness());
    }

    Ok(FingerprintTemplate { attributes, trace })
}

/// Build a fingerprint template over all attributes.
pub fn general_template(ds: &BinaryDataset, stop: &StopCriteria) -> Result<FingerprintTemplate> {
    let all: Vec<usize> = (0..ds.m()).collect();
    build_template(ds, stop, &all, SplitObjective::default())
}

/// [`general_template`] with an explicit split objective.
pub fn general_template_with(
    ds: &BinaryDataset,
    stop: &StopCriteria,
    objective: SplitObjective,
) -> Result<FingerprintTemplate> {
    let all: Vec<usize> = (0..ds.m()).collect();
    build_template(ds, stop, &all, objective)
}

/// Template construction constrained to the given columns (stable-only runs,
/// privacy-attribute bans). The default target level is the uniqueness
/// reachable within the allowed universe.
pub fn restrict_template(
    ds: &BinaryDataset,
    stop: &StopCriteria,
    allowed: &[usize],
) -> Result<FingerprintTemplate> {
    restrict_template_with(ds, stop, allowed, SplitObjective::default())
}

/// [`restrict_template`] with an explicit split objective.
pub fn restrict_template_with(
    ds: &BinaryDataset,
    stop: &StopCriteria,
    allowed: &[usize],
    objective: SplitObjective,
) -> Result<FingerprintTemplate> {
    if allowed.is_empty() {
        return Err(Error::EmptyAllowedSet);
    }
    build_template(ds, stop, allowed, objective)
}

/// Uniqueness after each prefix of the template, recomputed by replay.
pub fn template_uniqueness_curve(
    ds: &BinaryDataset,
    template: &FingerprintTemplate,
) -> Result<Vec<f64>> {
    let mut partition = Partition::new(ds.n());
    let mut curve = Vec::with_capacity(template.attributes.len());
    for id in &template.attributes {
        let j = ds.catalog().index_of(id)?;
        partition.apply(ds.matrix().col(j));
        curve.push(partition.uniqueness());
    }
    Ok(curve)
}
