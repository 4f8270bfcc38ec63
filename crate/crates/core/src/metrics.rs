//! Anonymity-set, entropy, correlation, subsampling, and
//! combination-uniqueness analytics.
//!
//! All operations are pure functions of an immutable dataset; two users share
//! an anonymity set iff their bit rows are identical over the tested columns.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::AttributeKind;
use crate::dataset::{BinaryDataset, Grouping};
use crate::error::{Error, Result};

/// Distribution of anonymity-set sizes: `sizes[k]` = number of users that
/// share their fingerprint with exactly k-1 others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnonymityHistogram {
    pub sizes: BTreeMap<usize, usize>,
    pub n: usize,
    pub uniqueness: f64,
}

/// Human-oriented bin labels: unique, almost unique (2-5 users), then
/// progressively larger sets.
pub const PAPER_BINS: [(usize, usize, &str); 5] = [
    (1, 1, "1"),
    (2, 5, "2-5"),
    (6, 10, "6-10"),
    (11, 50, "11-50"),
    (51, usize::MAX, "51+"),
];

impl AnonymityHistogram {
    fn from_grouping(grouping: &Grouping) -> Self {
        let sizes = grouping.size_histogram();
        let n = grouping.users();
        let unique = sizes.get(&1).copied().unwrap_or(0);
        let uniqueness = if n == 0 {
            0.0
        } else {
            unique as f64 / n as f64
        };
        Self {
            sizes,
            n,
            uniqueness,
        }
    }

    pub fn unique_users(&self) -> usize {
        self.sizes.get(&1).copied().unwrap_or(0)
    }

    /// Users per bin in [`PAPER_BINS`] order.
    pub fn binned(&self) -> Vec<(String, usize)> {
        PAPER_BINS
            .iter()
            .map(|&(lo, hi, label)| {
                let count = self.sizes.range(lo..=hi).map(|(_, c)| c).sum();
                (label.to_string(), count)
            })
            .collect()
    }
}

/// Shannon entropy of the fingerprint distribution, in bits, plus the
/// size-normalized variant (H divided by log2 of the dataset size).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyResult {
    pub bits: f64,
    pub normalized: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsampleEstimate {
    pub k: usize,
    pub repetitions: usize,
    pub seed: u64,
    pub mean_uniqueness: f64,
    pub std_dev: f64,
}

/// Per-threshold uniqueness over the sub-population of users with at least
/// `threshold` detected attributes; `uniqueness` is `None` when that
/// sub-population is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdUniqueness {
    pub threshold: usize,
    pub population: usize,
    pub uniqueness: Option<f64>,
}

fn nonempty_dataset(ds: &BinaryDataset) -> Result<()> {
    if ds.n() == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(())
}

/// Group users by their rows restricted to `subset` (all columns when `None`)
/// and histogram the anonymity-set sizes.
pub fn anonymity_histogram(
    ds: &BinaryDataset,
    subset: Option<&[usize]>,
) -> Result<AnonymityHistogram> {
    nonempty_dataset(ds)?;
    let grouping = ds.group_users(subset, None, None)?;
    Ok(AnonymityHistogram::from_grouping(&grouping))
}

/// Histogram where the grouping key is (extra key, row bits); used for
/// analyses that mix a string attribute (the user-agent) with columns.
pub fn anonymity_histogram_keyed(
    ds: &BinaryDataset,
    subset: Option<&[usize]>,
    extra_keys: &[&str],
) -> Result<AnonymityHistogram> {
    nonempty_dataset(ds)?;
    let grouping = ds.group_users(subset, None, Some(extra_keys))?;
    Ok(AnonymityHistogram::from_grouping(&grouping))
}

pub(crate) fn entropy_from_grouping(grouping: &Grouping) -> EntropyResult {
    let n = grouping.users();
    if n <= 1 {
        return EntropyResult {
            bits: 0.0,
            normalized: 0.0,
            n,
        };
    }
    let nf = n as f64;
    let bits = if grouping.group_sizes.iter().all(|&c| c == 1) {
        // All users unique: the distribution is uniform over n outcomes.
        nf.log2()
    } else {
        grouping
            .group_sizes
            .iter()
            .map(|&c| {
                let p = c as f64 / nf;
                -p * p.log2()
            })
            .sum()
    };
    let normalized = if grouping.group_sizes.len() == 1 {
        0.0
    } else if grouping.group_sizes.iter().all(|&c| c == 1) {
        1.0
    } else {
        bits / nf.log2()
    };
    EntropyResult {
        bits,
        normalized,
        n,
    }
}

/// Shannon entropy of the fingerprint distribution over `subset`.
pub fn shannon_entropy(ds: &BinaryDataset, subset: Option<&[usize]>) -> Result<EntropyResult> {
    nonempty_dataset(ds)?;
    let grouping = ds.group_users(subset, None, None)?;
    Ok(entropy_from_grouping(&grouping))
}

fn column_sums(ds: &BinaryDataset, a: usize, b: usize) -> Result<(usize, usize, usize)> {
    let m = ds.m();
    if a >= m {
        return Err(Error::AttributeIndexOutOfRange { index: a, m });
    }
    if b >= m {
        return Err(Error::AttributeIndexOutOfRange { index: b, m });
    }
    let matrix = ds.matrix();
    let sum_a = matrix.col_popcount(a);
    let sum_b = matrix.col_popcount(b);
    let dot = matrix
        .col(a)
        .iter()
        .zip(matrix.col(b))
        .map(|(x, y)| (x & y).count_ones() as usize)
        .sum();
    Ok((sum_a, sum_b, dot))
}

/// Sample Pearson correlation of two binary columns; errors on constant
/// columns, where the correlation is undefined.
pub fn pearson_correlation(ds: &BinaryDataset, a: usize, b: usize) -> Result<f64> {
    nonempty_dataset(ds)?;
    let (sum_a, sum_b, dot) = column_sums(ds, a, b)?;
    let n = ds.n();
    for (col, sum) in [(a, sum_a), (b, sum_b)] {
        if sum == 0 || sum == n {
            return Err(Error::ConstantColumn(
                ds.catalog().attribute(col).id.clone(),
            ));
        }
    }
    let n = n as i64;
    let (sa, sb, sab) = (sum_a as i64, sum_b as i64, dot as i64);
    let num = (n * sab - sa * sb) as f64;
    let den = (((n * sa - sa * sa) as f64) * ((n * sb - sb * sb) as f64)).sqrt();
    Ok(num / den)
}

/// Cosine similarity of two columns as binary vectors; errors on all-zero
/// columns.
pub fn cosine_similarity(ds: &BinaryDataset, a: usize, b: usize) -> Result<f64> {
    nonempty_dataset(ds)?;
    let (sum_a, sum_b, dot) = column_sums(ds, a, b)?;
    for (col, sum) in [(a, sum_a), (b, sum_b)] {
        if sum == 0 {
            return Err(Error::ZeroColumn(ds.catalog().attribute(col).id.clone()));
        }
    }
    Ok(dot as f64 / ((sum_a as f64).sqrt() * (sum_b as f64).sqrt()))
}

/// Mean (and population standard deviation) of the uniqueness fraction over
/// `repetitions` uniform random k-subsets of users, drawn without
/// replacement from a ChaCha8 stream seeded with `seed`.
pub fn subsample_uniqueness(
    ds: &BinaryDataset,
    k: usize,
    repetitions: usize,
    seed: u64,
) -> Result<SubsampleEstimate> {
    nonempty_dataset(ds)?;
    let n = ds.n();
    if k == 0 || k > n {
        return Err(Error::SubsampleTooLarge { k, n });
    }
    let repetitions = repetitions.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let picked: Vec<usize> = rand::seq::index::sample(&mut rng, n, k).into_vec();
        let grouping = ds.group_users(None, Some(&picked), None)?;
        values.push(grouping.unique_users() as f64 / k as f64);
    }
    let mean = values.iter().sum::<f64>() / repetitions as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / repetitions as f64;
    Ok(SubsampleEstimate {
        k,
        repetitions,
        seed,
        mean_uniqueness: mean,
        std_dev: var.sqrt(),
    })
}

/// Uniqueness of users when only the privacy attributes in `combination` are
/// visible: the privacy attributes NOT in the combination are zeroed (users
/// keep their rows, so the population does not change) and the anonymity
/// analysis runs over all columns.
pub fn combination_uniqueness(
    ds: &BinaryDataset,
    privacy_attrs: &[usize],
    combination: &[usize],
) -> Result<(f64, AnonymityHistogram)> {
    nonempty_dataset(ds)?;
    for &c in combination {
        if !privacy_attrs.contains(&c) {
            let id = if c < ds.m() {
                ds.catalog().attribute(c).id.clone()
            } else {
                format!("column {c}")
            };
            return Err(Error::CombinationNotInPrivacySet(id));
        }
    }
    let to_mask: Vec<usize> = privacy_attrs
        .iter()
        .copied()
        .filter(|c| !combination.contains(c))
        .collect();
    let masked = ds.mask_columns(&to_mask)?;
    let hist = anonymity_histogram(&masked, None)?;
    Ok((hist.uniqueness, hist))
}

/// Uniqueness (over all columns) of the sub-population of users with at
/// least `t` detected attributes of `kind`, for each threshold `t`.
pub fn uniqueness_by_min_detected(
    ds: &BinaryDataset,
    kind: Option<AttributeKind>,
    thresholds: &[usize],
) -> Result<Vec<ThresholdUniqueness>> {
    nonempty_dataset(ds)?;
    if thresholds.contains(&0) {
        return Err(Error::InvalidThreshold);
    }
    let counts: Vec<usize> = (0..ds.n()).map(|u| ds.detected_count(u, kind)).collect();
    thresholds
        .iter()
        .map(|&t| {
            let members: Vec<usize> = (0..ds.n()).filter(|&u| counts[u] >= t).collect();
            let population = members.len();
            let uniqueness = if population == 0 {
                None
            } else {
                let grouping = ds.group_users(None, Some(&members), None)?;
                Some(grouping.unique_users() as f64 / population as f64)
            };
            Ok(ThresholdUniqueness {
                threshold: t,
                population,
                uniqueness,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{AttributeCatalog, AttributeDescriptor};
    use crate::dataset::build_dataset;
    use crate::record::RawRecord;
    use std::sync::Arc;

    fn example() -> BinaryDataset {
        let catalog = Arc::new(
            AttributeCatalog::new(
                ["a1", "a2", "a3", "a4"]
                    .iter()
                    .map(|id| AttributeDescriptor::extension(*id, 1))
                    .collect(),
            )
            .unwrap(),
        );
        let rows = ["0110", "1100", "1110", "1101", "1010", "1001"];
        let records: Vec<RawRecord> = rows
            .iter()
            .enumerate()
            .map(|(i, bits)| {
                let mut r = RawRecord::new(format!("u{}", i + 1));
                for (j, c) in bits.chars().enumerate() {
                    if c == '1' {
                        r.detected_extensions.insert(format!("a{}", j + 1));
                    }
                }
                r
            })
            .collect();
        build_dataset(&records, catalog).unwrap()
    }

    #[test]
    fn all_attributes_make_example_users_unique() {
        let ds = example();
        let hist = anonymity_histogram(&ds, None).unwrap();
        assert_eq!(hist.sizes, BTreeMap::from([(1, 6)]));
        assert_eq!(hist.uniqueness, 1.0);
    }

    #[test]
    fn popular_pair_leaves_one_singleton() {
        let ds = example();
        let hist = anonymity_histogram(&ds, Some(&[0, 1])).unwrap();
        assert_eq!(hist.sizes, BTreeMap::from([(1, 1), (2, 2), (3, 3)]));
        assert!((hist.uniqueness - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn constant_zero_column_groups_everyone() {
        let catalog = Arc::new(
            AttributeCatalog::new(vec![
                AttributeDescriptor::extension("never", 1),
                AttributeDescriptor::extension("mixed", 1),
            ])
            .unwrap(),
        );
        let records: Vec<RawRecord> = (0..4)
            .map(|i| {
                let mut r = RawRecord::new(format!("u{i}"));
                if i % 2 == 0 {
                    r.detected_extensions.insert("mixed".into());
                }
                r
            })
            .collect();
        let ds = build_dataset(&records, catalog).unwrap();
        let hist = anonymity_histogram(&ds, Some(&[0])).unwrap();
        assert_eq!(hist.sizes, BTreeMap::from([(4, 4)]));
        assert_eq!(hist.uniqueness, 0.0);
    }

    #[test]
    fn entropy_of_example_pairs() {
        let ds = example();
        let h12 = shannon_entropy(&ds, Some(&[0, 1])).unwrap();
        assert!((h12.bits - 1.45).abs() <= 0.01, "got {}", h12.bits);
        let h23 = shannon_entropy(&ds, Some(&[1, 2])).unwrap();
        assert!((h23.bits - 1.90).abs() <= 0.02, "got {}", h23.bits);
        let all = shannon_entropy(&ds, None).unwrap();
        assert!((all.bits - 6f64.log2()).abs() < 1e-12);
        assert_eq!(all.normalized, 1.0);
    }

    #[test]
    fn entropy_of_identical_rows_is_zero() {
        let catalog =
            Arc::new(AttributeCatalog::new(vec![AttributeDescriptor::extension("a", 1)]).unwrap());
        let records: Vec<RawRecord> = (0..3).map(|i| RawRecord::new(format!("u{i}"))).collect();
        let ds = build_dataset(&records, catalog).unwrap();
        let h = shannon_entropy(&ds, None).unwrap();
        assert_eq!(h.bits, 0.0);
        assert_eq!(h.normalized, 0.0);
    }

    #[test]
    fn pearson_matches_example_values() {
        let ds = example();
        let r12 = pearson_correlation(&ds, 0, 1).unwrap();
        assert!((r12 - (-0.31)).abs() <= 0.01, "got {r12}");
        let r23 = pearson_correlation(&ds, 1, 2).unwrap();
        assert!(r23.abs() <= 1e-9, "got {r23}");
        let self_corr = pearson_correlation(&ds, 2, 2).unwrap();
        assert!((self_corr - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_on_constant_column_errors() {
        let catalog = Arc::new(
            AttributeCatalog::new(vec![
                AttributeDescriptor::extension("always", 1),
                AttributeDescriptor::extension("mixed", 1),
            ])
            .unwrap(),
        );
        let records: Vec<RawRecord> = (0..3)
            .map(|i| {
                let mut r = RawRecord::new(format!("u{i}"));
                r.detected_extensions.insert("always".into());
                if i == 0 {
                    r.detected_extensions.insert("mixed".into());
                }
                r
            })
            .collect();
        let ds = build_dataset(&records, catalog).unwrap();
        assert!(matches!(
            pearson_correlation(&ds, 0, 1),
            Err(Error::ConstantColumn(_))
        ));
    }

    #[test]
    fn cosine_matches_hand_computation() {
        let ds = example();
        // dot(a1, a2) = 3, |a1| = sqrt(5), |a2| = 2.
        let c = cosine_similarity(&ds, 0, 1).unwrap();
        assert!((c - 3.0 / (2.0 * 5f64.sqrt())).abs() < 1e-12);
        let same = cosine_similarity(&ds, 0, 0).unwrap();
        assert!((same - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_of_disjoint_columns_is_zero() {
        let catalog = Arc::new(
            AttributeCatalog::new(vec![
                AttributeDescriptor::extension("x", 1),
                AttributeDescriptor::extension("y", 1),
            ])
            .unwrap(),
        );
        let records: Vec<RawRecord> = (0..2)
            .map(|i| {
                let mut r = RawRecord::new(format!("u{i}"));
                r.detected_extensions
                    .insert(if i == 0 { "x" } else { "y" }.into());
                r
            })
            .collect();
        let ds = build_dataset(&records, catalog).unwrap();
        assert_eq!(cosine_similarity(&ds, 0, 1).unwrap(), 0.0);
    }

    #[test]
    fn subsample_of_whole_dataset_is_exact() {
        let ds = example();
        let est = subsample_uniqueness(&ds, 6, 10, 7).unwrap();
        assert_eq!(est.mean_uniqueness, 1.0);
        assert_eq!(est.std_dev, 0.0);
    }

    #[test]
    fn subsample_k1_is_always_unique() {
        let ds = example();
        let est = subsample_uniqueness(&ds, 1, 50, 7).unwrap();
        assert_eq!(est.mean_uniqueness, 1.0);
    }

    #[test]
    fn subsample_of_unique_users_stays_unique() {
        let ds = example();
        let est = subsample_uniqueness(&ds, 3, 100, 42).unwrap();
        assert_eq!(est.mean_uniqueness, 1.0);
        assert_eq!(est.std_dev, 0.0);
    }

    #[test]
    fn subsample_same_seed_reproduces() {
        let ds = example();
        let a = subsample_uniqueness(&ds, 4, 30, 99).unwrap();
        let b = subsample_uniqueness(&ds, 4, 30, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn subsample_k_larger_than_n_errors() {
        let ds = example();
        assert!(matches!(
            subsample_uniqueness(&ds, 7, 10, 0),
            Err(Error::SubsampleTooLarge { .. })
        ));
    }

    #[test]
    fn combination_equal_to_privacy_set_changes_nothing() {
        let ds = example();
        let (uniq, hist) = combination_uniqueness(&ds, &[1, 2], &[1, 2]).unwrap();
        assert_eq!(uniq, 1.0);
        assert_eq!(hist.sizes, BTreeMap::from([(1, 6)]));
    }

    #[test]
    fn combination_masking_one_attribute() {
        // Privacy set {a2, a3}, combination {a2}: a3 is zeroed. Rows become
        // 0100 1100 1100 1101 1000 1001 -> singletons u1, u4, u5, u6.
        let ds = example();
        let (uniq, hist) = combination_uniqueness(&ds, &[1, 2], &[1]).unwrap();
        assert!((uniq - 4.0 / 6.0).abs() < 1e-12);
        assert_eq!(hist.sizes, BTreeMap::from([(1, 4), (2, 2)]));
    }

    #[test]
    fn empty_combination_masks_every_privacy_attribute() {
        let ds = example();
        let (uniq, hist) = combination_uniqueness(&ds, &[1, 2], &[]).unwrap();
        let masked = ds.mask_columns(&[1, 2]).unwrap();
        let direct = anonymity_histogram(&masked, None).unwrap();
        assert_eq!(uniq, direct.uniqueness);
        assert_eq!(hist, direct);
    }

    #[test]
    fn combination_outside_privacy_set_errors() {
        let ds = example();
        assert!(matches!(
            combination_uniqueness(&ds, &[1], &[2]),
            Err(Error::CombinationNotInPrivacySet(_))
        ));
    }

    #[test]
    fn min_detected_thresholds() {
        let ds = example();
        let points =
            uniqueness_by_min_detected(&ds, Some(AttributeKind::Extension), &[1, 2, 3, 5]).unwrap();
        assert_eq!(points[0].population, 6);
        assert_eq!(points[0].uniqueness, Some(1.0));
        assert_eq!(points[1].population, 6);
        // Rows with >= 3 detections: u3 and u4; both unique among themselves.
        assert_eq!(points[2].population, 2);
        assert_eq!(points[2].uniqueness, Some(1.0));
        // No row has 5 detections out of 4 columns.
        assert_eq!(points[3].population, 0);
        assert_eq!(points[3].uniqueness, None);
    }

    #[test]
    fn zero_threshold_rejected() {
        let ds = example();
        assert!(matches!(
            uniqueness_by_min_detected(&ds, None, &[0]),
            Err(Error::InvalidThreshold)
        ));
    }

    #[test]
    fn binned_histogram_covers_paper_bins() {
        let mut sizes = BTreeMap::new();
        sizes.insert(1, 3);
        sizes.insert(4, 8);
        sizes.insert(7, 7);
        sizes.insert(30, 30);
        sizes.insert(100, 100);
        let hist = AnonymityHistogram {
            sizes,
            n: 148,
            uniqueness: 3.0 / 148.0,
        };
        let bins = hist.binned();
        assert_eq!(
            bins,
            vec![
                ("1".to_string(), 3),
                ("2-5".to_string(), 8),
                ("6-10".to_string(), 7),
                ("11-50".to_string(), 30),
                ("51+".to_string(), 100),
            ]
        );
    }

    #[test]
    fn histogram_json_shape() {
        let ds = example();
        let hist = anonymity_histogram(&ds, Some(&[0, 1])).unwrap();
        let json = serde_json::to_value(&hist).unwrap();
        assert_eq!(json["sizes"]["1"], 1);
        assert_eq!(json["n"], 6);
        let back: AnonymityHistogram = serde_json::from_value(json).unwrap();
        assert_eq!(back, hist);
    }
}
