//! Shared fixtures and independent oracles for the integration suites.
//!
//! The oracles deliberately avoid the library's packed-bit paths: grouping
//! is done on stringified rows, entropy straight from the textbook formula,
//! and minimal patterns by exhaustive subset enumeration.
#![allow(dead_code)] // each test binary uses a different slice of this module

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use uqfp_core::catalog::{AttributeCatalog, AttributeDescriptor};
use uqfp_core::dataset::{build_dataset, BinaryDataset};
use uqfp_core::record::RawRecord;

pub fn extension_catalog(m: usize) -> Arc<AttributeCatalog> {
    Arc::new(
        AttributeCatalog::new(
            (1..=m)
                .map(|j| AttributeDescriptor::extension(format!("a{j}"), 1))
                .collect(),
        )
        .unwrap(),
    )
}

/// Dataset from literal bit rows like `["0110", "1100"]`; users u1, u2, ...
/// and attributes a1, a2, ... in order.
pub fn dataset_from_rows(rows: &[impl AsRef<str>]) -> BinaryDataset {
    let m = rows[0].as_ref().len();
    let records: Vec<RawRecord> = rows
        .iter()
        .enumerate()
        .map(|(i, bits)| {
            let mut r = RawRecord::new(format!("u{}", i + 1));
            for (j, c) in bits.as_ref().chars().enumerate() {
                if c == '1' {
                    r.detected_extensions.insert(format!("a{}", j + 1));
                }
            }
            r
        })
        .collect();
    build_dataset(&records, extension_catalog(m)).unwrap()
}

/// The six-user four-attribute worked example.
pub fn example_dataset() -> BinaryDataset {
    dataset_from_rows(&["0110", "1100", "1110", "1101", "1010", "1001"])
}

/// Random bit rows with per-column densities drawn from [0.1, 0.9].
pub fn random_rows(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Vec<String> {
    let densities: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..0.9)).collect();
    (0..n)
        .map(|_| {
            (0..m)
                .map(|j| {
                    if rng.gen::<f64>() < densities[j] {
                        '1'
                    } else {
                        '0'
                    }
                })
                .collect()
        })
        .collect()
}

/// Brute-force anonymity histogram: group rows (restricted to `subset`) as
/// strings, then count users per group size.
pub fn oracle_histogram(ds: &BinaryDataset, subset: &[usize]) -> BTreeMap<usize, usize> {
    let mut groups: BTreeMap<String, usize> = BTreeMap::new();
    for u in 0..ds.n() {
        let key: String = subset
            .iter()
            .map(|&j| if ds.get(u, j) { '1' } else { '0' })
            .collect();
        *groups.entry(key).or_insert(0) += 1;
    }
    let mut hist = BTreeMap::new();
    for size in groups.values() {
        *hist.entry(*size).or_insert(0) += size;
    }
    hist
}

/// Direct-formula Shannon entropy over the same string grouping.
pub fn oracle_entropy(ds: &BinaryDataset, subset: &[usize]) -> f64 {
    let mut groups: BTreeMap<String, usize> = BTreeMap::new();
    for u in 0..ds.n() {
        let key: String = subset
            .iter()
            .map(|&j| if ds.get(u, j) { '1' } else { '0' })
            .collect();
        *groups.entry(key).or_insert(0) += 1;
    }
    let n = ds.n() as f64;
    groups
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Smallest number of (attribute = target value) checks that isolates the
/// target row, found by exhaustive subset search; `None` when even the full
/// row does not isolate it. Only sane for small m.
pub fn oracle_min_pattern_len(ds: &BinaryDataset, target: usize) -> Option<usize> {
    let m = ds.m();
    assert!(m <= 20, "exhaustive search is exponential in m");
    for size in 0..=m {
        for mask in 0u32..(1 << m) {
            if mask.count_ones() as usize != size {
                continue;
            }
            let isolated = (0..ds.n()).filter(|&u| {
                (0..m).all(|j| mask >> j & 1 == 0 || ds.get(u, j) == ds.get(target, j))
            });
            if isolated.count() == 1 {
                return Some(size);
            }
        }
    }
    None
}
