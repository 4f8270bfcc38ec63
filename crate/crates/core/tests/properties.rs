//! Property-based invariants over random inputs.

mod common;

use std::collections::BTreeSet;
use std::sync::Arc;

use proptest::prelude::*;
use uqfp_core::catalog::{AttributeCatalog, AttributeDescriptor, AttributeKind, DetectionMethod};
use uqfp_core::clean::{clean, CleaningConfig};
use uqfp_core::dataset::{build_dataset, AttributePredicate, BinaryDataset, UserPredicate};
use uqfp_core::metrics;
use uqfp_core::record::{read_jsonl, write_jsonl, BrowserFamily, RawRecord};
use uqfp_core::select::{self, StopCriteria};
use uqfp_core::snapshot;

fn arb_browser() -> impl Strategy<Value = BrowserFamily> {
    prop_oneof![
        Just(BrowserFamily::Chrome),
        Just(BrowserFamily::Chrome),
        Just(BrowserFamily::Firefox),
        Just(BrowserFamily::Brave),
        Just(BrowserFamily::Opera),
        Just(BrowserFamily::Other),
    ]
}

prop_compose! {
    fn arb_record()(
        user in 0usize..6,
        seq in 1u32..7,
        browser in arb_browser(),
        is_mobile in prop::bool::weighted(0.15),
        empty_ua in prop::bool::weighted(0.12),
        detection_error in prop::bool::weighted(0.1),
        js in any::<bool>(),
        exts in prop::collection::btree_set(1usize..=4, 0..3),
        logs in prop::collection::btree_set(1usize..=3, 0..3),
    ) -> RawRecord {
        let mut r = RawRecord::new(format!("user{user}"));
        r.experiment_seq = seq;
        r.browser_family = browser;
        r.is_mobile = is_mobile;
        if empty_ua {
            r.user_agent = "  ".into();
        }
        r.extension_detection_error = detection_error;
        r.js_enabled = js;
        r.detected_extensions = exts.into_iter().map(|i| format!("e{i}")).collect();
        r.detected_logins = logs.into_iter().map(|i| format!("l{i}")).collect();
        r
    }
}

fn arb_bit_rows() -> impl Strategy<Value = Vec<String>> {
    (1usize..=12, 1usize..=16).prop_flat_map(|(n, m)| {
        prop::collection::vec(prop::collection::vec(any::<bool>(), m), n).prop_map(|rows| {
            rows.into_iter()
                .map(|row| row.into_iter().map(|b| if b { '1' } else { '0' }).collect())
                .collect()
        })
    })
}

fn mixed_catalog() -> Arc<AttributeCatalog> {
    let mut attrs: Vec<AttributeDescriptor> = (1..=4)
        .map(|i| AttributeDescriptor::extension(format!("e{i}"), 2))
        .collect();
    attrs.push(AttributeDescriptor::login(
        "l1",
        DetectionMethod::RedirectImage,
        2,
    ));
    attrs.push(AttributeDescriptor::login(
        "l2",
        DetectionMethod::CSPReport,
        2,
    ));
    attrs.push(AttributeDescriptor::login(
        "l3",
        DetectionMethod::CSPReport,
        2,
    ));
    Arc::new(AttributeCatalog::new(attrs).unwrap())
}

// Records compatible with mixed_catalog(), one per distinct user.
prop_compose! {
    fn arb_mixed_dataset()(records in prop::collection::vec(arb_record(), 1..12)) -> BinaryDataset {
        let mut seen = BTreeSet::new();
        let mut unique: Vec<RawRecord> = Vec::new();
        for (i, mut r) in records.into_iter().enumerate() {
            r.user_id = format!("user{i}");
            if seen.insert(r.user_id.clone()) {
                r.is_mobile = false;
                unique.push(r);
            }
        }
        build_dataset(&unique, mixed_catalog()).unwrap()
    }
}

fn datasets_equal(a: &BinaryDataset, b: &BinaryDataset) -> bool {
    if a.n() != b.n() || a.m() != b.m() {
        return false;
    }
    if a.users() != b.users() {
        return false;
    }
    let ids_a: Vec<_> = a.catalog().attributes().iter().map(|x| &x.id).collect();
    let ids_b: Vec<_> = b.catalog().attributes().iter().map(|x| &x.id).collect();
    if ids_a != ids_b {
        return false;
    }
    (0..a.n()).all(|i| (0..a.m()).all(|j| a.get(i, j) == b.get(i, j)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn cleaning_is_idempotent_and_report_adds_up(records in prop::collection::vec(arb_record(), 1..24)) {
        let config = CleaningConfig::default();
        let (once, report) = clean(&records, &config).unwrap();
        prop_assert_eq!(report.initial_users - report.total_removed(), report.final_users);
        let (twice, second_report) = clean(&once, &config).unwrap();
        prop_assert_eq!(&once, &twice);
        prop_assert_eq!(second_report.total_removed(), 0);
    }

    #[test]
    fn records_jsonl_round_trip(records in prop::collection::vec(arb_record(), 0..10)) {
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &records).unwrap();
        let back = read_jsonl(buf.as_slice()).unwrap();
        prop_assert_eq!(records, back);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn histogram_and_entropy_match_oracles(rows in arb_bit_rows(), subset_seed in any::<u64>()) {
        let ds = common::dataset_from_rows(&rows);
        let m = ds.m();
        let mut subset: Vec<usize> = (0..m).filter(|j| (subset_seed >> (j % 64)) & 1 == 1).collect();
        if subset.is_empty() {
            subset = (0..m).collect();
        }
        let hist = metrics::anonymity_histogram(&ds, Some(&subset)).unwrap();
        prop_assert_eq!(&hist.sizes, &common::oracle_histogram(&ds, &subset));
        prop_assert_eq!(hist.sizes.values().sum::<usize>(), ds.n());
        let unique = hist.sizes.get(&1).copied().unwrap_or(0);
        prop_assert!((hist.uniqueness - unique as f64 / ds.n() as f64).abs() < 1e-15);

        let entropy = metrics::shannon_entropy(&ds, Some(&subset)).unwrap();
        prop_assert!((entropy.bits - common::oracle_entropy(&ds, &subset)).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&entropy.normalized));
        let all_unique = unique == ds.n() && ds.n() >= 2;
        prop_assert_eq!(entropy.normalized == 1.0, all_unique);
    }

    #[test]
    fn entropy_never_drops_when_attributes_are_added(rows in arb_bit_rows(), picks in any::<u64>()) {
        let ds = common::dataset_from_rows(&rows);
        let m = ds.m();
        let large: Vec<usize> = (0..m).collect();
        let mut small: Vec<usize> = (0..m).filter(|j| (picks >> (j % 64)) & 1 == 1).collect();
        if small.is_empty() {
            small = vec![0];
        }
        let h_small = metrics::shannon_entropy(&ds, Some(&small)).unwrap();
        let h_large = metrics::shannon_entropy(&ds, Some(&large)).unwrap();
        prop_assert!(h_large.bits >= h_small.bits - 1e-12);
    }

    #[test]
    fn subsample_is_seed_reproducible(rows in arb_bit_rows(), seed in any::<u64>()) {
        let ds = common::dataset_from_rows(&rows);
        let k = 1 + seed as usize % ds.n();
        let a = metrics::subsample_uniqueness(&ds, k, 20, seed).unwrap();
        let b = metrics::subsample_uniqueness(&ds, k, 20, seed).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn combination_with_full_privacy_set_is_plain_uniqueness(rows in arb_bit_rows(), picks in any::<u64>()) {
        let ds = common::dataset_from_rows(&rows);
        let privacy: Vec<usize> = (0..ds.m()).filter(|j| (picks >> (j % 64)) & 1 == 1).collect();
        let (uniq, hist) = metrics::combination_uniqueness(&ds, &privacy, &privacy).unwrap();
        let plain = metrics::anonymity_histogram(&ds, None).unwrap();
        prop_assert_eq!(uniq, plain.uniqueness);
        prop_assert_eq!(hist, plain);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_commutes_and_never_grows(ds in arb_mixed_dataset(), which_user in 0usize..5, which_attr in 0usize..4) {
        let user_filter = match which_user {
            0 => UserPredicate::True,
            1 => UserPredicate::BrowserIn(vec![BrowserFamily::Chrome]),
            2 => UserPredicate::JsEnabled(true),
            3 => UserPredicate::Not(Box::new(UserPredicate::BrowserIn(vec![BrowserFamily::Firefox]))),
            _ => UserPredicate::AnyOf(vec![
                UserPredicate::JsEnabled(false),
                UserPredicate::BrowserIn(vec![BrowserFamily::Chrome, BrowserFamily::Brave]),
            ]),
        };
        let attr_filter = match which_attr {
            0 => AttributePredicate::True,
            1 => AttributePredicate::Kind(AttributeKind::Extension),
            2 => AttributePredicate::Kind(AttributeKind::Login),
            _ => AttributePredicate::Detection(DetectionMethod::CSPReport),
        };
        let combined = ds.project(&user_filter, &attr_filter).unwrap();
        let users_first = ds
            .project(&user_filter, &AttributePredicate::True)
            .unwrap()
            .project(&UserPredicate::True, &attr_filter)
            .unwrap();
        let attrs_first = ds
            .project(&UserPredicate::True, &attr_filter)
            .unwrap()
            .project(&user_filter, &AttributePredicate::True)
            .unwrap();
        prop_assert!(datasets_equal(&combined, &users_first));
        prop_assert!(datasets_equal(&combined, &attrs_first));
        prop_assert!(combined.n() <= ds.n());
        prop_assert!(combined.m() <= ds.m());
    }

    #[test]
    fn masking_keeps_population(ds in arb_mixed_dataset(), picks in any::<u64>()) {
        let cols: Vec<usize> = (0..ds.m()).filter(|j| (picks >> (j % 64)) & 1 == 1).collect();
        let masked = ds.mask_columns(&cols).unwrap();
        prop_assert_eq!(masked.n(), ds.n());
        prop_assert_eq!(masked.m(), ds.m());
        for &j in &cols {
            for i in 0..ds.n() {
                prop_assert!(!masked.get(i, j));
            }
        }
    }

    #[test]
    fn snapshot_round_trip(ds in arb_mixed_dataset()) {
        let mut buf = Vec::new();
        snapshot::save(&ds, &mut buf).unwrap();
        let back = snapshot::load(buf.as_slice(), Arc::clone(ds.catalog())).unwrap();
        prop_assert!(datasets_equal(&ds, &back));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn targeted_pattern_isolates_unique_users(rows in arb_bit_rows()) {
        let ds = common::dataset_from_rows(&rows);
        let full = ds.group_users(None, None, None).unwrap();
        for (u, &g) in full.group_of.iter().enumerate() {
            let id = ds.users()[u].id.clone();
            let pattern = select::targeted_pattern(&ds, &id).unwrap();
            prop_assert!(pattern.len() <= ds.m());
            let replay = select::targeted_pattern(&ds, &id).unwrap();
            prop_assert_eq!(&pattern, &replay);
            if full.group_sizes[g as usize] == 1 {
                prop_assert!(pattern.achieved_unique, "unique row must be isolated");
                let matched = select::apply_pattern(&ds, &pattern).unwrap();
                prop_assert_eq!(matched, vec![id]);
            } else {
                prop_assert!(!pattern.achieved_unique);
            }
        }
    }

    #[test]
    fn template_trace_monotone_and_reaches_target(rows in arb_bit_rows()) {
        let ds = common::dataset_from_rows(&rows);
        let full_uniqueness = metrics::anonymity_histogram(&ds, None).unwrap().uniqueness;
        // Uniqueness before any attribute is tested: everyone shares the
        // empty fingerprint.
        let baseline = if ds.n() == 1 { 1.0 } else { 0.0 };

        let exact = select::general_template(&ds, &StopCriteria::exact()).unwrap();
        for pair in exact.trace.windows(2) {
            prop_assert!(pair[1] >= pair[0]);
        }
        let exact_final = exact.trace.last().copied().unwrap_or(baseline);
        prop_assert_eq!(exact_final, full_uniqueness);
        let curve = select::template_uniqueness_curve(&ds, &exact).unwrap();
        prop_assert_eq!(curve, exact.trace.clone());

        let approx = select::general_template(&ds, &StopCriteria::default()).unwrap();
        let approx_final = approx.trace.last().copied().unwrap_or(baseline);
        let gap = full_uniqueness - approx_final;
        prop_assert!(gap <= 0.01 * full_uniqueness + 1e-12);
        prop_assert!(approx.len() <= exact.len());
    }
}
