//! The immutable binary dataset: n users × m attributes, bit (i, j) set iff
//! attribute j was detected for user i.
//!
//! Users are rows in input order, attributes are columns in catalog order.
//! Datasets are never mutated in place; projection and masking build new
//! datasets, so concurrent readers never observe intermediate state.

use std::collections::HashMap;
use std::sync::Arc;

use crate::bits::{bitmask, BitMatrix};
use crate::catalog::{AttributeCatalog, AttributeKind, DetectionMethod};
use crate::error::{Error, Result};
use crate::record::{BrowserFamily, RawRecord};

/// Per-user fields carried along for projections and login-only analyses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserMeta {
    pub id: String,
    pub browser_family: BrowserFamily,
    pub js_enabled: bool,
    pub user_agent: String,
}

impl UserMeta {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            browser_family: BrowserFamily::Chrome,
            js_enabled: true,
            user_agent: String::new(),
        }
    }
}

/// Row-level selection criteria for [`BinaryDataset::project`].
#[derive(Debug, Clone, PartialEq)]
pub enum UserPredicate {
    True,
    BrowserIn(Vec<BrowserFamily>),
    JsEnabled(bool),
    /// At least `threshold` detected attributes of `kind` (any kind when
    /// `None`), counted over the dataset's current columns.
    MinDetected {
        kind: Option<AttributeKind>,
        threshold: usize,
    },
    AllOf(Vec<UserPredicate>),
    AnyOf(Vec<UserPredicate>),
    Not(Box<UserPredicate>),
}

impl UserPredicate {
    fn eval(&self, ds: &BinaryDataset, user: usize) -> bool {
        match self {
            UserPredicate::True => true,
            UserPredicate::BrowserIn(families) => families.contains(&ds.users[user].browser_family),
            UserPredicate::JsEnabled(v) => ds.users[user].js_enabled == *v,
            UserPredicate::MinDetected { kind, threshold } => {
                ds.detected_count(user, *kind) >= *threshold
            }
            UserPredicate::AllOf(ps) => ps.iter().all(|p| p.eval(ds, user)),
            UserPredicate::AnyOf(ps) => ps.iter().any(|p| p.eval(ds, user)),
            UserPredicate::Not(p) => !p.eval(ds, user),
        }
    }
}

/// Column-level selection criteria for [`BinaryDataset::project`].
#[derive(Debug, Clone, PartialEq)]
pub enum AttributePredicate {
    True,
    Kind(AttributeKind),
    Detection(DetectionMethod),
    /// Detectable in every month of the catalog's observation window.
    Stable,
    DetectableInMonth(u32),
    IdIn(Vec<String>),
    AllOf(Vec<AttributePredicate>),
    AnyOf(Vec<AttributePredicate>),
    Not(Box<AttributePredicate>),
}

impl AttributePredicate {
    fn eval(&self, catalog: &AttributeCatalog, col: usize) -> bool {
        let attr = catalog.attribute(col);
        match self {
            AttributePredicate::True => true,
            AttributePredicate::Kind(k) => attr.kind == *k,
            AttributePredicate::Detection(d) => attr.detection == *d,
            AttributePredicate::Stable => attr.is_stable(catalog.month_count()),
            AttributePredicate::DetectableInMonth(m) => attr.detectable_in_month(*m),
            AttributePredicate::IdIn(ids) => ids.iter().any(|id| id == &attr.id),
            AttributePredicate::AllOf(ps) => ps.iter().all(|p| p.eval(catalog, col)),
            AttributePredicate::AnyOf(ps) => ps.iter().any(|p| p.eval(catalog, col)),
            AttributePredicate::Not(p) => !p.eval(catalog, col),
        }
    }
}

/// Assignment of users to fingerprint-equality groups. Group ids are dense
/// and issued in first-encounter (row) order, so two runs over the same input
/// produce identical assignments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grouping {
    /// Group id per selected user, in selection order.
    pub group_of: Vec<u32>,
    /// Size of each group.
    pub group_sizes: Vec<u32>,
}

impl Grouping {
    pub fn num_groups(&self) -> usize {
        self.group_sizes.len()
    }

    pub fn users(&self) -> usize {
        self.group_of.len()
    }

    /// Users that share their group with nobody.
    pub fn unique_users(&self) -> usize {
        let mut count = 0;
        for &g in &self.group_of {
            if self.group_sizes[g as usize] == 1 {
                count += 1;
            }
        }
        count
    }

    /// Map from anonymity-set size to number of users in sets of that size.
    pub fn size_histogram(&self) -> std::collections::BTreeMap<usize, usize> {
        let mut hist = std::collections::BTreeMap::new();
        for &size in &self.group_sizes {
            *hist.entry(size as usize).or_insert(0) += size as usize;
        }
        hist
    }
}

#[derive(Debug, Clone)]
pub struct BinaryDataset {
    catalog: Arc<AttributeCatalog>,
    users: Vec<UserMeta>,
    user_index: HashMap<String, usize>,
    matrix: BitMatrix,
    ext_mask: Vec<u64>,
    login_mask: Vec<u64>,
}

/// Materialize cleaned records into a dataset; errors on empty input,
/// duplicate users, and ids missing from (or of the wrong kind for) the
/// catalog.
pub fn build_dataset(
    records: &[RawRecord],
    catalog: Arc<AttributeCatalog>,
) -> Result<BinaryDataset> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut matrix = BitMatrix::new(records.len(), catalog.len());
    let mut users = Vec::with_capacity(records.len());
    for (row, record) in records.iter().enumerate() {
        for id in &record.detected_extensions {
            let col = catalog.index_of(id)?;
            if catalog.attribute(col).kind != AttributeKind::Extension {
                return Err(Error::WrongKind {
                    id: id.clone(),
                    expected: "Extension",
                });
            }
            matrix.set(row, col);
        }
        for id in &record.detected_logins {
            let col = catalog.index_of(id)?;
            if catalog.attribute(col).kind != AttributeKind::Login {
                return Err(Error::WrongKind {
                    id: id.clone(),
                    expected: "Login",
                });
            }
            matrix.set(row, col);
        }
        users.push(UserMeta {
            id: record.user_id.clone(),
            browser_family: record.browser_family,
            js_enabled: record.js_enabled,
            user_agent: record.user_agent.clone(),
        });
    }
    BinaryDataset::from_parts(catalog, users, matrix)
}

impl BinaryDataset {
    pub(crate) fn from_parts(
        catalog: Arc<AttributeCatalog>,
        users: Vec<UserMeta>,
        matrix: BitMatrix,
    ) -> Result<Self> {
        debug_assert_eq!(matrix.n_rows(), users.len());
        debug_assert_eq!(matrix.n_cols(), catalog.len());
        let mut user_index = HashMap::with_capacity(users.len());
        for (i, u) in users.iter().enumerate() {
            if user_index.insert(u.id.clone(), i).is_some() {
                return Err(Error::DuplicateUserId(u.id.clone()));
            }
        }
        let m = catalog.len();
        let ext_mask = bitmask(m, catalog.columns_of_kind(AttributeKind::Extension));
        let login_mask = bitmask(m, catalog.columns_of_kind(AttributeKind::Login));
        Ok(Self {
            catalog,
            users,
            user_index,
            matrix,
            ext_mask,
            login_mask,
        })
    }

    pub fn n(&self) -> usize {
        self.users.len()
    }

    pub fn m(&self) -> usize {
        self.catalog.len()
    }

    pub fn catalog(&self) -> &Arc<AttributeCatalog> {
        &self.catalog
    }

    pub fn users(&self) -> &[UserMeta] {
        &self.users
    }

    pub fn user_row(&self, id: &str) -> Result<usize> {
        self.user_index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownUser(id.to_string()))
    }

    pub fn get(&self, user: usize, col: usize) -> bool {
        self.matrix.get(user, col)
    }

    pub(crate) fn matrix(&self) -> &BitMatrix {
        &self.matrix
    }

    /// Detected attributes of `kind` for one user (all kinds when `None`).
    pub fn detected_count(&self, user: usize, kind: Option<AttributeKind>) -> usize {
        match kind {
            None => self.matrix.row_popcount(user),
            Some(AttributeKind::Extension) => self.matrix.row_popcount_masked(user, &self.ext_mask),
            Some(AttributeKind::Login) => self.matrix.row_popcount_masked(user, &self.login_mask),
        }
    }

    /// Validate, sort, and dedupe a column subset; `None` means all columns.
    pub(crate) fn normalize_subset(&self, subset: Option<&[usize]>) -> Result<Vec<usize>> {
        let m = self.m();
        let mut cols: Vec<usize> = match subset {
            None => return Ok((0..m).collect()),
            Some(s) => s.to_vec(),
        };
        cols.sort_unstable();
        cols.dedup();
        if cols.is_empty() {
            return Err(Error::EmptyAttributeSubset);
        }
        if let Some(&bad) = cols.iter().find(|&&c| c >= m) {
            return Err(Error::AttributeIndexOutOfRange { index: bad, m });
        }
        Ok(cols)
    }

    /// Group users by exact equality of their rows restricted to `subset`
    /// (all columns when `None`).
    ///
    /// `among` restricts the grouping to a sub-population (user row indices,
    /// selection order preserved); `extra_keys`, when given, must be one key
    /// per selected user and is prepended to the fingerprint, so two users
    /// only share a group when both key and bits match.
    pub fn group_users(
        &self,
        subset: Option<&[usize]>,
        among: Option<&[usize]>,
        extra_keys: Option<&[&str]>,
    ) -> Result<Grouping> {
        let cols = self.normalize_subset(subset)?;
        let selected: Vec<usize> = match among {
            None => (0..self.n()).collect(),
            Some(list) => list.to_vec(),
        };
        if let Some(&bad) = selected.iter().find(|&&u| u >= self.n()) {
            return Err(Error::UnknownUser(format!("row index {bad}")));
        }
        if let Some(keys) = extra_keys {
            assert_eq!(
                keys.len(),
                selected.len(),
                "one extra key per selected user required"
            );
        }

        // Intern extra keys to dense ids so row keys stay cheap to hash.
        let extra_ids: Vec<u32> = match extra_keys {
            None => vec![0; selected.len()],
            Some(keys) => {
                let mut intern: HashMap<&str, u32> = HashMap::new();
                keys.iter()
                    .map(|k| {
                        let next = intern.len() as u32;
                        *intern.entry(k).or_insert(next)
                    })
                    .collect()
            }
        };

        let full = cols.len() == self.m();
        let stride = crate::bits::words_for(cols.len());
        // Sub-row packing only when a strict subset is requested.
        let packed: Vec<u64> = if full {
            Vec::new()
        } else {
            let mut packed = vec![0u64; selected.len() * stride];
            for (k, &u) in selected.iter().enumerate() {
                let base = k * stride;
                for (bit, &col) in cols.iter().enumerate() {
                    if self.matrix.get(u, col) {
                        packed[base + bit / 64] |= 1 << (bit % 64);
                    }
                }
            }
            packed
        };

        let mut groups: HashMap<(u32, &[u64]), u32> = HashMap::with_capacity(selected.len());
        let mut group_of = Vec::with_capacity(selected.len());
        let mut group_sizes: Vec<u32> = Vec::new();
        for (k, &u) in selected.iter().enumerate() {
            let row: &[u64] = if full {
                self.matrix.row(u)
            } else {
                &packed[k * stride..(k + 1) * stride]
            };
            let next = group_sizes.len() as u32;
            let gid = *groups.entry((extra_ids[k], row)).or_insert(next);
            if gid == next {
                group_sizes.push(0);
            }
            group_sizes[gid as usize] += 1;
            group_of.push(gid);
        }
        Ok(Grouping {
            group_of,
            group_sizes,
        })
    }

    /// New dataset containing only matching users and columns (catalog is
    /// narrowed to the kept attributes; column order preserved).
    pub fn project(
        &self,
        user_filter: &UserPredicate,
        attribute_filter: &AttributePredicate,
    ) -> Result<BinaryDataset> {
        let kept_cols: Vec<usize> = (0..self.m())
            .filter(|&c| attribute_filter.eval(&self.catalog, c))
            .collect();
        if kept_cols.is_empty() {
            return Err(Error::NoAttributesSelected);
        }
        let kept_users: Vec<usize> = (0..self.n())
            .filter(|&u| user_filter.eval(self, u))
            .collect();

        let catalog = if kept_cols.len() == self.m() {
            Arc::clone(&self.catalog)
        } else {
            Arc::new(AttributeCatalog::new(
                kept_cols
                    .iter()
                    .map(|&c| self.catalog.attribute(c).clone())
                    .collect(),
            )?)
        };

        let mut remap = vec![u32::MAX; self.m()];
        for (new, &old) in kept_cols.iter().enumerate() {
            remap[old] = new as u32;
        }
        let mut matrix = BitMatrix::new(kept_users.len(), kept_cols.len());
        let mut users = Vec::with_capacity(kept_users.len());
        for (new_row, &old_row) in kept_users.iter().enumerate() {
            for old_col in self.matrix.row_ones(old_row) {
                let new_col = remap[old_col];
                if new_col != u32::MAX {
                    matrix.set(new_row, new_col as usize);
                }
            }
            users.push(self.users[old_row].clone());
        }
        BinaryDataset::from_parts(catalog, users, matrix)
    }

    /// New dataset with the listed columns zeroed. Unlike projection this
    /// keeps both the user count and the column set intact.
    pub fn mask_columns(&self, columns: &[usize]) -> Result<BinaryDataset> {
        if let Some(&bad) = columns.iter().find(|&&c| c >= self.m()) {
            return Err(Error::AttributeIndexOutOfRange {
                index: bad,
                m: self.m(),
            });
        }
        let mut matrix = self.matrix.clone();
        matrix.clear_columns(columns);
        BinaryDataset::from_parts(Arc::clone(&self.catalog), self.users.clone(), matrix)
    }

    /// [`Self::mask_columns`] with attribute ids instead of column indices.
    pub fn mask_attribute_ids<S: AsRef<str>>(&self, ids: &[S]) -> Result<BinaryDataset> {
        let columns = ids
            .iter()
            .map(|id| self.catalog.index_of(id.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        self.mask_columns(&columns)
    }

    /// Resolve attribute ids to column indices.
    pub fn columns_for_ids<S: AsRef<str>>(&self, ids: &[S]) -> Result<Vec<usize>> {
        ids.iter()
            .map(|id| self.catalog.index_of(id.as_ref()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::AttributeDescriptor;

    fn catalog4() -> Arc<AttributeCatalog> {
        Arc::new(
            AttributeCatalog::new(
                ["a1", "a2", "a3", "a4"]
                    .iter()
                    .map(|id| AttributeDescriptor::extension(*id, 1))
                    .collect(),
            )
            .unwrap(),
        )
    }

    /// The six-user, four-attribute worked example used across the test
    /// suites: rows 0110, 1100, 1110, 1101, 1010, 1001.
    pub(crate) fn example_dataset() -> BinaryDataset {
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
        build_dataset(&records, catalog4()).unwrap()
    }

    #[test]
    fn example_rows_match_table() {
        let ds = example_dataset();
        let expect = [
            [false, true, true, false],
            [true, true, false, false],
            [true, true, true, false],
            [true, true, false, true],
            [true, false, true, false],
            [true, false, false, true],
        ];
        for (i, row) in expect.iter().enumerate() {
            for (j, &bit) in row.iter().enumerate() {
                assert_eq!(ds.get(i, j), bit, "row {i} col {j}");
            }
        }
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(
            build_dataset(&[], catalog4()),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn one_user_all_attributes() {
        let mut r = RawRecord::new("u1");
        for id in ["a1", "a2", "a3", "a4"] {
            r.detected_extensions.insert(id.into());
        }
        let ds = build_dataset(&[r], catalog4()).unwrap();
        assert_eq!(ds.n(), 1);
        assert_eq!(ds.detected_count(0, None), 4);
    }

    #[test]
    fn unknown_attribute_is_an_error() {
        let mut r = RawRecord::new("u1");
        r.detected_extensions.insert("nope".into());
        assert!(matches!(
            build_dataset(&[r], catalog4()),
            Err(Error::UnknownAttribute(_))
        ));
    }

    #[test]
    fn login_listed_as_extension_is_an_error() {
        let catalog = Arc::new(
            AttributeCatalog::new(vec![
                AttributeDescriptor::extension("e", 1),
                AttributeDescriptor::login("l", DetectionMethod::RedirectImage, 1),
            ])
            .unwrap(),
        );
        let mut r = RawRecord::new("u1");
        r.detected_extensions.insert("l".into());
        assert!(matches!(
            build_dataset(&[r], catalog),
            Err(Error::WrongKind { .. })
        ));
    }

    #[test]
    fn duplicate_user_is_an_error() {
        let records = vec![RawRecord::new("u1"), RawRecord::new("u1")];
        assert!(matches!(
            build_dataset(&records, catalog4()),
            Err(Error::DuplicateUserId(_))
        ));
    }

    #[test]
    fn mask_empty_set_is_identity() {
        let ds = example_dataset();
        let masked = ds.mask_columns(&[]).unwrap();
        for i in 0..ds.n() {
            for j in 0..ds.m() {
                assert_eq!(ds.get(i, j), masked.get(i, j));
            }
        }
    }

    #[test]
    fn mask_single_column_zeroes_it() {
        let ds = example_dataset();
        let masked = ds.mask_attribute_ids(&["a2"]).unwrap();
        let expect = ["0010", "1000", "1010", "1001", "1010", "1001"];
        for (i, bits) in expect.iter().enumerate() {
            for (j, c) in bits.chars().enumerate() {
                assert_eq!(masked.get(i, j), c == '1', "row {i} col {j}");
            }
        }
        assert_eq!(masked.n(), ds.n());
        assert_eq!(masked.m(), ds.m());
    }

    #[test]
    fn mask_all_columns_makes_rows_identical() {
        let ds = example_dataset();
        let masked = ds.mask_columns(&[0, 1, 2, 3]).unwrap();
        let grouping = masked.group_users(None, None, None).unwrap();
        assert_eq!(grouping.num_groups(), 1);
        assert_eq!(grouping.unique_users(), 0);
    }

    #[test]
    fn identity_projection_preserves_everything() {
        let ds = example_dataset();
        let projected = ds
            .project(&UserPredicate::True, &AttributePredicate::True)
            .unwrap();
        assert_eq!(projected.n(), ds.n());
        assert_eq!(projected.m(), ds.m());
        for i in 0..ds.n() {
            for j in 0..ds.m() {
                assert_eq!(ds.get(i, j), projected.get(i, j));
            }
        }
    }

    #[test]
    fn projection_filters_users_and_columns() {
        let ds = example_dataset();
        // Users with a1 detected, keeping only columns a1 and a2.
        let projected = ds
            .project(
                &UserPredicate::MinDetected {
                    kind: None,
                    threshold: 3,
                },
                &AttributePredicate::IdIn(vec!["a1".into(), "a2".into()]),
            )
            .unwrap();
        // Rows with >= 3 detections: u3 (1110) and u4 (1101).
        assert_eq!(projected.n(), 2);
        assert_eq!(projected.m(), 2);
        assert_eq!(projected.users()[0].id, "u3");
        assert_eq!(projected.users()[1].id, "u4");
        assert!(projected.get(0, 0) && projected.get(0, 1));
    }

    #[test]
    fn projection_by_detection_method_keeps_csp_columns() {
        let catalog = Arc::new(
            AttributeCatalog::new(vec![
                AttributeDescriptor::extension("e1", 1),
                AttributeDescriptor::login("l_img", DetectionMethod::RedirectImage, 1),
                AttributeDescriptor::login("l_csp", DetectionMethod::CSPReport, 1),
            ])
            .unwrap(),
        );
        let mut r = RawRecord::new("u1");
        r.detected_extensions.insert("e1".into());
        r.detected_logins.insert("l_img".into());
        r.detected_logins.insert("l_csp".into());
        let ds = build_dataset(&[r], catalog).unwrap();
        let csp_view = ds
            .project(
                &UserPredicate::True,
                &AttributePredicate::Detection(DetectionMethod::CSPReport),
            )
            .unwrap();
        assert_eq!(csp_view.m(), 1);
        assert_eq!(csp_view.catalog().attribute(0).id, "l_csp");
        assert!(csp_view.get(0, 0));
    }

    #[test]
    fn projection_with_no_columns_errors() {
        let ds = example_dataset();
        let err = ds
            .project(
                &UserPredicate::True,
                &AttributePredicate::Kind(AttributeKind::Login),
            )
            .unwrap_err();
        assert!(matches!(err, Error::NoAttributesSelected));
    }

    #[test]
    fn grouping_on_example_subset() {
        let ds = example_dataset();
        let grouping = ds.group_users(Some(&[0, 1]), None, None).unwrap();
        // Sub-rows over (a1, a2): 01 | 11 | 11 | 11 | 10 | 10.
        assert_eq!(grouping.num_groups(), 3);
        assert_eq!(grouping.unique_users(), 1);
        let hist = grouping.size_histogram();
        assert_eq!(hist.get(&1), Some(&1));
        assert_eq!(hist.get(&2), Some(&2));
        assert_eq!(hist.get(&3), Some(&3));
    }

    #[test]
    fn grouping_with_extra_keys_separates_equal_rows() {
        let ds = example_dataset();
        let keys: Vec<&str> = (0..6)
            .map(|i| if i < 3 { "ua-a" } else { "ua-b" })
            .collect();
        // Column a1 alone groups u1 apart and the rest together; the extra key
        // splits the big group by user agent.
        let grouping = ds.group_users(Some(&[0]), None, Some(&keys)).unwrap();
        assert_eq!(grouping.num_groups(), 3);
    }

    #[test]
    fn grouping_among_subpopulation() {
        let ds = example_dataset();
        let grouping = ds.group_users(None, Some(&[1, 2]), None).unwrap();
        assert_eq!(grouping.users(), 2);
        assert_eq!(grouping.unique_users(), 2);
    }

    #[test]
    fn empty_subset_errors() {
        let ds = example_dataset();
        assert!(matches!(
            ds.group_users(Some(&[]), None, None),
            Err(Error::EmptyAttributeSubset)
        ));
    }
}
