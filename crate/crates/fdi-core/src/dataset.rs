//! Sparse user-feature data model shared by every quantifier.
//!
//! A [`Dataset`] is a set of user profiles over one [`FeatureSpace`]. Profiles
//! are sparse: only features with strictly positive weight are stored, sorted
//! by feature index. Datasets are immutable after construction.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::num::Real;

/// Bijection between external feature identifiers and dense indices `0..N`.
#[derive(Debug)]
pub struct FeatureSpace {
    ids: Vec<String>,
    index: HashMap<String, u32>,
    digest: u64,
}

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

fn fnv1a(bytes: &[u8], mut hash: u64) -> u64 {
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

impl FeatureSpace {
    /// Builds a space from distinct identifiers; index order follows `ids`.
    pub fn from_ids(ids: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(ids.len());
        let mut digest = FNV_OFFSET;
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i as u32).is_some() {
                return Err(Error::Config(format!("duplicate feature id {id:?}")));
            }
            digest = fnv1a(id.as_bytes(), digest);
            digest = fnv1a(&[0], digest);
        }
        Ok(FeatureSpace { ids, index, digest })
    }

    /// Dimension `N` of the feature space.
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// External identifier of feature `idx`.
    pub fn id(&self, idx: u32) -> &str {
        &self.ids[idx as usize]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Dense index of an external identifier, if present.
    pub fn index_of(&self, id: &str) -> Option<u32> {
        self.index.get(id).copied()
    }

    /// Content fingerprint; equal digests identify one logical space.
    pub fn digest(&self) -> u64 {
        self.digest
    }
}

/// One user's sparse feature vector: `(feature index, weight)` pairs sorted
/// strictly ascending by index, all weights positive.
#[derive(Debug, Clone)]
pub struct SparseProfile<W> {
    user: String,
    entries: Vec<(u32, W)>,
}

impl<W: Real> SparseProfile<W> {
    /// Builds a profile, sorting entries and dropping zero weights.
    /// Duplicate indices and negative weights are rejected.
    pub fn new(user: impl Into<String>, mut entries: Vec<(u32, W)>) -> Result<Self> {
        let user = user.into();
        entries.retain(|&(_, w)| w != W::zero());
        for &(idx, w) in &entries {
            if w < W::zero() {
                return Err(Error::NegativeWeight {
                    user: user.clone(),
                    feature: format!("#{idx}"),
                    weight: w.as_f64(),
                });
            }
        }
        entries.sort_unstable_by_key(|&(idx, _)| idx);
        if entries.windows(2).any(|p| p[0].0 == p[1].0) {
            return Err(Error::Config(format!(
                "duplicate feature index in profile of {user}"
            )));
        }
        Ok(SparseProfile { user, entries })
    }

    pub fn user(&self) -> &str {
        &self.user
    }

    pub fn entries(&self) -> &[(u32, W)] {
        &self.entries
    }

    /// Number of features the user has (the user's degree).
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn weight(&self, idx: u32) -> W {
        match self.entries.binary_search_by_key(&idx, |&(i, _)| i) {
            Ok(pos) => self.entries[pos].1,
            Err(_) => W::zero(),
        }
    }

    /// The same profile with every weight replaced by 1.
    pub fn binary(&self) -> Self {
        SparseProfile {
            user: self.user.clone(),
            entries: self.entries.iter().map(|&(i, _)| (i, W::one())).collect(),
        }
    }

    /// True when every weight equals 1.
    pub fn is_binary(&self) -> bool {
        self.entries.iter().all(|&(_, w)| w == W::one())
    }
}

/// Which side of an inference run a dataset plays.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Training,
    Target,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Training => "training",
            Role::Target => "target",
        }
    }
}

impl std::str::FromStr for Role {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "training" => Ok(Role::Training),
            "target" => Ok(Role::Target),
            other => Err(Error::Config(format!("unknown role {other:?}"))),
        }
    }
}

/// A named collection of sparse profiles over one feature space.
///
/// Profiles are stored sorted by user identifier; every ranking and report in
/// this crate breaks ties in that order.
#[derive(Debug, Clone)]
pub struct Dataset<W> {
    space: Arc<FeatureSpace>,
    profiles: Vec<SparseProfile<W>>,
    by_user: HashMap<String, usize>,
    role: Role,
}

/// A single user-feature relationship, as produced by the parsers.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge<W> {
    pub user: String,
    pub feature: String,
    pub weight: W,
}

impl<W> Edge<W> {
    pub fn new(user: impl Into<String>, feature: impl Into<String>, weight: W) -> Self {
        Edge {
            user: user.into(),
            feature: feature.into(),
            weight,
        }
    }
}

/// Builds a dataset from an edge list.
///
/// Feature indices are assigned in first-occurrence order of feature ids.
/// Duplicate `(user, feature)` pairs have their weights summed; zero-weight
/// edges are dropped but still register the user, so a user whose every edge
/// is dropped keeps an empty profile.
pub fn build_dataset<W: Real>(edges: Vec<Edge<W>>, role: Role) -> Result<Dataset<W>> {
    if edges.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut feature_index: IndexMap<String, u32> = IndexMap::new();
    // user -> feature index -> weights awaiting summation
    let mut users: IndexMap<String, BTreeMap<u32, Vec<W>>> = IndexMap::new();
    for edge in edges {
        if edge.weight < W::zero() {
            return Err(Error::NegativeWeight {
                user: edge.user,
                feature: edge.feature,
                weight: edge.weight.as_f64(),
            });
        }
        let entry = users.entry(edge.user).or_default();
        if edge.weight == W::zero() {
            continue;
        }
        let next = feature_index.len() as u32;
        let idx = *feature_index.entry(edge.feature).or_insert(next);
        entry.entry(idx).or_default().push(edge.weight);
    }
    let space = Arc::new(FeatureSpace::from_ids(
        feature_index.into_keys().collect(),
    )?);
    let mut profiles = Vec::with_capacity(users.len());
    for (user, features) in users {
        let entries = features
            .into_iter()
            .map(|(idx, mut weights)| {
                // Summing in sorted order makes the result independent of the
                // order the duplicate edges arrived in.
                weights.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite weight"));
                let total = weights.into_iter().fold(W::zero(), |acc, w| acc + w);
                (idx, total)
            })
            .collect();
        profiles.push(SparseProfile::new(user, entries)?);
    }
    Dataset::from_profiles(space, profiles, role)
}

impl<W: Real> Dataset<W> {
    /// Assembles a dataset from prebuilt profiles; validates indices and
    /// user uniqueness, and sorts profiles by user identifier.
    pub fn from_profiles(
        space: Arc<FeatureSpace>,
        mut profiles: Vec<SparseProfile<W>>,
        role: Role,
    ) -> Result<Self> {
        let n_features = space.len() as u32;
        for profile in &profiles {
            if let Some(&(idx, _)) = profile.entries.iter().find(|&&(i, _)| i >= n_features) {
                return Err(Error::Config(format!(
                    "feature index {idx} out of range for space of {n_features} (user {})",
                    profile.user
                )));
            }
        }
        profiles.sort_by(|a, b| a.user.cmp(&b.user));
        let mut by_user = HashMap::with_capacity(profiles.len());
        for (i, profile) in profiles.iter().enumerate() {
            if by_user.insert(profile.user.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate user {:?}", profile.user)));
            }
        }
        Ok(Dataset {
            space,
            profiles,
            by_user,
            role,
        })
    }

    pub fn space(&self) -> &Arc<FeatureSpace> {
        &self.space
    }

    /// Number of users (`n` for training data, `m` for target data).
    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }

    pub fn get(&self, user: &str) -> Option<&SparseProfile<W>> {
        self.by_user.get(user).map(|&i| &self.profiles[i])
    }

    /// Profiles in ascending user-identifier order.
    pub fn profiles(&self) -> &[SparseProfile<W>] {
        &self.profiles
    }

    /// Total number of user-feature relationships.
    pub fn relationship_count(&self) -> usize {
        self.profiles.iter().map(|p| p.len()).sum()
    }

    /// The same dataset with every weight replaced by 1.
    pub fn binary_view(&self) -> Self {
        Dataset {
            space: Arc::clone(&self.space),
            profiles: self.profiles.iter().map(|p| p.binary()).collect(),
            by_user: self.by_user.clone(),
            role: self.role,
        }
    }

    /// Histogram of user degrees; counts sum to the number of users.
    pub fn user_degree_histogram(&self) -> BTreeMap<usize, usize> {
        let mut hist = BTreeMap::new();
        for profile in &self.profiles {
            *hist.entry(profile.len()).or_insert(0) += 1;
        }
        hist
    }

    /// Histogram of feature degrees; counts sum to `N`.
    pub fn feature_degree_histogram(&self) -> BTreeMap<usize, usize> {
        let mut degree = vec![0usize; self.space.len()];
        for profile in &self.profiles {
            for &(idx, _) in profile.entries() {
                degree[idx as usize] += 1;
            }
        }
        let mut hist = BTreeMap::new();
        for d in degree {
            *hist.entry(d).or_insert(0) += 1;
        }
        hist
    }
}

/// Dataset equality is semantic: same role and, per user, the same
/// feature-identifier/weight pairs. Index assignment (which depends on edge
/// order) does not participate, so permuting an edge list yields an equal
/// dataset.
impl<W: Real> PartialEq for Dataset<W> {
    fn eq(&self, other: &Self) -> bool {
        if self.role != other.role || self.profiles.len() != other.profiles.len() {
            return false;
        }
        fn by_id<'a, W: Real>(
            ds: &'a Dataset<W>,
            p: &'a SparseProfile<W>,
        ) -> BTreeMap<&'a str, W> {
            p.entries
                .iter()
                .map(|&(i, w)| (ds.space.id(i), w))
                .collect()
        }
        self.profiles.iter().zip(&other.profiles).all(|(a, b)| {
            a.user == b.user
                && a.entries.len() == b.entries.len()
                && by_id(self, a) == by_id(other, b)
        })
    }
}

/// Users present with a nonempty profile in both a training and a target
/// dataset.
#[derive(Debug, Clone)]
pub struct OverlapView {
    users: Vec<String>,
}

impl OverlapView {
    /// Users in ascending identifier order.
    pub fn users(&self) -> &[String] {
        &self.users
    }

    /// The overlap size, written m-tilde elsewhere in this crate.
    pub fn m_tilde(&self) -> usize {
        self.users.len()
    }
}

/// Computes the overlap between two datasets sharing one feature space.
pub fn overlap<W: Real>(a: &Dataset<W>, b: &Dataset<W>) -> Result<OverlapView> {
    if a.space.digest() != b.space.digest() {
        return Err(Error::SpaceMismatch);
    }
    let users = a
        .profiles
        .iter()
        .filter(|p| !p.is_empty())
        .filter(|p| b.get(p.user()).map_or(false, |q| !q.is_empty()))
        .map(|p| p.user().to_string())
        .collect();
    Ok(OverlapView { users })
}
