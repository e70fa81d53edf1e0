//! Flags target users with no training counterpart by comparing their
//! distance/similarity statistics against expected matched-pair values.

use rayon::prelude::*;

use crate::dataset::{Dataset, SparseProfile};
use crate::distance::{combined_norm, distance, sample_entries, DistanceConfig};
use crate::distribution::{cosine, magnitude};
use crate::error::{Error, Result};
use crate::num::Real;
use crate::rng::{mix, rng_from};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectionMode {
    Distance,
    Distribution,
}

impl DetectionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DetectionMode::Distance => "distance",
            DetectionMode::Distribution => "distribution",
        }
    }
}

impl std::str::FromStr for DetectionMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "distance" => Ok(DetectionMode::Distance),
            "distribution" => Ok(DetectionMode::Distribution),
            other => Err(Error::Config(format!("unknown detection mode {other:?}"))),
        }
    }
}

/// Expected matched-pair statistics estimated from the training data, plus
/// the slack and mode applied at detection time.
#[derive(Debug, Clone)]
pub struct NewUserThresholds<W> {
    /// Expected distance between two replicas of one user.
    pub mu_star_d: W,
    /// Expected cosine similarity between two replicas of one user.
    pub mu_star_s: W,
    pub xi: W,
    pub mode: DetectionMode,
    /// Upper bound on any matched-pair distance, for the confidence check.
    pub zeta_d: W,
    /// Observed range of matched-pair cosine values.
    pub cos_range: (W, W),
    /// Replica pairs behind the estimates.
    pub samples: usize,
}

impl<W: Real> NewUserThresholds<W> {
    pub fn with_mode(mut self, mode: DetectionMode) -> Self {
        self.mode = mode;
        self
    }

    /// Detection accepts any positive slack, unlike the model checkers.
    pub fn with_xi(mut self, xi: W) -> Result<Self> {
        if xi <= W::zero() {
            return Err(Error::BadXi(xi.as_f64()));
        }
        self.xi = xi;
        Ok(self)
    }

    /// Whether the concentration precondition for the active mode holds;
    /// verdicts issued without it are labeled low-confidence.
    pub fn precondition_met(&self, n_features: usize) -> bool {
        let root = (W::of(2.0) * W::of_usize(n_features).ln()).sqrt();
        match self.mode {
            DetectionMode::Distance => self.mu_star_d >= self.zeta_d * root / self.xi,
            DetectionMode::Distribution => {
                let (lo, hi) = self.cos_range;
                self.mu_star_s >= (hi - lo) * root / self.xi
            }
        }
    }
}

/// Estimates matched-pair expectations: each user is sampled twice
/// independently at rate `p` per trial, and the distance/cosine of the two
/// replicas is averaged over all users and trials.
///
/// Replica pairs whose cosine is undefined (a zero-magnitude side) are
/// skipped for the similarity estimate.
pub fn estimate_thresholds<W: Real>(
    training_raw: &Dataset<W>,
    p: W,
    trials: usize,
    seed: u64,
    cfg: &DistanceConfig<W>,
) -> Result<NewUserThresholds<W>> {
    let pf = p.as_f64();
    if !(0.0..=1.0).contains(&pf) || pf == 0.0 {
        return Err(Error::BadP(pf));
    }
    if trials == 0 {
        return Err(Error::Config("trials must be >= 1".into()));
    }
    let users: Vec<&SparseProfile<W>> = training_raw
        .profiles()
        .iter()
        .filter(|u| !u.is_empty())
        .collect();
    if users.is_empty() {
        return Err(Error::EmptyTraining);
    }

    let mut d_sum = W::zero();
    let mut d_count = 0usize;
    let mut s_sum = W::zero();
    let mut s_count = 0usize;
    let mut cos_lo = W::infinity();
    let mut cos_hi = W::neg_infinity();
    let mut zeta_d = W::zero();

    for user in &users {
        zeta_d = zeta_d.max(W::of(2.0) * combined_norm(user, cfg)?);
        let mut rng = rng_from(mix(seed, crate::rng::hash_str(user.user())));
        for _ in 0..trials {
            let x = sample_entries(user, pf, &mut rng);
            let y = sample_entries(user, pf, &mut rng);
            d_sum = d_sum + distance(&x, &y, cfg)?;
            d_count += 1;
            if magnitude(&x, cfg) > W::zero() && magnitude(&y, cfg) > W::zero() {
                let c = cosine(&x, &y, cfg)?;
                s_sum = s_sum + c;
                s_count += 1;
                cos_lo = cos_lo.min(c);
                cos_hi = cos_hi.max(c);
            }
        }
    }
    let mu_star_s = if s_count == 0 {
        W::zero()
    } else {
        s_sum / W::of_usize(s_count)
    };
    if s_count == 0 {
        cos_lo = W::zero();
        cos_hi = W::zero();
    }
    Ok(NewUserThresholds {
        mu_star_d: d_sum / W::of_usize(d_count),
        mu_star_s,
        xi: W::of(0.5),
        mode: DetectionMode::Distance,
        zeta_d,
        cos_range: (cos_lo, cos_hi),
        samples: d_count,
    })
}

/// Which clause declared the user new.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectionClause {
    /// Even the closest training user is too far: `D_min >= (1 + xi) mu*_d`.
    MinDistanceHigh,
    /// Suspiciously close to everyone: `D_max <= (1 - xi) mu*_d`.
    MaxDistanceLow,
    /// No training user is similar enough: `C_max <= (1 - xi) mu*_s`.
    MaxCosineLow,
}

impl DetectionClause {
    pub fn as_str(self) -> &'static str {
        match self {
            DetectionClause::MinDistanceHigh => "d_min_high",
            DetectionClause::MaxDistanceLow => "d_max_low",
            DetectionClause::MaxCosineLow => "c_max_low",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionVerdict<W> {
    pub user: String,
    pub is_new: bool,
    /// The binding statistic: D_min in distance mode, C_max in
    /// distribution mode (D_max when that clause fired).
    pub statistic: W,
    /// The threshold the statistic was compared against.
    pub threshold: W,
    pub clause: Option<DetectionClause>,
    pub low_confidence: bool,
}

/// Classifies one target user against the training data.
pub fn detect_new_user<W: Real>(
    target: &SparseProfile<W>,
    training: &Dataset<W>,
    thresholds: &NewUserThresholds<W>,
    cfg: &DistanceConfig<W>,
) -> Result<DetectionVerdict<W>> {
    if training.is_empty() {
        return Err(Error::EmptyTraining);
    }
    let low_confidence = !thresholds.precondition_met(training.space().len());
    let xi = thresholds.xi;
    match thresholds.mode {
        DetectionMode::Distance => {
            let mut d_min = W::infinity();
            let mut d_max = W::neg_infinity();
            for u in training.profiles() {
                let d = distance(target, u, cfg)?;
                d_min = d_min.min(d);
                d_max = d_max.max(d);
            }
            let hi = (W::one() + xi) * thresholds.mu_star_d;
            let lo = (W::one() - xi) * thresholds.mu_star_d;
            if d_min >= hi {
                Ok(DetectionVerdict {
                    user: target.user().to_string(),
                    is_new: true,
                    statistic: d_min,
                    threshold: hi,
                    clause: Some(DetectionClause::MinDistanceHigh),
                    low_confidence,
                })
            } else if d_max <= lo {
                Ok(DetectionVerdict {
                    user: target.user().to_string(),
                    is_new: true,
                    statistic: d_max,
                    threshold: lo,
                    clause: Some(DetectionClause::MaxDistanceLow),
                    low_confidence,
                })
            } else {
                Ok(DetectionVerdict {
                    user: target.user().to_string(),
                    is_new: false,
                    statistic: d_min,
                    threshold: hi,
                    clause: None,
                    low_confidence,
                })
            }
        }
        DetectionMode::Distribution => {
            if magnitude(target, cfg) == W::zero() {
                return Err(Error::ZeroVector(target.user().to_string()));
            }
            let mut c_max = W::neg_infinity();
            let mut comparable = 0usize;
            for u in training.profiles() {
                if magnitude(u, cfg) == W::zero() {
                    continue;
                }
                c_max = c_max.max(cosine(target, u, cfg)?);
                comparable += 1;
            }
            if comparable == 0 {
                return Err(Error::EmptyTraining);
            }
            let lo = (W::one() - xi) * thresholds.mu_star_s;
            Ok(DetectionVerdict {
                user: target.user().to_string(),
                is_new: c_max <= lo,
                statistic: c_max,
                threshold: lo,
                clause: if c_max <= lo {
                    Some(DetectionClause::MaxCosineLow)
                } else {
                    None
                },
                low_confidence,
            })
        }
    }
}

/// Classifies every target user; per-user errors (e.g. a zero-magnitude
/// target in distribution mode) are returned alongside the verdicts.
pub fn detect_all<W: Real>(
    target: &Dataset<W>,
    training: &Dataset<W>,
    thresholds: &NewUserThresholds<W>,
    cfg: &DistanceConfig<W>,
) -> Result<Vec<(String, Result<DetectionVerdict<W>>)>> {
    if training.is_empty() {
        return Err(Error::EmptyTraining);
    }
    Ok(target
        .profiles()
        .par_iter()
        .map(|v| {
            (
                v.user().to_string(),
                detect_new_user(v, training, thresholds, cfg),
            )
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{build_dataset, Edge, Role};

    fn training() -> Dataset<f64> {
        build_dataset(
            vec![
                Edge::new("a", "f0", 1.0),
                Edge::new("a", "f1", 2.0),
                Edge::new("b", "f1", 1.0),
                Edge::new("b", "f2", 3.0),
                Edge::new("c", "f0", 2.0),
                Edge::new("c", "f2", 1.0),
            ],
            Role::Training,
        )
        .unwrap()
    }

    #[test]
    fn p_one_gives_exact_matched_pair_values() {
        let cfg = DistanceConfig::default();
        let th = estimate_thresholds(&training(), 1.0f64, 5, 1, &cfg).unwrap();
        assert_eq!(th.mu_star_d, 0.0);
        assert!((th.mu_star_s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_user_is_not_flagged_in_distance_mode() {
        let cfg = DistanceConfig::default();
        let ds = training();
        // estimated at p = 0.5 so mu_star_d > 0
        let th = estimate_thresholds(&ds, 0.5f64, 200, 1, &cfg).unwrap();
        assert!(th.mu_star_d > 0.0);
        let v = ds.get("a").unwrap();
        let verdict = detect_new_user(v, &ds, &th, &cfg).unwrap();
        // D_min = 0 < (1 + xi) mu*_d and D_max is large for spread-out data
        assert!(!verdict.is_new, "verdict: {verdict:?}");
    }

    #[test]
    fn orthogonal_user_is_flagged_in_distribution_mode() {
        use crate::dataset::FeatureSpace;
        use std::sync::Arc;
        let cfg = DistanceConfig::default();
        // a space with a feature only the target uses
        let space = Arc::new(
            FeatureSpace::from_ids(vec!["f0".into(), "f1".into(), "f2".into()]).unwrap(),
        );
        let ds = Dataset::from_profiles(
            Arc::clone(&space),
            vec![
                SparseProfile::new("a", vec![(0, 1.0)]).unwrap(),
                SparseProfile::new("b", vec![(1, 1.0)]).unwrap(),
            ],
            Role::Training,
        )
        .unwrap();
        let th = estimate_thresholds(&ds, 1.0f64, 5, 1, &cfg)
            .unwrap()
            .with_mode(DetectionMode::Distribution);
        assert!((th.mu_star_s - 1.0).abs() < 1e-12);
        let intruder = SparseProfile::new("intruder", vec![(2, 1.0)]).unwrap();
        let verdict = detect_new_user(&intruder, &ds, &th, &cfg).unwrap();
        assert!(verdict.is_new);
        assert_eq!(verdict.clause, Some(DetectionClause::MaxCosineLow));
        assert_eq!(verdict.statistic, 0.0);
    }

    #[test]
    fn xi_monotonicity_in_distance_mode() {
        let cfg = DistanceConfig::default();
        let ds = training();
        let th = estimate_thresholds(&ds, 0.5f64, 100, 3, &cfg).unwrap();
        let v = SparseProfile::new("far", vec![(0, 50.0)]).unwrap();
        let verdict_small = detect_new_user(&v, &ds, &th.clone().with_xi(0.1).unwrap(), &cfg).unwrap();
        let verdict_large = detect_new_user(&v, &ds, &th.with_xi(0.9).unwrap(), &cfg).unwrap();
        // raising xi only makes the D_min clause stricter
        if !verdict_small.is_new {
            assert!(!verdict_large.is_new);
        }
    }

    #[test]
    fn empty_training_is_an_error() {
        let cfg = DistanceConfig::default();
        let ds = build_dataset(vec![Edge::new("a", "f0", 0.0)], Role::Training).unwrap();
        assert!(matches!(
            estimate_thresholds(&ds, 0.5f64, 10, 1, &cfg),
            Err(Error::EmptyTraining)
        ));
    }
}
