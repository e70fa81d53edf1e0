//! Weighted feature-distance quantification: the feature/weight combiner,
//! the p-norm distance, pair statistics estimated under Bernoulli sampling,
//! and the distance-based condition checkers.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::dataset::{overlap, Dataset, SparseProfile};
use crate::error::{Error, Result};
use crate::num::Real;
use crate::rank::{select_top_k_indexed, RankOrder};
use crate::rng::{hash_str, mix, rng_from};
use crate::report::{
    Candidate, CandidateSet, ModelKind, QuantReport, UserVerdict, VerdictMetrics, VerdictStatus,
};

/// How a raw feature value `f` and a per-feature model weight `w` combine
/// into one coordinate of the compared vector. Every combiner maps absent
/// features (f = 0) to 0, which keeps the vectors sparse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Combiner {
    /// `g = w * f`
    Product,
    /// `g = f` (weights ignored)
    Raw,
    /// `g = w * ln(1 + f)`
    LogProduct,
}

impl std::str::FromStr for Combiner {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "product" => Ok(Combiner::Product),
            "raw" => Ok(Combiner::Raw),
            "log-product" | "log_product" => Ok(Combiner::LogProduct),
            other => Err(Error::Config(format!("unknown combiner {other:?}"))),
        }
    }
}

/// Per-feature model weights.
#[derive(Debug, Clone)]
pub enum ModelWeights<W> {
    /// Every feature weighs 1.
    Unit,
    /// An explicit weight per feature index.
    PerFeature(Arc<Vec<W>>),
}

impl<W: Real> ModelWeights<W> {
    pub fn weight(&self, idx: u32) -> W {
        match self {
            ModelWeights::Unit => W::one(),
            ModelWeights::PerFeature(v) => v[idx as usize],
        }
    }

    /// Inverse-feature-frequency weights learned from a training dataset:
    /// `ln(n / degree)` per feature, 0 for features every user has.
    pub fn inverse_frequency(training: &Dataset<W>) -> Self {
        let n = training.len();
        let mut degree = vec![0usize; training.space().len()];
        for profile in training.profiles() {
            for &(idx, _) in profile.entries() {
                degree[idx as usize] += 1;
            }
        }
        let weights = degree
            .into_iter()
            .map(|d| {
                if d == 0 {
                    W::zero()
                } else {
                    (W::of_usize(n) / W::of_usize(d)).ln()
                }
            })
            .collect();
        ModelWeights::PerFeature(Arc::new(weights))
    }
}

/// Configuration of the combined vector and the distance norm.
#[derive(Debug, Clone)]
pub struct DistanceConfig<W> {
    pub combiner: Combiner,
    pub weights: ModelWeights<W>,
    /// The p-norm exponent; must be >= 1.
    pub norm_p: W,
}

impl<W: Real> Default for DistanceConfig<W> {
    fn default() -> Self {
        DistanceConfig {
            combiner: Combiner::Product,
            weights: ModelWeights::Unit,
            norm_p: W::of(2.0),
        }
    }
}

impl<W: Real> DistanceConfig<W> {
    /// One coordinate of the combined vector.
    pub fn combined(&self, idx: u32, raw: W) -> W {
        let w = self.weights.weight(idx);
        match self.combiner {
            Combiner::Product => w * raw,
            Combiner::Raw => raw,
            Combiner::LogProduct => w * (W::one() + raw).ln(),
        }
    }

    fn check_norm(&self) -> Result<()> {
        if self.norm_p < W::one() {
            return Err(Error::BadNorm(self.norm_p.as_f64()));
        }
        Ok(())
    }
}

/// Merge-join over two sorted sparse profiles, folding the combined values
/// of the union of their supports through `step`.
#[inline]
fn merge_fold<W: Real>(
    x: &SparseProfile<W>,
    y: &SparseProfile<W>,
    cfg: &DistanceConfig<W>,
    mut step: impl FnMut(W, W),
) {
    let (a, b) = (x.entries(), y.entries());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        let (ia, wa) = a[i];
        let (ib, wb) = b[j];
        match ia.cmp(&ib) {
            std::cmp::Ordering::Less => {
                step(cfg.combined(ia, wa), W::zero());
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                step(W::zero(), cfg.combined(ib, wb));
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                step(cfg.combined(ia, wa), cfg.combined(ia, wb));
                i += 1;
                j += 1;
            }
        }
    }
    for &(ia, wa) in &a[i..] {
        step(cfg.combined(ia, wa), W::zero());
    }
    for &(ib, wb) in &b[j..] {
        step(W::zero(), cfg.combined(ib, wb));
    }
}

/// The p-norm distance between the combined vectors of `x` and `y`.
/// Exponents 1 and 2 take exact fast paths; `powf` handles the rest.
pub fn distance<W: Real>(
    x: &SparseProfile<W>,
    y: &SparseProfile<W>,
    cfg: &DistanceConfig<W>,
) -> Result<W> {
    cfg.check_norm()?;
    let mut sum = W::zero();
    if cfg.norm_p == W::one() {
        merge_fold(x, y, cfg, |gx, gy| sum = sum + (gx - gy).abs());
        Ok(sum)
    } else if cfg.norm_p == W::of(2.0) {
        merge_fold(x, y, cfg, |gx, gy| {
            let d = gx - gy;
            sum = sum + d * d;
        });
        Ok(sum.sqrt())
    } else {
        let p = cfg.norm_p;
        merge_fold(x, y, cfg, |gx, gy| sum = sum + (gx - gy).abs().powf(p));
        Ok(sum.powf(W::one() / cfg.norm_p))
    }
}

/// The p-norm of a profile's combined vector (its distance to the empty
/// profile).
pub fn combined_norm<W: Real>(x: &SparseProfile<W>, cfg: &DistanceConfig<W>) -> Result<W> {
    cfg.check_norm()?;
    let mut sum = W::zero();
    if cfg.norm_p == W::one() {
        for &(idx, w) in x.entries() {
            sum = sum + cfg.combined(idx, w).abs();
        }
        Ok(sum)
    } else if cfg.norm_p == W::of(2.0) {
        for &(idx, w) in x.entries() {
            let g = cfg.combined(idx, w);
            sum = sum + g * g;
        }
        Ok(sum.sqrt())
    } else {
        for &(idx, w) in x.entries() {
            sum = sum + cfg.combined(idx, w).abs().powf(cfg.norm_p);
        }
        Ok(sum.powf(W::one() / cfg.norm_p))
    }
}

/// Estimated expectation and a sound upper bound of the distance between
/// replicas of a pair of profiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairStats<W> {
    /// Estimated expected distance.
    pub mu: W,
    /// Upper bound on the distance of any replica pair: the distance can
    /// never exceed `norm(x_raw) + norm(y_raw)` because sampling only
    /// removes entries.
    pub zeta: W,
    /// Replica pairs used for the estimate.
    pub samples: usize,
}

pub(crate) fn sample_entries<W: Real, R: Rng>(
    profile: &SparseProfile<W>,
    p: f64,
    rng: &mut R,
) -> SparseProfile<W> {
    let entries = profile
        .entries()
        .iter()
        .filter(|_| rng.gen_bool(p))
        .copied()
        .collect();
    SparseProfile::new(profile.user(), entries).expect("subset of a valid profile is valid")
}

/// Estimates `mu` as the mean distance over `trials` independent
/// Bernoulli(p)-sampled replica pairs of the two raw profiles, with a
/// triangle-inequality upper bound as `zeta`.
pub fn estimate_pair_stats<W: Real>(
    x_raw: &SparseProfile<W>,
    y_raw: &SparseProfile<W>,
    p: W,
    trials: usize,
    seed: u64,
    cfg: &DistanceConfig<W>,
) -> Result<PairStats<W>> {
    if p < W::zero() || p > W::one() {
        return Err(Error::BadP(p.as_f64()));
    }
    if trials == 0 {
        return Err(Error::Config("trials must be >= 1".into()));
    }
    let zeta = combined_norm(x_raw, cfg)? + combined_norm(y_raw, cfg)?;
    let pf = p.as_f64();
    let mut sum = W::zero();
    if pf == 1.0 {
        sum = distance(x_raw, y_raw, cfg)? * W::of_usize(trials);
    } else {
        let mut rng = rng_from(seed);
        for _ in 0..trials {
            let xs = sample_entries(x_raw, pf, &mut rng);
            let ys = sample_entries(y_raw, pf, &mut rng);
            sum = sum + distance(&xs, &ys, cfg)?;
        }
    }
    Ok(PairStats {
        mu: sum / W::of_usize(trials),
        zeta,
        samples: trials,
    })
}

/// Supplies pair statistics to the Top-K and theorem checkers.
pub trait PairStatsSource<W: Real>: Sync {
    fn pair_stats(&self, v: &SparseProfile<W>, x: &SparseProfile<W>) -> Result<PairStats<W>>;
}

/// Estimates pair statistics by re-sampling the given profiles at rate `p`.
/// Each pair gets its own seed derived from the base seed and the two user
/// identifiers, so parallel evaluation is reproducible.
#[derive(Debug, Clone)]
pub struct SampledStats<W> {
    pub p: W,
    pub trials: usize,
    pub base_seed: u64,
    pub cfg: DistanceConfig<W>,
}

impl<W: Real> PairStatsSource<W> for SampledStats<W> {
    fn pair_stats(&self, v: &SparseProfile<W>, x: &SparseProfile<W>) -> Result<PairStats<W>> {
        let seed = mix(mix(self.base_seed, hash_str(v.user())), hash_str(x.user()));
        estimate_pair_stats(v, x, self.p, self.trials, seed, &self.cfg)
    }
}

/// Treats the given profiles as exact: `mu` is their actual distance.
#[derive(Debug, Clone)]
pub struct ExactStats<W: Real> {
    pub cfg: DistanceConfig<W>,
}

impl<W: Real> Default for ExactStats<W> {
    fn default() -> Self {
        ExactStats {
            cfg: DistanceConfig::default(),
        }
    }
}

impl<W: Real> PairStatsSource<W> for ExactStats<W> {
    fn pair_stats(&self, v: &SparseProfile<W>, x: &SparseProfile<W>) -> Result<PairStats<W>> {
        Ok(PairStats {
            mu: distance(v, x, &self.cfg)?,
            zeta: combined_norm(v, &self.cfg)? + combined_norm(x, &self.cfg)?,
            samples: 0,
        })
    }
}

/// Pairwise sufficient condition on estimated statistics. Picks the branch
/// from the order of the means; equal means make the condition inapplicable.
pub fn lemma3_check<W: Real>(
    stats_vu: &PairStats<W>,
    stats_vw: &PairStats<W>,
    n_features: usize,
) -> Result<bool> {
    if stats_vu.mu == stats_vw.mu {
        return Err(Error::EqualMeans);
    }
    let two = W::of(2.0);
    let (tight, loose) = if stats_vu.mu < stats_vw.mu {
        // inferring "closer wins": u's bound enters squared, w's doubled
        (stats_vu.zeta, stats_vw.zeta)
    } else {
        (stats_vw.zeta, stats_vu.zeta)
    };
    let lhs = (W::one() / (tight * tight)).min(W::one() / (two * loose * loose));
    let gap = (stats_vw.mu - stats_vu.mu).abs();
    let rhs = two * (two * W::of_usize(n_features).ln() + W::one()) / (gap * gap);
    Ok(lhs >= rhs)
}

/// Top-K inference by feature distance: the K training users closest to `v`.
pub fn topk_infer_distance<W: Real>(
    v: &SparseProfile<W>,
    training: &Dataset<W>,
    k: usize,
    cfg: &DistanceConfig<W>,
) -> Result<CandidateSet<W>> {
    let mut scored = Vec::with_capacity(training.len());
    for (i, u) in training.profiles().iter().enumerate() {
        scored.push((distance(v, u, cfg)?, i));
    }
    let members = select_top_k_indexed(scored, k, RankOrder::Ascending)?
        .into_iter()
        .map(|(score, i)| Candidate {
            user: training.profiles()[i].user().to_string(),
            score,
        })
        .collect();
    Ok(CandidateSet::new(v.user(), members))
}

/// Per-user verdict of the distance-based Top-K condition.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceVerdict<W> {
    pub status: VerdictStatus,
    /// Minimum squared gap of expected distances over the chosen excluded set.
    pub mu_min: W,
    /// Largest distance bound among the true match and the excluded set.
    pub zeta_max: W,
    /// `(8 ln N + 4 ln(2 theta n)) / mu_min` (or the theorem variant).
    pub threshold: W,
    /// Competitors whose expected distance ties the true match's.
    pub equal_means: usize,
}

struct DistanceCheckInput<W> {
    /// (squared mean gap, zeta) for every non-match, plus the match's zeta.
    gaps: Vec<(W, W)>,
    match_zeta: W,
}

fn gather_stats<W: Real>(
    v: &SparseProfile<W>,
    match_user: &str,
    training: &Dataset<W>,
    stats: &dyn PairStatsSource<W>,
) -> Result<DistanceCheckInput<W>> {
    let u = training
        .get(match_user)
        .ok_or_else(|| Error::UnknownUser(match_user.to_string()))?;
    let stats_vu = stats.pair_stats(v, u)?;
    let mut gaps = Vec::with_capacity(training.len() - 1);
    for x in training.profiles() {
        if x.user() == match_user {
            continue;
        }
        let s = stats.pair_stats(v, x)?;
        let gap = s.mu - stats_vu.mu;
        gaps.push((gap * gap, s.zeta));
    }
    Ok(DistanceCheckInput {
        gaps,
        match_zeta: stats_vu.zeta,
    })
}

/// Core of Lemma-4-style checks: choose the n-K competitors that maximise
/// the minimum squared mean gap, then compare `1 / zeta_max^2` against
/// `(8 ln N + 4 log_term) / mu_min`.
fn distance_condition<W: Real>(
    input: &DistanceCheckInput<W>,
    k: usize,
    n: usize,
    n_features: usize,
    log_term: W,
) -> DistanceVerdict<W> {
    let mut gaps = input.gaps.clone();
    gaps.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).expect("finite gap"));
    if k == n {
        // empty excluded set: vacuous pass
        return DistanceVerdict {
            status: VerdictStatus::Pass,
            mu_min: W::infinity(),
            zeta_max: input.match_zeta,
            threshold: W::zero(),
            equal_means: 0,
        };
    }
    let kept = &gaps[k - 1..];
    let equal_means = kept.iter().filter(|&&(g, _)| g == W::zero()).count();
    let mu_min = kept[0].0;
    let zeta_max = kept
        .iter()
        .map(|&(_, z)| z)
        .fold(input.match_zeta, |acc, z| acc.max(z));
    if equal_means > 0 {
        return DistanceVerdict {
            status: VerdictStatus::Inapplicable,
            mu_min,
            zeta_max,
            threshold: W::infinity(),
            equal_means,
        };
    }
    let eight = W::of(8.0);
    let four = W::of(4.0);
    let threshold = (eight * W::of_usize(n_features).ln() + four * log_term) / mu_min;
    let lhs = W::one() / (zeta_max * zeta_max);
    DistanceVerdict {
        status: if lhs >= threshold {
            VerdictStatus::Pass
        } else {
            VerdictStatus::Fail
        },
        mu_min,
        zeta_max,
        threshold,
        equal_means,
    }
}

fn theta_log<W: Real>(n: usize, k: usize) -> W {
    let theta = W::of_usize(n - k) / W::of_usize(n);
    (W::of(2.0) * theta * W::of_usize(n)).ln()
}

/// Per-user Top-K condition from precomputed pair statistics. `stats` must
/// cover the true match and every training user.
pub fn lemma4_check<W: Real>(
    match_user: &str,
    stats: &BTreeMap<String, PairStats<W>>,
    k: usize,
    n_features: usize,
) -> Result<DistanceVerdict<W>> {
    let n = stats.len();
    if k == 0 || k > n {
        return Err(Error::BadK { k, n });
    }
    let stats_vu = stats
        .get(match_user)
        .ok_or_else(|| Error::UnknownUser(match_user.to_string()))?;
    let gaps = stats
        .iter()
        .filter(|(user, _)| user.as_str() != match_user)
        .map(|(_, s)| {
            let gap = s.mu - stats_vu.mu;
            (gap * gap, s.zeta)
        })
        .collect();
    let input = DistanceCheckInput {
        gaps,
        match_zeta: stats_vu.zeta,
    };
    Ok(distance_condition(
        &input,
        k,
        n,
        n_features,
        theta_log::<W>(n, k),
    ))
}

/// Checks the (delta, K)-inferability of a target dataset under the distance
/// model, estimating pair statistics through `stats`.
pub fn theorem2_check<W: Real>(
    training: &Dataset<W>,
    target: &Dataset<W>,
    k: usize,
    delta: W,
    stats: &dyn PairStatsSource<W>,
) -> Result<QuantReport<W>> {
    let n = training.len();
    if k == 0 || k > n {
        return Err(Error::BadK { k, n });
    }
    if delta < W::zero() || delta > W::one() {
        return Err(Error::Config(format!("delta must lie in [0, 1], got {delta}")));
    }
    let ov = overlap(training, target)?;
    if ov.m_tilde() == 0 {
        return Err(Error::EmptyOverlap);
    }
    let n_features = training.space().len();
    let theta = W::of_usize(n - k) / W::of_usize(n);
    let log_term = (W::of(2.0) * delta * theta * W::of_usize(ov.m_tilde()) * W::of_usize(n)).ln();

    let rows: Result<Vec<UserVerdict<W>>> = ov
        .users()
        .par_iter()
        .map(|user| {
            let v = target.get(user).expect("overlap user in target");
            let input = gather_stats(v, user, training, stats)?;
            let verdict = distance_condition(&input, k, n, n_features, log_term);
            Ok(UserVerdict {
                user: user.clone(),
                status: verdict.status,
                metrics: VerdictMetrics::Distance {
                    mu_min: verdict.mu_min,
                    zeta_max: verdict.zeta_max,
                    threshold: verdict.threshold,
                },
            })
        })
        .collect();
    Ok(QuantReport::assemble(
        ModelKind::Distance,
        k,
        delta,
        ov.m_tilde(),
        rows?,
    ))
}
