//! The naive (binary) quantification: XOR distance, pairwise and Top-K
//! inference over 0/1 feature vectors, and the sufficient-condition checkers
//! built on them.

use rayon::prelude::*;

use crate::dataset::{overlap, Dataset, SparseProfile};
use crate::error::{Error, Result};
use crate::num::Real;
use crate::rank::{select_top_k_indexed, RankOrder};
use crate::report::{
    Candidate, CandidateSet, ModelKind, QuantReport, UserVerdict, VerdictMetrics, VerdictStatus,
};

/// Parameters of the binary model.
///
/// `p` is the per-feature preservation probability. `p = 1/2` is rejected at
/// construction: with it every user looks alike and no direction of
/// comparison is meaningful. `p = 1` (perfect preservation) is accepted.
#[derive(Debug, Clone, Copy)]
pub struct BinaryParams<W> {
    p: W,
    n_features: usize,
    k: usize,
    delta: W,
}

impl<W: Real> BinaryParams<W> {
    pub fn new(p: W, n_features: usize, k: usize, delta: W) -> Result<Self> {
        if p <= W::zero() || p > W::one() {
            return Err(Error::BadP(p.as_f64()));
        }
        if p == W::of(0.5) {
            return Err(Error::DegenerateP);
        }
        if k == 0 {
            return Err(Error::BadK { k, n: usize::MAX });
        }
        if delta < W::zero() || delta > W::one() {
            return Err(Error::Config(format!("delta must lie in [0, 1], got {delta}")));
        }
        if n_features == 0 {
            return Err(Error::Config("feature space is empty".into()));
        }
        Ok(BinaryParams {
            p,
            n_features,
            k,
            delta,
        })
    }

    pub fn p(&self) -> W {
        self.p
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn delta(&self) -> W {
        self.delta
    }

    fn prefers_min(&self) -> bool {
        self.p > W::of(0.5)
    }

    /// `(1 - 2p)^2`, the concentration factor in every binary threshold.
    fn gap_sq(&self) -> W {
        let g = W::one() - W::of(2.0) * self.p;
        g * g
    }
}

fn ensure_binary<W: Real>(x: &SparseProfile<W>) -> Result<()> {
    match x.entries().iter().find(|&&(_, w)| w != W::one()) {
        Some(&(_, w)) => Err(Error::NotBinary {
            user: x.user().to_string(),
            weight: w.as_f64(),
        }),
        None => Ok(()),
    }
}

/// Number of set features of a binary profile.
pub fn gamma<W: Real>(x: &SparseProfile<W>) -> Result<u64> {
    ensure_binary(x)?;
    Ok(x.len() as u64)
}

/// Hamming (XOR) distance between two binary profiles over one space.
pub fn gamma_xor<W: Real>(x: &SparseProfile<W>, y: &SparseProfile<W>) -> Result<u64> {
    ensure_binary(x)?;
    ensure_binary(y)?;
    Ok(gamma_xor_unchecked(x, y))
}

fn gamma_xor_unchecked<W: Real>(x: &SparseProfile<W>, y: &SparseProfile<W>) -> u64 {
    let (a, b) = (x.entries(), y.entries());
    let (mut i, mut j) = (0, 0);
    let mut differ = 0u64;
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => {
                differ += 1;
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                differ += 1;
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    differ + (a.len() - i) as u64 + (b.len() - j) as u64
}

/// Decides between two training users: the one closer to `v` in XOR distance
/// when `p > 1/2`, the farther one when `p < 1/2`. Ties go to the smaller
/// user identifier.
pub fn pairwise_infer<'a, W: Real>(
    v: &SparseProfile<W>,
    u: &'a SparseProfile<W>,
    w: &'a SparseProfile<W>,
    params: &BinaryParams<W>,
) -> Result<&'a SparseProfile<W>> {
    ensure_binary(v)?;
    let gu = gamma_xor(v, u)?;
    let gw = gamma_xor(v, w)?;
    let u_wins = if gu != gw {
        (gu < gw) == params.prefers_min()
    } else {
        u.user() <= w.user()
    };
    Ok(if u_wins { u } else { w })
}

fn pairwise_threshold<W: Real>(n_features: W, gap_sq: W) -> W {
    (W::of(16.0) * n_features.ln() + W::of(8.0)) / gap_sq
}

/// Separation a pair of training users needs for pairwise inference to be
/// statistically guaranteed: `(16 ln N + 8) / (1 - 2p)^2`.
pub fn lemma1_threshold<W: Real>(params: &BinaryParams<W>) -> W {
    pairwise_threshold(W::of_usize(params.n_features), params.gap_sq())
}

/// Whether the pair `(u, w)` clears the pairwise separation threshold.
pub fn lemma1_check<W: Real>(
    u: &SparseProfile<W>,
    w: &SparseProfile<W>,
    params: &BinaryParams<W>,
) -> Result<bool> {
    let g = gamma_xor(u, w)?;
    Ok(W::of(g as f64) >= lemma1_threshold(params))
}

/// Lower bound on the probability that pairwise inference picks the true
/// match: `max(0, 1 - 2 exp(-(1-2p)^2 gamma / 8))`.
pub fn corollary1_bound<W: Real>(
    u: &SparseProfile<W>,
    w: &SparseProfile<W>,
    params: &BinaryParams<W>,
) -> Result<W> {
    let g = gamma_xor(u, w)?;
    Ok(pairwise_success_bound(W::of(g as f64), params.gap_sq()))
}

fn pairwise_success_bound<W: Real>(gamma: W, gap_sq: W) -> W {
    let bound = W::one() - W::of(2.0) * (-(gap_sq * gamma) / W::of(8.0)).exp();
    bound.max(W::zero())
}

/// Top-K inference over a training dataset: the K users with the smallest
/// (`p > 1/2`) or largest (`p < 1/2`) XOR distance to `v`.
pub fn topk_infer<W: Real>(
    v: &SparseProfile<W>,
    training: &Dataset<W>,
    params: &BinaryParams<W>,
) -> Result<CandidateSet<W>> {
    ensure_binary(v)?;
    let mut scored = Vec::with_capacity(training.len());
    for (i, u) in training.profiles().iter().enumerate() {
        let g = gamma_xor(v, u)?;
        scored.push((W::of(g as f64), i));
    }
    let order = if params.prefers_min() {
        RankOrder::Ascending
    } else {
        RankOrder::Descending
    };
    let members = select_top_k_indexed(scored, params.k(), order)?
        .into_iter()
        .map(|(score, i)| Candidate {
            user: training.profiles()[i].user().to_string(),
            score,
        })
        .collect();
    Ok(CandidateSet::new(v.user(), members))
}

/// Outcome of a per-user Top-K sufficient-condition check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopKCondition<W> {
    /// Whether the separation condition holds.
    pub holds: bool,
    /// `min { gamma(u, w) }` over the chosen excluded set; `None` encodes the
    /// vacuous minimum (+inf) when K = n.
    pub min_gamma: Option<u64>,
    pub threshold: W,
}

/// XOR distances from `u` to every other training user, ascending.
fn sorted_gammas_from<W: Real>(
    match_user: &str,
    training: &Dataset<W>,
) -> Result<Vec<u64>> {
    let u = training
        .get(match_user)
        .ok_or_else(|| Error::UnknownUser(match_user.to_string()))?;
    let mut gammas = Vec::with_capacity(training.len() - 1);
    for w in training.profiles() {
        if w.user() == match_user {
            continue;
        }
        gammas.push(gamma_xor(u, w)?);
    }
    gammas.sort_unstable();
    Ok(gammas)
}

/// The best achievable `min gamma` over any size-(n-K) set of non-matches:
/// drop the K-1 closest, keep the rest. `None` when K = n.
fn optimal_min_gamma(sorted_gammas: &[u64], k: usize) -> Option<u64> {
    sorted_gammas.get(k - 1).copied()
}

fn gamma_or_inf<W: Real>(g: Option<u64>) -> W {
    g.map_or_else(W::infinity, |g| W::of(g as f64))
}

/// Per-user Top-K condition: the excluded set that maximises the minimum
/// separation from the true match must clear
/// `(16 ln N + 8 ln(2 theta n)) / (1 - 2p)^2`.
pub fn lemma2_check<W: Real>(
    match_user: &str,
    training: &Dataset<W>,
    params: &BinaryParams<W>,
) -> Result<TopKCondition<W>> {
    let n = training.len();
    if params.k() > n {
        return Err(Error::BadK { k: params.k(), n });
    }
    let gammas = sorted_gammas_from(match_user, training)?;
    let min_gamma = optimal_min_gamma(&gammas, params.k());
    let theta = W::of_usize(n - params.k()) / W::of_usize(n);
    let log_term = (W::of(2.0) * theta * W::of_usize(n)).ln();
    let threshold = (W::of(16.0) * W::of_usize(params.n_features()).ln()
        + W::of(8.0) * log_term)
        / params.gap_sq();
    Ok(TopKCondition {
        holds: gamma_or_inf::<W>(min_gamma) >= threshold,
        min_gamma,
        threshold,
    })
}

/// Lower bound on the probability that Top-K inference captures the true
/// match: `max(0, 1 - 2 theta n exp(-(1-2p)^2 min_gamma / 8))`.
pub fn corollary2_bound<W: Real>(
    match_user: &str,
    training: &Dataset<W>,
    params: &BinaryParams<W>,
) -> Result<W> {
    let n = training.len();
    if params.k() > n {
        return Err(Error::BadK { k: params.k(), n });
    }
    let gammas = sorted_gammas_from(match_user, training)?;
    let theta = W::of_usize(n - params.k()) / W::of_usize(n);
    let factor = W::of(2.0) * theta * W::of_usize(n);
    if factor == W::zero() {
        return Ok(W::one());
    }
    let min_gamma = gamma_or_inf::<W>(optimal_min_gamma(&gammas, params.k()));
    let bound = W::one() - factor * (-(params.gap_sq() * min_gamma) / W::of(8.0)).exp();
    Ok(bound.max(W::zero()))
}

/// Checks the (delta, K)-inferability condition of a target dataset against
/// a training dataset.
///
/// Every overlap user is tested against the strengthened per-user threshold
/// `(16 ln N + 8 ln(2 delta theta m_tilde n)) / (1 - 2p)^2`; the target is
/// inferable when at least `floor(delta * m_tilde)` users pass.
pub fn theorem1_check<W: Real>(
    training: &Dataset<W>,
    target: &Dataset<W>,
    params: &BinaryParams<W>,
) -> Result<QuantReport<W>> {
    let n = training.len();
    if params.k() > n {
        return Err(Error::BadK { k: params.k(), n });
    }
    let ov = overlap(training, target)?;
    if ov.m_tilde() == 0 {
        return Err(Error::EmptyOverlap);
    }
    let theta = W::of_usize(n - params.k()) / W::of_usize(n);
    let log_term = (W::of(2.0)
        * params.delta()
        * theta
        * W::of_usize(ov.m_tilde())
        * W::of_usize(n))
    .ln();
    let threshold = (W::of(16.0) * W::of_usize(params.n_features()).ln()
        + W::of(8.0) * log_term)
        / params.gap_sq();

    let rows: Result<Vec<UserVerdict<W>>> = ov
        .users()
        .par_iter()
        .map(|user| {
            let gammas = sorted_gammas_from(user, training)?;
            let min_gamma = optimal_min_gamma(&gammas, params.k());
            let pass = gamma_or_inf::<W>(min_gamma) >= threshold;
            Ok(UserVerdict {
                user: user.clone(),
                status: if pass {
                    VerdictStatus::Pass
                } else {
                    VerdictStatus::Fail
                },
                metrics: VerdictMetrics::Binary {
                    min_gamma,
                    threshold,
                },
            })
        })
        .collect();
    Ok(QuantReport::assemble(
        ModelKind::Binary,
        params.k(),
        params.delta(),
        ov.m_tilde(),
        rows?,
    ))
}
