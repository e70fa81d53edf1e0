//! Cosine feature-distribution quantification: similarity computation, the
//! per-feature comparison statistic behind it, and the distribution-based
//! condition checkers.

use rayon::prelude::*;

use crate::dataset::{overlap, Dataset, SparseProfile};
use crate::distance::{sample_entries, DistanceConfig};
use crate::error::{Error, Result};
use crate::num::Real;
use crate::rank::{select_top_k_indexed, RankOrder};
use crate::rng::rng_from;
use crate::report::{
    Candidate, CandidateSet, ModelKind, QuantReport, UserVerdict, VerdictMetrics, VerdictStatus,
};

fn combined_entries<W: Real>(x: &SparseProfile<W>, cfg: &DistanceConfig<W>) -> Vec<(u32, W)> {
    x.entries()
        .iter()
        .map(|&(i, w)| (i, cfg.combined(i, w)))
        .collect()
}

/// Euclidean magnitude of the combined vector.
pub fn magnitude<W: Real>(x: &SparseProfile<W>, cfg: &DistanceConfig<W>) -> W {
    x.entries()
        .iter()
        .map(|&(i, w)| {
            let g = cfg.combined(i, w);
            g * g
        })
        .fold(W::zero(), |a, b| a + b)
        .sqrt()
}

fn dot<W: Real>(a: &[(u32, W)], b: &[(u32, W)]) -> W {
    let (mut i, mut j) = (0, 0);
    let mut sum = W::zero();
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                sum = sum + a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    sum
}

/// Cosine similarity of two combined vectors. Both must have positive
/// magnitude.
pub fn cosine<W: Real>(
    x: &SparseProfile<W>,
    y: &SparseProfile<W>,
    cfg: &DistanceConfig<W>,
) -> Result<W> {
    let mx = magnitude(x, cfg);
    if mx == W::zero() {
        return Err(Error::ZeroVector(x.user().to_string()));
    }
    let my = magnitude(y, cfg);
    if my == W::zero() {
        return Err(Error::ZeroVector(y.user().to_string()));
    }
    let gx = combined_entries(x, cfg);
    let gy = combined_entries(y, cfg);
    Ok(dot(&gx, &gy) / (mx * my))
}

/// The comparison statistic for a (v, u, w) triple.
///
/// Per feature, `X_i = g_v^i (|g(u)| g_u^i - |g(u's rival)| ... )`, precisely
/// `X_i = g_v^i (m_w g_u^i - m_u g_w^i)` with `m_z` the magnitude of `z`'s
/// combined vector, and `X = sum X_i`. The sign of `X` decides which of `u`
/// and `w` is more cosine-similar to `v`:
/// `X / (m_v m_u m_w) = cos(v, u) - cos(v, w)` exactly.
#[derive(Debug, Clone)]
pub struct CosineTriple<W> {
    /// Nonzero per-feature terms, sparse over the feature space.
    pub x_terms: Vec<(u32, W)>,
    /// Exact sum of the terms for the given profiles.
    pub x_sum: W,
    /// Lower bound on any single term (0 is included whenever some feature
    /// contributes a zero term).
    pub l: W,
    /// Upper bound on any single term.
    pub h: W,
    /// Expected value of `X`: the exact sum when no sampling is requested,
    /// otherwise the mean over sampled replica triples.
    pub mu: W,
}

/// Bernoulli replica sampling for `mu` estimation.
#[derive(Debug, Clone, Copy)]
pub struct TripleSampling<W> {
    pub p: W,
    pub trials: usize,
    pub seed: u64,
}

/// Options for building a triple.
#[derive(Debug, Clone, Copy)]
pub struct TripleOptions<W> {
    pub sampling: Option<TripleSampling<W>>,
    /// Inflates the `[l, h]` interval symmetrically around its midpoint;
    /// 1.0 keeps the observed bounds.
    pub slack: W,
}

impl<W: Real> Default for TripleOptions<W> {
    fn default() -> Self {
        TripleOptions {
            sampling: None,
            slack: W::one(),
        }
    }
}

struct TermScan<W> {
    terms: Vec<(u32, W)>,
    sum: W,
    /// Minimum and maximum over all N per-feature terms, zeros included.
    min: W,
    max: W,
}

/// Single merge pass over (v, u, w) computing the terms and their range.
fn scan_terms<W: Real>(
    v: &SparseProfile<W>,
    u: &SparseProfile<W>,
    w: &SparseProfile<W>,
    mu_mag: W,
    mw_mag: W,
    n_features: usize,
    cfg: &DistanceConfig<W>,
) -> TermScan<W> {
    let gv = combined_entries(v, cfg);
    let gu = combined_entries(u, cfg);
    let gw = combined_entries(w, cfg);
    let mut terms = Vec::new();
    let mut sum = W::zero();
    let (mut j, mut k) = (0, 0);
    for &(idx, val_v) in &gv {
        while j < gu.len() && gu[j].0 < idx {
            j += 1;
        }
        while k < gw.len() && gw[k].0 < idx {
            k += 1;
        }
        let val_u = if j < gu.len() && gu[j].0 == idx {
            gu[j].1
        } else {
            W::zero()
        };
        let val_w = if k < gw.len() && gw[k].0 == idx {
            gw[k].1
        } else {
            W::zero()
        };
        let term = val_v * (mw_mag * val_u - mu_mag * val_w);
        if term != W::zero() {
            terms.push((idx, term));
            sum = sum + term;
        }
    }
    let has_zero_term = terms.len() < n_features;
    let (mut min, mut max) = if has_zero_term {
        (W::zero(), W::zero())
    } else {
        (W::infinity(), W::neg_infinity())
    };
    for &(_, t) in &terms {
        min = min.min(t);
        max = max.max(t);
    }
    TermScan { terms, sum, min, max }
}

/// Builds the comparison triple for `(v, u, w)` over a space of
/// `n_features` dimensions. `u` and `w` must have nonzero combined
/// magnitude. With sampling, `mu` and the `[l, h]` bounds are pooled over
/// Bernoulli(p) replica triples; the terms and their sum always describe
/// the given profiles exactly.
pub fn build_cosine_triple<W: Real>(
    v: &SparseProfile<W>,
    u: &SparseProfile<W>,
    w: &SparseProfile<W>,
    n_features: usize,
    cfg: &DistanceConfig<W>,
    opts: &TripleOptions<W>,
) -> Result<CosineTriple<W>> {
    let mu_mag = magnitude(u, cfg);
    if mu_mag == W::zero() {
        return Err(Error::ZeroVector(u.user().to_string()));
    }
    let mw_mag = magnitude(w, cfg);
    if mw_mag == W::zero() {
        return Err(Error::ZeroVector(w.user().to_string()));
    }
    if n_features < max_index_hint(v, u, w) {
        return Err(Error::Config(
            "n_features smaller than the profiles' largest index".into(),
        ));
    }

    // The exact construction for the given profiles.
    let exact = scan_terms(v, u, w, mu_mag, mw_mag, n_features, cfg);
    let (mut l, mut h) = (exact.min, exact.max);
    let mut mu = exact.sum;

    if let Some(sampling) = &opts.sampling {
        let pf = sampling.p.as_f64();
        if !(0.0..=1.0).contains(&pf) {
            return Err(Error::BadP(pf));
        }
        if sampling.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        let mut rng = rng_from(sampling.seed);
        let mut sum = W::zero();
        let mut used = 0usize;
        for _ in 0..sampling.trials {
            let vs = sample_entries(v, pf, &mut rng);
            let us = sample_entries(u, pf, &mut rng);
            let ws = sample_entries(w, pf, &mut rng);
            let mus = magnitude(&us, cfg);
            let mws = magnitude(&ws, cfg);
            if mus == W::zero() || mws == W::zero() {
                // replica degenerated; X is identically zero for it
                used += 1;
                l = l.min(W::zero());
                h = h.max(W::zero());
                continue;
            }
            let scan = scan_terms(&vs, &us, &ws, mus, mws, n_features, cfg);
            sum = sum + scan.sum;
            used += 1;
            l = l.min(scan.min);
            h = h.max(scan.max);
        }
        mu = sum / W::of_usize(used);
    }

    // widen symmetrically around the midpoint by the slack factor
    if opts.slack != W::one() {
        let mid = (l + h) / W::of(2.0);
        let half = (h - l) / W::of(2.0) * opts.slack;
        l = mid - half;
        h = mid + half;
    }

    Ok(CosineTriple {
        x_terms: exact.terms,
        x_sum: exact.sum,
        l,
        h,
        mu,
    })
}

/// Smallest dimension consistent with the three profiles.
fn max_index_hint<W: Real>(
    v: &SparseProfile<W>,
    u: &SparseProfile<W>,
    w: &SparseProfile<W>,
) -> usize {
    [v, u, w]
        .iter()
        .filter_map(|p| p.entries().last().map(|&(i, _)| i as usize + 1))
        .max()
        .unwrap_or(0)
}

/// Pairwise sufficient condition: `mu >= (h - l) sqrt(2 N ln N) / xi`.
/// When `h = l` the statistic is deterministic and the check reduces to
/// `mu > 0`.
pub fn lemma5_check<W: Real>(t: &CosineTriple<W>, n_features: usize, xi: W) -> Result<bool> {
    check_xi(xi)?;
    if t.h == t.l {
        return Ok(t.mu > W::zero());
    }
    let n = W::of_usize(n_features);
    let threshold = (t.h - t.l) * (W::of(2.0) * n * n.ln()).sqrt() / xi;
    Ok(t.mu >= threshold)
}

fn check_xi<W: Real>(xi: W) -> Result<()> {
    if xi <= W::zero() || xi >= W::one() {
        return Err(Error::BadXi(xi.as_f64()));
    }
    Ok(())
}

/// Top-K inference by cosine similarity: the K training users most similar
/// to `v`. Zero-magnitude training users are excluded (their count is
/// reported); a zero-magnitude target cannot be ranked.
/// Per-dataset cache of combined vectors and their magnitudes, aligned with
/// the dataset's profile order. Built once, shared by every target lookup.
pub struct CombinedCache<W> {
    vectors: Vec<Vec<(u32, W)>>,
    magnitudes: Vec<W>,
}

impl<W: Real> CombinedCache<W> {
    pub fn new(ds: &Dataset<W>, cfg: &DistanceConfig<W>) -> Self {
        let vectors: Vec<Vec<(u32, W)>> = ds
            .profiles()
            .iter()
            .map(|p| combined_entries(p, cfg))
            .collect();
        let magnitudes = vectors
            .iter()
            .map(|v| {
                v.iter()
                    .map(|&(_, g)| g * g)
                    .fold(W::zero(), |a, b| a + b)
                    .sqrt()
            })
            .collect();
        CombinedCache {
            vectors,
            magnitudes,
        }
    }
}

pub fn topk_infer_cosine<W: Real>(
    v: &SparseProfile<W>,
    training: &Dataset<W>,
    k: usize,
    cfg: &DistanceConfig<W>,
) -> Result<(CandidateSet<W>, usize)> {
    let cache = CombinedCache::new(training, cfg);
    topk_infer_cosine_cached(v, training, &cache, k, cfg)
}

/// [`topk_infer_cosine`] against a prebuilt [`CombinedCache`].
pub fn topk_infer_cosine_cached<W: Real>(
    v: &SparseProfile<W>,
    training: &Dataset<W>,
    cache: &CombinedCache<W>,
    k: usize,
    cfg: &DistanceConfig<W>,
) -> Result<(CandidateSet<W>, usize)> {
    if k == 0 || k > training.len() {
        return Err(Error::BadK {
            k,
            n: training.len(),
        });
    }
    let mv = magnitude(v, cfg);
    if mv == W::zero() {
        return Err(Error::ZeroVector(v.user().to_string()));
    }
    let gv = combined_entries(v, cfg);
    let mut scored = Vec::with_capacity(training.len());
    let mut excluded = 0usize;
    for i in 0..training.len() {
        let mu_mag = cache.magnitudes[i];
        if mu_mag == W::zero() {
            excluded += 1;
            continue;
        }
        scored.push((dot(&gv, &cache.vectors[i]) / (mv * mu_mag), i));
    }
    if scored.is_empty() {
        return Err(Error::ZeroVector("<training>".to_string()));
    }
    let k_eff = k.min(scored.len());
    let members = select_top_k_indexed(scored, k_eff, RankOrder::Descending)?
        .into_iter()
        .map(|(score, i)| Candidate {
            user: training.profiles()[i].user().to_string(),
            score,
        })
        .collect();
    Ok((CandidateSet::new(v.user(), members), excluded))
}

/// Per-user verdict of the distribution-based Top-K condition: the binding
/// (worst-margin) competitor's quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionVerdict<W> {
    pub status: VerdictStatus,
    /// `mu` of the binding triple; `None` when the check is vacuous (K = n).
    pub mu: Option<W>,
    pub h_minus_l: Option<W>,
    pub threshold: Option<W>,
}

/// Threshold `(h - l) sqrt(N ln(log_arg)) / xi` shared by the Top-K and
/// (delta, K) checks; they differ only in the logarithm's argument. The
/// logarithm is clamped at zero so a vanishing argument (delta = 0) yields
/// the weakest threshold instead of a meaningless one.
fn distribution_threshold<W: Real>(h_minus_l: W, n_features: usize, log_arg: W, xi: W) -> W {
    let n = W::of_usize(n_features);
    h_minus_l * (n * log_arg.ln().max(W::zero())).sqrt() / xi
}

fn lemma6_condition<W: Real>(
    v: &SparseProfile<W>,
    match_user: &str,
    training: &Dataset<W>,
    k: usize,
    cfg: &DistanceConfig<W>,
    xi: W,
    opts: &TripleOptions<W>,
    log_arg: W,
) -> Result<DistributionVerdict<W>> {
    let n = training.len();
    let u = training
        .get(match_user)
        .ok_or_else(|| Error::UnknownUser(match_user.to_string()))?;
    if magnitude(v, cfg) == W::zero() || magnitude(u, cfg) == W::zero() {
        return Ok(DistributionVerdict {
            status: VerdictStatus::NotAssessable,
            mu: None,
            h_minus_l: None,
            threshold: None,
        });
    }
    if k == n {
        return Ok(DistributionVerdict {
            status: VerdictStatus::Pass,
            mu: None,
            h_minus_l: None,
            threshold: None,
        });
    }
    let cos_vu = cosine(v, u, cfg)?;
    // Build a triple per competitor. Zero-magnitude competitors cannot
    // outrank the match whenever cos(v, u) > 0; treat them as separable
    // without a bound.
    struct Comp<W> {
        mu: W,
        h_minus_l: W,
        threshold: W,
    }
    let mut comps: Vec<Comp<W>> = Vec::with_capacity(n - 1);
    let mut zero_mag_ok = 0usize;
    let mut zero_mag_bad = 0usize;
    for w in training.profiles() {
        if w.user() == match_user {
            continue;
        }
        if magnitude(w, cfg) == W::zero() {
            if cos_vu > W::zero() {
                zero_mag_ok += 1;
            } else {
                zero_mag_bad += 1;
            }
            continue;
        }
        let t = build_cosine_triple(v, u, w, training.space().len(), cfg, opts)?;
        let threshold = distribution_threshold(t.h - t.l, training.space().len(), log_arg, xi);
        comps.push(Comp {
            mu: t.mu,
            h_minus_l: t.h - t.l,
            threshold,
        });
    }
    // Keep the n - K competitors with the largest mu (exclude the K - 1
    // hardest); zero-magnitude separable competitors count as passing with
    // infinite margin.
    comps.sort_unstable_by(|a, b| a.mu.partial_cmp(&b.mu).expect("finite mu"));
    let keep = n - k;
    let drop = comps.len() + zero_mag_ok + zero_mag_bad - keep; // = k - 1
    let kept: Vec<&Comp<W>> = if zero_mag_bad > 0 {
        // an inseparable zero-magnitude competitor can never be certified;
        // it is always kept in the worst case unless dropped, and dropping
        // covers at most k - 1 of them
        if zero_mag_bad > drop {
            return Ok(DistributionVerdict {
                status: VerdictStatus::Fail,
                mu: Some(W::zero()),
                h_minus_l: Some(W::zero()),
                threshold: Some(W::zero()),
            });
        }
        comps.iter().skip(drop - zero_mag_bad).collect()
    } else {
        comps.iter().skip(drop.min(comps.len())).collect()
    };
    // Binding competitor: smallest margin mu - threshold.
    let mut binding: Option<&Comp<W>> = None;
    let mut all_pass = true;
    for c in kept {
        let pass = if c.h_minus_l == W::zero() {
            c.mu > W::zero()
        } else {
            c.mu >= c.threshold
        };
        all_pass &= pass;
        let margin = c.mu - c.threshold;
        if binding.map_or(true, |b| margin < b.mu - b.threshold) {
            binding = Some(c);
        }
    }
    match binding {
        None => Ok(DistributionVerdict {
            // only separable zero-magnitude competitors remained
            status: VerdictStatus::Pass,
            mu: None,
            h_minus_l: None,
            threshold: None,
        }),
        Some(c) => Ok(DistributionVerdict {
            status: if all_pass {
                VerdictStatus::Pass
            } else {
                VerdictStatus::Fail
            },
            mu: Some(c.mu),
            h_minus_l: Some(c.h_minus_l),
            threshold: Some(c.threshold),
        }),
    }
}

/// Per-user Top-K condition: every kept competitor's `mu` must clear
/// `(h - l) sqrt(N ln(N^2 theta n)) / xi`.
pub fn lemma6_check<W: Real>(
    v: &SparseProfile<W>,
    training: &Dataset<W>,
    k: usize,
    cfg: &DistanceConfig<W>,
    xi: W,
    opts: &TripleOptions<W>,
) -> Result<DistributionVerdict<W>> {
    check_xi(xi)?;
    let n = training.len();
    if k == 0 || k > n {
        return Err(Error::BadK { k, n });
    }
    let match_user = v.user().to_string();
    let n_w = W::of_usize(training.space().len());
    let theta = W::of_usize(n - k) / W::of_usize(n);
    let log_arg = n_w * n_w * theta * W::of_usize(n);
    lemma6_condition(v, &match_user, training, k, cfg, xi, opts, log_arg)
}

/// Checks the (delta, K)-inferability of a target dataset under the
/// distribution model, with the strengthened
/// `(h - l) sqrt(N ln(delta theta m_tilde n N^2)) / xi` threshold.
pub fn theorem3_check<W: Real>(
    training: &Dataset<W>,
    target: &Dataset<W>,
    k: usize,
    delta: W,
    cfg: &DistanceConfig<W>,
    xi: W,
    opts: &TripleOptions<W>,
) -> Result<QuantReport<W>> {
    check_xi(xi)?;
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
    let n_w = W::of_usize(training.space().len());
    let theta = W::of_usize(n - k) / W::of_usize(n);
    let log_arg = delta * theta * W::of_usize(ov.m_tilde()) * W::of_usize(n) * n_w * n_w;

    let rows: Result<Vec<UserVerdict<W>>> = ov
        .users()
        .par_iter()
        .map(|user| {
            let v = target.get(user).expect("overlap user in target");
            let verdict = lemma6_condition(v, user, training, k, cfg, xi, opts, log_arg)?;
            Ok(UserVerdict {
                user: user.clone(),
                status: verdict.status,
                metrics: VerdictMetrics::Distribution {
                    mu: verdict.mu,
                    h_minus_l: verdict.h_minus_l,
                    threshold: verdict.threshold,
                },
            })
        })
        .collect();
    Ok(QuantReport::assemble(
        ModelKind::Distribution,
        k,
        delta,
        ov.m_tilde(),
        rows?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{build_dataset, Edge, Role};

    fn p(user: &str, entries: &[(u32, f64)]) -> SparseProfile<f64> {
        SparseProfile::new(user, entries.to_vec()).unwrap()
    }

    #[test]
    fn cosine_identity_orthogonal_and_analytic() {
        let cfg = DistanceConfig::default();
        let x = p("x", &[(0, 2.0), (1, 1.0)]);
        assert!((cosine(&x, &x, &cfg).unwrap() - 1.0).abs() < 1e-12);
        let a = p("a", &[(0, 1.0)]);
        let b = p("b", &[(1, 1.0)]);
        assert_eq!(cosine(&a, &b, &cfg).unwrap(), 0.0);
        // (1, 0) vs (1, 1): 1/sqrt(2)
        let c = p("c", &[(0, 1.0), (1, 1.0)]);
        let got = cosine(&a, &c, &cfg).unwrap();
        assert!((got - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn cosine_zero_vector_is_an_error() {
        let cfg = DistanceConfig::default();
        let x = p("x", &[(0, 1.0)]);
        let z = p("z", &[]);
        assert!(matches!(cosine(&x, &z, &cfg), Err(Error::ZeroVector(_))));
    }

    #[test]
    fn triple_of_identical_competitors_is_zero() {
        let cfg = DistanceConfig::default();
        let v = p("v", &[(0, 1.0), (1, 2.0)]);
        let u = p("u", &[(0, 3.0), (1, 1.0)]);
        let t = build_cosine_triple(&v, &u, &u, 2, &cfg, &TripleOptions::default()).unwrap();
        assert!(t.x_terms.is_empty());
        assert_eq!(t.x_sum, 0.0);
        assert_eq!(t.mu, 0.0);
    }

    #[test]
    fn triple_sign_matches_cosine_order() {
        let cfg = DistanceConfig::default();
        let v = p("v", &[(0, 1.0), (1, 1.0)]);
        let u = p("u", &[(0, 1.0), (1, 1.0)]); // same direction as v
        let w = p("w", &[(0, 1.0)]);
        let t = build_cosine_triple(&v, &u, &w, 2, &cfg, &TripleOptions::default()).unwrap();
        let diff = cosine(&v, &u, &cfg).unwrap() - cosine(&v, &w, &cfg).unwrap();
        assert!(t.x_sum > 0.0);
        assert!(diff > 0.0);
        // the identity X / (m_v m_u m_w) = cos(v,u) - cos(v,w)
        let scale = magnitude(&v, &cfg) * magnitude(&u, &cfg) * magnitude(&w, &cfg);
        assert!((t.x_sum / scale - diff).abs() < 1e-12);
    }

    #[test]
    fn triple_bounds_include_implicit_zero() {
        let cfg = DistanceConfig::default();
        // every term of this triple is positive, but the space is larger
        // than the union support, so 0 is a realised term value
        let v = p("v", &[(0, 1.0)]);
        let u = p("u", &[(0, 1.0), (1, 5.0)]);
        let w = p("w", &[(0, 2.0)]);
        let t = build_cosine_triple(&v, &u, &w, 3, &cfg, &TripleOptions::default()).unwrap();
        assert!(t.l <= 0.0);
        assert!(t.h >= t.l);
        let m = t.x_terms.iter().map(|&(_, x)| x).fold(f64::INFINITY, f64::min);
        assert!(t.l <= m);
    }

    #[test]
    fn triple_rejects_undersized_space() {
        let cfg = DistanceConfig::default();
        let v = p("v", &[(0, 1.0)]);
        let u = p("u", &[(5, 1.0)]);
        assert!(build_cosine_triple(&v, &u, &u, 3, &cfg, &TripleOptions::default()).is_err());
    }

    #[test]
    fn lemma5_examples() {
        // mu = 0 -> false
        let t = CosineTriple {
            x_terms: vec![],
            x_sum: 0.0f64,
            l: -1.0,
            h: 1.0,
            mu: 0.0,
        };
        assert!(!lemma5_check(&t, 100, 0.5).unwrap());
        // h = l with mu > 0 -> true (deterministic statistic)
        let t2 = CosineTriple {
            x_terms: vec![],
            x_sum: 1.0f64,
            l: 0.5,
            h: 0.5,
            mu: 1.0,
        };
        assert!(lemma5_check(&t2, 100, 0.5).unwrap());
        // N = 1283, xi = 0.5, h - l = 2, mu = 500: threshold = 542.066... -> false
        let t3 = CosineTriple {
            x_terms: vec![],
            x_sum: 500.0f64,
            l: -1.0,
            h: 1.0,
            mu: 500.0,
        };
        assert!(!lemma5_check(&t3, 1283, 0.5).unwrap());
        let threshold = 2.0 * (2.0 * 1283.0 * (1283.0f64).ln()).sqrt() / 0.5;
        assert!((threshold - 542.0664170612856).abs() < 1e-9);
        assert!(matches!(lemma5_check(&t3, 1283, 1.5), Err(Error::BadXi(_))));
    }

    #[test]
    fn topk_cosine_duplicate_ranks_first_and_scaling_invariance() {
        let training = build_dataset(
            vec![
                Edge::new("a", "f0", 2.0),
                Edge::new("a", "f1", 1.0),
                Edge::new("b", "f1", 3.0),
                Edge::new("c", "f0", 1.0),
            ],
            Role::Training,
        )
        .unwrap();
        let cfg = DistanceConfig::default();
        let v = p("v", &[(0, 2.0), (1, 1.0)]);
        let (cs, excluded) = topk_infer_cosine(&v, &training, 2, &cfg).unwrap();
        assert_eq!(excluded, 0);
        assert_eq!(cs.members()[0].user, "a");
        assert!((cs.members()[0].score - 1.0).abs() < 1e-12);
        // scaling v by alpha > 0 leaves the candidate set identical
        let v_scaled = p("v", &[(0, 6.0), (1, 3.0)]);
        let (cs2, _) = topk_infer_cosine(&v_scaled, &training, 2, &cfg).unwrap();
        let users: Vec<_> = cs.members().iter().map(|c| &c.user).collect();
        let users2: Vec<_> = cs2.members().iter().map(|c| &c.user).collect();
        assert_eq!(users, users2);
    }

    #[test]
    fn topk_cosine_excludes_zero_magnitude_training_users() {
        let training = build_dataset(
            vec![
                Edge::new("a", "f0", 1.0),
                Edge::new("b", "f0", 0.0), // empty profile
                Edge::new("c", "f1", 1.0),
            ],
            Role::Training,
        )
        .unwrap();
        let cfg = DistanceConfig::default();
        let v = p("v", &[(0, 1.0)]);
        let (cs, excluded) = topk_infer_cosine(&v, &training, 2, &cfg).unwrap();
        assert_eq!(excluded, 1);
        assert_eq!(cs.len(), 2);
        assert!(!cs.contains("b"));
    }

    #[test]
    fn lemma6_vacuous_at_k_equals_n() {
        let training = build_dataset(
            vec![Edge::new("a", "f0", 1.0), Edge::new("b", "f1", 1.0)],
            Role::Training,
        )
        .unwrap();
        let cfg = DistanceConfig::default();
        let v = p("a", &[(0, 1.0)]);
        let verdict =
            lemma6_check(&v, &training, 2, &cfg, 0.5, &TripleOptions::default()).unwrap();
        assert_eq!(verdict.status, VerdictStatus::Pass);
        assert_eq!(verdict.mu, None);
    }

    #[test]
    fn theorem3_delta_zero_is_true() {
        let training = build_dataset(
            vec![Edge::new("a", "f0", 1.0), Edge::new("b", "f1", 1.0)],
            Role::Training,
        )
        .unwrap();
        let target = training.clone().with_role(Role::Target);
        let cfg = DistanceConfig::default();
        let report = theorem3_check(
            &training,
            &target,
            1,
            0.0f64,
            &cfg,
            0.5,
            &TripleOptions::default(),
        )
        .unwrap();
        assert!(report.inferable);
    }

    #[test]
    fn theorem3_orthogonal_clusters_pass() {
        // Disjoint supports force cos(v, w) = 0 while cos(v, u) > 0. The
        // per-user statistic then has mu = sqrt(s) * s and h - l = sqrt(s)
        // for users with s unit features, so s features per user clear the
        // sqrt(N ln(delta theta m n N^2)) / xi threshold once s is large
        // enough. s = 400 over n = 3 users comfortably does.
        let s = 400u32;
        let mut edges = Vec::new();
        for (ui, user) in ["a", "b", "c"].iter().enumerate() {
            for f in 0..s {
                edges.push(Edge::new(*user, format!("f{}", ui as u32 * s + f), 1.0));
            }
        }
        let training = build_dataset(edges, Role::Training).unwrap();
        let target = training.clone().with_role(Role::Target);
        let cfg = DistanceConfig::default();
        let report = theorem3_check(
            &training,
            &target,
            1,
            1.0f64,
            &cfg,
            0.5,
            &TripleOptions::default(),
        )
        .unwrap();
        assert_eq!(report.passed, 3, "summary: {}", report.summary_json());
        assert!(report.inferable);
    }
}
