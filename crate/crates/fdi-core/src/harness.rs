//! Evaluation harness: Bernoulli(p) replica sampling, Top-K inference runs,
//! (delta, K) sweep grids with repetition averaging, and a general Chernoff
//! bound utility.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;

use crate::binary::{topk_infer, BinaryParams};
use crate::dataset::{overlap, Dataset, Role, SparseProfile};
use crate::distance::{topk_infer_distance, DistanceConfig};
use crate::distribution::topk_infer_cosine_cached;
use crate::error::{Error, Result};
use crate::num::Real;
use crate::report::ModelKind;
use crate::rng::{mix, rng_from};

/// Keeps every user and feature while sampling each user-feature
/// relationship independently with probability `p`. Users may end up with
/// empty profiles; they stay in the dataset.
pub fn sample_replica<W: Real>(raw: &Dataset<W>, p: W, seed: u64) -> Result<Dataset<W>> {
    let pf = p.as_f64();
    if !(pf > 0.0 && pf <= 1.0) {
        return Err(Error::BadP(pf));
    }
    let mut rng = rng_from(seed);
    let mut profiles = Vec::with_capacity(raw.len());
    for profile in raw.profiles() {
        let entries = if pf == 1.0 {
            profile.entries().to_vec()
        } else {
            profile
                .entries()
                .iter()
                .filter(|_| rand::Rng::gen_bool(&mut rng, pf))
                .copied()
                .collect()
        };
        profiles.push(SparseProfile::new(profile.user(), entries)?);
    }
    Dataset::from_profiles(Arc::clone(raw.space()), profiles, raw.role())
}

/// The model a harness run infers with. Binary runs binarize the replicas
/// first; distance and distribution use the replica weights as-is.
#[derive(Debug, Clone)]
pub enum ModelSpec<W> {
    Binary,
    Distance(DistanceConfig<W>),
    Distribution(DistanceConfig<W>),
}

impl<W> ModelSpec<W> {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Binary => ModelKind::Binary,
            ModelSpec::Distance(_) => ModelKind::Distance,
            ModelSpec::Distribution(_) => ModelKind::Distribution,
        }
    }
}

/// Outcome of one (p, K) repetition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellOutcome<W> {
    /// Fraction of overlap users whose true identity appeared in their
    /// candidate set; `None` when the replicas shared no users.
    pub delta: Option<W>,
    pub m_tilde: usize,
    pub hits: usize,
}

const SALT_TRAINING: u64 = 0x7261;
const SALT_TARGET: u64 = 0x7461;

/// Samples a training and a target replica of `raw` with independent seeds
/// derived from `rep_seed`, runs the model's Top-K inference for every
/// overlap user, and reports the fraction recovered.
pub fn run_cell<W: Real>(
    raw: &Dataset<W>,
    p: W,
    k: usize,
    model: &ModelSpec<W>,
    rep_seed: u64,
) -> Result<CellOutcome<W>> {
    let training = sample_replica(raw, p, mix(rep_seed, SALT_TRAINING))?;
    let target = sample_replica(raw, p, mix(rep_seed, SALT_TARGET))?.with_role(Role::Target);
    let training = match model {
        ModelSpec::Binary => training.binary_view(),
        _ => training,
    };
    let ov = overlap(&training, &target)?;
    let m_tilde = ov.m_tilde();
    if m_tilde == 0 {
        return Ok(CellOutcome {
            delta: None,
            m_tilde: 0,
            hits: 0,
        });
    }
    let cosine_cache = match model {
        ModelSpec::Distribution(cfg) => Some(crate::distribution::CombinedCache::new(&training, cfg)),
        _ => None,
    };
    let hits: Result<usize> = ov
        .users()
        .par_iter()
        .map(|user| {
            let v = target.get(user).expect("overlap user in target");
            let hit = match model {
                ModelSpec::Binary => {
                    let params = BinaryParams::new(p, training.space().len(), k, W::zero())?;
                    topk_infer(&v.binary(), &training, &params)?.contains(user)
                }
                ModelSpec::Distance(cfg) => {
                    topk_infer_distance(v, &training, k, cfg)?.contains(user)
                }
                ModelSpec::Distribution(cfg) => {
                    let cache = cosine_cache.as_ref().expect("cache built for distribution");
                    topk_infer_cosine_cached(v, &training, cache, k, cfg)?
                        .0
                        .contains(user)
                }
            };
            Ok(hit as usize)
        })
        .sum();
    let hits = hits?;
    Ok(CellOutcome {
        delta: Some(W::of_usize(hits) / W::of_usize(m_tilde)),
        m_tilde,
        hits,
    })
}

/// Candidate-set size, absolute or as a fraction of the training user count
/// (rounded to the nearest integer, at least 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KSpec<W> {
    Count(usize),
    Fraction(W),
}

impl<W: Real> KSpec<W> {
    pub fn resolve(&self, n: usize) -> Result<usize> {
        let k = match *self {
            KSpec::Count(k) => k,
            KSpec::Fraction(f) => {
                if f <= W::zero() || f > W::one() {
                    return Err(Error::Config(format!(
                        "K fraction must lie in (0, 1], got {f}"
                    )));
                }
                ((f * W::of_usize(n)).round().as_f64() as usize).max(1)
            }
        };
        if k == 0 || k > n {
            return Err(Error::BadK { k, n });
        }
        Ok(k)
    }
}

/// Grid description of a sweep.
#[derive(Debug, Clone)]
pub struct SweepConfig<W> {
    pub p_grid: Vec<W>,
    pub k_grid: Vec<KSpec<W>>,
    pub model: ModelSpec<W>,
    pub reps: usize,
    pub seed: u64,
}

/// Aggregate of one grid cell.
#[derive(Debug, Clone)]
pub struct SweepCell<W> {
    pub p: W,
    pub k: usize,
    pub delta_mean: W,
    pub delta_stddev: W,
    pub m_tilde_mean: W,
    /// Repetitions with a nonempty overlap; only they enter the means.
    pub reps_used: usize,
    pub per_rep: Vec<CellOutcome<W>>,
}

#[derive(Debug, Clone)]
pub struct SweepResult<W> {
    pub cells: Vec<SweepCell<W>>,
}

/// Seed for the sampling phase of a repetition. Deliberately independent of
/// K: cells at the same (p, rep) share replicas across the K axis, which
/// makes delta exactly non-decreasing in K (candidate sets are nested).
pub fn rep_sampling_seed(base_seed: u64, p_idx: usize, rep_idx: usize) -> u64 {
    mix(mix(base_seed, p_idx as u64), rep_idx as u64)
}

/// Runs the whole grid: `reps` repetitions per (p, K) cell, averaged.
/// Repetitions whose overlap is empty are excluded from the averages and
/// counted in `reps_used`.
pub fn sweep<W: Real>(raw: &Dataset<W>, cfg: &SweepConfig<W>) -> Result<SweepResult<W>> {
    if cfg.p_grid.is_empty() || cfg.k_grid.is_empty() {
        return Err(Error::Config("sweep grids must be nonempty".into()));
    }
    if cfg.reps == 0 {
        return Err(Error::Config("reps must be >= 1".into()));
    }
    let n = raw.len();
    let mut cells = Vec::with_capacity(cfg.p_grid.len() * cfg.k_grid.len());
    for (p_idx, &p) in cfg.p_grid.iter().enumerate() {
        for k_spec in &cfg.k_grid {
            let k = k_spec.resolve(n)?;
            let per_rep: Result<Vec<CellOutcome<W>>> = (0..cfg.reps)
                .map(|rep_idx| {
                    let rep_seed = rep_sampling_seed(cfg.seed, p_idx, rep_idx);
                    run_cell(raw, p, k, &cfg.model, rep_seed)
                })
                .collect();
            let per_rep = per_rep?;
            let used: Vec<&CellOutcome<W>> =
                per_rep.iter().filter(|o| o.delta.is_some()).collect();
            let reps_used = used.len();
            let (delta_mean, delta_stddev, m_tilde_mean) = if reps_used == 0 {
                (W::zero(), W::zero(), W::zero())
            } else {
                let count = W::of_usize(reps_used);
                let mean = used
                    .iter()
                    .map(|o| o.delta.unwrap())
                    .fold(W::zero(), |a, b| a + b)
                    / count;
                let var = if reps_used < 2 {
                    W::zero()
                } else {
                    used.iter()
                        .map(|o| {
                            let d = o.delta.unwrap() - mean;
                            d * d
                        })
                        .fold(W::zero(), |a, b| a + b)
                        / W::of_usize(reps_used - 1)
                };
                let m_mean = used
                    .iter()
                    .map(|o| W::of_usize(o.m_tilde))
                    .fold(W::zero(), |a, b| a + b)
                    / count;
                (mean, var.sqrt(), m_mean)
            };
            cells.push(SweepCell {
                p,
                k,
                delta_mean,
                delta_stddev,
                m_tilde_mean,
                reps_used,
                per_rep,
            });
        }
    }
    Ok(SweepResult { cells })
}

impl<W: Real> SweepResult<W> {
    /// One row per cell: `p,k,delta_mean,delta_stddev,m_tilde_mean,reps_used`.
    pub fn write_csv<Out: Write>(&self, out: Out) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["p", "k", "delta_mean", "delta_stddev", "m_tilde_mean", "reps_used"])
            .map_err(|e| Error::Config(format!("csv write failed: {e}")))?;
        for cell in &self.cells {
            wtr.write_record(&[
                cell.p.to_string(),
                cell.k.to_string(),
                cell.delta_mean.to_string(),
                cell.delta_stddev.to_string(),
                cell.m_tilde_mean.to_string(),
                cell.reps_used.to_string(),
            ])
            .map_err(|e| Error::Config(format!("csv write failed: {e}")))?;
        }
        wtr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Which tail of the sum the bound controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailSide {
    /// `Pr(X >= (1 + xi) mu) <= exp(-2 xi^2 mu^2 / (n (b - a)^2))`
    Upper,
    /// `Pr(X <= (1 - xi) mu) <= exp(-xi^2 mu^2 / (n (b - a)^2))`
    Lower,
}

/// General Chernoff bound for a sum of `n_vars` variables each confined to
/// `[a, b]`, with expectation `mu` of the sum.
pub fn chernoff_upper<W: Real>(
    n_vars: usize,
    a: W,
    b: W,
    mu: W,
    xi: W,
    side: TailSide,
) -> Result<W> {
    if a >= b {
        return Err(Error::DegenerateBounds {
            a: a.as_f64(),
            b: b.as_f64(),
        });
    }
    if n_vars == 0 {
        return Err(Error::Config("n_vars must be >= 1".into()));
    }
    if mu < W::zero() {
        return Err(Error::Config(format!("mu must be non-negative, got {mu}")));
    }
    if xi < W::zero() {
        return Err(Error::BadXi(xi.as_f64()));
    }
    let range = b - a;
    let denom = W::of_usize(n_vars) * range * range;
    let core = xi * xi * mu * mu / denom;
    let exponent = match side {
        TailSide::Upper => W::of(2.0) * core,
        TailSide::Lower => core,
    };
    Ok((-exponent).exp())
}
