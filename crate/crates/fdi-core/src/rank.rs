//! Top-K selection with the crate-wide tie rule: equal scores rank the
//! lexicographically smaller user identifier first.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::num::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum RankOrder {
    /// Smaller scores rank higher (distances).
    Ascending,
    /// Larger scores rank higher (similarities).
    Descending,
}

fn compare<W: Real>(a: &(W, usize), b: &(W, usize), order: RankOrder) -> Ordering {
    let by_score = a.0.partial_cmp(&b.0).expect("scores must not be NaN");
    let by_score = match order {
        RankOrder::Ascending => by_score,
        RankOrder::Descending => by_score.reverse(),
    };
    by_score.then_with(|| a.1.cmp(&b.1))
}

/// Keeps the K best `(score, position)` pairs under the given order, sorted
/// by rank. Positions index a user list in ascending-identifier order, so
/// the position tie-break is the documented user-identifier tie-break.
pub(crate) fn select_top_k_indexed<W: Real>(
    mut scored: Vec<(W, usize)>,
    k: usize,
    order: RankOrder,
) -> Result<Vec<(W, usize)>> {
    let n = scored.len();
    if k == 0 || k > n {
        return Err(Error::BadK { k, n });
    }
    if k < n {
        scored.select_nth_unstable_by(k - 1, |a, b| compare(a, b, order));
        scored.truncate(k);
    }
    scored.sort_unstable_by(|a, b| compare(a, b, order));
    Ok(scored)
}
