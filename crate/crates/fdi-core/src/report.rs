//! Inference results and condition-check reports shared by the three models.

use std::io::Write;

use crate::error::{Error, Result};
use crate::num::Real;

/// Which inference model produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Binary,
    Distance,
    Distribution,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Binary => "binary",
            ModelKind::Distance => "distance",
            ModelKind::Distribution => "distribution",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(ModelKind::Binary),
            "distance" => Ok(ModelKind::Distance),
            "distribution" => Ok(ModelKind::Distribution),
            other => Err(Error::Config(format!("unknown model {other:?}"))),
        }
    }
}

/// One ranked candidate with its score (XOR distance, feature distance or
/// cosine similarity depending on the model).
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate<W> {
    pub user: String,
    pub score: W,
}

/// Ranked Top-K inference result for one target user.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet<W> {
    target: String,
    members: Vec<Candidate<W>>,
}

impl<W: Real> CandidateSet<W> {
    pub fn new(target: impl Into<String>, members: Vec<Candidate<W>>) -> Self {
        CandidateSet {
            target: target.into(),
            members,
        }
    }

    pub fn target(&self) -> &str {
        &self.target
    }

    /// Members in rank order (best first).
    pub fn members(&self) -> &[Candidate<W>] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, user: &str) -> bool {
        self.members.iter().any(|c| c.user == user)
    }
}

/// Outcome of a per-user sufficient-condition check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictStatus {
    /// The sufficient condition holds.
    Pass,
    /// The condition was evaluated and does not hold.
    Fail,
    /// The condition does not apply (e.g. equal expected distances).
    Inapplicable,
    /// The user cannot be assessed (e.g. zero-magnitude combined vector).
    NotAssessable,
}

impl VerdictStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            VerdictStatus::Pass => "pass",
            VerdictStatus::Fail => "fail",
            VerdictStatus::Inapplicable => "inapplicable",
            VerdictStatus::NotAssessable => "not-assessable",
        }
    }

    pub fn passed(self) -> bool {
        matches!(self, VerdictStatus::Pass)
    }
}

/// Model-specific quantities binding a per-user verdict.
#[derive(Debug, Clone, PartialEq)]
pub enum VerdictMetrics<W> {
    /// `min_gamma = None` encodes the vacuous minimum over an empty set.
    Binary { min_gamma: Option<u64>, threshold: W },
    Distance { mu_min: W, zeta_max: W, threshold: W },
    /// `None` fields encode the vacuous K = n case.
    Distribution {
        mu: Option<W>,
        h_minus_l: Option<W>,
        threshold: Option<W>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserVerdict<W> {
    pub user: String,
    pub status: VerdictStatus,
    pub metrics: VerdictMetrics<W>,
}

/// Per-user condition verdicts plus the aggregate outcome for one
/// configuration of a theorem checker.
#[derive(Debug, Clone)]
pub struct QuantReport<W> {
    pub model: ModelKind,
    pub k: usize,
    pub delta: W,
    pub m_tilde: usize,
    /// `floor(delta * m_tilde)`, the number of passing users required.
    pub required: usize,
    pub passed: usize,
    /// Whether the target dataset met the requirement.
    pub inferable: bool,
    pub rows: Vec<UserVerdict<W>>,
}

impl<W: Real> QuantReport<W> {
    pub(crate) fn assemble(
        model: ModelKind,
        k: usize,
        delta: W,
        m_tilde: usize,
        rows: Vec<UserVerdict<W>>,
    ) -> Self {
        let required = (delta.as_f64() * m_tilde as f64).floor() as usize;
        let passed = rows.iter().filter(|r| r.status.passed()).count();
        QuantReport {
            model,
            k,
            delta,
            m_tilde,
            required,
            passed,
            inferable: passed >= required,
            rows,
        }
    }

    /// Fraction of overlap users whose condition held.
    pub fn delta_achieved(&self) -> W {
        if self.m_tilde == 0 {
            W::zero()
        } else {
            W::of_usize(self.passed) / W::of_usize(self.m_tilde)
        }
    }

    /// Writes one row per target user. Columns depend on the model:
    /// binary `user,gamma_min,threshold,pass`;
    /// distance `user,mu_min,zeta_max,threshold,pass`;
    /// distribution `user,mu,h_minus_l,threshold,pass`.
    pub fn write_csv<Out: Write>(&self, out: Out) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let header: &[&str] = match self.model {
            ModelKind::Binary => &["user", "gamma_min", "threshold", "pass"],
            ModelKind::Distance => &["user", "mu_min", "zeta_max", "threshold", "pass"],
            ModelKind::Distribution => &["user", "mu", "h_minus_l", "threshold", "pass"],
        };
        wtr.write_record(header).map_err(csv_err)?;
        for row in &self.rows {
            let status = row.status.as_str().to_string();
            let record: Vec<String> = match &row.metrics {
                VerdictMetrics::Binary { min_gamma, threshold } => vec![
                    row.user.clone(),
                    min_gamma.map_or_else(|| "inf".into(), |g| g.to_string()),
                    threshold.to_string(),
                    status,
                ],
                VerdictMetrics::Distance {
                    mu_min,
                    zeta_max,
                    threshold,
                } => vec![
                    row.user.clone(),
                    mu_min.to_string(),
                    zeta_max.to_string(),
                    threshold.to_string(),
                    status,
                ],
                VerdictMetrics::Distribution { mu, h_minus_l, threshold } => {
                    let opt = |v: &Option<W>| v.map_or_else(String::new, |x| x.to_string());
                    vec![row.user.clone(), opt(mu), opt(h_minus_l), opt(threshold), status]
                }
            };
            wtr.write_record(&record).map_err(csv_err)?;
        }
        wtr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// JSON summary: aggregate counts and the achieved delta.
    pub fn summary_json(&self) -> serde_json::Value {
        let inapplicable = self
            .rows
            .iter()
            .filter(|r| r.status == VerdictStatus::Inapplicable)
            .count();
        let not_assessable = self
            .rows
            .iter()
            .filter(|r| r.status == VerdictStatus::NotAssessable)
            .count();
        serde_json::json!({
            "model": self.model.as_str(),
            "k": self.k,
            "delta": self.delta.as_f64(),
            "m_tilde": self.m_tilde,
            "required": self.required,
            "passed": self.passed,
            "inapplicable": inapplicable,
            "not_assessable": not_assessable,
            "delta_achieved": self.delta_achieved().as_f64(),
            "inferable": self.inferable,
        })
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("csv write failed: {e}"))
}
