//! The expansion half of the inference loop: the threshold relation between
//! hypotheses and data, its rough-set approximations, likelihood
//! re-estimation from recent data, and the exploration moves that rebuild a
//! degenerate hypothesis set.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bayes::{BayesError, Distribution, JointTable, LikelihoodTable};

/// Uniform floor mixed into re-seeded likelihood rows so no datum in the
/// alphabet is ever assigned exactly zero mass again.
pub const SMOOTHING_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InverseError {
    #[error("hypothesis {0:?} is not in the table")]
    UnknownHypothesis(String),
    #[error("exploration requires an empty relation")]
    RelationNotEmpty,
    #[error("shapes disagree: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Table(#[from] BayesError),
}

/// Strict-threshold relation: (h, d) is present iff the joint mass P(d, h)
/// exceeded theta when the relation was built. Ties at theta are excluded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryRelation {
    pub theta: f64,
    pub pairs: BTreeSet<(String, String)>,
}

impl BinaryRelation {
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn contains(&self, h: &str, d: &str) -> bool {
        self.pairs.contains(&(h.to_string(), d.to_string()))
    }
}

/// Builds the relation from a joint table. `theta` must lie in [0, 1).
pub fn build_relation(joint: &JointTable, theta: f64) -> BinaryRelation {
    assert!((0.0..1.0).contains(&theta), "theta must lie in [0,1)");
    let mut pairs = BTreeSet::new();
    for (h, row) in joint.entries().iter().enumerate() {
        for (d, &mass) in row.iter().enumerate() {
            if mass > theta {
                pairs.insert((joint.h_labels()[h].clone(), joint.d_labels()[d].clone()));
            }
        }
    }
    BinaryRelation { theta, pairs }
}

/// Rough-set approximations induced by a relation R.
///
/// With R(h) = {d : (h,d) in R} and R⁻¹(d) = {h : (h,d) in R}:
/// * `upper[h]` = R(h), the data a hypothesis reaches;
/// * `lower[d]` = {h : R(h) nonempty and R(h) ⊆ {d' : R⁻¹(d') ⊇ R⁻¹(d)}},
///   the hypotheses whose whole reach stays among data at least as
///   connected as d.
///
/// Shrinking R⁻¹(d) can only grow the closure, so the map d → lower(d) is
/// antitone in the connectivity order on data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoughApproximation {
    pub lower: BTreeMap<String, BTreeSet<String>>,
    pub upper: BTreeMap<String, BTreeSet<String>>,
}

pub fn rough_approximation(
    rel: &BinaryRelation,
    h_labels: &[String],
    d_labels: &[String],
) -> RoughApproximation {
    let reach: BTreeMap<&str, BTreeSet<&str>> = h_labels
        .iter()
        .map(|h| {
            let ds: BTreeSet<&str> = rel
                .pairs
                .iter()
                .filter(|(ph, _)| ph == h)
                .map(|(_, pd)| pd.as_str())
                .collect();
            (h.as_str(), ds)
        })
        .collect();
    let inverse: BTreeMap<&str, BTreeSet<&str>> = d_labels
        .iter()
        .map(|d| {
            let hs: BTreeSet<&str> = rel
                .pairs
                .iter()
                .filter(|(_, pd)| pd == d)
                .map(|(ph, _)| ph.as_str())
                .collect();
            (d.as_str(), hs)
        })
        .collect();
    let upper = reach
        .iter()
        .map(|(h, ds)| (h.to_string(), ds.iter().map(|d| d.to_string()).collect()))
        .collect();
    let mut lower = BTreeMap::new();
    for d in d_labels {
        let base = &inverse[d.as_str()];
        let closure: BTreeSet<&str> = d_labels
            .iter()
            .filter(|d2| inverse[d2.as_str()].is_superset(base))
            .map(String::as_str)
            .collect();
        let hs: BTreeSet<String> = h_labels
            .iter()
            .filter(|h| {
                let r = &reach[h.as_str()];
                !r.is_empty() && r.is_subset(&closure)
            })
            .map(|h| h.to_string())
            .collect();
        lower.insert(d.clone(), hs);
    }
    RoughApproximation { lower, upper }
}

/// Free parameters of the combined update scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ExplorationPolicy {
    /// Re-seed the minimum-prior hypothesis in place.
    ReplaceWeakest,
    /// Grow the hypothesis set by one.
    AddHypothesis,
}

/// Where the relation threshold came from; both variants carry the value
/// in force so runs replay without the originating grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ThetaSource {
    FromPartition(f64),
    Fixed(f64),
}

impl ThetaSource {
    pub fn value(&self) -> f64 {
        match self {
            ThetaSource::FromPartition(v) | ThetaSource::Fixed(v) => *v,
        }
    }
}

/// Learning rate, exploration policy, and threshold for the loop. The
/// operational range for gamma is (0, 1]; gamma = 0 is accepted as the
/// degenerate control in which re-estimation is the identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IbConfig {
    pub gamma: f64,
    pub policy: ExplorationPolicy,
    pub theta_source: ThetaSource,
}

impl IbConfig {
    pub fn new(gamma: f64, policy: ExplorationPolicy, theta_source: ThetaSource) -> Self {
        assert!((0.0..=1.0).contains(&gamma), "gamma must lie in [0,1]");
        assert!(
            (0.0..1.0).contains(&theta_source.value()),
            "theta must lie in [0,1)"
        );
        Self { gamma, policy, theta_source }
    }
}

/// Likelihood re-estimation: the focus row becomes the convex mixture
/// (1-gamma) * row + gamma * recent_data. Other rows are untouched.
pub fn apply_ib(
    likelihood: &LikelihoodTable,
    recent: &Distribution,
    focus_h: &str,
    gamma: f64,
) -> Result<LikelihoodTable, InverseError> {
    assert!((0.0..=1.0).contains(&gamma), "gamma must lie in [0,1]");
    let h = likelihood
        .h_index(focus_h)
        .ok_or_else(|| InverseError::UnknownHypothesis(focus_h.into()))?;
    if recent.labels() != likelihood.d_labels() {
        return Err(InverseError::ShapeMismatch(
            "recent-data labels do not match the data alphabet".into(),
        ));
    }
    let row: Vec<f64> = likelihood
        .row(h)
        .iter()
        .zip(recent.probs())
        .map(|(old, new)| (1.0 - gamma) * old + gamma * new)
        .collect();
    Ok(likelihood.with_row(h, row)?)
}

/// Why exploration is being invoked. An empty relation must actually be
/// empty; the zero-evidence path bypasses that check because the stored
/// relation predates the failing datum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExploreTrigger {
    EmptyRelation,
    ZeroEvidence,
}

/// Result of an exploration move.
#[derive(Debug, Clone, PartialEq)]
pub struct ExploreOutcome {
    pub prior: Distribution,
    pub likelihood: LikelihoodTable,
    /// Label of the re-seeded or newly added hypothesis.
    pub affected: String,
}

fn seeded_row(recent: &Distribution) -> Vec<f64> {
    let total: f64 = recent.probs().iter().map(|p| p + SMOOTHING_FLOOR).sum();
    recent
        .probs()
        .iter()
        .map(|p| (p + SMOOTHING_FLOOR) / total)
        .collect()
}

/// Rebuilds a degenerate corner of the hypothesis space. Under
/// `ReplaceWeakest` the minimum-prior hypothesis gets a fresh likelihood row
/// seeded from recent data (floored so every datum keeps positive mass) and
/// its prior mass is reset to 1/|H| before renormalizing; `AddHypothesis`
/// appends a new hypothesis with the same seeding. The RNG only breaks ties
/// between equally weak hypotheses.
pub fn explore(
    prior: &Distribution,
    likelihood: &LikelihoodTable,
    recent: &Distribution,
    relation: &BinaryRelation,
    trigger: ExploreTrigger,
    policy: ExplorationPolicy,
    rng: &mut impl Rng,
) -> Result<ExploreOutcome, InverseError> {
    if trigger == ExploreTrigger::EmptyRelation && !relation.is_empty() {
        return Err(InverseError::RelationNotEmpty);
    }
    if recent.labels() != likelihood.d_labels() {
        return Err(InverseError::ShapeMismatch(
            "recent-data labels do not match the data alphabet".into(),
        ));
    }
    let row = seeded_row(recent);
    let n = prior.len();
    match policy {
        ExplorationPolicy::ReplaceWeakest => {
            let weakest: Vec<usize> = {
                let min = prior.probs().iter().copied().fold(f64::INFINITY, f64::min);
                (0..n).filter(|&i| prior.probs()[i] == min).collect()
            };
            let pick = if weakest.len() == 1 {
                weakest[0]
            } else {
                weakest[rng.random_range(0..weakest.len())]
            };
            let mut weights = prior.probs().to_vec();
            weights[pick] = 1.0 / n as f64;
            let new_prior = Distribution::from_weights(prior.labels().to_vec(), weights)?;
            let new_lik = likelihood.with_row(pick, row)?;
            Ok(ExploreOutcome {
                affected: prior.labels()[pick].clone(),
                prior: new_prior,
                likelihood: new_lik,
            })
        }
        ExplorationPolicy::AddHypothesis => {
            let mut m = n;
            let label = loop {
                let candidate = format!("h{m}");
                if prior.index_of(&candidate).is_none() {
                    break candidate;
                }
                m += 1;
            };
            let mut labels = prior.labels().to_vec();
            labels.push(label.clone());
            let mut weights = prior.probs().to_vec();
            weights.push(1.0 / (n + 1) as f64);
            let new_prior = Distribution::from_weights(labels, weights)?;
            let new_lik = likelihood.with_hypothesis(label.clone(), row)?;
            Ok(ExploreOutcome { affected: label, prior: new_prior, likelihood: new_lik })
        }
    }
}
