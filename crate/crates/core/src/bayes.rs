//! Finite discrete probability machinery: distributions over labeled
//! outcomes, the normalized Bayes update, joint tables, and the variational
//! free energy.
//!
//! Everything runs in natural-log units. Every operation that returns a
//! distribution re-validates normalization; nothing here assumes it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Probability vectors must sum to 1 within this bound.
pub const NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BayesError {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("datum {0:?} is not in the data alphabet")]
    UnknownDatum(String),
    #[error("hypothesis {0:?} is not in the hypothesis set")]
    UnknownHypothesis(String),
    #[error("shapes disagree: {0}")]
    ShapeMismatch(String),
    #[error("datum {datum:?} has zero probability under every supported hypothesis")]
    ZeroEvidence { datum: String },
    #[error("q places mass on hypothesis {0:?} where the joint vanishes")]
    SupportMismatch(String),
}

/// A normalized probability vector over unique labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionRaw")]
pub struct Distribution {
    labels: Vec<String>,
    probs: Vec<f64>,
}

#[derive(Deserialize)]
struct DistributionRaw {
    labels: Vec<String>,
    probs: Vec<f64>,
}

impl TryFrom<DistributionRaw> for Distribution {
    type Error = BayesError;
    fn try_from(raw: DistributionRaw) -> Result<Self, BayesError> {
        Distribution::new(raw.labels, raw.probs)
    }
}

fn check_unique(labels: &[String]) -> Result<(), BayesError> {
    let set: std::collections::HashSet<&str> = labels.iter().map(String::as_str).collect();
    if set.len() != labels.len() {
        return Err(BayesError::InvalidDistribution("labels repeat".into()));
    }
    Ok(())
}

fn check_probs(probs: &[f64]) -> Result<(), BayesError> {
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(BayesError::InvalidDistribution("negative or non-finite mass".into()));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOL {
        return Err(BayesError::InvalidDistribution(format!("mass sums to {sum}")));
    }
    Ok(())
}

impl Distribution {
    pub fn new(labels: Vec<String>, probs: Vec<f64>) -> Result<Self, BayesError> {
        if labels.len() != probs.len() || labels.is_empty() {
            return Err(BayesError::InvalidDistribution(format!(
                "{} labels against {} masses",
                labels.len(),
                probs.len()
            )));
        }
        check_unique(&labels)?;
        check_probs(&probs)?;
        Ok(Self { labels, probs })
    }

    /// Normalizes nonnegative weights. Errors on zero or negative total.
    pub fn from_weights(labels: Vec<String>, weights: Vec<f64>) -> Result<Self, BayesError> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(BayesError::InvalidDistribution("negative or non-finite weight".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(BayesError::InvalidDistribution("weights sum to zero".into()));
        }
        Self::new(labels, weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(labels: Vec<String>) -> Result<Self, BayesError> {
        let n = labels.len();
        Self::new(labels, vec![1.0 / n as f64; n])
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn prob(&self, label: &str) -> Option<f64> {
        self.index_of(label).map(|i| self.probs[i])
    }

    /// Index of the largest mass; ties go to the lowest index.
    pub fn map_index(&self) -> usize {
        let mut best = 0;
        for i in 1..self.probs.len() {
            if self.probs[i] > self.probs[best] {
                best = i;
            }
        }
        best
    }

    pub fn map_label(&self) -> &str {
        &self.labels[self.map_index()]
    }

    pub fn sup_distance(&self, other: &Distribution) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Conditional table P(data | hypothesis); each row is a distribution over
/// the data labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LikelihoodRaw")]
pub struct LikelihoodTable {
    h_labels: Vec<String>,
    d_labels: Vec<String>,
    rows: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct LikelihoodRaw {
    h_labels: Vec<String>,
    d_labels: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl TryFrom<LikelihoodRaw> for LikelihoodTable {
    type Error = BayesError;
    fn try_from(raw: LikelihoodRaw) -> Result<Self, BayesError> {
        LikelihoodTable::new(raw.h_labels, raw.d_labels, raw.rows)
    }
}

impl LikelihoodTable {
    pub fn new(
        h_labels: Vec<String>,
        d_labels: Vec<String>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self, BayesError> {
        if h_labels.len() != rows.len() || h_labels.is_empty() || d_labels.is_empty() {
            return Err(BayesError::ShapeMismatch(format!(
                "{} hypotheses against {} rows",
                h_labels.len(),
                rows.len()
            )));
        }
        check_unique(&h_labels)?;
        check_unique(&d_labels)?;
        for (h, row) in h_labels.iter().zip(&rows) {
            if row.len() != d_labels.len() {
                return Err(BayesError::ShapeMismatch(format!(
                    "row {h:?} has {} entries for {} data labels",
                    row.len(),
                    d_labels.len()
                )));
            }
            check_probs(row).map_err(|e| BayesError::InvalidDistribution(format!("row {h:?}: {e}")))?;
        }
        Ok(Self { h_labels, d_labels, rows })
    }

    pub fn h_labels(&self) -> &[String] {
        &self.h_labels
    }

    pub fn d_labels(&self) -> &[String] {
        &self.d_labels
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, h: usize) -> &[f64] {
        &self.rows[h]
    }

    pub fn h_index(&self, label: &str) -> Option<usize> {
        self.h_labels.iter().position(|l| l == label)
    }

    pub fn d_index(&self, label: &str) -> Option<usize> {
        self.d_labels.iter().position(|l| l == label)
    }

    /// Copy with one row replaced; the new row is re-validated.
    pub fn with_row(&self, h: usize, row: Vec<f64>) -> Result<Self, BayesError> {
        let mut rows = self.rows.clone();
        rows[h] = row;
        Self::new(self.h_labels.clone(), self.d_labels.clone(), rows)
    }

    /// Copy with one hypothesis appended.
    pub fn with_hypothesis(&self, label: String, row: Vec<f64>) -> Result<Self, BayesError> {
        let mut h_labels = self.h_labels.clone();
        h_labels.push(label);
        let mut rows = self.rows.clone();
        rows.push(row);
        Self::new(h_labels, self.d_labels.clone(), rows)
    }
}

/// Joint mass P(d, h) = P(d|h) P(h); entries indexed [hypothesis][datum].
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    h_labels: Vec<String>,
    d_labels: Vec<String>,
    entries: Vec<Vec<f64>>,
}

impl JointTable {
    pub fn h_labels(&self) -> &[String] {
        &self.h_labels
    }

    pub fn d_labels(&self) -> &[String] {
        &self.d_labels
    }

    pub fn entries(&self) -> &[Vec<f64>] {
        &self.entries
    }

    pub fn entry(&self, h: usize, d: usize) -> f64 {
        self.entries[h][d]
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().flatten().sum()
    }

    /// Marginal over data: P(d) = sum_h P(d, h).
    pub fn data_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.d_labels.len()];
        for row in &self.entries {
            for (d, v) in row.iter().enumerate() {
                out[d] += v;
            }
        }
        out
    }
}

fn check_aligned(prior: &Distribution, likelihood: &LikelihoodTable) -> Result<(), BayesError> {
    if prior.labels() != likelihood.h_labels() {
        return Err(BayesError::ShapeMismatch(
            "prior labels do not match likelihood hypotheses".into(),
        ));
    }
    Ok(())
}

/// Evidence P(d) = sum_k P(d|h_k) P(h_k) for the observed datum.
pub fn evidence(
    prior: &Distribution,
    likelihood: &LikelihoodTable,
    observed: &str,
) -> Result<f64, BayesError> {
    check_aligned(prior, likelihood)?;
    let d = likelihood
        .d_index(observed)
        .ok_or_else(|| BayesError::UnknownDatum(observed.into()))?;
    Ok(prior
        .probs()
        .iter()
        .zip(likelihood.rows())
        .map(|(p, row)| p * row[d])
        .sum())
}

/// Normalized Bayes rule: P(h|d) = P(d|h) P(h) / P(d).
pub fn bayes_update(
    prior: &Distribution,
    likelihood: &LikelihoodTable,
    observed: &str,
) -> Result<Distribution, BayesError> {
    check_aligned(prior, likelihood)?;
    let d = likelihood
        .d_index(observed)
        .ok_or_else(|| BayesError::UnknownDatum(observed.into()))?;
    let weights: Vec<f64> = prior
        .probs()
        .iter()
        .zip(likelihood.rows())
        .map(|(p, row)| p * row[d])
        .collect();
    if weights.iter().sum::<f64>() <= 0.0 {
        return Err(BayesError::ZeroEvidence { datum: observed.into() });
    }
    Distribution::from_weights(prior.labels().to_vec(), weights)
}

/// The update step as a named operator, so the loop composes it with the
/// likelihood re-estimation operator symmetrically.
pub fn apply_b(
    prior: &Distribution,
    likelihood: &LikelihoodTable,
    observed: &str,
) -> Result<Distribution, BayesError> {
    bayes_update(prior, likelihood, observed)
}

/// P(d, h) = P(d|h) P(h) over the full product space.
pub fn joint_from(
    prior: &Distribution,
    likelihood: &LikelihoodTable,
) -> Result<JointTable, BayesError> {
    check_aligned(prior, likelihood)?;
    let entries = prior
        .probs()
        .iter()
        .zip(likelihood.rows())
        .map(|(p, row)| row.iter().map(|l| p * l).collect())
        .collect();
    Ok(JointTable {
        h_labels: likelihood.h_labels().to_vec(),
        d_labels: likelihood.d_labels().to_vec(),
        entries,
    })
}

/// Energy, entropy, and their difference for a variational distribution,
/// all in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FreeEnergyReport {
    pub energy: f64,
    pub entropy: f64,
    pub free_energy: f64,
}

/// F(q) = -<ln P(d,h)>_q + <ln q>_q. Minimized exactly at the posterior,
/// where it equals -ln(evidence); for any other q it sits above that bound
/// by the divergence from the posterior.
pub fn free_energy(
    q: &Distribution,
    likelihood: &LikelihoodTable,
    prior: &Distribution,
    observed: &str,
) -> Result<FreeEnergyReport, BayesError> {
    check_aligned(prior, likelihood)?;
    if q.labels() != prior.labels() {
        return Err(BayesError::ShapeMismatch(
            "q labels do not match the hypothesis set".into(),
        ));
    }
    let d = likelihood
        .d_index(observed)
        .ok_or_else(|| BayesError::UnknownDatum(observed.into()))?;
    let mut energy = 0.0;
    let mut entropy = 0.0;
    for (h, &qh) in q.probs().iter().enumerate() {
        if qh == 0.0 {
            continue;
        }
        let joint = prior.probs()[h] * likelihood.row(h)[d];
        if joint <= 0.0 {
            return Err(BayesError::SupportMismatch(q.labels()[h].clone()));
        }
        energy -= qh * joint.ln();
        entropy -= qh * qh.ln();
    }
    Ok(FreeEnergyReport { energy, entropy, free_energy: energy - entropy })
}

/// A prior and likelihood bundled under a tag naming the model variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerativeModel {
    pub tag: String,
    pub prior: Distribution,
    pub likelihood: LikelihoodTable,
}

impl GenerativeModel {
    pub fn new(
        tag: impl Into<String>,
        prior: Distribution,
        likelihood: LikelihoodTable,
    ) -> Result<Self, BayesError> {
        check_aligned(&prior, &likelihood)?;
        Ok(Self { tag: tag.into(), prior, likelihood })
    }
}
