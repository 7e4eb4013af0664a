//! The combined inference loop. Each step contracts belief with a posterior
//! update, refreshes the threshold relation, re-estimates the
//! maximum-posterior likelihood row from the recent-data window, and repairs
//! the hypothesis set when the relation empties or a datum has no support.
//!
//! The loop is a recurrence, so a run is sequential by construction; all
//! stochasticity comes from the seeded stream and tie-break generators.

use std::collections::VecDeque;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bayes::{
    bayes_update, joint_from, BayesError, Distribution, GenerativeModel, LikelihoodTable,
};
use crate::inverse::{
    apply_ib, build_relation, explore, BinaryRelation, ExplorationPolicy, ExploreTrigger,
    IbConfig, ThetaSource,
};
use crate::rng::{sample_categorical, stream};
use crate::trajectory::{Event, TrajectoryLog};

/// Observations kept in the recent-data window.
pub const DEFAULT_WINDOW: usize = 16;

/// Likelihood-row changes at or below this sup-norm are treated as no-ops
/// and not logged, so fixed points of the re-estimation stay quiet even
/// under rounding.
pub const IB_MATERIALITY: f64 = 1e-12;

/// RNG stream ids, fixed so runs and their derived walks never share draws.
const STREAM_DATA: u64 = 0;
const STREAM_STATE: u64 = 2;

/// Mutable state of one run.
#[derive(Debug, Clone)]
pub struct BibState {
    pub prior: Distribution,
    pub likelihood: LikelihoodTable,
    pub posterior: Distribution,
    pub relation: BinaryRelation,
    pub window: VecDeque<String>,
    pub window_cap: usize,
    pub config: IbConfig,
    pub rng: ChaCha8Rng,
    pub t: u64,
}

impl BibState {
    pub fn new(model: &GenerativeModel, config: IbConfig, window_cap: usize, rng: ChaCha8Rng) -> Self {
        assert!(window_cap >= 1);
        let joint = joint_from(&model.prior, &model.likelihood).expect("model is aligned");
        let relation = build_relation(&joint, config.theta_source.value());
        Self {
            prior: model.prior.clone(),
            likelihood: model.likelihood.clone(),
            posterior: model.prior.clone(),
            relation,
            window: VecDeque::with_capacity(window_cap),
            window_cap,
            config,
            rng,
            t: 0,
        }
    }

    /// Empirical distribution of the window. Non-empty windows only.
    pub fn recent(&self) -> Distribution {
        let labels = self.likelihood.d_labels().to_vec();
        let mut counts = vec![0.0; labels.len()];
        for d in &self.window {
            let i = self.likelihood.d_index(d).expect("window holds known data");
            counts[i] += 1.0;
        }
        Distribution::from_weights(labels, counts).expect("window is non-empty")
    }

    /// Advances one observation. Returned tags cover everything that fired,
    /// in canonical order; the caller appends `Switch` because percept
    /// identity is a property of the run, not of the state.
    ///
    /// Zero-evidence data convert into an exploration followed by a retried
    /// update; the only real failure is a datum outside the alphabet.
    pub fn step(&mut self, datum: &str) -> Result<Vec<Event>, BayesError> {
        if self.likelihood.d_index(datum).is_none() {
            return Err(BayesError::UnknownDatum(datum.into()));
        }
        self.window.push_back(datum.to_string());
        while self.window.len() > self.window_cap {
            self.window.pop_front();
        }
        let mut events = Vec::with_capacity(2);

        let posterior = match bayes_update(&self.prior, &self.likelihood, datum) {
            Ok(p) => p,
            Err(BayesError::ZeroEvidence { .. }) => {
                let out = explore(
                    &self.prior,
                    &self.likelihood,
                    &self.recent(),
                    &self.relation,
                    ExploreTrigger::ZeroEvidence,
                    self.config.policy,
                    &mut self.rng,
                )
                .expect("zero-evidence exploration has no preconditions");
                self.prior = out.prior;
                self.likelihood = out.likelihood;
                events.push(Event::Explore);
                // The re-seeded row has full support and positive prior
                // mass, so the retry cannot fail on the same datum.
                bayes_update(&self.prior, &self.likelihood, datum)
                    .expect("re-seeded row supports the datum")
            }
            Err(e) => return Err(e),
        };
        events.push(Event::B);
        self.posterior = posterior.clone();
        self.prior = posterior;

        let joint = joint_from(&self.prior, &self.likelihood).expect("state is aligned");
        self.relation = build_relation(&joint, self.config.theta_source.value());

        if self.config.gamma > 0.0 {
            let focus = self.posterior.map_label().to_string();
            let h = self.likelihood.h_index(&focus).expect("MAP label exists");
            let updated = apply_ib(&self.likelihood, &self.recent(), &focus, self.config.gamma)
                .expect("window matches the data alphabet");
            let delta = self
                .likelihood
                .row(h)
                .iter()
                .zip(updated.row(h))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if delta > IB_MATERIALITY {
                events.push(Event::Ib);
            }
            self.likelihood = updated;
        }

        if self.relation.is_empty() {
            let out = explore(
                &self.prior,
                &self.likelihood,
                &self.recent(),
                &self.relation,
                ExploreTrigger::EmptyRelation,
                self.config.policy,
                &mut self.rng,
            )
            .expect("relation is empty");
            self.prior = out.prior;
            self.likelihood = out.likelihood;
            events.push(Event::Explore);
        }

        self.t += 1;
        events.sort_unstable();
        Ok(events)
    }
}

/// How a scenario generates its data stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StreamSpec {
    /// The same datum every step.
    Constant(String),
    /// Independent draws from a fixed distribution over the data labels.
    Iid(Distribution),
    /// Independent draws from the named hypothesis's initial likelihood
    /// row; the generator is frozen at the start so re-estimation never
    /// feeds back into the data.
    FromHypothesis(String),
}

/// A reproducible experiment: model, loop parameters, and data stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub model: GenerativeModel,
    pub config: IbConfig,
    pub stream: StreamSpec,
    pub window: usize,
}

fn labels(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn cyclic_rows(base: &[f64], k: usize) -> Vec<Vec<f64>> {
    (0..k)
        .map(|shift| (0..base.len()).map(|j| base[(base.len() + j - shift) % base.len()]).collect())
        .collect()
}

/// Three hypotheses, one of which explains a constant stream exactly. The
/// matching likelihood row is a fixed point of re-estimation, so a run
/// settles into pure posterior updates.
pub fn unambiguous_scenario() -> Scenario {
    let prior = Distribution::uniform(labels("h", 3)).unwrap();
    let likelihood = LikelihoodTable::new(
        labels("h", 3),
        labels("d", 3),
        vec![vec![1.0, 0.0, 0.0], vec![0.05, 0.9, 0.05], vec![0.05, 0.05, 0.9]],
    )
    .unwrap();
    Scenario {
        model: GenerativeModel::new("unambiguous", prior, likelihood).unwrap(),
        config: IbConfig::new(0.3, ExplorationPolicy::ReplaceWeakest, ThetaSource::Fixed(0.28)),
        stream: StreamSpec::Constant("d0".into()),
        window: DEFAULT_WINDOW,
    }
}

/// Three cyclically equivalent hypotheses under a uniform stream: no
/// hypothesis is ever right for long. Re-estimation drags the leading row
/// toward the recent window, whose peak hovers just above the threshold, so
/// the relation empties in bursts and the run alternates between straight
/// exploitation stretches and exploration flurries.
///
/// The threshold is calibrated against that peak: re-estimated rows crest
/// near 0.48 and bottom out near 1/3, so 0.34 keeps both regimes reachable.
/// Well below (≤ 0.33) the relation never empties and exploration dies out;
/// well above (≥ 0.36) exploration becomes near-permanent and the walk
/// loses its long ballistic stretches.
pub fn ambiguous_scenario() -> Scenario {
    let prior = Distribution::uniform(labels("h", 3)).unwrap();
    let likelihood =
        LikelihoodTable::new(labels("h", 3), labels("d", 3), cyclic_rows(&[0.8, 0.1, 0.1], 3))
            .unwrap();
    let uniform = Distribution::uniform(labels("d", 3)).unwrap();
    Scenario {
        model: GenerativeModel::new("ambiguous", prior, likelihood).unwrap(),
        config: IbConfig::new(0.08, ExplorationPolicy::ReplaceWeakest, ThetaSource::Fixed(0.34)),
        stream: StreamSpec::Iid(uniform),
        window: DEFAULT_WINDOW,
    }
}

/// Distinguishable hypotheses with data generated by the first one; the
/// low threshold keeps the relation inhabited, so gamma alone controls
/// whether re-estimation participates.
pub fn identifiable_scenario(gamma: f64) -> Scenario {
    let prior = Distribution::uniform(labels("h", 3)).unwrap();
    let likelihood =
        LikelihoodTable::new(labels("h", 3), labels("d", 3), cyclic_rows(&[0.8, 0.1, 0.1], 3))
            .unwrap();
    Scenario {
        model: GenerativeModel::new("identifiable", prior, likelihood).unwrap(),
        config: IbConfig::new(gamma, ExplorationPolicy::ReplaceWeakest, ThetaSource::Fixed(0.05)),
        stream: StreamSpec::FromHypothesis("h0".into()),
        window: DEFAULT_WINDOW,
    }
}

fn draw_datum(
    spec: &StreamSpec,
    generator: &LikelihoodTable,
    rng: &mut ChaCha8Rng,
) -> String {
    match spec {
        StreamSpec::Constant(d) => d.clone(),
        StreamSpec::Iid(dist) => {
            let i = sample_categorical(dist.probs(), rng);
            dist.labels()[i].clone()
        }
        StreamSpec::FromHypothesis(h) => {
            let row = generator.h_index(h).expect("generating hypothesis exists");
            let i = sample_categorical(generator.row(row), rng);
            generator.d_labels()[i].clone()
        }
    }
}

fn percept_index(log: &mut TrajectoryLog, label: &str) -> usize {
    match log.labels.iter().position(|l| l == label) {
        Some(i) => i,
        None => {
            log.labels.push(label.to_string());
            log.labels.len() - 1
        }
    }
}

/// Runs the full loop for `steps` observations. The log's percept is the
/// maximum-posterior hypothesis after each step; record 0 holds the prior's.
pub fn run_bib(scenario: &Scenario, steps: u64, seed: u64) -> (TrajectoryLog, BibState) {
    let mut data_rng = stream(seed, STREAM_DATA);
    let generator = scenario.model.likelihood.clone();
    let mut state =
        BibState::new(&scenario.model, scenario.config, scenario.window, stream(seed, STREAM_STATE));
    let mut log = TrajectoryLog::new(scenario.model.prior.labels().to_vec());
    let mut prev = state.posterior.map_label().to_string();
    let first = percept_index(&mut log, &prev);
    log.push(0, first, Vec::new());
    for t in 1..=steps {
        let datum = draw_datum(&scenario.stream, &generator, &mut data_rng);
        let mut events = state.step(&datum).expect("stream draws from the alphabet");
        let label = state.posterior.map_label().to_string();
        if label != prev {
            events.push(Event::Switch);
        }
        let idx = percept_index(&mut log, &label);
        log.push(t, idx, events);
        prev = label;
    }
    (log, state)
}

/// Posterior updates only: no window, no relation, no re-estimation. The
/// reference trajectory that a zero-gamma run must reproduce exactly.
pub fn run_bayes_only(
    scenario: &Scenario,
    steps: u64,
    seed: u64,
) -> Result<TrajectoryLog, BayesError> {
    let mut data_rng = stream(seed, STREAM_DATA);
    let generator = scenario.model.likelihood.clone();
    let mut prior = scenario.model.prior.clone();
    let mut log = TrajectoryLog::new(prior.labels().to_vec());
    let mut prev = prior.map_label().to_string();
    let first = percept_index(&mut log, &prev);
    log.push(0, first, Vec::new());
    for t in 1..=steps {
        let datum = draw_datum(&scenario.stream, &generator, &mut data_rng);
        let posterior = bayes_update(&prior, &scenario.model.likelihood, &datum)?;
        prior = posterior;
        let label = prior.map_label().to_string();
        let mut events = vec![Event::B];
        if label != prev {
            events.push(Event::Switch);
        }
        let idx = percept_index(&mut log, &label);
        log.push(t, idx, events);
        prev = label;
    }
    Ok(log)
}
