//! Percept switching driven by a row-stochastic kernel: the percept dwells
//! on one state, jumps per its kernel row, and dwells again. Dwell-time
//! statistics summarize the resulting runs.

use serde::Serialize;

use crate::partition::SwitchKernel;
use crate::rng::{sample_categorical, stream};
use crate::stats::{
    fit_power_law_tail, mean, median, run_lengths, StatsError, TailFit, MIN_RUNS_FOR_TAIL,
};
use crate::trajectory::{Event, TrajectoryLog};

/// Simulates `steps` transitions from percept 0. `noise_amplitude` mixes
/// each row with the uniform distribution, modeling sensor jitter on top of
/// the measured kernel; 0 leaves the kernel as given.
pub fn run_perception(
    kernel: &SwitchKernel,
    noise_amplitude: f64,
    steps: u64,
    seed: u64,
) -> TrajectoryLog {
    kernel.validate().expect("kernel must be row-stochastic");
    assert!((0.0..=1.0).contains(&noise_amplitude));
    assert!(steps >= 1);
    let k = kernel.size();
    let rows: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            kernel
                .row(i)
                .iter()
                .map(|p| (1.0 - noise_amplitude) * p + noise_amplitude / k as f64)
                .collect()
        })
        .collect();
    let mut rng = stream(seed, 0);
    let labels = (1..=k).map(|i| format!("basin{i}")).collect();
    let mut log = TrajectoryLog::new(labels);
    let mut current = 0usize;
    log.push(0, current, Vec::new());
    for t in 1..=steps {
        let next = sample_categorical(&rows[current], &mut rng);
        let events = if next == current { Vec::new() } else { vec![Event::Switch] };
        log.push(t, next, events);
        current = next;
    }
    log
}

/// Dwell-time summary per percept. The final run of a log is censored by
/// the end of observation and is excluded from the samples.
#[derive(Debug, Clone, Serialize)]
pub struct DwellStats {
    /// Complete dwell times, bucketed by percept index.
    pub samples: Vec<Vec<u64>>,
    pub means: Vec<Option<f64>>,
    pub medians: Vec<Option<f64>>,
    pub switches: usize,
    /// Power-law fit over the pooled samples; absent when fewer than
    /// `MIN_RUNS_FOR_TAIL` complete runs were seen or no fit exists.
    pub tail: Option<TailFit>,
}

impl DwellStats {
    /// Standard error of the mean dwell for one percept, when defined.
    pub fn std_error(&self, percept: usize) -> Option<f64> {
        let xs: Vec<f64> = self.samples[percept].iter().map(|&x| x as f64).collect();
        if xs.len() < 2 {
            return None;
        }
        Some(crate::stats::std_dev(&xs) / (xs.len() as f64).sqrt())
    }
}

/// Run-length encodes the percept sequence. Errors when the log never
/// switches, since no complete dwell exists then.
pub fn dwell_statistics(log: &TrajectoryLog) -> Result<DwellStats, StatsError> {
    let runs = run_lengths(&log.percepts());
    if runs.len() < 2 {
        return Err(StatsError::InsufficientData { needed: 2, got: runs.len() });
    }
    let complete = &runs[..runs.len() - 1];
    let mut samples: Vec<Vec<u64>> = vec![Vec::new(); log.labels.len()];
    for &(percept, len) in complete {
        samples[percept].push(len);
    }
    let stat = |f: fn(&[f64]) -> f64| -> Vec<Option<f64>> {
        samples
            .iter()
            .map(|s| {
                if s.is_empty() {
                    None
                } else {
                    Some(f(&s.iter().map(|&x| x as f64).collect::<Vec<f64>>()))
                }
            })
            .collect()
    };
    let pooled: Vec<u64> = complete.iter().map(|&(_, len)| len).collect();
    let tail = if pooled.len() >= MIN_RUNS_FOR_TAIL {
        fit_power_law_tail(&pooled).ok()
    } else {
        None
    };
    Ok(DwellStats {
        means: stat(mean),
        medians: stat(median),
        switches: runs.len() - 1,
        samples,
        tail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::PerceptRecord;

    #[test]
    fn identity_kernel_never_switches() {
        let log = run_perception(&SwitchKernel::identity(3), 0.0, 500, 1);
        assert_eq!(log.count(Event::Switch), 0);
        assert!(log.records.iter().all(|r| r.percept == 0));
        assert!(matches!(
            dwell_statistics(&log).unwrap_err(),
            StatsError::InsufficientData { .. }
        ));
    }

    #[test]
    fn noise_breaks_an_absorbing_kernel() {
        let log = run_perception(&SwitchKernel::identity(3), 1.0, 2_000, 2);
        // Fully noisy rows are uniform: stay probability 1/3.
        let switches = log.count(Event::Switch) as f64 / 2_000.0;
        assert!((switches - 2.0 / 3.0).abs() < 0.05, "switch rate {switches}");
    }

    #[test]
    fn geometric_kernel_recovers_its_mean_dwell() {
        let log = run_perception(&SwitchKernel::uniform_stay(3, 0.9), 0.0, 100_000, 3);
        let stats = dwell_statistics(&log).unwrap();
        let pooled: Vec<f64> = stats
            .samples
            .iter()
            .flatten()
            .map(|&x| x as f64)
            .collect();
        let m = mean(&pooled);
        assert!((m - 10.0).abs() < 0.5, "pooled mean dwell {m}");
        // The three states are exchangeable; their means agree within
        // statistical error.
        for a in 0..3 {
            for b in (a + 1)..3 {
                let se = stats.std_error(a).unwrap().hypot(stats.std_error(b).unwrap());
                let diff = (stats.means[a].unwrap() - stats.means[b].unwrap()).abs();
                assert!(diff < 3.0 * se, "percepts {a},{b}: diff {diff} vs se {se}");
            }
        }
    }

    #[test]
    fn alternating_percepts_give_unit_dwells() {
        let mut log = TrajectoryLog::new(vec!["basin1".into(), "basin2".into()]);
        for t in 0..8u64 {
            log.records.push(PerceptRecord {
                t,
                percept: (t % 2) as usize,
                events: Vec::new(),
            });
        }
        let stats = dwell_statistics(&log).unwrap();
        assert!(stats.samples.iter().flatten().all(|&x| x == 1));
        assert_eq!(stats.switches, 7);
        assert_eq!(stats.means[0], Some(1.0));
        assert!(stats.tail.is_none());
    }

    #[test]
    fn sample_counts_partition_the_run() {
        let log = run_perception(&SwitchKernel::uniform_stay(4, 0.6), 0.0, 5_000, 9);
        let stats = dwell_statistics(&log).unwrap();
        let total: u64 = stats.samples.iter().flatten().sum();
        let runs = run_lengths(&log.percepts());
        let censored = runs.last().unwrap().1;
        assert_eq!(total + censored, 5_001);
    }

    #[test]
    fn fixed_seed_replays() {
        let k = SwitchKernel::uniform_stay(3, 0.8);
        assert_eq!(run_perception(&k, 0.1, 3_000, 7), run_perception(&k, 0.1, 3_000, 7));
        assert_ne!(run_perception(&k, 0.1, 3_000, 7), run_perception(&k, 0.1, 3_000, 8));
    }
}
