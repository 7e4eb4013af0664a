//! Statistics used by the diagnostics: least-squares lines, discrete
//! power-law tail fits with KS-selected cutoff, mean-squared-displacement
//! curves, and run-length encoding.

use serde::Serialize;
use thiserror::Error;

/// A tail fit needs at least this many samples above the cutoff.
pub const MIN_TAIL_SAMPLES: usize = 10;
/// Tail fitting is not attempted at all below this many samples.
pub const MIN_RUNS_FOR_TAIL: usize = 30;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("insufficient data: needed {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two
/// samples.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

/// Ordinary least squares. Returns (slope, intercept, r²). The x values
/// must not all coincide. A zero-variance y fits exactly, so r² is 1 there.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2, "a line needs two points");
    let mx = mean(xs);
    let my = mean(ys);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    assert!(sxx > 0.0, "x values all coincide");
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - (slope * x + intercept);
            e * e
        })
        .sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    (slope, intercept, r2)
}

/// Discrete power-law tail fit: exponent alpha for P(X = x) ∝ x^-alpha on
/// x ≥ x_min.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailFit {
    pub alpha: f64,
    /// Large-n standard error (alpha - 1) / sqrt(n_tail).
    pub sigma: f64,
    pub x_min: u64,
    pub n_tail: usize,
    /// KS distance between the tail's empirical CDF and the fitted model.
    pub ks: f64,
}

fn fit_at(xmin: u64, tail: &[u64]) -> TailFit {
    let n = tail.len();
    let shift = xmin as f64 - 0.5;
    let log_sum: f64 = tail.iter().map(|&x| (x as f64 / shift).ln()).sum();
    let alpha = 1.0 + n as f64 / log_sum;
    let mut distinct: Vec<u64> = tail.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let mut ks = 0.0f64;
    let mut below = 0usize;
    for &x in &distinct {
        let at = below + tail.iter().filter(|&&v| v == x).count();
        // Half-integer continuous approximation to the discrete CDF: the
        // empirical step at x is bracketed by the model at x -/+ 0.5.
        let model_hi = 1.0 - ((x as f64 + 0.5) / shift).powf(1.0 - alpha);
        let model_lo = 1.0 - ((x as f64 - 0.5) / shift).powf(1.0 - alpha);
        let lo = below as f64 / n as f64;
        let hi = at as f64 / n as f64;
        ks = ks.max((lo - model_lo).abs()).max((hi - model_hi).abs());
        below = at;
    }
    TailFit { alpha, sigma: (alpha - 1.0) / (n as f64).sqrt(), x_min: xmin, n_tail: n, ks }
}

/// Maximum-likelihood fit of a discrete power-law tail, with the cutoff
/// x_min chosen to minimize the KS distance (candidates keep at least
/// `MIN_TAIL_SAMPLES` points above them). Samples below 1 are ignored.
pub fn fit_power_law_tail(samples: &[u64]) -> Result<TailFit, StatsError> {
    let xs: Vec<u64> = samples.iter().copied().filter(|&x| x >= 1).collect();
    if xs.len() < MIN_TAIL_SAMPLES {
        return Err(StatsError::InsufficientData { needed: MIN_TAIL_SAMPLES, got: xs.len() });
    }
    let mut candidates: Vec<u64> = xs.to_vec();
    candidates.sort_unstable();
    candidates.dedup();
    let mut best: Option<TailFit> = None;
    for &xmin in &candidates {
        let tail: Vec<u64> = xs.iter().copied().filter(|&x| x >= xmin).collect();
        if tail.len() < MIN_TAIL_SAMPLES {
            break;
        }
        // A single-valued tail carries no slope information.
        if tail.iter().all(|&x| x == xmin) {
            continue;
        }
        let fit = fit_at(xmin, &tail);
        if best.as_ref().is_none_or(|b| fit.ks < b.ks) {
            best = Some(fit);
        }
    }
    best.ok_or(StatsError::InsufficientData { needed: MIN_TAIL_SAMPLES, got: 0 })
}

/// Strictly increasing lags, geometrically spaced from `min_lag` to
/// `max_lag` inclusive.
pub fn log_spaced_lags(min_lag: usize, max_lag: usize, per_decade: usize) -> Vec<usize> {
    assert!(min_lag >= 1 && max_lag >= min_lag && per_decade >= 1);
    let ratio = 10f64.powf(1.0 / per_decade as f64);
    let mut out = Vec::new();
    let mut x = min_lag as f64;
    while (x.round() as usize) <= max_lag {
        let lag = x.round() as usize;
        if out.last() != Some(&lag) {
            out.push(lag);
        }
        x *= ratio;
    }
    if out.last() != Some(&max_lag) {
        out.push(max_lag);
    }
    out
}

/// Time-averaged mean squared displacement over the requested lags. Lags
/// beyond the trajectory are skipped.
pub fn msd_curve(xs: &[f64], ys: &[f64], lags: &[usize]) -> Vec<(usize, f64)> {
    assert_eq!(xs.len(), ys.len());
    let t = xs.len();
    lags.iter()
        .copied()
        .filter(|&lag| lag >= 1 && lag < t)
        .map(|lag| {
            let sum: f64 = (0..t - lag)
                .map(|i| {
                    let dx = xs[i + lag] - xs[i];
                    let dy = ys[i + lag] - ys[i];
                    dx * dx + dy * dy
                })
                .sum();
            (lag, sum / (t - lag) as f64)
        })
        .collect()
}

/// Log-log slope of an MSD curve: (exponent, r²). Zero entries are skipped;
/// at least two usable points are required.
pub fn msd_exponent(curve: &[(usize, f64)]) -> Result<(f64, f64), StatsError> {
    let pts: Vec<(f64, f64)> = curve
        .iter()
        .filter(|(_, v)| *v > 0.0)
        .map(|&(lag, v)| ((lag as f64).ln(), v.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(StatsError::InsufficientData { needed: 2, got: pts.len() });
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let (slope, _, r2) = linear_fit(&xs, &ys);
    Ok((slope, r2))
}

/// Maximal-run encoding: (value, length) for each run, in order.
pub fn run_lengths(seq: &[usize]) -> Vec<(usize, u64)> {
    let mut out: Vec<(usize, u64)> = Vec::new();
    for &v in seq {
        match out.last_mut() {
            Some((last, n)) if *last == v => *n += 1,
            _ => out.push((v, 1)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn exact_line_is_recovered() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 2.0).collect();
        let (slope, intercept, r2) = linear_fit(&xs, &ys);
        assert!((slope - 3.0).abs() < 1e-12);
        assert!((intercept + 2.0).abs() < 1e-12);
        assert!((r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noise_lowers_r_squared_but_not_the_slope_much() {
        let mut rng = crate::rng::seeded(11);
        let xs: Vec<f64> = (0..200).map(|i| i as f64 / 10.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + rng.random::<f64>() - 0.5).collect();
        let (slope, _, r2) = linear_fit(&xs, &ys);
        assert!((slope - 2.0).abs() < 0.05);
        assert!(r2 > 0.99);
    }

    #[test]
    fn summary_statistics_match_hand_values() {
        let xs = [2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0];
        assert_eq!(mean(&xs), 5.0);
        assert!((std_dev(&xs) - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
        assert_eq!(median(&xs), 4.5);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(std_dev(&[1.0]), 0.0);
    }

    #[test]
    fn run_length_encoding_examples() {
        assert_eq!(run_lengths(&[1, 2, 1, 2]), vec![(1, 1), (2, 1), (1, 1), (2, 1)]);
        assert_eq!(run_lengths(&[0, 0, 0, 1, 1, 0]), vec![(0, 3), (1, 2), (0, 1)]);
        assert!(run_lengths(&[]).is_empty());
    }

    #[test]
    fn lags_are_strictly_increasing_and_hit_both_ends() {
        let lags = log_spaced_lags(10, 10_000, 8);
        assert_eq!(*lags.first().unwrap(), 10);
        assert_eq!(*lags.last().unwrap(), 10_000);
        assert!(lags.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn ballistic_msd_is_the_square_of_the_lag() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let ys = vec![0.0; 1000];
        for (lag, v) in msd_curve(&xs, &ys, &[1, 5, 50, 500]) {
            assert!((v - (lag * lag) as f64).abs() < 1e-9, "lag {lag}");
        }
        let curve = msd_curve(&xs, &ys, &log_spaced_lags(2, 100, 6));
        let (a, r2) = msd_exponent(&curve).unwrap();
        assert!((a - 2.0).abs() < 1e-9);
        assert!(r2 > 0.999999);
    }

    #[test]
    fn random_walk_msd_is_near_linear_and_monotone_at_short_lags() {
        let mut rng = crate::rng::seeded(7);
        let mut x = 0.0;
        let mut y = 0.0;
        let mut xs = vec![0.0];
        let mut ys = vec![0.0];
        for _ in 0..40_000 {
            let phi = rng.random::<f64>() * std::f64::consts::TAU;
            x += phi.cos();
            y += phi.sin();
            xs.push(x);
            ys.push(y);
        }
        let lags = log_spaced_lags(1, 10_000, 8);
        let curve = msd_curve(&xs, &ys, &lags);
        for w in curve.windows(2) {
            if w[1].0 <= xs.len() / 4 {
                assert!(w[1].1 >= w[0].1, "MSD dipped at lag {}", w[1].0);
            }
        }
        let fit_range: Vec<(usize, f64)> =
            curve.into_iter().filter(|(l, _)| (10..=4000).contains(l)).collect();
        let (a, _) = msd_exponent(&fit_range).unwrap();
        assert!((a - 1.0).abs() < 0.1, "exponent {a}");
    }

    /// Inverse-transform sampler for the continuous-approximation power law
    /// used by the fitter.
    fn sample_power_law(alpha: f64, xmin: u64, n: usize, seed: u64) -> Vec<u64> {
        let mut rng = crate::rng::seeded(seed);
        (0..n)
            .map(|_| {
                let u: f64 = rng.random();
                ((xmin as f64 - 0.5) * (1.0 - u).powf(-1.0 / (alpha - 1.0)) + 0.5).floor() as u64
            })
            .collect()
    }

    #[test]
    fn known_power_law_exponent_is_recovered() {
        let samples = sample_power_law(2.5, 1, 20_000, 3);
        let fit = fit_power_law_tail(&samples).unwrap();
        assert!(
            (fit.alpha - 2.5).abs() < 3.0 * fit.sigma.max(0.02),
            "alpha {} sigma {}",
            fit.alpha,
            fit.sigma
        );
        assert!(fit.n_tail >= MIN_TAIL_SAMPLES);
        assert!(fit.ks < 0.05);
    }

    #[test]
    fn shifted_tail_finds_a_cutoff_above_one() {
        // Power law only above 8; uniform noise below.
        let mut samples = sample_power_law(2.2, 8, 8_000, 9);
        let mut rng = crate::rng::seeded(10);
        for _ in 0..4_000 {
            samples.push(rng.random_range(1..8));
        }
        let fit = fit_power_law_tail(&samples).unwrap();
        assert!(fit.x_min >= 4, "x_min {}", fit.x_min);
        assert!((fit.alpha - 2.2).abs() < 0.25, "alpha {}", fit.alpha);
    }

    #[test]
    fn too_few_samples_is_an_error() {
        assert_eq!(
            fit_power_law_tail(&[3; 5]).unwrap_err(),
            StatsError::InsufficientData { needed: MIN_TAIL_SAMPLES, got: 5 }
        );
        assert!(msd_exponent(&[(10, 4.0)]).is_err());
    }

    #[test]
    fn geometric_samples_still_fit_without_panicking() {
        let mut rng = crate::rng::seeded(4);
        let samples: Vec<u64> = (0..5_000)
            .map(|_| {
                let mut x = 1u64;
                while rng.random::<f64>() < 0.9 {
                    x += 1;
                }
                x
            })
            .collect();
        // Exponential decay is not a power law; the fit exists but the
        // KS distance stays visibly worse than for true power-law data.
        let fit = fit_power_law_tail(&samples).unwrap();
        assert!(fit.alpha > 1.0);
    }

    proptest! {
        #[test]
        fn msd_values_are_nonnegative(
            steps in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 10..200),
            raw_lags in proptest::collection::vec(1usize..50, 1..8),
        ) {
            let mut xs = vec![0.0];
            let mut ys = vec![0.0];
            for (dx, dy) in steps {
                xs.push(xs.last().unwrap() + dx);
                ys.push(ys.last().unwrap() + dy);
            }
            for (_, v) in msd_curve(&xs, &ys, &raw_lags) {
                prop_assert!(v >= 0.0);
            }
        }

        #[test]
        fn run_lengths_partition_the_sequence(seq in proptest::collection::vec(0usize..4, 0..200)) {
            let runs = run_lengths(&seq);
            let total: u64 = runs.iter().map(|(_, n)| n).sum();
            prop_assert_eq!(total as usize, seq.len());
            for w in runs.windows(2) {
                prop_assert_ne!(w[0].0, w[1].0);
            }
        }

        #[test]
        fn fitted_alpha_exceeds_one(samples in proptest::collection::vec(1u64..500, 30..300)) {
            if let Ok(fit) = fit_power_law_tail(&samples) {
                prop_assert!(fit.alpha > 1.0);
                prop_assert!(fit.ks >= 0.0 && fit.ks <= 1.0);
            }
        }
    }
}
