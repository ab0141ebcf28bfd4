//! The paired-run reproducibility estimator (the repo's central
//! measurement), parameter sweeps, and report types.
//!
//! Trials are independent: each derives its own streams from the trial
//! index, so results are byte-identical whether trials run on one thread or
//! many.

use std::sync::Arc;

use statrs::distribution::{Beta, ContinuousCDF};

use crate::error::{Error, Result};
use crate::sq::{solve_coin_unchecked, CoinSide, SqParams};
use crate::stream::RandomStream;

/// Map a function over trial indices, in parallel when the `parallel`
/// feature is enabled. Results are collected in index order, so aggregation
/// cannot depend on scheduling.
#[cfg(feature = "parallel")]
pub fn map_trials<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_trials<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..n).map(f).collect()
}

/// Always-sequential variant, kept so benchmarks can compare both paths.
pub fn map_trials_serial<T>(n: usize, f: impl Fn(usize) -> T) -> Vec<T> {
    (0..n).map(f).collect()
}

/// Exact binomial (Clopper-Pearson) 95% confidence interval for `k`
/// successes out of `n`.
pub fn clopper_pearson(k: usize, n: usize) -> (f64, f64) {
    let alpha = 0.05;
    let lo = if k == 0 {
        0.0
    } else {
        Beta::new(k as f64, (n - k + 1) as f64).unwrap().inverse_cdf(alpha / 2.0)
    };
    let hi = if k == n {
        1.0
    } else {
        Beta::new((k + 1) as f64, (n - k) as f64).unwrap().inverse_cdf(1.0 - alpha / 2.0)
    };
    (lo, hi)
}

/// A trial that errored, recorded instead of dropped.
#[derive(Clone, Debug, serde::Serialize)]
pub struct TrialFailure {
    pub trial: usize,
    pub tag: String,
}

/// Monte-Carlo estimate of paired-run agreement and accuracy.
#[derive(Clone, Debug, serde::Serialize)]
pub struct ReproReport {
    pub algorithm: String,
    pub trials: usize,
    pub agreements: usize,
    pub repro_rate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy_rate: Option<f64>,
    pub ci95: (f64, f64),
    pub seed: u64,
    pub params: serde_json::Value,
    pub failures: Vec<TrialFailure>,
}

impl ReproReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// `run(data_stream, algo_stream)`: the data stream is fresh per
/// execution; the algorithm stream is shared within a pair.
pub type PairedRunFn<T> = Arc<dyn Fn(&mut RandomStream, &RandomStream) -> Result<T> + Send + Sync>;

/// Per-output accuracy predicate.
pub type AccuracyFn<T> = Arc<dyn Fn(&T) -> bool + Send + Sync>;

/// One algorithm wired for paired runs.
pub struct PairedRunSpec<T> {
    pub name: String,
    pub run: PairedRunFn<T>,
    /// Optional per-output accuracy predicate, evaluated on the first run.
    pub accurate: Option<AccuracyFn<T>>,
}

/// Estimate reproducibility: per trial, run the algorithm twice on fresh
/// data with a shared algorithm stream and record exact output equality.
/// Trial errors count as disagreements with a failure tag.
pub fn estimate_reproducibility<T: PartialEq + Send>(
    spec: &PairedRunSpec<T>,
    trials: usize,
    root: &RandomStream,
) -> ReproReport {
    struct TrialOutcome {
        agreed: bool,
        accurate: Option<bool>,
        failure: Option<String>,
    }
    let outcomes = map_trials(trials, |i| {
        let t = root.derive(&format!("trial{i}"));
        let algo = t.derive("algo");
        let r1 = (spec.run)(&mut t.derive("data1"), &algo);
        let r2 = (spec.run)(&mut t.derive("data2"), &algo);
        match (r1, r2) {
            (Ok(a), Ok(b)) => TrialOutcome {
                agreed: a == b,
                accurate: spec.accurate.as_ref().map(|f| f(&a)),
                failure: None,
            },
            (Err(e), _) | (_, Err(e)) => TrialOutcome {
                agreed: false,
                accurate: spec.accurate.as_ref().map(|_| false),
                failure: Some(e.to_string()),
            },
        }
    });
    let agreements = outcomes.iter().filter(|o| o.agreed).count();
    let accurate_count = outcomes.iter().filter(|o| o.accurate == Some(true)).count();
    let has_accuracy = spec.accurate.is_some();
    let failures = outcomes
        .iter()
        .enumerate()
        .filter_map(|(i, o)| o.failure.clone().map(|tag| TrialFailure { trial: i, tag }))
        .collect();
    ReproReport {
        algorithm: spec.name.clone(),
        trials,
        agreements,
        repro_rate: agreements as f64 / trials.max(1) as f64,
        accuracy_rate: has_accuracy.then(|| accurate_count as f64 / trials.max(1) as f64),
        ci95: clopper_pearson(agreements, trials),
        seed: root.root_seed(),
        params: serde_json::Value::Null,
        failures,
    }
}

/// One grid point of a sweep.
#[derive(Clone, Debug, serde::Serialize)]
pub struct SweepRow {
    pub m: usize,
    pub trials: usize,
    pub disagreements: usize,
    pub repro_hat: f64,
    pub accuracy_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// Coin-problem scaling sweep: for each sample size `m`, measure paired-run
/// disagreement of the coin decision at bias 1/2 (the rounding-boundary
/// probe) and accuracy at bias `1/2 + τ`, with the region geometry held
/// fixed across the grid.
pub fn coin_scaling_sweep(
    params: &SqParams,
    grid: &[usize],
    trials: usize,
    root: &RandomStream,
) -> Vec<SweepRow> {
    grid.iter()
        .map(|&m| {
            let point = root.derive(&format!("m{m}"));
            let outcomes = map_trials(trials, |i| {
                let t = point.derive(&format!("trial{i}"));
                let algo = t.derive("algo");
                let flip = |stream: &mut RandomStream, bias: f64, n: usize| -> Vec<u8> {
                    (0..n).map(|_| u8::from(stream.draw_bernoulli(bias))).collect()
                };
                let s1 = flip(&mut t.derive("data1"), 0.5, m);
                let s2 = flip(&mut t.derive("data2"), 0.5, m);
                let a = solve_coin_unchecked(&s1, params, &mut algo.derive("q"));
                let b = solve_coin_unchecked(&s2, params, &mut algo.derive("q"));
                let biased = flip(&mut t.derive("data3"), 0.5 + params.tau, m);
                let c = solve_coin_unchecked(&biased, params, &mut algo.derive("q2"));
                (a != b, c == CoinSide::Plus)
            });
            let disagreements = outcomes.iter().filter(|o| o.0).count();
            let accurate = outcomes.iter().filter(|o| o.1).count();
            let agreements = trials - disagreements;
            let ci = clopper_pearson(agreements, trials);
            SweepRow {
                m,
                trials,
                disagreements,
                repro_hat: disagreements as f64 / trials as f64,
                accuracy_hat: accurate as f64 / trials as f64,
                ci_lo: ci.0,
                ci_hi: ci.1,
            }
        })
        .collect()
}

/// CSV for sweep rows; byte-identical across reruns with the same inputs.
pub fn sweep_rows_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("m,trials,disagreements,repro_hat,accuracy_hat,ci_lo,ci_hi\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.m, r.trials, r.disagreements, r.repro_hat, r.accuracy_hat, r.ci_lo, r.ci_hi
        ));
    }
    out
}

/// Least-squares fit of `log ρ̂` against `log m`.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub points_used: usize,
    /// Whether the slope is consistent with the predicted `m^{-1/2}` decay
    /// (band `[-0.65, -0.35]`).
    pub consistent_with_theory: bool,
}

/// Fit the non-reproducibility scaling exponent from sweep rows, using only
/// points with `ρ̂ ∈ (0.01, 0.5)`.
pub fn coin_scaling_fit(rows: &[SweepRow]) -> Result<ScalingFit> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.repro_hat > 0.01 && r.repro_hat < 0.5)
        .map(|r| ((r.m as f64).ln(), r.repro_hat.ln()))
        .collect();
    if pts.len() < 4 {
        return Err(Error::FitDegenerate { usable: pts.len() });
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-12 {
        return Err(Error::FitDegenerate { usable: pts.len() });
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    Ok(ScalingFit {
        slope,
        intercept,
        points_used: pts.len(),
        consistent_with_theory: (-0.65..=-0.35).contains(&slope),
    })
}
