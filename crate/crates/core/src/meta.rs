//! Reproducibility meta-machinery: two-parameter (η, ν) estimation,
//! amplification via heavy hitters over output distributions, the
//! public-versus-private randomness comparison, the generalization check,
//! and the adaptive data-reuse experiment.

use std::collections::HashMap;
use std::hash::Hash;
use std::sync::Arc;

use crate::dist::LabeledSample;
use crate::error::{Error, Result};
use crate::halfspace::Hypothesis;
use crate::heavy::{hh_sample_sizes, r_heavy_hitters, HhParams};
use crate::report::map_trials;
use crate::rounding::IntervalPartition;
use crate::sq::SqParams;
use crate::stats::LnFactorial;
use crate::stream::RandomStream;

/// An algorithm wired for meta-experiments: `run(data, algo)` draws its own
/// sample from `data` and consumes internal randomness from `algo`.
pub type RunFn<T> = Arc<dyn Fn(&mut RandomStream, &RandomStream) -> T + Send + Sync>;

#[derive(Clone)]
pub struct AlgorithmHandle<T> {
    pub name: String,
    pub sample_size: usize,
    pub run: RunFn<T>,
}

impl<T> AlgorithmHandle<T> {
    pub fn new(
        name: &str,
        sample_size: usize,
        run: impl Fn(&mut RandomStream, &RandomStream) -> T + Send + Sync + 'static,
    ) -> Self {
        AlgorithmHandle { name: name.to_string(), sample_size, run: Arc::new(run) }
    }
}

/// Per-random-string estimates of `η̂(r) = 1 - (mode frequency)`.
#[derive(Clone, Debug)]
pub struct EtaNuEstimate {
    pub eta_hats: Vec<f64>,
    pub s_trials: usize,
}

impl EtaNuEstimate {
    /// Fraction of random strings whose `η̂(r)` exceeds `eta`.
    pub fn nu_hat(&self, eta: f64) -> f64 {
        let over = self.eta_hats.iter().filter(|&&e| e > eta).count();
        over as f64 / self.eta_hats.len().max(1) as f64
    }

    pub fn mean_eta(&self) -> f64 {
        self.eta_hats.iter().sum::<f64>() / self.eta_hats.len().max(1) as f64
    }
}

/// For each of `r_trials` random strings, run `a` on `s_trials` fresh
/// samples and measure how far the output distribution is from having a
/// canonical value.
pub fn estimate_eta_nu<T: Hash + Eq + Send>(
    a: &AlgorithmHandle<T>,
    r_trials: usize,
    s_trials: usize,
    root: &RandomStream,
) -> EtaNuEstimate {
    let eta_hats = map_trials(r_trials, |i| {
        let r = root.derive(&format!("r{i}"));
        let algo = r.derive("algo");
        let mut counts: HashMap<T, usize> = HashMap::new();
        for j in 0..s_trials {
            let out = (a.run)(&mut r.derive(&format!("s{j}")), &algo);
            *counts.entry(out).or_insert(0) += 1;
        }
        let mode = counts.values().copied().max().unwrap_or(0);
        1.0 - mode as f64 / s_trials as f64
    });
    EtaNuEstimate { eta_hats, s_trials }
}

/// Heavy-hitter stage sizes for amplification rounds (desk override).
#[derive(Clone, Copy, Debug)]
pub struct AmplifySizes {
    pub q1: usize,
    pub q2: usize,
}

/// Amplify an (η, ν)-reproducible algorithm to target reproducibility
/// `ρ_target`: over `k = ⌈3 log₂(1/β)⌉` shared random strings, run heavy
/// hitters on the output distribution `D_r` (each draw is a fresh run of
/// `a`) with `v = (3/2-η)/2`, `ε = (1/2-η)/2`, `ρ' = ρ_target/k`, and
/// return the first non-empty round's heavy hitter (`None` = ⊥ when every
/// round comes back empty).
#[allow(clippy::too_many_arguments)]
pub fn amplify<T: Hash + Eq + Ord + Clone>(
    a: &AlgorithmHandle<T>,
    eta: f64,
    nu: f64,
    beta: f64,
    rho_target: f64,
    sizes: Option<AmplifySizes>,
    data: &RandomStream,
    s: &RandomStream,
) -> Result<Option<T>> {
    if !(0.0 < eta && eta < 0.5 && 0.0 < nu && nu < 0.5) {
        return Err(Error::InvalidArgument(format!("need eta, nu in (0,1/2); got {eta}, {nu}")));
    }
    if nu + rho_target >= 0.75 {
        return Err(Error::InvalidArgument(format!(
            "need nu + rho_target < 3/4; got {}",
            nu + rho_target
        )));
    }
    let k = (3.0 * (1.0 / beta).log2()).ceil() as usize;
    let p = HhParams::new(rho_target / k as f64, (1.5 - eta) / 2.0, (0.5 - eta) / 2.0)?;
    let (q1, q2) = match sizes {
        Some(sz) => (sz.q1, sz.q2),
        None => hh_sample_sizes(&p)?,
    };
    for round in 0..k {
        let r_i = s.derive(&format!("amp{round}.r"));
        let round_data = data.derive(&format!("amp{round}"));
        let mut draw_idx = 0usize;
        let heavy = r_heavy_hitters(
            || {
                let mut d = round_data.derive(&format!("d{draw_idx}"));
                draw_idx += 1;
                Ok::<T, Error>((a.run)(&mut d, &r_i))
            },
            q1,
            q2,
            &p,
            &mut s.derive(&format!("amp{round}.hh")),
        )?;
        if let Some(best) = heavy.into_iter().min() {
            return Ok(Some(best));
        }
    }
    Ok(None)
}

/// An algorithm with split randomness: `run(data, r_pub, r_priv)`.
pub type SplitRunFn<T> =
    Arc<dyn Fn(&mut RandomStream, &RandomStream, &RandomStream) -> T + Send + Sync>;

#[derive(Clone)]
pub struct SplitRandomnessHandle<T> {
    pub name: String,
    pub run: SplitRunFn<T>,
}

/// Paired-run agreement when only the public part is shared versus when the
/// whole randomness is shared. Making everything public can only help.
pub fn compare_public_private<T: PartialEq + Send>(
    a2: &SplitRandomnessHandle<T>,
    trials: usize,
    root: &RandomStream,
) -> (f64, f64) {
    let outcomes = map_trials(trials, |i| {
        let t = root.derive(&format!("trial{i}"));
        let r_pub = t.derive("pub");
        let pub_only = {
            let x = (a2.run)(&mut t.derive("d1"), &r_pub, &t.derive("priv1"));
            let y = (a2.run)(&mut t.derive("d2"), &r_pub, &t.derive("priv2"));
            x == y
        };
        let all_public = {
            let shared_priv = t.derive("priv-shared");
            let x = (a2.run)(&mut t.derive("d3"), &r_pub, &shared_priv);
            let y = (a2.run)(&mut t.derive("d4"), &r_pub, &shared_priv);
            x == y
        };
        (pub_only, all_public)
    });
    let n = trials.max(1) as f64;
    let pub_only = outcomes.iter().filter(|o| o.0).count() as f64 / n;
    let all_public = outcomes.iter().filter(|o| o.1).count() as f64 / n;
    (pub_only, all_public)
}

/// Outcome of the generalization check.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct GeneralizationReport {
    pub trials: usize,
    pub violations: usize,
    pub violation_rate: f64,
    pub bound: f64,
}

/// Fraction of trials where the held-out risk exceeds the empirical risk
/// plus `√(ln(1/δ)/(2 n_train))`. For a ρ-reproducible learner this stays
/// near `ρ + δ`.
pub fn generalization_check(
    learner: &(dyn Fn(&LabeledSample, &RandomStream) -> Result<Hypothesis> + Sync),
    draw: &(dyn Fn(&mut RandomStream) -> crate::dist::LabeledExample + Sync),
    n_train: usize,
    n_test: usize,
    delta: f64,
    trials: usize,
    root: &RandomStream,
) -> GeneralizationReport {
    let bound = ((1.0 / delta).ln() / (2.0 * n_train as f64)).sqrt();
    let violations = map_trials(trials, |i| {
        let t = root.derive(&format!("trial{i}"));
        let mut data = t.derive("train");
        let train: LabeledSample = (0..n_train).map(|_| draw(&mut data)).collect();
        let Ok(h) = learner(&train, &t.derive("algo")) else {
            return 0usize; // learner failure is not a bound violation
        };
        let empirical =
            train.iter().filter(|ex| h.classify(&ex.x) != ex.y).count() as f64 / n_train as f64;
        let mut test_stream = t.derive("test");
        let test_err = (0..n_test)
            .filter(|_| {
                let ex = draw(&mut test_stream);
                h.classify(&ex.x) != ex.y
            })
            .count() as f64
            / n_test as f64;
        usize::from(test_err > empirical + bound)
    })
    .into_iter()
    .sum();
    GeneralizationReport {
        trials,
        violations,
        violation_rate: violations as f64 / trials.max(1) as f64,
        bound,
    }
}

/// Configuration of the two-query adaptive transcript experiment.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct DataReuseConfig {
    /// Parameters of each reproducible query.
    pub sq: SqParams,
    /// Sample size per query (per mechanism draw).
    pub n: usize,
    /// Monte-Carlo draws of the shared randomness; the transcript
    /// distribution is enumerated exactly for each.
    pub r_draws: usize,
}

/// Estimated statistical distance between transcript distributions.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct DataReuseReport {
    pub mean_tv: f64,
    pub max_tv: f64,
    pub queries: usize,
    pub truncation_error: f64,
}

/// Total-variation distance between the transcript distribution of a
/// fresh-sample-per-query mechanism and one that reuses a single sample,
/// for two adaptive `rstat` queries on a fair coin.
///
/// The first query is the identity; the second negates the bit iff the
/// first answer was below 1/2. For each draw of the shared randomness the
/// answer lattice is finite and the transcript distributions are enumerated
/// exactly from binomial masses (window of ±8σ around the mean).
pub fn data_reuse_tv(cfg: &DataReuseConfig, root: &RandomStream) -> Result<DataReuseReport> {
    cfg.sq.validate()?;
    let n = cfg.n;
    let lf = LnFactorial::up_to(n);
    let sigma = 0.5 * (n as f64).sqrt();
    let lo = ((n as f64 / 2.0) - 8.0 * sigma).floor().max(0.0) as usize;
    let hi = ((n as f64 / 2.0) + 8.0 * sigma).ceil().min(n as f64) as usize;
    let window: Vec<(usize, f64)> =
        (lo..=hi).map(|k| (k, lf.binomial_pmf(n, 0.5, k))).collect();
    let captured: f64 = window.iter().map(|w| w.1).sum();
    let alpha = cfg.sq.alpha();

    let tvs: Vec<f64> = map_trials(cfg.r_draws, |i| {
        let r = root.derive(&format!("r{i}"));
        let off1 = r.derive("q1").draw_unit() * alpha;
        let off2 = r.derive("q2").draw_unit() * alpha;
        let p1 = IntervalPartition::new(alpha.min(1.0), off1.min(alpha)).unwrap();
        let p2 = IntervalPartition::new(alpha.min(1.0), off2.min(alpha)).unwrap();

        let answer1 = |k: usize| p1.round(k as f64 / n as f64);
        // Adaptive chooser: identity if a1 >= 1/2, negation otherwise.
        let answer2 = |a1: f64, k: usize| {
            let mean = k as f64 / n as f64;
            p2.round(if a1 >= 0.5 { mean } else { 1.0 - mean })
        };

        // Marginal of a1 over the lattice.
        let mut pa1: HashMap<u64, f64> = HashMap::new();
        for &(k, w) in &window {
            *pa1.entry(answer1(k).to_bits()).or_insert(0.0) += w;
        }
        // Fresh mechanism: a2 drawn from an independent sample.
        let mut fresh: HashMap<(u64, u64), f64> = HashMap::new();
        for (&a1_bits, &w1) in &pa1 {
            let a1 = f64::from_bits(a1_bits);
            for &(k2, w2) in &window {
                *fresh.entry((a1_bits, answer2(a1, k2).to_bits())).or_insert(0.0) += w1 * w2;
            }
        }
        // Reusing mechanism: both answers are functions of the same count.
        let mut reuse: HashMap<(u64, u64), f64> = HashMap::new();
        for &(k, w) in &window {
            let a1 = answer1(k);
            *reuse.entry((a1.to_bits(), answer2(a1, k).to_bits())).or_insert(0.0) += w;
        }

        let mut keys: Vec<(u64, u64)> = fresh.keys().chain(reuse.keys()).copied().collect();
        keys.sort_unstable();
        keys.dedup();
        0.5 * keys
            .iter()
            .map(|key| {
                (fresh.get(key).copied().unwrap_or(0.0) - reuse.get(key).copied().unwrap_or(0.0))
                    .abs()
            })
            .sum::<f64>()
    });
    let mean_tv = tvs.iter().sum::<f64>() / tvs.len().max(1) as f64;
    let max_tv = tvs.iter().copied().fold(0.0, f64::max);
    Ok(DataReuseReport { mean_tv, max_tv, queries: 2, truncation_error: 1.0 - captured })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::CoinSource;

    #[test]
    fn deterministic_algorithm_has_zero_eta_nu() {
        let a = AlgorithmHandle::new("const", 0, |_d: &mut RandomStream, _r| 7u64);
        let est = estimate_eta_nu(&a, 20, 30, &RandomStream::new(1));
        assert!(est.eta_hats.iter().all(|&e| e == 0.0));
        assert_eq!(est.nu_hat(0.01), 0.0);
    }

    #[test]
    fn first_bit_algorithm_eta_half() {
        // A returns its first sample bit on a fair coin: for every r the
        // mode frequency is about 1/2.
        let a = AlgorithmHandle::new("first-bit", 1, |d: &mut RandomStream, _r| {
            u8::from(d.draw_bernoulli(0.5))
        });
        let est = estimate_eta_nu(&a, 30, 400, &RandomStream::new(2));
        let mean = est.mean_eta();
        assert!((mean - 0.5).abs() < 0.05, "mean eta {mean}");
        assert_eq!(est.nu_hat(0.6), 0.0);
    }

    #[test]
    fn amplify_deterministic_passthrough() {
        let a = AlgorithmHandle::new("const", 0, |_d: &mut RandomStream, _r| 3u64);
        let out = amplify(
            &a,
            0.2,
            0.2,
            0.05,
            0.1,
            Some(AmplifySizes { q1: 20, q2: 100 }),
            &RandomStream::new(3).derive("data"),
            &RandomStream::new(3).derive("algo"),
        )
        .unwrap();
        assert_eq!(out, Some(3));
    }

    #[test]
    fn amplify_parameter_mapping() {
        // η = 0.2 gives v = 0.65, ε = 0.15 (v+ε = 1-η, v-ε = 1/2).
        let eta: f64 = 0.2;
        let v = (1.5 - eta) / 2.0;
        let eps = (0.5 - eta) / 2.0;
        assert!((v - 0.65).abs() < 1e-12);
        assert!((eps - 0.15).abs() < 1e-12);
        assert!((v + eps - (1.0 - eta)).abs() < 1e-12);
        assert!((v - eps - 0.5).abs() < 1e-12);
    }

    #[test]
    fn amplify_validates_preconditions() {
        let a = AlgorithmHandle::new("const", 0, |_d: &mut RandomStream, _r| 3u64);
        let data = RandomStream::new(1);
        assert!(amplify(&a, 0.6, 0.2, 0.05, 0.1, None, &data, &data).is_err());
        assert!(amplify(&a, 0.2, 0.4, 0.05, 0.4, None, &data, &data).is_err());
    }

    #[test]
    fn public_private_ignoring_private_is_equal() {
        let a2 = SplitRandomnessHandle {
            name: "pub-only".into(),
            run: Arc::new(|_d: &mut RandomStream, r_pub: &RandomStream, _r_priv| {
                r_pub.clone().draw_u64()
            }),
        };
        let (pub_only, all_public) = compare_public_private(&a2, 300, &RandomStream::new(4));
        assert_eq!(pub_only, 1.0);
        assert_eq!(all_public, 1.0);
    }

    #[test]
    fn public_private_first_private_bit() {
        let a2 = SplitRandomnessHandle {
            name: "priv-bit".into(),
            run: Arc::new(|_d: &mut RandomStream, _r_pub, r_priv: &RandomStream| {
                u8::from(r_priv.clone().draw_bernoulli(0.5))
            }),
        };
        let (pub_only, all_public) = compare_public_private(&a2, 2000, &RandomStream::new(5));
        assert!((pub_only - 0.5).abs() < 0.05, "pub_only {pub_only}");
        assert_eq!(all_public, 1.0);
    }

    #[test]
    fn single_query_transcripts_identical() {
        // m = 1: with one query the mechanisms coincide, distance 0. Covered
        // by the hybrid argument's base case; here the 2-query experiment at
        // a deterministic chooser degenerates the same way when the second
        // query ignores its answer... checked directly on the TV of the
        // first marginal.
        let cfg = DataReuseConfig {
            sq: SqParams::new(0.1, 0.1, 0.02).unwrap(),
            n: 2000,
            r_draws: 10,
        };
        let report = data_reuse_tv(&cfg, &RandomStream::new(6)).unwrap();
        // Not zero (two queries), but bounded by (m-1)ρ = 0.1 in the mean.
        assert!(report.mean_tv <= 0.1 + 0.02, "tv {}", report.mean_tv);
        assert!(report.truncation_error < 1e-9);
    }

    #[test]
    fn raw_mean_mechanism_has_larger_gap() {
        // Without rounding, transcripts from reused samples collapse onto
        // the diagonal while fresh ones spread: the TV gap is near 1, far
        // above the reproducible mechanism's.
        let n = 400;
        let lf = LnFactorial::up_to(n);
        let coin = CoinSource::new(0.5).unwrap();
        let _ = coin;
        // Exact: fresh puts mass pmf(k1)pmf(k2) off-diagonal; reuse is
        // diagonal. TV = 1 - Σ_k pmf(k)² for the identity chooser.
        let collision: f64 = (0..=n).map(|k| lf.binomial_pmf(n, 0.5, k).powi(2)).sum();
        let tv_raw = 1.0 - collision;
        assert!(tv_raw > 0.9);
    }
}
