//! Smooth reproducible boosting with rejection sampling, and the composed
//! strong halfspace learner.
//!
//! The booster reweights the distribution through a measure
//! `μ(x) = M(g(x))` with the capped exponential `M` and score
//! `g(x) = Σ_t (h_t(x) f(x) - θ)`, rejection-samples the weak learner's
//! input from the reweighted distribution, and exits once a reproducible
//! statistical query estimates the measure's density at or below `2ε/3`.

use crate::dist::{LabeledExample, LabeledSample};
use crate::error::{Error, Result};
use crate::halfspace::{r_halfspace_wkl, Hypothesis, WklParams};
use crate::rounding::SchemeKind;
use crate::sq::{rstat_sample_size, rstat_unchecked, SqParams, SqQuery};
use crate::stream::RandomStream;

/// The capped exponential base measure: 1 for `a <= 0`, `(1-γ)^{a/2}` above.
pub fn measure_eval(gamma: f64, a: f64) -> f64 {
    if a <= 0.0 {
        1.0
    } else {
        (1.0 - gamma).powf(a / 2.0)
    }
}

/// The booster's reweighting measure over labeled examples. The sample's
/// label stands in for `f(x)` when scoring.
#[derive(Clone, Debug)]
pub struct Measure {
    pub gamma: f64,
    pub theta: f64,
    hypotheses: Vec<Hypothesis>,
}

impl Measure {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(0.0 < gamma && gamma < 1.0) {
            return Err(Error::InvalidArgument(format!("gamma={gamma} not in (0,1)")));
        }
        Ok(Measure { gamma, theta: gamma / (2.0 + gamma), hypotheses: Vec::new() })
    }

    pub fn push(&mut self, h: Hypothesis) {
        self.hypotheses.push(h);
    }

    pub fn hypotheses(&self) -> &[Hypothesis] {
        &self.hypotheses
    }

    /// Score `g(x, y) = Σ_t (h_t(x) y - θ)`.
    pub fn score(&self, ex: &LabeledExample) -> f64 {
        self.hypotheses.iter().map(|h| h.evaluate(&ex.x) * ex.y - self.theta).sum()
    }

    /// `μ(x, y) = M(g(x, y)) ∈ (0, 1]`.
    pub fn eval(&self, ex: &LabeledExample) -> f64 {
        measure_eval(self.gamma, self.score(ex))
    }

    /// Exact density `d(μ) = E_D[μ]` on a finite source.
    pub fn density_exact(&self, source: &crate::dist::FinitePointSource) -> f64 {
        source.expect(|ex| self.eval(ex))
    }
}

/// Scan `s_all` in order, keeping each example with probability `μ(x)`, and
/// return the first `m_target` kept examples, or `None` (⊥) if the scan is
/// exhausted first.
pub fn rejection_sampler(
    s_all: &[LabeledExample],
    m_target: usize,
    mu: impl Fn(&LabeledExample) -> f64,
    s: &mut RandomStream,
) -> Result<Option<LabeledSample>> {
    if m_target > s_all.len() {
        return Err(Error::InvalidArgument(format!(
            "m_target {m_target} exceeds sample size {}",
            s_all.len()
        )));
    }
    let mut kept = Vec::with_capacity(m_target);
    for ex in s_all {
        let b = s.draw_unit();
        if mu(ex) >= b {
            kept.push(ex.clone());
            if kept.len() == m_target {
                return Ok(Some(kept));
            }
        }
    }
    Ok(None)
}

/// Slice size per the rejection-sampler failure-rate lemma:
/// `⌈24 m_target ln(1/δ) / ε⌉` examples bound `Pr[⊥]` by δ when the density
/// is at least `ε/3`.
pub fn rejection_slice_size(m_target: usize, eps: f64, delta: f64) -> usize {
    (24.0 * m_target as f64 * (1.0 / delta).ln() / eps).ceil() as usize
}

/// Booster parameters. `m_wkl` is the per-round weak-learner sample size
/// (desk-scale override of the weak learner's own worst-case bound);
/// `check_n` overrides the termination query's sample size.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct BoostParams {
    pub rho: f64,
    pub eps: f64,
    pub gamma: f64,
    pub c_t: f64,
    pub m_wkl: usize,
    /// δ for the per-round slice-size lemma.
    pub slice_delta: f64,
    pub check_n: Option<usize>,
}

impl BoostParams {
    pub fn new(rho: f64, eps: f64, gamma: f64, m_wkl: usize) -> Result<Self> {
        for (name, v) in [("rho", rho), ("eps", eps), ("gamma", gamma)] {
            if !(0.0 < v && v < 1.0) {
                return Err(Error::InvalidArgument(format!("{name}={v} not in (0,1)")));
            }
        }
        if m_wkl == 0 {
            return Err(Error::InvalidArgument("m_wkl must be positive".into()));
        }
        Ok(BoostParams { rho, eps, gamma, c_t: 4.0, m_wkl, slice_delta: 0.0, check_n: None })
    }

    pub fn with_c_t(mut self, c_t: f64) -> Self {
        self.c_t = c_t;
        self
    }

    pub fn with_check_n(mut self, n: usize) -> Self {
        self.check_n = Some(n);
        self
    }

    pub fn with_slice_delta(mut self, d: f64) -> Self {
        self.slice_delta = d;
        self
    }

    /// Round bound `T = ⌈c_T / (ε γ²)⌉`.
    pub fn t_max(&self) -> usize {
        (self.c_t / (self.eps * self.gamma * self.gamma)).ceil() as usize
    }

    /// Per-round termination-check query: tolerance `ε/3`, reproducibility
    /// `ρ/(3T)`, failure rate `ρ/(12T)`.
    pub fn check_params(&self) -> SqParams {
        let t = self.t_max() as f64;
        SqParams { tau: self.eps / 3.0, rho: self.rho / (3.0 * t), delta: self.rho / (12.0 * t) }
    }

    fn slice_len(&self) -> usize {
        let delta = if self.slice_delta > 0.0 {
            self.slice_delta
        } else {
            self.rho / (6.0 * self.t_max() as f64)
        };
        rejection_slice_size(self.m_wkl, self.eps, delta)
    }

    fn check_len(&self) -> Result<usize> {
        match self.check_n {
            Some(n) => Ok(n),
            None => rstat_sample_size(&self.check_params()),
        }
    }
}

/// Supplies fresh examples to the booster round by round.
pub trait ExampleFeed {
    fn next_batch(&mut self, n: usize) -> Result<LabeledSample>;
    fn consumed(&self) -> usize;
}

/// Carves sequentially from a fixed master sample; errors when exhausted.
pub struct SliceFeed<'a> {
    sample: &'a [LabeledExample],
    pos: usize,
}

impl<'a> SliceFeed<'a> {
    pub fn new(sample: &'a [LabeledExample]) -> Self {
        SliceFeed { sample, pos: 0 }
    }
}

impl ExampleFeed for SliceFeed<'_> {
    fn next_batch(&mut self, n: usize) -> Result<LabeledSample> {
        if self.pos + n > self.sample.len() {
            return Err(Error::InsufficientSample {
                required: self.pos + n,
                got: self.sample.len(),
            });
        }
        let out = self.sample[self.pos..self.pos + n].to_vec();
        self.pos += n;
        Ok(out)
    }

    fn consumed(&self) -> usize {
        self.pos
    }
}

/// Draws lazily from a source closure (the filtering reading: fresh
/// examples on demand, never reused).
pub struct SourceFeed<F: FnMut(&mut RandomStream) -> LabeledExample> {
    draw: F,
    stream: RandomStream,
    consumed: usize,
}

impl<F: FnMut(&mut RandomStream) -> LabeledExample> SourceFeed<F> {
    pub fn new(draw: F, stream: RandomStream) -> Self {
        SourceFeed { draw, stream, consumed: 0 }
    }
}

impl<F: FnMut(&mut RandomStream) -> LabeledExample> ExampleFeed for SourceFeed<F> {
    fn next_batch(&mut self, n: usize) -> Result<LabeledSample> {
        self.consumed += n;
        Ok((0..n).map(|_| (self.draw)(&mut self.stream)).collect())
    }

    fn consumed(&self) -> usize {
        self.consumed
    }
}

/// Per-round diagnostics for paired-run diffing.
#[derive(Clone, Debug, serde::Serialize)]
pub struct BoostRound {
    pub density_estimate: f64,
    pub hypothesis_fingerprint: u64,
}

#[derive(Clone, Debug)]
pub struct BoostOutcome {
    pub hypothesis: Hypothesis,
    pub rounds: Vec<BoostRound>,
    pub examples_used: usize,
}

impl PartialEq for BoostOutcome {
    fn eq(&self, other: &Self) -> bool {
        self.hypothesis == other.hypothesis
    }
}

/// Run smooth reproducible boosting over `feed` with the given weak
/// learner. Round `t` derives `round{t}.sampler`, `round{t}.wkl`, and
/// `round{t}.stat` streams from `s`, so variable rejection consumption
/// never desynchronizes paired runs.
pub fn r_boost(
    feed: &mut dyn ExampleFeed,
    weak: &mut dyn FnMut(&LabeledSample, &RandomStream) -> Result<Hypothesis>,
    p: &BoostParams,
    s: &RandomStream,
) -> Result<BoostOutcome> {
    let t_max = p.t_max();
    let check_params = p.check_params();
    let check_len = p.check_len()?;
    let slice_len = p.slice_len();
    let mut measure = Measure::new(p.gamma)?;
    let mut rounds = Vec::new();

    for t in 1..=t_max {
        let slice = feed.next_batch(slice_len)?;
        let mut kept = rejection_sampler(
            &slice,
            p.m_wkl,
            |ex| measure.eval(ex),
            &mut s.derive(&format!("round{t}.sampler")),
        )?;
        if kept.is_none() {
            // One retry with a doubled slice; more would distort the
            // reproducibility accounting.
            let retry = feed.next_batch(2 * slice_len)?;
            kept = rejection_sampler(
                &retry,
                p.m_wkl,
                |ex| measure.eval(ex),
                &mut s.derive(&format!("round{t}.sampler-retry")),
            )?;
        }
        let kept = kept.ok_or(Error::RoundFailure { round: t })?;

        let h = weak(&kept, &s.derive(&format!("round{t}.wkl")))?;
        measure.push(h);

        let check_slice = feed.next_batch(check_len)?;
        let m = measure.clone();
        let q = SqQuery::new("density", move |ex: &LabeledExample| m.eval(ex));
        let density = rstat_unchecked(
            &q,
            &check_slice,
            &check_params,
            &mut s.derive(&format!("round{t}.stat")),
        );
        rounds.push(BoostRound {
            density_estimate: density,
            hypothesis_fingerprint: measure.hypotheses().last().unwrap().fingerprint(),
        });
        if density <= 2.0 * p.eps / 3.0 {
            return Ok(BoostOutcome {
                hypothesis: Hypothesis::Vote(measure.hypotheses().to_vec()),
                rounds,
                examples_used: feed.consumed(),
            });
        }
    }
    Err(Error::NonTermination { rounds: t_max })
}

/// Worst-case sample complexity of the composed strong learner (log
/// factors dropped): `d^{10/9} / (τ^{76/9} ρ^{20/9} ε^{28/9})` for foams,
/// `d^{15/4} / (τ^{10} ρ^{5/2} ε^{9/2})` for boxes.
pub fn strong_worst_case_sample_complexity(
    kind: SchemeKind,
    dim: usize,
    margin: f64,
    rho: f64,
    eps: f64,
) -> f64 {
    let d = dim as f64;
    match kind {
        SchemeKind::Foam => {
            d.powf(10.0 / 9.0)
                / (margin.powf(76.0 / 9.0) * rho.powf(20.0 / 9.0) * eps.powf(28.0 / 9.0))
        }
        SchemeKind::Box => {
            d.powf(15.0 / 4.0) / (margin.powf(10.0) * rho.powf(2.5) * eps.powf(4.5))
        }
    }
}

#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct StrongLearnerConfig {
    pub dim: usize,
    pub margin: f64,
    pub rho: f64,
    pub eps: f64,
    pub scheme: SchemeKind,
    pub c_t: f64,
    /// Desk-scale per-round weak-learner sample size.
    pub m_wkl: usize,
    pub check_n: Option<usize>,
    pub slice_delta: f64,
    /// Booster's declared weak-learner advantage; `τ/4` when absent.
    pub gamma_override: Option<f64>,
}

#[derive(Debug)]
pub struct StrongLearnerReport {
    pub outcome: BoostOutcome,
    pub gamma: f64,
    pub t_max: usize,
    pub weak_rho: f64,
    pub worst_case_sample_complexity: f64,
}

/// Boost the chosen halfspace weak learner at advantage `γ = τ/4`. Draws
/// examples lazily from `draw` using `data`; algorithm randomness comes from
/// `s`.
pub fn strong_halfspace_learner(
    draw: impl FnMut(&mut RandomStream) -> LabeledExample,
    cfg: &StrongLearnerConfig,
    data: RandomStream,
    s: &RandomStream,
) -> Result<StrongLearnerReport> {
    let gamma = cfg.gamma_override.unwrap_or(cfg.margin / 4.0);
    let mut params = BoostParams::new(cfg.rho, cfg.eps, gamma, cfg.m_wkl)?.with_c_t(cfg.c_t);
    if let Some(n) = cfg.check_n {
        params = params.with_check_n(n);
    }
    if cfg.slice_delta > 0.0 {
        params = params.with_slice_delta(cfg.slice_delta);
    }
    let t_max = params.t_max();
    let weak_rho = cfg.rho / (6.0 * t_max as f64);
    let wkl = WklParams::new(weak_rho.min(0.999), cfg.dim, cfg.margin, cfg.scheme)?
        .with_m_override(cfg.m_wkl);
    let scheme = cfg.scheme;
    let mut weak = move |sample: &LabeledSample, stream: &RandomStream| {
        r_halfspace_wkl(sample, &wkl, scheme, &mut stream.clone())
    };
    let mut feed = SourceFeed::new(draw, data);
    let outcome = r_boost(&mut feed, &mut weak, &params, s)?;
    Ok(StrongLearnerReport {
        outcome,
        gamma,
        t_max,
        weak_rho,
        worst_case_sample_complexity: strong_worst_case_sample_complexity(
            cfg.scheme, cfg.dim, cfg.margin, cfg.rho, cfg.eps,
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::FinitePointSource;

    #[test]
    fn capped_exponential_values() {
        assert_eq!(measure_eval(0.3, 0.0), 1.0);
        assert_eq!(measure_eval(0.3, -5.0), 1.0);
        assert!((measure_eval(0.3, 2.0) - 0.7).abs() < 1e-12);
        assert!((measure_eval(0.5, 4.0) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn theta_below_gamma() {
        let m = Measure::new(0.3).unwrap();
        assert!(m.theta < m.gamma);
        assert!((m.theta - 0.3 / 2.3).abs() < 1e-12);
    }

    #[test]
    fn sampler_keeps_prefix_when_mu_is_one() {
        let sample: Vec<LabeledExample> = (0..10)
            .map(|i| LabeledExample::new(vec![i as f64], if i % 2 == 0 { 1.0 } else { -1.0 }))
            .collect();
        let mut s = RandomStream::new(1);
        let kept = rejection_sampler(&sample, 4, |_| 1.0, &mut s).unwrap().unwrap();
        assert_eq!(kept, sample[..4].to_vec());
    }

    #[test]
    fn sampler_bottom_when_mu_vanishes() {
        let sample: Vec<LabeledExample> =
            (0..10).map(|i| LabeledExample::new(vec![i as f64], 1.0)).collect();
        let mut s = RandomStream::new(2);
        assert!(rejection_sampler(&sample, 1, |_| 0.0, &mut s).unwrap().is_none());
    }

    #[test]
    fn sampler_target_larger_than_sample_errors() {
        let sample = vec![LabeledExample::new(vec![0.0], 1.0)];
        let mut s = RandomStream::new(3);
        assert!(rejection_sampler(&sample, 2, |_| 1.0, &mut s).is_err());
    }

    #[test]
    fn oracle_weak_learner_reaches_zero_error() {
        // A weak learner that returns the true direction terminates and the
        // vote classifies the source perfectly.
        let src = FinitePointSource::eight_point_margin();
        let params = BoostParams::new(0.2, 0.2, 0.45, 8)
            .unwrap()
            .with_check_n(400)
            .with_slice_delta(0.05);
        let root = RandomStream::new(9);
        let mut feed = SourceFeed::new(|s: &mut RandomStream| src.draw(s), root.derive("data"));
        let mut weak = |_sample: &LabeledSample, _s: &RandomStream| {
            Hypothesis::direction(vec![1.0, 0.0])
        };
        let out = r_boost(&mut feed, &mut weak, &params, &root.derive("algo")).unwrap();
        let err = src.expect(|ex| f64::from(out.hypothesis.classify(&ex.x) != ex.y));
        assert_eq!(err, 0.0);
        assert!(!out.rounds.is_empty());
    }

    #[test]
    fn t_max_substitution() {
        // γ = τ/4 gives T = ⌈16 c_T/(ε τ²)⌉.
        let tau: f64 = 0.4;
        let p = BoostParams::new(0.2, 0.2, tau / 4.0, 10).unwrap();
        assert_eq!(p.t_max(), (16.0 * 4.0 / (0.2 * tau * tau)).ceil() as usize);
    }

    #[test]
    fn strong_learner_closed_forms() {
        let direct_foam = 3f64.powf(10.0 / 9.0)
            / (0.3f64.powf(76.0 / 9.0) * 0.1f64.powf(20.0 / 9.0) * 0.1f64.powf(28.0 / 9.0));
        let got = strong_worst_case_sample_complexity(SchemeKind::Foam, 3, 0.3, 0.1, 0.1);
        assert!((got / direct_foam - 1.0).abs() < 1e-12);
        let direct_box =
            3f64.powf(3.75) / (0.3f64.powf(10.0) * 0.1f64.powf(2.5) * 0.1f64.powf(4.5));
        let got_box = strong_worst_case_sample_complexity(SchemeKind::Box, 3, 0.3, 0.1, 0.1);
        assert!((got_box / direct_box - 1.0).abs() < 1e-12);
    }

    #[test]
    fn slice_size_formula() {
        let n = rejection_slice_size(100, 0.2, 0.05);
        let direct = (24.0 * 100.0 * (20.0f64).ln() / 0.2).ceil() as usize;
        assert_eq!(n, direct);
    }
}
