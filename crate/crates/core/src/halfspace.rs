//! Reproducible halfspace weak learners and the concentration utilities
//! their analysis rests on.
//!
//! The learner sums the normalized signed examples, scales the sum so its
//! norm is pinned well above the rounding displacement, and rounds with a
//! randomly constructed scheme (foams or shifted boxes). Two runs produce
//! the same hypothesis whenever their scaled sums round to the same lattice
//! point.

use crate::dist::{FinitePointSource, LabeledExample};
use crate::error::{Error, Result};
use crate::rounding::{RoundingScheme, SchemeKind, FOAM_DEFAULT_MAX_STAGES};
use crate::stream::RandomStream;
use crate::vecmath;

/// A real-valued predictor on ℝ^d.
#[derive(Clone, Debug, PartialEq)]
pub enum Hypothesis {
    /// `h(x) = x̂ · ŵ` for a unit direction `w`.
    Direction(Vec<f64>),
    /// Sign of the sum of the member hypotheses, in `{-1, +1}`.
    Vote(Vec<Hypothesis>),
}

impl Hypothesis {
    pub fn direction(w: Vec<f64>) -> Result<Self> {
        let w = vecmath::normalized(&w).ok_or(Error::DegenerateRounding)?;
        Ok(Hypothesis::Direction(w))
    }

    /// Value in `[-1, 1]`.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        match self {
            Hypothesis::Direction(w) => {
                let n = vecmath::norm(x);
                if n == 0.0 {
                    0.0
                } else {
                    vecmath::dot(x, w) / n
                }
            }
            Hypothesis::Vote(members) => {
                let sum: f64 = members.iter().map(|h| h.evaluate(x)).sum();
                if sum >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }

    /// `sign(h(x))` as a ±1 label.
    pub fn classify(&self, x: &[f64]) -> f64 {
        if self.evaluate(x) >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Stable 64-bit digest for paired-run diffing.
    pub fn fingerprint(&self) -> u64 {
        fn feed(h: &Hypothesis, acc: &mut u64) {
            let mix = |acc: &mut u64, v: u64| {
                *acc ^= v;
                *acc = acc.wrapping_mul(0x1000_0000_01b3);
            };
            match h {
                Hypothesis::Direction(w) => {
                    mix(acc, 0xD1);
                    for c in w {
                        mix(acc, c.to_bits());
                    }
                }
                Hypothesis::Vote(members) => {
                    mix(acc, 0x50);
                    for m in members {
                        feed(m, acc);
                    }
                }
            }
        }
        let mut acc: u64 = 0xcbf2_9ce4_8422_2325;
        feed(self, &mut acc);
        acc
    }
}

/// Weak-learner parameters. `a` is the exponent constant (0.05 for foams,
/// 0.1 for boxes by default); `m_override` replaces the worst-case sample
/// size for desk-scale runs.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct WklParams {
    pub rho: f64,
    pub dim: usize,
    pub margin: f64,
    pub a: f64,
    pub m_override: Option<usize>,
}

impl WklParams {
    pub fn new(rho: f64, dim: usize, margin: f64, kind: SchemeKind) -> Result<Self> {
        if !(0.0 < rho && rho < 1.0) {
            return Err(Error::InvalidArgument(format!("rho={rho} not in (0,1)")));
        }
        if !(0.0 < margin && margin < 1.0) {
            return Err(Error::InvalidArgument(format!("margin={margin} not in (0,1)")));
        }
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension 0".into()));
        }
        let a = match kind {
            SchemeKind::Foam => 0.05,
            SchemeKind::Box => 0.1,
        };
        Ok(WklParams { rho, dim, margin, a, m_override: None })
    }

    pub fn with_m_override(mut self, m: usize) -> Self {
        self.m_override = Some(m);
        self
    }

    /// Worst-case sample size: `(896 √d / (τ²ρ))^{1/(1/2-a)}` for foams,
    /// `(64 d^{3/2} / (τ²ρ))^{1/(1/2-a)}` for boxes. Usually astronomically
    /// large; kept for parameter reporting.
    pub fn worst_case_m(&self, kind: SchemeKind) -> f64 {
        let d = self.dim as f64;
        let t2r = self.margin * self.margin * self.rho;
        let base = match kind {
            SchemeKind::Foam => 896.0 * d.sqrt() / t2r,
            SchemeKind::Box => 64.0 * d.powf(1.5) / t2r,
        };
        base.powf(1.0 / (0.5 - self.a))
    }

    /// Scaling factor for the actual sample size `m`: `8√d/(τ²m)` for foams,
    /// `4√d/(τ²m)` for boxes. Pins `‖k·z‖ >= 8√d/τ` (resp. `4√d/τ`), safely
    /// above the rounding displacement.
    pub fn scaling_k(&self, kind: SchemeKind, m: usize) -> f64 {
        let d = self.dim as f64;
        let c = match kind {
            SchemeKind::Foam => 8.0,
            SchemeKind::Box => 4.0,
        };
        c * d.sqrt() / (self.margin * self.margin * m as f64)
    }

    /// The proof's explicit non-reproducibility budget at sample size `m`:
    /// `2 e^{-m^{2a}/2} + C·k·m^{1/2+a}` with `C = 56` for foams and `8d`
    /// for boxes.
    pub fn repro_budget(&self, kind: SchemeKind, m: usize) -> f64 {
        let k = self.scaling_k(kind, m);
        let mf = m as f64;
        let coef = match kind {
            SchemeKind::Foam => 56.0,
            SchemeKind::Box => 8.0 * self.dim as f64,
        };
        2.0 * (-mf.powf(2.0 * self.a) / 2.0).exp() + coef * k * mf.powf(0.5 + self.a)
    }
}

/// Feasibility of the exponent constant: `(coef/ρ)^{2a/(1/2-a)} >= 2 ln(4/ρ)`
/// makes the concentration term fit inside ρ/2 at the worst-case sample size.
pub fn exponent_feasible(coef: f64, a: f64, rho: f64) -> bool {
    (coef / rho).powf(2.0 * a / (0.5 - a)) >= 2.0 * (4.0 / rho).ln()
}

/// Sum of normalized signed examples `Σ x̂ᵢ yᵢ`.
pub fn weighted_vector_sum(sample: &[LabeledExample]) -> Result<Vec<f64>> {
    let first = sample
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty sample".into()))?;
    let mut acc = vec![0.0; first.x.len()];
    for ex in sample {
        let unit = vecmath::normalized(&ex.x)
            .ok_or_else(|| Error::InvalidArgument("zero vector in sample".into()))?;
        for (a, u) in acc.iter_mut().zip(&unit) {
            *a += u * ex.y;
        }
    }
    Ok(acc)
}

/// Empirical advantage `(1/2) · mean(y · h(x))` over `n` fresh draws.
pub fn advantage(
    h: &Hypothesis,
    mut draw: impl FnMut(&mut RandomStream) -> LabeledExample,
    n: usize,
    s: &mut RandomStream,
) -> f64 {
    let mut acc = 0.0;
    for _ in 0..n {
        let ex = draw(s);
        acc += ex.y * h.evaluate(&ex.x);
    }
    0.5 * acc / n as f64
}

/// Exact advantage on a finite labeled source.
pub fn advantage_exact(h: &Hypothesis, source: &FinitePointSource) -> f64 {
    0.5 * source.expect(|ex| ex.y * h.evaluate(&ex.x))
}

/// The reproducible halfspace weak learner: round the scaled weighted vector
/// sum with a freshly constructed scheme and return the resulting direction.
pub fn r_halfspace_wkl(
    sample: &[LabeledExample],
    p: &WklParams,
    kind: SchemeKind,
    s: &mut RandomStream,
) -> Result<Hypothesis> {
    let m = sample.len();
    match p.m_override {
        Some(required) if m < required => {
            return Err(Error::InsufficientSample { required, got: m })
        }
        None if (m as f64) < p.worst_case_m(kind) => {
            return Err(Error::InsufficientSample {
                required: p.worst_case_m(kind).min(usize::MAX as f64) as usize,
                got: m,
            })
        }
        _ => {}
    }
    if sample.iter().any(|ex| ex.x.len() != p.dim) {
        return Err(Error::DimensionMismatch { expected: p.dim, got: sample[0].x.len() });
    }
    let z = weighted_vector_sum(sample)?;
    let k = p.scaling_k(kind, m);
    let scheme = RoundingScheme::construct(kind, p.dim, &mut s.derive("scheme"), FOAM_DEFAULT_MAX_STAGES)?;
    let w = scheme.apply(&vecmath::scale(&z, k))?;
    // Cannot happen at worst-case constants (the input norm exceeds the rounding
    // displacement); under desk-scale overrides it must surface.
    Hypothesis::direction(w)
}

/// Empirical tail estimate for the concentration lemma.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct TailEstimate {
    pub threshold: f64,
    pub exceedances: usize,
    pub trials: usize,
    pub rate: f64,
}

/// Fraction of trials in which `‖Σᵢ vᵢ‖₂` (over `t` centered draws) reaches
/// `threshold`.
pub fn concentration_probe(
    draw_centered: &(impl Fn(&mut RandomStream) -> Vec<f64> + Sync),
    t: usize,
    threshold: f64,
    trials: usize,
    s: &RandomStream,
) -> TailEstimate {
    let exceed: usize = crate::report::map_trials(trials, |i| {
        let mut stream = s.derive(&format!("conc{i}"));
        let mut acc: Option<Vec<f64>> = None;
        for _ in 0..t {
            let v = draw_centered(&mut stream);
            acc = Some(match acc {
                None => v,
                Some(a) => vecmath::add(&a, &v),
            });
        }
        usize::from(vecmath::norm(&acc.unwrap()) >= threshold)
    })
    .into_iter()
    .sum();
    TailEstimate { threshold, exceedances: exceed, trials, rate: exceed as f64 / trials as f64 }
}

/// Azuma tail threshold `√T (1 + c/2) + Δ` from the concentration lemma.
pub fn lemma_threshold(t: usize, c: f64, delta: f64) -> f64 {
    (t as f64).sqrt() * (1.0 + c / 2.0) + delta
}

/// Azuma tail bound `e^{-Δ²/(2c²T)}`.
pub fn azuma_bound(t: usize, c: f64, delta: f64) -> f64 {
    (-delta * delta / (2.0 * c * c * t as f64)).exp()
}

/// Corollary threshold `4 T^{1/2+a}` for centered unit vectors (c = 2).
pub fn corollary_threshold(t: usize, a: f64) -> f64 {
    4.0 * (t as f64).powf(0.5 + a)
}

/// Corollary tail bound `e^{-T^{2a}/2}`.
pub fn corollary_bound(t: usize, a: f64) -> f64 {
    (-(t as f64).powf(2.0 * a) / 2.0).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::MarginHalfspaceSource;

    fn e(dim: usize, i: usize, sign: f64) -> Vec<f64> {
        let mut v = vec![0.0; dim];
        v[i] = sign;
        v
    }

    #[test]
    fn weighted_sum_basics() {
        let s = vec![
            LabeledExample::new(e(2, 0, 1.0), 1.0),
            LabeledExample::new(e(2, 0, -1.0), -1.0),
        ];
        assert_eq!(weighted_vector_sum(&s).unwrap(), vec![2.0, 0.0]);
        let c = vec![
            LabeledExample::new(e(2, 0, 1.0), 1.0),
            LabeledExample::new(e(2, 0, 1.0), -1.0),
        ];
        assert_eq!(weighted_vector_sum(&c).unwrap(), vec![0.0, 0.0]);
        let z = vec![LabeledExample::new(vec![0.0, 0.0], 1.0)];
        assert!(weighted_vector_sum(&z).is_err());
    }

    #[test]
    fn weighted_sum_norm_grows_with_margin() {
        // With margin τ the expected sum points along w with norm >= τm.
        let mut s = RandomStream::new(3).derive("wvs");
        let src = MarginHalfspaceSource::new(3, vec![1.0, 0.0, 0.0], 0.3).unwrap();
        let m = 1000;
        let z = weighted_vector_sum(&src.sample(m, &mut s)).unwrap();
        // Allow sampling slack below the exact expectation bound.
        assert!(vecmath::norm(&z) >= 0.3 * m as f64 * 0.8, "norm {}", vecmath::norm(&z));
    }

    #[test]
    fn perfect_alignment_advantage() {
        let w = vec![0.6, 0.8];
        let h = Hypothesis::direction(w.clone()).unwrap();
        let src = FinitePointSource::new(
            vec![
                LabeledExample::new(w.clone(), 1.0),
                LabeledExample::new(vecmath::scale(&w, -1.0), -1.0),
            ],
            vec![0.5, 0.5],
        )
        .unwrap();
        assert!((advantage_exact(&h, &src) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_advantage_zero() {
        let h = Hypothesis::direction(vec![0.0, 1.0]).unwrap();
        let src = FinitePointSource::new(
            vec![
                LabeledExample::new(vec![1.0, 0.0], 1.0),
                LabeledExample::new(vec![-1.0, 0.0], -1.0),
            ],
            vec![0.5, 0.5],
        )
        .unwrap();
        assert!(advantage_exact(&h, &src).abs() < 1e-12);
    }

    #[test]
    fn expected_vector_advantage_at_least_half_margin() {
        // On the exact eight-point margin-0.5 source the expected weighted
        // vector hypothesis has advantage E|cos|/2 = (0.866+0.5)/4 ≈ 0.3415.
        let src = FinitePointSource::eight_point_margin();
        let z = src.expect(|ex| ex.x[0] * ex.y); // along e1 by symmetry
        assert!(z > 0.0);
        let h = Hypothesis::direction(vec![1.0, 0.0]).unwrap();
        let adv = advantage_exact(&h, &src);
        assert!((adv - (3f64.sqrt() / 2.0 + 0.5) / 4.0).abs() < 1e-12);
        assert!(adv >= 0.5 / 2.0);
    }

    #[test]
    fn one_dim_positive_mass_learner() {
        let sample: Vec<LabeledExample> =
            (0..50).map(|_| LabeledExample::new(vec![1.0], 1.0)).collect();
        let p = WklParams::new(0.2, 1, 0.5, SchemeKind::Box).unwrap().with_m_override(50);
        let h = r_halfspace_wkl(&sample, &p, SchemeKind::Box, &mut RandomStream::new(4)).unwrap();
        assert!(h.evaluate(&[1.0]) > 0.0);
    }

    #[test]
    fn wkl_insufficient_sample_at_paper_scale() {
        let sample: Vec<LabeledExample> =
            (0..10).map(|_| LabeledExample::new(vec![1.0, 0.0], 1.0)).collect();
        let p = WklParams::new(0.2, 2, 0.3, SchemeKind::Box).unwrap();
        assert!(matches!(
            r_halfspace_wkl(&sample, &p, SchemeKind::Box, &mut RandomStream::new(1)),
            Err(Error::InsufficientSample { .. })
        ));
    }

    #[test]
    fn rounding_perturbation_bound_every_run() {
        // ‖w/k - z‖ <= √d/(2k) for boxes, √d/k for foams.
        let s = RandomStream::new(5).derive("pert");
        let src = MarginHalfspaceSource::new(2, vec![0.8, 0.6], 0.3).unwrap();
        for kind in [SchemeKind::Box, SchemeKind::Foam] {
            for i in 0..20 {
                let run = s.derive(&format!("{kind:?}{i}"));
                let sample = src.sample(200, &mut run.derive("data"));
                let p = WklParams::new(0.2, 2, 0.3, kind).unwrap().with_m_override(200);
                let z = weighted_vector_sum(&sample).unwrap();
                let k = p.scaling_k(kind, 200);
                let scheme =
                    RoundingScheme::construct(kind, 2, &mut run.derive("scheme"), 1_000_000)
                        .unwrap();
                let w = scheme.apply(&vecmath::scale(&z, k)).unwrap();
                let dist = vecmath::distance(&vecmath::scale(&w, 1.0 / k), &z);
                let bound = match kind {
                    SchemeKind::Box => 2f64.sqrt() / (2.0 * k),
                    SchemeKind::Foam => 2f64.sqrt() / k,
                };
                assert!(dist <= bound + 1e-9, "{kind:?}: {dist} > {bound}");
            }
        }
    }

    #[test]
    fn perturbed_advantage_loses_at_most_theta() {
        // Grid perturbations u with ‖u‖ = θ < √3/2 lose at most θ advantage.
        let src = FinitePointSource::eight_point_margin();
        let w = vec![1.0, 0.0];
        let gamma = advantage_exact(&Hypothesis::direction(w.clone()).unwrap(), &src);
        for &theta in &[0.1, 0.3, 0.5, 0.8] {
            for step in 0..16 {
                let ang = step as f64 * std::f64::consts::TAU / 16.0;
                let u = vec![theta * ang.cos(), theta * ang.sin()];
                let h = Hypothesis::direction(vecmath::add(&w, &u)).unwrap();
                let adv = advantage_exact(&h, &src);
                assert!(
                    adv >= gamma - theta - 1e-9,
                    "theta={theta} ang={ang}: {adv} < {}",
                    gamma - theta
                );
            }
        }
    }

    #[test]
    fn exponent_constants_feasible_across_rho() {
        // Foam coefficient 896 at a = 0.05; box coefficient 64 at a = 0.1.
        let mut rho = 0.01;
        while rho < 1.0 {
            assert!(exponent_feasible(896.0, 0.05, rho), "foam fails at rho={rho}");
            assert!(exponent_feasible(64.0, 0.1, rho), "box fails at rho={rho}");
            rho += 0.01;
        }
    }

    #[test]
    fn worst_case_m_formula_shape() {
        let p = WklParams::new(0.1, 3, 0.3, SchemeKind::Box).unwrap();
        let direct = (64.0 * 3f64.powf(1.5) / (0.09 * 0.1)).powf(2.5);
        assert!((p.worst_case_m(SchemeKind::Box) / direct - 1.0).abs() < 1e-12);
        let pf = WklParams::new(0.1, 3, 0.3, SchemeKind::Foam).unwrap();
        let direct_f = (896.0 * 3f64.sqrt() / (0.09 * 0.1)).powf(1.0 / 0.45);
        assert!((pf.worst_case_m(SchemeKind::Foam) / direct_f - 1.0).abs() < 1e-12);
    }
}
