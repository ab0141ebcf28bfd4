//! Distribution sources for the experiments: biased coins, finite discrete
//! distributions over d-bit strings, and labeled margin-τ halfspace data on
//! the unit sphere.
//!
//! Sources are immutable and sampling is pure given a stream, so they are
//! safe to share across trial workers.

use std::path::Path;

use crate::error::{Error, Result};
use crate::stream::RandomStream;
use crate::vecmath;

/// One labeled example `(x, y)` with `y ∈ {-1, +1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledExample {
    pub x: Vec<f64>,
    pub y: f64,
}

impl LabeledExample {
    pub fn new(x: Vec<f64>, y: f64) -> Self {
        debug_assert!(y == 1.0 || y == -1.0, "label must be ±1");
        debug_assert!(x.iter().all(|v| v.is_finite()));
        LabeledExample { x, y }
    }
}

pub type LabeledSample = Vec<LabeledExample>;

/// A Bernoulli source over `{0, 1}`.
#[derive(Clone, Debug)]
pub struct CoinSource {
    p: f64,
}

impl CoinSource {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!("coin bias {p} not in [0,1]")));
        }
        Ok(CoinSource { p })
    }

    pub fn bias(&self) -> f64 {
        self.p
    }

    pub fn draw(&self, s: &mut RandomStream) -> u8 {
        u8::from(s.draw_bernoulli(self.p))
    }

    pub fn sample(&self, n: usize, s: &mut RandomStream) -> Vec<u8> {
        (0..n).map(|_| self.draw(s)).collect()
    }

    /// Exact pmf `{0: 1-p, 1: p}`.
    pub fn exact_pmf(&self) -> Vec<f64> {
        vec![1.0 - self.p, self.p]
    }
}

/// A finite discrete distribution over `{0, .., 2^bits - 1}`, indexed as
/// d-bit strings in numeric (lexicographic) order.
#[derive(Clone, Debug)]
pub struct DiscreteSource {
    bits: u32,
    pmf: Vec<f64>,
    cdf: Vec<f64>,
}

impl DiscreteSource {
    /// Build from a dense pmf of length `2^bits`. The pmf must sum to 1
    /// within 1e-12.
    pub fn new(bits: u32, pmf: Vec<f64>) -> Result<Self> {
        if bits == 0 || bits > 48 {
            return Err(Error::InvalidArgument(format!("domain bits {bits} out of range")));
        }
        let domain = 1usize << bits;
        if pmf.len() != domain {
            return Err(Error::InvalidArgument(format!(
                "pmf has {} entries, domain size is {domain}",
                pmf.len()
            )));
        }
        if pmf.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::InvalidArgument("pmf entry outside [0,1]".into()));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("pmf sums to {total}, not 1")));
        }
        let mut cdf = Vec::with_capacity(domain);
        let mut acc = 0.0;
        for &p in &pmf {
            acc += p;
            cdf.push(acc);
        }
        Ok(DiscreteSource { bits, pmf, cdf })
    }

    /// Build from sparse `(index, probability)` pairs; unlisted indices get 0.
    pub fn from_pairs(bits: u32, pairs: &[(u64, f64)]) -> Result<Self> {
        let domain = 1usize << bits;
        let mut pmf = vec![0.0; domain];
        for &(idx, p) in pairs {
            if idx as usize >= domain {
                return Err(Error::InvalidArgument(format!(
                    "index {idx} outside 2^{bits} domain"
                )));
            }
            pmf[idx as usize] += p;
        }
        DiscreteSource::new(bits, pmf)
    }

    /// Parse a two-column `index,probability` CSV. Lines starting with `#`
    /// are ignored; a non-numeric first line is treated as a header.
    pub fn from_csv(bits: u32, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut pairs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split(',').map(str::trim);
            let (a, b) = match (fields.next(), fields.next()) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err(Error::Parse(format!("line {}: need 2 columns", lineno + 1))),
            };
            match (a.parse::<u64>(), b.parse::<f64>()) {
                (Ok(idx), Ok(p)) => pairs.push((idx, p)),
                _ if lineno == 0 => continue, // header
                _ => return Err(Error::Parse(format!("line {}: bad number", lineno + 1))),
            }
        }
        DiscreteSource::from_pairs(bits, &pairs)
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn domain_size(&self) -> usize {
        self.pmf.len()
    }

    pub fn exact_pmf(&self) -> &[f64] {
        &self.pmf
    }

    /// Exact `Pr[X <= x]`.
    pub fn cdf(&self, x: u64) -> f64 {
        self.cdf[(x as usize).min(self.cdf.len() - 1)]
    }

    /// Exact `Pr[X >= x]`.
    pub fn upper_cdf(&self, x: u64) -> f64 {
        let x = x as usize;
        if x == 0 {
            1.0
        } else {
            1.0 - self.cdf[x - 1]
        }
    }

    pub fn draw(&self, s: &mut RandomStream) -> u64 {
        let u = s.draw_unit();
        self.cdf.partition_point(|&c| c <= u) as u64
    }

    pub fn sample(&self, n: usize, s: &mut RandomStream) -> Vec<u64> {
        (0..n).map(|_| self.draw(s)).collect()
    }

    pub fn uniform(bits: u32) -> Result<Self> {
        let domain = 1usize << bits;
        DiscreteSource::new(bits, vec![1.0 / domain as f64; domain])
    }
}

/// Labeled halfspace data with a worst-case margin: every emitted `(x, y)`
/// satisfies `(x̂ · ŵ) y >= τ` and `‖x‖ <= 1`, with `y = sign(ŵ · x)`.
///
/// Generator policy: draw `x̂` uniform on the sphere, reject while
/// `|x̂ · ŵ| < τ`.
#[derive(Clone, Debug)]
pub struct MarginHalfspaceSource {
    dim: usize,
    direction: Vec<f64>,
    margin: f64,
}

impl MarginHalfspaceSource {
    pub fn new(dim: usize, direction: Vec<f64>, margin: f64) -> Result<Self> {
        if dim == 0 || direction.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: direction.len() });
        }
        if !(0.0 < margin && margin < 1.0) {
            return Err(Error::InvalidArgument(format!("margin {margin} not in (0,1)")));
        }
        let direction = vecmath::normalized(&direction)
            .ok_or_else(|| Error::InvalidArgument("zero direction".into()))?;
        Ok(MarginHalfspaceSource { dim, direction, margin })
    }

    /// Source with a hidden direction drawn from `s` (recorded for oracle
    /// checks via [`Self::direction`]).
    pub fn with_random_direction(dim: usize, margin: f64, s: &mut RandomStream) -> Result<Self> {
        let w = loop {
            let cand: Vec<f64> = (0..dim).map(|_| s.draw_standard_normal()).collect();
            if let Some(u) = vecmath::normalized(&cand) {
                break u;
            }
        };
        MarginHalfspaceSource::new(dim, w, margin)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    /// The hidden true direction ŵ.
    pub fn direction(&self) -> &[f64] {
        &self.direction
    }

    pub fn draw(&self, s: &mut RandomStream) -> LabeledExample {
        loop {
            let cand: Vec<f64> = (0..self.dim).map(|_| s.draw_standard_normal()).collect();
            let Some(x) = vecmath::normalized(&cand) else { continue };
            let proj = vecmath::dot(&x, &self.direction);
            if proj.abs() >= self.margin {
                return LabeledExample::new(x, proj.signum());
            }
        }
    }

    pub fn sample(&self, n: usize, s: &mut RandomStream) -> LabeledSample {
        (0..n).map(|_| self.draw(s)).collect()
    }
}

/// An exact finite labeled distribution: a list of labeled points with
/// probabilities. Used where invariants are checked against exact values
/// (advantage, boosting densities).
#[derive(Clone, Debug)]
pub struct FinitePointSource {
    points: Vec<LabeledExample>,
    pmf: Vec<f64>,
    cdf: Vec<f64>,
}

impl FinitePointSource {
    pub fn new(points: Vec<LabeledExample>, pmf: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != pmf.len() {
            return Err(Error::InvalidArgument("points/pmf length mismatch".into()));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("pmf sums to {total}, not 1")));
        }
        let mut cdf = Vec::with_capacity(pmf.len());
        let mut acc = 0.0;
        for &p in &pmf {
            acc += p;
            cdf.push(acc);
        }
        Ok(FinitePointSource { points, pmf, cdf })
    }

    /// Uniform distribution over the given points.
    pub fn uniform(points: Vec<LabeledExample>) -> Result<Self> {
        let n = points.len();
        let pmf = vec![1.0 / n as f64; n];
        FinitePointSource::new(points, pmf)
    }

    /// Eight unit vectors at d=2 with margin exactly `min(|cos|) = 0.5`
    /// around direction `(1, 0)`; labels are `sign(x·w)`. A stock exact
    /// source for weak-learner and boosting checks (margin >= 0.3).
    pub fn eight_point_margin() -> Self {
        let angles: [f64; 8] = [30.0, -30.0, 60.0, -60.0, 120.0, -120.0, 150.0, -150.0];
        let points = angles
            .iter()
            .map(|deg| {
                let t = deg.to_radians();
                LabeledExample::new(vec![t.cos(), t.sin()], t.cos().signum())
            })
            .collect();
        FinitePointSource::uniform(points).expect("static source is valid")
    }

    pub fn points(&self) -> &[LabeledExample] {
        &self.points
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn dim(&self) -> usize {
        self.points[0].x.len()
    }

    /// Exact expectation of `g(x, y)` under the source.
    pub fn expect(&self, mut g: impl FnMut(&LabeledExample) -> f64) -> f64 {
        self.points.iter().zip(&self.pmf).map(|(pt, &p)| p * g(pt)).sum()
    }

    pub fn draw(&self, s: &mut RandomStream) -> LabeledExample {
        let u = s.draw_unit();
        let i = self.cdf.partition_point(|&c| c <= u).min(self.points.len() - 1);
        self.points[i].clone()
    }

    pub fn sample(&self, n: usize, s: &mut RandomStream) -> LabeledSample {
        (0..n).map(|_| self.draw(s)).collect()
    }
}
