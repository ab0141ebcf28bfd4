//! Randomized rounding schemes: random-offset intervals on `[0,1]`, randomly
//! shifted boxes on ℝ^d, and the lazily constructed foam tessellation of ℝ^d.
//!
//! All region boundaries are half-open `[lo, hi)`; ties resolve toward the
//! upper region.

use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::stream::RandomStream;

/// Partition of `[0,1]` into width-α regions with a random offset:
/// `[0, off), [off, off+α), ..., [off+kα, 1)`.
#[derive(Clone, Debug)]
pub struct IntervalPartition {
    alpha: f64,
    offset: f64,
}

impl IntervalPartition {
    pub fn new(alpha: f64, offset: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidArgument(format!("region width {alpha} not in (0,1]")));
        }
        if !(0.0..=alpha).contains(&offset) {
            return Err(Error::InvalidArgument(format!("offset {offset} not in [0,{alpha}]")));
        }
        Ok(IntervalPartition { alpha, offset })
    }

    /// Partition with `offset` drawn uniformly from `[0, α]`.
    pub fn with_random_offset(alpha: f64, s: &mut RandomStream) -> Result<Self> {
        let offset = s.draw_uniform(0.0, alpha)?;
        IntervalPartition::new(alpha, offset)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// `[lo, hi)` of the region containing `v` (clamped into `[0,1]`).
    pub fn region_of(&self, v: f64) -> (f64, f64) {
        let v = v.clamp(0.0, 1.0);
        if v < self.offset {
            return (0.0, self.offset);
        }
        let mut i = ((v - self.offset) / self.alpha).floor();
        // v == 1 (or float edge) can land on a region starting at/after 1;
        // step back to the last region [off + kα, 1).
        while self.offset + i * self.alpha >= 1.0 && i > 0.0 {
            i -= 1.0;
        }
        let lo = self.offset + i * self.alpha;
        let hi = (lo + self.alpha).min(1.0);
        (lo, hi)
    }

    /// Midpoint of the region containing `v`. Values outside `[0,1]` (which
    /// can arise only from floating error in empirical means) are clamped
    /// with a warning.
    pub fn round(&self, v: f64) -> f64 {
        if !(0.0..=1.0).contains(&v) {
            log::warn!("round_interval: clamping out-of-range value {v}");
        }
        let (lo, hi) = self.region_of(v);
        0.5 * (lo + hi)
    }
}

/// Which d-dimensional rounding construction to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SchemeKind {
    Foam,
    Box,
}

impl std::str::FromStr for SchemeKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "foam" => Ok(SchemeKind::Foam),
            "box" => Ok(SchemeKind::Box),
            other => Err(Error::InvalidArgument(format!("unknown scheme {other:?}"))),
        }
    }
}

/// Randomly shifted axis-aligned boxes: the box around `Z + m` covers
/// `[m_i - 1/2 + z_i, m_i + 1/2 + z_i)` per coordinate and every point in it
/// maps to `Z + m`. Displacement is at most `√d / 2`.
#[derive(Clone, Debug)]
pub struct BoxScheme {
    shift: Vec<f64>,
}

impl BoxScheme {
    pub fn construct(dim: usize, s: &mut RandomStream) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension 0".into()));
        }
        let shift = (0..dim).map(|_| s.draw_unit()).collect();
        Ok(BoxScheme { shift })
    }

    pub fn with_shift(shift: Vec<f64>) -> Result<Self> {
        if shift.is_empty() || shift.iter().any(|z| !(0.0..1.0).contains(z)) {
            return Err(Error::InvalidArgument("shift must lie in [0,1)^d".into()));
        }
        Ok(BoxScheme { shift })
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.shift.len() {
            return Err(Error::DimensionMismatch { expected: self.shift.len(), got: x.len() });
        }
        Ok(x.iter()
            .zip(&self.shift)
            .map(|(xi, zi)| zi + (xi - zi + 0.5).floor())
            .collect())
    }
}

#[derive(Clone, Debug)]
struct FoamStage {
    shift: Vec<f64>,
    threshold: f64,
}

/// The foam construction: at stage t, draw `Z_t ∈ [0,1)^d` and
/// `H_t ∈ (0, 2^d]`, and assign every still-unassigned point x with
/// `f(frac(x + Z_t)) > H_t` to the lattice point `floor(x + Z_t)`, where
/// `f(u) = ∏ 2 sin²(π u_i)`.
///
/// Stages are generated lazily from the scheme's own stream and memoized, so
/// repeated queries are deterministic and every query sees the same stage
/// sequence. Membership scanning stops at `max_stages`.
#[derive(Debug)]
pub struct FoamScheme {
    dim: usize,
    max_stages: usize,
    inner: Mutex<FoamInner>,
}

#[derive(Debug)]
struct FoamInner {
    stream: RandomStream,
    stages: Vec<FoamStage>,
}

pub const FOAM_DEFAULT_MAX_STAGES: usize = 1_000_000;

fn foam_density(u: &[f64]) -> f64 {
    u.iter().map(|&ui| 2.0 * (std::f64::consts::PI * ui).sin().powi(2)).product()
}

impl FoamScheme {
    pub fn construct(dim: usize, s: &mut RandomStream, max_stages: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension 0".into()));
        }
        Ok(FoamScheme {
            dim,
            max_stages,
            inner: Mutex::new(FoamInner { stream: s.derive("foam-stages"), stages: Vec::new() }),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Stages generated so far.
    pub fn stages_generated(&self) -> usize {
        self.inner.lock().unwrap().stages.len()
    }

    /// Round `x` to its integer lattice point. Scans stages in order; the
    /// first stage whose droplet contains `x` wins.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        let mut inner = self.inner.lock().unwrap();
        let mut t = 0;
        loop {
            if t >= inner.stages.len() {
                if t >= self.max_stages {
                    return Err(Error::ConstructionBudget { budget: self.max_stages });
                }
                let shift: Vec<f64> = (0..self.dim).map(|_| inner.stream.draw_unit()).collect();
                // 1 - u maps [0,1) onto (0, 2^d]; the open lower end matters
                // because f vanishes on the cell boundary.
                let threshold = (1.0 - inner.stream.draw_unit()) * (1u64 << self.dim) as f64;
                inner.stages.push(FoamStage { shift, threshold });
            }
            let stage = &inner.stages[t];
            let mut frac = Vec::with_capacity(self.dim);
            let mut cell = Vec::with_capacity(self.dim);
            for (xi, zi) in x.iter().zip(&stage.shift) {
                let u = xi + zi;
                let fl = u.floor();
                cell.push(fl);
                frac.push(u - fl);
            }
            if foam_density(&frac) > stage.threshold {
                return Ok(cell);
            }
            t += 1;
        }
    }
}

/// A constructed d-dimensional rounding scheme.
#[derive(Debug)]
pub enum RoundingScheme {
    Box(BoxScheme),
    Foam(FoamScheme),
}

impl RoundingScheme {
    pub fn construct(
        kind: SchemeKind,
        dim: usize,
        s: &mut RandomStream,
        max_stages: usize,
    ) -> Result<Self> {
        match kind {
            SchemeKind::Box => Ok(RoundingScheme::Box(BoxScheme::construct(dim, s)?)),
            SchemeKind::Foam => Ok(RoundingScheme::Foam(FoamScheme::construct(dim, s, max_stages)?)),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            RoundingScheme::Box(b) => b.dim(),
            RoundingScheme::Foam(f) => f.dim(),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            RoundingScheme::Box(b) => b.apply(x),
            RoundingScheme::Foam(f) => f.apply(x),
        }
    }

    /// Worst-case displacement `‖R(x) - x‖₂` for this kind: `√d/2` for boxes,
    /// `√d` for foams.
    pub fn max_displacement(&self) -> f64 {
        let d = self.dim() as f64;
        match self {
            RoundingScheme::Box(_) => d.sqrt() / 2.0,
            RoundingScheme::Foam(_) => d.sqrt(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_hand_trace() {
        // Boundaries at 0.05, 0.25, 0.45, 0.65, 0.85; 0.5 sits in [0.45, 0.65).
        let p = IntervalPartition::new(0.2, 0.05).unwrap();
        assert!((p.round(0.5) - 0.55).abs() < 1e-12);
    }

    #[test]
    fn interval_zero_offset_first_region() {
        let p = IntervalPartition::new(0.2, 0.0).unwrap();
        assert!((p.round(0.0) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn interval_midpoint_is_fixed_point() {
        let p = IntervalPartition::new(0.2, 0.05).unwrap();
        let m = p.round(0.3);
        assert_eq!(p.round(m), m);
    }

    #[test]
    fn interval_handles_endpoint_one() {
        let p = IntervalPartition::new(0.25, 0.1).unwrap();
        // last region is [0.85, 1)
        assert!((p.round(1.0) - 0.925).abs() < 1e-12);
        let q = IntervalPartition::new(0.5, 0.0).unwrap();
        assert!((q.round(1.0) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn interval_same_region_same_output() {
        let p = IntervalPartition::new(0.2, 0.05).unwrap();
        assert_eq!(p.round(0.46), p.round(0.64));
        assert_ne!(p.round(0.44), p.round(0.46));
    }

    #[test]
    fn box_hand_trace_d1() {
        let b = BoxScheme::with_shift(vec![0.3]).unwrap();
        assert!((b.apply(&[0.5]).unwrap()[0] - 0.3).abs() < 1e-12);
        assert!((b.apply(&[0.9]).unwrap()[0] - 1.3).abs() < 1e-12);
    }

    #[test]
    fn box_center_maps_to_itself() {
        let b = BoxScheme::with_shift(vec![0.3, 0.7, 0.1]).unwrap();
        let out = b.apply(&[0.3, 0.7, 0.1]).unwrap();
        assert_eq!(out, vec![0.3, 0.7, 0.1]);
    }

    #[test]
    fn box_displacement_bound() {
        let mut s = RandomStream::new(21);
        let b = BoxScheme::construct(3, &mut s).unwrap();
        for _ in 0..1000 {
            let x: Vec<f64> = (0..3).map(|_| s.draw_uniform(-5.0, 5.0).unwrap()).collect();
            let r = b.apply(&x).unwrap();
            let d2: f64 = x.iter().zip(&r).map(|(a, b)| (a - b) * (a - b)).sum();
            assert!(d2.sqrt() <= 3f64.sqrt() / 2.0 + 1e-12);
        }
    }

    #[test]
    fn box_dimension_mismatch() {
        let b = BoxScheme::with_shift(vec![0.3]).unwrap();
        assert!(b.apply(&[0.1, 0.2]).is_err());
    }

    #[test]
    fn foam_assigns_and_is_deterministic() {
        let mut s = RandomStream::new(33);
        let f = FoamScheme::construct(2, &mut s, FOAM_DEFAULT_MAX_STAGES).unwrap();
        let x = [0.37, -1.2];
        let a = f.apply(&x).unwrap();
        let b = f.apply(&x).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|v| v.fract() == 0.0), "foam output must be a lattice point");
    }

    #[test]
    fn foam_displacement_below_one_per_coordinate() {
        let mut s = RandomStream::new(34);
        let f = FoamScheme::construct(1, &mut s, FOAM_DEFAULT_MAX_STAGES).unwrap();
        for _ in 0..500 {
            let x = s.draw_uniform(-3.0, 3.0).unwrap();
            let r = f.apply(&[x]).unwrap()[0];
            assert!((r - x).abs() < 1.0, "x={x} r={r}");
        }
    }

    #[test]
    fn foam_budget_error() {
        let mut s = RandomStream::new(35);
        let f = FoamScheme::construct(2, &mut s, 0).unwrap();
        assert!(matches!(f.apply(&[0.1, 0.2]), Err(Error::ConstructionBudget { .. })));
    }
}
