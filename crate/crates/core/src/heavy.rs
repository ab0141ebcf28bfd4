//! The reproducible approximate heavy-hitters algorithm.
//!
//! Stage 1 draws `Q1` examples to collect candidates, stage 2 draws `Q2`
//! fresh examples to estimate each candidate's mass, and a random cutoff
//! `v' ∈ [v-ε, v+ε]` (from the shared randomness) filters the candidates.
//! With the prescribed sizes the output is exactly the set of v'-heavy
//! hitters with probability `1 - ρ/2`, so paired runs sharing `v'` agree
//! with probability `1 - ρ`.

use std::collections::{HashMap, HashSet};
use std::hash::Hash;

use crate::error::{Error, Result};
use crate::stream::RandomStream;

/// Parameters for one heavy-hitters call.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct HhParams {
    pub rho: f64,
    pub v: f64,
    pub eps: f64,
}

impl HhParams {
    pub fn new(rho: f64, v: f64, eps: f64) -> Result<Self> {
        let p = HhParams { rho, v, eps };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.rho && self.rho < 1.0) {
            return Err(Error::InvalidArgument(format!("rho={} not in (0,1)", self.rho)));
        }
        if !(0.0 < self.eps && self.eps < 0.5) {
            return Err(Error::InvalidArgument(format!("eps={} not in (0,1/2)", self.eps)));
        }
        if !(self.eps < self.v && self.v < 1.0 - self.eps) {
            return Err(Error::InvalidArgument(format!(
                "v={} not in ({}, {})",
                self.v,
                self.eps,
                1.0 - self.eps
            )));
        }
        Ok(())
    }
}

/// Worst-case sample sizes `(Q1, Q2)`:
/// `Q1 = ⌈2 ln(6/(ρ(v-ε))) / (v-ε)⌉` (candidate stage) and
/// `Q2 = ⌈2⁶ ln(6 Q1/ρ) Q1² / (ρε)²⌉` (estimation stage).
pub fn hh_sample_sizes(p: &HhParams) -> Result<(usize, usize)> {
    p.validate()?;
    let floor_mass = p.v - p.eps;
    let q1 = (2.0 * (6.0 / (p.rho * floor_mass)).ln() / floor_mass).ceil();
    let q2 = (64.0 * (6.0 * q1 / p.rho).ln() * q1 * q1 / (p.rho * p.eps).powi(2)).ceil();
    if !(q1.is_finite() && q2.is_finite()) {
        return Err(Error::InvalidArgument("heavy-hitter sizes overflow".into()));
    }
    Ok((q1 as usize, q2 as usize))
}

/// Reproducible heavy hitters over a draw closure. `draw` produces one
/// i.i.d. example per call (data randomness); `s` carries the algorithm's
/// shared randomness, from which only the cutoff `v'` is drawn. `q1`/`q2`
/// are the stage sizes (worst-case from [`hh_sample_sizes`], or desk-scale
/// overrides).
pub fn r_heavy_hitters<T, E>(
    mut draw: impl FnMut() -> std::result::Result<T, E>,
    q1: usize,
    q2: usize,
    p: &HhParams,
    s: &mut RandomStream,
) -> std::result::Result<HashSet<T>, E>
where
    T: Eq + Hash + Clone,
{
    p.validate().expect("validated params");
    // Step 1: candidate heavy-hitters (deduplicated).
    let mut candidates: HashSet<T> = HashSet::new();
    for _ in 0..q1 {
        candidates.insert(draw()?);
    }
    // Step 2: estimate each candidate's mass on a fresh sample.
    let mut counts: HashMap<T, usize> = candidates.iter().map(|x| (x.clone(), 0)).collect();
    for _ in 0..q2 {
        let x = draw()?;
        if let Some(c) = counts.get_mut(&x) {
            *c += 1;
        }
    }
    // Step 3: random cutoff; keep p̂ >= v' (ties kept).
    let cutoff = p.v - p.eps + s.draw_unit() * (2.0 * p.eps);
    let kept = counts
        .into_iter()
        .filter(|&(_, c)| c as f64 / q2 as f64 >= cutoff)
        .map(|(x, _)| x)
        .collect();
    Ok(kept)
}

/// Convenience wrapper over a [`crate::dist::DiscreteSource`], with
/// worst-case sizes unless overridden.
pub fn r_heavy_hitters_from_source(
    source: &crate::dist::DiscreteSource,
    p: &HhParams,
    sizes_override: Option<(usize, usize)>,
    data: &mut RandomStream,
    s: &mut RandomStream,
) -> Result<HashSet<u64>> {
    let (q1, q2) = match sizes_override {
        Some(sz) => sz,
        None => hh_sample_sizes(p)?,
    };
    let set: HashSet<u64> =
        r_heavy_hitters(|| Ok::<u64, Error>(source.draw(data)), q1, q2, p, s)?;
    Ok(set)
}
