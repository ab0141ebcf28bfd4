//! The reproducible statistical-query oracle and the coin-problem decision
//! procedure built on it.
//!
//! `rstat` estimates `E_D[φ]` by an empirical mean and then snaps the mean
//! to the midpoint of a randomly offset width-α partition of `[0,1]`. Two
//! runs sharing the offset agree whenever their means land in the same
//! region, which happens with probability at least `1 - ρ` at the prescribed
//! sample size.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rounding::IntervalPartition;
use crate::stream::RandomStream;

/// A statistical query: a named function from domain elements to `[0,1]`.
#[derive(Clone)]
pub struct SqQuery<T: ?Sized> {
    pub name: String,
    phi: Arc<dyn Fn(&T) -> f64 + Send + Sync>,
}

impl<T: ?Sized> SqQuery<T> {
    pub fn new(name: &str, phi: impl Fn(&T) -> f64 + Send + Sync + 'static) -> Self {
        SqQuery { name: name.to_string(), phi: Arc::new(phi) }
    }

    #[inline]
    pub fn eval(&self, x: &T) -> f64 {
        let v = (self.phi)(x);
        debug_assert!((0.0..=1.0).contains(&v), "query {} left [0,1]: {v}", self.name);
        v
    }
}

impl<T> std::fmt::Debug for SqQuery<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SqQuery({})", self.name)
    }
}

/// Identity query over bits.
pub fn identity_query() -> SqQuery<u8> {
    SqQuery::new("identity", |b: &u8| *b as f64)
}

/// Parameters of one reproducible statistical query.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct SqParams {
    pub tau: f64,
    pub rho: f64,
    pub delta: f64,
}

impl SqParams {
    pub fn new(tau: f64, rho: f64, delta: f64) -> Result<Self> {
        let p = SqParams { tau, rho, delta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("tau", self.tau), ("rho", self.rho), ("delta", self.delta)] {
            if !(0.0 < v && v < 1.0) {
                return Err(Error::InvalidArgument(format!("{name}={v} not in (0,1)")));
            }
        }
        if self.rho <= 2.0 * self.delta {
            return Err(Error::InvalidArgument(format!(
                "need rho > 2*delta (rho={}, delta={})",
                self.rho, self.delta
            )));
        }
        Ok(())
    }

    /// Region width `α = 2τ / (ρ + 1 - 2δ)`.
    pub fn alpha(&self) -> f64 {
        2.0 * self.tau / (self.rho + 1.0 - 2.0 * self.delta)
    }

    /// Inner tolerance `τ' = τ(ρ - 2δ) / (ρ + 1 - 2δ)` of the empirical mean.
    pub fn tau_prime(&self) -> f64 {
        self.tau * (self.rho - 2.0 * self.delta) / (self.rho + 1.0 - 2.0 * self.delta)
    }
}

/// Sample size for `rstat`: enough that the empirical mean is within `τ'`
/// of truth except with probability δ. This is
/// `⌈max(3/(2τ²(ρ-2δ)²), 1/(2τ'²)) · ln(2/δ)⌉`; the first argument of the
/// max is the usual closed form and dominates whenever `ρ - 2δ ≤ √3 - 1`.
pub fn rstat_sample_size(p: &SqParams) -> Result<usize> {
    p.validate()?;
    let gap = p.rho - 2.0 * p.delta;
    let ln_term = (2.0 / p.delta).ln();
    let closed_form = 3.0 * ln_term / (2.0 * p.tau * p.tau * gap * gap);
    let exact = ln_term / (2.0 * p.tau_prime() * p.tau_prime());
    Ok(closed_form.max(exact).ceil() as usize)
}

/// One reproducible statistical query over `sample`, drawing the partition
/// offset from `s`. Errors if the sample is smaller than
/// [`rstat_sample_size`].
pub fn rstat<T>(
    query: &SqQuery<T>,
    sample: &[T],
    params: &SqParams,
    s: &mut RandomStream,
) -> Result<f64> {
    let required = rstat_sample_size(params)?;
    if sample.len() < required {
        return Err(Error::InsufficientSample { required, got: sample.len() });
    }
    Ok(rstat_unchecked(query, sample, params, s))
}

/// Same computation as [`rstat`] without the sample-size gate. Used by
/// desk-scale experiments and sweeps that deliberately run below the
/// worst-case bound.
pub fn rstat_unchecked<T>(
    query: &SqQuery<T>,
    sample: &[T],
    params: &SqParams,
    s: &mut RandomStream,
) -> f64 {
    let alpha = params.alpha();
    // Offset drawn from the closed interval [0, α]; the measure-zero
    // endpoint is folded into the half-open draw.
    let offset = s.draw_unit() * alpha;
    let partition = IntervalPartition::new(alpha.min(1.0), offset.min(alpha.min(1.0)))
        .expect("validated params give a legal partition");
    let mean = if sample.is_empty() {
        0.0
    } else {
        sample.iter().map(|x| query.eval(x)).sum::<f64>() / sample.len() as f64
    };
    // Empirical means can exit [0,1] only by floating error.
    partition.round(mean.clamp(0.0, 1.0))
}

/// The two sides of the coin problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum CoinSide {
    Minus,
    Plus,
}

/// Decide whether a coin promised to have bias `1/2 ± τ` is the plus or the
/// minus coin: plus iff the reproducible identity query answers `>= 1/2`.
pub fn solve_coin(sample: &[u8], params: &SqParams, s: &mut RandomStream) -> Result<CoinSide> {
    let v = rstat(&identity_query(), sample, params, s)?;
    Ok(if v >= 0.5 { CoinSide::Plus } else { CoinSide::Minus })
}

/// [`solve_coin`] without the sample-size gate (for scaling sweeps that vary
/// the sample size below the prescribed bound).
pub fn solve_coin_unchecked(sample: &[u8], params: &SqParams, s: &mut RandomStream) -> CoinSide {
    let v = rstat_unchecked(&identity_query(), sample, params, s);
    if v >= 0.5 {
        CoinSide::Plus
    } else {
        CoinSide::Minus
    }
}
