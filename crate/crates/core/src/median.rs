//! Reproducible approximate median over d-bit domains.
//!
//! The recursion follows the prefix-tree strategy: batch the raw sample into
//! simple (non-reproducible) medians, recurse on the longest-common-prefix
//! lengths of median pairs to pick a tree level ℓ, find the heavy level-ℓ
//! prefixes reproducibly, scan them with reproducible statistical queries
//! for one with mass in [1/3, 2/3], and decide between the all-zeros and
//! all-ones paddings of that prefix with one final query.
//!
//! Domain elements are `u64` values of `bits` bits, compared numerically
//! (lexicographic order on bit strings).

use crate::error::{Error, Result};
use crate::heavy::{hh_sample_sizes, r_heavy_hitters, HhParams};
use crate::sq::{rstat_sample_size, rstat_unchecked, SqParams, SqQuery};
use crate::stream::RandomStream;

/// Iterated base-2 logarithm: the number of times `log2` must be applied to
/// reach a value `<= 1`. `log_star(x) = 0` for `x <= 1`.
pub fn log_star(x: f64) -> u32 {
    let mut x = x;
    let mut count = 0;
    while x > 1.0 {
        x = x.log2();
        count += 1;
    }
    count
}

/// The `⌈n/2⌉`-th order statistic of a non-empty sample.
pub fn simple_median<T: Ord + Clone>(sample: &[T]) -> Result<T> {
    if sample.is_empty() {
        return Err(Error::InvalidArgument("simple_median of empty sample".into()));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_unstable();
    Ok(sorted[sample.len().div_ceil(2) - 1].clone())
}

/// Sample size for which the simple median is a τ-approximate median with
/// probability `1 - δ`: `⌈3 (1/2 - τ) ln(2/δ) / τ²⌉`.
pub fn simple_median_sample_size(tau: f64, delta: f64) -> usize {
    (3.0 * (0.5 - tau) * (2.0 / delta).ln() / (tau * tau)).ceil().max(1.0) as usize
}

/// Length of the longest common prefix of two `bits`-bit strings.
pub fn longest_common_prefix(x: u64, y: u64, bits: u32) -> Result<u32> {
    if bits == 0 || bits > 64 {
        return Err(Error::InvalidArgument(format!("bits={bits} out of range")));
    }
    debug_assert!(bits == 64 || (x >> bits == 0 && y >> bits == 0), "values wider than domain");
    Ok(((x ^ y) << (64 - bits)).leading_zeros().min(bits))
}

/// τ-approximate-median check against an exact CDF: both one-sided masses
/// `Pr[x' <= x]` and `Pr[x' >= x]` must be at least `1/2 - τ` (equivalently,
/// the CDF position interval of `x` intersects `[1/2 - τ, 1/2 + τ]`).
pub fn is_approximate_median(source: &crate::dist::DiscreteSource, x: u64, tau: f64) -> bool {
    source.cdf(x) >= 0.5 - tau && source.upper_cdf(x) >= 0.5 - tau
}

/// Per-subroutine sample sizes used at every recursion level.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct MedianSizes {
    /// Simple-median subsample size.
    pub n_m: usize,
    /// Heavy-hitters candidate stage.
    pub q1: usize,
    /// Heavy-hitters estimation stage.
    pub q2: usize,
    /// Statistical-query sample size (scan and final queries).
    pub n_sq: usize,
}

/// How subroutine sample sizes are chosen.
#[derive(Clone, Copy, Debug)]
pub enum SizeMode {
    /// Worst-case analytical sizes. Astronomical for most settings.
    WorstCase,
    /// Every worst-case size multiplied by this factor (1.0 = exact),
    /// floored at 4.
    Scaled(f64),
    /// Fixed per-subroutine sizes, reused at every level.
    Explicit(MedianSizes),
}

#[derive(Clone, Copy, Debug)]
pub struct MedianParams {
    pub rho: f64,
    pub bits: u32,
    pub tau: f64,
    pub delta: f64,
    pub sizes: SizeMode,
}

impl MedianParams {
    pub fn new(rho: f64, bits: u32, tau: f64, delta: f64, sizes: SizeMode) -> Result<Self> {
        if !(0.0 < rho && rho < 1.0) {
            return Err(Error::InvalidArgument(format!("rho={rho} not in (0,1)")));
        }
        if !(0.0 < tau && tau < 0.5) {
            return Err(Error::InvalidArgument(format!("tau={tau} not in (0,1/2)")));
        }
        if !(0.0 < delta && delta < 1.0) {
            return Err(Error::InvalidArgument(format!("delta={delta} not in (0,1)")));
        }
        if bits == 0 || bits > 48 {
            return Err(Error::InvalidArgument(format!("bits={bits} out of range")));
        }
        Ok(MedianParams { rho, bits, tau, delta, sizes })
    }

    /// `ρ₀ = ρ / (6 log*|X|)`, fixed at the top level and shared by every
    /// subroutine in the recursion.
    pub fn rho0(&self) -> f64 {
        self.rho / (6.0 * log_star((1u64 << self.bits) as f64) as f64)
    }

    fn sq_params(&self, tau: f64) -> SqParams {
        let rho0 = self.rho0();
        // The analysis leaves the per-query failure share implicit; δ = ρ₀/4
        // keeps ρ₀ - 2δ = ρ₀/2.
        SqParams { tau, rho: rho0, delta: rho0 / 4.0 }
    }
}

/// The resolved plan for one recursion level.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct LevelPlan {
    pub bits: u32,
    pub sizes: MedianSizes,
    /// Medians produced at this level (pairs + heavy hitters + 4 queries).
    pub m_len: usize,
    /// Raw examples this level consumes.
    pub total: usize,
}

fn scale_size(worst_case: f64, mode: &SizeMode) -> usize {
    match mode {
        SizeMode::WorstCase => worst_case.ceil() as usize,
        SizeMode::Scaled(c) => (worst_case * c).ceil().max(4.0) as usize,
        SizeMode::Explicit(_) => unreachable!("explicit sizes bypass scaling"),
    }
}

/// Resolve per-level sample sizes, top level first.
pub fn median_plan(p: &MedianParams) -> Result<Vec<LevelPlan>> {
    let mut chain = Vec::new();
    let mut b = p.bits;
    while b > 1 {
        chain.push(b);
        b = (b as f64).log2().ceil() as u32;
    }
    chain.push(1);

    let log_star_top = log_star((1u64 << p.bits) as f64).max(1) as f64;
    let hh = HhParams::new(p.rho0(), 5.0 / 12.0, 1.0 / 12.0)?;

    // Base case: one statistical query at tolerance τ/2.
    let base_n_sq = match &p.sizes {
        SizeMode::Explicit(sz) => sz.n_sq,
        mode => scale_size(rstat_sample_size(&p.sq_params(p.tau / 2.0))? as f64, mode),
    };
    let mut plans = vec![LevelPlan {
        bits: 1,
        sizes: MedianSizes { n_m: 0, q1: 0, q2: 0, n_sq: base_n_sq },
        m_len: 0,
        total: base_n_sq,
    }];

    for &bits in chain.iter().rev().skip(1) {
        let child_total = plans.last().unwrap().total;
        let (q1, q2, n_sq) = match &p.sizes {
            SizeMode::Explicit(sz) => (sz.q1, sz.q2, sz.n_sq),
            mode => {
                let (pq1, pq2) = hh_sample_sizes(&hh)?;
                (
                    scale_size(pq1 as f64, mode),
                    scale_size(pq2 as f64, mode),
                    scale_size(rstat_sample_size(&p.sq_params(p.tau))? as f64, mode),
                )
            }
        };
        // The vertex search may have to descend through up to `bits` levels
        // when one vertex carries more than 2/3 of the mass (concentrated
        // median-of-medians distributions); reserve a heavy-hitters call and
        // three scan queries per level, plus the final padding query.
        let m_len = 2 * child_total + bits as usize * (q1 + q2 + 3 * n_sq) + n_sq;
        let n_m = match &p.sizes {
            SizeMode::Explicit(sz) => sz.n_m,
            mode => {
                let delta0 = p.delta / (4.0 * m_len as f64 * log_star_top);
                scale_size(simple_median_sample_size(p.tau, delta0) as f64, mode)
            }
        };
        let total = n_m
            .checked_mul(m_len)
            .ok_or_else(|| Error::InvalidArgument("median sample size overflows".into()))?;
        plans.push(LevelPlan { bits, sizes: MedianSizes { n_m, q1, q2, n_sq }, m_len, total });
    }
    plans.reverse();
    Ok(plans)
}

/// Raw examples required at the top level.
pub fn median_sample_size(p: &MedianParams) -> Result<usize> {
    Ok(median_plan(p)?[0].total)
}

/// Diagnostics from one run.
#[derive(Clone, Debug, serde::Serialize)]
pub struct MedianTrace {
    pub value: u64,
    /// Number of recursive calls below the top level.
    pub depth: usize,
    /// Level chosen at the top (after the floor-at-1 adjustment).
    pub prefix_len: u32,
    /// The two padded candidates of the top level; `value` is one of them.
    pub s0: u64,
    pub s1: u64,
    pub chose_s0: bool,
}

struct Carver<'a> {
    data: &'a [u64],
    pos: usize,
}

impl<'a> Carver<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u64]> {
        if self.pos + n > self.data.len() {
            return Err(Error::InsufficientSample { required: self.pos + n, got: self.data.len() });
        }
        let out = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }
}

fn run_level(
    sample: &[u64],
    plans: &[LevelPlan],
    p: &MedianParams,
    s: &RandomStream,
    level: usize,
) -> Result<MedianTrace> {
    let plan = &plans[level];
    let bits = plan.bits;
    let label = |what: &str| format!("L{level}.{what}");

    if bits == 1 {
        if sample.len() < plan.total {
            return Err(Error::InsufficientSample { required: plan.total, got: sample.len() });
        }
        let q = SqQuery::new("phi0", |x: &u64| if *x == 0 { 1.0 } else { 0.0 });
        let p0 = rstat_unchecked(
            &q,
            sample,
            &p.sq_params(p.tau / 2.0),
            &mut s.derive(&label("base")),
        );
        let value = if p0 >= 0.5 - p.tau / 2.0 { 0 } else { 1 };
        return Ok(MedianTrace { value, depth: 0, prefix_len: 1, s0: 0, s1: 1, chose_s0: value == 0 });
    }

    if sample.len() < plan.total {
        return Err(Error::InsufficientSample { required: plan.total, got: sample.len() });
    }
    let sizes = plan.sizes;

    // Batch the raw sample into simple medians.
    let mut medians = Vec::with_capacity(plan.m_len);
    for j in 0..plan.m_len {
        medians.push(simple_median(&sample[j * sizes.n_m..(j + 1) * sizes.n_m])?);
    }
    let mut carver = Carver { data: &medians, pos: 0 };

    // Pair medians into longest-common-prefix lengths and recurse.
    let child = &plans[level + 1];
    let child_max = (1u64 << child.bits) - 1;
    let pairs = carver.take(2 * child.total)?;
    let lcp_sample: Vec<u64> = (0..child.total)
        .map(|i| {
            longest_common_prefix(pairs[2 * i], pairs[2 * i + 1], bits)
                .map(|l| (l as u64).min(child_max))
        })
        .collect::<Result<_>>()?;
    let inner = run_level(&lcp_sample, plans, p, &s.derive(&label("rec")), level + 1)?;
    // Level 0 only holds the root vertex of mass 1, which can never satisfy
    // the [1/3, 2/3] window; level 1 is the first nontrivial split.
    let mut ell = (inner.value as u32).clamp(1, bits);

    // Search for a level-ℓ vertex of weight in [1/3, 2/3]. When one vertex
    // carries more than 2/3 of the mass no balanced vertex exists at this
    // level (median-of-medians distributions concentrate onto single points
    // whenever the underlying median is a dominant atom); the median then
    // lies inside that vertex's subtree, so descend one level and retry.
    let hh_params = HhParams::new(p.rho0(), 5.0 / 12.0, 1.0 / 12.0)?;
    let (prefix, ell_used) = loop {
        let shift = bits - ell;
        let hh_slice = carver.take(sizes.q1 + sizes.q2)?;
        let mut hh_iter = hh_slice.iter();
        let heavy = r_heavy_hitters(
            || {
                hh_iter
                    .next()
                    .map(|x| x >> shift)
                    .ok_or_else(|| Error::AlgorithmFailure("heavy-hitter slice exhausted".into()))
            },
            sizes.q1,
            sizes.q2,
            &hh_params,
            &mut s.derive(&label(&format!("hh@{ell}"))),
        )?;

        // Scan candidates in ascending order; the last prefix whose
        // estimated mass lands in [1/3, 2/3] wins. Three query slices per
        // level are reserved by the plan.
        let mut candidates: Vec<u64> = heavy.into_iter().collect();
        candidates.sort_unstable();
        if candidates.len() > 3 {
            candidates.drain(..candidates.len() - 3);
        }
        let mut found: Option<u64> = None;
        let mut overweight: Option<u64> = None;
        for (j, &v) in candidates.iter().enumerate() {
            let slice = carver.take(sizes.n_sq)?;
            let q =
                SqQuery::new("phi_prefix", move |x: &u64| if x >> shift == v { 1.0 } else { 0.0 });
            let p_v = rstat_unchecked(
                &q,
                slice,
                &p.sq_params(p.tau),
                &mut s.derive(&label(&format!("scan{j}@{ell}"))),
            );
            if (1.0 / 3.0..=2.0 / 3.0).contains(&p_v) {
                found = Some(v);
            } else if p_v > 2.0 / 3.0 {
                overweight = Some(v);
            }
        }
        if let Some(v) = found {
            break (v, ell);
        }
        match overweight {
            Some(v) if ell == bits => break (v, ell), // a full string; exact
            Some(_) => ell += 1,
            None => {
                return Err(Error::AlgorithmFailure(
                    "no candidate prefix with mass in [1/3, 2/3]".into(),
                ))
            }
        }
    };

    // Decide between the 0-padded and 1-padded completions.
    let shift = bits - ell_used;
    let s0 = prefix << shift;
    let s1 = s0 | (1u64 << shift).wrapping_sub(1);
    let chose_s0 = if s0 == s1 {
        true
    } else {
        let final_slice = carver.take(sizes.n_sq)?;
        let q = SqQuery::new("phi_cdf", move |x: &u64| if *x <= s0 { 1.0 } else { 0.0 });
        let p_s0 = rstat_unchecked(
            &q,
            final_slice,
            &p.sq_params(p.tau),
            &mut s.derive(&label("final")),
        );
        p_s0 >= 1.0 / 6.0 - 2.0 * p.tau
    };
    Ok(MedianTrace {
        value: if chose_s0 { s0 } else { s1 },
        depth: inner.depth + 1,
        prefix_len: ell_used,
        s0,
        s1,
        chose_s0,
    })
}

/// Reproducible approximate median with full diagnostics.
pub fn r_median_traced(sample: &[u64], p: &MedianParams, s: &RandomStream) -> Result<MedianTrace> {
    let plans = median_plan(p)?;
    let trace = run_level(sample, &plans, p, s, 0)?;
    debug_assert!(trace.depth as u32 <= log_star((1u64 << p.bits) as f64));
    Ok(trace)
}

/// Reproducible approximate median of a sample of `bits`-bit strings.
pub fn r_median(sample: &[u64], p: &MedianParams, s: &RandomStream) -> Result<u64> {
    Ok(r_median_traced(sample, p, s)?.value)
}
