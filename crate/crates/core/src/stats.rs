//! Exact binomial helpers used by the transcript experiments and by test
//! oracles.

/// Table of `ln(k!)` for `k <= n`.
pub struct LnFactorial {
    table: Vec<f64>,
}

impl LnFactorial {
    pub fn up_to(n: usize) -> Self {
        let mut table = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        table.push(0.0);
        for k in 1..=n {
            acc += (k as f64).ln();
            table.push(acc);
        }
        LnFactorial { table }
    }

    #[inline]
    pub fn get(&self, k: usize) -> f64 {
        self.table[k]
    }

    pub fn ln_choose(&self, n: usize, k: usize) -> f64 {
        self.get(n) - self.get(k) - self.get(n - k)
    }

    /// `Pr[Bin(n, p) = k]`.
    pub fn binomial_pmf(&self, n: usize, p: f64, k: usize) -> f64 {
        if p == 0.0 {
            return if k == 0 { 1.0 } else { 0.0 };
        }
        if p == 1.0 {
            return if k == n { 1.0 } else { 0.0 };
        }
        (self.ln_choose(n, k) + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()).exp()
    }

    /// `Pr[Bin(n, p) < k]`.
    pub fn binomial_cdf_below(&self, n: usize, p: f64, k: usize) -> f64 {
        (0..k.min(n + 1)).map(|j| self.binomial_pmf(n, p, j)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_binomial_exact() {
        let lf = LnFactorial::up_to(4);
        assert!((lf.binomial_pmf(4, 0.5, 2) - 0.375).abs() < 1e-12);
        assert!((lf.binomial_cdf_below(4, 0.5, 5) - 1.0).abs() < 1e-12);
        assert!((lf.binomial_cdf_below(2, 0.5, 1) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn pmf_sums_to_one() {
        let lf = LnFactorial::up_to(500);
        let total: f64 = (0..=500).map(|k| lf.binomial_pmf(500, 0.3, k)).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }
}
