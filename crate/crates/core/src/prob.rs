//! Probability kernels: binomial likelihoods in log space, their tabulation on a
//! grid of success probabilities, and the exact Poisson-binomial law used when
//! real-valued outcomes are coarsened.

use statrs::function::factorial::ln_binomial;

use crate::error::{domain, Result};

/// Log binomial coefficients `log C(N, n)` for `n = 0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinomialWeights {
    sample_size: usize,
    log_coeffs: Vec<f64>,
}

impl BinomialWeights {
    pub fn new(sample_size: usize) -> Self {
        let mut log_coeffs = vec![0.0; sample_size + 1];
        // Fill the lower half and mirror so the table is exactly symmetric.
        for n in 0..=sample_size / 2 {
            let v = ln_binomial(sample_size as u64, n as u64);
            log_coeffs[n] = v;
            log_coeffs[sample_size - n] = v;
        }
        Self {
            sample_size,
            log_coeffs,
        }
    }

    pub fn sample_size(&self) -> usize {
        self.sample_size
    }

    pub fn log_coeffs(&self) -> &[f64] {
        &self.log_coeffs
    }

    /// Probability of `n` successes in `N` trials with success probability `mu`.
    /// The caller guarantees `n <= N` and `mu` in `[0, 1]`.
    fn pmf_unchecked(&self, n: usize, mu: f64) -> f64 {
        let big_n = self.sample_size;
        if mu == 0.0 {
            return if n == 0 { 1.0 } else { 0.0 };
        }
        if mu == 1.0 {
            return if n == big_n { 1.0 } else { 0.0 };
        }
        let log_p = self.log_coeffs[n] + n as f64 * mu.ln() + (big_n - n) as f64 * (-mu).ln_1p();
        log_p.exp()
    }

    /// Full pmf vector over `0..=N`.
    fn pmf_vector_unchecked(&self, mu: f64) -> Vec<f64> {
        let big_n = self.sample_size;
        if mu == 0.0 || mu == 1.0 {
            return (0..=big_n).map(|n| self.pmf_unchecked(n, mu)).collect();
        }
        let log_mu = mu.ln();
        let log_one_minus = (-mu).ln_1p();
        self.log_coeffs
            .iter()
            .enumerate()
            .map(|(n, &lc)| (lc + n as f64 * log_mu + (big_n - n) as f64 * log_one_minus).exp())
            .collect()
    }
}

fn check_probability(mu: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&mu) {
        return domain(format!("success probability {mu} outside [0, 1]"));
    }
    Ok(())
}

/// `C(N, n) mu^n (1 - mu)^(N - n)`, evaluated in log space.
pub fn binom_pmf(n: usize, sample_size: usize, mu: f64) -> Result<f64> {
    check_probability(mu)?;
    if n > sample_size {
        return domain(format!("count {n} exceeds sample size {sample_size}"));
    }
    Ok(BinomialWeights::new(sample_size).pmf_unchecked(n, mu))
}

pub fn pmf_vector(sample_size: usize, mu: f64) -> Result<Vec<f64>> {
    check_probability(mu)?;
    Ok(BinomialWeights::new(sample_size).pmf_vector_unchecked(mu))
}

/// Law of the number of successes among independent Bernoulli draws with the
/// given success probabilities, by iterative convolution.
pub fn poisson_binom_pmf(probs: &[f64]) -> Result<Vec<f64>> {
    let mut pmf = Vec::with_capacity(probs.len() + 1);
    pmf.push(1.0);
    for &q in probs {
        check_probability(q)?;
        pmf.push(0.0);
        for k in (1..pmf.len()).rev() {
            pmf[k] = pmf[k] * (1.0 - q) + pmf[k - 1] * q;
        }
        pmf[0] *= 1.0 - q;
    }
    Ok(pmf)
}

/// Binomial pmf tabulated at every grid probability `i / p`, `i = 0..=p`.
///
/// Row `i` holds `pmf_vector(N, i / p)`; rows are contiguous so a range of grid
/// coordinates is a contiguous sub-matrix.
#[derive(Debug, Clone)]
pub struct PmfTable {
    resolution: usize,
    sample_size: usize,
    values: Vec<f64>,
}

impl PmfTable {
    pub fn new(sample_size: usize, resolution: usize) -> Self {
        let weights = BinomialWeights::new(sample_size);
        let width = sample_size + 1;
        let mut values = Vec::with_capacity((resolution + 1) * width);
        for i in 0..=resolution {
            values.extend(weights.pmf_vector_unchecked(grid_value(i, resolution)));
        }
        Self {
            resolution,
            sample_size,
            values,
        }
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn sample_size(&self) -> usize {
        self.sample_size
    }

    pub fn width(&self) -> usize {
        self.sample_size + 1
    }

    pub fn row(&self, coord: usize) -> &[f64] {
        let w = self.width();
        &self.values[coord * w..(coord + 1) * w]
    }

    /// Rows `lo..=hi` as one row-major block.
    pub fn rows(&self, lo: usize, hi: usize) -> &[f64] {
        let w = self.width();
        &self.values[lo * w..(hi + 1) * w]
    }
}

/// The grid probability `i / p`.
#[inline]
pub fn grid_value(coord: usize, resolution: usize) -> f64 {
    coord as f64 / resolution as f64
}
