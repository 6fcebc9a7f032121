//! Goodness-of-fit statistics computed from raw observations or counts.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// A nonempty batch of real observations with a sorted copy kept for order
/// statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    values: Vec<f64>,
    sorted: Vec<f64>,
}

impl SampleBatch {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyBatch);
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(domain(format!("non-finite observation {bad}")));
        }
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { values, sorted })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Parse newline-delimited numbers or a one-column CSV. Blank lines and
    /// `#` comments are skipped, and a non-numeric first line is taken as a
    /// header.
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = Vec::new();
        let mut seen_first = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let field = line.split(',').next().unwrap_or("").trim().trim_matches('"');
            match field.parse::<f64>() {
                Ok(v) => values.push(v),
                Err(_) if !seen_first => {}
                Err(_) => {
                    return Err(Error::Parse(format!(
                        "line {}: not a number: {field:?}",
                        lineno + 1
                    )))
                }
            }
            seen_first = true;
        }
        Self::new(values)
    }
}

/// Category counts `N_1..N_k` with `k >= 2`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountVector {
    counts: Vec<u64>,
    n: u64,
}

impl CountVector {
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        if counts.len() < 2 {
            return Err(domain(format!("need at least 2 categories, got {}", counts.len())));
        }
        let n = counts.iter().sum();
        if n == 0 {
            return Err(domain("count vector has zero total"));
        }
        Ok(Self { counts, n })
    }

    /// Parse comma-separated nonnegative integers, e.g. `"7,3"`.
    pub fn parse(text: &str) -> Result<Self> {
        let counts = text
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<u64>()
                    .map_err(|_| Error::Parse(format!("not a nonnegative integer: {:?}", s.trim())))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(counts)
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    /// Empirical proportions `N_j / n`.
    pub fn proportions(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }
}

/// Parse a comma-separated probability vector and check it lies on the
/// simplex (tolerance 1e-9 on the sum).
pub fn parse_simplex(text: &str) -> Result<Vec<f64>> {
    let v = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("not a number: {:?}", s.trim())))
        })
        .collect::<Result<Vec<_>>>()?;
    check_simplex(&v, false)?;
    Ok(v)
}

/// Validate a probability vector. With `strict`, every entry must be > 0.
pub fn check_simplex(p: &[f64], strict: bool) -> Result<()> {
    if p.is_empty() {
        return Err(domain("empty probability vector"));
    }
    for &x in p {
        if !(0.0..=1.0).contains(&x) || (strict && x == 0.0) {
            return Err(domain(format!(
                "probability entry {x} out of range{}",
                if strict { " (must be > 0)" } else { "" }
            )));
        }
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(domain(format!("probabilities sum to {s}, not 1")));
    }
    Ok(())
}

/// Kolmogorov–Smirnov distance `sup_t |F_n(t) - F_0(t)|` over order statistics.
pub fn ks_statistic<F>(batch: &SampleBatch, f0: F) -> f64
where
    F: Fn(f64) -> f64,
{
    let n = batch.len() as f64;
    batch
        .sorted()
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = f0(x);
            let i = i as f64;
            ((i + 1.0) / n - f).max(f - i / n)
        })
        .fold(0.0, f64::max)
}

/// Pearson `sum (N_j - n p_j)^2 / (n p_j)`.
pub fn pearson_chi2(counts: &CountVector, p0: &[f64]) -> Result<f64> {
    if p0.len() != counts.k() {
        return Err(Error::Dimension {
            expected: counts.k(),
            got: p0.len(),
        });
    }
    check_simplex(p0, true)?;
    let n = counts.n() as f64;
    Ok(counts
        .counts()
        .iter()
        .zip(p0)
        .map(|(&c, &p)| {
            let e = n * p;
            (c as f64 - e).powi(2) / e
        })
        .sum())
}

/// Number of strictly positive observations.
pub fn sign_count(batch: &SampleBatch) -> u64 {
    batch.values().iter().filter(|&&x| x > 0.0).count() as u64
}

/// Sample median; the mean of the two central order statistics for even `n`.
pub fn sample_median(batch: &SampleBatch) -> f64 {
    let s = batch.sorted();
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

/// Log likelihood ratio for Laplace location `H0: theta = 0` against
/// `theta > 0`: `sum |x_i| - sum |x_i - theta_hat|` with
/// `theta_hat = max(0, median)`.
pub fn laplace_lrt(batch: &SampleBatch) -> f64 {
    let theta = sample_median(batch).max(0.0);
    if theta == 0.0 {
        return 0.0;
    }
    let v = batch.values();
    let null: f64 = v.iter().map(|x| x.abs()).sum();
    let alt: f64 = v.iter().map(|x| (x - theta).abs()).sum();
    (null - alt).max(0.0)
}

/// Maximised Laplace minus normal log-likelihood,
/// `n ln(sigma_hat / b_hat) + (n/2) ln(2 pi) - n/2`, where `sigma_hat` is the
/// ML standard deviation and `b_hat` the mean absolute deviation from the
/// median.
pub fn normal_vs_laplace_contrast(batch: &SampleBatch) -> Result<f64> {
    let n = batch.len();
    if n < 2 {
        return Err(domain("contrast needs at least 2 observations"));
    }
    let (sigma, b) = ml_scales(batch);
    if !(sigma > 0.0 && b > 0.0) {
        return Err(Error::Degenerate("all observations are equal".into()));
    }
    let nf = n as f64;
    Ok(nf * (sigma / b).ln() + 0.5 * nf * (2.0 * std::f64::consts::PI).ln() - 0.5 * nf)
}

/// `(sigma_hat, b_hat)`: ML normal scale (divisor n) and ML Laplace scale.
pub fn ml_scales(batch: &SampleBatch) -> (f64, f64) {
    let v = batch.values();
    let nf = v.len() as f64;
    let mean = v.iter().sum::<f64>() / nf;
    let sigma = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / nf).sqrt();
    let med = sample_median(batch);
    let b = v.iter().map(|x| (x - med).abs()).sum::<f64>() / nf;
    (sigma, b)
}

/// CDF of the Laplace law with location `mu` and unit scale.
pub fn laplace_cdf(x: f64, mu: f64) -> f64 {
    let z = x - mu;
    if z < 0.0 {
        0.5 * z.exp()
    } else {
        1.0 - 0.5 * (-z).exp()
    }
}
