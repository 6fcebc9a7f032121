//! Multinomial evidence measures computed from one count vector: KL
//! divergence, Good's weight of evidence, the exact Dirichlet log Bayes
//! factor, the likelihood-ratio statistic, Pearson's chi-squared and the
//! entropy deficit.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::special::{kl_multinomial, ln_gamma};
use crate::stats::{check_simplex, pearson_chi2, CountVector};

/// Symmetric Dirichlet concentration used when none is given.
pub const DEFAULT_CONCENTRATION: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultinomialEvidence {
    pub counts: CountVector,
    pub theta0: Vec<f64>,
    pub prior_concentration: f64,
    /// `D(p_hat || theta0)`.
    pub d_kl: f64,
    /// `n D + ((k - 1)/2) ln n`, as printed.
    pub w_good: f64,
    /// Exact log Bayes factor of the symmetric-Dirichlet alternative against
    /// the point null, both as ordered-sequence probabilities.
    pub w_exact: f64,
    /// `2 n D`.
    pub lambda_n: f64,
    pub pearson: f64,
    /// `H(theta0) - H(p_hat)`.
    pub entropy_deficit: f64,
    /// `sum (p_hat_j - theta0_j) ln theta0_j`.
    pub cross_term: f64,
}

fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|x| x * x.ln()).sum::<f64>()
}

fn check_null(counts: &CountVector, theta0: &[f64]) -> Result<()> {
    if theta0.len() != counts.k() {
        return Err(Error::Dimension {
            expected: counts.k(),
            got: theta0.len(),
        });
    }
    check_simplex(theta0, true)
}

/// Log marginal likelihood of the observed sequence under a symmetric
/// `Dirichlet(alpha)` prior on the cell probabilities.
pub fn dirichlet_log_marginal(counts: &CountVector, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(domain(format!("Dirichlet concentration must be > 0, got {alpha}")));
    }
    let k = counts.k() as f64;
    let n = counts.n() as f64;
    let cells: f64 = counts
        .counts()
        .iter()
        .map(|&c| ln_gamma(alpha + c as f64) - ln_gamma(alpha))
        .sum();
    Ok(ln_gamma(k * alpha) - ln_gamma(k * alpha + n) + cells)
}

/// Compute every evidence measure for `counts` against the null `theta0`.
pub fn evidence_bundle(
    counts: &CountVector,
    theta0: &[f64],
    prior_concentration: f64,
) -> Result<MultinomialEvidence> {
    check_null(counts, theta0)?;
    let n = counts.n() as f64;
    let k = counts.k() as f64;
    let p_hat = counts.proportions();

    let d_kl = kl_multinomial(&p_hat, theta0)?;
    let null_loglik: f64 = counts
        .counts()
        .iter()
        .zip(theta0)
        .filter(|(&c, _)| c > 0)
        .map(|(&c, t)| c as f64 * t.ln())
        .sum();
    let cross_term = p_hat
        .iter()
        .zip(theta0)
        .map(|(p, t)| (p - t) * t.ln())
        .sum();

    Ok(MultinomialEvidence {
        counts: counts.clone(),
        theta0: theta0.to_vec(),
        prior_concentration,
        d_kl,
        w_good: n * d_kl + 0.5 * (k - 1.0) * n.ln(),
        w_exact: dirichlet_log_marginal(counts, prior_concentration)? - null_loglik,
        lambda_n: 2.0 * n * d_kl,
        pearson: pearson_chi2(counts, theta0)?,
        entropy_deficit: entropy(theta0) - entropy(&p_hat),
        cross_term,
    })
}

/// `Lambda_n - chi^2`: the residual of the quadratic approximation to the
/// likelihood-ratio statistic.
pub fn wilks_gap(counts: &CountVector, theta0: &[f64]) -> Result<f64> {
    check_null(counts, theta0)?;
    let d = kl_multinomial(&counts.proportions(), theta0)?;
    Ok(2.0 * counts.n() as f64 * d - pearson_chi2(counts, theta0)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cv(c: &[u64]) -> CountVector {
        CountVector::new(c.to_vec()).unwrap()
    }

    #[test]
    fn seven_three_against_fair_coin() {
        let e = evidence_bundle(&cv(&[7, 3]), &[0.5, 0.5], 1.0).unwrap();
        let d = 0.7 * 1.4f64.ln() + 0.3 * 0.6f64.ln();
        assert!((e.d_kl - d).abs() < 1e-15);
        assert!((e.d_kl - 0.082_282).abs() < 1e-6);
        assert!((e.lambda_n - 1.645_65).abs() < 1e-5);
        assert!((e.pearson - 1.6).abs() < 1e-12);
        assert!((e.entropy_deficit - 0.082_282).abs() < 1e-6);
        assert!(e.cross_term.abs() < 1e-15);
        assert!((e.w_good - (10.0 * d + 0.5 * 10f64.ln())).abs() < 1e-12);
        assert!((e.w_good - 1.974_12).abs() < 1e-5);
    }

    #[test]
    fn exact_bayes_factor_against_beta_function() {
        // ln B(8, 4) = ln(7! 3! / 11!).
        let ln_beta = (5040.0f64 * 6.0 / 39_916_800.0).ln();
        assert!((ln_beta + 7.185_39).abs() < 1e-5);
        let e = evidence_bundle(&cv(&[7, 3]), &[0.5, 0.5], 1.0).unwrap();
        assert!((e.w_exact - (ln_beta - 10.0 * 0.5f64.ln())).abs() < 1e-12);
        assert!((e.w_exact + 0.253_92).abs() < 1e-5);
    }

    #[test]
    fn perfect_fit() {
        let e = evidence_bundle(&cv(&[25, 25, 50]), &[0.25, 0.25, 0.5], 1.0).unwrap();
        assert!(e.d_kl.abs() < 1e-15);
        assert!(e.lambda_n.abs() < 1e-12);
        assert!(e.pearson.abs() < 1e-12);
        assert!((e.w_good - 100f64.ln()).abs() < 1e-12);
        assert!(wilks_gap(&cv(&[25, 25, 50]), &[0.25, 0.25, 0.5]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn wilks_gap_values() {
        let g = wilks_gap(&cv(&[7, 3]), &[0.5, 0.5]).unwrap();
        assert!((g - 0.045_65).abs() < 1e-5);
        let g = wilks_gap(&cv(&[52, 48]), &[0.5, 0.5]).unwrap();
        assert!(g.abs() < 1e-3);
    }

    #[test]
    fn zero_counts_allowed_zero_null_rejected() {
        let e = evidence_bundle(&cv(&[10, 0, 5]), &[0.3, 0.3, 0.4], 0.5).unwrap();
        assert!(e.d_kl.is_finite() && e.w_exact.is_finite());
        assert!(evidence_bundle(&cv(&[10, 0]), &[1.0, 0.0], 1.0).is_err());
        assert!(evidence_bundle(&cv(&[10, 0]), &[0.5, 0.5], 0.0).is_err());
        assert!(evidence_bundle(&cv(&[10, 0]), &[0.2, 0.3, 0.5], 1.0).is_err());
    }

    #[test]
    fn wilks_gap_shrinks_relative_to_statistic() {
        // p_hat = (0.5 + delta, 0.3 - delta, 0.2) at n = 10^6, delta -> 0.
        let theta0 = [0.5, 0.3, 0.2];
        let mut prev = f64::INFINITY;
        for &delta in &[0.1, 0.03, 0.01, 0.003, 0.001] {
            let n = 1_000_000u64;
            let a = ((0.5 + delta) * n as f64).round() as u64;
            let b = ((0.3 - delta) * n as f64).round() as u64;
            let c = cv(&[a, b, n - a - b]);
            let ratio = wilks_gap(&c, &theta0).unwrap().abs()
                / evidence_bundle(&c, &theta0, 1.0).unwrap().lambda_n;
            assert!(ratio < prev, "delta={delta}");
            prev = ratio;
        }
        assert!(prev < 2e-3);
    }
}
