//! Special-function kernels used by the calibrators.
//!
//! Only what the rest of the crate needs: the Kolmogorov limit law, the
//! regularized incomplete gamma function (and the chi-squared distribution
//! built on it), log-gamma, the standard normal CDF, and KL divergences for
//! Bernoulli and multinomial laws.

use crate::error::{domain, Error, Result};
use crate::optim::bisect;

/// Terms of the Kolmogorov series below this magnitude are dropped.
pub const KOLMOGOROV_SERIES_TOL: f64 = 1e-12;

/// Below this point the Kolmogorov CDF is reported as exactly zero.
pub const KOLMOGOROV_CUTOFF: f64 = 0.2;

const GAMMA_REL_TOL: f64 = 1e-14;
const GAMMA_MAX_ITER: usize = 10_000;

/// The Kolmogorov distribution `K(t) = 1 - 2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 t^2)`,
/// the null limit law of `sqrt(n) * sup |F_n - F_0|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KolmogorovDist {
    pub series_tol: f64,
}

impl Default for KolmogorovDist {
    fn default() -> Self {
        Self {
            series_tol: KOLMOGOROV_SERIES_TOL,
        }
    }
}

impl KolmogorovDist {
    /// Upper tail `1 - K(t)` summed directly, so it keeps full relative
    /// precision far into the tail.
    pub fn sf(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(domain(format!("Kolmogorov argument must be >= 0, got {t}")));
        }
        if t < KOLMOGOROV_CUTOFF {
            return Ok(1.0);
        }
        let t2 = t * t;
        let mut sum = 0.0;
        let mut sign = 1.0;
        for k in 1..=10_000u32 {
            let kf = f64::from(k);
            let term = (-2.0 * kf * kf * t2).exp();
            sum += sign * term;
            if term < self.series_tol {
                break;
            }
            sign = -sign;
        }
        Ok((2.0 * sum).clamp(0.0, 1.0))
    }

    pub fn cdf(&self, t: f64) -> Result<f64> {
        if (0.0..KOLMOGOROV_CUTOFF).contains(&t) {
            return Ok(0.0);
        }
        Ok(1.0 - self.sf(t)?)
    }

    /// Inverse CDF by bisection on `[0.05, 5]`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(domain(format!("Kolmogorov quantile needs p in (0,1), got {p}")));
        }
        Ok(bisect(
            |t| self.cdf(t).map(|c| c >= p).unwrap_or(true),
            0.05,
            5.0,
            1e-15,
            200,
        ))
    }
}

pub fn kolmogorov_cdf(t: f64) -> Result<f64> {
    KolmogorovDist::default().cdf(t)
}

pub fn kolmogorov_sf(t: f64) -> Result<f64> {
    KolmogorovDist::default().sf(t)
}

pub fn kolmogorov_quantile(p: f64) -> Result<f64> {
    KolmogorovDist::default().quantile(p)
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection: Gamma(x) Gamma(1 - x) = pi / sin(pi x).
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).abs().ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

fn check_gamma_args(a: f64, x: f64) -> Result<()> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(domain(format!("incomplete gamma shape must be > 0, got {a}")));
    }
    if !(x >= 0.0) {
        return Err(domain(format!("incomplete gamma argument must be >= 0, got {x}")));
    }
    Ok(())
}

/// `ln(x^a e^-x / Gamma(a))`, the common prefactor of both expansions.
fn gamma_prefactor_ln(a: f64, x: f64) -> f64 {
    a * x.ln() - x - ln_gamma(a)
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut del = 1.0 / a;
    let mut sum = del;
    for _ in 0..GAMMA_MAX_ITER {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * GAMMA_REL_TOL {
            break;
        }
    }
    (sum.ln() + gamma_prefactor_ln(a, x)).exp()
}

/// Upper regularized gamma by the Lentz continued fraction.
fn gamma_q_cont_frac(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..GAMMA_MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < GAMMA_REL_TOL {
            break;
        }
    }
    (h.ln() + gamma_prefactor_ln(a, x)).exp()
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> Result<f64> {
    check_gamma_args(a, x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    Ok(if x < a + 1.0 {
        gamma_p_series(a, x)
    } else {
        1.0 - gamma_q_cont_frac(a, x)
    })
}

/// Regularized upper incomplete gamma `Q(a, x) = 1 - P(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> Result<f64> {
    check_gamma_args(a, x)?;
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_cont_frac(a, x)
    })
}

/// Inverse of `P(a, .)`: the `x` with `P(a, x) = p`.
///
/// Newton steps on `P(a, x) - p`, falling back to bisection whenever a step
/// leaves the current bracket.
pub fn gamma_p_inv(a: f64, p: f64) -> Result<f64> {
    check_gamma_args(a, 0.0)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(domain(format!("probability must be in [0,1], got {p}")));
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    if p == 1.0 {
        return Ok(f64::INFINITY);
    }
    let mut lo = 0.0;
    let mut hi = a.max(1.0);
    while gamma_p(a, hi)? < p {
        lo = hi;
        hi *= 2.0;
    }
    let lg = ln_gamma(a);
    // Small-x approximation P(a, x) ~ x^a / Gamma(a + 1).
    let mut x = ((p.ln() + ln_gamma(a + 1.0)) / a).exp();
    if !(x > lo && x < hi) {
        x = 0.5 * (lo + hi);
    }
    for _ in 0..200 {
        let f = gamma_p(a, x)? - p;
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let dens = ((a - 1.0) * x.ln() - x - lg).exp();
        let mut next = if dens > 0.0 { x - f / dens } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-14 * x.max(1e-300) || hi - lo <= 1e-15 * hi {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

fn check_df(df: u32) -> Result<()> {
    if df == 0 {
        return Err(domain("chi-squared degrees of freedom must be >= 1"));
    }
    Ok(())
}

/// Chi-squared CDF `P(df/2, x/2)`.
pub fn chi2_cdf(x: f64, df: u32) -> Result<f64> {
    check_df(df)?;
    if !(x >= 0.0) {
        return Err(domain(format!("chi-squared argument must be >= 0, got {x}")));
    }
    gamma_p(f64::from(df) / 2.0, x / 2.0)
}

/// Chi-squared upper tail `Q(df/2, x/2)`.
pub fn chi2_sf(x: f64, df: u32) -> Result<f64> {
    check_df(df)?;
    if !(x >= 0.0) {
        return Err(domain(format!("chi-squared argument must be >= 0, got {x}")));
    }
    gamma_q(f64::from(df) / 2.0, x / 2.0)
}

/// Chi-squared quantile by bisection (absolute tolerance 1e-9 or better).
pub fn chi2_quantile(p: f64, df: u32) -> Result<f64> {
    check_df(df)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(domain(format!("chi-squared quantile needs p in (0,1), got {p}")));
    }
    let mut hi = f64::from(df).max(1.0);
    while chi2_cdf(hi, df)? < p {
        hi *= 2.0;
    }
    let q = bisect(
        |x| chi2_cdf(x, df).map(|c| c >= p).unwrap_or(true),
        0.0,
        hi,
        1e-12,
        400,
    );
    Ok(q)
}

/// Complementary error function via `erfc(x) = Q(1/2, x^2)` for `x >= 0`.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x >= 0.0 {
        gamma_q(0.5, x * x).unwrap_or(0.0)
    } else {
        2.0 - gamma_q(0.5, x * x).unwrap_or(0.0)
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn check_probability(p: f64, what: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(domain(format!("{what} must be a probability, got {p}")));
    }
    Ok(())
}

/// `x ln(x / y)` with the `0 ln 0 = 0` convention and `+inf` when `y = 0 < x`.
fn xlogx_over_y(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if y == 0.0 {
        f64::INFINITY
    } else {
        x * (x / y).ln()
    }
}

/// `KL(Ber(p) || Ber(q))` in nats. Returns `+inf` when `p` puts mass where
/// `q` has none.
pub fn kl_bernoulli(p: f64, q: f64) -> Result<f64> {
    check_probability(p, "p")?;
    check_probability(q, "q")?;
    let kl = xlogx_over_y(p, q) + xlogx_over_y(1.0 - p, 1.0 - q);
    Ok(kl.max(0.0))
}

/// `KL(p || q) = sum p_j ln(p_j / q_j)` in nats, `+inf` if `p` is not
/// absolutely continuous with respect to `q`.
pub fn kl_multinomial(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Dimension {
            expected: q.len(),
            got: p.len(),
        });
    }
    if p.is_empty() {
        return Err(domain("KL divergence of empty vectors"));
    }
    for (&pj, &qj) in p.iter().zip(q) {
        check_probability(pj, "p_j")?;
        check_probability(qj, "q_j")?;
    }
    let kl: f64 = p.iter().zip(q).map(|(&pj, &qj)| xlogx_over_y(pj, qj)).sum();
    Ok(kl.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct alternating-series evaluation with a fixed number of terms.
    fn kolmogorov_series_oracle(t: f64, terms: u32) -> f64 {
        let mut s = 0.0;
        for k in 1..=terms {
            let kf = f64::from(k);
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            s += sign * (-2.0 * kf * kf * t * t).exp();
        }
        1.0 - 2.0 * s
    }

    #[test]
    fn kolmogorov_cdf_reference_points() {
        assert_eq!(kolmogorov_cdf(0.0).unwrap(), 0.0);
        assert!((kolmogorov_cdf(1.358).unwrap() - 0.95).abs() < 1e-3);
        let oracle = kolmogorov_series_oracle(2.0, 20);
        assert!((oracle - (1.0 - 6.7086e-4)).abs() < 1e-7);
        assert!((kolmogorov_cdf(2.0).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn kolmogorov_negative_is_domain_error() {
        assert!(matches!(kolmogorov_cdf(-0.1), Err(Error::Domain(_))));
        assert!(kolmogorov_quantile(1.0).is_err());
        assert!(kolmogorov_quantile(0.0).is_err());
    }

    #[test]
    fn kolmogorov_quantile_round_trips() {
        assert!((kolmogorov_quantile(0.95).unwrap() - 1.358).abs() < 1e-3);
        let p = kolmogorov_cdf(1.0).unwrap();
        assert!((kolmogorov_quantile(p).unwrap() - 1.0).abs() < 1e-8);
        // 200-step bisection directly on the series oracle.
        let (mut lo, mut hi) = (0.05, 5.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if kolmogorov_series_oracle(mid, 60) >= 0.99 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let q = kolmogorov_quantile(0.99).unwrap();
        assert!((q - 0.5 * (lo + hi)).abs() < 1e-9);
        assert!((kolmogorov_cdf(q).unwrap() - 0.99).abs() < 1e-9);
    }

    #[test]
    fn kolmogorov_cdf_is_monotone_with_gaussian_tail_envelope() {
        let mut prev = 0.0;
        for i in 0..=1000 {
            let t = 3.0 * f64::from(i) / 1000.0;
            let c = kolmogorov_cdf(t).unwrap();
            assert!((0.0..=1.0).contains(&c));
            assert!(c >= prev, "not monotone at t = {t}");
            prev = c;
            if t >= 1.5 {
                let tail = kolmogorov_sf(t).unwrap();
                let g = (-2.0 * t * t).exp();
                assert!(tail >= 1.9 * g && tail <= 2.0 * g, "envelope fails at {t}");
            }
        }
    }

    #[test]
    fn ln_gamma_factorials() {
        let mut fact = 1.0f64;
        for n in 1..20u32 {
            fact *= f64::from(n);
            assert!((ln_gamma(f64::from(n) + 1.0) - fact.ln()).abs() < 1e-12 * fact.ln().max(1.0));
        }
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
    }

    #[test]
    fn incomplete_gamma_exponential_case() {
        // P(1, x) = 1 - e^-x on both sides of the series/fraction split.
        for &x in &[0.01, 0.5, 1.9, 2.1, 10.0, 40.0] {
            let p = gamma_p(1.0, x).unwrap();
            assert!((p - (-(-x).exp_m1())).abs() < 1e-14, "x = {x}");
            let q = gamma_q(1.0, x).unwrap();
            assert!((q - (-x).exp()).abs() < 1e-14 * (-x).exp().max(1e-300) + 1e-300);
        }
    }

    #[test]
    fn gamma_p_inverse_round_trip() {
        for &a in &[0.5, 1.0, 2.0, 7.5] {
            for &p in &[1e-8, 1e-3, 0.2, 0.5, 0.9, 0.999_999] {
                let x = gamma_p_inv(a, p).unwrap();
                assert!((gamma_p(a, x).unwrap() - p).abs() < 1e-12 * p.max(1e-3), "a={a} p={p}");
            }
        }
    }

    #[test]
    fn chi2_table_quantiles() {
        assert!((chi2_quantile(0.95, 2).unwrap() - 5.99).abs() < 0.01);
        assert!((chi2_quantile(0.95, 3).unwrap() - 7.81).abs() < 0.01);
        assert!((chi2_quantile(0.95, 9).unwrap() - 16.92).abs() < 0.01);
        assert_eq!(chi2_cdf(0.0, 4).unwrap(), 0.0);
        // df = 2 is exponential with mean 2.
        assert!((chi2_cdf(3.0, 2).unwrap() - (1.0 - (-1.5f64).exp())).abs() < 1e-14);
    }

    #[test]
    fn chi2_quantile_inverts_cdf() {
        for &df in &[1, 2, 9] {
            for &x in &[0.5, 1.0, 5.0, 20.0] {
                let p = chi2_cdf(x, df).unwrap();
                let back = chi2_quantile(p, df).unwrap();
                assert!((back - x).abs() < 1e-6, "df={df} x={x} back={back}");
            }
        }
    }

    #[test]
    fn chi2_domain_errors() {
        assert!(chi2_cdf(-1.0, 2).is_err());
        assert!(chi2_cdf(1.0, 0).is_err());
        assert!(chi2_quantile(1.5, 2).is_err());
    }

    #[test]
    fn normal_cdf_reference() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-12);
        assert!((normal_cdf(-1.0) - 0.158_655_253_931_457_05).abs() < 1e-12);
    }

    #[test]
    fn kl_reference_values() {
        assert_eq!(kl_bernoulli(0.5, 0.5).unwrap(), 0.0);
        let direct = 0.75 * 1.5f64.ln() + 0.25 * 0.5f64.ln();
        assert!((kl_bernoulli(0.75, 0.5).unwrap() - direct).abs() < 1e-15);
        assert!((kl_bernoulli(0.75, 0.5).unwrap() - 0.130_812).abs() < 1e-6);
        let kl = kl_multinomial(&[0.7, 0.3], &[0.5, 0.5]).unwrap();
        assert!((kl - 0.082_282).abs() < 1e-6);
    }

    #[test]
    fn kl_infinite_sentinel_and_errors() {
        assert_eq!(kl_multinomial(&[0.5, 0.5], &[1.0, 0.0]).unwrap(), f64::INFINITY);
        assert_eq!(kl_multinomial(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        assert!(matches!(
            kl_multinomial(&[0.5, 0.5], &[1.0]),
            Err(Error::Dimension { .. })
        ));
        assert!(kl_bernoulli(1.2, 0.5).is_err());
    }
}
