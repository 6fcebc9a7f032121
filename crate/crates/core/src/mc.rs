//! Monte-Carlo estimation of Bayes risk, prior-exponent regression and the
//! asymptotic plug-in threshold.
//!
//! Every random quantity is read from its own Philox substream keyed by
//! `(seed, replicate, kind)`, so results are bit-identical regardless of how
//! replicates are scheduled across threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibrate::{RHO_GAUSSIAN, RHO_KS};
use crate::error::{domain, Error, Result};
use crate::rng::{PhiloxStream, StreamKind};
use crate::special::{gamma_p, gamma_p_inv};
use crate::stats::laplace_cdf;

/// Draws per substream when sampling the prior in bulk.
const PRIOR_CHUNK: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorFamily {
    /// Unit-scale Laplace data with a prior on the location `theta > 0`.
    LaplaceLocation,
}

/// Alternative prior with density proportional to
/// `theta^(lambda-1) exp(-gamma_rate theta)` on `(0, truncation]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub family: PriorFamily,
    pub lambda: f64,
    pub gamma_rate: f64,
    pub truncation: f64,
}

impl PriorSpec {
    pub fn laplace_location(lambda: f64, gamma_rate: f64, truncation: f64) -> Result<Self> {
        let p = Self {
            family: PriorFamily::LaplaceLocation,
            lambda,
            gamma_rate,
            truncation,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda", self.lambda),
            ("gamma_rate", self.gamma_rate),
            ("truncation", self.truncation),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("prior {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    fn total_mass(&self) -> f64 {
        gamma_p(self.lambda, self.gamma_rate * self.truncation).unwrap_or(1.0)
    }

    /// Exact prior CDF at `theta`.
    pub fn cdf(&self, theta: f64) -> f64 {
        if theta <= 0.0 {
            return 0.0;
        }
        let x = self.gamma_rate * theta.min(self.truncation);
        gamma_p(self.lambda, x).unwrap_or(1.0) / self.total_mass()
    }

    /// Inverse-CDF draw from a uniform `u` in `(0, 1)`.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        let x = gamma_p_inv(self.lambda, u * self.total_mass())?;
        Ok((x / self.gamma_rate).min(self.truncation))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    /// Number of alternatives drawn from the prior.
    pub m_alternatives: u64,
    /// Number of null replicates.
    pub m_null: u64,
    pub n: u64,
    pub seed: u64,
    pub threshold_grid: Vec<f64>,
    #[serde(default = "unit")]
    pub w0: f64,
    #[serde(default = "unit")]
    pub w1: f64,
}

fn unit() -> f64 {
    1.0
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m_alternatives == 0 || self.m_null == 0 || self.n == 0 {
            return Err(Error::Config(
                "m_alternatives, m_null and n must all be >= 1".into(),
            ));
        }
        if self.threshold_grid.is_empty() {
            return Err(Error::Config("threshold grid is empty".into()));
        }
        if self.threshold_grid.iter().any(|t| !t.is_finite()) {
            return Err(Error::Config("threshold grid has non-finite entries".into()));
        }
        if self.threshold_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("threshold grid must be strictly increasing".into()));
        }
        if !(self.w0 > 0.0 && self.w1 > 0.0) {
            return Err(Error::Config("weights must be positive".into()));
        }
        Ok(())
    }
}

/// Evenly spaced grid `lo, lo + step, ..., <= hi`.
pub fn linear_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    (0..count).map(|i| lo + step * i as f64).collect()
}

/// Statistic simulated under each draw; both reject for large values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistic {
    /// `sqrt(n) sup |F_n - F_0|` against the unit Laplace null.
    Ks,
    /// `(2 V_n - n) / sqrt(n)` with `V_n` the number of positive observations.
    Sign,
}

impl Statistic {
    pub fn rho(self) -> f64 {
        match self {
            Statistic::Ks => RHO_KS,
            Statistic::Sign => RHO_GAUSSIAN,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Statistic::Ks => "ks",
            Statistic::Sign => "sign",
        }
    }

    /// Leading-order optimal threshold `sqrt(kappa ln n / (4 rho))`.
    pub fn analytic_threshold(self, kappa: f64, n: u64) -> f64 {
        (kappa * (n as f64).ln() / (4.0 * self.rho())).sqrt()
    }

    /// Evaluate on a sample; `sample` is reordered in place.
    pub fn evaluate(self, sample: &mut [f64]) -> f64 {
        let n = sample.len() as f64;
        match self {
            Statistic::Sign => {
                let v = sample.iter().filter(|&&x| x > 0.0).count() as f64;
                (2.0 * v - n) / n.sqrt()
            }
            Statistic::Ks => {
                sample.sort_by(f64::total_cmp);
                let d = sample
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| {
                        let f = laplace_cdf(x, 0.0);
                        ((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
                    })
                    .fold(0.0, f64::max);
                n.sqrt() * d
            }
        }
    }
}

fn laplace_draw(rng: &mut PhiloxStream, mu: f64) -> f64 {
    let u = rng.next_open01();
    if u < 0.5 {
        mu + (2.0 * u).ln()
    } else {
        mu - (2.0 * (1.0 - u)).ln()
    }
}

fn simulate(stat: Statistic, n: u64, theta: f64, rng: &mut PhiloxStream) -> f64 {
    let mut sample: Vec<f64> = (0..n).map(|_| laplace_draw(rng, theta)).collect();
    stat.evaluate(&mut sample)
}

/// One threshold of the Monte-Carlo risk curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub threshold: f64,
    pub alpha_hat: f64,
    pub se_alpha: f64,
    pub beta_hat: f64,
    pub se_beta: f64,
    pub risk_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRiskResult {
    pub statistic: Statistic,
    pub seed: u64,
    pub n: u64,
    pub rows: Vec<McRow>,
    /// Median of the grid thresholds attaining the minimum estimated risk.
    pub argmin_threshold: f64,
    pub min_risk: f64,
    /// `sqrt(lambda ln n / (4 rho))` for comparison.
    pub analytic_threshold: f64,
}

fn binomial_se(p: f64, m: u64) -> f64 {
    (p * (1.0 - p) / m as f64).sqrt()
}

/// Simulated statistics under the prior (alternatives) and under the null.
pub fn simulate_statistics(
    prior: &PriorSpec,
    cfg: &McConfig,
    statistic: Statistic,
) -> Result<(Vec<f64>, Vec<f64>)> {
    prior.validate()?;
    cfg.validate()?;
    let alt = (0..cfg.m_alternatives)
        .into_par_iter()
        .map(|m| {
            let mut draw = PhiloxStream::substream(cfg.seed, m, StreamKind::PriorDraw);
            let theta = prior.quantile(draw.next_open01())?;
            let mut data = PhiloxStream::substream(cfg.seed, m, StreamKind::AlternativeData);
            Ok(simulate(statistic, cfg.n, theta, &mut data))
        })
        .collect::<Result<Vec<f64>>>()?;
    let null = (0..cfg.m_null)
        .into_par_iter()
        .map(|j| {
            let mut data = PhiloxStream::substream(cfg.seed, j, StreamKind::NullData);
            simulate(statistic, cfg.n, 0.0, &mut data)
        })
        .collect();
    Ok((alt, null))
}

/// Estimate `w0 alpha(t) + w1 beta(t)` on the configured threshold grid.
pub fn mc_bayes_risk(
    prior: &PriorSpec,
    cfg: &McConfig,
    statistic: Statistic,
) -> Result<McRiskResult> {
    let (mut alt, mut null) = simulate_statistics(prior, cfg, statistic)?;
    alt.sort_by(f64::total_cmp);
    null.sort_by(f64::total_cmp);
    let m_alt = cfg.m_alternatives;
    let m_null = cfg.m_null;
    let rows: Vec<McRow> = cfg
        .threshold_grid
        .iter()
        .map(|&t| {
            let not_rejected_null = null.partition_point(|&x| x <= t);
            let missed = alt.partition_point(|&x| x <= t);
            let alpha_hat = (m_null as usize - not_rejected_null) as f64 / m_null as f64;
            let beta_hat = missed as f64 / m_alt as f64;
            McRow {
                threshold: t,
                alpha_hat,
                se_alpha: binomial_se(alpha_hat, m_null),
                beta_hat,
                se_beta: binomial_se(beta_hat, m_alt),
                risk_hat: cfg.w0 * alpha_hat + cfg.w1 * beta_hat,
            }
        })
        .collect();
    let min_risk = rows.iter().map(|r| r.risk_hat).fold(f64::INFINITY, f64::min);
    let minimisers: Vec<f64> = rows
        .iter()
        .filter(|r| r.risk_hat == min_risk)
        .map(|r| r.threshold)
        .collect();
    Ok(McRiskResult {
        statistic,
        seed: cfg.seed,
        n: cfg.n,
        argmin_threshold: minimisers[(minimisers.len() - 1) / 2],
        min_risk,
        analytic_threshold: statistic.analytic_threshold(prior.lambda, cfg.n),
        rows,
    })
}

/// Least-squares fit of `ln p = slope ln eps + intercept`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorExponentFit {
    pub kappa_hat: f64,
    pub intercept: f64,
    pub r2: f64,
    pub radii: Vec<f64>,
    pub probs: Vec<f64>,
}

/// Regress `ln probs` on `ln radii`.
pub fn fit_power_law(radii: &[f64], probs: &[f64]) -> Result<PriorExponentFit> {
    if radii.len() != probs.len() {
        return Err(Error::Dimension {
            expected: radii.len(),
            got: probs.len(),
        });
    }
    if radii.len() < 2 {
        return Err(domain("need at least two radii for a slope"));
    }
    if let Some(bad) = radii.iter().find(|r| !(**r > 0.0)) {
        return Err(domain(format!("radius must be positive, got {bad}")));
    }
    if let Some(pos) = probs.iter().position(|p| !(*p > 0.0)) {
        return Err(Error::EmptyCell {
            radius: radii[pos],
        });
    }
    let xs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = probs.iter().map(|p| p.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(domain("radii must not all be equal"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(PriorExponentFit {
        kappa_hat: slope,
        intercept,
        r2,
        radii: radii.to_vec(),
        probs: probs.to_vec(),
    })
}

/// Probe the prior near the null: estimate `Pi_1(theta <= eps_j)` from `m`
/// draws and regress on the log scale.
pub fn estimate_prior_exponent(
    prior: &PriorSpec,
    radii: &[f64],
    m: u64,
    seed: u64,
) -> Result<PriorExponentFit> {
    prior.validate()?;
    if m == 0 {
        return Err(Error::Config("m must be >= 1".into()));
    }
    if radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config("radii must be strictly decreasing".into()));
    }
    if let Some(bad) = radii.iter().find(|r| !(**r > 0.0 && **r < prior.truncation)) {
        return Err(Error::Config(format!(
            "radius {bad} outside (0, truncation = {})",
            prior.truncation
        )));
    }
    let chunks = m.div_ceil(PRIOR_CHUNK);
    let hits = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = PhiloxStream::substream(seed, c, StreamKind::PriorDraw);
            let draws = PRIOR_CHUNK.min(m - c * PRIOR_CHUNK);
            let mut local = vec![0u64; radii.len()];
            for _ in 0..draws {
                let theta = prior.quantile(rng.next_open01())?;
                for (h, &r) in local.iter_mut().zip(radii) {
                    if theta <= r {
                        *h += 1;
                    }
                }
            }
            Ok(local)
        })
        .collect::<Result<Vec<Vec<u64>>>>()?
        .into_iter()
        .fold(vec![0u64; radii.len()], |mut acc, local| {
            acc.iter_mut().zip(local).for_each(|(a, l)| *a += l);
            acc
        });
    let probs: Vec<f64> = hits.iter().map(|&h| h as f64 / m as f64).collect();
    fit_power_law(radii, &probs)
}

/// `t* ~ sqrt(kappa_hat / (4 rho) ln n)`.
pub fn plugin_threshold(kappa_hat: f64, rho: f64, n: u64) -> Result<f64> {
    if !(kappa_hat > 0.0) || !(rho > 0.0) {
        return Err(domain("kappa_hat and rho must be positive"));
    }
    if n < 2 {
        return Err(domain(format!("n must be >= 2, got {n}")));
    }
    Ok((kappa_hat / (4.0 * rho) * (n as f64).ln()).sqrt())
}

/// Monte-Carlo job document: `{"prior": ..., "config": ..., "statistic": ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McJob {
    pub prior: PriorSpec,
    pub config: McConfig,
    pub statistic: Statistic,
}

/// Prior-probe job document: `{"prior": ..., "radii": [...], "m": ..., "seed": ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorExponentJob {
    pub prior: PriorSpec,
    pub radii: Vec<f64>,
    pub m: u64,
    pub seed: u64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg(seed: u64) -> McConfig {
        McConfig {
            m_alternatives: 200,
            m_null: 200,
            n: 100,
            seed,
            threshold_grid: linear_grid(0.0, 5.0, 0.25),
            w0: 1.0,
            w1: 1.0,
        }
    }

    #[test]
    fn prior_quantile_inverts_cdf() {
        let p = PriorSpec::laplace_location(2.0, 1.0, 5.0).unwrap();
        for &u in &[1e-6, 0.01, 0.3, 0.7, 0.999] {
            let th = p.quantile(u).unwrap();
            assert!(th > 0.0 && th <= 5.0);
            assert!((p.cdf(th) - u).abs() < 1e-10, "u={u}");
        }
        assert!(PriorSpec::laplace_location(0.0, 1.0, 5.0).is_err());
    }

    #[test]
    fn statistic_evaluation() {
        let mut v = vec![-1.0, 2.0, 3.0, 0.5];
        assert!((Statistic::Sign.evaluate(&mut v) - 1.0).abs() < 1e-15);
        let mut one = vec![0.0];
        assert!((Statistic::Ks.evaluate(&mut one) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn deterministic_given_seed() {
        let prior = PriorSpec::laplace_location(2.0, 1.0, 20.0).unwrap();
        let a = mc_bayes_risk(&prior, &small_cfg(9), Statistic::Sign).unwrap();
        let b = mc_bayes_risk(&prior, &small_cfg(9), Statistic::Sign).unwrap();
        assert_eq!(a, b);
        let c = mc_bayes_risk(&prior, &small_cfg(10), Statistic::Sign).unwrap();
        assert_ne!(a.rows, c.rows);
    }

    #[test]
    fn always_reject_limit() {
        let prior = PriorSpec::laplace_location(2.0, 1.0, 20.0).unwrap();
        let mut cfg = small_cfg(3);
        cfg.threshold_grid = vec![-100.0, 100.0];
        let r = mc_bayes_risk(&prior, &cfg, Statistic::Ks).unwrap();
        assert_eq!(r.rows[0].alpha_hat, 1.0);
        assert_eq!(r.rows[0].beta_hat, 0.0);
        assert_eq!(r.rows[1].alpha_hat, 0.0);
        assert_eq!(r.rows[1].beta_hat, 1.0);
    }

    #[test]
    fn monotone_coupling_across_thresholds() {
        let prior = PriorSpec::laplace_location(1.0, 1.0, 20.0).unwrap();
        for stat in [Statistic::Sign, Statistic::Ks] {
            let r = mc_bayes_risk(&prior, &small_cfg(5), stat).unwrap();
            for w in r.rows.windows(2) {
                assert!(w[1].alpha_hat <= w[0].alpha_hat);
                assert!(w[1].beta_hat >= w[0].beta_hat);
            }
        }
    }

    #[test]
    fn config_errors() {
        let prior = PriorSpec::laplace_location(2.0, 1.0, 20.0).unwrap();
        let mut cfg = small_cfg(1);
        cfg.threshold_grid = vec![];
        assert!(matches!(mc_bayes_risk(&prior, &cfg, Statistic::Sign), Err(Error::Config(_))));
        let mut cfg = small_cfg(1);
        cfg.threshold_grid = vec![1.0, 1.0];
        assert!(mc_bayes_risk(&prior, &cfg, Statistic::Sign).is_err());
        let mut cfg = small_cfg(1);
        cfg.m_null = 0;
        assert!(mc_bayes_risk(&prior, &cfg, Statistic::Sign).is_err());
    }

    #[test]
    fn exact_power_law_recovers_slope() {
        let radii = [0.2, 0.1, 0.05, 0.02];
        let probs: Vec<f64> = radii.iter().map(|r| r * r).collect();
        let fit = fit_power_law(&radii, &probs).unwrap();
        assert!((fit.kappa_hat - 2.0).abs() < 1e-12);
        assert!(fit.intercept.abs() < 1e-12);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_cell_is_reported() {
        let prior = PriorSpec::laplace_location(2.0, 1.0, 20.0).unwrap();
        let err = estimate_prior_exponent(&prior, &[0.5, 1e-6], 100, 1).unwrap_err();
        assert!(matches!(err, Error::EmptyCell { .. }));
        assert!(estimate_prior_exponent(&prior, &[0.1, 0.2], 100, 1).is_err());
        assert!(estimate_prior_exponent(&prior, &[30.0, 0.1], 100, 1).is_err());
    }

    #[test]
    fn plugin_values() {
        assert!((plugin_threshold(2.0, 1.0, 10_000).unwrap() - 2.146).abs() < 5e-4);
        for &rho in &[0.25, 1.0, 3.0] {
            let t = plugin_threshold(4.0 * rho, rho, 500).unwrap();
            assert!((t - 500f64.ln().sqrt()).abs() < 1e-14);
        }
        assert!(plugin_threshold(0.0, 1.0, 10).is_err());
    }
}
