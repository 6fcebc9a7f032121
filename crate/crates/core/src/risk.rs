//! The two-term Bayes-risk template and its minimisers.
//!
//! For a threshold `t = sqrt(a ln n)` on the Gaussianised statistic the risk is
//! `w0 * n^(-2 rho a) + w1 * (a ln n / n)^(kappa / 2)`. All logarithms are
//! natural.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::optim::golden_section;

/// Points on the coarse grid scanned before golden-section refinement.
pub const GRID_POINTS: usize = 512;
/// Absolute tolerance in `a` for the refinement step.
pub const REFINE_TOL: f64 = 1e-6;
/// Threshold scale of the LDP comparison series: `t_n = LDP_SCALE * sqrt(n)`.
pub const LDP_SCALE: f64 = 1.0;

/// Parameters of the risk template.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationProblem {
    /// Tail-rate parameter: `P(sqrt(n) T_n > t) ~ exp(-2 rho t^2)`.
    pub rho: f64,
    /// Local prior mass exponent: `Pi_1(d <= eps) ~ eps^kappa`.
    pub kappa: f64,
    pub n: u64,
    /// Type-I weight `pi_0 L_0`.
    pub w0: f64,
    /// Type-II weight `pi_1 L_1`.
    pub w1: f64,
}

impl CalibrationProblem {
    /// Unweighted problem (`w0 = w1 = 1`).
    pub fn new(rho: f64, kappa: f64, n: u64) -> Result<Self> {
        Self::weighted(rho, kappa, n, 1.0, 1.0)
    }

    pub fn weighted(rho: f64, kappa: f64, n: u64, w0: f64, w1: f64) -> Result<Self> {
        let p = Self {
            rho,
            kappa,
            n,
            w0,
            w1,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(domain(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive(self.rho, "rho")?;
        positive(self.kappa, "kappa")?;
        positive(self.w0, "w0")?;
        positive(self.w1, "w1")?;
        if self.n < 2 {
            return Err(domain(format!("sample size must be >= 2, got {}", self.n)));
        }
        Ok(())
    }

    /// Same problem at a different sample size.
    pub fn with_n(&self, n: u64) -> Result<Self> {
        Self::weighted(self.rho, self.kappa, n, self.w0, self.w1)
    }

    /// The asymptotic risk-balancing constant `kappa / (4 rho)`.
    pub fn a_star(&self) -> f64 {
        self.kappa / (4.0 * self.rho)
    }

    /// Default search bracket `[0.01 a*, 4 a*]`.
    pub fn default_bracket(&self) -> (f64, f64) {
        let a = self.a_star();
        (0.01 * a, 4.0 * a)
    }

    fn ln_n(&self) -> f64 {
        (self.n as f64).ln()
    }
}

/// Type-I, Type-II and weighted total risk at one value of `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskTerms {
    pub a: f64,
    pub type1: f64,
    pub type2: f64,
    pub total: f64,
}

/// Evaluate the template at `a`. The Type-II term is clamped at 1 once
/// `a ln n / n` leaves the unit interval.
pub fn template_risk(p: &CalibrationProblem, a: f64) -> Result<RiskTerms> {
    p.validate()?;
    if !(a > 0.0) || !a.is_finite() {
        return Err(domain(format!("threshold parameter a must be > 0, got {a}")));
    }
    Ok(risk_unchecked(p, a))
}

fn risk_unchecked(p: &CalibrationProblem, a: f64) -> RiskTerms {
    let ln_n = p.ln_n();
    let type1 = (-2.0 * p.rho * a * ln_n).exp();
    let radius2 = (a * ln_n / p.n as f64).min(1.0);
    let type2 = radius2.powf(p.kappa / 2.0);
    RiskTerms {
        a,
        type1,
        type2,
        total: p.w0 * type1 + p.w1 * type2,
    }
}

/// Calibrated output for one setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub setting: String,
    pub rho: f64,
    pub kappa: f64,
    pub n: u64,
    pub a_star: f64,
    /// Threshold for the Gaussianised statistic `sqrt(n) T_n`.
    pub t_star: f64,
    /// Type-I rate `n^(-kappa/2)`.
    pub alpha_star: f64,
    /// Template risk at `a_star`.
    pub risk_star: f64,
    pub params: BTreeMap<String, f64>,
}

/// Closed-form optimum of the template: `a* = kappa / (4 rho)`,
/// `t* = sqrt(a* ln n)`, `alpha* = n^(-kappa/2)`.
pub fn analytic_optimum(p: &CalibrationProblem) -> Result<ThresholdReport> {
    p.validate()?;
    let a_star = p.a_star();
    let ln_n = p.ln_n();
    Ok(ThresholdReport {
        setting: "template".to_string(),
        rho: p.rho,
        kappa: p.kappa,
        n: p.n,
        a_star,
        t_star: (a_star * ln_n).sqrt(),
        alpha_star: (-0.5 * p.kappa * ln_n).exp(),
        risk_star: risk_unchecked(p, a_star).total,
        params: BTreeMap::new(),
    })
}

/// A sampled risk curve together with its refined minimiser.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskCurve {
    pub grid: Vec<RiskTerms>,
    pub argmin_a: f64,
    pub min_risk: f64,
}

/// Deterministic minimisation of the finite-`n` template over `[a_lo, a_hi]`:
/// a uniform grid of [`GRID_POINTS`] points, then golden-section search on the
/// two cells around the best grid point.
pub fn numeric_minimiser(p: &CalibrationProblem, a_lo: f64, a_hi: f64) -> Result<RiskCurve> {
    p.validate()?;
    if !(a_lo > 0.0 && a_hi > a_lo && a_hi.is_finite()) {
        return Err(domain(format!("need 0 < a_lo < a_hi, got [{a_lo}, {a_hi}]")));
    }
    let step = (a_hi - a_lo) / (GRID_POINTS - 1) as f64;
    let grid: Vec<RiskTerms> = (0..GRID_POINTS)
        .map(|i| {
            let a = if i == GRID_POINTS - 1 {
                a_hi
            } else {
                a_lo + step * i as f64
            };
            risk_unchecked(p, a)
        })
        .collect();
    let best = grid
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total.total_cmp(&y.1.total))
        .map(|(i, _)| i)
        .expect("grid is nonempty");
    if best == 0 || best == GRID_POINTS - 1 {
        return Err(Error::Bracket {
            lo: a_lo,
            hi: a_hi,
            boundary: grid[best].a,
        });
    }
    let (a, total) = golden_section(
        |a| risk_unchecked(p, a).total,
        grid[best - 1].a,
        grid[best + 1].a,
        REFINE_TOL,
    );
    let (argmin_a, min_risk) = if total <= grid[best].total {
        (a, total)
    } else {
        (grid[best].a, grid[best].total)
    };
    Ok(RiskCurve {
        grid,
        argmin_a,
        min_risk,
    })
}

/// [`numeric_minimiser`] over the default bracket.
pub fn numeric_minimiser_default(p: &CalibrationProblem) -> Result<RiskCurve> {
    let (lo, hi) = p.default_bracket();
    numeric_minimiser(p, lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Clt,
    Mdp,
    Ldp,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::Clt => "clt",
            Regime::Mdp => "mdp",
            Regime::Ldp => "ldp",
        }
    }
}

/// Risk of one calibration strategy at one sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimePoint {
    pub regime: Regime,
    pub n: u64,
    pub a: f64,
    pub type1: f64,
    pub type2: f64,
    pub total: f64,
}

/// Risk-vs-`n` series for the three calibration regimes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSeries {
    pub fixed_alpha: f64,
    pub clt: Vec<RegimePoint>,
    pub mdp: Vec<RegimePoint>,
    pub ldp: Vec<RegimePoint>,
}

impl RegimeSeries {
    pub fn points(&self) -> impl Iterator<Item = &RegimePoint> {
        self.clt.iter().chain(&self.mdp).chain(&self.ldp)
    }
}

/// Risk under fixed-alpha (CLT), optimal (MDP) and `t_n ∝ sqrt(n)` (LDP)
/// calibration across `n_values`. `p.n` is ignored.
pub fn regime_series(
    p: &CalibrationProblem,
    n_values: &[u64],
    fixed_alpha: f64,
) -> Result<RegimeSeries> {
    if n_values.is_empty() {
        return Err(domain("n_values must be nonempty"));
    }
    if n_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(domain("n_values must be strictly increasing"));
    }
    if !(fixed_alpha > 0.0 && fixed_alpha < 1.0) {
        return Err(domain(format!("fixed alpha must be in (0,1), got {fixed_alpha}")));
    }
    let mut series = RegimeSeries {
        fixed_alpha,
        clt: Vec::with_capacity(n_values.len()),
        mdp: Vec::with_capacity(n_values.len()),
        ldp: Vec::with_capacity(n_values.len()),
    };
    for &n in n_values {
        let q = p.with_n(n)?;
        let ln_n = q.ln_n();
        let point = |regime, a: f64| {
            let r = risk_unchecked(&q, a);
            RegimePoint {
                regime,
                n,
                a,
                type1: r.type1,
                type2: r.type2,
                total: r.total,
            }
        };
        series
            .clt
            .push(point(Regime::Clt, (1.0 / fixed_alpha).ln() / (2.0 * q.rho * ln_n)));
        series.mdp.push(point(Regime::Mdp, q.a_star()));
        series
            .ldp
            .push(point(Regime::Ldp, LDP_SCALE * LDP_SCALE * n as f64 / ln_n));
    }
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(rho: f64, kappa: f64, n: u64) -> CalibrationProblem {
        CalibrationProblem::new(rho, kappa, n).unwrap()
    }

    #[test]
    fn template_matches_direct_evaluation() {
        let r = template_risk(&problem(1.0, 2.0, 1_000_000), 0.5).unwrap();
        let ln_n = 1e6f64.ln();
        assert!((r.type1 - 1e-6).abs() < 1e-18);
        assert!((r.type2 - 0.5 * ln_n / 1e6).abs() < 1e-18);
        assert!((r.type2 - 6.9078e-6).abs() < 1e-10);
        assert!((r.total - 7.9078e-6).abs() < 1e-10);
    }

    #[test]
    fn template_table_cell() {
        let r = template_risk(&problem(1.0, 1.0, 100), 0.25).unwrap();
        assert!((r.type1 - 0.1).abs() < 1e-14);
        assert!((r.type2 - 0.1073).abs() < 1e-4);
        assert!((r.total - 0.2073).abs() < 1e-4);
    }

    #[test]
    fn template_zero_threshold_limit() {
        let r = template_risk(&problem(1.0, 2.0, 100), 1e-12).unwrap();
        assert!((r.type1 - 1.0).abs() < 1e-10);
        assert!((r.total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn template_weights_and_errors() {
        let p = CalibrationProblem::weighted(1.0, 2.0, 1000, 3.0, 0.5).unwrap();
        let r = template_risk(&p, 0.7).unwrap();
        assert!((r.total - (3.0 * r.type1 + 0.5 * r.type2)).abs() < 1e-15);
        assert!(template_risk(&p, 0.0).is_err());
        assert!(template_risk(&p, -1.0).is_err());
        assert!(CalibrationProblem::new(1.0, 2.0, 1).is_err());
        assert!(CalibrationProblem::new(0.0, 2.0, 10).is_err());
    }

    #[test]
    fn type2_clamped_at_one() {
        let r = template_risk(&problem(1.0, 2.0, 10), 100.0).unwrap();
        assert_eq!(r.type2, 1.0);
    }

    #[test]
    fn analytic_optimum_reference_values() {
        assert!((analytic_optimum(&problem(1.0, 2.0, 100)).unwrap().a_star - 0.5).abs() < 1e-15);
        assert!((analytic_optimum(&problem(0.25, 3.0, 100)).unwrap().a_star - 3.0).abs() < 1e-15);
        let r = analytic_optimum(&problem(1.0, 2.0, 10_000)).unwrap();
        assert!((r.t_star - 2.146).abs() < 5e-4);
        assert!((r.alpha_star - 1e-4).abs() < 1e-16);
    }

    #[test]
    fn alpha_star_times_rate_is_one() {
        for &kappa in &[0.5, 1.0, 2.0, 3.7, 10.0] {
            for &n in &[2u64, 100, 12_345, 1_000_000] {
                let r = analytic_optimum(&problem(0.7, kappa, n)).unwrap();
                let prod = r.alpha_star * (n as f64).powf(kappa / 2.0);
                assert!((prod - 1.0).abs() < 1e-12, "kappa={kappa} n={n} prod={prod}");
            }
        }
    }

    #[test]
    fn numeric_minimiser_table_values() {
        let ks = numeric_minimiser_default(&problem(1.0, 2.0, 10_000)).unwrap();
        assert!((ks.argmin_a - 0.54).abs() <= 0.005);
        let sign = numeric_minimiser_default(&problem(0.25, 2.0, 1_000_000)).unwrap();
        assert!((sign.argmin_a - 1.90).abs() <= 0.005);
    }

    /// Setting the derivative of `n^(-2 rho a) + (w1/w0) a ln n / n` to zero
    /// gives `a = (ln n + ln(2 rho w0 / w1)) / (2 rho ln n)` for kappa = 2.
    fn kappa2_oracle(rho: f64, n: f64, w0: f64, w1: f64) -> f64 {
        (n.ln() + (2.0 * rho * w0 / w1).ln()) / (2.0 * rho * n.ln())
    }

    #[test]
    fn numeric_minimiser_matches_kappa2_closed_form() {
        for &n in &[100u64, 1_000, 10_000, 1_000_000, 100_000_000] {
            let c = numeric_minimiser_default(&problem(1.0, 2.0, n)).unwrap();
            let expected = 0.5 + std::f64::consts::LN_2 / (2.0 * (n as f64).ln());
            assert!((expected - kappa2_oracle(1.0, n as f64, 1.0, 1.0)).abs() < 1e-15);
            assert!((c.argmin_a - expected).abs() < 1e-5, "n={n}");
        }
        let p = CalibrationProblem::weighted(0.5, 2.0, 50_000, 2.0, 0.5).unwrap();
        let c = numeric_minimiser_default(&p).unwrap();
        assert!((c.argmin_a - kappa2_oracle(0.5, 5e4, 2.0, 0.5)).abs() < 1e-5);
    }

    #[test]
    fn numeric_minimiser_curve_invariants() {
        let p = problem(0.5, 3.0, 5_000);
        let c = numeric_minimiser_default(&p).unwrap();
        assert_eq!(c.grid.len(), GRID_POINTS);
        assert!(c.grid.windows(2).all(|w| w[1].a > w[0].a));
        for g in &c.grid {
            assert!((g.total - (g.type1 + g.type2)).abs() < 1e-15);
            assert!(c.min_risk <= g.total);
        }
        assert!(c.argmin_a >= c.grid[0].a && c.argmin_a <= c.grid[GRID_POINTS - 1].a);
    }

    #[test]
    fn numeric_minimiser_bracket_error() {
        let p = problem(1.0, 2.0, 10_000);
        assert!(matches!(
            numeric_minimiser(&p, 0.01, 0.2),
            Err(Error::Bracket { .. })
        ));
        assert!(matches!(
            numeric_minimiser(&p, 2.0, 5.0),
            Err(Error::Bracket { .. })
        ));
        assert!(numeric_minimiser(&p, 0.5, 0.5).is_err());
    }

    #[test]
    fn regime_series_shapes() {
        let p = problem(1.0, 2.0, 100);
        let ns = [100u64, 10_000, 1_000_000];
        let s = regime_series(&p, &ns, 0.05).unwrap();
        for pt in &s.clt {
            assert!((pt.type1 - 0.05).abs() < 1e-12);
            assert!(pt.total >= 0.05);
        }
        let mdp6 = s.mdp[2];
        assert!((mdp6.total - 7.91e-6).abs() < 1e-8);
        for pt in &s.ldp {
            assert!((pt.type2 - 1.0).abs() < 1e-12);
        }
        assert!(regime_series(&p, &[], 0.05).is_err());
        assert!(regime_series(&p, &[100, 10], 0.05).is_err());
        assert!(regime_series(&p, &[100], 1.0).is_err());
    }
}
