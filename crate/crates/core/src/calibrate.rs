//! Setting-specific calibrators and the threshold tables built from them.
//!
//! Every calibrator identifies `(rho, kappa)` for its statistic and reads the
//! leading-order threshold off the risk template. The `O(sqrt(log log n))`
//! refinement of the threshold is not applied.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{domain, Error, Result};
use crate::output::{self, document, records};
use crate::risk::{analytic_optimum, numeric_minimiser_default, CalibrationProblem, ThresholdReport};
use crate::special::{chi2_quantile, kolmogorov_quantile};

/// Tail rate of the two-sided KS statistic (`1 - K(t) ~ 2 exp(-2 t^2)`).
pub const RHO_KS: f64 = 1.0;
/// Tail rate of Gaussianised statistics with unit variance (`exp(-z^2/2)`).
pub const RHO_GAUSSIAN: f64 = 0.25;
/// Conventional level used for the fixed-alpha comparators.
pub const FIXED_ALPHA: f64 = 0.05;

fn report(
    setting: &str,
    rho: f64,
    kappa: f64,
    n: u64,
    params: &[(&str, f64)],
) -> Result<ThresholdReport> {
    let mut r = analytic_optimum(&CalibrationProblem::new(rho, kappa, n)?)?;
    r.setting = setting.to_string();
    r.params = params
        .iter()
        .map(|(k, v)| ((*k).to_string(), *v))
        .collect::<BTreeMap<_, _>>();
    Ok(r)
}

/// KS calibration: `rho = 1`, `t* = sqrt(kappa ln n / 4)`.
pub fn calibrate_ks(kappa: f64, n: u64) -> Result<ThresholdReport> {
    report("ks", RHO_KS, kappa, n, &[("kappa", kappa)])
}

/// Sample size at which the KS MDP threshold overtakes the fixed-alpha
/// Kolmogorov quantile: `exp(4 K^{-1}(0.95)^2 / kappa)`.
pub fn ks_crossing_n(kappa: f64) -> Result<f64> {
    if !(kappa > 0.0) {
        return Err(domain(format!("kappa must be > 0, got {kappa}")));
    }
    let q = kolmogorov_quantile(1.0 - FIXED_ALPHA)?;
    Ok((4.0 * RHO_KS * q * q / kappa).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignCalibration {
    #[serde(flatten)]
    pub report: ThresholdReport,
    /// Reject when the positive count reaches `n/2 + sqrt(lambda n ln n)/2`.
    pub count_threshold: f64,
}

/// Sign test under a Laplace-location prior with local exponent `lambda`.
pub fn calibrate_sign(lambda: f64, n: u64) -> Result<SignCalibration> {
    let report = report("sign", RHO_GAUSSIAN, lambda, n, &[("lambda", lambda)])?;
    let nf = n as f64;
    let count_threshold = 0.5 * nf + 0.5 * (lambda * nf * nf.ln()).sqrt();
    Ok(SignCalibration {
        report,
        count_threshold,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chi2Calibration {
    #[serde(flatten)]
    pub report: ThresholdReport,
    /// Critical value for the chi-squared statistic itself: `nu ln n`.
    pub chi2_critical: f64,
    /// Degrees of freedom `nu`.
    pub df: u32,
    /// The conventional `chi2_nu(0.95)` quantile for comparison.
    pub fixed_alpha_critical: f64,
}

fn chi2_like(setting: &str, df: u32, n: u64, params: &[(&str, f64)]) -> Result<Chi2Calibration> {
    let kappa = f64::from(df);
    let report = report(setting, RHO_GAUSSIAN, kappa, n, params)?;
    Ok(Chi2Calibration {
        chi2_critical: report.t_star * report.t_star,
        df,
        fixed_alpha_critical: chi2_quantile(1.0 - FIXED_ALPHA, df)?,
        report,
    })
}

/// Multinomial goodness of fit with `k` categories: `kappa = k - 1`.
pub fn calibrate_chi2(k: u32, n: u64) -> Result<Chi2Calibration> {
    if k < 2 {
        return Err(domain(format!("need k >= 2 categories, got {k}")));
    }
    chi2_like("chi2", k - 1, n, &[("k", f64::from(k))])
}

/// Independence in an `r x c` table: `kappa = (r - 1)(c - 1)`.
pub fn calibrate_contingency(r: u32, c: u32, n: u64) -> Result<Chi2Calibration> {
    if r < 2 || c < 2 {
        return Err(domain(format!("need r, c >= 2, got {r} x {c}")));
    }
    chi2_like(
        "contingency",
        (r - 1) * (c - 1),
        n,
        &[("r", f64::from(r)), ("c", f64::from(c))],
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherCalibration {
    #[serde(flatten)]
    pub report: ThresholdReport,
    /// Fisher-geodesic rejection radius `sqrt((lambda + d) ln n / n)`.
    pub radius: f64,
}

/// `d`-parameter model with prior exponent `lambda`: `kappa = lambda + d`.
pub fn calibrate_fisher(lambda: f64, d: u32, n: u64) -> Result<FisherCalibration> {
    if !(lambda >= 0.0) || d < 1 {
        return Err(domain(format!("need lambda >= 0 and d >= 1, got {lambda}, {d}")));
    }
    let kappa = lambda + f64::from(d);
    let report = report(
        "fisher",
        RHO_GAUSSIAN,
        kappa,
        n,
        &[("lambda", lambda), ("d", f64::from(d))],
    )?;
    let nf = n as f64;
    Ok(FisherCalibration {
        radius: (kappa * nf.ln() / nf).sqrt(),
        report,
    })
}

/// `(rho, kappa)` summary row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsRow {
    pub setting: String,
    pub rho: f64,
    pub kappa: String,
    pub a_star: String,
    /// `kappa` at the parameters used in the verification table.
    pub kappa_example: f64,
    pub a_star_example: f64,
}

/// Predicted vs. numeric minimiser of the finite-`n` template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationRow {
    pub setting: String,
    pub rho: f64,
    pub kappa: f64,
    pub a_star: f64,
    pub a_num_n1e4: f64,
    pub a_num_n1e6: f64,
    /// Relative error of the `n = 10^6` minimiser, in percent.
    pub error_pct_n1e6: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsRow {
    pub kappa: f64,
    pub n: u64,
    pub t_star_mdp: f64,
    pub t_fixed_alpha: f64,
    pub alpha_star: f64,
    /// Optimal-risk rate `(ln n / n)^(kappa/2)`.
    pub b_star: f64,
    /// Unweighted template risk at `a*`.
    pub template_risk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chi2Row {
    pub k: u32,
    pub kappa: u32,
    pub n: u64,
    pub chi2_star_mdp: f64,
    pub chi2_fixed_alpha: f64,
    pub alpha_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherRow {
    pub lambda: f64,
    pub d: u32,
    pub kappa: f64,
    pub r_n100: f64,
    pub r_n1000: f64,
    pub r_n10000: f64,
    pub r_n100000: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsCrossingRow {
    pub kappa: f64,
    pub crossing_n: f64,
}

/// All regenerated tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableBundle {
    pub constants: Vec<ConstantsRow>,
    pub verification: Vec<VerificationRow>,
    pub ks_thresholds: Vec<KsRow>,
    pub chi2_thresholds: Vec<Chi2Row>,
    pub fisher_radii: Vec<FisherRow>,
    pub ks_crossings: Vec<KsCrossingRow>,
}

pub const KS_KAPPAS: [f64; 4] = [1.0, 2.0, 5.0, 10.0];
pub const KS_NS: [u64; 4] = [100, 1_000, 10_000, 1_000_000];
pub const CHI2_KS: [u32; 3] = [3, 4, 10];
pub const CHI2_NS: [u64; 3] = [100, 1_000, 10_000];
pub const FISHER_CONFIGS: [(f64, u32); 4] = [(1.0, 1), (1.0, 2), (2.0, 3), (1.0, 5)];
pub const FISHER_NS: [u64; 4] = [100, 1_000, 10_000, 100_000];

fn verification_row(setting: &str, rho: f64, kappa: f64) -> Result<VerificationRow> {
    let a_num = |n| -> Result<f64> {
        Ok(numeric_minimiser_default(&CalibrationProblem::new(rho, kappa, n)?)?.argmin_a)
    };
    let a_star = kappa / (4.0 * rho);
    let a6 = a_num(1_000_000)?;
    Ok(VerificationRow {
        setting: setting.to_string(),
        rho,
        kappa,
        a_star,
        a_num_n1e4: a_num(10_000)?,
        a_num_n1e6: a6,
        error_pct_n1e6: 100.0 * (a6 - a_star) / a_star,
    })
}

/// Regenerate every threshold table.
pub fn emit_tables() -> Result<TableBundle> {
    let constants = vec![
        ConstantsRow {
            setting: "KS statistic".into(),
            rho: RHO_KS,
            kappa: "kappa (prior)".into(),
            a_star: "kappa/4".into(),
            kappa_example: 2.0,
            a_star_example: 0.5,
        },
        ConstantsRow {
            setting: "Laplace sign test".into(),
            rho: RHO_GAUSSIAN,
            kappa: "lambda".into(),
            a_star: "lambda".into(),
            kappa_example: 2.0,
            a_star_example: 2.0,
        },
        ConstantsRow {
            setting: "Multinomial chi2".into(),
            rho: RHO_GAUSSIAN,
            kappa: "k-1".into(),
            a_star: "k-1".into(),
            kappa_example: 2.0,
            a_star_example: 2.0,
        },
        ConstantsRow {
            setting: "Fisher geometry".into(),
            rho: RHO_GAUSSIAN,
            kappa: "lambda+d".into(),
            a_star: "lambda+d".into(),
            kappa_example: 3.0,
            a_star_example: 3.0,
        },
    ];

    let verification = vec![
        verification_row("KS statistic", RHO_KS, 2.0)?,
        verification_row("Laplace sign (lambda=2)", RHO_GAUSSIAN, 2.0)?,
        verification_row("Multinomial chi2 (k=3)", RHO_GAUSSIAN, 2.0)?,
        verification_row("Fisher (d=2, lambda=1)", RHO_GAUSSIAN, 3.0)?,
    ];

    let t_fixed = kolmogorov_quantile(1.0 - FIXED_ALPHA)?;
    let mut ks_thresholds = Vec::new();
    for &kappa in &KS_KAPPAS {
        for &n in &KS_NS {
            let r = calibrate_ks(kappa, n)?;
            let nf = n as f64;
            ks_thresholds.push(KsRow {
                kappa,
                n,
                t_star_mdp: r.t_star,
                t_fixed_alpha: t_fixed,
                alpha_star: r.alpha_star,
                b_star: (nf.ln() / nf).powf(kappa / 2.0),
                template_risk: r.risk_star,
            });
        }
    }

    let mut chi2_thresholds = Vec::new();
    for &k in &CHI2_KS {
        for &n in &CHI2_NS {
            let c = calibrate_chi2(k, n)?;
            chi2_thresholds.push(Chi2Row {
                k,
                kappa: c.df,
                n,
                chi2_star_mdp: c.chi2_critical,
                chi2_fixed_alpha: c.fixed_alpha_critical,
                alpha_star: c.report.alpha_star,
            });
        }
    }

    let fisher_radii = FISHER_CONFIGS
        .iter()
        .map(|&(lambda, d)| {
            let r = |n| calibrate_fisher(lambda, d, n).map(|f| f.radius);
            Ok(FisherRow {
                lambda,
                d,
                kappa: lambda + f64::from(d),
                r_n100: r(FISHER_NS[0])?,
                r_n1000: r(FISHER_NS[1])?,
                r_n10000: r(FISHER_NS[2])?,
                r_n100000: r(FISHER_NS[3])?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let ks_crossings = KS_KAPPAS
        .iter()
        .map(|&kappa| {
            Ok(KsCrossingRow {
                kappa,
                crossing_n: ks_crossing_n(kappa)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(TableBundle {
        constants,
        verification,
        ks_thresholds,
        chi2_thresholds,
        fisher_radii,
        ks_crossings,
    })
}

impl TableBundle {
    /// `(file stem, records)` for each table, in a fixed order.
    pub fn named_records(&self) -> Result<Vec<(&'static str, Vec<Value>)>> {
        Ok(vec![
            ("constants", records(&self.constants)?),
            ("verification", records(&self.verification)?),
            ("ks_thresholds", records(&self.ks_thresholds)?),
            ("chi2_thresholds", records(&self.chi2_thresholds)?),
            ("fisher_radii", records(&self.fisher_radii)?),
            ("ks_crossings", records(&self.ks_crossings)?),
        ])
    }

    /// The whole bundle as one versioned JSON document.
    pub fn to_json(&self) -> Result<Value> {
        Ok(document("tables", output::to_value(self)?))
    }

    /// Write one CSV per table plus `tables.json` into `dir`.
    pub fn write_dir(&self, dir: &Path, digits: usize) -> Result<()> {
        let io = |e: std::io::Error| Error::Config(format!("{}: {e}", dir.display()));
        fs::create_dir_all(dir).map_err(io)?;
        for (name, recs) in self.named_records()? {
            let file = fs::File::create(dir.join(format!("{name}.csv"))).map_err(io)?;
            output::write_csv(&recs, digits, file)?;
        }
        let mut json = self.to_json()?;
        output::round_value(&mut json, digits);
        let text = serde_json::to_string_pretty(&json).map_err(|e| Error::Parse(e.to_string()))?;
        fs::write(dir.join("tables.json"), text).map_err(io)?;
        Ok(())
    }
}
