//! Information rates: half-space KL projections by exponential tilting,
//! the MDP truncation level, distinguishability radii and the reference
//! Bahadur slopes for Laplace location.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::optim::golden_section;
use crate::output::extended_f64;
use crate::special::kl_bernoulli;
use crate::stats::check_simplex;

const TILT_TOL: f64 = 1e-10;

/// A finite null `F0` on `support` with payoffs `phi`, defining the half-space
/// `H = {G : sum G_j phi_j >= 0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiltedHalfSpace {
    pub support: Vec<f64>,
    pub probs: Vec<f64>,
    pub phi: Vec<f64>,
}

impl TiltedHalfSpace {
    pub fn new(support: Vec<f64>, probs: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        let h = Self {
            support,
            probs,
            phi,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.probs.len();
        if self.support.len() != k {
            return Err(Error::Dimension {
                expected: k,
                got: self.support.len(),
            });
        }
        if self.phi.len() != k {
            return Err(Error::Dimension {
                expected: k,
                got: self.phi.len(),
            });
        }
        check_simplex(&self.probs, true)?;
        if let Some(bad) = self.phi.iter().find(|v| !v.is_finite()) {
            return Err(domain(format!("non-finite payoff {bad}")));
        }
        Ok(())
    }

    /// `E_{F0}[phi]`.
    pub fn null_mean(&self) -> f64 {
        self.probs.iter().zip(&self.phi).map(|(p, f)| p * f).sum()
    }

    /// Cumulant generating function `Lambda(t) = ln E_{F0}[exp(t phi)]`,
    /// evaluated with a log-sum-exp shift.
    pub fn cgf(&self, t: f64) -> f64 {
        let shift = self
            .phi
            .iter()
            .map(|f| t * f)
            .fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = self
            .probs
            .iter()
            .zip(&self.phi)
            .map(|(p, f)| p * (t * f - shift).exp())
            .sum();
        shift + s.ln()
    }

    /// Tilted law `F_t`, proportional to `probs_j * exp(t phi_j)`.
    pub fn tilted(&self, t: f64) -> Vec<f64> {
        let lam = self.cgf(t);
        self.probs
            .iter()
            .zip(&self.phi)
            .map(|(p, f)| p * (t * f - lam).exp())
            .collect()
    }

    /// `Lambda'(t)`: the mean of `phi` under `F_t`.
    pub fn tilted_mean(&self, t: f64) -> f64 {
        self.tilted(t).iter().zip(&self.phi).map(|(q, f)| q * f).sum()
    }

    fn tilted_variance(&self, t: f64) -> f64 {
        let q = self.tilted(t);
        let m: f64 = q.iter().zip(&self.phi).map(|(q, f)| q * f).sum();
        q.iter().zip(&self.phi).map(|(q, f)| q * (f - m).powi(2)).sum()
    }
}

/// How the half-space problem was resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HalfSpaceStatus {
    /// Interior optimum with tilted mean zero.
    Interior,
    /// `E_{F0}[phi] >= 0`: the null already lies in the half-space.
    NullInHalfSpace,
    /// `max phi = 0`: the infimum is attained only as `t -> inf`.
    Boundary,
    /// `max phi < 0`: no distribution absolutely continuous w.r.t. `F0`
    /// reaches the half-space.
    Unreachable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfSpaceRate {
    /// `inf_{G in H} KL(G || F0)`; `+inf` when unreachable.
    #[serde(with = "extended_f64")]
    pub rate: f64,
    #[serde(with = "extended_f64")]
    pub t_star: f64,
    pub tilted_probs: Vec<f64>,
    pub status: HalfSpaceStatus,
}

/// `inf_{G: E_G phi >= 0} KL(G || F0) = sup_{t >= 0} -Lambda(t)`.
///
/// `-Lambda` is concave, so the maximiser is bracketed by doubling `T` until
/// the tilted mean turns nonnegative, located by golden-section search, and
/// polished with Newton steps on `Lambda'(t) = 0`.
pub fn half_space_rate(problem: &TiltedHalfSpace) -> Result<HalfSpaceRate> {
    problem.validate()?;
    if problem.null_mean() >= 0.0 {
        return Ok(HalfSpaceRate {
            rate: 0.0,
            t_star: 0.0,
            tilted_probs: problem.probs.clone(),
            status: HalfSpaceStatus::NullInHalfSpace,
        });
    }
    let max_phi = problem.phi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max_phi < 0.0 {
        return Ok(HalfSpaceRate {
            rate: f64::INFINITY,
            t_star: f64::INFINITY,
            tilted_probs: vec![0.0; problem.probs.len()],
            status: HalfSpaceStatus::Unreachable,
        });
    }
    if max_phi == 0.0 {
        // Mass flows onto the atoms with phi = 0.
        let zero_mass: f64 = problem
            .probs
            .iter()
            .zip(&problem.phi)
            .filter(|(_, f)| **f == 0.0)
            .map(|(p, _)| p)
            .sum();
        let tilted = problem
            .probs
            .iter()
            .zip(&problem.phi)
            .map(|(p, f)| if *f == 0.0 { p / zero_mass } else { 0.0 })
            .collect();
        return Ok(HalfSpaceRate {
            rate: -zero_mass.ln(),
            t_star: f64::INFINITY,
            tilted_probs: tilted,
            status: HalfSpaceStatus::Boundary,
        });
    }

    let mut hi = 1.0;
    while problem.tilted_mean(hi) < 0.0 {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(domain("failed to bracket the tilting parameter"));
        }
    }
    let (mut t, _) = golden_section(|t| problem.cgf(t), 0.0, hi, TILT_TOL);
    for _ in 0..20 {
        let g = problem.tilted_mean(t);
        let h = problem.tilted_variance(t);
        if !(h > 0.0) {
            break;
        }
        let next = (t - g / h).clamp(0.0, hi);
        let done = (next - t).abs() <= 1e-15 * t.max(1.0);
        t = next;
        if done {
            break;
        }
    }
    Ok(HalfSpaceRate {
        rate: (-problem.cgf(t)).max(0.0),
        t_star: t,
        tilted_probs: problem.tilted(t),
        status: HalfSpaceStatus::Interior,
    })
}

/// Effective KL exponent of the Bayes-optimal rejection set:
/// `(kappa / 2) ln n / n`.
pub fn mdp_truncation_level(kappa: f64, n: u64) -> Result<f64> {
    if !(kappa > 0.0) {
        return Err(domain(format!("kappa must be > 0, got {kappa}")));
    }
    if n < 2 {
        return Err(domain(format!("n must be >= 2, got {n}")));
    }
    let nf = n as f64;
    Ok(0.5 * kappa * nf.ln() / nf)
}

/// Decay of the Type-I level with `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "c", rename_all = "lowercase")]
pub enum Decay {
    /// `alpha_n = n^(-c)`.
    Polynomial(f64),
    /// `alpha_n = exp(-c n)`.
    Exponential(f64),
}

/// Smallest deviation detectable at level `alpha_n` under the tail
/// `exp(-2 rho t^2)`: `t_n / sqrt(n)` with `2 rho t_n^2 = -ln alpha_n`.
pub fn distinguishability_radius(rho: f64, decay: Decay, n: u64) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(domain(format!("rho must be > 0, got {rho}")));
    }
    if n < 2 {
        return Err(domain(format!("n must be >= 2, got {n}")));
    }
    let nf = n as f64;
    match decay {
        Decay::Polynomial(c) if c > 0.0 => Ok((c * nf.ln() / (2.0 * rho)).sqrt() / nf.sqrt()),
        Decay::Exponential(c) if c > 0.0 => Ok((c / (2.0 * rho)).sqrt()),
        _ => Err(domain("decay constant must be > 0")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BahadurSlopes {
    pub theta: f64,
    pub c_sign: f64,
    pub c_lrt: f64,
    /// Local form `theta^2`; not an exact slope.
    pub c_med: f64,
    pub c_med_is_local_approx: bool,
}

/// Bahadur slopes of the sign, likelihood-ratio and median tests for Laplace
/// location at `theta > 0`.
pub fn bahadur_slopes(theta: f64) -> Result<BahadurSlopes> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(domain(format!("theta must be > 0, got {theta}")));
    }
    let p_pos = 1.0 - 0.5 * (-theta).exp();
    Ok(BahadurSlopes {
        theta,
        c_sign: 2.0 * kl_bernoulli(p_pos, 0.5)?,
        // e^-theta + theta - 1 without cancellation for small theta
        c_lrt: 2.0 * ((-theta).exp_m1() + theta),
        c_med: theta * theta,
        c_med_is_local_approx: true,
    })
}
