//! VC-dimension and sample-size calculators.
//!
//! The underlying bounds are asymptotic; every hidden constant is pinned to 1
//! so the outputs are order-of-magnitude planning values. VC combination
//! counts use log base 2, confidence terms the natural log. Bounds too large
//! for an `f64` come back as `f64::INFINITY` (with a logged warning).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::lattice_step;

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma <= 1.0 {
        Ok(())
    } else {
        Err(Error::Input(format!("gamma must lie in (0, 1], got {gamma}")))
    }
}

fn check_slack(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 0.5 {
        Ok(())
    } else {
        Err(Error::Input(format!("{name} must lie in (0, 1/2), got {v}")))
    }
}

fn overflow(what: &str) -> f64 {
    log::warn!("{what} exceeds the f64 range; returning +inf");
    f64::INFINITY
}

/// `d t ceil(log2 max(t, 2))`.
pub fn vc_proper_euclidean(d: usize, t: usize) -> f64 {
    let t = t as f64;
    d as f64 * t * t.max(2.0).log2().ceil()
}

/// Proper bound with `t` replaced by `ceil((8 t / gamma^2)^(4 / gamma^2))`.
pub fn vc_improper_euclidean(d: usize, t: usize, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    let g2 = gamma * gamma;
    let base = 8.0 * t as f64 / g2;
    let exponent = 4.0 / g2;
    let t_eff = base.powf(exponent).ceil();
    if t_eff.is_finite() {
        let d_bound = d as f64 * t_eff * t_eff.max(2.0).log2().ceil();
        return Ok(if d_bound.is_finite() { d_bound } else { overflow("improper VC bound") });
    }
    // log2 of the bound, to say how far out of range it is
    let log2_t = exponent * base.log2();
    log::debug!("improper VC bound ~ 2^{:.1}", (d as f64).log2() + log2_t + log2_t.ceil().log2());
    Ok(overflow("improper VC bound"))
}

/// `gamma^-2 s ln(1/beta)^2 t_factor`, with `t_factor = t` (proper) or
/// `t^ceil(gamma^-2)` (improper) and `beta` the lattice step.
pub fn vc_rkhs(s: usize, gamma: f64, t: usize, lipschitz: f64, improper: bool) -> Result<f64> {
    check_gamma(gamma)?;
    if s == 0 || t == 0 {
        return Err(Error::Input("s and t must be >= 1".into()));
    }
    if !(lipschitz > 0.0 && lipschitz.is_finite()) {
        return Err(Error::Input(format!("lipschitz constant must be positive, got {lipschitz}")));
    }
    let beta = lattice_step(gamma, s, lipschitz);
    let log_beta = (1.0 / beta).ln();
    let base = s as f64 * log_beta * log_beta / (gamma * gamma);
    let t_factor = if improper { (t as f64).powf((1.0 / (gamma * gamma)).ceil()) } else { t as f64 };
    let d_bound = base * t_factor;
    Ok(if d_bound.is_finite() { d_bound } else { overflow("RKHS VC bound") })
}

/// `ceil((D + ln(1/delta)) / eps)`; infinite when `D` is.
pub fn sample_size(vc: f64, eps: f64, delta: f64) -> Result<f64> {
    check_slack("epsilon", eps)?;
    check_slack("delta", delta)?;
    if !(vc > 0.0) {
        return Err(Error::Input(format!("VC dimension must be positive, got {vc}")));
    }
    Ok(((vc + (1.0 / delta).ln()) / eps).ceil())
}

/// Either a Euclidean dimension or an RKHS encoding with its Lipschitz constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "space", rename_all = "snake_case")]
pub enum PacSpace {
    Euclidean { d: usize },
    Rkhs { s: usize, lipschitz: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacQuery {
    pub epsilon: f64,
    pub delta: f64,
    pub gamma: f64,
    pub t: usize,
    pub improper: bool,
    #[serde(flatten)]
    pub space: PacSpace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacPlan {
    pub inputs: PacQuery,
    /// Lattice step; only meaningful for RKHS queries.
    pub beta: Option<f64>,
    pub vc_dimension: f64,
    pub sample_size: f64,
    pub note: String,
}

impl PacQuery {
    pub fn validate(&self) -> Result<()> {
        check_slack("epsilon", self.epsilon)?;
        check_slack("delta", self.delta)?;
        check_gamma(self.gamma)?;
        if self.t == 0 {
            return Err(Error::Input("t must be >= 1".into()));
        }
        match self.space {
            PacSpace::Euclidean { d: 0 } => Err(Error::Input("d must be >= 1".into())),
            PacSpace::Rkhs { s: 0, .. } => Err(Error::Input("s must be >= 1".into())),
            _ => Ok(()),
        }
    }

    pub fn plan(&self) -> Result<PacPlan> {
        self.validate()?;
        let (beta, vc) = match self.space {
            PacSpace::Euclidean { d } => {
                let vc = if self.improper {
                    vc_improper_euclidean(d, self.t, self.gamma)?
                } else {
                    vc_proper_euclidean(d, self.t)
                };
                (None, vc)
            }
            PacSpace::Rkhs { s, lipschitz } => (
                Some(lattice_step(self.gamma, s, lipschitz)),
                vc_rkhs(s, self.gamma, self.t, lipschitz, self.improper)?,
            ),
        };
        Ok(PacPlan {
            inputs: self.clone(),
            beta,
            vc_dimension: vc,
            sample_size: sample_size(vc, self.epsilon, self.delta)?,
            note: "order-of-magnitude planning values, constants pinned to 1".into(),
        })
    }
}
