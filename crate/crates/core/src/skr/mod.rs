//! Secret-key-rate analysis for the two-way probing model.
//!
//! The gap between what Alice shares with Bob and what she leaks to a MITM RIS
//! reduces to a function of `sigma_g^2`, the eigenvalues of the Alice-RIS channel
//! covariance and `sigma_zeta^2`. The identity checks in [`identities`] verify the
//! determinant factorization and the quadratic-form expectation behind it.

mod covariance;
pub mod identities;
mod quadrature;

pub use covariance::{estimate_covariance, estimate_sigma_g2, upa_covariance, CovarianceModel};
pub use identities::{determinant_factorization_residual, verify_quadratic_identity, QuadraticCheck};

use std::f64::consts::{E, PI};

use thiserror::Error;

use crate::chansim::SystemParams;

#[derive(Debug, Error)]
pub enum SkrError {
    #[error("need at least {need} samples, got {got}")]
    InsufficientSamples { need: usize, got: usize },
    #[error("non-finite intermediate: {0}")]
    NonFinite(String),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, SkrError>;

/// sigma_zeta^2 = Pt A_E C0 d_AR^-alpha + A_E sigma^2.
pub fn sigma_zeta_sq(params: &SystemParams, d_ar: f64) -> f64 {
    params.pt * params.amp_ae * params.c0 * d_ar.powf(-params.alpha) + params.amp_ae * params.sigma2
}

/// Entropies (bits) entering the gap and the gap itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkrBreakdown {
    /// h(y_B).
    pub h_yb: f64,
    /// h(y_R^(A)).
    pub h_yra: f64,
    /// h(y_A, y_R^(A) | x_A, y_R^(B), w).
    pub h_cond_joint: f64,
    /// h(y_A, y_B | x_A, x_B).
    pub h_cond_pair: f64,
    pub gap: f64,
    pub sigma_zeta2: f64,
    /// Mean of Pt lambda / (Pt lambda + sigma^2).
    pub eta_bar: f64,
}

impl SkrBreakdown {
    /// h(y_B) - h(y_R^(A)) + h(joint) - h(pair).
    pub fn assembled_gap(&self) -> f64 {
        self.h_yb - self.h_yra + self.h_cond_joint - self.h_cond_pair
    }
}

fn clipped(eigenvalues: &[f64]) -> Vec<f64> {
    let max = eigenvalues.iter().cloned().fold(0.0, f64::max);
    let floor = 1e-15 * max;
    eigenvalues.iter().map(|&l| l.max(floor)).collect()
}

/// 0.5 log2(Pt sg2 + s2) + 0.5 log2(sz2 sum l/(Pt l + s2) + 1) - 0.5 log2(2 Pt sg2 + s2).
pub fn gap_closed_form(pt: f64, sigma2: f64, sigma_g2: f64, sigma_zeta2: f64, eigenvalues: &[f64]) -> f64 {
    let s: f64 = eigenvalues.iter().map(|l| l / (pt * l + sigma2)).sum();
    0.5 * (pt * sigma_g2 + sigma2).log2() + 0.5 * (sigma_zeta2 * s + 1.0).log2()
        - 0.5 * (2.0 * pt * sigma_g2 + sigma2).log2()
}

pub fn skr_gap(cov: &CovarianceModel, params: &SystemParams, d_ar: f64) -> Result<SkrBreakdown> {
    if !(cov.sigma_g2 > 0.0) {
        return Err(SkrError::InvalidArgument("sigma_g2 must be positive".into()));
    }
    let (pt, s2) = (params.pt, params.sigma2);
    let lam = clipped(&cov.eigenvalues);
    let m = lam.len() as f64;
    let sz2 = sigma_zeta_sq(params, d_ar);
    let log_2pie = (2.0 * PI * E).log2();
    let logdet: f64 = lam.iter().map(|l| (pt * l + s2).log2()).sum();
    let weighted: f64 = lam.iter().map(|l| l * s2 / (pt * l + s2)).sum();
    let out = SkrBreakdown {
        h_yb: 0.5 * (log_2pie + (pt * cov.sigma_g2 + s2).log2()),
        h_yra: 0.5 * (m * log_2pie + logdet),
        h_cond_joint: 0.5 * (m + 1.0) * log_2pie + 0.5 * logdet + 0.5 * (sz2 * weighted + s2).log2(),
        h_cond_pair: 0.5 * (2.0 * log_2pie + (s2 * (2.0 * pt * cov.sigma_g2 + s2)).log2()),
        gap: gap_closed_form(pt, s2, cov.sigma_g2, sz2, &lam),
        sigma_zeta2: sz2,
        eta_bar: lam.iter().map(|l| pt * l / (pt * l + s2)).sum::<f64>() / m,
    };
    let fields = [
        ("h_yb", out.h_yb),
        ("h_yra", out.h_yra),
        ("h_cond_joint", out.h_cond_joint),
        ("h_cond_pair", out.h_cond_pair),
        ("gap", out.gap),
        ("eta_bar", out.eta_bar),
    ];
    for (name, v) in fields {
        if !v.is_finite() {
            return Err(SkrError::NonFinite(format!("{name} = {v}")));
        }
    }
    Ok(out)
}

/// Sufficient condition A_E M C0 d^-2alpha > 100 d_AB^-alpha.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Positivity {
    pub holds: bool,
    pub left: f64,
    pub right: f64,
    /// left / right.
    pub margin: f64,
}

pub fn positivity_condition(params: &SystemParams, d_max: f64, d_ab: f64) -> Result<Positivity> {
    if !(d_max >= 1.0) || !(d_ab >= 1.0) {
        return Err(SkrError::InvalidArgument("distances must be at least 1 m".into()));
    }
    let left = params.amp_ae * params.m() as f64 * params.c0 * d_max.powf(-2.0 * params.alpha);
    let right = 100.0 * d_ab.powf(-params.alpha);
    Ok(Positivity { holds: left > right, left, right, margin: left / right })
}
