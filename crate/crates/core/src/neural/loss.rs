//! Correlation and MSE losses with analytic gradients.
//!
//! For centered vectors dx, dy with Sxx = sum dx^2, Syy = sum dy^2,
//! d rho / d x_i = dy_i / sqrt(Sxx Syy) - rho dx_i / Sxx.
//! |rho| uses subgradient 0 at rho = 0. A zero-variance side makes a
//! correlation term contribute 0 with zero gradient; spread at the level of
//! rounding noise in the mean counts as zero.

use super::{NeuralError, Result};
use crate::stats::{mean, negligible_spread};

/// Pearson correlation; errors on zero variance.
pub fn corr_coef(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x.len(), y.len())?;
    crate::stats::pearson(x, y).ok_or(NeuralError::ZeroVariance)
}

fn check_pair(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(NeuralError::Batch(format!("feature lengths {a} and {b} differ")));
    }
    if a < 2 {
        return Err(NeuralError::Batch(format!("correlation needs at least 2 samples, got {a}")));
    }
    Ok(())
}

/// rho(x, y) with gradients w.r.t. both arguments, `None` for zero variance.
pub fn corr_with_grads(x: &[f64], y: &[f64]) -> Option<(f64, Vec<f64>, Vec<f64>)> {
    let (mx, my) = (mean(x), mean(y));
    let dx: Vec<f64> = x.iter().map(|v| v - mx).collect();
    let dy: Vec<f64> = y.iter().map(|v| v - my).collect();
    let sxx: f64 = dx.iter().map(|v| v * v).sum();
    let syy: f64 = dy.iter().map(|v| v * v).sum();
    if negligible_spread(sxx, x) || negligible_spread(syy, y) || !(sxx * syy).is_finite() {
        return None;
    }
    let sxy: f64 = dx.iter().zip(&dy).map(|(a, b)| a * b).sum();
    let denom = (sxx * syy).sqrt();
    let rho = sxy / denom;
    let gx = dx.iter().zip(&dy).map(|(a, b)| b / denom - rho * a / sxx).collect();
    let gy = dx.iter().zip(&dy).map(|(a, b)| a / denom - rho * b / syy).collect();
    Some((rho, gx, gy))
}

/// |rho| with its (sub)gradients; zero for zero variance.
fn abs_corr(x: &[f64], y: &[f64]) -> (f64, f64, Vec<f64>, Vec<f64>) {
    match corr_with_grads(x, y) {
        Some((rho, gx, gy)) => {
            let s = if rho > 0.0 {
                1.0
            } else if rho < 0.0 {
                -1.0
            } else {
                0.0
            };
            (rho.abs(), rho, gx.into_iter().map(|g| s * g).collect(), gy.into_iter().map(|g| s * g).collect())
        }
        None => (0.0, 0.0, vec![0.0; x.len()], vec![0.0; y.len()]),
    }
}

/// Features of Alice, Bob and the adversary (Mallory or Eve) for one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBatch {
    pub f_a: Vec<f64>,
    pub f_b: Vec<f64>,
    pub f_m: Vec<f64>,
}

impl FeatureBatch {
    fn check(&self) -> Result<()> {
        check_pair(self.f_a.len(), self.f_b.len())?;
        check_pair(self.f_a.len(), self.f_m.len())
    }
}

/// Generator-side loss with gradients for Alice's and Bob's features.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorLoss {
    pub value: f64,
    pub grad_a: Vec<f64>,
    pub grad_b: Vec<f64>,
    pub rho_ab: f64,
    pub rho_am: f64,
    pub rho_bm: f64,
}

/// Adversary-side loss with the gradient for its own feature.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversaryLoss {
    pub value: f64,
    pub grad_m: Vec<f64>,
}

/// -|rho(a,b)| + lambda (|rho(a,m)| + |rho(b,m)|), f_m detached.
pub fn generator_loss(batch: &FeatureBatch, lambda: f64) -> Result<GeneratorLoss> {
    batch.check()?;
    let (ab, rab, ga_ab, gb_ab) = abs_corr(&batch.f_a, &batch.f_b);
    let (am, ram, ga_am, _) = abs_corr(&batch.f_a, &batch.f_m);
    let (bm, rbm, gb_bm, _) = abs_corr(&batch.f_b, &batch.f_m);
    Ok(GeneratorLoss {
        value: -ab + lambda * (am + bm),
        grad_a: ga_ab.iter().zip(&ga_am).map(|(x, y)| -x + lambda * y).collect(),
        grad_b: gb_ab.iter().zip(&gb_bm).map(|(x, y)| -x + lambda * y).collect(),
        rho_ab: rab,
        rho_am: ram,
        rho_bm: rbm,
    })
}

/// -|rho(a,m)| - |rho(b,m)|, f_a and f_b detached.
pub fn adversary_loss(batch: &FeatureBatch) -> Result<AdversaryLoss> {
    batch.check()?;
    let (am, _, _, gm_a) = abs_corr(&batch.f_a, &batch.f_m);
    let (bm, _, _, gm_b) = abs_corr(&batch.f_b, &batch.f_m);
    Ok(AdversaryLoss { value: -am - bm, grad_m: gm_a.iter().zip(&gm_b).map(|(x, y)| -x - y).collect() })
}

pub fn mse(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.len() as f64
}

/// MSE(a,b) - lambda (MSE(a,m) + MSE(b,m)), f_m detached.
pub fn mse_adversarial_loss(batch: &FeatureBatch, lambda: f64) -> Result<GeneratorLoss> {
    batch.check()?;
    let n = batch.f_a.len() as f64;
    let (a, b, m) = (&batch.f_a, &batch.f_b, &batch.f_m);
    let rho = |x: &[f64], y: &[f64]| crate::stats::pearson(x, y).unwrap_or(0.0);
    Ok(GeneratorLoss {
        value: mse(a, b) - lambda * (mse(a, m) + mse(b, m)),
        grad_a: (0..a.len()).map(|i| 2.0 * (a[i] - b[i]) / n - lambda * 2.0 * (a[i] - m[i]) / n).collect(),
        grad_b: (0..a.len()).map(|i| 2.0 * (b[i] - a[i]) / n - lambda * 2.0 * (b[i] - m[i]) / n).collect(),
        rho_ab: rho(a, b),
        rho_am: rho(a, m),
        rho_bm: rho(b, m),
    })
}

/// Mallory's side of the MSE variant: MSE(a,m) + MSE(b,m).
pub fn mse_adversary_loss(batch: &FeatureBatch) -> Result<AdversaryLoss> {
    batch.check()?;
    let n = batch.f_a.len() as f64;
    let (a, b, m) = (&batch.f_a, &batch.f_b, &batch.f_m);
    Ok(AdversaryLoss {
        value: mse(a, m) + mse(b, m),
        grad_m: (0..m.len()).map(|i| 2.0 * (m[i] - a[i]) / n + 2.0 * (m[i] - b[i]) / n).collect(),
    })
}

/// Eve's loss -|rho(e,a)| - |rho(e,b)| with the gradient for f_e.
pub fn eve_loss(f_e: &[f64], f_a: &[f64], f_b: &[f64]) -> Result<AdversaryLoss> {
    adversary_loss(&FeatureBatch { f_a: f_a.to_vec(), f_b: f_b.to_vec(), f_m: f_e.to_vec() })
}
