//! Sample statistics shared by the attack, training and key modules.

use crate::C64;

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population variance (divides by n).
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}

/// Pearson correlation. `None` when lengths differ, fewer than two samples, or
/// either side has zero variance.
/// True when a centered sum of squares is within rounding noise of the mean,
/// so the sequence is constant for correlation purposes.
pub fn negligible_spread(sxx: f64, x: &[f64]) -> bool {
    let n = x.len() as f64;
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let noise = n * f64::EPSILON * scale;
    !(sxx > n * noise * noise) || !sxx.is_finite()
}

pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let mx = mean(x);
    let my = mean(y);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if negligible_spread(sxx, x) || negligible_spread(syy, y) {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Correlation of complex sequences, real and imaginary parts taken separately.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexCorrelation {
    pub re: f64,
    pub im: f64,
}

impl ComplexCorrelation {
    pub fn min_abs(&self) -> f64 {
        self.re.abs().min(self.im.abs())
    }
}

pub fn complex_correlation(a: &[C64], b: &[C64]) -> Option<ComplexCorrelation> {
    let re_a: Vec<f64> = a.iter().map(|z| z.re).collect();
    let re_b: Vec<f64> = b.iter().map(|z| z.re).collect();
    let im_a: Vec<f64> = a.iter().map(|z| z.im).collect();
    let im_b: Vec<f64> = b.iter().map(|z| z.im).collect();
    Some(ComplexCorrelation {
        re: pearson(&re_a, &re_b)?,
        im: pearson(&im_a, &im_b)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_basic() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        let y: Vec<f64> = x.iter().map(|v| -2.0 * v + 1.0).collect();
        assert!((pearson(&x, &y).unwrap() + 1.0).abs() < 1e-15);
        assert!(pearson(&x, &[1.0; 4]).is_none());
        assert!(pearson(&[1.0], &[2.0]).is_none());
        let flat = [0.029853010973657095; 7];
        assert!(pearson(&flat, &x.repeat(2)[..7]).is_none());
    }

    #[test]
    fn variance_is_population() {
        assert!((variance(&[1.0, 3.0]) - 1.0).abs() < 1e-15);
    }
}
