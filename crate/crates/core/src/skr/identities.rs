//! Numerical checks of the block-determinant factorization and the
//! quadratic-form expectation used by the gap derivation.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::{sigma_zeta_sq, CovarianceModel, Result, SkrError};
use crate::chansim::{sample_noise, SystemParams};
use crate::C64;

fn sigma_plus(sigma: &DMatrix<C64>, pt: f64, sigma2: f64) -> DMatrix<C64> {
    let m = sigma.nrows();
    sigma * C64::new(pt, 0.0) + DMatrix::<C64>::identity(m, m) * C64::new(sigma2, 0.0)
}

fn quad(a: &DVector<C64>, b: &DVector<C64>) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Relative gap between det of the conditional covariance
/// [[z^H S z + s2, (x S z)^H], [x S z, Pt S + s2 I]] computed by LU and its
/// Schur-complement factorization. Requires |x_a|^2 = Pt.
pub fn determinant_factorization_residual(
    sigma: &DMatrix<C64>,
    pt: f64,
    sigma2: f64,
    zeta: &[C64],
    x_a: C64,
) -> Result<f64> {
    let m = sigma.nrows();
    if !sigma.is_square() || zeta.len() != m {
        return Err(SkrError::Dimension(format!("sigma {}x{}, zeta {}", m, sigma.ncols(), zeta.len())));
    }
    if ((x_a.norm_sqr() - pt) / pt).abs() > 1e-12 {
        return Err(SkrError::InvalidArgument("|x_a|^2 must equal Pt".into()));
    }
    let z = DVector::from_column_slice(zeta);
    let sz = sigma * &z;
    let d = sigma_plus(sigma, pt, sigma2);
    let b = &sz * x_a;
    let mut full = DMatrix::<C64>::zeros(m + 1, m + 1);
    full[(0, 0)] = quad(&z, &sz) + sigma2;
    for i in 0..m {
        full[(0, i + 1)] = b[i].conj();
        full[(i + 1, 0)] = b[i];
    }
    full.view_mut((1, 1), (m, m)).copy_from(&d);
    let det_full = full.lu().determinant();

    let lu = d.clone().lu();
    let u = lu.solve(&sz).ok_or_else(|| SkrError::Singular("Pt S + s2 I".into()))?;
    let schur = quad(&z, &sz) + sigma2 - quad(&sz, &u) * pt;
    let factored = schur * lu.determinant();
    if det_full.norm() == 0.0 {
        return Err(SkrError::Singular("conditional covariance".into()));
    }
    Ok((det_full - factored).norm() / det_full.norm())
}

/// Outcome of [`verify_quadratic_identity`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticCheck {
    /// Largest per-draw relative difference between the direct matrix form and
    /// the eigen-diagonalized form.
    pub deterministic_max_rel: f64,
    /// Relative difference between the Monte Carlo mean and
    /// sigma_zeta^2 sum lambda s2/(Pt lambda + s2) + s2.
    pub mc_rel: f64,
    pub closed_form: f64,
    pub mc_mean: f64,
}

/// Draws zeta ~ CN(0, sigma_zeta^2 I) and evaluates
/// z^H S z + s2 - Pt z^H S (Pt S + s2 I)^-1 S z.
pub fn verify_quadratic_identity<R: Rng + ?Sized>(
    cov: &CovarianceModel,
    params: &SystemParams,
    trials: usize,
    rng: &mut R,
) -> Result<QuadraticCheck> {
    let m = cov.m();
    if m > 64 {
        return Err(SkrError::InvalidArgument(format!("M = {m} exceeds 64")));
    }
    if trials == 0 {
        return Err(SkrError::InsufficientSamples { need: 1, got: 0 });
    }
    let (pt, s2) = (params.pt, params.sigma2);
    if s2 == 0.0 && cov.eigenvalues.iter().any(|&l| l == 0.0) {
        return Err(SkrError::Singular("sigma^2 = 0 with a zero eigenvalue".into()));
    }
    let sz2 = sigma_zeta_sq(params, cov.dist_ar);
    let lu = sigma_plus(&cov.matrix, pt, s2).lu();
    let filt: Vec<f64> = cov.eigenvalues.iter().map(|l| l * s2 / (pt * l + s2)).collect();
    let closed_form = sz2 * filt.iter().sum::<f64>() + s2;
    let uh = cov.eigenvectors.adjoint();
    let mut worst = 0.0f64;
    let mut acc = 0.0;
    for _ in 0..trials {
        let z = DVector::from_fn(m, |_, _| sample_noise(rng, sz2));
        let sz = &cov.matrix * &z;
        let u = lu.solve(&sz).ok_or_else(|| SkrError::Singular("Pt S + s2 I".into()))?;
        let direct = (quad(&z, &sz) + s2 - quad(&sz, &u) * pt).re;
        let c = &uh * &z;
        let diag: f64 = c.iter().zip(&filt).map(|(ci, f)| ci.norm_sqr() * f).sum::<f64>() + s2;
        worst = worst.max((direct - diag).abs() / diag.abs());
        acc += direct;
    }
    let mc_mean = acc / trials as f64;
    Ok(QuadraticCheck {
        deterministic_max_rel: worst,
        mc_rel: (mc_mean - closed_form).abs() / closed_form,
        closed_form,
        mc_mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn scalar_case_is_one_line_algebra() {
        let (pt, s2, v): (f64, f64, f64) = (0.5, 0.2, 1.5);
        let sigma = DMatrix::from_element(1, 1, C64::new(v, 0.0));
        let z = C64::new(0.7, -0.4);
        let x = C64::from_polar(pt.sqrt(), 0.3);
        let r = determinant_factorization_residual(&sigma, pt, s2, &[z], x).unwrap();
        assert!(r < 1e-14);
        // 2x2 determinant written out.
        let a = z.norm_sqr() * v + s2;
        let d = pt * v + s2;
        let det = a * d - pt * v * v * z.norm_sqr();
        let closed = (z.norm_sqr() * v * s2 / (pt * v + s2) + s2) * d;
        assert!((det - closed).abs() < 1e-14);
    }

    #[test]
    fn isotropic_per_draw_closed_form() {
        let m = 6;
        let v = 0.8;
        let p = SystemParams { pt: 1.0, sigma2: 0.3, amp_ae: 1.0, c0: 1.0, ..SystemParams::desk() };
        let cov = CovarianceModel::from_matrix(DMatrix::identity(m, m) * C64::new(v, 0.0), 1.0, 1.0).unwrap();
        let chk = verify_quadratic_identity(&cov, &p, 50, &mut seeded(3, 0)).unwrap();
        assert!(chk.deterministic_max_rel < 1e-12);
        // Per draw: |z|^2 v s2/(Pt v + s2) + s2; expectation sz2 M v s2/(Pt v+s2) + s2.
        let sz2 = sigma_zeta_sq(&p, 1.0);
        let expect = sz2 * m as f64 * v * 0.3 / (v + 0.3) + 0.3;
        assert!((chk.closed_form - expect).abs() < 1e-12);
    }

    #[test]
    fn rejects_large_m() {
        let cov = CovarianceModel::from_matrix(DMatrix::identity(65, 65), 1.0, 1.0).unwrap();
        assert!(verify_quadratic_identity(&cov, &SystemParams::desk(), 1, &mut seeded(1, 0)).is_err());
    }
}
