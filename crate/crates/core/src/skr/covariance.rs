use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use super::quadrature::composite;
use super::{Result, SkrError};
use crate::chansim::{
    combined_channel, sample_direct_channel, sample_ris_phase, ChannelVector, LinkGeometry, SystemParams,
};
use crate::rng::seeded;
use crate::C64;

/// Alice-RIS channel covariance with its eigen-decomposition and the variance
/// of the combined channel.
#[derive(Debug, Clone)]
pub struct CovarianceModel {
    pub matrix: DMatrix<C64>,
    /// Ascending, clipped at zero.
    pub eigenvalues: Vec<f64>,
    /// Columns match `eigenvalues`.
    pub eigenvectors: DMatrix<C64>,
    pub sigma_g2: f64,
    pub dist_ar: f64,
}

impl CovarianceModel {
    /// Symmetrizes to (A + A^H)/2 and eigen-decomposes.
    pub fn from_matrix(matrix: DMatrix<C64>, sigma_g2: f64, dist_ar: f64) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(SkrError::Dimension(format!("{}x{} covariance", matrix.nrows(), matrix.ncols())));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(SkrError::NonFinite("covariance entry".into()));
        }
        let herm = (&matrix + matrix.adjoint()) * C64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(herm.clone());
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
        let eigenvectors = DMatrix::from_fn(herm.nrows(), herm.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
        Ok(Self { matrix: herm, eigenvalues, eigenvectors, sigma_g2, dist_ar })
    }

    pub fn m(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Zero-mean sample covariance (1/N) sum g g^H from at least 10 M channel draws;
/// sigma_g2 is the mean power of `combined`.
pub fn estimate_covariance(samples: &[ChannelVector], combined: &[C64], dist_ar: f64) -> Result<CovarianceModel> {
    let m = samples.first().map(|s| s.len()).unwrap_or(0);
    let need = (10 * m).max(1);
    if samples.len() < need || m == 0 {
        return Err(SkrError::InsufficientSamples { need, got: samples.len() });
    }
    if combined.is_empty() {
        return Err(SkrError::InsufficientSamples { need: 1, got: 0 });
    }
    let mut acc = DMatrix::<C64>::zeros(m, m);
    for s in samples {
        if s.len() != m {
            return Err(SkrError::Dimension(format!("sample of length {} among length {m}", s.len())));
        }
        for i in 0..m {
            let gi = s.0[i];
            for j in 0..m {
                acc[(i, j)] += gi * s.0[j].conj();
            }
        }
    }
    acc /= C64::new(samples.len() as f64, 0.0);
    let sigma_g2 = combined.iter().map(|g| g.norm_sqr()).sum::<f64>() / combined.len() as f64;
    CovarianceModel::from_matrix(acc, sigma_g2, dist_ar)
}

/// Angle-averaged UPA covariance C0 d^-alpha E[xi xi^H] with elevation and
/// azimuth uniform on [-pi/2, pi/2].
///
/// The azimuth average of exp(j c sin b) is J0(c), evaluated by the periodic
/// trapezoid rule; the elevation integral uses composite Gauss-Legendre.
pub fn upa_covariance(params: &SystemParams, dist: f64) -> Result<DMatrix<C64>> {
    params.validate().map_err(|e| SkrError::InvalidArgument(e.to_string()))?;
    let (mx, my) = (params.mx, params.my);
    let k = TAU * params.elem_spacing / params.wavelength;
    let c_max = k * (mx.max(my) as f64);
    let n_trap = 64 + 2 * c_max.ceil() as usize;
    let panels = 8usize.max((c_max / 4.0).ceil() as usize);
    let (eta, weight) = composite(0.0, FRAC_PI_2, panels, 16);
    let beta_sin: Vec<f64> = (0..n_trap).map(|i| (TAU * i as f64 / n_trap as f64).sin()).collect();
    let j0 = |c: f64| beta_sin.iter().map(|s| (c * s).cos()).sum::<f64>() / n_trap as f64;

    // table[dc][dr + my - 1] for dc in 0..mx, dr in -(my-1)..=(my-1).
    let width = 2 * my - 1;
    let mut table = vec![C64::new(0.0, 0.0); mx * width];
    for (e, w) in eta.iter().zip(&weight) {
        let (se, ce) = e.sin_cos();
        let bess: Vec<f64> = (0..mx).map(|dc| j0(k * se * dc as f64)).collect();
        for (dc, b) in bess.iter().enumerate() {
            for (idx, dr) in (-(my as i64 - 1)..=(my as i64 - 1)).enumerate() {
                // Integrand is even in eta: (1/pi) over [-pi/2, pi/2] = (2/pi) over [0, pi/2].
                table[dc * width + idx] += C64::from_polar(2.0 / PI * w * b, k * ce * dr as f64);
            }
        }
    }
    let scale = params.c0 * dist.max(1.0).powf(-params.alpha);
    let m = params.m();
    Ok(DMatrix::from_fn(m, m, |a, b| {
        let (ca, ra) = ((a % mx) as i64, (a / mx) as i64);
        let (cb, rb) = ((b % mx) as i64, (b / mx) as i64);
        let dc = (ca - cb).unsigned_abs() as usize;
        let dr = ra - rb + my as i64 - 1;
        table[dc * width + dr as usize] * scale
    }))
}

/// Monte Carlo E|g|^2 of the combined channel for Alice and Bob at fixed
/// distances with uniform path angles.
pub fn estimate_sigma_g2(params: &SystemParams, d_ar: f64, d_br: f64, n: usize, seed: u64) -> Result<f64> {
    if n == 0 {
        return Err(SkrError::InsufficientSamples { need: 1, got: 0 });
    }
    let mut rng = seeded(seed, 0);
    let geometry = |d: f64, rng: &mut crate::rng::SimRng| {
        let angles = (0..params.num_paths)
            .map(|_| (rng.gen_range(-FRAC_PI_2..=FRAC_PI_2), rng.gen_range(-FRAC_PI_2..=FRAC_PI_2)))
            .collect();
        LinkGeometry::new(d, angles).map_err(|e| SkrError::InvalidArgument(e.to_string()))
    };
    let mut acc = 0.0;
    for _ in 0..n {
        let ga = geometry(d_ar, &mut rng)?;
        let gb = geometry(d_br, &mut rng)?;
        let err = |e: crate::chansim::ChanError| SkrError::InvalidArgument(e.to_string());
        let a = sample_direct_channel(params, &ga, &mut rng).map_err(err)?;
        let b = sample_direct_channel(params, &gb, &mut rng).map_err(err)?;
        let w = sample_ris_phase(params, &mut rng);
        acc += combined_channel(a.as_slice(), b.as_slice(), w.as_slice()).map_err(err)?.norm_sqr();
    }
    Ok(acc / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repeated_sample_is_rank_one() {
        let s = ChannelVector(vec![C64::new(1.0, 2.0), C64::new(-0.5, 0.1), C64::new(0.3, 0.0)]);
        let samples = vec![s; 30];
        let cov = estimate_covariance(&samples, &[C64::new(1.0, 0.0)], 5.0).unwrap();
        let nonzero = cov.eigenvalues.iter().filter(|&&l| l > 1e-12).count();
        assert_eq!(nonzero, 1);
        let norm2 = 1.0 + 4.0 + 0.25 + 0.01 + 0.09;
        assert!((cov.eigenvalues[2] - norm2).abs() < 1e-12);
    }

    #[test]
    fn empty_and_short_inputs_fail() {
        assert!(estimate_covariance(&[], &[C64::new(1.0, 0.0)], 1.0).is_err());
        let s = ChannelVector(vec![C64::new(1.0, 0.0); 4]);
        assert!(estimate_covariance(&vec![s; 39], &[C64::new(1.0, 0.0)], 1.0).is_err());
    }

    #[test]
    fn upa_diagonal_is_per_element_variance() {
        let p = SystemParams::desk();
        let s = upa_covariance(&p, 10.0).unwrap();
        for i in 0..16 {
            assert!((s[(i, i)].re - 1e-6).abs() < 1e-18);
            assert!(s[(i, i)].im.abs() < 1e-18);
        }
        let herm_err = (&s - s.adjoint()).norm();
        assert!(herm_err < 1e-18);
    }

    #[test]
    fn upa_matches_brute_force_double_integral() {
        // Independent midpoint rule over both angles for a 3x3 array.
        let p = SystemParams::desk().with_array(3, 3);
        let s = upa_covariance(&p, 1.0).unwrap();
        let k = TAU * p.elem_spacing / p.wavelength;
        let n = 1500;
        let h = PI / n as f64;
        for &(a, b) in &[(0usize, 4usize), (0, 8), (1, 6), (2, 3)] {
            let (dc, dr) = ((a % 3) as f64 - (b % 3) as f64, (a / 3) as f64 - (b / 3) as f64);
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..n {
                let e = -FRAC_PI_2 + (i as f64 + 0.5) * h;
                for j in 0..n {
                    let bb = -FRAC_PI_2 + (j as f64 + 0.5) * h;
                    acc += C64::from_polar(1.0, k * (e.sin() * bb.sin() * dc + e.cos() * dr));
                }
            }
            let brute = acc * (h * h / (PI * PI)) * p.c0;
            assert!((brute - s[(a, b)]).norm() < 2e-8, "{a},{b}: {brute} vs {}", s[(a, b)]);
        }
    }
}
