use std::f64::consts::{FRAC_PI_2, TAU};

use rand::Rng;
use rand_distr::StandardNormal;

use super::{ChanError, Result, SystemParams};
use crate::C64;

/// LoS distance plus one (elevation, azimuth) pair per path.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkGeometry {
    dist: f64,
    angles: Vec<(f64, f64)>,
}

fn check_angle(name: &'static str, value: f64) -> Result<()> {
    if !(-FRAC_PI_2..=FRAC_PI_2).contains(&value) {
        return Err(ChanError::AngleOutOfRange { name, value });
    }
    Ok(())
}

impl LinkGeometry {
    /// Distances below the 1 m reference are clamped to 1 m.
    pub fn new(dist: f64, angles: Vec<(f64, f64)>) -> Result<Self> {
        if !dist.is_finite() {
            return Err(ChanError::InvalidParam(format!("distance {dist} is not finite")));
        }
        if angles.is_empty() {
            return Err(ChanError::InvalidParam("geometry needs at least one path".into()));
        }
        for &(e, a) in &angles {
            check_angle("elevation", e)?;
            check_angle("azimuth", a)?;
        }
        Ok(Self { dist: dist.max(1.0), angles })
    }

    pub fn dist(&self) -> f64 {
        self.dist
    }

    pub fn angles(&self) -> &[(f64, f64)] {
        &self.angles
    }

    pub fn num_paths(&self) -> usize {
        self.angles.len()
    }
}

/// Length-M complex channel from one user to the RIS.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelVector(pub Vec<C64>);

impl ChannelVector {
    pub fn as_slice(&self) -> &[C64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// RIS reflection vector, every entry of magnitude sqrt(A_E).
#[derive(Debug, Clone, PartialEq)]
pub struct RisPhase(pub Vec<C64>);

impl RisPhase {
    pub fn as_slice(&self) -> &[C64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// UPA spatial vector: entry m is exp(j a(elev, azim) . l_m) with
/// a = (2pi/lambda)[sin e cos b, sin e sin b, cos e] and
/// l_m = d [0, m mod Mx, floor(m / Mx)] (0-based m).
pub fn steering_vector(elev: f64, azim: f64, params: &SystemParams) -> Result<Vec<C64>> {
    check_angle("elevation", elev)?;
    check_angle("azimuth", azim)?;
    Ok(steering_unchecked(elev, azim, params))
}

pub(crate) fn steering_unchecked(elev: f64, azim: f64, params: &SystemParams) -> Vec<C64> {
    let k = TAU / params.wavelength * params.elem_spacing;
    let ay = k * elev.sin() * azim.sin();
    let az = k * elev.cos();
    (0..params.m())
        .map(|m| {
            let col = (m % params.mx) as f64;
            let row = (m / params.mx) as f64;
            C64::from_polar(1.0, ay * col + az * row)
        })
        .collect()
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

pub(crate) fn cn<R: Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    complex_normal(rng, var)
}

/// g = sum_n zeta_n xi(elev_n, azim_n), zeta_n ~ CN(0, C0 d^-alpha / L) so that
/// every element has variance C0 d^-alpha.
pub fn sample_direct_channel<R: Rng + ?Sized>(
    params: &SystemParams,
    geom: &LinkGeometry,
    rng: &mut R,
) -> Result<ChannelVector> {
    params.validate()?;
    let l = geom.num_paths();
    let var = params.c0 * geom.dist().powf(-params.alpha) / l as f64;
    let mut g = vec![C64::new(0.0, 0.0); params.m()];
    for &(e, a) in geom.angles() {
        let zeta = complex_normal(rng, var);
        for (gm, s) in g.iter_mut().zip(steering_unchecked(e, a, params)) {
            *gm += zeta * s;
        }
    }
    Ok(ChannelVector(g))
}

/// Independent uniform phases on [0, 2pi), magnitude sqrt(A_E).
pub fn sample_ris_phase<R: Rng + ?Sized>(params: &SystemParams, rng: &mut R) -> RisPhase {
    let amp = params.amp_ae.sqrt();
    RisPhase(
        (0..params.m())
            .map(|_| C64::from_polar(amp, rng.gen::<f64>() * TAU))
            .collect(),
    )
}

/// g_BR^T diag(w) g_AR, summed left to right with g_ar*g_br formed first so the
/// result is bit-identical under swapping the two channels.
pub fn combined_channel(g_ar: &[C64], g_br: &[C64], w: &[C64]) -> Result<C64> {
    if g_ar.len() != w.len() {
        return Err(ChanError::LengthMismatch { expected: w.len(), got: g_ar.len() });
    }
    if g_br.len() != w.len() {
        return Err(ChanError::LengthMismatch { expected: w.len(), got: g_br.len() });
    }
    let mut acc = C64::new(0.0, 0.0);
    for ((a, b), wm) in g_ar.iter().zip(g_br).zip(w) {
        acc += *wm * (*a * *b);
    }
    Ok(acc)
}
