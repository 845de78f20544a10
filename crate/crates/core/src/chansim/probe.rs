use std::f64::consts::TAU;

use rand::Rng;

use super::channel::cn;
use super::{combined_channel, ChanError, ChannelVector, Result, RisPhase, SystemParams};
use crate::C64;

/// How Alice and Bob choose their probing symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProbeSignals {
    /// Private symbols with uniform phase on [0, 2pi).
    #[default]
    Random,
    /// Public pilot sqrt(Pt) (zero phase) from both sides.
    Pilot,
}

/// One two-way probing exchange within a coherence block.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRound {
    pub x_a: C64,
    pub x_b: C64,
    pub y_a: C64,
    pub y_b: C64,
    pub y_r_a: Vec<C64>,
    pub y_r_b: Vec<C64>,
    pub w: Vec<C64>,
    /// Ground-truth combined channel, diagnostics only.
    pub g_ab: C64,
}

/// CN(0, sigma2) draw.
pub fn sample_noise<R: Rng + ?Sized>(rng: &mut R, sigma2: f64) -> C64 {
    cn(rng, sigma2)
}

pub fn sample_probe_round<R: Rng + ?Sized>(
    g_ar: &ChannelVector,
    g_br: &ChannelVector,
    w: &RisPhase,
    params: &SystemParams,
    rng: &mut R,
) -> Result<ProbeRound> {
    sample_probe_round_with(g_ar, g_br, w, params, ProbeSignals::Random, rng)
}

/// y_A = g x_B + n_A, y_B = g x_A + n_B, y_R^(A) = g_AR x_A + n, y_R^(B) = g_BR x_B + n.
/// Draw order: phases (x_A, x_B), n_A, n_B, n_R^(A)[M], n_R^(B)[M].
pub fn sample_probe_round_with<R: Rng + ?Sized>(
    g_ar: &ChannelVector,
    g_br: &ChannelVector,
    w: &RisPhase,
    params: &SystemParams,
    signals: ProbeSignals,
    rng: &mut R,
) -> Result<ProbeRound> {
    let m = params.m();
    for len in [g_ar.len(), g_br.len(), w.len()] {
        if len != m {
            return Err(ChanError::LengthMismatch { expected: m, got: len });
        }
    }
    let amp = params.pt.sqrt();
    let (x_a, x_b) = match signals {
        ProbeSignals::Random => {
            let pa = rng.gen::<f64>() * TAU;
            let pb = rng.gen::<f64>() * TAU;
            (C64::from_polar(amp, pa), C64::from_polar(amp, pb))
        }
        ProbeSignals::Pilot => (C64::new(amp, 0.0), C64::new(amp, 0.0)),
    };
    let g = combined_channel(g_ar.as_slice(), g_br.as_slice(), w.as_slice())?;
    let s2 = params.sigma2;
    let y_a = g * x_b + cn(rng, s2);
    let y_b = g * x_a + cn(rng, s2);
    let y_r_a = g_ar.0.iter().map(|h| h * x_a + cn(rng, s2)).collect();
    let y_r_b = g_br.0.iter().map(|h| h * x_b + cn(rng, s2)).collect();
    Ok(ProbeRound { x_a, x_b, y_a, y_b, y_r_a, y_r_b, w: w.0.clone(), g_ab: g })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chansim::{sample_direct_channel, sample_ris_phase, LinkGeometry};
    use crate::rng::seeded;

    fn setup(sigma2: f64) -> (SystemParams, ChannelVector, ChannelVector, RisPhase) {
        let p = SystemParams { sigma2, ..SystemParams::desk() };
        let mut r = seeded(11, 0);
        let ga = LinkGeometry::new(5.0, vec![(0.2, -0.3); 10]).unwrap();
        let gb = LinkGeometry::new(8.0, vec![(-0.5, 1.1); 10]).unwrap();
        let a = sample_direct_channel(&p, &ga, &mut r).unwrap();
        let b = sample_direct_channel(&p, &gb, &mut r).unwrap();
        let w = sample_ris_phase(&p, &mut r);
        (p, a, b, w)
    }

    #[test]
    fn signal_power() {
        let (p, a, b, w) = setup(1e-11);
        let r = sample_probe_round(&a, &b, &w, &p, &mut seeded(2, 0)).unwrap();
        assert!((r.x_a.norm() - 0.1f64.sqrt()).abs() < 1e-15);
        assert!((r.x_b.norm() - 0.316_227_766_016_837_94).abs() < 1e-15);
        assert_eq!(r.y_r_a.len(), 16);
    }

    #[test]
    fn noiseless_reciprocity() {
        let (p, a, b, w) = setup(0.0);
        let r = sample_probe_round(&a, &b, &w, &p, &mut seeded(2, 0)).unwrap();
        let ga = r.y_a / r.x_b;
        let gb = r.y_b / r.x_a;
        assert!((ga - gb).norm() <= 1e-12 * r.g_ab.norm());
        assert!((r.y_a * r.x_a - r.y_b * r.x_b).norm() <= 1e-12 * (r.y_a * r.x_a).norm());
    }

    #[test]
    fn pilots_are_real() {
        let (p, a, b, w) = setup(1e-11);
        let r = sample_probe_round_with(&a, &b, &w, &p, ProbeSignals::Pilot, &mut seeded(2, 0)).unwrap();
        assert_eq!(r.x_a, C64::new(0.1f64.sqrt(), 0.0));
        assert_eq!(r.x_a, r.x_b);
    }

    #[test]
    fn rejects_wrong_lengths() {
        let (p, a, _b, w) = setup(1e-11);
        let short = ChannelVector(a.0[..3].to_vec());
        assert!(sample_probe_round(&a, &short, &w, &p, &mut seeded(2, 0)).is_err());
    }
}
