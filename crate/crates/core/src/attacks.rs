//! Legacy common features and the MITM-RIS reconstructions that break them.
//!
//! Two-way CSI estimation (pilots are public) and two-way cross-multiplication
//! (signals are private) both give Alice and Bob a noisy copy of the combined
//! channel. A RIS that records `y_R^(A)`, `y_R^(B)` and knows its own phases
//! `w` can rebuild either feature by applying `w` to what it heard.

use crate::chansim::{combined_channel, ChanError, ProbeRound, SystemParams};
use crate::stats::{complex_correlation, ComplexCorrelation};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Csi,
    CrossMult,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Csi => "csi",
            Scheme::CrossMult => "crossmult",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeaturePair {
    pub f_alice: C64,
    pub f_bob: C64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EveEstimate {
    pub f_eve: C64,
    pub scheme: Scheme,
}

/// h_A = y_A x_B^* / Pt, h_B = y_B x_A^* / Pt.
pub fn csi_features(round: &ProbeRound, params: &SystemParams) -> FeaturePair {
    FeaturePair {
        f_alice: round.y_a * round.x_b.conj() / params.pt,
        f_bob: round.y_b * round.x_a.conj() / params.pt,
    }
}

/// Eve estimates both RIS channels from the pilots and recombines them with w.
pub fn csi_eve(round: &ProbeRound, params: &SystemParams) -> Result<EveEstimate, ChanError> {
    let ca = round.x_a.conj() / params.pt;
    let cb = round.x_b.conj() / params.pt;
    let g_ar: Vec<C64> = round.y_r_a.iter().map(|y| y * ca).collect();
    let g_br: Vec<C64> = round.y_r_b.iter().map(|y| y * cb).collect();
    Ok(EveEstimate { f_eve: combined_channel(&g_ar, &g_br, &round.w)?, scheme: Scheme::Csi })
}

/// phi_A = x_A y_A, phi_B = x_B y_B.
pub fn crossmult_features(round: &ProbeRound) -> FeaturePair {
    FeaturePair { f_alice: round.x_a * round.y_a, f_bob: round.x_b * round.y_b }
}

/// phi_E = y_R^(B)T diag(w) y_R^(A).
pub fn crossmult_eve(round: &ProbeRound) -> Result<EveEstimate, ChanError> {
    Ok(EveEstimate {
        f_eve: combined_channel(&round.y_r_a, &round.y_r_b, &round.w)?,
        scheme: Scheme::CrossMult,
    })
}

/// Features of Alice, Bob and Eve for one round under `scheme`.
pub fn scheme_triplet(
    scheme: Scheme,
    round: &ProbeRound,
    params: &SystemParams,
) -> Result<(FeaturePair, EveEstimate), ChanError> {
    Ok(match scheme {
        Scheme::Csi => (csi_features(round, params), csi_eve(round, params)?),
        Scheme::CrossMult => (crossmult_features(round), crossmult_eve(round)?),
    })
}

/// Per-part correlations of one scheme over a set of rounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackCorrelations {
    pub alice_bob: ComplexCorrelation,
    pub eve_alice: ComplexCorrelation,
    pub eve_bob: ComplexCorrelation,
}

pub fn attack_correlations(
    scheme: Scheme,
    rounds: &[ProbeRound],
    params: &SystemParams,
) -> Result<Option<AttackCorrelations>, ChanError> {
    let mut fa = Vec::with_capacity(rounds.len());
    let mut fb = Vec::with_capacity(rounds.len());
    let mut fe = Vec::with_capacity(rounds.len());
    for r in rounds {
        let (pair, eve) = scheme_triplet(scheme, r, params)?;
        fa.push(pair.f_alice);
        fb.push(pair.f_bob);
        fe.push(eve.f_eve);
    }
    let out = (|| {
        Some(AttackCorrelations {
            alice_bob: complex_correlation(&fa, &fb)?,
            eve_alice: complex_correlation(&fe, &fa)?,
            eve_bob: complex_correlation(&fe, &fb)?,
        })
    })();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chansim::{ChannelVector, RisPhase};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn hand_round() -> ProbeRound {
        // M = 2, noiseless except where noted.
        let g_ar = [c(0.3, -0.1), c(-0.2, 0.4)];
        let g_br = [c(0.05, 0.2), c(0.1, -0.3)];
        let w = vec![c(0.0, 2.0), c(-2.0, 0.0)];
        let x_a = C64::from_polar(0.1f64.sqrt(), 0.4);
        let x_b = C64::from_polar(0.1f64.sqrt(), -1.3);
        let g = combined_channel(&g_ar, &g_br, &w).unwrap();
        ProbeRound {
            x_a,
            x_b,
            y_a: g * x_b,
            y_b: g * x_a,
            y_r_a: g_ar.iter().map(|h| h * x_a).collect(),
            y_r_b: g_br.iter().map(|h| h * x_b).collect(),
            w,
            g_ab: g,
        }
    }

    #[test]
    fn csi_arithmetic() {
        let p = SystemParams::desk();
        let r = ProbeRound {
            x_a: c(0.1f64.sqrt(), 0.0),
            x_b: c(0.1f64.sqrt(), 0.0),
            y_a: c(0.05, 0.0),
            y_b: c(0.05, 0.0),
            y_r_a: vec![],
            y_r_b: vec![],
            w: vec![],
            g_ab: c(0.0, 0.0),
        };
        let f = csi_features(&r, &p);
        assert!((f.f_alice.re - 0.05 / 0.1f64.sqrt()).abs() < 1e-15);
        assert!((f.f_alice.re - 0.158_113_883_008_418_97).abs() < 1e-15);
        assert_eq!(f.f_alice.im, 0.0);
    }

    #[test]
    fn hand_round_matches_expansion() {
        let p = SystemParams::desk();
        let r = hand_round();
        // Scalar expansion with the two elements written out.
        let ga = [r.y_r_a[0] * r.x_a.conj() / 0.1, r.y_r_a[1] * r.x_a.conj() / 0.1];
        let gb = [r.y_r_b[0] * r.x_b.conj() / 0.1, r.y_r_b[1] * r.x_b.conj() / 0.1];
        let h_e = r.w[0] * ga[0] * gb[0] + r.w[1] * ga[1] * gb[1];
        let e = csi_eve(&r, &p).unwrap();
        assert!((e.f_eve - h_e).norm() <= 1e-12 * h_e.norm());
        let phi_e = r.w[0] * r.y_r_a[0] * r.y_r_b[0] + r.w[1] * r.y_r_a[1] * r.y_r_b[1];
        let e2 = crossmult_eve(&r).unwrap();
        assert!((e2.f_eve - phi_e).norm() <= 1e-12 * phi_e.norm());
        // Noiseless collapse onto g and g x_A x_B.
        assert!((e.f_eve - r.g_ab).norm() <= 1e-12 * r.g_ab.norm());
        let target = r.g_ab * r.x_a * r.x_b;
        assert!((e2.f_eve - target).norm() <= 1e-12 * target.norm());
        let f = crossmult_features(&r);
        assert!((f.f_alice - target).norm() <= 1e-12 * target.norm());
        assert!((f.f_bob - target).norm() <= 1e-12 * target.norm());
    }

    #[test]
    fn zero_phase_crossmult_is_g_pt() {
        let g_ar = ChannelVector(vec![c(0.3, 0.1)]);
        let g_br = ChannelVector(vec![c(-0.1, 0.2)]);
        let w = RisPhase(vec![c(1.0, 0.0)]);
        let x = c(0.1f64.sqrt(), 0.0);
        let g = combined_channel(g_ar.as_slice(), g_br.as_slice(), w.as_slice()).unwrap();
        let r = ProbeRound { x_a: x, x_b: x, y_a: g * x, y_b: g * x, y_r_a: vec![], y_r_b: vec![], w: vec![], g_ab: g };
        let f = crossmult_features(&r);
        assert!((f.f_alice - g * 0.1).norm() < 1e-15);
    }
}
