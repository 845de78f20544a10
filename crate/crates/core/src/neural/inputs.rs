//! Network input layouts built from probing rounds.

use crate::chansim::{ProbeRound, SystemParams};
use crate::C64;

/// (Re, Im) of x / sqrt(Pt) and of y / |y|.
pub fn generator_input(x: C64, y: C64, pt: f64) -> [f64; 4] {
    let xs = x / pt.sqrt();
    let r = y.norm();
    let ys = if r > 0.0 { y / r } else { C64::new(0.0, 0.0) };
    [xs.re, xs.im, ys.re, ys.im]
}

/// What the RIS-side networks (Mallory, Eve) see.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AdversaryInput {
    /// 8M values: unit-RMS y_R^(A), y_R^(B), w / sqrt(A_E), and the per-element
    /// reflection product of the three, each as re then im blocks.
    #[default]
    Reflection,
    /// 6M values: raw re/im of y_R^(A), y_R^(B), w.
    Raw,
}

impl AdversaryInput {
    pub fn width(self, m: usize) -> usize {
        match self {
            AdversaryInput::Reflection => 8 * m,
            AdversaryInput::Raw => 6 * m,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AdversaryInput::Reflection => "reflection",
            AdversaryInput::Raw => "raw",
        }
    }
}

fn unit_rms(v: &[C64]) -> Vec<C64> {
    let p = v.iter().map(|z| z.norm_sqr()).sum::<f64>() / v.len().max(1) as f64;
    if p > 0.0 {
        let s = 1.0 / p.sqrt();
        v.iter().map(|z| z * s).collect()
    } else {
        vec![C64::new(0.0, 0.0); v.len()]
    }
}

fn push_parts(out: &mut Vec<f64>, v: &[C64]) {
    out.extend(v.iter().map(|z| z.re));
    out.extend(v.iter().map(|z| z.im));
}

/// Appends one round's adversary input row to `out`.
pub fn adversary_input(round: &ProbeRound, params: &SystemParams, kind: AdversaryInput, out: &mut Vec<f64>) {
    match kind {
        AdversaryInput::Raw => {
            push_parts(out, &round.y_r_a);
            push_parts(out, &round.y_r_b);
            push_parts(out, &round.w);
        }
        AdversaryInput::Reflection => {
            let na = unit_rms(&round.y_r_a);
            let nb = unit_rms(&round.y_r_b);
            let s = 1.0 / params.amp_ae.sqrt();
            let wh: Vec<C64> = round.w.iter().map(|z| z * s).collect();
            let u: Vec<C64> = wh.iter().zip(&na).zip(&nb).map(|((w, a), b)| w * a * b).collect();
            push_parts(out, &na);
            push_parts(out, &nb);
            push_parts(out, &wh);
            push_parts(out, &u);
        }
    }
}

/// Row-major `rounds x 4` inputs for Alice.
pub fn alice_inputs(rounds: &[&ProbeRound], params: &SystemParams) -> Vec<f64> {
    rounds.iter().flat_map(|r| generator_input(r.x_a, r.y_a, params.pt)).collect()
}

/// Row-major `rounds x 4` inputs for Bob.
pub fn bob_inputs(rounds: &[&ProbeRound], params: &SystemParams) -> Vec<f64> {
    rounds.iter().flat_map(|r| generator_input(r.x_b, r.y_b, params.pt)).collect()
}

/// Row-major `rounds x width` adversary inputs.
pub fn adversary_inputs(rounds: &[&ProbeRound], params: &SystemParams, kind: AdversaryInput) -> Vec<f64> {
    let mut out = Vec::with_capacity(rounds.len() * kind.width(params.m()));
    for r in rounds {
        adversary_input(r, params, kind, &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_input_is_unit_scaled() {
        let v = generator_input(C64::from_polar(0.1f64.sqrt(), 0.7), C64::new(3e-6, -4e-6), 0.1);
        assert!((v[0] - 0.7f64.cos()).abs() < 1e-15 && (v[1] - 0.7f64.sin()).abs() < 1e-15);
        assert!((v[2] - 0.6).abs() < 1e-15 && (v[3] + 0.8).abs() < 1e-15);
        assert_eq!(generator_input(C64::new(0.0, 0.0), C64::new(0.0, 0.0), 0.1), [0.0; 4]);
    }

    #[test]
    fn adversary_layout() {
        let p = SystemParams { amp_ae: 4.0, ..SystemParams::desk() }.with_array(2, 1);
        let r = ProbeRound {
            x_a: C64::new(1.0, 0.0),
            x_b: C64::new(1.0, 0.0),
            y_a: C64::new(0.0, 0.0),
            y_b: C64::new(0.0, 0.0),
            y_r_a: vec![C64::new(2.0, 0.0), C64::new(0.0, 2.0)],
            y_r_b: vec![C64::new(0.0, 3.0), C64::new(3.0, 0.0)],
            w: vec![C64::new(2.0, 0.0), C64::new(0.0, -2.0)],
            g_ab: C64::new(0.0, 0.0),
        };
        let mut raw = Vec::new();
        adversary_input(&r, &p, AdversaryInput::Raw, &mut raw);
        assert_eq!(raw, vec![2.0, 0.0, 0.0, 2.0, 0.0, 3.0, 3.0, 0.0, 2.0, 0.0, 0.0, -2.0]);
        let mut refl = Vec::new();
        adversary_input(&r, &p, AdversaryInput::Reflection, &mut refl);
        assert_eq!(refl.len(), 16);
        // na = [1, j], nb = [j, 1], wh = [1, -j], u = [j, 1].
        assert_eq!(&refl[..4], &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(&refl[12..], &[0.0, 1.0, 1.0, 0.0]);
    }
}
