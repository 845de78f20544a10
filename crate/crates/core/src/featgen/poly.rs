//! Polynomial-sine feature generator: sin(rho^T z(x, y)) where z holds the 81
//! monomials Re(x)^m Im(x)^n Re(y)^p Im(y)^q with exponents in {0, 1, 2}.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use super::{FeatgenError, Result};
use crate::C64;

pub const BASIS_LEN: usize = 81;

/// Low part of 2*pi: TAU + TAU_LO is 2*pi to about 1e-32.
const TAU_LO: f64 = 2.4492935982947064e-16;

/// Enumeration of the exponent tuples (m, n, p, q).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BasisOrder {
    /// m outermost, q innermost: index = 27m + 9n + 3p + q.
    #[default]
    Nested,
    /// q outermost, m innermost: index = 27q + 9p + 3n + m.
    Reversed,
}

impl BasisOrder {
    /// Exponents (m, n, p, q) of basis entry `i`.
    pub fn exponents(self, i: usize) -> [u32; 4] {
        let d = [(i / 27) as u32, (i / 9 % 3) as u32, (i / 3 % 3) as u32, (i % 3) as u32];
        match self {
            BasisOrder::Nested => d,
            BasisOrder::Reversed => [d[3], d[2], d[1], d[0]],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BasisOrder::Nested => "nested",
            BasisOrder::Reversed => "reversed",
        }
    }
}

fn powers(v: f64) -> [f64; 3] {
    [1.0, v, v * v]
}

/// The 81-entry basis in the given order.
pub fn poly_basis_ordered(x: C64, y: C64, order: BasisOrder) -> [f64; BASIS_LEN] {
    let p = [powers(x.re), powers(x.im), powers(y.re), powers(y.im)];
    let mut out = [0.0; BASIS_LEN];
    for (i, o) in out.iter_mut().enumerate() {
        let e = order.exponents(i);
        *o = p[0][e[0] as usize] * p[1][e[1] as usize] * p[2][e[2] as usize] * p[3][e[3] as usize];
    }
    out
}

pub fn poly_basis(x: C64, y: C64) -> [f64; BASIS_LEN] {
    poly_basis_ordered(x, y, BasisOrder::Nested)
}

/// x - 2*pi*floor(x / 2*pi) in [0, 2*pi), reduced with a two-part 2*pi.
pub fn mod_2pi(x: f64) -> f64 {
    let k = (x / TAU).floor();
    let mut r = (-k).mul_add(TAU, x) - k * TAU_LO;
    if r < 0.0 {
        r += TAU;
    } else if r >= TAU {
        r -= TAU;
    }
    if (0.0..TAU).contains(&r) {
        r
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolyGenerator {
    pub coeffs: Vec<f64>,
    pub order: BasisOrder,
}

impl PolyGenerator {
    pub fn new(coeffs: Vec<f64>, order: BasisOrder) -> Result<Self> {
        if coeffs.len() != BASIS_LEN {
            return Err(FeatgenError::Dimension(format!("expected {BASIS_LEN} coefficients, got {}", coeffs.len())));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(FeatgenError::NonFinite);
        }
        Ok(Self { coeffs, order })
    }

    /// rho^T z(x, y).
    pub fn pre_activation(&self, x: C64, y: C64) -> f64 {
        poly_basis_ordered(x, y, self.order).iter().zip(&self.coeffs).map(|(z, c)| z * c).sum()
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("polyv1 {BASIS_LEN}\n");
        for c in &self.coeffs {
            let _ = writeln!(s, "{c:?}");
        }
        s
    }

    /// Parses the `polyv1 81` format; the basis order is not stored and defaults to nested.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        match lines.next() {
            Some(h) if h.split_whitespace().collect::<Vec<_>>() == ["polyv1", "81"] => {}
            other => return Err(FeatgenError::Parse(format!("bad header {other:?}"))),
        }
        let coeffs = lines
            .map(|l| l.parse::<f64>().map_err(|e| FeatgenError::Parse(format!("{l:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(coeffs, BasisOrder::Nested)
    }
}

/// sin(rho^T z(x, y)).
pub fn explicit_feature(gen: &PolyGenerator, x: C64, y: C64) -> f64 {
    gen.pre_activation(x, y).sin()
}

/// How `fit_polynomial` treats a rank-deficient design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RankPolicy {
    /// Rank deficiency is an error.
    #[default]
    Strict,
    /// Minimum-norm least-squares solution through the truncated SVD.
    MinimumNorm,
}

/// Relative singular-value cutoff for numerical rank.
const RANK_TOL: f64 = 1e-10;

/// Least squares for rho over the 81-column design built from `inputs`.
pub fn fit_polynomial(targets: &[f64], inputs: &[(C64, C64)], policy: RankPolicy) -> Result<PolyGenerator> {
    fit_polynomial_ordered(targets, inputs, policy, BasisOrder::Nested)
}

pub fn fit_polynomial_ordered(
    targets: &[f64],
    inputs: &[(C64, C64)],
    policy: RankPolicy,
    order: BasisOrder,
) -> Result<PolyGenerator> {
    let n = inputs.len();
    if targets.len() != n {
        return Err(FeatgenError::Dimension(format!("{} targets for {n} inputs", targets.len())));
    }
    if n < BASIS_LEN {
        return Err(FeatgenError::InsufficientSamples { needed: BASIS_LEN, got: n });
    }
    if targets.iter().any(|t| !t.is_finite()) || inputs.iter().any(|(x, y)| !(x.is_finite() && y.is_finite())) {
        return Err(FeatgenError::NonFinite);
    }
    let mut a = DMatrix::<f64>::zeros(n, BASIS_LEN);
    for (i, (x, y)) in inputs.iter().enumerate() {
        for (j, z) in poly_basis_ordered(*x, *y, order).iter().enumerate() {
            a[(i, j)] = *z;
        }
    }
    // Column scaling keeps the rank decision independent of input units.
    let scale: Vec<f64> = (0..BASIS_LEN)
        .map(|j| {
            let s = a.column(j).norm();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    for j in 0..BASIS_LEN {
        a.column_mut(j).unscale_mut(scale[j]);
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * RANK_TOL;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    if rank < BASIS_LEN && policy == RankPolicy::Strict {
        return Err(FeatgenError::RankDeficient { rank, cols: BASIS_LEN });
    }
    let b = DVector::from_column_slice(targets);
    let sol = svd.solve(&b, tol).map_err(|e| FeatgenError::Solver(e.to_string()))?;
    let coeffs: Vec<f64> = sol.iter().zip(&scale).map(|(c, s)| c / s).collect();
    PolyGenerator::new(coeffs, order)
}

/// The published 81-entry coefficient vector, in reading order.
pub const APPENDIX_D: [f64; BASIS_LEN] = [
    0.0, 0.0330, -0.0104, 0.0, 0.0, 0.0, 0.0, -0.0207, -0.0531, 0.0, -13.0482, 0.0, -19.6748, 0.0, 0.0457, -0.0117,
    -0.0302, 0.0430, -0.1009, -0.0136, 0.1295, 0.0, -0.3157, -0.0161, -0.3361, 0.0172, 0.0366, 0.0, -19.7018, 0.0,
    13.1063, 0.0, -0.0264, -0.0119, 0.0605, 0.0, 0.0, 0.0, -0.3254, 0.0261, -0.9464, -0.0246, 0.3199, 0.0, 0.0, 0.0,
    0.0301, 0.0, 0.0, 0.0, 0.0106, 0.0128, -0.0469, 0.0153, -0.1054, -0.0153, -0.3372, 0.0, 0.3190, 0.0205, 0.1345,
    0.0, 0.0309, 0.0, 0.0, 0.0, 0.0102, 0.0, -0.0250, 0.0, 0.0298, 0.0, 0.0, 0.0, 0.0, -0.0143, 0.0, 0.0167, 0.0, 0.0,
    -0.0250,
];

pub fn appendix_d_generator() -> PolyGenerator {
    PolyGenerator { coeffs: APPENDIX_D.to_vec(), order: BasisOrder::Nested }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_trivial_points() {
        let b = poly_basis(C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        assert_eq!(b[0], 1.0);
        assert!(b[1..].iter().all(|&v| v == 0.0));
        assert!(poly_basis(C64::new(1.0, 1.0), C64::new(1.0, 1.0)).iter().all(|&v| v == 1.0));
    }

    #[test]
    fn basis_matches_nested_loops() {
        let (x, y) = (C64::new(0.3, 0.0), C64::new(0.0, 0.5));
        let b = poly_basis(x, y);
        let mut i = 0;
        for m in 0..3 {
            for n in 0..3 {
                for p in 0..3 {
                    for q in 0..3 {
                        let v = 0.3f64.powi(m) * 0.0f64.powi(n) * 0.0f64.powi(p) * 0.5f64.powi(q);
                        assert_eq!(b[i], v, "entry {i}");
                        i += 1;
                    }
                }
            }
        }
    }

    #[test]
    fn reversed_order_is_a_permutation() {
        let (x, y) = (C64::new(0.7, -1.3), C64::new(0.2, 2.1));
        let mut a = poly_basis_ordered(x, y, BasisOrder::Nested).to_vec();
        let mut b = poly_basis_ordered(x, y, BasisOrder::Reversed).to_vec();
        assert_ne!(a, b);
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        assert_eq!(a, b);
        // Entry 1 is Im(y) in nested order and Re(x) in reversed order.
        assert_eq!(poly_basis_ordered(x, y, BasisOrder::Reversed)[1], 0.7);
    }

    #[test]
    fn mod_2pi_examples() {
        assert!((mod_2pi(-11.5793) - 0.9871).abs() < 5e-5);
        assert_eq!(mod_2pi(1.7785), 1.7785);
        assert_eq!(mod_2pi(TAU), 0.0);
        assert_eq!(mod_2pi(0.0), 0.0);
        assert!(mod_2pi(-1e-300) < TAU);
    }

    #[test]
    fn sine_of_constant_generator() {
        let mut c = vec![0.0; BASIS_LEN];
        c[0] = std::f64::consts::FRAC_PI_2;
        let g = PolyGenerator::new(c, BasisOrder::Nested).unwrap();
        assert_eq!(explicit_feature(&g, C64::new(3.0, -2.0), C64::new(0.1, 9.0)), 1.0);
    }

    #[test]
    fn appendix_vector() {
        let g = appendix_d_generator();
        assert_eq!(g.coeffs.len(), 81);
        assert_eq!(g.coeffs[1], 0.0330);
        assert_eq!(g.coeffs[10], -13.0482);
        assert_eq!(g.coeffs[80], -0.0250);
        assert!(g.coeffs.iter().all(|c| c.is_finite()));
    }

    #[test]
    fn constant_targets_fit_constant_term() {
        let inputs: Vec<(C64, C64)> = (0..200)
            .map(|i| {
                let t = i as f64 * 0.37;
                (C64::new(t.sin(), (1.3 * t).cos()), C64::new((0.7 * t).cos(), (2.1 * t).sin()))
            })
            .collect();
        let g = fit_polynomial(&vec![2.5; 200], &inputs, RankPolicy::Strict).unwrap();
        assert!((g.coeffs[0] - 2.5).abs() < 1e-9);
        assert!(g.coeffs[1..].iter().all(|c| c.abs() < 1e-9));
    }

    #[test]
    fn fit_errors() {
        let few = vec![(C64::new(1.0, 0.0), C64::new(0.0, 1.0)); 80];
        assert!(matches!(
            fit_polynomial(&[0.0; 80], &few, RankPolicy::Strict),
            Err(FeatgenError::InsufficientSamples { .. })
        ));
        // Unit-modulus y makes Re(y)^2 + Im(y)^2 collinear with the constant.
        let unit: Vec<(C64, C64)> =
            (0..300).map(|i| (C64::new(i as f64 * 0.01, 0.5 - i as f64 * 0.003), C64::from_polar(1.0, i as f64))).collect();
        let t: Vec<f64> = (0..300).map(|i| i as f64).collect();
        assert!(matches!(fit_polynomial(&t, &unit, RankPolicy::Strict), Err(FeatgenError::RankDeficient { .. })));
        assert!(fit_polynomial(&t, &unit, RankPolicy::MinimumNorm).is_ok());
    }

    #[test]
    fn text_round_trip() {
        let g = appendix_d_generator();
        assert_eq!(PolyGenerator::from_text(&g.to_text()).unwrap(), g);
        assert!(PolyGenerator::from_text("polyv1 80\n").is_err());
        assert!(PolyGenerator::from_text("polyv1 81\n1.0\n").is_err());
    }
}
