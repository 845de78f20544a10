//! Explicit feature generators: polynomial-sine formulas, modulo-2π analysis
//! and symbolic distillation of trained networks.

mod distill;
mod poly;

pub use distill::{
    distill_network, distill_neuron, select_active_neurons, term_frequency, DistillConfig, DistillReport, FittedTerm,
    NeuronFit, Term, TermCategory, TermHistogram, TermLibrary, EXP_SCALES,
};
pub use poly::{
    appendix_d_generator, explicit_feature, fit_polynomial, fit_polynomial_ordered, mod_2pi, poly_basis,
    poly_basis_ordered, BasisOrder, PolyGenerator, RankPolicy, APPENDIX_D, BASIS_LEN,
};

use crate::chansim::{ProbeRound, SystemParams};
use crate::neural::{generator_input, pre_activation_values, FeatureScheme, Mlp, NeuralError};
use crate::C64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FeatgenError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("design matrix has rank {rank} < {cols}")]
    RankDeficient { rank: usize, cols: usize },
    #[error("non-finite input")]
    NonFinite,
    #[error("solver: {0}")]
    Solver(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("no neurons to summarize")]
    Empty,
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

pub type Result<T> = std::result::Result<T, FeatgenError>;

/// Which legitimate party's observation to read from a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Party {
    Alice,
    Bob,
}

/// Normalized (x / sqrt(Pt), y / |y|) pairs, the same scaling the networks see.
pub fn normalized_pairs(rounds: &[&ProbeRound], params: &SystemParams, party: Party) -> Vec<(C64, C64)> {
    rounds
        .iter()
        .map(|r| {
            let (x, y) = match party {
                Party::Alice => (r.x_a, r.y_a),
                Party::Bob => (r.x_b, r.y_b),
            };
            let v = generator_input(x, y, params.pt);
            (C64::new(v[0], v[1]), C64::new(v[2], v[3]))
        })
        .collect()
}

fn flatten(pairs: &[(C64, C64)]) -> Vec<f64> {
    pairs.iter().flat_map(|(x, y)| [x.re, x.im, y.re, y.im]).collect()
}

/// Refits a generator network's output pre-activation with the 81-term polynomial.
/// Normalized inputs are unit modulus, so the design is rank deficient and the
/// minimum-norm solution is taken.
pub fn distill_generator(net: &Mlp, pairs: &[(C64, C64)]) -> Result<PolyGenerator> {
    let pre = pre_activation_values(net, &flatten(pairs))?;
    fit_polynomial(&pre, pairs, RankPolicy::MinimumNorm)
}

/// Distilled polynomial-sine generators for Alice and Bob.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyScheme {
    pub alice: PolyGenerator,
    pub bob: PolyGenerator,
}

impl PolyScheme {
    /// Fits each party's polynomial to its own network on `rounds`.
    pub fn distill(alice: &Mlp, bob: &Mlp, rounds: &[&ProbeRound], params: &SystemParams) -> Result<Self> {
        Ok(Self {
            alice: distill_generator(alice, &normalized_pairs(rounds, params, Party::Alice))?,
            bob: distill_generator(bob, &normalized_pairs(rounds, params, Party::Bob))?,
        })
    }
}

impl FeatureScheme for PolyScheme {
    fn name(&self) -> String {
        "polynomial_sine".into()
    }

    fn features(&self, rounds: &[&ProbeRound], params: &SystemParams) -> crate::neural::Result<(Vec<f64>, Vec<f64>)> {
        let f = |g: &PolyGenerator, p| {
            normalized_pairs(rounds, params, p).into_iter().map(|(x, y)| explicit_feature(g, x, y)).collect()
        };
        Ok((f(&self.alice, Party::Alice), f(&self.bob, Party::Bob)))
    }
}
