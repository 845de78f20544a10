//! Symbolic distillation of hidden neurons over a dictionary of explicit
//! terms: monomials of degree at most 2 per input, exp(s x_i) and log(1 + |x_i|).
//!
//! Terms are chosen greedily (orthogonal matching pursuit on the centered
//! target) and refit by least squares; the neuron's dominant term is the one
//! with the largest standardized coefficient.

use std::fmt::{self, Write as _};

use rayon::prelude::*;

use super::{FeatgenError, Result};
use crate::neural::Mlp;

/// Scales s of the exponential terms.
pub const EXP_SCALES: [f64; 6] = [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0];

const INPUT_NAMES: [&str; 4] = ["Re(x)", "Im(x)", "Re(y)", "Im(y)"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Term {
    /// Product of inputs raised to the given exponents; all zero is the constant.
    Monomial([u8; 4]),
    Exp { input: usize, scale: f64 },
    Log { input: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TermCategory {
    Polynomial,
    Exponential,
    Logarithmic,
    Other,
}

impl TermCategory {
    pub const ALL: [TermCategory; 4] =
        [TermCategory::Polynomial, TermCategory::Exponential, TermCategory::Logarithmic, TermCategory::Other];

    pub fn name(self) -> &'static str {
        match self {
            TermCategory::Polynomial => "polynomial",
            TermCategory::Exponential => "exponential",
            TermCategory::Logarithmic => "logarithmic",
            TermCategory::Other => "other",
        }
    }
}

impl Term {
    pub fn eval(&self, x: &[f64; 4]) -> f64 {
        match *self {
            Term::Monomial(e) => (0..4).map(|i| x[i].powi(e[i] as i32)).product(),
            Term::Exp { input, scale } => (scale * x[input]).exp(),
            Term::Log { input } => x[input].abs().ln_1p(),
        }
    }

    pub fn category(&self) -> TermCategory {
        match self {
            Term::Monomial(_) => TermCategory::Polynomial,
            Term::Exp { .. } => TermCategory::Exponential,
            Term::Log { .. } => TermCategory::Logarithmic,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Term::Monomial([0, 0, 0, 0]))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Monomial(e) => {
                if self.is_constant() {
                    return f.write_str("1");
                }
                let parts: Vec<String> = (0..4)
                    .filter(|&i| e[i] > 0)
                    .map(|i| if e[i] == 1 { INPUT_NAMES[i].to_string() } else { format!("{}^{}", INPUT_NAMES[i], e[i]) })
                    .collect();
                f.write_str(&parts.join("*"))
            }
            Term::Exp { input, scale } => write!(f, "exp({scale}*{})", INPUT_NAMES[*input]),
            Term::Log { input } => write!(f, "log(1+|{}|)", INPUT_NAMES[*input]),
        }
    }
}

/// The fixed dictionary: 81 monomials, 24 exponentials, 4 logarithms.
#[derive(Debug, Clone, PartialEq)]
pub struct TermLibrary {
    pub terms: Vec<Term>,
}

impl Default for TermLibrary {
    fn default() -> Self {
        let mut terms = Vec::with_capacity(109);
        for i in 0..81u8 {
            terms.push(Term::Monomial([i / 27, i / 9 % 3, i / 3 % 3, i % 3]));
        }
        for input in 0..4 {
            for &scale in &EXP_SCALES {
                terms.push(Term::Exp { input, scale });
            }
        }
        for input in 0..4 {
            terms.push(Term::Log { input });
        }
        Self { terms }
    }
}

impl TermLibrary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistillConfig {
    pub max_terms: usize,
    /// Minimum R^2 gain for another term.
    pub min_gain: f64,
    /// R^2 at which selection stops.
    pub r2_target: f64,
    /// Below this R^2 the neuron is categorized as `Other`.
    pub min_r2: f64,
}

impl Default for DistillConfig {
    fn default() -> Self {
        Self { max_terms: 8, min_gain: 1e-4, r2_target: 1.0 - 1e-12, min_r2: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedTerm {
    pub term: Term,
    pub coefficient: f64,
    /// coefficient times the term's standard deviation over the samples.
    pub standardized: f64,
    /// R^2 gained when the term entered the selection.
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeuronFit {
    pub layer: usize,
    pub neuron: usize,
    /// Selected terms; the constant comes first.
    pub terms: Vec<FittedTerm>,
    pub r2: f64,
    pub dominant: Term,
    pub category: TermCategory,
}

impl NeuronFit {
    pub fn id(&self) -> String {
        format!("l{}n{}", self.layer, self.neuron)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn centered(v: Vec<f64>) -> Vec<f64> {
    let m = crate::stats::mean(&v);
    v.into_iter().map(|x| x - m).collect()
}

/// Fits one neuron's outputs over `library`; `inputs` rows are (Re x, Im x, Re y, Im y).
pub fn distill_neuron(
    outputs: &[f64],
    inputs: &[[f64; 4]],
    library: &TermLibrary,
    cfg: &DistillConfig,
) -> Result<NeuronFit> {
    let n = inputs.len();
    if outputs.len() != n {
        return Err(FeatgenError::Dimension(format!("{} outputs for {n} inputs", outputs.len())));
    }
    let needed = 10 * library.len();
    if n < needed {
        return Err(FeatgenError::InsufficientSamples { needed, got: n });
    }
    if outputs.iter().chain(inputs.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(FeatgenError::NonFinite);
    }

    let target = centered(outputs.to_vec());
    let sst = dot(&target, &target);
    // Variance at rounding level is treated as a constant neuron.
    let sst = if sst <= 1e-24 * dot(outputs, outputs) { 0.0 } else { sst };
    let cols: Vec<Vec<f64>> = library.terms.iter().map(|t| inputs.iter().map(|x| t.eval(x)).collect()).collect();
    // Centering projects out the always-present constant.
    let mut resid_cols: Vec<Option<Vec<f64>>> = cols
        .iter()
        .zip(&library.terms)
        .map(|(c, t)| {
            let c = centered(c.clone());
            (!t.is_constant() && dot(&c, &c) > 0.0 && c.iter().all(|v| v.is_finite())).then_some(c)
        })
        .collect();
    let norms0: Vec<f64> = resid_cols.iter().map(|c| c.as_ref().map_or(0.0, |c| dot(c, c))).collect();

    let mut selected: Vec<(usize, f64)> = Vec::new();
    let mut resid = target.clone();
    let mut r2 = 0.0;
    while sst > 0.0 && selected.len() < cfg.max_terms && r2 < cfg.r2_target {
        let mut best: Option<(usize, f64)> = None;
        for (j, c) in resid_cols.iter().enumerate() {
            let Some(c) = c else { continue };
            let cc = dot(c, c);
            if cc <= 1e-10 * norms0[j] {
                continue;
            }
            let cr = dot(c, &resid);
            let gain = cr * cr / (cc * sst);
            if best.is_none_or(|(_, g)| gain > g) {
                best = Some((j, gain));
            }
        }
        let Some((j, gain)) = best else { break };
        if gain < cfg.min_gain {
            break;
        }
        let q = resid_cols[j].take().unwrap_or_default();
        let qq = dot(&q, &q);
        let a = dot(&q, &resid) / qq;
        for (r, v) in resid.iter_mut().zip(&q) {
            *r -= a * v;
        }
        for c in resid_cols.iter_mut().flatten() {
            let b = dot(&q, c) / qq;
            for (ci, v) in c.iter_mut().zip(&q) {
                *ci -= b * v;
            }
        }
        r2 = 1.0 - dot(&resid, &resid) / sst;
        selected.push((j, gain));
    }
    let r2 = if sst > 0.0 { r2.clamp(0.0, 1.0) } else { 1.0 };

    // Refit on the selected columns with an intercept.
    let k = selected.len();
    let mut coefs = vec![0.0; k];
    if k > 0 {
        let mut a = nalgebra::DMatrix::<f64>::zeros(n, k);
        for (c, (j, _)) in selected.iter().enumerate() {
            for (i, v) in centered(cols[*j].clone()).into_iter().enumerate() {
                a[(i, c)] = v;
            }
        }
        let b = nalgebra::DVector::from_column_slice(&target);
        let sol = a.svd(true, true).solve(&b, 1e-12).map_err(|e| FeatgenError::Solver(e.to_string()))?;
        coefs = sol.iter().copied().collect();
    }
    let intercept = crate::stats::mean(outputs)
        - selected.iter().zip(&coefs).map(|((j, _), c)| c * crate::stats::mean(&cols[*j])).sum::<f64>();

    let mut terms = vec![FittedTerm {
        term: Term::Monomial([0; 4]),
        coefficient: intercept,
        standardized: 0.0,
        gain: 0.0,
    }];
    for ((j, gain), c) in selected.iter().zip(&coefs) {
        let sd = crate::stats::variance(&cols[*j]).sqrt();
        terms.push(FittedTerm { term: library.terms[*j], coefficient: *c, standardized: c * sd, gain: *gain });
    }
    let dominant = terms[1..]
        .iter()
        .max_by(|a, b| a.standardized.abs().total_cmp(&b.standardized.abs()).then(a.gain.total_cmp(&b.gain)))
        .map_or(terms[0].term, |t| t.term);
    let category = if r2 < cfg.min_r2 { TermCategory::Other } else { dominant.category() };
    Ok(NeuronFit { layer: 0, neuron: 0, terms, r2, dominant, category })
}

/// Hidden neurons whose post-activation summed over `inputs` exceeds 0, as (layer, index).
pub fn select_active_neurons(model: &Mlp, inputs: &[f64]) -> Result<Vec<(usize, usize)>> {
    let sums = hidden_sums(model, inputs)?;
    Ok(sums
        .iter()
        .enumerate()
        .flat_map(|(l, s)| s.iter().enumerate().filter(|(_, v)| **v > 0.0).map(move |(j, _)| (l, j)))
        .collect())
}

fn hidden_sums(model: &Mlp, inputs: &[f64]) -> Result<Vec<Vec<f64>>> {
    let hidden = model.layers().len().saturating_sub(1);
    let batch = check_rows(model, inputs)?;
    let cache = model.forward(inputs, batch)?;
    Ok((0..hidden)
        .map(|l| {
            let w = model.layers()[l].n_out;
            let post = cache.post(l);
            (0..w).map(|j| (0..batch).map(|i| post[i * w + j]).sum()).collect()
        })
        .collect())
}

fn check_rows(model: &Mlp, inputs: &[f64]) -> Result<usize> {
    let w = model.input_dim();
    if w != 4 || inputs.is_empty() || inputs.len() % w != 0 {
        return Err(FeatgenError::Dimension(format!("need rows of 4 generator inputs, got {} values for width {w}", inputs.len())));
    }
    Ok(inputs.len() / w)
}

/// Distills every selected hidden neuron of a generator network in parallel.
pub fn distill_network(model: &Mlp, inputs: &[f64], library: &TermLibrary, cfg: &DistillConfig) -> Result<DistillReport> {
    let batch = check_rows(model, inputs)?;
    let neurons = select_active_neurons(model, inputs)?;
    let cache = model.forward(inputs, batch)?;
    let rows: Vec<[f64; 4]> = inputs.chunks_exact(4).map(|c| [c[0], c[1], c[2], c[3]]).collect();
    let fits = neurons
        .par_iter()
        .map(|&(l, j)| {
            let w = model.layers()[l].n_out;
            let post = cache.post(l);
            let out: Vec<f64> = (0..batch).map(|i| post[i * w + j]).collect();
            distill_neuron(&out, &rows, library, cfg).map(|f| NeuronFit { layer: l, neuron: j, ..f })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DistillReport { fits })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DistillReport {
    pub fits: Vec<NeuronFit>,
}

impl DistillReport {
    /// CSV with columns neuron_id, term_descriptor, coefficient, r2.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("neuron_id,term_descriptor,coefficient,r2\n");
        for f in &self.fits {
            for t in &f.terms {
                let _ = writeln!(s, "{},\"{}\",{:?},{:?}", f.id(), t.term, t.coefficient, f.r2);
            }
        }
        s
    }
}

/// Dominant-term category counts.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TermHistogram {
    pub polynomial: usize,
    pub exponential: usize,
    pub logarithmic: usize,
    pub other: usize,
}

impl TermHistogram {
    pub fn count(&self, c: TermCategory) -> usize {
        match c {
            TermCategory::Polynomial => self.polynomial,
            TermCategory::Exponential => self.exponential,
            TermCategory::Logarithmic => self.logarithmic,
            TermCategory::Other => self.other,
        }
    }

    pub fn total(&self) -> usize {
        self.polynomial + self.exponential + self.logarithmic + self.other
    }

    /// Most frequent category; ties go to the earlier one in `TermCategory::ALL`.
    pub fn mode(&self) -> TermCategory {
        let mut best = TermCategory::Polynomial;
        for c in TermCategory::ALL {
            if self.count(c) > self.count(best) {
                best = c;
            }
        }
        best
    }

    pub fn fraction(&self, c: TermCategory) -> f64 {
        self.count(c) as f64 / self.total().max(1) as f64
    }
}

pub fn term_frequency(reports: &[&DistillReport]) -> Result<TermHistogram> {
    let mut h = TermHistogram::default();
    let mut any = false;
    for f in reports.iter().flat_map(|r| &r.fits) {
        any = true;
        match f.category {
            TermCategory::Polynomial => h.polynomial += 1,
            TermCategory::Exponential => h.exponential += 1,
            TermCategory::Logarithmic => h.logarithmic += 1,
            TermCategory::Other => h.other += 1,
        }
    }
    if any {
        Ok(h)
    } else {
        Err(FeatgenError::Empty)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{Activation, Layer};
    use crate::rng::seeded;
    use rand::Rng;

    fn samples(n: usize, seed: u64) -> Vec<[f64; 4]> {
        let mut r = seeded(seed, 0);
        (0..n).map(|_| std::array::from_fn(|_| r.gen_range(-1.0..1.0))).collect()
    }

    #[test]
    fn library_size() {
        let lib = TermLibrary::default();
        assert_eq!(lib.len(), 109);
        assert!(lib.terms[0].is_constant());
        assert_eq!(lib.terms[30], Term::Monomial([1, 0, 1, 0]));
    }

    #[test]
    fn bilinear_neuron() {
        let x = samples(1200, 1);
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v[0] * v[2]).collect();
        let f = distill_neuron(&y, &x, &TermLibrary::default(), &DistillConfig::default()).unwrap();
        assert_eq!(f.dominant, Term::Monomial([1, 0, 1, 0]));
        assert!(f.r2 > 0.999);
        assert_eq!(f.category, TermCategory::Polynomial);
        assert!((f.terms[1].coefficient - 2.0).abs() < 1e-9);
    }

    #[test]
    fn constant_neuron() {
        let x = samples(1200, 2);
        let f = distill_neuron(&vec![0.7; 1200], &x, &TermLibrary::default(), &DistillConfig::default()).unwrap();
        assert_eq!(f.terms.len(), 1);
        assert!((f.terms[0].coefficient - 0.7).abs() < 1e-12);
        assert_eq!(f.category, TermCategory::Polynomial);
    }

    #[test]
    fn exponential_neuron() {
        let x = samples(1200, 3);
        let y: Vec<f64> = x.iter().map(|v| v[0].exp()).collect();
        let f = distill_neuron(&y, &x, &TermLibrary::default(), &DistillConfig::default()).unwrap();
        assert_eq!(f.dominant, Term::Exp { input: 0, scale: 1.0 });
        assert!(f.r2 > 1.0 - 1e-9);
    }

    #[test]
    fn too_few_samples() {
        let x = samples(100, 4);
        assert!(matches!(
            distill_neuron(&vec![0.0; 100], &x, &TermLibrary::default(), &DistillConfig::default()),
            Err(FeatgenError::InsufficientSamples { .. })
        ));
    }

    fn toy(w1: Vec<f64>, b1: Vec<f64>) -> Mlp {
        Mlp::from_layers(vec![
            Layer { n_in: 4, n_out: 2, weights: w1, biases: b1, activation: Activation::Relu },
            Layer { n_in: 2, n_out: 1, weights: vec![1.0, 1.0], biases: vec![0.0], activation: Activation::Sine },
        ])
        .unwrap()
    }

    #[test]
    fn neuron_selection() {
        let x: Vec<f64> = samples(50, 5).into_iter().flatten().map(f64::abs).collect();
        let dead = toy(vec![1.0, 1.0, 1.0, 1.0, -1.0, -1.0, -1.0, -1.0], vec![0.0, -0.1]);
        assert_eq!(select_active_neurons(&dead, &x).unwrap(), vec![(0, 0)]);
        let live = toy(vec![0.5; 8], vec![0.1, 0.1]);
        assert_eq!(select_active_neurons(&live, &x).unwrap(), vec![(0, 0), (0, 1)]);
        assert_eq!(select_active_neurons(&live, &x).unwrap(), select_active_neurons(&live, &x).unwrap());
    }

    #[test]
    fn histogram() {
        assert!(matches!(term_frequency(&[]), Err(FeatgenError::Empty)));
        let x = samples(1200, 6);
        let lib = TermLibrary::default();
        let cfg = DistillConfig::default();
        let fits = (0..3)
            .map(|k| {
                let y: Vec<f64> = x.iter().map(|v| v[k] * v[k + 1] + 0.3 * v[k]).collect();
                distill_neuron(&y, &x, &lib, &cfg).unwrap()
            })
            .collect();
        let r = DistillReport { fits };
        let h = term_frequency(&[&r]).unwrap();
        assert_eq!(h.polynomial, 3);
        assert_eq!(h.mode(), TermCategory::Polynomial);
        assert_eq!(h.fraction(TermCategory::Polynomial), 1.0);
        assert!(r.to_csv().starts_with("neuron_id,term_descriptor,coefficient,r2\nl0n0,"));
    }
}
