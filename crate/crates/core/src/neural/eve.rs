//! Passive eavesdropper: a network on RIS-side observations trained to
//! correlate with a fixed key-generation scheme's features.

use rand::Rng;

use super::inputs::{adversary_inputs, alice_inputs, bob_inputs, AdversaryInput};
use super::loss::eve_loss;
use super::train::{feature_values, FeatureNets};
use super::{AdamState, Mlp, NeuralError, Result};
use crate::chansim::{generate_dataset, Dataset, DatasetConfig, ProbeRound, Split, SystemParams};
use crate::rng::{derive_seed, seeded};
use crate::stats::pearson;

/// A pair of legitimate feature generators.
pub trait FeatureScheme: Sync {
    fn name(&self) -> String;
    /// Alice's and Bob's features for each round.
    fn features(&self, rounds: &[&ProbeRound], params: &SystemParams) -> Result<(Vec<f64>, Vec<f64>)>;
}

/// Trained generator networks.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralScheme {
    pub alice: Mlp,
    pub bob: Mlp,
}

impl From<&FeatureNets> for NeuralScheme {
    fn from(n: &FeatureNets) -> Self {
        Self { alice: n.alice.clone(), bob: n.bob.clone() }
    }
}

impl FeatureScheme for NeuralScheme {
    fn name(&self) -> String {
        "neural".into()
    }

    fn features(&self, rounds: &[&ProbeRound], params: &SystemParams) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((
            feature_values(&self.alice, &alice_inputs(rounds, params))?,
            feature_values(&self.bob, &bob_inputs(rounds, params))?,
        ))
    }
}

/// Re of the unit-normalized product x y.
#[derive(Debug, Clone, Copy, Default)]
pub struct CrossMultPhase;

impl FeatureScheme for CrossMultPhase {
    fn name(&self) -> String {
        "crossmult_phase".into()
    }

    fn features(&self, rounds: &[&ProbeRound], _: &SystemParams) -> Result<(Vec<f64>, Vec<f64>)> {
        let unit = |z: crate::C64| {
            let r = z.norm();
            if r > 0.0 {
                z.re / r
            } else {
                0.0
            }
        };
        Ok((
            rounds.iter().map(|r| unit(r.x_a * r.y_a)).collect(),
            rounds.iter().map(|r| unit(r.x_b * r.y_b)).collect(),
        ))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EveConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub hidden: Vec<usize>,
    pub input: AdversaryInput,
    pub eval_every: usize,
    pub seed: u64,
}

impl Default for EveConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-5,
            batch_size: 64,
            max_epochs: 200_000,
            hidden: vec![1024, 512, 128],
            input: AdversaryInput::Reflection,
            eval_every: 1000,
            seed: 0,
        }
    }
}

impl EveConfig {
    pub fn desk(seed: u64) -> Self {
        Self { learning_rate: 1e-3, max_epochs: 20_000, hidden: vec![128, 64], eval_every: 500, seed, ..Self::default() }
    }
}

#[derive(Debug, Clone)]
pub struct EveOutcome {
    pub eve: Mlp,
    pub selected_epoch: usize,
    /// (epoch, mean |rho| on validation) per checkpoint.
    pub validation: Vec<(usize, f64)>,
    /// Signed correlations on the test split.
    pub rho_ea: f64,
    pub rho_eb: f64,
    pub rho_ab: f64,
}

impl EveOutcome {
    pub fn max_abs(&self) -> f64 {
        self.rho_ea.abs().max(self.rho_eb.abs())
    }
}

struct Prepared {
    x: Vec<f64>,
    fa: Vec<f64>,
    fb: Vec<f64>,
}

fn prepare(target: &dyn FeatureScheme, rounds: &[ProbeRound], params: &SystemParams, kind: AdversaryInput) -> Result<Prepared> {
    let refs: Vec<&ProbeRound> = rounds.iter().collect();
    let (fa, fb) = target.features(&refs, params)?;
    Ok(Prepared { x: adversary_inputs(&refs, params, kind), fa, fb })
}

fn corr(x: &[f64], y: &[f64]) -> f64 {
    pearson(x, y).unwrap_or(0.0)
}

/// Trains Eve on `dataset`'s training split, keeping the checkpoint with the
/// highest validation correlation, and reports on the test split.
pub fn train_eve_on(target: &dyn FeatureScheme, dataset: &Dataset, cfg: &EveConfig) -> Result<EveOutcome> {
    if cfg.batch_size < 2 || cfg.max_epochs == 0 || cfg.eval_every == 0 || !(cfg.learning_rate > 0.0) {
        return Err(NeuralError::Config("invalid eve config".into()));
    }
    let params = &dataset.params;
    let (ntr, nva, nte) = dataset.split_counts();
    if ntr < 2 || nte < 2 {
        return Err(NeuralError::Data("eve needs at least 2 train and 2 test rounds".into()));
    }
    let train = prepare(target, dataset.split(Split::Train), params, cfg.input)?;
    let val = if nva >= 2 { Some(prepare(target, dataset.split(Split::Validation), params, cfg.input)?) } else { None };
    let w = cfg.input.width(params.m());

    let mut init = seeded(cfg.seed, 0);
    let dims: Vec<usize> = std::iter::once(w).chain(cfg.hidden.iter().copied()).chain(std::iter::once(1)).collect();
    let mut eve = Mlp::feature_net(&dims, &mut init)?;
    let mut opt = AdamState::for_mlp(&eve);
    let mut rng = seeded(cfg.seed, 1);
    let b = cfg.batch_size;
    let mut xb = vec![0.0; b * w];
    let (mut fa, mut fb) = (vec![0.0; b], vec![0.0; b]);
    let mut best: Option<(f64, usize, Mlp)> = None;
    let mut validation = Vec::new();

    for epoch in 1..=cfg.max_epochs {
        for k in 0..b {
            let i = rng.gen_range(0..ntr);
            xb[k * w..(k + 1) * w].copy_from_slice(&train.x[i * w..(i + 1) * w]);
            fa[k] = train.fa[i];
            fb[k] = train.fb[i];
        }
        let cache = eve.forward(&xb, b)?;
        let loss = eve_loss(cache.output(), &fa, &fb)?;
        if !loss.value.is_finite() {
            return Err(NeuralError::Diverged { epoch, detail: format!("eve loss = {}", loss.value) });
        }
        let g = eve.backward(&cache, &loss.grad_m)?;
        eve.adam_step(&mut opt, &g, cfg.learning_rate)?;

        if let Some(v) = &val {
            if epoch % cfg.eval_every == 0 || epoch == cfg.max_epochs {
                let fe = feature_values(&eve, &v.x)?;
                let score = 0.5 * (corr(&fe, &v.fa).abs() + corr(&fe, &v.fb).abs());
                validation.push((epoch, score));
                if best.as_ref().is_none_or(|(s, _, _)| score > *s) {
                    best = Some((score, epoch, eve.clone()));
                }
            }
        }
    }

    let (mut eve, selected_epoch) = match best {
        Some((_, e, net)) => (net, e),
        None => (eve, cfg.max_epochs),
    };
    // Eve picks her sign to agree with Alice on data she can label.
    let (ox, ofa) = match &val {
        Some(v) => (&v.x, &v.fa),
        None => (&train.x, &train.fa),
    };
    if corr(&feature_values(&eve, ox)?, ofa) < 0.0 {
        eve.negate_output()?;
    }
    let test = prepare(target, dataset.split(Split::Test), params, cfg.input)?;
    let fe = feature_values(&eve, &test.x)?;
    Ok(EveOutcome {
        rho_ea: corr(&fe, &test.fa),
        rho_eb: corr(&fe, &test.fb),
        rho_ab: corr(&test.fa, &test.fb),
        eve,
        selected_epoch,
        validation,
    })
}

/// Generates a fresh dataset for Eve (seeded independently of the
/// generators' training data) and trains on it.
pub fn train_eve(
    target: &dyn FeatureScheme,
    params: &SystemParams,
    data: &DatasetConfig,
    cfg: &EveConfig,
) -> Result<EveOutcome> {
    let ds = generate_dataset(params, data, derive_seed(cfg.seed, "eve-data"))
        .map_err(|e| NeuralError::Data(e.to_string()))?;
    train_eve_on(target, &ds, cfg)
}

/// Eve's features on arbitrary rounds.
pub fn eve_features(eve: &Mlp, rounds: &[&ProbeRound], params: &SystemParams, kind: AdversaryInput) -> Result<Vec<f64>> {
    feature_values(eve, &adversary_inputs(rounds, params, kind))
}
