//! Adversarial training of Alice's and Bob's feature generators against an
//! emulated MITM-RIS Mallory.
//!
//! Each epoch draws one batch from the training split, updates Mallory on its
//! loss with the generators detached, then updates both generators with
//! Mallory's (pre-update) features detached. Validation runs every
//! `eval_every` epochs; the returned model is the best checkpoint by the
//! generators' own validation objective within the last `select_window`
//! fraction of training.

use std::fmt::Write as _;

use rand::Rng;

use super::inputs::{adversary_inputs, alice_inputs, bob_inputs, AdversaryInput};
use super::loss::{
    adversary_loss, generator_loss, mse, mse_adversarial_loss, mse_adversary_loss, AdversaryLoss, FeatureBatch,
    GeneratorLoss,
};
use super::{AdamState, ForwardCache, Mlp, NeuralError, Result};
use crate::chansim::{Dataset, ProbeRound, Split, SystemParams};
use crate::rng::{seeded, SimRng};
use crate::stats::pearson;

/// Rows per forward pass when evaluating large sets.
const EVAL_CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossKind {
    /// -|rho_ab| + lambda (|rho_am| + |rho_bm|).
    #[default]
    CorrAdversarial,
    /// -|rho_ab| only; Mallory still trains so its correlation can be monitored.
    CorrOnly,
    /// MSE(a,b) - lambda (MSE(a,m) + MSE(b,m)).
    MseAdversarial,
}

impl LossKind {
    /// Whether negating one generator's output leaves the loss unchanged.
    pub fn sign_free(self) -> bool {
        !matches!(self, LossKind::MseAdversarial)
    }

    pub fn name(self) -> &'static str {
        match self {
            LossKind::CorrAdversarial => "corr_adversarial",
            LossKind::CorrOnly => "corr_only",
            LossKind::MseAdversarial => "mse_adversarial",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "corr_adversarial" => Ok(LossKind::CorrAdversarial),
            "corr_only" => Ok(LossKind::CorrOnly),
            "mse_adversarial" => Ok(LossKind::MseAdversarial),
            other => Err(NeuralError::Config(format!("unknown loss kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Mallory's rate; `None` uses `learning_rate`.
    pub adversary_learning_rate: Option<f64>,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub lambda: f64,
    pub loss_kind: LossKind,
    pub seed: u64,
    pub generator_hidden: Vec<usize>,
    pub adversary_hidden: Vec<usize>,
    pub adversary_input: AdversaryInput,
    pub eval_every: usize,
    /// Fraction of the run, counted from the end, eligible for checkpoint selection.
    pub select_window: f64,
    /// Reinitialize Mallory and its optimizer every this many epochs.
    pub adversary_reset_every: Option<usize>,
}

impl Default for TrainConfig {
    /// Full-scale networks and the nominal rate of 1e-5.
    fn default() -> Self {
        Self {
            learning_rate: 1e-5,
            adversary_learning_rate: None,
            batch_size: 64,
            max_epochs: 200_000,
            lambda: 0.8,
            loss_kind: LossKind::CorrAdversarial,
            seed: 0,
            generator_hidden: vec![512, 128],
            adversary_hidden: vec![1024, 512, 128],
            adversary_input: AdversaryInput::Reflection,
            eval_every: 1000,
            select_window: 0.25,
            adversary_reset_every: None,
        }
    }
}

impl TrainConfig {
    /// Desk-scale calibration: 4-64-32-1 generators, 128-64 adversary, lr 1e-3, 2e4 epochs.
    /// Mallory runs at 3e-4 and restarts every 4000 epochs; at 1e-3 its sine
    /// pre-activation grows without bound and it stops learning.
    pub fn desk(seed: u64) -> Self {
        Self {
            learning_rate: 1e-3,
            adversary_learning_rate: Some(3e-4),
            adversary_reset_every: Some(4000),
            max_epochs: 20_000,
            generator_hidden: vec![64, 32],
            adversary_hidden: vec![128, 64],
            eval_every: 500,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(NeuralError::Config(m.to_string()));
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return bad("lambda must be non-negative");
        }
        if self.batch_size < 2 {
            return bad("batch size must be at least 2");
        }
        if !(self.learning_rate > 0.0) || self.adversary_learning_rate.is_some_and(|r| !(r > 0.0)) {
            return bad("learning rates must be positive");
        }
        if self.max_epochs == 0 || self.eval_every == 0 {
            return bad("max_epochs and eval_every must be positive");
        }
        if self.adversary_reset_every == Some(0) {
            return bad("adversary_reset_every must be positive");
        }
        if !(self.select_window > 0.0 && self.select_window <= 1.0) {
            return bad("select_window must lie in (0, 1]");
        }
        Ok(())
    }
}

/// Alice's and Bob's generators plus Mallory.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureNets {
    pub alice: Mlp,
    pub bob: Mlp,
    pub mallory: Mlp,
}

/// Network output over many rows, evaluated in chunks.
pub fn feature_values(net: &Mlp, inputs: &[f64]) -> Result<Vec<f64>> {
    run_chunked(net, inputs, false)
}

/// Output-layer pre-activation over many rows.
pub fn pre_activation_values(net: &Mlp, inputs: &[f64]) -> Result<Vec<f64>> {
    run_chunked(net, inputs, true)
}

fn run_chunked(net: &Mlp, inputs: &[f64], pre: bool) -> Result<Vec<f64>> {
    let w = net.input_dim();
    if inputs.len() % w != 0 {
        return Err(NeuralError::Dimension(format!("{} values is not a multiple of {w}", inputs.len())));
    }
    let mut out = Vec::with_capacity(inputs.len() / w * net.output_dim());
    for chunk in inputs.chunks(EVAL_CHUNK * w) {
        let c = net.forward(chunk, chunk.len() / w)?;
        out.extend_from_slice(if pre { c.pre_output() } else { c.output() });
    }
    Ok(out)
}

impl FeatureNets {
    /// Negates Bob's output if his features anti-correlate with Alice's on `batch`.
    pub fn orient(&mut self, batch: &TrainBatch) -> Result<bool> {
        let fa = feature_values(&self.alice, &batch.x_a)?;
        let fb = feature_values(&self.bob, &batch.x_b)?;
        let flip = pearson(&fa, &fb).is_some_and(|r| r < 0.0);
        if flip {
            self.bob.negate_output()?;
        }
        Ok(flip)
    }

    /// Features of all three networks on `rounds`.
    pub fn features(&self, rounds: &[&ProbeRound], params: &SystemParams, kind: AdversaryInput) -> Result<FeatureBatch> {
        Ok(FeatureBatch {
            f_a: feature_values(&self.alice, &alice_inputs(rounds, params))?,
            f_b: feature_values(&self.bob, &bob_inputs(rounds, params))?,
            f_m: feature_values(&self.mallory, &adversary_inputs(rounds, params, kind))?,
        })
    }
}

/// Signed correlations of one feature triplet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlations {
    pub rho_ab: f64,
    pub rho_am: f64,
    pub rho_bm: f64,
}

impl Correlations {
    pub fn of(batch: &FeatureBatch) -> Self {
        let r = |x: &[f64], y: &[f64]| pearson(x, y).unwrap_or(0.0);
        Self { rho_ab: r(&batch.f_a, &batch.f_b), rho_am: r(&batch.f_a, &batch.f_m), rho_bm: r(&batch.f_b, &batch.f_m) }
    }

    pub fn max_adversary(&self) -> f64 {
        self.rho_am.abs().max(self.rho_bm.abs())
    }
}

pub fn evaluate(nets: &FeatureNets, rounds: &[ProbeRound], params: &SystemParams, kind: AdversaryInput) -> Result<Correlations> {
    let refs: Vec<&ProbeRound> = rounds.iter().collect();
    Ok(Correlations::of(&nets.features(&refs, params, kind)?))
}

/// Per-epoch training-batch statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss_gen: f64,
    pub loss_adv: f64,
    pub rho_ab: f64,
    pub rho_am: f64,
    pub rho_bm: f64,
}

/// Validation-split statistics at one checkpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalRecord {
    pub epoch: usize,
    pub rho_ab: f64,
    pub rho_am: f64,
    pub rho_bm: f64,
    pub mse_ab: f64,
    /// Negated generator loss on the validation split.
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub selected: FeatureNets,
    pub selected_epoch: usize,
    pub final_nets: FeatureNets,
    pub log: Vec<EpochLog>,
    pub validation: Vec<EvalRecord>,
}

impl TrainOutcome {
    /// CSV with columns epoch, loss_gen, loss_adv, rho_ab, rho_am, rho_bm.
    pub fn log_csv(&self) -> String {
        let mut s = String::from("epoch,loss_gen,loss_adv,rho_ab,rho_am,rho_bm\n");
        for e in &self.log {
            let _ = writeln!(s, "{},{:?},{:?},{:?},{:?},{:?}", e.epoch, e.loss_gen, e.loss_adv, e.rho_ab, e.rho_am, e.rho_bm);
        }
        s
    }
}

/// Row-major inputs for one batch.
#[derive(Debug, Clone)]
pub struct TrainBatch {
    pub x_a: Vec<f64>,
    pub x_b: Vec<f64>,
    pub x_m: Vec<f64>,
    pub size: usize,
}

impl TrainBatch {
    pub fn from_rounds(rounds: &[&ProbeRound], params: &SystemParams, kind: AdversaryInput) -> Self {
        Self {
            x_a: alice_inputs(rounds, params),
            x_b: bob_inputs(rounds, params),
            x_m: adversary_inputs(rounds, params, kind),
            size: rounds.len(),
        }
    }
}

/// Stateful trainer; `train_adversarial` drives it to completion.
pub struct AdversarialTrainer<'a> {
    dataset: &'a Dataset,
    cfg: TrainConfig,
    rng: SimRng,
    nets: FeatureNets,
    opt_a: AdamState,
    opt_b: AdamState,
    opt_m: AdamState,
    epoch: usize,
    val_batch: Option<TrainBatch>,
    log: Vec<EpochLog>,
    validation: Vec<EvalRecord>,
    best: Option<(f64, usize, FeatureNets)>,
}

fn dims(input: usize, hidden: &[usize]) -> Vec<usize> {
    std::iter::once(input).chain(hidden.iter().copied()).chain(std::iter::once(1)).collect()
}

fn finite_or_diverged(epoch: usize, what: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(NeuralError::Diverged { epoch, detail: format!("{what} = {v}") })
    }
}

impl<'a> AdversarialTrainer<'a> {
    pub fn new(dataset: &'a Dataset, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if dataset.split(Split::Train).len() < 2 {
            return Err(NeuralError::Data("training split needs at least 2 rounds".into()));
        }
        let params = &dataset.params;
        let mut init = seeded(cfg.seed, 0);
        let gdims = dims(4, &cfg.generator_hidden);
        let nets = FeatureNets {
            alice: Mlp::feature_net(&gdims, &mut init)?,
            bob: Mlp::feature_net(&gdims, &mut init)?,
            mallory: Mlp::feature_net(&dims(cfg.adversary_input.width(params.m()), &cfg.adversary_hidden), &mut init)?,
        };
        let val = dataset.split(Split::Validation);
        let val_batch = (val.len() >= 2).then(|| {
            let refs: Vec<&ProbeRound> = val.iter().collect();
            TrainBatch::from_rounds(&refs, params, cfg.adversary_input)
        });
        Ok(Self {
            dataset,
            rng: seeded(cfg.seed, 1),
            opt_a: AdamState::for_mlp(&nets.alice),
            opt_b: AdamState::for_mlp(&nets.bob),
            opt_m: AdamState::for_mlp(&nets.mallory),
            nets,
            cfg,
            epoch: 0,
            val_batch,
            log: Vec::new(),
            validation: Vec::new(),
            best: None,
        })
    }

    /// Fresh Mallory weights and Adam state, drawn from a stream keyed by the epoch.
    fn reset_mallory(&mut self) -> Result<()> {
        let mut r = seeded(self.cfg.seed, 2 + self.epoch as u64);
        self.nets.mallory = Mlp::feature_net(&self.nets.mallory.dims(), &mut r)?;
        self.opt_m = AdamState::for_mlp(&self.nets.mallory);
        Ok(())
    }

    pub fn nets(&self) -> &FeatureNets {
        &self.nets
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// Uniform draw with replacement from the training split.
    pub fn sample_batch(&mut self) -> TrainBatch {
        let train = self.dataset.split(Split::Train);
        let refs: Vec<&ProbeRound> =
            (0..self.cfg.batch_size).map(|_| &train[self.rng.gen_range(0..train.len())]).collect();
        TrainBatch::from_rounds(&refs, &self.dataset.params, self.cfg.adversary_input)
    }

    fn forward_all(&self, b: &TrainBatch) -> Result<(ForwardCache, ForwardCache, ForwardCache)> {
        Ok((
            self.nets.alice.forward(&b.x_a, b.size)?,
            self.nets.bob.forward(&b.x_b, b.size)?,
            self.nets.mallory.forward(&b.x_m, b.size)?,
        ))
    }

    fn adversary_objective(&self, batch: &FeatureBatch) -> Result<AdversaryLoss> {
        match self.cfg.loss_kind {
            LossKind::MseAdversarial => mse_adversary_loss(batch),
            _ => adversary_loss(batch),
        }
    }

    fn generator_objective(&self, batch: &FeatureBatch) -> Result<GeneratorLoss> {
        match self.cfg.loss_kind {
            LossKind::CorrAdversarial => generator_loss(batch, self.cfg.lambda),
            LossKind::CorrOnly => generator_loss(batch, 0.0),
            LossKind::MseAdversarial => mse_adversarial_loss(batch, self.cfg.lambda),
        }
    }

    fn mallory_step(&mut self, batch: &FeatureBatch, cm: &ForwardCache) -> Result<AdversaryLoss> {
        let loss = self.adversary_objective(batch)?;
        let g = self.nets.mallory.backward(cm, &loss.grad_m)?;
        let lr = self.cfg.adversary_learning_rate.unwrap_or(self.cfg.learning_rate);
        self.nets.mallory.adam_step(&mut self.opt_m, &g, lr)?;
        Ok(loss)
    }

    fn generator_step(&mut self, batch: &FeatureBatch, ca: &ForwardCache, cb: &ForwardCache) -> Result<GeneratorLoss> {
        let loss = self.generator_objective(batch)?;
        let ga = self.nets.alice.backward(ca, &loss.grad_a)?;
        let gb = self.nets.bob.backward(cb, &loss.grad_b)?;
        let lr = self.cfg.learning_rate;
        self.nets.alice.adam_step(&mut self.opt_a, &ga, lr)?;
        self.nets.bob.adam_step(&mut self.opt_b, &gb, lr)?;
        Ok(loss)
    }

    /// Mallory-only update on `batch` (generators untouched).
    pub fn mallory_update(&mut self, batch: &TrainBatch) -> Result<AdversaryLoss> {
        let (ca, cb, cm) = self.forward_all(batch)?;
        let fb = FeatureBatch { f_a: ca.output().to_vec(), f_b: cb.output().to_vec(), f_m: cm.output().to_vec() };
        self.mallory_step(&fb, &cm)
    }

    /// Generator-only update on `batch` (Mallory untouched).
    pub fn generator_update(&mut self, batch: &TrainBatch) -> Result<GeneratorLoss> {
        let (ca, cb, cm) = self.forward_all(batch)?;
        let fb = FeatureBatch { f_a: ca.output().to_vec(), f_b: cb.output().to_vec(), f_m: cm.output().to_vec() };
        self.generator_step(&fb, &ca, &cb)
    }

    /// One Algorithm-1 iteration plus periodic validation.
    pub fn run_epoch(&mut self) -> Result<EpochLog> {
        self.epoch += 1;
        let epoch = self.epoch;
        if let Some(k) = self.cfg.adversary_reset_every {
            if epoch > 1 && (epoch - 1) % k == 0 {
                self.reset_mallory()?;
            }
        }
        let batch = self.sample_batch();
        let (ca, cb, cm) = self.forward_all(&batch)?;
        let feats = FeatureBatch { f_a: ca.output().to_vec(), f_b: cb.output().to_vec(), f_m: cm.output().to_vec() };
        for v in feats.f_a.iter().chain(&feats.f_b).chain(&feats.f_m) {
            finite_or_diverged(epoch, "feature", *v)?;
        }
        let adv = self.mallory_step(&feats, &cm)?;
        finite_or_diverged(epoch, "adversary loss", adv.value)?;
        let gen = self.generator_step(&feats, &ca, &cb)?;
        finite_or_diverged(epoch, "generator loss", gen.value)?;
        let entry = EpochLog {
            epoch,
            loss_gen: gen.value,
            loss_adv: adv.value,
            rho_ab: gen.rho_ab,
            rho_am: gen.rho_am,
            rho_bm: gen.rho_bm,
        };
        self.log.push(entry);
        if epoch % self.cfg.eval_every == 0 || epoch == self.cfg.max_epochs {
            self.checkpoint()?;
        }
        Ok(entry)
    }

    fn checkpoint(&mut self) -> Result<()> {
        let Some(vb) = &self.val_batch else { return Ok(()) };
        let feats = FeatureBatch {
            f_a: feature_values(&self.nets.alice, &vb.x_a)?,
            f_b: feature_values(&self.nets.bob, &vb.x_b)?,
            f_m: feature_values(&self.nets.mallory, &vb.x_m)?,
        };
        let c = Correlations::of(&feats);
        let objective = -self.generator_objective(&feats)?.value;
        finite_or_diverged(self.epoch, "validation objective", objective)?;
        self.validation.push(EvalRecord {
            epoch: self.epoch,
            rho_ab: c.rho_ab,
            rho_am: c.rho_am,
            rho_bm: c.rho_bm,
            mse_ab: mse(&feats.f_a, &feats.f_b),
            objective,
        });
        let window_start = (1.0 - self.cfg.select_window) * self.cfg.max_epochs as f64;
        if self.epoch as f64 >= window_start && self.best.as_ref().is_none_or(|(b, _, _)| objective > *b) {
            self.best = Some((objective, self.epoch, self.nets.clone()));
        }
        Ok(())
    }

    /// Ends training. Under the correlation losses both returned models are
    /// oriented so that Alice's and Bob's features correlate positively on the
    /// validation split; the MSE loss fixes the sign itself.
    pub fn finish(self) -> Result<TrainOutcome> {
        let (mut selected, selected_epoch) = match self.best {
            Some((_, e, nets)) => (nets, e),
            None => (self.nets.clone(), self.epoch),
        };
        let mut final_nets = self.nets;
        if let (Some(vb), true) = (&self.val_batch, self.cfg.loss_kind.sign_free()) {
            selected.orient(vb)?;
            final_nets.orient(vb)?;
        }
        Ok(TrainOutcome { selected, selected_epoch, final_nets, log: self.log, validation: self.validation })
    }
}

/// Runs `cfg.max_epochs` epochs on the dataset's training split.
pub fn train_adversarial(dataset: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let mut t = AdversarialTrainer::new(dataset, cfg.clone())?;
    for _ in 0..cfg.max_epochs {
        t.run_epoch()?;
    }
    t.finish()
}
