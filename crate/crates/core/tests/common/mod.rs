#![allow(dead_code)]

use rand::Rng;
use ris_skg_core::neural::{
    adversary_loss, generator_loss, mse_adversarial_loss, mse_adversary_loss, FeatureBatch, LossKind, Mlp,
};
use ris_skg_core::rng::seeded;

/// Three random feature networks with a shared batch of inputs.
pub struct GradProblem {
    pub nets: [Mlp; 3],
    pub inputs: [Vec<f64>; 3],
    pub batch: usize,
    pub kind: LossKind,
    pub lambda: f64,
}

impl GradProblem {
    pub fn random(seed: u64, kind: LossKind) -> Self {
        let mut rng = seeded(seed, 0);
        let batch = rng.gen_range(4..12);
        let net = |n_in: usize, rng: &mut ris_skg_core::rng::SimRng| {
            let hidden: Vec<usize> = (0..rng.gen_range(1..3)).map(|_| rng.gen_range(2..7)).collect();
            let dims: Vec<usize> = std::iter::once(n_in).chain(hidden).chain(std::iter::once(1)).collect();
            let mut m = Mlp::feature_net(&dims, rng).unwrap();
            // Nonzero biases so ReLU kinks are not aligned with the origin.
            for p in m.params_mut() {
                for v in p.iter_mut() {
                    *v += rng.gen_range(-0.3..0.3);
                }
            }
            m
        };
        let widths = [4, 4, rng.gen_range(3..9)];
        let nets = [net(widths[0], &mut rng), net(widths[1], &mut rng), net(widths[2], &mut rng)];
        let inputs = widths.map(|w| (0..w * batch).map(|_| rng.gen_range(-1.5..1.5)).collect::<Vec<f64>>());
        let lambda = match kind {
            LossKind::CorrOnly => 0.0,
            _ => rng.gen_range(0.1..1.0),
        };
        Self { nets, inputs, batch, kind, lambda }
    }

    fn outputs(&self, nets: &[Mlp; 3]) -> FeatureBatch {
        let f = |i: usize| nets[i].predict(&self.inputs[i], self.batch).unwrap();
        FeatureBatch { f_a: f(0), f_b: f(1), f_m: f(2) }
    }

    fn generator_value(&self, b: &FeatureBatch) -> f64 {
        match self.kind {
            LossKind::CorrAdversarial | LossKind::CorrOnly => generator_loss(b, self.lambda).unwrap().value,
            LossKind::MseAdversarial => mse_adversarial_loss(b, self.lambda).unwrap().value,
        }
    }

    fn adversary_value(&self, b: &FeatureBatch) -> f64 {
        match self.kind {
            LossKind::MseAdversarial => mse_adversary_loss(b).unwrap().value,
            _ => adversary_loss(b).unwrap().value,
        }
    }

    /// Loss that network `i` descends: the generator loss for Alice and Bob,
    /// the adversary loss for Mallory.
    fn value(&self, nets: &[Mlp; 3], i: usize) -> f64 {
        let b = self.outputs(nets);
        if i == 2 {
            self.adversary_value(&b)
        } else {
            self.generator_value(&b)
        }
    }

    fn analytic(&self, i: usize) -> Vec<f64> {
        let caches: Vec<_> = (0..3).map(|k| self.nets[k].forward(&self.inputs[k], self.batch).unwrap()).collect();
        let b = FeatureBatch {
            f_a: caches[0].output().to_vec(),
            f_b: caches[1].output().to_vec(),
            f_m: caches[2].output().to_vec(),
        };
        let upstream = match (i, self.kind) {
            (2, LossKind::MseAdversarial) => mse_adversary_loss(&b).unwrap().grad_m,
            (2, _) => adversary_loss(&b).unwrap().grad_m,
            (_, LossKind::MseAdversarial) => {
                let l = mse_adversarial_loss(&b, self.lambda).unwrap();
                if i == 0 { l.grad_a } else { l.grad_b }
            }
            _ => {
                let l = generator_loss(&b, self.lambda).unwrap();
                if i == 0 { l.grad_a } else { l.grad_b }
            }
        };
        let g = self.nets[i].backward(&caches[i], &upstream).unwrap();
        g.slices().concat()
    }

    /// Largest relative gap between analytic and central-difference gradients
    /// over every parameter of all three networks.
    pub fn max_rel_error(&self) -> f64 {
        self.worst_entry(1e-6).0
    }

    /// Worst relative error at step `h`, with its (network, tensor, index, analytic, numeric).
    pub fn worst_entry(&self, h: f64) -> (f64, (usize, usize, usize, f64, f64)) {
        let mut worst = 0.0f64;
        let mut at = (0, 0, 0, 0.0, 0.0);
        for i in 0..3 {
            let analytic = self.analytic(i);
            let mut flat = 0;
            let shapes = self.nets[i].param_shapes();
            for (s, &len) in shapes.iter().enumerate() {
                for j in 0..len {
                    let eval = |delta: f64| {
                        let mut nets = self.nets.clone();
                        nets[i].params_mut()[s][j] += delta;
                        self.value(&nets, i)
                    };
                    let numeric = (eval(h) - eval(-h)) / (2.0 * h);
                    let a = analytic[flat];
                    let denom = a.abs().max(numeric.abs()).max(1e-5);
                    let e = (a - numeric).abs() / denom;
                    if e > worst {
                        worst = e;
                        at = (i, s, j, a, numeric);
                    }
                    flat += 1;
                }
            }
        }
        (worst, at)
    }
}

pub const LOSS_KINDS: [LossKind; 3] = [LossKind::CorrAdversarial, LossKind::CorrOnly, LossKind::MseAdversarial];
