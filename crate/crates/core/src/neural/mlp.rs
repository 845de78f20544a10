//! Dense feed-forward network on row-major batches.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use super::{NeuralError, Result};

static NEXT_REVISION: AtomicU64 = AtomicU64::new(1);

fn fresh_revision() -> u64 {
    NEXT_REVISION.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sine,
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Sine => x.sin(),
            Activation::Linear => x,
        }
    }

    #[inline]
    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sine => pre.cos(),
            Activation::Linear => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Sine => "sine",
            Activation::Linear => "linear",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "sine" => Ok(Activation::Sine),
            "linear" => Ok(Activation::Linear),
            other => Err(NeuralError::Parse(format!("unknown activation {other:?}"))),
        }
    }
}

/// Affine map followed by an activation. `weights` is `n_out x n_in` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    fn check(&self) -> Result<()> {
        if self.n_in == 0 || self.n_out == 0 {
            return Err(NeuralError::Dimension("layer with zero width".into()));
        }
        if self.weights.len() != self.n_in * self.n_out || self.biases.len() != self.n_out {
            return Err(NeuralError::Dimension(format!(
                "layer {}x{} has {} weights and {} biases",
                self.n_out,
                self.n_in,
                self.weights.len(),
                self.biases.len()
            )));
        }
        Ok(())
    }
}

/// Parameter gradients, one entry per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

impl Gradients {
    pub fn slices(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|g| [g.weights.as_slice(), g.biases.as_slice()]).collect()
    }
}

/// Activations kept by a forward pass for the matching backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    revision: u64,
    batch: usize,
    input: Vec<f64>,
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
}

impl ForwardCache {
    /// Network output, `batch x n_out` row-major.
    pub fn output(&self) -> &[f64] {
        self.post.last().map(|v| v.as_slice()).unwrap_or(&[])
    }

    /// Pre-activation of the output layer.
    pub fn pre_output(&self) -> &[f64] {
        self.pre.last().map(|v| v.as_slice()).unwrap_or(&[])
    }

    /// Post-activations of layer `l`.
    pub fn post(&self, l: usize) -> &[f64] {
        &self.post[l]
    }

    pub fn batch(&self) -> usize {
        self.batch
    }
}

#[derive(Debug, Clone)]
pub struct Mlp {
    layers: Vec<Layer>,
    revision: u64,
}

impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

/// C (m x n) = A (m x k) * B (k x n) with arbitrary strides, C overwritten.
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f64], rsa: isize, csa: isize, b: &[f64], rsb: isize, csb: isize, c: &mut [f64]) {
    // SAFETY: callers pass slices whose lengths cover every strided access for
    // the given shapes; the output slice is distinct from both inputs.
    unsafe {
        matrixmultiply::dgemm(
            m, k, n, 1.0, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, 0.0, c.as_mut_ptr(), n as isize, 1,
        );
    }
}

impl Mlp {
    /// Xavier-uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(dims: &[usize], activations: &[Activation], rng: &mut R) -> Result<Self> {
        if dims.len() < 2 || activations.len() != dims.len() - 1 {
            return Err(NeuralError::Dimension(format!(
                "{} dims need {} activations, got {}",
                dims.len(),
                dims.len().saturating_sub(1),
                activations.len()
            )));
        }
        let mut layers = Vec::with_capacity(activations.len());
        for (w, &act) in dims.windows(2).zip(activations) {
            let (n_in, n_out) = (w[0], w[1]);
            if n_in == 0 || n_out == 0 {
                return Err(NeuralError::Dimension("zero-width layer".into()));
            }
            let limit = (6.0 / (n_in + n_out) as f64).sqrt();
            let weights = (0..n_in * n_out).map(|_| rng.gen_range(-limit..limit)).collect();
            layers.push(Layer { n_in, n_out, weights, biases: vec![0.0; n_out], activation: act });
        }
        Ok(Self { layers, revision: fresh_revision() })
    }

    /// ReLU hidden layers and a sine output, the shape used by every feature network.
    pub fn feature_net<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Result<Self> {
        let n = dims.len().saturating_sub(1);
        let acts: Vec<Activation> =
            (0..n).map(|i| if i + 1 == n { Activation::Sine } else { Activation::Relu }).collect();
        Self::new(dims, &acts, rng)
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(NeuralError::Dimension("network needs at least one layer".into()));
        }
        for l in &layers {
            l.check()?;
        }
        for w in layers.windows(2) {
            if w[0].n_out != w[1].n_in {
                return Err(NeuralError::Dimension(format!("{} outputs feed {} inputs", w[0].n_out, w[1].n_in)));
            }
        }
        Ok(Self { layers, revision: fresh_revision() })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].n_out
    }

    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim()).chain(self.layers.iter().map(|l| l.n_out)).collect()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// Parameter slices in (weights, biases) order per layer. Invalidates caches.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.revision = fresh_revision();
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.biases.as_mut_slice()])
            .collect()
    }

    /// Negates the network output by flipping the last layer's sign; needs an
    /// odd output activation.
    pub fn negate_output(&mut self) -> Result<()> {
        let last = self.layers.last_mut().ok_or_else(|| NeuralError::Dimension("empty network".into()))?;
        if last.activation == Activation::Relu {
            return Err(NeuralError::Config("relu output cannot be negated".into()));
        }
        last.weights.iter_mut().chain(last.biases.iter_mut()).for_each(|v| *v = -*v);
        self.revision = fresh_revision();
        Ok(())
    }

    pub fn param_shapes(&self) -> Vec<usize> {
        self.layers.iter().flat_map(|l| [l.weights.len(), l.biases.len()]).collect()
    }

    /// Batch forward pass; `input` is `batch x input_dim` row-major.
    pub fn forward(&self, input: &[f64], batch: usize) -> Result<ForwardCache> {
        if batch == 0 || input.len() != batch * self.input_dim() {
            return Err(NeuralError::Dimension(format!(
                "input of length {} for batch {batch} x {}",
                input.len(),
                self.input_dim()
            )));
        }
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let a_prev = post.last().map(|v| v.as_slice()).unwrap_or(input);
            let mut z = vec![0.0; batch * layer.n_out];
            gemm(
                batch,
                layer.n_in,
                layer.n_out,
                a_prev,
                layer.n_in as isize,
                1,
                &layer.weights,
                1,
                layer.n_in as isize,
                &mut z,
            );
            for row in z.chunks_exact_mut(layer.n_out) {
                for (zi, b) in row.iter_mut().zip(&layer.biases) {
                    *zi += b;
                }
            }
            let a: Vec<f64> = z.iter().map(|&v| layer.activation.apply(v)).collect();
            pre.push(z);
            post.push(a);
        }
        Ok(ForwardCache { revision: self.revision, batch, input: input.to_vec(), pre, post })
    }

    /// Forward pass returning only the outputs.
    pub fn predict(&self, input: &[f64], batch: usize) -> Result<Vec<f64>> {
        let mut c = self.forward(input, batch)?;
        Ok(c.post.pop().unwrap_or_default())
    }

    /// Reverse-mode gradients of sum(upstream * output) with respect to every parameter.
    pub fn backward(&self, cache: &ForwardCache, upstream: &[f64]) -> Result<Gradients> {
        if cache.revision != self.revision {
            return Err(NeuralError::StaleCache);
        }
        let batch = cache.batch;
        if upstream.len() != batch * self.output_dim() {
            return Err(NeuralError::Dimension(format!(
                "upstream gradient of length {} for batch {batch} x {}",
                upstream.len(),
                self.output_dim()
            )));
        }
        let mut grads: Vec<LayerGrad> = Vec::with_capacity(self.layers.len());
        let mut d_a = upstream.to_vec();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let d_z: Vec<f64> = d_a
                .iter()
                .zip(&cache.pre[l])
                .map(|(g, &z)| g * layer.activation.derivative(z))
                .collect();
            let a_prev: &[f64] = if l == 0 { &cache.input } else { &cache.post[l - 1] };
            let mut d_w = vec![0.0; layer.n_out * layer.n_in];
            gemm(layer.n_out, batch, layer.n_in, &d_z, 1, layer.n_out as isize, a_prev, layer.n_in as isize, 1, &mut d_w);
            let mut d_b = vec![0.0; layer.n_out];
            for row in d_z.chunks_exact(layer.n_out) {
                for (db, g) in d_b.iter_mut().zip(row) {
                    *db += g;
                }
            }
            if l > 0 {
                let mut next = vec![0.0; batch * layer.n_in];
                gemm(batch, layer.n_out, layer.n_in, &d_z, layer.n_out as isize, 1, &layer.weights, layer.n_in as isize, 1, &mut next);
                d_a = next;
            }
            grads.push(LayerGrad { weights: d_w, biases: d_b });
        }
        grads.reverse();
        Ok(Gradients { layers: grads })
    }

    /// Text form: `mlpv1 <layers>`, then per layer `dims <in> <out> <act>`, one
    /// line per weight row and one line of biases. Shortest round-trip decimals.
    pub fn to_text(&self) -> String {
        let mut s = format!("mlpv1 {}\n", self.layers.len());
        for l in &self.layers {
            let _ = writeln!(s, "dims {} {} {}", l.n_in, l.n_out, l.activation.name());
            for row in l.weights.chunks_exact(l.n_in) {
                let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
                let _ = writeln!(s, "{}", line.join(" "));
            }
            let line: Vec<String> = l.biases.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let perr = |m: String| NeuralError::Parse(m);
        let header = lines.next().ok_or_else(|| perr("empty model file".into()))?;
        let mut h = header.split_whitespace();
        if h.next() != Some("mlpv1") {
            return Err(perr(format!("bad header {header:?}")));
        }
        let n: usize = h
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| perr("missing layer count".into()))?;
        let parse_row = |line: Option<&str>, want: usize| -> Result<Vec<f64>> {
            let line = line.ok_or_else(|| perr("truncated model file".into()))?;
            let vals: std::result::Result<Vec<f64>, _> = line.split_whitespace().map(str::parse).collect();
            let vals = vals.map_err(|e| perr(format!("bad number: {e}")))?;
            if vals.len() != want {
                return Err(perr(format!("expected {want} values, got {}", vals.len())));
            }
            Ok(vals)
        };
        let mut layers = Vec::with_capacity(n);
        for _ in 0..n {
            let d = lines.next().ok_or_else(|| perr("missing dims line".into()))?;
            let f: Vec<&str> = d.split_whitespace().collect();
            if f.len() != 4 || f[0] != "dims" {
                return Err(perr(format!("bad dims line {d:?}")));
            }
            let n_in: usize = f[1].parse().map_err(|_| perr(format!("bad input width {:?}", f[1])))?;
            let n_out: usize = f[2].parse().map_err(|_| perr(format!("bad output width {:?}", f[2])))?;
            let activation = Activation::parse(f[3])?;
            let mut weights = Vec::with_capacity(n_in * n_out);
            for _ in 0..n_out {
                weights.extend(parse_row(lines.next(), n_in)?);
            }
            let biases = parse_row(lines.next(), n_out)?;
            layers.push(Layer { n_in, n_out, weights, biases, activation });
        }
        if lines.next().is_some() {
            return Err(perr("trailing data after last layer".into()));
        }
        Self::from_layers(layers)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn scalar_forward(net: &Mlp, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        for l in net.layers() {
            let mut out = vec![0.0; l.n_out];
            for o in 0..l.n_out {
                let mut z = l.biases[o];
                for i in 0..l.n_in {
                    z += l.weights[o * l.n_in + i] * a[i];
                }
                out[o] = l.activation.apply(z);
            }
            a = out;
        }
        a
    }

    #[test]
    fn zero_net_outputs_zero() {
        let mut net = Mlp::feature_net(&[3, 5, 1], &mut seeded(1, 0)).unwrap();
        for p in net.params_mut() {
            p.fill(0.0);
        }
        let y = net.predict(&[0.3, -2.0, 7.0, 1.0, 1.0, 1.0], 2).unwrap();
        assert_eq!(y, vec![0.0, 0.0]);
    }

    #[test]
    fn identity_linear_layer() {
        let layer = Layer {
            n_in: 3,
            n_out: 2,
            weights: vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0],
            biases: vec![0.0; 2],
            activation: Activation::Linear,
        };
        let net = Mlp::from_layers(vec![layer]).unwrap();
        assert_eq!(net.predict(&[4.0, -5.0, 6.0], 1).unwrap(), vec![4.0, -5.0]);
    }

    #[test]
    fn batch_forward_matches_scalar_oracle() {
        let mut rng = seeded(9, 0);
        let mut net = Mlp::feature_net(&[4, 8, 1], &mut rng).unwrap();
        for p in net.params_mut() {
            for v in p.iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
        }
        let x: Vec<f64> = (0..20).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let y = net.predict(&x, 5).unwrap();
        for (b, row) in x.chunks(4).enumerate() {
            let s = scalar_forward(&net, row);
            assert!((s[0] - y[b]).abs() <= 1e-12 * s[0].abs().max(1.0));
        }
    }

    #[test]
    fn dimension_errors() {
        let net = Mlp::feature_net(&[4, 8, 1], &mut seeded(1, 0)).unwrap();
        assert!(net.forward(&[1.0; 7], 2).is_err());
        let c = net.forward(&[1.0; 8], 2).unwrap();
        assert!(net.backward(&c, &[1.0; 3]).is_err());
        assert!(Mlp::new(&[4, 8, 1], &[Activation::Relu], &mut seeded(1, 0)).is_err());
    }

    #[test]
    fn stale_cache_detected() {
        let mut net = Mlp::feature_net(&[2, 3, 1], &mut seeded(1, 0)).unwrap();
        let other = Mlp::feature_net(&[2, 3, 1], &mut seeded(1, 0)).unwrap();
        let c = net.forward(&[0.1, 0.2], 1).unwrap();
        assert!(matches!(other.backward(&c, &[1.0]), Err(NeuralError::StaleCache)));
        net.params_mut()[0][0] += 1.0;
        assert!(matches!(net.backward(&c, &[1.0]), Err(NeuralError::StaleCache)));
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let net = Mlp::feature_net(&[3, 4, 2, 1], &mut seeded(2, 0)).unwrap();
        let c = net.forward(&[0.5, -0.2, 0.9, 0.1, 0.1, 0.1], 2).unwrap();
        let g = net.backward(&c, &[0.0, 0.0]).unwrap();
        assert!(g.slices().iter().all(|s| s.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn dead_relu_blocks_gradient() {
        // Hidden unit 1 has a large negative bias and never fires.
        let l1 = Layer {
            n_in: 1,
            n_out: 2,
            weights: vec![1.0, 1.0],
            biases: vec![0.0, -100.0],
            activation: Activation::Relu,
        };
        let l2 = Layer { n_in: 2, n_out: 1, weights: vec![0.5, 0.5], biases: vec![0.0], activation: Activation::Sine };
        let net = Mlp::from_layers(vec![l1, l2]).unwrap();
        let c = net.forward(&[0.3, 0.7], 2).unwrap();
        let g = net.backward(&c, &[1.0, 1.0]).unwrap();
        assert_eq!(g.layers[0].weights[1], 0.0);
        assert_eq!(g.layers[0].biases[1], 0.0);
        assert_eq!(g.layers[1].weights[1], 0.0);
        assert!(g.layers[0].weights[0] != 0.0);
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        let mut rng = seeded(4, 0);
        let mut net = Mlp::feature_net(&[4, 6, 3, 1], &mut rng).unwrap();
        net.params_mut()[1][0] = 1e-300;
        net.params_mut()[3][1] = -0.1;
        let text = net.to_text();
        assert!(text.starts_with("mlpv1 3\ndims 4 6 relu\n"));
        let back = Mlp::from_text(&text).unwrap();
        assert_eq!(back, net);
        assert!(Mlp::from_text("mlpv2 1").is_err());
        assert!(Mlp::from_text(&text[..text.len() - 10]).is_err());
    }
}
