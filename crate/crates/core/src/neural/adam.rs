use super::{Gradients, Mlp, NeuralError, Result};

/// Bias-corrected Adam with beta1 = 0.9, beta2 = 0.999, eps = 1e-8.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(shapes: &[usize]) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn for_mlp(net: &Mlp) -> Self {
        Self::new(&net.param_shapes())
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(NeuralError::Dimension(format!(
                "adam state has {} tensors, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.m) {
            if p.len() != m.len() || g.len() != m.len() {
                return Err(NeuralError::Dimension("adam tensor shape mismatch".into()));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                p[i] -= lr * mh / (vh.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

impl Mlp {
    pub fn adam_step(&mut self, state: &mut AdamState, grads: &Gradients, lr: f64) -> Result<()> {
        let g = grads.slices();
        let mut p = self.params_mut();
        state.step(&mut p, &g, lr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_step_trace_matches_hand_arithmetic() {
        let mut st = AdamState::new(&[1]);
        let mut p = [1.0];
        let grads = [0.5, -0.25, 1.0];
        let lr = 0.1;
        // Independent recomputation of the textbook recursion.
        let (mut m, mut v, mut q) = (0.0f64, 0.0f64, 1.0f64);
        for (t, g) in grads.iter().enumerate() {
            st.step(&mut [&mut p[..]], &[&[*g][..]], lr).unwrap();
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let k = (t + 1) as i32;
            q -= lr * (m / (1.0 - 0.9f64.powi(k))) / ((v / (1.0 - 0.999f64.powi(k))).sqrt() + 1e-8);
            assert!((p[0] - q).abs() < 1e-15);
        }
        // First step moves by lr * sign(g) up to eps.
        let mut st = AdamState::new(&[1]);
        let mut p = [0.0];
        st.step(&mut [&mut p[..]], &[&[3.0][..]], 0.01).unwrap();
        assert!((p[0] + 0.01).abs() < 1e-10);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut st = AdamState::new(&[3]);
        let mut p = [1.0, -2.0, 3.0];
        for _ in 0..5 {
            st.step(&mut [&mut p[..]], &[&[0.0; 3][..]], 0.1).unwrap();
        }
        assert_eq!(p, [1.0, -2.0, 3.0]);
    }

    #[test]
    fn constant_gradient_moves_against_sign() {
        let mut st = AdamState::new(&[2]);
        let mut p = [0.0, 0.0];
        for _ in 0..100 {
            st.step(&mut [&mut p[..]], &[&[2.0, -0.1][..]], 0.01).unwrap();
        }
        assert!(p[0] < -0.9 && p[1] > 0.9);
    }

    #[test]
    fn shape_mismatch() {
        let mut st = AdamState::new(&[2]);
        let mut p = [0.0; 3];
        assert!(st.step(&mut [&mut p[..]], &[&[0.0; 3][..]], 0.1).is_err());
    }
}
