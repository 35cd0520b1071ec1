//! Dense multilayer perceptron with hand-rolled reverse-mode gradients.
//!
//! This is the only network family in the crate: fully connected layers with
//! a smooth activation on hidden units and a linear output layer. The energy
//! head uses output dimension 1; the decoder maps latent codes back to data
//! space. Gradients with respect to inputs and parameters are exact
//! backpropagation, accumulated in a fixed order so results are bit-stable.

use serde::{Deserialize, Serialize};

use crate::rng::stream_rng;
use rand::Rng;

/// Hidden-layer nonlinearity. Softplus keeps the network C-infinity with a
/// bounded second derivative, so input gradients are locally Lipschitz.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Softplus,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            // ln(1 + e^x), written to avoid overflow for large |x|.
            Activation::Softplus => {
                if x > 0.0 {
                    x + (-x).exp().ln_1p()
                } else {
                    x.exp().ln_1p()
                }
            }
        }
    }

    /// Derivative of the activation (the logistic sigmoid for softplus).
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Softplus => {
                if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                }
            }
        }
    }
}

/// Fully connected network. `weights[l]` is the layer-l matrix stored
/// row-major (`weights[l][out][in]`), `biases[l]` the layer-l bias vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layer_dims: Vec<usize>,
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
    pub activation: Activation,
}

/// Parameter-shaped gradient accumulator matching an [`Mlp`].
#[derive(Clone, Debug, PartialEq)]
pub struct MlpGradient {
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
}

/// Scratch buffers for one forward/backward pass.
#[derive(Clone, Debug, Default)]
pub struct MlpCache {
    /// Post-activation values per layer; `acts[0]` is the input.
    acts: Vec<Vec<f64>>,
    /// Pre-activation values per layer (output layer included, unactivated).
    pre: Vec<Vec<f64>>,
}

impl MlpCache {
    /// Output of the cached forward pass.
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("forward_cached not run")
    }
}

impl Mlp {
    /// Glorot-uniform initialization: weights i.i.d. in
    /// +-sqrt(6/(fan_in+fan_out)), biases zero.
    pub fn new(layer_dims: &[usize], activation: Activation, seed: u64) -> Self {
        assert!(
            layer_dims.len() >= 2 && layer_dims.iter().all(|&d| d > 0),
            "layer_dims must chain at least input -> output with positive sizes"
        );
        let mut rng = stream_rng(seed, 0);
        let mut weights = Vec::with_capacity(layer_dims.len() - 1);
        let mut biases = Vec::with_capacity(layer_dims.len() - 1);
        for w in layer_dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let layer: Vec<Vec<f64>> = (0..fan_out)
                .map(|_| (0..fan_in).map(|_| rng.gen_range(-bound..=bound)).collect())
                .collect();
            weights.push(layer);
            biases.push(vec![0.0; fan_out]);
        }
        Mlp { layer_dims: layer_dims.to_vec(), weights, biases, activation }
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    /// Checks that the stored shapes chain consistently and all entries are
    /// finite. Used when loading checkpoints.
    pub fn validate(&self) -> Result<(), String> {
        if self.layer_dims.len() < 2 {
            return Err("layer_dims must list at least input and output".into());
        }
        if self.weights.len() != self.layer_dims.len() - 1 || self.biases.len() != self.weights.len() {
            return Err("weights/biases layer count does not match layer_dims".into());
        }
        for (l, w) in self.layer_dims.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            if self.weights[l].len() != fan_out || self.biases[l].len() != fan_out {
                return Err(format!("layer {l}: expected {fan_out} rows"));
            }
            for row in &self.weights[l] {
                if row.len() != fan_in {
                    return Err(format!("layer {l}: expected row length {fan_in}"));
                }
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(format!("layer {l}: non-finite weight"));
                }
            }
            if self.biases[l].iter().any(|v| !v.is_finite()) {
                return Err(format!("layer {l}: non-finite bias"));
            }
        }
        Ok(())
    }

    /// Forward pass, recording pre- and post-activations in `cache`.
    pub fn forward_cached(&self, input: &[f64], cache: &mut MlpCache) {
        debug_assert_eq!(input.len(), self.input_dim());
        cache.acts.clear();
        cache.pre.clear();
        cache.acts.push(input.to_vec());
        let last = self.num_layers() - 1;
        for l in 0..self.num_layers() {
            let prev = cache.acts.last().unwrap();
            let mut z = self.biases[l].clone();
            for (r, row) in self.weights[l].iter().enumerate() {
                let mut s = 0.0;
                for (wc, &a) in row.iter().zip(prev.iter()) {
                    s += wc * a;
                }
                z[r] += s;
            }
            let out = if l < last {
                z.iter().map(|&v| self.activation.apply(v)).collect()
            } else {
                z.clone()
            };
            cache.pre.push(z);
            cache.acts.push(out);
        }
    }

    /// Forward pass returning the output vector.
    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        let mut cache = MlpCache::default();
        self.forward_cached(input, &mut cache);
        cache.acts.last().unwrap().clone()
    }

    /// Backpropagates `out_grad` (cotangent on the network output) through a
    /// cached forward pass. Returns the gradient with respect to the input;
    /// when `params` is given, also accumulates `scale * d(out_grad . out)/d theta`
    /// into the accumulator.
    pub fn backward(
        &self,
        cache: &MlpCache,
        out_grad: &[f64],
        mut params: Option<(&mut MlpGradient, f64)>,
    ) -> Vec<f64> {
        debug_assert_eq!(out_grad.len(), self.output_dim());
        let last = self.num_layers() - 1;
        let mut delta = out_grad.to_vec();
        for l in (0..self.num_layers()).rev() {
            if l < last {
                for (d, &z) in delta.iter_mut().zip(cache.pre[l].iter()) {
                    *d *= self.activation.derivative(z);
                }
            }
            if let Some((acc, scale)) = params.as_mut() {
                let input = &cache.acts[l];
                for (r, &d) in delta.iter().enumerate() {
                    acc.biases[l][r] += *scale * d;
                    let row = &mut acc.weights[l][r];
                    let sd = *scale * d;
                    for (g, &a) in row.iter_mut().zip(input.iter()) {
                        *g += sd * a;
                    }
                }
            }
            let mut prev_delta = vec![0.0; self.layer_dims[l]];
            for (r, row) in self.weights[l].iter().enumerate() {
                let d = delta[r];
                for (p, &wc) in prev_delta.iter_mut().zip(row.iter()) {
                    *p += wc * d;
                }
            }
            delta = prev_delta;
        }
        delta
    }

    pub fn zero_gradient(&self) -> MlpGradient {
        MlpGradient {
            weights: self
                .weights
                .iter()
                .map(|l| l.iter().map(|row| vec![0.0; row.len()]).collect())
                .collect(),
            biases: self.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    /// In-place parameter update theta += alpha * grad.
    pub fn add_scaled(&mut self, grad: &MlpGradient, alpha: f64) {
        for (wl, gl) in self.weights.iter_mut().zip(grad.weights.iter()) {
            for (wr, gr) in wl.iter_mut().zip(gl.iter()) {
                for (w, &g) in wr.iter_mut().zip(gr.iter()) {
                    *w += alpha * g;
                }
            }
        }
        for (bl, gl) in self.biases.iter_mut().zip(grad.biases.iter()) {
            for (b, &g) in bl.iter_mut().zip(gl.iter()) {
                *b += alpha * g;
            }
        }
    }

    pub fn params_finite(&self) -> bool {
        self.weights
            .iter()
            .flatten()
            .flatten()
            .chain(self.biases.iter().flatten())
            .all(|v| v.is_finite())
    }

    /// Total number of scalar parameters.
    pub fn param_count(&self) -> usize {
        self.layer_dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Reads parameter `i` in the canonical flat order (per layer: weights
    /// row-major, then biases). Mainly for finite-difference checks.
    pub fn get_param(&self, mut i: usize) -> f64 {
        for l in 0..self.num_layers() {
            let wn = self.layer_dims[l] * self.layer_dims[l + 1];
            if i < wn {
                let cols = self.layer_dims[l];
                return self.weights[l][i / cols][i % cols];
            }
            i -= wn;
            if i < self.layer_dims[l + 1] {
                return self.biases[l][i];
            }
            i -= self.layer_dims[l + 1];
        }
        panic!("parameter index out of range");
    }

    /// Writes parameter `i` in the canonical flat order.
    pub fn set_param(&mut self, mut i: usize, value: f64) {
        for l in 0..self.num_layers() {
            let wn = self.layer_dims[l] * self.layer_dims[l + 1];
            if i < wn {
                let cols = self.layer_dims[l];
                self.weights[l][i / cols][i % cols] = value;
                return;
            }
            i -= wn;
            if i < self.layer_dims[l + 1] {
                self.biases[l][i] = value;
                return;
            }
            i -= self.layer_dims[l + 1];
        }
        panic!("parameter index out of range");
    }
}

impl MlpGradient {
    pub fn add(&mut self, other: &MlpGradient) {
        for (wl, ol) in self.weights.iter_mut().zip(other.weights.iter()) {
            for (wr, or) in wl.iter_mut().zip(ol.iter()) {
                for (w, &o) in wr.iter_mut().zip(or.iter()) {
                    *w += o;
                }
            }
        }
        for (bl, ol) in self.biases.iter_mut().zip(other.biases.iter()) {
            for (b, &o) in bl.iter_mut().zip(ol.iter()) {
                *b += o;
            }
        }
    }

    /// Reads gradient entry `i` in the same flat order as [`Mlp::get_param`].
    pub fn get_flat(&self, mut i: usize) -> f64 {
        for l in 0..self.weights.len() {
            let rows = self.weights[l].len();
            let cols = if rows > 0 { self.weights[l][0].len() } else { 0 };
            let wn = rows * cols;
            if i < wn {
                return self.weights[l][i / cols][i % cols];
            }
            i -= wn;
            if i < self.biases[l].len() {
                return self.biases[l][i];
            }
            i -= self.biases[l].len();
        }
        panic!("gradient index out of range");
    }

    pub fn all_finite(&self) -> bool {
        self.weights
            .iter()
            .flatten()
            .flatten()
            .chain(self.biases.iter().flatten())
            .all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Straightforward re-implementation of the forward pass used as an
    /// independent oracle: no caching, no shared code with `forward`.
    fn forward_oracle(net: &Mlp, input: &[f64]) -> Vec<f64> {
        let mut cur = input.to_vec();
        for l in 0..net.num_layers() {
            let mut next = vec![0.0; net.layer_dims[l + 1]];
            for r in 0..next.len() {
                let mut s = net.biases[l][r];
                for c in 0..cur.len() {
                    s += net.weights[l][r][c] * cur[c];
                }
                next[r] = if l + 1 < net.layer_dims.len() - 0 && l < net.num_layers() - 1 {
                    net.activation.apply(s)
                } else {
                    s
                };
            }
            cur = next;
        }
        cur
    }

    #[test]
    fn softplus_matches_reference_values() {
        let a = Activation::Softplus;
        assert!((a.apply(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((a.apply(50.0) - 50.0).abs() < 1e-12);
        assert!(a.apply(-50.0) > 0.0 && a.apply(-50.0) < 1e-20);
        assert!((a.derivative(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn forward_matches_independent_oracle() {
        let net = Mlp::new(&[3, 5, 4, 2], Activation::Softplus, 99);
        let mut rng = crate::rng::stream_rng(7, 0);
        for _ in 0..50 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let got = net.forward(&x);
            let want = forward_oracle(&net, &x);
            for (g, w) in got.iter().zip(want.iter()) {
                assert!((g - w).abs() <= 1e-12, "got {g} want {w}");
            }
        }
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let net = Mlp::new(&[4, 6, 1], Activation::Softplus, 3);
        let x: Vec<f64> = vec![0.3, -1.2, 0.8, 0.1];
        let mut cache = MlpCache::default();
        net.forward_cached(&x, &mut cache);
        let grad = net.backward(&cache, &[1.0], None);
        let h = 1e-5;
        for i in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (net.forward(&xp)[0] - net.forward(&xm)[0]) / (2.0 * h);
            assert!(
                (fd - grad[i]).abs() <= 1e-4 * fd.abs().max(grad[i].abs()).max(1.0),
                "coord {i}: fd {fd} analytic {}",
                grad[i]
            );
        }
    }

    #[test]
    fn param_gradient_matches_finite_differences() {
        let mut net = Mlp::new(&[2, 4, 1], Activation::Softplus, 11);
        let x = vec![0.7, -0.4];
        let mut cache = MlpCache::default();
        net.forward_cached(&x, &mut cache);
        let mut acc = net.zero_gradient();
        net.backward(&cache, &[1.0], Some((&mut acc, 1.0)));
        let h = 1e-5;
        for i in 0..net.param_count() {
            let orig = net.get_param(i);
            net.set_param(i, orig + h);
            let up = net.forward(&x)[0];
            net.set_param(i, orig - h);
            let dn = net.forward(&x)[0];
            net.set_param(i, orig);
            let fd = (up - dn) / (2.0 * h);
            let an = acc.get_flat(i);
            assert!(
                (fd - an).abs() <= 1e-4 * fd.abs().max(an.abs()).max(1.0),
                "param {i}: fd {fd} analytic {an}"
            );
        }
    }

    #[test]
    fn backward_is_deterministic() {
        let net = Mlp::new(&[3, 8, 8, 1], Activation::Softplus, 5);
        let x = vec![0.1, 0.2, -0.3];
        let mut c1 = MlpCache::default();
        let mut c2 = MlpCache::default();
        net.forward_cached(&x, &mut c1);
        net.forward_cached(&x, &mut c2);
        let mut g1 = net.zero_gradient();
        let mut g2 = net.zero_gradient();
        let i1 = net.backward(&c1, &[1.0], Some((&mut g1, 1.0)));
        let i2 = net.backward(&c2, &[1.0], Some((&mut g2, 1.0)));
        assert_eq!(i1, i2);
        assert_eq!(g1, g2);
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let net = Mlp::new(&[2, 3, 1], Activation::Softplus, 17);
        let text = serde_json::to_string(&net).unwrap();
        let back: Mlp = serde_json::from_str(&text).unwrap();
        assert_eq!(net, back);
    }
}
