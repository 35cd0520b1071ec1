//! Joint energy E(x, z; theta) = U_theta(x, z) + (lambda_x/2)|x|^2 + (lambda_z/2)|z|^2.
//!
//! U is a scalar-output MLP over the concatenated input (x, z). The quadratic
//! envelope with positive coefficients keeps the Gibbs density normalizable
//! and dissipative outside a compact set once the U-gradient is norm-clipped,
//! which is exactly how the samplers consume it: drift = clip(grad U) +
//! envelope gradient. The envelope coefficients are hyperparameters and never
//! receive parameter gradients.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::{Activation, Mlp, MlpCache, MlpGradient};

/// Parameter-shaped gradient of the energy (U-part only).
pub type ParamGradient = MlpGradient;

#[derive(Debug, Error)]
pub enum EnergyError {
    #[error("dimension mismatch: model expects d+l = {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("non-finite input coordinate")]
    NonFiniteInput,
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint parse: {0}")]
    Parse(#[from] serde_json::Error),
}

/// Minimal interface the samplers need from an energy. Implemented by the
/// MLP-based [`EnergyModel`] and by the closed-form test energies in
/// [`crate::oracle`].
pub trait Energy: Sync {
    fn lambda_x(&self) -> f64;
    fn lambda_z(&self) -> f64;

    /// U(x, z), the learned part without the envelope.
    fn u_value(&self, x: &[f64], z: &[f64]) -> f64;

    /// grad U written into `gx`, `gz`.
    fn u_grad(&self, x: &[f64], z: &[f64], gx: &mut [f64], gz: &mut [f64]);

    /// Full energy including the quadratic envelope.
    fn energy_value(&self, x: &[f64], z: &[f64]) -> f64 {
        let qx: f64 = x.iter().map(|v| v * v).sum();
        let qz: f64 = z.iter().map(|v| v * v).sum();
        self.u_value(x, z) + 0.5 * self.lambda_x() * qx + 0.5 * self.lambda_z() * qz
    }

    /// Langevin drift gradient over the joint pair: grad U clipped at
    /// `clip_norm` (joint norm over both blocks), plus the envelope gradient.
    fn drift_grad_xz(&self, x: &[f64], z: &[f64], clip_norm: f64, gx: &mut [f64], gz: &mut [f64]) {
        self.u_grad(x, z, gx, gz);
        let sq: f64 = gx.iter().chain(gz.iter()).map(|v| v * v).sum();
        let norm = sq.sqrt();
        if norm > clip_norm {
            let s = clip_norm / norm;
            gx.iter_mut().for_each(|v| *v *= s);
            gz.iter_mut().for_each(|v| *v *= s);
        }
        for (g, &v) in gx.iter_mut().zip(x.iter()) {
            *g += self.lambda_x() * v;
        }
        for (g, &v) in gz.iter_mut().zip(z.iter()) {
            *g += self.lambda_z() * v;
        }
    }

    /// Langevin drift in z only (x clamped): grad_z U clipped at `clip_norm`,
    /// plus the envelope gradient lambda_z * z.
    fn drift_grad_z(&self, x: &[f64], z: &[f64], clip_norm: f64, gz: &mut [f64]) {
        let mut gx = vec![0.0; x.len()];
        self.u_grad(x, z, &mut gx, gz);
        clip_in_place(gz, clip_norm);
        for (g, &v) in gz.iter_mut().zip(z.iter()) {
            *g += self.lambda_z() * v;
        }
    }

    /// Langevin drift in x only (z clamped), used by conditional generation.
    fn drift_grad_x(&self, x: &[f64], z: &[f64], clip_norm: f64, gx: &mut [f64]) {
        let mut gz = vec![0.0; z.len()];
        self.u_grad(x, z, gx, &mut gz);
        clip_in_place(gx, clip_norm);
        for (g, &v) in gx.iter_mut().zip(x.iter()) {
            *g += self.lambda_x() * v;
        }
    }
}

/// An energy whose U-part carries trainable parameters.
pub trait TrainableEnergy: Energy {
    type ParamGrad: Send + Sync;

    fn zero_param_grad(&self) -> Self::ParamGrad;

    /// Accumulates `scale * grad_theta E(x, z)` into `acc` and returns
    /// U(x, z) from the same forward pass.
    fn accum_param_grad(&self, x: &[f64], z: &[f64], scale: f64, acc: &mut Self::ParamGrad) -> f64;

    fn merge_param_grad(acc: &mut Self::ParamGrad, other: &Self::ParamGrad);

    /// theta += alpha * grad. Returns false if any parameter went non-finite.
    fn ascend(&mut self, grad: &Self::ParamGrad, alpha: f64) -> bool;
}

/// MLP energy with quadratic envelope. Serializes to the checkpoint layout
/// `{layer_dims, weights, biases, activation, lambda_x, lambda_z}` with
/// weights row-major per layer; the JSON round trip is bit-exact because
/// floats are written in shortest round-trip decimal form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyModel {
    #[serde(flatten)]
    pub net: Mlp,
    pub lambda_x: f64,
    pub lambda_z: f64,
}

impl EnergyModel {
    /// New model for data dimension `d` and latent dimension `l` with the
    /// given hidden layer widths. Input layer is d+l, output is scalar.
    pub fn new(
        d: usize,
        l: usize,
        hidden: &[usize],
        lambda_x: f64,
        lambda_z: f64,
        seed: u64,
    ) -> Result<Self, EnergyError> {
        if d == 0 || l == 0 {
            return Err(EnergyError::InvalidModel("d and l must be positive".into()));
        }
        if !(lambda_x > 0.0) || !(lambda_z > 0.0) {
            return Err(EnergyError::InvalidModel("lambda_x and lambda_z must be positive".into()));
        }
        let mut dims = Vec::with_capacity(hidden.len() + 2);
        dims.push(d + l);
        dims.extend_from_slice(hidden);
        dims.push(1);
        Ok(EnergyModel { net: Mlp::new(&dims, Activation::Softplus, seed), lambda_x, lambda_z })
    }

    pub fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    fn check_dims(&self, x: &[f64], z: &[f64]) -> Result<(), EnergyError> {
        let got = x.len() + z.len();
        if got != self.input_dim() {
            return Err(EnergyError::ShapeMismatch { expected: self.input_dim(), got });
        }
        if x.iter().chain(z.iter()).any(|v| !v.is_finite()) {
            return Err(EnergyError::NonFiniteInput);
        }
        Ok(())
    }

    /// E(x, z) = U(x, z) + (lambda_x/2)|x|^2 + (lambda_z/2)|z|^2.
    pub fn energy(&self, x: &[f64], z: &[f64]) -> Result<f64, EnergyError> {
        self.check_dims(x, z)?;
        Ok(self.energy_value(x, z))
    }

    /// Exact gradients of E with respect to x and z, envelope included.
    pub fn grad_input(&self, x: &[f64], z: &[f64]) -> Result<(Vec<f64>, Vec<f64>), EnergyError> {
        self.check_dims(x, z)?;
        let mut gx = vec![0.0; x.len()];
        let mut gz = vec![0.0; z.len()];
        self.u_grad(x, z, &mut gx, &mut gz);
        for (g, &v) in gx.iter_mut().zip(x.iter()) {
            *g += self.lambda_x * v;
        }
        for (g, &v) in gz.iter_mut().zip(z.iter()) {
            *g += self.lambda_z * v;
        }
        Ok((gx, gz))
    }

    /// Exact grad_theta E. The envelope coefficients are fixed
    /// hyperparameters and receive no gradient.
    pub fn grad_params(&self, x: &[f64], z: &[f64]) -> Result<ParamGradient, EnergyError> {
        self.check_dims(x, z)?;
        let mut acc = self.net.zero_gradient();
        self.accum_param_grad(x, z, 1.0, &mut acc);
        Ok(acc)
    }

    pub fn save_json<P: AsRef<Path>>(&self, path: P) -> Result<(), EnergyError> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load_json<P: AsRef<Path>>(path: P) -> Result<Self, EnergyError> {
        let text = fs::read_to_string(path)?;
        let model: EnergyModel = serde_json::from_str(&text)?;
        model.net.validate().map_err(EnergyError::InvalidModel)?;
        if !(model.lambda_x > 0.0 && model.lambda_z > 0.0) {
            return Err(EnergyError::InvalidModel("envelope coefficients must be positive".into()));
        }
        if *model.net.layer_dims.last().unwrap() != 1 {
            return Err(EnergyError::InvalidModel("energy output must be scalar".into()));
        }
        Ok(model)
    }

    fn concat(&self, x: &[f64], z: &[f64]) -> Vec<f64> {
        let mut input = Vec::with_capacity(x.len() + z.len());
        input.extend_from_slice(x);
        input.extend_from_slice(z);
        input
    }
}

impl Energy for EnergyModel {
    fn lambda_x(&self) -> f64 {
        self.lambda_x
    }

    fn lambda_z(&self) -> f64 {
        self.lambda_z
    }

    fn u_value(&self, x: &[f64], z: &[f64]) -> f64 {
        debug_assert_eq!(x.len() + z.len(), self.input_dim());
        self.net.forward(&self.concat(x, z))[0]
    }

    fn u_grad(&self, x: &[f64], z: &[f64], gx: &mut [f64], gz: &mut [f64]) {
        debug_assert_eq!(x.len() + z.len(), self.input_dim());
        let input = self.concat(x, z);
        let mut cache = MlpCache::default();
        self.net.forward_cached(&input, &mut cache);
        let grad = self.net.backward(&cache, &[1.0], None);
        gx.copy_from_slice(&grad[..x.len()]);
        gz.copy_from_slice(&grad[x.len()..]);
    }
}

impl TrainableEnergy for EnergyModel {
    type ParamGrad = ParamGradient;

    fn zero_param_grad(&self) -> ParamGradient {
        self.net.zero_gradient()
    }

    fn accum_param_grad(&self, x: &[f64], z: &[f64], scale: f64, acc: &mut ParamGradient) -> f64 {
        let input = self.concat(x, z);
        let mut cache = MlpCache::default();
        self.net.forward_cached(&input, &mut cache);
        let u = cache.output()[0];
        self.net.backward(&cache, &[1.0], Some((acc, scale)));
        u
    }

    fn merge_param_grad(acc: &mut ParamGradient, other: &ParamGradient) {
        acc.add(other);
    }

    fn ascend(&mut self, grad: &ParamGradient, alpha: f64) -> bool {
        self.net.add_scaled(grad, alpha);
        self.net.params_finite()
    }
}

/// Rescales `g` to norm `max_norm` when it exceeds it; otherwise returns it
/// unchanged. The zero vector passes through.
pub fn clip_gradient(g: &[f64], max_norm: f64) -> Vec<f64> {
    let mut out = g.to_vec();
    clip_in_place(&mut out, max_norm);
    out
}

/// In-place variant of [`clip_gradient`].
pub fn clip_in_place(g: &mut [f64], max_norm: f64) {
    debug_assert!(max_norm > 0.0);
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        g.iter_mut().for_each(|v| *v *= s);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;

    fn zero_u_model(d: usize, l: usize, lx: f64, lz: f64) -> EnergyModel {
        let mut m = EnergyModel::new(d, l, &[4], lx, lz, 0).unwrap();
        // Zeroing the output layer makes U identically zero regardless of
        // hidden activations.
        for row in &mut m.net.weights[1] {
            row.iter_mut().for_each(|w| *w = 0.0);
        }
        m.net.biases[1].iter_mut().for_each(|b| *b = 0.0);
        m
    }

    #[test]
    fn envelope_only_energy() {
        let m = zero_u_model(2, 1, 1.0, 1.0);
        let e = m.energy(&[3.0, 4.0], &[0.0]).unwrap();
        assert!((e - 12.5).abs() < 1e-15);
    }

    #[test]
    fn envelope_vanishes_at_origin() {
        // With x = z = 0 the energy is exactly U(0, 0).
        let m = EnergyModel::new(2, 1, &[4], 1.0, 1.0, 42).unwrap();
        let c = m.u_value(&[0.0, 0.0], &[0.0]);
        let e = m.energy(&[0.0, 0.0], &[0.0]).unwrap();
        assert!((e - c).abs() < 1e-15);
    }

    #[test]
    fn zero_u_gradient_is_envelope() {
        let m = zero_u_model(2, 2, 1.0, 1.0);
        let x = [0.5, -1.0];
        let z = [2.0, 0.25];
        let (gx, gz) = m.grad_input(&x, &z).unwrap();
        for (g, v) in gx.iter().zip(x.iter()) {
            assert!((g - v).abs() < 1e-15);
        }
        for (g, v) in gz.iter().zip(z.iter()) {
            assert!((g - v).abs() < 1e-15);
        }
        let (gx0, gz0) = m.grad_input(&[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert!(gx0.iter().chain(gz0.iter()).all(|&v| v == 0.0));
    }

    #[test]
    fn shape_and_domain_errors() {
        let m = EnergyModel::new(2, 1, &[4], 1.0, 1.0, 0).unwrap();
        assert!(matches!(
            m.energy(&[1.0], &[1.0]),
            Err(EnergyError::ShapeMismatch { expected: 3, got: 2 })
        ));
        assert!(matches!(m.energy(&[f64::NAN, 0.0], &[0.0]), Err(EnergyError::NonFiniteInput)));
    }

    #[test]
    fn gradients_match_finite_differences_over_random_models() {
        let mut rng = stream_rng(2024, 0);
        for trial in 0..20 {
            let d = rng.gen_range(1..4);
            let l = rng.gen_range(1..3);
            let m = EnergyModel::new(d, l, &[6, 5], 0.3, 0.7, trial).unwrap();
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let z: Vec<f64> = (0..l).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let (gx, gz) = m.grad_input(&x, &z).unwrap();
            let h = 1e-5;
            let check = |fd: f64, an: f64, what: &str| {
                assert!(
                    (fd - an).abs() <= 1e-4 * fd.abs().max(an.abs()).max(1.0),
                    "{what}: fd {fd} analytic {an}"
                );
            };
            for i in 0..d {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (m.energy(&xp, &z).unwrap() - m.energy(&xm, &z).unwrap()) / (2.0 * h);
                check(fd, gx[i], "gx");
            }
            for i in 0..l {
                let mut zp = z.clone();
                let mut zm = z.clone();
                zp[i] += h;
                zm[i] -= h;
                let fd = (m.energy(&x, &zp).unwrap() - m.energy(&x, &zm).unwrap()) / (2.0 * h);
                check(fd, gz[i], "gz");
            }
        }
    }

    #[test]
    fn param_gradients_match_finite_differences() {
        let mut m = EnergyModel::new(2, 1, &[5, 4], 0.5, 0.5, 8).unwrap();
        let x = [0.4, -0.9];
        let z = [1.1];
        let grad = m.grad_params(&x, &z).unwrap();
        let h = 1e-5;
        for i in 0..m.net.param_count() {
            let orig = m.net.get_param(i);
            m.net.set_param(i, orig + h);
            let up = m.energy(&x, &z).unwrap();
            m.net.set_param(i, orig - h);
            let dn = m.energy(&x, &z).unwrap();
            m.net.set_param(i, orig);
            let fd = (up - dn) / (2.0 * h);
            let an = grad.get_flat(i);
            assert!(
                (fd - an).abs() <= 1e-4 * fd.abs().max(an.abs()).max(1.0),
                "param {i}: fd {fd} analytic {an}"
            );
        }
    }

    #[test]
    fn grad_params_is_pure() {
        let m = EnergyModel::new(2, 2, &[8], 0.1, 0.1, 5).unwrap();
        let x = [0.3, 0.8];
        let z = [-0.2, 0.6];
        let a = m.grad_params(&x, &z).unwrap();
        let b = m.grad_params(&x, &z).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn clip_gradient_cases() {
        assert_eq!(clip_gradient(&[3.0, 4.0], 10.0), vec![3.0, 4.0]);
        let clipped = clip_gradient(&[3.0, 4.0], 1.0);
        assert!((clipped[0] - 0.6).abs() < 1e-15 && (clipped[1] - 0.8).abs() < 1e-15);
        assert_eq!(clip_gradient(&[0.0, 0.0], 1.0), vec![0.0, 0.0]);
    }

    #[test]
    fn envelope_dominance_with_clipped_u_grad() {
        // <u, drift(u)> >= min(lambda) |u|^2 - c |u| for |u| in [10, 100].
        let m = EnergyModel::new(2, 1, &[16, 16], 0.05, 0.05, 31).unwrap();
        let clip = 100.0;
        let mut rng = stream_rng(9, 0);
        for _ in 0..200 {
            let r = rng.gen_range(10.0..100.0);
            let mut u: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            u.iter_mut().for_each(|v| *v *= r / norm);
            let (x, z) = (&u[..2], &u[2..]);
            let mut gx = vec![0.0; 2];
            let mut gz = vec![0.0; 1];
            m.drift_grad_xz(x, z, clip, &mut gx, &mut gz);
            let inner: f64 = x.iter().zip(gx.iter()).map(|(a, b)| a * b).sum::<f64>()
                + z.iter().zip(gz.iter()).map(|(a, b)| a * b).sum::<f64>();
            let bound = 0.05 * r * r - clip * r;
            assert!(inner >= bound - 1e-9, "r={r}: {inner} < {bound}");
        }
    }

    #[test]
    fn checkpoint_round_trip_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("energy.json");
        let m = EnergyModel::new(3, 2, &[7, 5], 0.05, 0.05, 77).unwrap();
        m.save_json(&path).unwrap();
        let back = EnergyModel::load_json(&path).unwrap();
        assert_eq!(m, back);
        // Field layout sanity: flat document with the agreed keys.
        let value: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        for key in ["layer_dims", "weights", "biases", "activation", "lambda_x", "lambda_z"] {
            assert!(value.get(key).is_some(), "missing checkpoint key {key}");
        }
        assert_eq!(value["activation"], "softplus");
    }
}
