//! Tractable bilinear-Gaussian model: E(x, z) = x' Lx x / 2 + z' Lz z / 2 - x' A z.
//!
//! The Gibbs density of this energy is a joint Gaussian with precision
//! [[Lx, -A], [-A', Lz]], so conditionals, the x-marginal, the partition
//! function, and the exact log-likelihood all follow from standard Gaussian
//! algebra. [`BilinearEnergy`] exposes the scalar-precision instance through
//! the trainer's [`Energy`]/[`TrainableEnergy`] traits so every sampler and
//! metric in the crate can be tested against closed forms.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::energy::{Energy, TrainableEnergy};
use crate::rng::fill_standard_normal;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("invalid oracle input: {0}")]
    Invalid(String),
    #[error("joint precision matrix is not positive definite")]
    NotPositiveDefinite,
}

/// Exact Gaussian algebra for the bilinear energy. Precisions may be full
/// matrices; the scalar constructor covers the envelope-style instance.
#[derive(Clone, Debug)]
pub struct GaussianOracle {
    pub dim_x: usize,
    pub dim_z: usize,
    coupling: DMatrix<f64>,
    prec_x: DMatrix<f64>,
    prec_z: DMatrix<f64>,
    joint_cov: DMatrix<f64>,
    joint_chol: Cholesky<f64, nalgebra::Dyn>,
    /// Marginal precision of x: Lx - A Lz^{-1} A' (Schur complement).
    marginal_prec_x: DMatrix<f64>,
    marginal_cov_x: DMatrix<f64>,
    marginal_chol_x: Cholesky<f64, nalgebra::Dyn>,
    cond_cov_z: DMatrix<f64>,
    cond_chol_z: Cholesky<f64, nalgebra::Dyn>,
    cond_cov_x: DMatrix<f64>,
    cond_chol_x: Cholesky<f64, nalgebra::Dyn>,
    /// Lz^{-1} A': maps x to the conditional mean of z | x.
    posterior_mean_op: DMatrix<f64>,
    /// Lx^{-1} A: maps z to the conditional mean of x | z.
    conditional_mean_op: DMatrix<f64>,
    log_z: f64,
}

impl GaussianOracle {
    /// Scalar-precision instance matching the envelope parameterization:
    /// E = (lambda_x/2)|x|^2 + (lambda_z/2)|z|^2 - x' A z.
    pub fn build(a: &[Vec<f64>], lambda_x: f64, lambda_z: f64) -> Result<Self, OracleError> {
        let dim_x = a.len();
        let dim_z = a.first().map(|r| r.len()).unwrap_or(0);
        if dim_x == 0 || dim_z == 0 {
            return Err(OracleError::Invalid("coupling matrix must be non-empty".into()));
        }
        let coupling = DMatrix::from_fn(dim_x, dim_z, |i, j| a[i][j]);
        Self::build_full(
            coupling,
            DMatrix::identity(dim_x, dim_x) * lambda_x,
            DMatrix::identity(dim_z, dim_z) * lambda_z,
        )
    }

    /// General instance with full precision blocks.
    pub fn build_full(
        coupling: DMatrix<f64>,
        prec_x: DMatrix<f64>,
        prec_z: DMatrix<f64>,
    ) -> Result<Self, OracleError> {
        let (dim_x, dim_z) = (coupling.nrows(), coupling.ncols());
        if prec_x.nrows() != dim_x || prec_x.ncols() != dim_x {
            return Err(OracleError::Invalid("prec_x shape".into()));
        }
        if prec_z.nrows() != dim_z || prec_z.ncols() != dim_z {
            return Err(OracleError::Invalid("prec_z shape".into()));
        }
        let p = dim_x + dim_z;
        let mut joint_prec = DMatrix::zeros(p, p);
        joint_prec.view_mut((0, 0), (dim_x, dim_x)).copy_from(&prec_x);
        joint_prec.view_mut((dim_x, dim_x), (dim_z, dim_z)).copy_from(&prec_z);
        joint_prec.view_mut((0, dim_x), (dim_x, dim_z)).copy_from(&(-&coupling));
        joint_prec.view_mut((dim_x, 0), (dim_z, dim_x)).copy_from(&(-coupling.transpose()));

        let prec_chol = Cholesky::new(joint_prec.clone()).ok_or(OracleError::NotPositiveDefinite)?;
        // log det of the precision from its Cholesky factor.
        let log_det_prec: f64 = 2.0 * prec_chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let log_z = 0.5 * p as f64 * (2.0 * std::f64::consts::PI).ln() - 0.5 * log_det_prec;
        let joint_cov = prec_chol.inverse();
        let joint_chol =
            Cholesky::new(joint_cov.clone()).ok_or(OracleError::NotPositiveDefinite)?;

        let prec_z_chol = Cholesky::new(prec_z.clone()).ok_or(OracleError::NotPositiveDefinite)?;
        let cond_cov_z = prec_z_chol.inverse();
        let prec_x_chol = Cholesky::new(prec_x.clone()).ok_or(OracleError::NotPositiveDefinite)?;
        let cond_cov_x = prec_x_chol.inverse();

        let marginal_prec_x = &prec_x - &coupling * &cond_cov_z * coupling.transpose();
        let marginal_prec_chol =
            Cholesky::new(marginal_prec_x.clone()).ok_or(OracleError::NotPositiveDefinite)?;
        let marginal_cov_x = marginal_prec_chol.inverse();

        let posterior_mean_op = &cond_cov_z * coupling.transpose();
        let conditional_mean_op = &cond_cov_x * &coupling;

        Ok(GaussianOracle {
            dim_x,
            dim_z,
            cond_chol_z: Cholesky::new(cond_cov_z.clone())
                .ok_or(OracleError::NotPositiveDefinite)?,
            cond_chol_x: Cholesky::new(cond_cov_x.clone())
                .ok_or(OracleError::NotPositiveDefinite)?,
            marginal_chol_x: Cholesky::new(marginal_cov_x.clone())
                .ok_or(OracleError::NotPositiveDefinite)?,
            coupling,
            prec_x,
            prec_z,
            joint_cov,
            joint_chol,
            marginal_prec_x,
            marginal_cov_x,
            cond_cov_z,
            cond_cov_x,
            posterior_mean_op,
            conditional_mean_op,
            log_z,
        })
    }

    pub fn log_partition(&self) -> f64 {
        self.log_z
    }

    pub fn joint_covariance(&self) -> &DMatrix<f64> {
        &self.joint_cov
    }

    pub fn marginal_cov_x(&self) -> &DMatrix<f64> {
        &self.marginal_cov_x
    }

    pub fn conditional_cov_z(&self) -> &DMatrix<f64> {
        &self.cond_cov_z
    }

    pub fn conditional_cov_x(&self) -> &DMatrix<f64> {
        &self.cond_cov_x
    }

    /// Mean of z | x.
    pub fn posterior_mean(&self, x: &[f64]) -> Vec<f64> {
        (&self.posterior_mean_op * DVector::from_column_slice(x)).data.into()
    }

    /// Mean of x | z.
    pub fn conditional_mean_x(&self, z: &[f64]) -> Vec<f64> {
        (&self.conditional_mean_op * DVector::from_column_slice(z)).data.into()
    }

    /// The energy itself (for quadrature cross-checks).
    pub fn energy(&self, x: &[f64], z: &[f64]) -> f64 {
        let xv = DVector::from_column_slice(x);
        let zv = DVector::from_column_slice(z);
        0.5 * (xv.transpose() * &self.prec_x * &xv)[(0, 0)]
            + 0.5 * (zv.transpose() * &self.prec_z * &zv)[(0, 0)]
            - (xv.transpose() * &self.coupling * &zv)[(0, 0)]
    }

    /// Exact log p(x) under the model marginal.
    pub fn log_marginal_x(&self, x: &[f64]) -> f64 {
        let xv = DVector::from_column_slice(x);
        let quad = (xv.transpose() * &self.marginal_prec_x * &xv)[(0, 0)];
        let log_det_cov: f64 =
            2.0 * self.marginal_chol_x.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        -0.5 * quad
            - 0.5 * (self.dim_x as f64) * (2.0 * std::f64::consts::PI).ln()
            - 0.5 * log_det_cov
    }

    fn sample_gaussian(
        chol: &Cholesky<f64, nalgebra::Dyn>,
        mean: Option<&DVector<f64>>,
        rng: &mut ChaCha8Rng,
    ) -> DVector<f64> {
        let p = chol.l().nrows();
        let mut eps = vec![0.0; p];
        fill_standard_normal(rng, &mut eps);
        let mut v = chol.l() * DVector::from_column_slice(&eps);
        if let Some(m) = mean {
            v += m;
        }
        v
    }

    /// Exact joint sample (x, z).
    pub fn sample_joint(&self, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
        let v = Self::sample_gaussian(&self.joint_chol, None, rng);
        let x = v.as_slice()[..self.dim_x].to_vec();
        let z = v.as_slice()[self.dim_x..].to_vec();
        (x, z)
    }

    pub fn sample_marginal_x(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        Self::sample_gaussian(&self.marginal_chol_x, None, rng).data.into()
    }

    pub fn sample_posterior_z(&self, x: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mean = &self.posterior_mean_op * DVector::from_column_slice(x);
        Self::sample_gaussian(&self.cond_chol_z, Some(&mean), rng).data.into()
    }

    pub fn sample_conditional_x(&self, z: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mean = &self.conditional_mean_op * DVector::from_column_slice(z);
        Self::sample_gaussian(&self.cond_chol_x, Some(&mean), rng).data.into()
    }

    /// log p(x) recomputed by composite-Simpson quadrature,
    /// log int e^{-E(x, z)} dz - log int int e^{-E}, on 1D blocks only.
    pub fn quadrature_log_marginal_x(&self, x: &[f64]) -> Result<f64, OracleError> {
        if self.dim_x != 1 || self.dim_z != 1 {
            return Err(OracleError::Invalid("quadrature cross-check needs d = l = 1".into()));
        }
        let sigma = self.joint_cov.diagonal().iter().cloned().fold(0.0f64, f64::max).sqrt();
        let half = 10.0 * sigma;
        let n = 2001;
        let inner = simpson(-half, half, n, |z| (-self.energy(x, &[z])).exp());
        let z_quad = simpson(-half, half, n, |xi| {
            simpson(-half, half, n, |z| (-self.energy(&[xi], &[z])).exp())
        });
        Ok(inner.ln() - z_quad.ln())
    }
}

/// Composite Simpson rule with `n` nodes (n odd) on [a, b].
fn simpson(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    debug_assert!(n >= 3 && n % 2 == 1);
    let h = (b - a) / (n - 1) as f64;
    let mut total = f(a) + f(b);
    for i in 1..n - 1 {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        total += w * f(a + i as f64 * h);
    }
    total * h / 3.0
}

/// KL(N(mean, cov) || N(0, I)) in closed form.
pub fn gaussian_kl_to_standard(mean: &[f64], cov: &DMatrix<f64>) -> f64 {
    let p = mean.len() as f64;
    let chol = Cholesky::new(cov.clone()).expect("covariance must be PD");
    let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let msq: f64 = mean.iter().map(|v| v * v).sum();
    0.5 * (cov.trace() + msq - p - log_det)
}

/// Squared 2-Wasserstein distance W2^2(N(mean, cov), N(0, I)) via the Bures
/// formula: |mean|^2 + tr(cov) + p - 2 tr(cov^{1/2}).
pub fn gaussian_w2sq_to_standard(mean: &[f64], cov: &DMatrix<f64>) -> f64 {
    let p = mean.len() as f64;
    let eig = nalgebra::SymmetricEigen::new(cov.clone());
    let trace_sqrt: f64 = eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).sum();
    let msq: f64 = mean.iter().map(|v| v * v).sum();
    msq + cov.trace() + p - 2.0 * trace_sqrt
}

/// Restricted-family ELBO gap on the Gaussian oracle. The positive family is
/// the isotropic Gaussians { N(m, s^2 I) : m free, s > 0 } per datum; the
/// negative side stays unrestricted (its supremum is log Z exactly). Both the
/// restricted ELBO and the exact log-likelihood come from closed forms, so
/// the gap isolates what restricting the family costs: zero when the true
/// posterior is isotropic, strictly positive otherwise.
#[derive(Clone, Debug)]
pub struct RestrictedGap {
    pub elbo_restricted: f64,
    pub loglik_exact: f64,
    pub gap: f64,
    /// Closed-form per-datum gap: KL of the best isotropic fit to the true
    /// posterior, (1/2)[l ln(tr Lz / l) - ln det Lz].
    pub gap_closed_form: f64,
}

pub fn restricted_elbo_gap(oracle: &GaussianOracle, xs: &[Vec<f64>]) -> RestrictedGap {
    assert!(!xs.is_empty());
    let l = oracle.dim_z as f64;
    let prec_z = &oracle.prec_z;
    let trace_prec = prec_z.trace();
    // Optimal isotropic variance s^2 = l / tr(Lz).
    let s2 = l / trace_prec;
    let two_pi_e = 2.0 * std::f64::consts::PI * std::f64::consts::E;
    let mut elbo_sum = 0.0;
    let mut loglik_sum = 0.0;
    for x in xs {
        let xv = DVector::from_column_slice(x);
        let m = &oracle.posterior_mean_op * &xv;
        // A_i at (m*, s*): -E_q[E(x, .)] + H(q).
        let e_mean = oracle.energy(x, m.as_slice()) + 0.5 * s2 * trace_prec;
        let entropy = 0.5 * l * (two_pi_e * s2).ln();
        elbo_sum += -e_mean + entropy;
        loglik_sum += oracle.log_marginal_x(x);
    }
    let n = xs.len() as f64;
    let elbo_restricted = elbo_sum / n - oracle.log_partition();
    let loglik_exact = loglik_sum / n;
    let chol = Cholesky::new(prec_z.clone()).expect("prec_z is PD");
    let log_det_prec: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let gap_closed_form = 0.5 * (l * (trace_prec / l).ln() - log_det_prec);
    RestrictedGap {
        elbo_restricted,
        loglik_exact,
        gap: loglik_exact - elbo_restricted,
        gap_closed_form,
    }
}

/// Scalar-envelope bilinear energy with a trainable coupling matrix, plugged
/// into the same traits the MLP energy implements. U(x, z) = -x' A z.
#[derive(Clone, Debug, PartialEq)]
pub struct BilinearEnergy {
    pub dim_x: usize,
    pub dim_z: usize,
    /// Row-major d x l coupling.
    pub coupling: Vec<f64>,
    pub lambda_x: f64,
    pub lambda_z: f64,
}

impl BilinearEnergy {
    pub fn new(dim_x: usize, dim_z: usize, coupling: Vec<f64>, lambda_x: f64, lambda_z: f64) -> Self {
        assert_eq!(coupling.len(), dim_x * dim_z);
        assert!(lambda_x > 0.0 && lambda_z > 0.0);
        BilinearEnergy { dim_x, dim_z, coupling, lambda_x, lambda_z }
    }

    /// Zero coupling: the pure quadratic envelope, whose Gibbs law is the
    /// product of centered isotropic Gaussians.
    pub fn quadratic(dim_x: usize, dim_z: usize, lambda_x: f64, lambda_z: f64) -> Self {
        Self::new(dim_x, dim_z, vec![0.0; dim_x * dim_z], lambda_x, lambda_z)
    }

    /// The matching closed-form oracle.
    pub fn oracle(&self) -> Result<GaussianOracle, OracleError> {
        let rows: Vec<Vec<f64>> = self
            .coupling
            .chunks_exact(self.dim_z)
            .map(|r| r.to_vec())
            .collect();
        GaussianOracle::build(&rows, self.lambda_x, self.lambda_z)
    }
}

impl Energy for BilinearEnergy {
    fn lambda_x(&self) -> f64 {
        self.lambda_x
    }

    fn lambda_z(&self) -> f64 {
        self.lambda_z
    }

    fn u_value(&self, x: &[f64], z: &[f64]) -> f64 {
        let mut u = 0.0;
        for (i, &xi) in x.iter().enumerate() {
            let row = &self.coupling[i * self.dim_z..(i + 1) * self.dim_z];
            for (&a, &zj) in row.iter().zip(z.iter()) {
                u -= xi * a * zj;
            }
        }
        u
    }

    fn u_grad(&self, x: &[f64], z: &[f64], gx: &mut [f64], gz: &mut [f64]) {
        gz.fill(0.0);
        for (i, &xi) in x.iter().enumerate() {
            let row = &self.coupling[i * self.dim_z..(i + 1) * self.dim_z];
            let mut gxi = 0.0;
            for ((&a, &zj), g) in row.iter().zip(z.iter()).zip(gz.iter_mut()) {
                gxi -= a * zj;
                *g -= a * xi;
            }
            gx[i] = gxi;
        }
    }
}

impl TrainableEnergy for BilinearEnergy {
    type ParamGrad = Vec<f64>;

    fn zero_param_grad(&self) -> Vec<f64> {
        vec![0.0; self.coupling.len()]
    }

    fn accum_param_grad(&self, x: &[f64], z: &[f64], scale: f64, acc: &mut Vec<f64>) -> f64 {
        // dE/dA_ij = -x_i z_j.
        for (i, &xi) in x.iter().enumerate() {
            let row = &mut acc[i * self.dim_z..(i + 1) * self.dim_z];
            for (g, &zj) in row.iter_mut().zip(z.iter()) {
                *g += scale * (-xi * zj);
            }
        }
        self.u_value(x, z)
    }

    fn merge_param_grad(acc: &mut Vec<f64>, other: &Vec<f64>) {
        for (a, &o) in acc.iter_mut().zip(other.iter()) {
            *a += o;
        }
    }

    fn ascend(&mut self, grad: &Vec<f64>, alpha: f64) -> bool {
        for (a, &g) in self.coupling.iter_mut().zip(grad.iter()) {
            *a += alpha * g;
        }
        self.coupling.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn decoupled_oracle_matches_hand_formulas() {
        let oracle = GaussianOracle::build(&[vec![0.0]], 2.0, 0.5).unwrap();
        // log Z = (1/2) ln(2 pi / lx) + (1/2) ln(2 pi / lz).
        let want = 0.5 * (2.0 * std::f64::consts::PI / 2.0).ln()
            + 0.5 * (2.0 * std::f64::consts::PI / 0.5).ln();
        assert!((oracle.log_partition() - want).abs() < 1e-12);
        assert!((oracle.conditional_cov_x()[(0, 0)] - 0.5).abs() < 1e-12);
        assert!((oracle.marginal_cov_x()[(0, 0)] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn one_dim_coupled_oracle_matches_matrix_inverse_by_hand() {
        let oracle = GaussianOracle::build(&[vec![0.5]], 1.0, 1.0).unwrap();
        // Joint covariance = inverse of [[1, -0.5], [-0.5, 1]].
        let c = oracle.joint_covariance();
        let s = 1.0 / 0.75;
        assert!((c[(0, 0)] - s).abs() < 1e-12);
        assert!((c[(0, 1)] - 0.5 * s).abs() < 1e-12);
        assert!((c[(1, 1)] - s).abs() < 1e-12);
        assert!((oracle.conditional_cov_z()[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_pd_precision_is_rejected() {
        // lambda_x lambda_z <= |A|^2 breaks positive definiteness.
        assert!(matches!(
            GaussianOracle::build(&[vec![1.1]], 1.0, 1.0),
            Err(OracleError::NotPositiveDefinite)
        ));
    }

    #[test]
    fn sampled_joint_moments_match_stored_covariance() {
        let oracle = GaussianOracle::build(&[vec![0.4], vec![-0.2]], 1.0, 1.0).unwrap();
        let mut rng = stream_rng(51, 0);
        let n = 200_000;
        let p = 3;
        let mut mean = vec![0.0; p];
        let mut second = vec![0.0; p * p];
        for _ in 0..n {
            let (x, z) = oracle.sample_joint(&mut rng);
            let u: Vec<f64> = x.iter().chain(z.iter()).cloned().collect();
            for i in 0..p {
                mean[i] += u[i];
                for j in 0..p {
                    second[i * p + j] += u[i] * u[j];
                }
            }
        }
        for i in 0..p {
            mean[i] /= n as f64;
            assert!(mean[i].abs() < 0.02, "mean[{i}] = {}", mean[i]);
        }
        let cov = oracle.joint_covariance();
        for i in 0..p {
            for j in 0..p {
                let emp = second[i * p + j] / n as f64 - mean[i] * mean[j];
                let want = cov[(i, j)];
                assert!(
                    (emp - want).abs() < 0.03 * want.abs().max(1.0),
                    "cov[{i},{j}] emp {emp} want {want}"
                );
            }
        }
    }

    #[test]
    fn quadrature_cross_check_on_small_instance() {
        let oracle = GaussianOracle::build(&[vec![0.5]], 1.0, 1.0).unwrap();
        for &x in &[0.0, 0.7, -1.3] {
            let exact = oracle.log_marginal_x(&[x]);
            let quad = oracle.quadrature_log_marginal_x(&[x]).unwrap();
            assert!((exact - quad).abs() < 1e-6, "x={x}: exact {exact} quad {quad}");
        }
    }

    #[test]
    fn kl_and_w2_closed_forms() {
        // N(2, 1) vs N(0, 1): KL = 2, W2^2 = 4 (tight Talagrand equality).
        let cov = DMatrix::identity(1, 1);
        assert!((gaussian_kl_to_standard(&[2.0], &cov) - 2.0).abs() < 1e-12);
        assert!((gaussian_w2sq_to_standard(&[2.0], &cov) - 4.0).abs() < 1e-12);
        // N(0, 4) vs N(0, 1) in 1D: W2^2 = 1, KL = (ln(1/4) + 4 - 1)/2.
        let cov4 = DMatrix::identity(1, 1) * 4.0;
        let kl = gaussian_kl_to_standard(&[0.0], &cov4);
        assert!((kl - 0.5 * (4.0 - 1.0 - 4f64.ln())).abs() < 1e-12);
        assert!((gaussian_w2sq_to_standard(&[0.0], &cov4) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn restricted_gap_zero_when_family_contains_posterior() {
        // Scalar Lz makes the true posterior isotropic, so the isotropic
        // family attains the exact log-likelihood.
        let oracle = GaussianOracle::build(&[vec![0.5], vec![0.1]], 1.0, 1.0).unwrap();
        let mut rng = stream_rng(53, 0);
        let xs: Vec<Vec<f64>> = (0..64).map(|_| oracle.sample_marginal_x(&mut rng)).collect();
        let result = restricted_elbo_gap(&oracle, &xs);
        assert!(result.gap.abs() < 1e-10, "gap {}", result.gap);
        assert!(result.gap_closed_form.abs() < 1e-12);
    }

    #[test]
    fn restricted_gap_strict_on_correlated_posterior() {
        let coupling = DMatrix::from_row_slice(2, 2, &[0.3, 0.0, 0.0, 0.1]);
        let prec_x = DMatrix::identity(2, 2);
        let prec_z = DMatrix::from_row_slice(2, 2, &[2.0, 0.8, 0.8, 1.0]);
        let oracle = GaussianOracle::build_full(coupling, prec_x, prec_z).unwrap();
        let mut rng = stream_rng(54, 0);
        let xs: Vec<Vec<f64>> = (0..64).map(|_| oracle.sample_marginal_x(&mut rng)).collect();
        let result = restricted_elbo_gap(&oracle, &xs);
        assert!(result.gap > 1e-3, "gap {}", result.gap);
        assert!(result.gap >= -1e-10);
        assert!(
            (result.gap - result.gap_closed_form).abs() < 1e-9,
            "measured {} vs closed form {}",
            result.gap,
            result.gap_closed_form
        );
        // Per-datum gap does not depend on the dataset size.
        let more: Vec<Vec<f64>> = (0..256).map(|_| oracle.sample_marginal_x(&mut rng)).collect();
        let again = restricted_elbo_gap(&oracle, &more);
        assert!((again.gap - result.gap).abs() < 1e-9);
    }

    #[test]
    fn bilinear_energy_gradients_match_finite_differences() {
        let energy = BilinearEnergy::new(2, 2, vec![0.3, -0.1, 0.2, 0.4], 1.0, 0.8);
        let x = [0.5, -0.7];
        let z = [1.2, 0.3];
        let mut gx = [0.0; 2];
        let mut gz = [0.0; 2];
        energy.u_grad(&x, &z, &mut gx, &mut gz);
        let h = 1e-6;
        for i in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let fd = (energy.u_value(&xp, &z) - energy.u_value(&xm, &z)) / (2.0 * h);
            assert!((fd - gx[i]).abs() < 1e-8);
        }
        for j in 0..2 {
            let mut zp = z;
            let mut zm = z;
            zp[j] += h;
            zm[j] -= h;
            let fd = (energy.u_value(&x, &zp) - energy.u_value(&x, &zm)) / (2.0 * h);
            assert!((fd - gz[j]).abs() < 1e-8);
        }
        // Full energy agrees with the oracle's quadratic form.
        let oracle = energy.oracle().unwrap();
        let full = energy.energy_value(&x, &z);
        assert!((full - oracle.energy(&x, &z)).abs() < 1e-12);
    }
}
