//! Langevin flow checks against Ornstein-Uhlenbeck closed forms.
//!
//! With a pure quadratic energy |u|^2 / 2 the Langevin diffusion is the OU
//! process: a Gaussian initial law stays Gaussian with mean m0 e^{-t} and
//! variance 1 + (s0^2 - 1) e^{-2t}, the log-Sobolev constant is exactly 1,
//! and KL to the standard normal decays like e^{-2t}. The simulations below
//! run the same Euler-Maruyama kernel the trainer uses, so a sign flip or a
//! wrong noise scale in that kernel breaks these checks.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use super::gaussian::{gaussian_kl_to_standard, gaussian_w2sq_to_standard};
use crate::dynamics::euler_maruyama;
use crate::rng::{fill_standard_normal, stream_rng, sub_seed};

#[derive(Clone, Debug)]
pub struct OuConfig {
    pub dim: usize,
    /// Initial law N(mean0 * 1, std0^2 I).
    pub mean0: f64,
    pub std0: f64,
    pub eta: f64,
    /// Continuous times at which the particle law is fitted.
    pub t_grid: Vec<f64>,
    pub particles: usize,
    pub seed: u64,
}

impl Default for OuConfig {
    fn default() -> Self {
        OuConfig {
            dim: 1,
            mean0: 2.0,
            std0: 1.0,
            eta: 1e-3,
            t_grid: vec![0.25, 0.5, 1.0],
            particles: 20_000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OuCheckpoint {
    pub t: f64,
    pub mean: Vec<f64>,
    #[serde(skip)]
    pub cov: DMatrix<f64>,
    pub kl_empirical: f64,
    pub kl_exact: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct OuTrajectory {
    pub kl_initial_exact: f64,
    pub checkpoints: Vec<OuCheckpoint>,
    /// Least-squares slope of -ln KL(t) over the grid; 2 rho for an exact
    /// OU flow (= 2 here).
    pub fitted_rate: f64,
}

/// Simulates the Langevin particle system for the standard-normal target
/// from a Gaussian initial law and compares the fitted Gaussian law with the
/// analytic OU prediction at each grid time.
pub fn ou_contraction_test(cfg: &OuConfig) -> OuTrajectory {
    let init_key = sub_seed(cfg.seed, "ou-init", 0);
    let sim_key = sub_seed(cfg.seed, "ou-sim", 0);
    let dim = cfg.dim;
    let mut positions: Vec<f64> = vec![0.0; cfg.particles * dim];
    positions
        .par_chunks_mut(dim)
        .enumerate()
        .for_each(|(j, u)| {
            let mut rng = stream_rng(init_key, j as u64);
            fill_standard_normal(&mut rng, u);
            u.iter_mut().for_each(|v| *v = cfg.mean0 + cfg.std0 * *v);
        });
    let mut rngs: Vec<_> = (0..cfg.particles).map(|j| stream_rng(sim_key, j as u64)).collect();
    let mut checkpoints = Vec::with_capacity(cfg.t_grid.len());
    let mut steps_done = 0usize;
    for &t in &cfg.t_grid {
        let steps_target = (t / cfg.eta).round() as usize;
        let run = steps_target.saturating_sub(steps_done);
        positions
            .par_chunks_mut(dim)
            .zip(rngs.par_iter_mut())
            .for_each(|(u, rng)| {
                let mut noise = vec![0.0; dim];
                let mut drift = vec![0.0; dim];
                for _ in 0..run {
                    fill_standard_normal(rng, &mut noise);
                    drift.copy_from_slice(u);
                    euler_maruyama(u, &drift, cfg.eta, &noise);
                }
            });
        steps_done = steps_target;
        let (mean, cov) = fit_gaussian(&positions, dim);
        let kl_empirical = gaussian_kl_to_standard(&mean, &cov);
        let kl_exact = ou_exact_kl(cfg, t);
        checkpoints.push(OuCheckpoint { t, mean, cov, kl_empirical, kl_exact });
    }
    // Fit ln KL = a - rate * t by least squares over usable checkpoints.
    let pts: Vec<(f64, f64)> = checkpoints
        .iter()
        .filter(|c| c.kl_empirical > 0.0)
        .map(|c| (c.t, c.kl_empirical.ln()))
        .collect();
    let fitted_rate = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        -(n * sxy - sx * sy) / (n * sxx - sx * sx)
    } else {
        f64::NAN
    };
    OuTrajectory {
        kl_initial_exact: ou_exact_kl(cfg, 0.0),
        checkpoints,
        fitted_rate,
    }
}

/// Analytic KL of the OU law at time t to the standard normal target:
/// per coordinate, mean m0 e^{-t} and variance 1 + (s0^2 - 1) e^{-2t}.
fn ou_exact_kl(cfg: &OuConfig, t: f64) -> f64 {
    let m = cfg.mean0 * (-t).exp();
    let s2 = 1.0 + (cfg.std0 * cfg.std0 - 1.0) * (-2.0 * t).exp();
    cfg.dim as f64 * 0.5 * (s2 + m * m - 1.0 - s2.ln())
}

fn fit_gaussian(positions: &[f64], dim: usize) -> (Vec<f64>, DMatrix<f64>) {
    let n = positions.len() / dim;
    let mut mean = vec![0.0; dim];
    for row in positions.chunks_exact(dim) {
        for (m, &v) in mean.iter_mut().zip(row.iter()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = DMatrix::zeros(dim, dim);
    for row in positions.chunks_exact(dim) {
        for i in 0..dim {
            for j in 0..dim {
                cov[(i, j)] += (row[i] - mean[i]) * (row[j] - mean[j]);
            }
        }
    }
    cov /= (n - 1) as f64;
    (mean, cov)
}

#[derive(Clone, Debug, Serialize)]
pub struct TalagrandReport {
    /// Per checkpoint: (t, W2^2 of the fitted law to the target, 2 KL / rho).
    pub rows: Vec<(f64, f64, f64)>,
    pub pass: bool,
}

/// Checks the T2 inequality W2^2 <= (2 / rho) KL on every fitted Gaussian of
/// an OU trajectory. For Gaussians the inequality is exact mathematics, so
/// the tolerance only absorbs float rounding.
pub fn talagrand_check(trajectory: &OuTrajectory, rho: f64, tol: f64) -> TalagrandReport {
    let mut rows = Vec::with_capacity(trajectory.checkpoints.len());
    let mut pass = true;
    for c in &trajectory.checkpoints {
        let w2 = gaussian_w2sq_to_standard(&c.mean, &c.cov);
        let bound = 2.0 / rho * c.kl_empirical;
        if w2 > bound + tol {
            pass = false;
        }
        rows.push((c.t, w2, bound));
    }
    TalagrandReport { rows, pass }
}

#[derive(Clone, Debug)]
pub struct SecondMomentConfig {
    pub dim: usize,
    /// Quadratic energy (lambda/2)|u|^2: dissipative with m = lambda, b = 0.
    pub lambda: f64,
    /// Initial second moment E|u|^2 (particles start N(0, (m2_0/dim) I)).
    pub m2_initial: f64,
    pub eta: f64,
    pub steps: usize,
    pub record_every: usize,
    pub particles: usize,
    pub seed: u64,
    /// Multiplicative slack for discretization and sampling noise.
    pub headroom: f64,
}

impl Default for SecondMomentConfig {
    fn default() -> Self {
        SecondMomentConfig {
            dim: 2,
            lambda: 1.0,
            m2_initial: 200.0,
            eta: 1e-3,
            steps: 5000,
            record_every: 50,
            particles: 20_000,
            seed: 0,
            headroom: 1.2,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SecondMomentReport {
    /// (t, empirical M2, Gronwall envelope) at each recorded step.
    pub rows: Vec<(f64, f64, f64)>,
    pub max_ratio: f64,
    pub pass: bool,
}

/// Simulates the quadratic-energy Langevin system and checks the Gronwall
/// envelope M2(t) <= e^{-2 m t} M2(0) + ((b + dim)/m)(1 - e^{-2 m t}) with
/// m = lambda, b = 0, within the configured headroom at every checkpoint.
pub fn second_moment_bound_check(cfg: &SecondMomentConfig) -> SecondMomentReport {
    let init_key = sub_seed(cfg.seed, "m2-init", 0);
    let sim_key = sub_seed(cfg.seed, "m2-sim", 0);
    let dim = cfg.dim;
    let std0 = (cfg.m2_initial / dim as f64).sqrt();
    let mut positions: Vec<f64> = vec![0.0; cfg.particles * dim];
    positions.par_chunks_mut(dim).enumerate().for_each(|(j, u)| {
        let mut rng = stream_rng(init_key, j as u64);
        fill_standard_normal(&mut rng, u);
        u.iter_mut().for_each(|v| *v *= std0);
    });
    let mut rngs: Vec<_> = (0..cfg.particles).map(|j| stream_rng(sim_key, j as u64)).collect();

    let envelope = |t: f64| -> f64 {
        let decay = (-2.0 * cfg.lambda * t).exp();
        decay * cfg.m2_initial + (dim as f64 / cfg.lambda) * (1.0 - decay)
    };
    let m2_of = |positions: &[f64]| -> f64 {
        positions.iter().map(|v| v * v).sum::<f64>() / cfg.particles as f64
    };

    let mut rows = vec![(0.0, m2_of(&positions), envelope(0.0))];
    let mut step = 0;
    while step < cfg.steps {
        let run = cfg.record_every.min(cfg.steps - step);
        positions.par_chunks_mut(dim).zip(rngs.par_iter_mut()).for_each(|(u, rng)| {
            let mut noise = vec![0.0; dim];
            let mut drift = vec![0.0; dim];
            for _ in 0..run {
                fill_standard_normal(rng, &mut noise);
                for (d, &v) in drift.iter_mut().zip(u.iter()) {
                    *d = cfg.lambda * v;
                }
                euler_maruyama(u, &drift, cfg.eta, &noise);
            }
        });
        step += run;
        let t = step as f64 * cfg.eta;
        rows.push((t, m2_of(&positions), envelope(t)));
    }
    let max_ratio = rows
        .iter()
        .map(|(_, emp, env)| emp / env)
        .fold(0.0f64, f64::max);
    SecondMomentReport { rows, max_ratio, pass: max_ratio <= cfg.headroom }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ou_exact_kl_reference_values() {
        let cfg = OuConfig::default();
        // N(2, 1) start: KL(0) = 2 exactly, KL(t) = 2 e^{-2t}.
        assert!((ou_exact_kl(&cfg, 0.0) - 2.0).abs() < 1e-15);
        assert!((ou_exact_kl(&cfg, 1.0) - 2.0 * (-2.0f64).exp()).abs() < 1e-15);
        let stationary = OuConfig { mean0: 0.0, std0: 1.0, ..OuConfig::default() };
        for &t in &[0.0, 0.5, 2.0] {
            assert_eq!(ou_exact_kl(&stationary, t), 0.0);
        }
    }

    #[test]
    fn ou_contraction_small_run() {
        let cfg = OuConfig { particles: 4000, t_grid: vec![0.3, 0.6], ..OuConfig::default() };
        let traj = ou_contraction_test(&cfg);
        assert!((traj.kl_initial_exact - 2.0).abs() < 1e-15);
        for c in &traj.checkpoints {
            let ratio = c.kl_empirical / c.kl_exact;
            assert!((0.7..1.3).contains(&ratio), "t={} ratio {ratio}", c.t);
        }
        assert!((traj.fitted_rate - 2.0).abs() < 0.4, "rate {}", traj.fitted_rate);
        let tala = talagrand_check(&traj, 1.0, 1e-9);
        assert!(tala.pass);
    }

    #[test]
    fn ou_stationary_start_stays_put() {
        let cfg = OuConfig {
            mean0: 0.0,
            std0: 1.0,
            particles: 4000,
            t_grid: vec![0.5],
            ..OuConfig::default()
        };
        let traj = ou_contraction_test(&cfg);
        // Already at the target: only sampling noise remains.
        assert!(traj.checkpoints[0].kl_empirical < 5e-3);
    }

    #[test]
    fn talagrand_tight_at_mean_shift() {
        // The fitted law at t = 0+ is a near-pure mean shift where the bound
        // is an equality: W2^2 = 4 = 2 KL.
        let w2 = gaussian_w2sq_to_standard(&[2.0], &DMatrix::identity(1, 1));
        let kl = gaussian_kl_to_standard(&[2.0], &DMatrix::identity(1, 1));
        assert!((w2 - 4.0).abs() < 1e-12 && (kl - 2.0).abs() < 1e-12);
        assert!(w2 <= 2.0 * kl + 1e-12);
    }

    #[test]
    fn second_moment_heavy_start_decays_within_envelope() {
        let cfg = SecondMomentConfig {
            particles: 5000,
            steps: 3000,
            m2_initial: 200.0,
            ..SecondMomentConfig::default()
        };
        let report = second_moment_bound_check(&cfg);
        assert!(report.pass, "max ratio {}", report.max_ratio);
        // Monotone decay toward the stationary moment dim / lambda = 2.
        let last = report.rows.last().unwrap();
        assert!(last.1 < 4.0, "final M2 {}", last.1);
        assert!(report.rows[0].1 > 100.0);
    }

    #[test]
    fn second_moment_stationary_start_hovers() {
        let cfg = SecondMomentConfig {
            particles: 5000,
            steps: 1000,
            m2_initial: 2.0,
            ..SecondMomentConfig::default()
        };
        let report = second_moment_bound_check(&cfg);
        assert!(report.pass, "max ratio {}", report.max_ratio);
    }

    #[cfg(feature = "flipped-drift")]
    #[test]
    fn flipped_drift_breaks_ou_contraction() {
        let cfg = OuConfig { particles: 2000, t_grid: vec![0.25], ..OuConfig::default() };
        let traj = ou_contraction_test(&cfg);
        let ratio = traj.checkpoints[0].kl_empirical / traj.checkpoints[0].kl_exact;
        assert!(ratio > 1.3, "mutation not detected: ratio {ratio}");
    }
}
