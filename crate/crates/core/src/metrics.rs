//! Evaluation metrics: particle ELBO, RMSE, RBF-kernel MMD, and an
//! entropy-regularized Sinkhorn approximation of squared 2-Wasserstein
//! distance, plus the k-nearest-neighbor differential-entropy estimator the
//! ELBO relies on.
//!
//! All functions take row-major flat slices with an explicit dimension, the
//! same layout [`crate::datasets::Dataset`] stores. Pairwise-distance loops
//! run in parallel with fixed reduction order, so results do not depend on
//! the worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};
use thiserror::Error;

use crate::datasets::Dataset;
use crate::dynamics::ParticleState;
use crate::energy::Energy;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("median-heuristic bandwidth is zero: all points identical")]
    ZeroBandwidth,
    #[error("degenerate pool: {0}")]
    DegeneratePool(String),
}

/// Bandwidth policy for the RBF kernel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bandwidth {
    /// Median of pairwise Euclidean distances over the pooled sample.
    Median,
    /// Fixed bandwidth h.
    Fixed(f64),
}

/// Settings echoed into every [`MetricsReport`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsConfig {
    pub mmd_bandwidth: Bandwidth,
    /// Bandwidth actually used after resolving the median heuristic.
    pub mmd_bandwidth_resolved: Option<f64>,
    pub sinkhorn_epsilon: f64,
    pub sinkhorn_iters: usize,
    pub knn_k: usize,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            mmd_bandwidth: Bandwidth::Median,
            mmd_bandwidth_resolved: None,
            sinkhorn_epsilon: 0.05,
            sinkhorn_iters: 200,
            knn_k: 3,
        }
    }
}

/// The four reported metrics. `rmse` and `mmd2` are clamped at zero on
/// construction (the unbiased MMD estimator may dip slightly negative).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub elbo: f64,
    pub rmse: f64,
    pub mmd2: f64,
    pub w2sq: f64,
    pub config: MetricsConfig,
}

impl MetricsReport {
    pub fn new(elbo: f64, rmse: f64, mmd2: f64, w2sq: f64, config: MetricsConfig) -> Self {
        MetricsReport { elbo, rmse: rmse.max(0.0), mmd2: mmd2.max(0.0), w2sq, config }
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Root mean squared error with per-coordinate normalization:
/// sqrt((1/(n d)) sum_i |a_i - b_i|^2). Pairing is positional.
pub fn rmse(a: &[f64], b: &[f64], dim: usize) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(MetricsError::TooFewPoints { need: 1, got: 0 });
    }
    debug_assert_eq!(a.len() % dim, 0);
    let total: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((total / a.len() as f64).sqrt())
}

/// Resolves the bandwidth: for `Median`, h is the median pairwise Euclidean
/// distance over the pooled sample A union B.
fn resolve_bandwidth(
    a: &[f64],
    b: &[f64],
    dim: usize,
    bandwidth: Bandwidth,
) -> Result<f64, MetricsError> {
    match bandwidth {
        Bandwidth::Fixed(h) => Ok(h),
        Bandwidth::Median => {
            let mut pooled: Vec<&[f64]> = a.chunks_exact(dim).collect();
            pooled.extend(b.chunks_exact(dim));
            let n = pooled.len();
            let mut dists: Vec<f64> = (0..n)
                .into_par_iter()
                .flat_map_iter(|i| {
                    let pi = pooled[i];
                    pooled[i + 1..].iter().map(move |pj| sq_dist(pi, pj).sqrt()).collect::<Vec<_>>()
                })
                .collect();
            if dists.is_empty() {
                return Err(MetricsError::TooFewPoints { need: 2, got: n });
            }
            let mid = dists.len() / 2;
            dists.select_nth_unstable_by(mid, |x, y| x.partial_cmp(y).unwrap());
            let h = dists[mid];
            if h <= 0.0 {
                return Err(MetricsError::ZeroBandwidth);
            }
            Ok(h)
        }
    }
}

fn mmd2_terms(a: &[f64], b: &[f64], dim: usize, h: f64) -> (f64, f64, f64, usize, usize) {
    let g = 1.0 / (2.0 * h * h);
    let ar: Vec<&[f64]> = a.chunks_exact(dim).collect();
    let br: Vec<&[f64]> = b.chunks_exact(dim).collect();
    let (m, n) = (ar.len(), br.len());
    // Off-diagonal sums, each pair counted once.
    let kaa: f64 = (0..m)
        .into_par_iter()
        .map(|i| ar[i + 1..].iter().map(|aj| (-g * sq_dist(ar[i], aj)).exp()).sum::<f64>())
        .sum();
    let kbb: f64 = (0..n)
        .into_par_iter()
        .map(|i| br[i + 1..].iter().map(|bj| (-g * sq_dist(br[i], bj)).exp()).sum::<f64>())
        .sum();
    let kab: f64 = (0..m)
        .into_par_iter()
        .map(|i| br.iter().map(|bj| (-g * sq_dist(ar[i], bj)).exp()).sum::<f64>())
        .sum();
    (kaa, kbb, kab, m, n)
}

/// Unbiased U-statistic estimate of squared MMD with Gaussian kernel
/// k(u, v) = exp(-|u - v|^2 / (2 h^2)).
pub fn mmd2_rbf(a: &[f64], b: &[f64], dim: usize, bandwidth: Bandwidth) -> Result<f64, MetricsError> {
    let (m, n) = (a.len() / dim, b.len() / dim);
    if m < 2 || n < 2 {
        return Err(MetricsError::TooFewPoints { need: 2, got: m.min(n) });
    }
    let h = resolve_bandwidth(a, b, dim, bandwidth)?;
    let (kaa, kbb, kab, m, n) = mmd2_terms(a, b, dim, h);
    let (mf, nf) = (m as f64, n as f64);
    Ok(2.0 * kaa / (mf * (mf - 1.0)) + 2.0 * kbb / (nf * (nf - 1.0)) - 2.0 * kab / (mf * nf))
}

/// Biased V-statistic variant (diagonal terms included). Zero when the two
/// samples are the same multiset; used for identity checks and singletons.
pub fn mmd2_rbf_biased(
    a: &[f64],
    b: &[f64],
    dim: usize,
    bandwidth: Bandwidth,
) -> Result<f64, MetricsError> {
    let (m, n) = (a.len() / dim, b.len() / dim);
    if m < 1 || n < 1 {
        return Err(MetricsError::TooFewPoints { need: 1, got: 0 });
    }
    let h = resolve_bandwidth(a, b, dim, bandwidth)?;
    let (kaa, kbb, kab, m, n) = mmd2_terms(a, b, dim, h);
    let (mf, nf) = (m as f64, n as f64);
    // Diagonal kernel values are exactly 1.
    Ok((2.0 * kaa + mf) / (mf * mf) + (2.0 * kbb + nf) / (nf * nf) - 2.0 * kab / (mf * nf))
}

/// Outcome of a Sinkhorn run: transport cost of the final plan (entropy term
/// not included) and its total marginal violation (L1).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SinkhornResult {
    pub cost: f64,
    pub marginal_error: f64,
}

fn logsumexp(values: impl Iterator<Item = f64>) -> f64 {
    let vals: Vec<f64> = values.collect();
    let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + vals.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Log-domain Sinkhorn on the squared-Euclidean cost with uniform marginals.
/// Runs exactly `iters` alternating potential updates (no convergence test);
/// underflow is impossible because all scaling happens in log space.
pub fn sinkhorn_detailed(
    a: &[f64],
    b: &[f64],
    dim: usize,
    epsilon: f64,
    iters: usize,
) -> Result<SinkhornResult, MetricsError> {
    let ar: Vec<&[f64]> = a.chunks_exact(dim).collect();
    let br: Vec<&[f64]> = b.chunks_exact(dim).collect();
    let (m, n) = (ar.len(), br.len());
    if m == 0 || n == 0 {
        return Err(MetricsError::TooFewPoints { need: 1, got: 0 });
    }
    let cost: Vec<f64> = ar
        .par_iter()
        .flat_map_iter(|ai| br.iter().map(move |bj| sq_dist(ai, bj)).collect::<Vec<_>>())
        .collect();
    let log_mu = -(m as f64).ln();
    let log_nu = -(n as f64).ln();
    let mut f = vec![0.0; m];
    let mut g = vec![0.0; n];
    for _ in 0..iters {
        let new_f: Vec<f64> = (0..m)
            .into_par_iter()
            .map(|i| {
                let row = &cost[i * n..(i + 1) * n];
                let lse = logsumexp(row.iter().zip(g.iter()).map(|(&c, &gj)| (gj - c) / epsilon));
                epsilon * (log_mu - lse)
            })
            .collect();
        f = new_f;
        let new_g: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|j| {
                let lse = logsumexp((0..m).map(|i| (f[i] - cost[i * n + j]) / epsilon));
                epsilon * (log_nu - lse)
            })
            .collect();
        g = new_g;
    }
    // Plan entries P_ij = exp((f_i + g_j - C_ij) / eps); accumulate transport
    // cost and both marginals in one pass.
    let per_row: Vec<(f64, f64, Vec<f64>)> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut row_mass = 0.0;
            let mut row_cost = 0.0;
            let mut col = vec![0.0; n];
            for j in 0..n {
                let c = cost[i * n + j];
                let p = ((f[i] + g[j] - c) / epsilon).exp();
                row_mass += p;
                row_cost += p * c;
                col[j] = p;
            }
            (row_mass, row_cost, col)
        })
        .collect();
    let mut total_cost = 0.0;
    let mut col_mass = vec![0.0; n];
    let mut marginal_error = 0.0;
    for (row_mass, row_cost, col) in &per_row {
        total_cost += row_cost;
        marginal_error += (row_mass - 1.0 / m as f64).abs();
        for (cm, p) in col_mass.iter_mut().zip(col.iter()) {
            *cm += p;
        }
    }
    for cm in &col_mass {
        marginal_error += (cm - 1.0 / n as f64).abs();
    }
    Ok(SinkhornResult { cost: total_cost, marginal_error })
}

/// Entropy-regularized approximation to squared 2-Wasserstein distance.
pub fn sinkhorn_w2sq(
    a: &[f64],
    b: &[f64],
    dim: usize,
    epsilon: f64,
    iters: usize,
) -> Result<f64, MetricsError> {
    Ok(sinkhorn_detailed(a, b, dim, epsilon, iters)?.cost)
}

/// Kozachenko-Leonenko estimate of differential entropy (natural log) from
/// k-th nearest-neighbor distances:
/// H = psi(n) - psi(k) + ln V_p + (p/n) sum_i ln r_ik.
/// Zero k-NN distances (duplicate points) are replaced by a 1e-12 jitter with
/// a warning.
pub fn knn_entropy(points: &[f64], dim: usize, k: usize) -> Result<f64, MetricsError> {
    let rows: Vec<&[f64]> = points.chunks_exact(dim).collect();
    let n = rows.len();
    if k == 0 || n < k + 1 {
        return Err(MetricsError::TooFewPoints { need: k + 1, got: n });
    }
    let knn_dists: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut d: Vec<f64> =
                (0..n).filter(|&j| j != i).map(|j| sq_dist(rows[i], rows[j])).collect();
            d.select_nth_unstable_by(k - 1, |x, y| x.partial_cmp(y).unwrap());
            d[k - 1].sqrt()
        })
        .collect();
    let mut jittered = 0usize;
    let sum_log: f64 = knn_dists
        .iter()
        .map(|&r| {
            if r > 0.0 {
                r.ln()
            } else {
                jittered += 1;
                1e-12f64.ln()
            }
        })
        .sum();
    if jittered > 0 {
        log::warn!("knn_entropy: {jittered} duplicate points jittered to 1e-12");
    }
    let p = dim as f64;
    let log_unit_ball = (p / 2.0) * std::f64::consts::PI.ln() - ln_gamma(p / 2.0 + 1.0);
    Ok(digamma(n as f64) - digamma(k as f64) + log_unit_ball + (p / n as f64) * sum_log)
}

/// Particle estimate of the evidence lower bound
/// (1/N) sum_i [ -mean_k E(x_i, z_ik) + H(q_i) ] + mean_j E(x~_j, z~_j) - H(q~),
/// which at the inner optima equals the average log-likelihood. Larger is
/// better.
pub fn elbo<E: Energy>(
    model: &E,
    data: &Dataset,
    state: &ParticleState,
    k: usize,
) -> Result<f64, MetricsError> {
    if state.num_data() != data.len() {
        return Err(MetricsError::LengthMismatch(state.num_data(), data.len()));
    }
    if state.latent_per_datum() < k + 1 {
        return Err(MetricsError::DegeneratePool(format!(
            "need at least {} latent particles per datum for k={k}",
            k + 1
        )));
    }
    let dim_z = state.dim_z();
    let positive: f64 = (0..data.len())
        .into_par_iter()
        .map(|i| {
            let pool = state.latent_row(i);
            let mean_e = pool
                .chunks_exact(dim_z)
                .map(|z| model.energy_value(data.row(i), z))
                .sum::<f64>()
                / state.latent_per_datum() as f64;
            let h = knn_entropy(pool, dim_z, k).unwrap_or(f64::NAN);
            -mean_e + h
        })
        .sum::<f64>()
        / data.len() as f64;
    let joint = state.joint_pool_matrix();
    let dim_joint = state.dim_x() + dim_z;
    let neg_mean_e = (0..state.num_negative())
        .map(|j| {
            let (x, z) = state.negative_pair(j);
            model.energy_value(x, z)
        })
        .sum::<f64>()
        / state.num_negative() as f64;
    let neg_h = knn_entropy(&joint, dim_joint, k)?;
    let value = positive + neg_mean_e - neg_h;
    if !value.is_finite() {
        return Err(MetricsError::DegeneratePool("non-finite entropy estimate".into()));
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{fill_standard_normal, stream_rng};
    use rand::Rng;

    #[test]
    fn rmse_cases() {
        let a = vec![1.0, 2.0, 3.0, 4.0];
        assert_eq!(rmse(&a, &a, 2).unwrap(), 0.0);
        assert!((rmse(&[3.0], &[0.0], 1).unwrap() - 3.0).abs() < 1e-15);
        assert!(matches!(rmse(&a, &[1.0], 1), Err(MetricsError::LengthMismatch(4, 1))));
    }

    #[test]
    fn rmse_matches_direct_loop() {
        let mut rng = stream_rng(1, 0);
        let d = 3;
        let n = 57;
        let a: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let b: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mut total = 0.0;
        for i in 0..n {
            for c in 0..d {
                let diff = a[i * d + c] - b[i * d + c];
                total += diff * diff;
            }
        }
        let want = (total / (n * d) as f64).sqrt();
        assert!((rmse(&a, &b, d).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn mmd_identity_and_singleton() {
        let a = vec![0.0, 1.0, 2.0, 3.0];
        let v = mmd2_rbf_biased(&a, &a.clone(), 1, Bandwidth::Median).unwrap();
        assert!(v.abs() < 1e-12, "self-MMD {v}");
        // Direct kernel formula: 2 - 2 e^{-1} for points {0}, {2}, h = sqrt(2).
        let s = mmd2_rbf_biased(&[0.0], &[2.0], 1, Bandwidth::Fixed(2f64.sqrt())).unwrap();
        assert!((s - (2.0 - 2.0 * (-1.0f64).exp())).abs() < 1e-12, "singleton {s}");
    }

    #[test]
    fn mmd_null_case_small() {
        let mut rng = stream_rng(5, 0);
        let mut a = vec![0.0; 2000 * 2];
        let mut b = vec![0.0; 2000 * 2];
        fill_standard_normal(&mut rng, &mut a);
        fill_standard_normal(&mut rng, &mut b);
        let v = mmd2_rbf(&a, &b, 2, Bandwidth::Median).unwrap();
        assert!(v.abs() < 0.01, "null MMD^2 {v}");
    }

    #[test]
    fn mmd_symmetry_exact() {
        let mut rng = stream_rng(6, 0);
        let mut a = vec![0.0; 40];
        let mut b = vec![0.0; 60];
        fill_standard_normal(&mut rng, &mut a);
        fill_standard_normal(&mut rng, &mut b);
        b.iter_mut().for_each(|v| *v += 0.5);
        let ab = mmd2_rbf(&a, &b, 2, Bandwidth::Fixed(1.0)).unwrap();
        let ba = mmd2_rbf(&b, &a, 2, Bandwidth::Fixed(1.0)).unwrap();
        assert_eq!(ab, ba);
    }

    #[test]
    fn mmd_zero_bandwidth_error() {
        let a = vec![1.0, 1.0, 1.0, 1.0];
        assert!(matches!(
            mmd2_rbf(&a, &a.clone(), 2, Bandwidth::Median),
            Err(MetricsError::ZeroBandwidth)
        ));
    }

    #[test]
    fn sinkhorn_forced_coupling() {
        let v = sinkhorn_w2sq(&[0.0, 0.0], &[3.0, 4.0], 2, 0.1, 50).unwrap();
        assert!((v - 25.0).abs() < 1e-9, "two point masses {v}");
    }

    #[test]
    fn sinkhorn_self_distance_small() {
        let mut rng = stream_rng(7, 0);
        let mut a = vec![0.0; 500 * 2];
        fill_standard_normal(&mut rng, &mut a);
        let v = sinkhorn_w2sq(&a, &a.clone(), 2, 0.05, 200).unwrap();
        assert!(v < 0.05, "self transport cost {v}");
    }

    #[test]
    fn sinkhorn_symmetry_at_convergence() {
        let mut rng = stream_rng(8, 0);
        let mut a = vec![0.0; 12 * 2];
        let mut b = vec![0.0; 9 * 2];
        fill_standard_normal(&mut rng, &mut a);
        fill_standard_normal(&mut rng, &mut b);
        let ab = sinkhorn_w2sq(&a, &b, 2, 0.1, 20_000).unwrap();
        let ba = sinkhorn_w2sq(&b, &a, 2, 0.1, 20_000).unwrap();
        assert!((ab - ba).abs() < 1e-9, "{ab} vs {ba}");
    }

    /// Exhaustive assignment LP over permutations for m = n <= 6 with
    /// uniform marginals: the optimum sits at a permutation matrix.
    fn brute_force_ot(a: &[f64], b: &[f64], dim: usize) -> f64 {
        let ar: Vec<&[f64]> = a.chunks_exact(dim).collect();
        let br: Vec<&[f64]> = b.chunks_exact(dim).collect();
        let n = ar.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut best = f64::INFINITY;
        fn recurse(perm: &mut Vec<usize>, k: usize, ar: &[&[f64]], br: &[&[f64]], best: &mut f64) {
            let n = perm.len();
            if k == n {
                let cost: f64 =
                    (0..n).map(|i| sq_dist(ar[i], br[perm[i]])).sum::<f64>() / n as f64;
                if cost < *best {
                    *best = cost;
                }
                return;
            }
            for i in k..n {
                perm.swap(k, i);
                recurse(perm, k + 1, ar, br, best);
                perm.swap(k, i);
            }
        }
        recurse(&mut perm, 0, &ar, &br, &mut best);
        best
    }

    #[test]
    fn sinkhorn_matches_brute_force_lp() {
        let mut rng = stream_rng(9, 0);
        for trial in 0..5 {
            let n = 4 + trial % 3;
            let mut a = vec![0.0; n * 2];
            let mut b = vec![0.0; n * 2];
            fill_standard_normal(&mut rng, &mut a);
            fill_standard_normal(&mut rng, &mut b);
            let exact = brute_force_ot(&a, &b, 2);
            let approx = sinkhorn_w2sq(&a, &b, 2, 1e-3, 5000).unwrap();
            assert!(
                (approx - exact).abs() <= 0.01 * exact.abs().max(1e-6),
                "trial {trial}: sinkhorn {approx} vs LP {exact}"
            );
        }
    }

    #[test]
    fn sinkhorn_cost_decreases_toward_lp_as_epsilon_shrinks() {
        let mut rng = stream_rng(10, 0);
        let n = 6;
        let mut a = vec![0.0; n * 2];
        let mut b = vec![0.0; n * 2];
        fill_standard_normal(&mut rng, &mut a);
        fill_standard_normal(&mut rng, &mut b);
        let exact = brute_force_ot(&a, &b, 2);
        let mut prev = f64::INFINITY;
        for &eps in &[0.5, 0.1, 0.02, 4e-3, 1e-3] {
            let cost = sinkhorn_w2sq(&a, &b, 2, eps, 20_000).unwrap();
            assert!(cost <= prev + 1e-9, "eps {eps}: {cost} > {prev}");
            prev = cost;
        }
        assert!((prev - exact).abs() <= 0.01 * exact, "limit {prev} vs LP {exact}");
    }

    #[test]
    fn sinkhorn_gaussian_mean_shift_matches_bures() {
        let mut rng = stream_rng(11, 0);
        let n = 2000;
        let mut a = vec![0.0; n * 2];
        let mut b = vec![0.0; n * 2];
        fill_standard_normal(&mut rng, &mut a);
        fill_standard_normal(&mut rng, &mut b);
        for chunk in b.chunks_exact_mut(2) {
            chunk[0] += 2.0;
        }
        // Closed form for equal covariances: |mu_a - mu_b|^2 = 4.
        let v = sinkhorn_w2sq(&a, &b, 2, 0.01, 200).unwrap();
        assert!((v - 4.0).abs() / 4.0 < 0.10, "w2sq {v}");
    }

    #[test]
    fn knn_entropy_gaussian_uniform_scaling() {
        let mut rng = stream_rng(12, 0);
        let n = 10_000;
        let mut gauss = vec![0.0; n];
        fill_standard_normal(&mut rng, &mut gauss);
        let h_gauss = knn_entropy(&gauss, 1, 3).unwrap();
        let want = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
        assert!((h_gauss - want).abs() < 0.05, "gaussian {h_gauss} want {want}");

        let unif: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let h_unif = knn_entropy(&unif, 2, 3).unwrap();
        assert!(h_unif.abs() < 0.05, "uniform {h_unif}");

        let scaled: Vec<f64> = gauss.iter().map(|v| v * 10.0).collect();
        let h_scaled = knn_entropy(&scaled, 1, 3).unwrap();
        assert!(
            (h_scaled - h_gauss - 10f64.ln()).abs() < 0.05,
            "scaling: {h_scaled} vs {h_gauss} + ln 10"
        );
    }

    #[test]
    fn knn_entropy_too_few_points() {
        assert!(matches!(
            knn_entropy(&[0.0, 1.0, 2.0], 1, 3),
            Err(MetricsError::TooFewPoints { need: 4, got: 3 })
        ));
    }
}
