//! Coupled Langevin particle dynamics for training the joint Gibbs model.
//!
//! One training iteration advances three systems:
//! per-datum latent pools z_ik one overdamped Langevin step against
//! E(x_i, . ), the persistent joint negative pool (x~_j, z~_j) one step
//! against E, and the parameters one ascent step on the energy contrast
//! (negative-pool mean minus positive-pool mean, both evaluated at the
//! post-step particles). An optional refresh re-draws a fraction of the
//! negative pool from the standard normal base law.
//!
//! Every particle owns a counter-based RNG stream, so all particle updates
//! within an iteration are independent and may run in parallel in any order
//! without changing a single bit of the result. Parameter gradients are
//! reduced over fixed-size index chunks folded in index order, which keeps
//! the ascent step deterministic regardless of worker count.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datasets::Dataset;
use crate::energy::{Energy, TrainableEnergy};
use crate::metrics::knn_entropy;
use crate::rng::{stream_rng, sub_seed, Noise};

/// Entropy estimator order used inside the objective estimate.
const OBJECTIVE_KNN_K: usize = 3;
/// Negative-pool indices per gradient-reduction chunk.
const NEG_GRAD_CHUNK: usize = 64;
/// Minibatch rows per gradient-reduction chunk.
const ROW_GRAD_CHUNK: usize = 16;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("non-finite {what} at index {index}; step size too large?")]
    NonFinite { what: &'static str, index: usize },
    #[error("iteration {iteration}: {source}")]
    Diverged { iteration: usize, source: Box<DynamicsError> },
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("snapshot io: {0}")]
    Io(#[from] std::io::Error),
    #[error("snapshot format: {0}")]
    SnapshotFormat(String),
}

/// Hyperparameters of the training loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Latent (conditional) Langevin step size.
    pub eta_z: f64,
    /// Joint (negative) Langevin step size.
    pub eta_xz: f64,
    /// Parameter ascent learning rate.
    pub alpha: f64,
    /// Iteration count T.
    pub iterations: usize,
    /// Latent particles per datum (M).
    pub latent_particles: usize,
    /// Joint negative-pool size (D).
    pub negative_particles: usize,
    /// Per-iteration probability of a negative-pool refresh.
    pub rho_refresh: f64,
    /// Fraction of negative slots re-drawn when a refresh triggers.
    pub refresh_fraction: f64,
    /// Datum indices visited per iteration (clamped to the dataset size).
    pub minibatch: usize,
    /// Norm cap applied to grad U inside the samplers.
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            eta_z: 1e-3,
            eta_xz: 1e-3,
            alpha: 1e-4,
            iterations: 5000,
            latent_particles: 10,
            negative_particles: 1024,
            rho_refresh: 0.05,
            refresh_fraction: 0.1,
            minibatch: 256,
            clip_norm: 100.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let bad = |msg: &str| Err(DynamicsError::InvalidConfig(msg.into()));
        if !(self.eta_z > 0.0) || !(self.eta_xz > 0.0) {
            return bad("step sizes must be positive");
        }
        if !(self.alpha >= 0.0) {
            return bad("learning rate must be non-negative");
        }
        if self.latent_particles == 0 || self.negative_particles == 0 {
            return bad("particle counts must be positive");
        }
        if !(0.0..=1.0).contains(&self.rho_refresh) {
            return bad("rho_refresh must lie in [0, 1]");
        }
        if !(self.refresh_fraction > 0.0 && self.refresh_fraction <= 1.0) {
            return bad("refresh_fraction must lie in (0, 1]");
        }
        if self.minibatch == 0 {
            return bad("minibatch must be positive");
        }
        if !(self.clip_norm > 0.0) {
            return bad("clip_norm must be positive");
        }
        Ok(())
    }
}

/// Persistent particle pools. Latent row i is bound to datum i for the whole
/// run; the empirical measures are exactly the stored particles.
#[derive(Clone, Debug)]
pub struct ParticleState {
    n: usize,
    m: usize,
    dpool: usize,
    dim_x: usize,
    dim_z: usize,
    /// `latent[i]` holds the M latent particles of datum i, flat (m * dim_z).
    latent: Vec<Vec<f64>>,
    neg_x: Vec<f64>,
    neg_z: Vec<f64>,
    /// One stream per latent particle, row-major.
    latent_rngs: Vec<ChaCha8Rng>,
    /// One stream per negative-pool slot.
    neg_rngs: Vec<ChaCha8Rng>,
    refresh_rng: ChaCha8Rng,
}

impl ParticleState {
    pub fn num_data(&self) -> usize {
        self.n
    }

    pub fn latent_per_datum(&self) -> usize {
        self.m
    }

    pub fn num_negative(&self) -> usize {
        self.dpool
    }

    pub fn dim_x(&self) -> usize {
        self.dim_x
    }

    pub fn dim_z(&self) -> usize {
        self.dim_z
    }

    /// All latent particles of datum i, flat (m * dim_z).
    pub fn latent_row(&self, i: usize) -> &[f64] {
        &self.latent[i]
    }

    pub fn latent_particle(&self, i: usize, k: usize) -> &[f64] {
        &self.latent[i][k * self.dim_z..(k + 1) * self.dim_z]
    }

    pub fn negative_pair(&self, j: usize) -> (&[f64], &[f64]) {
        (
            &self.neg_x[j * self.dim_x..(j + 1) * self.dim_x],
            &self.neg_z[j * self.dim_z..(j + 1) * self.dim_z],
        )
    }

    pub fn negative_x(&self) -> &[f64] {
        &self.neg_x
    }

    pub fn negative_z(&self) -> &[f64] {
        &self.neg_z
    }

    /// Negative pool as a flat (dpool x (dim_x + dim_z)) matrix.
    pub fn joint_pool_matrix(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dpool * (self.dim_x + self.dim_z));
        for j in 0..self.dpool {
            let (x, z) = self.negative_pair(j);
            out.extend_from_slice(x);
            out.extend_from_slice(z);
        }
        out
    }

    /// Mean squared norm over the joint negative pool.
    pub fn negative_second_moment(&self) -> f64 {
        let sq: f64 = self.neg_x.iter().chain(self.neg_z.iter()).map(|v| v * v).sum();
        sq / self.dpool as f64
    }

    /// Writes the binary particle snapshot: magic `LVEBMP1`, then N, M, D, d,
    /// l as little-endian u64, then latent / neg_x / neg_z as little-endian
    /// f64 in row-major order. RNG stream state is not part of the format.
    pub fn save_snapshot<P: AsRef<Path>>(&self, path: P) -> Result<(), DynamicsError> {
        let mut file = fs::File::create(path)?;
        file.write_all(b"LVEBMP1")?;
        for v in [self.n, self.m, self.dpool, self.dim_x, self.dim_z] {
            file.write_all(&(v as u64).to_le_bytes())?;
        }
        let mut write_f64s = |values: &[f64]| -> std::io::Result<()> {
            let mut buf = Vec::with_capacity(values.len() * 8);
            for v in values {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            file.write_all(&buf)
        };
        for row in &self.latent {
            write_f64s(row)?;
        }
        write_f64s(&self.neg_x)?;
        write_f64s(&self.neg_z)?;
        Ok(())
    }

    /// Reads a snapshot written by [`ParticleState::save_snapshot`]. Particle
    /// streams are re-derived from `reseed` (stream state is not stored).
    pub fn load_snapshot<P: AsRef<Path>>(path: P, reseed: u64) -> Result<Self, DynamicsError> {
        let mut file = fs::File::open(path)?;
        let mut magic = [0u8; 7];
        file.read_exact(&mut magic)?;
        if &magic != b"LVEBMP1" {
            return Err(DynamicsError::SnapshotFormat("bad magic".into()));
        }
        let mut header = [0u8; 40];
        file.read_exact(&mut header)?;
        let dims: Vec<usize> = header
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()) as usize)
            .collect();
        let (n, m, dpool, dim_x, dim_z) = (dims[0], dims[1], dims[2], dims[3], dims[4]);
        let mut rest = Vec::new();
        file.read_to_end(&mut rest)?;
        let want = (n * m * dim_z + dpool * (dim_x + dim_z)) * 8;
        if rest.len() != want {
            return Err(DynamicsError::SnapshotFormat(format!(
                "payload is {} bytes, expected {want}",
                rest.len()
            )));
        }
        let mut values = rest.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let mut take = |count: usize| -> Vec<f64> { values.by_ref().take(count).collect() };
        let latent: Vec<Vec<f64>> = (0..n).map(|_| take(m * dim_z)).collect();
        let neg_x = take(dpool * dim_x);
        let neg_z = take(dpool * dim_z);
        let mut state = ParticleState::empty(n, m, dpool, dim_x, dim_z, reseed);
        state.latent = latent;
        state.neg_x = neg_x;
        state.neg_z = neg_z;
        Ok(state)
    }

    fn empty(n: usize, m: usize, dpool: usize, dim_x: usize, dim_z: usize, seed: u64) -> Self {
        let key = sub_seed(seed, "particles", 0);
        let latent_rngs = (0..n * m).map(|s| stream_rng(key, 1 + s as u64)).collect();
        let neg_rngs =
            (0..dpool).map(|j| stream_rng(key, 1 + (n * m + j) as u64)).collect();
        ParticleState {
            n,
            m,
            dpool,
            dim_x,
            dim_z,
            latent: vec![vec![0.0; m * dim_z]; n],
            neg_x: vec![0.0; dpool * dim_x],
            neg_z: vec![0.0; dpool * dim_z],
            latent_rngs,
            neg_rngs,
            refresh_rng: stream_rng(key, 0),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.latent.iter().flatten().chain(self.neg_x.iter()).chain(self.neg_z.iter()).all(|v| v.is_finite())
    }
}

/// One overdamped Langevin update: pos <- pos - eta * drift + sqrt(2 eta) * noise.
#[inline]
pub(crate) fn euler_maruyama(pos: &mut [f64], drift: &[f64], eta: f64, noise: &[f64]) {
    #[cfg(not(feature = "flipped-drift"))]
    let sign = -1.0;
    #[cfg(feature = "flipped-drift")]
    let sign = 1.0;
    let diff = (2.0 * eta).sqrt();
    for ((p, &g), &xi) in pos.iter_mut().zip(drift.iter()).zip(noise.iter()) {
        *p += sign * eta * g + diff * xi;
    }
}

/// Initial pools: every latent particle i.i.d. N(0, I_l), every negative pair
/// i.i.d. N(0, I_d) x N(0, I_l), each drawn from its own stream seeded from
/// `config.seed`.
pub fn init_particles(
    n: usize,
    config: &TrainConfig,
    dim_x: usize,
    dim_z: usize,
) -> ParticleState {
    assert!(n >= 1 && dim_x >= 1 && dim_z >= 1);
    let mut state = ParticleState::empty(
        n,
        config.latent_particles,
        config.negative_particles,
        dim_x,
        dim_z,
        config.seed,
    );
    let m = state.m;
    for i in 0..n {
        for k in 0..m {
            let rng = &mut state.latent_rngs[i * m + k];
            let row = &mut state.latent[i][k * dim_z..(k + 1) * dim_z];
            crate::rng::fill_standard_normal(rng, row);
        }
    }
    for j in 0..state.dpool {
        let rng = &mut state.neg_rngs[j];
        crate::rng::fill_standard_normal(rng, &mut state.neg_x[j * dim_x..(j + 1) * dim_x]);
        crate::rng::fill_standard_normal(rng, &mut state.neg_z[j * dim_z..(j + 1) * dim_z]);
    }
    state
}

/// Advances the M latent particles bound to datum `i` one conditional
/// Langevin step. The U-gradient is clipped at `config.clip_norm` before the
/// envelope term is added.
pub fn latent_step<E: Energy>(
    state: &mut ParticleState,
    model: &E,
    data: &Dataset,
    i: usize,
    config: &TrainConfig,
    noise: Noise,
) -> Result<(), DynamicsError> {
    let dim_z = state.dim_z;
    let m = state.m;
    let x = data.row(i);
    let row = &mut state.latent[i];
    let rngs = &mut state.latent_rngs[i * m..(i + 1) * m];
    latent_row_step(model, x, row, rngs, dim_z, config.eta_z, config.clip_norm, noise)
        .map_err(|index| DynamicsError::NonFinite { what: "latent particle", index: i * m + index })
}

/// Inner row update shared by the public op and the parallel sweep. Returns
/// the offending particle index on divergence.
fn latent_row_step<E: Energy>(
    model: &E,
    x: &[f64],
    row: &mut [f64],
    rngs: &mut [ChaCha8Rng],
    dim_z: usize,
    eta: f64,
    clip_norm: f64,
    noise: Noise,
) -> Result<(), usize> {
    let mut gz = vec![0.0; dim_z];
    let mut xi = vec![0.0; dim_z];
    for (k, rng) in rngs.iter_mut().enumerate() {
        let z = &mut row[k * dim_z..(k + 1) * dim_z];
        noise.fill(rng, &mut xi);
        model.drift_grad_z(x, z, clip_norm, &mut gz);
        euler_maruyama(z, &gz, eta, &xi);
        if z.iter().any(|v| !v.is_finite()) {
            return Err(k);
        }
    }
    Ok(())
}

/// One joint chain step shared by the negative-pool sweep and the fresh
/// samplers: both coordinates move simultaneously, with the gradient
/// evaluated at the pre-step pair.
fn joint_chain_step<E: Energy>(
    model: &E,
    x: &mut [f64],
    z: &mut [f64],
    rng: &mut ChaCha8Rng,
    eta: f64,
    clip_norm: f64,
    noise: Noise,
    scratch: &mut JointScratch,
) -> bool {
    noise.fill(rng, &mut scratch.xi_x);
    noise.fill(rng, &mut scratch.xi_z);
    model.drift_grad_xz(x, z, clip_norm, &mut scratch.gx, &mut scratch.gz);
    euler_maruyama(x, &scratch.gx, eta, &scratch.xi_x);
    euler_maruyama(z, &scratch.gz, eta, &scratch.xi_z);
    x.iter().chain(z.iter()).all(|v| v.is_finite())
}

struct JointScratch {
    gx: Vec<f64>,
    gz: Vec<f64>,
    xi_x: Vec<f64>,
    xi_z: Vec<f64>,
}

impl JointScratch {
    fn new(dim_x: usize, dim_z: usize) -> Self {
        JointScratch {
            gx: vec![0.0; dim_x],
            gz: vec![0.0; dim_z],
            xi_x: vec![0.0; dim_x],
            xi_z: vec![0.0; dim_z],
        }
    }
}

/// Advances the whole negative pool one joint Langevin step (in parallel;
/// slots own their streams).
pub fn joint_step<E: Energy>(
    state: &mut ParticleState,
    model: &E,
    config: &TrainConfig,
    noise: Noise,
) -> Result<(), DynamicsError> {
    let (dim_x, dim_z) = (state.dim_x, state.dim_z);
    let eta = config.eta_xz;
    let clip = config.clip_norm;
    state
        .neg_x
        .par_chunks_mut(dim_x)
        .zip(state.neg_z.par_chunks_mut(dim_z))
        .zip(state.neg_rngs.par_iter_mut())
        .enumerate()
        .try_for_each(|(j, ((x, z), rng))| {
            let mut scratch = JointScratch::new(dim_x, dim_z);
            if joint_chain_step(model, x, z, rng, eta, clip, noise, &mut scratch) {
                Ok(())
            } else {
                Err(DynamicsError::NonFinite { what: "negative particle", index: j })
            }
        })
}

/// Parallel latent sweep over the rows selected by `mask`.
fn latent_sweep<E: Energy>(
    state: &mut ParticleState,
    model: &E,
    data: &Dataset,
    mask: &[bool],
    config: &TrainConfig,
    noise: Noise,
) -> Result<(), DynamicsError> {
    let dim_z = state.dim_z;
    let m = state.m;
    let eta = config.eta_z;
    let clip = config.clip_norm;
    state
        .latent
        .par_iter_mut()
        .zip(state.latent_rngs.par_chunks_mut(m))
        .enumerate()
        .filter(|(i, _)| mask[*i])
        .try_for_each(|(i, (row, rngs))| {
            latent_row_step(model, data.row(i), row, rngs, dim_z, eta, clip, noise).map_err(
                |index| DynamicsError::NonFinite { what: "latent particle", index: i * m + index },
            )
        })
}

/// Parameter ascent on the energy contrast:
/// theta += alpha [ (1/D) sum_j grad E(neg_j) - (1/(B M)) sum_{i in batch} sum_k grad E(x_i, z_ik) ].
///
/// Particles must already sit at t+1. Gradients are accumulated over fixed
/// index chunks and folded in chunk order (negatives first), so the update is
/// deterministic for any worker count, and an identical positive/negative
/// multiset cancels exactly. Returns the mean positive and negative energies
/// measured during the same passes.
pub fn param_ascent<E: TrainableEnergy>(
    model: &mut E,
    state: &ParticleState,
    data: &Dataset,
    batch: &[usize],
    config: &TrainConfig,
) -> Result<(f64, f64), DynamicsError> {
    let neg_scale = 1.0 / state.dpool as f64;
    let pos_scale = -1.0 / (batch.len() * state.m) as f64;
    let dim_z = state.dim_z;

    let neg_indices: Vec<usize> = (0..state.dpool).collect();
    let neg_parts: Vec<(E::ParamGrad, f64)> = neg_indices
        .par_chunks(NEG_GRAD_CHUNK)
        .map(|chunk| {
            let mut acc = model.zero_param_grad();
            let mut energy_sum = 0.0;
            for &j in chunk {
                let (x, z) = state.negative_pair(j);
                let u = model.accum_param_grad(x, z, neg_scale, &mut acc);
                energy_sum += u
                    + 0.5 * model.lambda_x() * x.iter().map(|v| v * v).sum::<f64>()
                    + 0.5 * model.lambda_z() * z.iter().map(|v| v * v).sum::<f64>();
            }
            (acc, energy_sum)
        })
        .collect();

    let pos_parts: Vec<(E::ParamGrad, f64)> = batch
        .par_chunks(ROW_GRAD_CHUNK)
        .map(|rows| {
            let mut acc = model.zero_param_grad();
            let mut energy_sum = 0.0;
            for &i in rows {
                let x = data.row(i);
                for k in 0..state.m {
                    let z = &state.latent[i][k * dim_z..(k + 1) * dim_z];
                    let u = model.accum_param_grad(x, z, pos_scale, &mut acc);
                    energy_sum += u
                        + 0.5 * model.lambda_x() * x.iter().map(|v| v * v).sum::<f64>()
                        + 0.5 * model.lambda_z() * z.iter().map(|v| v * v).sum::<f64>();
                }
            }
            (acc, energy_sum)
        })
        .collect();

    let mut total = model.zero_param_grad();
    let mut neg_energy = 0.0;
    for (part, e) in &neg_parts {
        E::merge_param_grad(&mut total, part);
        neg_energy += e;
    }
    let mut pos_energy = 0.0;
    for (part, e) in &pos_parts {
        E::merge_param_grad(&mut total, part);
        pos_energy += e;
    }
    if !model.ascend(&total, config.alpha) {
        return Err(DynamicsError::NonFinite { what: "parameter", index: 0 });
    }
    Ok((
        pos_energy / (batch.len() * state.m) as f64,
        neg_energy / state.dpool as f64,
    ))
}

/// With probability `rho_refresh`, re-draws a uniformly chosen
/// `refresh_fraction` of negative slots from N(0, I_d) x N(0, I_l). Latent
/// pools are never refreshed. Returns whether a refresh triggered.
pub fn refresh_pool(state: &mut ParticleState, config: &TrainConfig) -> bool {
    let u: f64 = state.refresh_rng.gen_range(0.0..1.0);
    if u >= config.rho_refresh {
        return false;
    }
    let count = ((config.refresh_fraction * state.dpool as f64).round() as usize)
        .clamp(1, state.dpool);
    let mut idx: Vec<usize> = (0..state.dpool).collect();
    for i in 0..count {
        let j = state.refresh_rng.gen_range(i..state.dpool);
        idx.swap(i, j);
    }
    let mut chosen = idx[..count].to_vec();
    chosen.sort_unstable();
    let (dim_x, dim_z) = (state.dim_x, state.dim_z);
    for j in chosen {
        crate::rng::fill_standard_normal(
            &mut state.refresh_rng,
            &mut state.neg_x[j * dim_x..(j + 1) * dim_x],
        );
        crate::rng::fill_standard_normal(
            &mut state.refresh_rng,
            &mut state.neg_z[j * dim_z..(j + 1) * dim_z],
        );
    }
    true
}

/// Particle estimate of the saddle objective
/// F = E_neg[E] - H(q~) - (1/N) sum_i (E_i[E] - H(q_i)),
/// with entropies from the k-NN estimator. When a pool is too small for the
/// estimator, the entropy terms are dropped and the value degrades to the
/// bare energy contrast, flagged via `entropy_ok`.
#[derive(Clone, Copy, Debug)]
pub struct Objective {
    pub value: f64,
    pub pos_energy_mean: f64,
    pub neg_energy_mean: f64,
    pub entropy_ok: bool,
}

pub fn estimate_objective<E: Energy>(
    state: &ParticleState,
    model: &E,
    data: &Dataset,
) -> Objective {
    let rows: Vec<usize> = (0..state.n).collect();
    objective_over_rows(state, model, data, &rows, None, None)
}

/// Shared objective computation. `pos_energy` / `neg_energy` skip the energy
/// passes when the caller already measured them (the training loop reuses the
/// values from `param_ascent`).
fn objective_over_rows<E: Energy>(
    state: &ParticleState,
    model: &E,
    data: &Dataset,
    rows: &[usize],
    pos_energy: Option<f64>,
    neg_energy: Option<f64>,
) -> Objective {
    let dim_z = state.dim_z;
    let pos_energy_mean = pos_energy.unwrap_or_else(|| {
        rows.par_iter()
            .map(|&i| {
                let x = data.row(i);
                state.latent[i]
                    .chunks_exact(dim_z)
                    .map(|z| model.energy_value(x, z))
                    .sum::<f64>()
            })
            .sum::<f64>()
            / (rows.len() * state.m) as f64
    });
    let neg_energy_mean = neg_energy.unwrap_or_else(|| {
        (0..state.dpool)
            .into_par_iter()
            .map(|j| {
                let (x, z) = state.negative_pair(j);
                model.energy_value(x, z)
            })
            .sum::<f64>()
            / state.dpool as f64
    });

    let entropies_ok = state.m >= OBJECTIVE_KNN_K + 1 && state.dpool >= OBJECTIVE_KNN_K + 1;
    if !entropies_ok {
        return Objective {
            value: neg_energy_mean - pos_energy_mean,
            pos_energy_mean,
            neg_energy_mean,
            entropy_ok: false,
        };
    }
    let row_entropies: Vec<Option<f64>> = rows
        .par_iter()
        .map(|&i| knn_entropy(&state.latent[i], dim_z, OBJECTIVE_KNN_K).ok())
        .collect();
    let pos_entropy: Option<f64> = row_entropies
        .into_iter()
        .try_fold(0.0, |acc, h| h.map(|v| acc + v));
    let neg_entropy =
        knn_entropy(&state.joint_pool_matrix(), state.dim_x + dim_z, OBJECTIVE_KNN_K).ok();
    match (pos_entropy, neg_entropy) {
        (Some(hp), Some(hn)) if hp.is_finite() && hn.is_finite() => {
            let hp_mean = hp / rows.len() as f64;
            Objective {
                value: (neg_energy_mean - hn) - (pos_energy_mean - hp_mean),
                pos_energy_mean,
                neg_energy_mean,
                entropy_ok: true,
            }
        }
        _ => Objective {
            value: neg_energy_mean - pos_energy_mean,
            pos_energy_mean,
            neg_energy_mean,
            entropy_ok: false,
        },
    }
}

/// One line of training history per completed iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub step: usize,
    /// The minimized training objective: negative particle ELBO, i.e. -F of
    /// the saddle objective. Decreases toward a plateau as the fit improves.
    pub objective: f64,
    pub pos_energy_mean: f64,
    pub neg_energy_mean: f64,
    pub neg_pool_second_moment: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub entries: Vec<HistoryEntry>,
}

impl TrainHistory {
    /// CSV export with the fixed header
    /// `step,objective,pos_energy_mean,neg_energy_mean,neg_pool_second_moment`.
    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<(), DynamicsError> {
        let mut out =
            String::from("step,objective,pos_energy_mean,neg_energy_mean,neg_pool_second_moment\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e.step, e.objective, e.pos_energy_mean, e.neg_energy_mean, e.neg_pool_second_moment
            ));
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn read_csv<P: AsRef<Path>>(path: P) -> Result<Self, DynamicsError> {
        let text = fs::read_to_string(path)?;
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if lineno == 0 || line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(DynamicsError::SnapshotFormat(format!(
                    "history line {} has {} fields",
                    lineno + 1,
                    fields.len()
                )));
            }
            let parse = |s: &str| -> Result<f64, DynamicsError> {
                s.trim().parse().map_err(|_| {
                    DynamicsError::SnapshotFormat(format!("bad number {s:?} on line {}", lineno + 1))
                })
            };
            entries.push(HistoryEntry {
                step: parse(fields[0])? as usize,
                objective: parse(fields[1])?,
                pos_energy_mean: parse(fields[2])?,
                neg_energy_mean: parse(fields[3])?,
                neg_pool_second_moment: parse(fields[4])?,
            });
        }
        Ok(TrainHistory { entries })
    }

    /// Trailing moving average of the objective with the given window.
    pub fn objective_moving_average(&self, window: usize) -> Vec<f64> {
        let vals: Vec<f64> = self.entries.iter().map(|e| e.objective).collect();
        moving_average(&vals, window)
    }
}

pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    assert!(window >= 1);
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (i, v) in values.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= values[i - window];
        }
        let w = (i + 1).min(window);
        out.push(sum / w as f64);
    }
    out
}

pub struct TrainOutput<E> {
    pub model: E,
    pub state: ParticleState,
    pub history: TrainHistory,
}

/// Runs the full training loop: T iterations of latent sweep, joint sweep,
/// parameter ascent on post-step particles, and optional pool refresh.
/// Deterministic given `config.seed`, including under parallel execution.
/// `latent_dim` is the dimension of z (the checkpoint format does not record
/// the d/l split, so the caller supplies it).
pub fn train<E: TrainableEnergy + Clone>(
    data: &Dataset,
    config: &TrainConfig,
    model0: &E,
    latent_dim: usize,
) -> Result<TrainOutput<E>, DynamicsError> {
    config.validate()?;
    if data.is_empty() {
        return Err(DynamicsError::InvalidConfig("dataset is empty".into()));
    }
    if latent_dim == 0 {
        return Err(DynamicsError::InvalidConfig("latent_dim must be positive".into()));
    }
    let n = data.len();
    let batch_size = config.minibatch.min(n);
    let mut model = model0.clone();
    let mut state = init_particles(n, config, data.dim(), latent_dim);
    let mut batch_rng = stream_rng(sub_seed(config.seed, "minibatch", 0), 0);
    let mut history = TrainHistory::default();

    let mut mask = vec![false; n];
    let mut order: Vec<usize> = (0..n).collect();
    for t in 0..config.iterations {
        let at = |source: DynamicsError| DynamicsError::Diverged { iteration: t, source: Box::new(source) };
        // Sample the minibatch without replacement, ascending for a stable
        // reduction order.
        for i in 0..batch_size {
            let j = batch_rng.gen_range(i..n);
            order.swap(i, j);
        }
        let mut batch: Vec<usize> = order[..batch_size].to_vec();
        batch.sort_unstable();
        mask.iter_mut().for_each(|b| *b = false);
        for &i in &batch {
            mask[i] = true;
        }

        latent_sweep(&mut state, &model, data, &mask, config, Noise::Gaussian).map_err(&at)?;
        joint_step(&mut state, &model, config, Noise::Gaussian).map_err(&at)?;
        let (pos_e, neg_e) = param_ascent(&mut model, &state, data, &batch, config).map_err(&at)?;

        let objective = objective_over_rows(&state, &model, data, &batch, Some(pos_e), Some(neg_e));
        history.entries.push(HistoryEntry {
            step: t,
            // Recorded as a loss: the negated saddle objective, which is the
            // quantity that decreases as the likelihood improves.
            objective: -objective.value,
            pos_energy_mean: pos_e,
            neg_energy_mean: neg_e,
            neg_pool_second_moment: state.negative_second_moment(),
        });

        refresh_pool(&mut state, config);
    }
    Ok(TrainOutput { model, state, history })
}

/// Settings for [`sample_state`].
#[derive(Clone, Debug)]
pub struct SampleConfig {
    pub latent_particles: usize,
    pub pool_size: usize,
    pub latent_steps: usize,
    pub joint_steps: usize,
    pub eta_z: f64,
    pub eta_xz: f64,
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            latent_particles: 10,
            pool_size: 1024,
            latent_steps: 500,
            joint_steps: 3000,
            eta_z: 1e-3,
            eta_xz: 1e-3,
            clip_norm: 100.0,
            seed: 0,
        }
    }
}

/// Fresh pools equilibrated against a fixed model, used for evaluation:
/// latent chains for every datum (full-batch sweeps) and a joint pool of
/// `pool_size` chains, both started from the standard normal base law.
pub fn sample_state<E: Energy>(
    model: &E,
    data: &Dataset,
    latent_dim: usize,
    cfg: &SampleConfig,
) -> Result<ParticleState, DynamicsError> {
    let tc = TrainConfig {
        eta_z: cfg.eta_z,
        eta_xz: cfg.eta_xz,
        latent_particles: cfg.latent_particles,
        negative_particles: cfg.pool_size,
        clip_norm: cfg.clip_norm,
        seed: cfg.seed,
        ..TrainConfig::default()
    };
    let mut state = init_particles(data.len(), &tc, data.dim(), latent_dim);
    let mask = vec![true; data.len()];
    for _ in 0..cfg.latent_steps {
        latent_sweep(&mut state, model, data, &mask, &tc, Noise::Gaussian)?;
    }
    for _ in 0..cfg.joint_steps {
        joint_step(&mut state, model, &tc, Noise::Gaussian)?;
    }
    Ok(state)
}
