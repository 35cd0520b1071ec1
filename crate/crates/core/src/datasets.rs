//! Synthetic geometric datasets and UCI table ingestion.
//!
//! The three synthetic families share one sampling core so the degenerate
//! cases line up exactly: concentric rings are harmonic-modulated rings with
//! all harmonic coefficients zero, drawn from the same random stream in the
//! same order. Generators are pure functions of their parameter record, so a
//! provenance sidecar (generator name + parameters + seed) regenerates any
//! dataset bit-identically.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{fill_standard_normal, stream_rng};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("format error at {path} line {line}: {msg}")]
    Format { path: String, line: usize, msg: String },
    #[error("{name} expects {expected} columns, found {got}")]
    ColumnCount { name: String, expected: usize, got: usize },
    #[error("requested {requested} rows but only {available} available")]
    Bounds { requested: usize, available: usize },
    #[error("provenance parse: {0}")]
    Provenance(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Full parameter record of a generator run; serialized into provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticParams {
    /// Ring/sphere radii, one radial class per entry.
    pub radii: Vec<f64>,
    pub sigma_r: f64,
    pub sigma_x: f64,
    /// Harmonic cosine coefficients a_1..a_K (HMR only; empty otherwise).
    #[serde(default)]
    pub harmonics_a: Vec<f64>,
    /// Harmonic sine coefficients b_1..b_K.
    #[serde(default)]
    pub harmonics_b: Vec<f64>,
    pub n: usize,
    pub seed: u64,
}

impl SyntheticParams {
    pub fn rings(radii: Vec<f64>, sigma_r: f64, sigma_x: f64, n: usize, seed: u64) -> Self {
        SyntheticParams {
            radii,
            sigma_r,
            sigma_x,
            harmonics_a: Vec::new(),
            harmonics_b: Vec::new(),
            n,
            seed,
        }
    }

    fn validate(&self, need_harmonics: bool) -> Result<(), DataError> {
        if self.radii.is_empty() || self.radii.iter().any(|&r| !(r > 0.0)) {
            return Err(DataError::InvalidParams("radii must be non-empty and positive".into()));
        }
        if self.sigma_r < 0.0 || self.sigma_x < 0.0 {
            return Err(DataError::InvalidParams("noise scales must be non-negative".into()));
        }
        if self.harmonics_a.len() != self.harmonics_b.len() {
            return Err(DataError::InvalidParams("harmonic coefficient lists must match".into()));
        }
        if need_harmonics && self.harmonics_a.is_empty() {
            return Err(DataError::InvalidParams("HMR requires at least one harmonic".into()));
        }
        if self.n == 0 {
            return Err(DataError::InvalidParams("n must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub generator: String,
    pub params: serde_json::Value,
    pub split: Split,
    pub n: usize,
    pub d: usize,
    pub has_labels: bool,
}

/// In-memory dataset: row-major observations plus optional radial-class
/// labels. Labels are carried for visualization and export only; training
/// never sees them.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    x: Vec<f64>,
    n: usize,
    d: usize,
    pub labels: Option<Vec<u32>>,
    pub split: Split,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn from_rows(
        x: Vec<f64>,
        d: usize,
        labels: Option<Vec<u32>>,
        split: Split,
        provenance: Provenance,
    ) -> Self {
        assert!(d > 0 && x.len() % d == 0, "row data must be a multiple of d");
        let n = x.len() / d;
        if let Some(l) = &labels {
            assert_eq!(l.len(), n);
        }
        Dataset { x, n, d, labels, split, provenance }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.x.chunks_exact(self.d)
    }

    pub fn raw(&self) -> &[f64] {
        &self.x
    }

    /// Writes the dataset as CSV (features, optional trailing integer label)
    /// plus a `<stem>.provenance.json` sidecar. Floats use shortest
    /// round-trip decimal form, so identical datasets produce identical bytes.
    pub fn save_csv<P: AsRef<Path>>(&self, path: P) -> Result<(), DataError> {
        let path = path.as_ref();
        let mut out = String::new();
        for i in 0..self.n {
            let mut first = true;
            for v in self.row(i) {
                if !first {
                    out.push(',');
                }
                let _ = write!(out, "{v}");
                first = false;
            }
            if let Some(labels) = &self.labels {
                let _ = write!(out, ",{}", labels[i]);
            }
            out.push('\n');
        }
        fs::write(path, out)?;
        fs::write(provenance_path(path), serde_json::to_string_pretty(&self.provenance)?)?;
        Ok(())
    }

    /// Loads a dataset written by [`Dataset::save_csv`]. The sidecar tells
    /// whether a label column is present; without a sidecar every column is
    /// treated as a feature.
    pub fn load_csv<P: AsRef<Path>>(path: P) -> Result<Self, DataError> {
        let path = path.as_ref();
        let sidecar = provenance_path(path);
        let provenance: Option<Provenance> = if sidecar.exists() {
            Some(serde_json::from_str(&fs::read_to_string(&sidecar)?)?)
        } else {
            None
        };
        let has_labels = provenance.as_ref().map(|p| p.has_labels).unwrap_or(false);
        let text = fs::read_to_string(path)?;
        let mut x = Vec::new();
        let mut labels = if has_labels { Some(Vec::new()) } else { None };
        let mut width = None;
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            let w = *width.get_or_insert(fields.len());
            if fields.len() != w {
                return Err(DataError::Format {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    msg: format!("expected {w} columns, found {}", fields.len()),
                });
            }
            let feat_cols = if has_labels { w - 1 } else { w };
            for f in &fields[..feat_cols] {
                let v: f64 = f.trim().parse().map_err(|_| DataError::Format {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    msg: format!("bad float {f:?}"),
                })?;
                x.push(v);
            }
            if let Some(l) = labels.as_mut() {
                let v: u32 = fields[w - 1].trim().parse().map_err(|_| DataError::Format {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    msg: format!("bad label {:?}", fields[w - 1]),
                })?;
                l.push(v);
            }
        }
        let d = width.ok_or_else(|| DataError::Format {
            path: path.display().to_string(),
            line: 0,
            msg: "empty file".into(),
        })? - usize::from(has_labels);
        let n = x.len() / d;
        let provenance = provenance.unwrap_or(Provenance {
            generator: "external".into(),
            params: serde_json::Value::Null,
            split: Split::Train,
            n,
            d,
            has_labels,
        });
        let split = provenance.split;
        Ok(Dataset::from_rows(x, d, labels, split, provenance))
    }

    /// Splits off the first `round(n * fraction)` rows as train and the rest
    /// as test, preserving generation order (rows are already i.i.d.).
    pub fn split_train_test(&self, train_fraction: f64) -> (Dataset, Dataset) {
        assert!((0.0..=1.0).contains(&train_fraction));
        let n_train = ((self.n as f64) * train_fraction).round() as usize;
        let take = |range: std::ops::Range<usize>, split: Split| {
            let x = self.x[range.start * self.d..range.end * self.d].to_vec();
            let labels = self.labels.as_ref().map(|l| l[range.clone()].to_vec());
            let mut provenance = self.provenance.clone();
            provenance.split = split;
            provenance.n = range.end - range.start;
            Dataset::from_rows(x, self.d, labels, split, provenance)
        };
        (take(0..n_train, Split::Train), take(n_train..self.n, Split::Test))
    }
}

fn provenance_path(path: &Path) -> std::path::PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset");
    path.with_file_name(format!("{stem}.provenance.json"))
}

/// Radius of the harmonic-modulated ring at angle `phi`:
/// r(phi) = R_c + sum_k [a_k cos(k phi) + b_k sin(k phi)].
pub fn hmr_radius(params: &SyntheticParams, base_radius: f64, phi: f64) -> f64 {
    let mut r = base_radius;
    for (k, (&a, &b)) in params.harmonics_a.iter().zip(params.harmonics_b.iter()).enumerate() {
        let kf = (k + 1) as f64;
        r += a * (kf * phi).cos() + b * (kf * phi).sin();
    }
    r
}

/// One modulated-ring point at fixed angle and noise draws. Exposed so tests
/// can pin phi and the noise directly.
pub fn hmr_point(
    params: &SyntheticParams,
    base_radius: f64,
    phi: f64,
    eps_r: f64,
    eps_x: [f64; 2],
) -> [f64; 2] {
    let r = hmr_radius(params, base_radius, phi) + eps_r;
    [r * phi.cos() + eps_x[0], r * phi.sin() + eps_x[1]]
}

/// Shared 2D ring sampler. Draw order per point: class index, phi, eps_r,
/// eps_x. Both ring families use this exact sequence, so LCR-2D and HMR-2D
/// with zero harmonics are bit-identical under a shared seed.
fn gen_rings_2d(params: &SyntheticParams, generator: &str) -> Result<Dataset, DataError> {
    let mut rng = stream_rng(params.seed, 0);
    let mut x = Vec::with_capacity(params.n * 2);
    let mut labels = Vec::with_capacity(params.n);
    for _ in 0..params.n {
        let class = rng.gen_range(0..params.radii.len());
        let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let mut eps = [0.0; 3];
        fill_standard_normal(&mut rng, &mut eps);
        let eps_r = params.sigma_r * eps[0];
        let eps_x = [params.sigma_x * eps[1], params.sigma_x * eps[2]];
        let p = hmr_point(params, params.radii[class], phi, eps_r, eps_x);
        x.extend_from_slice(&p);
        labels.push(class as u32);
    }
    let provenance = Provenance {
        generator: generator.to_string(),
        params: serde_json::to_value(params)?,
        split: Split::Train,
        n: params.n,
        d: 2,
        has_labels: true,
    };
    Ok(Dataset::from_rows(x, 2, Some(labels), Split::Train, provenance))
}

/// 2D concentric rings: r = R_c + eps_r, x = r [cos phi, sin phi] + eps_x.
pub fn gen_lcr2d(params: &SyntheticParams) -> Result<Dataset, DataError> {
    params.validate(false)?;
    if !params.harmonics_a.is_empty() {
        // Harmonics belong to HMR; rings ignore them only if absent.
        return Err(DataError::InvalidParams("LCR-2D does not take harmonics".into()));
    }
    gen_rings_2d(params, "lcr2d")
}

/// 2D harmonic-modulated rings: radius additionally modulated by a truncated
/// Fourier series in phi.
pub fn gen_hmr2d(params: &SyntheticParams) -> Result<Dataset, DataError> {
    params.validate(true)?;
    gen_rings_2d(params, "hmr2d")
}

/// 3D concentric spheres with exactly uniform directions: u ~ Unif[-1, 1],
/// theta = arccos u, phi ~ Unif[0, 2pi).
pub fn gen_lcs3d(params: &SyntheticParams) -> Result<Dataset, DataError> {
    params.validate(false)?;
    let mut rng = stream_rng(params.seed, 0);
    let mut x = Vec::with_capacity(params.n * 3);
    let mut labels = Vec::with_capacity(params.n);
    for _ in 0..params.n {
        let class = rng.gen_range(0..params.radii.len());
        let u: f64 = rng.gen_range(-1.0..=1.0);
        let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let mut eps = [0.0; 4];
        fill_standard_normal(&mut rng, &mut eps);
        let r = params.radii[class] + params.sigma_r * eps[0];
        let theta = u.acos();
        let (st, ct) = (theta.sin(), theta.cos());
        x.push(r * st * phi.cos() + params.sigma_x * eps[1]);
        x.push(r * st * phi.sin() + params.sigma_x * eps[2]);
        x.push(r * ct + params.sigma_x * eps[3]);
        labels.push(class as u32);
    }
    let provenance = Provenance {
        generator: "lcs3d".to_string(),
        params: serde_json::to_value(params)?,
        split: Split::Train,
        n: params.n,
        d: 3,
        has_labels: true,
    };
    Ok(Dataset::from_rows(x, 3, Some(labels), Split::Train, provenance))
}

/// Which UCI table is being ingested; fixes the expected column count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UciName {
    Power,
    Miniboone,
}

impl UciName {
    pub fn expected_dim(self) -> usize {
        match self {
            UciName::Power => 6,
            UciName::Miniboone => 43,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            UciName::Power => "power",
            UciName::Miniboone => "miniboone",
        }
    }
}

/// Reads a headerless CSV of floats, enforcing a fixed column count.
fn read_float_table(path: &Path, name: UciName) -> Result<Vec<Vec<f64>>, DataError> {
    let text = fs::read_to_string(path)?;
    let expected = name.expected_dim();
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::with_capacity(expected);
        for f in line.split(',') {
            let v: f64 = f.trim().parse().map_err(|_| DataError::Format {
                path: path.display().to_string(),
                line: lineno + 1,
                msg: format!("bad float {f:?}"),
            })?;
            row.push(v);
        }
        if row.len() != expected {
            return Err(DataError::ColumnCount {
                name: name.as_str().into(),
                expected,
                got: row.len(),
            });
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Uniform subsample of `k` indices out of `n`, without replacement, in
/// ascending order (partial Fisher-Yates, then sort).
fn subsample_indices(n: usize, k: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.gen_range(i..n);
        idx.swap(i, j);
    }
    let mut chosen = idx[..k].to_vec();
    chosen.sort_unstable();
    chosen
}

/// Ingests the preprocessed UCI tables: expects `<name>_train.csv` and
/// `<name>_test.csv` under `dir`, each a headerless CSV of floats. Draws a
/// uniform subsample without replacement (train pool then test split,
/// deterministic per seed) and standardizes every column to zero mean / unit
/// variance using the train subsample statistics only. Input files are never
/// modified.
pub fn load_uci<P: AsRef<Path>>(
    dir: P,
    name: UciName,
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> Result<(Dataset, Dataset), DataError> {
    let dir = dir.as_ref();
    let train_path = dir.join(format!("{}_train.csv", name.as_str()));
    let test_path = dir.join(format!("{}_test.csv", name.as_str()));
    let train_pool = read_float_table(&train_path, name)?;
    let test_pool = read_float_table(&test_path, name)?;
    if train_pool.len() < n_train {
        return Err(DataError::Bounds { requested: n_train, available: train_pool.len() });
    }
    if test_pool.len() < n_test {
        return Err(DataError::Bounds { requested: n_test, available: test_pool.len() });
    }
    let d = name.expected_dim();
    let mut rng = stream_rng(seed, 0);
    let train_idx = subsample_indices(train_pool.len(), n_train, &mut rng);
    let test_idx = subsample_indices(test_pool.len(), n_test, &mut rng);

    let mut train: Vec<f64> = Vec::with_capacity(n_train * d);
    for &i in &train_idx {
        train.extend_from_slice(&train_pool[i]);
    }
    let mut test: Vec<f64> = Vec::with_capacity(n_test * d);
    for &i in &test_idx {
        test.extend_from_slice(&test_pool[i]);
    }

    // Column statistics from the train subsample only.
    let mut mean = vec![0.0; d];
    for row in train.chunks_exact(d) {
        for (m, &v) in mean.iter_mut().zip(row.iter()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n_train as f64);
    let mut var = vec![0.0; d];
    for row in train.chunks_exact(d) {
        for ((s, &v), &m) in var.iter_mut().zip(row.iter()).zip(mean.iter()) {
            *s += (v - m) * (v - m);
        }
    }
    var.iter_mut().for_each(|s| *s /= n_train as f64);
    let std: Vec<f64> = var.iter().map(|&v| if v > 0.0 { v.sqrt() } else { 1.0 }).collect();
    let standardize = |data: &mut [f64]| {
        for row in data.chunks_exact_mut(d) {
            for ((v, &m), &s) in row.iter_mut().zip(mean.iter()).zip(std.iter()) {
                *v = (*v - m) / s;
            }
        }
    };
    standardize(&mut train);
    standardize(&mut test);

    let params = serde_json::json!({
        "name": name.as_str(),
        "n_train": n_train,
        "n_test": n_test,
        "seed": seed,
    });
    let make = |x: Vec<f64>, split: Split, n: usize| {
        let provenance = Provenance {
            generator: format!("uci-{}", name.as_str()),
            params: params.clone(),
            split,
            n,
            d,
            has_labels: false,
        };
        Dataset::from_rows(x, d, None, split, provenance)
    };
    Ok((make(train, Split::Train, n_train), make(test, Split::Test, n_test)))
}
