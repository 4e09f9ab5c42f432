//! Route-feature regression of EV-mode SOC consumption.
//!
//! A window of the upcoming speed trace is summarized by seven features and
//! mapped to the SOC (percentage points) a pure-electric drive over that
//! window would consume. The model is a one-hidden-layer tanh network trained
//! by full-batch gradient descent.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cycle::{self, DrivingCycle, DEFAULT_STOP_THRESHOLD};

pub const N_FEATURES: usize = 7;
/// Shortest window features are defined on, s.
pub const MIN_WINDOW_S: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredictorError {
    #[error("window of {0} s is shorter than {MIN_WINDOW_S} s")]
    WindowTooShort(f64),
    #[error("need at least {needed} training rows, have {have}")]
    DatasetTooSmall { have: usize, needed: usize },
    #[error("labels have zero variance")]
    ZeroVariance,
    #[error("horizon must be positive, got {0}")]
    BadHorizon(f64),
    #[error("label oracle failed: {0}")]
    Oracle(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    /// km/h
    pub avg_speed: f64,
    /// km/h
    pub max_speed: f64,
    /// km/h
    pub speed_std: f64,
    /// m/s²
    pub accel_rms: f64,
    pub stop_fraction: f64,
    /// km
    pub distance: f64,
    /// %
    pub mean_grade: f64,
}

impl FeatureVector {
    pub fn to_array(&self) -> [f64; N_FEATURES] {
        [
            self.avg_speed,
            self.max_speed,
            self.speed_std,
            self.accel_rms,
            self.stop_fraction,
            self.distance,
            self.mean_grade,
        ]
    }
}

/// Summarizes a cycle window.
pub fn extract_features(window: &DrivingCycle) -> Result<FeatureVector, PredictorError> {
    let duration = window.duration();
    if duration < MIN_WINDOW_S {
        return Err(PredictorError::WindowTooShort(duration));
    }
    let st = cycle::stats(window, DEFAULT_STOP_THRESHOLD);
    let s = window.samples();
    let n = s.len() as f64;
    let mean_v = s.iter().map(|p| p.v).sum::<f64>() / n;
    let var_v = s.iter().map(|p| (p.v - mean_v).powi(2)).sum::<f64>() / n;
    let (mut acc2, mut t_acc) = (0.0, 0.0);
    for w in s.windows(2) {
        let dt = w[1].t - w[0].t;
        let a = (w[1].v - w[0].v) / 3.6 / dt;
        acc2 += a * a * dt;
        t_acc += dt;
    }
    Ok(FeatureVector {
        avg_speed: st.avg_speed,
        max_speed: st.max_speed,
        speed_std: var_v.sqrt(),
        accel_rms: (acc2 / t_acc).sqrt(),
        stop_fraction: (st.stop_time / st.total_time).clamp(0.0, 1.0),
        distance: st.total_distance / 1000.0,
        mean_grade: s.iter().map(|p| p.grade).sum::<f64>() / n,
    })
}

/// Per-feature affine normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: [f64; N_FEATURES],
    pub std: [f64; N_FEATURES],
    pub label_mean: f64,
    pub label_std: f64,
}

impl Normalization {
    /// Statistics of the given rows; constant columns get unit scale.
    pub fn fit(x: &[[f64; N_FEATURES]], y: &[f64]) -> Self {
        let n = x.len().max(1) as f64;
        let mut mean = [0.0; N_FEATURES];
        let mut std = [0.0; N_FEATURES];
        for row in x {
            for j in 0..N_FEATURES {
                mean[j] += row[j] / n;
            }
        }
        for row in x {
            for j in 0..N_FEATURES {
                std[j] += (row[j] - mean[j]).powi(2) / n;
            }
        }
        for s in &mut std {
            *s = if *s > 1e-24 { s.sqrt() } else { 1.0 };
        }
        let label_mean = y.iter().sum::<f64>() / n;
        let lv = y.iter().map(|v| (v - label_mean).powi(2)).sum::<f64>() / n;
        let label_std = if lv > 1e-24 { lv.sqrt() } else { 1.0 };
        Self { mean, std, label_mean, label_std }
    }

    pub fn apply(&self, x: &[f64; N_FEATURES]) -> [f64; N_FEATURES] {
        std::array::from_fn(|j| (x[j] - self.mean[j]) / self.std[j])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub features: FeatureVector,
    /// SOC consumed over the window, percentage points.
    pub label: f64,
    /// Source cycle name and window start, for traceability.
    pub source: String,
    pub start: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub rows: Vec<Row>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    /// Computed on the training rows only.
    pub normalization: Normalization,
    pub horizon: f64,
    pub seed: u64,
}

impl Dataset {
    /// Builds a dataset from explicit rows with a seeded 80/20 split.
    pub fn from_rows(rows: Vec<Row>, horizon: f64, seed: u64) -> Self {
        let mut idx: Vec<usize> = (0..rows.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_train = (rows.len() as f64 * 0.8).round() as usize;
        let test = idx.split_off(n_train);
        let mut train = idx;
        train.sort_unstable();
        let mut test = test;
        test.sort_unstable();
        let x: Vec<_> = train.iter().map(|&i| rows[i].features.to_array()).collect();
        let y: Vec<_> = train.iter().map(|&i| rows[i].label).collect();
        let normalization = Normalization::fit(&x, &y);
        Self { rows, train, test, normalization, horizon, seed }
    }

    pub fn split(&self, which: Split) -> &[usize] {
        match which {
            Split::Train => &self.train,
            Split::Test => &self.test,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// Start times of the sliding windows over a cycle.
pub fn window_starts(duration: f64, horizon: f64) -> Vec<f64> {
    let stride = horizon / 2.0;
    if duration < horizon {
        return Vec::new();
    }
    let n = ((duration - horizon) / stride + 1e-9).floor() as usize + 1;
    (0..n).map(|k| k as f64 * stride).collect()
}

/// Slides a `horizon`-second window (stride `horizon/2`) over every cycle
/// and labels each window with `oracle`, the SOC consumed by a pure-electric
/// run over it. Windows are labelled in parallel; row order follows cycle
/// order, then window start.
pub fn build_dataset<F>(cycles: &[DrivingCycle], horizon: f64, seed: u64, oracle: F) -> Result<Dataset, PredictorError>
where
    F: Fn(&DrivingCycle) -> Result<f64, String> + Sync,
{
    if !(horizon >= MIN_WINDOW_S) {
        return Err(PredictorError::BadHorizon(horizon));
    }
    let jobs: Vec<(&DrivingCycle, f64)> = cycles
        .iter()
        .flat_map(|c| window_starts(c.duration(), horizon).into_iter().map(move |s| (c, s)))
        .collect();
    let rows: Result<Vec<Row>, PredictorError> = jobs
        .par_iter()
        .map(|&(c, start)| {
            let w = c
                .window(start, start + horizon)
                .map_err(|e| PredictorError::Oracle(e.to_string()))?;
            let features = extract_features(&w)?;
            let label = oracle(&w).map_err(PredictorError::Oracle)?;
            Ok(Row { features, label, source: c.name.clone(), start })
        })
        .collect();
    Ok(Dataset::from_rows(rows?, horizon, seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyper {
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    pub seed: u64,
}

impl Default for Hyper {
    fn default() -> Self {
        Self { hidden: 16, learning_rate: 0.05, epochs: 4000, l2: 1e-5, seed: 0 }
    }
}

/// Network weights: `y = w2·tanh(W1·x + b1) + b2` on normalized inputs and
/// outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub hidden: usize,
    /// `hidden × N_FEATURES`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl Params {
    pub fn zeros(hidden: usize) -> Self {
        Self { hidden, w1: vec![0.0; hidden * N_FEATURES], b1: vec![0.0; hidden], w2: vec![0.0; hidden], b2: 0.0 }
    }

    /// Glorot-uniform hidden layer, zero output layer: an untrained network
    /// predicts the training label mean.
    pub fn init(hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut p = Self::zeros(hidden);
        let l1 = (6.0 / (N_FEATURES + hidden) as f64).sqrt();
        for w in &mut p.w1 {
            *w = rng.gen_range(-l1..l1);
        }
        p
    }

    pub fn len(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend(&self.w1);
        v.extend(&self.b1);
        v.extend(&self.w2);
        v.push(self.b2);
        v
    }

    pub fn from_vec(hidden: usize, v: &[f64]) -> Self {
        let a = hidden * N_FEATURES;
        Self {
            hidden,
            w1: v[..a].to_vec(),
            b1: v[a..a + hidden].to_vec(),
            w2: v[a + hidden..a + 2 * hidden].to_vec(),
            b2: v[a + 2 * hidden],
        }
    }

    /// Forward pass on a normalized input.
    pub fn forward(&self, x: &[f64; N_FEATURES]) -> f64 {
        let mut y = self.b2;
        for h in 0..self.hidden {
            let row = &self.w1[h * N_FEATURES..(h + 1) * N_FEATURES];
            let z: f64 = self.b1[h] + row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>();
            y += self.w2[h] * z.tanh();
        }
        y
    }
}

/// Mean squared error plus `l2·Σw²` over the weight matrices (biases are not
/// penalized), and its gradient in [`Params::to_vec`] order.
pub fn loss_and_grad(p: &Params, x: &[[f64; N_FEATURES]], y: &[f64], l2: f64) -> (f64, Vec<f64>) {
    let n = x.len() as f64;
    let hdim = p.hidden;
    let mut g = Params::zeros(hdim);
    let mut loss = 0.0;
    let mut act = vec![0.0; hdim];
    for (xi, &yi) in x.iter().zip(y) {
        let mut out = p.b2;
        for h in 0..hdim {
            let row = &p.w1[h * N_FEATURES..(h + 1) * N_FEATURES];
            let z: f64 = p.b1[h] + row.iter().zip(xi).map(|(w, v)| w * v).sum::<f64>();
            act[h] = z.tanh();
            out += p.w2[h] * act[h];
        }
        let err = out - yi;
        loss += err * err / n;
        let d_out = 2.0 * err / n;
        g.b2 += d_out;
        for h in 0..hdim {
            g.w2[h] += d_out * act[h];
            let dz = d_out * p.w2[h] * (1.0 - act[h] * act[h]);
            g.b1[h] += dz;
            for j in 0..N_FEATURES {
                g.w1[h * N_FEATURES + j] += dz * xi[j];
            }
        }
    }
    let sq: f64 = p.w1.iter().chain(&p.w2).map(|w| w * w).sum();
    loss += l2 * sq;
    for (gw, w) in g.w1.iter_mut().zip(&p.w1) {
        *gw += 2.0 * l2 * w;
    }
    for (gw, w) in g.w2.iter_mut().zip(&p.w2) {
        *gw += 2.0 * l2 * w;
    }
    (loss, g.to_vec())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    pub params: Params,
    pub normalization: Normalization,
    pub hyper: Hyper,
    pub horizon: f64,
    /// Training loss after each accepted epoch is never above the previous one;
    /// this records whether the step had to be shrunk to keep it so.
    pub step_size_reduced: bool,
    pub final_learning_rate: f64,
    pub train_loss: f64,
    pub r2_train: Option<f64>,
    pub r2_test: Option<f64>,
}

/// Minimum number of training rows.
pub const MIN_TRAIN_ROWS: usize = 20;

/// Trains on the dataset's training split.
pub fn train(ds: &Dataset, hyper: &Hyper) -> Result<RegressionModel, PredictorError> {
    if ds.train.len() < MIN_TRAIN_ROWS {
        return Err(PredictorError::DatasetTooSmall { have: ds.train.len(), needed: MIN_TRAIN_ROWS });
    }
    let norm = &ds.normalization;
    let x: Vec<[f64; N_FEATURES]> = ds.train.iter().map(|&i| norm.apply(&ds.rows[i].features.to_array())).collect();
    let y: Vec<f64> = ds.train.iter().map(|&i| (ds.rows[i].label - norm.label_mean) / norm.label_std).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut theta = Params::init(hyper.hidden, &mut rng).to_vec();
    let mut lr = hyper.learning_rate;
    let mut reduced = false;
    let (mut loss, mut grad) = loss_and_grad(&Params::from_vec(hyper.hidden, &theta), &x, &y, hyper.l2);
    'epochs: for _ in 0..hyper.epochs {
        loop {
            let cand: Vec<f64> = theta.iter().zip(&grad).map(|(t, g)| t - lr * g).collect();
            let (l, g) = loss_and_grad(&Params::from_vec(hyper.hidden, &cand), &x, &y, hyper.l2);
            if l <= loss {
                theta = cand;
                loss = l;
                grad = g;
                break;
            }
            lr *= 0.5;
            reduced = true;
            if lr < 1e-12 {
                break 'epochs;
            }
        }
    }
    let mut model = RegressionModel {
        params: Params::from_vec(hyper.hidden, &theta),
        normalization: norm.clone(),
        hyper: *hyper,
        horizon: ds.horizon,
        step_size_reduced: reduced,
        final_learning_rate: lr,
        train_loss: loss,
        r2_train: None,
        r2_test: None,
    };
    model.r2_train = r2(&model, ds, Split::Train).ok();
    model.r2_test = r2(&model, ds, Split::Test).ok();
    Ok(model)
}

/// Predicted SOC consumption over the model's horizon, percentage points.
pub fn predict(model: &RegressionModel, fv: &FeatureVector) -> f64 {
    let n = &model.normalization;
    model.params.forward(&n.apply(&fv.to_array())) * n.label_std + n.label_mean
}

/// Coefficient of determination on one split.
pub fn r2(model: &RegressionModel, ds: &Dataset, split: Split) -> Result<f64, PredictorError> {
    let idx = ds.split(split);
    let y: Vec<f64> = idx.iter().map(|&i| ds.rows[i].label).collect();
    let pred: Vec<f64> = idx.iter().map(|&i| predict(model, &ds.rows[i].features)).collect();
    r2_score(&y, &pred)
}

/// `1 − SS_res/SS_tot`.
pub fn r2_score(y: &[f64], pred: &[f64]) -> Result<f64, PredictorError> {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if !(ss_tot > 0.0) {
        return Err(PredictorError::ZeroVariance);
    }
    let ss_res: f64 = y.iter().zip(pred).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}
