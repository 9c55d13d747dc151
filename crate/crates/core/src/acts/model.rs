use base64::Engine;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::holt::HoltState;
use super::segments::is_degenerate;
use super::tape::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::series::DatedSeries;

/// Training settings. `epochs`, `hidden` and `rate` span the search grid; the rest are fixed
/// architecture choices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActsHyper {
    pub epochs: usize,
    pub hidden: usize,
    pub rate: f64,
    pub segment_len: usize,
    pub horizon: usize,
    pub kernel_width: usize,
    pub seed: u64,
}

impl ActsHyper {
    pub fn new(epochs: usize, hidden: usize, rate: f64, horizon: usize) -> Self {
        Self {
            epochs,
            hidden,
            rate,
            segment_len: 14,
            horizon,
            kernel_width: 3,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_segment_len(mut self, l: usize) -> Self {
        self.segment_len = l;
        self
    }
}

pub const EPOCHS: [usize; 3] = [600, 1200, 1800];
pub const HIDDEN: [usize; 2] = [16, 32];
pub const RATES: [f64; 3] = [0.001, 0.005, 0.01];

/// All 18 `(epochs, hidden, rate)` combinations.
pub fn full_space() -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for e in EPOCHS {
        for d in HIDDEN {
            for r in RATES {
                out.push((e, d, r));
            }
        }
    }
    out
}

/// The desk-scale subset: epochs capped at 600.
pub fn reduced_space() -> Vec<(usize, usize, f64)> {
    full_space().into_iter().filter(|c| c.0 == 600).collect()
}

/// Regional training series, aligned on a shared day axis by `offsets`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActsData {
    pub labels: Vec<String>,
    pub series: Vec<Vec<f64>>,
    /// Day of each series' first value relative to the earliest start.
    pub offsets: Vec<i64>,
}

impl ActsData {
    /// Series that all start on the same day.
    pub fn new(series: Vec<Vec<f64>>) -> Self {
        let n = series.len();
        Self {
            labels: (0..n).map(|i| format!("region{i}")).collect(),
            series,
            offsets: vec![0; n],
        }
    }

    pub fn from_series(series: &[DatedSeries]) -> Result<Self> {
        let first = series
            .iter()
            .map(|s| s.start())
            .min()
            .ok_or_else(|| Error::Empty("no regions".into()))?;
        Ok(Self {
            labels: series.iter().map(|s| s.label().to_string()).collect(),
            series: series.iter().map(|s| s.values().to_vec()).collect(),
            offsets: series.iter().map(|s| (s.start() - first).num_days()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }
}

// Keeps ReLUs off their kink for all-zero (flat) segments at initialization.
const RELU_BIAS: f64 = 0.01;

pub const PARAM_NAMES: [&str; 11] = [
    "holt_alpha_raw",
    "holt_beta_raw",
    "conv_seg",
    "conv_seg_bias",
    "conv_dev",
    "conv_dev_bias",
    "w_q",
    "w_k",
    "w_v",
    "out_proj",
    "out_bias",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ActsModel {
    pub hyper: ActsHyper,
    pub labels: Vec<String>,
    /// Per-region divisor applied to inputs before training and undone on output.
    pub scales: Vec<f64>,
    /// Weights in [`PARAM_NAMES`] order. `out_proj` is stored `d x H`.
    pub params: Vec<Tensor>,
    /// Training loss after `k` updates, `k = 0..=epochs`.
    pub history: Vec<f64>,
    pub trained: bool,
}

struct Scaled<'a> {
    series: Vec<Vec<f64>>,
    offsets: &'a [i64],
}

enum Mode {
    Train,
    Forecast(usize),
}

struct Output {
    value: Var,
    attention: Option<Var>,
}

fn gather_rows(tape: &mut Tape, v: Var, rows: &[usize]) -> Var {
    let cols = tape.value(v).cols;
    let idx = rows.iter().flat_map(|r| r * cols..(r + 1) * cols).collect();
    tape.gather(v, idx, rows.len(), cols)
}

fn validate(data: &ActsData, hyper: &ActsHyper) -> Result<()> {
    if data.len() < 2 {
        return Err(Error::Invalid("ACTS needs at least two regions".into()));
    }
    if data.offsets.len() != data.len() || data.labels.len() != data.len() {
        return Err(Error::Mismatch {
            left: data.len(),
            right: data.offsets.len(),
        });
    }
    if hyper.segment_len < 2 || hyper.horizon == 0 || hyper.hidden == 0 || hyper.kernel_width % 2 == 0 {
        return Err(Error::Invalid(format!("unusable ACTS settings {hyper:?}")));
    }
    if !(hyper.rate >= 0.0 && hyper.rate.is_finite()) {
        return Err(Error::Invalid(format!("learning rate {}", hyper.rate)));
    }
    let needed = hyper.segment_len + 2 * hyper.horizon;
    for s in &data.series {
        if s.len() < needed {
            return Err(Error::Length { needed, got: s.len() });
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("non-finite training value".into()));
        }
    }
    Ok(())
}

impl ActsModel {
    /// Seeded initial weights; not yet usable for forecasting.
    pub fn init(data: &ActsData, hyper: &ActsHyper) -> Result<Self> {
        validate(data, hyper)?;
        let (d, h, w) = (hyper.hidden, hyper.horizon, hyper.kernel_width);
        let n = data.len();
        let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
        let mut random = |rows: usize, cols: usize, fan_in: usize| {
            let normal = Normal::new(0.0, 1.0 / (fan_in as f64).sqrt()).expect("positive std");
            Tensor::new(rows, cols, (0..rows * cols).map(|_| normal.sample(&mut rng)).collect())
        };
        let holt = HoltState::default();
        let params = vec![
            Tensor::row(vec![holt.alpha_raw; n]),
            Tensor::row(vec![holt.beta_raw; n]),
            random(w, d, w),
            Tensor::row(vec![RELU_BIAS; d]),
            random(w, d, w),
            Tensor::row(vec![RELU_BIAS; d]),
            random(d, d, d),
            random(d, d, d),
            random(d, d, d),
            random(d, h, d),
            Tensor::zeros(1, h),
        ];
        let scales = data
            .series
            .iter()
            .map(|s| {
                let m = s.iter().sum::<f64>() / s.len() as f64;
                if m > 0.0 && m.is_finite() {
                    m
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self {
            hyper: hyper.clone(),
            labels: data.labels.clone(),
            scales,
            params,
            history: Vec::new(),
            trained: false,
        })
    }

    pub fn holt(&self) -> Vec<HoltState> {
        self.params[0]
            .data
            .iter()
            .zip(&self.params[1].data)
            .map(|(a, b)| HoltState {
                alpha_raw: *a,
                beta_raw: *b,
            })
            .collect()
    }

    fn scaled<'a>(&self, data: &'a ActsData) -> Result<Scaled<'a>> {
        if data.len() != self.scales.len() {
            return Err(Error::Mismatch {
                left: data.len(),
                right: self.scales.len(),
            });
        }
        Ok(Scaled {
            series: data
                .series
                .iter()
                .zip(&self.scales)
                .map(|(s, k)| s.iter().map(|v| v / k).collect())
                .collect(),
            offsets: &data.offsets,
        })
    }

    fn graph(&self, tape: &mut Tape, p: &[Var], data: &Scaled, mode: Mode) -> Result<Output> {
        let (l, h) = (self.hyper.segment_len, self.hyper.horizon);
        struct Row {
            day: i64,
            degenerate: bool,
        }
        // Ω rows for all regions first, then the forecast query row if any.
        let mut rows: Vec<Row> = Vec::new();
        let mut parts: [Vec<Var>; 5] = Default::default(); // seg, first, last, level, trend
        let mut dev_parts = Vec::new();
        let mut truth = Vec::new();
        let mut tail: Option<[Var; 5]> = None;
        let mut tail_row = None;
        for (i, y) in data.series.iter().enumerate() {
            let t_len = y.len();
            let a = tape.gather(p[0], vec![i], 1, 1);
            let b = tape.gather(p[1], vec![i], 1, 1);
            let hv = tape.holt(a, b, y);
            let yv = tape.leaf(Tensor::row(y.clone()));
            let lev = tape.gather(hv, (0..t_len).collect(), 1, t_len);
            let r = tape.sub(yv, lev);
            let rv = tape.value(r).data.clone();
            let pick = |tape: &mut Tape, ends: &[usize]| -> [Var; 5] {
                let k = ends.len();
                let seg = ends.iter().flat_map(|e| e + 1 - l..=*e).collect();
                let seg = tape.gather(r, seg, k, l);
                let first = tape.gather(r, ends.iter().map(|e| e + 1 - l).collect(), k, 1);
                let last = tape.gather(r, ends.to_vec(), k, 1);
                let level = tape.gather(hv, ends.to_vec(), k, 1);
                let trend = tape.gather(hv, ends.iter().map(|e| t_len + e).collect(), k, 1);
                [seg, first, last, level, trend]
            };
            let ends: Vec<usize> = (l - 1..t_len - h).collect();
            let got = pick(tape, &ends);
            for (slot, v) in parts.iter_mut().zip(got) {
                slot.push(v);
            }
            let dev = ends.iter().flat_map(|e| e + 1..=e + h).collect();
            dev_parts.push(tape.gather(r, dev, ends.len(), h));
            for &e in &ends {
                rows.push(Row {
                    day: data.offsets[i] + e as i64,
                    degenerate: is_degenerate(&rv[e + 1 - l..=e]),
                });
                truth.extend_from_slice(&y[e + 1..=e + h]);
            }
            if matches!(mode, Mode::Forecast(target) if target == i) {
                let e = t_len - 1;
                tail = Some(pick(tape, &[e]));
                tail_row = Some(Row {
                    day: data.offsets[i] + e as i64,
                    degenerate: is_degenerate(&rv[e + 1 - l..=e]),
                });
            }
        }
        let n_omega = rows.len();
        if let (Some(t), Some(row)) = (tail, tail_row) {
            for (slot, v) in parts.iter_mut().zip(t) {
                slot.push(v);
            }
            rows.push(row);
        }
        let [seg, first, last, level, trend] = parts.map(|ps| tape.stack(&ps));
        let n_rows = rows.len();
        let mask_col = tape.leaf(Tensor::column(
            rows.iter().map(|r| if r.degenerate { 0.0 } else { 1.0 }).collect(),
        ));
        let gap = tape.sub(last, first);
        let offset: Vec<f64> = rows
            .iter()
            .zip(&tape.value(gap).data)
            .map(|(r, g)| if r.degenerate { 1.0 - g } else { 0.0 })
            .collect();
        let offset = tape.leaf(Tensor::column(offset));
        let denom = tape.add(gap, offset);
        let gap_masked = tape.mul(gap, mask_col);

        let centered = tape.sub(seg, first);
        let centered = tape.mul(centered, mask_col);
        let seg_n = tape.div(centered, denom);

        let omega: Vec<usize> = (0..n_omega).collect();
        let dev = tape.stack(&dev_parts);
        let first_o = gather_rows(tape, first, &omega);
        let mask_o = gather_rows(tape, mask_col, &omega);
        let denom_o = gather_rows(tape, denom, &omega);
        let dev_c = tape.sub(dev, first_o);
        let dev_c = tape.mul(dev_c, mask_o);
        let dev_n = tape.div(dev_c, denom_o);

        let conv = tape.conv1d(seg_n, p[2], p[3]);
        let conv = tape.relu(conv);
        let p_emb = tape.mean_pool(conv, l);
        let conv = tape.conv1d(dev_n, p[4], p[5]);
        let conv = tape.relu(conv);
        let g_emb = tape.mean_pool(conv, h);

        let p_keys = gather_rows(tape, p_emb, &omega);
        let keys = tape.matmul(p_keys, p[7]);
        let values = tape.matmul(g_emb, p[8]);

        // Leakage guard: a key is usable unless its development window overlaps the query's
        // forecast window.
        let allowed = |q: &Row, k: &Row| !k.degenerate && (k.day - q.day).abs() >= h as i64;
        let queries: Vec<usize> = match mode {
            Mode::Train => (0..n_omega)
                .filter(|&qi| rows[..n_omega].iter().any(|k| allowed(&rows[qi], k)))
                .collect(),
            Mode::Forecast(_) => vec![n_rows - 1],
        };
        if queries.is_empty() || rows[..n_omega].iter().all(|r| r.degenerate) {
            return Err(Error::Degenerate("no non-flat segments to attend to".into()));
        }
        let mut mask = Vec::with_capacity(queries.len() * n_omega);
        for &qi in &queries {
            mask.extend(rows[..n_omega].iter().map(|k| allowed(&rows[qi], k)));
        }
        if !mask.iter().any(|m| *m) {
            return Err(Error::Degenerate("empty attention key set".into()));
        }
        let p_q = gather_rows(tape, p_emb, &queries);
        let q = tape.matmul(p_q, p[6]);
        let attended = tape.attend(q, keys, values, &mask);
        let z = tape.matmul(attended, p[9]);
        let z = tape.add(z, p[10]);

        let nq = queries.len();
        let gap_q = gather_rows(tape, gap_masked, &queries);
        let first_q = gather_rows(tape, first, &queries);
        let resid = tape.mul(z, gap_q);
        let resid = tape.add(resid, first_q);
        let level_q = gather_rows(tape, level, &queries);
        let trend_q = gather_rows(tape, trend, &queries);
        let zeros = tape.leaf(Tensor::zeros(nq, h));
        let steps = tape.leaf(Tensor::row((1..=h).map(|k| k as f64).collect()));
        let ext = tape.add(zeros, trend_q);
        let ext = tape.mul(ext, steps);
        let ext = tape.add(ext, level_q);
        let pred = tape.add(resid, ext);
        match mode {
            Mode::Train => {
                let target: Vec<f64> = queries
                    .iter()
                    .flat_map(|&qi| truth[qi * h..(qi + 1) * h].to_vec())
                    .collect();
                let target = tape.leaf(Tensor::new(nq, h, target));
                let err = tape.sub(pred, target);
                let err = tape.abs(err);
                Ok(Output {
                    value: tape.mean_all(err),
                    attention: None,
                })
            }
            Mode::Forecast(_) => Ok(Output {
                value: pred,
                attention: Some(attended),
            }),
        }
    }

    /// Joint training MAE on the mean-scaled series, with gradients for each parameter.
    pub fn loss_and_grad(&self, data: &ActsData) -> Result<(f64, Vec<Tensor>)> {
        let scaled = self.scaled(data)?;
        let mut tape = Tape::new();
        let vars: Vec<Var> = self.params.iter().map(|t| tape.leaf(t.clone())).collect();
        let out = self.graph(&mut tape, &vars, &scaled, Mode::Train)?;
        let loss = tape.value(out.value).item();
        let grads = tape.backward(out.value);
        let g = vars
            .iter()
            .zip(&self.params)
            .map(|(v, t)| grads.get(*v).cloned().unwrap_or_else(|| Tensor::zeros(t.rows, t.cols)))
            .collect();
        Ok((loss, g))
    }

    pub fn loss(&self, data: &ActsData) -> Result<f64> {
        let scaled = self.scaled(data)?;
        let mut tape = Tape::new();
        let vars: Vec<Var> = self.params.iter().map(|t| tape.leaf(t.clone())).collect();
        let out = self.graph(&mut tape, &vars, &scaled, Mode::Train)?;
        Ok(tape.value(out.value).item())
    }

    /// Builds the training loss on an external tape from the given parameter leaves; used
    /// for gradient checking.
    pub fn loss_graph(&self, tape: &mut Tape, params: &[Var], data: &ActsData) -> Result<Var> {
        let scaled = self.scaled(data)?;
        Ok(self.graph(tape, params, &scaled, Mode::Train)?.value)
    }

    fn forecast_graph(&self, data: &ActsData, region: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        if !self.trained {
            return Err(Error::Untrained);
        }
        validate(data, &self.hyper)?;
        if region >= data.len() {
            return Err(Error::Invalid(format!("region index {region} out of range")));
        }
        let scaled = self.scaled(data)?;
        let mut tape = Tape::new();
        let vars: Vec<Var> = self.params.iter().map(|t| tape.leaf(t.clone())).collect();
        let out = self.graph(&mut tape, &vars, &scaled, Mode::Forecast(region))?;
        let pred = tape.value(out.value).data.clone();
        let vhat = tape.value(out.attention.expect("forecast mode")).data.clone();
        Ok((pred, vhat))
    }
}

/// The attention output for the target region's latest segment.
pub fn attention_forward(model: &ActsModel, data: &ActsData, region: usize) -> Result<Vec<f64>> {
    Ok(model.forecast_graph(data, region)?.1)
}

/// `H`-day forecast for `region`, floored at zero.
pub fn forecast(model: &ActsModel, data: &ActsData, region: usize) -> Result<Vec<f64>> {
    let (pred, _) = model.forecast_graph(data, region)?;
    let k = model.scales[region];
    Ok(pred.into_iter().map(|v| (v * k).max(0.0)).collect())
}

struct Adam {
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(params: &[Tensor]) -> Self {
        let zeros: Vec<Tensor> = params.iter().map(|p| Tensor::zeros(p.rows, p.cols)).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [Tensor], grads: &[Tensor], rate: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for k in 0..p.data.len() {
                let gk = g.data[k];
                m.data[k] = Self::B1 * m.data[k] + (1.0 - Self::B1) * gk;
                v.data[k] = Self::B2 * v.data[k] + (1.0 - Self::B2) * gk * gk;
                let step = rate * (m.data[k] / c1) / ((v.data[k] / c2).sqrt() + Self::EPS);
                p.data[k] -= step;
            }
        }
    }
}

/// Full-batch Adam on the joint MAE for `hyper.epochs` steps.
pub fn train(data: &ActsData, hyper: &ActsHyper) -> Result<ActsModel> {
    train_with(data, hyper, |_, _| true)
}

/// As [`train`], calling `progress(epoch, loss)` before each update; returning `false`
/// stops early.
pub fn train_with(data: &ActsData, hyper: &ActsHyper, progress: impl FnMut(usize, f64) -> bool) -> Result<ActsModel> {
    let model = ActsModel::init(data, hyper)?;
    train_from(model, data, progress)
}

fn train_from(
    mut model: ActsModel,
    data: &ActsData,
    mut progress: impl FnMut(usize, f64) -> bool,
) -> Result<ActsModel> {
    let hyper = model.hyper.clone();
    let mut adam = Adam::new(&model.params);
    for epoch in 0..hyper.epochs {
        let (loss, grads) = model.loss_and_grad(data)?;
        if !loss.is_finite() {
            return Err(Error::FitFailed(format!("non-finite loss at epoch {epoch}")));
        }
        model.history.push(loss);
        if !progress(epoch, loss) {
            break;
        }
        adam.step(&mut model.params, &grads, hyper.rate);
    }
    let last = model.loss(data)?;
    if !last.is_finite() {
        return Err(Error::FitFailed("non-finite final loss".into()));
    }
    model.history.push(last);
    model.trained = true;
    Ok(model)
}

pub const CHECKPOINT_FORMAT: &str = "epicast-acts";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct StoredTensor {
    name: String,
    rows: usize,
    cols: usize,
    /// Base64 of little-endian IEEE-754 doubles.
    data: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    hyper: ActsHyper,
    labels: Vec<String>,
    scales: Vec<f64>,
    trained: bool,
    history: Vec<f64>,
    tensors: Vec<StoredTensor>,
}

impl ActsModel {
    pub fn to_json(&self) -> Result<String> {
        let b64 = base64::engine::general_purpose::STANDARD;
        let tensors = PARAM_NAMES
            .iter()
            .zip(&self.params)
            .map(|(name, t)| StoredTensor {
                name: name.to_string(),
                rows: t.rows,
                cols: t.cols,
                data: b64.encode(t.data.iter().flat_map(|v| v.to_le_bytes()).collect::<Vec<u8>>()),
            })
            .collect();
        let ck = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            hyper: self.hyper.clone(),
            labels: self.labels.clone(),
            scales: self.scales.clone(),
            trained: self.trained,
            history: self.history.clone(),
            tensors,
        };
        Ok(serde_json::to_string_pretty(&ck)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(Error::Invalid(format!(
                "unsupported checkpoint {} v{}",
                ck.format, ck.version
            )));
        }
        let b64 = base64::engine::general_purpose::STANDARD;
        let mut params = Vec::new();
        for (want, st) in PARAM_NAMES.iter().zip(&ck.tensors) {
            if st.name != *want {
                return Err(Error::Invalid(format!("expected tensor {want}, found {}", st.name)));
            }
            let bytes = b64
                .decode(&st.data)
                .map_err(|e| Error::Invalid(format!("tensor {}: {e}", st.name)))?;
            if bytes.len() != st.rows * st.cols * 8 {
                return Err(Error::Invalid(format!("tensor {} has the wrong size", st.name)));
            }
            let data = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            params.push(Tensor::new(st.rows, st.cols, data));
        }
        if params.len() != PARAM_NAMES.len() {
            return Err(Error::Invalid("checkpoint is missing tensors".into()));
        }
        let (d, h, w) = (ck.hyper.hidden, ck.hyper.horizon, ck.hyper.kernel_width);
        let n = ck.scales.len();
        let shapes = [
            (1, n),
            (1, n),
            (w, d),
            (1, d),
            (w, d),
            (1, d),
            (d, d),
            (d, d),
            (d, d),
            (d, h),
            (1, h),
        ];
        for ((name, t), s) in PARAM_NAMES.iter().zip(&params).zip(shapes) {
            if t.shape() != s {
                return Err(Error::Invalid(format!(
                    "tensor {name} has shape {:?}, expected {s:?}",
                    t.shape()
                )));
            }
        }
        Ok(Self {
            hyper: ck.hyper,
            labels: ck.labels,
            scales: ck.scales,
            params,
            history: ck.history,
            trained: ck.trained,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
