//! A small stacked LSTM next-request model, written out by hand.
//!
//! Input ids go through an embedding table (ids at or above `vocab_cap`
//! share one out-of-vocabulary row), then `layers` LSTM layers, then a
//! linear projection to one logit per catalog content. Training minimizes
//! the cross-entropy of the request that follows each window of
//! `input_window` requests, using mini-batch gradient descent with
//! gradient-norm clipping.
//!
//! All parameters live in one flat vector so that checkpoints and
//! finite-difference checks can treat them uniformly. Gate rows are stored
//! in the order input, forget, output, candidate.

use std::ops::Range;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{softmax, PopularityForecast, PopularityModel, UpdateStats};
use crate::error::{Error, Result};
use crate::trace::ContentId;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"LAE2LSTM";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct LstmConfig {
    pub layers: usize,
    pub hidden_units: usize,
    pub embedding_dim: usize,
    /// Requests fed to the network per prediction.
    pub input_window: usize,
    pub learning_rate: f64,
    pub epochs_per_update: usize,
    pub batch_size: usize,
    /// Ids `>= vocab_cap` share one embedding row.
    pub vocab_cap: usize,
    /// Maximum L2 norm of a batch gradient.
    pub grad_clip: f64,
    pub seed: u64,
}

impl Default for LstmConfig {
    fn default() -> Self {
        LstmConfig {
            layers: 3,
            hidden_units: 128,
            embedding_dim: 32,
            input_window: 16,
            learning_rate: 0.1,
            epochs_per_update: 1,
            batch_size: 32,
            vocab_cap: 10_000,
            grad_clip: 5.0,
            seed: 0,
        }
    }
}

impl LstmConfig {
    /// One layer of 32 units; fast enough for tests and laptop runs.
    pub fn desk() -> Self {
        LstmConfig {
            layers: 1,
            hidden_units: 32,
            embedding_dim: 16,
            input_window: 8,
            learning_rate: 0.2,
            epochs_per_update: 2,
            batch_size: 16,
            vocab_cap: 10_000,
            grad_clip: 5.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("layers", self.layers),
            ("hidden_units", self.hidden_units),
            ("embedding_dim", self.embedding_dim),
            ("input_window", self.input_window),
            ("epochs_per_update", self.epochs_per_update),
            ("batch_size", self.batch_size),
            ("vocab_cap", self.vocab_cap),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::config(format!("lstm.{name} must be positive")));
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("lstm.learning_rate must be positive"));
        }
        if self.grad_clip.is_nan() || self.grad_clip <= 0.0 {
            return Err(Error::config("lstm.grad_clip must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct Layout {
    vocab_rows: usize,
    emb_dim: usize,
    hidden: usize,
    catalog: usize,
    emb: Range<usize>,
    weights: Vec<Range<usize>>,
    biases: Vec<Range<usize>>,
    out_w: Range<usize>,
    out_b: Range<usize>,
    total: usize,
}

impl Layout {
    fn new(cfg: &LstmConfig, catalog: usize) -> Self {
        let vocab_rows = cfg.vocab_cap.min(catalog) + 1;
        let (e, h) = (cfg.embedding_dim, cfg.hidden_units);
        let mut at = 0;
        let mut take = |n: usize| {
            let r = at..at + n;
            at += n;
            r
        };
        let emb = take(vocab_rows * e);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..cfg.layers {
            let input = if l == 0 { e } else { h };
            weights.push(take(4 * h * (input + h)));
            biases.push(take(4 * h));
        }
        let out_w = take(catalog * h);
        let out_b = take(catalog);
        Layout {
            vocab_rows,
            emb_dim: e,
            hidden: h,
            catalog,
            emb,
            weights,
            biases,
            out_w,
            out_b,
            total: at,
        }
    }

    fn input_dim(&self, layer: usize) -> usize {
        if layer == 0 {
            self.emb_dim
        } else {
            self.hidden
        }
    }
}

/// Activations of one layer over a window, kept for backpropagation.
struct LayerTape {
    input_dim: usize,
    /// `steps x input_dim`
    xs: Vec<f64>,
    /// `(steps + 1) x hidden`; row 0 is the zero initial state.
    hs: Vec<f64>,
    cs: Vec<f64>,
    /// `steps x 4 hidden`, activated gates.
    acts: Vec<f64>,
    /// `steps x hidden`, tanh of the cell state.
    tanh_c: Vec<f64>,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub struct LstmModel {
    cfg: LstmConfig,
    layout: Layout,
    params: Vec<f64>,
    rng: ChaCha8Rng,
    forecast: PopularityForecast,
}

impl LstmModel {
    pub fn new(cfg: LstmConfig, catalog_size: usize) -> Result<Self> {
        cfg.validate()?;
        if catalog_size == 0 {
            return Err(Error::config("catalog_size must be positive"));
        }
        let layout = Layout::new(&cfg, catalog_size);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut params = vec![0.0; layout.total];
        for p in &mut params[layout.emb.clone()] {
            *p = rng.random_range(-0.1..0.1);
        }
        let scale = 1.0 / (layout.hidden as f64).sqrt();
        for l in 0..cfg.layers {
            for p in &mut params[layout.weights[l].clone()] {
                *p = rng.random_range(-scale..scale);
            }
            let h = layout.hidden;
            let b = layout.biases[l].start;
            for p in &mut params[b + h..b + 2 * h] {
                *p = 1.0;
            }
        }
        for p in &mut params[layout.out_w.clone()] {
            *p = rng.random_range(-scale..scale);
        }
        Ok(LstmModel {
            cfg,
            layout,
            params,
            rng,
            forecast: PopularityForecast::uniform(catalog_size),
        })
    }

    pub fn config(&self) -> &LstmConfig {
        &self.cfg
    }

    pub fn catalog_size(&self) -> usize {
        self.layout.catalog
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn token(&self, id: ContentId) -> usize {
        id.index().min(self.layout.vocab_rows - 1)
    }

    fn forward(&self, params: &[f64], tokens: &[usize]) -> (Vec<LayerTape>, Vec<f64>) {
        let lay = &self.layout;
        let h = lay.hidden;
        let steps = tokens.len();
        let mut tapes: Vec<LayerTape> = Vec::with_capacity(self.cfg.layers);

        for l in 0..self.cfg.layers {
            let input_dim = lay.input_dim(l);
            let mut xs = vec![0.0; steps * input_dim];
            if l == 0 {
                let emb = &params[lay.emb.clone()];
                for (t, &tok) in tokens.iter().enumerate() {
                    xs[t * input_dim..(t + 1) * input_dim].copy_from_slice(&emb[tok * input_dim..(tok + 1) * input_dim]);
                }
            } else {
                let below = &tapes[l - 1];
                xs.copy_from_slice(&below.hs[h..]);
            }
            let w = &params[lay.weights[l].clone()];
            let b = &params[lay.biases[l].clone()];
            let cols = input_dim + h;
            let mut hs = vec![0.0; (steps + 1) * h];
            let mut cs = vec![0.0; (steps + 1) * h];
            let mut acts = vec![0.0; steps * 4 * h];
            let mut tanh_c = vec![0.0; steps * h];
            let mut z = vec![0.0; 4 * h];
            for t in 0..steps {
                let x = &xs[t * input_dim..(t + 1) * input_dim];
                let h_prev = &hs[t * h..(t + 1) * h];
                for (r, zr) in z.iter_mut().enumerate() {
                    let row = &w[r * cols..(r + 1) * cols];
                    let mut acc = b[r];
                    for (wv, xv) in row[..input_dim].iter().zip(x) {
                        acc += wv * xv;
                    }
                    for (wv, hv) in row[input_dim..].iter().zip(h_prev) {
                        acc += wv * hv;
                    }
                    *zr = acc;
                }
                let a = &mut acts[t * 4 * h..(t + 1) * 4 * h];
                for j in 0..h {
                    a[j] = sigmoid(z[j]);
                    a[h + j] = sigmoid(z[h + j]);
                    a[2 * h + j] = sigmoid(z[2 * h + j]);
                    a[3 * h + j] = z[3 * h + j].tanh();
                }
                for j in 0..h {
                    let c = a[h + j] * cs[t * h + j] + a[j] * a[3 * h + j];
                    cs[(t + 1) * h + j] = c;
                    let tc = c.tanh();
                    tanh_c[t * h + j] = tc;
                    hs[(t + 1) * h + j] = a[2 * h + j] * tc;
                }
            }
            tapes.push(LayerTape {
                input_dim,
                xs,
                hs,
                cs,
                acts,
                tanh_c,
            });
        }

        let top = tapes.last().expect("at least one layer");
        let h_last = &top.hs[steps * h..(steps + 1) * h];
        let ow = &params[lay.out_w.clone()];
        let ob = &params[lay.out_b.clone()];
        let logits = (0..lay.catalog)
            .map(|k| {
                let row = &ow[k * h..(k + 1) * h];
                ob[k] + row.iter().zip(h_last).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect();
        (tapes, logits)
    }

    /// Cross-entropy of `target` after `tokens`; accumulates the gradient
    /// into `grad`.
    fn backprop(&self, params: &[f64], tokens: &[usize], target: usize, grad: &mut [f64]) -> f64 {
        let lay = &self.layout;
        let h = lay.hidden;
        let steps = tokens.len();
        let (tapes, logits) = self.forward(params, tokens);
        let probs = softmax(&logits);
        let loss = -probs[target].max(f64::MIN_POSITIVE).ln();

        // output layer
        let top = tapes.last().expect("at least one layer");
        let h_last = &top.hs[steps * h..(steps + 1) * h];
        let ow = &params[lay.out_w.clone()];
        let mut dh_top = vec![0.0; h];
        {
            let (ow_start, ob_start) = (lay.out_w.start, lay.out_b.start);
            for (k, &p) in probs.iter().enumerate() {
                let d = if k == target { p - 1.0 } else { p };
                grad[ob_start + k] += d;
                let g = &mut grad[ow_start + k * h..ow_start + (k + 1) * h];
                for (gj, hj) in g.iter_mut().zip(h_last) {
                    *gj += d * hj;
                }
                for (dj, wj) in dh_top.iter_mut().zip(&ow[k * h..(k + 1) * h]) {
                    *dj += d * wj;
                }
            }
        }

        // external gradient on each layer's hidden outputs, per step
        let mut dh_ext = vec![0.0; steps * h];
        dh_ext[(steps - 1) * h..].copy_from_slice(&dh_top);

        for l in (0..self.cfg.layers).rev() {
            let tape = &tapes[l];
            let input_dim = tape.input_dim;
            let cols = input_dim + h;
            let w = &params[lay.weights[l].clone()];
            let (w_start, b_start) = (lay.weights[l].start, lay.biases[l].start);
            let mut dx = vec![0.0; steps * input_dim];
            let mut dh_rec = vec![0.0; h];
            let mut dc_rec = vec![0.0; h];
            let mut dz = vec![0.0; 4 * h];

            for t in (0..steps).rev() {
                let a = &tape.acts[t * 4 * h..(t + 1) * 4 * h];
                let c_prev = &tape.cs[t * h..(t + 1) * h];
                let tc = &tape.tanh_c[t * h..(t + 1) * h];
                for j in 0..h {
                    let (ig, fg, og, gg) = (a[j], a[h + j], a[2 * h + j], a[3 * h + j]);
                    let dh = dh_ext[t * h + j] + dh_rec[j];
                    let dc = dc_rec[j] + dh * og * (1.0 - tc[j] * tc[j]);
                    dz[j] = dc * gg * ig * (1.0 - ig);
                    dz[h + j] = dc * c_prev[j] * fg * (1.0 - fg);
                    dz[2 * h + j] = dh * tc[j] * og * (1.0 - og);
                    dz[3 * h + j] = dc * ig * (1.0 - gg * gg);
                    dc_rec[j] = dc * fg;
                }
                let x = &tape.xs[t * input_dim..(t + 1) * input_dim];
                let h_prev = &tape.hs[t * h..(t + 1) * h];
                dh_rec.iter_mut().for_each(|v| *v = 0.0);
                let dxt = &mut dx[t * input_dim..(t + 1) * input_dim];
                for (r, &d) in dz.iter().enumerate() {
                    grad[b_start + r] += d;
                    if d == 0.0 {
                        continue;
                    }
                    let row = &w[r * cols..(r + 1) * cols];
                    let g = &mut grad[w_start + r * cols..w_start + (r + 1) * cols];
                    for j in 0..input_dim {
                        g[j] += d * x[j];
                        dxt[j] += d * row[j];
                    }
                    for j in 0..h {
                        g[input_dim + j] += d * h_prev[j];
                        dh_rec[j] += d * row[input_dim + j];
                    }
                }
            }

            if l == 0 {
                let e = lay.emb_dim;
                for (t, &tok) in tokens.iter().enumerate() {
                    let g = &mut grad[lay.emb.start + tok * e..lay.emb.start + (tok + 1) * e];
                    for (gj, dj) in g.iter_mut().zip(&dx[t * e..(t + 1) * e]) {
                        *gj += dj;
                    }
                }
            } else {
                dh_ext = dx;
            }
        }
        loss
    }

    fn tokens(&self, window: &[ContentId]) -> Vec<usize> {
        window.iter().map(|&id| self.token(id)).collect()
    }

    /// Next-request logits after `window`.
    pub fn logits(&self, window: &[ContentId]) -> Vec<f64> {
        assert!(!window.is_empty(), "empty input window");
        self.forward(&self.params, &self.tokens(window)).1
    }

    /// Forecast for the request following `window`.
    pub fn predict(&self, window: &[ContentId]) -> PopularityForecast {
        PopularityForecast::from_logits(&self.logits(window))
    }

    pub fn loss(&self, window: &[ContentId], target: ContentId) -> f64 {
        let p = softmax(&self.logits(window));
        -p[target.index()].max(f64::MIN_POSITIVE).ln()
    }

    /// Loss and its gradient with respect to [`params`](Self::params).
    pub fn loss_gradient(&self, window: &[ContentId], target: ContentId) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.params.len()];
        let loss = self.backprop(&self.params, &self.tokens(window), target.index(), &mut grad);
        (loss, grad)
    }

    /// Mean next-request cross-entropy over every full window of `ids`.
    pub fn mean_cross_entropy(&self, ids: &[ContentId]) -> Option<f64> {
        let w = self.cfg.input_window;
        if ids.len() <= w {
            return None;
        }
        let total: f64 = (0..ids.len() - w).map(|j| self.loss(&ids[j..j + w], ids[j + w])).sum();
        Some(total / (ids.len() - w) as f64)
    }

    fn train(&mut self, history: &[ContentId]) -> Result<f64> {
        let w = self.cfg.input_window;
        let tokens = self.tokens(history);
        let targets: Vec<usize> = history.iter().map(|id| id.index()).collect();
        let mut order: Vec<usize> = (0..history.len() - w).collect();
        let mut grad = vec![0.0; self.params.len()];
        let mut loss_sum = 0.0;
        let mut samples = 0usize;
        let lr = self.cfg.learning_rate;

        for _ in 0..self.cfg.epochs_per_update {
            order.shuffle(&mut self.rng);
            for batch in order.chunks(self.cfg.batch_size) {
                grad.iter_mut().for_each(|g| *g = 0.0);
                for &j in batch {
                    let loss = self.backprop(&self.params, &tokens[j..j + w], targets[j + w], &mut grad);
                    if !loss.is_finite() {
                        return Err(Error::NonFinite(format!("loss {loss}")));
                    }
                    loss_sum += loss;
                    samples += 1;
                }
                let scale = 1.0 / batch.len() as f64;
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt() * scale;
                if !norm.is_finite() {
                    return Err(Error::NonFinite("gradient norm".into()));
                }
                let step = if norm > self.cfg.grad_clip {
                    lr * scale * self.cfg.grad_clip / norm
                } else {
                    lr * scale
                };
                for (p, g) in self.params.iter_mut().zip(&grad) {
                    *p -= step * g;
                }
            }
        }
        Ok(loss_sum / samples as f64)
    }

    pub fn to_checkpoint_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 4 * 8 + 8 + self.params.len() * 8);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        for dim in self.dims() {
            out.extend_from_slice(&(dim as u32).to_le_bytes());
        }
        out.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    fn dims(&self) -> [usize; 6] {
        [
            self.cfg.layers,
            self.cfg.hidden_units,
            self.cfg.embedding_dim,
            self.cfg.vocab_cap,
            self.layout.catalog,
            self.cfg.input_window,
        ]
    }

    /// Restores weights from a checkpoint. The architecture fields of `cfg`
    /// are taken from the checkpoint; training settings come from `cfg`.
    pub fn from_checkpoint_bytes(bytes: &[u8], cfg: LstmConfig) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        let mut rest = bytes;
        let mut take = |n: usize| -> Result<&[u8]> {
            if rest.len() < n {
                return Err(bad("truncated"));
            }
            let (head, tail) = rest.split_at(n);
            rest = tail;
            Ok(head)
        };
        if take(8)? != CHECKPOINT_MAGIC {
            return Err(bad("bad magic bytes"));
        }
        let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize;
        if u32_at(take(4)?) != CHECKPOINT_VERSION as usize {
            return Err(bad("unsupported version"));
        }
        let mut dims = [0usize; 6];
        for d in &mut dims {
            *d = u32_at(take(4)?);
        }
        let count = u64::from_le_bytes(take(8)?.try_into().expect("8 bytes")) as usize;
        let cfg = LstmConfig {
            layers: dims[0],
            hidden_units: dims[1],
            embedding_dim: dims[2],
            vocab_cap: dims[3],
            input_window: dims[5],
            ..cfg
        };
        let mut model = LstmModel::new(cfg, dims[4])?;
        if count != model.params.len() {
            return Err(bad("parameter count does not match dimensions"));
        }
        let raw = take(count * 8)?;
        for (p, chunk) in model.params.iter_mut().zip(raw.chunks_exact(8)) {
            *p = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        }
        if !rest.is_empty() {
            return Err(bad("trailing bytes"));
        }
        Ok(model)
    }
}

impl PopularityModel for LstmModel {
    fn kind(&self) -> &'static str {
        "lstm"
    }

    fn train_update(&mut self, history: &[ContentId]) -> Result<UpdateStats> {
        if history.len() < self.min_history() {
            return Err(Error::config(format!(
                "lstm update needs at least {} requests, got {}",
                self.min_history(),
                history.len()
            )));
        }
        let backup = self.params.clone();
        let result = self.train(history).and_then(|loss| {
            let window = &history[history.len() - self.cfg.input_window..];
            let forecast = self.predict(window);
            if forecast.is_valid(1e-6) {
                Ok((loss, forecast))
            } else {
                Err(Error::NonFinite("forecast".into()))
            }
        });
        match result {
            Ok((loss, forecast)) => {
                self.forecast = forecast;
                Ok(UpdateStats { mean_loss: Some(loss) })
            }
            Err(e) => {
                self.params = backup;
                Err(e)
            }
        }
    }

    fn forecast(&self) -> &PopularityForecast {
        &self.forecast
    }

    fn min_history(&self) -> usize {
        self.cfg.input_window + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> LstmConfig {
        LstmConfig {
            layers: 2,
            hidden_units: 3,
            embedding_dim: 2,
            input_window: 4,
            vocab_cap: 3,
            ..LstmConfig::desk()
        }
    }

    fn ids(v: &[u32]) -> Vec<ContentId> {
        v.iter().map(|&i| ContentId(i)).collect()
    }

    #[test]
    fn untrained_forecast_is_uniform_and_predictions_normalize() {
        let m = LstmModel::new(tiny(), 5).unwrap();
        assert_eq!(m.forecast(), &PopularityForecast::uniform(5));
        assert!(m.predict(&ids(&[0, 4, 2, 1])).is_valid(1e-12));
    }

    #[test]
    fn out_of_vocabulary_ids_share_a_row() {
        let m = LstmModel::new(tiny(), 5).unwrap();
        assert_eq!(m.logits(&ids(&[3, 3])), m.logits(&ids(&[4, 3])));
        assert_ne!(m.logits(&ids(&[2, 3])), m.logits(&ids(&[4, 3])));
    }

    #[test]
    fn two_layer_gradient_matches_finite_differences() {
        let mut m = LstmModel::new(tiny(), 5).unwrap();
        let window = ids(&[1, 4, 0, 2]);
        let target = ContentId(3);
        let (_, grad) = m.loss_gradient(&window, target);
        let h = 1e-5;
        for (i, &g) in grad.iter().enumerate() {
            let orig = m.params()[i];
            m.params_mut()[i] = orig + h;
            let up = m.loss(&window, target);
            m.params_mut()[i] = orig - h;
            let down = m.loss(&window, target);
            m.params_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let denom = g.abs().max(numeric.abs()).max(1e-6);
            assert!((g - numeric).abs() / denom < 1e-4, "param {i}: {g} vs {numeric}");
        }
    }

    #[test]
    fn learns_a_dominant_id() {
        let cfg = LstmConfig {
            epochs_per_update: 3,
            ..LstmConfig::desk()
        };
        let mut m = LstmModel::new(cfg, 6).unwrap();
        let history: Vec<ContentId> = (0..400).map(|i| ContentId(if i % 10 == 0 { i % 6 } else { 3 })).collect();
        for _ in 0..3 {
            m.train_update(&history).unwrap();
        }
        assert_eq!(m.forecast().argmax(), ContentId(3));
        assert!(m.forecast().is_valid(1e-6));
    }

    #[test]
    fn non_finite_update_keeps_previous_weights() {
        let cfg = LstmConfig {
            learning_rate: 1e300,
            grad_clip: 1e300,
            ..tiny()
        };
        let mut m = LstmModel::new(cfg, 5).unwrap();
        let history = ids(&[0, 1, 2, 3, 4, 0, 1, 2, 3, 4, 0, 1, 2, 3, 4, 0, 1, 2, 3, 4]);
        let mut failed = false;
        for _ in 0..5 {
            let before = m.params().to_vec();
            let forecast = m.forecast().clone();
            if let Err(e) = m.train_update(&history) {
                assert!(matches!(e, Error::NonFinite(_)), "{e}");
                assert_eq!(m.params(), &before[..]);
                assert_eq!(m.forecast(), &forecast);
                failed = true;
                break;
            }
        }
        assert!(failed);
        assert!(m.params().iter().all(|p| p.is_finite()));
        assert!(m.forecast().is_valid(1e-6));
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut m = LstmModel::new(tiny(), 5).unwrap();
        m.train_update(&ids(&[0, 1, 2, 3, 4, 0, 1, 2, 3, 4])).unwrap();
        let bytes = m.to_checkpoint_bytes();
        assert_eq!(&bytes[..8], CHECKPOINT_MAGIC);
        let back = LstmModel::from_checkpoint_bytes(&bytes, LstmConfig::desk()).unwrap();
        assert_eq!(back.params(), m.params());
        assert_eq!(back.config().hidden_units, 3);
        assert_eq!(back.to_checkpoint_bytes(), bytes);

        assert!(LstmModel::from_checkpoint_bytes(&bytes[..bytes.len() - 1], tiny()).is_err());
        let mut corrupt = bytes.clone();
        corrupt[0] = b'X';
        assert!(LstmModel::from_checkpoint_bytes(&corrupt, tiny()).is_err());
    }

    #[test]
    fn short_history_is_rejected() {
        let mut m = LstmModel::new(tiny(), 5).unwrap();
        assert!(m.train_update(&ids(&[0, 1, 2])).is_err());
        assert_eq!(m.forecast(), &PopularityForecast::uniform(5));
    }
}
