//! Popularity prediction on a coarse timescale.
//!
//! A [`PopularityModel`] turns a window of recent requests into a
//! [`PopularityForecast`], a probability for every content being the next
//! request. [`ScheduledPredictor`] feeds a model the request stream and
//! retrains it every `update_interval` requests; forecasts are frozen in
//! between. [`topk_candidates`] then narrows a full cache down to the `k`
//! contents predicted least popular.

mod lstm;

use std::collections::VecDeque;
use std::fmt::Write as _;

pub use lstm::{LstmConfig, LstmModel, CHECKPOINT_MAGIC};

use crate::cache::CacheView;
use crate::error::{Error, Result};
use crate::trace::ContentId;

/// Probability that the next request targets each content.
#[derive(Clone, Debug, PartialEq)]
pub struct PopularityForecast {
    scores: Vec<f64>,
}

impl PopularityForecast {
    pub fn uniform(catalog_size: usize) -> Self {
        PopularityForecast {
            scores: vec![1.0 / catalog_size as f64; catalog_size],
        }
    }

    /// Softmax of `logits`.
    pub fn from_logits(logits: &[f64]) -> Self {
        PopularityForecast {
            scores: softmax(logits),
        }
    }

    /// Normalizes non-negative weights; all-zero weights give a uniform forecast.
    pub fn from_weights(weights: Vec<f64>) -> Self {
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Self::uniform(weights.len());
        }
        PopularityForecast {
            scores: weights.into_iter().map(|w| w / total).collect(),
        }
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn score(&self, id: ContentId) -> f64 {
        self.scores.get(id.index()).copied().unwrap_or(0.0)
    }

    pub fn argmax(&self) -> ContentId {
        let mut best = 0;
        for (i, &s) in self.scores.iter().enumerate() {
            if s > self.scores[best] {
                best = i;
            }
        }
        ContentId(best as u32)
    }

    /// Non-negative, finite, and summing to one within `tol`.
    pub fn is_valid(&self, tol: f64) -> bool {
        self.scores.iter().all(|s| s.is_finite() && *s >= 0.0)
            && (self.scores.iter().sum::<f64>() - 1.0).abs() <= tol
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Cached ids sorted by ascending forecast score, ties by smallest id.
pub fn rank_ascending(forecast: &PopularityForecast, cache: CacheView<'_>) -> Vec<ContentId> {
    let mut ids: Vec<ContentId> = cache.ids().collect();
    ids.sort_unstable_by(|&a, &b| forecast.score(a).total_cmp(&forecast.score(b)).then(a.cmp(&b)));
    ids
}

/// The `min(k, |cache|)` cached contents with the smallest forecast scores,
/// least popular first.
pub fn topk_candidates(forecast: &PopularityForecast, cache: CacheView<'_>, k: usize) -> Vec<ContentId> {
    let mut ids = rank_ascending(forecast, cache);
    ids.truncate(k);
    ids
}

/// Summary of one successful model update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpdateStats {
    /// Mean training cross-entropy, for models trained by gradient descent.
    pub mean_loss: Option<f64>,
}

pub trait PopularityModel: Send {
    fn kind(&self) -> &'static str;

    /// Refits the model on `history` (oldest first). On error the previous
    /// model and forecast are kept.
    fn train_update(&mut self, history: &[ContentId]) -> Result<UpdateStats>;

    fn forecast(&self) -> &PopularityForecast;

    /// Shortest history `train_update` can use.
    fn min_history(&self) -> usize {
        1
    }
}

/// Exponentially decayed request counts over the history window.
///
/// The request `a` positions before the newest one weighs `decay^a`; with
/// `decay = 1` the forecast is the plain windowed frequency.
#[derive(Clone, Debug)]
pub struct DecayedFrequency {
    decay: f64,
    forecast: PopularityForecast,
}

impl DecayedFrequency {
    pub fn new(catalog_size: usize, decay: f64) -> Result<Self> {
        if !(decay > 0.0 && decay <= 1.0) {
            return Err(Error::config("decay must lie in (0, 1]"));
        }
        Ok(DecayedFrequency {
            decay,
            forecast: PopularityForecast::uniform(catalog_size),
        })
    }
}

impl PopularityModel for DecayedFrequency {
    fn kind(&self) -> &'static str {
        "decayed"
    }

    fn train_update(&mut self, history: &[ContentId]) -> Result<UpdateStats> {
        let n = self.forecast.scores.len();
        let mut weights = vec![0.0; n];
        let mut w = 1.0;
        for id in history.iter().rev() {
            weights[id.index()] += w;
            w *= self.decay;
        }
        self.forecast = PopularityForecast::from_weights(weights);
        Ok(UpdateStats { mean_loss: None })
    }

    fn forecast(&self) -> &PopularityForecast {
        &self.forecast
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PredictorKind {
    DecayedFrequency,
    Lstm,
}

impl PredictorKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "decayed" | "decayed_frequency" => Ok(PredictorKind::DecayedFrequency),
            "lstm" => Ok(PredictorKind::Lstm),
            other => Err(Error::config(format!("unknown predictor kind `{other}`"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PredictorKind::DecayedFrequency => "decayed",
            PredictorKind::Lstm => "lstm",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictorConfig {
    pub kind: PredictorKind,
    /// Requests between model updates.
    pub update_interval: usize,
    /// Requests fed to each update; `None` uses `update_interval`.
    pub history_window: Option<usize>,
    /// Per-request decay of [`DecayedFrequency`].
    pub decay: f64,
    pub lstm: LstmConfig,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig {
            kind: PredictorKind::DecayedFrequency,
            update_interval: 1000,
            history_window: None,
            decay: 1.0,
            lstm: LstmConfig::default(),
        }
    }
}

impl PredictorConfig {
    pub fn history_len(&self) -> usize {
        self.history_window.unwrap_or(self.update_interval)
    }

    pub fn validate(&self) -> Result<()> {
        if self.update_interval == 0 {
            return Err(Error::config("update_interval must be at least 1"));
        }
        if self.history_window == Some(0) {
            return Err(Error::config("history_window must be at least 1"));
        }
        if self.kind == PredictorKind::Lstm {
            self.lstm.validate()?;
        }
        Ok(())
    }

    pub fn build_model(&self, catalog_size: usize) -> Result<Box<dyn PopularityModel>> {
        self.validate()?;
        Ok(match self.kind {
            PredictorKind::DecayedFrequency => Box::new(DecayedFrequency::new(catalog_size, self.decay)?),
            PredictorKind::Lstm => Box::new(LstmModel::new(self.lstm.clone(), catalog_size)?),
        })
    }
}

/// What happened at an update boundary.
#[derive(Clone, Debug, PartialEq)]
pub enum UpdateEvent {
    Updated { index: usize, stats: UpdateStats },
    /// Not enough history yet; the model is untouched.
    Skipped,
    /// Training failed; the previous model stays in place.
    Failed { message: String },
}

/// Drives a model on the request stream: keeps the history window and
/// retrains every `update_interval` observed requests.
pub struct ScheduledPredictor {
    model: Box<dyn PopularityModel>,
    update_interval: usize,
    history_len: usize,
    history: VecDeque<ContentId>,
    scratch: Vec<ContentId>,
    observed: usize,
    updates: usize,
    failures: Vec<String>,
    losses: Vec<(usize, f64)>,
}

impl ScheduledPredictor {
    pub fn new(cfg: &PredictorConfig, catalog_size: usize) -> Result<Self> {
        Ok(Self::with_model(cfg.build_model(catalog_size)?, cfg.update_interval, cfg.history_len()))
    }

    pub fn with_model(model: Box<dyn PopularityModel>, update_interval: usize, history_len: usize) -> Self {
        let history_len = history_len.max(model.min_history());
        ScheduledPredictor {
            model,
            update_interval: update_interval.max(1),
            history_len,
            history: VecDeque::with_capacity(history_len + 1),
            scratch: Vec::with_capacity(history_len),
            observed: 0,
            updates: 0,
            failures: Vec::new(),
            losses: Vec::new(),
        }
    }

    /// Records one request; returns the update outcome on update boundaries.
    pub fn observe(&mut self, id: ContentId) -> Option<UpdateEvent> {
        self.history.push_back(id);
        if self.history.len() > self.history_len {
            self.history.pop_front();
        }
        self.observed += 1;
        if !self.observed.is_multiple_of(self.update_interval) {
            return None;
        }
        Some(self.update_now())
    }

    fn update_now(&mut self) -> UpdateEvent {
        if self.history.len() < self.model.min_history() {
            return UpdateEvent::Skipped;
        }
        self.scratch.clear();
        self.scratch.extend(self.history.iter().copied());
        match self.model.train_update(&self.scratch) {
            Ok(stats) => {
                self.updates += 1;
                if let Some(loss) = stats.mean_loss {
                    self.losses.push((self.updates, loss));
                }
                UpdateEvent::Updated {
                    index: self.updates,
                    stats,
                }
            }
            Err(e) => {
                let message = e.to_string();
                self.failures.push(message.clone());
                UpdateEvent::Failed { message }
            }
        }
    }

    pub fn forecast(&self) -> &PopularityForecast {
        self.model.forecast()
    }

    pub fn model(&self) -> &dyn PopularityModel {
        self.model.as_ref()
    }

    pub fn observed(&self) -> usize {
        self.observed
    }

    /// Number of successful model updates.
    pub fn updates(&self) -> usize {
        self.updates
    }

    pub fn failures(&self) -> &[String] {
        &self.failures
    }

    /// `(update_index, mean_loss)` for every successful update that reported a loss.
    pub fn losses(&self) -> &[(usize, f64)] {
        &self.losses
    }

    pub fn loss_csv(&self) -> String {
        loss_csv(&self.losses)
    }
}

pub fn loss_csv(losses: &[(usize, f64)]) -> String {
    let mut out = String::from("update_index,mean_loss\n");
    for (i, l) in losses {
        let _ = writeln!(out, "{i},{l}");
    }
    out
}
