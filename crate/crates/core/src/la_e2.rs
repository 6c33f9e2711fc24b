//! The learning-aided exploration-exploitation eviction policy.
//!
//! Every request is logged for the bandit and appended to the predictor's
//! history; the predictor retrains every `update_interval` requests. On a
//! full-cache miss the `top_k` cached contents with the lowest predicted
//! popularity become candidates and the sliding-window UCB score picks the
//! victim among them.
//!
//! The two ablations share the same machinery: [`Mode::PredictionOnly`]
//! evicts the least popular content outright, [`Mode::E2Only`] scores the
//! whole cache.

use std::fmt;

use crate::cache::{CacheView, Policy};
use crate::error::{Error, Result};
use crate::predictor::{topk_candidates, PredictorConfig, ScheduledPredictor};
use crate::swucb::{e2_evict, e2_evict_traced, BanditConfig, BanditState, ScoreRecord};
use crate::trace::ContentId;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Full,
    PredictionOnly,
    E2Only,
}

impl Mode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "full" | "la_e2" => Ok(Mode::Full),
            "prediction_only" => Ok(Mode::PredictionOnly),
            "e2_only" => Ok(Mode::E2Only),
            other => Err(Error::config(format!("unknown la_e2 mode `{other}`"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Full => "full",
            Mode::PredictionOnly => "prediction_only",
            Mode::E2Only => "e2_only",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LaE2Config {
    pub predictor: PredictorConfig,
    pub bandit: BanditConfig,
    /// Number of least-popular candidates handed to the bandit.
    pub top_k: usize,
    pub mode: Mode,
    /// Full mode behaves like prediction-only before this timeslot.
    pub warmup_requests: usize,
}

impl Default for LaE2Config {
    fn default() -> Self {
        LaE2Config {
            predictor: PredictorConfig::default(),
            bandit: BanditConfig::default(),
            top_k: 10,
            mode: Mode::Full,
            warmup_requests: 0,
        }
    }
}

impl LaE2Config {
    pub fn validate(&self) -> Result<()> {
        if self.top_k == 0 {
            return Err(Error::config("top_k must be at least 1"));
        }
        self.predictor.validate()?;
        self.bandit.validate()
    }
}

/// Parameters and counters of one run, for run reports.
#[derive(Clone, Debug, PartialEq)]
pub struct LaE2Report {
    pub config: LaE2Config,
    pub predictor_updates: usize,
    pub failed_updates: Vec<String>,
    pub bandit_evictions: usize,
}

pub struct LaE2Policy {
    cfg: LaE2Config,
    predictor: ScheduledPredictor,
    bandit: BanditState,
    evictions: usize,
    score_log: Option<Vec<ScoreRecord>>,
}

impl LaE2Policy {
    pub fn new(cfg: LaE2Config, catalog_size: usize) -> Result<Self> {
        cfg.validate()?;
        let predictor = ScheduledPredictor::new(&cfg.predictor, catalog_size)?;
        let bandit = BanditState::new(cfg.bandit)?;
        Ok(LaE2Policy {
            cfg,
            predictor,
            bandit,
            evictions: 0,
            score_log: None,
        })
    }

    /// Records every bandit decision for [`crate::swucb::score_records_csv`].
    pub fn with_score_log(mut self) -> Self {
        self.score_log = Some(Vec::new());
        self
    }

    pub fn config(&self) -> &LaE2Config {
        &self.cfg
    }

    pub fn predictor(&self) -> &ScheduledPredictor {
        &self.predictor
    }

    pub fn bandit(&self) -> &BanditState {
        &self.bandit
    }

    pub fn score_log(&self) -> &[ScoreRecord] {
        self.score_log.as_deref().unwrap_or(&[])
    }

    pub fn report(&self) -> LaE2Report {
        LaE2Report {
            config: self.cfg.clone(),
            predictor_updates: self.predictor.updates(),
            failed_updates: self.predictor.failures().to_vec(),
            bandit_evictions: self.evictions,
        }
    }

    /// The mode actually applied at timeslot `t`, after the warm-up gate.
    pub fn effective_mode(&self, t: usize) -> Mode {
        match self.cfg.mode {
            Mode::Full if t < self.cfg.warmup_requests => Mode::PredictionOnly,
            m => m,
        }
    }

    /// Contents the bandit chooses from at timeslot `t`.
    pub fn candidates(&self, t: usize, cache: CacheView<'_>) -> Vec<ContentId> {
        match self.effective_mode(t) {
            Mode::Full => topk_candidates(self.predictor.forecast(), cache, self.cfg.top_k),
            Mode::PredictionOnly => topk_candidates(self.predictor.forecast(), cache, 1),
            Mode::E2Only => cache.sorted_ids(),
        }
    }

    fn decide(&mut self, t: usize, cache: CacheView<'_>) -> Result<ContentId> {
        let candidates = self.candidates(t, cache);
        if self.effective_mode(t) == Mode::PredictionOnly {
            return candidates.first().copied().ok_or(Error::EmptyCandidates);
        }
        match self.score_log.as_mut() {
            Some(log) => e2_evict_traced(&self.bandit, &candidates, |r| log.push(r)),
            None => e2_evict(&self.bandit, &candidates),
        }
    }
}

impl Policy for LaE2Policy {
    fn name(&self) -> String {
        match self.cfg.mode {
            Mode::Full => format!("la_e2_k{}", self.cfg.top_k),
            m => m.as_str().to_string(),
        }
    }

    fn on_request(&mut self, t: usize, content: ContentId, _cache: CacheView<'_>) {
        self.bandit.record_request(t, content);
        if self.cfg.mode != Mode::E2Only {
            self.predictor.observe(content);
        }
    }

    fn choose_eviction(&mut self, t: usize, _content: ContentId, cache: CacheView<'_>) -> ContentId {
        self.bandit.advance(t);
        self.decide(t, cache).expect("a full cache always yields candidates")
    }

    fn on_eviction(&mut self, t: usize, evicted: ContentId) {
        self.bandit.record_eviction(t, evicted);
        self.evictions += 1;
    }
}
