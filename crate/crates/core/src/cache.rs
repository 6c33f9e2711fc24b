//! The simulation engine.
//!
//! [`simulate`] replays a trace against a unit-size cache of capacity `K`:
//! a hit only refreshes bookkeeping, a miss with spare room inserts, and a
//! miss on a full cache asks the policy for a victim, evicts it and admits
//! the requested content.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::trace::{ContentId, Trace};

/// Engine-side bookkeeping for one cached content.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CachedEntry {
    pub id: ContentId,
    pub inserted_at: usize,
    pub last_access: usize,
}

/// The set of cached contents (at most `capacity`).
#[derive(Clone, Debug)]
pub struct CacheState {
    capacity: usize,
    slots: Vec<CachedEntry>,
    index: HashMap<ContentId, usize>,
}

impl CacheState {
    pub fn new(capacity: usize) -> Self {
        CacheState {
            capacity,
            slots: Vec::with_capacity(capacity),
            index: HashMap::with_capacity(capacity),
        }
    }

    pub fn view(&self) -> CacheView<'_> {
        CacheView { state: self }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.slots.len() >= self.capacity
    }

    pub fn contains(&self, id: ContentId) -> bool {
        self.index.contains_key(&id)
    }

    /// Inserts `id` at timeslot `t`. Panics if the cache is full or `id` is
    /// already cached.
    pub fn insert(&mut self, id: ContentId, t: usize) {
        assert!(!self.is_full(), "insert into a full cache");
        let prev = self.index.insert(id, self.slots.len());
        assert!(prev.is_none(), "{id} inserted twice");
        self.slots.push(CachedEntry {
            id,
            inserted_at: t,
            last_access: t,
        });
    }

    /// Records a hit on `id`; returns false if it is not cached.
    pub fn touch(&mut self, id: ContentId, t: usize) -> bool {
        match self.index.get(&id) {
            Some(&slot) => {
                self.slots[slot].last_access = t;
                true
            }
            None => false,
        }
    }

    pub fn remove(&mut self, id: ContentId) -> Option<CachedEntry> {
        let slot = self.index.remove(&id)?;
        let entry = self.slots.swap_remove(slot);
        if slot < self.slots.len() {
            self.index.insert(self.slots[slot].id, slot);
        }
        Some(entry)
    }
}

/// Read-only view of the cache handed to policies.
#[derive(Clone, Copy)]
pub struct CacheView<'a> {
    state: &'a CacheState,
}

impl<'a> CacheView<'a> {
    pub fn capacity(&self) -> usize {
        self.state.capacity
    }

    pub fn len(&self) -> usize {
        self.state.len()
    }

    pub fn is_empty(&self) -> bool {
        self.state.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.state.is_full()
    }

    pub fn contains(&self, id: ContentId) -> bool {
        self.state.contains(id)
    }

    pub fn entry(&self, id: ContentId) -> Option<&'a CachedEntry> {
        self.state.index.get(&id).map(|&s| &self.state.slots[s])
    }

    /// Cached entries in unspecified order.
    pub fn entries(&self) -> &'a [CachedEntry] {
        &self.state.slots
    }

    pub fn ids(&self) -> impl Iterator<Item = ContentId> + 'a {
        self.state.slots.iter().map(|e| e.id)
    }

    /// Cached ids in ascending order.
    pub fn sorted_ids(&self) -> Vec<ContentId> {
        let mut ids: Vec<_> = self.ids().collect();
        ids.sort_unstable();
        ids
    }
}

/// A replacement policy.
///
/// `on_request` sees every request before the engine acts on it;
/// `choose_eviction` is called only for misses on a full cache and must
/// return a currently cached id; `on_eviction` follows every eviction.
pub trait Policy {
    fn name(&self) -> String;

    fn on_request(&mut self, _t: usize, _content: ContentId, _cache: CacheView<'_>) {}

    fn choose_eviction(&mut self, t: usize, content: ContentId, cache: CacheView<'_>) -> ContentId;

    fn on_eviction(&mut self, _t: usize, _evicted: ContentId) {}
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn name(&self) -> String {
        (**self).name()
    }

    fn on_request(&mut self, t: usize, content: ContentId, cache: CacheView<'_>) {
        (**self).on_request(t, content, cache)
    }

    fn choose_eviction(&mut self, t: usize, content: ContentId, cache: CacheView<'_>) -> ContentId {
        (**self).choose_eviction(t, content, cache)
    }

    fn on_eviction(&mut self, t: usize, evicted: ContentId) {
        (**self).on_eviction(t, evicted)
    }
}

/// Outcome of one request.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolicyDecision {
    Hit,
    MissInsert,
    MissEvict(ContentId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Eviction {
    pub t: usize,
    pub evicted: ContentId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MetricsConfig {
    /// Length of the trailing window for windowed hit rates.
    pub window: usize,
    /// Sampling stride of the series.
    pub stride: usize,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            window: 1000,
            stride: 100,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsSample {
    pub t: usize,
    pub cumulative_hit_rate: f64,
    pub windowed_hit_rate: f64,
}

/// Hit counters plus the sampled cumulative and windowed hit-rate series.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsSeries {
    pub config: MetricsConfig,
    pub total_requests: usize,
    pub total_hits: usize,
    pub samples: Vec<MetricsSample>,
}

impl MetricsSeries {
    pub fn hit_rate(&self) -> Result<f64> {
        hit_rate(self)
    }

    pub fn final_windowed_hit_rate(&self) -> Option<f64> {
        self.samples.last().map(|s| s.windowed_hit_rate)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,cumulative_hit_rate,windowed_hit_rate\n");
        for s in &self.samples {
            let _ = writeln!(out, "{},{},{}", s.t, s.cumulative_hit_rate, s.windowed_hit_rate);
        }
        out
    }
}

/// Total hit rate, `hits / T`.
pub fn hit_rate(metrics: &MetricsSeries) -> Result<f64> {
    if metrics.total_requests == 0 {
        return Err(Error::UndefinedRate);
    }
    Ok(metrics.total_hits as f64 / metrics.total_requests as f64)
}

struct MetricsRecorder {
    config: MetricsConfig,
    hits: usize,
    window_hits: usize,
    recent: VecDeque<bool>,
    samples: Vec<MetricsSample>,
}

impl MetricsRecorder {
    fn new(config: MetricsConfig) -> Self {
        MetricsRecorder {
            config,
            hits: 0,
            window_hits: 0,
            recent: VecDeque::with_capacity(config.window),
            samples: Vec::new(),
        }
    }

    fn record(&mut self, t: usize, hit: bool, last: bool) {
        if hit {
            self.hits += 1;
            self.window_hits += 1;
        }
        self.recent.push_back(hit);
        if self.recent.len() > self.config.window && self.recent.pop_front() == Some(true) {
            self.window_hits -= 1;
        }
        if (t + 1).is_multiple_of(self.config.stride) || last {
            self.samples.push(MetricsSample {
                t,
                cumulative_hit_rate: self.hits as f64 / (t + 1) as f64,
                windowed_hit_rate: self.window_hits as f64 / self.recent.len() as f64,
            });
        }
    }

    fn finish(self, total_requests: usize) -> MetricsSeries {
        MetricsSeries {
            config: self.config,
            total_requests,
            total_hits: self.hits,
            samples: self.samples,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SimulationOutcome {
    pub metrics: MetricsSeries,
    pub evictions: Vec<Eviction>,
}

impl SimulationOutcome {
    pub fn hit_rate(&self) -> Result<f64> {
        self.metrics.hit_rate()
    }
}

/// Replays `trace` through a cache of `capacity` managed by `policy`.
pub fn simulate<P>(trace: &Trace, capacity: usize, policy: &mut P) -> Result<SimulationOutcome>
where
    P: Policy + ?Sized,
{
    simulate_with(trace, capacity, policy, MetricsConfig::default())
}

pub fn simulate_with<P>(
    trace: &Trace,
    capacity: usize,
    policy: &mut P,
    metrics: MetricsConfig,
) -> Result<SimulationOutcome>
where
    P: Policy + ?Sized,
{
    simulate_observed(trace, capacity, policy, metrics, |_, _| {})
}

/// Like [`simulate_with`], also reporting each request's decision.
pub fn simulate_observed<P, F>(
    trace: &Trace,
    capacity: usize,
    policy: &mut P,
    metrics: MetricsConfig,
    mut observe: F,
) -> Result<SimulationOutcome>
where
    P: Policy + ?Sized,
    F: FnMut(usize, PolicyDecision),
{
    if capacity == 0 {
        return Err(Error::config("cache capacity must be at least 1"));
    }
    if metrics.window == 0 || metrics.stride == 0 {
        return Err(Error::config("metrics window and stride must be positive"));
    }
    let mut cache = CacheState::new(capacity);
    let mut recorder = MetricsRecorder::new(metrics);
    let mut evictions = Vec::new();
    let total = trace.len();

    for req in trace.requests() {
        let (t, content) = (req.timeslot, req.content);
        policy.on_request(t, content, cache.view());

        let decision = if cache.touch(content, t) {
            PolicyDecision::Hit
        } else if !cache.is_full() {
            cache.insert(content, t);
            PolicyDecision::MissInsert
        } else {
            let victim = policy.choose_eviction(t, content, cache.view());
            if cache.remove(victim).is_none() {
                return Err(Error::ContractViolation { t, id: victim });
            }
            policy.on_eviction(t, victim);
            evictions.push(Eviction { t, evicted: victim });
            cache.insert(content, t);
            PolicyDecision::MissEvict(victim)
        };
        debug_assert!(cache.len() <= capacity);

        recorder.record(t, decision == PolicyDecision::Hit, t + 1 == total);
        observe(t, decision);
    }

    Ok(SimulationOutcome {
        metrics: recorder.finish(total),
        evictions,
    })
}
