//! Offline optimal replacement (Belady's MIN) and the top-k containment
//! analysis, which measures how often the optimal victim sits among a
//! predictor's `k` least popular cached contents.

use std::fmt::Write as _;

use crate::cache::{simulate_with, CacheView, MetricsConfig, Policy};
use crate::error::{Error, Result};
use crate::predictor::{rank_ascending, ScheduledPredictor};
use crate::trace::{ContentId, Trace};

/// Marker for "never requested again".
pub const NEVER: usize = usize::MAX;

/// Future occurrence positions of every content, for next-use queries.
#[derive(Clone, Debug)]
pub struct NextUseIndex {
    /// Occurrence timeslots of content `i` are `positions[offsets[i]..offsets[i + 1]]`.
    offsets: Vec<usize>,
    positions: Vec<usize>,
    /// Next timeslot requesting the same content as timeslot `t`.
    next_same: Vec<usize>,
}

impl NextUseIndex {
    pub fn build(trace: &Trace) -> Self {
        let n = trace.catalog_size();
        let mut next_same = vec![NEVER; trace.len()];
        let mut upcoming = vec![NEVER; n];
        let mut counts = vec![0usize; n];
        for (t, id) in trace.ids().enumerate().rev() {
            next_same[t] = upcoming[id.index()];
            upcoming[id.index()] = t;
            counts[id.index()] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for c in &counts {
            offsets.push(offsets.last().unwrap() + c);
        }
        let mut positions = vec![0; trace.len()];
        let mut fill = offsets.clone();
        for (t, id) in trace.ids().enumerate() {
            positions[fill[id.index()]] = t;
            fill[id.index()] += 1;
        }
        NextUseIndex {
            offsets,
            positions,
            next_same,
        }
    }

    /// First timeslot strictly after `t` that requests `id`, or [`NEVER`].
    pub fn next_use(&self, t: usize, id: ContentId) -> usize {
        let i = id.index();
        if i + 1 >= self.offsets.len() {
            return NEVER;
        }
        let occ = &self.positions[self.offsets[i]..self.offsets[i + 1]];
        let k = occ.partition_point(|&s| s <= t);
        occ.get(k).copied().unwrap_or(NEVER)
    }

    /// Next timeslot requesting the same content as timeslot `t`.
    pub fn next_same(&self, t: usize) -> usize {
        self.next_same[t]
    }
}

/// Evicts the cached content whose next use is farthest in the future.
/// Contents never used again win; ties go to the smallest id.
pub fn belady_evict(t: usize, cache: CacheView<'_>, next_use: &NextUseIndex) -> ContentId {
    cache
        .ids()
        .max_by(|&a, &b| {
            next_use
                .next_use(t, a)
                .cmp(&next_use.next_use(t, b))
                .then_with(|| b.cmp(&a))
        })
        .expect("belady_evict on an empty cache")
}

pub struct BeladyPolicy {
    index: NextUseIndex,
}

impl BeladyPolicy {
    pub fn new(trace: &Trace) -> Self {
        BeladyPolicy {
            index: NextUseIndex::build(trace),
        }
    }

    pub fn index(&self) -> &NextUseIndex {
        &self.index
    }
}

impl Policy for BeladyPolicy {
    fn name(&self) -> String {
        "belady".into()
    }

    fn choose_eviction(&mut self, t: usize, _content: ContentId, cache: CacheView<'_>) -> ContentId {
        belady_evict(t, cache, &self.index)
    }
}

pub fn optimal_hit_rate(trace: &Trace, capacity: usize) -> Result<f64> {
    if trace.is_empty() {
        return Err(Error::UndefinedRate);
    }
    let mut policy = BeladyPolicy::new(trace);
    simulate_with(trace, capacity, &mut policy, MetricsConfig::default())?.hit_rate()
}

/// Fraction of optimal evictions whose victim lies within the `k` least
/// popular cached contents, for each `k` in `1..=K`.
#[derive(Clone, Debug, PartialEq)]
pub struct ContainmentHistogram {
    pub cache_size: usize,
    pub events: usize,
    /// Entry `k - 1` holds the fraction for top-`k`.
    pub fractions: Vec<f64>,
}

impl ContainmentHistogram {
    fn from_ranks(cache_size: usize, rank_counts: &[usize]) -> Self {
        let events: usize = rank_counts.iter().sum();
        let mut fractions = Vec::with_capacity(cache_size);
        let mut acc = 0;
        for &count in &rank_counts[..cache_size] {
            acc += count;
            fractions.push(if events == 0 {
                1.0
            } else {
                acc as f64 / events as f64
            });
        }
        ContainmentHistogram {
            cache_size,
            events,
            fractions,
        }
    }

    pub fn at(&self, k: usize) -> f64 {
        self.fractions[k.clamp(1, self.cache_size) - 1]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,containment_fraction\n");
        for (i, f) in self.fractions.iter().enumerate() {
            let _ = writeln!(out, "{},{}", i + 1, f);
        }
        out
    }
}

struct ContainmentProbe<R> {
    belady: BeladyPolicy,
    rank: R,
    rank_counts: Vec<usize>,
}

impl<R> Policy for ContainmentProbe<R>
where
    R: FnMut(usize, ContentId, CacheView<'_>) -> Vec<ContentId>,
{
    fn name(&self) -> String {
        "belady-probe".into()
    }

    fn choose_eviction(&mut self, t: usize, content: ContentId, cache: CacheView<'_>) -> ContentId {
        let victim = belady_evict(t, cache, self.belady.index());
        let order = (self.rank)(t, content, cache);
        let pos = order
            .iter()
            .position(|&id| id == victim)
            .expect("ranking must cover every cached content");
        self.rank_counts[pos] += 1;
        victim
    }
}

/// Replays Belady over `trace` and records, at every full-cache miss, the
/// position of the optimal victim in `rank`'s ascending-popularity order.
///
/// `rank` is called as `rank(t, incoming, cache)` and must return every
/// cached id exactly once, least popular first.
pub fn topk_containment_with<R>(trace: &Trace, capacity: usize, rank: R) -> Result<ContainmentHistogram>
where
    R: FnMut(usize, ContentId, CacheView<'_>) -> Vec<ContentId>,
{
    let mut probe = ContainmentProbe {
        belady: BeladyPolicy::new(trace),
        rank,
        rank_counts: vec![0; capacity.max(1)],
    };
    simulate_with(trace, capacity, &mut probe, MetricsConfig::default())?;
    Ok(ContainmentHistogram::from_ranks(capacity, &probe.rank_counts))
}

/// Containment against a coarse-timescale predictor fed every request of
/// the trace on its normal update cadence.
pub fn topk_containment(
    trace: &Trace,
    capacity: usize,
    predictor: &mut ScheduledPredictor,
) -> Result<ContainmentHistogram> {
    // The predictor observes request t before any decision at t, as in the
    // la_e2 pipeline.
    let ids: Vec<ContentId> = trace.ids().collect();
    let mut next_to_observe = 0usize;
    topk_containment_with(trace, capacity, |t, _incoming, cache| {
        while next_to_observe <= t {
            predictor.observe(ids[next_to_observe]);
            next_to_observe += 1;
        }
        rank_ascending(predictor.forecast(), cache)
    })
    .inspect(|_h| {
        while next_to_observe < ids.len() {
            predictor.observe(ids[next_to_observe]);
            next_to_observe += 1;
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cache::{simulate, CacheState};
    use crate::predictor::{PredictorConfig, PredictorKind};

    fn ids(n: usize, v: &[u32]) -> Trace {
        Trace::from_ids(n, v.iter().copied()).unwrap()
    }

    #[test]
    fn next_use_queries() {
        let t = ids(3, &[0, 1, 0, 2, 0]);
        let idx = NextUseIndex::build(&t);
        assert_eq!(idx.next_use(0, ContentId(0)), 2);
        assert_eq!(idx.next_use(2, ContentId(0)), 4);
        assert_eq!(idx.next_use(4, ContentId(0)), NEVER);
        assert_eq!(idx.next_use(0, ContentId(2)), 3);
        assert_eq!(idx.next_same(0), 2);
        assert_eq!(idx.next_same(1), NEVER);
    }

    #[test]
    fn abcabc_keeps_a() {
        let t = ids(3, &[0, 1, 2, 0, 1, 2]);
        let out = simulate(&t, 2, &mut BeladyPolicy::new(&t)).unwrap();
        assert_eq!(out.evictions[0].t, 2);
        assert_eq!(out.evictions[0].evicted, ContentId(1));
        assert_eq!(out.metrics.total_hits, 2);
        assert!((optimal_hit_rate(&t, 2).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn never_used_again_is_evicted() {
        let t = ids(3, &[0, 1, 2, 1]);
        let idx = NextUseIndex::build(&t);
        let mut c = CacheState::new(2);
        c.insert(ContentId(0), 0);
        c.insert(ContentId(1), 1);
        assert_eq!(belady_evict(2, c.view(), &idx), ContentId(0));

        let mut single = CacheState::new(1);
        single.insert(ContentId(1), 1);
        assert_eq!(belady_evict(2, single.view(), &idx), ContentId(1));
    }

    #[test]
    fn ties_among_never_used_pick_smallest() {
        let t = ids(4, &[3, 1, 2]);
        let idx = NextUseIndex::build(&t);
        let mut c = CacheState::new(2);
        c.insert(ContentId(3), 0);
        c.insert(ContentId(1), 1);
        assert_eq!(belady_evict(2, c.view(), &idx), ContentId(1));
    }

    #[test]
    fn optimal_hit_rate_edge_cases() {
        let distinct = ids(20, &(0..20).collect::<Vec<_>>());
        assert_eq!(optimal_hit_rate(&distinct, 3).unwrap(), 0.0);
        let same = ids(1, &[0; 9]);
        assert!((optimal_hit_rate(&same, 1).unwrap() - 8.0 / 9.0).abs() < 1e-15);
        assert!(optimal_hit_rate(&ids(1, &[]), 1).is_err());
    }

    #[test]
    fn containment_full_k_is_one_and_future_ranker_is_exact() {
        let spec = crate::trace::SyntheticSpec {
            catalog_size: 60,
            length: 4_000,
            shift_period: Some(1_000),
            ..Default::default()
        };
        let t = crate::trace::generate_synthetic(&spec).unwrap();
        let idx = NextUseIndex::build(&t);
        // Ranking by how soon a content is needed again, soonest = most popular.
        let h = topk_containment_with(&t, 6, |now, _, cache| {
            let mut v: Vec<ContentId> = cache.ids().collect();
            v.sort_by_key(|&id| (std::cmp::Reverse(idx.next_use(now, id)), id));
            v
        })
        .unwrap();
        assert!(h.events > 0);
        assert_eq!(h.at(1), 1.0);
        assert_eq!(h.at(6), 1.0);

        let cfg = PredictorConfig {
            kind: PredictorKind::DecayedFrequency,
            ..PredictorConfig::default()
        };
        let mut p = ScheduledPredictor::new(&cfg, t.catalog_size()).unwrap();
        let h = topk_containment(&t, 6, &mut p).unwrap();
        assert_eq!(h.at(6), 1.0);
        for w in h.fractions.windows(2) {
            assert!(w[0] <= w[1]);
        }
        assert_eq!(p.observed(), t.len());
        assert!(h.to_csv().starts_with("k,containment_fraction\n1,"));
    }
}
