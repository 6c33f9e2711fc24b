//! Sliding-window UCB scoring for eviction.
//!
//! At timeslot `t`, content `i` scores
//!
//! ```text
//! X(i) + B * sqrt(ln(min(t, tau)) / N(i))
//! X(i) = (1 / tau) * sum_{s = t - tau + 1 ..= t} gamma^(t - s) * [R_s == i]
//! N(i) = sum_{s = t - tau + 1 ..= t} [e_s == i]
//! ```
//!
//! with `B < 0`, and the victim is the candidate with the lowest score. A
//! low discounted request rate (exploitation) or a low recent eviction count
//! (exploration) both pull a content towards eviction. When `N(i) = 0`, or
//! when `min(t, tau) < 1`, the padding magnitude is clamped to
//! `padding_cap`.
//!
//! Both logs only hold entries with timeslot in `(t - tau, t]`.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::trace::ContentId;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BanditConfig {
    /// Discount factor, in `(0, 1)`.
    pub gamma: f64,
    /// Window length in timeslots.
    pub tau: usize,
    /// Padding coefficient; must be negative.
    pub b: f64,
    /// Padding magnitude used when a content has no eviction in the window.
    pub padding_cap: f64,
}

impl Default for BanditConfig {
    fn default() -> Self {
        BanditConfig {
            gamma: 0.99,
            tau: 1000,
            b: -1.0,
            padding_cap: 10.0,
        }
    }
}

impl BanditConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::config("bandit gamma must lie in (0, 1)"));
        }
        if self.tau == 0 {
            return Err(Error::config("bandit tau must be at least 1"));
        }
        if !(self.b < 0.0 && self.b.is_finite()) {
            return Err(Error::config("bandit B must be negative"));
        }
        if !(self.padding_cap > 0.0 && self.padding_cap.is_finite()) {
            return Err(Error::config("bandit padding_cap must be positive"));
        }
        Ok(())
    }

    /// Largest possible empirical popularity, `(1 - gamma^tau) / (tau (1 - gamma))`.
    pub fn max_popularity(&self) -> f64 {
        (1.0 - self.gamma.powi(self.tau as i32)) / (self.tau as f64 * (1.0 - self.gamma))
    }
}

/// Sliding request and eviction logs with per-content aggregates.
#[derive(Clone, Debug)]
pub struct BanditState {
    cfg: BanditConfig,
    now: usize,
    gamma_pow: Vec<f64>,
    request_log: VecDeque<(usize, ContentId)>,
    eviction_log: VecDeque<(usize, ContentId)>,
    requests_by_id: HashMap<ContentId, VecDeque<usize>>,
    evictions_by_id: HashMap<ContentId, usize>,
}

impl BanditState {
    pub fn new(cfg: BanditConfig) -> Result<Self> {
        cfg.validate()?;
        let mut gamma_pow = Vec::with_capacity(cfg.tau);
        let mut g = 1.0;
        for _ in 0..cfg.tau {
            gamma_pow.push(g);
            g *= cfg.gamma;
        }
        Ok(BanditState {
            cfg,
            now: 0,
            gamma_pow,
            request_log: VecDeque::with_capacity(cfg.tau),
            eviction_log: VecDeque::new(),
            requests_by_id: HashMap::new(),
            evictions_by_id: HashMap::new(),
        })
    }

    pub fn config(&self) -> &BanditConfig {
        &self.cfg
    }

    /// Current timeslot `t`.
    pub fn now(&self) -> usize {
        self.now
    }

    #[inline]
    fn in_window(&self, s: usize) -> bool {
        s + self.cfg.tau > self.now
    }

    /// Moves the clock to `t`, dropping log entries that left the window.
    pub fn advance(&mut self, t: usize) {
        debug_assert!(t >= self.now, "bandit clock went backwards");
        self.now = self.now.max(t);
        while let Some(&(s, id)) = self.request_log.front() {
            if self.in_window(s) {
                break;
            }
            self.request_log.pop_front();
            let q = self.requests_by_id.get_mut(&id).expect("logged request");
            q.pop_front();
            if q.is_empty() {
                self.requests_by_id.remove(&id);
            }
        }
        while let Some(&(s, id)) = self.eviction_log.front() {
            if self.in_window(s) {
                break;
            }
            self.eviction_log.pop_front();
            let n = self.evictions_by_id.get_mut(&id).expect("logged eviction");
            *n -= 1;
            if *n == 0 {
                self.evictions_by_id.remove(&id);
            }
        }
    }

    pub fn record_request(&mut self, t: usize, id: ContentId) {
        self.advance(t);
        self.request_log.push_back((t, id));
        self.requests_by_id.entry(id).or_default().push_back(t);
    }

    pub fn record_eviction(&mut self, t: usize, id: ContentId) {
        self.advance(t);
        self.eviction_log.push_back((t, id));
        *self.evictions_by_id.entry(id).or_insert(0) += 1;
    }

    pub fn request_log(&self) -> impl Iterator<Item = (usize, ContentId)> + '_ {
        self.request_log.iter().copied()
    }

    pub fn eviction_log(&self) -> impl Iterator<Item = (usize, ContentId)> + '_ {
        self.eviction_log.iter().copied()
    }

    /// Discounted request frequency of `id` over the window, normalized by `tau`.
    pub fn empirical_popularity(&self, id: ContentId) -> f64 {
        let Some(times) = self.requests_by_id.get(&id) else {
            return 0.0;
        };
        let sum: f64 = times.iter().map(|&s| self.gamma_pow[self.now - s]).sum();
        sum / self.cfg.tau as f64
    }

    /// Evictions of `id` within the window.
    pub fn eviction_count(&self, id: ContentId) -> usize {
        self.evictions_by_id.get(&id).copied().unwrap_or(0)
    }

    /// Signed padding term `B * sqrt(ln(min(t, tau)) / N)`.
    pub fn padding(&self, evictions: usize) -> f64 {
        let horizon = self.now.min(self.cfg.tau);
        if evictions == 0 || horizon < 1 {
            return self.cfg.b * self.cfg.padding_cap;
        }
        self.cfg.b * ((horizon as f64).ln() / evictions as f64).sqrt()
    }

    pub fn ucb_score(&self, id: ContentId) -> f64 {
        self.empirical_popularity(id) + self.padding(self.eviction_count(id))
    }

    pub fn score_breakdown(&self, id: ContentId) -> (f64, usize, f64) {
        let x = self.empirical_popularity(id);
        let n = self.eviction_count(id);
        (x, n, x + self.padding(n))
    }
}

/// Picks the candidate with the lowest UCB score. Exact ties go to the
/// larger eviction count, then to the smallest id.
pub fn e2_evict(state: &BanditState, candidates: &[ContentId]) -> Result<ContentId> {
    let mut best: Option<(f64, usize, ContentId)> = None;
    for &id in candidates {
        let (_, n, score) = state.score_breakdown(id);
        let better = match best {
            None => true,
            Some((bs, bn, bid)) => score.total_cmp(&bs).then(bn.cmp(&n)).then(id.cmp(&bid)).is_lt(),
        };
        if better {
            best = Some((score, n, id));
        }
    }
    best.map(|(_, _, id)| id).ok_or(Error::EmptyCandidates)
}

/// Score of one candidate at one eviction decision.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoreRecord {
    pub t: usize,
    pub candidate: ContentId,
    pub popularity: f64,
    pub evictions: usize,
    pub score: f64,
    pub chosen: bool,
}

/// [`e2_evict`], also reporting every candidate's score to `sink`.
pub fn e2_evict_traced<F>(state: &BanditState, candidates: &[ContentId], mut sink: F) -> Result<ContentId>
where
    F: FnMut(ScoreRecord),
{
    let victim = e2_evict(state, candidates)?;
    for &id in candidates {
        let (popularity, evictions, score) = state.score_breakdown(id);
        sink(ScoreRecord {
            t: state.now(),
            candidate: id,
            popularity,
            evictions,
            score,
            chosen: id == victim,
        });
    }
    Ok(victim)
}

pub fn score_records_csv(records: &[ScoreRecord]) -> String {
    let mut out = String::from("t,candidate,popularity,evictions,score,chosen\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.t, r.candidate, r.popularity, r.evictions, r.score, r.chosen as u8
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(i: u32) -> ContentId {
        ContentId(i)
    }

    fn cfg(gamma: f64, tau: usize) -> BanditConfig {
        BanditConfig {
            gamma,
            tau,
            ..BanditConfig::default()
        }
    }

    #[test]
    fn popularity_examples() {
        let mut s = BanditState::new(cfg(0.9, 8)).unwrap();
        s.record_request(9, c(1));
        s.record_request(10, c(1));
        assert!((s.empirical_popularity(c(1)) - 0.2375).abs() < 1e-15);
        assert_eq!(s.empirical_popularity(c(2)), 0.0);
    }

    #[test]
    fn popularity_saturates_at_geometric_sum() {
        let cf = cfg(0.7, 6);
        let mut s = BanditState::new(cf).unwrap();
        for t in 0..20 {
            s.record_request(t, c(0));
        }
        let want = (1.0 - 0.7f64.powi(6)) / (6.0 * 0.3);
        assert!((s.empirical_popularity(c(0)) - want).abs() < 1e-14);
        assert!((cf.max_popularity() - want).abs() < 1e-15);
    }

    #[test]
    fn eviction_window_is_half_open() {
        let mut s = BanditState::new(cfg(0.9, 5)).unwrap();
        s.record_eviction(5, c(3));
        s.record_eviction(7, c(3));
        s.advance(8);
        assert_eq!(s.eviction_count(c(3)), 2);
        s.advance(10);
        // 5 = t - tau is outside (t - tau, t]
        assert_eq!(s.eviction_count(c(3)), 1);
        assert_eq!(s.eviction_count(c(4)), 0);
    }

    #[test]
    fn score_example_with_evictions() {
        let mut s = BanditState::new(BanditConfig {
            gamma: 0.9,
            tau: 8,
            b: -1.0,
            padding_cap: 10.0,
        })
        .unwrap();
        s.record_eviction(4, c(1));
        s.record_eviction(6, c(1));
        s.record_request(9, c(1));
        s.record_request(10, c(1));
        let want = 0.2375 - (8f64.ln() / 2.0).sqrt();
        assert!((s.ucb_score(c(1)) - want).abs() < 1e-12);
        assert!((want - -0.78217).abs() < 1e-5);
    }

    #[test]
    fn never_evicted_gets_clamped_padding() {
        let mut s = BanditState::new(BanditConfig {
            padding_cap: 3.0,
            ..cfg(0.9, 8)
        })
        .unwrap();
        s.record_request(10, c(0));
        assert!((s.ucb_score(c(0)) - (1.0 / 8.0 - 3.0)).abs() < 1e-15);
        let fresh = BanditState::new(cfg(0.9, 8)).unwrap();
        assert_eq!(fresh.padding(3), -10.0);
    }

    #[test]
    fn e2_examples() {
        let mut s = BanditState::new(BanditConfig {
            gamma: 0.5,
            tau: 8,
            b: -1.0,
            padding_cap: 10.0,
        })
        .unwrap();
        assert!(matches!(e2_evict(&s, &[]), Err(Error::EmptyCandidates)));
        s.record_request(9, c(0));
        assert_eq!(e2_evict(&s, &[c(0)]).unwrap(), c(0));

        // equal N > 0, lower popularity loses
        s.record_eviction(9, c(1));
        s.record_eviction(9, c(2));
        s.record_request(10, c(2));
        assert_eq!(e2_evict(&s, &[c(1), c(2)]).unwrap(), c(1));
        assert_eq!(e2_evict(&s, &[c(2), c(1)]).unwrap(), c(1));
    }

    #[test]
    fn never_evicted_is_explored_first() {
        // a: X = 0.3, N = 4;  b: X = 0.3, N = 0
        let mut s = BanditState::new(BanditConfig {
            gamma: 0.5,
            tau: 8,
            b: -1.0,
            padding_cap: 10.0,
        })
        .unwrap();
        let (a, b) = (c(0), c(1));
        for t in [3, 4, 5, 6] {
            s.record_eviction(t, a);
        }
        // identical request histories give identical popularity
        s.record_request(9, a);
        s.record_request(9, b);
        s.record_request(10, a);
        s.record_request(10, b);
        assert_eq!(s.empirical_popularity(a), s.empirical_popularity(b));
        assert_eq!(e2_evict(&s, &[a, b]).unwrap(), b);
        let pad_a = (8f64.ln() / 4.0).sqrt();
        assert!((pad_a - 0.721).abs() < 1e-3);
    }

    #[test]
    fn tie_prefers_larger_eviction_count_then_smaller_id() {
        let mut s = BanditState::new(cfg(0.5, 4)).unwrap();
        s.advance(3);
        assert_eq!(e2_evict(&s, &[c(5), c(2), c(7)]).unwrap(), c(2));
    }

    #[test]
    fn debug_csv() {
        let mut s = BanditState::new(cfg(0.5, 4)).unwrap();
        s.record_request(1, c(0));
        let mut rec = vec![];
        let v = e2_evict_traced(&s, &[c(0), c(1)], |r| rec.push(r)).unwrap();
        assert_eq!(v, c(1));
        let csv = score_records_csv(&rec);
        assert!(csv.starts_with("t,candidate,popularity,evictions,score,chosen\n"));
        assert!(csv.lines().nth(2).unwrap().ends_with(",1"));
    }

    #[test]
    fn invalid_configs() {
        for bad in [
            BanditConfig { gamma: 1.0, ..BanditConfig::default() },
            BanditConfig { gamma: 0.0, ..BanditConfig::default() },
            BanditConfig { tau: 0, ..BanditConfig::default() },
            BanditConfig { b: 0.0, ..BanditConfig::default() },
            BanditConfig { padding_cap: 0.0, ..BanditConfig::default() },
        ] {
            assert!(BanditState::new(bad).is_err());
        }
    }

    proptest! {
        #[test]
        fn popularity_bounded_and_window_forgets(
            events in proptest::collection::vec((0u32..6, any::<bool>()), 1..200),
            gamma in 0.05f64..0.999,
            tau in 1usize..40,
        ) {
            let cf = cfg(gamma, tau);
            let mut s = BanditState::new(cf).unwrap();
            for (t, &(id, evict)) in events.iter().enumerate() {
                s.record_request(t, c(id));
                if evict {
                    s.record_eviction(t, c((id + 1) % 6));
                }
                for i in 0..6 {
                    let x = s.empirical_popularity(c(i));
                    prop_assert!(x >= 0.0 && x <= cf.max_popularity() + 1e-12);
                }
            }
            let start = events.len();
            for t in start..start + tau {
                s.record_request(t, c(100));
            }
            for i in 0..6 {
                prop_assert_eq!(s.empirical_popularity(c(i)), 0.0);
                prop_assert_eq!(s.eviction_count(c(i)), 0);
            }
        }

        #[test]
        fn an_extra_request_raises_the_score(
            events in proptest::collection::vec((0u32..4, any::<bool>()), 2..100),
            target in 0u32..4,
        ) {
            // Two histories differing only in the newest request, which goes
            // to `target` in the second one.
            prop_assume!(events.last().unwrap().0 != target);
            let build = |redirect: bool| {
                let mut s = BanditState::new(cfg(0.9, 16)).unwrap();
                for (t, &(id, evict)) in events.iter().enumerate() {
                    let id = if redirect && t + 1 == events.len() { target } else { id };
                    s.record_request(t, c(id));
                    if evict {
                        s.record_eviction(t, c((events[t].0 + 1) % 4));
                    }
                }
                s
            };
            let (base, boosted) = (build(false), build(true));
            prop_assert!(boosted.ucb_score(c(target)) > base.ucb_score(c(target)));
            let all = [c(0), c(1), c(2), c(3)];
            if e2_evict(&base, &all).unwrap() != c(target) {
                prop_assert_ne!(e2_evict(&boosted, &all).unwrap(), c(target));
            }
        }

        #[test]
        fn e2_picks_a_candidate(ids in proptest::collection::vec(0u32..20, 1..10), seed in 0usize..50) {
            let mut s = BanditState::new(cfg(0.8, 10)).unwrap();
            for t in 0..seed {
                s.record_request(t, c((t * 7 % 20) as u32));
                if t % 3 == 0 {
                    s.record_eviction(t, c((t % 20) as u32));
                }
            }
            let cand: Vec<ContentId> = ids.into_iter().map(c).collect();
            prop_assert!(cand.contains(&e2_evict(&s, &cand).unwrap()));
        }
    }
}
