//! Request traces: the data model, the canonical text format and a seeded
//! Zipf workload generator with popularity regime shifts.
//!
//! The text format is one header line `N=<catalog_size>` followed by one
//! decimal content id per line. Lines starting with `#` are comments.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Index of a content in the catalog, stored 0-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ContentId(pub u32);

impl ContentId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ContentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u32> for ContentId {
    fn from(v: u32) -> Self {
        ContentId(v)
    }
}

/// One content demand at a logical timeslot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Request {
    pub timeslot: usize,
    pub content: ContentId,
}

/// An ordered request sequence over a catalog of `catalog_size` contents.
///
/// Timeslots are always `0..len()`; every content id is `< catalog_size`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    catalog_size: usize,
    requests: Vec<Request>,
}

impl Trace {
    /// Builds a trace from raw ids, renumbering timeslots from 0.
    pub fn from_ids<I>(catalog_size: usize, ids: I) -> Result<Self>
    where
        I: IntoIterator,
        I::Item: Into<u64>,
    {
        if catalog_size == 0 {
            return Err(Error::config("catalog_size must be positive"));
        }
        let mut requests = Vec::new();
        for (timeslot, raw) in ids.into_iter().enumerate() {
            let raw = raw.into();
            if raw >= catalog_size as u64 {
                return Err(Error::ContentOutOfRange {
                    line: timeslot + 1,
                    id: raw,
                    catalog_size,
                });
            }
            requests.push(Request {
                timeslot,
                content: ContentId(raw as u32),
            });
        }
        Ok(Trace {
            catalog_size,
            requests,
        })
    }

    pub fn catalog_size(&self) -> usize {
        self.catalog_size
    }

    pub fn len(&self) -> usize {
        self.requests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requests.is_empty()
    }

    pub fn requests(&self) -> &[Request] {
        &self.requests
    }

    pub fn ids(&self) -> impl DoubleEndedIterator<Item = ContentId> + ExactSizeIterator + '_ {
        self.requests.iter().map(|r| r.content)
    }

    pub fn content_at(&self, t: usize) -> ContentId {
        self.requests[t].content
    }

    /// Serializes into the canonical text form.
    pub fn to_canonical_string(&self) -> String {
        let mut out = String::with_capacity(self.requests.len() * 6 + 16);
        out.push_str(&format!("N={}\n", self.catalog_size));
        for r in &self.requests {
            out.push_str(&r.content.0.to_string());
            out.push('\n');
        }
        out
    }
}

/// Parses the canonical text format.
pub fn parse_trace(text: &str) -> Result<Trace> {
    let mut catalog_size = None;
    let mut requests = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some(n) = catalog_size else {
            let value = line.strip_prefix("N=").ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("expected header `N=<catalog_size>`, found `{line}`"),
            })?;
            let n: usize = value.trim().parse().map_err(|e| Error::Parse {
                line: line_no,
                message: format!("bad catalog size `{value}`: {e}"),
            })?;
            if n == 0 {
                return Err(Error::Parse {
                    line: line_no,
                    message: "catalog size must be positive".into(),
                });
            }
            catalog_size = Some(n);
            continue;
        };
        let id: u64 = line.parse().map_err(|e| Error::Parse {
            line: line_no,
            message: format!("bad content id `{line}`: {e}"),
        })?;
        if id >= n as u64 {
            return Err(Error::ContentOutOfRange {
                line: line_no,
                id,
                catalog_size: n,
            });
        }
        requests.push(Request {
            timeslot: requests.len(),
            content: ContentId(id as u32),
        });
    }
    let catalog_size = catalog_size.ok_or(Error::Parse {
        line: 1,
        message: "missing header `N=<catalog_size>`".into(),
    })?;
    Ok(Trace {
        catalog_size,
        requests,
    })
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<Trace> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trace(&text)
}

pub fn write_trace(trace: &Trace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(trace.to_canonical_string().as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Parameters of a synthetic Zipf workload.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub catalog_size: usize,
    pub length: usize,
    pub zipf_exponent: f64,
    /// Requests between popularity regime shifts; `None` disables shifts.
    pub shift_period: Option<usize>,
    /// Fraction of the catalog whose top ranks are replaced at each shift.
    pub shift_fraction: f64,
    pub rng_seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            catalog_size: 500,
            length: 100_000,
            zipf_exponent: 0.8,
            shift_period: Some(5_000),
            shift_fraction: 0.1,
            rng_seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.catalog_size == 0 {
            return Err(Error::config("catalog_size must be positive"));
        }
        if self.catalog_size > u32::MAX as usize {
            return Err(Error::config("catalog_size does not fit a 32-bit content id"));
        }
        if !(self.zipf_exponent.is_finite() && self.zipf_exponent >= 0.0) {
            return Err(Error::config("zipf_exponent must be a finite value >= 0"));
        }
        if !(0.0..=1.0).contains(&self.shift_fraction) {
            return Err(Error::config("shift_fraction must lie in [0, 1]"));
        }
        if let Some(p) = self.shift_period {
            if p == 0 || p > self.length {
                return Err(Error::config("shift_period must lie in [1, length]"));
            }
        }
        Ok(())
    }
}

/// Zipf probabilities by 1-based rank: `r^-alpha / sum_j j^-alpha`.
pub fn zipf_pmf(alpha: f64, n: usize) -> Vec<f64> {
    assert!(n >= 1, "zipf_pmf needs at least one rank");
    let weights: Vec<f64> = (1..=n).map(|r| (r as f64).powf(-alpha)).collect();
    // Summing smallest-first keeps the normalizer accurate for long tails.
    let total: f64 = weights.iter().rev().sum();
    weights.into_iter().map(|w| w / total).collect()
}

/// Draws a Zipf workload over a random rank-to-id permutation.
///
/// Every `shift_period` requests the top `ceil(shift_fraction * N)` ranks
/// (at most `N / 2`) trade places with ids drawn without replacement from
/// the bottom half of the ranking, so previously cold contents become hot.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Trace> {
    spec.validate()?;
    let n = spec.catalog_size;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);

    let mut rank_to_id: Vec<u32> = (0..n as u32).collect();
    rank_to_id.shuffle(&mut rng);

    let mut cdf = zipf_pmf(spec.zipf_exponent, n);
    let mut acc = 0.0;
    for p in cdf.iter_mut() {
        acc += *p;
        *p = acc;
    }

    let bottom_start = n - n / 2;
    let bottom_len = n / 2;
    let swap_count = ((spec.shift_fraction * n as f64).ceil() as usize).min(bottom_len);

    let mut requests = Vec::with_capacity(spec.length);
    for t in 0..spec.length {
        if let Some(period) = spec.shift_period {
            if t > 0 && t % period == 0 && swap_count > 0 {
                let picks = index::sample(&mut rng, bottom_len, swap_count);
                for (rank, pick) in picks.iter().enumerate() {
                    rank_to_id.swap(rank, bottom_start + pick);
                }
            }
        }
        let u: f64 = rng.random();
        let rank = cdf.partition_point(|&c| c <= u).min(n - 1);
        requests.push(Request {
            timeslot: t,
            content: ContentId(rank_to_id[rank]),
        });
    }
    Ok(Trace {
        catalog_size: n,
        requests,
    })
}

/// The rank-to-id permutation in force at each shift boundary, for
/// inspecting a generated workload. Entry 0 is the initial permutation.
pub fn synthetic_rankings(spec: &SyntheticSpec) -> Result<Vec<Vec<ContentId>>> {
    spec.validate()?;
    let n = spec.catalog_size;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let mut rank_to_id: Vec<u32> = (0..n as u32).collect();
    rank_to_id.shuffle(&mut rng);
    let bottom_start = n - n / 2;
    let bottom_len = n / 2;
    let swap_count = ((spec.shift_fraction * n as f64).ceil() as usize).min(bottom_len);

    let snapshot = |p: &[u32]| p.iter().map(|&i| ContentId(i)).collect::<Vec<_>>();
    let mut out = vec![snapshot(&rank_to_id)];
    for t in 0..spec.length {
        if let Some(period) = spec.shift_period {
            if t > 0 && t % period == 0 && swap_count > 0 {
                let picks = index::sample(&mut rng, bottom_len, swap_count);
                for (rank, pick) in picks.iter().enumerate() {
                    rank_to_id.swap(rank, bottom_start + pick);
                }
                out.push(snapshot(&rank_to_id));
            }
        }
        let _: f64 = rng.random();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(trace: &Trace) -> Vec<usize> {
        let mut c = vec![0; trace.catalog_size()];
        for id in trace.ids() {
            c[id.index()] += 1;
        }
        c
    }

    #[test]
    fn parses_header_and_ids() {
        let t = parse_trace("N=3\n0\n1\n0\n").unwrap();
        assert_eq!(t.catalog_size(), 3);
        let got: Vec<_> = t.requests().iter().map(|r| (r.timeslot, r.content.0)).collect();
        assert_eq!(got, vec![(0, 0), (1, 1), (2, 0)]);
    }

    #[test]
    fn empty_body() {
        let t = parse_trace("N=5\n").unwrap();
        assert_eq!(t.catalog_size(), 5);
        assert!(t.is_empty());
    }

    #[test]
    fn out_of_range_id_names_line() {
        match parse_trace("N=3\n0\n7\n") {
            Err(Error::ContentOutOfRange { line, id, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(id, 7);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_line_names_line() {
        match parse_trace("N=3\n# comment\n0\nx\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_trace("0\n1\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_trace(""), Err(Error::Parse { .. })));
    }

    #[test]
    fn comments_are_skipped() {
        let t = parse_trace("# made by hand\nN=2\n1\n# mid\n0\n").unwrap();
        assert_eq!(t.ids().map(|c| c.0).collect::<Vec<_>>(), vec![1, 0]);
    }

    #[test]
    fn file_round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.txt");
        let text = "N=4\n3\n0\n0\n2\n1\n";
        std::fs::write(&p, text).unwrap();
        let t = load_trace(&p).unwrap();
        let q = dir.path().join("u.txt");
        write_trace(&t, &q).unwrap();
        assert_eq!(std::fs::read_to_string(&q).unwrap(), text);
    }

    #[test]
    fn zipf_pmf_examples() {
        assert_eq!(zipf_pmf(0.0, 4), vec![0.25; 4]);
        assert_eq!(zipf_pmf(2.7, 1), vec![1.0]);
        let p = zipf_pmf(1.0, 3);
        let want = [6.0 / 11.0, 3.0 / 11.0, 2.0 / 11.0];
        for (a, b) in p.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        for alpha in [0.0, 0.5, 0.8, 1.0, 2.0] {
            let s: f64 = zipf_pmf(alpha, 1000).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_when_alpha_zero() {
        let spec = SyntheticSpec {
            catalog_size: 4,
            length: 100_000,
            zipf_exponent: 0.0,
            shift_period: None,
            shift_fraction: 0.0,
            rng_seed: 7,
        };
        let t = generate_synthetic(&spec).unwrap();
        for c in counts(&t) {
            let f = c as f64 / t.len() as f64;
            assert!((0.24..=0.26).contains(&f), "frequency {f}");
        }
    }

    #[test]
    fn rank_one_frequency_matches_harmonic_number() {
        let spec = SyntheticSpec {
            catalog_size: 100,
            length: 100_000,
            zipf_exponent: 1.0,
            shift_period: None,
            shift_fraction: 0.0,
            rng_seed: 11,
        };
        let top = synthetic_rankings(&spec).unwrap()[0][0];
        let t = generate_synthetic(&spec).unwrap();
        let f = counts(&t)[top.index()] as f64 / t.len() as f64;
        let h100: f64 = (1..=100).map(|j| 1.0 / j as f64).sum();
        let want = 1.0 / h100;
        assert!((want - 0.1928).abs() < 1e-4);
        assert!((f - want).abs() <= 0.1 * want, "{f} vs {want}");
    }

    #[test]
    fn no_shift_keeps_permutation() {
        let spec = SyntheticSpec {
            shift_period: None,
            length: 20_000,
            ..SyntheticSpec::default()
        };
        assert_eq!(synthetic_rankings(&spec).unwrap().len(), 1);
    }

    #[test]
    fn shift_moves_cold_ids_to_top() {
        let spec = SyntheticSpec {
            catalog_size: 100,
            length: 3_000,
            shift_period: Some(1_000),
            shift_fraction: 0.1,
            ..SyntheticSpec::default()
        };
        let ranks = synthetic_rankings(&spec).unwrap();
        assert_eq!(ranks.len(), 3);
        let (before, after) = (&ranks[0], &ranks[1]);
        for r in 0..10 {
            let new_hot = after[r];
            let old_rank = before.iter().position(|&c| c == new_hot).unwrap();
            assert!(old_rank >= 50, "rank {r} came from old rank {old_rank}");
            // the displaced hot id now sits where the cold one was
            assert_eq!(after[old_rank], before[r]);
        }
        assert_eq!(&before[10..50], &after[10..50]);
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = SyntheticSpec {
            length: 10_000,
            ..SyntheticSpec::default()
        };
        assert_eq!(generate_synthetic(&spec).unwrap(), generate_synthetic(&spec).unwrap());
        let other = SyntheticSpec {
            rng_seed: 1,
            ..spec.clone()
        };
        assert_ne!(generate_synthetic(&spec).unwrap(), generate_synthetic(&other).unwrap());
    }

    #[test]
    fn larger_exponent_concentrates_rank_one() {
        let base = SyntheticSpec {
            catalog_size: 200,
            length: 100_000,
            shift_period: None,
            shift_fraction: 0.0,
            rng_seed: 3,
            zipf_exponent: 0.0,
        };
        let top = synthetic_rankings(&base).unwrap()[0][0];
        let mut last = 0usize;
        for alpha in [0.0, 0.4, 0.8, 1.2] {
            let t = generate_synthetic(&SyntheticSpec {
                zipf_exponent: alpha,
                ..base.clone()
            })
            .unwrap();
            let c = counts(&t)[top.index()];
            assert!(c >= last);
            last = c;
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let ok = SyntheticSpec::default();
        for bad in [
            SyntheticSpec { shift_fraction: 1.5, ..ok.clone() },
            SyntheticSpec { shift_period: Some(0), ..ok.clone() },
            SyntheticSpec { shift_period: Some(ok.length + 1), ..ok.clone() },
            SyntheticSpec { zipf_exponent: -1.0, ..ok.clone() },
            SyntheticSpec { catalog_size: 0, ..ok.clone() },
        ] {
            assert!(generate_synthetic(&bad).is_err());
        }
    }
}
