//! Experiment grid: configuration, the four evaluation runs and their CSV
//! outputs.
//!
//! Configuration is a flat `key=value` text file; `#` starts a comment
//! line. Section prefixes group keys (`trace.*`, `predictor.*`,
//! `bandit.*`, `policy.<i>.*`). Policy entries inherit every `la_e2.*`,
//! `predictor.*` and `bandit.*` key and may override any of them under
//! their own prefix, e.g. `policy.3.bandit.tau=500`.
//!
//! Every CSV starts with a `#` comment line holding the fully resolved
//! configuration (defaults included), followed by a header row. Runs are
//! deterministic: the same configuration always produces the same bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::baselines::{FifoPolicy, KLruConfig, KLruPolicy, LfuConfig, LfuPolicy};
use crate::cache::{simulate_with, MetricsConfig, MetricsSeries, Policy, SimulationOutcome};
use crate::error::{Error, Result};
use crate::la_e2::{LaE2Config, LaE2Policy, LaE2Report, Mode};
use crate::oracle::{topk_containment, BeladyPolicy, ContainmentHistogram};
use crate::predictor::{LstmConfig, PredictorConfig, PredictorKind, ScheduledPredictor};
use crate::swucb::BanditConfig;
use crate::trace::{generate_synthetic, load_trace, SyntheticSpec, Trace};

/// Global keys and their defaults. `None` means "unset unless given".
const DEFAULTS: &[(&str, Option<&str>)] = &[
    ("seed", Some("0")),
    ("trace.path", None),
    ("trace.catalog_size", Some("500")),
    ("trace.length", Some("200000")),
    ("trace.zipf_exponent", Some("0.8")),
    ("trace.shift_period", Some("5000")),
    ("trace.shift_fraction", Some("0.1")),
    ("trace.seed", None),
    ("cache_sizes", Some("10,20")),
    ("metrics.window", Some("1000")),
    ("metrics.stride", Some("100")),
    ("topk_sweep", Some("1,K/4,K/2,K")),
    ("ablation.enabled", Some("true")),
    ("ablation.warmup", Some("30000")),
    ("la_e2.top_k", Some("K/2")),
    ("la_e2.warmup", Some("0")),
    ("predictor.kind", Some("decayed")),
    ("predictor.update_interval", Some("1000")),
    ("predictor.history_window", Some("none")),
    ("predictor.decay", Some("1")),
    ("predictor.lstm.layers", Some("1")),
    ("predictor.lstm.hidden_units", Some("32")),
    ("predictor.lstm.embedding_dim", Some("16")),
    ("predictor.lstm.input_window", Some("8")),
    ("predictor.lstm.learning_rate", Some("0.2")),
    ("predictor.lstm.epochs_per_update", Some("2")),
    ("predictor.lstm.batch_size", Some("16")),
    ("predictor.lstm.vocab_cap", Some("10000")),
    ("predictor.lstm.grad_clip", Some("5")),
    ("predictor.lstm.seed", None),
    ("bandit.gamma", Some("0.99")),
    ("bandit.tau", Some("1000")),
    ("bandit.b", Some("-1")),
    ("bandit.padding_cap", Some("10")),
];

/// Keys a policy entry may set besides the inherited LA-E2 sections.
const POLICY_KEYS: &[&str] = &["kind", "name", "k_hits", "window", "top_k", "warmup"];

/// A `k` that may be given relative to the cache size, e.g. `K/2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TopK {
    Fixed(usize),
    /// `K / divisor`, at least 1.
    Fraction(usize),
}

impl TopK {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "K" {
            return Ok(TopK::Fraction(1));
        }
        if let Some(d) = s.strip_prefix("K/") {
            let d: usize = d.parse().map_err(|_| Error::config(format!("bad top-k `{s}`")))?;
            if d == 0 {
                return Err(Error::config("top-k divisor must be positive"));
            }
            return Ok(TopK::Fraction(d));
        }
        let k: usize = s.parse().map_err(|_| Error::config(format!("bad top-k `{s}`")))?;
        if k == 0 {
            return Err(Error::config("top-k must be at least 1"));
        }
        Ok(TopK::Fixed(k))
    }

    pub fn resolve(self, cache_size: usize) -> usize {
        match self {
            TopK::Fixed(k) => k,
            TopK::Fraction(d) => (cache_size / d).max(1),
        }
    }

    pub fn label(self) -> String {
        match self {
            TopK::Fixed(k) => k.to_string(),
            TopK::Fraction(1) => "K".into(),
            TopK::Fraction(d) => format!("K/{d}"),
        }
    }
}

/// LA-E2 settings with `top_k` still relative to the cache size.
#[derive(Clone, Debug, PartialEq)]
pub struct LaE2Template {
    pub predictor: PredictorConfig,
    pub bandit: BanditConfig,
    pub top_k: TopK,
    pub mode: Mode,
    pub warmup_requests: usize,
}

impl LaE2Template {
    pub fn resolve(&self, cache_size: usize) -> LaE2Config {
        LaE2Config {
            predictor: self.predictor.clone(),
            bandit: self.bandit,
            top_k: self.top_k.resolve(cache_size),
            mode: self.mode,
            warmup_requests: self.warmup_requests,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PolicyKind {
    Fifo,
    KLru(KLruConfig),
    Lfu(LfuConfig),
    LaE2(LaE2Template),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicySpec {
    pub name: String,
    pub kind: PolicyKind,
}

enum Instance {
    Plain(Box<dyn Policy + Send>),
    LaE2(Box<LaE2Policy>),
}

impl PolicySpec {
    /// A fresh policy instance for one simulation.
    pub fn build(&self, cache_size: usize, catalog_size: usize) -> Result<Box<dyn Policy + Send>> {
        Ok(match self.instantiate(cache_size, catalog_size)? {
            Instance::Plain(p) => p,
            Instance::LaE2(p) => p,
        })
    }

    fn instantiate(&self, cache_size: usize, catalog_size: usize) -> Result<Instance> {
        Ok(match &self.kind {
            PolicyKind::Fifo => Instance::Plain(Box::new(FifoPolicy)),
            PolicyKind::KLru(cfg) => Instance::Plain(Box::new(KLruPolicy::new(*cfg)?)),
            PolicyKind::Lfu(cfg) => Instance::Plain(Box::new(LfuPolicy::new(*cfg)?)),
            PolicyKind::LaE2(t) => Instance::LaE2(Box::new(LaE2Policy::new(t.resolve(cache_size), catalog_size)?)),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TraceSource {
    File(PathBuf),
    Synthetic(SyntheticSpec),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    /// Every key with defaults applied, as written into CSV headers.
    pub resolved: BTreeMap<String, String>,
    pub seed: u64,
    pub trace: TraceSource,
    pub cache_sizes: Vec<usize>,
    pub metrics: MetricsConfig,
    pub policies: Vec<PolicySpec>,
    pub topk_sweep: Vec<TopK>,
    pub ablation_enabled: bool,
    pub ablation_warmup: usize,
    /// `out` key; left out of `resolved` since it does not affect results.
    pub out_dir: Option<PathBuf>,
    /// Settings shared by the top-k sweep, ablation and containment runs.
    pub la_e2: LaE2Template,
}

fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: idx + 1,
            message: format!("expected `key=value`, found `{line}`"),
        })?;
        let (k, v) = (k.trim(), v.trim());
        if map.insert(k.to_string(), v.to_string()).is_some() {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("duplicate key `{k}`"),
            });
        }
    }
    Ok(map)
}

fn is_inherited_key(k: &str) -> bool {
    DEFAULTS
        .iter()
        .any(|(d, _)| *d == k && (k.starts_with("predictor.") || k.starts_with("bandit.")))
}

/// Key lookup with an optional policy-local layer over the global one.
struct Lookup<'a> {
    global: &'a BTreeMap<String, String>,
    local: Option<(&'a BTreeMap<String, String>, String)>,
}

impl Lookup<'_> {
    fn raw(&self, key: &str) -> Option<&str> {
        if let Some((map, prefix)) = &self.local {
            if let Some(v) = map.get(&format!("{prefix}{key}")) {
                return Some(v);
            }
        }
        self.global.get(key).map(String::as_str)
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let v = self.raw(key).ok_or_else(|| Error::config(format!("missing `{key}`")))?;
        v.parse().map_err(|_| Error::config(format!("bad value `{v}` for `{key}`")))
    }

    fn optional<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None | Some("none") => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::config(format!("bad value `{v}` for `{key}`"))),
        }
    }

    /// Reads LA-E2 settings. `top_k` and `warmup` are looked up under the
    /// policy-local names first, then under `la_e2.*`.
    fn la_e2(&self, mode: Mode, seed: u64) -> Result<LaE2Template> {
        let local = |f: &str| {
            self.local
                .as_ref()
                .and_then(|(map, prefix)| map.get(&format!("{prefix}{f}")))
                .map(String::as_str)
        };
        let top_k = local("top_k").or(self.raw("la_e2.top_k")).unwrap_or("K/2");
        let warmup = local("warmup").or(self.raw("la_e2.warmup")).unwrap_or("0");
        let warmup_requests = warmup
            .parse()
            .map_err(|_| Error::config(format!("bad warm-up `{warmup}`")))?;
        let lstm = LstmConfig {
            layers: self.get("predictor.lstm.layers")?,
            hidden_units: self.get("predictor.lstm.hidden_units")?,
            embedding_dim: self.get("predictor.lstm.embedding_dim")?,
            input_window: self.get("predictor.lstm.input_window")?,
            learning_rate: self.get("predictor.lstm.learning_rate")?,
            epochs_per_update: self.get("predictor.lstm.epochs_per_update")?,
            batch_size: self.get("predictor.lstm.batch_size")?,
            vocab_cap: self.get("predictor.lstm.vocab_cap")?,
            grad_clip: self.get("predictor.lstm.grad_clip")?,
            seed: self.optional("predictor.lstm.seed")?.unwrap_or(seed),
        };
        let predictor = PredictorConfig {
            kind: PredictorKind::parse(self.raw("predictor.kind").unwrap_or("decayed"))?,
            update_interval: self.get("predictor.update_interval")?,
            history_window: self.optional("predictor.history_window")?,
            decay: self.get("predictor.decay")?,
            lstm,
        };
        let bandit = BanditConfig {
            gamma: self.get("bandit.gamma")?,
            tau: self.get("bandit.tau")?,
            b: self.get("bandit.b")?,
            padding_cap: self.get("bandit.padding_cap")?,
        };
        let template = LaE2Template {
            predictor,
            bandit,
            top_k: TopK::parse(top_k)?,
            mode,
            warmup_requests,
        };
        template.resolve(1).validate()?;
        Ok(template)
    }
}

fn parse_list<T, F>(s: &str, f: F) -> Result<Vec<T>>
where
    F: Fn(&str) -> Result<T>,
{
    s.split(',').map(str::trim).filter(|p| !p.is_empty()).map(f).collect()
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with_seed(text, None)
    }

    /// Parses config text, letting `seed_override` replace the `seed` key.
    pub fn parse_with_seed(text: &str, seed_override: Option<u64>) -> Result<Self> {
        Self::from_map(parse_pairs(text)?, seed_override)
    }

    pub fn load(path: impl AsRef<Path>, seed_override: Option<u64>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_with_seed(&text, seed_override)
    }

    pub fn from_map(mut user: BTreeMap<String, String>, seed_override: Option<u64>) -> Result<Self> {
        let out_dir = user.remove("out").map(PathBuf::from);
        for k in user.keys() {
            let known = DEFAULTS.iter().any(|(d, _)| d == k) || Self::policy_key(k).is_some();
            if !known {
                return Err(Error::config(format!("unknown key `{k}`")));
            }
        }
        let mut resolved = BTreeMap::new();
        for (k, v) in DEFAULTS {
            if let Some(v) = v {
                resolved.insert(k.to_string(), v.to_string());
            }
        }
        resolved.extend(user);
        if let Some(seed) = seed_override {
            resolved.insert("seed".into(), seed.to_string());
        }

        let global = Lookup {
            global: &resolved,
            local: None,
        };
        let seed: u64 = global.get("seed")?;

        let trace = match resolved.get("trace.path") {
            Some(p) => TraceSource::File(PathBuf::from(p)),
            None => {
                let spec = SyntheticSpec {
                    catalog_size: global.get("trace.catalog_size")?,
                    length: global.get("trace.length")?,
                    zipf_exponent: global.get("trace.zipf_exponent")?,
                    shift_period: global.optional("trace.shift_period")?,
                    shift_fraction: global.get("trace.shift_fraction")?,
                    rng_seed: global.optional("trace.seed")?.unwrap_or(seed),
                };
                spec.validate()?;
                TraceSource::Synthetic(spec)
            }
        };

        let cache_sizes = parse_list(&resolved["cache_sizes"], |s| {
            s.parse::<usize>()
                .ok()
                .filter(|&k| k > 0)
                .ok_or_else(|| Error::config(format!("bad cache size `{s}`")))
        })?;
        if cache_sizes.is_empty() {
            return Err(Error::config("cache_sizes must not be empty"));
        }

        let metrics = MetricsConfig {
            window: global.get("metrics.window")?,
            stride: global.get("metrics.stride")?,
        };
        if metrics.window == 0 || metrics.stride == 0 {
            return Err(Error::config("metrics window and stride must be positive"));
        }

        let la_e2 = global.la_e2(Mode::Full, seed)?;

        let mut indices: Vec<usize> = resolved.keys().filter_map(|k| Self::policy_key(k).map(|(i, _)| i)).collect();
        indices.sort_unstable();
        indices.dedup();
        let mut policies = Vec::new();
        for i in indices {
            policies.push(Self::policy_spec(&resolved, i, seed)?);
        }
        if policies.is_empty() {
            return Err(Error::config("at least one `policy.<i>.kind` is required"));
        }

        let topk_sweep = parse_list(&resolved["topk_sweep"], TopK::parse)?;
        let ablation_enabled = global.get("ablation.enabled")?;
        let ablation_warmup = global.get("ablation.warmup")?;

        Ok(ExperimentConfig {
            resolved,
            seed,
            trace,
            cache_sizes,
            metrics,
            policies,
            topk_sweep,
            ablation_enabled,
            ablation_warmup,
            out_dir,
            la_e2,
        })
    }

    fn policy_key(k: &str) -> Option<(usize, &str)> {
        let rest = k.strip_prefix("policy.")?;
        let (idx, field) = rest.split_once('.')?;
        let idx = idx.parse().ok()?;
        (POLICY_KEYS.contains(&field) || is_inherited_key(field)).then_some((idx, field))
    }

    fn policy_spec(resolved: &BTreeMap<String, String>, i: usize, seed: u64) -> Result<PolicySpec> {
        let prefix = format!("policy.{i}.");
        let look = Lookup {
            global: resolved,
            local: Some((resolved, prefix.clone())),
        };
        let local = |f: &str| resolved.get(&format!("{prefix}{f}")).map(String::as_str);
        let kind_str = local("kind").ok_or_else(|| Error::config(format!("missing `{prefix}kind`")))?;
        let la = |mode| look.la_e2(mode, seed);
        let (kind, default_name) = match kind_str {
            "fifo" => (PolicyKind::Fifo, "fifo".to_string()),
            "klru" => {
                let k_hits = local("k_hits").unwrap_or("2");
                let k_hits: usize = k_hits
                    .parse()
                    .ok()
                    .filter(|&k| k > 0)
                    .ok_or_else(|| Error::config(format!("bad `{prefix}k_hits`")))?;
                (PolicyKind::KLru(KLruConfig { k_hits }), format!("klru{k_hits}"))
            }
            "lfu" => {
                let window = match local("window") {
                    None | Some("none") => None,
                    Some(w) => Some(
                        w.parse::<usize>()
                            .ok()
                            .filter(|&w| w > 0)
                            .ok_or_else(|| Error::config(format!("bad `{prefix}window`")))?,
                    ),
                };
                let name = window.map_or("lfu".to_string(), |w| format!("lfu_w{w}"));
                (PolicyKind::Lfu(LfuConfig { window }), name)
            }
            "la_e2" => (PolicyKind::LaE2(la(Mode::Full)?), "la_e2".to_string()),
            "prediction_only" => (PolicyKind::LaE2(la(Mode::PredictionOnly)?), "prediction_only".to_string()),
            "e2_only" => (PolicyKind::LaE2(la(Mode::E2Only)?), "e2_only".to_string()),
            other => return Err(Error::config(format!("unknown policy kind `{other}`"))),
        };
        Ok(PolicySpec {
            name: local("name").map_or(default_name, str::to_string),
            kind,
        })
    }

    pub fn load_trace(&self) -> Result<Trace> {
        match &self.trace {
            TraceSource::File(p) => load_trace(p),
            TraceSource::Synthetic(spec) => generate_synthetic(spec),
        }
    }

    /// The reproducibility comment line heading every CSV.
    pub fn header_comment(&self, verb: &str) -> String {
        let body: Vec<String> = self.resolved.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("# lae2 {verb} seed={} config: {}\n", self.seed, body.join(";"))
    }
}

/// One simulated (policy, cache size) cell.
#[derive(Clone, Debug)]
pub struct CellResult {
    pub policy: String,
    pub cache_size: usize,
    pub outcome: Result<CellOutcome, String>,
}

#[derive(Clone, Debug)]
pub struct CellOutcome {
    pub hit_rate: f64,
    pub metrics: MetricsSeries,
    pub evictions: usize,
    pub report: Option<LaE2Report>,
}

fn run_cell(
    trace: &Trace,
    cache_size: usize,
    spec: &PolicySpec,
    metrics: MetricsConfig,
) -> Result<(SimulationOutcome, Option<LaE2Report>)> {
    match spec.instantiate(cache_size, trace.catalog_size())? {
        Instance::Plain(mut p) => Ok((simulate_with(trace, cache_size, &mut p, metrics)?, None)),
        Instance::LaE2(mut p) => {
            let out = simulate_with(trace, cache_size, &mut p, metrics)?;
            Ok((out, Some(p.report())))
        }
    }
}

fn cell(trace: &Trace, cache_size: usize, spec: &PolicySpec, metrics: MetricsConfig) -> CellResult {
    let outcome = run_cell(trace, cache_size, spec, metrics)
        .and_then(|(out, report)| {
            Ok(CellOutcome {
                hit_rate: out.hit_rate()?,
                evictions: out.evictions.len(),
                metrics: out.metrics,
                report,
            })
        })
        .map_err(|e| e.to_string());
    CellResult {
        policy: spec.name.clone(),
        cache_size,
        outcome,
    }
}

fn belady_cell(trace: &Trace, cache_size: usize, metrics: MetricsConfig) -> CellResult {
    let outcome = simulate_with(trace, cache_size, &mut BeladyPolicy::new(trace), metrics)
        .and_then(|out| {
            Ok(CellOutcome {
                hit_rate: out.hit_rate()?,
                evictions: out.evictions.len(),
                metrics: out.metrics,
                report: None,
            })
        })
        .map_err(|e| e.to_string());
    CellResult {
        policy: "belady".into(),
        cache_size,
        outcome,
    }
}

/// Runs `jobs` on `threads` workers, keeping input order.
fn run_parallel<J, R, F>(threads: usize, jobs: Vec<J>, f: F) -> Vec<R>
where
    J: Send,
    R: Send,
    F: Fn(J) -> R + Sync + Send,
{
    if threads <= 1 {
        return jobs.into_iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(|| jobs.into_par_iter().map(&f).collect()),
        Err(_) => jobs.into_iter().map(f).collect(),
    }
}

#[derive(Clone, Debug)]
pub struct ComparisonTable {
    pub cells: Vec<CellResult>,
}

impl ComparisonTable {
    pub fn get(&self, policy: &str, cache_size: usize) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.policy == policy && c.cache_size == cache_size)
    }

    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| c.outcome.is_err()).count()
    }
}

/// Every configured policy at every cache size, plus the Belady row.
pub fn run_comparison(cfg: &ExperimentConfig, trace: &Trace, threads: usize) -> ComparisonTable {
    let mut jobs = Vec::new();
    for spec in cfg.policies.iter().map(Some).chain(std::iter::once(None)) {
        for &k in &cfg.cache_sizes {
            jobs.push((spec, k));
        }
    }
    let cells = run_parallel(threads, jobs, |(spec, k)| match spec {
        Some(s) => cell(trace, k, s, cfg.metrics),
        None => belady_cell(trace, k, cfg.metrics),
    });
    ComparisonTable { cells }
}

/// Full-mode LA-E2 for every `k` of the sweep at every cache size.
pub fn run_topk_sweep(cfg: &ExperimentConfig, trace: &Trace, threads: usize) -> Vec<(TopK, CellResult)> {
    let mut jobs = Vec::new();
    for &k in &cfg.cache_sizes {
        for &top in &cfg.topk_sweep {
            jobs.push((top, k));
        }
    }
    run_parallel(threads, jobs, |(top, k)| {
        let spec = PolicySpec {
            name: format!("la_e2_k{}", top.label()),
            kind: PolicyKind::LaE2(LaE2Template {
                top_k: top,
                mode: Mode::Full,
                warmup_requests: 0,
                ..cfg.la_e2.clone()
            }),
        };
        (top, cell(trace, k, &spec, cfg.metrics))
    })
}

pub const ABLATION_ARMS: [&str; 3] = ["e2_only", "prediction_only", "la_e2"];

/// The three ablation arms at every cache size. The LA-E2 arm applies the
/// prediction-only warm-up gate up to `ablation.warmup`.
pub fn run_ablation(cfg: &ExperimentConfig, trace: &Trace, threads: usize) -> Vec<CellResult> {
    let mut jobs = Vec::new();
    for &k in &cfg.cache_sizes {
        for arm in ABLATION_ARMS {
            jobs.push((arm, k));
        }
    }
    run_parallel(threads, jobs, |(arm, k)| {
        let (mode, warmup) = match arm {
            "e2_only" => (Mode::E2Only, 0),
            "prediction_only" => (Mode::PredictionOnly, 0),
            _ => (Mode::Full, cfg.ablation_warmup),
        };
        let spec = PolicySpec {
            name: arm.to_string(),
            kind: PolicyKind::LaE2(LaE2Template {
                mode,
                warmup_requests: warmup,
                ..cfg.la_e2.clone()
            }),
        };
        cell(trace, k, &spec, cfg.metrics)
    })
}

/// Containment histograms of the configured predictor at every cache size.
pub fn run_containment(
    cfg: &ExperimentConfig,
    trace: &Trace,
    threads: usize,
) -> Vec<(usize, Result<ContainmentHistogram, String>)> {
    run_parallel(threads, cfg.cache_sizes.clone(), |k| {
        let hist = ScheduledPredictor::new(&cfg.la_e2.predictor, trace.catalog_size())
            .and_then(|mut p| topk_containment(trace, k, &mut p))
            .map_err(|e| e.to_string());
        (k, hist)
    })
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn comparison_csv(cfg: &ExperimentConfig, table: &ComparisonTable) -> String {
    let mut out = cfg.header_comment("run-comparison");
    out.push_str("policy,cache_size,hit_rate,error\n");
    for c in &table.cells {
        match &c.outcome {
            Ok(o) => {
                let _ = writeln!(out, "{},{},{},", csv_escape(&c.policy), c.cache_size, o.hit_rate);
            }
            Err(e) => {
                let _ = writeln!(out, "{},{},,{}", csv_escape(&c.policy), c.cache_size, csv_escape(e));
            }
        }
    }
    out
}

/// Run report: parameters, update counters and hit rates of every cell.
pub fn report_csv(cfg: &ExperimentConfig, verb: &str, cells: &[&CellResult]) -> String {
    let mut out = cfg.header_comment(verb);
    out.push_str(
        "policy,cache_size,mode,top_k,warmup,predictor,update_interval,history_window,decay,\
         gamma,tau,b,padding_cap,predictor_updates,failed_updates,evictions,hit_rate,final_windowed_hit_rate\n",
    );
    for c in cells {
        let Ok(o) = &c.outcome else {
            continue;
        };
        let la = match &o.report {
            Some(r) => {
                let p = &r.config.predictor;
                let b = &r.config.bandit;
                format!(
                    "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    r.config.mode,
                    r.config.top_k,
                    r.config.warmup_requests,
                    p.kind.as_str(),
                    p.update_interval,
                    p.history_len(),
                    p.decay,
                    b.gamma,
                    b.tau,
                    b.b,
                    b.padding_cap,
                    r.predictor_updates,
                    r.failed_updates.len()
                )
            }
            None => ",,,,,,,,,,,,".to_string(),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            csv_escape(&c.policy),
            c.cache_size,
            la,
            o.evictions,
            o.hit_rate,
            o.metrics.final_windowed_hit_rate().unwrap_or(0.0)
        );
    }
    out
}

pub fn topk_csv(cfg: &ExperimentConfig, rows: &[(TopK, CellResult)]) -> String {
    let mut out = cfg.header_comment("run-topk");
    out.push_str("cache_size,k,resolved_k,hit_rate,error\n");
    for (top, c) in rows {
        let resolved = top.resolve(c.cache_size);
        match &c.outcome {
            Ok(o) => {
                let _ = writeln!(out, "{},{},{},{},", c.cache_size, top.label(), resolved, o.hit_rate);
            }
            Err(e) => {
                let _ = writeln!(out, "{},{},{},,{}", c.cache_size, top.label(), resolved, csv_escape(e));
            }
        }
    }
    out
}

/// Windowed series of the three arms for one cache size.
pub fn ablation_series_csv(cfg: &ExperimentConfig, cache_size: usize, cells: &[CellResult]) -> String {
    let mut out = cfg.header_comment("run-ablation");
    out.push_str("t,arm,cumulative_hit_rate,windowed_hit_rate\n");
    for c in cells.iter().filter(|c| c.cache_size == cache_size) {
        if let Ok(o) = &c.outcome {
            for s in &o.metrics.samples {
                let _ = writeln!(out, "{},{},{},{}", s.t, c.policy, s.cumulative_hit_rate, s.windowed_hit_rate);
            }
        }
    }
    out
}

pub fn ablation_summary_csv(cfg: &ExperimentConfig, cells: &[CellResult]) -> String {
    let mut out = cfg.header_comment("run-ablation");
    out.push_str("cache_size,arm,final_hit_rate,error\n");
    for c in cells {
        match &c.outcome {
            Ok(o) => {
                let _ = writeln!(out, "{},{},{},", c.cache_size, c.policy, o.hit_rate);
            }
            Err(e) => {
                let _ = writeln!(out, "{},{},,{}", c.cache_size, c.policy, csv_escape(e));
            }
        }
    }
    out
}

pub fn containment_csv(cfg: &ExperimentConfig, hist: &ContainmentHistogram) -> String {
    let mut out = cfg.header_comment("run-containment");
    out.push_str(&hist.to_csv());
    out
}

/// Files written by one verb and the number of failed cells.
#[derive(Clone, Debug, Default)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub failed_cells: usize,
}

fn write_file(dir: &Path, name: &str, body: &str, summary: &mut RunSummary) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    summary.files.push(path);
    Ok(())
}

fn prepare(out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))
}

pub fn write_comparison(cfg: &ExperimentConfig, out_dir: &Path, threads: usize) -> Result<RunSummary> {
    prepare(out_dir)?;
    let trace = cfg.load_trace()?;
    let table = run_comparison(cfg, &trace, threads);
    let mut s = RunSummary {
        failed_cells: table.failures(),
        ..Default::default()
    };
    write_file(out_dir, "comparison.csv", &comparison_csv(cfg, &table), &mut s)?;
    let cells: Vec<&CellResult> = table.cells.iter().collect();
    write_file(out_dir, "comparison_report.csv", &report_csv(cfg, "run-comparison", &cells), &mut s)?;
    Ok(s)
}

pub fn write_topk(cfg: &ExperimentConfig, out_dir: &Path, threads: usize) -> Result<RunSummary> {
    prepare(out_dir)?;
    let trace = cfg.load_trace()?;
    let rows = run_topk_sweep(cfg, &trace, threads);
    let mut s = RunSummary {
        failed_cells: rows.iter().filter(|(_, c)| c.outcome.is_err()).count(),
        ..Default::default()
    };
    write_file(out_dir, "topk.csv", &topk_csv(cfg, &rows), &mut s)?;
    let cells: Vec<&CellResult> = rows.iter().map(|(_, c)| c).collect();
    write_file(out_dir, "topk_report.csv", &report_csv(cfg, "run-topk", &cells), &mut s)?;
    Ok(s)
}

pub fn write_ablation(cfg: &ExperimentConfig, out_dir: &Path, threads: usize) -> Result<RunSummary> {
    if !cfg.ablation_enabled {
        return Err(Error::config("ablation is disabled (`ablation.enabled=false`)"));
    }
    prepare(out_dir)?;
    let trace = cfg.load_trace()?;
    let cells = run_ablation(cfg, &trace, threads);
    let mut s = RunSummary {
        failed_cells: cells.iter().filter(|c| c.outcome.is_err()).count(),
        ..Default::default()
    };
    for &k in &cfg.cache_sizes {
        write_file(out_dir, &format!("ablation_K{k}.csv"), &ablation_series_csv(cfg, k, &cells), &mut s)?;
    }
    write_file(out_dir, "ablation_summary.csv", &ablation_summary_csv(cfg, &cells), &mut s)?;
    let refs: Vec<&CellResult> = cells.iter().collect();
    write_file(out_dir, "ablation_report.csv", &report_csv(cfg, "run-ablation", &refs), &mut s)?;
    Ok(s)
}

pub fn write_containment(cfg: &ExperimentConfig, out_dir: &Path, threads: usize) -> Result<RunSummary> {
    prepare(out_dir)?;
    let trace = cfg.load_trace()?;
    let mut s = RunSummary::default();
    for (k, hist) in run_containment(cfg, &trace, threads) {
        match hist {
            Ok(h) => write_file(out_dir, &format!("containment_K{k}.csv"), &containment_csv(cfg, &h), &mut s)?,
            Err(_) => s.failed_cells += 1,
        }
    }
    Ok(s)
}

/// Writes the configured trace in canonical form to `out_dir/trace.txt`.
pub fn write_generated_trace(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunSummary> {
    prepare(out_dir)?;
    let trace = cfg.load_trace()?;
    let mut s = RunSummary::default();
    write_file(out_dir, "trace.txt", &trace.to_canonical_string(), &mut s)?;
    Ok(s)
}
