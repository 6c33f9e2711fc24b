use lae2_core::cache::{simulate_observed, PolicyDecision};
use lae2_core::experiment::{write_ablation, write_comparison, ExperimentConfig};
use lae2_core::la_e2::{LaE2Config, LaE2Policy, Mode};
use lae2_core::oracle::{optimal_hit_rate, BeladyPolicy};
use lae2_core::predictor::{LstmConfig, LstmModel, PopularityModel, PredictorConfig, PredictorKind};
use lae2_core::trace::{generate_synthetic, load_trace, write_trace};
use lae2_core::{simulate, SyntheticSpec};

fn small_spec(seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        catalog_size: 60,
        length: 6_000,
        shift_period: Some(1_500),
        rng_seed: seed,
        ..Default::default()
    }
}

#[test]
fn trace_file_round_trip_preserves_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.txt");
    let trace = generate_synthetic(&small_spec(1)).unwrap();
    write_trace(&trace, &path).unwrap();
    let back = load_trace(&path).unwrap();
    assert_eq!(back, trace);
    let a = simulate(&trace, 8, &mut BeladyPolicy::new(&trace)).unwrap();
    let b = simulate(&back, 8, &mut BeladyPolicy::new(&back)).unwrap();
    assert_eq!(a.evictions, b.evictions);
}

#[test]
fn lstm_driven_la_e2_stays_below_the_optimum() {
    let trace = generate_synthetic(&small_spec(2)).unwrap();
    let cfg = LaE2Config {
        predictor: PredictorConfig {
            kind: PredictorKind::Lstm,
            update_interval: 1_000,
            lstm: LstmConfig {
                epochs_per_update: 1,
                ..LstmConfig::desk()
            },
            ..Default::default()
        },
        top_k: 4,
        mode: Mode::Full,
        ..Default::default()
    };
    let mut policy = LaE2Policy::new(cfg, trace.catalog_size()).unwrap();
    let mut evictions = 0;
    let out = simulate_observed(&trace, 8, &mut policy, Default::default(), |_, d| {
        if let PolicyDecision::MissEvict(_) = d {
            evictions += 1;
        }
    })
    .unwrap();
    assert_eq!(evictions, out.evictions.len());
    assert_eq!(policy.report().predictor_updates, 6);
    assert!(policy.report().failed_updates.is_empty());
    assert!(out.hit_rate().unwrap() <= optimal_hit_rate(&trace, 8).unwrap());
}

#[test]
fn lstm_checkpoint_survives_a_file() {
    let trace = generate_synthetic(&small_spec(3)).unwrap();
    let ids: Vec<_> = trace.ids().take(800).collect();
    let cfg = LstmConfig::desk();
    let mut model = LstmModel::new(cfg.clone(), trace.catalog_size()).unwrap();
    model.train_update(&ids).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.bin");
    std::fs::write(&path, model.to_checkpoint_bytes()).unwrap();
    let loaded = LstmModel::from_checkpoint_bytes(&std::fs::read(&path).unwrap(), cfg).unwrap();
    assert_eq!(loaded.params(), model.params());
    let window = &ids[ids.len() - 8..];
    assert_eq!(loaded.predict(window), model.predict(window));
}

#[test]
fn experiment_files_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::parse(
        "trace.catalog_size=50\ntrace.length=3000\ntrace.shift_period=1000\ncache_sizes=5\n\
         ablation.warmup=1000\npolicy.0.kind=klru\npolicy.0.k_hits=3\n",
    )
    .unwrap();
    let s = write_comparison(&cfg, dir.path(), 1).unwrap();
    assert_eq!(s.failed_cells, 0);
    let csv = std::fs::read_to_string(dir.path().join("comparison.csv")).unwrap();
    assert!(csv.contains("\nklru3,5,"));
    assert!(csv.contains("\nbelady,5,"));

    let s = write_ablation(&cfg, dir.path(), 1).unwrap();
    let names: Vec<_> = s.files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    assert_eq!(names, ["ablation_K5.csv", "ablation_summary.csv", "ablation_report.csv"]);
}
