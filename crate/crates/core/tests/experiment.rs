mod common;

use bossal::baselines::{CdoConfig, SasConfig};
use bossal::boss::BossConfig;
use bossal::harness::{
    aulc, mean_curve, mean_se, pick_frequencies, processed_instances, predicted_retrains,
    read_curves_csv, relative_curve, run_experiment, write_curves_csv, ExperimentConfig, Regime,
    Selector, Summary,
};
use bossal::model::TrainConfig;
use bossal::strategies::StrategyId;
use common::blobs;

fn small(selector: Selector) -> ExperimentConfig {
    ExperimentConfig {
        cycles: 6,
        repetitions: 3,
        train: TrainConfig {
            epochs: 40,
            ..TrainConfig::default()
        },
        ..ExperimentConfig::new(5, selector)
    }
}

fn xxs() -> BossConfig {
    BossConfig::preset("boss-xxs").unwrap()
}

#[test]
fn labeled_pool_grows_by_one_batch_per_cycle() {
    let ds = blobs(4, 8, 60, 1);
    let curves = run_experiment(&ds, &small(Selector::Strategy(StrategyId::Margin))).unwrap();
    assert_eq!(curves.len(), 3);
    for c in &curves {
        assert_eq!(c.records.len(), 7);
        for (a, r) in c.records.iter().enumerate() {
            assert_eq!(r.labeled_size, 5 * (a + 1));
            assert!((0.0..=1.0).contains(&r.accuracy));
        }
        let mut all: Vec<usize> = c.records.iter().flat_map(|r| r.batch.clone()).collect();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), 35);
    }
}

#[test]
fn counters_match_the_cost_predictor_every_cycle() {
    let ds = blobs(3, 6, 50, 2);
    let selectors = [
        Selector::Boss(BossConfig {
            num_batches: 20,
            assess_epochs: 3,
            ..BossConfig::default()
        }),
        Selector::Cdo(CdoConfig {
            m: 4,
            assess_epochs: 3,
            ..CdoConfig::default()
        }),
        Selector::SasBatch(SasConfig {
            anneal_steps: 6,
            greedy_steps: 2,
            assess_epochs: 3,
            ..SasConfig::default()
        }),
    ];
    for selector in selectors {
        let mut cfg = small(selector.clone());
        cfg.cycles = 3;
        cfg.repetitions = 2;
        for curve in run_experiment(&ds, &cfg).unwrap() {
            for r in &curve.records[1..] {
                let before = r.labeled_size - cfg.batch_size;
                assert_eq!(r.processed_instances, processed_instances(&selector, 5, before));
                assert_eq!(r.processed_instances, r.predicted_processed);
                assert_eq!(r.retrains, predicted_retrains(&selector, 5));
            }
        }
    }
}

#[test]
fn cost_spot_values_at_b50_l50() {
    let cdo = Selector::Cdo(CdoConfig::default());
    assert_eq!(processed_instances(&cdo, 50, 50), 75_500);
    let boss = Selector::Boss(BossConfig::default());
    assert_eq!(processed_instances(&boss, 50, 50), 10_000);
    let sas = Selector::SasBatch(SasConfig {
        anneal_steps: 150,
        greedy_steps: 10,
        ..SasConfig::default()
    });
    assert_eq!(processed_instances(&sas, 50, 50), 16_000);
    assert_eq!(processed_instances(&Selector::Strategy(StrategyId::Badge), 50, 50), 0);
}

#[test]
fn identical_configs_write_identical_curve_files() {
    let ds = blobs(4, 8, 60, 3);
    let cfg = small(Selector::Boss(xxs()));
    let write = || {
        let mut bytes = Vec::new();
        write_curves_csv(&mut bytes, &run_experiment(&ds, &cfg).unwrap()).unwrap();
        bytes
    };
    let first = write();
    assert_eq!(first, write());
    let curves = read_curves_csv(first.as_slice()).unwrap();
    assert_eq!(curves.len(), 3);
    assert!(curves[0].records[1].picked.is_some());
}

#[test]
fn random_sampling_improves_with_more_labels() {
    let ds = blobs(4, 8, 100, 4);
    let mut cfg = small(Selector::Strategy(StrategyId::Random));
    cfg.repetitions = 10;
    cfg.train.epochs = 200;
    let curves = run_experiment(&ds, &cfg).unwrap();
    let improved = curves
        .iter()
        .filter(|c| c.records.last().unwrap().accuracy >= c.records[0].accuracy)
        .count();
    assert!(improved >= 9, "{improved}/10");
}

#[test]
fn single_random_candidate_behaves_like_random_sampling() {
    let ds = blobs(4, 8, 100, 5);
    let mut random = small(Selector::Strategy(StrategyId::Random));
    random.repetitions = 10;
    let boss = ExperimentConfig {
        selector: Selector::Boss(BossConfig {
            num_batches: 1,
            strategies: vec![StrategyId::Random],
            assess_epochs: 1,
            ..BossConfig::default()
        }),
        ..random.clone()
    };
    let aulcs = |cfg: &ExperimentConfig| -> Vec<f64> {
        run_experiment(&ds, cfg)
            .unwrap()
            .iter()
            .map(|c| c.aulc(Regime::Full).unwrap())
            .collect()
    };
    let (r, b) = (mean_se(&aulcs(&random)), mean_se(&aulcs(&boss)));
    let pooled = (r.se * r.se + b.se * b.se).sqrt();
    assert!((r.mean - b.mean).abs() <= 3.0 * pooled + 1e-9, "{r:?} vs {b:?}");
}

#[test]
fn linear_curve_aulc() {
    let mut acc = vec![0.1];
    acc.extend((0..20).map(|i| 0.5 + 0.4 * i as f64 / 19.0));
    // mean of an arithmetic progression = mean of its endpoints
    assert!((aulc(&acc, Regime::Full).unwrap() - 0.7).abs() < 1e-12);
    let low: f64 = acc[1..=7].iter().sum::<f64>() / 7.0;
    assert!((aulc(&acc, Regime::Low).unwrap() - low).abs() < 1e-12);
}

#[test]
fn relative_curves_are_antisymmetric_and_center_on_random() {
    let ds = blobs(4, 8, 60, 6);
    let mut cfg = small(Selector::Strategy(StrategyId::Random));
    cfg.repetitions = 10;
    let curves = run_experiment(&ds, &cfg).unwrap();
    let baseline = mean_curve(&curves).unwrap();
    let a = curves[0].accuracies();
    let b = curves[1].accuracies();
    let ab = relative_curve(&a, &b).unwrap();
    let ba = relative_curve(&b, &a).unwrap();
    assert!(ab.iter().zip(&ba).all(|(x, y)| *x == -*y));
    assert!(relative_curve(&a, &a).unwrap().iter().all(|&v| v == 0.0));

    let per_rep: Vec<f64> = curves
        .iter()
        .map(|c| {
            let rel = relative_curve(&c.accuracies(), &baseline).unwrap();
            rel[1..].iter().sum::<f64>() / (rel.len() - 1) as f64
        })
        .collect();
    let m = mean_se(&per_rep);
    assert!(m.mean.abs() < 2.0 * m.se + 1e-12, "{m:?}");
}

#[test]
fn pick_frequencies_normalize_per_cycle() {
    let ds = blobs(4, 8, 60, 7);
    let curves = run_experiment(&ds, &small(Selector::Boss(xxs()))).unwrap();
    let table = pick_frequencies(&curves).unwrap();
    assert_eq!(table.rows.len(), 6);
    for row in &table.rows {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    let only_random = Selector::Boss(BossConfig {
        num_batches: 3,
        strategies: vec![StrategyId::Random],
        assess_epochs: 2,
        ..BossConfig::default()
    });
    let curves = run_experiment(&ds, &small(only_random)).unwrap();
    for row in pick_frequencies(&curves).unwrap().rows {
        assert!((row[0] - 1.0).abs() < 1e-12);
    }

    let plain = run_experiment(&ds, &small(Selector::Strategy(StrategyId::Random))).unwrap();
    assert!(pick_frequencies(&plain).unwrap_err().is_validation());
}

#[test]
fn oversized_budget_is_rejected() {
    let ds = blobs(2, 4, 20, 8);
    let mut cfg = small(Selector::Strategy(StrategyId::Random));
    cfg.batch_size = 10;
    let err = run_experiment(&ds, &cfg).unwrap_err();
    assert!(err.is_validation());
    assert!(err.to_string().contains("budget"));
}

#[test]
fn summary_round_trips_through_json() {
    let ds = blobs(4, 8, 60, 9);
    let curves = run_experiment(&ds, &small(Selector::Strategy(StrategyId::Coreset))).unwrap();
    let summary = Summary::new("coreset", 5, &curves).unwrap();
    assert!(summary.aulc.contains_key(&Regime::Full));
    assert!(!summary.aulc.contains_key(&Regime::Low));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("summary.json");
    summary.write(&path).unwrap();
    assert_eq!(Summary::read(&path).unwrap(), summary);
}
