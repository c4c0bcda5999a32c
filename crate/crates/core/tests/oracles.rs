mod common;

use bossal::baselines::{cdo_select, sas_select, CdoConfig, SasConfig};
use bossal::boss::{
    assess_batch, boss_select, generate_candidate_batches, infer_pseudo_labels, BossConfig,
};
use bossal::data::{Dataset, PoolState};
use bossal::exec::Exec;
use bossal::model::{evaluate, train_head, LinearHead, LossKind, TrainConfig};
use bossal::strategies::StrategyId;
use bossal::{CostMeter, CycleContext};
use common::{blobs, Fixture};

fn ctx_for<'a>(
    dataset: &'a Dataset,
    pool: &'a PoolState,
    head: &'a LinearHead,
    train: &'a TrainConfig,
    meter: &'a CostMeter,
    b: usize,
) -> CycleContext<'a> {
    CycleContext {
        dataset,
        pool,
        head,
        batch_size: b,
        cycle: 1,
        train,
        targets: dataset.labels(),
        meter,
    }
}

#[test]
fn floor_division_gives_two_batches_per_strategy() {
    let fx = Fixture::new(blobs(4, 6, 60, 1), 8, 20);
    let cfg = BossConfig {
        num_batches: 25,
        assess_epochs: 5,
        ..BossConfig::default()
    };
    let batches = generate_candidate_batches(&fx.ctx(5, 1), &cfg).unwrap();
    assert_eq!(batches.len(), 20);
    for id in StrategyId::ALL {
        assert_eq!(batches.iter().filter(|c| c.origin == id).count(), 2);
    }
    let bound = cfg.pool_size_bound(5, fx.pool.unlabeled().len());
    for c in &batches {
        assert_eq!(c.indices.len(), 5);
        let mut sorted = c.indices.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 5);
        assert!(c.indices.iter().all(|i| fx.pool.unlabeled().binary_search(i).is_ok()));
        assert!((5..=bound).contains(&c.candidate_pool_size));
        assert!(c.score.is_none());
    }
}

#[test]
fn tiny_k_max_collapses_pool_size_to_batch_size() {
    let fx = Fixture::new(blobs(3, 4, 40, 2), 6, 20);
    let cfg = BossConfig {
        num_batches: 10,
        k_max: Some(2),
        ..BossConfig::default()
    };
    for c in generate_candidate_batches(&fx.ctx(4, 3), &cfg).unwrap() {
        assert_eq!(c.candidate_pool_size, 4);
    }
}

#[test]
fn generation_rejects_small_pools_and_small_t() {
    let fx = Fixture::new(blobs(2, 3, 20, 3), 4, 10);
    let too_small_t = BossConfig {
        num_batches: 9,
        ..BossConfig::default()
    };
    assert!(generate_candidate_batches(&fx.ctx(2, 1), &too_small_t)
        .unwrap_err()
        .is_validation());
    let big_b = fx.pool.unlabeled().len() + 1;
    assert!(generate_candidate_batches(&fx.ctx(big_b, 1), &BossConfig::default())
        .unwrap_err()
        .is_validation());
}

#[test]
fn selection_is_deterministic_and_dominant() {
    let fx = Fixture::new(blobs(4, 8, 60, 4), 8, 30);
    let cfg = BossConfig {
        num_batches: 20,
        assess_epochs: 10,
        seed: 99,
        ..BossConfig::default()
    };
    let first = boss_select(&fx.ctx(4, 2), &cfg).unwrap();
    let again = boss_select(&fx.ctx(4, 2), &cfg).unwrap();
    assert_eq!(first, again);
    let sequential = boss_select(
        &fx.ctx(4, 2),
        &BossConfig {
            exec: Exec::Sequential,
            ..cfg.clone()
        },
    )
    .unwrap();
    assert_eq!(first, sequential);
    let scores = first.scores();
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    assert_eq!(first.winning_batch().score, Some(min));
    assert_eq!(scores.iter().position(|&s| s == min), Some(first.winner));
}

#[test]
fn assessment_matches_an_independent_retrain() {
    let fx = Fixture::new(blobs(3, 5, 40, 5), 6, 20);
    let cfg = BossConfig {
        assess_epochs: 7,
        loss: LossKind::Brier,
        seed: 5,
        ..BossConfig::default()
    };
    let ctx = fx.ctx(3, 4);
    let batch = fx.pool.unlabeled()[..3].to_vec();
    let score = assess_batch(&ctx, &batch, &cfg).unwrap();
    assert_eq!(score, assess_batch(&ctx, &batch, &cfg).unwrap());

    let mut extended = fx.pool.labeled().to_vec();
    extended.extend_from_slice(&batch);
    let head = train_head(
        &fx.dataset,
        &extended,
        fx.dataset.labels(),
        &ctx.assessment_config(5, 7),
    )
    .unwrap();
    let expected = evaluate(&head, &fx.dataset, fx.pool.eval(), fx.dataset.labels(), LossKind::Brier).unwrap();
    assert_eq!(score, expected);
    assert_eq!(fx.meter.snapshot().retrains, 2);
}

#[test]
fn batch_covering_the_missing_class_scores_lower() {
    let dataset = blobs(2, 4, 60, 6);
    let labels = dataset.labels();
    let class_of = |c: u32| (0..dataset.len()).filter(move |&i| labels[i] == c);
    let zeros: Vec<usize> = class_of(0).collect();
    let ones: Vec<usize> = class_of(1).collect();
    let labeled = zeros[..5].to_vec();
    let eval: Vec<usize> = zeros[30..].iter().chain(&ones[30..]).copied().collect();
    let unlabeled: Vec<usize> = zeros[5..30].iter().chain(&ones[..30]).copied().collect();
    let pool = PoolState::new(labeled, unlabeled, eval).unwrap();
    let train = TrainConfig::default();
    let head = LinearHead::zeros(2, 4);
    let meter = CostMeter::new();
    let ctx = ctx_for(&dataset, &pool, &head, &train, &meter, 4);
    let cfg = BossConfig::default();
    let redundant = assess_batch(&ctx, &zeros[5..9], &cfg).unwrap();
    let covering = assess_batch(&ctx, &ones[..4], &cfg).unwrap();
    assert!(covering < redundant, "{covering} vs {redundant}");
}

/// Two well-separated groups on a line, with the labeled pool far from the
/// true boundary at t = 0. Only four unlabeled points sit near it.
fn boundary_fixture() -> (Dataset, PoolState) {
    let mut t = Vec::new();
    let mut y = Vec::new();
    let mut push = |v: f32| {
        t.push(v);
        y.push(u32::from(v > 0.0));
    };
    for _ in 0..3 {
        push(-1.0);
        push(3.0);
    }
    for &v in &[0.3, 0.4, 0.5, 0.6] {
        push(v);
    }
    for i in 0..100 {
        push(-1.0 - 0.001 * i as f32);
        push(3.0 + 0.001 * i as f32);
    }
    for i in 0..20 {
        push(0.05 + 0.045 * i as f32);
        push(-0.05 - 0.045 * i as f32);
    }
    let n = t.len();
    let dataset = Dataset::new("line", t, y, 2, 1).unwrap();
    let pool = PoolState::new((0..6).collect(), (6..210).collect(), (210..n).collect()).unwrap();
    (dataset, pool)
}

#[test]
fn margin_batch_wins_when_it_fixes_the_boundary() {
    let (dataset, pool) = boundary_fixture();
    let train = TrainConfig {
        base_lr: 1.0,
        ..TrainConfig::default()
    };
    let head = train_head(&dataset, pool.labeled(), dataset.labels(), &train).unwrap();
    let meter = CostMeter::new();
    let ctx = ctx_for(&dataset, &pool, &head, &train, &meter, 4);
    let mut margin_wins = 0;
    for seed in 0..20 {
        let cfg = BossConfig {
            num_batches: 2,
            strategies: vec![StrategyId::Random, StrategyId::Margin],
            assess_epochs: 200,
            seed,
            ..BossConfig::default()
        };
        let selection = boss_select(&ctx, &cfg).unwrap();
        let (random, margin) = (&selection.candidates[0], &selection.candidates[1]);
        assert_eq!(margin.origin, StrategyId::Margin);
        let expected = if margin.score < random.score {
            StrategyId::Margin
        } else {
            StrategyId::Random
        };
        assert_eq!(selection.winning_batch().origin, expected);
        let near = margin.indices.iter().filter(|&&i| (6..10).contains(&i)).count();
        let random_near = random.indices.iter().filter(|&&i| (6..10).contains(&i)).count();
        if near > random_near && margin.score < random.score {
            margin_wins += 1;
        }
    }
    assert!(margin_wins > 0);
}

#[test]
fn pseudo_labels_follow_the_reference_head() {
    let dataset = blobs(3, 4, 30, 7);
    let constant = LinearHead::from_parts(3, 4, vec![0.0; 12], vec![0.0, 0.0, 1.0]).unwrap();
    assert!(infer_pseudo_labels(&dataset, &constant).iter().all(|&y| y == 2));
    let train = TrainConfig {
        base_lr: 0.5,
        ..TrainConfig::default()
    };
    let all: Vec<usize> = (0..dataset.len()).collect();
    let head = train_head(&dataset, &all, dataset.labels(), &train).unwrap();
    let pseudo = infer_pseudo_labels(&dataset, &head);
    assert_eq!(pseudo, infer_pseudo_labels(&dataset, &head));
    for (i, &p) in pseudo.iter().enumerate() {
        assert_eq!(p as usize, head.predict(dataset.row(i)));
    }
}

#[test]
fn cdo_with_one_sample_commits_it() {
    let fx = Fixture::new(blobs(3, 4, 40, 8), 6, 20);
    let cfg = CdoConfig {
        m: 1,
        assess_epochs: 5,
        ..CdoConfig::default()
    };
    let out = cdo_select(&fx.ctx(3, 1), &cfg).unwrap();
    for step in &out.steps {
        assert_eq!(step.sampled.len(), 1);
        assert_eq!(step.committed, step.sampled[0]);
    }
    assert_eq!(out.batch, out.steps.iter().map(|s| s.committed).collect::<Vec<_>>());
}

#[test]
fn cdo_retrain_and_instance_counts() {
    let fx = Fixture::new(blobs(3, 4, 40, 9), 6, 20);
    let cfg = CdoConfig {
        m: 3,
        assess_epochs: 5,
        ..CdoConfig::default()
    };
    let out = cdo_select(&fx.ctx(2, 1), &cfg).unwrap();
    let cost = fx.meter.snapshot();
    assert_eq!(cost.retrains, 6);
    // m * (b*|L| + b(b+1)/2) with |L| = 6, b = 2
    assert_eq!(cost.processed_instances, 3 * (2 * 6 + 3));
    let mut distinct = out.batch.clone();
    distinct.sort_unstable();
    distinct.dedup();
    assert_eq!(distinct.len(), 2);
}

fn tiny_search() -> Fixture {
    let dataset = blobs(2, 2, 16, 10);
    let pool = PoolState::new((0..4).collect(), (4..12).collect(), (12..32).collect()).unwrap();
    let train = TrainConfig {
        epochs: 20,
        ..TrainConfig::default()
    };
    let head = train_head(&dataset, pool.labeled(), dataset.labels(), &train).unwrap();
    Fixture {
        dataset,
        pool,
        head,
        train,
        meter: CostMeter::new(),
    }
}

#[test]
fn sas_single_step_returns_initial_batch() {
    let fx = tiny_search();
    let cfg = SasConfig {
        anneal_steps: 1,
        greedy_steps: 0,
        assess_epochs: 5,
        ..SasConfig::default()
    };
    let out = sas_select(&fx.ctx(2, 1), &cfg).unwrap();
    assert_eq!(out.evaluations, 1);
    assert_eq!(out.objective, out.initial_objective);
    assert_eq!(fx.meter.snapshot().retrains, 1);
}

#[test]
fn sas_zero_temperature_never_worsens() {
    for seed in 0..5 {
        let fx = tiny_search();
        let cfg = SasConfig {
            anneal_steps: 20,
            greedy_steps: 5,
            temp_start: 1e-9,
            temp_end: 1e-9,
            loss: LossKind::Brier,
            assess_epochs: 5,
            seed,
        };
        let out = sas_select(&fx.ctx(2, 1), &cfg).unwrap();
        assert!(out.objective <= out.initial_objective);
        assert_eq!(out.evaluations, 25);
        let cost = fx.meter.snapshot();
        assert_eq!(cost.retrains, 25);
        assert_eq!(cost.processed_instances, 25 * (4 + 2));
    }
}
