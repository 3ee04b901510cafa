use crisp::data::{mask_single_positive, split, SplitSpec};
use crisp::model::{Architecture, Classifier, Layer};
use crisp::synth::{generate, priors_of_rows, SynthConfig, SynthOutput};
use crisp::trainer::{an_loss, evaluate, train, warmup, TrainReport};
use crisp::{MultiLabelDataset, SinglePositiveDataset, TrainConfig};
use ndarray::{Array1, Array2};

struct Fixture {
    train: SinglePositiveDataset,
    test: MultiLabelDataset,
    truth: Vec<f64>,
}

fn synth(n: usize, separability: f64, seed: u64) -> SynthOutput {
    generate(&SynthConfig {
        n,
        q: 10,
        c: 3,
        target_priors: vec![0.5, 0.3, 0.1],
        separability,
        label_correlation: 0.2,
        seed,
    })
    .unwrap()
}

fn fixture(n: usize, seed: u64) -> Fixture {
    let out = synth(n, 1.0, seed);
    let (tr, _, te) = split(&out.dataset, &SplitSpec::standard(seed)).unwrap();
    let masked = mask_single_positive(&tr, seed).unwrap();
    Fixture {
        truth: priors_of_rows(tr.labels(), &masked.kept_rows),
        train: masked.dataset,
        test: te,
    }
}

fn config() -> TrainConfig {
    TrainConfig {
        learning_rate: 1e-2,
        epochs: 6,
        ..TrainConfig::default()
    }
}

fn linear(fx: &Fixture, seed: u64) -> Classifier {
    Classifier::new(Architecture::Linear, fx.train.q(), fx.train.c(), seed)
}

/// The report with wall-clock fields zeroed.
fn without_timings(mut r: TrainReport) -> TrainReport {
    for e in &mut r.epochs {
        e.prior_seconds = 0.0;
        e.epoch_seconds = 0.0;
    }
    r
}

#[test]
fn runs_are_bit_reproducible() {
    let fx = fixture(600, 1);
    let cfg = TrainConfig {
        seed: 5,
        ..config()
    };
    let arch = Architecture::Hidden { width: 6 };
    let run = || {
        let m = Classifier::new(arch, fx.train.q(), fx.train.c(), 5);
        train(m, &fx.train, &cfg, Some(&fx.test), Some(&fx.truth)).unwrap()
    };
    let (m1, r1) = run();
    let (m2, r2) = run();
    let dir = tempfile::tempdir().unwrap();
    m1.save_checkpoint(dir.path().join("a")).unwrap();
    m2.save_checkpoint(dir.path().join("b")).unwrap();
    assert_eq!(
        std::fs::read(dir.path().join("a")).unwrap(),
        std::fs::read(dir.path().join("b")).unwrap()
    );
    assert_eq!(without_timings(r1), without_timings(r2));
}

#[test]
fn warmup_lowers_assume_negative_loss() {
    let fx = fixture(1_000, 2);
    let m = linear(&fx, 2);
    let warm = warmup(m.clone(), &fx.train, &config()).unwrap();
    assert!(an_loss(&warm, &fx.train).unwrap() < an_loss(&m, &fx.train).unwrap());
}

#[test]
fn prior_error_shrinks_over_training() {
    let fx = fixture(3_000, 3);
    let (_, report) = train(linear(&fx, 3), &fx.train, &config(), None, Some(&fx.truth)).unwrap();
    let mean_err = |k: usize| {
        let e = report.epochs[k].prior_abs_error.as_ref().unwrap();
        e.iter().sum::<f64>() / e.len() as f64
    };
    assert!(mean_err(report.epochs.len() - 1) <= mean_err(0));
    for e in &report.epochs {
        let n = fx.train.n() as f64;
        assert!(e.priors.iter().all(|&p| (1.0 / n..=1.0).contains(&p)));
    }
}

/// Population-scale fixture: the final-epoch training loss with the true
/// priors held fixed is within 5% of the one reached with estimated priors.
#[test]
fn true_priors_reach_a_comparable_risk() {
    let fx = fixture(25_000, 4);
    let cfg = TrainConfig {
        epochs: 10,
        ..config()
    };
    let (_, estimated) = train(linear(&fx, 4), &fx.train, &cfg, None, None).unwrap();
    let fixed_cfg = TrainConfig {
        fixed_priors: Some(fx.truth.clone()),
        ..cfg
    };
    let (_, fixed) = train(linear(&fx, 4), &fx.train, &fixed_cfg, None, None).unwrap();
    let est = estimated.epochs.last().unwrap().mean_loss;
    let fix = fixed.epochs.last().unwrap().mean_loss;
    assert!((fix - est).abs() <= 0.05 * est, "fixed {fix} vs estimated {est}");
}

#[test]
fn trained_model_beats_random_on_every_measure() {
    let fx = fixture(2_000, 6);
    let random = evaluate(&linear(&fx, 6), &fx.test).unwrap();
    let (model, _) = train(linear(&fx, 6), &fx.train, &config(), None, None).unwrap();
    let trained = evaluate(&model, &fx.test).unwrap();
    assert!(trained.hamming_loss < random.hamming_loss);
    assert!(trained.ranking_loss.unwrap() < random.ranking_loss.unwrap());
    assert!(trained.one_error.unwrap() < random.one_error.unwrap());
    assert!(trained.coverage.unwrap() < random.coverage.unwrap());
    assert!(trained.average_precision.unwrap() > random.average_precision.unwrap());
    assert!(trained.mean_average_precision.unwrap() > random.mean_average_precision.unwrap());
}

#[test]
fn unseparated_labels_are_a_linear_threshold() {
    let out = synth(1_000, 0.0, 7);
    let data = &out.dataset;
    let proj = data.features().dot(&out.directions.t());
    // Put each bias halfway between the lowest positive and highest negative projection.
    let bias: Array1<f64> = (0..data.c())
        .map(|j| {
            let (mut lo_pos, mut hi_neg) = (f64::INFINITY, f64::NEG_INFINITY);
            for i in 0..data.n() {
                if data.labels()[[i, j]] == 1 {
                    lo_pos = lo_pos.min(proj[[i, j]]);
                } else {
                    hi_neg = hi_neg.max(proj[[i, j]]);
                }
            }
            -1e3 * 0.5 * (lo_pos + hi_neg)
        })
        .collect();
    let weights: Array2<f64> = out.directions.t().to_owned() * 1e3;
    let model = Classifier::from_layers(vec![Layer { weights, bias }]).unwrap();
    assert_eq!(evaluate(&model, data).unwrap().hamming_loss, 0.0);
}
