use std::time::Instant;

use slimrnn::synthetic::{separable, small_config};
use slimrnn::train::{mean_loss, train, Trainer};
use slimrnn::{LstmPosition, Variant};

#[test]
fn every_variant_overfits_thirty_two_samples() {
    for v in Variant::ALL {
        let config = small_config(v, 7);
        let data = separable(32, config.maxlen, config.vocab_size, 7).unwrap();
        let start = Instant::now();
        let mut trainer = Trainer::new(&config, data.clone(), data).unwrap();
        let mut reached = None;
        for _ in 0..500 {
            let record = trainer.run_epoch().unwrap();
            if record.accuracy == 100.0 {
                reached = Some(record.epoch);
                break;
            }
        }
        let secs = start.elapsed().as_secs_f64();
        println!("{v}: 100% at epoch {reached:?} in {secs:.2}s");
        assert!(reached.is_some(), "{v} never reached 100%");
    }
}

#[test]
fn loss_decreases_over_fifty_steps_in_both_layouts() {
    for position in [LstmPosition::CnnThenLstm, LstmPosition::LstmThenCnn] {
        let mut config = small_config(Variant::Lstm0, 3);
        config.lstm_position = position;
        config.lr = 0.001;
        config.batch_size = 32;
        config.spatial_dropout = 0.0;
        config.dense_dropout = 0.0;
        let data = separable(32, config.maxlen, config.vocab_size, 3).unwrap();
        let mut trainer = Trainer::new(&config, data.clone(), data.clone()).unwrap();
        let mut prev = mean_loss(trainer.model(), &data).unwrap();
        for step in 0..50 {
            trainer.run_epoch().unwrap();
            let now = mean_loss(trainer.model(), &data).unwrap();
            assert!(now < prev, "{position} step {step}: {now} >= {prev}");
            prev = now;
        }
    }
}

#[test]
fn same_seed_same_report() {
    let mut config = small_config(Variant::Lstm6, 5);
    config.epochs = 3;
    let data = separable(24, config.maxlen, config.vocab_size, 5).unwrap();
    let a = train(&config, &data).unwrap().1.to_json();
    let b = train(&config, &data).unwrap().1.to_json();
    assert_eq!(a, b);
    config.seed = Some(6);
    let c = train(&config, &data).unwrap().1.to_json();
    assert_ne!(a, c);
}

#[test]
fn full_pipeline_loss_is_monotone_without_dropout() {
    for v in Variant::ALL {
        let mut config = slimrnn::synthetic::overfit_config(v, 7);
        config.spatial_dropout = 0.0;
        config.dense_dropout = 0.0;
        let data = separable(32, config.maxlen, config.vocab_size, 7).unwrap();
        let mut trainer = Trainer::new(&config, data.clone(), data).unwrap();
        let mut prev = f64::INFINITY;
        for _ in 0..25 {
            let record = trainer.run_epoch().unwrap();
            assert!(record.loss <= prev + 1e-3, "{v} epoch {}: {} after {prev}", record.epoch, record.loss);
            prev = record.loss;
        }
    }
}
