use aemodem::channel::{ChannelParams, RngStream};
use aemodem::diffnet::{LayerSpec, TensorOf};
use aemodem::model::{Autoencoder, ModelConfig, TrainingMetadata, WeightBundle};
use aemodem::trainer::{evaluate_ser, forward_backward, sample_training_batch, train, TrainConfig, Trainer};
use aemodem::Error;

fn counts(model: &Autoencoder<f32>) -> (Vec<usize>, Vec<usize>) {
    let nz = |specs: Vec<(String, LayerSpec)>| specs.iter().map(|(_, s)| s.param_count()).filter(|&c| c > 0).collect();
    (nz(model.encoder.layer_specs()), nz(model.decoder.layer_specs()))
}

#[test]
fn ae_7_16_matches_the_published_layer_counts() {
    let model = Autoencoder::<f32>::new(ModelConfig::ae_7_16(), 1).unwrap();
    let (enc, dec) = counts(&model);
    assert_eq!(enc, [16384, 16512, 4128, 1056]);
    assert_eq!(dec, [896, 131136, 492032, 5130, 53760, 262656, 131328, 65792, 32896, 16512]);
    assert_eq!(model.encoder.param_count(), 38080);
    assert_eq!(model.param_count(), 38080 + 1192138);
}

#[test]
fn disabling_the_estimator_only_drops_its_layers() {
    let with = Autoencoder::<f32>::new(ModelConfig::ae_8_8(), 1).unwrap();
    let without = Autoencoder::<f32>::new(ModelConfig::ae_8_8_2(), 1).unwrap();
    assert_eq!(ModelConfig::ae_8_8_2().concat_width(), 2 * ModelConfig::ae_8_8_2().window());
    assert_eq!(ModelConfig::ae_8_8().concat_width(), 2 * ModelConfig::ae_8_8().window() + 10);
    let (_, d_with) = counts(&with);
    let (_, d_without) = counts(&without);
    assert_eq!(d_with.len(), d_without.len() + 4);
    // First trunk layer grows by 10 inputs; the rest are identical.
    assert_eq!(d_with[4] - d_without[0], 10 * 512);
    assert_eq!(&d_with[5..], &d_without[1..]);
}

#[test]
fn pilot_waveform_is_shared_and_decoding_is_pure() {
    let model = Autoencoder::<f32>::new(ModelConfig::ae_8_8(), 3).unwrap();
    let batch = model.encoder.encode_batch(&[0, 5, 0, 9, 0]).unwrap();
    assert_eq!(batch.row(0), batch.row(2));
    assert_eq!(batch.row(0), batch.row(4));
    assert_eq!(model.encoder.encode(0).unwrap(), batch.row(0));

    let w = ModelConfig::ae_8_8().window();
    let mut rng = RngStream::new(4);
    let window: Vec<f32> = (0..2 * w).map(|_| rng.normal() as f32 * 0.5).collect();
    let a = model.decoder.decode(&window).unwrap();
    let b = model.decoder.decode(&window).unwrap();
    assert_eq!(a.0.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.0.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    assert_eq!(a.1, b.1);
    let windows = TensorOf::new(vec![1, 2 * w], window).unwrap();
    assert_eq!(model.decoder.decide_batch(&windows).unwrap(), vec![a.1]);
}

#[test]
fn bundles_round_trip_and_reject_tampering() {
    let model = Autoencoder::<f32>::new(ModelConfig::ae_7_8(), 2).unwrap();
    let meta = TrainingMetadata { seed: 2, steps: 0, train_es_n0_db: None };
    let bundle = WeightBundle::from_model(&model, meta);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.weights");
    bundle.save(&path).unwrap();
    let loaded = WeightBundle::<f32>::load(&path).unwrap();
    assert_eq!(loaded.to_json().unwrap(), bundle.to_json().unwrap());
    let rebuilt = loaded.to_model().unwrap();
    assert_eq!(rebuilt.encoder.constellation().unwrap(), model.encoder.constellation().unwrap());

    let text = bundle.to_json().unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["layers"][1]["shape"][0] = 3.into();
    assert!(matches!(WeightBundle::<f32>::from_json(&v.to_string()), Err(Error::Format { .. })));

    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["format_version"] = 999.into();
    assert!(WeightBundle::<f32>::from_json(&v.to_string()).is_err());

    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["config"]["name"] = "AE-8/8".into();
    assert!(WeightBundle::<f32>::from_json(&v.to_string()).is_err());

    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["layers"].as_array_mut().unwrap().pop();
    assert!(WeightBundle::<f32>::from_json(&v.to_string()).is_err());
}

#[test]
fn untrained_loss_is_near_uniform() {
    for cfg in [ModelConfig::ae_8_8(), ModelConfig::ae_7_16()] {
        let model = Autoencoder::<f32>::new(cfg, 1).unwrap();
        let mut rng = RngStream::new(9);
        let batch = sample_training_batch(&mut rng, cfg.m(), 256);
        let out = forward_backward(&model, &batch, &ChannelParams::default(), &mut rng).unwrap();
        let ln_m = (cfg.m() as f64).ln();
        let loss = out.loss as f64;
        assert!((loss - ln_m).abs() <= 0.5, "{}: loss {loss} vs ln M {ln_m}", cfg.name());
    }
}

fn short(steps: u64) -> TrainConfig {
    let mut c = TrainConfig::default_for(ModelConfig::new(4, 8, true).unwrap());
    c.total_steps = steps;
    c.batch_size = 16;
    c.log_interval = 5;
    c
}

#[test]
fn training_is_bitwise_reproducible_and_resumable() {
    let (a, log_a) = train::<f32>(short(20)).unwrap();
    let (b, log_b) = train::<f32>(short(20)).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    assert_eq!(log_a, log_b);
    assert_eq!(log_a.records.len(), 4);

    let mut first = Trainer::<f32>::new(short(20)).unwrap();
    for _ in 0..10 {
        first.training_step().unwrap();
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ckpt.json");
    first.checkpoint().unwrap().save(&path).unwrap();
    let ckpt = aemodem::trainer::Checkpoint::<f32>::load(&path).unwrap();
    let mut resumed = Trainer::from_checkpoint(&ckpt).unwrap();
    resumed.run(|_| Ok(())).unwrap();
    assert_eq!(resumed.bundle().to_json().unwrap(), a.to_json().unwrap());

    let mut other = short(20);
    other.seed = 2;
    let (c, _) = train::<f32>(other).unwrap();
    assert_ne!(c.to_json().unwrap(), a.to_json().unwrap());
}

#[test]
fn short_training_learns_an_aligned_channel() {
    let mut cfg = TrainConfig::default_for(ModelConfig::new(2, 8, true).unwrap());
    cfg.total_steps = 800;
    cfg.batch_size = 32;
    cfg.log_interval = 100;
    cfg.channel = ChannelParams::clean().with_es_n0_db(15.0);
    let (bundle, log) = train::<f32>(cfg).unwrap();
    let first = log.records.first().unwrap().mean_loss;
    let last = log.records.last().unwrap().mean_loss;
    assert!(last < 0.5 * first, "loss {first} -> {last}");
    let model = bundle.to_model().unwrap();
    let r = evaluate_ser(&model, &ChannelParams::clean(), 5000, &mut RngStream::new(1)).unwrap();
    assert!(r.ser < 0.05, "clean SER {}", r.ser);
}
