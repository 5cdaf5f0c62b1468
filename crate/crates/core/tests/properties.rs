use aemodem::channel::impair::{add_awgn, noise_variance, phase_rotate, window_len, window_start};
use aemodem::channel::{stream_channel, RngStream, StreamChannelParams};
use aemodem::diffnet::layers::softmax;
use aemodem::diffnet::TensorOf;
use aemodem::model::{Autoencoder, ModelConfig};
use aemodem::runtime::modem::{rx_stream, tx_stream, windowed_ser};
use proptest::prelude::*;

fn small() -> ModelConfig {
    ModelConfig::new(4, 4, false).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_is_a_distribution(rows in 1usize..6, logits in prop::collection::vec(-80f32..80f32, 1..40)) {
        let cols = logits.len();
        let data: Vec<f32> = (0..rows).flat_map(|r| logits.iter().map(move |v| v * (r as f32 + 1.0) / 2.0)).collect();
        let p = softmax(&TensorOf::new(vec![rows, cols], data).unwrap());
        for r in 0..rows {
            let row = p.row(r);
            prop_assert!(row.iter().all(|&v| v >= 0.0));
            prop_assert!((row.iter().sum::<f32>() - 1.0).abs() <= 1e-5);
        }
    }

    #[test]
    fn rotation_preserves_magnitude(x in prop::collection::vec(-3f64..3f64, 1..32), phi in -10f64..10f64) {
        let x: Vec<f64> = if x.len() % 2 == 1 { x[1..].to_vec() } else { x };
        let y = phase_rotate(&x, phi).unwrap();
        for (a, b) in x.chunks(2).zip(y.chunks(2)) {
            prop_assert!((a[0].hypot(a[1]) - b[0].hypot(b[1])).abs() <= 1e-6);
        }
    }

    #[test]
    fn noise_is_zero_mean_with_half_n0_per_component(seed in any::<u64>(), es in -5f64..20f64) {
        let count = 200_000usize;
        let y = add_awgn(&vec![0f64; 2 * count], es, &mut RngStream::new(seed)).unwrap();
        let target = noise_variance(es) / 2.0;
        for c in 0..2 {
            let v: Vec<f64> = y.iter().skip(c).step_by(2).copied().collect();
            let mean = v.iter().sum::<f64>() / count as f64;
            let var = v.iter().map(|x| x * x).sum::<f64>() / count as f64;
            prop_assert!(mean.abs() <= 5.0 * (target / count as f64).sqrt());
            prop_assert!((var / target - 1.0).abs() < 0.02);
        }
    }

    #[test]
    fn tx_length_is_two_n_per_symbol(seed in any::<u64>(), symbols in prop::collection::vec(0usize..16, 0..50)) {
        let model = Autoencoder::<f32>::new(small(), seed).unwrap();
        let iq = tx_stream(&model.encoder, &symbols).unwrap();
        prop_assert_eq!(iq.len(), 2 * small().n * symbols.len());
        // Every pilot slot carries the same waveform.
        let pilot = model.encoder.encode(0).unwrap();
        for j in 0..symbols.len() {
            let at = 4 * small().n * j;
            prop_assert_eq!(&iq.samples[at..at + 2 * small().n], &pilot[..]);
        }
    }

    #[test]
    fn windowed_mean_equals_overall_ser_when_windows_tile(
        blocks in 1usize..8,
        width in 1usize..20,
        seed in any::<u64>(),
    ) {
        let len = blocks * width;
        let mut rng = RngStream::new(seed);
        let sent: Vec<usize> = (0..len).map(|_| rng.below(4) as usize).collect();
        let decoded: Vec<usize> = sent.iter().map(|&s| if rng.uniform() < 0.3 { (s + 1) % 4 } else { s }).collect();
        let series = windowed_ser(&sent, &decoded, 0, width).unwrap();
        let overall = sent.iter().zip(&decoded).filter(|(a, b)| a != b).count() as f64 / len as f64;
        let mean = series.iter().sum::<f64>() / series.len() as f64;
        prop_assert!((mean - overall).abs() < 1e-12);
    }

    #[test]
    fn drift_changes_symbol_count_by_bounded_amount(
        count in 50usize..400,
        ppm in prop::sample::select(vec![-2000.0, -400.0, 100.0, 400.0, 2500.0]),
        seed in any::<u64>(),
    ) {
        let cfg = small();
        let model = Autoencoder::<f32>::new(cfg, seed).unwrap();
        let mut rng = RngStream::new(seed);
        let symbols: Vec<usize> = (0..count).map(|_| rng.below(cfg.m() as u64) as usize).collect();
        let iq = tx_stream(&model.encoder, &symbols).unwrap();
        let params = StreamChannelParams { drift_ppm: ppm, ..StreamChannelParams::clean() };
        let out = stream_channel(&iq.samples, &params, &mut rng).unwrap();
        let slips = (out.len() as i64 - iq.samples.len() as i64).unsigned_abs() as usize / 2;
        let rx = aemodem::runtime::IqStream::new(out, iq.sample_rate).unwrap();
        let decoded = rx_stream(&model.decoder, &rx, 0).unwrap();
        let bound = slips.div_ceil(2 * cfg.n) + 1;
        prop_assert!((decoded.len() as i64 - count as i64).unsigned_abs() as usize <= bound);
    }

    #[test]
    fn encoder_output_stays_in_unit_circle(seed in any::<u64>(), k in 2usize..7, n in 2usize..12) {
        let cfg = ModelConfig::new(k, n, false).unwrap();
        let model = Autoencoder::<f32>::new(cfg, seed).unwrap();
        let c = model.encoder.constellation().unwrap();
        for s in 0..cfg.m() {
            for z in c.row(s).chunks(2) {
                prop_assert!(z[0].hypot(z[1]) <= 1.0 + 1e-6);
            }
        }
    }

    #[test]
    fn equal_seeds_give_identical_impaired_streams(seed in any::<u64>(), ppm in -1000f64..1000f64) {
        let iq: Vec<f32> = (0..400).map(|i| (i as f32 * 0.37).sin()).collect();
        let params = StreamChannelParams { drift_ppm: ppm, es_n0_db: 10.0, phase_walk: 1e-2, ..StreamChannelParams::clean() };
        let a = stream_channel(&iq, &params, &mut RngStream::new(seed)).unwrap();
        let b = stream_channel(&iq, &params, &mut RngStream::new(seed)).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn windows_contain_the_middle_symbol_and_cover_every_residue() {
    for n in 2..=32usize {
        let mut seen = vec![0u32; 2 * n];
        for m in 1 - n as i64..=n as i64 {
            let s = window_start(n, m).unwrap();
            assert!(s <= 2 * n && s + window_len(n) >= 3 * n, "n {n} m {m}");
            assert!(s + window_len(n) <= 5 * n);
            seen[s % (2 * n)] += 1;
        }
        assert!(seen.iter().all(|&c| c == 1), "n {n}: {seen:?}");
        assert!(window_start(n, -(n as i64)).is_err());
        assert!(window_start(n, n as i64 + 1).is_err());
    }
}

#[test]
fn noise_statistics_over_a_million_samples() {
    let count = 1_000_000usize;
    let es = 5.0;
    let y = add_awgn(&vec![0f64; 2 * count], es, &mut RngStream::new(11)).unwrap();
    let target = noise_variance(es) / 2.0;
    for c in 0..2 {
        let v: Vec<f64> = y.iter().skip(c).step_by(2).copied().collect();
        let mean = v.iter().sum::<f64>() / count as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
        assert!(mean.abs() <= 3.0 * (target / count as f64).sqrt(), "mean {mean}");
        assert!((var / target - 1.0).abs() < 0.02, "variance {var} vs {target}");
    }
}
