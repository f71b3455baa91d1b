use timeconv::arch::{load_checkpoint_expecting, prepare_input, save_checkpoint};
use timeconv::bench::stream_simulate;
use timeconv::data::{generate_synthetic, DatasetArchive, GrayFrame, SynthConfig, WindowSpec};
use timeconv::layers::Module;
use timeconv::train::{adam_step, train, AdamHyper, AdamState, TrainConfig};
use timeconv::{build_network, ArchId, Error, Network, Rng, Tensor};

/// Plain scalar Adam, written out from the update rule.
fn reference_adam(w0: f64, steps: usize, lr: f64) -> Vec<f64> {
    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-7f64);
    let (mut w, mut m, mut v) = (w0, 0.0, 0.0);
    let mut out = Vec::new();
    for t in 1..=steps {
        let g = 2.0 * w;
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        let mh = m / (1.0 - b1.powi(t as i32));
        let vh = v / (1.0 - b2.powi(t as i32));
        w -= lr * mh / (vh.sqrt() + eps);
        out.push(w);
    }
    out
}

#[test]
fn adam_on_a_parabola() {
    let lr = 1e-2;
    let want = reference_adam(1.0, 100, lr);
    let mut w = Tensor::new(vec![1], vec![1.0f32]).unwrap();
    let mut state = AdamState::new(&[&w]);
    let names = vec!["w".to_string()];
    let mut prev = 1.0f32;
    for (step, expected) in want.iter().enumerate() {
        let g = w.map(|x| 2.0 * x);
        adam_step(vec![&mut w], &[g], &names, &mut state, lr, &AdamHyper::default()).unwrap();
        let now = w.data()[0];
        assert!(now < prev, "step {step}: {now} >= {prev}");
        assert!((now as f64 - expected).abs() < 1e-5, "step {step}: {now} vs {expected}");
        prev = now;
    }
    assert!(prev > 0.2 && prev < 0.25);
    assert_eq!(state.step, 100);
}

#[test]
fn first_step_is_lr_times_sign() {
    for g in [1e-4f32, -3.0, 250.0] {
        let mut w = Tensor::new(vec![1], vec![0.0f32]).unwrap();
        let mut state = AdamState::new(&[&w]);
        let grad = Tensor::new(vec![1], vec![g]).unwrap();
        adam_step(vec![&mut w], &[grad], &["w".into()], &mut state, 1e-3, &AdamHyper::default()).unwrap();
        let moved = w.data()[0] as f64;
        assert!((moved + 1e-3 * (g as f64).signum()).abs() < 1e-5, "g {g}: moved {moved}");
    }
}

#[test]
fn empty_archive_rejected() {
    let err = train(ArchId::Xception2d, &DatasetArchive::new(5), &TrainConfig::default()).unwrap_err();
    assert!(matches!(err, Error::EmptyDataset(_)), "{err}");
}

#[test]
fn duplicated_sample_gives_identical_rows() {
    let data = generate_synthetic(&SynthConfig::new(1), 2);
    for arch in [ArchId::TimeconvXception, ArchId::TimeconvResnet20, ArchId::Resnet20_2plus1d] {
        let net: Network = build_network(arch, &mut Rng::new(5));
        let x = prepare_input(&data.batch(&[3, 3, 3, 3]).unwrap(), arch.input_kind()).unwrap();
        let y = net.forward(&x).unwrap();
        for r in 1..4 {
            for c in 0..7 {
                assert!((y.get(&[r, c]) - y.get(&[0, c])).abs() <= 1e-6, "{arch}");
            }
        }
        assert_eq!(net.forward(&x).unwrap(), y, "{arch} eval forward is not repeatable");
    }
}

#[test]
fn checkpoint_architecture_checked_on_load() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.tcwt");
    let net: Network = build_network(ArchId::Resnet20_3d, &mut Rng::new(1));
    save_checkpoint(&net, &path).unwrap();
    let err = load_checkpoint_expecting(&path, ArchId::TimeconvResnet20).unwrap_err();
    assert!(matches!(err, Error::ArchMismatch { .. }), "{err}");
    assert!(load_checkpoint_expecting(&path, ArchId::Resnet20_3d).is_ok());
}

#[test]
fn stream_prediction_counts() {
    let net: Network = build_network(ArchId::Xception2d, &mut Rng::new(1));
    for n in [5usize, 6, 13, 100] {
        let frames = (0..n).map(|i| GrayFrame::filled(40, 30, (i * 7 % 256) as u8));
        let r = stream_simulate(frames, &net, WindowSpec::default(), None, None, |_| {}).unwrap();
        assert_eq!(r.predictions.len(), n - 4);
        assert_eq!(r.preprocess_ms.len(), n);
        for (k, l) in r.latency_ms.iter().enumerate() {
            let inf = r.emitted_at.iter().position(|&e| e == k).map_or(0.0, |p| r.inference_ms[p]);
            assert!((l - (r.preprocess_ms[k] + inf)).abs() < 1e-9);
        }
        assert!((r.fps - r.frames as f64 / r.wall_seconds).abs() <= 0.01 * r.fps);
    }
}

#[test]
fn constant_source_predicts_one_label() {
    let net: Network = build_network(ArchId::TimeconvXception, &mut Rng::new(8));
    let frames = std::iter::repeat_n(GrayFrame::filled(64, 64, 120), 20);
    let r = stream_simulate(frames, &net, WindowSpec::default(), None, Some(25.0), |_| {}).unwrap();
    assert_eq!(r.predictions.len(), 16);
    assert!(r.predictions.iter().all(|&p| p == r.predictions[0]));
}
