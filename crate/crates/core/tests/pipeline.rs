use retina_core::dataset::{
    decode_image, load_manifest, save_png, stratified_split_indices, synth_dataset, write_manifest, ManifestRecord,
};
use retina_core::metrics::{all_class_metrics, grade_from_lesions, ConfusionMatrix};
use retina_core::model::{edlm_compact_spec, load_checkpoint, predict, save_checkpoint, Checkpoint, TrainingMeta};
use retina_core::preprocess::{enhance, EnhanceConfig};
use retina_core::tensor::{loss_grad_logits, LossForm, Tensor};
use retina_core::training::{grid_search, predict_labels, train, TrainConfig};

#[test]
fn synthetic_images_survive_png_and_manifest_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let samples = synth_dataset(2, 32, 3);
    let mut records = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        let name = format!("img{i}.png");
        save_png(&s.image, dir.path().join(&name)).unwrap();
        records.push(ManifestRecord {
            image_path: name,
            grade: s.grade,
            ma_count: Some(s.lesions.microaneurysms),
            neovascularisation: Some(s.lesions.neovascularisation()),
        });
    }
    write_manifest(dir.path().join("m.csv"), &records).unwrap();
    let back = load_manifest(dir.path().join("m.csv")).unwrap();
    assert_eq!(back, records);
    for (r, s) in back.iter().zip(&samples) {
        assert_eq!(decode_image(dir.path().join(&r.image_path)).unwrap(), s.image);
        assert_eq!(grade_from_lesions(r.ma_count.unwrap(), r.neovascularisation.unwrap()), r.grade);
    }
}

#[test]
fn split_keeps_every_class_in_proportion() {
    let labels: Vec<usize> = (0..5).flat_map(|c| std::iter::repeat_n(c, 100)).collect();
    let (train, test) = stratified_split_indices(&labels, 0.2, 7);
    assert_eq!(train.len() + test.len(), 500);
    for c in 0..5 {
        assert_eq!(test.iter().filter(|&&i| labels[i] == c).count(), 20);
    }
}

#[test]
fn trained_checkpoint_predicts_identically_after_reload() {
    let dir = tempfile::tempdir().unwrap();
    let samples = synth_dataset(2, 32, 9);
    let preset = EnhanceConfig::desk();
    let inputs: Vec<_> = samples.iter().map(|s| enhance(&s.image, &preset, None).unwrap().to_unit_tensor()).collect();
    let labels: Vec<_> = samples.iter().map(|s| s.grade.index()).collect();
    let spec = edlm_compact_spec([32, 32, 3], 5).unwrap();
    let (params, history) = train(&spec, &inputs, &labels, &TrainConfig { epochs: 2, seed: 3, ..Default::default() }).unwrap();
    let meta = TrainingMeta { epochs_completed: 2, seed: 3, final_loss: history.losses()[1] };
    let path = dir.path().join("m.ckpt");
    save_checkpoint(&path, &Checkpoint { spec: spec.clone(), params: params.clone(), meta }).unwrap();
    let loaded = load_checkpoint(&path).unwrap();
    for x in &inputs {
        let a = predict(&spec, &params, x).unwrap();
        let b = predict(&loaded.spec, &loaded.params, x).unwrap();
        assert_eq!(a.data(), b.data());
    }
    let pred = predict_labels(&loaded.spec, &loaded.params, &inputs).unwrap();
    let cm = ConfusionMatrix::from_labels(&pred, &labels, 5).unwrap();
    assert_eq!(cm.total(), 10);
    assert_eq!(all_class_metrics(&cm).len(), 5);
}

#[test]
fn grid_search_prefers_the_stable_learning_rate() {
    let samples = synth_dataset(4, 32, 2);
    let inputs: Vec<_> = samples.iter().map(|s| s.image.to_unit_tensor()).collect();
    let labels: Vec<_> = samples.iter().map(|s| s.grade.index()).collect();
    let spec = edlm_compact_spec([32, 32, 3], 5).unwrap();
    let base = TrainConfig { epochs: 2, seed: 1, ..Default::default() };
    let configs = [TrainConfig { learning_rate: 100.0, ..base }, base];
    let outcome = grid_search(&configs, &spec, &inputs, &labels, 0.25, 5).unwrap();
    assert_eq!(outcome.best_index, 1);
    assert!(outcome.rows[0].diverged || outcome.rows[0].macro_f <= outcome.rows[1].macro_f);
}

#[test]
fn saturated_binary_sum_gradient_agrees_across_precisions() {
    let label = Tensor::vector(&[0.0, 1.0, 0.0, 0.0]);
    for logits in [[40.0, -40.0, 0.0, 3.0], [-80.0, 80.0, 79.0, -5.0], [0.0, 0.0, 60.0, 60.0]] {
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
        let sum: f64 = e.iter().sum();
        let probs: Vec<f64> = e.iter().map(|v| v / sum).collect();
        let g64 = loss_grad_logits(&label, &Tensor::vector(&probs), LossForm::BinarySum).unwrap();
        let p32: Vec<f32> = probs.iter().map(|&p| p as f32).collect();
        let g32 = loss_grad_logits(&label.cast::<f32>(), &Tensor::vector(&p32), LossForm::BinarySum).unwrap();
        assert!(g32.is_finite() && g64.is_finite(), "{logits:?}");
        for (a, b) in g32.data().iter().zip(g64.data()) {
            assert!((f64::from(*a) - b).abs() <= 1e-4 * (1.0 + b.abs()), "{logits:?}: {a} vs {b}");
        }
    }
}
