//! Synthetic end-to-end run: generate, enhance, split, train the compact
//! network and print train / held-out accuracy.
//!
//! cargo run --release -p retina-core --example desk_run [epochs]

use std::time::Instant;

use retina_core::dataset::{stratified_split_indices, synth_dataset};
use retina_core::model::edlm_compact_spec;
use retina_core::preprocess::{enhance, EnhanceConfig};
use retina_core::training::{accuracy, train_with_observer, TrainConfig};

fn main() {
    let epochs = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(20);
    let started = Instant::now();
    let samples = synth_dataset(100, 64, 7);
    let cfg = EnhanceConfig::desk();
    let inputs: Vec<_> = samples.iter().map(|s| enhance(&s.image, &cfg, None).unwrap().to_unit_tensor()).collect();
    let labels: Vec<usize> = samples.iter().map(|s| s.grade.index()).collect();
    let (tr, te) = stratified_split_indices(&labels, 0.2, 7);
    let pick = |idx: &[usize]| (idx.iter().map(|&i| inputs[i].clone()).collect::<Vec<_>>(), idx.iter().map(|&i| labels[i]).collect::<Vec<_>>());
    let (train_x, train_y) = pick(&tr);
    let (test_x, test_y) = pick(&te);
    let spec = edlm_compact_spec([64, 64, 3], 5).unwrap();
    let config = TrainConfig { epochs, seed: 7, ..Default::default() };
    let (params, _) = train_with_observer(&spec, &train_x, &train_y, &config, |r| {
        println!("epoch {:>2}  loss {:.4}  acc {:.3}  {:.1}s", r.epoch, r.loss, r.accuracy, r.seconds)
    })
    .unwrap();
    println!("train accuracy    {:.3}", accuracy(&spec, &params, &train_x, &train_y).unwrap());
    println!("held-out accuracy {:.3}", accuracy(&spec, &params, &test_x, &test_y).unwrap());
    println!("total {:.1}s", started.elapsed().as_secs_f64());
}
