use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use retina_core::dataset::{
    class_distribution, decode_image, load_manifest, save_png, stratified_split_indices, synth_dataset,
    write_manifest, ManifestRecord,
};
use retina_core::gradcheck::{run_gradcheck_suite, GRADCHECK_TOLERANCE};
use retina_core::metrics::{
    all_class_metrics, macro_average, render_report, ClassMetrics, ConfusionMatrix, DRGrade, MacroMetrics,
    ModelMetrics, PublishedTable,
};
use retina_core::model::{
    edlm_compact_spec, edlm_default_spec, load_checkpoint, save_checkpoint, Checkpoint, NetworkSpec, TrainingMeta,
};
use retina_core::preprocess::{enhance, resize_bilinear, PreprocessError};
use retina_core::tensor::Tensor;
use retina_core::training::{predict_labels, train_with_observer, TrainError};
use serde::{Deserialize, Serialize};

use crate::args::{Arch, EvalArgs, GradcheckArgs, PreprocessArgs, ReportArgs, SynthArgs, TrainArgs};
use crate::config::RunConfig;

/// A failed run, carrying its exit-code class.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
    Numeric(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Usage(e) | Failure::Data(e) | Failure::Numeric(e) => e,
        }
    }
}

pub type Outcome = Result<(), Failure>;

fn data(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Data(e.into())
}

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

fn from_train(e: TrainError) -> Failure {
    match e {
        TrainError::NonFiniteLoss { .. } | TrainError::NonFiniteGradient { .. } => Failure::Numeric(e.into()),
        TrainError::InvalidConfig(_) => Failure::Usage(e.into()),
        other => Failure::Data(other.into()),
    }
}

fn from_enhance(e: PreprocessError) -> Failure {
    match e {
        PreprocessError::ClipFractionOutOfRange(_) | PreprocessError::InvalidConfig(_) => usage(e),
        other => data(other),
    }
}

/// Resolves command-line paths against the data root.
pub struct Paths {
    root: Option<PathBuf>,
}

impl Paths {
    pub fn new(root: Option<PathBuf>) -> Self {
        Self { root }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        match &self.root {
            Some(root) if p.is_relative() => root.join(p),
            _ => p.to_path_buf(),
        }
    }
}

fn echo(cfg: &RunConfig) {
    eprintln!("# resolved config\n{}", cfg.to_toml());
}

fn create_dir(dir: &Path) -> Outcome {
    fs::create_dir_all(dir).with_context(|| format!("{}: cannot create directory", dir.display())).map_err(data)
}

fn write_text(path: &Path, text: &str) -> Outcome {
    fs::write(path, text).with_context(|| format!("{}: write failed", path.display())).map_err(data)
}

fn manifest_dir(manifest: &Path) -> PathBuf {
    manifest.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn load_records(manifest: &Path) -> Result<Vec<ManifestRecord>, Failure> {
    if !manifest.is_file() {
        return Err(data(anyhow!("{}: manifest not found", manifest.display())));
    }
    load_manifest(manifest).map_err(data)
}

/// Decodes every record's image, resizing to `size`×`size` when the extents differ.
fn load_inputs(manifest: &Path, records: &[ManifestRecord], size: Option<usize>) -> Result<Vec<Tensor<f32>>, Failure> {
    let base = manifest_dir(manifest);
    let mut out = Vec::with_capacity(records.len());
    let mut extent = size;
    for r in records {
        let path = base.join(&r.image_path);
        let img = decode_image(&path).map_err(data)?;
        let side = *extent.get_or_insert(img.height());
        let img = if (img.height(), img.width()) == (side, side) { img } else { resize_bilinear(&img, side, side) };
        out.push(img.to_unit_tensor());
    }
    Ok(out)
}

pub fn preprocess(args: &PreprocessArgs, mut cfg: RunConfig, paths: &Paths) -> Outcome {
    cfg.apply_enhance(&args.enhance);
    cfg.enhance.validate().map_err(from_enhance)?;
    echo(&cfg);
    let manifest = paths.resolve(&args.manifest);
    let out = paths.resolve(&args.out);
    let records = load_records(&manifest)?;
    let base = manifest_dir(&manifest);
    create_dir(&out.join("images"))?;
    let mut written = Vec::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        let src = base.join(&r.image_path);
        let img = decode_image(&src).map_err(data)?;
        let size = args.size.map(|s| (s, s));
        let enhanced = enhance(&img, &cfg.enhance, size)
            .map_err(|e| match e {
                PreprocessError::ImageSmallerThanGrid { .. } => data(anyhow!("{}: {e}", src.display())),
                other => from_enhance(other),
            })?;
        let stem = Path::new(&r.image_path).file_stem().and_then(|s| s.to_str()).unwrap_or("image");
        let name = format!("images/{i:05}_{stem}.png");
        save_png(&enhanced, out.join(&name)).map_err(data)?;
        written.push(ManifestRecord { image_path: name, ..r.clone() });
    }
    write_manifest(out.join("manifest.csv"), &written).map_err(data)?;
    println!("enhanced {} images into {}", written.len(), out.display());
    Ok(())
}

pub fn synth(args: &SynthArgs, mut cfg: RunConfig, paths: &Paths) -> Outcome {
    if args.per_class == 0 || args.size < 32 {
        return Err(usage(anyhow!("--per-class must be >= 1 and --size >= 32")));
    }
    cfg.apply_seed(args.seed);
    echo(&cfg);
    let out = paths.resolve(&args.out);
    create_dir(&out.join("images"))?;
    let samples = synth_dataset(args.per_class, args.size, cfg.seed);
    let mut records = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        let name = format!("images/g{}_{i:05}.png", s.grade.index());
        save_png(&s.image, out.join(&name)).map_err(data)?;
        records.push(ManifestRecord {
            image_path: name,
            grade: s.grade,
            ma_count: Some(s.lesions.microaneurysms),
            neovascularisation: Some(s.lesions.neovascularisation()),
        });
    }
    write_manifest(out.join("manifest.csv"), &records).map_err(data)?;
    println!("wrote {} synthetic images into {}", records.len(), out.display());
    Ok(())
}

fn build_spec(arch: Arch, input: [usize; 3], classes: usize) -> Result<NetworkSpec, Failure> {
    let spec = match arch {
        Arch::Table3 => edlm_default_spec(input, classes),
        Arch::Compact => edlm_compact_spec(input, classes),
    };
    spec.map_err(usage)
}

fn absolute_records(manifest: &Path, records: &[ManifestRecord]) -> Vec<ManifestRecord> {
    let base = manifest_dir(manifest);
    let base = fs::canonicalize(&base).unwrap_or(base);
    records
        .iter()
        .map(|r| ManifestRecord { image_path: base.join(&r.image_path).display().to_string(), ..r.clone() })
        .collect()
}

pub fn train(args: &TrainArgs, mut cfg: RunConfig, paths: &Paths) -> Outcome {
    cfg.apply_train(&args.train);
    cfg.apply_seed(args.seed);
    if let Some(a) = args.arch {
        cfg.arch = a;
    }
    if let Some(c) = args.classes {
        cfg.classes = c;
    }
    if args.split.is_some() {
        cfg.split = args.split;
    }
    cfg.train.validate().map_err(from_train)?;
    if let Some(f) = cfg.split {
        if !(f > 0.0 && f < 1.0) {
            return Err(usage(anyhow!("--split must lie strictly between 0 and 1, got {f}")));
        }
    }
    if cfg.classes == 0 || cfg.classes > DRGrade::COUNT {
        return Err(usage(anyhow!("--classes must be between 1 and {}", DRGrade::COUNT)));
    }
    echo(&cfg);

    let manifest = paths.resolve(&args.manifest);
    let out = paths.resolve(&args.out);
    let records = load_records(&manifest)?;
    if records.is_empty() {
        return Err(data(anyhow!("{}: manifest has no records", manifest.display())));
    }
    if let Some(r) = records.iter().find(|r| r.grade.index() >= cfg.classes) {
        return Err(data(anyhow!("{}: grade {} exceeds --classes {}", r.image_path, r.grade.index(), cfg.classes)));
    }
    let labels: Vec<usize> = records.iter().map(|r| r.grade.index()).collect();
    let inputs = load_inputs(&manifest, &records, args.size)?;
    let shape = inputs[0].shape();
    let spec = build_spec(cfg.arch, [shape[0], shape[1], shape[2]], cfg.classes)?;

    create_dir(&out)?;
    let (train_idx, test_idx) = match cfg.split {
        Some(f) => stratified_split_indices(&labels, f, cfg.seed),
        None => ((0..records.len()).collect(), Vec::new()),
    };
    let abs = absolute_records(&manifest, &records);
    let pick = |idx: &[usize]| idx.iter().map(|&i| abs[i].clone()).collect::<Vec<_>>();
    write_manifest(out.join("train.csv"), &pick(&train_idx)).map_err(data)?;
    if !test_idx.is_empty() {
        write_manifest(out.join("test.csv"), &pick(&test_idx)).map_err(data)?;
    }
    let train_x: Vec<_> = train_idx.iter().map(|&i| inputs[i].clone()).collect();
    let train_y: Vec<_> = train_idx.iter().map(|&i| labels[i]).collect();
    if train_x.is_empty() {
        return Err(data(anyhow!("the split leaves no training samples")));
    }

    let history_path = out.join("history.jsonl");
    let mut history_text = String::new();
    let (params, history) = train_with_observer(&spec, &train_x, &train_y, &cfg.train, |r| {
        println!("epoch {:>3}  loss {:.5}  accuracy {:.4}  {:.1}s", r.epoch, r.loss, r.accuracy, r.seconds);
        history_text.push_str(&(serde_json::to_string(r).expect("plain record") + "\n"));
    })
    .map_err(from_train)?;
    write_text(&history_path, &history_text)?;
    write_text(&out.join("config.toml"), &cfg.to_toml())?;
    let meta = TrainingMeta {
        epochs_completed: history.len() as u32,
        seed: cfg.seed,
        final_loss: history.epochs.last().map_or(f64::NAN, |e| e.loss),
    };
    let ckpt = out.join("model.ckpt");
    save_checkpoint(&ckpt, &Checkpoint { spec, params, meta }).map_err(data)?;
    println!("checkpoint {}", ckpt.display());
    Ok(())
}

/// What `eval` writes: per-class metrics plus the confusion matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutput {
    pub name: String,
    pub class_names: Vec<String>,
    pub samples: usize,
    pub accuracy: Option<f64>,
    pub confusion: Vec<Vec<u64>>,
    pub per_class: Vec<ClassMetrics>,
    #[serde(rename = "macro")]
    pub macro_avg: Option<MacroMetrics>,
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "undef".into(), |v| format!("{v:.4}"))
}

pub fn eval(args: &EvalArgs, cfg: RunConfig, paths: &Paths) -> Outcome {
    echo(&cfg);
    let ckpt_path = paths.resolve(&args.checkpoint);
    let manifest = paths.resolve(&args.manifest);
    let ckpt = load_checkpoint(&ckpt_path).map_err(data)?;
    let records = load_records(&manifest)?;
    let classes = ckpt.spec.num_classes;
    if let Some(r) = records.iter().find(|r| r.grade.index() >= classes) {
        return Err(data(anyhow!("{}: grade {} exceeds the model's {classes} classes", r.image_path, r.grade.index())));
    }
    let [h, _, _] = ckpt.spec.input_shape;
    let inputs = load_inputs(&manifest, &records, Some(h))?;
    let pred = predict_labels(&ckpt.spec, &ckpt.params, &inputs).map_err(from_train)?;
    let actual: Vec<usize> = records.iter().map(|r| r.grade.index()).collect();
    let cm = ConfusionMatrix::from_labels(&pred, &actual, classes).map_err(data)?;
    let per_class = all_class_metrics(&cm);
    let class_names: Vec<String> = (0..classes).map(|c| DRGrade::from_index(c).map_or(c.to_string(), |g| g.name().to_string())).collect();
    let result = EvalOutput {
        name: args.name.clone(),
        class_names: class_names.clone(),
        samples: records.len(),
        accuracy: cm.accuracy(),
        confusion: cm.rows().to_vec(),
        macro_avg: macro_average(&per_class).ok(),
        per_class,
    };

    let dist = class_distribution(&records);
    println!("{} samples, per-grade {:?}, accuracy {}", records.len(), dist.counts, cell(result.accuracy));
    println!("{:<18} {:>11} {:>11} {:>11} {:>11}", "class", "sensitivity", "specificity", "precision", "f-measure");
    for (name, m) in class_names.iter().zip(&result.per_class) {
        println!(
            "{:<18} {:>11} {:>11} {:>11} {:>11}",
            name,
            cell(m.sensitivity),
            cell(m.specificity),
            cell(m.precision),
            cell(m.f_measure)
        );
    }
    if let Some(m) = &result.macro_avg {
        println!(
            "{:<18} {:>11} {:>11} {:>11} {:>11}",
            "macro",
            cell(m.sensitivity.mean),
            cell(m.specificity.mean),
            cell(m.precision.mean),
            cell(m.f_measure.mean)
        );
    }
    if let Some(out) = &args.out {
        let out = paths.resolve(out);
        write_text(&out, &(serde_json::to_string_pretty(&result).expect("metrics serialize") + "\n"))?;
        println!("metrics {}", out.display());
    }
    Ok(())
}

pub fn gradcheck(args: &GradcheckArgs, mut cfg: RunConfig) -> Outcome {
    cfg.apply_seed(args.seed);
    echo(&cfg);
    if args.networks == 0 {
        return Err(usage(anyhow!("--networks must be >= 1")));
    }
    let report = run_gradcheck_suite(cfg.seed, args.networks).map_err(|e| Failure::Numeric(e.into()))?;
    let max = report.max_relative_error();
    println!("max relative error {max:.3e} over {} networks (tolerance {GRADCHECK_TOLERANCE:.0e})", report.checks.len());
    if !report.passed(GRADCHECK_TOLERANCE) {
        let worst = report.worst().expect("non-empty");
        return Err(Failure::Numeric(anyhow!(
            "gradient check failed: {:.3e} on {} layers over input {:?}",
            worst.relative_error,
            worst.spec.layers.len(),
            worst.spec.input_shape
        )));
    }
    Ok(())
}

pub fn report(args: &ReportArgs, paths: &Paths) -> Outcome {
    let rendered = if args.published {
        PublishedTable::bundled().render().map_err(data)?
    } else {
        if args.metrics.is_empty() {
            return Err(usage(anyhow!("give one or more metrics files, or --published")));
        }
        let mut models = Vec::new();
        let mut class_names: Option<Vec<String>> = None;
        for p in &args.metrics {
            let p = paths.resolve(p);
            let text = fs::read_to_string(&p).with_context(|| format!("{}", p.display())).map_err(data)?;
            let m: EvalOutput = serde_json::from_str(&text)
                .with_context(|| format!("{}: not a metrics file", p.display()))
                .map_err(data)?;
            match &class_names {
                Some(c) if *c != m.class_names => {
                    return Err(data(anyhow!("{}: class names differ from the first metrics file", p.display())))
                }
                _ => class_names = Some(m.class_names.clone()),
            }
            models.push(ModelMetrics { name: m.name, per_class: m.per_class });
        }
        render_report(&class_names.unwrap_or_default(), &models, None).map_err(data)?
    };
    print!("{}", rendered.to_text());
    if let Some(out) = &args.out {
        write_text(&paths.resolve(out), &rendered.to_json())?;
    }
    Ok(())
}
