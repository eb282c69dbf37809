use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mitoaug::batch::map_samples;
use mitoaug::dataset::{
    grouped_stratified_kfold, inverse_frequency_weights, load_manifest, read_folds, sampling_plan,
    write_folds, write_sampling_plan, ManifestRecord,
};
use mitoaug::evaluation::{self, cosine_lr, load_predictions, ScheduleSpec, ScoreKind};
use mitoaug::image::io::{read_png, write_atomic, write_png, write_tensor};
use mitoaug::image::normalize_imagenet;
use mitoaug::pipeline::{
    apply, build_training_pipeline, build_validation_pipeline, plan, read_audit_jsonl, replay, replay_preview,
    write_audit_jsonl, AuditRecord, PipelineSpec,
};
use mitoaug::Error;

#[derive(Parser)]
#[command(name = "mitoaug", version, about = "Deterministic mitotic-figure patch augmentation and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assign manifest groups to folds and write the fold JSON.
    Split {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Number of folds.
        #[arg(long = "k", default_value_t = 5)]
        k: usize,
    },
    /// Write inverse-class-frequency weights (`id,label,weight`) for a training pool.
    Weights {
        #[command(flatten)]
        pool: PoolArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the balanced-sampling batch plan as JSONL.
    SamplePlan {
        #[command(flatten)]
        pool: PoolArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        epochs: u64,
        #[arg(long, default_value_t = 128)]
        batch_size: usize,
    },
    /// Apply the training pipeline: tensors, optional PNG previews, audit JSONL.
    Augment {
        #[command(flatten)]
        pool: PoolArgs,
        #[arg(long)]
        out: PathBuf,
        /// Pipeline overrides (JSON).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the pipeline seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 0)]
        epoch: u64,
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Also write the pre-normalization patches as PNG.
        #[arg(long)]
        previews: bool,
    },
    /// Apply the validation pipeline (crop, resize, normalize).
    Preprocess {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Restrict to the validation records of `--fold-index`.
        #[arg(long, requires = "fold_index")]
        folds: Option<PathBuf>,
        #[arg(long, requires = "folds")]
        fold_index: Option<usize>,
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Per-fold best-epoch selection and metrics from a predictions CSV.
    Evaluate {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = evaluation::DEFAULT_THRESHOLD)]
        threshold: f64,
        #[arg(long, value_enum, default_value_t = ScoreArg::Probability)]
        score_kind: ScoreArg,
        /// Also write a per-domain CSV summary of the pooled report.
        #[arg(long)]
        domain_csv: Option<PathBuf>,
    },
    /// Print the cosine-annealing learning rate for every epoch.
    Schedule {
        #[arg(long, default_value_t = 20)]
        epochs: u64,
        #[arg(long, default_value_t = 1e-4)]
        eta0: f64,
        #[arg(long, default_value_t = 1e-7)]
        eta_min: f64,
    },
    /// Regenerate tensors from audit records.
    Replay {
        #[arg(long)]
        audit: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
}

/// A manifest, optionally narrowed to the training records of one fold.
#[derive(Args)]
struct PoolArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, requires = "fold_index")]
    folds: Option<PathBuf>,
    #[arg(long, requires = "folds")]
    fold_index: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScoreArg {
    Probability,
    Logit,
}

enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 3 } else { 2 })
        }
    }
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Split { manifest, out, seed, k } => {
            if k < 2 {
                return Err(Failure::Usage("--k must be at least 2".into()));
            }
            let records = load_manifest(&manifest)?;
            let folds = grouped_stratified_kfold(&records, k, seed)?;
            write_folds(&out, &folds)?;
            for (f, c) in folds.class_counts().iter().enumerate() {
                eprintln!("fold {f}: {} AMF, {} NMF", c.amf, c.nmf);
            }
            Ok(())
        }
        Command::Weights { pool, out } => {
            let (records, _) = load_pool(&pool)?;
            let w = inverse_frequency_weights(records.iter())?;
            let mut text = String::from("id,label,weight\n");
            for ((id, label), weight) in w.ids.iter().zip(&w.labels).zip(&w.weights) {
                text.push_str(&format!("{id},{label},{weight}\n"));
            }
            write_atomic(&out, text.as_bytes())?;
            Ok(())
        }
        Command::SamplePlan {
            pool,
            out,
            seed,
            epochs,
            batch_size,
        } => {
            if batch_size == 0 {
                return Err(Failure::Usage("--batch-size must be at least 1".into()));
            }
            let (records, _) = load_pool(&pool)?;
            let w = inverse_frequency_weights(records.iter())?;
            write_sampling_plan(&out, &sampling_plan(&w, epochs, batch_size, seed)?)?;
            Ok(())
        }
        Command::Augment {
            pool,
            out,
            config,
            seed,
            epoch,
            workers,
            previews,
        } => {
            let mut spec = load_pipeline(config.as_deref())?;
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            let (records, base) = load_pool(&pool)?;
            let ids = sample_ids(&pool.manifest)?;
            augment(&spec, &records, &ids, &base, &out, epoch, workers, previews)
        }
        Command::Preprocess {
            manifest,
            out,
            folds,
            fold_index,
            workers,
        } => {
            let all = load_manifest(&manifest)?;
            let records: Vec<ManifestRecord> = match (folds, fold_index) {
                (Some(f), Some(i)) => {
                    let folds = read_folds(&f)?;
                    check_fold_index(i, folds.k())?;
                    folds.validation_records(&all, i).into_iter().cloned().collect()
                }
                _ => sorted_included(all),
            };
            let base = manifest_dir(&manifest);
            let spec = build_validation_pipeline();
            let results = map_samples(&records, workers, |r| -> mitoaug::Result<()> {
                let patch = read_png(&r.resolve_image(&base))?;
                let (tensor, _) = apply(&spec, &patch, 0, 0)?;
                write_tensor(&out.join(tensor_name(&r.id)), &tensor)
            });
            results.into_iter().collect::<mitoaug::Result<()>>()?;
            Ok(())
        }
        Command::Evaluate {
            predictions,
            out,
            threshold,
            score_kind,
            domain_csv,
        } => {
            if !(0.0..=1.0).contains(&threshold) {
                return Err(Failure::Usage("--threshold must lie in [0, 1]".into()));
            }
            let kind = match score_kind {
                ScoreArg::Probability => ScoreKind::Probability,
                ScoreArg::Logit => ScoreKind::Logit,
            };
            let preds = load_predictions(&predictions)?;
            let summary = evaluation::evaluate(&preds, kind.threshold(threshold))?;
            let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
            write_atomic(&out, format!("{json}\n").as_bytes())?;
            if let Some(path) = domain_csv {
                write_atomic(&path, summary.pooled.domain_csv().as_bytes())?;
            }
            for f in &summary.folds {
                eprintln!(
                    "fold {}: best epoch {} (BA {})",
                    f.fold,
                    f.best_epoch,
                    f.report.balanced_accuracy.map_or("undefined".into(), |b| format!("{b:.4}"))
                );
            }
            Ok(())
        }
        Command::Schedule { epochs, eta0, eta_min } => {
            let s = ScheduleSpec {
                eta0,
                eta_min,
                t_max: epochs,
            };
            s.validate().map_err(|e| Failure::Usage(e.to_string()))?;
            for epoch in 0..=epochs {
                println!("{epoch}\t{:e}", cosine_lr(epoch, &s)?);
            }
            Ok(())
        }
        Command::Replay {
            audit,
            manifest,
            out,
            workers,
        } => {
            let audits = read_audit_jsonl(&audit)?;
            let records = load_manifest(&manifest)?;
            let base = manifest_dir(&manifest);
            let by_id: HashMap<&str, &ManifestRecord> = records.iter().map(|r| (r.id.as_str(), r)).collect();
            let mut jobs = Vec::with_capacity(audits.len());
            for (i, a) in audits.iter().enumerate() {
                let id = a.record_id.as_deref().ok_or_else(|| {
                    Error::Format {
                        path: audit.clone(),
                        message: format!("line {}: missing record_id", i + 1),
                    }
                })?;
                let rec = by_id.get(id).ok_or_else(|| Error::Format {
                    path: audit.clone(),
                    message: format!("line {}: record `{id}` not in the manifest", i + 1),
                })?;
                jobs.push((a, *rec));
            }
            let results = map_samples(&jobs, workers, |(a, r)| -> mitoaug::Result<()> {
                let patch = read_png(&r.resolve_image(&base))?;
                write_tensor(&out.join(tensor_name(&r.id)), &replay(a, &patch)?)
            });
            results.into_iter().collect::<mitoaug::Result<()>>()?;
            Ok(())
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn augment(
    spec: &PipelineSpec,
    records: &[ManifestRecord],
    sample_ids: &HashMap<String, u64>,
    base: &Path,
    out: &Path,
    epoch: u64,
    workers: usize,
    previews: bool,
) -> Outcome {
    let results = map_samples(records, workers, |r| -> mitoaug::Result<AuditRecord> {
        let patch = read_png(&r.resolve_image(base))?;
        let mut audit = plan(spec, epoch, sample_ids[&r.id]);
        audit.record_id = Some(r.id.clone());
        let preview = replay_preview(&audit, &patch)?;
        write_tensor(&out.join("tensors").join(tensor_name(&r.id)), &normalize_imagenet(&preview)?)?;
        if previews {
            write_png(&out.join("previews").join(format!("{}.png", file_stem(&r.id))), &preview)?;
        }
        Ok(audit)
    });
    let audits = results.into_iter().collect::<mitoaug::Result<Vec<_>>>()?;
    write_audit_jsonl(&out.join("audit.jsonl"), &audits)?;
    let spec_json = serde_json::to_string_pretty(&spec.to_json()).expect("spec serializes");
    write_atomic(&out.join("pipeline.json"), format!("{spec_json}\n").as_bytes())?;
    Ok(())
}

fn load_pipeline(config: Option<&Path>) -> mitoaug::Result<PipelineSpec> {
    let overrides = match config {
        None => serde_json::Value::Null,
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.to_path_buf(),
                source: e,
            })?;
            serde_json::from_str(&text).map_err(|e| Error::Format {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?
        }
    };
    build_training_pipeline(&overrides)
}

fn manifest_dir(manifest: &Path) -> PathBuf {
    manifest.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn sorted_included(records: Vec<ManifestRecord>) -> Vec<ManifestRecord> {
    let mut out: Vec<ManifestRecord> = records.into_iter().filter(ManifestRecord::is_included).collect();
    out.sort_by(|a, b| a.id.cmp(&b.id));
    out
}

fn check_fold_index(i: usize, k: usize) -> Outcome {
    if i >= k {
        return Err(Failure::Usage(format!("--fold-index {i} outside [0, {}]", k - 1)));
    }
    Ok(())
}

/// Included records, or the training records of one fold, in id order.
fn load_pool(pool: &PoolArgs) -> Result<(Vec<ManifestRecord>, PathBuf), Failure> {
    let all = load_manifest(&pool.manifest)?;
    let records = match (&pool.folds, pool.fold_index) {
        (Some(f), Some(i)) => {
            let folds = read_folds(f)?;
            check_fold_index(i, folds.k())?;
            folds.training_records(&all, i).into_iter().cloned().collect()
        }
        _ => sorted_included(all),
    };
    Ok((records, manifest_dir(&pool.manifest)))
}

/// Sample ids are positions in the id-sorted manifest, so a record keeps its
/// id whichever subset is processed.
fn sample_ids(manifest: &Path) -> mitoaug::Result<HashMap<String, u64>> {
    let mut ids: Vec<String> = load_manifest(manifest)?.into_iter().map(|r| r.id).collect();
    ids.sort();
    Ok(ids.into_iter().enumerate().map(|(i, id)| (id, i as u64)).collect())
}

fn file_stem(id: &str) -> String {
    id.replace(['/', '\\'], "_")
}

fn tensor_name(id: &str) -> String {
    format!("{}.tensor", file_stem(id))
}
