//! The `avfuse` command line. Every subcommand resolves and validates its
//! configuration first, then writes all artifacts under `--out-dir`,
//! including `resolved.cfg`, from which the run can be repeated.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use avfuse_core::model::{Mode, ModelConfig, ModelParams};
use avfuse_core::pipeline::{dark_subset, ManifestEntry, Split};
use avfuse_core::train::{occlusion_sweep_with, train, AblationArm, EpochLog, EvalOptions, Mask, Sample};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::config::RunConfig;
use crate::dataset::{load_samples, preprocess, LoadOptions};
use crate::error::{AppError, AppResult};
use crate::harness::{self, par_evaluate};
use crate::manifest::{self, Manifest};
use crate::synthio::{self, class_table};
use crate::{checkpoint, init_threads};

pub const RESOLVED: &str = "resolved.cfg";

#[derive(Debug, Parser)]
#[command(name = "avfuse", version, about = "Audio-visual event classification toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Gen(Common),
    /// Write degraded copies of a dataset (dark or audio noise).
    Degrade(Common),
    /// Cache log-mel images of a dataset's audio.
    Preprocess(Common),
    /// Train a model and keep its best checkpoint.
    Train(Common),
    /// Evaluate a checkpoint on one split.
    Eval(Common),
    /// Train visual-only, audio-only and audio-visual arms on one split.
    Ablate(Common),
    /// Sweep temporal or spatial occlusion ratios over a checkpoint.
    Occlude(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Configuration file (`key = value` with `[section]` headers).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory receiving every artifact of the run.
    #[arg(long)]
    out_dir: PathBuf,
    /// Override `section.key=value`; applied after the file, in order.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// visual, audio or av. Model modality for train; fed modalities for
    /// eval and occlude.
    #[arg(long)]
    mode: Option<String>,
    /// concat, concat_ln, concat_um, add or lf.
    #[arg(long)]
    fusion: Option<String>,
    #[arg(long)]
    um_scale: Option<f64>,
    /// Feed the raw correlation map to the low-level fusion path.
    #[arg(long)]
    lf_raw: bool,
    /// Evaluate on the dark subset only.
    #[arg(long)]
    dark: bool,
    /// temporal or spatial for occlude; dark or audio_noise for degrade.
    #[arg(long)]
    kind: Option<String>,
    /// Comma-separated occlusion ratios.
    #[arg(long)]
    ratios: Option<String>,
    /// Comma-separated occlusion seeds.
    #[arg(long)]
    seeds: Option<String>,
    /// Degradation magnitude.
    #[arg(long)]
    magnitude: Option<f64>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Directory written by `preprocess`.
    #[arg(long)]
    logmel_cache: Option<PathBuf>,
    /// train or val.
    #[arg(long)]
    split: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Which {
    Gen,
    Degrade,
    Preprocess,
    Train,
    Eval,
    Ablate,
    Occlude,
}

fn resolve(which: Which, a: &Common) -> AppResult<RunConfig> {
    let mut c = RunConfig::default();
    if let Some(p) = &a.config {
        c.load_file(p)?;
    }
    for s in &a.set {
        c.set_assignment(s)?;
    }
    let mut flag = |k: &str, v: Option<String>| v.map_or(Ok(()), |v| c.set(k, &v));
    flag("seed", a.seed.map(|s| s.to_string()))?;
    let mode_key = if matches!(which, Which::Eval | Which::Occlude) {
        "eval.mode"
    } else {
        "model.mode"
    };
    flag(mode_key, a.mode.clone())?;
    flag("model.fusion", a.fusion.clone())?;
    flag("model.um_scale", a.um_scale.map(|v| v.to_string()))?;
    let kind_key = if which == Which::Degrade {
        "degrade.kind"
    } else {
        "occlude.kind"
    };
    flag(kind_key, a.kind.clone())?;
    flag("occlude.ratios", a.ratios.clone())?;
    flag("occlude.seeds", a.seeds.clone())?;
    flag("degrade.magnitude", a.magnitude.map(|v| v.to_string()))?;
    flag("eval.split", a.split.clone())?;
    let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
    flag("paths.manifest", path(&a.manifest))?;
    flag("paths.checkpoint", path(&a.checkpoint))?;
    flag("paths.logmel_cache", path(&a.logmel_cache))?;
    if a.dark {
        c.eval.dark = true;
    }
    if a.lf_raw {
        c.model.lf_normalize = false;
    }
    c.validate()?;
    Ok(c)
}

fn required<'a>(p: &'a Option<PathBuf>, what: &str) -> AppResult<&'a Path> {
    p.as_deref()
        .ok_or_else(|| AppError::validation(format!("--{what} (or paths.{}) is required", what.replace('-', "_"))))
}

fn load_manifest(c: &RunConfig) -> AppResult<Manifest> {
    manifest::load(required(&c.paths.manifest, "manifest")?, class_table())
}

fn load_options(model: &ModelConfig, c: &RunConfig) -> AppResult<LoadOptions> {
    if model.mel_bins != c.audio.mel_bins {
        return Err(AppError::validation(format!(
            "model expects {} mel bins but audio.mel_bins is {}",
            model.mel_bins, c.audio.mel_bins
        )));
    }
    Ok(LoadOptions {
        clip_len: model.clip_len,
        frame_h: model.frame_h,
        frame_w: model.frame_w,
        logmel: c.audio.clone(),
        cache: c.paths.logmel_cache.clone(),
    })
}

fn split_entries(m: &Manifest, split: Split) -> Vec<ManifestEntry> {
    m.entries.iter().filter(|e| e.split == split).cloned().collect()
}

fn prepare_out(out: &Path, c: &RunConfig) -> AppResult<()> {
    harness::write_text(&out.join(RESOLVED), &c.to_text())
}

/// Mask that turns a model trained on `trained` into one fed only `fed`.
fn mask_for(trained: Mode, fed: Option<Mode>) -> AppResult<Mask> {
    let Some(fed) = fed else { return Ok(Mask::None) };
    match (trained, fed) {
        (t, f) if t == f => Ok(Mask::None),
        (Mode::AudioVisual, Mode::VisualOnly) => Ok(Mask::Audio),
        (Mode::AudioVisual, Mode::AudioOnly) => Ok(Mask::Visual),
        (t, f) => Err(AppError::validation(format!(
            "a {} model cannot be evaluated with --mode {}",
            t.name(),
            f.name()
        ))),
    }
}

fn eval_options(c: &RunConfig, params: &ModelParams) -> AppResult<EvalOptions> {
    Ok(EvalOptions {
        mask: mask_for(params.config.mode, c.eval.mode)?,
        occlusion: None,
        logmel_pad: c.train.logmel_pad,
        batch_size: c.eval.batch_size,
    })
}

/// Checkpoint plus the evaluation samples selected by `eval.split` and
/// `eval.dark`.
fn eval_inputs(c: &RunConfig) -> AppResult<(ModelParams, Vec<Sample>, EvalOptions)> {
    let m = load_manifest(c)?;
    let ck = checkpoint::load(required(&c.paths.checkpoint, "checkpoint")?)?;
    let opts = eval_options(c, &ck.params)?;
    let mut entries = split_entries(&m, c.eval.split);
    if c.eval.dark {
        entries = dark_subset(&entries);
    }
    if entries.is_empty() {
        return Err(AppError::validation(format!(
            "no {}{} entries in the manifest",
            if c.eval.dark { "dark " } else { "" },
            c.eval.split.name()
        )));
    }
    let samples = load_samples(&m, &entries, &load_options(&ck.params.config, c)?)?;
    Ok((ck.params, samples, opts))
}

fn cmd_gen(c: &RunConfig, out: &Path) -> AppResult<()> {
    let m = synthio::generate(&c.synth_config(), out)?;
    let hash = synthio::dataset_hash(&m)?;
    harness::write_text(&out.join("dataset_hash.txt"), &format!("{hash}\n"))?;
    println!("{} clips, dataset hash {hash}", m.entries.len());
    Ok(())
}

fn cmd_degrade(c: &RunConfig, out: &Path) -> AppResult<()> {
    let src = load_manifest(c)?;
    let d = &c.degrade;
    let m = synthio::degrade(&src, d.kind, d.magnitude, c.seed, out)?;
    let hash = synthio::dataset_hash(&m)?;
    harness::write_text(&out.join("dataset_hash.txt"), &format!("{hash}\n"))?;
    println!(
        "{} clips degraded ({} {}), dataset hash {hash}",
        m.entries.len(),
        d.kind.name(),
        d.magnitude
    );
    Ok(())
}

fn cmd_preprocess(c: &RunConfig, out: &Path) -> AppResult<()> {
    let m = load_manifest(c)?;
    let n = preprocess(&m, &m.entries, &c.audio, out)?;
    println!("{n} log-mel images cached in {}", out.display());
    Ok(())
}

fn train_sets(c: &RunConfig, model: &ModelConfig) -> AppResult<(Vec<Sample>, Vec<Sample>)> {
    let m = load_manifest(c)?;
    let opts = load_options(model, c)?;
    let tr = load_samples(&m, &split_entries(&m, Split::Train), &opts)?;
    let va = load_samples(&m, &split_entries(&m, Split::Val), &opts)?;
    Ok((tr, va))
}

fn log_epoch(prefix: &str, l: &EpochLog, best: bool) {
    eprintln!(
        "{prefix}epoch {:>3}  train {:.4}  val {:.4}  lr {:.1e}  macro {:.4}{}",
        l.epoch,
        l.train_loss,
        l.val_loss,
        l.lr,
        l.macro_acc.unwrap_or(f64::NAN),
        if best { "  *" } else { "" }
    );
}

fn cmd_train(c: &RunConfig, out: &Path) -> AppResult<()> {
    let model = c.model_config()?;
    let (tr, va) = train_sets(c, &model)?;
    let names = &class_table()[..model.n_classes];
    let metrics = out.join("metrics.csv");
    let last_good = out.join("checkpoint_last_good");
    let best_dir = out.join("checkpoint_best");
    let mut history: Vec<EpochLog> = Vec::new();
    let mut io_error: Option<AppError> = None;
    let mut observer = |l: &EpochLog, p: &ModelParams, is_best: bool| -> avfuse_core::Result<()> {
        log_epoch("", l, is_best);
        history.push(l.clone());
        let step = harness::write_text(&metrics, &harness::metrics_csv(&history, names))
            .and_then(|_| checkpoint::save(&last_good, p, l.epoch))
            .and_then(|_| if is_best { checkpoint::save(&best_dir, p, l.epoch) } else { Ok(()) });
        if let Err(e) = step {
            io_error = Some(e);
            return Err(avfuse_core::Error::Contract("artifact write failed".into()));
        }
        Ok(())
    };
    let outcome = match train(&model, &c.train_config(), &tr, &va, &mut observer) {
        Ok(o) => o,
        Err(e) => {
            if let Some(io) = io_error {
                return Err(io);
            }
            if last_good.exists() {
                eprintln!("training failed; last good checkpoint kept in {}", last_good.display());
            }
            return Err(e.into());
        }
    };
    let r = &outcome.best_report;
    harness::write_json(&out.join("report.json"), &harness::report_json(r, names))?;
    harness::write_text(&out.join("confusion.csv"), &harness::confusion_csv(r, names))?;
    harness::write_json(
        &out.join("train.json"),
        &json!({
            "model": model.describe(),
            "parameters": outcome.best.num_params(),
            "initial_loss": outcome.initial_loss,
            "best_epoch": outcome.best_epoch,
            "best_macro_acc": r.macro_acc,
            "train_split_hash": outcome.train_hash,
            "val_split_hash": outcome.val_hash,
        }),
    )?;
    println!(
        "best epoch {} macro accuracy {:.4}",
        outcome.best_epoch,
        r.macro_acc.unwrap_or(f64::NAN)
    );
    Ok(())
}

fn cmd_eval(c: &RunConfig, out: &Path) -> AppResult<()> {
    let (params, samples, opts) = eval_inputs(c)?;
    let names = &class_table()[..params.config.n_classes];
    let r = par_evaluate(&params, &samples, &opts)?;
    let mut j = harness::report_json(&r, names);
    j["split"] = json!(c.eval.split.name());
    j["dark_only"] = json!(c.eval.dark);
    j["fed_modalities"] = json!(c.eval.mode.unwrap_or(params.config.mode).name());
    harness::write_json(&out.join("report.json"), &j)?;
    harness::write_text(&out.join("confusion.csv"), &harness::confusion_csv(&r, names))?;
    println!(
        "{} clips, macro accuracy {:.4}",
        samples.len(),
        r.macro_acc.unwrap_or(f64::NAN)
    );
    Ok(())
}

fn cmd_ablate(c: &RunConfig, out: &Path) -> AppResult<()> {
    let base = c.model_config()?;
    let (tr, va) = train_sets(c, &base)?;
    let names = &class_table()[..base.n_classes];
    let cfg = c.train_config();
    let mut arms = Vec::new();
    for mode in Mode::ALL {
        let model = ModelConfig { mode, ..base.clone() };
        let prefix = format!("[{}] ", mode.name());
        let outcome = train(&model, &cfg, &tr, &va, &mut |l: &EpochLog, _: &ModelParams, b: bool| {
            log_epoch(&prefix, l, b);
            Ok(())
        })?;
        harness::write_text(
            &out.join(format!("metrics_{}.csv", mode.name())),
            &harness::metrics_csv(&outcome.history, names),
        )?;
        arms.push(AblationArm { mode, outcome });
    }
    harness::write_text(&out.join("ablation.csv"), &harness::ablation_csv(&arms, names))?;
    harness::write_json(&out.join("ablation.json"), &harness::ablation_json(&arms, names))?;
    for a in &arms {
        println!(
            "{:<6} macro accuracy {:.4}",
            a.mode.name(),
            a.outcome.best_report.macro_acc.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}

fn cmd_occlude(c: &RunConfig, out: &Path) -> AppResult<()> {
    let (params, samples, opts) = eval_inputs(c)?;
    let names = &class_table()[..params.config.n_classes];
    let o = &c.occlude;
    let rows = occlusion_sweep_with(&params, &samples, o.kind, &o.ratios, &o.seeds, &opts, &par_evaluate)?;
    harness::write_text(&out.join("occlusion.csv"), &harness::occlusion_csv(&rows, names))?;
    harness::write_json(&out.join("occlusion.json"), &harness::occlusion_json(&rows, names))?;
    for r in &rows {
        println!("ratio {:.2} macro accuracy {:.4}", r.ratio, r.mean_macro.unwrap_or(f64::NAN));
    }
    Ok(())
}

fn dispatch(which: Which, a: &Common) -> AppResult<()> {
    init_threads()?;
    let c = resolve(which, a)?;
    let out = a.out_dir.as_path();
    prepare_out(out, &c)?;
    match which {
        Which::Gen => cmd_gen(&c, out),
        Which::Degrade => cmd_degrade(&c, out),
        Which::Preprocess => cmd_preprocess(&c, out),
        Which::Train => cmd_train(&c, out),
        Which::Eval => cmd_eval(&c, out),
        Which::Ablate => cmd_ablate(&c, out),
        Which::Occlude => cmd_occlude(&c, out),
    }
}

/// Runs the command line and returns the process exit code: 0 on success,
/// 1 on invalid usage or configuration, 2 when the run itself fails.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (which, common) = match &cli.command {
        Command::Gen(a) => (Which::Gen, a),
        Command::Degrade(a) => (Which::Degrade, a),
        Command::Preprocess(a) => (Which::Preprocess, a),
        Command::Train(a) => (Which::Train, a),
        Command::Eval(a) => (Which::Eval, a),
        Command::Ablate(a) => (Which::Ablate, a),
        Command::Occlude(a) => (Which::Occlude, a),
    };
    match dispatch(which, common) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
