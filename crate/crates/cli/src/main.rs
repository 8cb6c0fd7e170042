//! `selftrain`: reproducible self-training annotation experiments.
//!
//! Exit codes: 0 success, 2 usage, 3 validation/ingestion, 4 training,
//! 5 run stalled (no epochs selected for any class).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use selftrain_core::config::RunConfig;
use selftrain_core::corpus::{
    load_corpus, write_labels, write_signal, Corpus, CorpusManifest, LabelClass, ManifestEntry,
    Role,
};
use selftrain_core::error::Error;
use selftrain_core::eval::{emit_table1, pct};
use selftrain_core::features::Epoch;
use selftrain_core::hmm::{load_model_set, save_model_set};
use selftrain_core::pipeline::{
    decode_epochs, epochs_for_role, evaluate, read_report_csv, run_selftrain, sweep_class,
    train_baseline, train_models, write_final_labels, write_report_csv, FinalLabel, StopReason,
    TrainingPool,
};
use selftrain_core::selector::{
    rank_all_by_class_likelihood, rank_by, Scheme, ScoreKind,
};

#[derive(Parser)]
#[command(name = "selftrain", version, about = "Self-training annotation engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Config file with `section.key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Args, Clone)]
struct SchemeArgs {
    /// Selection scheme: s1 (volume halving) or s2 (fixed threshold).
    #[arg(long)]
    scheme: Option<String>,
    /// S1 growth factor in (0, 1].
    #[arg(long)]
    growth_factor: Option<f64>,
    /// S2 global threshold, in the units of --score.
    #[arg(long)]
    threshold: Option<f64>,
    /// Score axis for thresholds: "confidence" or "raw" (per-epoch log
    /// likelihood).
    #[arg(long)]
    score: Option<String>,
    /// Maximum self-training iterations.
    #[arg(long)]
    iterations: Option<usize>,
    /// Also select pseudo-labels for the background classes.
    #[arg(long)]
    include_background: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic three-role corpus (gold-train, eval, unlabeled).
    Synth {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Train baseline models from the gold-train role and evaluate them.
    Train {
        /// Corpus manifest.
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Decode the unlabeled role with existing models.
    Decode {
        #[arg(long)]
        manifest: PathBuf,
        /// Model set file written by `train` or `selftrain`.
        #[arg(long)]
        models: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the full self-training loop.
    Selftrain {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        scheme: SchemeArgs,
    },
    /// Sweep selection thresholds for one class and report sensitivity.
    Sweep {
        #[arg(long)]
        manifest: PathBuf,
        /// Comma-separated confidence thresholds.
        #[arg(long)]
        thresholds: Option<String>,
        /// Comma-separated top-percentiles of the decoded ranking.
        #[arg(long)]
        percentiles: Option<String>,
        /// Class to sweep.
        #[arg(long, default_value = "SPSW")]
        class: String,
        /// Score axis: "confidence" or "raw".
        #[arg(long)]
        score: Option<String>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Score existing models on the eval role.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        models: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Summarize a finished run directory.
    Report {
        /// Run directory produced by `selftrain`.
        #[arg(long)]
        run: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("SELFTRAIN_LOG")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Usage(_) => 2,
        Error::Init { .. } | Error::Train(_) => 4,
        _ => 3,
    }
}

fn resolve_config(common: &CommonArgs) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &common.config {
        cfg.apply_file(path)?;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(jobs) = common.jobs {
        cfg.jobs = jobs;
    }
    cfg.features.validate()?;
    Ok(cfg)
}

fn apply_scheme_args(cfg: &mut RunConfig, scheme: &SchemeArgs) -> Result<(), Error> {
    if let Some(s) = &scheme.scheme {
        cfg.scheme =
            Scheme::parse(s).ok_or_else(|| Error::Usage(format!("unknown scheme {s:?}")))?;
    }
    if let Some(g) = scheme.growth_factor {
        cfg.growth_factor = g;
    }
    if let Some(t) = scheme.threshold {
        cfg.threshold = t;
    }
    if let Some(k) = &scheme.score {
        cfg.score_kind = ScoreKind::parse(k)
            .ok_or_else(|| Error::Usage(format!("unknown score kind {k:?}")))?;
    }
    if let Some(k) = scheme.iterations {
        cfg.max_iterations = k;
    }
    if scheme.include_background {
        cfg.include_background = true;
    }
    Ok(())
}

fn init_rayon(cfg: &RunConfig) {
    if cfg.jobs > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build_global();
    }
}

fn out_dir(common: &CommonArgs) -> Result<PathBuf, Error> {
    let out = common
        .out
        .clone()
        .ok_or_else(|| Error::Usage("--out is required".into()))?;
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    Ok(out)
}

fn dispatch(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Synth { common } => cmd_synth(&common),
        Command::Train { manifest, common } => cmd_train(&manifest, &common),
        Command::Decode {
            manifest,
            models,
            common,
        } => cmd_decode(&manifest, &models, &common),
        Command::Selftrain {
            manifest,
            common,
            scheme,
        } => cmd_selftrain(&manifest, &common, &scheme),
        Command::Sweep {
            manifest,
            thresholds,
            percentiles,
            class,
            score,
            common,
        } => cmd_sweep(
            &manifest,
            thresholds.as_deref(),
            percentiles.as_deref(),
            &class,
            score.as_deref(),
            &common,
        ),
        Command::Eval {
            manifest,
            models,
            common,
        } => cmd_eval(&manifest, &models, &common),
        Command::Report { run } => cmd_report(&run),
    }
}

/// Generate the three roles of a synthetic corpus and write manifest,
/// signals, labels, and (separately) unlabeled ground truth.
fn cmd_synth(common: &CommonArgs) -> Result<ExitCode, Error> {
    let cfg = resolve_config(common)?;
    init_rayon(&cfg);
    let out = out_dir(common)?;
    cfg.write_resolved(&out.join("config.resolved"))?;

    let signals = out.join("signals");
    let labels = out.join("labels");
    let truth = out.join("truth");
    for d in [&signals, &labels, &truth] {
        fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }

    let (gold, eval_corpus, unl) = selftrain_core::corpus::synth::generate_roles(
        &cfg.synth,
        cfg.seed,
        cfg.synth_eval_scale,
        cfg.synth_unlabeled_scale,
    )?;
    let mut entries = Vec::new();
    let mut write_corpus = |corpus: &Corpus, label_dir: Option<&Path>| -> Result<(), Error> {
        for rec in &corpus.records {
            let sig_path = signals.join(format!("{}.csv", rec.record.record_id));
            write_signal(&sig_path, &rec.record)?;
            let mut label_path = None;
            if let Some(dir) = label_dir {
                let p = dir.join(format!("{}.csv", rec.record.record_id));
                write_labels(&p, &rec.spans)?;
                if rec.role != Role::Unlabeled {
                    label_path = Some(p);
                }
            }
            entries.push(ManifestEntry {
                role: rec.role,
                signal_path: sig_path,
                label_path,
            });
        }
        Ok(())
    };
    write_corpus(&gold, Some(&labels))?;
    write_corpus(&eval_corpus, Some(&labels))?;
    write_corpus(&unl, Some(&truth))?;

    let manifest = CorpusManifest {
        entries,
        sample_rate: cfg.synth.sample_rate,
    };
    manifest.write(&out.join("manifest.tsv"), &out)?;

    let totals = gold.duration_summary();
    println!("synthetic corpus written to {}", out.display());
    println!("gold per-class seconds:");
    for c in LabelClass::ALL {
        println!("  {c}  {:>8.0}", totals[c.index()]);
    }
    Ok(ExitCode::SUCCESS)
}

struct LoadedEpochs {
    gold: Vec<Epoch>,
    eval: Vec<Epoch>,
    unlabeled: Vec<Epoch>,
}

fn load_epochs(manifest_path: &Path, cfg: &RunConfig) -> Result<LoadedEpochs, Error> {
    let manifest = CorpusManifest::load(manifest_path)?;
    let corpus = load_corpus(&manifest)?;
    Ok(LoadedEpochs {
        gold: epochs_for_role(&corpus, Role::GoldTrain, &cfg.features, cfg.min_overlap)?,
        eval: epochs_for_role(&corpus, Role::Eval, &cfg.features, cfg.min_overlap)?,
        unlabeled: epochs_for_role(&corpus, Role::Unlabeled, &cfg.features, cfg.min_overlap)?,
    })
}

fn print_sensitivity_table(sens: &[f64; 6], acc: f64) {
    println!("{:<8}{:>12}", "Class", "Sensitivity");
    for c in LabelClass::ALL {
        println!("{:<8}{:>12}", c.name(), pct(sens[c.index()]));
    }
    println!("six-way accuracy: {}", pct(acc));
}

fn cmd_train(manifest: &Path, common: &CommonArgs) -> Result<ExitCode, Error> {
    let cfg = resolve_config(common)?;
    init_rayon(&cfg);
    let out = out_dir(common)?;
    cfg.write_resolved(&out.join("config.resolved"))?;

    let epochs = load_epochs(manifest, &cfg)?;
    if epochs.gold.is_empty() {
        return Err(Error::Validation("manifest has no gold-train records".into()));
    }
    if epochs.eval.is_empty() {
        return Err(Error::Validation("manifest has no eval records".into()));
    }
    let pool = TrainingPool::from_gold(epochs.gold)?;
    let (models, report) = train_baseline(
        &pool,
        &epochs.eval,
        &cfg.model,
        &cfg.features.fingerprint(),
        cfg.seed,
    )?;
    save_model_set(&out.join("models.txt"), &models)?;
    write_report_csv(&out.join("report.csv"), &[&report])?;
    print_sensitivity_table(&report.sensitivity, report.accuracy);
    Ok(ExitCode::SUCCESS)
}

fn cmd_decode(manifest: &Path, models_path: &Path, common: &CommonArgs) -> Result<ExitCode, Error> {
    let cfg = resolve_config(common)?;
    init_rayon(&cfg);
    let out = out_dir(common)?;
    let models = load_model_set(models_path)?;
    models.check_fingerprint(&cfg.features)?;
    let epochs = load_epochs(manifest, &cfg)?;
    if epochs.unlabeled.is_empty() {
        return Err(Error::Usage("manifest has no unlabeled records".into()));
    }
    let decoded = decode_epochs(&models, &epochs.unlabeled)?;
    let labels: Vec<FinalLabel> = decoded
        .into_iter()
        .map(|d| FinalLabel {
            id: d.id,
            start: d.start,
            class: d.class,
            confidence: d.confidence,
            accepted_iteration: None,
        })
        .collect();
    write_final_labels(
        &out.join("decoded_labels.csv"),
        &labels,
        cfg.features.epoch_duration,
    )?;
    println!("decoded {} epochs to {}", labels.len(), out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_selftrain(
    manifest: &Path,
    common: &CommonArgs,
    scheme: &SchemeArgs,
) -> Result<ExitCode, Error> {
    let mut cfg = resolve_config(common)?;
    apply_scheme_args(&mut cfg, scheme)?;
    init_rayon(&cfg);
    // The run is assembled in a .partial directory and renamed on
    // completion, so an interrupted run never masquerades as a finished one.
    let final_out = common
        .out
        .clone()
        .ok_or_else(|| Error::Usage("--out is required".into()))?;
    let out = final_out.with_extension("partial");
    if out.exists() {
        fs::remove_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    }
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    cfg.write_resolved(&out.join("config.resolved"))?;

    let epochs = load_epochs(manifest, &cfg)?;
    for (role, list) in [
        ("gold-train", &epochs.gold),
        ("eval", &epochs.eval),
        ("unlabeled", &epochs.unlabeled),
    ] {
        if list.is_empty() {
            return Err(Error::Validation(format!("manifest has no {role} records")));
        }
    }

    let output = run_selftrain(
        epochs.gold,
        &epochs.eval,
        epochs.unlabeled,
        &cfg.model,
        &cfg.loop_config(),
        &cfg.policy_spec(),
        &cfg.features,
        Some(&out),
    )?;

    let first = &output.reports[0];
    if let Some(second) = output.reports.get(1) {
        let table = emit_table1(&first.sensitivity_map(), &second.sensitivity_map())?;
        println!("{table}");
    }
    for r in &output.reports {
        println!(
            "iteration {}: accuracy {}{}",
            r.iteration,
            pct(r.accuracy),
            if r.stalled { " (stalled)" } else { "" }
        );
    }
    println!("stop reason: {}", output.stop.as_str());
    if final_out.exists() {
        let empty = fs::read_dir(&final_out)
            .map_err(|e| Error::io(&final_out, e))?
            .next()
            .is_none();
        if empty {
            fs::remove_dir(&final_out).map_err(|e| Error::io(&final_out, e))?;
        } else {
            return Err(Error::Validation(format!(
                "output directory {} already exists and is not empty",
                final_out.display()
            )));
        }
    }
    fs::rename(&out, &final_out).map_err(|e| Error::io(&final_out, e))?;
    println!("run directory: {}", final_out.display());
    if output.stop == StopReason::Stalled {
        return Ok(ExitCode::from(5));
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_float_list(s: &str, what: &str) -> Result<Vec<f64>, Error> {
    let values: Result<Vec<f64>, _> = s.split(',').map(|f| f.trim().parse::<f64>()).collect();
    let values = values.map_err(|_| Error::Usage(format!("bad {what} list {s:?}")))?;
    if values.is_empty() {
        return Err(Error::Usage(format!("{what} list is empty")));
    }
    Ok(values)
}

/// Sweep selection thresholds for one class: for every cut, retrain that
/// class on gold plus the selected pseudo-labels and measure its eval
/// sensitivity with the other five baseline models unchanged.
fn cmd_sweep(
    manifest: &Path,
    thresholds: Option<&str>,
    percentiles: Option<&str>,
    class_name: &str,
    score: Option<&str>,
    common: &CommonArgs,
) -> Result<ExitCode, Error> {
    let mut cfg = resolve_config(common)?;
    if let Some(k) = score {
        cfg.score_kind = ScoreKind::parse(k)
            .ok_or_else(|| Error::Usage(format!("unknown score kind {k:?}")))?;
    }
    init_rayon(&cfg);
    let out = out_dir(common)?;
    cfg.write_resolved(&out.join("config.resolved"))?;
    let class = LabelClass::from_name(class_name)
        .ok_or_else(|| Error::Usage(format!("unknown class {class_name:?}")))?;
    // Validate the cut list shape before any corpus work.
    let raw_cuts = match (thresholds, percentiles) {
        (Some(t), None) => Ok(parse_float_list(t, "threshold")?),
        (None, Some(p)) => Err(parse_float_list(p, "percentile")?),
        _ => {
            return Err(Error::Usage(
                "pass exactly one of --thresholds or --percentiles".into(),
            ))
        }
    };

    let epochs = load_epochs(manifest, &cfg)?;
    let pool = TrainingPool::from_gold(epochs.gold.clone())?;
    let (baseline, _) = train_models(
        &pool,
        &cfg.model,
        &cfg.features.fingerprint(),
        cfg.seed,
    )?;
    let decoded = decode_epochs(&baseline, &epochs.unlabeled)?;
    let kind = cfg.score_kind;
    // Raw sweeps rank every epoch by the swept class's likelihood so loose
    // cuts reach beyond the class's own decode; confidence sweeps stay on
    // the loop's argmax-gated axis.
    let ranked = match kind {
        ScoreKind::RawLikelihood => rank_all_by_class_likelihood(&decoded, class),
        ScoreKind::Confidence => rank_by(&decoded, class, kind),
    };

    let cuts: Vec<f64> = match raw_cuts {
        Ok(explicit) => explicit,
        Err(pcts) => {
            if ranked.is_empty() {
                return Err(Error::Validation(format!(
                    "no decoded epochs of class {class} to take percentiles of"
                )));
            }
            pcts.iter()
                .map(|pc| {
                    let k = ((pc / 100.0) * ranked.len() as f64).round() as usize;
                    let k = k.clamp(1, ranked.len());
                    kind.of(&ranked[k - 1])
                })
                .collect()
        }
    };

    let rows_data = sweep_class(
        class,
        &ranked,
        &cuts,
        &pool,
        &baseline,
        &epochs.unlabeled,
        &epochs.eval,
        &cfg.model,
        kind,
        cfg.seed,
    )?;
    let mut rows = String::from("threshold,selected,sensitivity,accuracy\n");
    println!("{:>12} {:>9} {:>12} {:>9}", "threshold", "selected", "sensitivity", "accuracy");
    for row in &rows_data {
        rows.push_str(&format!(
            "{},{},{},{}\n",
            row.threshold, row.selected, row.sensitivity, row.accuracy
        ));
        println!(
            "{:>12.6} {:>9} {:>12} {:>9}",
            row.threshold,
            row.selected,
            pct(row.sensitivity),
            pct(row.accuracy)
        );
    }
    let p = out.join("sweep.csv");
    fs::write(&p, rows).map_err(|e| Error::io(&p, e))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_eval(manifest: &Path, models_path: &Path, common: &CommonArgs) -> Result<ExitCode, Error> {
    let cfg = resolve_config(common)?;
    init_rayon(&cfg);
    let out = out_dir(common)?;
    let models = load_model_set(models_path)?;
    models.check_fingerprint(&cfg.features)?;
    let epochs = load_epochs(manifest, &cfg)?;
    if epochs.eval.is_empty() {
        return Err(Error::Usage("manifest has no eval records".into()));
    }
    let (matrix, sens, acc) = evaluate(&models, &epochs.eval)?;
    let p = out.join("confusion.csv");
    fs::write(&p, matrix.to_csv()).map_err(|e| Error::io(&p, e))?;
    let mut rows = String::from("class,sensitivity,accuracy\n");
    for c in LabelClass::ALL {
        rows.push_str(&format!("{},{},{}\n", c, sens[c.index()], acc));
    }
    let p = out.join("eval_report.csv");
    fs::write(&p, rows).map_err(|e| Error::io(&p, e))?;
    print_sensitivity_table(&sens, acc);
    Ok(ExitCode::SUCCESS)
}

fn cmd_report(run: &Path) -> Result<ExitCode, Error> {
    let summary = run.join("summary.csv");
    let reports = read_report_csv(&summary)?;
    if reports.is_empty() {
        return Err(Error::Validation(format!(
            "{} contains no iterations",
            summary.display()
        )));
    }
    if reports.len() >= 2 {
        let before: BTreeMap<LabelClass, f64> = reports[0]
            .sensitivity
            .iter()
            .enumerate()
            .map(|(i, &s)| (LabelClass::from_index(i).unwrap(), s))
            .collect();
        let after: BTreeMap<LabelClass, f64> = reports[1]
            .sensitivity
            .iter()
            .enumerate()
            .map(|(i, &s)| (LabelClass::from_index(i).unwrap(), s))
            .collect();
        println!("{}", emit_table1(&before, &after)?);
    }
    println!("{:>9} {:>9} {:>9}", "iteration", "accuracy", "selected");
    for r in &reports {
        let selected: usize = r.selected.iter().sum();
        println!("{:>9} {:>9} {:>9}", r.iteration, pct(r.accuracy), selected);
    }
    let stop_file = run.join("stop_reason.txt");
    if let Ok(reason) = fs::read_to_string(&stop_file) {
        println!("stop reason: {}", reason.trim());
    }
    Ok(ExitCode::SUCCESS)
}
