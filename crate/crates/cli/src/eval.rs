//! `procest eval`: the metric battery on held-out data, plus the
//! alpha/beta sweep and the activation-comparison experiment, both of
//! which retrain from the evaluated model's recorded configuration.

use std::fmt::Write as _;

use serde::Serialize;

use procest::format::load_dataset;
use procest::metrics::{
    classification_report, completeness_error, remaining_time_error, two_set,
    ClassificationReport, CompletenessErrorReport, RemainingTimeReport, SegmentErrorReport,
};
use procest::model::{
    compare_activations, load_model, train, LossWeights, PhaseGmm, ProgressRegressor,
    SavedModel,
};
use procest::online::remaining_time;
use procest::trace::{label_completeness, ProcessTrace};
use procest::{Error, Result};

use crate::args::{EvalArgs, SplitChoice};
use crate::{eval_threads, sidecar_path, write_config_sidecar};

/// Everything one trace contributes to the aggregate metrics.
struct TraceEval {
    labels: Vec<f64>,
    estimates: Vec<f64>,
    gt_phases: Vec<usize>,
    pred_phases: Vec<usize>,
    normalized_time: Vec<f64>,
    gt_remaining: Vec<f64>,
    est_remaining: Vec<Option<f64>>,
}

fn evaluate_trace(
    model: &ProgressRegressor<f64>,
    gmm: &PhaseGmm<f64>,
    trace: &ProcessTrace<f64>,
) -> Result<TraceEval> {
    let estimates = model.forward(trace)?;
    let labels = label_completeness(trace)?.values().to_vec();
    let gt_phases = trace.phase_sequence();
    let first_ts = trace.frames[0].timestamp;
    let mut pred_phases = Vec::with_capacity(estimates.len());
    let mut normalized_time = Vec::with_capacity(estimates.len());
    let mut gt_remaining = Vec::with_capacity(estimates.len());
    let mut est_remaining = Vec::with_capacity(estimates.len());
    for (frame, &rho) in trace.frames.iter().zip(&estimates) {
        pred_phases.push(gmm.predict(rho)?);
        normalized_time.push(frame.timestamp / trace.duration_s);
        gt_remaining.push(trace.duration_s - frame.timestamp);
        est_remaining.push(remaining_time(rho, frame.timestamp - first_ts)?);
    }
    Ok(TraceEval {
        labels,
        estimates,
        gt_phases,
        pred_phases,
        normalized_time,
        gt_remaining,
        est_remaining,
    })
}

/// Evaluate traces in parallel (capped by `PROCEST_THREADS`) and merge in
/// input order, so the aggregate is independent of the thread count.
fn evaluate_all(
    model: &ProgressRegressor<f64>,
    gmm: &PhaseGmm<f64>,
    traces: &[ProcessTrace<f64>],
) -> Result<Vec<TraceEval>> {
    let workers = eval_threads(traces.len());
    if workers <= 1 {
        return traces.iter().map(|t| evaluate_trace(model, gmm, t)).collect();
    }
    let mut slots: Vec<Option<Result<TraceEval>>> = Vec::new();
    slots.resize_with(traces.len(), || None);
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots_mutex = std::sync::Mutex::new(&mut slots);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if index >= traces.len() {
                    break;
                }
                let result = evaluate_trace(model, gmm, &traces[index]);
                slots_mutex.lock().expect("poisoned")[index] = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.expect("every trace evaluated"))
        .collect()
}

/// Resolved evaluation run, written as the config sidecar.
#[derive(Debug, Serialize)]
struct EvalRunConfig {
    model: String,
    data: String,
    split: String,
    equalize_gmm: bool,
    sweep_alpha_beta: bool,
    compare_activations: bool,
}

impl EvalRunConfig {
    fn from_args(args: &EvalArgs) -> Self {
        EvalRunConfig {
            model: args.model.display().to_string(),
            data: args.data.display().to_string(),
            split: match args.split {
                SplitChoice::Recorded => "recorded",
                SplitChoice::Train => "train",
                SplitChoice::All => "all",
            }
            .to_string(),
            equalize_gmm: args.equalize_gmm,
            sweep_alpha_beta: args.sweep_alpha_beta,
            compare_activations: args.compare_activations,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct EvalReport {
    pub dataset: String,
    pub split: String,
    pub equalized_gmm: bool,
    pub traces: usize,
    pub frames: usize,
    pub classification: ClassificationReport<f64>,
    pub segments: SegmentErrorReport<f64>,
    pub completeness: CompletenessErrorReport<f64>,
    pub remaining_time: RemainingTimeReport<f64>,
}

fn aggregate(
    evals: &[TraceEval],
    num_classes: usize,
    dataset: String,
    split: String,
    equalized_gmm: bool,
) -> Result<EvalReport> {
    let mut labels = Vec::new();
    let mut estimates = Vec::new();
    let mut gt_phases = Vec::new();
    let mut pred_phases = Vec::new();
    let mut normalized_time = Vec::new();
    let mut gt_remaining = Vec::new();
    let mut est_remaining = Vec::new();
    for eval in evals {
        labels.extend_from_slice(&eval.labels);
        estimates.extend_from_slice(&eval.estimates);
        gt_phases.extend_from_slice(&eval.gt_phases);
        pred_phases.extend_from_slice(&eval.pred_phases);
        normalized_time.extend_from_slice(&eval.normalized_time);
        gt_remaining.extend_from_slice(&eval.gt_remaining);
        est_remaining.extend_from_slice(&eval.est_remaining);
    }
    Ok(EvalReport {
        dataset,
        split,
        equalized_gmm,
        traces: evals.len(),
        frames: labels.len(),
        classification: classification_report(&gt_phases, &pred_phases, num_classes)?,
        segments: two_set(&gt_phases, &pred_phases, num_classes)?,
        completeness: completeness_error(
            &labels,
            &estimates,
            &gt_phases,
            &normalized_time,
            num_classes,
        )?,
        remaining_time: remaining_time_error(&gt_remaining, &est_remaining, &gt_phases, num_classes)?,
    })
}

fn render_text(report: &EvalReport, phase_names: &[String]) -> String {
    let mut text = String::new();
    let _ = writeln!(text, "dataset: {}", report.dataset);
    let _ = writeln!(
        text,
        "split: {}  traces: {}  frames: {}  equalized-gmm: {}",
        report.split, report.traces, report.frames, report.equalized_gmm
    );
    let _ = writeln!(text, "\nphase detection");
    let c = &report.classification;
    for (name, value) in [
        ("accuracy", c.accuracy),
        ("precision", c.precision),
        ("recall", c.recall),
        ("f1", c.f1),
        ("informedness", c.informedness),
        ("markedness", c.markedness),
        ("mcc", c.mcc),
    ] {
        let _ = writeln!(text, "  {name:<13} {value:.4}");
    }
    let s = &report.segments;
    let _ = writeln!(text, "\nsegment errors (frame rates, support-weighted)");
    let _ = writeln!(text, "  fragmentation {:.4}", s.fragmentation);
    let _ = writeln!(text, "  under-fill    {:.4}", s.under_fill);
    let _ = writeln!(text, "  over-fill     {:.4}", s.over_fill);
    let _ = writeln!(text, "\ncompleteness error");
    let _ = writeln!(text, "  overall MAE   {:.4}", report.completeness.overall_mae);
    for (i, mae) in report.completeness.per_phase_mae.iter().enumerate() {
        let name = phase_names.get(i).map(String::as_str).unwrap_or("?");
        match mae {
            Some(v) => {
                let _ = writeln!(text, "    {name:<12} {v:.4}");
            }
            None => {
                let _ = writeln!(text, "    {name:<12} n/a");
            }
        }
    }
    let r = &report.remaining_time;
    let _ = writeln!(text, "\nremaining-time error");
    match r.overall_mean_abs_s {
        Some(v) => {
            let _ = writeln!(
                text,
                "  overall mean  {v:.1} s  (evaluated {}, unknown {})",
                r.evaluated_frames, r.unknown_frames
            );
        }
        None => {
            let _ = writeln!(text, "  overall mean  n/a (all {} frames unknown)", r.unknown_frames);
        }
    }
    for (i, err) in r.per_phase_mean_abs_s.iter().enumerate() {
        let name = phase_names.get(i).map(String::as_str).unwrap_or("?");
        match err {
            Some(v) => {
                let _ = writeln!(text, "    {name:<12} {v:.1} s");
            }
            None => {
                let _ = writeln!(text, "    {name:<12} n/a");
            }
        }
    }
    text
}

fn select_traces(
    traces: Vec<ProcessTrace<f64>>,
    split: SplitChoice,
    test_ids: &[String],
) -> Result<Vec<ProcessTrace<f64>>> {
    let selected: Vec<ProcessTrace<f64>> = match split {
        SplitChoice::All => traces,
        SplitChoice::Recorded => traces
            .into_iter()
            .filter(|t| test_ids.contains(&t.id))
            .collect(),
        SplitChoice::Train => traces
            .into_iter()
            .filter(|t| !test_ids.contains(&t.id))
            .collect(),
    };
    if selected.is_empty() {
        return Err(Error::data(
            "no traces selected; the dataset does not contain the recorded split",
        ));
    }
    Ok(selected)
}

#[derive(Debug, Serialize)]
struct SweepRow {
    alpha: f64,
    beta: f64,
    completeness_mae: f64,
    accuracy: f64,
    f1: f64,
}

/// Retrain over the alpha/beta grid using the model's recorded train
/// config and split, evaluating each cell on the held-out cases.
fn run_sweep(saved: &SavedModel<f64>, traces: &[ProcessTrace<f64>], args: &EvalArgs) -> Result<()> {
    let schema = saved.gmm.schema().clone();
    let train_set: Vec<ProcessTrace<f64>> = traces
        .iter()
        .filter(|t| !saved.meta.test_ids.contains(&t.id))
        .cloned()
        .collect();
    let test_set: Vec<ProcessTrace<f64>> = traces
        .iter()
        .filter(|t| saved.meta.test_ids.contains(&t.id))
        .cloned()
        .collect();
    if train_set.is_empty() || test_set.is_empty() {
        return Err(Error::data(
            "sweep needs both recorded splits present in the dataset",
        ));
    }
    let gmm = PhaseGmm::fit(&train_set, &schema)?;
    let eval_gmm = if args.equalize_gmm { gmm.equalized() } else { gmm.clone() };

    let mut rows = Vec::new();
    for step in 0..=5u32 {
        let alpha = 0.2 * step as f64;
        let beta = 1.0 - alpha;
        let mut config = saved.meta.train.clone();
        config.loss_weights = LossWeights::new(alpha, beta)?;
        let mut model =
            ProgressRegressor::init(saved.regressor.config().clone(), config.seed)?;
        train(&mut model, &train_set, &gmm, &config)?;
        let evals = evaluate_all(&model, &eval_gmm, &test_set)?;
        let report = aggregate(
            &evals,
            schema.len(),
            args.data.display().to_string(),
            "recorded".into(),
            args.equalize_gmm,
        )?;
        rows.push(SweepRow {
            alpha,
            beta,
            completeness_mae: report.completeness.overall_mae,
            accuracy: report.classification.accuracy,
            f1: report.classification.f1,
        });
    }

    let json = serde_json::to_string_pretty(&rows)
        .map_err(|e| Error::usage(format!("serialize sweep: {e}")))?;
    std::fs::write(&args.out, json)
        .map_err(|e| Error::usage(format!("cannot write {}: {e}", args.out.display())))?;
    let mut text = String::from("alpha  beta   mae     accuracy  f1\n");
    for row in &rows {
        let _ = writeln!(
            text,
            "{:<6.1} {:<6.1} {:<7.4} {:<9.4} {:<7.4}",
            row.alpha, row.beta, row.completeness_mae, row.accuracy, row.f1
        );
        println!(
            "alpha={:.1} beta={:.1}: mae={:.4} accuracy={:.4} f1={:.4}",
            row.alpha, row.beta, row.completeness_mae, row.accuracy, row.f1
        );
    }
    std::fs::write(sidecar_path(&args.out, "txt"), text)
        .map_err(|e| Error::usage(format!("write sweep table: {e}")))?;
    write_config_sidecar(&args.out, &EvalRunConfig::from_args(args))?;
    Ok(())
}

/// Paired rtanh/sigmoid training from one initialization, using the
/// model's recorded configuration and training split.
fn run_activation_comparison(
    saved: &SavedModel<f64>,
    traces: &[ProcessTrace<f64>],
    args: &EvalArgs,
) -> Result<()> {
    let schema = saved.gmm.schema().clone();
    let train_set: Vec<ProcessTrace<f64>> = traces
        .iter()
        .filter(|t| !saved.meta.test_ids.contains(&t.id))
        .cloned()
        .collect();
    if train_set.is_empty() {
        return Err(Error::data("comparison needs the recorded training split"));
    }
    let report = compare_activations(
        &train_set,
        &schema,
        saved.regressor.config(),
        &saved.meta.train,
    )?;
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::usage(format!("serialize comparison: {e}")))?;
    std::fs::write(&args.out, json)
        .map_err(|e| Error::usage(format!("cannot write {}: {e}", args.out.display())))?;
    write_config_sidecar(&args.out, &EvalRunConfig::from_args(args))?;
    println!(
        "rtanh: {} epochs, final MAE {:.4}; sigmoid: {} epochs, final MAE {:.4}",
        report.rtanh_epochs, report.rtanh_final_mae, report.sigmoid_epochs, report.sigmoid_final_mae
    );
    Ok(())
}

pub fn run(args: EvalArgs) -> Result<()> {
    let saved: SavedModel<f64> = load_model(&args.model)?;
    let traces: Vec<ProcessTrace<f64>> = load_dataset(&args.data)?;
    let schema = saved.gmm.schema().clone();
    for trace in &traces {
        if trace.schema.names() != schema.names() {
            return Err(Error::data(format!(
                "trace {} does not match the model schema",
                trace.id
            )));
        }
        if trace.feature_dim() != saved.regressor.feature_dim() {
            return Err(Error::data(format!(
                "trace {} has {} features, model expects {}",
                trace.id,
                trace.feature_dim(),
                saved.regressor.feature_dim()
            )));
        }
    }

    if args.sweep_alpha_beta {
        return run_sweep(&saved, &traces, &args);
    }
    if args.compare_activations {
        return run_activation_comparison(&saved, &traces, &args);
    }

    let selected = select_traces(traces, args.split, &saved.meta.test_ids)?;
    let gmm = if args.equalize_gmm {
        saved.gmm.equalized()
    } else {
        saved.gmm.clone()
    };
    let evals = evaluate_all(&saved.regressor, &gmm, &selected)?;
    let split_name = match args.split {
        SplitChoice::Recorded => "recorded",
        SplitChoice::Train => "train",
        SplitChoice::All => "all",
    };
    let report = aggregate(
        &evals,
        schema.len(),
        args.data.display().to_string(),
        split_name.to_string(),
        args.equalize_gmm,
    )?;

    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::usage(format!("serialize report: {e}")))?;
    std::fs::write(&args.out, json)
        .map_err(|e| Error::usage(format!("cannot write {}: {e}", args.out.display())))?;
    let text = render_text(&report, schema.names());
    std::fs::write(sidecar_path(&args.out, "txt"), &text)
        .map_err(|e| Error::usage(format!("write report table: {e}")))?;
    write_config_sidecar(&args.out, &EvalRunConfig::from_args(&args))?;
    print!("{text}");
    Ok(())
}
