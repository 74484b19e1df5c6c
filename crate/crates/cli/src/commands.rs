//! The six subcommands, each emitting a two-part report.

use std::fs::File;
use std::io::{BufWriter, Write};

use anyhow::{bail, ensure, Context, Result};
use serde_json::{json, Value};

use ceground::eval::{
    confusion_estimate, counts_from_pairs, grounding_result, micro_macro_accuracy,
    prediction_pairs,
};
use ceground::experiment::{run_simulation, SimulationConfig, TrialOutcome};
use ceground::fusion::{FeatureTable, FusionWeights};
use ceground::sim::{generate_layout, write_confidence_csv, FileOracle, FusionOracle, VideoLayout};
use ceground::{ground_small_intestine, scan_baseline, Segment};

use crate::opts::{
    resolve_oracle, Cli, Command, EvalArgs, FuseArgs, GenerateArgs, ScanCmdArgs, SearchCmdArgs,
    SimulateArgs,
};
use crate::report::Report;

pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Generate(args) => generate(args),
        Command::Search(args) => search(args),
        Command::Scan(args) => scan(args),
        Command::Simulate(args) => simulate(args),
        Command::Fuse(args) => fuse(args),
        Command::Eval(args) => eval(args),
    }
}

fn generate(args: GenerateArgs) -> Result<i32> {
    let frames = args.layout.frames.context("--frames is required")?;
    let layout = generate_layout(
        frames,
        args.layout.proportions.0,
        args.layout.jitter,
        args.seed,
    )?;
    if let Some(path) = &args.layout_out {
        layout.save(path)?;
    }
    if let Some(path) = &args.confidences_out {
        let spec = args.oracle.synthetic_spec()?;
        let oracle = spec.build(layout.clone(), args.seed)?;
        let file = File::create(path)
            .with_context(|| format!("creating confidence file {}", path.display()))?;
        let mut writer = BufWriter::new(file);
        write_confidence_csv(&mut writer, oracle.as_ref(), frames)?;
        writer.flush().context("flushing confidence file")?;
    }
    let mut report = Report::new();
    report.push("layout.frames", layout.frames());
    report.push("layout.start", layout.start());
    report.push("layout.end", layout.end());
    if let Some(path) = &args.layout_out {
        report.push("files.layout", path.display());
    }
    if let Some(path) = &args.confidences_out {
        report.push("files.confidences", path.display());
    }
    let oracle_descriptor = if args.confidences_out.is_some() {
        args.oracle.descriptor()
    } else {
        Value::Null
    };
    let machine = json!({
        "command": "generate",
        "config": {
            "layout": args.layout.descriptor(),
            "oracle": oracle_descriptor,
            "seed": args.seed,
        },
        "layout": layout,
        "files": {
            "layout": args.layout_out,
            "confidences": args.confidences_out,
        },
    });
    report.emit(&machine, args.output.as_deref())?;
    Ok(0)
}

fn search(args: SearchCmdArgs) -> Result<i32> {
    let cfg = args.search.build()?;
    let resolved = resolve_oracle(&args.oracle, &args.layout, &args.layout_params, args.seed)?;
    let grounding = ground_small_intestine(resolved.classifier.as_ref(), resolved.frames, &cfg)?;
    let evaluation = resolved.truth.as_ref().map(|layout| {
        grounding_result(
            &grounding.segment,
            &layout.segment(),
            grounding.oracle_calls(),
        )
    });
    let mut report = Report::new();
    report.push("frames", resolved.frames);
    report.push("segment.start", grounding.segment.start());
    report.push("segment.end", grounding.segment.end());
    report.push("degenerate", grounding.degenerate);
    report.push("oracle_calls", grounding.oracle_calls());
    if let Some(result) = &evaluation {
        report.push("truth.start", result.truth.start());
        report.push("truth.end", result.truth.end());
        report.push("iou", result.iou);
        report.push("start_error", result.start_error);
        report.push("end_error", result.end_error);
    }
    let traces = if args.no_trace {
        Value::Null
    } else {
        json!({
            "start": grounding.start_trace,
            "end": grounding.end_trace,
        })
    };
    let machine = json!({
        "command": "search",
        "config": {
            "search": cfg,
            "oracle": args.oracle.descriptor(),
            "layout_file": args.layout,
            "layout": args.layout_params.descriptor(),
            "seed": args.seed,
        },
        "frames": resolved.frames,
        "segment": grounding.segment,
        "degenerate": grounding.degenerate,
        "oracle_calls": grounding.oracle_calls(),
        "evaluation": evaluation,
        "traces": traces,
    });
    report.emit(&machine, args.output.as_deref())?;
    Ok(if grounding.degenerate { 2 } else { 0 })
}

fn scan(args: ScanCmdArgs) -> Result<i32> {
    let resolved = resolve_oracle(&args.oracle, &args.layout, &args.layout_params, args.seed)?;
    let outcome = scan_baseline(resolved.classifier.as_ref(), resolved.frames)?;
    let evaluation = match (&outcome.segment, &resolved.truth) {
        (Some(segment), Some(layout)) => Some(grounding_result(
            segment,
            &layout.segment(),
            outcome.oracle_calls,
        )),
        _ => None,
    };
    let mut report = Report::new();
    report.push("frames", resolved.frames);
    report.push("found", outcome.segment.is_some());
    if let Some(segment) = &outcome.segment {
        report.push("segment.start", segment.start());
        report.push("segment.end", segment.end());
    }
    report.push("oracle_calls", outcome.oracle_calls);
    if let Some(result) = &evaluation {
        report.push("iou", result.iou);
        report.push("start_error", result.start_error);
        report.push("end_error", result.end_error);
    }
    let machine = json!({
        "command": "scan",
        "config": {
            "oracle": args.oracle.descriptor(),
            "layout_file": args.layout,
            "layout": args.layout_params.descriptor(),
            "seed": args.seed,
        },
        "frames": resolved.frames,
        "found": outcome.segment.is_some(),
        "segment": outcome.segment,
        "oracle_calls": outcome.oracle_calls,
        "evaluation": evaluation,
    });
    report.emit(&machine, args.output.as_deref())?;
    Ok(0)
}

fn simulate(args: SimulateArgs) -> Result<i32> {
    let config = SimulationConfig {
        frames: args.layout.frames.context("--frames is required")?,
        proportions: args.layout.proportions.0,
        jitter: args.layout.jitter,
        oracle: args.oracle.synthetic_spec()?,
        search: args.search.build()?,
        trials: args.trials,
        seed: args.seed,
    };
    let (summary, outcomes) = run_simulation(&config)?;
    let mut report = Report::new();
    report.push("trials", summary.trials);
    report.push("iou.mean", summary.iou.mean);
    report.push(
        "iou.ci95",
        format!("[{}, {}]", summary.iou.ci95_low, summary.iou.ci95_high),
    );
    report.push("iou.median", summary.iou.median);
    report.push("iou.min", summary.iou.min);
    report.push("start_error.median", summary.start_error.median);
    report.push("start_error.mean", summary.start_error.mean);
    report.push("end_error.median", summary.end_error.median);
    report.push("end_error.mean", summary.end_error.mean);
    report.push("mean_oracle_calls", summary.mean_oracle_calls);
    report.push("degenerate_trials", summary.degenerate_trials);
    let trials: Option<&Vec<TrialOutcome>> = args.trial_details.then_some(&outcomes);
    let machine = json!({
        "command": "simulate",
        "config": config,
        "summary": summary,
        "trials": trials,
    });
    report.emit(&machine, args.output.as_deref())?;
    Ok(0)
}

fn fuse(args: FuseArgs) -> Result<i32> {
    let features = FeatureTable::load(&args.features)
        .with_context(|| format!("loading features from {}", args.features.display()))?;
    let weights = FusionWeights::load(&args.weights)
        .with_context(|| format!("loading weights from {}", args.weights.display()))?;
    let oracle = FusionOracle::new(features, weights, args.radius)?;
    let frames = oracle.frames();
    let file = File::create(&args.confidences_out).with_context(|| {
        format!(
            "creating confidence file {}",
            args.confidences_out.display()
        )
    })?;
    let mut writer = BufWriter::new(file);
    write_confidence_csv(&mut writer, &oracle, frames)?;
    writer.flush().context("flushing confidence file")?;
    let mut report = Report::new();
    report.push("frames", frames);
    report.push("radius", args.radius);
    report.push("files.confidences", args.confidences_out.display());
    let machine = json!({
        "command": "fuse",
        "config": {
            "features": args.features,
            "weights": args.weights,
            "radius": args.radius,
        },
        "frames": frames,
        "files": { "confidences": args.confidences_out },
    });
    report.emit(&machine, args.output.as_deref())?;
    Ok(0)
}

fn eval(args: EvalArgs) -> Result<i32> {
    let layout = VideoLayout::load(&args.layout)
        .with_context(|| format!("loading layout from {}", args.layout.display()))?;
    let mut report = Report::new();
    let machine = match (&args.segment, &args.confidences) {
        (Some(spec), None) => {
            let segment = parse_segment(spec)?;
            let result = grounding_result(&segment, &layout.segment(), 0);
            report.push("iou", result.iou);
            report.push("start_error", result.start_error);
            report.push("end_error", result.end_error);
            json!({
                "command": "eval",
                "mode": "segment",
                "config": { "layout_file": args.layout, "segment": spec },
                "evaluation": result,
            })
        }
        (None, Some(path)) => {
            let oracle = FileOracle::load(path)
                .with_context(|| format!("loading confidences from {}", path.display()))?;
            ensure!(
                oracle.frames() == layout.frames(),
                "layout covers {} frame(s) but the confidence file has {}",
                layout.frames(),
                oracle.frames()
            );
            let pairs = prediction_pairs(&oracle, &layout)?;
            let counts = counts_from_pairs(&pairs);
            let (micro, macro_average) = micro_macro_accuracy(counts)?;
            let confusion = confusion_estimate(&pairs)?;
            report.push("frames", layout.frames());
            report.push("accuracy.micro", micro);
            report.push("accuracy.macro", macro_average);
            json!({
                "command": "eval",
                "mode": "confidences",
                "config": { "layout_file": args.layout, "confidences": path },
                "frames": layout.frames(),
                "accuracy": { "micro": micro, "macro": macro_average },
                "per_class_counts": counts,
                "confusion": confusion,
            })
        }
        _ => bail!("exactly one of --segment or --confidences is required"),
    };
    report.emit(&machine, args.output.as_deref())?;
    Ok(0)
}

fn parse_segment(spec: &str) -> Result<Segment> {
    let parts: Vec<&str> = spec.split(',').collect();
    ensure!(parts.len() == 2, "--segment takes `start,end`");
    let start: usize = parts[0].trim().parse().context("parsing segment start")?;
    let end: usize = parts[1].trim().parse().context("parsing segment end")?;
    Ok(Segment::from_bounds(start, end)?)
}
