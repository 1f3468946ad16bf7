use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use hansel_core::augment::{build_inference_context, compose_mix, AugmentedExample};
use hansel_core::automaton::validate_plain;
use hansel_core::corpus::GenerationRecord;
use hansel_core::eval::{
    corpus_stats, evaluate, sweep_hyperparams, sweep_targets, target_csv, target_gnuplot, target_table,
    EvalOptions, EvalRecord, TargetSweep,
};
use hansel_core::generate::{request_seed, GenerationRequest};
#[cfg(feature = "http")]
use hansel_core::judge::{Judge, JudgeError};
use hansel_core::synth::{dialogue_lines, synthetic_corpus, SyntheticSpec};
use hansel_core::{validate, Framework};
use serde::Serialize;
use serde_json::json;

use crate::args::*;
use crate::desk;
use crate::failure::{Failure, ResultExt};
use crate::output::{json_bytes, jsonl_bytes, load_examples, load_jsonl, sidecar, write_atomic, RunClock};
use crate::settings::Settings;

pub fn run(cli: Cli) -> Result<ExitCode, Failure> {
    let settings = Settings::load(cli.config.as_deref())?;
    match cli.command {
        Command::Augment(a) => augment(settings, a),
        Command::Validate(a) => validate_cmd(settings, a),
        Command::Evaluate(a) => evaluate_cmd(settings, a),
        Command::Sweep(a) => sweep(settings, a),
        Command::Simulate(a) => simulate(settings, a),
        Command::Stats(a) => stats(settings, a),
        Command::Judge(a) => judge(settings, a),
        Command::Synth(a) => synth(settings, a),
    }
}

fn eval_options(settings: &Settings) -> EvalOptions {
    EvalOptions {
        stem: settings.eval.stem,
        repeat_threshold: settings.eval.repeat_threshold,
        max_period: settings.eval.max_period,
        ..EvalOptions::from_config(&settings.hansel)
    }
}

fn print(bytes: &[u8]) -> Result<(), Failure> {
    let mut out = std::io::stdout().lock();
    out.write_all(bytes).and_then(|_| out.flush()).io_ctx(|| "writing stdout")
}

fn augment(mut settings: Settings, a: AugmentArgs) -> Result<ExitCode, Failure> {
    let clock = RunClock::start();
    if let Some(f) = a.residual_fraction {
        settings.hansel.residual_fraction = f;
    }
    settings.apply(&a.protocol)?;
    let corpus = load_examples(&a.corpus.input, a.corpus.format, a.corpus.max_words)?;
    let (records, manifest) =
        compose_mix(&corpus, &settings.hansel, a.framework).map_err(|e| Failure::failed(e.to_string()))?;
    for w in &manifest.warnings {
        eprintln!("warning: {w}");
    }
    let manifest_path = sidecar(&a.out, ".manifest.json");
    write_atomic(&a.out, &jsonl_bytes(&records))?;
    write_atomic(&manifest_path, &json_bytes(&manifest))?;
    eprintln!(
        "wrote {} records ({}) to {}",
        records.len(),
        manifest.counts.iter().map(|(k, v)| format!("{k} {v}")).collect::<Vec<_>>().join(", "),
        a.out.display()
    );
    clock.finish("augment", &settings, &a.out, &[&a.out, &manifest_path])?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct ValidationLine<'a> {
    line: usize,
    id: &'a str,
    ok: bool,
    violations: Vec<hansel_core::Violation>,
}

fn validate_cmd(mut settings: Settings, a: ValidateArgs) -> Result<ExitCode, Failure> {
    settings.apply(&a.protocol)?;
    let records: Vec<AugmentedExample> = load_jsonl(&a.input)?;
    if records.is_empty() {
        eprintln!("warning: {} holds no records", a.input.display());
        return Ok(ExitCode::SUCCESS);
    }
    let mut report = Vec::new();
    let mut failed = 0;
    for (i, rec) in records.iter().enumerate() {
        let verdict = if rec.framework == Framework::Hansel {
            let mut cfg = settings.hansel.clone();
            cfg.units = rec.units().map_err(|e| Failure::io(anyhow::anyhow!("record {}: {e}", i + 1)))?;
            validate(&rec.output, &cfg)
        } else {
            validate_plain(&rec.output, &settings.hansel)
        };
        if !verdict.ok {
            failed += 1;
            serde_json::to_writer(
                &mut report,
                &ValidationLine { line: i + 1, id: &rec.id, ok: false, violations: verdict.violations },
            )
            .expect("in-memory write");
            report.push(b'\n');
        }
    }
    match &a.report {
        Some(p) => write_atomic(p, &report)?,
        None => print(&report)?,
    }
    eprintln!("checked {} records, {failed} failed", records.len());
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(crate::failure::EXIT_FAILED) })
}

fn evaluate_cmd(mut settings: Settings, a: EvaluateArgs) -> Result<ExitCode, Failure> {
    if let Some(u) = a.unit {
        settings.hansel.units = vec![u];
    }
    settings.eval.stem |= a.stem;
    let opts = eval_options(&settings);
    let generations: Vec<GenerationRecord> = load_jsonl(&a.input)?;
    let records: Vec<EvalRecord> = generations
        .iter()
        .map(|g| {
            let mut r = EvalRecord::from_generation(g, &opts);
            if a.unit.is_some() {
                r.unit = opts.unit;
            }
            r
        })
        .collect();
    let report = evaluate(&records, &opts).map_err(|e| Failure::usage(e.to_string()))?;
    let bytes = json_bytes(&report);
    match &a.out {
        Some(p) => write_atomic(p, &bytes)?,
        None => print(&bytes)?,
    }
    if report.n_scored == 0 {
        return Err(Failure::failed(format!("no scorable records among {}", records.len())));
    }
    Ok(ExitCode::SUCCESS)
}

fn simulate(mut settings: Settings, a: SimulateArgs) -> Result<ExitCode, Failure> {
    let clock = RunClock::start();
    settings.apply(&a.protocol)?;
    let data = desk::load(&settings, &a.desk)?;
    let cfg = &settings.hansel;
    let built = desk::build(a.mode, cfg, &settings, &data.train, a.desk.stop_at_zero)?;
    let generator = built.generator();
    let mut out = Vec::with_capacity(data.sources.len() * data.targets.len());
    for &target in &data.targets {
        for ex in &data.sources {
            let context = build_inference_context(&ex.source, ex.task, target, generator.mode(), cfg);
            let generated = generator
                .generate(&GenerationRequest {
                    id: &ex.id,
                    context: &context,
                    target_length: target,
                    seed: request_seed(cfg.seed, &ex.id, target),
                })
                .map_err(|e| Failure::failed(format!("{}: {e}", ex.id)))?;
            out.push(GenerationRecord {
                id: format!("{}@{target}", ex.id),
                generated,
                target_length: target,
                reference: Some(ex.reference.clone()),
                source: Some(ex.source.clone()),
                task: Some(ex.task),
                unit: Some(cfg.unit()),
                mode: Some(a.mode.label().to_string()),
            });
        }
    }
    write_atomic(&a.out, &jsonl_bytes(&out))?;
    let mut outputs = vec![a.out.as_path()];
    if let (Some(path), Some(model)) = (&a.model_out, built.model()) {
        write_atomic(path, model.to_json().as_bytes())?;
        outputs.push(path);
    }
    eprintln!("wrote {} generations to {}", out.len(), a.out.display());
    clock.finish("simulate", &settings, &a.out, &outputs)?;
    Ok(ExitCode::SUCCESS)
}

fn sweep(mut settings: Settings, a: SweepArgs) -> Result<ExitCode, Failure> {
    let clock = RunClock::start();
    if let Some(s) = a.seed {
        settings.hansel.seed = s;
    }
    let data = desk::load(&settings, &a.desk)?;
    let opts = eval_options(&settings);
    let grid_mode = a.delta.len() > 1 || a.residual_max.len() > 1;
    let mut files: Vec<(String, Vec<u8>)> = Vec::new();

    if grid_mode {
        let [kind] = a.generators[..] else {
            return Err(Failure::usage("a grid sweep takes exactly one --generator"));
        };
        let deltas = if a.delta.is_empty() { vec![settings.hansel.stride] } else { a.delta.clone() };
        let residuals = if a.residual_max.is_empty() { vec![settings.hansel.max_residual] } else { a.residual_max.clone() };
        let grid = sweep_hyperparams(&deltas, &residuals, &settings.hansel, |cfg| {
            cfg.validate().map_err(|e| Failure::usage(e.to_string()))?;
            let built = desk::build(kind, cfg, &settings, &data.train, a.desk.stop_at_zero)?;
            let s = sweep_targets(built.generator(), &data.sources, &data.targets, cfg, &opts)
                .map_err(|e| Failure::failed(e.to_string()))?;
            let report = evaluate(&s.records, &opts).map_err(|e| Failure::failed(e.to_string()))?;
            Ok::<f64, Failure>(report.mae.unwrap_or(f64::NAN))
        })?;
        let table = grid.to_table();
        print(table.as_bytes())?;
        files.push(("grid.txt".into(), table.into_bytes()));
        files.push(("grid.csv".into(), grid.to_csv().into_bytes()));
        files.push(("grid.json".into(), json_bytes(&grid)));
    } else {
        if let Some(&d) = a.delta.first() {
            settings.hansel.stride = d;
        }
        if let Some(&r) = a.residual_max.first() {
            settings.hansel.max_residual = r;
        }
        settings.check()?;
        let mut sweeps: Vec<(&str, TargetSweep)> = Vec::new();
        for kind in &a.generators {
            let built = desk::build(*kind, &settings.hansel, &settings, &data.train, a.desk.stop_at_zero)?;
            let s = sweep_targets(built.generator(), &data.sources, &data.targets, &settings.hansel, &opts)
                .map_err(|e| Failure::failed(e.to_string()))?;
            sweeps.push((kind.label(), s));
        }
        let named: Vec<(&str, &TargetSweep)> = sweeps.iter().map(|(n, s)| (*n, s)).collect();
        let table = target_table(&named);
        print(table.as_bytes())?;
        let rows: BTreeMap<&str, _> = sweeps.iter().map(|(n, s)| (*n, &s.rows)).collect();
        files.push(("targets.txt".into(), table.into_bytes()));
        files.push(("targets.csv".into(), target_csv(&named).into_bytes()));
        files.push(("targets.dat".into(), target_gnuplot(&named).into_bytes()));
        files.push(("targets.json".into(), json_bytes(&rows)));
    }

    if let Some(dir) = &a.out {
        let paths: Vec<_> = files.iter().map(|(name, _)| dir.join(name)).collect();
        for ((_, bytes), path) in files.iter().zip(&paths) {
            write_atomic(path, bytes)?;
        }
        let refs: Vec<&Path> = paths.iter().map(|p| p.as_path()).collect();
        clock.finish("sweep", &settings, &dir.join("sweep"), &refs)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn stats(settings: Settings, a: StatsArgs) -> Result<ExitCode, Failure> {
    let corpus = load_examples(&a.corpus.input, a.corpus.format, a.corpus.max_words)?;
    let unit = a.unit.unwrap_or(settings.hansel.unit());
    let s = corpus_stats(&corpus, unit, &settings.hansel.segmenter()).map_err(|e| Failure::failed(e.to_string()))?;
    print(&json_bytes(&json!({
        "unit": unit,
        "count": s.count,
        "mean": s.mean,
        "std": s.std,
        "min": s.min,
        "max": s.max,
    })))?;
    Ok(ExitCode::SUCCESS)
}

#[cfg(feature = "http")]
fn judge(mut settings: Settings, a: JudgeArgs) -> Result<ExitCode, Failure> {
    let clock = RunClock::start();
    let j = &mut settings.judge;
    if let Some(e) = &a.endpoint {
        j.endpoint = e.clone();
    }
    if let Some(m) = &a.model {
        j.model = m.clone();
    }
    if let Some(c) = &a.cache_dir {
        j.cache_dir = Some(c.clone());
    }
    if let Some(n) = a.max_in_flight {
        j.max_in_flight = n;
    }
    let generations: Vec<GenerationRecord> = load_jsonl(&a.input)?;
    let mut items = Vec::with_capacity(generations.len());
    for (i, g) in generations.iter().enumerate() {
        let (Some(source), Some(task)) = (&g.source, g.task) else {
            return Err(Failure::io(anyhow::anyhow!("line {}: `source` and `task` are required for judging", i + 1)));
        };
        let text = hansel_core::token::strip_lenient(&g.generated, &settings.hansel.rendering).stripped;
        items.push((source.clone(), text, task));
    }
    let transport = hansel_core::judge::HttpTransport::from_config(&settings.judge).map_err(|e| match e {
        JudgeError::MissingKey(_) => Failure::usage(e.to_string()),
        other => Failure::io(other),
    })?;
    let judge = Judge::new(settings.judge.clone(), transport);
    let results = judge.judge_all(&items);
    let mut failed = 0;
    let lines: Vec<serde_json::Value> = generations
        .iter()
        .zip(results)
        .map(|(g, r)| match r {
            Ok(score) => json!({ "id": g.id, "task": score.task, "scores": score.scores, "average": score.average }),
            Err(e) => {
                failed += 1;
                json!({ "id": g.id, "error": e.to_string() })
            }
        })
        .collect();
    write_atomic(&a.out, &jsonl_bytes(&lines))?;
    eprintln!("judged {} records, {failed} failed", lines.len());
    clock.finish("judge", &settings, &a.out, &[&a.out])?;
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(crate::failure::EXIT_FAILED) })
}

#[cfg(not(feature = "http"))]
fn judge(_: Settings, _: JudgeArgs) -> Result<ExitCode, Failure> {
    Err(Failure::usage("this build has no HTTP support; rebuild with the `http` feature"))
}

fn synth(_: Settings, a: SynthArgs) -> Result<ExitCode, Failure> {
    let bytes = match a.kind {
        SynthKind::Template => jsonl_bytes(&synthetic_corpus(&SyntheticSpec { n: a.n, seed: a.seed, ..Default::default() })),
        SynthKind::Dialogue => {
            let mut text = dialogue_lines(a.n, a.seed, 11.73, 9.38).join("\n");
            text.push('\n');
            text.into_bytes()
        }
    };
    write_atomic(&a.out, &bytes)?;
    Ok(ExitCode::SUCCESS)
}
