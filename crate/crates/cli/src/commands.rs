use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use clap::ValueEnum;
use polysep_core::data::{ingest_csv, parse_features, parse_labeled, write_csv};
use polysep_core::lp::{lp_solve_discretized_points, LpRun};
use polysep_core::oracle::oracle_witness_2d;
use polysep_core::pac::{PacQuery, PacSpace};
use polysep_core::planted::{plant_polyhedron, verify_planted, PlantedConfig};
use polysep_core::search::{
    improper_halfspace_bound_ln, improper_separate_with, proper_separate_with, SearchOptions, SearchRun,
};
use polysep_core::{
    classify, lipschitz_constant, lp_solve_all, DiscretizationConfig, DualState, Error, Label, LabeledPoint, LpOutcome,
    Polyhedron, Result, Sample,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::{EvalArgs, GenArgs, Mode, OracleArgs, Outcome, PacArgs, PredictArgs, TrainArgs};

fn emit(report: &impl Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(report)?);
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn read_model(path: &Path) -> Result<Polyhedron> {
    let poly: Polyhedron = serde_json::from_reader(std::io::BufReader::new(File::open(path)?))?;
    poly.validate()?;
    Ok(poly)
}

pub fn gen(a: GenArgs) -> Result<Outcome> {
    let cfg =
        PlantedConfig { t: a.t, gamma: a.gamma, rho: a.rho.unwrap_or(2.0 * a.gamma), m: a.m, dim: a.dim, seed: a.seed };
    let inst = plant_polyhedron(&cfg)?;
    write_csv(&a.out, &inst.dataset.points)?;
    if let Some(path) = &a.truth {
        write_json(path, &inst.truth)?;
    }
    let positives = inst.dataset.points.iter().filter(|p| p.label == Label::Positive).count();
    emit(&json!({
        "command": "gen",
        "config": cfg,
        "positives": positives,
        "negatives": inst.dataset.len() - positives,
        "check": verify_planted(&inst.dataset.points, &inst.truth),
        "out": a.out.display().to_string(),
    }))?;
    Ok(Outcome::Done)
}

fn training_errors(poly: &Polyhedron, points: &[LabeledPoint]) -> Result<usize> {
    let mut errors = 0;
    for p in points {
        errors += (classify(poly, &p.encoding)? != p.label) as usize;
    }
    Ok(errors)
}

/// Turns a solver run into a one-halfspace model, or `None` if infeasible.
fn lp_model(sample: &Sample, run: &LpRun, gamma: f64) -> Result<Option<Polyhedron>> {
    match &run.outcome {
        LpOutcome::Feasible(state) => Ok(Some(Polyhedron::from_states(sample, vec![state.clone()], gamma, 1)?)),
        LpOutcome::NotGammaSeparable => Ok(None),
        LpOutcome::InternalOverflow { iterations } => {
            Err(Error::Internal(format!("solver exceeded its step cap after {iterations} iterations")))
        }
    }
}

fn search_telemetry(run: &SearchRun, mode: Mode, t: usize, gamma: f64) -> Result<Value> {
    let mut tel = serde_json::to_value(&run.telemetry)?;
    if matches!(mode, Mode::Improper) {
        let bound_ln = improper_halfspace_bound_ln(t, gamma);
        tel["halfspace_bound_ln"] = json!(bound_ln);
        tel["within_halfspace_bound"] = json!((run.telemetry.halfspaces as f64).ln() <= bound_ln);
    }
    Ok(tel)
}

pub fn train(a: TrainArgs) -> Result<Outcome> {
    a.kernel.validate()?;
    let ds = ingest_csv(&a.data, &a.kernel, a.autoscale)?;
    if ds.is_empty() {
        return Err(Error::Input("training data is empty".into()));
    }
    let options = SearchOptions { record_nodes: a.record_nodes };
    let mut lipschitz = None;
    let (model, telemetry, outcome) = match a.mode {
        Mode::Lp => {
            let sample = ds.sample(a.kernel.clone())?;
            let run = lp_solve_all(&sample, &DualState::empty(), a.gamma)?;
            (lp_model(&sample, &run, a.gamma)?, serde_json::to_value(&run.telemetry)?, run.outcome.label())
        }
        Mode::LpDisc => {
            let l = a.lipschitz.unwrap_or_else(|| lipschitz_constant(&a.kernel, ds.dim, 1.0));
            lipschitz = Some(l);
            let cfg = DiscretizationConfig::new(a.gamma, ds.dim, l)?;
            let (disc, run) = lp_solve_discretized_points(ds.points.clone(), &cfg, a.kernel.clone())?;
            let mut tel = serde_json::to_value(&run.telemetry)?;
            tel["beta"] = json!(cfg.beta);
            (lp_model(disc.sample(), &run, a.gamma)?, tel, run.outcome.label())
        }
        Mode::Proper | Mode::Improper => {
            let sample = ds.sample(a.kernel.clone())?;
            let run = if matches!(a.mode, Mode::Proper) {
                proper_separate_with(&sample, a.t, a.gamma, &options)?
            } else {
                improper_separate_with(&sample, a.t, a.gamma, &options)?
            };
            let tel = search_telemetry(&run, a.mode, a.t, a.gamma)?;
            let outcome = if run.polyhedron().is_some() { "polyhedron" } else { "no_separating_polyhedron" };
            (run.polyhedron().cloned(), tel, outcome)
        }
    };

    let mode = a.mode.to_possible_value().map(|v| v.get_name().to_string());
    let mut report = json!({
        "command": "train",
        "mode": mode,
        "kernel": a.kernel.to_string(),
        "gamma": a.gamma,
        "t": a.t,
        "n": ds.len(),
        "dim": ds.dim,
        "input_scale": ds.scale,
        "outcome": outcome,
        "telemetry": telemetry,
    });
    if let Some(l) = lipschitz {
        report["lipschitz"] = json!(l);
    }
    let Some(mut poly) = model else {
        emit(&report)?;
        return Ok(Outcome::Infeasible);
    };
    // ds holds the rescaled encodings, so measure before attaching the scale
    report["training_errors"] = json!(training_errors(&poly, &ds.points)?);
    report["halfspaces"] = json!(poly.halfspaces.len());
    poly.input_scale = ds.scale;
    write_json(&a.out, &poly)?;
    report["model"] = json!(a.out.display().to_string());
    emit(&report)?;
    Ok(Outcome::Done)
}

pub fn predict(a: PredictArgs) -> Result<Outcome> {
    let poly = read_model(&a.model)?;
    let queries = parse_features(File::open(&a.data)?, poly.dim())?;
    let mut w = BufWriter::new(File::create(&a.out)?);
    writeln!(w, "label")?;
    let mut positives = 0;
    for q in &queries {
        let label = classify(&poly, q)?;
        positives += (label == Label::Positive) as usize;
        writeln!(w, "{}", label.as_i8())?;
    }
    w.flush()?;
    emit(&json!({
        "command": "predict",
        "n": queries.len(),
        "positives": positives,
        "negatives": queries.len() - positives,
        "out": a.out.display().to_string(),
    }))?;
    Ok(Outcome::Done)
}

pub fn eval(a: EvalArgs) -> Result<Outcome> {
    let poly = read_model(&a.model)?;
    let points = parse_labeled(File::open(&a.data)?)?;
    if points.is_empty() {
        return Err(Error::Input("evaluation data is empty".into()));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for p in &points {
        match (p.label, classify(&poly, &p.encoding)?) {
            (Label::Positive, Label::Positive) => tp += 1,
            (Label::Positive, Label::Negative) => fn_ += 1,
            (Label::Negative, Label::Positive) => fp += 1,
            (Label::Negative, Label::Negative) => tn += 1,
        }
    }
    let errors = fp + fn_;
    emit(&json!({
        "command": "eval",
        "n": points.len(),
        "errors": errors,
        "error_rate": errors as f64 / points.len() as f64,
        "confusion": {
            "true_positive": tp,
            "false_positive": fp,
            "true_negative": tn,
            "false_negative": fn_,
        },
    }))?;
    Ok(Outcome::Done)
}

pub fn pac_plan(a: PacArgs) -> Result<Outcome> {
    let space = match (a.d, a.s) {
        (Some(d), None) => PacSpace::Euclidean { d },
        (None, Some(s)) => {
            let lipschitz = match (a.lipschitz, &a.kernel) {
                (Some(l), _) => l,
                (None, Some(k)) => {
                    k.validate()?;
                    lipschitz_constant(k, s, 1.0)
                }
                (None, None) => return Err(Error::Input("RKHS queries need --lipschitz or --kernel".into())),
            };
            PacSpace::Rkhs { s, lipschitz }
        }
        _ => return Err(Error::Input("give exactly one of --d or --s".into())),
    };
    let query = PacQuery { epsilon: a.epsilon, delta: a.delta, gamma: a.gamma, t: a.t, improper: a.improper, space };
    emit(&query.plan()?)?;
    Ok(Outcome::Done)
}

pub fn oracle(a: OracleArgs) -> Result<Outcome> {
    let points = parse_labeled(File::open(&a.data)?)?;
    let witness = oracle_witness_2d(&points, a.gamma)?;
    emit(&json!({
        "command": "oracle",
        "n": points.len(),
        "gamma": a.gamma,
        "separable": witness.is_some(),
        "witness": witness.map(|(angle, offset)| json!({ "angle": angle, "offset": offset })),
    }))?;
    Ok(Outcome::Done)
}
