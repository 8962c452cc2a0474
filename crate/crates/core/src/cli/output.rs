//! Running prepared experiments and rendering their CSV and JSON outputs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::{Experiment, Prepared};
use crate::attractive::attractive_to_fixed;
use crate::ergodic::{
    ergodic_model, run_counterexample, run_ergodic_check, run_hybrid_check, run_pipeline, ErgodicTrace, Verdict,
};
use crate::error::Result;
use crate::hilbert::Vector;
use crate::means::StageRecord;
use crate::semigroup::Address;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryCheck {
    pub name: String,
    pub passed: bool,
    pub value: Option<f64>,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Summary {
    pub name: String,
    pub experiment: String,
    pub seed: u64,
    pub passed: bool,
    pub verdict: String,
    /// Non-finite values are stored as `null`.
    pub metrics: BTreeMap<String, Option<f64>>,
    pub checks: Vec<SummaryCheck>,
    pub vectors: BTreeMap<String, Vector>,
}

impl Summary {
    fn new(prep: &Prepared) -> Summary {
        Summary {
            name: prep.name.clone(),
            experiment: prep.experiment.kind().to_string(),
            seed: prep.seed,
            passed: false,
            verdict: String::new(),
            metrics: BTreeMap::new(),
            checks: Vec::new(),
            vectors: BTreeMap::new(),
        }
    }

    fn metric(&mut self, key: &str, v: f64) {
        self.metrics.insert(key.to_string(), v.is_finite().then_some(v));
    }

    fn check(&mut self, name: &str, passed: bool, value: f64, detail: impl Into<String>) {
        self.checks.push(SummaryCheck {
            name: name.to_string(),
            passed,
            value: value.is_finite().then_some(value),
            detail: detail.into(),
        });
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        Ok(bytes)
    }
}

/// A file produced by an experiment, relative to its output directory.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn dim_of<'a>(vs: impl IntoIterator<Item = &'a Vector>) -> usize {
    vs.into_iter().map(Vector::extent).max().unwrap_or(0)
}

fn coords(v: &Vector, d: usize) -> Result<Vec<String>> {
    Ok(v.to_dense(d)?.into_iter().map(num).collect())
}

fn columns(prefix: &str, d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("{prefix}{i}")).collect()
}

fn csv(name: &str, header: Vec<String>, rows: Vec<Vec<String>>) -> Result<Artifact> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(Artifact { name: name.to_string(), bytes })
}

/// `stage, residual, v1..vd`.
fn stages_csv(name: &str, history: &[StageRecord]) -> Result<Artifact> {
    let d = dim_of(history.iter().map(|h| &h.value));
    let mut header = vec!["stage".to_string(), "residual".to_string()];
    header.extend(columns("v", d));
    let rows = history
        .iter()
        .map(|h| {
            let mut r = vec![h.stage.to_string(), num(h.residual)];
            r.extend(coords(&h.value, d)?);
            Ok(r)
        })
        .collect::<Result<_>>()?;
    csv(name, header, rows)
}

fn trace_csv(trace: &ErgodicTrace) -> Result<Artifact> {
    let d = dim_of(trace.rows.iter().flat_map(|r| [&r.point, &r.projected, &r.running_average]));
    let mut header: Vec<String> =
        ["index", "element", "distance", "projection_residual", "gap_to_mean", "flagged"].map(String::from).to_vec();
    header.extend(columns("x", d));
    header.extend(columns("p", d));
    header.extend(columns("avg", d));
    let rows = trace
        .rows
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let mut row = vec![
                (k + 1).to_string(),
                r.element.to_string(),
                num(r.distance),
                num(r.projection_residual),
                r.gap_to_mean.map(num).unwrap_or_default(),
                r.flagged.to_string(),
            ];
            row.extend(coords(&r.point, d)?);
            row.extend(coords(&r.projected, d)?);
            row.extend(coords(&r.running_average, d)?);
            Ok(row)
        })
        .collect::<Result<_>>()?;
    csv("trace.csv", header, rows)
}

fn literal(v: &Vector) -> Result<String> {
    Ok(serde_json::to_string(v)?)
}

fn element(e: &Option<Address>) -> String {
    e.as_ref().map(Address::to_string).unwrap_or_default()
}

/// Runs one experiment; nothing is written here.
pub fn execute(prep: &Prepared) -> Result<(Summary, Vec<Artifact>)> {
    let mut s = Summary::new(prep);
    let mut files = Vec::new();
    match &prep.experiment {
        Experiment::Ergodic { setup, set } => {
            let trace = run_ergodic_check(setup)?;
            let mean = trace.mean.as_ref().expect("ergodic check records the mean");
            let tol = setup.tolerances;
            s.verdict = format!("{:?}", trace.verdict).to_lowercase();
            s.metric("final_gap", trace.final_gap.unwrap_or(f64::INFINITY));
            s.metric("net_residual", trace.net_residual);
            s.metric("mean_residual", mean.cauchy_residual);
            s.metric("mean_stage", mean.stage as f64);
            s.metric("flagged_rows", trace.flagged as f64);
            s.metric("model_constraints", trace.model_size as f64);
            s.metric("rows", trace.rows.len() as f64);
            s.vectors.insert("mean".into(), mean.value.clone());
            if let Some(p) = trace.last_projection() {
                s.vectors.insert("final_projection".into(), p.clone());
            }
            s.check("agree", trace.verdict == Verdict::Agree, trace.final_gap.unwrap_or(f64::INFINITY), format!("tolerance {}", tol.agree));
            s.check("monotone distance", trace.flagged == 0, trace.flagged as f64, format!("slack {}", tol.monotone));
            if let Some(c) = set {
                let p = attractive_to_fixed(&mean.value, c, &setup.action, &setup.battery, tol.attractive)?;
                let bound = 10.0 * tol.agree;
                s.check("pipeline fixed", p.max_fixed_residual <= bound, p.max_fixed_residual, format!("bound {bound}"));
                s.vectors.insert("fixed_candidate".into(), p.projected_fixed_candidate);
            }
            files.push(trace_csv(&trace)?);
            files.push(stages_csv("mean.csv", &mean.history)?);
            let model = ergodic_model(setup)?;
            let mut json = model.to_json()?.into_bytes();
            json.push(b'\n');
            files.push(Artifact { name: "model.json".into(), bytes: json });
        }
        Experiment::Pipeline { action, scheme, start, battery, set, max_stage, tolerances } => {
            let r = run_pipeline(action, scheme, start, battery, set, *max_stage, tolerances)?;
            s.verdict = if r.passed { "fixed" } else { "not-fixed" }.into();
            s.metric("mean_residual", r.mean.cauchy_residual);
            s.metric("mean_stage", r.mean.stage as f64);
            s.vectors.insert("mean".into(), r.mean.value.clone());
            s.check("mean converged", r.mean.converged, r.mean.cauchy_residual, format!("tolerance {}", tolerances.mean));
            s.check("attractive", r.attractive.holds, r.attractive.worst, format!("{} test points", battery.points.len()));
            if let Some(p) = &r.pipeline {
                s.metric("max_fixed_residual", p.max_fixed_residual);
                s.vectors.insert("fixed_candidate".into(), p.projected_fixed_candidate.clone());
                s.check("fixed", p.is_fixed(tolerances.fixed), p.max_fixed_residual, format!("tolerance {}", tolerances.fixed));
            }
            files.push(stages_csv("trace.csv", &r.mean.history)?);
        }
        Experiment::Counterexample { which, params } => {
            let r = run_counterexample(*which, params)?;
            s.verdict = if r.passed { "confirmed" } else { "not-confirmed" }.into();
            for c in &r.checks {
                s.check(&c.name, c.passed, c.value, c.detail.clone());
            }
            s.metric("witnesses", r.witnesses.len() as f64);
            let rows = r
                .checks
                .iter()
                .map(|c| vec![c.name.clone(), c.passed.to_string(), num(c.value), c.detail.clone()])
                .collect();
            files.push(csv("trace.csv", ["check", "passed", "value", "detail"].map(String::from).to_vec(), rows)?);
            if !r.witnesses.is_empty() {
                let rows = r
                    .witnesses
                    .iter()
                    .map(|(a, w)| {
                        Ok(vec![literal(a)?, literal(&w.x)?, element(&w.element), num(w.lhs), num(w.rhs)])
                    })
                    .collect::<Result<_>>()?;
                let header = ["candidate", "x", "element", "lhs", "rhs"].map(String::from).to_vec();
                files.push(csv("witnesses.csv", header, rows)?);
            }
        }
        Experiment::Hybrid { map, alpha, beta, grid, scheme, start, battery, max_stage, tolerances } => {
            let r = run_hybrid_check(map, *alpha, *beta, grid, scheme, start, battery, *max_stage, tolerances)?;
            s.verdict = if r.passed { "confirmed" } else { "not-confirmed" }.into();
            s.check("generalized hybrid", r.hybrid.holds, r.hybrid.worst, format!("alpha {alpha}, beta {beta}, {} ordered pairs", grid.len() * grid.len()));
            s.check("not nonexpansive", !r.nonexpansive.holds, r.nonexpansive.worst, "grid pairs");
            s.check("mean converged", r.mean.converged, r.mean.cauchy_residual, format!("tolerance {}", tolerances.mean));
            s.check("mean attractive", r.attractive.holds, r.attractive.worst, format!("{} test points", battery.points.len()));
            s.vectors.insert("mean".into(), r.mean.value.clone());
            files.push(stages_csv("trace.csv", &r.mean.history)?);
        }
    }
    s.passed = !s.checks.is_empty() && s.checks.iter().all(|c| c.passed);
    Ok((s, files))
}
