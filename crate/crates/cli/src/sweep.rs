//! Parameter sweeps: classify a list of families and a templated grid.

use std::collections::{BTreeMap, BTreeSet};

use banddensity::classify::{ClassifyOptions, DensityProperty};
use banddensity::family::{FamilyKind, FamilySpec};
use banddensity::scalar::Scalar;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::{classify_family, json_word, CliError};

fn default_ks() -> Vec<usize> {
    vec![1, 2]
}

/// Sweep description.
///
/// `families` are taken as given. `template` is a family whose expressions
/// (and label) contain `{name}` placeholders; each point of the cartesian
/// product of `grid` fills them in. Grid keys are visited in sorted order.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub families: Vec<FamilySpec>,
    #[serde(default)]
    pub template: Option<FamilySpec>,
    #[serde(default)]
    pub grid: BTreeMap<String, Vec<Value>>,
    /// Values of k asked of tridiagonal families.
    #[serde(default = "default_ks")]
    pub k: Vec<usize>,
    #[serde(default)]
    pub horizon: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub label: String,
    pub kind: FamilyKind,
    pub params: String,
    pub property: DensityProperty,
    pub answer: String,
    pub basis: String,
    pub partial_sum: Option<f64>,
    pub horizon: Option<usize>,
    pub slope: Option<f64>,
}

struct Job {
    label: String,
    params: String,
    spec: FamilySpec,
}

fn value_text(v: &Value) -> String {
    let text = match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    };
    if text.starts_with('-') {
        format!("({text})")
    } else {
        text
    }
}

fn fill(text: &Option<String>, point: &[(String, String)]) -> Option<String> {
    text.as_ref().map(|t| {
        point.iter().fold(t.clone(), |acc, (k, v)| acc.replace(&format!("{{{k}}}"), v))
    })
}

fn grid_points(grid: &BTreeMap<String, Vec<Value>>) -> Vec<Vec<(String, String)>> {
    if grid.is_empty() || grid.values().any(Vec::is_empty) {
        return Vec::new();
    }
    let mut points: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for (key, values) in grid {
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push((key.clone(), value_text(v)));
                    q
                })
            })
            .collect();
    }
    points
}

fn jobs(config: &SweepConfig) -> Result<Vec<Job>, CliError> {
    let mut out = Vec::new();
    for (i, spec) in config.families.iter().enumerate() {
        let label = spec
            .label
            .clone()
            .or_else(|| spec.builtin.clone())
            .unwrap_or_else(|| format!("family{i}"));
        out.push(Job { label, params: String::new(), spec: spec.clone() });
    }
    if let Some(template) = &config.template {
        for point in grid_points(&config.grid) {
            let params = point.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";");
            let spec = FamilySpec {
                builtin: template.builtin.clone(),
                kind: template.kind,
                a: fill(&template.a, &point),
                b: fill(&template.b, &point),
                c: fill(&template.c, &point),
                d: fill(&template.d, &point),
                label: None,
            };
            let label = fill(&template.label, &point).unwrap_or_else(|| params.clone());
            out.push(Job { label, params, spec });
        }
    }
    let mut seen = BTreeSet::new();
    for job in &out {
        if !seen.insert(job.label.as_str()) {
            return Err(CliError::Sweep(format!("duplicate label `{}`", job.label)));
        }
    }
    Ok(out)
}

fn run_job(job: &Job, ks: &[usize], opts: &ClassifyOptions) -> Result<Vec<SweepRow>, CliError> {
    let family = job
        .spec
        .build()
        .map_err(|e| CliError::Sweep(format!("{}: {e}", job.label)))?;
    let ks: Vec<usize> = match family.kind() {
        FamilyKind::Penta => vec![1],
        FamilyKind::Lw => {
            // k >= 2 all ask the same question.
            let mut seen = BTreeSet::new();
            ks.iter().copied().filter(|&k| seen.insert(k.min(2))).collect()
        }
    };
    let mut rows = Vec::new();
    for k in ks {
        let verdict = classify_family(&family, k, opts).map_err(|e| CliError::Sweep(format!("{}: {e}", job.label)))?;
        let ev = verdict.evidence.as_ref();
        rows.push(SweepRow {
            label: job.label.clone(),
            kind: family.kind(),
            params: job.params.clone(),
            property: verdict.property,
            answer: json_word(&verdict.answer),
            basis: json_word(&verdict.basis),
            partial_sum: ev.map(|e| e.partial_sum),
            horizon: ev.map(|e| e.horizon),
            slope: ev.and_then(|e| e.slope),
        });
    }
    Ok(rows)
}

/// Rows in job order: listed families first, then grid points.
pub fn run(config: &SweepConfig) -> Result<Vec<SweepRow>, CliError> {
    if config.k.contains(&0) {
        return Err(CliError::Sweep("k must be at least 1".into()));
    }
    let mut opts = ClassifyOptions::from_env();
    if let Some(h) = config.horizon {
        opts.horizon = h;
    }
    let jobs = jobs(config)?;
    let results: Vec<Result<Vec<SweepRow>, CliError>> =
        jobs.par_iter().map(|job| run_job(job, &config.k, &opts)).collect();
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    Ok(rows)
}

pub const HEADER: [&str; 9] =
    ["label", "kind", "params", "property", "answer", "basis", "partial_sum", "horizon", "slope"];

pub fn to_csv(rows: &[SweepRow]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record([
            r.label.clone(),
            json_word(&r.kind),
            r.params.clone(),
            json_word(&r.property),
            r.answer.clone(),
            r.basis.clone(),
            r.partial_sum.map_or(String::new(), |x| x.format()),
            r.horizon.map_or(String::new(), |h| h.to_string()),
            r.slope.map_or(String::new(), |x| x.format()),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Sweep(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(json: &str) -> SweepConfig {
        serde_json::from_str(json).unwrap()
    }

    #[test]
    fn grid_is_cartesian_in_sorted_key_order() {
        let mut grid = BTreeMap::new();
        grid.insert("q".to_string(), vec![Value::from(1), Value::from(2)]);
        grid.insert("p".to_string(), vec![Value::from("a"), Value::from(-3)]);
        let points = grid_points(&grid);
        let flat: Vec<String> = points
            .iter()
            .map(|p| p.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(","))
            .collect();
        assert_eq!(flat, ["p=a,q=1", "p=a,q=2", "p=(-3),q=1", "p=(-3),q=2"]);
    }

    #[test]
    fn empty_grid_has_no_points() {
        let c = config(r#"{"template": {"kind": "lw", "a": "n^{p}"}, "grid": {"p": []}}"#);
        assert!(run(&c).unwrap().is_empty());
        assert_eq!(to_csv(&[]).unwrap(), HEADER.join(",") + "\n");
    }

    #[test]
    fn duplicate_labels_are_rejected() {
        let c = config(r#"{"families": [{"builtin": "lw_linear"}, {"builtin": "lw_linear"}]}"#);
        assert!(matches!(run(&c), Err(CliError::Sweep(_))));
    }

    #[test]
    fn power_grid_k_point_answers() {
        let c = config(
            r#"{"template": {"kind": "lw", "a": "n^{p}"}, "grid": {"p": [0.5, 1, 2]}, "k": [2], "horizon": 20000}"#,
        );
        let rows = run(&c).unwrap();
        let answers: Vec<&str> = rows.iter().map(|r| r.answer.as_str()).collect();
        assert_eq!(answers, ["yes", "yes", "no"]);
        assert_eq!(rows[0].params, "p=0.5");
    }
}
