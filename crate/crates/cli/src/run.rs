//! Command implementations: diagnostics, reproductions and plot-data export.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use serde::Serialize;

use ergodual::eprop::modulus_table;
use ergodual::equivalence::{ergodic_equivalence_matrix, EquivalenceOptions};
use ergodual::error::Error as CoreError;
use ergodual::function::BoundedFunction;
use ergodual::kernel::KernelOperator;
use ergodual::measure::SignedMeasure;
use ergodual::models::{build_by_name, Model};
use ergodual::pairing::{tight_at, tightness_profile};
use ergodual::projection::{estimate_projection, PlateauStatus, ProjectionOptions, Topology};
use ergodual::report::{write_json, write_series_csv};
use ergodual::reproduce::{reproduce_cycles_line, reproduce_summing, reproduce_z_infinity};
use ergodual::scheme::{
    cesaro_avg, cesaro_avg_adjoint, cesaro_kernel, scheme_report, IndexedValue, SchemeOperators,
    SchemeSpec,
};

use crate::config::RunConfig;

/// Certification outcome of one requested diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct Certification {
    pub status: Status,
    pub detail: String,
}

#[derive(Debug, Serialize)]
struct DiagnoseReport {
    schema_version: u32,
    config: RunConfig,
    config_sha256: String,
    model: ModelSummary,
    certifications: BTreeMap<String, Certification>,
    results: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Serialize)]
struct ModelSummary {
    name: String,
    states: usize,
    truncation_levels: usize,
    markovian: bool,
    leaking_rows: Vec<String>,
}

fn model_summary(model: &Model, op: &KernelOperator) -> ModelSummary {
    ModelSummary {
        name: model.name.clone(),
        states: model.space.len(),
        truncation_levels: model.space.exhaustion_levels(),
        markovian: op.is_markovian(),
        leaking_rows: op
            .kernel()
            .leaking_rows(1e-12)
            .iter()
            .map(|&x| model.space.name(x).to_string())
            .collect(),
    }
}

struct SchemeSetup {
    spec: SchemeSpec,
    /// Operator the scheme runs on (forward or backward generator).
    operator: Option<KernelOperator>,
    rate: Option<ergodual::ctmc::RateMatrix>,
}

fn setup_scheme(cfg: &RunConfig, model: &Model) -> anyhow::Result<SchemeSetup> {
    let bound_for = |op: &KernelOperator| op.operator_norm().max(1.0);
    match cfg.scheme.as_str() {
        "cesaro" | "backward-cesaro" => {
            let op = if cfg.scheme == "cesaro" {
                model.operator.clone()
            } else {
                model
                    .backward
                    .clone()
                    .ok_or_else(|| anyhow!("model `{}` has no backward generator", model.name))?
            };
            let n_max = cfg.n_max.unwrap_or(1024);
            let mut grid = Vec::new();
            let mut n = 1u64;
            while n <= n_max {
                grid.push(n);
                n = n.saturating_mul(2);
            }
            if *grid.last().unwrap() != n_max {
                grid.push(n_max);
            }
            let spec = SchemeSpec::cesaro(grid, bound_for(&op))?;
            Ok(SchemeSetup { spec, operator: Some(op), rate: None })
        }
        "abel" => {
            let op = model.operator.clone();
            let grid = cfg.r_grid.clone().unwrap_or_else(|| vec![0.5, 0.9, 0.99]);
            let spec = SchemeSpec::abel(grid, bound_for(&op))?;
            Ok(SchemeSetup { spec, operator: Some(op), rate: None })
        }
        "time" => {
            let rate = model
                .rate
                .clone()
                .ok_or_else(|| anyhow!("model `{}` has no rate matrix", model.name))?;
            let grid = cfg.t_grid.clone().unwrap_or_else(|| vec![0.5, 1.0, 2.0, 4.0, 8.0]);
            let spec = SchemeSpec::time(grid, 1.0)?;
            Ok(SchemeSetup { spec, operator: None, rate: Some(rate) })
        }
        other => bail!("unknown scheme `{other}`"),
    }
}

fn default_diagnostics(setup: &SchemeSetup) -> Vec<String> {
    if setup.rate.is_some() {
        vec!["as1".into(), "as3".into()]
    } else {
        vec![
            "as1".into(),
            "as3".into(),
            "hull".into(),
            "projection".into(),
            "e-property".into(),
            "tightness".into(),
        ]
    }
}

fn lipschitz_probe(model: &Model) -> anyhow::Result<BoundedFunction> {
    let space = model.space.clone();
    if let Some(inf) = space.infinity() {
        let values: Vec<f64> =
            (0..space.len()).map(|x| (1.0 - space.distance(inf, x)).max(0.0)).collect();
        Ok(BoundedFunction::new(
            space,
            values,
            Some(ergodual::function::TailRule::Zero),
            Some(1.0),
        )?)
    } else {
        let center = space.exhaustion_set(0)[0];
        Ok(BoundedFunction::bump(space, center, 1.0)?)
    }
}

fn probe_measure(model: &Model) -> anyhow::Result<SignedMeasure> {
    Ok(SignedMeasure::dirac(model.space.clone(), model.space.exhaustion_set(0)[0])?)
}

fn to_value(v: &impl Serialize) -> serde_json::Value {
    serde_json::to_value(v).expect("report values serialize")
}

/// Identity-residual tolerance per scheme kind.
fn identity_tol(spec: &SchemeSpec) -> f64 {
    match spec.kind {
        ergodual::scheme::SchemeKind::Cesaro { .. } => 1e-12,
        ergodual::scheme::SchemeKind::Abel { .. } => 1e-10,
        ergodual::scheme::SchemeKind::Time { .. } => 1e-8,
    }
}

pub fn diagnose(cfg: &RunConfig, out_dir: &Path) -> anyhow::Result<i32> {
    let model = build_by_name(&cfg.model, cfg.truncation).map_err(config_error)?;
    let setup = setup_scheme(cfg, &model)?;
    let requested = if cfg.diagnostics.is_empty() {
        default_diagnostics(&setup)
    } else {
        cfg.diagnostics.clone()
    };
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;

    let plateau_tol = cfg.tol.unwrap_or(1e-6);
    let mut certifications: BTreeMap<String, Certification> = BTreeMap::new();
    let mut results: BTreeMap<String, serde_json::Value> = BTreeMap::new();

    let ops = match (&setup.operator, &setup.rate) {
        (Some(op), _) => SchemeOperators::Discrete(op),
        (None, Some(rate)) => SchemeOperators::Continuous(rate),
        _ => unreachable!(),
    };
    let f = lipschitz_probe(&model)?;
    let mu = probe_measure(&model)?;

    for diag in &requested {
        match diag.as_str() {
            "as1" | "as3" | "hull" => {
                if results.contains_key("scheme_report") {
                    continue;
                }
                let report = scheme_report(&setup.spec, ops, &f, &mu)?;
                certifications.insert(
                    "as1".into(),
                    Certification {
                        status: if report.as1.pass { Status::Pass } else { Status::Fail },
                        detail: format!(
                            "max norm estimate {} against bound {}",
                            report.as1.max_estimate, report.as1.bound
                        ),
                    },
                );
                let tol = identity_tol(&setup.spec);
                let as3_ok = report.as3.max_identity_residual <= tol
                    && (!report.as3.markov_bound_checked || report.as3.markov_bound_ok);
                certifications.insert(
                    "as3".into(),
                    Certification {
                        status: if as3_ok { Status::Pass } else { Status::Fail },
                        detail: format!(
                            "max identity residual {} (tolerance {tol})",
                            report.as3.max_identity_residual
                        ),
                    },
                );
                if let Some(hull) = &report.convex_hull {
                    certifications.insert(
                        "hull".into(),
                        Certification {
                            status: if hull.max_violation <= 1e-9 {
                                Status::Pass
                            } else {
                                Status::Fail
                            },
                            detail: format!("max convex-hull violation {}", hull.max_violation),
                        },
                    );
                }
                write_series_csv(&out_dir.join("as3_function_decay.csv"), &report.as3.function_decay)?;
                write_series_csv(&out_dir.join("as3_measure_decay.csv"), &report.as3.measure_decay)?;
                write_series_csv(
                    &out_dir.join("identity_residuals.csv"),
                    &report.as3.identity_residuals,
                )?;
                results.insert("scheme_report".into(), to_value(&report));
            }
            "projection" => {
                let op = setup
                    .operator
                    .as_ref()
                    .ok_or_else(|| anyhow!("projection estimation needs a discrete scheme"))?;
                let est = estimate_projection(
                    op,
                    &setup.spec,
                    &ProjectionOptions::new(Topology::SigmaPrime).with_plateau_tol(plateau_tol),
                )?;
                let status = match est.status {
                    PlateauStatus::Certified { .. } if est.certified() => Status::Pass,
                    PlateauStatus::Certified { .. } => Status::Fail,
                    PlateauStatus::Inconclusive => Status::Inconclusive,
                };
                certifications.insert(
                    "projection".into(),
                    Certification {
                        status,
                        detail: match &est.invariants {
                            Some(inv) => format!(
                                "plateau {:?}; invariant residual {}",
                                est.status, inv.max_residual
                            ),
                            None => format!("plateau {:?}", est.status),
                        },
                    },
                );
                write_series_csv(&out_dir.join("projection_convergence.csv"), &est.convergence_log)?;
                results.insert(
                    "projection".into(),
                    serde_json::json!({
                        "status": to_value(&est.status),
                        "invariants": to_value(&est.invariants),
                        "kernel": to_value(&ergodual::kernel::KernelData::from_kernel(est.operator.kernel())),
                    }),
                );
            }
            "e-property" => {
                let op = setup
                    .operator
                    .as_ref()
                    .ok_or_else(|| anyhow!("the e-property probe needs a discrete scheme"))?;
                let space = model.space.clone();
                let probes: Vec<usize> = if space.infinity_points().is_empty() {
                    space.exhaustion_set(0).to_vec()
                } else {
                    space.infinity_points().to_vec()
                };
                let mut d_max = 0.0f64;
                let mut d_min = f64::INFINITY;
                for &p in &probes {
                    for x in 0..space.len() {
                        let d = space.distance(p, x);
                        d_max = d_max.max(d);
                        if d > 0.0 {
                            d_min = d_min.min(d);
                        }
                    }
                }
                // descend until the balls isolate the probes
                let mut radii = Vec::new();
                let mut r = d_max / 2.0;
                while radii.len() < 24 {
                    radii.push(r);
                    if r <= d_min * 1.5 {
                        break;
                    }
                    r /= 2.0;
                }
                let family: Vec<BoundedFunction> = setup
                    .spec
                    .grid_labels()
                    .iter()
                    .map(|&label| match setup.spec.kind {
                        ergodual::scheme::SchemeKind::Cesaro { .. } => {
                            cesaro_avg(op, label as u64, &f)
                        }
                        ergodual::scheme::SchemeKind::Abel { .. } => {
                            ergodual::scheme::abel_avg(op, label, &f)
                        }
                        _ => unreachable!(),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let table = modulus_table(&family, &space, &probes, &radii)?;
                let lip = f.lip_hint().unwrap_or(1.0);
                let target = 2.0 * lip * radii[radii.len() - 1] + 1e-12;
                let floor = table.floor().iter().fold(0.0f64, |m, &v| m.max(v));
                certifications.insert(
                    "e-property".into(),
                    Certification {
                        status: if floor <= target { Status::Pass } else { Status::Fail },
                        detail: format!(
                            "modulus {floor} at radius {} (target {target})",
                            radii[radii.len() - 1]
                        ),
                    },
                );
                let rows: Vec<IndexedValue> = table
                    .values
                    .iter()
                    .flat_map(|row| {
                        row.iter()
                            .zip(&table.radii)
                            .map(|(&v, &r)| IndexedValue { index: r, value: v })
                            .collect::<Vec<_>>()
                    })
                    .collect();
                write_series_csv(&out_dir.join("modulus_table.csv"), &rows)?;
                results.insert("e_property".into(), to_value(&table));
            }
            "beta0" => {
                let op = setup
                    .operator
                    .as_ref()
                    .ok_or_else(|| anyhow!("the equicontinuity probe needs a discrete scheme"))?;
                let averages: Vec<KernelOperator> = setup
                    .spec
                    .grid_labels()
                    .iter()
                    .filter(|&&l| l <= 4096.0)
                    .map(|&l| cesaro_kernel(op, l as u64))
                    .collect::<Result<Vec<_>, _>>()?;
                let compact = model.space.exhaustion_set(0).to_vec();
                let profile = ergodual::eprop::beta0_equicontinuity_probe(
                    &averages,
                    &compact,
                    &[0.5, 0.1, 0.01],
                )?;
                certifications.insert(
                    "beta0".into(),
                    Certification {
                        status: if profile.equicontinuous { Status::Pass } else { Status::Fail },
                        detail: format!("{:?}", profile.per_eps),
                    },
                );
                results.insert("beta0".into(), to_value(&profile));
            }
            "tightness" => {
                let op = setup
                    .operator
                    .as_ref()
                    .ok_or_else(|| anyhow!("tightness profiles need a discrete scheme"))?;
                let family: Vec<SignedMeasure> = setup
                    .spec
                    .grid_labels()
                    .iter()
                    .map(|&label| match setup.spec.kind {
                        ergodual::scheme::SchemeKind::Cesaro { .. } => {
                            cesaro_avg_adjoint(op, label as u64, &mu)
                        }
                        ergodual::scheme::SchemeKind::Abel { .. } => {
                            ergodual::scheme::abel_avg_adjoint(op, label, &mu)
                        }
                        _ => unreachable!(),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let profile = tightness_profile(&family, &model.space)?;
                let level = tight_at(&profile, 1e-3);
                certifications.insert(
                    "tightness".into(),
                    Certification {
                        status: if level.is_some() { Status::Pass } else { Status::Fail },
                        detail: match level {
                            Some(l) => format!("tight at 1e-3 from exhaustion level {l}"),
                            None => "mass is not confined by any proper exhaustion set".into(),
                        },
                    },
                );
                let rows: Vec<IndexedValue> = profile
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| IndexedValue { index: (i + 1) as f64, value: v })
                    .collect();
                write_series_csv(&out_dir.join("tightness_profile.csv"), &rows)?;
                results.insert("tightness".into(), to_value(&profile));
            }
            "equivalences" => {
                let op = setup
                    .operator
                    .as_ref()
                    .ok_or_else(|| anyhow!("the equivalence matrix needs a discrete scheme"))?;
                let mut opts = EquivalenceOptions::new(setup.spec.clone());
                opts.plateau_tol = plateau_tol;
                let report = ergodic_equivalence_matrix(op, &opts)?;
                let status = if !report.hypothesis.holds {
                    Status::Inconclusive
                } else if report.assertions.map(|a| a.all_true()).unwrap_or(false) {
                    Status::Pass
                } else {
                    Status::Fail
                };
                certifications.insert(
                    "equivalences".into(),
                    Certification {
                        status,
                        detail: match (&report.assertions, &report.diagnosis) {
                            (Some(a), _) => format!("{a:?}"),
                            (None, Some(d)) => d.clone(),
                            _ => String::new(),
                        },
                    },
                );
                results.insert("equivalences".into(), to_value(&report));
            }
            other => bail!("unknown diagnostic `{other}`"),
        }
    }

    let report = DiagnoseReport {
        schema_version: cfg.schema_version,
        config: cfg.clone(),
        config_sha256: cfg.sha256(),
        model: model_summary(&model, setup.operator.as_ref().unwrap_or(&model.operator)),
        certifications: certifications.clone(),
        results,
    };
    write_json(&out_dir.join("report.json"), &report)?;

    for (name, cert) in &certifications {
        println!("{name}: {:?} — {}", cert.status, cert.detail);
    }
    let any_fail = certifications.values().any(|c| c.status == Status::Fail);
    let any_inconclusive = certifications.values().any(|c| c.status == Status::Inconclusive);
    Ok(if any_fail {
        1
    } else if any_inconclusive && !cfg.allow_inconclusive {
        1
    } else {
        0
    })
}

fn config_error(e: CoreError) -> anyhow::Error {
    anyhow!("{e}")
}

/// Scripted reproduction of a bundled example. Prints a one-page summary,
/// optionally writes the verdict JSON, and fails on fixture mismatch.
pub fn reproduce(example: &str, out: Option<&PathBuf>) -> anyhow::Result<i32> {
    let (name, verdict, pass, lines): (&str, serde_json::Value, bool, Vec<String>) =
        match example {
            "ex61" | "summing-l1" => {
                let v = reproduce_summing()?;
                let lines = vec![
                    format!("adjoint atom averages exact:        {}", v.adjoint_atom_exact),
                    format!("forward coordinate rule residual:   {}", v.forward_rule_max_residual),
                    format!("tail escape certified:              {}", v.tail_escape_certified),
                    format!(
                        "fixed spaces (functions, measures): ({}, {})",
                        v.fixed_function_dim, v.fixed_measure_dim
                    ),
                    format!("fixed spaces separate:              {}", v.separation),
                    "verdict: forward averages converge; the adjoint pointwise limit is the \
                     constant one, whose tail never vanishes — the projection does not respect \
                     the duality"
                        .to_string(),
                ];
                ("summing-l1", to_value(&v), v.pass, lines)
            }
            "ex62" | "z-infinity" => {
                let v = reproduce_z_infinity()?;
                let lines = vec![
                    format!("forward pointwise error:            {}", v.forward_pointwise_max_err),
                    format!("forward modulus at smallest radius: {}", v.forward_modulus_floor),
                    format!("forward equivalence matrix:         all true = {}", v.forward_equivalences_all_true),
                    format!("backward indicator rule exact:      {}", v.backward_rule_exact),
                    format!("backward modulus floor:             {}", v.backward_modulus_floor),
                    format!("backward hypothesis fails:          {}", v.backward_hypothesis_fails),
                    format!("backward limit discontinuity gap:   {}", v.backward_limit_gap),
                    "verdict: the rightward scheme has the e-property and is weakly ergodic; \
                     the leftward scheme fails the clustering hypothesis and its limit is \
                     discontinuous"
                        .to_string(),
                ];
                ("z-infinity", to_value(&v), v.pass, lines)
            }
            "ex63" | "cycles-line" => {
                let v = reproduce_cycles_line()?;
                let lines = vec![
                    format!(
                        "fixed spaces (functions, measures): ({}, {})",
                        v.fixed_function_dim, v.fixed_measure_dim
                    ),
                    format!("basis recovery residual:            {}", v.basis_recovery_residual),
                    format!("Gram identity residual:             {}", v.gram_identity_residual),
                    format!("fixed spaces separate:              {}", v.separation),
                    format!(
                        "obstruction sweep: {}/{} matched, max total pairing {} vs target {}",
                        v.obstruction.matched,
                        v.obstruction.candidates,
                        v.obstruction.max_total_pairing,
                        v.obstruction.target_total_pairing
                    ),
                    format!("decomposition residual floor:       {}", v.decomposition_residual_floor),
                    "verdict: the fixed spaces separate each other, yet the origin atom admits \
                     no decomposition into fixed measures plus closed range"
                        .to_string(),
                ];
                ("cycles-line", to_value(&v), v.pass, lines)
            }
            other => bail!("unknown example `{other}` (use ex61, ex62 or ex63)"),
        };

    println!("== {name} ==");
    for line in &lines {
        println!("  {line}");
    }
    println!("  fixture comparison: {}", if pass { "PASS" } else { "FAIL" });
    if let Some(path) = out {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        write_json(path, &serde_json::json!({ "example": name, "pass": pass, "verdict": verdict }))?;
    }
    Ok(if pass { 0 } else { 1 })
}

/// Emits decay curves as CSV files; the diagnostics list is taken literally
/// (an empty list writes nothing).
pub fn export_plotdata(cfg: &RunConfig, out_dir: &Path) -> anyhow::Result<i32> {
    if cfg.diagnostics.is_empty() {
        return Ok(0);
    }
    let model = build_by_name(&cfg.model, cfg.truncation).map_err(config_error)?;
    let setup = setup_scheme(cfg, &model)?;
    std::fs::create_dir_all(out_dir)?;
    let f = lipschitz_probe(&model)?;
    let mu = probe_measure(&model)?;
    let ops = match (&setup.operator, &setup.rate) {
        (Some(op), _) => SchemeOperators::Discrete(op),
        (None, Some(rate)) => SchemeOperators::Continuous(rate),
        _ => unreachable!(),
    };

    for diag in &cfg.diagnostics {
        match diag.as_str() {
            "as1" | "as3" | "hull" => {
                let report = scheme_report(&setup.spec, ops, &f, &mu)?;
                write_series_csv(&out_dir.join("as3_function_decay.csv"), &report.as3.function_decay)?;
                write_series_csv(&out_dir.join("as3_measure_decay.csv"), &report.as3.measure_decay)?;
                write_series_csv(
                    &out_dir.join("identity_residuals.csv"),
                    &report.as3.identity_residuals,
                )?;
            }
            "projection" => {
                let op = setup
                    .operator
                    .as_ref()
                    .ok_or_else(|| anyhow!("projection gap needs a discrete scheme"))?;
                let est = estimate_projection(
                    op,
                    &setup.spec,
                    &ProjectionOptions::new(Topology::SigmaPrime)
                        .with_plateau_tol(cfg.tol.unwrap_or(1e-6)),
                )?;
                // ||A_n - P|| in operator sup norm along the grid
                let pm = est.operator.kernel().to_matrix();
                let mut series = Vec::new();
                for &label in &setup.spec.grid_labels() {
                    if label > 4096.0 {
                        continue;
                    }
                    let a = cesaro_kernel(op, label as u64)?.kernel().to_matrix();
                    let diff = &a - &pm;
                    let gap = (0..diff.nrows())
                        .map(|i| (0..diff.ncols()).map(|j| diff[(i, j)].abs()).sum::<f64>())
                        .fold(0.0f64, f64::max);
                    series.push(IndexedValue { index: label, value: gap });
                }
                write_series_csv(&out_dir.join("projection_gap.csv"), &series)?;
                write_series_csv(&out_dir.join("projection_convergence.csv"), &est.convergence_log)?;
            }
            "tightness" => {
                let op = setup
                    .operator
                    .as_ref()
                    .ok_or_else(|| anyhow!("tightness profiles need a discrete scheme"))?;
                let family: Vec<SignedMeasure> = setup
                    .spec
                    .grid_labels()
                    .iter()
                    .map(|&label| cesaro_avg_adjoint(op, label as u64, &mu))
                    .collect::<Result<Vec<_>, _>>()?;
                let profile = tightness_profile(&family, &model.space)?;
                let rows: Vec<IndexedValue> = profile
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| IndexedValue { index: (i + 1) as f64, value: v })
                    .collect();
                write_series_csv(&out_dir.join("tightness_profile.csv"), &rows)?;
            }
            "e-property" => {
                let op = setup
                    .operator
                    .as_ref()
                    .ok_or_else(|| anyhow!("the e-property probe needs a discrete scheme"))?;
                let space = model.space.clone();
                let probes: Vec<usize> = if space.infinity_points().is_empty() {
                    vec![space.exhaustion_set(0)[0]]
                } else {
                    space.infinity_points().to_vec()
                };
                let mut d_max = 0.0f64;
                let mut d_min = f64::INFINITY;
                for &p in &probes {
                    for x in 0..space.len() {
                        let d = space.distance(p, x);
                        d_max = d_max.max(d);
                        if d > 0.0 {
                            d_min = d_min.min(d);
                        }
                    }
                }
                // descend until the balls isolate the probes
                let mut radii = Vec::new();
                let mut r = d_max / 2.0;
                while radii.len() < 24 {
                    radii.push(r);
                    if r <= d_min * 1.5 {
                        break;
                    }
                    r /= 2.0;
                }
                let family: Vec<BoundedFunction> = setup
                    .spec
                    .grid_labels()
                    .iter()
                    .map(|&label| cesaro_avg(op, label as u64, &f))
                    .collect::<Result<Vec<_>, _>>()?;
                let table = modulus_table(&family, &space, &probes, &radii)?;
                let rows: Vec<IndexedValue> = table.values[0]
                    .iter()
                    .zip(&table.radii)
                    .map(|(&v, &r)| IndexedValue { index: r, value: v })
                    .collect();
                write_series_csv(&out_dir.join("modulus_table.csv"), &rows)?;
            }
            _ => {}
        }
    }
    Ok(0)
}

pub fn list_models() -> i32 {
    println!("available models (name — description):");
    for (name, desc) in ergodual::models::model_names() {
        println!("  {name:<14} {desc}");
    }
    0
}
