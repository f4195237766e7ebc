//! Report structures and rendering. The JSON schema is the serde layout of
//! these structs: field order is fixed by declaration order, every key is
//! always present, and values that can be unavailable are nullable rather
//! than NaN. Rendering the same struct as a table prints the same numbers
//! rounded to the shown precision, so the two views never disagree.

use std::fmt::Write as _;

use serde::Serialize;
use zimed_core::effects::EffectsResult;
use zimed_core::estimator::FitResult;
use zimed_core::simulate::StudySummary;

/// `None` for anything a JSON consumer should treat as missing.
fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

#[derive(Debug, Serialize)]
pub struct FitReport {
    pub command: &'static str,
    pub input: String,
    pub seed: u64,
    pub n: usize,
    pub n_zero: usize,
    pub ceiling: f64,
    pub family_requested: String,
    pub chosen_family: String,
    pub candidates: Vec<CandidateRow>,
    pub converged: bool,
    pub em_iterations: usize,
    pub loglik: f64,
    pub n_params: usize,
    pub aic: f64,
    pub parameters: Vec<ParamRow>,
    pub effects: EffectsBlock,
    pub warnings: Vec<String>,
}

/// One line of the AIC comparison. Present even for a forced family, where
/// it has a single row.
#[derive(Debug, Serialize)]
pub struct CandidateRow {
    pub family: String,
    pub converged: bool,
    pub loglik: f64,
    pub n_params: usize,
    pub aic: f64,
    pub chosen: bool,
}

#[derive(Debug, Serialize)]
pub struct ParamRow {
    pub name: String,
    pub estimate: f64,
    pub se: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct EffectsBlock {
    pub x1: f64,
    pub x2: f64,
    pub cde_m: f64,
    pub ci_level: f64,
    pub rows: Vec<EffectRow>,
}

#[derive(Debug, Serialize)]
pub struct EffectRow {
    pub name: String,
    pub estimate: f64,
    pub se: Option<f64>,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
    pub z: Option<f64>,
    pub p_value: Option<f64>,
}

impl EffectRow {
    fn from_core(e: &zimed_core::effects::EffectEstimate) -> Self {
        EffectRow {
            name: e.name.to_string(),
            estimate: e.estimate,
            se: finite(e.se),
            ci_lower: finite(e.ci_lower),
            ci_upper: finite(e.ci_upper),
            z: finite(e.z),
            p_value: finite(e.p_value),
        }
    }
}

pub fn candidate_row(fit: &FitResult, chosen: bool) -> CandidateRow {
    CandidateRow {
        family: fit.theta.family.name().to_string(),
        converged: fit.converged,
        loglik: fit.loglik,
        n_params: fit.n_params,
        aic: fit.aic,
        chosen,
    }
}

pub fn param_rows(fit: &FitResult) -> Vec<ParamRow> {
    fit.theta
        .param_names()
        .into_iter()
        .zip(fit.theta.to_vec())
        .zip(&fit.se)
        .map(|((name, estimate), &se)| ParamRow { name, estimate, se: finite(se) })
        .collect()
}

pub fn effects_block(effects: &EffectsResult, x1: f64, x2: f64, cde_m: f64) -> EffectsBlock {
    EffectsBlock {
        x1,
        x2,
        cde_m,
        ci_level: effects.ci_level,
        rows: effects.effects.iter().map(EffectRow::from_core).collect(),
    }
}

#[derive(Debug, Serialize)]
pub struct SimReport {
    pub command: &'static str,
    pub scenario: String,
    pub family: String,
    pub n: usize,
    pub n_reps: usize,
    pub seed: u64,
    pub n_usable: usize,
    pub mean_zero_fraction: f64,
    pub mean_false_zero_fraction: f64,
    pub selection: SelectionBlock,
    pub n_fits: usize,
    pub min_em_step: Option<f64>,
    pub effects: Vec<EffectSummaryRow>,
}

#[derive(Debug, Serialize)]
pub struct SelectionBlock {
    pub zilon: usize,
    pub zinb: usize,
    pub zip: usize,
    pub none: usize,
    pub true_family_percent: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct EffectSummaryRow {
    pub name: String,
    pub true_value: f64,
    pub mean_estimate: Option<f64>,
    pub sd_estimate: Option<f64>,
    pub mean_se: Option<f64>,
    pub bias: Option<f64>,
    pub percent_bias: Option<f64>,
    pub coverage_percent: Option<f64>,
}

impl SimReport {
    pub fn from_summary(summary: &StudySummary) -> Self {
        SimReport {
            command: "simulate",
            scenario: summary.scenario.clone(),
            family: summary.family.name().to_string(),
            n: summary.n,
            n_reps: summary.n_reps,
            seed: summary.seed,
            n_usable: summary.n_usable,
            mean_zero_fraction: summary.mean_zero_fraction,
            mean_false_zero_fraction: summary.mean_false_zero_fraction,
            selection: SelectionBlock {
                zilon: summary.selection.log_normal,
                zinb: summary.selection.neg_binomial,
                zip: summary.selection.poisson,
                none: summary.selection.none,
                true_family_percent: finite(summary.true_family_percent),
            },
            n_fits: summary.n_fits,
            min_em_step: finite(summary.min_trace_step),
            effects: summary
                .effects
                .iter()
                .map(|e| EffectSummaryRow {
                    name: e.name.to_string(),
                    true_value: e.true_value,
                    mean_estimate: finite(e.mean_estimate),
                    sd_estimate: finite(e.sd_estimate),
                    mean_se: finite(e.mean_se),
                    bias: finite(e.bias),
                    percent_bias: finite(e.percent_bias),
                    coverage_percent: finite(e.coverage_percent),
                })
                .collect(),
        }
    }
}

/// Machine-readable failure, printed to stdout in JSON output modes.
#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub error: ErrorBody,
}

#[derive(Debug, Serialize)]
pub struct ErrorBody {
    pub kind: &'static str,
    pub message: String,
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports always serialize");
    s.push('\n');
    s
}

fn opt(v: Option<f64>, width: usize, places: usize) -> String {
    match v {
        Some(v) => format!("{v:>width$.places$}"),
        None => format!("{:>width$}", "-"),
    }
}

fn opt_sci(v: Option<f64>, width: usize) -> String {
    match v {
        Some(v) => format!("{v:>width$.3e}"),
        None => format!("{:>width$}", "-"),
    }
}

pub fn fit_table(r: &FitReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "fit: {}", r.input);
    let _ = writeln!(
        out,
        "n = {} ({} recorded zeros), ceiling B = {}, seed = {}",
        r.n, r.n_zero, r.ceiling, r.seed
    );
    let _ = writeln!(out, "family: requested {}, chosen {}", r.family_requested, r.chosen_family);
    let _ = writeln!(out);

    let _ = writeln!(out, "candidates");
    let _ = writeln!(
        out,
        "  {:<8} {:>10} {:>14} {:>8} {:>14}  {}",
        "family", "converged", "loglik", "params", "aic", "chosen"
    );
    for c in &r.candidates {
        let _ = writeln!(
            out,
            "  {:<8} {:>10} {:>14.4} {:>8} {:>14.4}  {}",
            c.family,
            c.converged,
            c.loglik,
            c.n_params,
            c.aic,
            if c.chosen { "*" } else { "" }
        );
    }
    let _ = writeln!(out);

    let _ = writeln!(
        out,
        "fit: converged = {}, em iterations = {}, loglik = {:.4}, aic = {:.4}",
        r.converged, r.em_iterations, r.loglik, r.aic
    );
    let _ = writeln!(out);

    let _ = writeln!(out, "parameters");
    let _ = writeln!(out, "  {:<8} {:>14} {:>12}", "name", "estimate", "se");
    for p in &r.parameters {
        let _ = writeln!(
            out,
            "  {:<8} {:>14.6} {}",
            p.name,
            p.estimate,
            opt(p.se, 12, 6)
        );
    }
    let _ = writeln!(out);

    let e = &r.effects;
    let _ = writeln!(
        out,
        "effects: x1 = {}, x2 = {}, cde at m = {}, {:.0}% CI",
        e.x1,
        e.x2,
        e.cde_m,
        100.0 * e.ci_level
    );
    let _ = writeln!(
        out,
        "  {:<6} {:>12} {:>11} {:>12} {:>12} {:>9} {:>11}",
        "effect", "estimate", "se", "lower", "upper", "z", "p"
    );
    for row in &e.rows {
        let _ = writeln!(
            out,
            "  {:<6} {:>12.6} {} {} {} {} {}",
            row.name,
            row.estimate,
            opt(row.se, 11, 6),
            opt(row.ci_lower, 12, 6),
            opt(row.ci_upper, 12, 6),
            opt(row.z, 9, 3),
            opt_sci(row.p_value, 11),
        );
    }
    let _ = writeln!(out);

    if r.warnings.is_empty() {
        let _ = writeln!(out, "warnings: none");
    } else {
        let _ = writeln!(out, "warnings:");
        for w in &r.warnings {
            let _ = writeln!(out, "  - {w}");
        }
    }
    out
}

pub fn sim_table(r: &SimReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "simulate: scenario {} ({}), n = {}, {} replicates, seed = {}",
        r.scenario, r.family, r.n, r.n_reps, r.seed
    );
    let _ = writeln!(out, "usable replicates: {} of {}", r.n_usable, r.n_reps);
    let _ = writeln!(
        out,
        "recorded zeros: {:.1}% of records ({:.1} points masked positives)",
        100.0 * r.mean_zero_fraction,
        100.0 * r.mean_false_zero_fraction
    );
    let s = &r.selection;
    let _ = writeln!(
        out,
        "selection: zilon {}, zinb {}, zip {}, none {} (true family {})",
        s.zilon,
        s.zinb,
        s.zip,
        s.none,
        match s.true_family_percent {
            Some(p) => format!("{p:.1}%"),
            None => "-".to_string(),
        }
    );
    let _ = writeln!(
        out,
        "smallest em step: {} across {} fits",
        opt_sci(r.min_em_step, 0).trim().to_string(),
        r.n_fits
    );
    let _ = writeln!(out);

    let _ = writeln!(
        out,
        "  {:<6} {:>12} {:>12} {:>10} {:>10} {:>10} {:>8} {:>7}",
        "effect", "true", "mean.est", "sd.est", "mean.se", "bias", "%bias", "cp%"
    );
    for e in &r.effects {
        let _ = writeln!(
            out,
            "  {:<6} {:>12.6} {} {} {} {} {} {}",
            e.name,
            e.true_value,
            opt(e.mean_estimate, 12, 6),
            opt(e.sd_estimate, 10, 4),
            opt(e.mean_se, 10, 4),
            opt(e.bias, 10, 4),
            opt(e.percent_bias, 8, 2),
            opt(e.coverage_percent, 7, 1),
        );
    }
    out
}

/// The effect summary as CSV, one row per effect, empty cells for
/// unavailable values.
pub fn sim_effects_csv(r: &SimReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "name",
        "true_value",
        "mean_estimate",
        "sd_estimate",
        "mean_se",
        "bias",
        "percent_bias",
        "coverage_percent",
    ])
    .expect("in-memory csv");
    let cell = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
    for e in &r.effects {
        w.write_record([
            e.name.clone(),
            e.true_value.to_string(),
            cell(e.mean_estimate),
            cell(e.sd_estimate),
            cell(e.mean_se),
            cell(e.bias),
            cell(e.percent_bias),
            cell(e.coverage_percent),
        ])
        .expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv is utf-8")
}
