//! Wires arguments to the core library and turns outcomes into reports and
//! exit codes: 0 clean, 1 estimation failure, 2 bad input or usage, 3 a fit
//! that finished but left its convergence or covariance flags raised.

use rayon::prelude::*;
use thiserror::Error;
use zimed_core::effects::{effects_with_inference, EffectRequest};
use zimed_core::estimator::{fit, FitConfig, FitResult};
use zimed_core::families::MediatorFamily;
use zimed_core::selection::select_family;
use zimed_core::simulate::{run_replicate, summarize, ReplicateOutcome};

use crate::cli::{Cli, Command, FitArgs, OutputMode, SimulateArgs};
use crate::ingest::{ingest_csv, ColumnMap, IngestError};
use crate::report::{
    self, candidate_row, effects_block, param_rows, ErrorBody, ErrorReport, FitReport, SimReport,
};
use crate::scenario::{self, ScenarioError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ESTIMATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_UNRELIABLE: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Estimation(#[from] zimed_core::Error),
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Ingest(_) => "ingestion",
            CliError::Scenario(_) => "scenario",
            CliError::Estimation(_) => "estimation",
            CliError::Write { .. } => "io",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Estimation(_) => EXIT_ESTIMATION,
            _ => EXIT_USAGE,
        }
    }
}

/// Run a parsed command line to completion and return the process exit code.
pub fn run(cli: Cli) -> i32 {
    match cli.command {
        Command::Fit(args) => match run_fit(&args) {
            Ok((report, code)) => {
                emit(&report, report::fit_table(&report), args.output);
                code
            }
            Err(e) => fail(&e, args.output),
        },
        Command::Simulate(args) => match run_simulate(&args) {
            Ok((report, code)) => {
                emit(&report, report::sim_table(&report), args.output);
                code
            }
            Err(e) => fail(&e, args.output),
        },
    }
}

fn emit<T: serde::Serialize>(report: &T, table: String, mode: OutputMode) {
    if mode.wants_json() {
        print!("{}", report::to_json(report));
    }
    if mode.wants_table() {
        print!("{table}");
    }
}

fn fail(e: &CliError, mode: OutputMode) -> i32 {
    if mode.wants_json() {
        let body = ErrorReport {
            error: ErrorBody { kind: e.kind(), message: e.to_string() },
        };
        print!("{}", report::to_json(&body));
    }
    eprintln!("error: {e}");
    e.exit_code()
}

fn validate_fit_args(args: &FitArgs) -> Result<(), CliError> {
    if !(args.ci_level > 0.0 && args.ci_level < 1.0) {
        return Err(CliError::Usage(format!(
            "--ci-level must be inside (0, 1), got {}",
            args.ci_level
        )));
    }
    if !(args.ceiling > 0.0) {
        return Err(CliError::Usage(format!("--B must be positive, got {}", args.ceiling)));
    }
    if args.cde_m < 0.0 {
        return Err(CliError::Usage(format!(
            "--cde-m is a mediator value and cannot be negative, got {}",
            args.cde_m
        )));
    }
    if !args.x1.is_finite() || !args.x2.is_finite() {
        return Err(CliError::Usage("--x1 and --x2 must be finite".into()));
    }
    Ok(())
}

/// Fit one data set and assemble the report plus its exit code.
///
/// # Errors
///
/// Usage, ingestion, or estimation failures; a fit that merely raises
/// warning flags still reports `Ok`.
pub fn run_fit(args: &FitArgs) -> Result<(FitReport, i32), CliError> {
    validate_fit_args(args)?;
    let map = ColumnMap {
        y: args.y.clone(),
        m: args.m.clone(),
        x: args.x.clone(),
        z: args.z.clone(),
    };
    let data = ingest_csv(&args.input, &map)?;
    let config = FitConfig { ceiling: args.ceiling, ..FitConfig::default() };

    let mut warnings = Vec::new();
    let (fits, chosen, failures) = match args.family.family() {
        Some(family) => (vec![fit(&data, family, &config)?], 0, Vec::new()),
        None => {
            let sel = select_family(&data, &config)?;
            (sel.fits, sel.chosen, sel.failures)
        }
    };
    for (family, err) in &failures {
        warnings.push(format!("candidate {} failed: {err}", family.name()));
    }

    let best: &FitResult = &fits[chosen];
    if !best.converged {
        warnings.push("em reached its iteration cap before meeting the tolerance".into());
    }
    if best.warnings.mstep_stalled {
        warnings.push("an em step could not improve the log-likelihood; stopped there".into());
    }
    if best.warnings.covariance_unreliable {
        warnings.push(
            "observed information is not positive definite; standard errors come from a \
             pseudo-inverse and are unreliable"
                .into(),
        );
    }
    if best.warnings.zero_prob_boundary {
        warnings
            .push("fitted zero probability sits at the boundary; its inference is fragile".into());
    }
    if args.x1 == args.x2 {
        warnings.push("x1 equals x2, so every effect contrast is identically zero".into());
    }

    let req = EffectRequest { x1: args.x1, x2: args.x2, cde_m: args.cde_m };
    let effects = effects_with_inference(&best.theta, &best.covariance, &req, args.ci_level)?;

    let report = FitReport {
        command: "fit",
        input: args.input.display().to_string(),
        seed: args.seed,
        n: data.n(),
        n_zero: data.n_zero(),
        ceiling: args.ceiling,
        family_requested: args.family.label().to_string(),
        chosen_family: best.theta.family.name().to_string(),
        candidates: fits
            .iter()
            .enumerate()
            .map(|(i, f)| candidate_row(f, i == chosen))
            .collect(),
        converged: best.converged,
        em_iterations: best.n_em_iters,
        loglik: best.loglik,
        n_params: best.n_params,
        aic: best.aic,
        parameters: param_rows(best),
        effects: effects_block(&effects, args.x1, args.x2, args.cde_m),
        warnings,
    };
    let code = if report.converged && !best.warnings.covariance_unreliable {
        EXIT_OK
    } else {
        EXIT_UNRELIABLE
    };
    Ok((report, code))
}

/// Run a replicated study. Replicates run in parallel; stream-per-replicate
/// seeding and index-ordered aggregation keep the output identical however
/// they are scheduled.
///
/// # Errors
///
/// Scenario resolution, usage, or summary failures.
pub fn run_simulate(args: &SimulateArgs) -> Result<(SimReport, i32), CliError> {
    let mut sc = scenario::load(&args.scenario)?;
    if let Some(n) = args.n {
        sc.n = n;
    }
    if let Some(reps) = args.reps {
        sc.n_reps = reps;
    }
    if sc.n == 0 || sc.n_reps == 0 {
        return Err(CliError::Usage("scenario needs n > 0 and reps > 0".into()));
    }

    let config = FitConfig::default();
    let outcomes: Vec<ReplicateOutcome> = (0..sc.n_reps)
        .into_par_iter()
        .map(|rep| run_replicate(&sc, &config, args.seed, rep))
        .collect();
    let summary = summarize(&sc, args.seed, &outcomes)?;
    let report = SimReport::from_summary(&summary);

    if let Some(path) = &args.csv {
        std::fs::write(path, report::sim_effects_csv(&report)).map_err(|source| {
            CliError::Write { path: path.display().to_string(), source }
        })?;
    }

    let code = if summary.n_usable == 0 { EXIT_ESTIMATION } else { EXIT_OK };
    Ok((report, code))
}

/// The families a forced `--family` could name, used by help and tests.
pub fn family_names() -> [&'static str; 3] {
    [
        MediatorFamily::LogNormal.name(),
        MediatorFamily::NegBinomial.name(),
        MediatorFamily::Poisson.name(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::FamilyChoice;
    use std::path::PathBuf;

    fn fit_args(input: &str) -> FitArgs {
        FitArgs {
            input: PathBuf::from(input),
            y: "y".into(),
            m: "m".into(),
            x: "x".into(),
            z: vec![],
            family: FamilyChoice::Auto,
            x1: 0.0,
            x2: 1.0,
            cde_m: 0.0,
            ceiling: 20.0,
            ci_level: 0.95,
            seed: 0,
            output: OutputMode::Table,
        }
    }

    #[test]
    fn bad_levels_and_bounds_are_usage_errors() {
        let mut args = fit_args("missing.csv");
        args.ci_level = 1.0;
        let err = run_fit(&args).unwrap_err();
        assert_eq!(err.kind(), "usage");
        assert_eq!(err.exit_code(), EXIT_USAGE);

        let mut args = fit_args("missing.csv");
        args.ceiling = 0.0;
        assert_eq!(run_fit(&args).unwrap_err().kind(), "usage");

        let mut args = fit_args("missing.csv");
        args.cde_m = -2.0;
        assert_eq!(run_fit(&args).unwrap_err().kind(), "usage");
    }

    #[test]
    fn missing_input_is_an_ingestion_error() {
        let err = run_fit(&fit_args("definitely/not/here.csv")).unwrap_err();
        assert_eq!(err.kind(), "ingestion");
        assert_eq!(err.exit_code(), EXIT_USAGE);
    }

    #[test]
    fn unknown_scenario_is_reported_as_such() {
        let args = SimulateArgs {
            scenario: "nope".into(),
            seed: 1,
            n: None,
            reps: None,
            csv: None,
            output: OutputMode::Table,
        };
        let err = run_simulate(&args).unwrap_err();
        assert_eq!(err.kind(), "scenario");
        assert_eq!(err.exit_code(), EXIT_USAGE);
    }

    #[test]
    fn zero_reps_is_a_usage_error() {
        let args = SimulateArgs {
            scenario: "zip".into(),
            seed: 1,
            n: None,
            reps: Some(0),
            csv: None,
            output: OutputMode::Table,
        };
        assert_eq!(run_simulate(&args).unwrap_err().kind(), "usage");
    }

    #[test]
    fn family_labels_match_core_names() {
        assert_eq!(family_names(), ["zilon", "zinb", "zip"]);
    }
}
