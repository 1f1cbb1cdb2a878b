use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::BufReader;
use std::path::Path;

use causal_kit::dsl::parse_scm;
use causal_kit::estimators::{
    estimate_did, estimate_dml, estimate_doubly_robust, estimate_iv_2sls, estimate_ipw, estimate_matching,
    estimate_naive, estimate_ols, estimate_rdd, estimate_regression_adjustment, fit_outcome_model, fit_propensity,
    Bootstrap, Distance, EffectSpec, EstimateError, EstimateReport, IvOptions, MatchMode, MatchOptions, OutcomeKind,
    PropensityKind, RddOptions, Selection,
};
use causal_kit::exact::{ate_exact, conditional_difference, interventional_query, Query};
use causal_kit::experiments::{self, Experiment};
use causal_kit::sampling::{ancestral_sample, rejection_condition, Dataset, Predicate, RngSpec};
use causal_kit::scm::Scm;
use causal_kit::trial::{run_trial, PolicyMode, ScmEnvironment, TrialConfig, UpdateMode};
use serde_json::{json, Value};

use crate::args::{
    AteArgs, Cli, Command, DistanceArg, EstimateArgs, ExactArgs, Format, MethodArg, OutcomeArg, PolicyArg,
    PropensityArg, ReproArgs, SampleArgs, SelectionArg, TrialArgs,
};
use crate::{CliError, CliResult, Output};

pub fn run(cli: &Cli) -> CliResult<Output> {
    let rng = RngSpec::new(cli.seed);
    match &cli.command {
        Command::Validate { model } => validate(model, cli.format),
        Command::Sample(a) => sample(a, &rng, cli.format.unwrap_or(Format::Csv)).map(Output::ok),
        Command::Exact(a) => exact(a, cli.format.unwrap_or(Format::Json)).map(Output::ok),
        Command::Ate(a) => json_only("ate", cli.format).and_then(|_| ate(a)).map(Output::ok),
        Command::Estimate(a) => json_only("estimate", cli.format).and_then(|_| estimate(a, &rng)).map(Output::ok),
        Command::Trial(a) => json_only("trial", cli.format).and_then(|_| trial(a, &rng)).map(Output::ok),
        Command::Repro(a) => repro(a, &rng, cli.format),
    }
}

fn json_only(command: &str, format: Option<Format>) -> CliResult<()> {
    match format {
        Some(Format::Csv) => Err(CliError::Usage(format!("`{command}` only writes JSON"))),
        _ => Ok(()),
    }
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json serializes")
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Domain(format!("cannot read `{}`: {e}", path.display())))
}

fn load_model(path: &Path) -> CliResult<Scm> {
    let src = read_text(path)?;
    parse_scm(&src).map_err(|errs| {
        let lines: Vec<String> = errs.iter().map(|e| format!("{}:{e}", path.display())).collect();
        CliError::Domain(format!("invalid model\n{}", lines.join("\n")))
    })
}

fn load_data(path: &Path) -> CliResult<Dataset> {
    let file = fs::File::open(path).map_err(|e| CliError::Domain(format!("cannot read `{}`: {e}", path.display())))?;
    Dataset::read_csv(BufReader::new(file)).map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))
}

fn validate(path: &Path, format: Option<Format>) -> CliResult<Output> {
    let src = read_text(path)?;
    let parsed = parse_scm(&src);
    if format == Some(Format::Json) {
        let v = match &parsed {
            Ok(scm) => json!({
                "valid": true,
                "nodes": scm.nodes(),
                "edges": scm.dag().edges().iter().map(|(a, b)| [a, b]).collect::<Vec<_>>(),
                "errors": [],
            }),
            Err(errs) => json!({ "valid": false, "nodes": [], "edges": [], "errors": errs }),
        };
        return Ok(Output {
            text: pretty(&v),
            ok: parsed.is_ok(),
        });
    }
    match parsed {
        Ok(_) => Ok(Output::ok("OK".into())),
        Err(errs) => {
            for e in &errs {
                eprintln!("{}:{e}", path.display());
            }
            Err(CliError::Domain(format!("{} error(s) in `{}`", errs.len(), path.display())))
        }
    }
}

fn sample(a: &SampleArgs, rng: &RngSpec, format: Format) -> CliResult<String> {
    let mut scm = load_model(&a.model)?;
    if !a.interventions.is_empty() {
        let map: BTreeMap<String, f64> = a.interventions.iter().cloned().collect();
        scm = scm.do_surgery(&map).map_err(CliError::domain)?;
    }
    let ds = if a.given.is_empty() {
        ancestral_sample(&scm, a.n, rng)
    } else {
        let evidence: BTreeMap<String, Predicate> = a
            .given
            .iter()
            .map(|(k, v)| (k.clone(), Predicate::Eq { value: *v }))
            .collect();
        rejection_condition(&scm, &evidence, a.n, rng, a.max_draws)
    }
    .map_err(CliError::domain)?;
    Ok(match format {
        Format::Csv => ds.to_csv_string(),
        Format::Json => {
            let rows: Vec<Vec<f64>> = (0..ds.n_rows()).map(|r| ds.row(r)).collect();
            pretty(&json!({ "columns": ds.columns(), "rows": rows, "provenance": ds.provenance() }))
        }
    })
}

fn exact(a: &ExactArgs, format: Format) -> CliResult<String> {
    let scm = load_model(&a.model)?;
    let mut q = Query::new(a.target.iter().cloned());
    for (k, v) in &a.given {
        q = q.given(k, *v);
    }
    for (k, v) in &a.interventions {
        q = q.with_do(k, *v);
    }
    let table = interventional_query(&scm, &q).map_err(CliError::domain)?;
    Ok(match format {
        Format::Csv => table.to_csv_string(),
        Format::Json => {
            let mut v = table.to_json();
            v["given"] = json!(a.given.iter().cloned().collect::<BTreeMap<_, _>>());
            v["do"] = json!(a.interventions.iter().cloned().collect::<BTreeMap<_, _>>());
            pretty(&v)
        }
    })
}

fn ate(a: &AteArgs) -> CliResult<String> {
    let scm = load_model(&a.model)?;
    let given: BTreeMap<String, f64> = a.given.iter().cloned().collect();
    let estimate = ate_exact(&scm, &a.action, &a.outcome, a.treated, a.control, &given).map_err(CliError::domain)?;
    // the unadjusted contrast is only comparable without conditioning
    let naive = if given.is_empty() {
        Some(conditional_difference(&scm, &a.action, &a.outcome, a.treated, a.control).map_err(CliError::domain)?)
    } else {
        None
    };
    Ok(pretty(&json!({
        "action": a.action,
        "outcome": a.outcome,
        "treated": a.treated,
        "control": a.control,
        "given": given,
        "estimate": estimate,
        "naive_difference": naive,
    })))
}

fn need<'a>(value: &'a Option<String>, flag: &str, method: &str) -> CliResult<&'a str> {
    value
        .as_deref()
        .ok_or_else(|| CliError::Usage(format!("`estimate {method}` requires --{flag}")))
}

fn method_name(m: MethodArg) -> &'static str {
    match m {
        MethodArg::Regression => "regression",
        MethodArg::Naive => "naive",
        MethodArg::Ols => "ols",
        MethodArg::Ipw => "ipw",
        MethodArg::Dr => "dr",
        MethodArg::Matching => "matching",
        MethodArg::Iv => "iv",
        MethodArg::Did => "did",
        MethodArg::Rdd => "rdd",
        MethodArg::Dml => "dml",
    }
}

fn estimate(a: &EstimateArgs, rng: &RngSpec) -> CliResult<String> {
    let name = method_name(a.method);
    // check flags before touching the data so usage errors come first
    let action = match a.method {
        MethodArg::Rdd => a.action.clone().unwrap_or_default(),
        _ => need(&a.action, "action", name)?.to_string(),
    };
    match a.method {
        MethodArg::Iv => {
            need(&a.instrument, "instrument", name)?;
        }
        MethodArg::Did => {
            need(&a.pre, "pre", name)?;
        }
        MethodArg::Rdd => {
            need(&a.running, "running", name)?;
        }
        _ => {}
    }
    let data = load_data(&a.data)?;
    let covs: Vec<&str> = a.covariates.iter().map(String::as_str).collect();
    let spec = EffectSpec::new(&action, &a.outcome)
        .covariates(&covs)
        .arms(a.treated, a.control);

    let run = |d: &Dataset, r: &RngSpec| -> Result<EstimateReport, EstimateError> {
        let propensity = || {
            let kind = match a.propensity {
                PropensityArg::Table => PropensityKind::Table { alpha: a.alpha },
                PropensityArg::Logistic => PropensityKind::Logistic,
            };
            fit_propensity(d, &action, &covs, kind, a.clip)
        };
        let outcome_kind = match a.outcome_model {
            OutcomeArg::Table => OutcomeKind::Table,
            OutcomeArg::Linear => OutcomeKind::Linear,
        };
        match a.method {
            MethodArg::Regression => estimate_regression_adjustment(d, &spec, outcome_kind),
            MethodArg::Naive => estimate_naive(d, &spec),
            MethodArg::Ols => estimate_ols(d, &spec),
            MethodArg::Ipw => estimate_ipw(d, &spec, &propensity()?),
            MethodArg::Dr => {
                let outcome = fit_outcome_model(d, &action, &a.outcome, &covs, outcome_kind)?;
                estimate_doubly_robust(d, &spec, &outcome, &propensity()?)
            }
            MethodArg::Matching => {
                let mode = match a.match_epsilon {
                    None => MatchMode::Exact,
                    Some(epsilon) => MatchMode::Epsilon {
                        distance: match a.distance {
                            DistanceArg::Euclidean => Distance::Euclidean,
                            DistanceArg::Manhattan => Distance::Manhattan,
                            DistanceArg::Chebyshev => Distance::Chebyshev,
                        },
                        epsilon,
                    },
                };
                let opts = MatchOptions {
                    ratio: a.ratio,
                    mode,
                    selection: match a.selection {
                        SelectionArg::Random => Selection::Random,
                        SelectionArg::RoundRobin => Selection::RoundRobin,
                    },
                    rng: r.child(0, "matching"),
                };
                estimate_matching(d, &spec, &opts).map(|(_, report)| report)
            }
            MethodArg::Iv => {
                let opts = IvOptions {
                    r2_floor: a.r2_floor,
                    impute_instrument: a.impute_instrument,
                };
                estimate_iv_2sls(d, &action, &a.outcome, a.instrument.as_deref().unwrap_or_default(), &opts)
            }
            MethodArg::Did => estimate_did(d, &action, a.pre.as_deref().unwrap_or_default(), &a.outcome),
            MethodArg::Rdd => {
                let opts = RddOptions {
                    threshold: a.threshold,
                    bandwidth: a.bandwidth,
                    degree: a.degree,
                };
                estimate_rdd(d, a.running.as_deref().unwrap_or_default(), &a.outcome, &opts)
            }
            MethodArg::Dml => estimate_dml(d, &spec, a.folds, &r.child(0, "dml")),
        }
    };

    let report = run(&data, rng).map_err(CliError::domain)?;
    let report = Bootstrap::new(a.bootstrap, rng.child(0, "bootstrap"))
        .attach(report, &data, |d, r| run(d, r).map(|rep| rep.estimate));
    Ok(report.to_json())
}

fn trial(a: &TrialArgs, rng: &RngSpec) -> CliResult<String> {
    let scm = load_model(&a.model)?;
    let env = ScmEnvironment::new(&scm, &a.action, &a.outcome, &a.covariates).map_err(CliError::domain)?;
    let config = TrialConfig {
        steps: a.steps,
        epsilon: a.schedule_eps,
        beta: a.schedule_beta,
        mode: a.ema.map_or(UpdateMode::RecursiveMean, UpdateMode::Ema),
        policy: match a.policy {
            PolicyArg::Marginal => PolicyMode::Marginal,
            PolicyArg::Conditional => PolicyMode::Conditional,
        },
    };
    let (state, report) = run_trial(&env, &config, rng).map_err(CliError::domain)?;
    if let Some(path) = &a.log {
        let log = state.log_dataset(&a.action, &a.outcome).map_err(CliError::domain)?;
        fs::write(path, log.to_csv_string())
            .map_err(|e| CliError::Domain(format!("cannot write `{}`: {e}", path.display())))?;
    }
    Ok(report.to_json())
}

fn repro(a: &ReproArgs, rng: &RngSpec, format: Option<Format>) -> CliResult<Output> {
    if a.list {
        let lines: Vec<String> = experiments::registry()
            .iter()
            .map(|e| format!("{:>2}  {:<18} {}", e.criterion, e.id, e.summary))
            .collect();
        return Ok(Output::ok(lines.join("\n")));
    }
    let id = a.id.as_deref().expect("clap requires an id without --list");
    let selected: Vec<&Experiment> = if id == "all" {
        experiments::registry().iter().collect()
    } else {
        vec![experiments::find(id).ok_or_else(|| {
            CliError::Usage(format!(
                "unknown experiment `{id}`; available: all, {}",
                experiments::ids().join(", ")
            ))
        })?]
    };

    let mut ok = true;
    let mut text = Vec::new();
    let mut records = Vec::new();
    let mut csv_rows = vec!["experiment,check,value,expected,passed".to_string()];
    for exp in selected {
        let checks = exp.run(rng).map_err(|e| CliError::Domain(format!("{}: {e}", exp.id)))?;
        let known: BTreeSet<&str> = exp.known_failures.iter().map(|(n, _)| *n).collect();
        let failed: BTreeSet<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        ok &= failed == known;
        text.push(format!(
            "{} {} (criterion {})",
            if failed.is_empty() { "PASS" } else { "FAIL" },
            exp.id,
            exp.criterion
        ));
        for c in &checks {
            text.push(format!("  {}", c.line()));
            csv_rows.push(format!(
                "{},\"{}\",{},\"{}\",{}",
                exp.id,
                c.name.replace('"', "\"\""),
                c.value,
                c.expected,
                c.passed
            ));
        }
        for (name, why) in exp.known_failures {
            text.push(format!("  known issue `{name}`: {why}"));
        }
        records.push(json!({
            "id": exp.id,
            "criterion": exp.criterion,
            "summary": exp.summary,
            "passed": failed.is_empty(),
            "checks": checks,
            "known_failures": exp.known_failures.iter()
                .map(|(n, why)| json!({ "check": n, "reason": why }))
                .collect::<Vec<_>>(),
        }));
    }
    let text = match format {
        None => text.join("\n"),
        Some(Format::Json) => pretty(&json!({ "seed": rng.seed, "experiments": records })),
        Some(Format::Csv) => csv_rows.join("\n"),
    };
    Ok(Output { text, ok })
}
