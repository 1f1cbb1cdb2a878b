//! Named, seeded experiments that regenerate data, run the relevant
//! estimator or procedure and compare against an oracle at a stated
//! tolerance. One experiment per acceptance criterion.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::panic::{catch_unwind, AssertUnwindSafe};

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dsl::{parse_scm, serialize_scm};
use crate::estimators::{
    estimate_did, estimate_dml, estimate_doubly_robust, estimate_iv_2sls, estimate_ipw, estimate_matching,
    estimate_naive, estimate_rdd, estimate_regression_adjustment, fit_columns, fit_outcome_model, fit_propensity,
    EffectSpec, IvOptions, MatchOptions, OutcomeKind, PropensityKind, RddOptions, DEFAULT_CLIP,
};
use crate::exact::{ate_exact, conditional_difference, interventional_query, joint_table, Query};
use crate::fixtures;
use crate::sampling::{ancestral_sample, Dataset, RngSpec};
use crate::scm::classify_paths;
use crate::trial::{
    fit_contextual, run_replications, run_trial, ContextMode, PolicyMode, Schedule, ScmEnvironment, TrialConfig,
    UpdateMode,
};

/// One comparison against an oracle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Human-readable acceptance condition, e.g. `0.3 ± 0.02`.
    pub expected: String,
    pub passed: bool,
}

impl Check {
    pub fn within(name: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        Check {
            name: name.into(),
            value,
            expected: format!("{} ± {}", short(target), short(tol)),
            passed: (value - target).abs() <= tol,
        }
    }

    pub fn above(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            value,
            expected: format!("> {}", short(bound)),
            passed: value > bound,
        }
    }

    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            value,
            expected: format!("<= {}", short(bound)),
            passed: value <= bound,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            value,
            expected: format!(">= {}", short(bound)),
            passed: value >= bound,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: {} (expected {})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            fmt_value(self.value),
            self.expected
        )
    }
}

fn short(v: f64) -> String {
    if v != 0.0 && v.abs() < 1e-4 {
        format!("{v:e}")
    } else {
        format!("{}", (v * 1e9).round() / 1e9)
    }
}

fn fmt_value(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-4 || v.abs() >= 1e6) {
        format!("{v:.3e}")
    } else {
        format!("{v:.6}")
    }
}

type Run = fn(&RngSpec) -> Result<Vec<Check>, String>;

pub struct Experiment {
    pub id: &'static str,
    pub criterion: u8,
    pub summary: &'static str,
    /// Checks expected to fail because the stated target disagrees with the
    /// model as written, with the reason.
    pub known_failures: &'static [(&'static str, &'static str)],
    run: Run,
}

impl Experiment {
    pub fn run(&self, rng: &RngSpec) -> Result<Vec<Check>, String> {
        (self.run)(&rng.child(u64::from(self.criterion), self.id))
    }
}

pub fn registry() -> &'static [Experiment] {
    &REGISTRY
}

pub fn find(id: &str) -> Option<&'static Experiment> {
    REGISTRY.iter().find(|e| e.id == id)
}

pub fn ids() -> Vec<&'static str> {
    REGISTRY.iter().map(|e| e.id).collect()
}

static REGISTRY: [Experiment; 13] = [
    Experiment {
        id: "model-equivalence",
        criterion: 1,
        summary: "two structurally different Gaussian models and the distribution of v given v'",
        known_failures: &[(
            "model 1: Var[v - v']",
            "both vl and vr add v', so v - v' = v' + a + b + noise and Var[v - v'] = Var(v') + 3 = 4; \
             p(v|v') is N(2v' + a + b, 3) for this model, not N(v' + a + b, 3)",
        )],
        run: model_equivalence,
    },
    Experiment {
        id: "ipw-vs-naive",
        criterion: 2,
        summary: "adjusted estimators recover the vaccine ATE that the naive contrast overstates",
        known_failures: &[],
        run: confounding_gap,
    },
    Experiment {
        id: "do-surgery",
        criterion: 3,
        summary: "interventional queries on random confounder models against the adjustment formula",
        known_failures: &[],
        run: do_surgery,
    },
    Experiment {
        id: "d-separation",
        criterion: 4,
        summary: "path-blocking verdicts against brute-force independence tests on exact joints",
        known_failures: &[],
        run: d_separation,
    },
    Experiment {
        id: "rct-equivalence",
        criterion: 5,
        summary: "an always-exploring trial estimates interventional means",
        known_failures: &[],
        run: rct_equivalence,
    },
    Experiment {
        id: "explore-unbiased",
        criterion: 6,
        summary: "exploration-only estimates stay unbiased while exploitation biases the running ones",
        known_failures: &[],
        run: explore_unbiased,
    },
    Experiment {
        id: "iv-linear",
        criterion: 7,
        summary: "two-stage least squares against confounded OLS",
        known_failures: &[],
        run: iv_linear,
    },
    Experiment {
        id: "did",
        criterion: 8,
        summary: "difference-in-difference removes a group baseline that biases the post-only contrast",
        known_failures: &[],
        run: did,
    },
    Experiment {
        id: "rdd",
        criterion: 9,
        summary: "local linear fits recover a constructed discontinuity",
        known_failures: &[],
        run: rdd,
    },
    Experiment {
        id: "dml",
        criterion: 10,
        summary: "cross-fitted partialling-out on the linear confounded model",
        known_failures: &[],
        run: dml,
    },
    Experiment {
        id: "compositional",
        criterion: 11,
        summary: "additive linear models predict a covariate or action combination never observed",
        known_failures: &[],
        run: compositional,
    },
    Experiment {
        id: "dsl-roundtrip",
        criterion: 12,
        summary: "serialize/parse round-trips on random models and parser fuzzing",
        known_failures: &[],
        run: dsl_roundtrip,
    },
    Experiment {
        id: "cov-discrepancy",
        criterion: 13,
        summary: "covariance of u and v in the shared-parent Gaussian example",
        known_failures: &[],
        run: cov_discrepancy,
    },
];

fn err<E: Display>(e: E) -> String {
    e.to_string()
}

fn mean_var(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    let v = values.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}

fn col<'a>(ds: &'a Dataset, name: &str) -> Result<&'a [f64], String> {
    ds.require(name).map_err(err)
}

fn model_equivalence(rng: &RngSpec) -> Result<Vec<Check>, String> {
    let (a, b) = (1.0, 2.0);
    let mut checks = Vec::new();
    for (i, (label, scm)) in [("model 1", fixtures::two_path_model(a, b)), ("model 2", fixtures::one_path_model(a, b))]
        .into_iter()
        .enumerate()
    {
        let ds = ancestral_sample(&scm, 200_000, &rng.child(i as u64, label)).map_err(err)?;
        let (v, vp) = (col(&ds, "v")?, col(&ds, "v'")?);
        let diff: Vec<f64> = v.iter().zip(vp).map(|(x, y)| x - y).collect();
        let (m, var) = mean_var(&diff);
        checks.push(Check::within(format!("{label}: E[v - v']"), m, a + b, 0.02));
        checks.push(Check::within(format!("{label}: Var[v - v']"), var, 3.0, 0.05));
        // spread of v around its regression on v', which is 3 in both models
        let fit = fit_columns(&["v'".into()], &[vp.to_vec()], v, 0.0).map_err(err)?;
        let resid: Vec<f64> = v.iter().zip(vp).map(|(y, x)| y - fit.predict(&[*x])).collect();
        checks.push(Check::within(format!("{label}: residual variance of v given v'"), mean_var(&resid).1, 3.0, 0.05));
    }
    Ok(checks)
}

fn confounding_gap(rng: &RngSpec) -> Result<Vec<Check>, String> {
    let scm = fixtures::vaccine_toy();
    // p(y=1|do(a)) = Σ_x p(x)(0.1 + 0.3a + 0.5x), so the ATE is 0.3; the
    // naive contrast adds 0.5·(p(x=1|a=1) − p(x=1|a=0)) = 0.5·0.6
    let (ate_oracle, naive_oracle) = (0.3, 0.3 + 0.5 * 0.6);
    let none = BTreeMap::new();
    let mut checks = vec![
        Check::within("exact ATE", ate_exact(&scm, "a", "y", 1.0, 0.0, &none).map_err(err)?, ate_oracle, 1e-12),
        Check::within(
            "exact naive difference",
            conditional_difference(&scm, "a", "y", 1.0, 0.0).map_err(err)?,
            naive_oracle,
            1e-12,
        ),
    ];
    let ds = ancestral_sample(&scm, 100_000, &rng.child(0, "data")).map_err(err)?;
    let spec = EffectSpec::new("a", "y").covariates(&["x"]);
    let prop = fit_propensity(&ds, "a", &["x"], PropensityKind::Table { alpha: 0.0 }, DEFAULT_CLIP).map_err(err)?;
    let outcome = fit_outcome_model(&ds, "a", "y", &["x"], OutcomeKind::Table).map_err(err)?;
    let ra = estimate_regression_adjustment(&ds, &spec, OutcomeKind::Table).map_err(err)?;
    let ipw = estimate_ipw(&ds, &spec, &prop).map_err(err)?;
    let dr = estimate_doubly_robust(&ds, &spec, &outcome, &prop).map_err(err)?;
    let opts = MatchOptions {
        rng: rng.child(0, "matching"),
        ..MatchOptions::default()
    };
    let (_, matched) = estimate_matching(&ds, &spec, &opts).map_err(err)?;
    let naive = estimate_naive(&ds, &spec).map_err(err)?;
    checks.push(Check::within("regression adjustment", ra.estimate, ate_oracle, 0.02));
    checks.push(Check::within("IPW", ipw.estimate, ate_oracle, 0.02));
    checks.push(Check::within("doubly robust", dr.estimate, ate_oracle, 0.02));
    checks.push(Check::within("matching", matched.estimate, ate_oracle, 0.02));
    checks.push(Check::within("naive difference", naive.estimate, naive_oracle, 0.02));
    Ok(checks)
}

fn do_surgery(rng: &RngSpec) -> Result<Vec<Check>, String> {
    let mut r = rng.stream(0, "confounders");
    let mut worst_formula: f64 = 0.0;
    let mut min_gap = f64::INFINITY;
    let mut worst_unconfounded: f64 = 0.0;
    for i in 0..64 {
        let f = fixtures::random_confounder(&mut r, i);
        for arm in [0usize, 1] {
            let a = arm as f64;
            let q = Query::new(["y"]).with_do("a", a);
            let p_do = interventional_query(&f.scm, &q).map_err(err)?.prob(&[1.0]).expect("binary");
            let px = [1.0 - f.p_x1, f.p_x1];
            let hand: f64 = (0..2).map(|x| px[x] * f.p_y1[arm][x]).sum();
            // conditional p(y=1|a) by Bayes on the raw parameters
            let pa = |x: usize| if arm == 1 { f.p_a1[x] } else { 1.0 - f.p_a1[x] };
            let z: f64 = (0..2).map(|x| px[x] * pa(x)).sum();
            let cond: f64 = (0..2).map(|x| px[x] * pa(x) / z * f.p_y1[arm][x]).sum();
            worst_formula = worst_formula.max((p_do - hand).abs());
            if f.confounded() {
                min_gap = min_gap.min((p_do - cond).abs());
            } else {
                worst_unconfounded = worst_unconfounded.max((p_do - cond).abs());
            }
        }
    }
    Ok(vec![
        Check::at_most("max |p(y|do(a)) - Σ_x p(x)p(y|a,x)| over 64 models", worst_formula, 1e-12),
        Check::above("min |p(y|do(a)) - p(y|a)| over confounded models", min_gap, 1e-3),
        Check::at_most("max |p(y|do(a)) - p(y|a)| over unconfounded models", worst_unconfounded, 1e-12),
    ])
}

fn d_separation(rng: &RngSpec) -> Result<Vec<Check>, String> {
    let mut r = rng.stream(0, "dags");
    let mut cases = Vec::new();
    for _ in 0..500 {
        let scm = fixtures::random_binary_scm(&mut r, 5);
        let nodes = scm.nodes().to_vec();
        let i = r.random_range(0..nodes.len());
        let mut j = r.random_range(0..nodes.len() - 1);
        if j >= i {
            j += 1;
        }
        let observed: BTreeSet<String> = nodes
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != i && *k != j && r.random_bool(0.4))
            .map(|(_, n)| n.clone())
            .collect();
        cases.push((scm, nodes[i].clone(), nodes[j].clone(), observed));
    }
    let results: Vec<Result<(bool, bool), String>> = cases
        .par_iter()
        .map(|(scm, u, v, observed)| {
            let verdict = classify_paths(scm.dag(), u, v, observed).map_err(err)?.d_separated;
            let joint = joint_table(scm).map_err(err)?;
            let obs: Vec<&String> = observed.iter().collect();
            let mut independent = true;
            for z in crate::scm::cross_product(&vec![vec![0.0, 1.0]; obs.len()]) {
                let evidence: BTreeMap<String, f64> = obs.iter().map(|n| (*n).clone()).zip(z).collect();
                let pair = joint.query(&[u.clone(), v.clone()], &evidence).map_err(err)?;
                let pu = pair.marginal(&[u.as_str()]).map_err(err)?;
                let pv = pair.marginal(&[v.as_str()]).map_err(err)?;
                for (x, y) in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)] {
                    let lhs = pair.prob(&[x, y]).expect("binary");
                    let rhs = pu.prob(&[x]).expect("binary") * pv.prob(&[y]).expect("binary");
                    if (lhs - rhs).abs() > 1e-9 {
                        independent = false;
                    }
                }
            }
            Ok((verdict, independent))
        })
        .collect();
    let mut agree = 0usize;
    let mut separated = 0usize;
    for res in results {
        let (verdict, independent) = res?;
        agree += usize::from(verdict == independent);
        separated += usize::from(verdict);
    }
    Ok(vec![
        Check::within("agreement with brute-force independence (500 cases)", agree as f64 / 500.0, 1.0, 0.0),
        // both verdicts must occur for the comparison to mean anything
        Check::at_least("d-separated cases", separated as f64, 50.0),
        Check::at_least("d-connected cases", (500 - separated) as f64, 50.0),
    ])
}

fn do_means(scm: &crate::scm::Scm, action: &str, outcome: &str) -> Result<[f64; 2], String> {
    let mut out = [0.0; 2];
    for (a, slot) in out.iter_mut().enumerate() {
        let q = Query::new([outcome]).with_do(action, a as f64);
        *slot = interventional_query(scm, &q).map_err(err)?.expectation(outcome).map_err(err)?;
    }
    Ok(out)
}

fn rct_equivalence(rng: &RngSpec) -> Result<Vec<Check>, String> {
    let scm = fixtures::vaccine_toy();
    let oracle = do_means(&scm, "a", "y")?;
    let env = ScmEnvironment::new(&scm, "a", "y", &[] as &[&str]).map_err(err)?;
    let (state, report) = run_trial(&env, &TrialConfig::rct(100_000), rng).map_err(err)?;
    let mut checks = vec![
        Check::within("E[y|do(a=1)] by enumeration", oracle[1], 0.65, 1e-12),
        Check::within("E[y|do(a=0)] by enumeration", oracle[0], 0.35, 1e-12),
    ];
    for (i, arm) in state.arms().iter().enumerate() {
        let a = state.actions()[i] as usize;
        checks.push(Check::within(format!("trial estimate for a={a}"), arm.estimate, oracle[a], 0.02));
        let b = report.arms[i].bias.unwrap_or(f64::INFINITY);
        checks.push(Check::at_most(format!("bias check for a={a}"), b, 1e-4));
    }
    Ok(checks)
}

fn explore_unbiased(rng: &RngSpec) -> Result<Vec<Check>, String> {
    let scm = parse_scm(fixtures::CONFOUNDED_ASSIGNMENT).map_err(|e| format!("{e:?}"))?;
    let oracle = do_means(&scm, "a", "y")?;
    let env = ScmEnvironment::new(&scm, "a", "y", &["x"]).map_err(err)?;
    let config = TrialConfig {
        steps: 2000,
        epsilon: Schedule::Geometric {
            start: 1.0,
            decay: 0.998,
            floor: 0.05,
        },
        beta: Schedule::Constant(0.0),
        mode: UpdateMode::RecursiveMean,
        policy: PolicyMode::Conditional,
    };
    let reps = run_replications(&env, &config, rng, 200).map_err(err)?;
    let mut checks = Vec::new();
    for a in [0usize, 1] {
        let i = reps[0].action_index(a as f64).expect("binary action");
        let tilde: Vec<f64> = reps.iter().map(|s| s.arms()[i].explore_estimate).collect();
        let (m, var) = mean_var(&tilde);
        let se = (var / tilde.len() as f64).sqrt();
        checks.push(Check::at_most(
            format!("a={a}: |mean explore-only estimate - E[y|do(a)]| in standard errors"),
            (m - oracle[a]).abs() / se,
            3.0,
        ));
        let biased = reps
            .iter()
            .filter(|s| s.bias_check().arms[i].is_some_and(|b| b > 0.0))
            .count();
        checks.push(Check::at_least(format!("a={a}: replications with nonzero bias check"), biased as f64, 150.0));
    }
    let hat: Vec<f64> = reps.iter().map(|s| s.arms()[1].estimate).collect();
    checks.push(Check::above(
        "a=1: |mean running estimate - E[y|do(a)]|",
        (mean_var(&hat).0 - oracle[1]).abs(),
        0.05,
    ));
    Ok(checks)
}

fn iv_data(rng: &RngSpec) -> Result<Dataset, String> {
    ancestral_sample(&fixtures::iv_linear(), 200_000, &rng.child(0, "iv-data")).map_err(err)
}

fn iv_linear(rng: &RngSpec) -> Result<Vec<Check>, String> {
    let ds = iv_data(rng)?;
    // a = γx + ψz + ε and y = αa + βx + ε with unit variances
    let (alpha, beta, gamma, psi) = (2.0, 3.0, 1.0, 1.0);
    let ols_oracle = alpha + beta * gamma / (gamma * gamma + psi * psi + 1.0);
    let iv = estimate_iv_2sls(&ds, "a", "y", "z", &IvOptions::default()).map_err(err)?;
    let ols = fit_columns(&["a".into()], &[col(&ds, "a")?.to_vec()], col(&ds, "y")?, 0.0).map_err(err)?;
    Ok(vec![
        Check::within("2SLS slope", iv.estimate, alpha, 0.05),
        Check::within("OLS slope", ols.weight("a"), ols_oracle, 0.05),
    ])
}

fn did(rng: &RngSpec) -> Result<Vec<Check>, String> {
    let ds = ancestral_sample(&fixtures::did_model(), 100_000, rng).map_err(err)?;
    let r = estimate_did(&ds, "a", "y_pre", "y_post").map_err(err)?;
    let naive = r.diagnostic("naive_post").expect("reported");
    // p(x>0 | a=1) = 3/4 and p(x>0 | a=0) = 1/4 for independent standard normals
    let naive_oracle = 1.0 + 5.0 * (0.75 - 0.25);
    Ok(vec![
        Check::within("difference-in-difference", r.estimate, 1.0, 0.05),
        Check::above("post-only naive difference", naive, 1.5),
        Check::within("post-only naive difference vs closed form", naive, naive_oracle, 0.1),
    ])
}

fn rdd(rng: &RngSpec) -> Result<Vec<Check>, String> {
    let ds = ancestral_sample(&fixtures::rdd_model(), 50_000, rng).map_err(err)?;
    let opts = RddOptions {
        threshold: 0.0,
        bandwidth: 0.5,
        degree: 1,
    };
    let jump = estimate_rdd(&ds, "x", "y", &opts).map_err(err)?;
    let smooth = estimate_rdd(&ds, "x", "y_smooth", &opts).map_err(err)?;
    Ok(vec![
        Check::within("jump of 2", jump.estimate, 2.0, 0.05),
        Check::within("no jump", smooth.estimate, 0.0, 0.05),
    ])
}

fn dml(rng: &RngSpec) -> Result<Vec<Check>, String> {
    let ds = iv_data(rng)?;
    let spec = EffectSpec::new("a", "y").covariates(&["x"]);
    let r = estimate_dml(&ds, &spec, 5, &rng.child(0, "folds")).map_err(err)?;
    Ok(vec![Check::within("cross-fitted slope", r.estimate, 2.0, 0.05)])
}

fn compositional(rng: &RngSpec) -> Result<Vec<Check>, String> {
    let habits = parse_scm(fixtures::TWO_HABITS).map_err(|e| format!("{e:?}"))?;
    let env = ScmEnvironment::new(&habits, "a", "y", &["smoke", "jog"]).map_err(err)?;
    let (state, _) = run_trial(&env, &TrialConfig::rct(20_000), &rng.child(0, "habits")).map_err(err)?;
    let log = state.log_dataset("a", "y").map_err(err)?;
    let both = state
        .log()
        .iter()
        .filter(|e| e.covariates == [1.0, 1.0])
        .count();
    let model = fit_contextual(&log, "y", ContextMode::Covariate {
        action: "a",
        covariates: &["smoke", "jog"],
    })
    .map_err(err)?;
    let mut checks = vec![Check::at_most("trial rows with both habits", both as f64, 0.0)];
    for a in [0.0, 1.0] {
        let truth = 1.0 + 0.8 * a - 1.5 + 0.7;
        let pred = model.predict_arm(a, &[1.0, 1.0]).ok_or("missing arm model")?;
        checks.push(Check::within(format!("a={a}: prediction for smoke=1, jog=1"), pred, truth, 0.05));
    }

    let seasoning = parse_scm(fixtures::SEASONING).map_err(|e| format!("{e:?}"))?;
    let ds = ancestral_sample(&seasoning, 20_000, &rng.child(0, "seasoning")).map_err(err)?;
    let shared = fit_contextual(&ds, "y", ContextMode::ActionContext {
        features: &["salt", "pepper"],
    })
    .map_err(err)?;
    let pred = shared.predict_context(&[1.0, 1.0]).ok_or("missing shared model")?;
    checks.push(Check::within("salt and pepper together", pred, 2.0 + 1.0 + 0.5, 0.05));
    Ok(checks)
}

const FUZZ_TOKENS: [&str; 36] = [
    "var", "x", "y", ":", "{", "}", "0", "1", "-1", ",", ";", "~", "normal", "bernoulli", "uniform", "point", "(", ")",
    "cpt", "|", "->", "=", ":=", "+", "*", "/", "-", "real", "#", "\n", "edges", "ind", "max", "1e400", "nan", ">=",
];

fn fuzz_input(r: &mut impl Rng) -> String {
    if r.random_bool(0.5) {
        let len = r.random_range(0..48);
        let bytes: Vec<u8> = (0..len).map(|_| r.random()).collect();
        String::from_utf8_lossy(&bytes).into_owned()
    } else {
        let len = r.random_range(0..24);
        (0..len)
            .map(|_| FUZZ_TOKENS[r.random_range(0..FUZZ_TOKENS.len())])
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn dsl_roundtrip(rng: &RngSpec) -> Result<Vec<Check>, String> {
    let mut r = rng.stream(0, "models");
    let mut equal = 0usize;
    for _ in 0..1000 {
        let scm = fixtures::random_scm(&mut r, 6);
        let text = serialize_scm(&scm);
        if parse_scm(&text).is_ok_and(|back| back == scm) {
            equal += 1;
        }
    }
    const FUZZ: u64 = 1_000_000;
    const CHUNK: u64 = 10_000;
    let crashes: usize = (0..FUZZ / CHUNK)
        .into_par_iter()
        .map(|c| {
            let mut r = rng.stream(c, "fuzz");
            (0..CHUNK)
                .filter(|_| {
                    let input = fuzz_input(&mut r);
                    catch_unwind(AssertUnwindSafe(|| {
                        let _ = parse_scm(&input);
                    }))
                    .is_err()
                })
                .count()
        })
        .sum();
    Ok(vec![
        Check::within("models surviving a round-trip (of 1000)", equal as f64, 1000.0, 0.0),
        Check::within("parser crashes on 1e6 fuzz inputs", crashes as f64, 0.0, 0.0),
    ])
}

fn cov_discrepancy(rng: &RngSpec) -> Result<Vec<Check>, String> {
    let ds = ancestral_sample(&fixtures::covariance_example(), 1_000_000, rng).map_err(err)?;
    let (u, v) = (col(&ds, "u")?, col(&ds, "v")?);
    let n = u.len() as f64;
    let (mu, mv) = (u.iter().sum::<f64>() / n, v.iter().sum::<f64>() / n);
    let cov = u.iter().zip(v).map(|(a, b)| (a - mu) * (b - mv)).sum::<f64>() / (n - 1.0);
    // Var(u) = 0.2² + 1.04, cov(u, v) = 0.1·Var(u) − 0.5·cov(u, z)
    let oracle = 0.1 * (0.04 + 1.04) - 0.5 * 0.2;
    Ok(vec![Check::within("cov(u, v)", cov, oracle, 0.003)])
}
