use std::fmt::Write;

use crate::scm::{Domain, Expr, Mechanism, NoiseSpec, Scm};

/// Canonical text form: nodes in topological order (ties by name), every
/// domain written out, CPT rows in key order. Re-parsing yields an equal model.
pub fn serialize_scm(scm: &Scm) -> String {
    let order = scm
        .dag()
        .topological_order()
        .expect("serialize_scm requires a valid model");
    let mut out = String::new();
    for node in order {
        let domain = scm.domain(&node).expect("domain");
        let mech = scm.mechanism(&node).expect("mechanism");
        write!(out, "var {node}: {}", domain_text(domain)).unwrap();
        match mech {
            Mechanism::DiscreteCpt(cpt) => {
                out.push_str(" cpt");
                for (k, pmf) in cpt.rows() {
                    out.push_str("\n  |");
                    let assign: Vec<String> = cpt
                        .parents()
                        .iter()
                        .zip(k)
                        .map(|(p, v)| format!("{p}={}", v.0))
                        .collect();
                    if !assign.is_empty() {
                        write!(out, " {}", assign.join(", ")).unwrap();
                    }
                    write!(out, " -> {}", join_numbers(pmf)).unwrap();
                }
            }
            Mechanism::LinearGaussian {
                weights,
                intercept,
                noise_std,
            } => {
                if weights.is_empty() {
                    write!(out, " ~ normal({intercept}, {noise_std})").unwrap();
                } else {
                    out.push_str(" :=");
                    for (i, (p, w)) in weights.iter().enumerate() {
                        let sep = if i == 0 { " " } else { " + " };
                        write!(out, "{sep}{w}*{p}").unwrap();
                    }
                    write!(out, " + {intercept}").unwrap();
                    if *noise_std > 0.0 {
                        write!(out, " + normal(0, {noise_std})").unwrap();
                    }
                }
            }
            Mechanism::Deterministic { expr, noise } => {
                out.push_str(" := ");
                write_expr(&mut out, expr, noise.as_ref());
            }
            Mechanism::Constant(v) => {
                write!(out, " ~ point({v})").unwrap();
            }
        }
        out.push_str(";\n");
    }
    out
}

fn domain_text(domain: &Domain) -> String {
    match domain {
        Domain::Continuous => "real".into(),
        Domain::Discrete(values) => format!("{{{}}}", join_numbers(values)),
    }
}

fn join_numbers(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Binary nodes are always parenthesised so the tree is reproduced exactly.
fn write_expr(out: &mut String, expr: &Expr, noise: Option<&NoiseSpec>) {
    match expr {
        Expr::Num(v) => write!(out, "{v}").unwrap(),
        Expr::Var(n) => out.push_str(n),
        Expr::Noise => match noise {
            Some(spec) => write!(out, "{spec}").unwrap(),
            None => out.push_str("point(0)"),
        },
        Expr::Neg(e) => {
            out.push('-');
            if matches!(**e, Expr::Num(_)) {
                out.push('(');
                write_expr(out, e, noise);
                out.push(')');
            } else {
                write_expr(out, e, noise);
            }
        }
        Expr::Binary(op, l, r) => {
            out.push('(');
            write_expr(out, l, noise);
            write!(out, " {} ", op.symbol()).unwrap();
            write_expr(out, r, noise);
            out.push(')');
        }
        Expr::Call(f, args) => {
            out.push_str(f.name());
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(out, a, noise);
            }
            out.push(')');
        }
    }
}
