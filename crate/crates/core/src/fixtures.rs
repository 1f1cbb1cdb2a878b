//! Reference models and seeded random model generators used by the
//! experiments, the CLI `repro` command and the test suites.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::dsl::parse_scm;
use crate::scm::{BinOp, Cpt, Domain, Expr, Func, Mechanism, NoiseSpec, Scm};

/// Binary confounder `x`, treatment `a`, outcome `y`:
/// p(x=1)=0.5, p(a=1|x)=0.2+0.6x, p(y=1|a,x)=0.1+0.3a+0.5x.
pub const VACCINE_TOY: &str = "\
# x: pre-existing condition, a: vaccinated, y: recovered
var x: {0, 1} ~ bernoulli(0.5);
var a: {0, 1} cpt
  | x=0 -> 0.8, 0.2
  | x=1 -> 0.2, 0.8;
var y: {0, 1} cpt
  | a=0, x=0 -> 0.9, 0.1
  | a=0, x=1 -> 0.4, 0.6
  | a=1, x=0 -> 0.6, 0.4
  | a=1, x=1 -> 0.1, 0.9;
";

pub fn vaccine_toy() -> Scm {
    parse_scm(VACCINE_TOY).expect("fixture parses")
}

fn parse(src: &str) -> Scm {
    parse_scm(src).unwrap_or_else(|e| panic!("fixture does not parse: {e:?}\n{src}"))
}

/// Two parallel paths from `v'` to `v`, offset by `a` and `b`.
pub fn two_path_model(a: f64, b: f64) -> Scm {
    parse(&format!(
        "var v' ~ normal(0, 1);
         var vl := v' + {a} + normal(0, 1);
         var vr := v' + {b} + normal(0, 1);
         var v := vl + vr + normal(0, 1);"
    ))
}

/// One path from `v'` to `v` through a single mediator with variance-2 noise.
pub fn one_path_model(a: f64, b: f64) -> Scm {
    parse(&format!(
        "var v' ~ normal(0, 1);
         var vc := v' + {a} + {b} + normal(0, {});
         var v := vc + normal(0, 1);",
        2f64.sqrt()
    ))
}

/// `u` and `v` share the parent `z`; `u` also drives `v` directly.
pub fn covariance_example() -> Scm {
    parse(&format!(
        "var z ~ normal(0, 1);
         var u := 0.2*z + normal(0, {});
         var v := 0.1*u - 0.5*z + normal(0, 0.1);",
        1.04f64.sqrt()
    ))
}

/// Linear confounded model with instrument `z`: a = x + z + ε, y = 2a + 3x + ε.
pub fn iv_linear() -> Scm {
    parse(
        "var x ~ normal(0, 1);
         var z ~ normal(0, 1);
         var a := x + z + normal(0, 1);
         var y := 2*a + 3*x + normal(0, 1);",
    )
}

/// Group membership `a` depends on `x`, and `x > 0` adds a baseline of 5 to
/// both outcome periods; treatment adds 1 to the post period only.
pub fn did_model() -> Scm {
    parse(
        "var x ~ normal(0, 1);
         var a := ind(x + normal(0, 1));
         var y_pre := 5*(x > 0) + normal(0, 1);
         var y_post := 5*(x > 0) + 1*a + normal(0, 1);",
    )
}

/// Outcome jumps by 2 at `x = 0`; `y_smooth` has no jump.
pub fn rdd_model() -> Scm {
    parse(
        "var x ~ normal(0, 1);
         var y := x + 2*(x >= 0) + normal(0, 0.1);
         var y_smooth := x*x + normal(0, 0.1);",
    )
}

/// Effect sign depends on `x`: treatment helps when x=1 and hurts when x=0,
/// so a policy that conditions on `x` assigns treatment by `x`.
pub const CONFOUNDED_ASSIGNMENT: &str = "\
var x: {0, 1} ~ bernoulli(0.5);
var a: {0, 1} ~ bernoulli(0.5);
var y: {0, 1} cpt
  | a=0, x=0 -> 0.5, 0.5
  | a=1, x=0 -> 0.8, 0.2
  | a=0, x=1 -> 0.4, 0.6
  | a=1, x=1 -> 0.05, 0.95;
";

/// Treatment only works for participants with the marker `m`.
pub const MARKER_EFFECT: &str = "\
var m: {0, 1} ~ bernoulli(0.3);
var a: {0, 1} ~ bernoulli(0.5);
var y: {0, 1} cpt
  | a=0, m=0 -> 0.7, 0.3
  | a=1, m=0 -> 0.7, 0.3
  | a=0, m=1 -> 0.8, 0.2
  | a=1, m=1 -> 0.3, 0.7;
";

/// Additive habits: nobody has both; y = 1 + 0.8a − 1.5 smoke + 0.7 jog + ε.
pub const TWO_HABITS: &str = "\
var habit: {0, 1, 2} ~ uniform(0, 1, 2);
var smoke: {0, 1} := habit == 1;
var jog: {0, 1} := habit == 2;
var a: {0, 1} ~ bernoulli(0.5);
var y := 1 + 0.8*a - 1.5*smoke + 0.7*jog + normal(0, 0.5);
";

/// Dish seasoned with nothing, salt or pepper (never both):
/// y = 2 + salt + 0.5 pepper + ε.
pub const SEASONING: &str = "\
var dish: {0, 1, 2} ~ uniform(0, 1, 2);
var salt: {0, 1} := dish == 1;
var pepper: {0, 1} := dish == 2;
var y := 2 + 1*salt + 0.5*pepper + normal(0, 0.3);
";

/// Parameters of a binary confounder model x → a → y, x → y.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfounderFixture {
    pub p_x1: f64,
    /// p(a=1 | x) for x = 0, 1.
    pub p_a1: [f64; 2],
    /// p(y=1 | a, x) indexed `[a][x]`.
    pub p_y1: [[f64; 2]; 2],
    pub scm: Scm,
}

impl ConfounderFixture {
    /// Whether the action depends on the confounder at all.
    pub fn confounded(&self) -> bool {
        self.p_a1[0] != self.p_a1[1]
    }
}

/// Random x/a/y confounder model. Every fourth draw makes `a` independent of
/// `x`; otherwise both the x→a and x→y dependencies are pronounced.
pub fn random_confounder(rng: &mut ChaCha8Rng, index: usize) -> ConfounderFixture {
    let p_x1 = rng.random_range(0.2..0.8);
    let p_a1 = if index % 4 == 3 {
        let p = rng.random_range(0.1..0.9);
        [p, p]
    } else {
        let (lo, hi) = (rng.random_range(0.05..0.45), rng.random_range(0.55..0.95));
        if rng.random::<bool>() {
            [lo, hi]
        } else {
            [hi, lo]
        }
    };
    let mut p_y1 = [[0.0; 2]; 2];
    for row in &mut p_y1 {
        row[0] = rng.random_range(0.05..0.4);
        row[1] = rng.random_range(0.6..0.95);
    }
    let src = format!(
        "var x: {{0,1}} ~ bernoulli({p_x1});
         var a: {{0,1}} cpt | x=0 -> {}, {} | x=1 -> {}, {};
         var y: {{0,1}} cpt
           | a=0, x=0 -> {}, {} | a=0, x=1 -> {}, {}
           | a=1, x=0 -> {}, {} | a=1, x=1 -> {}, {};",
        1.0 - p_a1[0],
        p_a1[0],
        1.0 - p_a1[1],
        p_a1[1],
        1.0 - p_y1[0][0],
        p_y1[0][0],
        1.0 - p_y1[0][1],
        p_y1[0][1],
        1.0 - p_y1[1][0],
        p_y1[1][0],
        1.0 - p_y1[1][1],
        p_y1[1][1],
    );
    ConfounderFixture {
        p_x1,
        p_a1,
        p_y1,
        scm: parse(&src),
    }
}

/// Random DAG over binary nodes `n0..n{k-1}` (2 ≤ k ≤ max_nodes) with CPT
/// entries drawn from U(0.05, 0.95).
pub fn random_binary_scm(rng: &mut ChaCha8Rng, max_nodes: usize) -> Scm {
    let k = rng.random_range(2..=max_nodes.max(2));
    let names: Vec<String> = (0..k).map(|i| format!("n{i}")).collect();
    let mut nodes = Vec::new();
    for j in 0..k {
        let parents: Vec<String> = (0..j).filter(|_| rng.random_bool(0.5)).map(|i| names[i].clone()).collect();
        let rows = crate::scm::cross_product(&vec![vec![0.0, 1.0]; parents.len()])
            .into_iter()
            .map(|pa| {
                let p = rng.random_range(0.05..0.95);
                (pa, vec![1.0 - p, p])
            })
            .collect();
        nodes.push((names[j].clone(), Domain::binary(), Mechanism::DiscreteCpt(Cpt::new(parents, rows))));
    }
    Scm::from_nodes(nodes).expect("generated model is valid")
}

const NAME_POOL: [&str; 10] = ["x", "y", "z", "a", "b", "u", "v'", "w_1", "t2", "dose"];

/// Random model mixing every mechanism kind, for serializer round-trips.
/// Models have 1..=max_nodes nodes (at most 10).
pub fn random_scm(rng: &mut ChaCha8Rng, max_nodes: usize) -> Scm {
    let k = rng.random_range(1..=max_nodes.clamp(1, NAME_POOL.len()));
    let mut names: Vec<&str> = NAME_POOL.to_vec();
    names.shuffle(rng);
    let mut nodes: Vec<(String, Domain, Mechanism)> = Vec::new();
    for (j, name) in names.iter().take(k).enumerate() {
        let earlier = &nodes[..j];
        let (domain, mech) = match rng.random_range(0..4) {
            0 => random_cpt(rng, earlier),
            1 => {
                let mut weights = std::collections::BTreeMap::new();
                for (n, _, _) in earlier {
                    if rng.random_bool(0.5) {
                        weights.insert(n.clone(), random_number(rng));
                    }
                }
                let noise_std = if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.01..3.0) };
                let mech = Mechanism::LinearGaussian {
                    weights,
                    intercept: random_number(rng),
                    noise_std,
                };
                (Domain::Continuous, mech)
            }
            2 => {
                let vars: Vec<String> = earlier.iter().map(|(n, _, _)| n.clone()).collect();
                let mut expr = random_expr(rng, &vars, 3);
                let noise = rng.random_bool(0.5).then(|| random_noise(rng));
                if noise.is_some() {
                    expr = insert_noise(rng, expr);
                }
                (Domain::Continuous, Mechanism::from_expr(expr, noise))
            }
            _ => {
                let v = random_number(rng);
                let domain = if rng.random_bool(0.5) {
                    Domain::Continuous
                } else {
                    Domain::Discrete(vec![v])
                };
                (domain, Mechanism::Constant(v))
            }
        };
        nodes.push((name.to_string(), domain, mech));
    }
    Scm::from_nodes(nodes).expect("generated model is valid")
}

fn random_number(rng: &mut ChaCha8Rng) -> f64 {
    match rng.random_range(0..3) {
        0 => rng.random_range(-5..=5) as f64,
        1 => rng.random_range(-40..=40) as f64 / 8.0,
        _ => rng.random_range(-4.0..4.0),
    }
}

fn random_cpt(rng: &mut ChaCha8Rng, earlier: &[(String, Domain, Mechanism)]) -> (Domain, Mechanism) {
    const VALUES: [f64; 5] = [0.0, 1.0, 2.0, -1.0, 0.5];
    let size = rng.random_range(2..=3);
    let mut values: Vec<f64> = VALUES.to_vec();
    values.shuffle(rng);
    values.truncate(size);
    let candidates: Vec<(&String, &Vec<f64>)> = earlier
        .iter()
        .filter_map(|(n, d, _)| match d {
            Domain::Discrete(v) => Some((n, v)),
            Domain::Continuous => None,
        })
        .collect();
    let mut parents: Vec<(&String, &Vec<f64>)> = candidates.into_iter().filter(|_| rng.random_bool(0.4)).collect();
    parents.truncate(3);
    let parent_domains: Vec<Vec<f64>> = parents.iter().map(|(_, v)| (*v).clone()).collect();
    let rows = crate::scm::cross_product(&parent_domains)
        .into_iter()
        .map(|pa| {
            let w: Vec<f64> = (0..size).map(|_| rng.random_range(0.01..1.0)).collect();
            let z: f64 = w.iter().sum();
            (pa, w.into_iter().map(|v| v / z).collect())
        })
        .collect();
    let names = parents.iter().map(|(n, _)| (*n).clone()).collect();
    (Domain::Discrete(values), Mechanism::DiscreteCpt(Cpt::new(names, rows)))
}

fn random_expr(rng: &mut ChaCha8Rng, vars: &[String], depth: usize) -> Expr {
    if depth == 0 || rng.random_bool(0.3) {
        return if !vars.is_empty() && rng.random_bool(0.6) {
            Expr::var(&vars[rng.random_range(0..vars.len())])
        } else {
            Expr::Num(random_number(rng))
        };
    }
    const OPS: [BinOp; 10] = [
        BinOp::Add,
        BinOp::Sub,
        BinOp::Mul,
        BinOp::Div,
        BinOp::Lt,
        BinOp::Le,
        BinOp::Gt,
        BinOp::Ge,
        BinOp::Eq,
        BinOp::Ne,
    ];
    match rng.random_range(0..6) {
        0 => Expr::neg(random_expr(rng, vars, depth - 1)),
        1 => {
            let f = [Func::Min, Func::Max, Func::Ind][rng.random_range(0..3)];
            let n = if f == Func::Ind { 1 } else { rng.random_range(2..=3) };
            Expr::Call(f, (0..n).map(|_| random_expr(rng, vars, depth - 1)).collect())
        }
        _ => Expr::bin(
            OPS[rng.random_range(0..OPS.len())],
            random_expr(rng, vars, depth - 1),
            random_expr(rng, vars, depth - 1),
        ),
    }
}

fn insert_noise(rng: &mut ChaCha8Rng, expr: Expr) -> Expr {
    match rng.random_range(0..3) {
        0 => Expr::bin(BinOp::Add, expr, Expr::Noise),
        1 => Expr::bin(BinOp::Mul, Expr::Noise, expr),
        _ => Expr::Call(Func::Max, vec![expr, Expr::Noise]),
    }
}

fn random_noise(rng: &mut ChaCha8Rng) -> NoiseSpec {
    match rng.random_range(0..4) {
        0 => NoiseSpec::Normal {
            mean: random_number(rng),
            std: rng.random_range(0.0..2.0),
        },
        1 => NoiseSpec::Bernoulli { p: rng.random() },
        2 => {
            let n = rng.random_range(1..=4);
            let set: BTreeSet<i64> = (0..n).map(|_| rng.random_range(-3..=3)).collect();
            NoiseSpec::Uniform {
                values: set.into_iter().map(|v| v as f64).collect(),
            }
        }
        _ => NoiseSpec::Point {
            value: random_number(rng),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::serialize_scm;
    use crate::sampling::RngSpec;

    #[test]
    fn fixtures_parse() {
        for src in [VACCINE_TOY, CONFOUNDED_ASSIGNMENT, MARKER_EFFECT, TWO_HABITS, SEASONING] {
            parse(src);
        }
        two_path_model(1.0, 2.0);
        one_path_model(1.0, 2.0);
        covariance_example();
        iv_linear();
        did_model();
        rdd_model();
    }

    #[test]
    fn random_models_round_trip() {
        let mut rng = RngSpec::new(5).stream(0, "test");
        for _ in 0..200 {
            let scm = random_scm(&mut rng, 6);
            let text = serialize_scm(&scm);
            assert_eq!(parse_scm(&text).unwrap(), scm, "{text}");
        }
    }
}
