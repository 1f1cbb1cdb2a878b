use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use ordered_float::OrderedFloat;
use serde::Serialize;

/// Tolerance used when matching a computed value against a discrete domain.
pub const VALUE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
        }
    }

    fn apply(self, l: f64, r: f64) -> f64 {
        let b = |c: bool| if c { 1.0 } else { 0.0 };
        match self {
            BinOp::Add => l + r,
            BinOp::Sub => l - r,
            BinOp::Mul => l * r,
            BinOp::Div => l / r,
            BinOp::Lt => b(l < r),
            BinOp::Le => b(l <= r),
            BinOp::Gt => b(l > r),
            BinOp::Ge => b(l >= r),
            BinOp::Eq => b(l == r),
            BinOp::Ne => b(l != r),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Func {
    Min,
    Max,
    /// `ind(e)` is 1 when `e > 0`, else 0.
    Ind,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Min => "min",
            Func::Max => "max",
            Func::Ind => "ind",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        match name {
            "min" => Some(Func::Min),
            "max" => Some(Func::Max),
            "ind" => Some(Func::Ind),
            _ => None,
        }
    }

    /// Accepted argument counts as (min, max).
    pub fn arity(self) -> (usize, usize) {
        match self {
            Func::Min | Func::Max => (2, usize::MAX),
            Func::Ind => (1, 1),
        }
    }
}

/// Arithmetic over parent variables and at most one noise term.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Expr {
    Num(f64),
    Var(String),
    /// Placeholder for the mechanism's exogenous noise draw.
    Noise,
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn bin(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }

    /// Negation that folds numeric literals, matching what the parser produces.
    pub fn neg(e: Expr) -> Expr {
        match e {
            Expr::Num(v) => Expr::Num(-v),
            other => Expr::Neg(Box::new(other)),
        }
    }

    pub fn eval<F: Fn(&str) -> f64>(&self, var: &F, noise: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(n) => var(n),
            Expr::Noise => noise,
            Expr::Neg(e) => -e.eval(var, noise),
            Expr::Binary(op, l, r) => op.apply(l.eval(var, noise), r.eval(var, noise)),
            Expr::Call(f, args) => {
                let mut vals = args.iter().map(|a| a.eval(var, noise));
                match f {
                    Func::Min => vals.fold(f64::INFINITY, f64::min),
                    Func::Max => vals.fold(f64::NEG_INFINITY, f64::max),
                    Func::Ind => {
                        if vals.next().unwrap_or(0.0) > 0.0 {
                            1.0
                        } else {
                            0.0
                        }
                    }
                }
            }
        }
    }

    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Var(n) => {
                out.insert(n.clone());
            }
            Expr::Neg(e) => e.collect_vars(out),
            Expr::Binary(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
            Expr::Num(_) | Expr::Noise => {}
        }
    }

    pub fn noise_count(&self) -> usize {
        match self {
            Expr::Noise => 1,
            Expr::Neg(e) => e.noise_count(),
            Expr::Binary(_, l, r) => l.noise_count() + r.noise_count(),
            Expr::Call(_, args) => args.iter().map(Expr::noise_count).sum(),
            Expr::Num(_) | Expr::Var(_) => 0,
        }
    }

    /// Affine decomposition `Σ coef·var + constant + noise_coef·noise`, if the
    /// expression is affine. Variables whose coefficients cancel are still listed.
    pub fn linear_form(&self) -> Option<LinearForm> {
        match self {
            Expr::Num(v) => Some(LinearForm {
                constant: *v,
                ..LinearForm::default()
            }),
            Expr::Var(n) => Some(LinearForm {
                coefs: BTreeMap::from([(n.clone(), 1.0)]),
                ..LinearForm::default()
            }),
            Expr::Noise => Some(LinearForm {
                noise: 1.0,
                ..LinearForm::default()
            }),
            Expr::Neg(e) => Some(e.linear_form()?.scale(-1.0)),
            Expr::Binary(op, l, r) => {
                let (l, r) = (l.linear_form()?, r.linear_form()?);
                match op {
                    BinOp::Add => Some(l.add(&r, 1.0)),
                    BinOp::Sub => Some(l.add(&r, -1.0)),
                    BinOp::Mul if r.is_constant() => Some(l.scale(r.constant)),
                    BinOp::Mul if l.is_constant() => Some(r.scale(l.constant)),
                    BinOp::Div if r.is_constant() && r.constant != 0.0 => {
                        Some(l.scale(1.0 / r.constant))
                    }
                    _ => None,
                }
            }
            Expr::Call(..) => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearForm {
    pub coefs: BTreeMap<String, f64>,
    pub constant: f64,
    pub noise: f64,
}

impl LinearForm {
    fn is_constant(&self) -> bool {
        self.coefs.is_empty() && self.noise == 0.0
    }

    fn scale(mut self, c: f64) -> Self {
        self.coefs.values_mut().for_each(|v| *v *= c);
        self.constant *= c;
        self.noise *= c;
        self
    }

    fn add(mut self, other: &LinearForm, sign: f64) -> Self {
        for (k, v) in &other.coefs {
            *self.coefs.entry(k.clone()).or_insert(0.0) += sign * v;
        }
        self.constant += sign * other.constant;
        self.noise += sign * other.noise;
        self
    }
}

/// Exogenous noise distribution attached to a mechanism.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum NoiseSpec {
    Normal { mean: f64, std: f64 },
    Bernoulli { p: f64 },
    /// Discrete uniform over the listed values.
    Uniform { values: Vec<f64> },
    Point { value: f64 },
}

impl NoiseSpec {
    /// Finite support with probabilities; `None` for continuous noise.
    pub fn support(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            NoiseSpec::Normal { std, mean } if *std == 0.0 => Some(vec![(*mean, 1.0)]),
            NoiseSpec::Normal { .. } => None,
            NoiseSpec::Bernoulli { p } => Some(vec![(0.0, 1.0 - p), (1.0, *p)]),
            NoiseSpec::Uniform { values } => {
                let w = 1.0 / values.len() as f64;
                Some(values.iter().map(|v| (*v, w)).collect())
            }
            NoiseSpec::Point { value } => Some(vec![(*value, 1.0)]),
        }
    }

    pub fn parameter_error(&self) -> Option<String> {
        let finite = |v: f64| v.is_finite();
        match self {
            NoiseSpec::Normal { mean, std } => {
                if !finite(*mean) || !finite(*std) {
                    Some("normal parameters must be finite".into())
                } else if *std < 0.0 {
                    Some(format!("normal std must be >= 0, got {std}"))
                } else {
                    None
                }
            }
            NoiseSpec::Bernoulli { p } => {
                (!(0.0..=1.0).contains(p)).then(|| format!("bernoulli p must lie in [0,1], got {p}"))
            }
            NoiseSpec::Uniform { values } => {
                if values.is_empty() {
                    Some("uniform needs at least one value".into())
                } else if !values.iter().all(|v| finite(*v)) {
                    Some("uniform values must be finite".into())
                } else {
                    None
                }
            }
            NoiseSpec::Point { value } => (!finite(*value)).then(|| "point value must be finite".into()),
        }
    }
}

impl fmt::Display for NoiseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseSpec::Normal { mean, std } => write!(f, "normal({mean}, {std})"),
            NoiseSpec::Bernoulli { p } => write!(f, "bernoulli({p})"),
            NoiseSpec::Uniform { values } => {
                write!(f, "uniform(")?;
                for (i, v) in values.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{v}")?;
                }
                write!(f, ")")
            }
            NoiseSpec::Point { value } => write!(f, "point({value})"),
        }
    }
}

pub type ValueKey = Vec<OrderedFloat<f64>>;

pub fn key(values: &[f64]) -> ValueKey {
    values.iter().copied().map(OrderedFloat).collect()
}

/// Conditional probability table: one pmf (aligned with the node's domain) per
/// assignment of the sorted parent list.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Cpt {
    parents: Vec<String>,
    rows: BTreeMap<ValueKey, Vec<f64>>,
}

impl Cpt {
    /// `parents` is sorted; row keys are permuted to match.
    pub fn new(parents: Vec<String>, rows: Vec<(Vec<f64>, Vec<f64>)>) -> Self {
        let mut idx: Vec<usize> = (0..parents.len()).collect();
        idx.sort_by(|&a, &b| parents[a].cmp(&parents[b]));
        let sorted: Vec<String> = idx.iter().map(|&i| parents[i].clone()).collect();
        let rows = rows
            .into_iter()
            .map(|(k, pmf)| (idx.iter().map(|&i| OrderedFloat(k[i])).collect(), pmf))
            .collect();
        Cpt {
            parents: sorted,
            rows,
        }
    }

    /// Root distribution: a single row with no parents.
    pub fn root(pmf: Vec<f64>) -> Self {
        Cpt::new(Vec::new(), vec![(Vec::new(), pmf)])
    }

    pub fn parents(&self) -> &[String] {
        &self.parents
    }

    pub fn rows(&self) -> &BTreeMap<ValueKey, Vec<f64>> {
        &self.rows
    }

    pub fn row(&self, parent_values: &[f64]) -> Option<&Vec<f64>> {
        self.rows.get(&key(parent_values))
    }
}

impl Serialize for Cpt {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let rows: Vec<(Vec<f64>, &Vec<f64>)> = self
            .rows
            .iter()
            .map(|(k, v)| (k.iter().map(|x| x.0).collect(), v))
            .collect();
        let mut st = s.serialize_struct("Cpt", 2)?;
        st.serialize_field("parents", &self.parents)?;
        st.serialize_field("rows", &rows)?;
        st.end()
    }
}

/// Structural assignment `v ← f(pa(v), ε_v)` for one node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Mechanism {
    DiscreteCpt(Cpt),
    LinearGaussian {
        weights: BTreeMap<String, f64>,
        intercept: f64,
        noise_std: f64,
    },
    Deterministic {
        expr: Expr,
        noise: Option<NoiseSpec>,
    },
    Constant(f64),
}

impl Mechanism {
    /// Canonical mechanism for `expr` with its noise term: affine expressions with
    /// Gaussian (or no) noise become `LinearGaussian`, everything else stays
    /// `Deterministic`.
    pub fn from_expr(expr: Expr, noise: Option<NoiseSpec>) -> Mechanism {
        let gaussian = match &noise {
            None => Some((0.0, 0.0)),
            Some(NoiseSpec::Normal { mean, std }) => Some((*mean, *std)),
            _ => None,
        };
        if let (Some((mean, std)), Some(form)) = (gaussian, expr.linear_form()) {
            if noise.is_none() || form.noise != 0.0 {
                // adding 0.0 turns -0.0 into 0.0 so the text form is stable
                return Mechanism::LinearGaussian {
                    weights: form.coefs.into_iter().map(|(k, w)| (k, w + 0.0)).collect(),
                    intercept: form.constant + form.noise * mean + 0.0,
                    noise_std: form.noise.abs() * std + 0.0,
                };
            }
        }
        Mechanism::Deterministic { expr, noise }
    }

    pub fn parents(&self) -> BTreeSet<String> {
        match self {
            Mechanism::DiscreteCpt(cpt) => cpt.parents.iter().cloned().collect(),
            Mechanism::LinearGaussian { weights, .. } => weights.keys().cloned().collect(),
            Mechanism::Deterministic { expr, .. } => expr.variables(),
            Mechanism::Constant(_) => BTreeSet::new(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Mechanism::DiscreteCpt(_) => "cpt",
            Mechanism::LinearGaussian { .. } => "linear-gaussian",
            Mechanism::Deterministic { .. } => "deterministic",
            Mechanism::Constant(_) => "constant",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_expression_becomes_linear_gaussian() {
        // v' + 2 + normal(0,1)
        let e = Expr::bin(
            BinOp::Add,
            Expr::bin(BinOp::Add, Expr::var("v'"), Expr::Num(2.0)),
            Expr::Noise,
        );
        let m = Mechanism::from_expr(e, Some(NoiseSpec::Normal { mean: 0.0, std: 1.0 }));
        assert_eq!(
            m,
            Mechanism::LinearGaussian {
                weights: BTreeMap::from([("v'".to_string(), 1.0)]),
                intercept: 2.0,
                noise_std: 1.0
            }
        );
    }

    #[test]
    fn indicator_stays_deterministic() {
        let e = Expr::Call(Func::Ind, vec![Expr::bin(BinOp::Add, Expr::var("x"), Expr::Noise)]);
        let m = Mechanism::from_expr(e.clone(), Some(NoiseSpec::Normal { mean: 0.0, std: 1.0 }));
        assert!(matches!(m, Mechanism::Deterministic { .. }));
        assert_eq!(e.eval(&|_| 0.5, -0.2), 1.0);
        assert_eq!(e.eval(&|_| 0.5, -0.7), 0.0);
    }

    #[test]
    fn discrete_noise_keeps_affine_expression_deterministic() {
        let e = Expr::bin(BinOp::Add, Expr::var("u"), Expr::Noise);
        let m = Mechanism::from_expr(e, Some(NoiseSpec::Bernoulli { p: 0.5 }));
        assert!(matches!(m, Mechanism::Deterministic { .. }));
    }

    #[test]
    fn cancelled_coefficient_keeps_parent() {
        let e = Expr::bin(BinOp::Sub, Expr::var("x"), Expr::var("x"));
        let form = e.linear_form().unwrap();
        assert_eq!(form.coefs.get("x"), Some(&0.0));
    }

    #[test]
    fn cpt_rows_are_keyed_by_sorted_parents() {
        let cpt = Cpt::new(
            vec!["x".into(), "a".into()],
            vec![(vec![1.0, 0.0], vec![0.4, 0.6])],
        );
        assert_eq!(cpt.parents(), ["a", "x"]);
        assert_eq!(cpt.row(&[0.0, 1.0]), Some(&vec![0.4, 0.6]));
    }

    #[test]
    fn relu_gate_expression() {
        // 1(x>0) * max(0, x + noise)
        let e = Expr::bin(
            BinOp::Mul,
            Expr::bin(BinOp::Gt, Expr::var("x"), Expr::Num(0.0)),
            Expr::Call(
                Func::Max,
                vec![Expr::Num(0.0), Expr::bin(BinOp::Add, Expr::var("x"), Expr::Noise)],
            ),
        );
        assert_eq!(e.eval(&|_| 2.0, 0.5), 2.5);
        assert_eq!(e.eval(&|_| -1.0, 5.0), 0.0);
    }
}
