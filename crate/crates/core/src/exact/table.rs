use std::collections::BTreeMap;

use serde_json::{Map, Value};

use super::sum::{compensated_sum, CompensatedSum};
use super::ExactError;
use crate::scm::VALUE_TOLERANCE;

/// Largest number of entries a table may hold.
pub const MAX_TABLE_ENTRIES: usize = 1 << 24;

/// Dense probability table over the cross product of finite domains. Entries
/// are stored with the last variable varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct DistTable {
    variables: Vec<String>,
    domains: Vec<Vec<f64>>,
    probs: Vec<f64>,
}

pub(crate) fn table_size(domains: &[Vec<f64>]) -> Result<usize, ExactError> {
    let mut size: usize = 1;
    for d in domains {
        size = size
            .checked_mul(d.len())
            .filter(|s| *s <= MAX_TABLE_ENTRIES)
            .ok_or(ExactError::StateSpace {
                max: MAX_TABLE_ENTRIES,
            })?;
    }
    Ok(size)
}

/// Mixed-radix counter over a table's assignment space.
pub(crate) struct Odometer<'a> {
    radix: &'a [usize],
    pub digits: Vec<usize>,
}

impl<'a> Odometer<'a> {
    pub fn starting_at(radix: &'a [usize], mut index: usize) -> Self {
        let mut digits = vec![0; radix.len()];
        for i in (0..radix.len()).rev() {
            digits[i] = index % radix[i];
            index /= radix[i];
        }
        Odometer { radix, digits }
    }

    pub fn advance(&mut self) {
        for i in (0..self.radix.len()).rev() {
            self.digits[i] += 1;
            if self.digits[i] < self.radix[i] {
                return;
            }
            self.digits[i] = 0;
        }
    }
}

impl DistTable {
    pub fn new(variables: Vec<String>, domains: Vec<Vec<f64>>, probs: Vec<f64>) -> Result<Self, ExactError> {
        if variables.len() != domains.len() {
            return Err(ExactError::Shape("one domain per variable required".into()));
        }
        for (i, v) in variables.iter().enumerate() {
            if variables[..i].contains(v) {
                return Err(ExactError::Shape(format!("variable `{v}` repeated")));
            }
        }
        if domains.iter().any(Vec::is_empty) {
            return Err(ExactError::Shape("empty domain".into()));
        }
        let size = table_size(&domains)?;
        if probs.len() != size {
            return Err(ExactError::Shape(format!("expected {size} entries, got {}", probs.len())));
        }
        if let Some(p) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(ExactError::Shape(format!("invalid probability {p}")));
        }
        Ok(DistTable {
            variables,
            domains,
            probs,
        })
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn domains(&self) -> &[Vec<f64>] {
        &self.domains
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn total(&self) -> f64 {
        compensated_sum(self.probs.iter().copied())
    }

    fn radix(&self) -> Vec<usize> {
        self.domains.iter().map(Vec::len).collect()
    }

    fn position(&self, var: &str) -> Result<usize, ExactError> {
        self.variables
            .iter()
            .position(|v| v == var)
            .ok_or_else(|| ExactError::UnknownVariable(var.to_string()))
    }

    fn value_index(&self, pos: usize, value: f64) -> Result<usize, ExactError> {
        self.domains[pos]
            .iter()
            .position(|d| (d - value).abs() <= VALUE_TOLERANCE)
            .ok_or_else(|| ExactError::OutOfDomain {
                node: self.variables[pos].clone(),
                value,
            })
    }

    /// Flat index of a full assignment given in variable order.
    pub fn index_of(&self, assignment: &[f64]) -> Option<usize> {
        if assignment.len() != self.variables.len() {
            return None;
        }
        let mut idx = 0;
        for (pos, v) in assignment.iter().enumerate() {
            idx = idx * self.domains[pos].len() + self.value_index(pos, *v).ok()?;
        }
        Some(idx)
    }

    pub fn prob(&self, assignment: &[f64]) -> Option<f64> {
        self.index_of(assignment).map(|i| self.probs[i])
    }

    /// Every (assignment, probability) pair in storage order.
    pub fn entries(&self) -> impl Iterator<Item = (Vec<f64>, f64)> + '_ {
        let radix = self.radix();
        let mut digits = vec![0usize; radix.len()];
        self.probs.iter().enumerate().map(move |(i, p)| {
            if i > 0 {
                for k in (0..radix.len()).rev() {
                    digits[k] += 1;
                    if digits[k] < radix[k] {
                        break;
                    }
                    digits[k] = 0;
                }
            }
            let a = digits.iter().enumerate().map(|(k, d)| self.domains[k][*d]).collect();
            (a, *p)
        })
    }

    /// `p(target | evidence)`: sums out the remaining variables and normalizes.
    pub fn query(&self, target: &[String], evidence: &BTreeMap<String, f64>) -> Result<DistTable, ExactError> {
        let mut tpos = Vec::with_capacity(target.len());
        for (i, t) in target.iter().enumerate() {
            if target[..i].contains(t) {
                return Err(ExactError::InvalidQuery(format!("target `{t}` repeated")));
            }
            if evidence.contains_key(t) {
                return Err(ExactError::InvalidQuery(format!("`{t}` is both target and evidence")));
            }
            tpos.push(self.position(t)?);
        }
        let mut epos = Vec::with_capacity(evidence.len());
        for (var, value) in evidence {
            let pos = self.position(var)?;
            epos.push((pos, self.value_index(pos, *value)?));
        }

        let radix = self.radix();
        let out_domains: Vec<Vec<f64>> = tpos.iter().map(|&p| self.domains[p].clone()).collect();
        let out_size = table_size(&out_domains)?;
        let mut acc = vec![CompensatedSum::default(); out_size];
        let mut odo = Odometer::starting_at(&radix, 0);
        for (i, p) in self.probs.iter().enumerate() {
            if i > 0 {
                odo.advance();
            }
            if epos.iter().any(|&(pos, want)| odo.digits[pos] != want) {
                continue;
            }
            let mut idx = 0;
            for &pos in &tpos {
                idx = idx * radix[pos] + odo.digits[pos];
            }
            acc[idx].add(*p);
        }
        let mut total = CompensatedSum::default();
        for a in &acc {
            total.add(a.value());
        }
        let z = total.value();
        if z <= 0.0 {
            let shown: Vec<String> = evidence.iter().map(|(k, v)| format!("{k}={v}")).collect();
            return Err(ExactError::ZeroProbability(shown.join(", ")));
        }
        let probs = acc.iter().map(|a| a.value() / z).collect();
        DistTable::new(target.to_vec(), out_domains, probs)
    }

    /// Marginal over `keep`, in the given order.
    pub fn marginal(&self, keep: &[&str]) -> Result<DistTable, ExactError> {
        let keep: Vec<String> = keep.iter().map(|s| s.to_string()).collect();
        self.query(&keep, &BTreeMap::new())
    }

    /// Expected value of `var` under the (normalized) table.
    pub fn expectation(&self, var: &str) -> Result<f64, ExactError> {
        let m = self.marginal(&[var])?;
        Ok(compensated_sum(m.domains[0].iter().zip(&m.probs).map(|(v, p)| v * p)))
    }

    /// Total-variation distance; `None` when the tables have different shapes.
    pub fn total_variation(&self, other: &DistTable) -> Option<f64> {
        if self.variables != other.variables || self.domains != other.domains {
            return None;
        }
        Some(0.5 * compensated_sum(self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs())))
    }

    /// CSV with one column per variable followed by `prob`.
    pub fn to_csv_string(&self) -> String {
        let mut out = self.variables.join(",");
        out.push_str(",prob\n");
        for (a, p) in self.entries() {
            for v in a {
                out.push_str(&v.to_string());
                out.push(',');
            }
            out.push_str(&p.to_string());
            out.push('\n');
        }
        out
    }

    /// `{"variables": [...], "table": {...}}` where the table nests one object
    /// level per variable, keyed by value, with probabilities at the leaves.
    pub fn to_json(&self) -> Value {
        fn nest(t: &DistTable, level: usize, offset: usize, stride: usize) -> Value {
            if level == t.domains.len() {
                return Value::from(t.probs[offset]);
            }
            let inner = stride / t.domains[level].len();
            let mut map = Map::new();
            for (k, v) in t.domains[level].iter().enumerate() {
                map.insert(v.to_string(), nest(t, level + 1, offset + k * inner, inner));
            }
            Value::Object(map)
        }
        let mut root = Map::new();
        root.insert("variables".into(), Value::from(self.variables.clone()));
        root.insert("table".into(), nest(self, 0, 0, self.probs.len()));
        Value::Object(root)
    }
}
