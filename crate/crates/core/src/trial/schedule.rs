use std::fmt;
use std::str::FromStr;

use super::TrialError;

/// A value per step `t ≥ 1`, used for both the exploration rate ε_t and the
/// temperature β_t.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    /// 1 for `t < explore_steps`, 0 afterwards.
    Step { explore_steps: u64 },
    /// A fixed value; `f64::INFINITY` is allowed for temperatures.
    Constant(f64),
    /// `max(floor, start · decay^(t−1))`.
    Geometric { start: f64, decay: f64, floor: f64 },
}

impl Schedule {
    pub fn value(&self, t: u64) -> f64 {
        match *self {
            Schedule::Step { explore_steps } => {
                if t < explore_steps {
                    1.0
                } else {
                    0.0
                }
            }
            Schedule::Constant(c) => c,
            Schedule::Geometric { start, decay, floor } => {
                let exp = t.saturating_sub(1).min(i32::MAX as u64) as i32;
                (start * decay.powi(exp)).max(floor)
            }
        }
    }

    /// Checks that every value lies in [0, 1].
    pub fn check_rate(&self) -> Result<(), TrialError> {
        self.check(|v| (0.0..=1.0).contains(&v), "exploration rates must lie in [0, 1]")
    }

    /// Checks that every value is a valid temperature: 0 (greedy), positive,
    /// or infinite (uniform).
    pub fn check_temperature(&self) -> Result<(), TrialError> {
        self.check(|v| v >= 0.0, "temperatures must be >= 0")
    }

    fn check(&self, ok: impl Fn(f64) -> bool, reason: &str) -> Result<(), TrialError> {
        let fine = match *self {
            Schedule::Step { .. } => true,
            Schedule::Constant(c) => ok(c),
            Schedule::Geometric { start, decay, floor } => {
                ok(start) && ok(floor) && start.is_finite() && decay > 0.0 && decay <= 1.0
            }
        };
        if fine {
            Ok(())
        } else {
            Err(TrialError::Schedule {
                text: self.to_string(),
                reason: reason.to_string(),
            })
        }
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Schedule::Step { explore_steps } => write!(f, "step:{explore_steps}"),
            Schedule::Constant(c) if c.is_infinite() => f.write_str("const:inf"),
            Schedule::Constant(c) => write!(f, "const:{c}"),
            Schedule::Geometric { start, decay, floor } => write!(f, "geom:{start},{decay},{floor}"),
        }
    }
}

/// Parses `step:T`, `const:c`, `const:inf` or `geom:start,decay,floor`.
impl FromStr for Schedule {
    type Err = TrialError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let err = |reason: &str| TrialError::Schedule {
            text: text.to_string(),
            reason: reason.to_string(),
        };
        let (kind, params) = text
            .split_once(':')
            .ok_or_else(|| err("expected `kind:params`, e.g. `const:0.1`"))?;
        let num = |s: &str| -> Result<f64, TrialError> {
            match s.trim() {
                "inf" => Ok(f64::INFINITY),
                other => other
                    .parse::<f64>()
                    .ok()
                    .filter(|v| !v.is_nan())
                    .ok_or_else(|| err(&format!("`{other}` is not a number"))),
            }
        };
        match kind.trim() {
            "step" => params
                .trim()
                .parse()
                .map(|explore_steps| Schedule::Step { explore_steps })
                .map_err(|_| err("step takes a non-negative integer")),
            "const" => Ok(Schedule::Constant(num(params)?)),
            "geom" => {
                let parts: Vec<&str> = params.split(',').collect();
                if parts.len() != 3 {
                    return Err(err("geom takes start,decay,floor"));
                }
                Ok(Schedule::Geometric {
                    start: num(parts[0])?,
                    decay: num(parts[1])?,
                    floor: num(parts[2])?,
                })
            }
            other => Err(err(&format!("unknown schedule kind `{other}`; expected step, const or geom"))),
        }
    }
}
