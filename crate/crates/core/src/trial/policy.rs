/// Mixture of uniform exploration and a Boltzmann distribution over the
/// current estimates: `q(a) = ε/|A| + (1−ε)·softmax(ŷ/β)(a)`.
///
/// `beta = ∞` makes the softmax uniform; `beta = 0` puts all of its mass on
/// the best estimate, ties going to the lexicographically smallest name.
pub fn policy_probs(values: &[f64], names: &[String], epsilon: f64, beta: f64) -> Vec<f64> {
    assert!(!values.is_empty() && values.len() == names.len(), "one name per action");
    let k = values.len();
    let uniform = 1.0 / k as f64;
    let boltzmann = boltzmann(values, names, beta);
    boltzmann
        .into_iter()
        .map(|b| epsilon * uniform + (1.0 - epsilon) * b)
        .collect()
}

pub(crate) fn boltzmann(values: &[f64], names: &[String], beta: f64) -> Vec<f64> {
    let k = values.len();
    if beta.is_infinite() {
        return vec![1.0 / k as f64; k];
    }
    if beta == 0.0 {
        let best = (0..k)
            .reduce(|i, j| match values[j].total_cmp(&values[i]) {
                std::cmp::Ordering::Greater => j,
                std::cmp::Ordering::Equal if names[j] < names[i] => j,
                _ => i,
            })
            .expect("non-empty");
        let mut out = vec![0.0; k];
        out[best] = 1.0;
        return out;
    }
    // shifting by the max keeps exp() finite and makes the result invariant
    // to adding a constant to every estimate
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = values.iter().map(|v| ((v - max) / beta).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|v| v / z).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| i.to_string()).collect()
    }

    #[test]
    fn hand_evaluated_mixture() {
        let q = policy_probs(&[1.0, 0.0], &names(2), 0.2, 1.0);
        let e = std::f64::consts::E;
        assert!((q[0] - (0.1 + 0.8 * e / (e + 1.0))).abs() < 1e-15);
        assert!((q[0] + q[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn limits() {
        assert_eq!(policy_probs(&[5.0, 0.0, 1.0], &names(3), 1.0, 0.1), vec![1.0 / 3.0; 3]);
        assert_eq!(policy_probs(&[0.0, 5.0, 1.0], &names(3), 0.0, 0.0), vec![0.0, 1.0, 0.0]);
        assert_eq!(policy_probs(&[2.0, 1.0], &names(2), 0.0, f64::INFINITY), vec![0.5, 0.5]);
        let tie = vec!["b".to_string(), "a".to_string()];
        assert_eq!(policy_probs(&[1.0, 1.0], &tie, 0.0, 0.0), vec![0.0, 1.0]);
        // tiny temperature without overflow
        let q = policy_probs(&[1000.0, 0.0], &names(2), 0.0, 1e-6);
        assert_eq!(q, vec![1.0, 0.0]);
    }
}
