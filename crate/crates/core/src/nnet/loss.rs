use super::tensor::Tensor1d;
use crate::error::{Error, Result};

/// Per-step softmax across channels, with max subtraction.
pub fn softmax_columns(logits: &Tensor1d) -> Tensor1d {
    let (channels, len) = (logits.channels(), logits.len());
    let mut out = Tensor1d::zeros(channels, len);
    let mut column = vec![0.0; channels];
    for t in 0..len {
        let max = (0..channels)
            .map(|c| logits.get(c, t))
            .fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (c, e) in column.iter_mut().enumerate() {
            *e = (logits.get(c, t) - max).exp();
            sum += *e;
        }
        for (c, e) in column.iter().enumerate() {
            out.set(c, t, e / sum);
        }
    }
    out
}

/// Per-step log-softmax across channels.
pub fn log_softmax_columns(logits: &Tensor1d) -> Tensor1d {
    let (channels, len) = (logits.channels(), logits.len());
    let mut out = Tensor1d::zeros(channels, len);
    for t in 0..len {
        let max = (0..channels)
            .map(|c| logits.get(c, t))
            .fold(f64::NEG_INFINITY, f64::max);
        let lse = max
            + (0..channels)
                .map(|c| (logits.get(c, t) - max).exp())
                .sum::<f64>()
                .ln();
        for c in 0..channels {
            out.set(c, t, logits.get(c, t) - lse);
        }
    }
    out
}

/// Index of the hot channel at every step; errors unless each column is exactly one-hot.
pub(crate) fn target_classes(target: &Tensor1d) -> Result<Vec<usize>> {
    (0..target.len())
        .map(|t| {
            let mut hot = None;
            for c in 0..target.channels() {
                match target.get(c, t) {
                    v if v == 1.0 && hot.is_none() => hot = Some(c),
                    0.0 => {}
                    v => {
                        return Err(Error::Target(format!(
                            "step {t} channel {c} holds {v}; targets must be one-hot"
                        )))
                    }
                }
            }
            hot.ok_or_else(|| Error::Target(format!("step {t} has no active channel")))
        })
        .collect()
}

/// Categorical cross entropy averaged over time steps:
/// `L = −(1/T) Σ_t Σ_c target[c][t] · ln probs[c][t]`.
pub fn cross_entropy_loss(probs: &Tensor1d, target: &Tensor1d) -> Result<f64> {
    if probs.channels() != target.channels() || probs.len() != target.len() {
        return Err(Error::Shape(format!(
            "probabilities are {}x{}, target is {}x{}",
            probs.channels(),
            probs.len(),
            target.channels(),
            target.len()
        )));
    }
    let classes = target_classes(target)?;
    if classes.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = classes
        .iter()
        .enumerate()
        .map(|(t, &c)| -probs.get(c, t).ln())
        .sum();
    Ok(total / classes.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_hot(classes: &[usize]) -> Tensor1d {
        let mut t = Tensor1d::zeros(4, classes.len());
        for (i, &c) in classes.iter().enumerate() {
            t.set(c, i, 1.0);
        }
        t
    }

    #[test]
    fn perfect_prediction_has_zero_loss() {
        let target = one_hot(&[0, 3, 2]);
        assert_eq!(cross_entropy_loss(&target, &target).unwrap(), 0.0);
    }

    #[test]
    fn uniform_prediction_costs_ln_4() {
        let probs = Tensor1d::new(4, 3, vec![0.25; 12]).unwrap();
        let loss = cross_entropy_loss(&probs, &one_hot(&[1, 1, 3])).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-12);
        assert!((loss - 1.3863).abs() < 1e-4);
    }

    #[test]
    fn two_step_hand_computation() {
        // Step 0 is QRS with p = 0.7, step 1 is background with p = 0.4.
        let probs = Tensor1d::new(
            4,
            2,
            vec![
                0.1, 0.2, // P
                0.7, 0.1, // QRS
                0.1, 0.3, // T
                0.1, 0.4, // background
            ],
        )
        .unwrap();
        let loss = cross_entropy_loss(&probs, &one_hot(&[1, 3])).unwrap();
        let expected = -(0.7f64.ln() + 0.4f64.ln()) / 2.0;
        assert!((loss - expected).abs() < 1e-15);
        assert!((loss - 0.636_482_8).abs() < 1e-6);
    }

    #[test]
    fn non_one_hot_target_is_rejected() {
        let probs = Tensor1d::new(4, 1, vec![0.25; 4]).unwrap();
        let soft = Tensor1d::new(4, 1, vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        assert!(matches!(cross_entropy_loss(&probs, &soft), Err(Error::Target(_))));
        let empty = Tensor1d::zeros(4, 1);
        assert!(cross_entropy_loss(&probs, &empty).is_err());
    }

    #[test]
    fn softmax_is_stable_for_large_logits() {
        let logits = Tensor1d::new(4, 1, vec![1000.0, 999.0, -1000.0, 0.0]).unwrap();
        let p = softmax_columns(&logits);
        assert!(p.data().iter().all(|v| v.is_finite()));
        assert!((p.data().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let lp = log_softmax_columns(&logits);
        assert!((lp.get(0, 0) - p.get(0, 0).ln()).abs() < 1e-12);
    }
}
