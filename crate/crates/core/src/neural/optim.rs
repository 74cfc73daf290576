use super::{NeuralError, ParamTensor};

/// L2 norm of all gradients taken together.
pub fn global_grad_norm(params: &[&mut ParamTensor]) -> f64 {
    params
        .iter()
        .flat_map(|p| p.grad.iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt()
}

/// Clips the global gradient norm to `clip` (if given), applies
/// `value -= lr * grad` and zeroes every gradient. Returns the pre-clip norm.
///
/// Nothing is updated when any gradient is non-finite.
pub fn sgd_step(params: &mut [&mut ParamTensor], lr: f64, clip: Option<f64>) -> Result<f64, NeuralError> {
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(NeuralError::InvalidLearningRate(lr));
    }
    for p in params.iter() {
        if let Some(index) = p.grad.iter().position(|g| !g.is_finite()) {
            return Err(NeuralError::NonFiniteGradient { param: p.name.clone(), index });
        }
    }
    let norm = global_grad_norm(params);
    let scale = match clip {
        Some(c) if norm > c => c / norm,
        _ => 1.0,
    };
    let step = lr * scale;
    for p in params.iter_mut() {
        for (v, g) in p.value.iter_mut().zip(p.grad.iter_mut()) {
            *v -= step * *g;
            *g = 0.0;
        }
    }
    Ok(norm)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_grad_leaves_params() {
        let mut p = ParamTensor::from_values("p", 2, 1, vec![0.3, -0.4]);
        sgd_step(&mut [&mut p], 0.01, Some(5.0)).unwrap();
        assert_eq!(p.value, vec![0.3, -0.4]);
    }

    #[test]
    fn scalar_update() {
        let mut p = ParamTensor::from_values("p", 1, 1, vec![1.0]);
        p.grad[0] = 2.0;
        sgd_step(&mut [&mut p], 0.01, Some(5.0)).unwrap();
        assert!((p.value[0] - 0.98).abs() < 1e-15);
        assert_eq!(p.grad, vec![0.0]);
    }

    #[test]
    fn clipping_rescales_to_threshold() {
        // grads (30, 40) have norm 50; lr 1 makes the applied step the clipped grad.
        let mut a = ParamTensor::from_values("a", 1, 1, vec![0.0]);
        let mut b = ParamTensor::from_values("b", 1, 1, vec![0.0]);
        a.grad[0] = 30.0;
        b.grad[0] = 40.0;
        let norm = sgd_step(&mut [&mut a, &mut b], 1.0, Some(5.0)).unwrap();
        assert!((norm - 50.0).abs() < 1e-12);
        let applied = (a.value[0].powi(2) + b.value[0].powi(2)).sqrt();
        assert!((applied - 5.0).abs() < 1e-9);
    }

    #[test]
    fn non_finite_gradient_aborts_without_update() {
        let mut a = ParamTensor::from_values("a", 2, 1, vec![1.0, 2.0]);
        a.grad = vec![0.5, f64::NAN];
        let err = sgd_step(&mut [&mut a], 0.1, None).unwrap_err();
        assert_eq!(err, NeuralError::NonFiniteGradient { param: "a".into(), index: 1 });
        assert_eq!(a.value, vec![1.0, 2.0]);
    }

    #[test]
    fn invalid_learning_rate() {
        let mut a = ParamTensor::zeros("a", 1, 1);
        assert!(sgd_step(&mut [&mut a], 0.0, None).is_err());
    }
}
