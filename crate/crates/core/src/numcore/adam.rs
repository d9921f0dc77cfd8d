use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::dense::Parameters;
use super::math;
use super::NumError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment accumulators for one parameter collection.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new<P: Parameters + ?Sized>(config: AdamConfig, params: &P) -> Self {
        let shapes: Vec<usize> = params.tensors().iter().map(|t| t.data.len()).collect();
        Self {
            config,
            step: 0,
            first: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one bias-corrected Adam update. Gradients are validated in
    /// full before any parameter is touched.
    pub fn step<P: Parameters + ?Sized>(
        &mut self,
        params: &mut P,
        grads: &P,
    ) -> Result<(), NumError> {
        let grad_tensors = grads.tensors();
        if grad_tensors.len() != self.first.len() {
            return Err(NumError::Dimension {
                context: "adam tensor count",
                expected: self.first.len(),
                found: grad_tensors.len(),
            });
        }
        for (g, m) in grad_tensors.iter().zip(&self.first) {
            if g.data.len() != m.len() {
                return Err(NumError::Dimension {
                    context: "adam gradient",
                    expected: m.len(),
                    found: g.data.len(),
                });
            }
            if let Some(i) = g.data.iter().position(|x| !x.is_finite()) {
                return Err(NumError::NonFinite(format!("gradient of {}[{i}]", g.name)));
            }
        }
        let mut param_tensors = params.tensors_mut();
        if param_tensors.len() != self.first.len() {
            return Err(NumError::Dimension {
                context: "adam parameter count",
                expected: self.first.len(),
                found: param_tensors.len(),
            });
        }
        for (p, m) in param_tensors.iter().zip(&self.first) {
            if p.len() != m.len() {
                return Err(NumError::Dimension {
                    context: "adam parameter",
                    expected: m.len(),
                    found: p.len(),
                });
            }
        }

        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let c1 = 1.0 - math::powi(beta1, self.step);
        let c2 = 1.0 - math::powi(beta2, self.step);
        for (k, param) in param_tensors.iter_mut().enumerate() {
            let g = grad_tensors[k].data;
            let m = &mut self.first[k];
            let v = &mut self.second[k];
            for i in 0..param.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                param[i] -= learning_rate * m_hat / (math::sqrt(v_hat) + epsilon);
            }
        }
        Ok(())
    }
}

pub fn adam_step<P: Parameters + ?Sized>(
    params: &mut P,
    grads: &P,
    state: &mut AdamState,
) -> Result<(), NumError> {
    state.step(params, grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::DenseVector;

    fn vector(xs: &[f64]) -> DenseVector {
        DenseVector::from(xs)
    }

    #[test]
    fn zero_gradients_leave_parameters() {
        let mut p = vector(&[1.0, -2.0, 3.5]);
        let g = vector(&[0.0, 0.0, 0.0]);
        let mut state = AdamState::new(AdamConfig::default(), &p);
        for _ in 0..5 {
            adam_step(&mut p, &g, &mut state).unwrap();
        }
        assert_eq!(p.as_slice(), &[1.0, -2.0, 3.5]);
        assert_eq!(state.step_count(), 5);
    }

    #[test]
    fn single_step_moves_by_learning_rate() {
        let mut p = vector(&[0.0]);
        let g = vector(&[1.0]);
        let mut state = AdamState::new(AdamConfig::default(), &p);
        adam_step(&mut p, &g, &mut state).unwrap();
        // m̂ = 1, v̂ = 1, so the step is lr / (1 + ε).
        assert!((p.as_slice()[0] + 1e-3 / (1.0 + 1e-8)).abs() < 1e-18);
    }

    #[test]
    fn two_step_trace_matches_reference() {
        // Reference values computed with 40-digit arithmetic.
        let mut p = vector(&[0.0, 1.5]);
        let mut state = AdamState::new(AdamConfig::default(), &p);
        adam_step(&mut p, &vector(&[1.0, 0.5]), &mut state).unwrap();
        assert!((p.as_slice()[0] - -0.000_999_999_990_000_000_1).abs() < 1e-13);
        assert!((p.as_slice()[1] - 1.499_000_000_020_000_000).abs() < 1e-13);
        adam_step(&mut p, &vector(&[1.0, -2.0]), &mut state).unwrap();
        assert!((p.as_slice()[0] - -0.001_999_999_980_000_000_2).abs() < 1e-13);
        assert!((p.as_slice()[1] - 1.499_559_503_510_200_559).abs() < 1e-13);
    }

    #[test]
    fn rejects_non_finite_gradient() {
        let mut p = vector(&[0.0, 0.0]);
        let g = vector(&[0.0, f64::NAN]);
        let mut state = AdamState::new(AdamConfig::default(), &p);
        let err = adam_step(&mut p, &g, &mut state).unwrap_err();
        match err {
            NumError::NonFinite(what) => assert!(what.contains("vector[1]")),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(state.step_count(), 0);
    }

    #[test]
    fn rejects_shape_mismatch() {
        let mut p = vector(&[0.0, 0.0]);
        let mut state = AdamState::new(AdamConfig::default(), &p);
        let g = vector(&[1.0]);
        assert!(matches!(
            adam_step(&mut p, &g, &mut state),
            Err(NumError::Dimension { .. })
        ));
    }
}
