use alloc::string::String;
use alloc::vec::Vec;

use super::dense::Parameters;
use super::NumError;

/// One loss evaluation as seen by the gradient checker.
///
/// `kink_margin` is the smallest distance of any ReLU pre-activation from
/// zero; `fingerprint` summarises every discrete choice the loss made
/// (activation signs, pooled selections). A coordinate whose two perturbed
/// evaluations disagree on either is not differentiable there and is skipped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    pub loss: f64,
    pub kink_margin: f64,
    pub fingerprint: u64,
}

impl From<f64> for Probe {
    fn from(loss: f64) -> Self {
        Self {
            loss,
            kink_margin: f64::INFINITY,
            fingerprint: 0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    pub step: f64,
    pub rel_tol: f64,
    pub kink_tol: f64,
    /// Lower bound on the relative-error denominator, so coordinates whose
    /// true gradient is ~0 are judged on an absolute scale.
    pub denom_floor: f64,
}

impl GradCheckConfig {
    pub fn with_tolerance(rel_tol: f64) -> Self {
        Self {
            step: 1e-5,
            rel_tol,
            kink_tol: 1e-7,
            denom_floor: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradFailure {
    pub tensor: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, Default)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    pub skipped: usize,
    pub failures: Vec<GradFailure>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Compares `analytic` against central finite differences of `loss_fn`
/// around `params`, coordinate by coordinate.
pub fn check_gradients<P, R, F>(
    mut loss_fn: F,
    params: &P,
    analytic: &P,
    config: GradCheckConfig,
) -> Result<GradCheckReport, NumError>
where
    P: Parameters + Clone,
    R: Into<Probe>,
    F: FnMut(&P) -> R,
{
    let base: Probe = loss_fn(params).into();
    if !base.loss.is_finite() {
        return Err(NumError::NonFiniteLoss);
    }
    let grads: Vec<(String, Vec<f64>)> = analytic
        .tensors()
        .into_iter()
        .map(|t| (t.name, t.data.to_vec()))
        .collect();
    let sizes: Vec<usize> = params.tensors().iter().map(|t| t.data.len()).collect();
    if sizes.len() != grads.len() {
        return Err(NumError::Dimension {
            context: "gradient check tensor count",
            expected: sizes.len(),
            found: grads.len(),
        });
    }

    let mut report = GradCheckReport::default();
    let mut probe = params.clone();
    for (k, &size) in sizes.iter().enumerate() {
        if grads[k].1.len() != size {
            return Err(NumError::Dimension {
                context: "gradient check tensor",
                expected: size,
                found: grads[k].1.len(),
            });
        }
        for i in 0..size {
            let original = probe.tensors_mut()[k][i];
            probe.tensors_mut()[k][i] = original + config.step;
            let plus: Probe = loss_fn(&probe).into();
            probe.tensors_mut()[k][i] = original - config.step;
            let minus: Probe = loss_fn(&probe).into();
            probe.tensors_mut()[k][i] = original;
            if !plus.loss.is_finite() || !minus.loss.is_finite() {
                return Err(NumError::NonFiniteLoss);
            }
            if plus.fingerprint != minus.fingerprint
                || plus.kink_margin.min(minus.kink_margin) < config.kink_tol
            {
                report.skipped += 1;
                continue;
            }
            let numeric = (plus.loss - minus.loss) / (2.0 * config.step);
            let analytic_value = grads[k].1[i];
            let denom = analytic_value
                .abs()
                .max(numeric.abs())
                .max(config.denom_floor);
            let rel_error = (analytic_value - numeric).abs() / denom;
            report.checked += 1;
            report.max_rel_error = report.max_rel_error.max(rel_error);
            if rel_error >= config.rel_tol {
                report.failures.push(GradFailure {
                    tensor: grads[k].0.clone(),
                    index: i,
                    analytic: analytic_value,
                    numeric,
                    rel_error,
                });
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::DenseVector;

    fn half_norm(p: &DenseVector) -> f64 {
        0.5 * p.as_slice().iter().map(|x| x * x).sum::<f64>()
    }

    #[test]
    fn quadratic_passes() {
        let p = DenseVector::from(&[0.3, -1.2, 2.5, 0.01][..]);
        let report =
            check_gradients(half_norm, &p, &p.clone(), GradCheckConfig::with_tolerance(1e-8))
                .unwrap();
        assert!(report.passed(), "{report:?}");
        assert!(report.max_rel_error < 1e-8);
        assert_eq!(report.checked, 4);
    }

    #[test]
    fn corrupted_coordinate_is_reported() {
        let p = DenseVector::from(&[0.3, -1.2, 2.5][..]);
        let mut g = p.clone();
        g.as_mut_slice()[1] *= 2.0;
        let report =
            check_gradients(half_norm, &p, &g, GradCheckConfig::with_tolerance(1e-4)).unwrap();
        assert_eq!(report.failures.len(), 1);
        assert_eq!(report.failures[0].index, 1);
    }

    #[test]
    fn non_finite_loss_is_an_error() {
        let p = DenseVector::from(&[1.0][..]);
        let err = check_gradients(|_: &DenseVector| f64::NAN, &p, &p, GradCheckConfig::with_tolerance(1e-4))
            .unwrap_err();
        assert_eq!(err, NumError::NonFiniteLoss);
    }

    #[test]
    fn kinks_are_skipped() {
        // |x| has a kink at 0; the fingerprint records the sign.
        let p = DenseVector::from(&[0.0, 1.0][..]);
        let g = DenseVector::from(&[0.0, 1.0][..]);
        let by_sign = |p: &DenseVector| {
            let x = p.as_slice();
            Probe {
                loss: x[0].abs() + x[1],
                kink_margin: f64::INFINITY,
                fingerprint: (x[0] > 0.0) as u64,
            }
        };
        let report = check_gradients(by_sign, &p, &g, GradCheckConfig::with_tolerance(1e-4)).unwrap();
        assert_eq!((report.skipped, report.checked), (1, 1));
        assert!(report.passed());

        // Probes of x[1] sit exactly on the kink of x[0].
        let by_margin = |p: &DenseVector| {
            let x = p.as_slice();
            Probe {
                loss: x[0].abs() + x[1],
                kink_margin: x[0].abs(),
                fingerprint: 0,
            }
        };
        let report = check_gradients(by_margin, &p, &g, GradCheckConfig::with_tolerance(1e-4)).unwrap();
        assert_eq!((report.skipped, report.checked), (1, 1));
    }
}
