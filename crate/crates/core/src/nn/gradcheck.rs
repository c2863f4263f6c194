use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Parameter index at which the maximum occurred.
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub params_checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_relative_error < tolerance
    }
}

/// `|a − n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares analytic gradients against central differences, parameter by parameter.
///
/// `loss_grad` maps a flat parameter vector to `(loss, gradient)`.
pub fn gradient_check<F>(mut loss_grad: F, params: &[f64], epsilon: f64) -> Result<GradCheckReport>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    if !(1e-7..=1e-3).contains(&epsilon) {
        return Err(Error::InvalidConfig(format!(
            "gradient-check epsilon must lie in [1e-7, 1e-3], got {epsilon}"
        )));
    }
    let (_, analytic) = loss_grad(params)?;
    if analytic.len() != params.len() {
        return Err(Error::DimensionMismatch {
            context: "gradient check",
            expected: params.len(),
            found: analytic.len(),
        });
    }
    let mut probe = params.to_vec();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        params_checked: params.len(),
    };
    for i in 0..params.len() {
        probe[i] = params[i] + epsilon;
        let (plus, _) = loss_grad(&probe)?;
        probe[i] = params[i] - epsilon;
        let (minus, _) = loss_grad(&probe)?;
        probe[i] = params[i];
        let numeric = (plus - minus) / (2.0 * epsilon);
        let err = relative_error(analytic[i], numeric);
        if err > report.max_relative_error || i == 0 {
            report.max_relative_error = err;
            report.worst_index = i;
            report.analytic = analytic[i];
            report.numeric = numeric;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    // L(w) = ½ (w·x − t)², ∇L = (w·x − t) x
    fn linear(x: &[f64], t: f64) -> impl Fn(&[f64]) -> Result<(f64, Vec<f64>)> + '_ {
        move |w| {
            let r: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - t;
            Ok((0.5 * r * r, x.iter().map(|xi| r * xi).collect()))
        }
    }

    #[test]
    fn linear_toy_is_tight() {
        let x = [0.7, -1.3, 2.1];
        let rep = gradient_check(linear(&x, 0.4), &[0.1, 0.2, -0.3], 1e-5).unwrap();
        assert!(rep.max_relative_error < 1e-6, "{rep:?}");
    }

    #[test]
    fn corrupted_gradient_is_caught() {
        let x = [0.7, -1.3, 2.1];
        let f = linear(&x, 0.4);
        let corrupt = |w: &[f64]| {
            let (l, mut g) = f(w)?;
            g[1] *= 2.0;
            Ok((l, g))
        };
        let rep = gradient_check(corrupt, &[0.1, 0.2, -0.3], 1e-5).unwrap();
        assert!(rep.max_relative_error > 0.3);
        assert_eq!(rep.worst_index, 1);
    }

    #[test]
    fn epsilon_out_of_range() {
        let x = [1.0];
        assert!(gradient_check(linear(&x, 0.0), &[0.0], 1e-2).is_err());
        assert!(gradient_check(linear(&x, 0.0), &[0.0], 1e-9).is_err());
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert_eq!(relative_error(1e-10, 0.0), 1e-10 / 1e-8);
    }
}
