//! Central finite-difference gradient verification.

use crate::error::{Error, Result};

/// Compare an analytic gradient against central finite differences of `loss`
/// evaluated around `theta`. Returns the maximum over coordinates of
/// `|analytic - numeric| / max(1e-8, |analytic| + |numeric|)`.
///
/// `loss` must be a deterministic function of its argument.
pub fn finite_diff_check<F>(
    theta: &[f64],
    analytic: &[f64],
    mut loss: F,
    epsilon: f64,
) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if theta.len() != analytic.len() {
        return Err(Error::Dimension(format!(
            "gradient check: {} parameters vs {} analytic entries",
            theta.len(),
            analytic.len()
        )));
    }
    if epsilon <= 0.0 {
        return Err(Error::Config("gradient check epsilon must be positive".into()));
    }
    let mut scratch = theta.to_vec();
    let mut max_rel = 0.0f64;
    for i in 0..theta.len() {
        scratch[i] = theta[i] + epsilon;
        let plus = loss(&scratch)?;
        scratch[i] = theta[i] - epsilon;
        let minus = loss(&scratch)?;
        scratch[i] = theta[i];
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::Numeric(format!(
                "loss is not finite near coordinate {i}"
            )));
        }
        let numeric = (plus - minus) / (2.0 * epsilon);
        let rel = (analytic[i] - numeric).abs() / (analytic[i].abs() + numeric.abs()).max(1e-8);
        if rel > max_rel {
            max_rel = rel;
        }
    }
    Ok(max_rel)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_squares_gradient() {
        let theta = vec![0.5, -1.25, 2.0, 0.0];
        let analytic: Vec<f64> = theta.iter().map(|x| 2.0 * x).collect();
        let err = finite_diff_check(
            &theta,
            &analytic,
            |t| Ok(t.iter().map(|x| x * x).sum()),
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-7, "rel error {err}");
    }

    #[test]
    fn constant_loss_has_zero_error() {
        let theta = vec![1.0, 2.0, 3.0];
        let analytic = vec![0.0; 3];
        let err = finite_diff_check(&theta, &analytic, |_| Ok(42.0), 1e-5).unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn non_finite_loss_is_an_error() {
        let theta = vec![1.0];
        let analytic = vec![0.0];
        let res = finite_diff_check(&theta, &analytic, |_| Ok(f64::NAN), 1e-5);
        assert!(matches!(res, Err(Error::Numeric(_))));
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let res = finite_diff_check(&[1.0, 2.0], &[0.0], |_| Ok(0.0), 1e-5);
        assert!(matches!(res, Err(Error::Dimension(_))));
    }
}
