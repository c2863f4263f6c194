use crate::error::{Error, Result};

fn check(pred: &[f64], target: &[f64]) -> Result<()> {
    if pred.len() != target.len() {
        return Err(Error::DimensionMismatch {
            context: "mse",
            expected: target.len(),
            found: pred.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::EmptyInput("mse prediction"));
    }
    Ok(())
}

/// Mean squared error `(1/n) Σ (pred − target)²`.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    check(pred, target)?;
    let n = pred.len() as f64;
    Ok(pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n)
}

/// `∂L/∂pred = (2/n)(pred − target)`.
pub fn mse_grad(pred: &[f64], target: &[f64]) -> Result<Vec<f64>> {
    check(pred, target)?;
    let scale = 2.0 / pred.len() as f64;
    Ok(pred.iter().zip(target).map(|(p, t)| scale * (p - t)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(mse_loss(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert_eq!(mse_loss(&[1.0, 0.0], &[0.0, 0.0]).unwrap(), 0.5);
        assert_eq!(mse_grad(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(mse_grad(&[1.0, 0.0], &[0.0, 0.0]).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn length_mismatch() {
        assert!(mse_loss(&[1.0], &[1.0, 2.0]).is_err());
        assert!(mse_grad(&[], &[]).is_err());
    }
}
