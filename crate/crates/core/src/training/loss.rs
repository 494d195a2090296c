use crate::error::{Error, Result};
use crate::linalg::Real;

fn check_label(g: usize, label: usize) -> Result<()> {
    if label >= g {
        return Err(Error::arg(format!("label {label} outside 0..{g}")));
    }
    Ok(())
}

/// Categorical cross-entropy `−ln p_label` of a probability vector.
pub fn cross_entropy<T: Real>(probs: &[T], label: usize) -> Result<T> {
    check_label(probs.len(), label)?;
    Ok(-probs[label].ln())
}

/// Cross-entropy straight from logits: `logsumexp(z) − z_label`.
pub fn cross_entropy_logits<T: Real>(logits: &[T], label: usize) -> Result<T> {
    check_label(logits.len(), label)?;
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<T>().ln();
    Ok((lse - logits[label]).max(T::zero()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_values() {
        assert_eq!(cross_entropy(&[0.0f64, 1.0], 1).unwrap(), 0.0);
        let uniform = [0.125f64; 8];
        assert!((cross_entropy(&uniform, 3).unwrap() - 8f64.ln()).abs() < 1e-15);
        assert!((cross_entropy(&[0.5f64, 0.25, 0.25], 0).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!((cross_entropy_logits(&[0.0f64; 8], 5).unwrap() - 2.0794).abs() < 1e-4);
    }

    #[test]
    fn fused_form_matches_and_survives_large_logits() {
        let z = [2.0f64, -1.0, 0.5];
        let p = crate::model::softmax(&z).unwrap();
        let a = cross_entropy(&p, 1).unwrap();
        let b = cross_entropy_logits(&z, 1).unwrap();
        assert!((a - b).abs() < 1e-12);
        let big = cross_entropy_logits(&[1000.0f64, 0.0], 1).unwrap();
        assert!((big - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn label_out_of_range() {
        assert!(matches!(
            cross_entropy(&[0.5f64, 0.5], 2),
            Err(Error::InvalidArgument(_))
        ));
        assert!(cross_entropy_logits(&[0.5f64, 0.5], 9).is_err());
    }
}
