//! Dense vector helpers shared by the encoder and the sampler.
//!
//! Inputs are `f32` but every reduction accumulates in `f64`.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Inner product with `f64` accumulation in eight interleaved lanes.
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0f64; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum();
    for (x, y) in ca.zip(cb) {
        let (x, y): (&[f32; 8], &[f32; 8]) = (x.try_into().unwrap(), y.try_into().unwrap());
        for j in 0..8 {
            acc[j] += f64::from(x[j]) * f64::from(y[j]);
        }
    }
    acc.iter().sum::<f64>() + tail
}

pub fn norm(v: &[f32]) -> f64 {
    libm::sqrt(dot(v, v))
}

/// Result of [`l2_normalize`].
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub values: Vec<f32>,
    /// The input was all zeros and was returned unchanged.
    pub zero: bool,
}

/// Scales `v` to unit L2 norm. All-zero input comes back unchanged with
/// `zero` set.
pub fn l2_normalize(v: &[f32]) -> Result<Normalized> {
    let mut values = v.to_vec();
    let zero = l2_normalize_in_place(&mut values)?;
    Ok(Normalized { values, zero })
}

/// In-place variant of [`l2_normalize`]; returns true when `v` is all zeros.
pub fn l2_normalize_in_place(v: &mut [f32]) -> Result<bool> {
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("component {i} is {}", v[i])));
    }
    let n = norm(v);
    if n == 0.0 {
        return Ok(true);
    }
    for x in v.iter_mut() {
        *x = (f64::from(*x) / n) as f32;
    }
    Ok(false)
}

/// Evaluates both sides of the unit-sphere identity
/// `‖x − y‖² = 2 − 2⟨x, y⟩`, which is what lets a minimum-inner-product
/// search stand in for a farthest-neighbour search.
///
/// Both inputs must have unit norm (to 1e-4).
pub fn eq1_identity_check(x: &[f32], y: &[f32]) -> Result<(f64, f64)> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    for (name, v) in [("x", x), ("y", y)] {
        let n = norm(v);
        if !n.is_finite() || (n - 1.0).abs() > 1e-4 {
            return Err(Error::Precondition(format!(
                "{name} is not a unit vector (norm {n})"
            )));
        }
    }
    let lhs: f64 = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| {
            let d = f64::from(a) - f64::from(b);
            d * d
        })
        .sum();
    let rhs = 2.0 - 2.0 * dot(x, y);
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn three_four_five() {
        let n = l2_normalize(&[3.0, 4.0]).unwrap();
        assert!(!n.zero);
        assert!((n.values[0] - 0.6).abs() < 1e-7);
        assert!((n.values[1] - 0.8).abs() < 1e-7);
    }

    #[test]
    fn unit_vector_is_fixed_point() {
        let v = [0.0f32, 1.0, 0.0];
        assert_eq!(l2_normalize(&v).unwrap().values, v.to_vec());
    }

    #[test]
    fn zero_vector_is_flagged() {
        let n = l2_normalize(&[0.0, 0.0]).unwrap();
        assert!(n.zero);
        assert_eq!(n.values, vec![0.0, 0.0]);
    }

    #[test]
    fn non_finite_is_rejected() {
        assert!(matches!(
            l2_normalize(&[1.0, f32::NAN]),
            Err(Error::NonFinite(_))
        ));
        assert!(matches!(
            l2_normalize(&[f32::INFINITY]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn identity_on_identical_and_antipodal() {
        let x = [0.6f32, 0.8];
        let (l, r) = eq1_identity_check(&x, &x).unwrap();
        assert!(l.abs() < 1e-12 && r.abs() < 1e-7);
        let (l, r) = eq1_identity_check(&x, &[-0.6, -0.8]).unwrap();
        assert!((l - 4.0).abs() < 1e-6 && (r - 4.0).abs() < 1e-6);
    }

    #[test]
    fn identity_rejects_non_unit() {
        assert!(matches!(
            eq1_identity_check(&[3.0, 4.0], &[1.0, 0.0]),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            eq1_identity_check(&[1.0], &[1.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
