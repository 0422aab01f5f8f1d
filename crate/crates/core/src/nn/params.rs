use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Flat view of every weight and bias of a network.
///
/// Also used for gradients and for per-parameter learning rates, which share
/// the parameter layout coordinate for coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn filled(len: usize, value: f64) -> Self {
        Self(vec![value; len])
    }

    pub fn from_vec(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("ParamVector::from_vec"));
        }
        Ok(Self(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    fn check_len(&self, other: &Self, context: &'static str) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::shape(context, self.len(), other.len()));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_len(other, "ParamVector::add")?;
        Ok(self.zip_map(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_len(other, "ParamVector::sub")?;
        Ok(self.zip_map(other, |a, b| a - b))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_len(other, "ParamVector::mul")?;
        Ok(self.zip_map(other, |a, b| a * b))
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self(self.0.iter().map(|v| v * factor).collect())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self(self.0.iter().map(|&v| f(v)).collect())
    }

    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.check_len(other, "ParamVector::dot")?;
        Ok(dot(&self.0, &other.0))
    }

    pub fn norm(&self) -> f64 {
        dot(&self.0, &self.0).sqrt()
    }

    /// `self += factor * other`, in place.
    pub fn axpy(&mut self, factor: f64, other: &Self) -> Result<()> {
        self.check_len(other, "ParamVector::axpy")?;
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += factor * b;
        }
        Ok(())
    }

    fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(&a, &b)| f(a, b)).collect())
    }
}

impl Index<usize> for ParamVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for ParamVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

/// Dot product with four interleaved partial sums. The summation order is
/// fixed, so results are bitwise reproducible.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

/// Step size for [`sgd_step`]: one scalar, or one value per parameter.
#[derive(Debug, Clone, Copy)]
pub enum LearningRate<'a> {
    Scalar(f64),
    PerParam(&'a ParamVector),
}

/// `params - lr ⊙ grad`. Errors if shapes differ or the result is not finite.
pub fn sgd_step(params: &ParamVector, grad: &ParamVector, lr: LearningRate<'_>) -> Result<ParamVector> {
    params.check_len(grad, "sgd_step")?;
    let out: Vec<f64> = match lr {
        LearningRate::Scalar(a) => params.0.iter().zip(&grad.0).map(|(p, g)| p - a * g).collect(),
        LearningRate::PerParam(a) => {
            params.check_len(a, "sgd_step lr")?;
            params
                .0
                .iter()
                .zip(&grad.0)
                .zip(&a.0)
                .map(|((p, g), a)| p - a * g)
                .collect()
        }
    };
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("sgd_step"));
    }
    Ok(ParamVector(out))
}

/// Rescales `grad` to L2 norm `max_norm` when it is longer than that.
pub fn clip_grad_norm(grad: &ParamVector, max_norm: f64) -> ParamVector {
    assert!(max_norm > 0.0, "max_norm must be positive");
    let norm = grad.norm();
    if norm > max_norm {
        grad.scale(max_norm / norm)
    } else {
        grad.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::from_vec(v.to_vec()).unwrap()
    }

    #[test]
    fn from_vec_rejects_non_finite() {
        assert!(ParamVector::from_vec(vec![1.0, f64::NAN]).is_err());
        assert!(ParamVector::from_vec(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn zero_lr_leaves_params_unchanged() {
        let p = pv(&[1.0, -2.0, 3.5]);
        let g = pv(&[0.3, 0.1, -9.0]);
        assert_eq!(sgd_step(&p, &g, LearningRate::Scalar(0.0)).unwrap(), p);
    }

    #[test]
    fn proportional_step() {
        let p = pv(&[1.0, -2.0, 4.0]);
        let out = sgd_step(&p, &p, LearningRate::Scalar(0.1)).unwrap();
        for (o, x) in out.iter().zip(p.iter()) {
            assert!((o - 0.9 * x).abs() < 1e-15);
        }
    }

    #[test]
    fn per_param_zero_freezes_coordinate() {
        let p = pv(&[1.0, 2.0, 3.0]);
        let g = pv(&[1.0, 1.0, 1.0]);
        let lr = pv(&[0.5, 0.0, 0.25]);
        let out = sgd_step(&p, &g, LearningRate::PerParam(&lr)).unwrap();
        assert_eq!(out.as_slice(), &[0.5, 2.0, 2.75]);
    }

    #[test]
    fn sgd_step_shape_and_overflow_errors() {
        let p = pv(&[1.0, 2.0]);
        assert!(sgd_step(&p, &pv(&[1.0]), LearningRate::Scalar(1.0)).is_err());
        let huge = pv(&[f64::MAX, 0.0]);
        assert!(matches!(
            sgd_step(&huge, &pv(&[-f64::MAX, 0.0]), LearningRate::Scalar(1.0)),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn clipping_cases() {
        let under = pv(&[0.6, 0.8]);
        assert_eq!(clip_grad_norm(&under, 2.0), under);
        let over = pv(&[0.0, 4.0]);
        assert_eq!(clip_grad_norm(&over, 2.0).as_slice(), &[0.0, 2.0]);
        let zero = ParamVector::zeros(3);
        assert_eq!(clip_grad_norm(&zero, 2.0), zero);
    }

    #[test]
    fn dot_matches_naive_sum() {
        let a: Vec<f64> = (0..11).map(|i| i as f64 * 0.5).collect();
        let b: Vec<f64> = (0..11).map(|i| 1.0 - i as f64).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn clip_is_idempotent(v in prop::collection::vec(-50.0f64..50.0, 1..40), max in 0.1f64..10.0) {
            let g = pv(&v);
            let once = clip_grad_norm(&g, max);
            let twice = clip_grad_norm(&once, max);
            prop_assert!(once.norm() <= max * (1.0 + 1e-12));
            for (a, b) in once.iter().zip(twice.iter()) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            }
        }

        #[test]
        fn sgd_step_is_linear_in_grad(
            v in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0), 1..30),
            lr in 0.0f64..1.0,
            c in -3.0f64..3.0,
        ) {
            let p = pv(&v.iter().map(|t| t.0).collect::<Vec<_>>());
            let g1 = pv(&v.iter().map(|t| t.1).collect::<Vec<_>>());
            let g2 = pv(&v.iter().map(|t| t.2).collect::<Vec<_>>());
            // step(p, g1 + c g2) - p == (step(p, g1) - p) + c (step(p, g2) - p)
            let mut comb = g1.clone();
            comb.axpy(c, &g2).unwrap();
            let lhs = sgd_step(&p, &comb, LearningRate::Scalar(lr)).unwrap().sub(&p).unwrap();
            let d1 = sgd_step(&p, &g1, LearningRate::Scalar(lr)).unwrap().sub(&p).unwrap();
            let d2 = sgd_step(&p, &g2, LearningRate::Scalar(lr)).unwrap().sub(&p).unwrap();
            let mut rhs = d1;
            rhs.axpy(c, &d2).unwrap();
            for (a, b) in lhs.iter().zip(rhs.iter()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
