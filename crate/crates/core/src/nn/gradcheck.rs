use super::params::ParamVector;
use crate::error::{Error, Result};

/// Central-difference gradient `(f(θ + εe_i) − f(θ − εe_i)) / 2ε`, one
/// coordinate at a time.
pub fn finite_diff_grad<F>(mut lossfn: F, params: &ParamVector, eps: f64) -> Result<ParamVector>
where
    F: FnMut(&ParamVector) -> Result<f64>,
{
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let mut probe = params.clone();
    let mut grad = ParamVector::zeros(params.len());
    for i in 0..params.len() {
        let x = params[i];
        probe[i] = x + eps;
        let up = lossfn(&probe)?;
        probe[i] = x - eps;
        let down = lossfn(&probe)?;
        probe[i] = x;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFinite("finite_diff_grad loss evaluation"));
        }
        grad[i] = (up - down) / (2.0 * eps);
    }
    Ok(grad)
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, or 0 when both vectors are zero.
pub fn relative_l2_error(a: &ParamVector, b: &ParamVector) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}
