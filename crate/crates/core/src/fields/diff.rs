//! Second-order central differences over the spatial coordinates of an event.

use nalgebra::{Matrix3, Vector3};

use crate::error::Result;
use crate::spinor::FourVector;

fn shifted(event: &FourVector, axis: usize, delta: f64) -> FourVector {
    let mut e = *event;
    e.0[axis + 1] += delta;
    e
}

/// ∂_j f for j = x, y, z.
pub fn gradient<F>(f: F, event: &FourVector, h: f64) -> Result<Vector3<f64>>
where
    F: Fn(&FourVector) -> Result<f64>,
{
    let mut g = Vector3::zeros();
    for j in 0..3 {
        g[j] = (f(&shifted(event, j, h))? - f(&shifted(event, j, -h))?) / (2.0 * h);
    }
    Ok(g)
}

/// `J[(i, j)] = ∂_j v_i`.
pub fn jacobian<F>(v: F, event: &FourVector, h: f64) -> Result<Matrix3<f64>>
where
    F: Fn(&FourVector) -> Result<Vector3<f64>>,
{
    let mut jac = Matrix3::zeros();
    for j in 0..3 {
        let col = (v(&shifted(event, j, h))? - v(&shifted(event, j, -h))?) / (2.0 * h);
        jac.set_column(j, &col);
    }
    Ok(jac)
}

pub fn divergence<F>(v: F, event: &FourVector, h: f64) -> Result<f64>
where
    F: Fn(&FourVector) -> Result<Vector3<f64>>,
{
    Ok(jacobian(v, event, h)?.trace())
}

pub fn curl<F>(v: F, event: &FourVector, h: f64) -> Result<Vector3<f64>>
where
    F: Fn(&FourVector) -> Result<Vector3<f64>>,
{
    Ok(curl_of_jacobian(&jacobian(v, event, h)?))
}

pub fn curl_of_jacobian(j: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(j[(2, 1)] - j[(1, 2)], j[(0, 2)] - j[(2, 0)], j[(1, 0)] - j[(0, 1)])
}

/// ∂_t f by central difference.
pub fn time_derivative<F, T>(f: F, event: &FourVector, h: f64) -> Result<T>
where
    F: Fn(&FourVector) -> Result<T>,
    T: std::ops::Sub<Output = T> + std::ops::Div<f64, Output = T>,
{
    let mut plus = *event;
    plus.0[0] += h;
    let mut minus = *event;
    minus.0[0] -= h;
    Ok((f(&plus)? - f(&minus)?) / (2.0 * h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::parse_field_expression;

    #[test]
    fn gradient_of_square() {
        let e = parse_field_expression("x^2").unwrap();
        let g = gradient(|ev| e.eval(ev), &FourVector::new(0.0, 3.0, 0.0, 0.0), 1e-4).unwrap();
        assert!((g.x - 6.0).abs() < 1e-6);
        assert_eq!(g.y, 0.0);
    }

    #[test]
    fn error_is_second_order() {
        // f = sin(x) exp(y/2): third derivatives are O(1), so halving h
        // should divide the error by about four.
        let e = parse_field_expression("sin(x) * exp(y / 2)").unwrap();
        let ev = FourVector::new(0.0, 0.7, 0.3, 0.0);
        let exact = 0.7f64.cos() * (0.15f64).exp();
        let err = |h: f64| (gradient(|p| e.eval(p), &ev, h).unwrap().x - exact).abs();
        for h in [0.1, 0.05, 0.02] {
            let ratio = err(h) / err(h / 2.0);
            assert!((3.5..=4.5).contains(&ratio), "ratio {ratio} at h {h}");
        }
    }
}
