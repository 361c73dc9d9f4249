//! Pathwise gradients with forward-mode jets, and the finite-difference
//! oracle they are checked against.

use crate::error::{Error, Result};
use crate::math::{Jet, Real};

/// Tangent lanes per forward pass; longer parameter vectors take several.
pub const LANES: usize = 8;

/// A scalar loss over a flat parameter vector, generic over the scalar so
/// the same code yields values and derivatives. `iteration` selects the
/// sample pattern when sampling is not frozen.
pub trait Objective: Sync {
    fn eval<T: Real>(&self, x: &[T], iteration: usize) -> Result<T>;
}

pub fn value(obj: &impl Objective, x: &[f64], iteration: usize) -> Result<f64> {
    obj.eval(x, iteration)
}

/// Loss value and gradient over the coordinates in `free`; the other
/// entries of the gradient are zero.
pub fn value_and_grad(
    obj: &impl Objective,
    x: &[f64],
    free: &[usize],
    names: &[String],
    iteration: usize,
) -> Result<(f64, Vec<f64>)> {
    let mut grad = vec![0.0; x.len()];
    if free.is_empty() {
        return Ok((obj.eval(x, iteration)?, grad));
    }
    let mut val = f64::NAN;
    for chunk in free.chunks(LANES) {
        let mut xj: Vec<Jet<LANES>> = x.iter().map(|&v| Jet::constant(v)).collect();
        for (lane, &i) in chunk.iter().enumerate() {
            xj[i] = Jet::variable(x[i], lane);
        }
        let out = obj.eval(&xj, iteration)?;
        val = out.v;
        for (lane, &i) in chunk.iter().enumerate() {
            let g = out.d[lane];
            if !g.is_finite() {
                return Err(Error::NonFiniteGradient(names.get(i).cloned().unwrap_or_else(|| format!("x[{i}]"))));
            }
            grad[i] = g;
        }
    }
    if !val.is_finite() {
        return Err(Error::NonFinite {
            field: "loss".into(),
            index: iteration,
        });
    }
    Ok((val, grad))
}

/// Derivative of the loss along `dir`.
pub fn directional(obj: &impl Objective, x: &[f64], dir: &[f64], iteration: usize) -> Result<f64> {
    assert_eq!(x.len(), dir.len());
    let xj: Vec<Jet<1>> = x.iter().zip(dir).map(|(&v, &d)| Jet::with_tangent(v, [d])).collect();
    let out = obj.eval(&xj, iteration)?;
    if !out.d[0].is_finite() {
        return Err(Error::NonFiniteGradient("directional derivative".into()));
    }
    Ok(out.d[0])
}

/// Central difference `(f(x + h v) - f(x - h v)) / 2h` with the same samples.
pub fn central_difference(obj: &impl Objective, x: &[f64], dir: &[f64], h: f64, iteration: usize) -> Result<f64> {
    let step = |s: f64| -> Vec<f64> { x.iter().zip(dir).map(|(&v, &d)| v + s * d).collect() };
    let fp = obj.eval(&step(h), iteration)?;
    let fm = obj.eval(&step(-h), iteration)?;
    Ok((fp - fm) / (2.0 * h))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Rosenbrock;

    impl Objective for Rosenbrock {
        fn eval<T: Real>(&self, x: &[T], _: usize) -> Result<T> {
            let mut f = T::zero();
            for i in 0..x.len() - 1 {
                let a = T::one() - x[i];
                let b = x[i + 1] - x[i] * x[i];
                f += a * a + b * b * 100.0;
            }
            Ok(f)
        }
    }

    #[test]
    fn chunked_gradient_matches_hand_derivative() {
        let x: Vec<f64> = (0..19).map(|i| 0.1 * i as f64 - 0.7).collect();
        let free: Vec<usize> = (0..19).collect();
        let names: Vec<String> = (0..19).map(|i| format!("x{i}")).collect();
        let (v, g) = value_and_grad(&Rosenbrock, &x, &free, &names, 0).unwrap();
        assert_eq!(v, Rosenbrock.eval(&x, 0).unwrap());
        for i in 0..19 {
            let mut h = 0.0;
            if i + 1 < 19 {
                h += -2.0 * (1.0 - x[i]) - 400.0 * x[i] * (x[i + 1] - x[i] * x[i]);
            }
            if i > 0 {
                h += 200.0 * (x[i] - x[i - 1] * x[i - 1]);
            }
            assert!((g[i] - h).abs() < 1e-9 * h.abs().max(1.0), "{i}: {} vs {h}", g[i]);
        }
    }

    #[test]
    fn frozen_coordinates_get_zero_gradient() {
        let x = vec![0.3, -0.2, 0.5];
        let names = vec!["a".into(), "b".into(), "c".into()];
        let (_, g) = value_and_grad(&Rosenbrock, &x, &[1], &names, 0).unwrap();
        assert_eq!(g[0], 0.0);
        assert_eq!(g[2], 0.0);
        assert!(g[1] != 0.0);
    }

    #[test]
    fn directional_agrees_with_central_difference() {
        let x = vec![0.3, -0.2, 0.5, 0.9];
        let v = vec![0.2, -0.4, 0.1, 0.7];
        let d = directional(&Rosenbrock, &x, &v, 0).unwrap();
        let fd = central_difference(&Rosenbrock, &x, &v, 1e-5, 0).unwrap();
        assert!((d - fd).abs() < 1e-6 * d.abs());
    }

    struct Sqrt;

    impl Objective for Sqrt {
        fn eval<T: Real>(&self, x: &[T], _: usize) -> Result<T> {
            Ok(x[0].sqrt())
        }
    }

    #[test]
    fn non_finite_gradient_names_the_parameter() {
        let r = value_and_grad(&Sqrt, &[0.0], &[0], &["lamp.w[0]".into()], 0);
        match r {
            Err(Error::NonFiniteGradient(p)) => assert_eq!(p, "lamp.w[0]"),
            other => panic!("{other:?}"),
        }
    }
}
