//! Fixed-step RK4 and finite differences on uniform grids.

use crate::error::{Error, Result};

/// Number of steps and the uniform step used to reach `t_end` with steps no longer than `dt`.
pub fn uniform_grid(t_end: f64, dt: f64) -> Result<(usize, f64)> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "t_end must be finite and non-negative, got {t_end}"
        )));
    }
    if t_end == 0.0 {
        return Ok((0, dt));
    }
    let steps = ((t_end / dt) - 1e-9).ceil().max(1.0) as usize;
    Ok((steps, t_end / steps as f64))
}

/// One classical RK4 step of `y' = f(y)`.
pub fn rk4_step<F>(y: &[f64], h: f64, mut f: F) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let shifted = |base: &[f64], k: &[f64], s: f64| -> Vec<f64> {
        base.iter().zip(k).map(|(a, b)| a + s * b).collect()
    };
    let k1 = f(y)?;
    let k2 = f(&shifted(y, &k1, 0.5 * h))?;
    let k3 = f(&shifted(y, &k2, 0.5 * h))?;
    let k4 = f(&shifted(y, &k3, h))?;
    Ok(y.iter()
        .enumerate()
        .map(|(i, yi)| yi + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Derivative of uniformly sampled data: five-point central stencil in the interior,
/// three-point central next to the ends and one-sided second order at the ends.
pub fn grid_derivative(values: &[f64], h: f64) -> Result<Vec<f64>> {
    let n = values.len();
    if n < 5 {
        return Err(Error::GridTooShort { needed: 5, got: n });
    }
    let f = values;
    Ok((0..n)
        .map(|i| {
            if i == 0 {
                (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h)
            } else if i == n - 1 {
                (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h)
            } else if i == 1 || i == n - 2 {
                (f[i + 1] - f[i - 1]) / (2.0 * h)
            } else {
                (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * h)
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rounding() {
        assert_eq!(uniform_grid(1.0, 0.01).unwrap().0, 100);
        let (n, h) = uniform_grid(1.0, 0.3).unwrap();
        assert_eq!(n, 4);
        assert!((h - 0.25).abs() < 1e-15);
        assert!(uniform_grid(1.0, 0.0).is_err());
        assert!(uniform_grid(-1.0, 0.1).is_err());
    }

    #[test]
    fn rk4_exponential() {
        let mut y = vec![1.0];
        for _ in 0..100 {
            y = rk4_step(&y, 0.01, |y| Ok(vec![y[0]])).unwrap();
        }
        assert!((y[0] - 1f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn derivative_of_cubic() {
        let h = 0.01;
        let f: Vec<f64> = (0..50).map(|i| (i as f64 * h).powi(3)).collect();
        let d = grid_derivative(&f, h).unwrap();
        for (i, di) in d.iter().enumerate().take(47).skip(2) {
            let t = i as f64 * h;
            assert!((di - 3.0 * t * t).abs() < 1e-10);
        }
        assert!(grid_derivative(&f[..4], h).is_err());
    }
}
