//! Classical fixed-step fourth-order Runge-Kutta integration.
//!
//! Fixed grids keep regression outputs bit-stable; the moment systems are
//! linear and non-stiff at the rates this toolkit targets, so adaptive
//! stepping would buy nothing.

use super::{Matrix, NumericsError};

/// Time-indexed solution table emitted by the integrators.
#[derive(Debug, Clone)]
pub struct OdeSolution {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl OdeSolution {
    /// State at the grid point closest to `t`.
    pub fn at(&self, t: f64) -> &[f64] {
        let idx = self
            .times
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| (*a - t).abs().partial_cmp(&(*b - t).abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        &self.states[idx]
    }

    pub fn last(&self) -> &[f64] {
        self.states.last().unwrap()
    }
}

/// Integrate `y' = f(t, y)` from 0 to `t_end` with step `h`, recording the
/// state at every grid point. A shorter final step lands exactly on `t_end`.
pub fn rk4_integrate(
    f: impl Fn(f64, &[f64]) -> Vec<f64>,
    y0: Vec<f64>,
    t_end: f64,
    h: f64,
) -> Result<OdeSolution, NumericsError> {
    assert!(h > 0.0, "step size must be positive");
    assert!(t_end >= 0.0, "integration horizon must be non-negative");
    let mut times = vec![0.0];
    let mut states = vec![y0.clone()];
    let mut y = y0;
    let mut t = 0.0;

    let full_steps = (t_end / h + 1e-12).floor() as usize;
    for step in 0..full_steps {
        y = rk4_step(&f, t, &y, h);
        t = (step + 1) as f64 * h;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(NumericsError::NonFinite(format!(
                "RK4 integration at t = {t} (step {h})"
            )));
        }
        times.push(t);
        states.push(y.clone());
    }
    let remainder = t_end - t;
    if remainder > 1e-12 * h.max(t_end) {
        y = rk4_step(&f, t, &y, remainder);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(NumericsError::NonFinite(format!(
                "RK4 integration at t = {t_end} (final partial step)"
            )));
        }
        times.push(t_end);
        states.push(y);
    }
    Ok(OdeSolution { times, states })
}

fn rk4_step(f: &impl Fn(f64, &[f64]) -> Vec<f64>, t: f64, y: &[f64], h: f64) -> Vec<f64> {
    let k1 = f(t, y);
    let y2: Vec<f64> = y.iter().zip(&k1).map(|(yi, k)| yi + 0.5 * h * k).collect();
    let k2 = f(t + 0.5 * h, &y2);
    let y3: Vec<f64> = y.iter().zip(&k2).map(|(yi, k)| yi + 0.5 * h * k).collect();
    let k3 = f(t + 0.5 * h, &y3);
    let y4: Vec<f64> = y.iter().zip(&k3).map(|(yi, k)| yi + h * k).collect();
    let k4 = f(t + h, &y4);
    y.iter()
        .enumerate()
        .map(|(i, yi)| yi + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Integrate the linear system `y' = A y + forcing(t)` on a fixed grid.
pub fn integrate_linear_ode(
    a: &Matrix,
    forcing: impl Fn(f64) -> Vec<f64>,
    y0: Vec<f64>,
    t_end: f64,
    h: f64,
) -> Result<OdeSolution, NumericsError> {
    assert_eq!(a.rows(), y0.len(), "state dimension mismatch");
    rk4_integrate(
        |t, y| {
            let mut dy = a.apply(y);
            for (d, f) in dy.iter_mut().zip(forcing(t)) {
                *d += f;
            }
            dy
        },
        y0,
        t_end,
        h,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_forcing_is_exact() {
        // y' = c: RK4 is exact for polynomial solutions of degree <= 4.
        let a = Matrix::zeros(2, 2);
        let sol = integrate_linear_ode(&a, |_| vec![2.0, -1.0], vec![1.0, 1.0], 3.0, 0.5).unwrap();
        let last = sol.last();
        assert_abs_diff_eq!(last[0], 1.0 + 2.0 * 3.0, epsilon = 1e-13);
        assert_abs_diff_eq!(last[1], 1.0 - 3.0, epsilon = 1e-13);
    }

    #[test]
    fn exponential_decay() {
        let a = Matrix::diagonal(&[-1.0]);
        let sol = integrate_linear_ode(&a, |_| vec![0.0], vec![1.0], 1.0, 0.01).unwrap();
        assert_abs_diff_eq!(sol.last()[0], (-1.0f64).exp(), epsilon = 1e-9);
    }

    #[test]
    fn order_four_convergence() {
        // Error ratio between steps h and h/2 should be close to 16.
        let a = Matrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]);
        let y0 = vec![1.0, 0.0];
        let exact = (2.0f64.cos(), -(2.0f64.sin()));
        let err = |h: f64| {
            let sol = integrate_linear_ode(&a, |_| vec![0.0, 0.0], y0.clone(), 2.0, h).unwrap();
            let last = sol.last();
            ((last[0] - exact.0).powi(2) + (last[1] - exact.1).powi(2)).sqrt()
        };
        let ratio = err(0.1) / err(0.05);
        assert!(
            (12.0..=20.0).contains(&ratio),
            "convergence ratio {ratio} outside [12, 20]"
        );
    }

    #[test]
    fn partial_final_step_lands_on_horizon() {
        let a = Matrix::diagonal(&[-0.5]);
        let sol = integrate_linear_ode(&a, |_| vec![0.0], vec![1.0], 0.95, 0.1).unwrap();
        assert_abs_diff_eq!(*sol.times.last().unwrap(), 0.95, epsilon = 1e-12);
        // Coarse step: only the grid placement is under test here.
        assert_abs_diff_eq!(sol.last()[0], (-0.5f64 * 0.95).exp(), epsilon = 1e-7);
    }

    #[test]
    fn nan_in_derivative_is_reported() {
        let res = rk4_integrate(|_, _| vec![f64::NAN], vec![1.0], 1.0, 0.1);
        assert!(matches!(res, Err(NumericsError::NonFinite(_))));
    }
}
