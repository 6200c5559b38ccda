//! Adaptive Dormand–Prince 5(4) integrator for real or complex state vectors.

use std::ops::{Add, Mul};

use crate::error::{Error, Result};
use crate::quantum::C64;

/// Scalar type an ODE state is made of.
pub trait OdeValue: Copy + Default + Send + Sync + Add<Output = Self> + Mul<f64, Output = Self> {
    fn magnitude(self) -> f64;
}

impl OdeValue for f64 {
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl OdeValue for C64 {
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-8, atol: 1e-10 }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Difference between the fifth- and fourth-order weights.
const E: [f64; 7] =
    [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];

const MIN_RELATIVE_STEP: f64 = 1e-12;

/// Reusable stepper holding the stage buffers and the current step-size guess.
#[derive(Clone, Debug)]
pub struct Stepper<T> {
    tol: Tolerances,
    h: f64,
    k: [Vec<T>; 7],
    stage: Vec<T>,
    err: Vec<T>,
    pub rhs_evaluations: usize,
    pub rejected_steps: usize,
}

impl<T: OdeValue> Stepper<T> {
    pub fn new(dim: usize, tol: Tolerances, initial_step: f64) -> Self {
        Self {
            tol,
            h: initial_step,
            k: std::array::from_fn(|_| vec![T::default(); dim]),
            stage: vec![T::default(); dim],
            err: vec![T::default(); dim],
            rhs_evaluations: 0,
            rejected_steps: 0,
        }
    }

    pub fn step_size(&self) -> f64 {
        self.h
    }

    /// One Dormand–Prince step of size `h` from `(t, y)`; returns the scaled error norm.
    #[allow(clippy::needless_range_loop)]
    pub fn trial_step<F>(&mut self, rhs: &mut F, t: f64, y: &[T], h: f64, y_out: &mut [T]) -> f64
    where
        F: FnMut(f64, &[T], &mut [T]),
    {
        let n = y.len();
        rhs(t, y, &mut self.k[0]);
        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for (j, &a) in A[s][..s].iter().enumerate() {
                    if a != 0.0 {
                        acc = acc + self.k[j][i] * (h * a);
                    }
                }
                self.stage[i] = acc;
            }
            rhs(t + C[s] * h, &self.stage, &mut self.k[s]);
        }
        self.rhs_evaluations += 7;
        // the seventh stage was evaluated at the fifth-order solution
        y_out.copy_from_slice(&self.stage);
        let mut sum = 0.0;
        for i in 0..n {
            let mut e = T::default();
            for (s, &w) in E.iter().enumerate() {
                if w != 0.0 {
                    e = e + self.k[s][i] * (h * w);
                }
            }
            self.err[i] = e;
            let scale = self.tol.atol + self.tol.rtol * y[i].magnitude().max(y_out[i].magnitude());
            let r = e.magnitude() / scale;
            sum += r * r;
        }
        (sum / n.max(1) as f64).sqrt()
    }

    /// Takes one accepted adaptive step from `t` towards `t_end` without passing it.
    /// Updates `t` and `y` in place and returns the size of the accepted step.
    pub fn advance<F>(&mut self, rhs: &mut F, t: &mut f64, y: &mut [T], t_end: f64, scratch: &mut [T]) -> Result<f64>
    where
        F: FnMut(f64, &[T], &mut [T]),
    {
        loop {
            let remaining = t_end - *t;
            let h = self.h.min(remaining);
            if h <= MIN_RELATIVE_STEP * t.abs().max(1.0) && remaining > h {
                return Err(Error::Stiffness { t: *t, h });
            }
            let err = self.trial_step(rhs, *t, y, h, scratch);
            if !err.is_finite() {
                self.rejected_steps += 1;
                self.h = h * 0.2;
                continue;
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                *t = if h == remaining { t_end } else { *t + h };
                y.copy_from_slice(scratch);
                // do not let a final clipped step shrink the running estimate
                self.h = if h < self.h { self.h.max(h * factor) } else { h * factor };
                return Ok(h);
            }
            self.rejected_steps += 1;
            self.h = h * factor.min(1.0);
        }
    }
}

/// Integrates `y' = f(t, y)` from `t_out[0]`, calling `observe(i, t_out[i], y)` at every
/// requested output time. `t_out` must be non-decreasing.
pub fn integrate<T, F, O>(mut rhs: F, mut y: Vec<T>, t_out: &[f64], tol: Tolerances, mut observe: O) -> Result<Vec<T>>
where
    T: OdeValue,
    F: FnMut(f64, &[T], &mut [T]),
    O: FnMut(usize, f64, &[T]),
{
    let Some(&t0) = t_out.first() else {
        return Ok(y);
    };
    if t_out.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Domain("output times must be non-decreasing".into()));
    }
    let span = t_out[t_out.len() - 1] - t0;
    let mut stepper = Stepper::new(y.len(), tol, if span > 0.0 { (span * 1e-3).min(1e-2) } else { 1e-2 });
    let mut scratch = y.clone();
    let mut t = t0;
    for (i, &target) in t_out.iter().enumerate() {
        while t < target {
            stepper.advance(&mut rhs, &mut t, &mut y, target, &mut scratch)?;
        }
        observe(i, t, &y);
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_is_accurate() {
        let times: Vec<f64> = (0..=10).map(|k| k as f64).collect();
        let mut got = vec![0.0; times.len()];
        integrate(
            |_, y: &[f64], dy: &mut [f64]| dy[0] = -0.7 * y[0],
            vec![2.0],
            &times,
            Tolerances::default(),
            |i, _, y| got[i] = y[0],
        )
        .unwrap();
        for (t, g) in times.iter().zip(&got) {
            let exact = 2.0 * (-0.7 * t).exp();
            assert!((g - exact).abs() < 1e-8, "{t}: {g} vs {exact}");
        }
    }

    #[test]
    fn complex_rotation_keeps_modulus() {
        let times = [0.0, 50.0];
        let y = integrate(
            |_, y: &[C64], dy: &mut [C64]| dy[0] = y[0] * C64::new(0.0, -1.0),
            vec![C64::new(1.0, 0.0)],
            &times,
            Tolerances::default(),
            |_, _, _| {},
        )
        .unwrap();
        assert!((y[0] - C64::from_polar(1.0, -50.0)).norm() < 1e-6);
    }

    #[test]
    fn stiff_blowup_reports_stiffness() {
        let r = integrate(
            |_, y: &[f64], dy: &mut [f64]| dy[0] = y[0] * y[0],
            vec![1.0],
            &[0.0, 2.0],
            Tolerances::default(),
            |_, _, _| {},
        );
        assert!(matches!(r, Err(Error::Stiffness { .. })));
    }
}
