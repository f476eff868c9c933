//! C¹ cubic Hermite interpolation on a uniform grid with tabulated values
//! and first derivatives.  Interpolation error is O(h⁴·‖f⁗‖) per cell; the
//! derivative evaluation is the analytic derivative of the interpolant.

/// Uniform-grid Hermite interpolant.
#[derive(Debug, Clone)]
pub struct Hermite1d {
    pub x0: f64,
    pub h: f64,
    pub y: Vec<f64>,
    pub dy: Vec<f64>,
}

impl Hermite1d {
    pub fn new(x0: f64, h: f64, y: Vec<f64>, dy: Vec<f64>) -> Self {
        assert!(y.len() == dy.len() && y.len() >= 2 && h > 0.0);
        Hermite1d { x0, h, y, dy }
    }

    pub fn x_max(&self) -> f64 {
        self.x0 + self.h * (self.y.len() - 1) as f64
    }

    fn cell(&self, x: f64) -> (usize, f64) {
        let s = (x - self.x0) / self.h;
        let i = (s.floor() as isize).clamp(0, self.y.len() as isize - 2) as usize;
        (i, s - i as f64)
    }

    /// Value at `x`; extrapolates with the edge cell's cubic if out of range.
    pub fn eval(&self, x: f64) -> f64 {
        let (i, t) = self.cell(x);
        let (y0, y1, d0, d1) = (self.y[i], self.y[i + 1], self.dy[i], self.dy[i + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * self.h * d0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * self.h * d1
    }

    /// Derivative of the interpolant at `x`.
    pub fn eval_deriv(&self, x: f64) -> f64 {
        let (i, t) = self.cell(x);
        let (y0, y1, d0, d1) = (self.y[i], self.y[i + 1], self.dy[i], self.dy[i + 1]);
        let t2 = t * t;
        ((6.0 * t2 - 6.0 * t) * y0
            + (3.0 * t2 - 4.0 * t + 1.0) * self.h * d0
            + (-6.0 * t2 + 6.0 * t) * y1
            + (3.0 * t2 - 2.0 * t) * self.h * d1)
            / self.h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn build(f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64, x0: f64, h: f64, n: usize) -> Hermite1d {
        let y: Vec<f64> = (0..n).map(|i| f(x0 + h * i as f64)).collect();
        let dy: Vec<f64> = (0..n).map(|i| df(x0 + h * i as f64)).collect();
        Hermite1d::new(x0, h, y, dy)
    }

    #[test]
    fn cubic_polynomials_are_reproduced_exactly() {
        let f = |x: f64| 1.0 - 2.0 * x + 0.5 * x * x + 0.25 * x * x * x;
        let df = |x: f64| -2.0 + x + 0.75 * x * x;
        let it = build(f, df, -1.0, 0.37, 12);
        for k in 0..200 {
            let x = -1.0 + 0.02 * k as f64;
            if x > it.x_max() {
                break;
            }
            assert!((it.eval(x) - f(x)).abs() < 1e-13);
            assert!((it.eval_deriv(x) - df(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn fourth_order_convergence_on_smooth_function() {
        let f = |x: f64| (2.0 * x).sin() * (-x).exp();
        let df = |x: f64| 2.0 * (2.0 * x).cos() * (-x).exp() - (2.0 * x).sin() * (-x).exp();
        let err = |h: f64| {
            let n = (4.0 / h) as usize + 1;
            let it = build(f, df, 0.0, h, n);
            let mut e = 0.0_f64;
            for k in 0..1000 {
                let x = 0.001 + k as f64 * (3.8 / 1000.0);
                e = e.max((it.eval(x) - f(x)).abs());
            }
            e
        };
        let (e1, e2) = (err(0.1), err(0.05));
        let ratio = e1 / e2;
        assert!(ratio > 12.0 && ratio < 20.0, "expected ~16, got {ratio} ({e1:e}/{e2:e})");
    }

    #[test]
    fn nodes_are_interpolated() {
        let it = build(|x| x.exp(), |x| x.exp(), 0.0, 0.25, 9);
        for i in 0..9 {
            let x = 0.25 * i as f64;
            assert!((it.eval(x) - x.exp()).abs() < 1e-14 * x.exp());
        }
    }
}
