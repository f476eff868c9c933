//! Explicit Dormand–Prince 5(4) integrator with fourth-order dense output
//! and a PI-free step controller (classic error-power rule with safety
//! factor and step clamps).  Integration direction follows sign(t1 − t0).

use crate::{Error, Result};

/// Right-hand side of an autonomous-or-not first-order system y' = f(t, y).
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dydt: &mut [f64]);
}

/// Blanket impl so closures can be passed directly where convenient.
pub struct FnSystem<F: Fn(f64, &[f64], &mut [f64])> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(f64, &[f64], &mut [f64])> OdeSystem for FnSystem<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn rhs(&self, t: f64, y: &[f64], dydt: &mut [f64]) {
        (self.f)(t, y, dydt)
    }
}

// Butcher tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [0.2];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
// b − b̂: weights of the embedded fourth-order error estimate.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// Dense-output weights.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Dense-output polynomial for one accepted step.
///
/// `eval` reproduces the fifth-order solution at the step ends and is
/// fourth-order accurate inside.
#[derive(Debug, Clone)]
pub struct DenseStep {
    pub t0: f64,
    pub h: f64,
    r1: Vec<f64>,
    r2: Vec<f64>,
    r3: Vec<f64>,
    r4: Vec<f64>,
    r5: Vec<f64>,
}

impl DenseStep {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    /// Evaluate the interpolant at `t` (intended for t within the step).
    pub fn eval(&self, t: f64, out: &mut [f64]) {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        for i in 0..out.len() {
            out[i] = self.r1[i]
                + th * (self.r2[i] + th1 * (self.r3[i] + th * (self.r4[i] + th1 * self.r5[i])));
        }
    }
}

/// Full trajectory: accepted steps with dense coefficients.
#[derive(Debug, Clone)]
pub struct Solution {
    pub steps: Vec<DenseStep>,
    pub t0: f64,
    pub t_end: f64,
    pub y_end: Vec<f64>,
    pub n_accepted: usize,
    pub n_rejected: usize,
}

impl Solution {
    /// Sample the dense output at time `t` (clamped to the integration span).
    pub fn sample(&self, t: f64, out: &mut [f64]) {
        debug_assert!(!self.steps.is_empty());
        let fwd = self.t_end >= self.t0;
        // Binary search for the step containing t.
        let mut lo = 0usize;
        let mut hi = self.steps.len() - 1;
        while lo < hi {
            let mid = (lo + hi) / 2;
            let after_mid = if fwd { t > self.steps[mid].t1() } else { t < self.steps[mid].t1() };
            if after_mid {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        self.steps[lo].eval(t, out);
    }

    pub fn sample_vec(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.y_end.len()];
        self.sample(t, &mut out);
        out
    }
}

/// What the per-step observer tells the driver to do.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepControl {
    Continue,
    /// Stop after this step (trajectory keeps the step).
    Stop,
}

/// Integrator configuration.
#[derive(Debug, Clone, Copy)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; `None` picks h from the first derivative scale.
    pub h_init: Option<f64>,
    /// Maximum |step|; `f64::INFINITY` to disable.
    pub h_max: f64,
    pub max_steps: usize,
    /// Keep dense coefficients (turn off for event-scan shooting passes
    /// where only the final state matters).
    pub store_dense: bool,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Dopri5 { rtol: 1e-10, atol: 1e-10, h_init: None, h_max: f64::INFINITY, max_steps: 10_000_000, store_dense: true }
    }
}

impl Dopri5 {
    pub fn solve<S: OdeSystem>(&self, sys: &S, t0: f64, y0: &[f64], t1: f64) -> Result<Solution> {
        self.solve_observed(sys, t0, y0, t1, |_, _| StepControl::Continue)
    }

    /// Integrate with a per-accepted-step observer: `obs(t, y)` is called at
    /// the end of each accepted step and may stop the integration early
    /// (event handling at step granularity).
    pub fn solve_observed<S: OdeSystem, O: FnMut(f64, &[f64]) -> StepControl>(
        &self,
        sys: &S,
        t0: f64,
        y0: &[f64],
        t1: f64,
        mut obs: O,
    ) -> Result<Solution> {
        let n = sys.dim();
        assert_eq!(y0.len(), n);
        let dir = if t1 >= t0 { 1.0 } else { -1.0 };
        let span = (t1 - t0).abs();
        let mut y = y0.to_vec();
        let mut t = t0;
        let mut k: Vec<Vec<f64>> = (0..7).map(|_| vec![0.0; n]).collect();
        let mut ytmp = vec![0.0; n];
        let mut y_new = vec![0.0; n];
        sys.rhs(t, &y, &mut k[0]);

        // Initial step from derivative scale unless given.
        let mut h = match self.h_init {
            Some(h0) => h0.abs().min(self.h_max) * dir,
            None => {
                let ynorm = y.iter().map(|v| v.abs()).fold(0.0_f64, f64::max).max(1e-8);
                let fnorm = k[0].iter().map(|v| v.abs()).fold(0.0_f64, f64::max);
                let guess = if fnorm > 0.0 { 0.01 * ynorm / fnorm } else { span * 1e-3 };
                guess.min(span).min(self.h_max).max(span * 1e-12) * dir
            }
        };

        let mut sol = Solution {
            steps: Vec::new(),
            t0,
            t_end: t0,
            y_end: y.clone(),
            n_accepted: 0,
            n_rejected: 0,
        };
        if span == 0.0 {
            return Ok(sol);
        }

        loop {
            if sol.n_accepted + sol.n_rejected > self.max_steps {
                return Err(Error::ToleranceNotReached { achieved: (t1 - t).abs(), requested: 0.0 });
            }
            // Trim the final step exactly onto t1.
            if (t + h - t1) * dir > 0.0 {
                h = t1 - t;
            }
            if h.abs() < 1e-14 * t.abs().max(1.0) {
                return Err(Error::StepSizeUnderflow { t });
            }

            // Stage evaluations (k[0] is fresh: FSAL).
            macro_rules! stage {
                ($idx:expr, $coef:expr) => {{
                    for i in 0..n {
                        let mut acc = 0.0;
                        for (j, c) in $coef.iter().enumerate() {
                            acc += c * k[j][i];
                        }
                        ytmp[i] = y[i] + h * acc;
                    }
                    let (head, tail) = k.split_at_mut($idx);
                    let _ = head;
                    sys.rhs(t + C[$idx] * h, &ytmp, &mut tail[0]);
                }};
            }
            stage!(1, A2);
            stage!(2, A3);
            stage!(3, A4);
            stage!(4, A5);
            stage!(5, A6);
            // Sixth stage lands on t + h with the fifth-order weights: y_new.
            for i in 0..n {
                let mut acc = 0.0;
                for j in 0..6 {
                    acc += B[j] * k[j][i];
                }
                y_new[i] = y[i] + h * acc;
            }
            sys.rhs(t + h, &y_new, &mut k[6]);

            // Error norm: RMS of err_i / (atol + rtol·max(|y_i|, |y_new_i|)).
            let mut err = 0.0;
            for i in 0..n {
                let mut e = 0.0;
                for j in 0..7 {
                    e += E[j] * k[j][i];
                }
                e *= h;
                let sc = self.atol + self.rtol * y[i].abs().max(y_new[i].abs());
                err += (e / sc) * (e / sc);
            }
            err = (err / n as f64).sqrt();

            if err <= 1.0 {
                // Accept.
                if self.store_dense {
                    let mut r1 = vec![0.0; n];
                    let mut r2 = vec![0.0; n];
                    let mut r3 = vec![0.0; n];
                    let mut r4 = vec![0.0; n];
                    let mut r5 = vec![0.0; n];
                    for i in 0..n {
                        let ydiff = y_new[i] - y[i];
                        let bspl = h * k[0][i] - ydiff;
                        r1[i] = y[i];
                        r2[i] = ydiff;
                        r3[i] = bspl;
                        r4[i] = ydiff - h * k[6][i] - bspl;
                        let mut acc = 0.0;
                        for j in 0..7 {
                            acc += D[j] * k[j][i];
                        }
                        r5[i] = h * acc;
                    }
                    sol.steps.push(DenseStep { t0: t, h, r1, r2, r3, r4, r5 });
                }
                t += h;
                y.copy_from_slice(&y_new);
                k.swap(0, 6); // FSAL: k7 becomes k1 of the next step.
                sol.n_accepted += 1;
                sol.t_end = t;
                sol.y_end.copy_from_slice(&y);
                let stop = obs(t, &y) == StepControl::Stop;
                if stop || (t - t1) * dir >= 0.0 {
                    return Ok(sol);
                }
            } else {
                sol.n_rejected += 1;
            }
            if !err.is_finite() {
                // NaN/overflow in stages: shrink hard.
                h *= 0.1;
                continue;
            }
            let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 5.0);
            h = (h * fac).clamp(-self.h_max, self.h_max);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Exp;
    impl OdeSystem for Exp {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, _t: f64, y: &[f64], dydt: &mut [f64]) {
            dydt[0] = y[0];
        }
    }

    #[test]
    fn exponential_growth() {
        let sol = Dopri5 { rtol: 1e-12, atol: 1e-12, ..Default::default() }
            .solve(&Exp, 0.0, &[1.0], 1.0)
            .unwrap();
        assert!((sol.y_end[0] - std::f64::consts::E).abs() < 1e-11);
    }

    struct Oscillator;
    impl OdeSystem for Oscillator {
        fn dim(&self) -> usize {
            2
        }
        fn rhs(&self, _t: f64, y: &[f64], dydt: &mut [f64]) {
            dydt[0] = y[1];
            dydt[1] = -y[0];
        }
    }

    #[test]
    fn harmonic_oscillator_long_run() {
        // 100 periods; energy drift bounded by the tolerance scale.
        let t1 = 200.0 * std::f64::consts::PI;
        let sol = Dopri5 { rtol: 1e-12, atol: 1e-12, ..Default::default() }
            .solve(&Oscillator, 0.0, &[1.0, 0.0], t1)
            .unwrap();
        assert!((sol.y_end[0] - 1.0).abs() < 1e-8, "cos drift {}", sol.y_end[0] - 1.0);
        assert!(sol.y_end[1].abs() < 1e-8);
    }

    #[test]
    fn dense_output_matches_analytic_solution() {
        let sol = Dopri5 { rtol: 1e-12, atol: 1e-12, ..Default::default() }
            .solve(&Oscillator, 0.0, &[1.0, 0.0], 10.0)
            .unwrap();
        let mut y = [0.0; 2];
        for i in 0..=100 {
            let t = 0.1 * i as f64;
            sol.sample(t, &mut y);
            assert!((y[0] - t.cos()).abs() < 1e-9, "t={t}: {} vs {}", y[0], t.cos());
            assert!((y[1] + t.sin()).abs() < 1e-9);
        }
    }

    #[test]
    fn backward_integration() {
        let sol = Dopri5 { rtol: 1e-12, atol: 1e-12, ..Default::default() }
            .solve(&Exp, 0.0, &[1.0], -1.0)
            .unwrap();
        assert!((sol.y_end[0] - (-1.0_f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn observer_stops_early() {
        let sol = Dopri5::default()
            .solve_observed(&Exp, 0.0, &[1.0], 10.0, |_, y| {
                if y[0] > 5.0 {
                    StepControl::Stop
                } else {
                    StepControl::Continue
                }
            })
            .unwrap();
        assert!(sol.t_end < 10.0);
        assert!(sol.y_end[0] >= 5.0);
    }

    #[test]
    fn final_time_is_hit_exactly() {
        let sol = Dopri5::default().solve(&Oscillator, 0.0, &[1.0, 0.0], 7.3).unwrap();
        assert_eq!(sol.t_end, 7.3);
    }
}
