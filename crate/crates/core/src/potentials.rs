//! Radial external potentials 𝒱(x) = V(|x|): smooth parametrized families
//! with closed-form derivatives up to third order, a λ-rescaling wrapper
//! V_λ(x) = 𝒱(λx), and tail classification.
//!
//! A potential is *fast* when lim sup r⁻¹ ln(1/V) > 0 and *slow* when
//! V = e^{−h} with h(r) = o(r).  Fast tails are put in the normal form
//!
//! ```text
//!     V(r) = κ e^{−2r − (d−1) ln r ± H(r)},   H ≥ 0 on [r₀, ∞),
//! ```
//!
//! by splitting W(r) = V(r) e^{2r} r^{d−1} as κ = W(r₀) and
//! H = ±ln(W/κ); the sign is the tail trend of W (ties toward +), and the
//! product κ e^{±H} = W is invariant under the κ ↔ H split.  Slow tails
//! expose h = −ln V with derivatives to third order instead.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Start of the tail regime for exponential-type families.
pub const R0_EXP: f64 = 1.0;
/// Start of the tail regime for power-law families.
pub const R0_POW: f64 = 2.0;

/// Growth modifier on top of the soliton-squared decay e^{−2s}, applied to
/// s = √(1+r²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HDescriptor {
    Zero,
    Linear { a: f64 },
    Sqrt { b: f64 },
}

impl HDescriptor {
    /// (H, H′, H″, H‴) with respect to s.
    fn derivs(&self, s: f64) -> [f64; 4] {
        match *self {
            HDescriptor::Zero => [0.0; 4],
            HDescriptor::Linear { a } => [a * s, a, 0.0, 0.0],
            HDescriptor::Sqrt { b } => {
                let sq = s.sqrt();
                [b * sq, 0.5 * b / sq, -0.25 * b / (s * sq), 0.375 * b / (s * s * sq)]
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailSign {
    Plus,
    Minus,
}

/// Potential family with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum Family {
    /// V = C e^{−c√(1+r²)} (fast, rate c).
    ExpSqrt {
        #[serde(rename = "C")]
        amplitude: f64,
        c: f64,
    },
    /// V = C (1+r²)^{−ρ/2} (slow).
    PowerLaw {
        #[serde(rename = "C")]
        amplitude: f64,
        rho: f64,
    },
    /// V = κ s^{−(d−1)} e^{−2s ± H(s)}, s = √(1+r²): the normal form
    /// itself, regularized at the origin through s.
    ExpLinearTail {
        kappa: f64,
        sign: TailSign,
        h: HDescriptor,
    },
    /// Sampled values with linear interpolation (diagnostic family;
    /// derivatives beyond first order are not available).
    Tabulated { r: Vec<f64>, v: Vec<f64> },
}

/// A potential: family plus ambient dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    #[serde(flatten)]
    pub family: Family,
    pub d: usize,
}

impl PotentialSpec {
    pub fn power_law(amplitude: f64, rho: f64, d: usize) -> Self {
        Self { family: Family::PowerLaw { amplitude, rho }, d }
    }
    pub fn exp_sqrt(amplitude: f64, c: f64, d: usize) -> Self {
        Self { family: Family::ExpSqrt { amplitude, c }, d }
    }
    pub fn exp_linear_tail(kappa: f64, sign: TailSign, h: HDescriptor, d: usize) -> Self {
        Self { family: Family::ExpLinearTail { kappa, sign, h }, d }
    }

    /// Parameter sanity; call after deserialization and before classify.
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.d) {
            return Err(Error::ConfigInvalid(format!("dimension {} outside 1..=3", self.d)));
        }
        let bad = |msg: &str| Err(Error::ConfigInvalid(msg.into()));
        match &self.family {
            Family::ExpSqrt { amplitude, c } => {
                if !(*amplitude > 0.0) || !(*c > 0.0) {
                    return bad("exp_sqrt requires C > 0 and c > 0");
                }
            }
            Family::PowerLaw { amplitude, rho } => {
                // C = 0 is the vanishing potential (allowed for free runs).
                if !(*amplitude >= 0.0) || !(*rho > 0.0) {
                    return bad("power_law requires C >= 0 and rho > 0");
                }
            }
            Family::ExpLinearTail { kappa, sign, h } => {
                if !(*kappa > 0.0) {
                    return bad("exp_linear_tail requires kappa > 0");
                }
                match h {
                    HDescriptor::Zero => {}
                    HDescriptor::Linear { a } => {
                        if !(*a > 0.0) {
                            return bad("linear modifier requires a > 0");
                        }
                        if *sign == TailSign::Plus && *a >= 2.0 {
                            return bad("plus-sign linear modifier requires a < 2 for decay");
                        }
                    }
                    HDescriptor::Sqrt { b } => {
                        if !(*b > 0.0) {
                            return bad("sqrt modifier requires b > 0");
                        }
                    }
                }
            }
            Family::Tabulated { r, v } => {
                if r.len() != v.len() || r.len() < 4 {
                    return bad("tabulated requires matching r/v arrays with >= 4 nodes");
                }
                if !(r[0] >= 0.0) || r.windows(2).any(|w| !(w[1] > w[0])) {
                    return bad("tabulated radii must be nonnegative and strictly increasing");
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return bad("tabulated values must be finite");
                }
            }
        }
        Ok(())
    }
}

/// k-th radial derivative of V (k ≤ 3 closed-form; tabulated k ≤ 1).
pub fn eval_v(spec: &PotentialSpec, r: f64, k: usize) -> Result<f64> {
    if k > 3 {
        return Err(Error::UnsupportedOrder { order: k });
    }
    debug_assert!(r >= 0.0);
    let d = spec.d;
    Ok(match &spec.family {
        Family::PowerLaw { amplitude, rho } => {
            let (c, rho) = (*amplitude, *rho);
            let u = 1.0 + r * r;
            match k {
                0 => c * u.powf(-0.5 * rho),
                1 => -c * rho * r * u.powf(-0.5 * rho - 1.0),
                2 => -c * rho * u.powf(-0.5 * rho - 2.0) * (u - (rho + 2.0) * r * r),
                _ => {
                    c * rho * (rho + 2.0)
                        * r
                        * u.powf(-0.5 * rho - 3.0)
                        * (3.0 * u - (rho + 4.0) * r * r)
                }
            }
        }
        Family::ExpSqrt { amplitude, c } => {
            let s = (1.0 + r * r).sqrt();
            let (s1, s2, s3) = (r / s, 1.0 / (s * s * s), -3.0 * r / s.powi(5));
            let v = amplitude * (-c * s).exp();
            match k {
                0 => v,
                1 => -c * s1 * v,
                2 => (-c * s2 + c * c * s1 * s1) * v,
                _ => (-c * s3 + 3.0 * c * c * s1 * s2 - c.powi(3) * s1.powi(3)) * v,
            }
        }
        Family::ExpLinearTail { kappa, sign, h } => {
            let s = (1.0 + r * r).sqrt();
            let (s1, s2, s3) = (r / s, 1.0 / (s * s * s), -3.0 * r / s.powi(5));
            let sg = if *sign == TailSign::Plus { 1.0 } else { -1.0 };
            let hd = h.derivs(s);
            let dm1 = (d - 1) as f64;
            // G(s) = −(d−1) ln s − 2s ± H(s); V = κ e^{G(s(r))}.
            let g0 = -dm1 * s.ln() - 2.0 * s + sg * hd[0];
            let g1 = -dm1 / s - 2.0 + sg * hd[1];
            let g2 = dm1 / (s * s) + sg * hd[2];
            let g3 = -2.0 * dm1 / (s * s * s) + sg * hd[3];
            let v = kappa * g0.exp();
            let f1 = g1 * s1;
            let f2 = g2 * s1 * s1 + g1 * s2;
            let f3 = g3 * s1.powi(3) + 3.0 * g2 * s1 * s2 + g1 * s3;
            match k {
                0 => v,
                1 => f1 * v,
                2 => (f2 + f1 * f1) * v,
                _ => (f3 + 3.0 * f1 * f2 + f1.powi(3)) * v,
            }
        }
        Family::Tabulated { r: xs, v: vs } => {
            if k > 1 {
                return Err(Error::UnsupportedOrder { order: k });
            }
            let n = xs.len();
            if r >= xs[n - 1] {
                // Log-linear continuation from the last segment (zero once
                // the samples stop being positive).
                let (r0, r1) = (xs[n - 2], xs[n - 1]);
                let (v0, v1) = (vs[n - 2], vs[n - 1]);
                if v0 <= 0.0 || v1 <= 0.0 {
                    return Ok(0.0);
                }
                let slope = (v1.ln() - v0.ln()) / (r1 - r0);
                let v = v1 * (slope * (r - r1)).exp();
                if k == 0 {
                    v
                } else {
                    slope * v
                }
            } else if r <= xs[0] {
                if k == 0 {
                    vs[0]
                } else {
                    0.0
                }
            } else {
                let i = xs.partition_point(|&x| x <= r).min(n - 1) - 1;
                let t = (r - xs[i]) / (xs[i + 1] - xs[i]);
                let slope = (vs[i + 1] - vs[i]) / (xs[i + 1] - xs[i]);
                if k == 0 {
                    vs[i] + t * (vs[i + 1] - vs[i])
                } else {
                    slope
                }
            }
        }
    })
}

/// ln V(r), exact in log space on the far tail where V itself would
/// under- or overflow; None where V is not positive.
pub fn ln_eval_v(spec: &PotentialSpec, r: f64) -> Result<Option<f64>> {
    Ok(match &spec.family {
        Family::PowerLaw { amplitude, rho } => {
            if *amplitude > 0.0 {
                Some(amplitude.ln() - 0.5 * rho * (1.0 + r * r).ln())
            } else {
                None
            }
        }
        Family::ExpSqrt { amplitude, c } => Some(amplitude.ln() - c * (1.0 + r * r).sqrt()),
        Family::ExpLinearTail { kappa, sign, h } => {
            let s = (1.0 + r * r).sqrt();
            let sg = if *sign == TailSign::Plus { 1.0 } else { -1.0 };
            let hd = h.derivs(s);
            Some(kappa.ln() - (spec.d as f64 - 1.0) * s.ln() - 2.0 * s + sg * hd[0])
        }
        Family::Tabulated { r: xs, v: vs } => {
            let n = xs.len();
            if r >= xs[n - 1] {
                let (r0, r1) = (xs[n - 2], xs[n - 1]);
                let (v0, v1) = (vs[n - 2], vs[n - 1]);
                if v0 <= 0.0 || v1 <= 0.0 {
                    None
                } else {
                    let slope = (v1.ln() - v0.ln()) / (r1 - r0);
                    Some(v1.ln() + slope * (r - r1))
                }
            } else {
                let v = eval_v(spec, r, 0)?;
                if v > 0.0 { Some(v.ln()) } else { None }
            }
        }
    })
}

/// λ-rescaled potential V_λ(x) = 𝒱(λx) with chain-rule derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rescaled {
    pub spec: PotentialSpec,
    pub lambda: f64,
}

impl Rescaled {
    pub fn new(spec: PotentialSpec, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::ConfigInvalid(format!("lambda = {lambda} must be positive")));
        }
        Ok(Self { spec, lambda })
    }

    /// k-th derivative of r ↦ V(λr).
    pub fn eval(&self, r: f64, k: usize) -> Result<f64> {
        Ok(self.lambda.powi(k as i32) * eval_v(&self.spec, self.lambda * r, k)?)
    }

    /// ln V(λr) in log space; None where V is not positive.
    pub fn ln_eval(&self, r: f64) -> Result<Option<f64>> {
        ln_eval_v(&self.spec, self.lambda * r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailKind {
    Fast,
    Slow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Confidence {
    Analytic,
    LowConfidence,
}

/// Asymptotic growth class of H(r).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateClass {
    /// H ~ a·r with a > 0.
    Linear(f64),
    /// H → ∞ but H(r)/r → 0.
    SubExp,
    /// H converges to a finite limit.
    Bounded,
}

/// Tail classification of a (rescaled) potential, carrying the profile
/// callables the interaction asymptotics consume.
#[derive(Debug, Clone)]
pub struct TailClass {
    pub kind: TailKind,
    /// Fast only: which side of the normal form the tail sits on.
    pub sign: Option<TailSign>,
    /// Fast only: κ = W(r₀) in the normal form.
    pub kappa: Option<f64>,
    /// Fast only: growth class of H.
    pub rate: Option<RateClass>,
    pub r0: f64,
    pub confidence: Confidence,
    scaled: Rescaled,
}

impl TailClass {
    /// Test-only: fabricate a fast-tail classification with a prescribed
    /// side and growth class (the evaluator backing is a placeholder).
    #[cfg(test)]
    pub(crate) fn synthetic_fast(sign: TailSign, rate: RateClass) -> TailClass {
        TailClass {
            kind: TailKind::Fast,
            sign: Some(sign),
            kappa: Some(1.0),
            rate: Some(rate),
            r0: R0_EXP,
            confidence: Confidence::Analytic,
            scaled: Rescaled::new(PotentialSpec::exp_sqrt(1.0, 3.0, 1), 1.0)
                .expect("placeholder spec is valid"),
        }
    }

    pub fn lambda(&self) -> f64 {
        self.scaled.lambda
    }

    /// k-th derivative of the rescaled potential.
    pub fn v(&self, r: f64, k: usize) -> Result<f64> {
        self.scaled.eval(r, k)
    }

    /// ln V(r) in log space (finite far past where V itself underflows);
    /// None where V is not positive.
    pub fn ln_v(&self, r: f64) -> Result<Option<f64>> {
        self.scaled.ln_eval(r)
    }

    /// W(r) = V(r) e^{2r} r^{d−1}, the tail-normalized weight (may overflow
    /// for growing tails past r ≈ 350; use big_h in log space there).
    pub fn w(&self, r: f64) -> Result<f64> {
        let d = self.scaled.spec.d;
        Ok(self.scaled.eval(r, 0)? * (2.0 * r).exp() * r.powi(d as i32 - 1))
    }

    /// H(r) = ±ln(W(r)/κ) ≥ 0 on the tail (fast potentials).
    pub fn big_h(&self, r: f64) -> Result<f64> {
        let (kappa, sign) = self.fast_parts()?;
        let lw = ln_w(&self.scaled, r)?.ok_or_else(|| {
            Error::BranchUndecidable(format!("W({r}) not positive"))
        })?;
        Ok(sign * (lw - kappa.ln()))
    }

    /// H′(r) = ±(V′/V + 2 + (d−1)/r).
    pub fn big_h_prime(&self, r: f64) -> Result<f64> {
        let (_, sign) = self.fast_parts()?;
        let v = self.scaled.eval(r, 0)?;
        let dv = self.scaled.eval(r, 1)?;
        if !(v.abs() > 0.0) {
            return Err(Error::BranchUndecidable(format!("V({r}) vanishes")));
        }
        let d = self.scaled.spec.d;
        Ok(sign * (dv / v + 2.0 + (d as f64 - 1.0) / r))
    }

    /// Slow-profile h = −ln V and derivatives (k ≤ 3).
    pub fn h(&self, r: f64, k: usize) -> Result<f64> {
        if self.kind != TailKind::Slow {
            return Err(Error::BranchUndecidable("h-profile requested for a fast tail".into()));
        }
        let v = self.scaled.eval(r, 0)?;
        if !(v > 0.0) {
            return Err(Error::BranchUndecidable(format!("V({r}) not positive")));
        }
        Ok(match k {
            0 => -v.ln(),
            1 => -self.scaled.eval(r, 1)? / v,
            2 => {
                let l1 = self.scaled.eval(r, 1)? / v;
                l1 * l1 - self.scaled.eval(r, 2)? / v
            }
            3 => {
                let l1 = self.scaled.eval(r, 1)? / v;
                let v2 = self.scaled.eval(r, 2)? / v;
                -self.scaled.eval(r, 3)? / v + 3.0 * l1 * v2 - 2.0 * l1.powi(3)
            }
            _ => return Err(Error::UnsupportedOrder { order: k }),
        })
    }

    /// lim H′: least-squares fit of H′(r) ≈ a + b/r on r ∈ [50, 100]; the
    /// residual must vouch for the model or the limit is not granted.
    pub fn estimate_rate_limit(&self) -> Result<f64> {
        self.fit_limit(|r| self.big_h_prime(r), "lim H'")
    }

    /// lim e^{−H}: same fit applied to e^{−H(r)}.
    pub fn estimate_k_limit(&self) -> Result<f64> {
        self.fit_limit(|r| Ok((-self.big_h(r)?).exp()), "lim e^{-H}")
    }

    fn fast_parts(&self) -> Result<(f64, f64)> {
        match (self.kappa, self.sign) {
            (Some(k), Some(s)) => Ok((k, if s == TailSign::Plus { 1.0 } else { -1.0 })),
            _ => Err(Error::BranchUndecidable("H-profile requested for a slow tail".into())),
        }
    }

    fn fit_limit(&self, f: impl Fn(f64) -> Result<f64>, what: &str) -> Result<f64> {
        let n = 51;
        let mut a11 = 0.0;
        let mut a12 = 0.0;
        let mut a22 = 0.0;
        let mut b1 = 0.0;
        let mut b2 = 0.0;
        let mut ys = Vec::with_capacity(n);
        for i in 0..n {
            let r = 50.0 + i as f64;
            let y = f(r)?;
            let phi = 1.0 / r;
            a11 += 1.0;
            a12 += phi;
            a22 += phi * phi;
            b1 += y;
            b2 += phi * y;
            ys.push((r, y));
        }
        let det = a11 * a22 - a12 * a12;
        let a = (a22 * b1 - a12 * b2) / det;
        let b = (a11 * b2 - a12 * b1) / det;
        let mut rss = 0.0;
        for &(r, y) in &ys {
            let e = y - a - b / r;
            rss += e * e;
        }
        let rms = (rss / n as f64).sqrt();
        if rms > 1e-3 * a.abs().max(1.0) {
            return Err(Error::BranchUndecidable(format!(
                "{what}: residual {rms:.2e} too large for a + b/r on [50, 100]"
            )));
        }
        Ok(a)
    }
}

/// ln W(r) = ln V + 2r + (d−1) ln r, or None where V is not positive.
fn ln_w(scaled: &Rescaled, r: f64) -> Result<Option<f64>> {
    Ok(scaled
        .ln_eval(r)?
        .map(|lv| lv + 2.0 * r + (scaled.spec.d as f64 - 1.0) * r.ln()))
}

/// κ = extremal W over the tail (min for the plus side, max for minus), so
/// H = ±ln(W/κ) ≥ 0 everywhere on [r₀, ∞); transient bumps of W past r₀
/// would otherwise push H negative.  κ e^{±H} = W regardless of the choice.
fn kappa_extremal(scaled: &Rescaled, r0: f64, sign: TailSign) -> Result<f64> {
    let hi = 150.0f64.max(2.0 * r0);
    let n = 1500usize;
    let plus = sign == TailSign::Plus;
    let mut pts = Vec::with_capacity(n + 1);
    let mut best: Option<(usize, f64)> = None;
    for i in 0..=n {
        let r = r0 + (hi - r0) * i as f64 / n as f64;
        // Underflow far out is harmless: the extremum sits before it.
        let Some(lw) = ln_w(scaled, r)? else { break };
        pts.push((r, lw));
        let better = best.is_none_or(|(_, b)| if plus { lw < b } else { lw > b });
        if better {
            best = Some((pts.len() - 1, lw));
        }
    }
    let (idx, mut lb) =
        best.ok_or_else(|| Error::BranchUndecidable("potential tail not positive".into()))?;
    if idx > 0 && idx + 1 < pts.len() {
        // Interior extremum: golden-section refinement in the bracket.
        let (mut a, mut c) = (pts[idx - 1].0, pts[idx + 1].0);
        for _ in 0..60 {
            let m1 = a + 0.381_966 * (c - a);
            let m2 = c - 0.381_966 * (c - a);
            let f1 = ln_w(scaled, m1)?.unwrap();
            let f2 = ln_w(scaled, m2)?.unwrap();
            if (f1 < f2) == plus {
                c = m2;
            } else {
                a = m1;
            }
        }
        let lm = ln_w(scaled, 0.5 * (a + c))?.unwrap();
        if if plus { lm < lb } else { lm > lb } {
            lb = lm;
        }
    }
    Ok(lb.exp())
}

/// Classify the tail of V_λ(x) = 𝒱(λx).  Families are decided analytically;
/// the tabulated family falls back to a log-slope fit and is flagged.
pub fn classify_scaled(spec: &PotentialSpec, lambda: f64) -> Result<TailClass> {
    spec.validate()?;
    let scaled = Rescaled::new(spec.clone(), lambda)?;
    let d = spec.d;
    let make = |kind, sign: Option<TailSign>, rate, r0, confidence, scaled: Rescaled| -> Result<TailClass> {
        let mut tc = TailClass { kind, sign, kappa: None, rate, r0, confidence, scaled };
        if kind == TailKind::Fast {
            tc.kappa = Some(kappa_extremal(&tc.scaled, r0, sign.unwrap())?);
        }
        Ok(tc)
    };
    match &spec.family {
        Family::PowerLaw { amplitude, .. } => {
            if *amplitude == 0.0 {
                return Err(Error::ConfigInvalid(
                    "vanishing potential has no tail classification".into(),
                ));
            }
            make(TailKind::Slow, None, None, R0_POW, Confidence::Analytic, scaled)
        }
        Family::ExpSqrt { c, .. } => {
            // ln W slope → 2 − cλ.
            let a = 2.0 - c * lambda;
            let (sign, rate) = if a > 0.0 {
                (TailSign::Plus, RateClass::Linear(a))
            } else if a < 0.0 {
                (TailSign::Minus, RateClass::Linear(-a))
            } else if d >= 2 {
                // W ~ C r^{d−1}: still growing, sublinearly.
                (TailSign::Plus, RateClass::SubExp)
            } else {
                (TailSign::Plus, RateClass::Bounded)
            };
            make(TailKind::Fast, Some(sign), Some(rate), R0_EXP, Confidence::Analytic, scaled)
        }
        Family::ExpLinearTail { sign, h, .. } => {
            // ln W slope → 2(1−λ) ± (linear modifier)·λ.
            let sg = if *sign == TailSign::Plus { 1.0 } else { -1.0 };
            let m = 2.0 * (1.0 - lambda)
                + match h {
                    HDescriptor::Linear { a } => sg * a * lambda,
                    _ => 0.0,
                };
            let (out_sign, rate) = if m > 0.0 {
                (TailSign::Plus, RateClass::Linear(m))
            } else if m < 0.0 {
                (TailSign::Minus, RateClass::Linear(-m))
            } else {
                match h {
                    // Rate cancels exactly: the modifier decides the side.
                    HDescriptor::Sqrt { .. } => (*sign, RateClass::SubExp),
                    _ => (TailSign::Plus, RateClass::Bounded),
                }
            };
            make(TailKind::Fast, Some(out_sign), Some(rate), R0_EXP, Confidence::Analytic, scaled)
        }
        Family::Tabulated { r, v } => {
            // Log-slope of V_λ over the last covered decade of radii.
            let r_hi = r[r.len() - 1] / lambda;
            let r_lo = (0.5 * r_hi).max(r[0] / lambda + 1e-9);
            if !(r_hi > r_lo) || v[v.len() - 1] <= 0.0 {
                return Err(Error::BranchUndecidable(
                    "tabulated tail too short or not positive".into(),
                ));
            }
            let n = 33;
            let mut slope_sum = 0.0;
            let mut prev: Option<(f64, f64)> = None;
            for i in 0..n {
                let rr = r_lo + (r_hi - r_lo) * i as f64 / (n - 1) as f64;
                let vv = scaled.eval(rr, 0)?;
                if !(vv > 0.0) {
                    return Err(Error::BranchUndecidable(format!("V({rr}) not positive")));
                }
                if let Some((rp, lp)) = prev {
                    slope_sum += (vv.ln() - lp) / (rr - rp);
                }
                prev = Some((rr, vv.ln()));
            }
            let slope = slope_sum / (n - 1) as f64;
            if slope <= -0.1 {
                // Fast; side from the ln W trend at two far points.
                let r0 = R0_EXP.max(r[0] / lambda + 1e-9);
                let need = |x: Option<f64>| {
                    x.ok_or_else(|| Error::BranchUndecidable("tabulated tail not positive".into()))
                };
                let wa = need(ln_w(&scaled, 0.75 * r_hi)?)?;
                let wb = need(ln_w(&scaled, r_hi)?)?;
                let sign = if wb >= wa { TailSign::Plus } else { TailSign::Minus };
                let est = 2.0 + slope; // ln W slope estimate
                let rate = if est.abs() < 0.05 {
                    RateClass::Bounded
                } else {
                    RateClass::Linear(est.abs())
                };
                make(TailKind::Fast, Some(sign), Some(rate), r0, Confidence::LowConfidence, scaled)
            } else {
                make(
                    TailKind::Slow,
                    None,
                    None,
                    R0_POW.max(r[0] / lambda + 1e-9),
                    Confidence::LowConfidence,
                    scaled,
                )
            }
        }
    }
}

/// Tail classification of the unscaled potential.
pub fn classify_tail(spec: &PotentialSpec) -> Result<TailClass> {
    classify_scaled(spec, 1.0)
}

/// Smallest integer N with |V|^N ≤ C|V″| on the tail: the scan accepts N
/// once the ratio |V|^N/|V″| stops growing across [r₀, 100].
pub fn smallest_n0(spec: &PotentialSpec) -> Result<usize> {
    spec.validate()?;
    let r0 = match spec.family {
        Family::PowerLaw { amplitude, .. } => {
            if amplitude == 0.0 {
                return Err(Error::ConfigInvalid("vanishing potential: N0 undefined".into()));
            }
            R0_POW
        }
        _ => R0_EXP,
    };
    'outer: for n in 1..=12 {
        let mut prev = 0.0f64;
        let mut ok = true;
        for i in 0..=200 {
            let r = r0 + (100.0 - r0) * i as f64 / 200.0;
            let v = eval_v(spec, r, 0)?;
            let v2 = eval_v(spec, r, 2)?;
            if v2 == 0.0 {
                continue 'outer;
            }
            let ratio = v.abs().powi(n as i32) / v2.abs();
            if !ratio.is_finite() {
                continue 'outer;
            }
            // Growth at the far end disqualifies this N.
            if r > 50.0 && ratio > prev * (1.0 + 1e-3) && prev > 0.0 {
                ok = false;
                break;
            }
            prev = ratio;
        }
        if ok {
            return Ok(n);
        }
    }
    Err(Error::ConfigInvalid("no N0 <= 12 bounds |V|^N by |V''| on the tail".into()))
}
