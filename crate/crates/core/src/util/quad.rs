//! Adaptive Gauss–Kronrod quadrature (15-point Kronrod with embedded
//! 7-point Gauss) plus a Gauss–Legendre rule generator for fixed angular
//! integrals.
//!
//! Panels are bisected greedily, largest error estimate first, until the
//! summed estimate meets `max(abs_tol, rel_tol·|I|)`.  The per-panel error
//! estimate |K15 − G7| over-reports the Kronrod error on smooth panels, so
//! the returned `error` is conservative.

/// 15-point Kronrod abscissae on [0, 1] side of the symmetric rule.
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

/// Kronrod weights paired with `XGK`.
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

/// Gauss weights for the embedded 7-point rule (odd-index abscissae plus center).
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    /// Kronrod estimate of the integral.
    pub value: f64,
    /// Summed per-panel error estimates (conservative).
    pub error: f64,
    /// Number of panels in the final partition.
    pub panels: usize,
    /// Whether the tolerance was met before the panel budget ran out.
    pub converged: bool,
}

/// One Gauss–Kronrod pass over [a, b]: returns (K15 value, |K15 − G7|).
fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let hl = 0.5 * (b - a);
    let fc = f(c);
    let mut res_k = WGK[7] * fc;
    let mut res_g = WG[3] * fc;
    for (j, (&x, &wk)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = hl * x;
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        res_k += wk * (f1 + f2);
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    (res_k * hl, (res_k - res_g).abs() * hl.abs())
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

/// Adaptively integrate `f` over [a, b].
///
/// `max_panels` bounds the partition size; panels narrower than
/// ~1e−14·(b−a) are never split further, so pathological integrands
/// terminate with `converged = false` rather than looping.
pub fn adaptive_gk<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> QuadResult {
    if a == b {
        return QuadResult { value: 0.0, error: 0.0, panels: 0, converged: true };
    }
    let span = (b - a).abs();
    let min_width = span * 1e-14;
    let (v, e) = gk15(&mut f, a, b);
    let mut panels = vec![Panel { a, b, value: v, error: e }];
    loop {
        let total: f64 = panels.iter().map(|p| p.value).sum();
        let err: f64 = panels.iter().map(|p| p.error).sum();
        let target = abs_tol.max(rel_tol * total.abs());
        if err <= target {
            return QuadResult { value: total, error: err, panels: panels.len(), converged: true };
        }
        // Split the worst panel that is still wide enough to split.
        let mut worst: Option<usize> = None;
        let mut worst_err = 0.0;
        for (i, p) in panels.iter().enumerate() {
            if p.error > worst_err && (p.b - p.a).abs() > min_width {
                worst_err = p.error;
                worst = Some(i);
            }
        }
        let (i, full) = match worst {
            Some(i) if panels.len() < max_panels => (i, panels[i]),
            _ => {
                return QuadResult { value: total, error: err, panels: panels.len(), converged: false };
            }
        };
        let mid = 0.5 * (full.a + full.b);
        let (v1, e1) = gk15(&mut f, full.a, mid);
        let (v2, e2) = gk15(&mut f, mid, full.b);
        panels[i] = Panel { a: full.a, b: mid, value: v1, error: e1 };
        panels.push(Panel { a: mid, b: full.b, value: v2, error: e2 });
    }
}

/// Adaptive integration with interior break points inserted up front
/// (useful when the integrand has known features, e.g. |y| kinks or
/// localized bumps, that greedy refinement might initially miss).
pub fn adaptive_gk_split<F: FnMut(f64) -> f64>(
    mut f: F,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> QuadResult {
    assert!(breaks.len() >= 2, "need at least two break points");
    // First pass: rough estimate to scale the relative tolerance.
    let mut rough = 0.0;
    for w in breaks.windows(2) {
        let (v, _) = gk15(&mut f, w[0], w[1]);
        rough += v;
    }
    let abs = abs_tol.max(rel_tol * rough.abs());
    let mut value = 0.0;
    let mut error = 0.0;
    let mut panels = 0;
    let mut converged = true;
    let per = abs / breaks.len() as f64;
    for w in breaks.windows(2) {
        let r = adaptive_gk(&mut f, w[0], w[1], per, 0.0, max_panels);
        value += r.value;
        error += r.error;
        panels += r.panels;
        converged &= r.converged;
    }
    QuadResult { value, error, panels, converged }
}

/// Nodes and weights of the n-point Gauss–Legendre rule on [−1, 1].
///
/// Newton iteration on Pₙ from Chebyshev-like initial guesses; machine
/// precision for n ≲ 200.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence: k p_k = (2k−1) x p_{k−1} − (k−1) p_{k−2}.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}
