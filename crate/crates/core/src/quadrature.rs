//! Numerical integration rules shared by the elliptic kernel and the
//! series certification: adaptive Gauss–Kronrod (7/15), composite
//! Gauss–Legendre, and the tanh-sinh rule for endpoint singularities.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_94,
    0.417_959_183_673_469_4,
];

const MAX_DEPTH: u32 = 48;

fn kronrod_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for (j, (&x, &w)) in XGK[..7].iter().zip(WGK[..7].iter()).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += w * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, (kronrod - gauss).abs() * half)
}

/// Adaptive Gauss–Kronrod integration of `f` over `[a, b]` to absolute
/// tolerance `tol`, or to rounding accuracy where that is coarser.
pub fn gauss_kronrod<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let mut total = 0.0;
    let mut stack = vec![(a, b, tol, 0u32)];
    while let Some((lo, hi, local_tol, depth)) = stack.pop() {
        let (value, err) = kronrod_panel(&f, lo, hi);
        if !value.is_finite() {
            return Err(Error::Quadrature(format!(
                "non-finite integrand on [{lo}, {hi}]"
            )));
        }
        // Panels whose estimate is at the rounding floor are accepted.
        let roundoff = 50.0 * f64::EPSILON * value.abs();
        if err <= local_tol || err <= roundoff || (hi - lo).abs() < 1e-15 * (1.0 + lo.abs()) {
            total += value;
        } else if depth >= MAX_DEPTH {
            return Err(Error::Quadrature(format!(
                "no convergence on [{lo}, {hi}] (error estimate {err:e})"
            )));
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, 0.5 * local_tol, depth + 1));
            stack.push((mid, hi, 0.5 * local_tol, depth + 1));
        }
    }
    Ok(total)
}

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
pub fn gauss_legendre_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
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

/// Composite Gauss–Legendre rule with `panels` equal panels of `order` nodes.
pub fn composite_gauss_legendre<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    order: usize,
    panels: usize,
) -> f64 {
    let (nodes, weights) = gauss_legendre_nodes(order);
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|p| {
            let lo = a + p as f64 * h;
            let c = lo + 0.5 * h;
            nodes
                .iter()
                .zip(&weights)
                .map(|(&x, &w)| w * f(c + 0.5 * h * x))
                .sum::<f64>()
                * 0.5
                * h
        })
        .sum()
}

/// Tanh-sinh (double exponential) integration over `[a, b]`.
///
/// The integrand is never evaluated at the endpoints, so integrable
/// algebraic endpoint singularities are handled. Levels are refined until
/// two successive estimates agree to `tol` relative.
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    use std::f64::consts::FRAC_PI_2;
    let half = 0.5 * (b - a);
    let t_max = 4.0;
    // Evaluate f at the abscissa given by t, computing the distance to the
    // nearest endpoint directly to avoid cancellation.
    let term = |t: f64| -> f64 {
        let s = FRAC_PI_2 * t.sinh();
        let cosh_s = s.cosh();
        let w = FRAC_PI_2 * t.cosh() / (cosh_s * cosh_s);
        // 1 - tanh(s) and 1 + tanh(s) without cancellation
        let e = (-2.0 * s.abs()).exp();
        let near = 2.0 * e / (1.0 + e);
        let (x, dist) = if s >= 0.0 {
            (b - half * near, half * near)
        } else {
            (a + half * near, half * near)
        };
        if dist <= 0.0 || !x.is_finite() || x <= a || x >= b {
            return 0.0;
        }
        w * f(x)
    };
    let mut h = 0.5;
    let mut sum = term(0.0);
    let mut k = 1;
    while k as f64 * h <= t_max {
        let t = k as f64 * h;
        sum += term(t) + term(-t);
        k += 1;
    }
    let mut estimate = sum * h * half;
    for _ in 0..12 {
        h *= 0.5;
        let mut k = 1;
        while k as f64 * h <= t_max {
            let t = k as f64 * h;
            sum += term(t) + term(-t);
            k += 2;
        }
        let next = sum * h * half;
        if (next - estimate).abs() <= tol * next.abs().max(f64::MIN_POSITIVE) {
            return Ok(next);
        }
        estimate = next;
    }
    Err(Error::Quadrature(
        "tanh-sinh refinement did not converge".to_string(),
    ))
}
