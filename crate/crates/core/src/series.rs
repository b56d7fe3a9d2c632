//! Exact power series for the triangular-lattice constants `s(k)` and
//! `t(k)`: independent constructions, and a battery of certified checks on
//! their coefficients.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use num_bigint::BigInt;
use num_integer::binomial;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quadrature::tanh_sinh;
use crate::spectral::{triangular_s_at, triangular_t_at};

/// Coefficients `s_0, …, s_10` of `s(k)`.
pub const S_DISPLAY: [(i64, i64); 11] = [
    (1, 2),
    (0, 1),
    (3, 32),
    (0, 1),
    (3, 64),
    (0, 1),
    (123, 4096),
    (0, 1),
    (177, 8192),
    (0, 1),
    (34887, 2097152),
];
/// Coefficients `t_0, …, t_10` of `t(k)`.
pub const T_DISPLAY: [(i64, i64); 11] = [
    (1, 1),
    (0, 1),
    (0, 1),
    (0, 1),
    (3, 64),
    (0, 1),
    (3, 64),
    (0, 1),
    (711, 16384),
    (0, 1),
    (327, 8192),
];
/// Tolerance for the moment integral.
pub const MOMENT_TOL: f64 = 1e-9;
/// Tolerance for the substitution identities.
pub const SUBSTITUTION_TOL: f64 = 1e-11;

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Truncated power series `Σ_{n ≤ order} c_n x^n` with exact rational
/// coefficients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalSeries {
    coeffs: Vec<BigRational>,
}

impl RationalSeries {
    /// Series from coefficients; the order is `coeffs.len() − 1`.
    pub fn new(coeffs: Vec<BigRational>) -> Self {
        assert!(!coeffs.is_empty(), "a series needs at least one coefficient");
        Self { coeffs }
    }

    pub fn zero(order: usize) -> Self {
        Self::new(vec![BigRational::zero(); order + 1])
    }

    pub fn constant(c: BigRational, order: usize) -> Self {
        let mut s = Self::zero(order);
        s.coeffs[0] = c;
        s
    }

    /// `c x^power`, truncated.
    pub fn monomial(c: BigRational, power: usize, order: usize) -> Self {
        let mut s = Self::zero(order);
        if power <= order {
            s.coeffs[power] = c;
        }
        s
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, n: usize) -> BigRational {
        self.coeffs.get(n).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    pub fn truncate(&self, order: usize) -> Self {
        Self::new((0..=order).map(|n| self.coeff(n)).collect())
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        Self::new(self.coeffs.iter().map(|a| a * c).collect())
    }

    pub fn square(&self) -> Self {
        self * self
    }

    /// `1/f`; requires a nonzero constant term.
    pub fn inverse(&self) -> Result<Self> {
        let c0 = &self.coeffs[0];
        if c0.is_zero() {
            return Err(Error::InvalidInput("series with zero constant term is not invertible".into()));
        }
        let inv0 = c0.recip();
        let mut out = vec![inv0.clone()];
        for n in 1..=self.order() {
            let mut acc = BigRational::zero();
            for j in 1..=n {
                acc += &self.coeffs[j] * &out[n - j];
            }
            out.push(-acc * &inv0);
        }
        Ok(Self::new(out))
    }

    /// `f(x²)` truncated at `order`.
    pub fn substitute_square(&self, order: usize) -> Self {
        Self::new((0..=order).map(|n| if n % 2 == 0 { self.coeff(n / 2) } else { BigRational::zero() }).collect())
    }

    /// `x f'(x)`.
    pub fn euler_derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(n, c)| c * BigRational::from_integer(BigInt::from(n)))
                .collect(),
        )
    }

    /// Multiply by the polynomial `Σ p_j x^j`, truncated.
    pub fn mul_poly(&self, poly: &[i64]) -> Self {
        let order = self.order();
        let mut out = vec![BigRational::zero(); order + 1];
        for (j, &p) in poly.iter().enumerate() {
            if p == 0 {
                continue;
            }
            let p = BigRational::from_integer(BigInt::from(p));
            for n in 0..=order.saturating_sub(j) {
                out[j + n] += &self.coeffs[n] * &p;
            }
        }
        Self::new(out)
    }

    /// Partial sum at a floating-point argument.
    pub fn eval_f64(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * x + c.to_f64().unwrap_or(f64::NAN))
    }

    /// Coefficients as `p/q` strings.
    pub fn to_strings(&self) -> Vec<String> {
        self.coeffs.iter().map(|c| c.to_string()).collect()
    }
}

impl fmt::Display for RationalSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(n, c)| match n {
                0 => c.to_string(),
                1 => format!("({c})k"),
                _ => format!("({c})k^{n}"),
            })
            .collect();
        write!(f, "{} + O(k^{})", terms.join(" + "), self.order() + 1)
    }
}

impl Add for &RationalSeries {
    type Output = RationalSeries;
    fn add(self, rhs: Self) -> RationalSeries {
        let order = self.order().min(rhs.order());
        RationalSeries::new((0..=order).map(|n| &self.coeffs[n] + &rhs.coeffs[n]).collect())
    }
}

impl Sub for &RationalSeries {
    type Output = RationalSeries;
    fn sub(self, rhs: Self) -> RationalSeries {
        let order = self.order().min(rhs.order());
        RationalSeries::new((0..=order).map(|n| &self.coeffs[n] - &rhs.coeffs[n]).collect())
    }
}

impl Mul for &RationalSeries {
    type Output = RationalSeries;
    fn mul(self, rhs: Self) -> RationalSeries {
        let order = self.order().min(rhs.order());
        let out = (0..=order)
            .map(|n| {
                let mut acc = BigRational::zero();
                for j in 0..=n {
                    if self.coeffs[j].is_zero() || rhs.coeffs[n - j].is_zero() {
                        continue;
                    }
                    acc += &self.coeffs[j] * &rhs.coeffs[n - j];
                }
                acc
            })
            .collect();
        RationalSeries::new(out)
    }
}

/// Power-series root of `Σ_i a_i(q) y^i = 0` with `y(0) = seed`, by Newton
/// iteration doubling the precision each step. `poly[i]` lists the integer
/// coefficients of `a_i` in increasing powers of `q`.
fn newton_algebraic(poly: &[&[i64]], seed: BigRational, order: usize) -> Result<RationalSeries> {
    let mut y = RationalSeries::constant(seed, 0);
    let mut prec = 0usize;
    while prec < order {
        prec = (2 * prec + 1).min(order);
        let y_p = {
            let mut c = y.coeffs().to_vec();
            c.resize(prec + 1, BigRational::zero());
            RationalSeries::new(c)
        };
        let mut f = RationalSeries::zero(prec);
        let mut df = RationalSeries::zero(prec);
        for a in poly.iter().rev() {
            let a = RationalSeries::zero(prec).add_poly(a);
            df = &(&df * &y_p) + &f;
            f = &(&f * &y_p) + &a;
        }
        let inv = df.inverse().map_err(|_| Error::RootFinding("singular Newton step".into()))?;
        y = &y_p - &(&f * &inv);
    }
    Ok(y.truncate(order))
}

impl RationalSeries {
    fn add_poly(&self, poly: &[i64]) -> Self {
        let mut out = self.clone();
        for (j, &p) in poly.iter().enumerate() {
            if j <= out.order() {
                out.coeffs[j] += BigRational::from_integer(BigInt::from(p));
            }
        }
        out
    }
}

/// `s(k)` from `k² s⁴ − 2k² s³ + 2s − 1 = 0`, by Newton iteration in `k²`.
pub fn s_by_newton(order: usize) -> Result<RationalSeries> {
    let q = newton_algebraic(&[&[-1], &[2], &[], &[0, -2], &[0, 1]], rat(1, 2), order / 2)?;
    Ok(q.substitute_square(order))
}

/// `s(k)` from the linear three-term recurrence with seeds `s_0 = 1/2`,
/// `s_2 = 3/32`.
pub fn s_by_recurrence(order: usize) -> RationalSeries {
    let mut c = vec![BigRational::zero(); order.max(2) + 1];
    c[0] = rat(1, 2);
    c[2] = rat(3, 32);
    let mut n = 0usize;
    while n + 4 <= order {
        let ni = BigInt::from(n);
        let r = |x: BigInt| BigRational::from_integer(x);
        let lead = r((BigInt::from(3) * &ni + 10) * (BigInt::from(3) * &ni + 14) * (&ni + 2));
        let mid = r(BigInt::from(2)
            * (BigInt::from(9) * &ni * &ni * &ni + BigInt::from(54) * &ni * &ni + BigInt::from(106) * &ni + 70));
        let low = r(&ni * (BigInt::from(3) * &ni + 2) * (BigInt::from(3) * &ni + 4));
        c[n + 4] = (mid * &c[n + 2] - low * &c[n]) / lead;
        n += 2;
    }
    RationalSeries::new(c).truncate(order)
}

/// `₂F₁(1/2, 5/6; 5/3; x)` truncated at `order` in `x`.
pub fn hypergeometric_2f1(order: usize) -> RationalSeries {
    let (a, b, c) = (rat(1, 2), rat(5, 6), rat(5, 3));
    let mut out = vec![BigRational::one()];
    for n in 0..order {
        let nr = rat(n as i64, 1);
        let next = &out[n] * (&a + &nr) * (&b + &nr) / ((&c + &nr) * (&nr + BigRational::one()));
        out.push(next);
    }
    RationalSeries::new(out)
}

/// `H(k) = (k/4)·₂F₁(1/2, 5/6; 5/3; k²)`.
pub fn h_series(order: usize) -> RationalSeries {
    let f = hypergeometric_2f1(order / 2 + 1).substitute_square(order);
    let mut c = vec![BigRational::zero(); order + 1];
    for n in 1..=order {
        c[n] = f.coeff(n - 1) * rat(1, 4);
    }
    RationalSeries::new(c)
}

/// `s(k) = 1/2 + (3/2) H²`.
pub fn s_by_hypergeometric(order: usize) -> RationalSeries {
    let h2 = h_series(order).square();
    &RationalSeries::constant(rat(1, 2), order) + &h2.scale(&rat(3, 2))
}

/// `s_{2n}` from the alternating binomial sum, `n ≥ 1`.
pub fn s_coeff_lagrange(n: usize) -> Result<BigRational> {
    if n == 0 {
        return Err(Error::InvalidInput("the binomial sum holds for n > 0".into()));
    }
    let big = |x: usize| BigInt::from(x);
    let mut sum = BigInt::zero();
    for i in 0..=n {
        let term = binomial(big(3 * n), big(i)) * binomial(big(n), big(i + 1)) * BigInt::from(-3).pow((i + 1) as u32);
        sum += term;
    }
    let sign = if n % 2 == 0 { BigInt::one() } else { -BigInt::one() };
    let den = big(n) * BigInt::from(2).pow((4 * n + 1) as u32);
    Ok(BigRational::new(sign * sum, den))
}

/// `t(k)` from its quartic, by Newton iteration in `k²`.
pub fn t_by_newton(order: usize) -> Result<RationalSeries> {
    // −27(1−q)t⁴ + 18(1−q)t² + 2(2−q)²t + 1 − q + q²
    let q = newton_algebraic(&[&[1, -1, 1], &[8, -8, 2], &[18, -18], &[], &[-27, 27]], BigRational::one(), order / 2)?;
    Ok(q.substitute_square(order))
}

/// `t(k) = (1 + 3H⁴)/(1 − 9H⁴)`.
pub fn t_by_hypergeometric(order: usize) -> Result<RationalSeries> {
    let h4 = h_series(order).square().square();
    let one = RationalSeries::constant(BigRational::one(), order);
    let num = &one + &h4.scale(&rat(3, 1));
    let den = &one - &h4.scale(&rat(9, 1));
    Ok(&num * &den.inverse()?)
}

/// Apply the third-order operator annihilating `s − (particular part)` and
/// return `L[s] − (4 − 2k²)`.
pub fn ode_residual(s: &RationalSeries) -> RationalSeries {
    let d1 = s.euler_derivative();
    let d2 = d1.euler_derivative();
    let d3 = d2.euler_derivative();
    // k s' = θ, k² s'' = θ² − θ, k³ s''' = θ³ − 3θ² + 2θ with θ = k d/dk.
    let k3s3 = &(&d3 - &d2.scale(&rat(3, 1))) + &d1.scale(&rat(2, 1));
    let k2s2 = &d2 - &d1;
    // 9k³(k²−1)² s''' + 9k²(k²−1)(5k²−1) s'' + k(35k⁴−14k²−13) s' − 4(k²−2) s
    let t1 = k3s3.mul_poly(&[9, 0, -18, 0, 9]);
    let t2 = k2s2.mul_poly(&[9, 0, -54, 0, 45]);
    let t3 = d1.mul_poly(&[-13, 0, -14, 0, 35]);
    let t4 = s.mul_poly(&[8, 0, -4]);
    let lhs = &(&(&t1 + &t2) + &t3) + &t4;
    lhs.add_poly(&[-4, 0, 2])
}

/// `φ(x) = x(x + 2)³/(2x + 1)³`.
pub fn darboux_phi(x: f64) -> f64 {
    x * (x + 2.0).powi(3) / (2.0 * x + 1.0).powi(3)
}

/// `1 − φ(x) = (1 − x)³(1 + x)/(2x + 1)³`, free of cancellation.
pub fn darboux_phi_complement(x: f64) -> f64 {
    (1.0 - x).powi(3) * (1.0 + x) / (2.0 * x + 1.0).powi(3)
}

/// `s_{2n}` as a moment of a positive density on `[0, 1]`.
pub fn s_moment_integral(n: usize) -> Result<f64> {
    let c2 = 2f64.cbrt();
    let pref = 3f64.sqrt() * c2 / std::f64::consts::PI;
    let f = |x: f64| {
        let w = (x - 1.0).powi(2) * (c2 - (x * x + x).cbrt()) * (x + 1.0).cbrt()
            / ((x + 2.0) * (2.0 * x + 1.0).powi(2) * x.powf(2.0 / 3.0));
        w * darboux_phi(x).powi(n as i32)
    };
    Ok(pref * tanh_sinh(f, 0.0, 1.0, 1e-13)?)
}

/// All constructions to a common order.
#[derive(Debug, Clone)]
pub struct SeriesRoutes {
    pub order: usize,
    pub s_newton: RationalSeries,
    pub s_recurrence: RationalSeries,
    pub s_hypergeometric: RationalSeries,
    pub t_newton: RationalSeries,
    pub t_hypergeometric: RationalSeries,
}

impl SeriesRoutes {
    pub fn compute(order: usize) -> Result<Self> {
        if order < 1 {
            return Err(Error::InvalidInput("series order must be at least 1".into()));
        }
        let ((s_newton, s_recurrence), (s_hypergeometric, (t_newton, t_hypergeometric))) = rayon::join(
            || (s_by_newton(order), s_by_recurrence(order)),
            || {
                rayon::join(
                    || s_by_hypergeometric(order),
                    || (t_by_newton(order), t_by_hypergeometric(order)),
                )
            },
        );
        Ok(Self {
            order,
            s_newton: s_newton?,
            s_recurrence,
            s_hypergeometric,
            t_newton: t_newton?,
            t_hypergeometric: t_hypergeometric?,
        })
    }
}

/// Outcome of one certification check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Highest index verified.
    pub verified_through: usize,
    pub first_failure: Option<usize>,
    pub witness: String,
}

impl Check {
    fn exact(name: &'static str, through: usize, failure: Option<usize>, witness: String) -> Self {
        Self {
            name,
            passed: failure.is_none(),
            verified_through: match failure {
                Some(i) => i.saturating_sub(1),
                None => through,
            },
            first_failure: failure,
            witness,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertReport {
    pub order: usize,
    pub checks: Vec<Check>,
}

impl CertReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// First failing check as an error.
    pub fn into_result(self) -> Result<Self> {
        match self.checks.iter().find(|c| !c.passed) {
            Some(c) => Err(Error::Certification {
                check: c.name.to_string(),
                index: c.first_failure.unwrap_or(0),
            }),
            None => Ok(self),
        }
    }

    /// One line per check: name, status, order verified, witness.
    pub fn render(&self) -> String {
        self.checks
            .iter()
            .map(|c| {
                format!(
                    "{:<20} {:<4} through={:<4} {}\n",
                    c.name,
                    if c.passed { "PASS" } else { "FAIL" },
                    c.verified_through,
                    c.witness
                )
            })
            .collect()
    }
}

fn first_mismatch(a: &RationalSeries, b: &RationalSeries, order: usize) -> Option<usize> {
    (0..=order).find(|&n| a.coeff(n) != b.coeff(n))
}

fn display_match(series: &RationalSeries, display: &[(i64, i64)]) -> Option<usize> {
    display
        .iter()
        .enumerate()
        .find(|(n, &(p, q))| series.coeff(*n) != rat(p, q))
        .map(|(n, _)| n)
}

/// Even coefficients `s_0, s_2, …` as a sequence.
fn even_part(s: &RationalSeries) -> Vec<BigRational> {
    (0..=s.order() / 2).map(|n| s.coeff(2 * n)).collect()
}

type CheckFn<'a> = Box<dyn Fn() -> Result<Check> + Send + Sync + 'a>;

/// Run every check on series of order `order` (in `k`).
pub fn certify(order: usize) -> Result<CertReport> {
    let routes = SeriesRoutes::compute(order)?;
    let r = &routes;
    let half = order / 2;
    let checks: Vec<CheckFn> = vec![
        Box::new(move || {
            let f = first_mismatch(&r.s_newton, &r.s_recurrence, order)
                .or_else(|| first_mismatch(&r.s_newton, &r.s_hypergeometric, order));
            Ok(Check::exact("s-routes", order, f, format!("s_{order}={}", r.s_newton.coeff(order))))
        }),
        Box::new(move || {
            let mut failure = None;
            for n in 1..=half {
                if s_coeff_lagrange(n)? != r.s_newton.coeff(2 * n) {
                    failure = Some(2 * n);
                    break;
                }
            }
            Ok(Check::exact("s-lagrange", 2 * half, failure, format!("n<={half}")))
        }),
        Box::new(move || {
            let f = first_mismatch(&r.t_newton, &r.t_hypergeometric, order);
            Ok(Check::exact("t-routes", order, f, format!("t_{order}={}", r.t_newton.coeff(order))))
        }),
        Box::new(move || {
            let through = order.min(10);
            let s = r.s_newton.truncate(through);
            let t = r.t_newton.truncate(through);
            let f = display_match(&s, &S_DISPLAY[..=through])
                .or_else(|| display_match(&t, &T_DISPLAY[..=through]));
            Ok(Check::exact("displayed-coeffs", through, f, format!("s_10={} t_10={}", s.coeff(10), t.coeff(10))))
        }),
        Box::new(move || {
            let s = &r.s_newton;
            let t = &r.t_newton;
            let f = (0..=order).find(|&n| {
                let sn = s.coeff(n);
                let bad_s = if n % 2 == 0 { !sn.is_positive() } else { !sn.is_zero() };
                bad_s || t.coeff(n).is_negative()
            });
            Ok(Check::exact("positivity", order, f, "s_2n > 0, s_odd = 0, t_n >= 0".into()))
        }),
        Box::new(move || {
            let e = even_part(&r.s_newton);
            let f = (1..half).find(|&n| &e[n + 1] * &e[n - 1] < &e[n] * &e[n]);
            let witness = format!("s4*s0-s2^2={}", &e[2.min(half)] * &e[0] - &e[1.min(half)] * &e[1.min(half)]);
            Ok(Check::exact("log-convexity", half.saturating_sub(1), f, witness))
        }),
        Box::new(move || {
            let mut diffs = even_part(&r.s_newton);
            let mut failure = None;
            for _ in 1..=5 {
                diffs = diffs.windows(2).map(|w| &w[0] - &w[1]).collect();
                if let Some(n) = diffs.iter().position(|d| d.is_negative()) {
                    failure = Some(n);
                    break;
                }
            }
            Ok(Check::exact("finite-differences", half.saturating_sub(5), failure, "k<=5".into()))
        }),
        Box::new(move || {
            let res = ode_residual(&r.s_newton);
            let through = order.saturating_sub(4);
            let f = (0..=through).find(|&n| !res.coeff(n).is_zero());
            Ok(Check::exact("ode", through, f, "residual identically zero".into()))
        }),
        Box::new(move || {
            let mut worst = 0.0f64;
            let mut failure = None;
            for n in 0..=10.min(half) {
                let exact = r.s_newton.coeff(2 * n).to_f64().unwrap_or(f64::NAN);
                let err = (s_moment_integral(n)? - exact).abs();
                worst = worst.max(err);
                if !(err <= MOMENT_TOL) && failure.is_none() {
                    failure = Some(2 * n);
                }
            }
            Ok(Check::exact("moment-integral", 2 * 10.min(half), failure, format!("max_err={worst:.3e}")))
        }),
        Box::new(move || {
            let mut worst = 0.0f64;
            let mut failure = None;
            for i in 1..=9 {
                let x = i as f64 / 10.0;
                let (q, c) = (darboux_phi(x), darboux_phi_complement(x));
                let es = (triangular_s_at(q, c)? - (2.0 * x + 1.0) / (x + 2.0)).abs();
                let et = (triangular_t_at(q, c)? - (x * x + x + 1.0) / (1.0 + x - 2.0 * x * x)).abs();
                worst = worst.max(es).max(et);
                if !(es.max(et) <= SUBSTITUTION_TOL) && failure.is_none() {
                    failure = Some(i);
                }
            }
            Ok(Check::exact("substitution", 9, failure, format!("max_err={worst:.3e}")))
        }),
    ];
    let results: Result<Vec<Check>> = checks.par_iter().map(|c| c()).collect();
    Ok(CertReport {
        order,
        checks: results?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn displayed_coefficients() {
        let s = s_by_newton(10).unwrap();
        for (n, &(p, q)) in S_DISPLAY.iter().enumerate() {
            assert_eq!(s.coeff(n), rat(p, q), "s_{n}");
        }
        let t = t_by_newton(10).unwrap();
        for (n, &(p, q)) in T_DISPLAY.iter().enumerate() {
            assert_eq!(t.coeff(n), rat(p, q), "t_{n}");
        }
    }

    #[test]
    fn recurrence_first_steps() {
        let s = s_by_recurrence(6);
        assert_eq!(s.coeff(4) * rat(280, 1), s.coeff(2) * rat(140, 1));
        assert_eq!(s.coeff(4), rat(3, 64));
        assert_eq!(s.coeff(6), rat(123, 4096));
    }

    #[test]
    fn hypergeometric_displays() {
        let f = hypergeometric_2f1(3);
        assert_eq!(f.coeffs(), &[rat(1, 1), rat(1, 4), rat(33, 256), rat(85, 1024)]);
        let h = h_series(5);
        assert_eq!(h.coeffs(), &[rat(0, 1), rat(1, 4), rat(0, 1), rat(1, 16), rat(0, 1), rat(33, 1024)]);
    }

    #[test]
    fn lagrange_small_cases() {
        assert_eq!(s_coeff_lagrange(1).unwrap(), rat(3, 32));
        assert_eq!(s_coeff_lagrange(2).unwrap(), rat(3, 64));
        assert!(s_coeff_lagrange(0).is_err());
    }

    #[test]
    fn routes_agree_to_order_60() {
        let r = SeriesRoutes::compute(60).unwrap();
        assert_eq!(r.s_newton, r.s_recurrence);
        assert_eq!(r.s_newton, r.s_hypergeometric);
        assert_eq!(r.t_newton, r.t_hypergeometric);
        for n in 1..=30 {
            assert_eq!(s_coeff_lagrange(n).unwrap(), r.s_newton.coeff(2 * n));
        }
        assert!((1..60).step_by(2).all(|n| r.s_newton.coeff(n).is_zero()));
    }

    #[test]
    fn algebraic_residual_vanishes() {
        let order = 40;
        let s = s_by_newton(order).unwrap();
        let k2 = RationalSeries::monomial(rat(1, 1), 2, order);
        let s2 = s.square();
        let s3 = &s2 * &s;
        let s4 = &s2 * &s2;
        let lhs = &(&(&(&k2 * &s4) - &(&k2 * &s3).scale(&rat(2, 1))) + &s.scale(&rat(2, 1)))
            - &RationalSeries::constant(rat(1, 1), order);
        assert!(lhs.coeffs().iter().all(|c| c.is_zero()));
    }

    #[test]
    fn ode_residual_is_zero() {
        let s = s_by_newton(40).unwrap();
        let res = ode_residual(&s);
        assert!((0..=36).all(|n| res.coeff(n).is_zero()));
        let mut broken = s.coeffs().to_vec();
        broken[6] += rat(1, 1 << 20);
        let res = ode_residual(&RationalSeries::new(broken));
        assert!((0..=36).any(|n| !res.coeff(n).is_zero()));
    }

    #[test]
    fn log_convexity_first_case() {
        let s = s_by_newton(4).unwrap();
        assert!(s.coeff(4) * s.coeff(0) >= s.coeff(2) * s.coeff(2));
        assert_eq!(s.coeff(4) * s.coeff(0), rat(3, 128));
        assert_eq!(s.coeff(2) * s.coeff(2), rat(9, 1024));
    }

    #[test]
    fn moment_integral_first_moments() {
        let s = s_by_newton(20).unwrap();
        assert!((s_moment_integral(0).unwrap() - 0.5).abs() < MOMENT_TOL);
        for n in [1, 5, 10] {
            let exact = s.coeff(2 * n).to_f64().unwrap();
            assert!((s_moment_integral(n).unwrap() - exact).abs() < MOMENT_TOL);
        }
    }

    #[test]
    fn substitution_at_one_half() {
        let (q, c) = (darboux_phi(0.5), darboux_phi_complement(0.5));
        assert!((q + c - 1.0).abs() < 1e-15);
        let s = triangular_s_at(q, c).unwrap();
        assert!((s - 0.8).abs() < SUBSTITUTION_TOL);
        let t = triangular_t_at(q, c).unwrap();
        assert!((t - 1.75).abs() < SUBSTITUTION_TOL);
    }

    #[test]
    fn certify_small_order() {
        let report = certify(40).unwrap();
        assert!(report.passed(), "{}", report.render());
        assert_eq!(report.checks.len(), 10);
        assert!(report.clone().into_result().is_ok());
    }

    #[test]
    fn failing_check_names_index() {
        let report = CertReport {
            order: 4,
            checks: vec![Check::exact("ode", 4, Some(3), String::new())],
        };
        assert_eq!(
            report.into_result(),
            Err(Error::Certification {
                check: "ode".into(),
                index: 3
            })
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn inverse_is_inverse(c in proptest::collection::vec(-50i64..50, 1..12)) {
            let mut coeffs: Vec<BigRational> = c.iter().map(|&n| rat(n, 7)).collect();
            coeffs[0] = rat(3, 2);
            let f = RationalSeries::new(coeffs);
            let one = &f * &f.inverse().unwrap();
            prop_assert_eq!(one, RationalSeries::constant(rat(1, 1), f.order()));
        }

        #[test]
        fn product_commutes(a in proptest::collection::vec(-9i64..9, 6), b in proptest::collection::vec(-9i64..9, 6)) {
            let f = RationalSeries::new(a.iter().map(|&n| rat(n, 3)).collect());
            let g = RationalSeries::new(b.iter().map(|&n| rat(n, 5)).collect());
            prop_assert_eq!(&f * &g, &g * &f);
        }
    }
}
