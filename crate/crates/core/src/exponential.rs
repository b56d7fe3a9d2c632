//! The discrete massive exponential `e_{(x,y)}(u)`, the rate function `χ`
//! with its derivatives, the saddle point `v0` of a direction and the
//! growth-rate form `τ`.
//!
//! Along a diamond step of angle `ᾱ` the exponential picks up the factor
//! `i√k'·sc((u − α)/2)` with `α = ᾱ·2K/π`; a step backwards along track
//! `j` uses `α_j + 2K`. The product over a lift difference `D` therefore
//! only depends on `D`.

use num_complex::Complex64;

use crate::elliptic::EllipticContext;
use crate::error::{Error, Result};
use crate::graph::{Direction, IsoradialGraph, Step};

/// Distance to a pole below which an evaluation is perturbed.
pub const POLE_PROXIMITY: f64 = 1e-8;
/// Imaginary shift applied to perturbed evaluations.
pub const POLE_SHIFT: f64 = 1e-6;
/// Newton stopping residual for `χ'(v0)`.
pub const SADDLE_TOL: f64 = 1e-13;

/// `i√k'·sc((u − α)/2)`.
pub fn edge_factor(alpha: f64, u: Complex64, ctx: &EllipticContext) -> Result<Complex64> {
    let w = (u - alpha) * 0.5;
    Ok(Complex64::i() * ctx.k_prime().sqrt() * ctx.sc(w)?)
}

/// Distance from `(u − α)/2` to the nearest pole of `sc`.
pub fn pole_distance(alpha: f64, u: Complex64, ctx: &EllipticContext) -> f64 {
    let w = (u - alpha) * 0.5;
    let wrap = |x: f64, p: f64| x - p * (x / p).round();
    let re = wrap(w.re - ctx.big_k(), 2.0 * ctx.big_k());
    if ctx.k() == 0.0 {
        return if w.im == 0.0 { re.abs() } else { f64::INFINITY };
    }
    let im = wrap(w.im, 2.0 * ctx.big_k_prime());
    re.hypot(im)
}

/// A value computed after an optional pole-avoiding shift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Flagged<T> {
    pub value: T,
    /// The argument was moved by `POLE_SHIFT` to avoid a pole.
    pub perturbed: bool,
}

/// Atoms `(position, weight)` of a signed measure `Σ D_j δ_{α_j}` with
/// negative weights moved to `α_j + 2K`.
pub fn atoms(weights: &[f64], alphas: &[f64], ctx: &EllipticContext) -> Vec<(f64, f64)> {
    weights
        .iter()
        .zip(alphas)
        .filter(|(w, _)| **w != 0.0)
        .map(|(&w, &a)| {
            if w > 0.0 {
                (a, w)
            } else {
                (a + 2.0 * ctx.big_k(), -w)
            }
        })
        .collect()
}

/// `τ(D, v) = Σ D_j (½ log k' − log dn((v − α_j)/2))`, the log-modulus of
/// the exponential per unit of `D` on the line `2iK' + R`. Linear in `D`.
pub fn tau(weights: &[f64], alphas: &[f64], v: f64, ctx: &EllipticContext) -> f64 {
    let half_log = 0.5 * ctx.k_prime().ln();
    weights
        .iter()
        .zip(alphas)
        .map(|(&n, &a)| {
            let (_, _, dn) = ctx.jacobi_real(0.5 * (v - a));
            n * (half_log - dn.ln())
        })
        .sum()
}

/// `∂τ/∂v = Σ D_j (k²/2)·sn cn/dn((v − α_j)/2)`.
pub fn tau_prime(weights: &[f64], alphas: &[f64], v: f64, ctx: &EllipticContext) -> f64 {
    let k2 = ctx.k() * ctx.k();
    weights
        .iter()
        .zip(alphas)
        .map(|(&n, &a)| {
            let (sn, cn, dn) = ctx.jacobi_real(0.5 * (v - a));
            n * 0.5 * k2 * sn * cn / dn
        })
        .sum()
}

/// `∂²τ/∂v² = Σ D_j (k²/4)(cn² − sn² + k² sn² cn²/dn²)((v − α_j)/2)`.
pub fn tau_second(weights: &[f64], alphas: &[f64], v: f64, ctx: &EllipticContext) -> f64 {
    let k2 = ctx.k() * ctx.k();
    weights
        .iter()
        .zip(alphas)
        .map(|(&n, &a)| {
            let (sn, cn, dn) = ctx.jacobi_real(0.5 * (v - a));
            let g1 = cn * cn - sn * sn + k2 * sn * sn * cn * cn / (dn * dn);
            n * 0.25 * k2 * g1
        })
        .sum()
}

/// Minimizer of `χ` for one direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddleResult {
    /// Saddle abscissa, reduced to `(−2K, 2K]`.
    pub v0: f64,
    pub chi: f64,
    pub chi2: f64,
    /// Bracket used: the hull of the atoms, unwrapped to an arc shorter
    /// than `2K`.
    pub bracket: (f64, f64),
    /// `|χ'(v0)|` after polishing.
    pub residual: f64,
}

impl SaddleResult {
    /// The boundary point `2iK' + v0 + 2K` this direction is sent to.
    pub fn boundary_point(&self, ctx: &EllipticContext) -> Complex64 {
        Complex64::new(self.v0 + 2.0 * ctx.big_k(), 2.0 * ctx.big_k_prime())
    }
}

fn reduce_half_open(x: f64, period: f64) -> f64 {
    let r = x - period * (x / period).round();
    if r <= -0.5 * period {
        r + period
    } else {
        r
    }
}

/// Unwrap atom positions onto an arc of length `< 2K`, returning the
/// unwrapped positions in input order.
fn unwrap_atoms(positions: &[f64], ctx: &EllipticContext) -> Result<Vec<f64>> {
    let period = 4.0 * ctx.big_k();
    let reduced: Vec<f64> = positions.iter().map(|&p| p.rem_euclid(period)).collect();
    let mut sorted = reduced.clone();
    sorted.sort_by(f64::total_cmp);
    // the largest circular gap marks where the arc starts
    let n = sorted.len();
    let mut start = sorted[0];
    let mut best_gap = sorted[0] + period - sorted[n - 1];
    for i in 1..n {
        let gap = sorted[i] - sorted[i - 1];
        if gap > best_gap {
            best_gap = gap;
            start = sorted[i];
        }
    }
    if period - best_gap >= 2.0 * ctx.big_k() {
        return Err(Error::Saddle(
            "direction is not monotone: atoms span half the circle".into(),
        ));
    }
    Ok(reduced
        .iter()
        .map(|&p| if p < start { p + period } else { p })
        .collect())
}

/// Minimize `χ(ř, ·)` over the line: bisection on `χ'` across the atom
/// hull, then Newton polish.
pub fn saddle(dir: &Direction, alphas: &[f64], ctx: &EllipticContext) -> Result<SaddleResult> {
    if ctx.k() == 0.0 {
        return Err(Error::Saddle("no saddle point at k = 0".into()));
    }
    let at = atoms(dir.components(), alphas, ctx);
    if at.is_empty() {
        return Err(Error::Saddle("empty direction".into()));
    }
    let pos: Vec<f64> = at.iter().map(|a| a.0).collect();
    let unwrapped = unwrap_atoms(&pos, ctx)?;
    let wts: Vec<f64> = at.iter().map(|a| a.1).collect();
    let lo = unwrapped.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = unwrapped.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let d1 = |v: f64| tau_prime(&wts, &unwrapped, v, ctx);
    let d2 = |v: f64| tau_second(&wts, &unwrapped, v, ctx);
    let mut v = if hi - lo < 1e-15 {
        lo
    } else {
        let (mut a, mut b) = (lo, hi);
        if d1(a) > 0.0 || d1(b) < 0.0 {
            return Err(Error::Saddle(format!(
                "χ' does not change sign on [{a}, {b}]"
            )));
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if d1(m) < 0.0 {
                a = m;
            } else {
                b = m;
            }
            if b - a < 1e-9 * (1.0 + a.abs()) {
                break;
            }
        }
        0.5 * (a + b)
    };
    for _ in 0..20 {
        let r = d1(v);
        if r.abs() <= SADDLE_TOL {
            break;
        }
        let step = r / d2(v);
        let next = v - step;
        if !(lo..=hi).contains(&next) || !next.is_finite() {
            break;
        }
        v = next;
    }
    let residual = d1(v).abs();
    let chi2 = d2(v);
    if chi2 <= 0.0 {
        return Err(Error::Saddle(format!("χ'' = {chi2} is not positive")));
    }
    Ok(SaddleResult {
        v0: reduce_half_open(v, 4.0 * ctx.big_k()),
        chi: tau(&wts, &unwrapped, v, ctx),
        chi2,
        bracket: (lo, hi),
        residual,
    })
}

/// Exponential functions of one graph at one modulus.
#[derive(Debug, Clone)]
pub struct ExponentialEvaluator<'a> {
    graph: &'a IsoradialGraph,
    ctx: EllipticContext,
    alphas: Vec<f64>,
}

impl<'a> ExponentialEvaluator<'a> {
    pub fn new(graph: &'a IsoradialGraph, ctx: &EllipticContext) -> Self {
        let scale = ctx.angle_scale();
        Self {
            graph,
            ctx: *ctx,
            alphas: graph.angles().iter().map(|a| a * scale).collect(),
        }
    }

    pub fn graph(&self) -> &IsoradialGraph {
        self.graph
    }

    pub fn context(&self) -> &EllipticContext {
        &self.ctx
    }

    /// Track angles in elliptic units.
    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    fn step_alpha(&self, coord: usize, sign: i32) -> f64 {
        if sign > 0 {
            self.alphas[coord]
        } else {
            self.alphas[coord] + 2.0 * self.ctx.big_k()
        }
    }

    /// Product of edge factors over a lift difference.
    pub fn expo_lift(&self, d: &[i32], u: Complex64) -> Result<Complex64> {
        let mut acc = Complex64::new(1.0, 0.0);
        for (j, &n) in d.iter().enumerate() {
            if n == 0 {
                continue;
            }
            let f = edge_factor(self.step_alpha(j, n.signum()), u, &self.ctx)?;
            acc *= f.powi(n.abs());
        }
        Ok(acc)
    }

    fn difference(&self, x: &[i32], y: &[i32]) -> Result<Vec<i32>> {
        for p in [x, y] {
            if !self.graph.contains(p) {
                return Err(Error::OutsideWindow(p.to_vec()));
            }
        }
        Ok(y.iter().zip(x).map(|(a, b)| a - b).collect())
    }

    /// `e_{(x,y)}(u)`.
    pub fn expo(&self, x: &[i32], y: &[i32], u: Complex64) -> Result<Complex64> {
        let d = self.difference(x, y)?;
        self.expo_lift(&d, u)
    }

    /// `e_{(x,y)}(u)`, shifting `u` off a nearby pole and flagging it.
    pub fn expo_flagged(&self, x: &[i32], y: &[i32], u: Complex64) -> Result<Flagged<Complex64>> {
        let d = self.difference(x, y)?;
        let near = d.iter().enumerate().any(|(j, &n)| {
            n != 0 && pole_distance(self.step_alpha(j, n.signum()), u, &self.ctx) < POLE_PROXIMITY
        });
        let u = if near {
            u + Complex64::new(0.0, POLE_SHIFT)
        } else {
            u
        };
        Ok(Flagged {
            value: self.expo_lift(&d, u)?,
            perturbed: near,
        })
    }

    /// Product of edge factors along an explicit diamond path.
    pub fn expo_along_path(&self, steps: &[Step], u: Complex64) -> Result<Complex64> {
        let mut acc = Complex64::new(1.0, 0.0);
        for s in steps {
            acc *= edge_factor(self.step_alpha(s.coord, s.sign), u, &self.ctx)?;
        }
        Ok(acc)
    }

    /// `e_{(x,y)}(2iK' + v)`, real and positive between primal vertices.
    pub fn expo_positive(&self, x: &[i32], y: &[i32], v: f64) -> Result<f64> {
        let u = Complex64::new(v, 2.0 * self.ctx.big_k_prime());
        let z = self.expo(x, y, u)?;
        if z.re <= 0.0 || z.im.abs() > 1e-11 * z.re {
            return Err(Error::Solver(format!(
                "exponential on the real line is not positive: {z}"
            )));
        }
        Ok(z.re)
    }

    pub fn chi(&self, dir: &Direction, v: f64) -> f64 {
        tau(dir.components(), &self.alphas, v, &self.ctx)
    }

    pub fn chi_prime(&self, dir: &Direction, v: f64) -> f64 {
        tau_prime(dir.components(), &self.alphas, v, &self.ctx)
    }

    pub fn chi_second(&self, dir: &Direction, v: f64) -> f64 {
        tau_second(dir.components(), &self.alphas, v, &self.ctx)
    }

    /// `τ` of an arbitrary signed lift-space vector.
    pub fn tau(&self, weights: &[f64], v: f64) -> f64 {
        tau(weights, &self.alphas, v, &self.ctx)
    }

    pub fn saddle(&self, dir: &Direction) -> Result<SaddleResult> {
        saddle(dir, &self.alphas, &self.ctx)
    }

    /// `τ(r̂, v)` for `samples` embedded directions `r̂ = e^{iφ}`, `φ`
    /// evenly spaced on the circle, through the lattice's flat lift.
    pub fn hemisphere(&self, v: f64, samples: usize) -> Result<Vec<f64>> {
        let per = self.graph.periodicity().ok_or_else(|| Error::NotPeriodic("hemisphere sweep needs a periodic graph".into()))?;
        Ok((0..samples)
            .map(|i| {
                let phi = 2.0 * std::f64::consts::PI * i as f64 / samples as f64;
                self.tau(&per.flat_direction(phi, self.graph.angles()), v)
            })
            .collect())
    }
}

/// Sign changes around a closed circular sequence. Exact zeros are
/// skipped.
pub fn circular_sign_changes(values: &[f64]) -> usize {
    let signs: Vec<bool> = values.iter().filter(|v| **v != 0.0).map(|v| *v > 0.0).collect();
    if signs.is_empty() {
        return 0;
    }
    (0..signs.len())
        .filter(|&i| signs[i] != signs[(i + 1) % signs.len()])
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_square, build_triangular};
    use crate::laplacian::MassiveOperator;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn ctx(k: f64) -> EllipticContext {
        EllipticContext::new(k).unwrap()
    }

    #[test]
    fn reversal_product_is_one() {
        let c = ctx(0.6);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let alpha = rng.gen_range(-2.0..2.0);
            let u = Complex64::new(rng.gen_range(0.0..8.0), rng.gen_range(0.0..8.0));
            let (Ok(a), Ok(b)) = (
                edge_factor(alpha, u, &c),
                edge_factor(alpha + 2.0 * c.big_k(), u, &c),
            ) else {
                continue;
            };
            if a.norm() > 1e6 || b.norm() > 1e6 {
                continue;
            }
            assert!((a * b - 1.0).norm() < 1e-11, "{}", a * b);
        }
    }

    #[test]
    fn factor_on_the_positive_line() {
        let c = ctx(0.5);
        let alpha = 0.4;
        let f = edge_factor(alpha, Complex64::new(alpha, 2.0 * c.big_k_prime()), &c).unwrap();
        // i√k' sc(iK') = i√k'·i = −√k'
        assert!((f + c.k_prime().sqrt()).norm() < 1e-13);
        let v = 1.3;
        let f = edge_factor(alpha, Complex64::new(v, 2.0 * c.big_k_prime()), &c).unwrap();
        let (_, _, dn) = c.jacobi_real(0.5 * (v - alpha));
        assert_relative_eq!(f.re, -c.k_prime().sqrt() / dn, max_relative = 1e-13);
        assert!(f.im.abs() < 1e-14);
    }

    #[test]
    fn massless_factor_is_tangent() {
        let c = ctx(0.0);
        let u = Complex64::new(0.7, 0.2);
        let f = edge_factor(0.3, u, &c).unwrap();
        let expected = Complex64::i() * ((u - 0.3) * 0.5).tan();
        assert!((f - expected).norm() < 1e-14);
    }

    #[test]
    fn expo_identities() {
        let g = build_triangular(4).unwrap();
        let c = ctx(0.5);
        let ev = ExponentialEvaluator::new(&g, &c);
        let u = Complex64::new(0.9, 0.7);
        let x = vec![0, 0, 0];
        let y = vec![1, 2, 1];
        let z = vec![1, 0, -1];
        assert_eq!(ev.expo(&x, &x, u).unwrap(), Complex64::new(1.0, 0.0));
        let xy = ev.expo(&x, &y, u).unwrap();
        let yx = ev.expo(&y, &x, u).unwrap();
        assert!((xy * yx - 1.0).norm() < 1e-12);
        let xz = ev.expo(&x, &z, u).unwrap();
        let zy = ev.expo(&z, &y, u).unwrap();
        assert!((xz * zy - xy).norm() < 1e-12 * xy.norm());
        assert!(ev.expo(&x, &[99, 0, 0], u).is_err());
    }

    #[test]
    fn path_independence() {
        let c = ctx(0.7);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for g in [build_square(0.6, 5).unwrap(), build_triangular(5).unwrap()] {
            let ev = ExponentialEvaluator::new(&g, &c);
            let prim = g.primal_vertices();
            for _ in 0..10 {
                let x = g.point(prim[rng.gen_range(0..prim.len())]).clone();
                let y = g.point(prim[rng.gen_range(0..prim.len())]).clone();
                let d = g.dimension();
                let fwd: Vec<usize> = (0..d).collect();
                let rev: Vec<usize> = (0..d).rev().collect();
                let p1 = g.minimal_path_ordered(&x, &y, &fwd).unwrap();
                let p2 = g.minimal_path_ordered(&x, &y, &rev).unwrap();
                let u = Complex64::new(rng.gen_range(0.0..6.0), rng.gen_range(0.0..3.0));
                let a = ev.expo_along_path(&p1, u).unwrap();
                let b = ev.expo_along_path(&p2, u).unwrap();
                let direct = ev.expo(&x, &y, u).unwrap();
                assert!((a - b).norm() <= 1e-12 * a.norm().max(1e-300));
                assert!((a - direct).norm() <= 1e-12 * a.norm().max(1e-300));
            }
        }
    }

    #[test]
    fn square_expo_is_monomial() {
        let theta_bar = 0.6;
        let g = build_square(theta_bar, 4).unwrap();
        let c = ctx(0.5);
        let ev = ExponentialEvaluator::new(&g, &c);
        let u = Complex64::new(0.8, 1.1);
        let th = theta_bar * c.angle_scale();
        let sa = c.sc((u + th) * 0.5).unwrap();
        let sb = c.sc((u - th) * 0.5).unwrap();
        let z = -c.k_prime() * sa * sb;
        let w = sb / sa;
        for (n1, n2) in [(1, 0), (0, 1), (2, -1), (-3, 2)] {
            let y = vec![n1 - n2, n1 + n2];
            let e = ev.expo(&[0, 0], &y, u).unwrap();
            let m = z.powi(n1) * w.powi(n2);
            assert!((e - m).norm() < 1e-11 * m.norm());
        }
    }

    #[test]
    fn expo_positive_is_harmonic() {
        let g = build_triangular(4).unwrap();
        let c = ctx(0.6);
        let ev = ExponentialEvaluator::new(&g, &c);
        let op = MassiveOperator::assemble(&g, &c).unwrap();
        let x0 = vec![0, 0, 0];
        let f: Vec<f64> = (0..op.len())
            .map(|l| ev.expo_positive(&x0, g.point(op.point(l)), 0.9).unwrap())
            .collect();
        assert_eq!(ev.expo_positive(&x0, &x0, 0.9).unwrap(), 1.0);
        for l in op.interior_vertices() {
            let r = op.apply_at(&f, l);
            let scale = f[l] * (op.mass2(l) + op.neighbors(l).iter().map(|n| n.1).sum::<f64>());
            assert!(r.abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn growth_along_a_ray_matches_chi() {
        let g = build_square(FRAC_PI_4, 110).unwrap();
        let c = ctx(0.5);
        let ev = ExponentialEvaluator::new(&g, &c);
        let dir = Direction::from_difference(&[1, 3]).unwrap();
        let v = 0.4;
        let n = 200;
        let y = vec![n / 4, 3 * n / 4];
        let e = ev.expo_positive(&[0, 0], &y, v).unwrap();
        let per_step = e.ln() / n as f64;
        assert!((per_step - ev.chi(&dir, v)).abs() < 1e-3);
    }

    #[test]
    fn chi_derivatives_match_finite_differences() {
        let g = build_triangular(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let c = ctx(rng.gen_range(0.1..0.9));
            let ev = ExponentialEvaluator::new(&g, &c);
            let w: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let dir = Direction::from_vector(&w).unwrap();
            let v = rng.gen_range(-3.0..3.0);
            let h = 1e-5;
            let fd1 = (ev.chi(&dir, v + h) - ev.chi(&dir, v - h)) / (2.0 * h);
            let fd2 = (ev.chi_prime(&dir, v + h) - ev.chi_prime(&dir, v - h)) / (2.0 * h);
            assert!((fd1 - ev.chi_prime(&dir, v)).abs() < 1e-7);
            assert!((fd2 - ev.chi_second(&dir, v)).abs() < 1e-7);
            assert_relative_eq!(ev.chi(&dir.negated(), v), -ev.chi(&dir, v), epsilon = 1e-14);
        }
    }

    #[test]
    fn symmetric_saddles() {
        let c = ctx(0.5);
        let g = build_square(FRAC_PI_4, 2).unwrap();
        let ev = ExponentialEvaluator::new(&g, &c);
        let diag = Direction::from_difference(&[1, 1]).unwrap();
        assert!(ev.chi_prime(&diag, 0.0).abs() < 1e-15);
        let s = ev.saddle(&diag).unwrap();
        assert!(s.v0.abs() < 1e-13);
        assert!(s.chi < 0.0 && s.chi2 > 0.0);
        let t = build_triangular(2).unwrap();
        let ev = ExponentialEvaluator::new(&t, &c);
        let axis = Direction::from_difference(&[1, 1, 0]).unwrap();
        let s = ev.saddle(&axis).unwrap();
        let mid = 0.5 * (ev.alphas()[0] + ev.alphas()[1]);
        assert!((s.v0 - mid).abs() < 1e-12);
    }

    #[test]
    fn saddle_is_the_grid_minimum() {
        let g = build_triangular(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let c = ctx(rng.gen_range(0.2..0.9));
            let ev = ExponentialEvaluator::new(&g, &c);
            // a monotone direction: signs (+, +, −) keep atoms in a half circle
            let w = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), -rng.gen_range(0.0..1.0)];
            let dir = Direction::from_vector(&w).unwrap();
            let s = ev.saddle(&dir).unwrap();
            assert!(s.residual <= SADDLE_TOL);
            let period = 4.0 * c.big_k();
            let n = 4000;
            let (mut best_v, mut best) = (0.0, f64::INFINITY);
            for i in 0..n {
                let v = -0.5 * period + period * i as f64 / n as f64;
                let val = ev.chi(&dir, v);
                if val < best {
                    best = val;
                    best_v = v;
                }
            }
            let gap = reduce_half_open(best_v - s.v0, period).abs();
            assert!(gap < 2.0 * period / n as f64, "grid {best_v} vs {}", s.v0);
            assert!(s.chi <= best + 1e-12);
        }
    }

    #[test]
    fn hemisphere_has_two_arcs() {
        let c = ctx(0.5);
        for g in [build_square(0.5, 2).unwrap(), build_triangular(2).unwrap()] {
            let ev = ExponentialEvaluator::new(&g, &c);
            for i in 0..10 {
                let v = -2.0 * c.big_k() + 4.0 * c.big_k() * (i as f64 + 0.5) / 10.0;
                let vals = ev.hemisphere(v, 720).unwrap();
                assert_eq!(circular_sign_changes(&vals), 2);
            }
        }
        assert_eq!(circular_sign_changes(&[1.0, -1.0, 1.0, -1.0]), 4);
    }

    #[test]
    fn pole_perturbation_is_flagged() {
        let g = build_square(FRAC_PI_4, 2).unwrap();
        let c = ctx(0.5);
        let ev = ExponentialEvaluator::new(&g, &c);
        // (u − α)/2 = K for α = ev.alphas()[0]
        let u = Complex64::new(ev.alphas()[0] + 2.0 * c.big_k(), 0.0);
        let r = ev.expo_flagged(&[0, 0], &[1, 1], u).unwrap();
        assert!(r.perturbed && r.value.is_finite());
        let r = ev.expo_flagged(&[0, 0], &[1, 1], Complex64::new(0.3, 0.1)).unwrap();
        assert!(!r.perturbed);
        assert!(pole_distance(0.0, Complex64::new(2.0 * c.big_k(), 0.0), &c) < 1e-15);
        let _ = PI;
    }

    proptest! {
        #[test]
        fn tau_is_linear(a in -2.0..2.0f64, b in -2.0..2.0f64, v in -4.0..4.0f64,
                         w1 in proptest::collection::vec(-1.0..1.0f64, 3),
                         w2 in proptest::collection::vec(-1.0..1.0f64, 3)) {
            let c = ctx(0.6);
            let alphas = [0.1, 0.9, 1.7];
            let mix: Vec<f64> = w1.iter().zip(&w2).map(|(x, y)| a * x + b * y).collect();
            let lhs = tau(&mix, &alphas, v, &c);
            let rhs = a * tau(&w1, &alphas, v, &c) + b * tau(&w2, &alphas, v, &c);
            prop_assert!((lhs - rhs).abs() < 1e-12);
            let neg: Vec<f64> = w1.iter().map(|x| -x).collect();
            prop_assert!((tau(&w1, &alphas, v, &c) + tau(&neg, &alphas, v, &c)).abs() < 1e-14);
        }

        #[test]
        fn chi_is_convex_at_the_saddle(w in proptest::collection::vec(0.0..1.0f64, 2), k in 0.1..0.9f64) {
            prop_assume!(w[0] + w[1] > 1e-3);
            let c = ctx(k);
            let s = saddle(&Direction::from_vector(&w).unwrap(), &[0.2, 1.1], &c).unwrap();
            prop_assert!(s.chi2 > 0.0 && s.chi < 0.0);
        }
    }
}
