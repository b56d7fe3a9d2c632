//! The Green function as a contour integral of the exponential over a
//! vertical line of the torus, its saddle-point asymptotics, Martin-kernel
//! ratios and the map from directions to boundary points.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::elliptic::EllipticContext;
use crate::error::{Error, Result};
use crate::exponential::{ExponentialEvaluator, SaddleResult};
use crate::graph::{planar, Direction, Lift};

/// Relative agreement of successive trapezoid refinements.
pub const CONTOUR_TOL: f64 = 1e-12;
/// Largest number of trapezoid nodes.
pub const CONTOUR_MAX_NODES: usize = 1 << 16;
/// Abscissa shift applied when the contour meets a pole line.
pub const ABSCISSA_SHIFT: f64 = 1e-4;
/// Default radii schedule for Martin limits.
pub const RADII: [f64; 6] = [10.0, 14.0, 20.0, 28.0, 40.0, 56.0];

/// How a Green value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Contour,
    Asymptotic,
    Oracle,
    Fourier,
}

impl Method {
    pub fn tag(&self) -> &'static str {
        match self {
            Method::Contour => "contour",
            Method::Asymptotic => "asymptotic",
            Method::Oracle => "oracle",
            Method::Fourier => "fourier",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenEvaluation {
    pub value: f64,
    pub method: Method,
    /// Quadrature nodes used; zero for closed forms.
    pub nodes: usize,
    /// Difference between the last two refinements, or a model error.
    pub error_estimate: f64,
    /// `|Im| / |Re|` of the complex integral.
    pub imag_residue: f64,
    /// The abscissa was shifted off a pole line.
    pub perturbed: bool,
}

/// Contour abscissa `(2K/π)·arg(y − x)` for a lift difference.
pub fn abscissa(d: &[i32], angles: &[f64], ctx: &EllipticContext) -> f64 {
    planar(d, angles).arg() * ctx.angle_scale()
}

/// `G` for a lift difference `d = y − x` by the periodic trapezoid rule on
/// `u = s + it`, `t ∈ [0, 4K')`. Only `d`, the track angles and the modulus
/// enter, so the value is local to a minimal path.
pub fn contour_lift(ev: &ExponentialEvaluator, d: &[i32]) -> Result<GreenEvaluation> {
    let ctx = ev.context();
    if ctx.k() == 0.0 {
        return Err(Error::InvalidInput(
            "the contour formula needs k > 0".into(),
        ));
    }
    let period = 4.0 * ctx.big_k_prime();
    let pref = ctx.k_prime() / (4.0 * std::f64::consts::PI);
    if d.iter().all(|&n| n == 0) {
        return Ok(GreenEvaluation {
            value: pref * period,
            method: Method::Contour,
            nodes: 0,
            error_estimate: 0.0,
            imag_residue: 0.0,
            perturbed: false,
        });
    }
    let mut s = abscissa(d, ev.graph().angles(), ctx);
    let big4 = 4.0 * ctx.big_k();
    let near_pole = d.iter().zip(ev.alphas()).any(|(&n, &a)| {
        if n == 0 {
            return false;
        }
        let pole = if n > 0 { a + 2.0 * ctx.big_k() } else { a };
        let gap = (s - pole).rem_euclid(big4);
        gap.min(big4 - gap) < 1e-10
    });
    if near_pole {
        s += ABSCISSA_SHIFT;
    }
    let f = |t: f64| ev.expo_lift(d, Complex64::new(s, t));
    let mut n = 16usize;
    let mut sum = Complex64::new(0.0, 0.0);
    for m in 0..n {
        sum += f(period * m as f64 / n as f64)?;
    }
    let mut prev = sum * (period / n as f64);
    loop {
        let mids: Result<Vec<Complex64>> = (0..n)
            .into_par_iter()
            .map(|m| f(period * (m as f64 + 0.5) / n as f64))
            .collect();
        sum += mids?.into_iter().sum::<Complex64>();
        n *= 2;
        let cur = sum * (period / n as f64);
        let diff = (cur - prev).norm();
        if (diff <= CONTOUR_TOL * cur.norm() && n >= 64) || n >= CONTOUR_MAX_NODES {
            if diff > CONTOUR_TOL * cur.norm() {
                return Err(Error::Quadrature(format!(
                    "trapezoid rule did not converge with {n} nodes"
                )));
            }
            let value = pref * cur;
            return Ok(GreenEvaluation {
                value: value.re,
                method: Method::Contour,
                nodes: n,
                error_estimate: pref * diff,
                imag_residue: value.im.abs() / value.re.abs(),
                perturbed: near_pole,
            });
        }
        prev = cur;
    }
}

fn difference(ev: &ExponentialEvaluator, x: &[i32], y: &[i32]) -> Result<Vec<i32>> {
    for p in [x, y] {
        if !ev.graph().contains(p) || !ev.graph().is_primal_lift(p) {
            return Err(Error::OutsideWindow(p.to_vec()));
        }
    }
    Ok(y.iter().zip(x).map(|(a, b)| a - b).collect())
}

/// `G(x, y)` by contour integration.
pub fn green_contour(ev: &ExponentialEvaluator, x: &[i32], y: &[i32]) -> Result<GreenEvaluation> {
    contour_lift(ev, &difference(ev, x, y)?)
}

/// Leading saddle-point term for a lift difference.
pub fn asymptotic_lift(ev: &ExponentialEvaluator, d: &[i32]) -> Result<(GreenEvaluation, SaddleResult)> {
    let ctx = ev.context();
    let dir = Direction::from_difference(d)?;
    let sad = ev.saddle(&dir)?;
    let n: f64 = d.iter().map(|x| x.abs() as f64).sum();
    let e = ev.expo_lift(d, Complex64::new(sad.v0, 2.0 * ctx.big_k_prime()))?;
    let value = ctx.k_prime() * e.re / (2.0 * (2.0 * std::f64::consts::PI * n * sad.chi2).sqrt());
    Ok((
        GreenEvaluation {
            value,
            method: Method::Asymptotic,
            nodes: 0,
            error_estimate: value / n,
            imag_residue: 0.0,
            perturbed: false,
        },
        sad,
    ))
}

/// `G(x, y)` by its saddle-point asymptotics.
pub fn green_asymptotic(ev: &ExponentialEvaluator, x: &[i32], y: &[i32]) -> Result<GreenEvaluation> {
    Ok(asymptotic_lift(ev, &difference(ev, x, y)?)?.0)
}

/// `G(x1, y) / G(x0, y)`.
pub fn martin_kernel(ev: &ExponentialEvaluator, x1: &[i32], x0: &[i32], y: &[i32]) -> Result<f64> {
    let num = green_contour(ev, x1, y)?;
    let den = green_contour(ev, x0, y)?;
    Ok(num.value / den.value)
}

/// `e_{(x0,x1)}(u0)` for the boundary point of a direction.
pub fn martin_target(ev: &ExponentialEvaluator, x0: &[i32], x1: &[i32], dir: &Direction) -> Result<f64> {
    let sad = ev.saddle(dir)?;
    let d: Vec<i32> = x1.iter().zip(x0).map(|(a, b)| a - b).collect();
    Ok(ev.expo_lift(&d, sad.boundary_point(ev.context()))?.re)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MartinRow {
    pub radius: f64,
    pub y: Lift,
    pub ratio: f64,
    pub target: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MartinAudit {
    pub rows: Vec<MartinRow>,
}

impl MartinAudit {
    pub fn final_error(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.error)
    }

    /// Errors strictly decrease over rows with radius at least `from`.
    pub fn monotone_from(&self, from: f64) -> bool {
        let tail: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.radius >= from)
            .map(|r| r.error)
            .collect();
        tail.windows(2).all(|w| w[1] < w[0])
    }
}

/// Martin ratios along the lifted ray `y = x0 + round(R·dir)`, compared
/// with the limit `e_{(x0,x1)}(u0)` of the ray's direction.
pub fn martin_limit_audit(
    ev: &ExponentialEvaluator,
    x0: &[i32],
    x1: &[i32],
    dir: &[f64],
    radii: &[f64],
) -> Result<MartinAudit> {
    let direction = Direction::from_vector(dir)?;
    let target = martin_target(ev, x0, x1, &direction)?;
    let rows: Result<Vec<MartinRow>> = radii
        .par_iter()
        .map(|&r| {
            let y = lifted_primal(ev, x0, direction.components(), r);
            let ratio = martin_kernel(ev, x1, x0, &y)?;
            Ok(MartinRow {
                radius: r,
                y,
                ratio,
                target,
                error: (ratio - target).abs(),
            })
        })
        .collect();
    Ok(MartinAudit { rows: rows? })
}

/// The lift `x0 + round(R·dir)`; when its parity is not primal, the
/// coordinate with the largest rounding residual is rounded the other way.
fn lifted_primal(ev: &ExponentialEvaluator, x0: &[i32], dir: &[f64], r: f64) -> Lift {
    let target: Vec<f64> = x0.iter().zip(dir).map(|(&a, &n)| a as f64 + r * n).collect();
    let mut y: Lift = target.iter().map(|t| t.round() as i32).collect();
    if !ev.graph().is_primal_lift(&y) {
        let j = (0..y.len())
            .max_by(|&a, &b| {
                let ra = (target[a] - y[a] as f64).abs();
                let rb = (target[b] - y[b] as f64).abs();
                ra.total_cmp(&rb).then(b.cmp(&a))
            })
            .expect("lifts are nonempty");
        y[j] += if target[j] >= y[j] as f64 { 1 } else { -1 };
    }
    y
}

#[derive(Debug, Clone, PartialEq)]
pub struct RayRow {
    pub radius: f64,
    pub y: Lift,
    pub direction: Direction,
    pub ratio: f64,
    /// Limit predicted by the current reduced coordinates.
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RayAudit {
    pub rows: Vec<RayRow>,
    /// Largest distance between reduced coordinates over the second half
    /// of the radii.
    pub direction_spread: f64,
    /// Largest spread of Martin ratios over the second half of the radii.
    pub ratio_spread: f64,
}

impl RayAudit {
    /// The reduced coordinates keep moving by more than `tol`.
    pub fn oscillates(&self, tol: f64) -> bool {
        self.direction_spread > tol
    }
}

/// Martin ratios along a planar ray from `x0`, with `y` the primal vertex
/// nearest `x0 + R e^{iφ}`.
pub fn martin_ray_audit(
    ev: &ExponentialEvaluator,
    x0: &[i32],
    x1: &[i32],
    ray_angle: f64,
    radii: &[f64],
) -> Result<RayAudit> {
    let g = ev.graph();
    let origin = g.lift_position(x0);
    let mut rows = Vec::with_capacity(radii.len());
    for &r in radii {
        let target_pos = origin + Complex64::from_polar(r, ray_angle);
        let yi = g
            .nearest_primal(target_pos)
            .ok_or_else(|| Error::InvalidGraph("graph has no primal vertex".into()))?;
        if (g.position(yi) - target_pos).norm() > 2.0 {
            return Err(Error::OutsideWindow(g.point(yi).clone()));
        }
        let y = g.point(yi).clone();
        let direction = g.reduced_coords(x0, &y)?;
        let ratio = martin_kernel(ev, x1, x0, &y)?;
        let target = martin_target(ev, x0, x1, &direction)?;
        rows.push(RayRow {
            radius: r,
            y,
            direction,
            ratio,
            target,
        });
    }
    let tail = &rows[rows.len() / 2..];
    let mut direction_spread: f64 = 0.0;
    let mut ratio_spread: f64 = 0.0;
    for a in tail {
        for b in tail {
            direction_spread = direction_spread.max(a.direction.distance(&b.direction));
            ratio_spread = ratio_spread.max((a.ratio - b.ratio).abs());
        }
    }
    Ok(RayAudit {
        rows,
        direction_spread,
        ratio_spread,
    })
}

/// Sampled map from embedded directions to boundary points.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMap {
    /// Direction angles `φ` in `[0, 2π)`.
    pub angles: Vec<f64>,
    /// Real part of `u0 = 2iK' + v0 + 2K`, lifted to be continuous.
    pub lifted: Vec<f64>,
    pub saddles: Vec<SaddleResult>,
    /// Lift of the closing step from the last sample back to the first.
    pub closing_step: f64,
}

impl BoundaryMap {
    /// Total increase of the lifted abscissa over one full turn.
    pub fn winding(&self) -> f64 {
        self.lifted.last().copied().unwrap_or(0.0) - self.lifted[0] + self.closing_step
    }

    pub fn steps(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.lifted.windows(2).map(|w| w[1] - w[0]).collect();
        s.push(self.closing_step);
        s
    }

    pub fn strictly_increasing(&self) -> bool {
        self.steps().iter().all(|&s| s > 0.0)
    }

    /// Finite-difference slopes `dv0/dφ`, including the closing step.
    pub fn slopes(&self) -> Vec<f64> {
        let dphi = 2.0 * std::f64::consts::PI / self.angles.len() as f64;
        self.steps().iter().map(|s| s / dphi).collect()
    }

    pub fn max_jump(&self) -> f64 {
        self.steps().iter().copied().fold(0.0, f64::max)
    }
}

fn wrap_step(x: f64, period: f64) -> f64 {
    let r = x - period * (x / period).round();
    if r <= -0.5 * period {
        r + period
    } else {
        r
    }
}

/// Boundary points of `samples` evenly spaced embedded directions on a
/// periodic graph.
pub fn boundary_map(ev: &ExponentialEvaluator, samples: usize) -> Result<BoundaryMap> {
    let g = ev.graph();
    let per = g.periodicity().ok_or_else(|| {
        Error::NotPeriodic("the boundary map needs a periodic graph".into())
    })?;
    let ctx = ev.context();
    let angles: Vec<f64> = (0..samples)
        .map(|i| 2.0 * std::f64::consts::PI * i as f64 / samples as f64)
        .collect();
    let saddles: Result<Vec<SaddleResult>> = angles
        .par_iter()
        .map(|&phi| {
            let dir = Direction::from_vector(&per.flat_direction(phi, g.angles()))?;
            ev.saddle(&dir)
        })
        .collect();
    let saddles = saddles?;
    let period = 4.0 * ctx.big_k();
    let raw: Vec<f64> = saddles.iter().map(|s| s.v0 + 2.0 * ctx.big_k()).collect();
    let mut lifted = vec![raw[0]];
    for w in raw.windows(2) {
        let last = *lifted.last().expect("nonempty");
        lifted.push(last + wrap_step(w[1] - w[0], period));
    }
    let closing_step = wrap_step(raw[0] - raw[raw.len() - 1], period);
    Ok(BoundaryMap {
        angles,
        lifted,
        saddles,
        closing_step,
    })
}

/// Positive harmonic function `x ↦ Σ w_i e_{(x0,x)}(2iK' + v_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureHarmonic {
    /// `(v_i, w_i)` with `w_i > 0`.
    pub atoms: Vec<(f64, f64)>,
    pub x0: Lift,
}

impl MeasureHarmonic {
    pub fn new(atoms: Vec<(f64, f64)>, x0: Lift) -> Result<Self> {
        if atoms.is_empty() || atoms.iter().any(|a| !(a.1 > 0.0) || !a.0.is_finite()) {
            return Err(Error::InvalidInput(
                "atoms need finite positions and positive weights".into(),
            ));
        }
        Ok(Self { atoms, x0 })
    }

    pub fn value(&self, ev: &ExponentialEvaluator, x: &[i32]) -> Result<f64> {
        let mut acc = 0.0;
        for &(v, w) in &self.atoms {
            acc += w * ev.expo_positive(&self.x0, x, v)?;
        }
        Ok(acc)
    }

    /// Growth rate of the function along a lift-space direction: the
    /// largest `τ(D, v_i)` over the atoms.
    pub fn growth_rate(&self, ev: &ExponentialEvaluator, d: &[f64]) -> f64 {
        self.atoms
            .iter()
            .map(|&(v, _)| ev.tau(d, v))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Smallest decay rate `|χ(v0)|` per unit of Euclidean distance over
/// `samples` embedded directions of a periodic graph.
pub fn decay_rate(ev: &ExponentialEvaluator, samples: usize) -> Result<f64> {
    let g = ev.graph();
    let per = g.periodicity().ok_or_else(|| {
        Error::NotPeriodic("the decay rate needs a periodic graph".into())
    })?;
    let mut rate = f64::INFINITY;
    for i in 0..samples {
        let phi = 2.0 * std::f64::consts::PI * i as f64 / samples as f64;
        let v = per.flat_direction(phi, g.angles());
        let dir = Direction::from_vector(&v)?;
        let l1: f64 = v.iter().map(|x| x.abs()).sum();
        rate = rate.min(-ev.saddle(&dir)?.chi * l1);
    }
    Ok(rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::EllipticContext;
    use crate::graph::{build_square, build_triangular, build_waves};
    use crate::laplacian::{dirichlet_radius, MassiveOperator};
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn ctx(k: f64) -> EllipticContext {
        EllipticContext::new(k).unwrap()
    }

    #[test]
    fn diagonal_value() {
        let g = build_square(FRAC_PI_4, 2).unwrap();
        let c = ctx(0.5);
        let ev = ExponentialEvaluator::new(&g, &c);
        let v = green_contour(&ev, &[0, 0], &[0, 0]).unwrap().value;
        assert_relative_eq!(v, c.k_prime() * c.big_k_prime() / PI, max_relative = 1e-15);
    }

    #[test]
    fn contour_matches_dirichlet_oracle() {
        let c = ctx(0.8);
        for g in [build_square(0.6, 56).unwrap(), build_triangular(68).unwrap()] {
            let ev = ExponentialEvaluator::new(&g, &c);
            let op = MassiveOperator::assemble(&g, &c).unwrap();
            let x0 = vec![0; g.dimension()];
            let xl = op.local_index(g.index_of(&x0).unwrap()).unwrap();
            let radius = dirichlet_radius(decay_rate(&ev, 64).unwrap(), 4.0, 1e-9);
            let oracle = op.truncated_green(xl, radius).unwrap();
            for l in 0..op.len() {
                let y = g.point(op.point(l));
                if (g.position(op.point(l))).norm() > 4.0 {
                    continue;
                }
                let gc = green_contour(&ev, &x0, y).unwrap();
                assert!(gc.imag_residue < 1e-10);
                let o = oracle.values[l];
                assert!((gc.value - o).abs() <= 1e-8 * o, "{y:?}: {} vs {o}", gc.value);
            }
        }
    }

    #[test]
    fn contour_is_symmetric() {
        let g = build_triangular(6).unwrap();
        let c = ctx(0.4);
        let ev = ExponentialEvaluator::new(&g, &c);
        let (x, y) = (vec![0, 0, 0], vec![1, 2, 1]);
        let a = green_contour(&ev, &x, &y).unwrap().value;
        let b = green_contour(&ev, &y, &x).unwrap().value;
        assert_relative_eq!(a, b, max_relative = 1e-10);
        assert!(a > 0.0);
    }

    #[test]
    fn asymptotics_improve_with_distance() {
        let g = build_square(FRAC_PI_4, 2).unwrap();
        let c = ctx(0.5);
        let ev = ExponentialEvaluator::new(&g, &c);
        let mut errs = Vec::new();
        for n in [10, 20, 40, 80] {
            let d = [n, n];
            let exact = contour_lift(&ev, &d).unwrap().value;
            let (asym, _) = asymptotic_lift(&ev, &d).unwrap();
            errs.push((asym.value / exact - 1.0).abs());
        }
        // the leading correction is about 1.1/N, under 2% from N = 160 on
        assert!(errs[3] < 0.02, "{errs:?}");
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((1.6..2.5).contains(&ratio), "{errs:?}");
        }
        let (a, _) = asymptotic_lift(&ev, &[40, 40]).unwrap();
        let (b, _) = asymptotic_lift(&ev, &[40, 40]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn martin_ratio_at_the_source_is_one() {
        let g = build_square(FRAC_PI_4, 10).unwrap();
        let c = ctx(0.5);
        let ev = ExponentialEvaluator::new(&g, &c);
        let x0 = [0, 0];
        assert_eq!(martin_kernel(&ev, &x0, &x0, &[6, 4]).unwrap(), 1.0);
        let dir = Direction::from_difference(&[1, 1]).unwrap();
        assert_eq!(martin_target(&ev, &x0, &x0, &dir).unwrap(), 1.0);
    }

    #[test]
    fn martin_limit_converges_on_the_square_lattice() {
        let g = build_square(FRAC_PI_4, 30).unwrap();
        let c = ctx(0.5);
        let ev = ExponentialEvaluator::new(&g, &c);
        let audit = martin_limit_audit(&ev, &[0, 0], &[-1, 1], &[0.5, 0.5], &RADII).unwrap();
        assert!(audit.final_error() <= 5e-3, "{:?}", audit.rows);
        assert!(audit.monotone_from(20.0));
    }

    #[test]
    fn waves_have_no_limit() {
        let g = build_waves(64).unwrap();
        let c = ctx(0.5);
        let ev = ExponentialEvaluator::new(&g, &c);
        let x0 = g.point(g.nearest_primal(Complex64::new(0.0, 0.0)).unwrap()).clone();
        let x1 = g
            .neighbors(g.index_of(&x0).unwrap())
            .first()
            .map(|&(w, _)| g.point(w).clone())
            .unwrap();
        let radii: Vec<f64> = (3..=12).map(|i| 4.0 * i as f64).collect();
        let audit = martin_ray_audit(&ev, &x0, &x1, 0.3, &radii).unwrap();
        assert!(audit.oscillates(0.02), "{}", audit.direction_spread);
        assert!(audit.ratio_spread > 1e-3);
    }

    #[test]
    fn boundary_map_winds_once() {
        let c = ctx(0.5);
        for g in [build_square(FRAC_PI_4, 2).unwrap(), build_triangular(2).unwrap()] {
            let ev = ExponentialEvaluator::new(&g, &c);
            let map = boundary_map(&ev, 360).unwrap();
            assert!(map.strictly_increasing());
            assert!((map.winding() - 4.0 * c.big_k()).abs() < 1e-6);
            assert!(map.slopes().iter().all(|&s| s > 0.0));
        }
        let g = build_square(FRAC_PI_4, 2).unwrap();
        let ev = ExponentialEvaluator::new(&g, &c);
        let map = boundary_map(&ev, 4).unwrap();
        for s in map.steps() {
            assert_relative_eq!(s, c.big_k(), max_relative = 1e-10);
        }
        let fine = boundary_map(&ev, 720).unwrap();
        assert!(fine.max_jump() < map.max_jump() / 100.0);
    }

    #[test]
    fn measures_give_positive_harmonic_functions() {
        let g = build_triangular(4).unwrap();
        let c = ctx(0.5);
        let ev = ExponentialEvaluator::new(&g, &c);
        let op = MassiveOperator::assemble(&g, &c).unwrap();
        let x0 = vec![0, 0, 0];
        let single = MeasureHarmonic::new(vec![(0.7, 1.0)], x0.clone()).unwrap();
        let y = vec![1, 2, 1];
        assert_eq!(
            single.value(&ev, &y).unwrap(),
            ev.expo_positive(&x0, &y, 0.7).unwrap()
        );
        let mix = MeasureHarmonic::new(vec![(0.7, 1.0), (3.1, 0.5)], x0).unwrap();
        let f: Vec<f64> = (0..op.len())
            .map(|l| mix.value(&ev, g.point(op.point(l))).unwrap())
            .collect();
        assert!(f.iter().all(|&v| v > 0.0));
        for l in op.interior_vertices() {
            let scale = f[l] * (op.mass2(l) + op.neighbors(l).iter().map(|n| n.1).sum::<f64>());
            assert!(op.apply_at(&f, l).abs() <= 1e-9 * scale);
        }
        // a mixture grows in strictly more directions than either atom
        let per = g.periodicity().unwrap();
        let grows = |h: &MeasureHarmonic| {
            (0..720)
                .filter(|&i| {
                    let phi = 2.0 * PI * i as f64 / 720.0;
                    h.growth_rate(&ev, &per.flat_direction(phi, g.angles())) > 0.0
                })
                .count()
        };
        let a = MeasureHarmonic::new(vec![(0.7, 1.0)], vec![0, 0, 0]).unwrap();
        assert_eq!(grows(&a), 360);
        assert!(grows(&mix) > 360);
        assert!(MeasureHarmonic::new(vec![(0.7, -1.0)], vec![0, 0, 0]).is_err());
    }

    #[test]
    fn locality_under_distant_flips() {
        let g = build_triangular(6).unwrap();
        let c = ctx(0.6);
        let before = {
            let ev = ExponentialEvaluator::new(&g, &c);
            green_contour(&ev, &[0, 0, 0], &[1, 2, 1]).unwrap().value
        };
        let h = g.star_triangle_flip(&[5, 0, 0]).unwrap_or(g.clone());
        let ev = ExponentialEvaluator::new(&h, &c);
        let after = green_contour(&ev, &[0, 0, 0], &[1, 2, 1]).unwrap().value;
        assert_eq!(before.to_bits(), after.to_bits());
    }
}
