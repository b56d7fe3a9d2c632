//! Periodic graphs in Fourier space: the symbol of the massive Laplacian,
//! its characteristic polynomial, Green values by Fourier inversion, the
//! amoeba and its oval, the argmax map, and explicit relations for the
//! square and triangular lattices.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra_sparse::na::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::elliptic::EllipticContext;
use crate::error::{Error, Result};
use crate::exponential::ExponentialEvaluator;
use crate::graph::{planar, IsoradialGraph, Lift, Periodicity};
use crate::green::{GreenEvaluation, Method};
use crate::laplacian::{conductance, mass_term, solve_unit_source, Solver};

/// Relative agreement of successive Fourier refinements.
pub const FOURIER_TOL: f64 = 1e-12;
/// Largest number of Fourier nodes per axis.
pub const FOURIER_MAX_NODES: usize = 2048;
/// Ratio between successive radii when scanning a ray for the oval.
const RAY_SCAN_RATIO: f64 = 1.05;
/// Step of the complex-step derivative.
const COMPLEX_STEP: f64 = 1e-30;

/// One off-diagonal term `−ρ z^{n1} w^{n2}` in row `row`, column `col`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolTerm {
    pub row: usize,
    pub col: usize,
    pub n1: i64,
    pub n2: i64,
    pub rho: f64,
}

/// The massive Laplacian of a periodic graph acting on
/// `f(rep_s + n1 T1 + n2 T2) = v_s z^{n1} w^{n2}`.
#[derive(Debug, Clone)]
pub struct FourierSymbol {
    periodicity: Periodicity,
    angles: Vec<f64>,
    diagonal: Vec<f64>,
    mass2: Vec<f64>,
    terms: Vec<SymbolTerm>,
}

impl FourierSymbol {
    pub fn new(graph: &IsoradialGraph, ctx: &EllipticContext) -> Result<Self> {
        let periodicity = graph
            .periodicity()
            .ok_or_else(|| Error::NotPeriodic("graph has no declared fundamental domain".into()))?
            .clone();
        let angles = graph.angles().to_vec();
        let size = periodicity.reps.len();
        let mut diagonal = vec![0.0; size];
        let mut mass2 = vec![0.0; size];
        let mut terms = Vec::new();
        for (r, rep) in periodicity.reps.iter().enumerate() {
            let i = graph
                .index_of(rep)
                .ok_or_else(|| Error::OutsideWindow(rep.clone()))?;
            if !graph.is_complete(i) {
                return Err(Error::InvalidGraph(format!(
                    "representative {rep:?} is on the window boundary"
                )));
            }
            for &(j, e) in graph.neighbors(i) {
                let theta_bar = graph.edges()[e].theta_bar;
                let rho = conductance(theta_bar, ctx)?;
                let m = mass_term(theta_bar, ctx)?;
                diagonal[r] += rho + m;
                mass2[r] += m;
                let (col, n1, n2) = periodicity
                    .decompose(graph.point(j), &angles)
                    .ok_or_else(|| {
                        Error::NotPeriodic(format!("neighbor {:?} not in the lattice", graph.point(j)))
                    })?;
                terms.push(SymbolTerm { row: r, col, n1, n2, rho });
            }
        }
        Ok(Self {
            periodicity,
            angles,
            diagonal,
            mass2,
            terms,
        })
    }

    /// Number of vertices in the fundamental domain.
    pub fn size(&self) -> usize {
        self.diagonal.len()
    }

    pub fn periodicity(&self) -> &Periodicity {
        &self.periodicity
    }

    pub fn terms(&self) -> &[SymbolTerm] {
        &self.terms
    }

    /// `m²` at each representative.
    pub fn mass2(&self) -> &[f64] {
        &self.mass2
    }

    /// `Σρ + m²` at each representative.
    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    /// `Δ(z, w)`.
    pub fn matrix(&self, z: Complex64, w: Complex64) -> DMatrix<Complex64> {
        let n = self.size();
        let mut m = DMatrix::from_fn(n, n, |r, c| {
            if r == c {
                Complex64::new(self.diagonal[r], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        for t in &self.terms {
            m[(t.row, t.col)] -= t.rho * monomial(z, t.n1) * monomial(w, t.n2);
        }
        m
    }

    /// `P(z, w) = det Δ(z, w)`.
    pub fn char_poly(&self, z: Complex64, w: Complex64) -> Complex64 {
        let m = self.matrix(z, w);
        match self.size() {
            1 => m[(0, 0)],
            2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
            _ => m.lu().determinant(),
        }
    }

    /// `P(e^a, e^b)`, real for real `(a, b)`.
    pub fn p_log(&self, a: f64, b: f64) -> f64 {
        self.char_poly(Complex64::new(a, 0.0).exp(), Complex64::new(b, 0.0).exp())
            .re
    }

    /// Gradient of `(a, b) ↦ P(e^a, e^b)` by complex-step differentiation.
    pub fn p_log_gradient(&self, a: f64, b: f64) -> (f64, f64) {
        let h = COMPLEX_STEP;
        let wb = Complex64::new(b, 0.0).exp();
        let za = Complex64::new(a, 0.0).exp();
        let da = self.char_poly(Complex64::new(a, h).exp(), wb).im / h;
        let db = self.char_poly(za, Complex64::new(b, h).exp()).im / h;
        (da, db)
    }

    /// Largest `|n1|` and `|n2|` over the terms.
    pub fn degrees(&self) -> (i64, i64) {
        self.terms.iter().fold((0, 0), |(d1, d2), t| {
            (d1.max(t.n1.abs()), d2.max(t.n2.abs()))
        })
    }

    /// Coefficients of `w^D P(z, w)` in increasing powers of `w`, with `D`
    /// a bound on the negative degree.
    pub fn w_coefficients(&self, z: Complex64) -> Vec<Complex64> {
        let d = self.size() as i64 * self.degrees().1;
        let len = (2 * d + 1) as usize;
        let nodes: Vec<Complex64> = (0..len)
            .map(|j| Complex64::from_polar(1.0, 2.0 * PI * j as f64 / len as f64))
            .collect();
        let values: Vec<Complex64> = nodes
            .iter()
            .map(|&w| self.char_poly(z, w) * monomial(w, d))
            .collect();
        (0..len)
            .map(|l| {
                values
                    .iter()
                    .zip(&nodes)
                    .map(|(v, w)| v * monomial(*w, -(l as i64)))
                    .sum::<Complex64>()
                    / len as f64
            })
            .collect()
    }

    /// `G(x, y)` by Fourier inversion for `x = rep_r + m·T`,
    /// `y = rep_s + n·T`, with the double trapezoid rule on the unit torus.
    pub fn green(&self, x: (usize, i64, i64), y: (usize, i64, i64)) -> Result<GreenEvaluation> {
        Ok(self.green_many(x, &[y])?.remove(0))
    }

    /// `G(x, y)` for every `y` in `ys`, sharing one symbol grid per
    /// refinement level. The grid doubles from 16 nodes per axis until
    /// every value is stable to [`FOURIER_TOL`].
    pub fn green_many(&self, x: (usize, i64, i64), ys: &[(usize, i64, i64)]) -> Result<Vec<GreenEvaluation>> {
        let (r, m1, m2) = x;
        if r >= self.size() || ys.iter().any(|y| y.0 >= self.size()) {
            return Err(Error::InvalidInput("representative index out of range".into()));
        }
        if self.mass2.iter().all(|&m| m == 0.0) {
            return Err(Error::InvalidInput(
                "Fourier inversion needs k > 0".into(),
            ));
        }
        let offsets: Vec<(i64, i64)> = ys.iter().map(|&(_, n1, n2)| (m1 - n1, m2 - n2)).collect();
        let mut n = 16usize;
        let mut prev = self.fourier_sums(r, ys, &offsets, n)?;
        loop {
            n *= 2;
            let cur = self.fourier_sums(r, ys, &offsets, n)?;
            let converged = cur
                .iter()
                .zip(&prev)
                .all(|(c, p)| (c - p).abs() <= FOURIER_TOL * c.abs());
            if converged && n >= 64 {
                return Ok(cur
                    .iter()
                    .zip(&prev)
                    .map(|(&c, &p)| GreenEvaluation {
                        value: c,
                        method: Method::Fourier,
                        nodes: n * n,
                        error_estimate: (c - p).abs(),
                        imag_residue: 0.0,
                        perturbed: false,
                    })
                    .collect());
            }
            if n >= FOURIER_MAX_NODES {
                return Err(Error::Quadrature(format!(
                    "Fourier inversion did not converge with {n}² nodes; P has a zero near the unit torus"
                )));
            }
            prev = cur;
        }
    }

    /// Trapezoid sums on an `n × n` grid of the unit torus, separably over
    /// the two angles.
    fn fourier_sums(
        &self,
        r: usize,
        ys: &[(usize, i64, i64)],
        offsets: &[(i64, i64)],
        n: usize,
    ) -> Result<Vec<f64>> {
        let h = 2.0 * PI / n as f64;
        let roots: Vec<Complex64> = (0..n).map(|k| Complex64::from_polar(1.0, h * k as f64)).collect();
        let root = |k: usize, d: i64| roots[(k as i64 * d).rem_euclid(n as i64) as usize];
        let mut cols: Vec<usize> = ys.iter().map(|y| y.0).collect();
        cols.sort_unstable();
        cols.dedup();
        let mut d1s: Vec<i64> = offsets.iter().map(|o| o.0).collect();
        d1s.sort_unstable();
        d1s.dedup();
        // entries[j][i][c]: the (r, cols[c]) entry of Δ(z_i, w_j)^{-1}
        let entries: Result<Vec<Vec<Vec<Complex64>>>> = (0..n)
            .into_par_iter()
            .map(|j| {
                (0..n)
                    .map(|i| self.inverse_entries(roots[i], roots[j], r, &cols))
                    .collect()
            })
            .collect();
        let entries = entries?;
        // partial[j][c][d]: Σ_i entry · e^{i a_i d1}
        let partial: Vec<Vec<Vec<Complex64>>> = entries
            .par_iter()
            .map(|row| {
                (0..cols.len())
                    .map(|c| {
                        d1s.iter()
                            .map(|&d1| {
                                row.iter()
                                    .enumerate()
                                    .map(|(i, e)| e[c] * root(i, d1))
                                    .sum()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Ok(ys
            .iter()
            .zip(offsets)
            .map(|(y, &(d1, d2))| {
                let c = cols.binary_search(&y.0).expect("column listed");
                let d = d1s.binary_search(&d1).expect("offset listed");
                let total: Complex64 = partial
                    .iter()
                    .enumerate()
                    .map(|(j, p)| p[c][d] * root(j, d2))
                    .sum();
                total.re / (n * n) as f64
            })
            .collect())
    }

    fn inverse_entries(&self, z: Complex64, w: Complex64, r: usize, cols: &[usize]) -> Result<Vec<Complex64>> {
        if self.size() == 1 {
            return Ok(vec![1.0 / self.char_poly(z, w)]);
        }
        let lu = self.matrix(z, w).lu();
        cols.iter()
            .map(|&s| {
                let mut rhs = DVector::from_element(self.size(), Complex64::new(0.0, 0.0));
                rhs[s] = Complex64::new(1.0, 0.0);
                lu.solve(&rhs)
                    .map(|sol| sol[r])
                    .ok_or_else(|| Error::Quadrature("singular symbol on the unit torus".into()))
            })
            .collect()
    }

    /// `G(x, y)` for two primal lifts.
    pub fn green_lifts(&self, x: &[i32], y: &[i32]) -> Result<GreenEvaluation> {
        self.green(self.locate(x)?, self.locate(y)?)
    }
}

/// Dirichlet Green function of a planar ball on the infinite periodic
/// graph, assembled from the symbol's stencil without building a window.
#[derive(Debug, Clone)]
pub struct BallGreen {
    /// Sites `(rep, n1, n2)` inside the ball.
    pub sites: Vec<(usize, i64, i64)>,
    pub values: Vec<f64>,
    pub solver: Solver,
    index: HashMap<(usize, i64, i64), usize>,
}

impl BallGreen {
    /// Value at a site; zero outside the ball.
    pub fn value(&self, site: (usize, i64, i64)) -> f64 {
        self.index.get(&site).map_or(0.0, |&i| self.values[i])
    }
}

impl FourierSymbol {
    /// Planar position of `rep_r + n1 T1 + n2 T2`.
    pub fn site_position(&self, site: (usize, i64, i64)) -> Complex64 {
        let p = &self.periodicity;
        planar(&p.reps[site.0], &self.angles)
            + planar(&p.t1, &self.angles) * site.1 as f64
            + planar(&p.t2, &self.angles) * site.2 as f64
    }

    /// Lattice coordinates of a primal lift.
    pub fn locate(&self, p: &[i32]) -> Result<(usize, i64, i64)> {
        self.periodicity
            .decompose(p, &self.angles)
            .ok_or_else(|| Error::NotPeriodic(format!("{p:?} is not a primal lattice point")))
    }

    /// Dirichlet Green function of the ball of `radius` around `source`.
    pub fn ball_green(&self, source: (usize, i64, i64), radius: f64) -> Result<BallGreen> {
        if source.0 >= self.size() || !(radius > 0.0) {
            return Err(Error::InvalidInput("bad source or radius for the ball".into()));
        }
        let center = self.site_position(source);
        let a = planar(&self.periodicity.t1, &self.angles);
        let b = planar(&self.periodicity.t2, &self.angles);
        let det = (a.conj() * b).im.abs();
        let reach = radius
            + (0..self.size())
                .map(|r| self.site_position((r, 0, 0)).norm())
                .fold(0.0, f64::max);
        let m1 = (reach * b.norm() / det).ceil() as i64 + 1;
        let m2 = (reach * a.norm() / det).ceil() as i64 + 1;
        let mut sites = Vec::new();
        for r in 0..self.size() {
            for n1 in source.1 - m1..=source.1 + m1 {
                for n2 in source.2 - m2..=source.2 + m2 {
                    if (self.site_position((r, n1, n2)) - center).norm() <= radius {
                        sites.push((r, n1, n2));
                    }
                }
            }
        }
        // row-major planar order keeps a direct factor banded
        sites.sort_by(|&p, &q| {
            let (zp, zq) = (self.site_position(p), self.site_position(q));
            zp.im.total_cmp(&zq.im).then(zp.re.total_cmp(&zq.re))
        });
        let index: HashMap<(usize, i64, i64), usize> =
            sites.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        let mut by_row: Vec<Vec<&SymbolTerm>> = vec![Vec::new(); self.size()];
        for t in &self.terms {
            by_row[t.row].push(t);
        }
        let diag: Vec<f64> = sites.iter().map(|s| self.diagonal[s.0]).collect();
        let off: Vec<Vec<(usize, f64)>> = sites
            .iter()
            .map(|&(r, n1, n2)| {
                by_row[r]
                    .iter()
                    .filter_map(|t| index.get(&(t.col, n1 + t.n1, n2 + t.n2)).map(|&j| (j, t.rho)))
                    .collect()
            })
            .collect();
        let src = *index
            .get(&source)
            .ok_or_else(|| Error::InvalidInput("source outside its own ball".into()))?;
        let (values, solver) = solve_unit_source(&diag, &off, src, None)?;
        Ok(BallGreen {
            sites,
            values,
            solver,
            index,
        })
    }
}

fn monomial(z: Complex64, n: i64) -> Complex64 {
    z.powi(n as i32)
}

/// Roots of `Σ c_l x^l` by simultaneous Weierstrass iteration. Leading and
/// trailing coefficients below `tol` relative to the largest are dropped;
/// a dropped trailing coefficient is a root at zero and is not returned.
pub fn polynomial_roots(coeffs: &[Complex64], tol: f64) -> Result<Vec<Complex64>> {
    let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(Error::RootFinding("zero polynomial".into()));
    }
    let lo = coeffs
        .iter()
        .position(|c| c.norm() > tol * scale)
        .unwrap_or(0);
    let hi = coeffs
        .iter()
        .rposition(|c| c.norm() > tol * scale)
        .unwrap_or(0);
    let c = &coeffs[lo..=hi];
    let deg = c.len() - 1;
    if deg == 0 {
        return Ok(Vec::new());
    }
    let lead = c[deg];
    let monic: Vec<Complex64> = c.iter().map(|x| x / lead).collect();
    let radius = 1.0 + monic[..deg].iter().map(|x| x.norm()).fold(0.0, f64::max);
    let mut roots: Vec<Complex64> = (0..deg)
        .map(|j| Complex64::from_polar(radius, 0.4 + 2.0 * PI * j as f64 / deg as f64))
        .collect();
    let eval = |x: Complex64| monic.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &a| acc * x + a);
    for _ in 0..500 {
        let mut change = 0.0f64;
        for i in 0..deg {
            let mut den = Complex64::new(1.0, 0.0);
            for j in 0..deg {
                if i != j {
                    den *= roots[i] - roots[j];
                }
            }
            let step = eval(roots[i]) / den;
            roots[i] -= step;
            change = change.max(step.norm() / (1.0 + roots[i].norm()));
        }
        if change < 1e-15 {
            return Ok(roots);
        }
    }
    Err(Error::RootFinding("Weierstrass iteration did not converge".into()))
}

/// Boundary of the bounded complement component of the amoeba that
/// contains the origin, sampled at equally spaced polar angles.
#[derive(Debug, Clone, PartialEq)]
pub struct Oval {
    pub angles: Vec<f64>,
    pub points: Vec<(f64, f64)>,
}

impl Oval {
    /// All cross products of consecutive boundary edges share one sign.
    pub fn is_convex(&self) -> bool {
        let n = self.points.len();
        let crosses: Vec<f64> = (0..n)
            .map(|i| {
                let (p, q, r) = (self.points[i], self.points[(i + 1) % n], self.points[(i + 2) % n]);
                (q.0 - p.0) * (r.1 - q.1) - (q.1 - p.1) * (r.0 - q.0)
            })
            .collect();
        crosses.iter().all(|&c| c > 0.0) || crosses.iter().all(|&c| c < 0.0)
    }

    pub fn diameter(&self) -> f64 {
        let mut best = 0.0f64;
        for (i, p) in self.points.iter().enumerate() {
            for q in &self.points[i + 1..] {
                best = best.max((p.0 - q.0).hypot(p.1 - q.1));
            }
        }
        best
    }

    pub fn max_radius(&self) -> f64 {
        self.points.iter().map(|p| p.0.hypot(p.1)).fold(0.0, f64::max)
    }
}

/// Distance from the origin to the oval along the ray of polar angle `psi`.
pub fn oval_radius(symbol: &FourierSymbol, psi: f64) -> Result<f64> {
    let (c, s) = (psi.cos(), psi.sin());
    let p = |r: f64| symbol.p_log(r * c, r * s);
    if p(0.0) <= 0.0 {
        return Err(Error::RootFinding("P(1, 1) is not positive; the oval is empty".into()));
    }
    let mut lo = 0.0;
    let mut hi = 1e-4;
    while p(hi) > 0.0 {
        lo = hi;
        hi *= RAY_SCAN_RATIO;
        if hi > 1e3 {
            return Err(Error::RootFinding(format!("no oval boundary along angle {psi}")));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if p(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn oval(symbol: &FourierSymbol, samples: usize) -> Result<Oval> {
    let angles: Vec<f64> = (0..samples)
        .map(|i| -PI + 2.0 * PI * i as f64 / samples as f64)
        .collect();
    let points: Result<Vec<(f64, f64)>> = angles
        .par_iter()
        .map(|&psi| oval_radius(symbol, psi).map(|r| (r * psi.cos(), r * psi.sin())))
        .collect();
    Ok(Oval {
        angles,
        points: points?,
    })
}

/// `ξ(v) = (log e_{x,x+T1}, log e_{x,x+T2})` at `2iK' + v`.
pub fn xi(ev: &ExponentialEvaluator, v: f64) -> Result<(f64, f64)> {
    let per = ev
        .graph()
        .periodicity()
        .ok_or_else(|| Error::NotPeriodic("graph has no declared fundamental domain".into()))?;
    let w1: Vec<f64> = per.t1.iter().map(|&n| n as f64).collect();
    let w2: Vec<f64> = per.t2.iter().map(|&n| n as f64).collect();
    Ok((ev.tau(&w1, v), ev.tau(&w2, v)))
}

/// Points of the amoeba, the oval found by ray bisection, and the oval
/// found through `ξ`.
#[derive(Debug, Clone)]
pub struct AmoebaSample {
    pub points: Vec<(f64, f64)>,
    pub oval: Oval,
    pub xi_samples: Vec<(f64, f64)>,
}

impl AmoebaSample {
    /// Largest radial gap between a `ξ` sample and the ray-bisected oval.
    pub fn xi_deviation(&self, symbol: &FourierSymbol) -> Result<f64> {
        let gaps: Result<Vec<f64>> = self
            .xi_samples
            .par_iter()
            .map(|&(a, b)| Ok((oval_radius(symbol, b.atan2(a))? - a.hypot(b)).abs()))
            .collect();
        Ok(gaps?.into_iter().fold(0.0, f64::max))
    }
}

/// Sample the amoeba on a `resolution × resolution` grid of `(log|z|,
/// arg z)` and the oval at `resolution` polar angles.
pub fn amoeba_sample(
    symbol: &FourierSymbol,
    ev: &ExponentialEvaluator,
    resolution: usize,
) -> Result<AmoebaSample> {
    if resolution < 8 {
        return Err(Error::InvalidInput("amoeba resolution must be at least 8".into()));
    }
    let oval = oval(symbol, resolution)?;
    let extent = 2.0 * oval.max_radius() + 1.0;
    let rows: Result<Vec<Vec<(f64, f64)>>> = (0..resolution)
        .into_par_iter()
        .map(|i| {
            let a = -extent + 2.0 * extent * i as f64 / (resolution - 1) as f64;
            let mut out = Vec::new();
            for j in 0..resolution {
                let phi = 2.0 * PI * j as f64 / resolution as f64;
                let z = Complex64::from_polar(a.exp(), phi);
                for w in polynomial_roots(&symbol.w_coefficients(z), 1e-13)? {
                    out.push((a, w.norm().ln()));
                }
            }
            Ok(out)
        })
        .collect();
    let points: Vec<(f64, f64)> = rows?.into_iter().flatten().collect();
    let inside = points
        .iter()
        .filter(|&&(a, b)| {
            let psi = b.atan2(a);
            let idx = oval
                .angles
                .iter()
                .position(|&t| t >= psi)
                .unwrap_or(0);
            let (x, y) = oval.points[idx];
            a.hypot(b) < 0.9 * x.hypot(y)
        })
        .count();
    if inside > 0 {
        return Err(Error::RootFinding(format!(
            "{inside} amoeba points fall inside the oval; resolution too coarse"
        )));
    }
    let period = 4.0 * ev.context().big_k();
    let xi_samples: Result<Vec<(f64, f64)>> = (0..resolution)
        .map(|i| xi(ev, period * i as f64 / resolution as f64))
        .collect();
    Ok(AmoebaSample {
        points,
        oval,
        xi_samples: xi_samples?,
    })
}

fn wrap(x: f64) -> f64 {
    let r = x.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Point of the oval maximizing `r̂·s`, with `r̂` in the coordinates of the
/// translation basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArgmaxPoint {
    pub zeta: (f64, f64),
    /// Polar angle of `zeta`.
    pub psi: f64,
    /// Angle between the outward normal at `zeta` and `r̂`.
    pub normal_residual: f64,
}

fn normal_angle(symbol: &FourierSymbol, psi: f64) -> Result<(f64, (f64, f64))> {
    let r = oval_radius(symbol, psi)?;
    let (a, b) = (r * psi.cos(), r * psi.sin());
    let (ga, gb) = symbol.p_log_gradient(a, b);
    Ok(((-gb).atan2(-ga), (a, b)))
}

pub fn direction_to_zeta(symbol: &FourierSymbol, rhat: (f64, f64)) -> Result<ArgmaxPoint> {
    let target = rhat.1.atan2(rhat.0);
    if rhat.0 == 0.0 && rhat.1 == 0.0 {
        return Err(Error::InvalidInput("zero direction".into()));
    }
    let defect = |psi: f64| -> Result<(f64, (f64, f64))> {
        let (n, p) = normal_angle(symbol, psi)?;
        Ok((wrap(n - target), p))
    };
    let mut lo = target - 0.5 * PI;
    let mut hi = target + 0.5 * PI;
    let (d_lo, _) = defect(lo)?;
    let (d_hi, _) = defect(hi)?;
    if d_lo >= 0.0 || d_hi <= 0.0 {
        return Err(Error::RootFinding(
            "normal angle does not bracket the direction; the oval is not strictly convex".into(),
        ));
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if defect(mid)?.0 < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let psi = 0.5 * (lo + hi);
    let (res, zeta) = defect(psi)?;
    Ok(ArgmaxPoint {
        zeta,
        psi: wrap(psi),
        normal_residual: res.abs(),
    })
}

/// `v ∈ [0, 4K)` with `ξ(v)` in the polar direction `psi`.
pub fn xi_inverse(ev: &ExponentialEvaluator, psi: f64) -> Result<f64> {
    let period = 4.0 * ev.context().big_k();
    let defect = |v: f64| -> Result<f64> {
        let (a, b) = xi(ev, v)?;
        Ok(wrap(b.atan2(a) - psi))
    };
    let samples = 256;
    let grid: Vec<f64> = (0..=samples)
        .map(|i| period * i as f64 / samples as f64)
        .collect();
    let values: Result<Vec<f64>> = grid.iter().map(|&v| defect(v)).collect();
    let values = values?;
    for i in 0..samples {
        let (d0, d1) = (values[i], values[i + 1]);
        if d0 == 0.0 {
            return Ok(grid[i]);
        }
        if d0.signum() != d1.signum() && (d1 - d0).abs() < PI {
            let (mut lo, mut hi) = (grid[i], grid[i + 1]);
            let rising = d1 > d0;
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if (defect(mid)? < 0.0) == rising {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Ok((0.5 * (lo + hi)).rem_euclid(period));
        }
    }
    Err(Error::RootFinding(format!("ξ never reaches polar angle {psi}")))
}

/// `ξ⁻¹ ∘ argmax`: the real part of the boundary point for `r̂`.
pub fn u0_from_direction(
    symbol: &FourierSymbol,
    ev: &ExponentialEvaluator,
    rhat: (f64, f64),
) -> Result<f64> {
    let zeta = direction_to_zeta(symbol, rhat)?;
    xi_inverse(ev, zeta.psi)
}

/// `(z, w)` on the zero set of the square-lattice polynomial for half-angle
/// `theta` in elliptic units.
pub fn uniformize_square(u: Complex64, theta: f64, ctx: &EllipticContext) -> Result<(Complex64, Complex64)> {
    let a = ctx.sc(0.5 * (u + theta))?;
    let b = ctx.sc(0.5 * (u - theta))?;
    if b.norm() == 0.0 || a.norm() == 0.0 {
        return Err(Error::Pole {
            function: "uniformization",
            re: u.re,
            im: u.im,
        });
    }
    Ok((-ctx.k_prime() * a * b, b / a))
}

/// `P(z, w) = m + 2(c1 + c2) − c1(z + 1/z) − c2(w + 1/w)`.
pub fn square_char_poly(z: Complex64, w: Complex64, c1: f64, c2: f64, mass2: f64) -> Complex64 {
    mass2 + 2.0 * (c1 + c2) - c1 * (z + 1.0 / z) - c2 * (w + 1.0 / w)
}

/// The two expressions for the killing parameter of the square-lattice
/// walk with horizontal step probability `q1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquareBridge {
    pub q1: f64,
    pub k: f64,
    /// Half-angle of the horizontal edges in elliptic units.
    pub theta: f64,
    pub c1: f64,
    pub c2: f64,
    pub mass2: f64,
    /// `1 + m/(2c1 + 2c2)`.
    pub t_mass: f64,
    /// `√(1 + 2q1(1 − 2q1)(k' − 2 + 1/k'))`.
    pub t_closed: f64,
}

impl SquareBridge {
    /// `φ(a, b) = (c1 cosh a + c2 cosh b)/(c1 + c2)`.
    pub fn phi(&self, a: f64, b: f64) -> f64 {
        (self.c1 * a.cosh() + self.c2 * b.cosh()) / (self.c1 + self.c2)
    }
}

fn check_q1(q1: f64) -> Result<()> {
    if q1 > 0.0 && q1 < 0.5 {
        Ok(())
    } else {
        Err(Error::ArgumentOutOfRange {
            value: q1,
            range: "(0, 1/2)",
        })
    }
}

fn sc_from_q1(q1: f64, k_prime: f64) -> f64 {
    (2.0 * q1 / ((1.0 - 2.0 * q1) * k_prime)).sqrt()
}

fn theta_from_sc(sc: f64, ctx: &EllipticContext) -> Result<f64> {
    ctx.big_f(sc / (1.0 + sc * sc).sqrt())
}

pub fn ney_spitzer_bridge(q1: f64, k: f64) -> Result<SquareBridge> {
    check_q1(q1)?;
    let ctx = EllipticContext::new(k)?;
    let kp = ctx.k_prime();
    let theta = theta_from_sc(sc_from_q1(q1, kp), &ctx)?;
    let c1 = ctx.sc_real(theta)?;
    let c2 = ctx.sc_real(ctx.big_k() - theta)?;
    let mass2 = if k == 0.0 {
        0.0
    } else {
        2.0 * (ctx.a_func(theta)? + ctx.a_func(ctx.big_k() - theta)?) - 2.0 * (c1 + c2)
    };
    let t_mass = 1.0 + mass2 / (2.0 * (c1 + c2));
    let t_closed = (1.0 + 2.0 * q1 * (1.0 - 2.0 * q1) * (kp - 2.0 + 1.0 / kp)).sqrt();
    Ok(SquareBridge {
        q1,
        k,
        theta,
        c1,
        c2,
        mass2,
        t_mass,
        t_closed,
    })
}

/// Point of the level set `φ = t` whose gradient is parallel to `r̂`.
pub fn gradient_map_zeta(bridge: &SquareBridge, t: f64, rhat: (f64, f64)) -> Result<(f64, f64)> {
    if t <= 1.0 {
        return Err(Error::InvalidInput("the level set φ = t is a point for t ≤ 1".into()));
    }
    let norm = rhat.0.hypot(rhat.1);
    if norm == 0.0 {
        return Err(Error::InvalidInput("zero direction".into()));
    }
    let (rx, ry) = (rhat.0 / norm, rhat.1 / norm);
    let (mut lo, mut hi) = (0.0, 1.0);
    while bridge.phi(hi * rx, hi * ry) < t {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if bridge.phi(mid * rx, mid * ry) < t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (mut a, mut b) = (lo * rx, lo * ry);
    let s = bridge.c1 + bridge.c2;
    let (p, q) = (bridge.c1 / s, bridge.c2 / s);
    for _ in 0..100 {
        let f1 = bridge.phi(a, b) - t;
        let f2 = p * a.sinh() * ry - q * b.sinh() * rx;
        let (j11, j12) = (p * a.sinh(), q * b.sinh());
        let (j21, j22) = (p * a.cosh() * ry, -q * b.cosh() * rx);
        let det = j11 * j22 - j12 * j21;
        let da = (f1 * j22 - f2 * j12) / det;
        let db = (j11 * f2 - j21 * f1) / det;
        a -= da;
        b -= db;
        if da.abs().max(db.abs()) < 1e-15 * (1.0 + a.abs().max(b.abs())) {
            return Ok((a, b));
        }
    }
    Err(Error::RootFinding("gradient map did not converge".into()))
}

/// Solution of the square-lattice inversion problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquareInversion {
    pub k: f64,
    pub k_prime: f64,
    pub theta: f64,
    /// The displayed closed-form expression for the modulus, for comparison.
    pub closed_form_modulus: f64,
    /// `F(√(2q1/(k' + 2q1(1 − k'))), k)`.
    pub closed_form_theta: f64,
}

/// The displayed closed-form expression for the modulus.
pub fn closed_form_modulus(q1: f64, t: f64) -> f64 {
    let root = ((t - 1.0) * (t + 1.0) * (t + 1.0 - 4.0 * q1) * (t - 1.0 + 4.0 * q1)).sqrt();
    (t * t - 8.0 * q1 * q1 + 4.0 * q1 - 1.0 - root) / (4.0 * q1 * (1.0 - 2.0 * q1))
}

/// `(k, θ)` such that the square lattice with horizontal half-angle `θ`
/// at modulus `k` has step probability `q1` and killing parameter `t`.
pub fn invert_square_params(q1: f64, t: f64) -> Result<SquareInversion> {
    check_q1(q1)?;
    if !(t >= 1.0) || !t.is_finite() {
        return Err(Error::ArgumentOutOfRange {
            value: t,
            range: "[1, ∞)",
        });
    }
    let c = 2.0 * q1 * (1.0 - 2.0 * q1);
    let target = (t - 1.0) * (t + 1.0);
    let g = |kp: f64| c * (1.0 - kp) * (1.0 - kp) / kp - target;
    let mut hi = 1.0;
    let mut lo = 0.5;
    while g(lo) <= 0.0 {
        hi = lo;
        lo *= 0.5;
        if lo < 1e-300 {
            return Err(Error::RootFinding("t too large to invert".into()));
        }
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let kp = if target == 0.0 { 1.0 } else { 0.5 * (lo + hi) };
    let k = ((1.0 - kp) * (1.0 + kp)).sqrt();
    let ctx = EllipticContext::new(k)?;
    let theta = theta_from_sc(sc_from_q1(q1, kp), &ctx)?;
    let closed_form_theta = ctx.big_f((2.0 * q1 / (kp + 2.0 * q1 * (1.0 - kp))).sqrt())?;
    Ok(SquareInversion {
        k,
        k_prime: kp,
        theta,
        closed_form_modulus: closed_form_modulus(q1, t),
        closed_form_theta,
    })
}

/// `k² s⁴ − 2k² s³ + 2s − 1` and its derivative in `s`.
pub fn triangular_s_quartic(k: f64, s: f64) -> (f64, f64) {
    s_quartic(k * k, (1.0 - k) * (1.0 + k), s)
}

/// `−27k'² t⁴ + 18k'² t² + 2(2 − k²)² t + 1 − k² + k⁴` and its derivative.
pub fn triangular_t_quartic(k: f64, t: f64) -> (f64, f64) {
    t_quartic(k * k, (1.0 - k) * (1.0 + k), t)
}

/// The `s` quartic in `q = k²` and `c = 1 − q`, written as
/// `(s − 1)³(s + 1) − c s³(s − 2)` to keep accuracy near the triple root at
/// `q = 1`.
fn s_quartic(_q: f64, c: f64, s: f64) -> (f64, f64) {
    let d = s - 1.0;
    (
        d.powi(3) * (s + 1.0) - c * s.powi(3) * (s - 2.0),
        3.0 * d * d * (s + 1.0) + d.powi(3) - c * (4.0 * s.powi(3) - 6.0 * s * s),
    )
}

fn t_quartic(q: f64, c: f64, t: f64) -> (f64, f64) {
    let b = 2.0 * (1.0 + c) * (1.0 + c);
    (
        -27.0 * c * t.powi(4) + 18.0 * c * t * t + b * t + c + q * q,
        -108.0 * c * t.powi(3) + 36.0 * c * t + b,
    )
}

/// Follow the root of `f(q, 1 − q, ·)` from `x0` at `q = 0` along
/// increasing `k`, finishing at `(q, c)` with `c = 1 − q` supplied exactly.
fn continue_root(f: impl Fn(f64, f64, f64) -> (f64, f64), x0: f64, q: f64, c: f64) -> Result<f64> {
    let newton = |q: f64, c: f64, mut x: f64| -> Result<f64> {
        let mut step = f64::INFINITY;
        for _ in 0..100 {
            let (v, d) = f(q, c, x);
            step = v / d;
            x -= step;
            if step.abs() <= 1e-15 * x.abs().max(1.0) {
                return Ok(x);
            }
        }
        // Near a multiple root the step stalls at the rounding floor.
        if step.abs() <= 1e-12 * x.abs().max(1.0) {
            return Ok(x);
        }
        Err(Error::RootFinding(format!("Newton failed at k² = {q}")))
    };
    let k = q.sqrt();
    let mut x = x0;
    let mut kk = 0.0;
    while kk < k {
        let next = (kk + (0.02f64).min((1.0 - kk) / 8.0)).min(k);
        x = newton(next * next, (1.0 - next) * (1.0 + next), x)?;
        kk = next;
    }
    newton(q, c, x)
}

fn check_square_modulus(q: f64, c: f64) -> Result<()> {
    if (0.0..1.0).contains(&q) && c > 0.0 && (q + c - 1.0).abs() <= 1e-14 {
        Ok(())
    } else {
        Err(Error::ModulusOutOfRange(q.sqrt()))
    }
}

/// Algebraic `s` at `k² = q` given `1 − q = c` exactly.
pub fn triangular_s_at(q: f64, c: f64) -> Result<f64> {
    check_square_modulus(q, c)?;
    continue_root(s_quartic, 0.5, q, c)
}

/// Algebraic `t` at `k² = q` given `1 − q = c` exactly.
pub fn triangular_t_at(q: f64, c: f64) -> Result<f64> {
    check_square_modulus(q, c)?;
    continue_root(t_quartic, 1.0, q, c)
}

/// `s = sn(K/3)` and `t = A(K/3)/sc(K/3)` computed from elliptic functions
/// and from the quartics by continuation in `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangularRelations {
    pub k: f64,
    pub s_elliptic: f64,
    pub t_elliptic: f64,
    pub s_algebraic: f64,
    pub t_algebraic: f64,
    /// Quartic residuals at the elliptic values.
    pub s_residual: f64,
    pub t_residual: f64,
}

pub fn triangular_s_algebraic(k: f64) -> Result<f64> {
    EllipticContext::new(k)?;
    continue_root(s_quartic, 0.5, k * k, (1.0 - k) * (1.0 + k))
}

pub fn triangular_t_algebraic(k: f64) -> Result<f64> {
    EllipticContext::new(k)?;
    continue_root(t_quartic, 1.0, k * k, (1.0 - k) * (1.0 + k))
}

pub fn triangular_relations(k: f64) -> Result<TriangularRelations> {
    let ctx = EllipticContext::new(k)?;
    let third = ctx.big_k() / 3.0;
    let s_elliptic = ctx.jacobi_real(third).0;
    let t_elliptic = if k == 0.0 {
        1.0
    } else {
        ctx.a_func(third)? / ctx.sc_real(third)?
    };
    Ok(TriangularRelations {
        k,
        s_elliptic,
        t_elliptic,
        s_algebraic: triangular_s_algebraic(k)?,
        t_algebraic: triangular_t_algebraic(k)?,
        s_residual: triangular_s_quartic(k, s_elliptic).0.abs(),
        t_residual: triangular_t_quartic(k, t_elliptic).0.abs(),
    })
}

/// Least-squares slope of `log t` against `log(1 − k)` for
/// `1 − k = 10^{-j}`, `j ∈ exponents`.
pub fn triangular_blowup_slope(exponents: &[i32]) -> Result<f64> {
    let pts: Result<Vec<(f64, f64)>> = exponents
        .iter()
        .map(|&j| {
            let eps = 10f64.powi(-j);
            Ok((eps.ln(), triangular_t_algebraic(1.0 - eps)?.ln()))
        })
        .collect();
    let pts = pts?;
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Ok(sxy / sxx)
}

/// Lift `n1 T1 + n2 T2` as reals.
pub fn lift_direction(per: &Periodicity, n: (f64, f64)) -> Vec<f64> {
    per.t1
        .iter()
        .zip(&per.t2)
        .map(|(&a, &b)| n.0 * a as f64 + n.1 * b as f64)
        .collect()
}

/// The lift `rep_r + n1 T1 + n2 T2`.
pub fn lattice_lift(per: &Periodicity, r: usize, n1: i64, n2: i64) -> Lift {
    per.reps[r]
        .iter()
        .zip(per.t1.iter().zip(&per.t2))
        .map(|(&p, (&a, &b))| p + n1 as i32 * a + n2 as i32 * b)
        .collect()
}
