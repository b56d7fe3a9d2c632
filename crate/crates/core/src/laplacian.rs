//! The massive Laplacian with elliptic conductances `ρ = sc(θ|k)` and
//! squared masses `m²(x) = Σ (A(θ_j|k) − sc(θ_j|k))`, its killed random
//! walk, and a truncated Dirichlet solve used as a Green-function oracle.

use std::collections::HashMap;
use std::ops::{Add, Mul, Sub};

use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::na::DMatrix;
use nalgebra_sparse::{CooMatrix, CscMatrix};
use num_complex::Complex64;
use num_traits::Zero;
use rayon::prelude::*;

use crate::elliptic::EllipticContext;
use crate::error::{Error, Result};
use crate::graph::IsoradialGraph;

/// Conductance `sc(θ̄·2K/π | k)` of an edge with half-angle `θ̄`.
pub fn conductance(theta_bar: f64, ctx: &EllipticContext) -> Result<f64> {
    ctx.sc_real(theta_bar * ctx.angle_scale())
}

/// Contribution `A(θ) − sc(θ)` of one edge to the squared mass at either
/// endpoint; exactly zero when `k = 0`.
pub fn mass_term(theta_bar: f64, ctx: &EllipticContext) -> Result<f64> {
    if ctx.k() == 0.0 {
        return Ok(0.0);
    }
    let theta = theta_bar * ctx.angle_scale();
    Ok(ctx.a_func(theta)? - ctx.sc_real(theta)?)
}

/// Values the operator can act on.
pub trait Field:
    Copy + Zero + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
}

impl Field for f64 {}
impl Field for Complex64 {}

/// The massive Laplacian restricted to the primal vertices of a window.
#[derive(Debug, Clone)]
pub struct MassiveOperator {
    ctx: EllipticContext,
    /// Graph point index of each local vertex.
    vertices: Vec<usize>,
    local: HashMap<usize, usize>,
    /// `(local neighbor, conductance)` per local vertex.
    neighbors: Vec<Vec<(usize, f64)>>,
    mass2: Vec<f64>,
    interior: Vec<bool>,
    positions: Vec<Complex64>,
}

/// Transition and killing probabilities of the walk with `Δ = D(Id − P)`,
/// `D` the diagonal of `Δ`. This is one natural normalization; others differ
/// by a positive vertex weight.
#[derive(Debug, Clone)]
pub struct KilledWalkKernel {
    /// `(local neighbor, probability)` per local vertex.
    pub transitions: Vec<Vec<(usize, f64)>>,
    pub killing: Vec<f64>,
}

/// Dirichlet Green function of a finite ball.
#[derive(Debug, Clone)]
pub struct TruncatedGreen {
    /// Local index of the source.
    pub source: usize,
    /// Value at every local vertex; zero outside the ball.
    pub values: Vec<f64>,
    /// Local vertices inside the ball.
    pub support: Vec<usize>,
    pub solver: Solver,
}

/// Linear solver used for a truncated Green function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Cholesky,
    ConjugateGradient,
}

/// Largest system factored directly.
pub const CHOLESKY_LIMIT: usize = 40_000;
/// Relative residual at which conjugate gradients stop.
pub const CG_TOL: f64 = 1e-13;

/// Ball radius making the Dirichlet truncation error at separation `sep`
/// smaller than `tol` relative, for a decay rate `rate` per unit length.
/// The error decays like `exp(−rate·(2R − sep))`; a margin of `e^5`
/// covers polynomial prefactors.
pub fn dirichlet_radius(rate: f64, sep: f64, tol: f64) -> f64 {
    sep + (5.0 - tol.ln()) / (2.0 * rate)
}

/// Solve `(diag − off) f = δ_source`; `None` picks the solver by size.
pub(crate) fn solve_unit_source(
    diag: &[f64],
    off: &[Vec<(usize, f64)>],
    source: usize,
    solver: Option<Solver>,
) -> Result<(Vec<f64>, Solver)> {
    let solver = solver.unwrap_or(if diag.len() <= CHOLESKY_LIMIT {
        Solver::Cholesky
    } else {
        Solver::ConjugateGradient
    });
    let sol = match solver {
        Solver::Cholesky => cholesky_solve(diag, off, source)?,
        Solver::ConjugateGradient => cg_solve(diag, off, source)?,
    };
    Ok((sol, solver))
}

fn cholesky_solve(diag: &[f64], off: &[Vec<(usize, f64)>], source: usize) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut coo = CooMatrix::new(n, n);
    for i in 0..n {
        coo.push(i, i, diag[i]);
        for &(j, rho) in &off[i] {
            coo.push(i, j, -rho);
        }
    }
    let csc = CscMatrix::from(&coo);
    let chol = CscCholesky::factor(&csc)
        .map_err(|e| Error::Solver(format!("Cholesky factorization failed: {e:?}")))?;
    let mut rhs = DMatrix::zeros(n, 1);
    rhs[(source, 0)] = 1.0;
    let sol = chol.solve(&rhs);
    Ok((0..n).map(|i| sol[(i, 0)]).collect())
}

fn cg_solve(diag: &[f64], off: &[Vec<(usize, f64)>], source: usize) -> Result<Vec<f64>> {
    let n = diag.len();
    let matvec = |p: &[f64], out: &mut [f64]| {
        out.par_iter_mut().enumerate().for_each(|(i, o)| {
            let mut acc = diag[i] * p[i];
            for &(j, rho) in &off[i] {
                acc -= rho * p[j];
            }
            *o = acc;
        });
    };
    // Fixed chunking keeps the reduction order, and so the output bytes, stable.
    let dot = |a: &[f64], b: &[f64]| -> f64 {
        let partial: Vec<f64> = a
            .par_chunks(4096)
            .zip(b.par_chunks(4096))
            .map(|(ca, cb)| ca.iter().zip(cb).map(|(x, y)| x * y).sum::<f64>())
            .collect();
        partial.iter().sum()
    };
    let mut x = vec![0.0; n];
    let mut r = vec![0.0; n];
    r[source] = 1.0;
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(a, d)| a / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    for _ in 0..20 * n.max(100) {
        matvec(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        x.par_iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
        r.par_iter_mut().zip(&ap).for_each(|(ri, ai)| *ri -= alpha * ai);
        if dot(&r, &r).sqrt() <= CG_TOL {
            return Ok(x);
        }
        z.par_iter_mut()
            .zip(&r)
            .zip(diag)
            .for_each(|((zi, ri), d)| *zi = ri / d);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.par_iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    Err(Error::Solver("conjugate gradients did not converge".into()))
}

impl MassiveOperator {
    /// Assemble conductances and masses for every primal vertex. Masses at
    /// incomplete (boundary) vertices only include the edges present.
    pub fn assemble(graph: &IsoradialGraph, ctx: &EllipticContext) -> Result<Self> {
        let vertices = graph.primal_vertices();
        let local: HashMap<usize, usize> =
            vertices.iter().enumerate().map(|(l, &v)| (v, l)).collect();
        let mut cache: HashMap<u64, (f64, f64)> = HashMap::new();
        let mut per_angle = |theta_bar: f64| -> Result<(f64, f64)> {
            if let Some(&hit) = cache.get(&theta_bar.to_bits()) {
                return Ok(hit);
            }
            let val = (conductance(theta_bar, ctx)?, mass_term(theta_bar, ctx)?);
            cache.insert(theta_bar.to_bits(), val);
            Ok(val)
        };
        let mut neighbors = vec![Vec::new(); vertices.len()];
        let mut mass2 = vec![0.0; vertices.len()];
        for (l, &v) in vertices.iter().enumerate() {
            for &(w, e) in graph.neighbors(v) {
                let (rho, m) = per_angle(graph.edges()[e].theta_bar)?;
                neighbors[l].push((local[&w], rho));
                mass2[l] += m;
            }
        }
        let interior = vertices.iter().map(|&v| graph.is_complete(v)).collect();
        let positions = vertices.iter().map(|&v| graph.position(v)).collect();
        Ok(Self {
            ctx: *ctx,
            vertices,
            local,
            neighbors,
            mass2,
            interior,
            positions,
        })
    }

    pub fn context(&self) -> &EllipticContext {
        &self.ctx
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Local index of a graph point.
    pub fn local_index(&self, point: usize) -> Option<usize> {
        self.local.get(&point).copied()
    }

    /// Graph point index of a local vertex.
    pub fn point(&self, l: usize) -> usize {
        self.vertices[l]
    }

    pub fn neighbors(&self, l: usize) -> &[(usize, f64)] {
        &self.neighbors[l]
    }

    pub fn mass2(&self, l: usize) -> f64 {
        self.mass2[l]
    }

    pub fn is_interior(&self, l: usize) -> bool {
        self.interior[l]
    }

    pub fn interior_vertices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&l| self.interior[l]).collect()
    }

    /// `Δf` at every local vertex. Only values at interior vertices are
    /// those of the infinite-graph operator.
    pub fn apply<T: Field>(&self, f: &[T]) -> Result<Vec<T>> {
        if f.len() != self.len() {
            return Err(Error::InvalidInput(format!(
                "function has {} values, operator has {} vertices",
                f.len(),
                self.len()
            )));
        }
        Ok((0..self.len()).map(|l| self.apply_at(f, l)).collect())
    }

    /// `Δf(x)` at one local vertex.
    pub fn apply_at<T: Field>(&self, f: &[T], l: usize) -> T {
        let mut acc = f[l] * self.mass2[l];
        for &(w, rho) in &self.neighbors[l] {
            acc = acc + (f[l] - f[w]) * rho;
        }
        acc
    }

    /// Largest modulus among the terms summed in `Δf(x)`, the scale for
    /// relative harmonicity residuals.
    pub fn local_scale(&self, f: &[Complex64], l: usize) -> f64 {
        let mut s = (f[l] * self.mass2[l]).norm();
        for &(w, rho) in &self.neighbors[l] {
            s = s.max((f[l] * rho).norm()).max((f[w] * rho).norm());
        }
        s
    }

    pub fn kernel(&self) -> KilledWalkKernel {
        let mut transitions = Vec::with_capacity(self.len());
        let mut killing = Vec::with_capacity(self.len());
        for l in 0..self.len() {
            let total: f64 = self.mass2[l] + self.neighbors[l].iter().map(|n| n.1).sum::<f64>();
            transitions.push(
                self.neighbors[l]
                    .iter()
                    .map(|&(w, rho)| (w, rho / total))
                    .collect(),
            );
            killing.push(self.mass2[l] / total);
        }
        KilledWalkKernel {
            transitions,
            killing,
        }
    }

    /// Solve `Δ G = δ_x` on the interior vertices within Euclidean radius
    /// `radius` of `x`, with `G = 0` elsewhere. Small systems use a sparse
    /// Cholesky factorization, large ones preconditioned conjugate
    /// gradients.
    pub fn truncated_green(&self, x: usize, radius: f64) -> Result<TruncatedGreen> {
        if x >= self.len() {
            return Err(Error::InvalidInput(format!("no local vertex {x}")));
        }
        self.truncated_green_in(x, self.positions[x], radius)
    }

    /// Dirichlet Green function of the ball of `radius` around `center`,
    /// with source `x` inside it.
    pub fn truncated_green_in(&self, x: usize, center: Complex64, radius: f64) -> Result<TruncatedGreen> {
        self.truncated_green_using(x, center, radius, None)
    }

    /// As [`Self::truncated_green_in`] with an explicit solver; `None` picks
    /// by system size.
    pub fn truncated_green_using(
        &self,
        x: usize,
        center: Complex64,
        radius: f64,
        solver: Option<Solver>,
    ) -> Result<TruncatedGreen> {
        if x >= self.len() || !self.interior[x] || (self.positions[x] - center).norm() > radius {
            return Err(Error::InvalidInput(format!(
                "source {x} is not an interior vertex of the ball"
            )));
        }
        if (0..self.len()).any(|l| !self.interior[l] && (self.positions[l] - center).norm() <= radius) {
            return Err(Error::InvalidInput(format!(
                "ball of radius {radius} leaves the built window"
            )));
        }
        let mut support: Vec<usize> = (0..self.len())
            .filter(|&l| self.interior[l] && (self.positions[l] - center).norm() <= radius)
            .collect();
        // row-major planar order keeps the factor banded
        support.sort_by(|&a, &b| {
            let (pa, pb) = (self.positions[a], self.positions[b]);
            pa.im.total_cmp(&pb.im).then(pa.re.total_cmp(&pb.re))
        });
        let slot: HashMap<usize, usize> =
            support.iter().enumerate().map(|(i, &l)| (l, i)).collect();
        let n = support.len();
        let mut diag = vec![0.0; n];
        let mut off: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, &l) in support.iter().enumerate() {
            diag[i] = self.mass2[l];
            for &(w, rho) in &self.neighbors[l] {
                diag[i] += rho;
                if let Some(&j) = slot.get(&w) {
                    off[i].push((j, rho));
                }
            }
        }
        let (sol, solver) = solve_unit_source(&diag, &off, slot[&x], solver)?;
        let mut values = vec![0.0; self.len()];
        for (i, &l) in support.iter().enumerate() {
            values[l] = sol[i];
        }
        Ok(TruncatedGreen {
            source: x,
            values,
            support,
            solver,
        })
    }

    /// Value at a degree-3 vertex `x0` making `Δf(x0) = 0`, given `f` on
    /// its neighbors.
    pub fn harmonic_extension<T: Field>(&self, x0: usize, f: impl Fn(usize) -> T) -> Result<T> {
        if x0 >= self.len() || self.neighbors[x0].len() != 3 || !self.interior[x0] {
            return Err(Error::InvalidInput(format!(
                "local vertex {x0} is not a complete degree-3 vertex"
            )));
        }
        let mut num = T::zero();
        let mut den = self.mass2[x0];
        for &(w, rho) in &self.neighbors[x0] {
            num = num + f(w) * rho;
            den += rho;
        }
        if den <= 0.0 {
            return Err(Error::Solver("degenerate extension denominator".into()));
        }
        Ok(num * (1.0 / den))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_square, build_triangular};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn massless_degeneration() {
        let g = build_square(0.6, 3).unwrap();
        let ctx = EllipticContext::new(0.0).unwrap();
        let op = MassiveOperator::assemble(&g, &ctx).unwrap();
        let ones = vec![1.0; op.len()];
        let out = op.apply(&ones).unwrap();
        for l in op.interior_vertices() {
            assert_eq!(op.mass2(l), 0.0);
            assert!(out[l].abs() < 1e-14);
        }
    }

    #[test]
    fn square_self_dual_conductances() {
        let g = build_square(FRAC_PI_4, 2).unwrap();
        let ctx = EllipticContext::new(0.5).unwrap();
        let op = MassiveOperator::assemble(&g, &ctx).unwrap();
        let l = op.local_index(g.index_of(&[0, 0]).unwrap()).unwrap();
        for &(_, rho) in op.neighbors(l) {
            assert_relative_eq!(rho, 1.0 / ctx.k_prime().sqrt(), max_relative = 1e-13);
        }
        assert!(op.mass2(l) > 0.0);
        let ones = vec![1.0; op.len()];
        assert_relative_eq!(op.apply(&ones).unwrap()[l], op.mass2(l), max_relative = 1e-13);
    }

    #[test]
    fn triangular_equal_conductances() {
        let g = build_triangular(2).unwrap();
        let ctx = EllipticContext::new(0.7).unwrap();
        let op = MassiveOperator::assemble(&g, &ctx).unwrap();
        let expected = ctx.sc_real(ctx.big_k() / 3.0).unwrap();
        for l in op.interior_vertices() {
            assert_eq!(op.neighbors(l).len(), 6);
            for &(_, rho) in op.neighbors(l) {
                assert_relative_eq!(rho, expected, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn operator_is_symmetric() {
        let g = build_triangular(4).unwrap();
        let ctx = EllipticContext::new(0.4).unwrap();
        let op = MassiveOperator::assemble(&g, &ctx).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f: Vec<f64> = (0..op.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let h: Vec<f64> = (0..op.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let df = op.apply(&f).unwrap();
        let dh = op.apply(&h).unwrap();
        let a: f64 = df.iter().zip(&h).map(|(x, y)| x * y).sum();
        let b: f64 = f.iter().zip(&dh).map(|(x, y)| x * y).sum();
        assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
        for l in 0..op.len() {
            for &(w, rho) in op.neighbors(l) {
                let back = op.neighbors(w).iter().find(|n| n.0 == l).unwrap().1;
                assert_eq!(rho, back);
            }
        }
        let zero = op.apply(&vec![0.0; op.len()]).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
        assert!(op.apply(&[1.0]).is_err());
    }

    #[test]
    fn kernel_is_normalized() {
        let g = build_square(0.5, 3).unwrap();
        let ctx = EllipticContext::new(0.8).unwrap();
        let op = MassiveOperator::assemble(&g, &ctx).unwrap();
        let ker = op.kernel();
        for l in 0..op.len() {
            let s: f64 = ker.transitions[l].iter().map(|t| t.1).sum::<f64>() + ker.killing[l];
            assert!((s - 1.0).abs() < 1e-14);
            assert!(ker.transitions[l].iter().all(|t| (0.0..=1.0).contains(&t.1)));
            if op.is_interior(l) {
                assert!(ker.killing[l] > 0.0);
            }
        }
    }

    #[test]
    fn truncated_green_basic_properties() {
        let g = build_square(FRAC_PI_4, 12).unwrap();
        let ctx = EllipticContext::new(0.6).unwrap();
        let op = MassiveOperator::assemble(&g, &ctx).unwrap();
        let x = op.local_index(g.index_of(&[0, 0]).unwrap()).unwrap();
        let y = op.local_index(g.index_of(&[2, 4]).unwrap()).unwrap();
        let gx = op.truncated_green(x, 8.0).unwrap();
        assert!(gx.values[x] > 0.0);
        assert!(gx.support.iter().all(|&l| gx.values[l] > 0.0));
        let far = op.local_index(g.index_of(&[0, 20]).unwrap()).unwrap();
        assert_eq!(gx.values[far], 0.0);
        // Δ G = δ on the support
        for &l in &gx.support {
            let r = op.apply_at(&gx.values, l) - if l == x { 1.0 } else { 0.0 };
            assert!(r.abs() < 1e-12);
        }
        // symmetry needs a common domain
        let c = Complex64::new(0.5, 0.5);
        let ball = op.truncated_green_in(x, c, 10.0).unwrap();
        let ball_y = op.truncated_green_in(y, c, 10.0).unwrap();
        assert_relative_eq!(ball.values[y], ball_y.values[x], max_relative = 1e-12);
        assert!(op.truncated_green(x, 30.0).is_err());
    }

    #[test]
    fn solvers_agree() {
        let g = build_triangular(14).unwrap();
        let ctx = EllipticContext::new(0.3).unwrap();
        let op = MassiveOperator::assemble(&g, &ctx).unwrap();
        let x = op.local_index(g.index_of(&[0, 0, 0]).unwrap()).unwrap();
        let c = Complex64::new(0.0, 0.0);
        let a = op.truncated_green_using(x, c, 10.0, Some(Solver::Cholesky)).unwrap();
        let b = op
            .truncated_green_using(x, c, 10.0, Some(Solver::ConjugateGradient))
            .unwrap();
        assert_eq!(a.solver, Solver::Cholesky);
        for &l in &a.support {
            assert!((a.values[l] - b.values[l]).abs() <= 1e-11 * a.values[x]);
        }
    }

    #[test]
    fn truncated_green_converges_geometrically() {
        let g = build_square(FRAC_PI_4, 20).unwrap();
        let ctx = EllipticContext::new(0.8).unwrap();
        let op = MassiveOperator::assemble(&g, &ctx).unwrap();
        let x = op.local_index(g.index_of(&[0, 0]).unwrap()).unwrap();
        let y = op.local_index(g.index_of(&[0, 4]).unwrap()).unwrap();
        let vals: Vec<f64> = [6.0, 9.0, 12.0, 15.0, 18.0]
            .iter()
            .map(|&r| op.truncated_green(x, r).unwrap().values[y])
            .collect();
        let diffs: Vec<f64> = vals.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        for w in diffs.windows(2) {
            assert!(w[1] < 0.5 * w[0], "{diffs:?}");
        }
    }

    #[test]
    fn harmonic_extension_of_constants() {
        let g = build_triangular(4).unwrap().star_triangle_flip(&[1, 0, 0]).unwrap();
        let x0 = g.index_of(&[0, 1, -1]).unwrap();
        let massless = EllipticContext::new(0.0).unwrap();
        let op = MassiveOperator::assemble(&g, &massless).unwrap();
        let l0 = op.local_index(x0).unwrap();
        assert_relative_eq!(op.harmonic_extension(l0, |_| 2.5).unwrap(), 2.5, max_relative = 1e-14);
        let ctx = EllipticContext::new(0.5).unwrap();
        let op = MassiveOperator::assemble(&g, &ctx).unwrap();
        let v = op.harmonic_extension(l0, |_| 1.0).unwrap();
        let rho: f64 = op.neighbors(l0).iter().map(|n| n.1).sum();
        assert_relative_eq!(v, rho / (rho + op.mass2(l0)), max_relative = 1e-14);
        assert!(v < 1.0);
        assert!(op.harmonic_extension(0, |_| 1.0).is_err());
    }
}
