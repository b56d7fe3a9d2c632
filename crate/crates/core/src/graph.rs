//! Isoradial graphs represented through their diamond graph, lifted to a
//! monotone surface in `Z^d`.
//!
//! Every diamond vertex is stored as its lift `P ∈ Z^d`; its planar
//! position is `Σ P_j e^{iᾱ_j}`. Faces are unit squares of `Z^d` spanned by
//! two coordinate directions. Primal and dual vertices alternate and are
//! told apart by the parity of `Σ P_j`.

use std::collections::{HashMap, HashSet};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_6, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A vertex of the monotone surface.
pub type Lift = Vec<i32>;

/// Default margin keeping half-angles inside `(ε, π/2 − ε)`.
pub const DEFAULT_EPSILON: f64 = 0.05;

const ANGLE_TOL: f64 = 1e-9;

/// A rhombus: the unit square `base + {0, e_a, e_b, e_a + e_b}` with `a < b`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Face {
    pub base: Lift,
    pub a: usize,
    pub b: usize,
}

impl Face {
    pub fn corners(&self) -> [Lift; 4] {
        let mut pa = self.base.clone();
        pa[self.a] += 1;
        let mut pb = self.base.clone();
        pb[self.b] += 1;
        let mut pab = pa.clone();
        pab[self.b] += 1;
        [self.base.clone(), pa, pab, pb]
    }
}

/// A primal edge with the geometry of its rhombus.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    /// Point indices of the two primal endpoints.
    pub x: usize,
    pub y: usize,
    /// Rhombus half-angle at the primal endpoints.
    pub theta_bar: f64,
    /// Angles of the two rhombus sides leaving `x`, with
    /// `(beta_bar − alpha_bar)/2 = theta_bar`.
    pub alpha_bar: f64,
    pub beta_bar: f64,
    pub face: usize,
}

/// Translation symmetry of a periodic builder.
#[derive(Debug, Clone, PartialEq)]
pub struct Periodicity {
    pub t1: Lift,
    pub t2: Lift,
    /// Primal representatives of the fundamental domain.
    pub reps: Vec<Lift>,
}

impl Periodicity {
    /// Write a lift as `reps[r] + n1 t1 + n2 t2`.
    pub fn decompose(&self, p: &[i32], angles: &[f64]) -> Option<(usize, i64, i64)> {
        let z1 = planar(&self.t1, angles);
        let z2 = planar(&self.t2, angles);
        let det = z1.re * z2.im - z1.im * z2.re;
        for (r, rep) in self.reps.iter().enumerate() {
            let diff: Vec<i32> = p.iter().zip(rep).map(|(a, b)| a - b).collect();
            let z = planar(&diff, angles);
            let n1 = ((z.re * z2.im - z.im * z2.re) / det).round() as i64;
            let n2 = ((z1.re * z.im - z1.im * z.re) / det).round() as i64;
            let ok = diff.iter().enumerate().all(|(j, &d)| {
                d as i64 == n1 * self.t1[j] as i64 + n2 * self.t2[j] as i64
            });
            if ok {
                return Some((r, n1, n2));
            }
        }
        None
    }

    /// Lift-space direction `a t1 + b t2` whose embedding is `e^{iφ}`.
    pub fn flat_direction(&self, phi: f64, angles: &[f64]) -> Vec<f64> {
        let z1 = planar(&self.t1, angles);
        let z2 = planar(&self.t2, angles);
        let det = z1.re * z2.im - z1.im * z2.re;
        let (c, s) = (phi.cos(), phi.sin());
        let a = (c * z2.im - s * z2.re) / det;
        let b = (z1.re * s - z1.im * c) / det;
        self.t1
            .iter()
            .zip(&self.t2)
            .map(|(&u, &v)| a * u as f64 + b * v as f64)
            .collect()
    }
}

/// Reduced coordinates `n_j = N_j / N` of a displacement in `Z^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction {
    n: Vec<f64>,
}

impl Direction {
    /// Normalize an integer lift difference. Fails on the zero vector.
    pub fn from_difference(d: &[i32]) -> Result<Self> {
        let v: Vec<f64> = d.iter().map(|&x| x as f64).collect();
        Self::from_vector(&v)
    }

    /// Normalize a real vector to unit L¹ norm.
    pub fn from_vector(v: &[f64]) -> Result<Self> {
        let norm: f64 = v.iter().map(|x| x.abs()).sum();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::CoincidentVertices);
        }
        Ok(Self {
            n: v.iter().map(|x| x / norm).collect(),
        })
    }

    pub fn components(&self) -> &[f64] {
        &self.n
    }

    pub fn positive_part(&self) -> Vec<f64> {
        self.n.iter().map(|x| x.max(0.0)).collect()
    }

    pub fn negative_part(&self) -> Vec<f64> {
        self.n.iter().map(|x| (-x).max(0.0)).collect()
    }

    pub fn negated(&self) -> Self {
        Self {
            n: self.n.iter().map(|x| -x).collect(),
        }
    }

    pub fn l1_norm(&self) -> f64 {
        self.n.iter().map(|x| x.abs()).sum()
    }

    /// Largest componentwise distance to another direction.
    pub fn distance(&self, other: &Direction) -> f64 {
        self.n
            .iter()
            .zip(&other.n)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// One step of a diamond path: `sign · e_coord`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Step {
    pub coord: usize,
    pub sign: i32,
}

impl Step {
    /// Angle of the step vector; negative steps add `π`.
    pub fn angle(&self, angles: &[f64]) -> f64 {
        if self.sign > 0 {
            angles[self.coord]
        } else {
            angles[self.coord] + PI
        }
    }
}

/// Planar embedding of a lift vector.
pub fn planar(p: &[i32], angles: &[f64]) -> Complex64 {
    p.iter()
        .zip(angles)
        .map(|(&c, &a)| Complex64::from_polar(c as f64, a))
        .sum()
}

/// Planar embedding of a real lift-space vector.
pub fn planar_real(p: &[f64], angles: &[f64]) -> Complex64 {
    p.iter()
        .zip(angles)
        .map(|(&c, &a)| Complex64::from_polar(c, a))
        .sum()
}

/// One family of parallel train-track lines for the multigrid builder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackFamily {
    /// Angle of the common normal of the family's lines.
    pub normal: f64,
    /// Generic offset of the line positions.
    pub offset: f64,
    /// Step angle of each line `m = −E, …, E − 1`, in that order.
    pub angles: Vec<f64>,
}

/// Serializable description of a graph, consumed by [`GraphSpec::build`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "builder", rename_all = "snake_case")]
pub enum GraphSpec {
    Square {
        theta_bar: f64,
        extent: i32,
        epsilon: f64,
        #[serde(default)]
        flips: Vec<Lift>,
    },
    Triangular {
        extent: i32,
        epsilon: f64,
        #[serde(default)]
        flips: Vec<Lift>,
    },
    Alternating {
        delta: f64,
        extent: i32,
        epsilon: f64,
        #[serde(default)]
        flips: Vec<Lift>,
    },
    Tracks {
        families: Vec<TrackFamily>,
        extent: i32,
        epsilon: f64,
        /// Parity of `Σ P_j` on primal vertices.
        #[serde(default)]
        primal_parity: i32,
        #[serde(default)]
        flips: Vec<Lift>,
    },
}

/// Format version written into graph-spec files.
pub const SPEC_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct SpecFile {
    version: u32,
    graph: GraphSpec,
}

impl GraphSpec {
    pub fn build(&self) -> Result<IsoradialGraph> {
        let (mut g, flips) = match self {
            GraphSpec::Square {
                theta_bar,
                extent,
                epsilon,
                flips,
            } => (build_square_eps(*theta_bar, *extent, *epsilon)?, flips),
            GraphSpec::Triangular {
                extent,
                epsilon,
                flips,
            } => (build_triangular_eps(*extent, *epsilon)?, flips),
            GraphSpec::Alternating {
                delta,
                extent,
                epsilon,
                flips,
            } => (build_alternating_eps(*delta, *extent, *epsilon)?, flips),
            GraphSpec::Tracks {
                families,
                extent,
                epsilon,
                primal_parity,
                flips,
            } => (
                build_from_tracks_with(families, *extent, *epsilon, *primal_parity)?,
                flips,
            ),
        };
        for site in flips {
            g = g.star_triangle_flip(site)?;
        }
        Ok(g)
    }

    /// Canonical JSON text with 17-significant-digit floats.
    pub fn to_json(&self) -> String {
        let file = SpecFile {
            version: SPEC_VERSION,
            graph: self.clone(),
        };
        crate::format::canonical_json(&serde_json::to_value(file).expect("spec serializes"))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SpecFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if file.version != SPEC_VERSION {
            return Err(Error::Parse(format!(
                "unsupported graph-spec version {}",
                file.version
            )));
        }
        Ok(file.graph)
    }

    fn flips_mut(&mut self) -> &mut Vec<Lift> {
        match self {
            GraphSpec::Square { flips, .. }
            | GraphSpec::Triangular { flips, .. }
            | GraphSpec::Alternating { flips, .. }
            | GraphSpec::Tracks { flips, .. } => flips,
        }
    }
}

/// Outcome of the geometric audit of an embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryAudit {
    /// Largest deviation of a diamond edge length from 1.
    pub max_edge_length_error: f64,
    /// Largest modulus of the closed sum of rhombus sides.
    pub max_closure_residual: f64,
    /// Smallest signed rhombus area (positive for a valid embedding).
    pub min_face_area: f64,
    /// Largest deviation of the angle sum at complete vertices from 2π.
    pub max_angle_sum_error: f64,
    /// Largest violation of `(β̄ − ᾱ)/2 = θ̄` over primal edges.
    pub max_half_angle_error: f64,
    pub complete_vertices: usize,
}

impl GeometryAudit {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_edge_length_error <= tol
            && self.max_closure_residual <= tol
            && self.min_face_area > 0.0
            && self.max_angle_sum_error <= tol
            && self.max_half_angle_error <= tol
    }
}

/// A finite window of an isoradial graph together with its diamond graph.
#[derive(Debug, Clone)]
pub struct IsoradialGraph {
    angles: Vec<f64>,
    epsilon: f64,
    primal_parity: i32,
    points: Vec<Lift>,
    index: HashMap<Lift, usize>,
    faces: Vec<Face>,
    edges: Vec<Edge>,
    /// Primal adjacency: `(neighbor point, edge index)`.
    adjacency: Vec<Vec<(usize, usize)>>,
    /// Diamond adjacency: `(neighbor point, step)`.
    diamond: Vec<Vec<(usize, Step)>>,
    angle_sum: Vec<f64>,
    faces_at: Vec<Vec<usize>>,
    periodicity: Option<Periodicity>,
    spec: Option<GraphSpec>,
}

impl IsoradialGraph {
    /// Assemble a graph from lift points and faces, validating angles.
    pub fn from_parts(
        angles: Vec<f64>,
        epsilon: f64,
        primal_parity: i32,
        points: Vec<Lift>,
        faces: Vec<Face>,
        periodicity: Option<Periodicity>,
    ) -> Result<Self> {
        let d = angles.len();
        if d < 2 {
            return Err(Error::InvalidGraph("need at least two track angles".into()));
        }
        for w in angles.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidGraph(
                    "track angles must be strictly increasing".into(),
                ));
            }
        }
        if angles[d - 1] >= angles[0] + PI {
            return Err(Error::InvalidGraph(
                "track angles must fit in a half-open interval of length π".into(),
            ));
        }
        let mut index = HashMap::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            if p.len() != d {
                return Err(Error::InvalidGraph(format!("lift {p:?} has wrong dimension")));
            }
            if index.insert(p.clone(), i).is_some() {
                return Err(Error::InvalidGraph(format!("duplicate lift {p:?}")));
            }
        }
        let parity = |p: &Lift| p.iter().sum::<i32>().rem_euclid(2);
        let mut edges = Vec::with_capacity(faces.len());
        let mut adjacency = vec![Vec::new(); points.len()];
        let mut diamond: Vec<Vec<(usize, Step)>> = vec![Vec::new(); points.len()];
        let mut angle_sum = vec![0.0; points.len()];
        let mut faces_at = vec![Vec::new(); points.len()];
        let mut seen_sides = HashSet::new();
        for (fi, face) in faces.iter().enumerate() {
            if face.a >= face.b || face.b >= d {
                return Err(Error::InvalidGraph(format!("malformed face {face:?}")));
            }
            let corners = face.corners();
            let mut idx = [0usize; 4];
            for (c, slot) in corners.iter().zip(idx.iter_mut()) {
                *slot = *index.get(c).ok_or_else(|| {
                    Error::InvalidGraph(format!("face corner {c:?} missing"))
                })?;
            }
            for &i in &idx {
                faces_at[i].push(fi);
            }
            let opening = angles[face.b] - angles[face.a];
            let base_primal = parity(&face.base) == primal_parity;
            let theta_bar = if base_primal {
                0.5 * opening
            } else {
                FRAC_PI_2 - 0.5 * opening
            };
            if theta_bar <= epsilon || theta_bar >= FRAC_PI_2 - epsilon {
                return Err(Error::AngleOutOfRange {
                    angle: theta_bar,
                    epsilon,
                });
            }
            // corners: base, base+ea, base+ea+eb, base+eb
            let (x, y, alpha_bar, beta_bar) = if base_primal {
                (idx[0], idx[2], angles[face.a], angles[face.b])
            } else {
                (idx[1], idx[3], angles[face.b], angles[face.a] + PI)
            };
            let primal_angle = 2.0 * theta_bar;
            let dual_angle = PI - 2.0 * theta_bar;
            if base_primal {
                angle_sum[idx[0]] += primal_angle;
                angle_sum[idx[2]] += primal_angle;
                angle_sum[idx[1]] += dual_angle;
                angle_sum[idx[3]] += dual_angle;
            } else {
                angle_sum[idx[1]] += primal_angle;
                angle_sum[idx[3]] += primal_angle;
                angle_sum[idx[0]] += dual_angle;
                angle_sum[idx[2]] += dual_angle;
            }
            let e = edges.len();
            edges.push(Edge {
                x,
                y,
                theta_bar,
                alpha_bar,
                beta_bar,
                face: fi,
            });
            adjacency[x].push((y, e));
            adjacency[y].push((x, e));
            let sides = [
                (idx[0], idx[1], face.a),
                (idx[3], idx[2], face.a),
                (idx[0], idx[3], face.b),
                (idx[1], idx[2], face.b),
            ];
            for (lo, hi, coord) in sides {
                if seen_sides.insert((lo, hi)) {
                    diamond[lo].push((hi, Step { coord, sign: 1 }));
                    diamond[hi].push((lo, Step { coord, sign: -1 }));
                }
            }
        }
        Ok(Self {
            angles,
            epsilon,
            primal_parity,
            points,
            index,
            faces,
            edges,
            adjacency,
            diamond,
            angle_sum,
            faces_at,
            periodicity,
            spec: None,
        })
    }

    fn with_spec(mut self, spec: GraphSpec) -> Self {
        self.spec = Some(spec);
        self
    }

    /// Description this graph was built from, when it came from a builder.
    pub fn spec(&self) -> Option<&GraphSpec> {
        self.spec.as_ref()
    }

    /// Number of track directions `d`.
    pub fn dimension(&self) -> usize {
        self.angles.len()
    }

    /// Track angles `ᾱ_1 < … < ᾱ_d`.
    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn periodicity(&self) -> Option<&Periodicity> {
        self.periodicity.as_ref()
    }

    pub fn num_points(&self) -> usize {
        self.points.len()
    }

    pub fn point(&self, i: usize) -> &Lift {
        &self.points[i]
    }

    pub fn index_of(&self, p: &[i32]) -> Option<usize> {
        self.index.get(p).copied()
    }

    pub fn contains(&self, p: &[i32]) -> bool {
        self.index.contains_key(p)
    }

    pub fn is_primal_lift(&self, p: &[i32]) -> bool {
        p.iter().sum::<i32>().rem_euclid(2) == self.primal_parity
    }

    pub fn is_primal(&self, i: usize) -> bool {
        self.is_primal_lift(&self.points[i])
    }

    /// Point indices of primal vertices, in storage order.
    pub fn primal_vertices(&self) -> Vec<usize> {
        (0..self.points.len()).filter(|&i| self.is_primal(i)).collect()
    }

    /// Point indices of dual vertices (rhombus centers of the primal faces).
    pub fn dual_vertices(&self) -> Vec<usize> {
        (0..self.points.len()).filter(|&i| !self.is_primal(i)).collect()
    }

    pub fn position(&self, i: usize) -> Complex64 {
        planar(&self.points[i], &self.angles)
    }

    pub fn lift_position(&self, p: &[i32]) -> Complex64 {
        planar(p, &self.angles)
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Primal neighbors of a primal vertex with the connecting edge.
    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.adjacency[i]
    }

    pub fn diamond_neighbors(&self, i: usize) -> &[(usize, Step)] {
        &self.diamond[i]
    }

    pub fn faces_at(&self, i: usize) -> &[usize] {
        &self.faces_at[i]
    }

    /// A vertex is complete when the rhombus angles around it close up.
    pub fn is_complete(&self, i: usize) -> bool {
        (self.angle_sum[i] - 2.0 * PI).abs() < ANGLE_TOL
    }

    /// Complete primal vertices: those where the Laplacian is fully defined.
    pub fn interior_vertices(&self) -> Vec<usize> {
        self.primal_vertices()
            .into_iter()
            .filter(|&i| self.is_complete(i))
            .collect()
    }

    /// Primal vertex nearest to a planar point.
    pub fn nearest_primal(&self, z: Complex64) -> Option<usize> {
        self.primal_vertices().into_iter().min_by(|&a, &b| {
            (self.position(a) - z)
                .norm()
                .total_cmp(&(self.position(b) - z).norm())
        })
    }

    /// Geometric audit of the embedding.
    pub fn audit(&self) -> GeometryAudit {
        let mut max_len = 0.0_f64;
        for (i, nbrs) in self.diamond.iter().enumerate() {
            for &(j, _) in nbrs {
                let l = (self.position(i) - self.position(j)).norm();
                max_len = max_len.max((l - 1.0).abs());
            }
        }
        let mut max_closure = 0.0_f64;
        let mut min_area = f64::INFINITY;
        for f in &self.faces {
            let c = f.corners();
            let z: Vec<Complex64> = c.iter().map(|p| self.lift_position(p)).collect();
            let mut closure = Complex64::new(0.0, 0.0);
            let mut area = 0.0;
            for k in 0..4 {
                let side = z[(k + 1) % 4] - z[k];
                closure += side;
                area += 0.5 * (z[k].re * z[(k + 1) % 4].im - z[(k + 1) % 4].re * z[k].im);
            }
            max_closure = max_closure.max(closure.norm());
            min_area = min_area.min(area);
        }
        let mut max_sum = 0.0_f64;
        let mut complete = 0;
        for i in 0..self.points.len() {
            if self.is_complete(i) {
                complete += 1;
                max_sum = max_sum.max((self.angle_sum[i] - 2.0 * PI).abs());
            }
        }
        let max_half = self
            .edges
            .iter()
            .map(|e| (0.5 * (e.beta_bar - e.alpha_bar) - e.theta_bar).abs())
            .fold(0.0, f64::max);
        GeometryAudit {
            max_edge_length_error: max_len,
            max_closure_residual: max_closure,
            min_face_area: min_area,
            max_angle_sum_error: max_sum,
            max_half_angle_error: max_half,
            complete_vertices: complete,
        }
    }

    fn require(&self, p: &[i32]) -> Result<usize> {
        self.index_of(p)
            .ok_or_else(|| Error::OutsideWindow(p.to_vec()))
    }

    /// Minimal diamond path from `x` to `y`, exploring coordinates in the
    /// given priority order. Only steps that reduce the remaining lift
    /// difference are taken, so every returned path is minimal.
    pub fn minimal_path_ordered(&self, x: &[i32], y: &[i32], order: &[usize]) -> Result<Vec<Step>> {
        let start = self.require(x)?;
        let goal = self.require(y)?;
        let mut dead = HashSet::new();
        let mut path = Vec::new();
        let mut stack = vec![(start, 0usize)];
        let rank = |s: &Step| order.iter().position(|&c| c == s.coord).unwrap_or(usize::MAX);
        while let Some(&(node, next)) = stack.last() {
            if node == goal {
                return Ok(path);
            }
            let p = &self.points[node];
            let mut options: Vec<(usize, Step)> = self.diamond[node]
                .iter()
                .copied()
                .filter(|(_, s)| {
                    let rem = y[s.coord] - p[s.coord];
                    rem != 0 && rem.signum() == s.sign
                })
                .collect();
            options.sort_by_key(|(_, s)| (rank(s), s.sign));
            let choice = options
                .iter()
                .enumerate()
                .skip(next)
                .find(|(_, (nb, _))| !dead.contains(nb));
            match choice {
                Some((k, &(nb, step))) => {
                    stack.last_mut().expect("nonempty").1 = k + 1;
                    path.push(step);
                    stack.push((nb, 0));
                }
                None => {
                    dead.insert(node);
                    stack.pop();
                    path.pop();
                }
            }
        }
        Err(Error::OutsideWindow(y.to_vec()))
    }

    /// Minimal diamond path from `x` to `y` in the default coordinate order.
    pub fn minimal_path(&self, x: &[i32], y: &[i32]) -> Result<Vec<Step>> {
        let order: Vec<usize> = (0..self.dimension()).collect();
        self.minimal_path_ordered(x, y, &order)
    }

    /// Reduced coordinates of `y − x`.
    pub fn reduced_coords(&self, x: &[i32], y: &[i32]) -> Result<Direction> {
        self.require(x)?;
        self.require(y)?;
        let d: Vec<i32> = y.iter().zip(x).map(|(a, b)| a - b).collect();
        Direction::from_difference(&d)
    }

    /// Push the surface across the cube at a degree-3 diamond vertex. The
    /// three rhombi around `site` are replaced by the three other faces of
    /// the cube they span, turning a triangle into a star or back.
    pub fn star_triangle_flip(&self, site: &[i32]) -> Result<IsoradialGraph> {
        let i = self.require(site)?;
        let nbrs = &self.diamond[i];
        if nbrs.len() != 3 || self.faces_at[i].len() != 3 || !self.is_complete(i) {
            return Err(Error::NotFlippable(format!(
                "{site:?} is not the center of a complete hexagon"
            )));
        }
        let steps: Vec<Step> = nbrs.iter().map(|&(_, s)| s).collect();
        let coords: HashSet<usize> = steps.iter().map(|s| s.coord).collect();
        if coords.len() != 3 {
            return Err(Error::NotFlippable(format!(
                "{site:?} has repeated step directions"
            )));
        }
        let mut flipped = site.to_vec();
        for s in &steps {
            flipped[s.coord] += s.sign;
        }
        if self.contains(&flipped) {
            return Err(Error::NotFlippable(format!(
                "opposite cube corner {flipped:?} already present"
            )));
        }
        let removed: HashSet<usize> = self.faces_at[i].iter().copied().collect();
        let mut faces: Vec<Face> = self
            .faces
            .iter()
            .enumerate()
            .filter(|(fi, _)| !removed.contains(fi))
            .map(|(_, f)| f.clone())
            .collect();
        for (u, v) in [(0, 1), (0, 2), (1, 2)] {
            let (s, t) = (steps[u], steps[v]);
            let mut corner_s = flipped.clone();
            corner_s[s.coord] -= s.sign;
            let mut corner_t = flipped.clone();
            corner_t[t.coord] -= t.sign;
            let mut far = corner_s.clone();
            far[t.coord] -= t.sign;
            let cs = [&flipped, &corner_s, &corner_t, &far];
            let base: Lift = (0..flipped.len())
                .map(|j| cs.iter().map(|c| c[j]).min().expect("four corners"))
                .collect();
            let (a, b) = if s.coord < t.coord {
                (s.coord, t.coord)
            } else {
                (t.coord, s.coord)
            };
            faces.push(Face { base, a, b });
        }
        let mut points: Vec<Lift> = self
            .points
            .iter()
            .filter(|p| p.as_slice() != site)
            .cloned()
            .collect();
        points.push(flipped);
        let g = IsoradialGraph::from_parts(
            self.angles.clone(),
            self.epsilon,
            self.primal_parity,
            points,
            faces,
            None,
        )?;
        Ok(match &self.spec {
            Some(spec) => {
                let mut spec = spec.clone();
                spec.flips_mut().push(site.to_vec());
                g.with_spec(spec)
            }
            None => g,
        })
    }

    /// Reduced coordinates from the vertex nearest the origin to the vertex
    /// nearest `R e^{iφ}`, for each radius.
    pub fn flatness_diagnostic(&self, ray_angle: f64, radii: &[f64]) -> Result<Vec<Direction>> {
        let origin = self
            .nearest_primal(Complex64::new(0.0, 0.0))
            .ok_or_else(|| Error::InvalidGraph("graph has no primal vertex".into()))?;
        let reach = self
            .primal_vertices()
            .into_iter()
            .map(|v| self.position(v).norm())
            .fold(0.0, f64::max);
        let mut out = Vec::with_capacity(radii.len());
        for &r in radii {
            if r > reach {
                return Err(Error::InvalidInput(format!(
                    "radius {r} leaves the window (reach {reach})"
                )));
            }
            let target = Complex64::from_polar(r, ray_angle);
            let v = self.nearest_primal(target).expect("nonempty");
            if v == origin {
                return Err(Error::InvalidInput(format!(
                    "radius {r} does not leave the origin vertex"
                )));
            }
            out.push(self.reduced_coords(&self.points[origin], &self.points[v])?);
        }
        Ok(out)
    }
}

/// Lifts of all unit squares of `Z^d` with four corners in `points`.
fn complete_squares(points: &[Lift], d: usize) -> Vec<Face> {
    let set: HashSet<&Lift> = points.iter().collect();
    let mut faces = Vec::new();
    for p in points {
        for a in 0..d {
            for b in a + 1..d {
                let mut pa = p.clone();
                pa[a] += 1;
                let mut pb = p.clone();
                pb[b] += 1;
                let mut pab = pa.clone();
                pab[b] += 1;
                if set.contains(&pa) && set.contains(&pb) && set.contains(&pab) {
                    faces.push(Face {
                        base: p.clone(),
                        a,
                        b,
                    });
                }
            }
        }
    }
    faces.sort_by(|f, g| (&f.base, f.a, f.b).cmp(&(&g.base, g.a, g.b)));
    faces
}

/// Primal vertices plus every dual vertex adjacent to one of them.
fn with_adjacent_duals(primal: Vec<Lift>, d: usize) -> Vec<Lift> {
    let mut seen: HashSet<Lift> = primal.iter().cloned().collect();
    let mut points = primal.clone();
    for p in &primal {
        for j in 0..d {
            for s in [-1, 1] {
                let mut q = p.clone();
                q[j] += s;
                if seen.insert(q.clone()) {
                    points.push(q);
                }
            }
        }
    }
    points.sort();
    points
}

/// Square lattice with horizontal half-angle `θ̄` and vertical `π/2 − θ̄`.
/// Primal `(i, j)` with `|i|, |j| ≤ extent` is lifted to `(i − j, i + j)`.
pub fn build_square(theta_bar: f64, extent: i32) -> Result<IsoradialGraph> {
    build_square_eps(theta_bar, extent, DEFAULT_EPSILON)
}

pub fn build_square_eps(theta_bar: f64, extent: i32, epsilon: f64) -> Result<IsoradialGraph> {
    if theta_bar <= epsilon || theta_bar >= FRAC_PI_2 - epsilon {
        return Err(Error::AngleOutOfRange {
            angle: theta_bar,
            epsilon,
        });
    }
    if extent < 1 {
        return Err(Error::InvalidInput("extent must be at least 1".into()));
    }
    let mut primal = Vec::new();
    for i in -extent..=extent {
        for j in -extent..=extent {
            primal.push(vec![i - j, i + j]);
        }
    }
    let points = with_adjacent_duals(primal, 2);
    let faces = complete_squares(&points, 2);
    let periodicity = Periodicity {
        t1: vec![1, 1],
        t2: vec![-1, 1],
        reps: vec![vec![0, 0]],
    };
    Ok(IsoradialGraph::from_parts(
        vec![-theta_bar, theta_bar],
        epsilon,
        0,
        points,
        faces,
        Some(periodicity),
    )?
    .with_spec(GraphSpec::Square {
        theta_bar,
        extent,
        epsilon,
        flips: Vec::new(),
    }))
}

/// Triangular lattice with track angles `π/6, π/2, 5π/6`; primal vertices
/// lie on the level `P1 − P2 + P3 = 0` inside a hexagonal window.
pub fn build_triangular(extent: i32) -> Result<IsoradialGraph> {
    build_triangular_eps(extent, DEFAULT_EPSILON)
}

pub fn build_triangular_eps(extent: i32, epsilon: f64) -> Result<IsoradialGraph> {
    if extent < 1 {
        return Err(Error::InvalidInput("extent must be at least 1".into()));
    }
    let t1 = [1, 0, -1];
    let t2 = [0, 1, 1];
    let mut primal = Vec::new();
    for a in -extent..=extent {
        for b in -extent..=extent {
            if (a + b).abs() <= extent {
                primal.push((0..3).map(|j| a * t1[j] + b * t2[j]).collect());
            }
        }
    }
    let points = with_adjacent_duals(primal, 3);
    let faces = complete_squares(&points, 3);
    let periodicity = Periodicity {
        t1: t1.to_vec(),
        t2: t2.to_vec(),
        reps: vec![vec![0, 0, 0]],
    };
    Ok(IsoradialGraph::from_parts(
        vec![FRAC_PI_6, FRAC_PI_2, 5.0 * FRAC_PI_6],
        epsilon,
        0,
        points,
        faces,
        Some(periodicity),
    )?
    .with_spec(GraphSpec::Triangular {
        extent,
        epsilon,
        flips: Vec::new(),
    }))
}

/// Periodic graph with two primal vertices per fundamental domain: one
/// family of tracks alternates the angles `−π/4 ∓ δ`, the other has
/// angle `π/4`. Vertices are `(⌈a/2⌉, ⌊a/2⌋, b)` for `|a|, |b| ≤ 2·extent`.
pub fn build_alternating(delta: f64, extent: i32) -> Result<IsoradialGraph> {
    build_alternating_eps(delta, extent, DEFAULT_EPSILON)
}

pub fn build_alternating_eps(delta: f64, extent: i32, epsilon: f64) -> Result<IsoradialGraph> {
    if !(delta > 0.0 && delta < std::f64::consts::FRAC_PI_4) {
        return Err(Error::InvalidInput(format!("delta {delta} outside (0, π/4)")));
    }
    if extent < 1 {
        return Err(Error::InvalidInput("extent must be at least 1".into()));
    }
    let lift = |a: i32, b: i32| -> Lift { vec![a.div_euclid(2) + a.rem_euclid(2), a.div_euclid(2), b] };
    let r = 2 * extent;
    let mut primal = Vec::new();
    for a in -r..=r {
        for b in -r..=r {
            if (a + b).rem_euclid(2) == 0 {
                primal.push((a, b));
            }
        }
    }
    let mut seen = HashSet::new();
    let mut cells = Vec::new();
    for &(a, b) in &primal {
        for (da, db) in [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)] {
            if seen.insert((a + da, b + db)) {
                cells.push((a + da, b + db));
            }
        }
    }
    let mut faces = Vec::new();
    for &(a, b) in &cells {
        if seen.contains(&(a + 1, b)) && seen.contains(&(a, b + 1)) && seen.contains(&(a + 1, b + 1)) {
            let coord = if a.rem_euclid(2) == 0 { 0 } else { 1 };
            faces.push(Face {
                base: lift(a, b),
                a: coord,
                b: 2,
            });
        }
    }
    let mut points: Vec<Lift> = cells.iter().map(|&(a, b)| lift(a, b)).collect();
    points.sort();
    faces.sort_by(|f, g| (&f.base, f.a, f.b).cmp(&(&g.base, g.a, g.b)));
    let q = std::f64::consts::FRAC_PI_4;
    let periodicity = Periodicity {
        t1: vec![1, 1, 0],
        t2: vec![0, 0, 2],
        reps: vec![vec![0, 0, 0], vec![1, 0, 1]],
    };
    Ok(IsoradialGraph::from_parts(
        vec![-q - delta, -q + delta, q],
        epsilon,
        0,
        points,
        faces,
        Some(periodicity),
    )?
    .with_spec(GraphSpec::Alternating {
        delta,
        extent,
        epsilon,
        flips: Vec::new(),
    }))
}

/// De Bruijn multigrid construction. Family `f` contributes the lines
/// `⟨z, n_f⟩ = γ_f + m` for `m ∈ [−E, E)`; crossing line `m` along `n_f`
/// adds the unit step of its angle. Each pairwise crossing is a rhombus.
pub fn build_from_tracks(families: &[TrackFamily], extent: i32) -> Result<IsoradialGraph> {
    build_from_tracks_with(families, extent, DEFAULT_EPSILON, 0)
}

/// [`build_from_tracks`] with explicit margin and primal parity; the cell
/// of the arrangement with all line counts zero has parity 0.
pub fn build_from_tracks_with(
    families: &[TrackFamily],
    extent: i32,
    epsilon: f64,
    primal_parity: i32,
) -> Result<IsoradialGraph> {
    if families.len() < 2 {
        return Err(Error::InvalidGraph("need at least two track families".into()));
    }
    if extent < 1 {
        return Err(Error::InvalidInput("extent must be at least 1".into()));
    }
    let lines = 2 * extent as usize;
    for (f, fam) in families.iter().enumerate() {
        if fam.angles.len() != lines {
            return Err(Error::InvalidGraph(format!(
                "family {f} lists {} angles, expected {lines}",
                fam.angles.len()
            )));
        }
    }
    // distinct angles, normalized into [lo, lo + π)
    let lo = families
        .iter()
        .flat_map(|f| f.angles.iter().copied())
        .fold(f64::INFINITY, f64::min);
    let mut distinct: Vec<f64> = Vec::new();
    for a in families.iter().flat_map(|f| f.angles.iter().copied()) {
        if a >= lo + PI {
            return Err(Error::InvalidGraph(
                "track angles must fit in an interval of length π".into(),
            ));
        }
        if !distinct.iter().any(|&b| (a - b).abs() < 1e-15) {
            distinct.push(a);
        }
    }
    distinct.sort_by(f64::total_cmp);
    let coord_of = |a: f64| distinct.iter().position(|&b| (a - b).abs() < 1e-15).expect("listed");
    // non-interleaving: steps of two families keep the order of their normals
    for (f, ff) in families.iter().enumerate() {
        for gg in families.iter().skip(f + 1) {
            let normal_sign = (gg.normal - ff.normal).sin().signum();
            for &a in &ff.angles {
                for &b in &gg.angles {
                    if (b - a).sin().signum() != normal_sign || (b - a).sin().abs() < 1e-12 {
                        return Err(Error::InvalidGraph(
                            "angle ranges of two families interleave or are parallel".into(),
                        ));
                    }
                }
            }
        }
    }
    let d = distinct.len();
    let e = extent;
    // prefix sums of steps: prefix[f][K + E] = S_f(K)
    let prefix: Vec<Vec<Lift>> = families
        .iter()
        .map(|fam| {
            let mut out = vec![vec![0; d]; lines + 1];
            let zero = e as usize;
            for k in zero..lines {
                let mut next = out[k].clone();
                next[coord_of(fam.angles[k])] += 1;
                out[k + 1] = next;
            }
            for k in (0..zero).rev() {
                let mut prev = out[k + 1].clone();
                prev[coord_of(fam.angles[k])] -= 1;
                out[k] = prev;
            }
            out
        })
        .collect();
    let lift_of = |ks: &[i32]| -> Lift {
        let mut p = vec![0; d];
        for (f, &k) in ks.iter().enumerate() {
            let s = &prefix[f][(k + e) as usize];
            for j in 0..d {
                p[j] += s[j];
            }
        }
        p
    };
    let normals: Vec<Complex64> = families
        .iter()
        .map(|f| Complex64::from_polar(1.0, f.normal))
        .collect();
    let mut points = HashSet::new();
    let mut faces = Vec::new();
    for f in 0..families.len() {
        for g in f + 1..families.len() {
            let (nf, ng) = (normals[f], normals[g]);
            let det = nf.re * ng.im - nf.im * ng.re;
            for m in -e..e {
                for mp in -e..e {
                    let cf = families[f].offset + m as f64;
                    let cg = families[g].offset + mp as f64;
                    let z = Complex64::new(
                        (cf * ng.im - cg * nf.im) / det,
                        (nf.re * cg - ng.re * cf) / det,
                    );
                    let mut ks: Vec<i32> = (0..families.len())
                        .map(|h| {
                            let t = z.re * normals[h].re + z.im * normals[h].im
                                - families[h].offset;
                            (t.ceil() as i32).clamp(-e, e)
                        })
                        .collect();
                    ks[f] = m;
                    ks[g] = mp;
                    let base = lift_of(&ks);
                    let ja = coord_of(families[f].angles[(m + e) as usize]);
                    let jb = coord_of(families[g].angles[(mp + e) as usize]);
                    if ja == jb {
                        return Err(Error::InvalidGraph("crossing tracks share an angle".into()));
                    }
                    let face = Face {
                        base,
                        a: ja.min(jb),
                        b: ja.max(jb),
                    };
                    for c in face.corners() {
                        points.insert(c);
                    }
                    faces.push(face);
                }
            }
        }
    }
    let mut points: Vec<Lift> = points.into_iter().collect();
    points.sort();
    faces.sort_by(|f, g| (&f.base, f.a, f.b).cmp(&(&g.base, g.a, g.b)));
    let primal_parity = primal_parity.rem_euclid(2);
    Ok(
        IsoradialGraph::from_parts(distinct, epsilon, primal_parity, points, faces, None)?
            .with_spec(GraphSpec::Tracks {
                families: families.to_vec(),
                extent,
                epsilon,
                primal_parity,
                flips: Vec::new(),
            }),
    )
}

/// A family whose lines all carry the same angle.
pub fn constant_family(normal: f64, offset: f64, angle: f64, extent: i32) -> TrackFamily {
    TrackFamily {
        normal,
        offset,
        angles: vec![angle; 2 * extent as usize],
    }
}

/// Waves graph: a family whose line angles alternate between `a1` and
/// `a2` in blocks of lengths 1, 2, 4, 8, … counted from the center line
/// outward, crossed by a constant family with angle `b`. The reduced
/// coordinates along a fixed ray have no limit.
pub fn waves_families(a1: f64, a2: f64, b: f64, extent: i32) -> Vec<TrackFamily> {
    let angle_at = |idx: i32| {
        // block index of distance idx ≥ 0 from the center
        let block = (32 - ((idx + 1) as u32).leading_zeros()) as i32 - 1;
        if block % 2 == 0 {
            a1
        } else {
            a2
        }
    };
    let angles = (-extent..extent)
        .map(|m| if m >= 0 { angle_at(m) } else { angle_at(-m - 1) })
        .collect();
    vec![
        TrackFamily {
            normal: 0.5 * (a1 + a2),
            offset: 0.123_456_789,
            angles,
        },
        constant_family(b, 0.271_828_183, b, extent),
    ]
}

/// Build the waves graph of [`waves_families`].
pub fn build_waves(extent: i32) -> Result<IsoradialGraph> {
    let q = std::f64::consts::FRAC_PI_4;
    build_from_tracks(&waves_families(-q - 0.35, -q + 0.35, q + 0.1, extent), extent)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::VecDeque;

    fn bfs_distance(g: &IsoradialGraph, x: usize, y: usize) -> Option<usize> {
        let mut dist = vec![usize::MAX; g.num_points()];
        let mut queue = VecDeque::from([x]);
        dist[x] = 0;
        while let Some(v) = queue.pop_front() {
            if v == y {
                return Some(dist[v]);
            }
            for &(w, _) in g.diamond_neighbors(v) {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        None
    }

    #[test]
    fn square_window_counts_and_audit() {
        let g = build_square(FRAC_PI_4, 3).unwrap();
        assert_eq!(g.primal_vertices().len(), 49);
        let audit = g.audit();
        assert!(audit.passes(1e-9), "{audit:?}");
        assert_eq!(g.interior_vertices().len(), 25);
    }

    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn square_half_angles_complementary() {
        let g = build_square(PI / 3.0, 2).unwrap();
        for e in g.edges() {
            let dz = g.position(e.y) - g.position(e.x);
            let expected = if dz.im.abs() < 1e-9 { PI / 3.0 } else { PI / 6.0 };
            assert!((e.theta_bar - expected).abs() < 1e-15);
        }
        assert!(build_square(0.01, 2).is_err());
        assert!(build_square(FRAC_PI_2 - 0.01, 2).is_err());
    }

    #[test]
    fn triangular_is_equilateral_with_degree_six() {
        let g = build_triangular(2).unwrap();
        for e in g.edges() {
            assert!((e.theta_bar - FRAC_PI_6).abs() < 1e-15);
        }
        for v in g.interior_vertices() {
            assert_eq!(g.neighbors(v).len(), 6);
        }
        let big = build_triangular(4).unwrap();
        assert!(big.audit().passes(1e-9));
        // rhombille: dual vertices have three diamond neighbors when complete
        for v in big.dual_vertices() {
            if big.is_complete(v) {
                assert_eq!(big.diamond_neighbors(v).len(), 3);
            }
        }
    }

    #[test]
    fn alternating_graph_is_valid_and_periodic() {
        let g = build_alternating(0.15, 3).unwrap();
        assert!(g.audit().passes(1e-9));
        let per = g.periodicity().unwrap();
        for v in g.primal_vertices() {
            assert!(per.decompose(g.point(v), g.angles()).is_some());
        }
        for v in g.interior_vertices() {
            assert_eq!(g.neighbors(v).len(), 4);
        }
    }

    #[test]
    fn tracks_reproduce_square_and_triangular() {
        let e = 5;
        let q = FRAC_PI_4;
        let fams = vec![
            constant_family(-q, 0.31, -q, e),
            constant_family(q, 0.17, q, e),
        ];
        let g = build_from_tracks(&fams, e).unwrap();
        assert!(g.audit().passes(1e-9));
        assert_eq!(g.dimension(), 2);
        for edge in g.edges() {
            assert!((edge.theta_bar - q).abs() < 1e-15);
        }
        for v in g.interior_vertices() {
            assert_eq!(g.neighbors(v).len(), 4);
        }
        let fams = vec![
            constant_family(FRAC_PI_6, 0.11, FRAC_PI_6, e),
            constant_family(FRAC_PI_2, 0.23, FRAC_PI_2, e),
            constant_family(5.0 * FRAC_PI_6, 0.37, 5.0 * FRAC_PI_6, e),
        ];
        // the two bipartite classes give the triangular lattice and the
        // honeycomb; away from the window edge, where all three families
        // cross, exactly one has all half-angles π/6
        let mut found = 0;
        for parity in 0..2 {
            let g = build_from_tracks_with(&fams, e, DEFAULT_EPSILON, parity).unwrap();
            assert!(g.audit().passes(1e-9));
            let central: Vec<&Edge> = g
                .edges()
                .iter()
                .filter(|ed| g.position(ed.x).norm() < 2.0 && g.position(ed.y).norm() < 2.0)
                .collect();
            assert!(!central.is_empty());
            if central.iter().all(|ed| (ed.theta_bar - FRAC_PI_6).abs() < 1e-12) {
                found += 1;
            } else {
                assert!(central.iter().all(|ed| (ed.theta_bar - PI / 3.0).abs() < 1e-12));
            }
        }
        assert_eq!(found, 1);
    }

    #[test]
    fn interleaving_families_are_rejected() {
        let e = 2;
        let fams = vec![
            constant_family(0.0, 0.1, 0.6, e),
            constant_family(0.5, 0.2, 0.4, e),
        ];
        assert!(build_from_tracks(&fams, e).is_err());
    }

    #[test]
    fn minimal_path_trivial_cases() {
        let g = build_square(FRAC_PI_4, 3).unwrap();
        assert!(g.minimal_path(&[0, 0], &[0, 0]).unwrap().is_empty());
        let path = g.minimal_path(&[0, 0], &[1, 1]).unwrap();
        assert_eq!(path.len(), 2);
        let angles: Vec<f64> = path.iter().map(|s| s.angle(g.angles())).collect();
        assert!(angles.contains(&-FRAC_PI_4) && angles.contains(&FRAC_PI_4));
        assert!(g.minimal_path(&[0, 0], &[40, 40]).is_err());
    }

    #[test]
    fn minimal_path_matches_bfs_on_triangular() {
        let g = build_triangular(5).unwrap();
        let x = vec![0, 0, 0];
        let xi = g.index_of(&x).unwrap();
        for v in g.primal_vertices() {
            let y = g.point(v).clone();
            let path = g.minimal_path(&x, &y).unwrap();
            let l1: i32 = y.iter().map(|c| c.abs()).sum();
            assert_eq!(path.len() as i32, l1);
            assert_eq!(bfs_distance(&g, xi, v), Some(path.len()));
            let mut counts = vec![0; 3];
            for s in &path {
                counts[s.coord] += s.sign;
            }
            assert_eq!(counts, y);
        }
    }

    #[test]
    fn reduced_coordinates_conventions() {
        let g = build_square(FRAC_PI_4, 4).unwrap();
        // primal (N, N) lifts to (0, 2N)
        let n = g.reduced_coords(&[0, 0], &[0, 6]).unwrap();
        assert_eq!(n.components(), &[0.0, 1.0]);
        let back = g.reduced_coords(&[0, 6], &[0, 0]).unwrap();
        assert_eq!(back, n.negated());
        assert!(g.reduced_coords(&[0, 0], &[0, 0]).is_err());
        let d = g.reduced_coords(&[0, 0], &[3, -1]).unwrap();
        for (p, m) in d.positive_part().iter().zip(d.negative_part()) {
            assert_eq!(p.min(m), 0.0);
        }
    }

    #[test]
    fn flip_is_an_involution_and_local() {
        let g = build_triangular(4).unwrap();
        let site = vec![1, 0, 0]; // dual vertex at level 1
        assert!(!g.is_primal_lift(&site));
        let y = g.star_triangle_flip(&site).unwrap();
        let x0 = vec![0, 1, -1];
        assert!(y.contains(&x0) && y.is_primal_lift(&x0));
        let i0 = y.index_of(&x0).unwrap();
        assert_eq!(y.neighbors(i0).len(), 3);
        assert!(y.audit().passes(1e-9));
        assert_eq!(y.angles(), g.angles());
        assert_eq!(y.num_points(), g.num_points());
        assert!((y.position(i0) - g.lift_position(&site)).norm() < 1e-12);
        let back = y.star_triangle_flip(&x0).unwrap();
        let mut a: Vec<_> = (0..g.num_points()).map(|i| g.point(i).clone()).collect();
        let mut b: Vec<_> = (0..back.num_points()).map(|i| back.point(i).clone()).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
        let mut fa = g.faces().to_vec();
        let mut fb = back.faces().to_vec();
        fa.sort_by(|f, g| (&f.base, f.a).cmp(&(&g.base, g.a)));
        fb.sort_by(|f, g| (&f.base, f.a).cmp(&(&g.base, g.a)));
        assert_eq!(fa, fb);
        assert!(g.star_triangle_flip(&[0, 0, 0]).is_err());
    }

    #[test]
    fn flatness_constant_on_square_axis() {
        let g = build_square(FRAC_PI_4, 10).unwrap();
        let seq = g.flatness_diagnostic(0.0, &[2.0, 4.0, 8.0, 12.0]).unwrap();
        for d in &seq {
            assert!(d.distance(&seq[0]) < 1e-15);
        }
        assert!(g.flatness_diagnostic(0.0, &[500.0]).is_err());
    }

    #[test]
    fn flatness_converges_on_triangular_lattice() {
        let g = build_triangular(30).unwrap();
        let radii = [5.0, 10.0, 20.0, 40.0];
        let seq = g.flatness_diagnostic(0.3, &radii).unwrap();
        let gaps: Vec<f64> = seq.windows(2).map(|w| w[0].distance(&w[1])).collect();
        assert!(gaps.last().unwrap() < &0.05, "{gaps:?}");
    }

    #[test]
    fn waves_graph_oscillates() {
        let g = build_waves(64).unwrap();
        assert!(g.audit().passes(1e-9));
        let radii: Vec<f64> = (0..10).map(|i| 4.0 * 1.35_f64.powi(i)).collect();
        let seq = g.flatness_diagnostic(-FRAC_PI_4, &radii).unwrap();
        let share: Vec<f64> = seq
            .iter()
            .map(|d| {
                let c = d.components();
                c[0].abs() / (c[0].abs() + c[1].abs())
            })
            .collect();
        let tail = &share[share.len() / 2..];
        let spread = tail.iter().cloned().fold(f64::MIN, f64::max)
            - tail.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread > 0.1, "{share:?}");
    }

    #[test]
    fn spec_round_trip_is_bit_stable() {
        let g = build_triangular(3).unwrap().star_triangle_flip(&[1, 0, 0]).unwrap();
        let text = g.spec().unwrap().to_json();
        let spec = GraphSpec::from_json(&text).unwrap();
        assert_eq!(&spec, g.spec().unwrap());
        assert_eq!(spec.to_json(), text);
        let rebuilt = spec.build().unwrap();
        assert_eq!(rebuilt.num_points(), g.num_points());
        let square = GraphSpec::Square {
            theta_bar: 0.1 + 0.2,
            extent: 2,
            epsilon: DEFAULT_EPSILON,
            flips: vec![],
        };
        let text = square.to_json();
        assert!(text.contains("3.0000000000000004e-1"));
        assert!(GraphSpec::from_json("{\"version\": 9, \"graph\": {}}").is_err());
    }
}
