//! Python bindings: elliptic context, isoradial graphs, Green function,
//! Martin audits and series certification.

use num_complex::Complex64;
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;

use isomartin::exponential::ExponentialEvaluator;
use isomartin::graph::{build_alternating, build_square, build_triangular, build_waves};
use isomartin::green::{
    boundary_map, green_asymptotic, green_contour, martin_kernel, martin_limit_audit,
};
use isomartin::series::certify;
use isomartin::spectral::FourierSymbol;
use isomartin::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Pole { .. }
        | Error::Quadrature(_)
        | Error::Saddle(_)
        | Error::Solver(_)
        | Error::RootFinding(_)
        | Error::Certification { .. } => PyArithmeticError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Jacobi elliptic functions and complete integrals at modulus `k`.
#[pyclass(name = "EllipticContext", frozen)]
struct PyEllipticContext {
    inner: isomartin::EllipticContext,
}

#[pymethods]
impl PyEllipticContext {
    #[new]
    fn new(k: f64) -> PyResult<Self> {
        let inner = isomartin::EllipticContext::new(k).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn k(&self) -> f64 {
        self.inner.k()
    }

    #[getter]
    fn k_prime(&self) -> f64 {
        self.inner.k_prime()
    }

    #[getter]
    fn big_k(&self) -> f64 {
        self.inner.big_k()
    }

    #[getter]
    fn big_k_prime(&self) -> f64 {
        self.inner.big_k_prime()
    }

    /// `(sn, cn, dn)` at complex `u`.
    fn jacobi(&self, u: Complex64) -> PyResult<(Complex64, Complex64, Complex64)> {
        self.inner.jacobi(u).map_err(to_py)
    }

    fn sc(&self, u: Complex64) -> PyResult<Complex64> {
        self.inner.sc(u).map_err(to_py)
    }

    fn legendre_residual(&self) -> f64 {
        self.inner.legendre_residual()
    }

    fn __repr__(&self) -> String {
        format!("EllipticContext(k={})", self.inner.k())
    }
}

/// A finite window of an isoradial graph, addressed by integer lifts.
#[pyclass(name = "IsoradialGraph", frozen)]
struct PyIsoradialGraph {
    inner: isomartin::IsoradialGraph,
}

#[pymethods]
impl PyIsoradialGraph {
    #[staticmethod]
    fn square(theta_bar: f64, extent: i32) -> PyResult<Self> {
        build_square(theta_bar, extent).map(|inner| Self { inner }).map_err(to_py)
    }

    #[staticmethod]
    fn triangular(extent: i32) -> PyResult<Self> {
        build_triangular(extent).map(|inner| Self { inner }).map_err(to_py)
    }

    #[staticmethod]
    fn alternating(delta: f64, extent: i32) -> PyResult<Self> {
        build_alternating(delta, extent).map(|inner| Self { inner }).map_err(to_py)
    }

    #[staticmethod]
    fn waves(extent: i32) -> PyResult<Self> {
        build_waves(extent).map(|inner| Self { inner }).map_err(to_py)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let spec = isomartin::GraphSpec::from_json(text).map_err(to_py)?;
        spec.build().map(|inner| Self { inner }).map_err(to_py)
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner
            .spec()
            .map(|s| s.to_json())
            .ok_or_else(|| PyValueError::new_err("graph has no builder spec"))
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    #[getter]
    fn angles(&self) -> Vec<f64> {
        self.inner.angles().to_vec()
    }

    #[getter]
    fn num_points(&self) -> usize {
        self.inner.num_points()
    }

    #[getter]
    fn periodic(&self) -> bool {
        self.inner.periodicity().is_some()
    }

    fn is_primal(&self, lift: Vec<i32>) -> bool {
        self.inner.is_primal_lift(&lift)
    }

    /// Planar embedding of the lift.
    fn position(&self, lift: Vec<i32>) -> PyResult<Complex64> {
        self.inner
            .index_of(&lift)
            .map(|i| self.inner.position(i))
            .ok_or_else(|| PyValueError::new_err(format!("lift {lift:?} is outside the window")))
    }

    /// The graph after a star-triangle move at `site`.
    fn star_triangle_flip(&self, site: Vec<i32>) -> PyResult<Self> {
        self.inner.star_triangle_flip(&site).map(|inner| Self { inner }).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "IsoradialGraph(dimension={}, points={})",
            self.inner.dimension(),
            self.inner.num_points()
        )
    }
}

/// Green function of the massive Laplacian by the contour formula;
/// `method="asymptotic"` uses the saddle-point approximation and
/// `method="fourier"` inverts the periodic symbol.
#[pyfunction]
#[pyo3(signature = (graph, ctx, x, y, method = "contour"))]
fn green(
    graph: &PyIsoradialGraph,
    ctx: &PyEllipticContext,
    x: Vec<i32>,
    y: Vec<i32>,
    method: &str,
) -> PyResult<f64> {
    let ev = ExponentialEvaluator::new(&graph.inner, &ctx.inner);
    let value = match method {
        "contour" => green_contour(&ev, &x, &y).map_err(to_py)?.value,
        "asymptotic" => green_asymptotic(&ev, &x, &y).map_err(to_py)?.value,
        "fourier" => {
            let sym = FourierSymbol::new(&graph.inner, &ctx.inner).map_err(to_py)?;
            let sx = sym.locate(&x).map_err(to_py)?;
            let sy = sym.locate(&y).map_err(to_py)?;
            sym.green(sx, sy).map_err(to_py)?.value
        }
        other => return Err(PyValueError::new_err(format!("unknown method {other:?}"))),
    };
    Ok(value)
}

/// Martin kernel `G(x1, y) / G(x0, y)`.
#[pyfunction]
fn martin(graph: &PyIsoradialGraph, ctx: &PyEllipticContext, x0: Vec<i32>, x1: Vec<i32>, y: Vec<i32>) -> PyResult<f64> {
    let ev = ExponentialEvaluator::new(&graph.inner, &ctx.inner);
    martin_kernel(&ev, &x1, &x0, &y).map_err(to_py)
}

/// Rows `(radius, ratio, target, error)` of Martin ratios along a ray.
#[pyfunction]
fn martin_audit(
    graph: &PyIsoradialGraph,
    ctx: &PyEllipticContext,
    x0: Vec<i32>,
    x1: Vec<i32>,
    direction: Vec<f64>,
    radii: Vec<f64>,
) -> PyResult<Vec<(f64, f64, f64, f64)>> {
    let ev = ExponentialEvaluator::new(&graph.inner, &ctx.inner);
    let audit = martin_limit_audit(&ev, &x0, &x1, &direction, &radii).map_err(to_py)?;
    Ok(audit.rows.iter().map(|r| (r.radius, r.ratio, r.target, r.error)).collect())
}

/// Boundary abscissae of `samples` equally spaced directions, lifted to be
/// continuous, with the total winding.
#[pyfunction]
fn boundary(graph: &PyIsoradialGraph, ctx: &PyEllipticContext, samples: usize) -> PyResult<(Vec<f64>, f64)> {
    let ev = ExponentialEvaluator::new(&graph.inner, &ctx.inner);
    let map = boundary_map(&ev, samples).map_err(to_py)?;
    let winding = map.winding();
    Ok((map.lifted, winding))
}

/// Exact series certification; one `(name, passed, verified_through)` per check.
#[pyfunction]
fn certify_series(py: Python<'_>, order: usize) -> PyResult<Vec<(String, bool, usize)>> {
    let report = py.detach(|| certify(order)).map_err(to_py)?;
    Ok(report
        .checks
        .iter()
        .map(|c| (c.name.to_string(), c.passed, c.verified_through))
        .collect())
}

#[pymodule]
fn isomartin_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEllipticContext>()?;
    m.add_class::<PyIsoradialGraph>()?;
    m.add_function(wrap_pyfunction!(green, m)?)?;
    m.add_function(wrap_pyfunction!(martin, m)?)?;
    m.add_function(wrap_pyfunction!(martin_audit, m)?)?;
    m.add_function(wrap_pyfunction!(boundary, m)?)?;
    m.add_function(wrap_pyfunction!(certify_series, m)?)?;
    Ok(())
}
