//! Python bindings for `kantoreg`.

use kantoreg::geom::Polygon as CorePolygon;
use kantoreg::measures::{discretize, DensitySpec, DiscreteMeasure as CoreMeasure, Seeding};
use kantoreg::mollifier::{delta_r, KernelSpec};
use kantoreg::ot::{build_potential, solve_exact, Duals, PiecewiseAffineConvex};
use kantoreg::sections::{default_subgradient, section};
use kantoreg::Point2;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn pt(p: (f64, f64)) -> Point2 {
    Point2::new(p.0, p.1)
}

fn tup(p: &Point2) -> (f64, f64) {
    (p.x, p.y)
}

/// Convex polygon in the plane.
#[pyclass(name = "Polygon", module = "kantoreg_py", frozen)]
#[derive(Clone)]
pub struct Polygon(pub CorePolygon);

#[pymethods]
impl Polygon {
    /// Convex hull of the given points; raises when it has no interior.
    #[new]
    fn new(points: Vec<(f64, f64)>) -> PyResult<Self> {
        let pts: Vec<Point2> = points.into_iter().map(pt).collect();
        let k = CorePolygon::from_points(&pts).map_err(err)?;
        if k.is_degenerate() {
            return Err(PyValueError::new_err("points span no area"));
        }
        Ok(Polygon(k))
    }

    #[staticmethod]
    fn rectangle(lo: (f64, f64), hi: (f64, f64)) -> Self {
        Polygon(CorePolygon::rectangle(pt(lo), pt(hi)))
    }

    fn vertices(&self) -> Vec<(f64, f64)> {
        self.0.vertices().iter().map(tup).collect()
    }

    fn volume(&self) -> f64 {
        self.0.volume()
    }

    fn inner_radius(&self) -> f64 {
        self.0.inner_radius()
    }

    fn outer_radius(&self) -> f64 {
        self.0.outer_radius()
    }

    #[pyo3(signature = (x, slack = 0.0))]
    fn contains_point(&self, x: (f64, f64), slack: f64) -> bool {
        self.0.contains_point(&pt(x), slack)
    }

    fn polar_body(&self, x0: (f64, f64)) -> PyResult<Self> {
        self.0.polar_body(&pt(x0)).map(Polygon).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Polygon({} vertices, area {:.6})", self.0.vertices().len(), self.0.volume())
    }
}

/// Finitely supported probability measure.
#[pyclass(name = "DiscreteMeasure", module = "kantoreg_py", frozen)]
#[derive(Clone)]
pub struct DiscreteMeasure(pub CoreMeasure);

#[pymethods]
impl DiscreteMeasure {
    /// Weights are rescaled to sum to one.
    #[new]
    fn new(points: Vec<(f64, f64)>, weights: Vec<f64>, delta: f64) -> PyResult<Self> {
        CoreMeasure::normalized(points.into_iter().map(pt).collect(), weights, delta).map(DiscreteMeasure).map_err(err)
    }

    /// Grid discretization of the uniform density on `domain`, or jittered when `seed` is given.
    #[staticmethod]
    #[pyo3(signature = (domain, delta, seed = None))]
    fn uniform(domain: &Polygon, delta: f64, seed: Option<u64>) -> PyResult<Self> {
        let seeding = seed.map_or(Seeding::Grid, |seed| Seeding::JitteredGrid { seed });
        discretize(&DensitySpec::uniform(domain.0.clone()), delta, seeding).map(DiscreteMeasure).map_err(err)
    }

    fn points(&self) -> Vec<(f64, f64)> {
        self.0.points().iter().map(tup).collect()
    }

    fn weights(&self) -> Vec<f64> {
        self.0.weights().to_vec()
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.0.delta()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

/// Optimal plan for the quadratic cost with its Kantorovich duals.
#[pyclass(name = "Transport", module = "kantoreg_py", frozen, get_all)]
pub struct Transport {
    cost: f64,
    gap: f64,
    entries: Vec<(usize, usize, f64)>,
    u: Vec<f64>,
    phi: Vec<f64>,
}

/// Maximum of affine functions restricted to a window.
#[pyclass(name = "Potential", module = "kantoreg_py", frozen)]
pub struct Potential(pub PiecewiseAffineConvex);

#[pymethods]
impl Potential {
    #[new]
    fn new(slopes: Vec<(f64, f64)>, intercepts: Vec<f64>, window: &Polygon) -> PyResult<Self> {
        if slopes.len() != intercepts.len() || slopes.is_empty() {
            return Err(PyValueError::new_err("need as many intercepts as slopes, at least one"));
        }
        Ok(Potential(PiecewiseAffineConvex::new(slopes.into_iter().map(pt).collect(), intercepts, window.0.clone())))
    }

    fn __call__(&self, x: (f64, f64)) -> f64 {
        self.0.eval(&pt(x))
    }

    fn subgradient(&self, x: (f64, f64)) -> (f64, f64) {
        tup(&default_subgradient(&self.0, &pt(x)))
    }

    fn slopes(&self) -> Vec<(f64, f64)> {
        self.0.slopes().iter().map(tup).collect()
    }

    fn intercepts(&self) -> Vec<f64> {
        self.0.intercepts().to_vec()
    }

    /// `{y : ψ(y) < ψ(x) + p·(y − x) + t}`, with `p` the default subgradient when omitted.
    #[pyo3(signature = (x, t, p = None))]
    fn section(&self, x: (f64, f64), t: f64, p: Option<(f64, f64)>) -> PyResult<Polygon> {
        let x = pt(x);
        let p = p.map_or_else(|| default_subgradient(&self.0, &x), pt);
        section(&self.0, x, p, t).map(|s| Polygon(s.body)).map_err(err)
    }

    /// Mollified Laplacian at `x` with the `ball` or `sphere` kernel of radius `r`.
    #[pyo3(signature = (x, r, kernel = "ball"))]
    fn delta_r(&self, x: (f64, f64), r: f64, kernel: &str) -> PyResult<f64> {
        let k = match kernel {
            "ball" => KernelSpec::ball(r),
            "sphere" => KernelSpec::sphere(r),
            other => return Err(PyValueError::new_err(format!("unknown kernel {other:?}"))),
        }
        .map_err(err)?;
        delta_r(&self.0, &pt(x), &k).map_err(err)
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

/// Exact discrete transport from `mu` to `nu`.
#[pyfunction]
fn solve(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> PyResult<Transport> {
    let (plan, duals) = solve_exact(&mu.0, &nu.0).map_err(err)?;
    Ok(Transport { cost: plan.cost, gap: plan.gap, entries: plan.entries, u: duals.u, phi: duals.phi })
}

/// Convex potential of a solved transport over `omega`.
#[pyfunction]
fn potential(transport: &Transport, nu: &DiscreteMeasure, omega: &Polygon) -> Potential {
    let duals = Duals { u: transport.u.clone(), phi: transport.phi.clone() };
    Potential(build_potential(&duals, &nu.0, &omega.0))
}

#[pymodule]
fn kantoreg_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Polygon>()?;
    m.add_class::<DiscreteMeasure>()?;
    m.add_class::<Transport>()?;
    m.add_class::<Potential>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(potential, m)?)?;
    Ok(())
}
