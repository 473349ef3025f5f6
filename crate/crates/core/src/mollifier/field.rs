use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::laplacian::delta_r;
use super::{KernelSpec, MollifierError};
use crate::geom::{Point2, Polygon};
use crate::ot::PiecewiseAffineConvex;

/// `Δ_rψ` at the midpoints of a regular grid over the bounding box of a region.
///
/// Midpoints outside the region hold `NaN` and are ignored by the integrals.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LaplacianField {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub step: f64,
    pub r: f64,
    pub nx: usize,
    pub ny: usize,
    /// Row-major, `values[j * nx + i]` at `lo + step·(i + ½, j + ½)`.
    pub values: Vec<f64>,
}

impl LaplacianField {
    pub fn point(&self, i: usize, j: usize) -> Point2 {
        Point2::new(self.lo[0] + self.step * (i as f64 + 0.5), self.lo[1] + self.step * (j as f64 + 0.5))
    }

    /// `(point, value)` over the midpoints inside the region.
    pub fn samples(&self) -> impl Iterator<Item = (Point2, f64)> + '_ {
        (0..self.ny).flat_map(move |j| (0..self.nx).map(move |i| (i, j))).filter_map(move |(i, j)| {
            let v = self.values[j * self.nx + i];
            (!v.is_nan()).then(|| (self.point(i, j), v))
        })
    }

    /// Midpoint rule for `∫ f(Δ_rψ)` over the region.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let h2 = self.step * self.step;
        self.values.iter().filter(|v| !v.is_nan()).map(|&v| f(v)).sum::<f64>() * h2
    }

    pub fn l1_norm(&self) -> f64 {
        self.integrate(f64::abs)
    }

    /// `∫ Δ_rψ log(2 + Δ_rψ)`.
    pub fn llogl_norm(&self) -> f64 {
        self.integrate(|v| v * (2.0 + v).ln())
    }

    /// `∫ (Δ_rψ)^p`.
    pub fn lp_integral(&self, p: f64) -> f64 {
        self.integrate(|v| v.max(0.0).powf(p))
    }

    /// Area of the midpoint cells inside the region.
    pub fn area(&self) -> f64 {
        self.integrate(|_| 1.0)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().filter(|v| !v.is_nan()).fold(f64::NEG_INFINITY, |a, &b| a.max(b))
    }

    /// `x,y,value` rows for the midpoints inside the region.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["x", "y", "value"]).expect("in-memory writer");
        for (p, v) in self.samples() {
            w.serialize((p.x, p.y, v)).expect("in-memory writer");
        }
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8")
    }

    /// Little-endian binary grid: `lo.x lo.y hi.x hi.y step r` as f64, `nx ny` as u64, then the values.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + 8 * self.values.len());
        for v in [self.lo[0], self.lo[1], self.hi[0], self.hi[1], self.step, self.r] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(self.nx as u64).to_le_bytes());
        out.extend_from_slice(&(self.ny as u64).to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<Self> {
        let f = |k: usize| bytes.get(8 * k..8 * k + 8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")));
        let u =
            |k: usize| bytes.get(8 * k..8 * k + 8).map(|b| u64::from_le_bytes(b.try_into().expect("8 bytes")) as usize);
        let (nx, ny) = (u(6)?, u(7)?);
        if bytes.len() != 64 + 8 * nx * ny {
            return None;
        }
        Some(LaplacianField {
            lo: [f(0)?, f(1)?],
            hi: [f(2)?, f(3)?],
            step: f(4)?,
            r: f(5)?,
            nx,
            ny,
            values: (0..nx * ny).map(|k| f(8 + k)).collect::<Option<Vec<f64>>>()?,
        })
    }
}

/// `Δ_rψ` on the midpoints of a grid of spacing `grid_step` over `region`.
pub fn laplacian_field(
    psi: &PiecewiseAffineConvex,
    region: &Polygon,
    kernel: &KernelSpec,
    grid_step: f64,
) -> Result<LaplacianField, MollifierError> {
    if !(grid_step > 0.0) {
        return Err(MollifierError::InvalidGrid(format!("step {grid_step}")));
    }
    let v = region.vertices();
    let (lo, hi) = v.iter().fold((v[0], v[0]), |(a, b), p| (a.inf(p), b.sup(p)));
    let nx = (((hi.x - lo.x) / grid_step).round() as usize).max(1);
    let ny = (((hi.y - lo.y) / grid_step).round() as usize).max(1);
    let step = ((hi.x - lo.x) / nx as f64).max((hi.y - lo.y) / ny as f64);
    let mut field =
        LaplacianField { lo: [lo.x, lo.y], hi: [hi.x, hi.y], step, r: kernel.r, nx, ny, values: Vec::new() };
    let pts: Vec<Point2> = (0..nx * ny).map(|k| field.point(k % nx, k / nx)).collect();
    field.values = pts
        .par_iter()
        .map(|x| if region.contains_point(x, 0.0) { delta_r(psi, x, kernel) } else { Ok(f64::NAN) })
        .collect::<Result<Vec<f64>, MollifierError>>()?;
    Ok(field)
}

/// Field whose L¹ norm changes by less than 1% when the step is halved (starting from `initial_step`).
pub fn stable_laplacian_field(
    psi: &PiecewiseAffineConvex,
    region: &Polygon,
    kernel: &KernelSpec,
    initial_step: f64,
    min_step: f64,
) -> Result<LaplacianField, MollifierError> {
    let mut step = initial_step;
    let mut prev = laplacian_field(psi, region, kernel, step)?;
    loop {
        step *= 0.5;
        let next = laplacian_field(psi, region, kernel, step)?;
        let (a, b) = (prev.l1_norm(), next.l1_norm());
        if (a - b).abs() <= 0.01 * b.abs().max(1e-300) || step < min_step {
            return Ok(next);
        }
        prev = next;
    }
}
