//! Maximum-volume inscribed ellipsoid by a log-barrier Newton method.

use nalgebra::{DMatrix, DVector, SMatrix, SVector};

use super::{ConvexPolytope, GeomError};

/// `{x : (x − center)ᵀ A (x − center) <= 1}`.
#[derive(Clone, Copy, Debug)]
pub struct Ellipsoid<const D: usize = 2> {
    pub center: SVector<f64, D>,
    pub shape: SMatrix<f64, D, D>,
}

fn dynamic<const D: usize>(m: &SMatrix<f64, D, D>) -> DMatrix<f64> {
    DMatrix::from_fn(D, D, |i, j| m[(i, j)])
}

fn inverse<const D: usize>(m: &SMatrix<f64, D, D>) -> Option<SMatrix<f64, D, D>> {
    let inv = dynamic(m).try_inverse()?;
    Some(SMatrix::from_fn(|i, j| inv[(i, j)]))
}

impl<const D: usize> Ellipsoid<D> {
    pub fn new(center: SVector<f64, D>, shape: SMatrix<f64, D, D>) -> Result<Self, GeomError> {
        let sym = (shape + shape.transpose()) * 0.5;
        let min_eig = dynamic(&sym).symmetric_eigenvalues().min();
        if !(min_eig > 0.0) {
            return Err(GeomError::DegenerateBody);
        }
        Ok(Self { center, shape: sym })
    }

    /// `|x − center|_A`.
    pub fn norm(&self, x: &SVector<f64, D>) -> f64 {
        let d = x - self.center;
        d.dot(&(self.shape * d)).max(0.0).sqrt()
    }

    pub fn trace(&self) -> f64 {
        self.shape.trace()
    }

    /// The map `u ↦ center + B u` with `B = A^{-1/2}` sending the unit ball onto the ellipsoid.
    pub fn half_axes(&self) -> SMatrix<f64, D, D> {
        let eig = dynamic(&self.shape).symmetric_eigen();
        let mut inv_sqrt = DMatrix::zeros(D, D);
        for k in 0..D {
            inv_sqrt[(k, k)] = 1.0 / eig.eigenvalues[k].sqrt();
        }
        let m = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose();
        SMatrix::from_fn(|i, j| m[(i, j)])
    }

    pub fn volume(&self) -> f64 {
        let unit = match D {
            1 => 2.0,
            2 => std::f64::consts::PI,
            3 => 4.0 / 3.0 * std::f64::consts::PI,
            _ => panic!("unsupported dimension"),
        };
        unit / dynamic(&self.shape).determinant().sqrt()
    }

    pub fn contains_point(&self, x: &SVector<f64, D>, slack: f64) -> bool {
        self.norm(x) <= 1.0 + slack
    }

    /// Support value `max_{x∈E} n·x`.
    pub fn support(&self, n: &SVector<f64, D>) -> f64 {
        n.dot(&self.center) + (self.half_axes() * n).norm()
    }

    /// Boundary sample `center + B (cos θ, sin θ)` (planar case).
    pub fn boundary_point(&self, theta: f64) -> SVector<f64, D> {
        let mut u = SVector::<f64, D>::zeros();
        u[0] = theta.cos();
        if D > 1 {
            u[1] = theta.sin();
        }
        self.center + self.half_axes() * u
    }
}

impl<const D: usize> ConvexPolytope<D> {
    /// Maximum-volume inscribed ellipsoid; relative volume accuracy well below 1e-6.
    pub fn john_ellipsoid(&self) -> Result<Ellipsoid<D>, GeomError> {
        let rp = self.radii();
        let scale = self.diameter_scale().max(1e-300);
        if self.is_degenerate() || rp.inner <= 1e-10 * scale {
            return Err(GeomError::DegenerateBody);
        }
        // normalize to unit size for conditioning
        let c0 = rp.inner_center;
        let s = rp.outer;
        let normals: Vec<SVector<f64, D>> = self.halfspaces().iter().map(|h| h.normal).collect();
        let offsets: Vec<f64> = self.halfspaces().iter().map(|h| (h.offset - h.normal.dot(&c0)) / s).collect();
        let m = normals.len();
        // symmetric basis
        let mut basis: Vec<SMatrix<f64, D, D>> = Vec::new();
        for i in 0..D {
            for j in i..D {
                let mut e = SMatrix::<f64, D, D>::zeros();
                e[(i, j)] = 1.0;
                e[(j, i)] = 1.0;
                basis.push(e);
            }
        }
        let p = basis.len();
        let nv = p + D;
        // M_i θ = B n_i
        let mats: Vec<DMatrix<f64>> = normals
            .iter()
            .map(|n| {
                let mut mm = DMatrix::zeros(D, p);
                for (k, e) in basis.iter().enumerate() {
                    let col = e * n;
                    for r in 0..D {
                        mm[(r, k)] = col[r];
                    }
                }
                mm
            })
            .collect();
        let build_b = |z: &DVector<f64>| -> SMatrix<f64, D, D> {
            let mut b = SMatrix::<f64, D, D>::zeros();
            for (k, e) in basis.iter().enumerate() {
                b += e * z[k];
            }
            b
        };
        let slacks = |z: &DVector<f64>| -> Option<Vec<f64>> {
            let b = build_b(z);
            dynamic(&b).cholesky()?;
            let mut d = SVector::<f64, D>::zeros();
            for k in 0..D {
                d[k] = z[p + k];
            }
            let out: Vec<f64> = (0..m).map(|i| offsets[i] - normals[i].dot(&d) - (b * normals[i]).norm()).collect();
            if out.iter().all(|v| *v > 0.0) {
                Some(out)
            } else {
                None
            }
        };
        let objective = |z: &DVector<f64>, tau: f64| -> Option<f64> {
            let sl = slacks(z)?;
            let det = dynamic(&build_b(z)).determinant();
            Some(-tau * det.ln() - sl.iter().map(|v| v.ln()).sum::<f64>())
        };
        let mut z = DVector::zeros(nv);
        let start = 0.5 * rp.inner / s;
        for (k, e) in basis.iter().enumerate() {
            if e.iter().filter(|v| **v != 0.0).count() == 1 {
                z[k] = start;
            }
        }
        let mut tau = 1.0;
        for _outer in 0..60 {
            for _newton in 0..100 {
                let b = build_b(&z);
                let binv = inverse(&b).ok_or(GeomError::DegenerateBody)?;
                let sl = slacks(&z).ok_or(GeomError::DegenerateBody)?;
                let mut g = DVector::zeros(nv);
                let mut h = DMatrix::zeros(nv, nv);
                for k in 0..p {
                    g[k] -= tau * (binv * basis[k]).trace();
                    for l in 0..p {
                        h[(k, l)] += tau * (binv * basis[k] * binv * basis[l]).trace();
                    }
                }
                for i in 0..m {
                    let u = &mats[i] * z.rows(0, p);
                    let un = u.norm();
                    let mut grad = DVector::zeros(nv);
                    let gu = mats[i].transpose() * &u / un;
                    for k in 0..p {
                        grad[k] = gu[k];
                    }
                    for k in 0..D {
                        grad[p + k] = normals[i][k];
                    }
                    let proj = DMatrix::identity(D, D) / un - &u * u.transpose() / (un * un * un);
                    let hn = mats[i].transpose() * proj * &mats[i];
                    let si = sl[i];
                    g += &grad / si;
                    h += &grad * grad.transpose() / (si * si);
                    for k in 0..p {
                        for l in 0..p {
                            h[(k, l)] += hn[(k, l)] / si;
                        }
                    }
                }
                let step = match h.clone().cholesky() {
                    Some(ch) => -ch.solve(&g),
                    None => -h.lu().solve(&g).ok_or(GeomError::DegenerateBody)?,
                };
                let decrement = -g.dot(&step);
                if decrement < 1e-14 {
                    break;
                }
                let f0 = objective(&z, tau).ok_or(GeomError::DegenerateBody)?;
                let mut a = 1.0;
                loop {
                    let zn = &z + &step * a;
                    if let Some(f1) = objective(&zn, tau) {
                        if f1 <= f0 - 0.25 * a * decrement {
                            z = zn;
                            break;
                        }
                    }
                    a *= 0.5;
                    if a < 1e-14 {
                        break;
                    }
                }
                if a < 1e-14 {
                    break;
                }
            }
            if (m as f64) / tau < 1e-10 {
                break;
            }
            tau *= 8.0;
        }
        let b = build_b(&z) * s;
        let mut d = c0;
        for k in 0..D {
            d[k] += z[p + k] * s;
        }
        let binv = inverse(&b).ok_or(GeomError::DegenerateBody)?;
        Ellipsoid::new(d, binv * binv)
    }

    /// Sandwich check `E ⊂ K ⊂ n·E` with slack.
    pub fn john_sandwich(&self, e: &Ellipsoid<D>, slack: f64) -> bool {
        let inside = self.halfspaces().iter().all(|h| e.support(&h.normal) <= h.offset + slack);
        let outer = self.vertices().iter().all(|v| e.norm(v) <= D as f64 * (1.0 + slack));
        inside && outer
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point2;

    #[test]
    fn square_gives_unit_disk() {
        let k = ConvexPolytope::rectangle(Point2::new(-1.0, -1.0), Point2::new(1.0, 1.0));
        let e = k.john_ellipsoid().unwrap();
        assert!((e.shape - SMatrix::<f64, 2, 2>::identity()).norm() < 1e-7);
        assert!(e.center.norm() < 1e-8);
    }

    #[test]
    fn rectangle_axes() {
        let k = ConvexPolytope::rectangle(Point2::new(-2.0, -1.0), Point2::new(2.0, 1.0));
        let e = k.john_ellipsoid().unwrap();
        assert!((e.shape[(0, 0)] - 0.25).abs() < 1e-7);
        assert!((e.shape[(1, 1)] - 1.0).abs() < 1e-7);
        assert!(e.shape[(0, 1)].abs() < 1e-7);
    }
}
