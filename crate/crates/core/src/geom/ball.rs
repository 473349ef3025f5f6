//! Minimum enclosing ball (Welzl, move-to-front with bounded support recursion).

use nalgebra::{DMatrix, DVector, SVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug)]
pub struct Ball<const D: usize> {
    pub center: SVector<f64, D>,
    pub radius: f64,
}

impl<const D: usize> Ball<D> {
    fn contains(&self, p: &SVector<f64, D>) -> bool {
        self.radius >= 0.0 && (p - self.center).norm() <= self.radius * (1.0 + 1e-12) + 1e-15
    }
}

fn circumball<const D: usize>(support: &[SVector<f64, D>]) -> Ball<D> {
    match support.len() {
        0 => Ball { center: SVector::zeros(), radius: -1.0 },
        1 => Ball { center: support[0], radius: 0.0 },
        k => {
            let p0 = support[0];
            let q: Vec<SVector<f64, D>> = support[1..].iter().map(|p| p - p0).collect();
            let m = k - 1;
            let g = DMatrix::from_fn(m, m, |i, j| q[i].dot(&q[j]));
            let rhs = DVector::from_fn(m, |i, _| 0.5 * q[i].norm_squared());
            if let Some(lambda) = g.clone().lu().solve(&rhs) {
                let mut c = SVector::<f64, D>::zeros();
                for i in 0..m {
                    c += q[i] * lambda[i];
                }
                let center = p0 + c;
                let radius = support.iter().map(|p| (p - center).norm()).fold(0.0, f64::max);
                if radius.is_finite() {
                    return Ball { center, radius };
                }
            }
            // affinely dependent support: fall back to the widest pair
            let mut best = Ball { center: p0, radius: 0.0 };
            for i in 0..k {
                for j in i + 1..k {
                    let r = 0.5 * (support[i] - support[j]).norm();
                    if r > best.radius {
                        best = Ball { center: 0.5 * (support[i] + support[j]), radius: r };
                    }
                }
            }
            best
        }
    }
}

fn with_support<const D: usize>(pts: &[SVector<f64, D>], support: &mut Vec<SVector<f64, D>>) -> Ball<D> {
    let mut ball = circumball(support);
    if support.len() == D + 1 {
        return ball;
    }
    for i in 0..pts.len() {
        if !ball.contains(&pts[i]) {
            support.push(pts[i]);
            ball = with_support(&pts[..i], support);
            support.pop();
        }
    }
    ball
}

/// Smallest ball containing all points.
pub fn min_enclosing_ball<const D: usize>(points: &[SVector<f64, D>]) -> Ball<D> {
    let mut pts = points.to_vec();
    pts.shuffle(&mut ChaCha8Rng::seed_from_u64(0x5eed));
    let mut support = Vec::with_capacity(D + 1);
    with_support(&pts, &mut support)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector2;

    #[test]
    fn square_corners() {
        let pts = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0), (0.2, 0.3)].map(|(a, b)| Vector2::new(a, b));
        let b = min_enclosing_ball(&pts);
        assert!((b.radius - 2f64.sqrt()).abs() < 1e-12);
        assert!(b.center.norm() < 1e-12);
    }

    #[test]
    fn obtuse_triangle_uses_long_side() {
        let pts = [Vector2::new(0.0, 0.0), Vector2::new(4.0, 0.0), Vector2::new(2.0, 0.5)];
        let b = min_enclosing_ball(&pts);
        assert!((b.radius - 2.0).abs() < 1e-12);
    }
}
