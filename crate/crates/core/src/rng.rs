//! Seeded generators. Every random stage takes an explicit seed.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::geom::{Point2, Polygon};

pub type Rng = ChaCha20Rng;

/// Generator for `(seed, stream)`; distinct streams are independent.
pub fn seeded(seed: u64, stream: u64) -> Rng {
    let mut r = ChaCha20Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Uniform point of `poly` by rejection from its bounding box.
pub fn uniform_in_polygon(poly: &Polygon, rng: &mut Rng) -> Point2 {
    let v = poly.vertices();
    let (lo, hi) = v.iter().fold((v[0], v[0]), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
    if poly.volume() <= 0.0 {
        return lo + (hi - lo) * rng.random::<f64>();
    }
    loop {
        let p = Point2::new(lo.x + (hi.x - lo.x) * rng.random::<f64>(), lo.y + (hi.y - lo.y) * rng.random::<f64>());
        if poly.contains_point(&p, 0.0) {
            return p;
        }
    }
}
