use super::{Contour, GeometryError, Point2};
use crate::wrench::ContactPair;
use crate::Scalar;

/// Contacts closer than this along a chord are treated as a tangent touch (m).
pub const DEFAULT_MIN_SEPARATION: f64 = 0.005;

struct Hit<T> {
    t: T,
    normal: Point2<T>,
}

/// Intersects the segment `p_l -> p_r` with `contour` and returns the outermost
/// crossings with their inward edge normals.
pub fn contact_from_chord<T: Scalar>(
    contour: &Contour<T>,
    p_l: Point2<T>,
    p_r: Point2<T>,
    min_separation: T,
) -> Result<ContactPair<T>, GeometryError> {
    let d = p_r - p_l;
    let eps = T::epsilon() * T::lit(64.0);
    let mut hits: Vec<Hit<T>> = Vec::new();
    for (a, b) in contour.edges() {
        let e = b - a;
        let denom = d.cross(e);
        if denom.abs() <= eps * d.norm() * e.norm() {
            continue;
        }
        let ap = a - p_l;
        let t = ap.cross(e) / denom;
        let s = ap.cross(d) / denom;
        if t < -eps || t > T::one() + eps || s < -eps || s > T::one() + eps {
            continue;
        }
        hits.push(Hit {
            t,
            normal: e.perp().normalized(),
        });
    }
    if hits.is_empty() {
        return Err(GeometryError::NoIntersection);
    }
    let t_min = hits.iter().map(|h| h.t).fold(T::infinity(), T::min);
    let t_max = hits.iter().map(|h| h.t).fold(T::neg_infinity(), T::max);

    // A chord through a vertex crosses two edges at once; use their mean normal.
    let normal_at = |t0: T| {
        let sum = hits
            .iter()
            .filter(|h| (h.t - t0).abs() <= eps)
            .fold(Point2::new(T::zero(), T::zero()), |s, h| s + h.normal);
        sum.normalized()
    };
    let c_l = p_l + d * t_min;
    let c_r = p_l + d * t_max;
    let separation = c_l.distance(c_r);
    if separation < min_separation {
        return Err(GeometryError::TangentChord {
            separation: separation.to_f64_lossy(),
        });
    }
    Ok(ContactPair {
        c_l,
        c_r,
        n_l: normal_at(t_min),
        n_r: normal_at(t_max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Aabb2;
    use proptest::prelude::*;

    fn p(y: f64, z: f64) -> Point2<f64> {
        Point2::new(y, z)
    }

    fn circle(r: f64, n: usize) -> Contour<f64> {
        let v = (0..n)
            .map(|k| {
                let a = std::f64::consts::TAU * (k as f64 + 0.5) / n as f64;
                p(r * a.cos(), r * a.sin())
            })
            .collect();
        Contour::new(v).unwrap()
    }

    #[test]
    fn square_chord() {
        let sq = Contour::rectangle(&Aabb2::new(p(-0.5, -0.5), p(0.5, 0.5)));
        let c = contact_from_chord(&sq, p(-1.0, 0.0), p(1.0, 0.0), 0.005).unwrap();
        assert_eq!(c.c_l, p(-0.5, 0.0));
        assert_eq!(c.c_r, p(0.5, 0.0));
        assert_eq!(c.n_l, p(1.0, 0.0));
        assert_eq!(c.n_r, p(-1.0, 0.0));
    }

    #[test]
    fn circle_chord_matches_analytic_intersection() {
        let c = contact_from_chord(&circle(0.2, 4096), p(-1.0, 0.1), p(1.0, 0.1), 0.005).unwrap();
        let y = (0.04f64 - 0.01).sqrt();
        // Polygon sagitta for 4096 sides is below 1e-7 m.
        assert!((c.c_l.y + y).abs() < 1e-6 && (c.c_r.y - y).abs() < 1e-6);
        let radial_l = (-c.c_l).normalized();
        let radial_r = (-c.c_r).normalized();
        assert!(c.n_l.dot(radial_l) > 1.0 - 1e-6);
        assert!(c.n_r.dot(radial_r) > 1.0 - 1e-6);
    }

    #[test]
    fn chord_above_misses() {
        let sq = Contour::rectangle(&Aabb2::new(p(-0.5, -0.5), p(0.5, 0.5)));
        let r = contact_from_chord(&sq, p(-1.0, 0.7), p(1.0, 0.7), 0.005);
        assert_eq!(r.unwrap_err(), GeometryError::NoIntersection);
    }

    #[test]
    fn grazing_a_corner_is_tangent() {
        let tri = Contour::new(vec![p(-0.5, 0.0), p(0.5, 0.0), p(0.0, 0.5)]).unwrap();
        let r = contact_from_chord(&tri, p(-1.0, 0.5), p(1.0, 0.5), 0.005);
        assert!(matches!(r, Err(GeometryError::TangentChord { .. })));
    }

    #[test]
    fn vertex_hit_averages_normals() {
        let diamond = Contour::new(vec![p(0.0, -1.0), p(1.0, 0.0), p(0.0, 1.0), p(-1.0, 0.0)]).unwrap();
        let c = contact_from_chord(&diamond, p(-2.0, 0.0), p(2.0, 0.0), 0.005).unwrap();
        assert!((c.n_l.y - 1.0).abs() < 1e-12 && c.n_l.z.abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn normals_are_unit_and_inward(z in -0.19f64..0.19, n in 5usize..64) {
            let c = contact_from_chord(&circle(0.2, n), p(-1.0, z), p(1.0, z), 0.005);
            if let Ok(c) = c {
                prop_assert!((c.n_l.norm() - 1.0).abs() <= 1e-12);
                prop_assert!((c.n_r.norm() - 1.0).abs() <= 1e-12);
                prop_assert!(c.n_l.dot(c.c_r - c.c_l) >= 0.0);
                prop_assert!(c.n_r.dot(c.c_l - c.c_r) >= 0.0);
                prop_assert!(c.c_l.y < c.c_r.y);
            }
        }
    }
}
