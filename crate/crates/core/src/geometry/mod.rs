//! Planar point-cloud geometry in the shelf's yz plane: bounding boxes, alpha
//! shapes and chord/contour contacts.

mod alpha;
mod chord;
pub(crate) mod delaunay;

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Scalar;

pub use alpha::{alpha_shape, default_alpha, AlphaComplex};
pub use chord::{contact_from_chord, DEFAULT_MIN_SEPARATION};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("alpha too small to keep any triangle; smallest working alpha is {min_alpha:e}")]
    NoBoundary { min_alpha: f64 },
    #[error("chord does not intersect the contour")]
    NoIntersection,
    #[error("chord contacts are only {separation:e} m apart")]
    TangentChord { separation: f64 },
}

/// A point in the yz plane (meters; +y right, +z up).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point2<T> {
    pub y: T,
    pub z: T,
}

impl<T: Scalar> Point2<T> {
    #[inline]
    pub const fn new(y: T, z: T) -> Self {
        Self { y, z }
    }

    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.y * o.y + self.z * o.z
    }

    /// z-component of the 3D cross product of `(y, z)` vectors.
    #[inline]
    pub fn cross(self, o: Self) -> T {
        self.y * o.z - self.z * o.y
    }

    #[inline]
    pub fn norm(self) -> T {
        self.y.hypot(self.z)
    }

    #[inline]
    pub fn distance(self, o: Self) -> T {
        (self - o).norm()
    }

    /// Counterclockwise perpendicular.
    #[inline]
    pub fn perp(self) -> Self {
        Self::new(-self.z, self.y)
    }

    pub fn normalized(self) -> Self {
        let n = self.norm();
        Self::new(self.y / n, self.z / n)
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.y.is_finite() && self.z.is_finite()
    }

    pub fn cast<U: Scalar>(self) -> Point2<U> {
        Point2::new(U::lit(self.y.to_f64_lossy()), U::lit(self.z.to_f64_lossy()))
    }
}

impl<T: Scalar> Add for Point2<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.y + o.y, self.z + o.z)
    }
}

impl<T: Scalar> Sub for Point2<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.y - o.y, self.z - o.z)
    }
}

impl<T: Scalar> Mul<T> for Point2<T> {
    type Output = Self;
    #[inline]
    fn mul(self, k: T) -> Self {
        Self::new(self.y * k, self.z * k)
    }
}

impl<T: Scalar> Neg for Point2<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.y, -self.z)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CloudLabel {
    Target,
    Adjacent,
    Shelf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointCloud2<T> {
    pub points: Vec<Point2<T>>,
    pub label: CloudLabel,
}

impl<T: Scalar> PointCloud2<T> {
    pub fn new(points: Vec<Point2<T>>, label: CloudLabel) -> Self {
        Self { points, label }
    }

    pub fn target(points: Vec<Point2<T>>) -> Self {
        Self::new(points, CloudLabel::Target)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn translated(&self, offset: Point2<T>) -> Self {
        Self::new(self.points.iter().map(|&p| p + offset).collect(), self.label)
    }
}

/// Axis-aligned box in the yz plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb2<T> {
    pub min: Point2<T>,
    pub max: Point2<T>,
}

impl<T: Scalar> Aabb2<T> {
    pub fn new(min: Point2<T>, max: Point2<T>) -> Self {
        debug_assert!(min.y <= max.y && min.z <= max.z);
        Self { min, max }
    }

    pub fn from_center(center: Point2<T>, half_y: T, half_z: T) -> Self {
        Self::new(
            Point2::new(center.y - half_y, center.z - half_z),
            Point2::new(center.y + half_y, center.z + half_z),
        )
    }

    #[inline]
    pub fn width(&self) -> T {
        self.max.y - self.min.y
    }

    #[inline]
    pub fn height(&self) -> T {
        self.max.z - self.min.z
    }

    #[inline]
    pub fn center(&self) -> Point2<T> {
        Point2::new(
            (self.min.y + self.max.y) * T::lit(0.5),
            (self.min.z + self.max.z) * T::lit(0.5),
        )
    }

    #[inline]
    pub fn contains(&self, p: Point2<T>) -> bool {
        p.y >= self.min.y && p.y <= self.max.y && p.z >= self.min.z && p.z <= self.max.z
    }

    /// Overlap depth along y (positive when the y-intervals overlap).
    #[inline]
    pub fn overlap_y(&self, o: &Self) -> T {
        self.max.y.min(o.max.y) - self.min.y.max(o.min.y)
    }

    /// Overlap depth along z (positive when the z-intervals overlap).
    #[inline]
    pub fn overlap_z(&self, o: &Self) -> T {
        self.max.z.min(o.max.z) - self.min.z.max(o.min.z)
    }

    /// Penetration depth of two boxes; zero or negative when they are disjoint.
    #[inline]
    pub fn penetration(&self, o: &Self) -> T {
        self.overlap_y(o).min(self.overlap_z(o))
    }

    pub fn translated(&self, dy: T, dz: T) -> Self {
        let d = Point2::new(dy, dz);
        Self::new(self.min + d, self.max + d)
    }

    /// Distance from `p` to the box (zero inside).
    pub fn distance(&self, p: Point2<T>) -> T {
        let dy = (self.min.y - p.y).max(p.y - self.max.y).max(T::zero());
        let dz = (self.min.z - p.z).max(p.z - self.max.z).max(T::zero());
        dy.hypot(dz)
    }
}

/// Tightest box around a cloud.
pub fn compute_aabb<T: Scalar>(cloud: &PointCloud2<T>) -> Result<Aabb2<T>, GeometryError> {
    aabb_of(&cloud.points)
}

pub(crate) fn aabb_of<T: Scalar>(points: &[Point2<T>]) -> Result<Aabb2<T>, GeometryError> {
    let first = *points.first().ok_or(GeometryError::EmptyCloud)?;
    let (min, max) = points.iter().fold((first, first), |(lo, hi), p| {
        (
            Point2::new(lo.y.min(p.y), lo.z.min(p.z)),
            Point2::new(hi.y.max(p.y), hi.z.max(p.z)),
        )
    });
    Ok(Aabb2 { min, max })
}

/// Closed simple polygon, counterclockwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contour<T> {
    vertices: Vec<Point2<T>>,
}

impl<T: Scalar> Contour<T> {
    /// Wraps a vertex loop, reversing it if it is clockwise.
    pub fn new(mut vertices: Vec<Point2<T>>) -> Result<Self, GeometryError> {
        if vertices.len() < 3 {
            return Err(GeometryError::DegenerateInput(format!(
                "contour needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        let area = signed_area(&vertices);
        if area == T::zero() {
            return Err(GeometryError::DegenerateInput("contour has zero area".into()));
        }
        if area < T::zero() {
            vertices.reverse();
        }
        Ok(Self { vertices })
    }

    /// Axis-aligned rectangle with the given box.
    pub fn rectangle(b: &Aabb2<T>) -> Self {
        Self {
            vertices: vec![
                b.min,
                Point2::new(b.max.y, b.min.z),
                b.max,
                Point2::new(b.min.y, b.max.z),
            ],
        }
    }

    #[inline]
    pub fn vertices(&self) -> &[Point2<T>] {
        &self.vertices
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point2<T>, Point2<T>)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn area(&self) -> T {
        signed_area(&self.vertices)
    }

    pub fn aabb(&self) -> Aabb2<T> {
        aabb_of(&self.vertices).expect("contour is nonempty")
    }

    pub fn translated(&self, offset: Point2<T>) -> Self {
        Self {
            vertices: self.vertices.iter().map(|&p| p + offset).collect(),
        }
    }

    /// Even-odd point containment (boundary points may go either way).
    pub fn contains(&self, p: Point2<T>) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.z > p.z) != (b.z > p.z) {
                let y = a.y + (p.z - a.z) / (b.z - a.z) * (b.y - a.y);
                if p.y < y {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Distance from `p` to the polygon boundary.
    pub fn boundary_distance(&self, p: Point2<T>) -> T {
        self.edges()
            .map(|(a, b)| segment_distance(p, a, b))
            .fold(T::infinity(), T::min)
    }

    /// True when no two non-adjacent edges intersect.
    pub fn is_simple(&self) -> bool {
        let n = self.vertices.len();
        for i in 0..n {
            let (a, b) = (self.vertices[i], self.vertices[(i + 1) % n]);
            for j in i + 1..n {
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                let (c, d) = (self.vertices[j], self.vertices[(j + 1) % n]);
                if segments_intersect(a, b, c, d) {
                    return false;
                }
            }
        }
        true
    }
}

pub(crate) fn signed_area<T: Scalar>(v: &[Point2<T>]) -> T {
    let n = v.len();
    let twice = (0..n).fold(T::zero(), |s, i| s + v[i].cross(v[(i + 1) % n]));
    twice * T::lit(0.5)
}

pub(crate) fn segment_distance<T: Scalar>(p: Point2<T>, a: Point2<T>, b: Point2<T>) -> T {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == T::zero() {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len2).max(T::zero()).min(T::one());
    p.distance(a + ab * t)
}

fn segments_intersect<T: Scalar>(a: Point2<T>, b: Point2<T>, c: Point2<T>, d: Point2<T>) -> bool {
    let o = |p: Point2<T>, q: Point2<T>, r: Point2<T>| {
        robust::orient2d(coord(p), coord(q), coord(r))
    };
    let (o1, o2, o3, o4) = (o(a, b, c), o(a, b, d), o(c, d, a), o(c, d, b));
    if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
        return true;
    }
    let on = |p: Point2<T>, q: Point2<T>, r: Point2<T>, orient: f64| {
        orient == 0.0
            && r.y >= p.y.min(q.y)
            && r.y <= p.y.max(q.y)
            && r.z >= p.z.min(q.z)
            && r.z <= p.z.max(q.z)
    };
    on(a, b, c, o1) || on(a, b, d, o2) || on(c, d, a, o3) || on(c, d, b, o4)
}

#[inline]
pub(crate) fn coord<T: Scalar>(p: Point2<T>) -> robust::Coord<f64> {
    robust::Coord {
        x: p.y.to_f64_lossy(),
        y: p.z.to_f64_lossy(),
    }
}
