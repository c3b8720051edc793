//! Contact-force optimization and worst-case grasp quality over a disturbance set.
//!
//! Quantities are normalized: forces in units of twice the item weight, positions
//! in units of the item half-width about its box center, so torques share the
//! force unit.

use std::cmp::Ordering;
use std::f64::consts::TAU;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::geometry::Point2;
use crate::linalg::Mat;
use crate::qp::{solve_qp_with, QpError, QpProblem, QpSettings, QpStatus};
use crate::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WrenchError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("contact-force solver failed: {0}")]
    SolverFailure(String),
}

impl From<QpError> for WrenchError {
    fn from(e: QpError) -> Self {
        Self::SolverFailure(e.to_string())
    }
}

/// Planar wrench `(w_y, w_z, w_tau)` applied to the item.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Wrench2<T> {
    pub w_y: T,
    pub w_z: T,
    pub w_tau: T,
}

impl<T: Scalar> Wrench2<T> {
    pub const fn new(w_y: T, w_z: T, w_tau: T) -> Self {
        Self { w_y, w_z, w_tau }
    }
}

/// Disturbance wrenches: a force disk around `bias` times a torque interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceSet<T> {
    pub bias: Point2<T>,
    pub radius: T,
    pub tau_min: T,
    pub tau_max: T,
}

impl<T: Scalar> DisturbanceSet<T> {
    pub fn new(bias: Point2<T>, radius: T, tau_min: T, tau_max: T) -> Result<Self, WrenchError> {
        let w = Self {
            bias,
            radius,
            tau_min,
            tau_max,
        };
        w.validate()?;
        Ok(w)
    }

    /// Gravity bias `(0, -0.5)`, unit disk, torque in `[-tau_max, tau_max]`.
    pub fn gravity(tau_max: T) -> Self {
        Self {
            bias: Point2::new(T::zero(), T::lit(-0.5)),
            radius: T::one(),
            tau_min: -tau_max,
            tau_max,
        }
    }

    /// A single wrench.
    pub fn singleton(w: Wrench2<T>) -> Self {
        Self {
            bias: Point2::new(w.w_y, w.w_z),
            radius: T::zero(),
            tau_min: w.w_tau,
            tau_max: w.w_tau,
        }
    }

    pub fn validate(&self) -> Result<(), WrenchError> {
        let finite = self.bias.is_finite()
            && self.radius.is_finite()
            && self.tau_min.is_finite()
            && self.tau_max.is_finite();
        if !finite || self.radius < T::zero() || self.tau_min > self.tau_max {
            return Err(WrenchError::InvalidParams(format!("bad disturbance set {self:?}")));
        }
        Ok(())
    }

    /// True when the origin is interior, which force closure needs.
    pub fn origin_is_interior(&self) -> bool {
        self.radius > self.bias.norm() && self.tau_min < T::zero() && T::zero() < self.tau_max
    }

    pub fn contains(&self, w: &Wrench2<T>, tol: T) -> bool {
        let f = Point2::new(w.w_y, w.w_z) - self.bias;
        f.norm() <= self.radius + tol && w.w_tau >= self.tau_min - tol && w.w_tau <= self.tau_max + tol
    }

    fn at(&self, r: T, theta: T, tau: T) -> Wrench2<T> {
        Wrench2::new(
            self.bias.y + r * theta.cos(),
            self.bias.z + r * theta.sin(),
            tau,
        )
    }

    fn torque_endpoints(&self) -> Vec<T> {
        if self.tau_min == self.tau_max {
            vec![self.tau_min]
        } else {
            vec![self.tau_min, self.tau_max]
        }
    }
}

impl<T: Scalar> Default for DisturbanceSet<T> {
    fn default() -> Self {
        Self::gravity(T::lit(0.1))
    }
}

/// Two contacts with unit normals pointing into the item.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactPair<T> {
    pub c_l: Point2<T>,
    pub c_r: Point2<T>,
    pub n_l: Point2<T>,
    pub n_r: Point2<T>,
}

impl<T: Scalar> ContactPair<T> {
    pub fn validate(&self) -> Result<(), WrenchError> {
        let tol = T::lit(1e-9).max(T::epsilon() * T::lit(16.0));
        let unit = |n: Point2<T>| (n.norm() - T::one()).abs() <= tol;
        let finite = self.c_l.is_finite() && self.c_r.is_finite();
        if !finite || !unit(self.n_l) || !unit(self.n_r) || self.c_l.y >= self.c_r.y {
            return Err(WrenchError::InvalidParams(format!("bad contact pair {self:?}")));
        }
        Ok(())
    }

    pub fn tangent_l(&self) -> Point2<T> {
        contact_tangent(self.n_l)
    }

    pub fn tangent_r(&self) -> Point2<T> {
        contact_tangent(self.n_r)
    }

    /// Maps both contacts through `p -> (p - origin) / scale`; normals are unchanged.
    pub fn normalized(&self, origin: Point2<T>, scale: T) -> Self {
        Self {
            c_l: (self.c_l - origin) * scale.recip(),
            c_r: (self.c_r - origin) * scale.recip(),
            ..*self
        }
    }
}

/// In-plane tangent of a contact frame: the vertical axis with the normal
/// component removed, falling back to `+y` for horizontal-facing normals.
pub fn contact_tangent<T: Scalar>(n: Point2<T>) -> Point2<T> {
    let t = n.perp();
    if t.z > T::zero() || (t.z == T::zero() && t.y > T::zero()) {
        t
    } else {
        -t
    }
}

/// Contact force in its contact frame.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ContactForce<T> {
    pub n: T,
    pub t: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraspParams<T> {
    /// Weight on `[n, t]` in the force cost.
    pub q: [[T; 2]; 2],
    pub mu: T,
    pub n_max: T,
    /// Boundary samples per unit arc length of the force disk.
    pub sigma: T,
}

impl<T: Scalar> Default for GraspParams<T> {
    fn default() -> Self {
        Self {
            q: [[T::one(), T::zero()], [T::zero(), T::one()]],
            mu: T::lit(0.5),
            n_max: T::lit(10.0),
            sigma: T::lit(32.0 / TAU),
        }
    }
}

impl<T: Scalar> GraspParams<T> {
    pub fn with_mu(self, mu: T) -> Self {
        Self { mu, ..self }
    }

    /// Density giving `n` samples around a unit-radius disk.
    pub fn samples_per_circle(n: usize) -> T {
        T::lit(n as f64 / TAU)
    }

    pub fn validate(&self) -> Result<(), WrenchError> {
        let [[a, b], [c, d]] = self.q;
        let q_pd = b == c && a > T::zero() && a * d - b * c > T::zero();
        let all_finite = [a, b, c, d, self.mu, self.n_max, self.sigma].iter().all(|v| v.is_finite());
        if !all_finite || !q_pd || self.mu <= T::zero() || self.n_max <= T::one() || self.sigma <= T::zero() {
            return Err(WrenchError::InvalidParams(format!("bad grasp parameters {self:?}")));
        }
        Ok(())
    }
}

/// A grasp quality value; `Infinite` marks a disturbance the grasp cannot resist
/// and orders above every finite value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Quality<T> {
    Finite(T),
    Infinite,
}

impl<T: Scalar> Quality<T> {
    pub fn is_finite(&self) -> bool {
        matches!(self, Self::Finite(_))
    }

    pub fn finite(&self) -> Option<T> {
        match *self {
            Self::Finite(v) => Some(v),
            Self::Infinite => None,
        }
    }

    /// Value as a float, with `Infinite` mapped to `+inf`.
    pub fn to_float(&self) -> T {
        self.finite().unwrap_or_else(T::infinity)
    }

    pub fn total_cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Self::Finite(a), Self::Finite(b)) => a.partial_cmp(b).unwrap_or(Ordering::Equal),
            (Self::Finite(_), Self::Infinite) => Ordering::Less,
            (Self::Infinite, Self::Finite(_)) => Ordering::Greater,
            (Self::Infinite, Self::Infinite) => Ordering::Equal,
        }
    }

    pub fn max(self, other: Self) -> Self {
        if other.total_cmp(&self) == Ordering::Greater {
            other
        } else {
            self
        }
    }
}

impl<T: Scalar> PartialOrd for Quality<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.total_cmp(other))
    }
}

impl<T: Scalar> fmt::Display for Quality<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(v) => write!(f, "{v}"),
            Self::Infinite => f.write_str("inf"),
        }
    }
}

impl<T: Scalar> Serialize for Quality<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::Finite(v) => s.serialize_f64(v.to_f64_lossy()),
            Self::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de, T: Scalar> Deserialize<'de> for Quality<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) if v.is_finite() => Ok(Self::Finite(T::lit(v))),
            Repr::Text(s) if s == "inf" => Ok(Self::Infinite),
            _ => Err(serde::de::Error::custom("expected a finite number or \"inf\"")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForceSolution<T> {
    pub forces: (ContactForce<T>, ContactForce<T>),
    pub objective: T,
}

/// The contact-force QP for one pair, reusable across wrenches.
///
/// Variables are `[n_l, t_l, n_r, t_r]`.
#[derive(Clone, Debug)]
pub struct ForceQp<T> {
    problem: QpProblem<T>,
    settings: QpSettings<T>,
}

impl<T: Scalar> ForceQp<T> {
    pub fn new(pair: &ContactPair<T>, params: &GraspParams<T>) -> Result<Self, WrenchError> {
        pair.validate()?;
        params.validate()?;
        let two = T::lit(2.0);
        let q = params.q;
        let hessian = Mat::from_fn(4, 4, |r, c| {
            if r / 2 == c / 2 {
                two * q[r % 2][c % 2]
            } else {
                T::zero()
            }
        });
        let (t_l, t_r) = (pair.tangent_l(), pair.tangent_r());
        let cols = [pair.n_l, t_l, pair.n_r, t_r];
        let at = [pair.c_l, pair.c_l, pair.c_r, pair.c_r];
        let eq = Mat::from_fn(3, 4, |r, c| match r {
            0 => cols[c].y,
            1 => cols[c].z,
            _ => at[c].cross(cols[c]),
        });
        let (o, one, mu) = (T::zero(), T::one(), params.mu);
        let ineq = Mat::from_rows(
            4,
            &[
                vec![-mu, one, o, o],
                vec![-mu, -one, o, o],
                vec![-one, o, o, o],
                vec![one, o, o, o],
                vec![o, o, -mu, one],
                vec![o, o, -mu, -one],
                vec![o, o, -one, o],
                vec![o, o, one, o],
            ],
        );
        let d = vec![o, o, -one, params.n_max, o, o, -one, params.n_max];
        let problem = QpProblem::new(hessian, vec![o; 4])
            .with_equalities(eq, vec![o; 3])
            .with_inequalities(ineq, d);
        Ok(Self {
            problem,
            settings: QpSettings::default(),
        })
    }

    /// Cheapest contact forces resisting `w`, or `None` if no admissible forces do.
    pub fn solve(&mut self, w: &Wrench2<T>) -> Result<Option<ForceSolution<T>>, WrenchError> {
        self.problem.eq_rhs = vec![-w.w_y, -w.w_z, -w.w_tau];
        let sol = solve_qp_with(&self.problem, &self.settings)?;
        match sol.status {
            QpStatus::Optimal => {
                let x = &sol.x;
                Ok(Some(ForceSolution {
                    forces: (ContactForce { n: x[0], t: x[1] }, ContactForce { n: x[2], t: x[3] }),
                    objective: sol.objective,
                }))
            }
            QpStatus::Infeasible => Ok(None),
            QpStatus::MaxIterations => Err(WrenchError::SolverFailure(format!(
                "no convergence after {} iterations",
                sol.iterations
            ))),
        }
    }

    fn value(&mut self, w: &Wrench2<T>) -> Result<Quality<T>, WrenchError> {
        Ok(match self.solve(w)? {
            Some(s) => Quality::Finite(s.objective),
            None => Quality::Infinite,
        })
    }

    /// Largest residual of the balance equations and force bounds at `s` for `w`.
    pub fn residual(&self, w: &Wrench2<T>, s: &ForceSolution<T>) -> T {
        let x = [s.forces.0.n, s.forces.0.t, s.forces.1.n, s.forces.1.t];
        let mut p = self.problem.clone();
        p.eq_rhs = vec![-w.w_y, -w.w_z, -w.w_tau];
        p.violation(&x)
    }
}

/// Cheapest admissible contact forces for one wrench; `None` when infeasible.
pub fn contact_force_qp<T: Scalar>(
    pair: &ContactPair<T>,
    w: &Wrench2<T>,
    params: &GraspParams<T>,
) -> Result<Option<ForceSolution<T>>, WrenchError> {
    ForceQp::new(pair, params)?.solve(w)
}

/// Wrenches on the extreme set of `set`: the disk boundary at each torque endpoint,
/// with at most `1 / sigma` arc length between neighbouring angles.
pub fn disturbance_boundary_samples<T: Scalar>(set: &DisturbanceSet<T>, sigma: T) -> Vec<Wrench2<T>> {
    let angles = angle_count(set.radius, sigma);
    set.torque_endpoints()
        .into_iter()
        .flat_map(|tau| (0..angles).map(move |k| set.at(set.radius, angle(k, angles), tau)))
        .collect()
}

fn angle_count<T: Scalar>(radius: T, sigma: T) -> usize {
    if radius == T::zero() {
        return 1;
    }
    let n = (TAU * radius.to_f64_lossy() * sigma.to_f64_lossy() - 1e-9).ceil();
    (n as usize).max(3)
}

fn angle<T: Scalar>(k: usize, n: usize) -> T {
    T::lit(TAU * k as f64 / n as f64)
}

/// Worst-case force cost over `set`, from boundary samples plus a local search
/// around each sampled maximum.
pub fn grasp_quality<T: Scalar>(
    pair: &ContactPair<T>,
    set: &DisturbanceSet<T>,
    params: &GraspParams<T>,
) -> Result<Quality<T>, WrenchError> {
    set.validate()?;
    let mut qp = ForceQp::new(pair, params)?;
    let n = angle_count(set.radius, params.sigma);
    let mut best = Quality::Finite(T::neg_infinity());
    for tau in set.torque_endpoints() {
        let mut ring = Vec::with_capacity(n);
        for k in 0..n {
            let v = qp.value(&set.at(set.radius, angle(k, n), tau))?;
            if !v.is_finite() {
                return Ok(Quality::Infinite);
            }
            ring.push(v.to_float());
        }
        let top = ring.iter().copied().fold(T::neg_infinity(), T::max);
        best = best.max(Quality::Finite(top));
        if n < 3 {
            continue;
        }
        for k in 0..n {
            let (prev, next) = (ring[(k + n - 1) % n], ring[(k + 1) % n]);
            if ring[k] < prev || ring[k] < next {
                continue;
            }
            let h = T::lit(TAU / n as f64);
            let mid = angle::<T>(k, n);
            let v = golden_max(&mut qp, set, tau, mid - h, mid + h, ring[k])?;
            best = best.max(v);
            if !best.is_finite() {
                return Ok(best);
            }
        }
    }
    Ok(best)
}

/// Golden-section search for the largest cost on the disk boundary in `[lo, hi]`.
fn golden_max<T: Scalar>(
    qp: &mut ForceQp<T>,
    set: &DisturbanceSet<T>,
    tau: T,
    mut lo: T,
    mut hi: T,
    seed: T,
) -> Result<Quality<T>, WrenchError> {
    let g = T::lit((5f64.sqrt() - 1.0) / 2.0);
    let tol = T::lit(1e-5);
    let mut best = seed;
    let eval = |qp: &mut ForceQp<T>, th: T| -> Result<Option<T>, WrenchError> {
        let v = qp.value(&set.at(set.radius, th, tau))?;
        Ok(v.finite())
    };
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let Some(mut fa) = eval(qp, a)? else { return Ok(Quality::Infinite) };
    let Some(mut fb) = eval(qp, b)? else { return Ok(Quality::Infinite) };
    while hi - lo > tol {
        if fa > fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            let Some(v) = eval(qp, a)? else { return Ok(Quality::Infinite) };
            fa = v;
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            let Some(v) = eval(qp, b)? else { return Ok(Quality::Infinite) };
            fb = v;
        }
        best = best.max(fa).max(fb);
    }
    Ok(Quality::Finite(best.max(fa).max(fb)))
}

/// Grid resolution for [`brute_force_quality`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualityGrid {
    pub n_radial: usize,
    pub n_angular: usize,
    pub n_tau: usize,
}

impl Default for QualityGrid {
    fn default() -> Self {
        Self {
            n_radial: 20,
            n_angular: 64,
            n_tau: 11,
        }
    }
}

/// Worst-case force cost over a dense grid covering all of `set`, interior included.
pub fn brute_force_quality<T: Scalar>(
    pair: &ContactPair<T>,
    set: &DisturbanceSet<T>,
    grid: QualityGrid,
    params: &GraspParams<T>,
) -> Result<Quality<T>, WrenchError> {
    set.validate()?;
    if grid.n_radial < 2 || grid.n_angular < 2 || grid.n_tau < 2 {
        return Err(WrenchError::InvalidParams(format!("grid counts must be at least 2: {grid:?}")));
    }
    let mut qp = ForceQp::new(pair, params)?;
    let mut best = Quality::Finite(T::neg_infinity());
    let frac = |i: usize, n: usize| T::lit(i as f64 / (n - 1) as f64);
    for it in 0..grid.n_tau {
        let tau = set.tau_min + (set.tau_max - set.tau_min) * frac(it, grid.n_tau);
        for ir in 0..grid.n_radial {
            let r = set.radius * frac(ir, grid.n_radial);
            let n_ang = if r == T::zero() { 1 } else { grid.n_angular };
            for ia in 0..n_ang {
                let v = qp.value(&set.at(r, angle(ia, grid.n_angular), tau))?;
                if !v.is_finite() {
                    return Ok(Quality::Infinite);
                }
                best = best.max(v);
            }
        }
    }
    Ok(best)
}
