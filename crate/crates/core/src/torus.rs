//! The torus T² = R²/Z², linear Anosov maps and the derived-from-Anosov
//! family.
//!
//! A DA map is `f = A ∘ g` where `A` is a hyperbolic integer matrix and `g`
//! is a shear inside the ball `V = B(center, radius)`:
//!
//! ```text
//! g(q) = q − s · ψ(‖q − p‖ / r) · ⟨q − p, e_u⟩ e_u,     ψ(t) = (1 − t²)³ on [0, 1]
//! ```
//!
//! `g` only moves points along the unstable eigendirection `e_u` of `A`, so
//! the line field `e_u` is exactly invariant under `Df` and the
//! center-unstable stretch at `q` is `λ_u · ∂_u g(q)`. Outside `V` the map is
//! the linear one, bit for bit.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::cones::{cone_action, ConeAction};
use crate::error::{domain, Error, Result};
use crate::par;

/// Largest value of `|d/dt (t ψ(t))|` on `[0, 1]`, attained at `t = 0`.
pub const SHEAR_SLOPE_BOUND: f64 = 1.0;

/// Most negative value of `d/dt (t ψ(t))`, attained at `t² = 3/7`.
pub const SHEAR_SLOPE_MIN: f64 = -32.0 / 49.0;

/// Smallness cap on the near-neutral constant of condition (D).
pub const DELTA0_SMALL: f64 = 0.1;

const NEWTON_MAX_ITERS: usize = 100;

/// A planar (tangent) vector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the planar cross product.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    /// Unit vector in the same direction; `None` for the zero vector.
    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| Vec2::new(self.x / n, self.y / n))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        Vec2::new(self * v.x, self * v.y)
    }
}

/// Point of T², both coordinates in `[0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    x: f64,
    y: f64,
}

fn reduce(v: f64) -> f64 {
    let r = v - v.floor();
    // v slightly below an integer can round up to exactly 1.0
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Canonical projection R² → T².
pub fn wrap(x: f64, y: f64) -> Result<TorusPoint> {
    if !(x.is_finite() && y.is_finite()) {
        return Err(domain(format!("non-finite point ({x}, {y})")));
    }
    Ok(TorusPoint { x: reduce(x), y: reduce(y) })
}

/// Signed representative of `v mod 1` in `[-0.5, 0.5)`.
pub fn min_image(v: f64) -> f64 {
    v - (v + 0.5).floor()
}

impl TorusPoint {
    pub const ORIGIN: TorusPoint = TorusPoint { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Result<Self> {
        wrap(x, y)
    }

    /// Projection of a lift known to be finite (images of finite points).
    pub(crate) fn from_lift(v: Vec2) -> Self {
        debug_assert!(v.is_finite(), "non-finite lift {v:?}");
        TorusPoint { x: reduce(v.x), y: reduce(v.y) }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn as_vec2(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    /// Shortest displacement from `self` to `other` (minimum image).
    pub fn displacement_to(&self, other: TorusPoint) -> Vec2 {
        Vec2::new(min_image(other.x - self.x), min_image(other.y - self.y))
    }

    pub fn distance(&self, other: TorusPoint) -> f64 {
        self.displacement_to(other).norm()
    }

    /// `self + v` projected back to the torus.
    pub fn translate(&self, v: Vec2) -> TorusPoint {
        TorusPoint::from_lift(self.as_vec2() + v)
    }
}

impl fmt::Display for TorusPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// 2×2 real matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat2 {
    pub m11: f64,
    pub m12: f64,
    pub m21: f64,
    pub m22: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2::new(1.0, 0.0, 0.0, 1.0);

    pub const fn new(m11: f64, m12: f64, m21: f64, m22: f64) -> Self {
        Mat2 { m11, m12, m21, m22 }
    }

    pub fn from_columns(c1: Vec2, c2: Vec2) -> Self {
        Mat2::new(c1.x, c2.x, c1.y, c2.y)
    }

    pub fn scaled(s: f64) -> Self {
        Mat2::new(s, 0.0, 0.0, s)
    }

    pub fn apply(&self, v: Vec2) -> Vec2 {
        Vec2::new(self.m11 * v.x + self.m12 * v.y, self.m21 * v.x + self.m22 * v.y)
    }

    pub fn mul(&self, o: &Mat2) -> Mat2 {
        Mat2::new(
            self.m11 * o.m11 + self.m12 * o.m21,
            self.m11 * o.m12 + self.m12 * o.m22,
            self.m21 * o.m11 + self.m22 * o.m21,
            self.m21 * o.m12 + self.m22 * o.m22,
        )
    }

    pub fn det(&self) -> f64 {
        self.m11 * self.m22 - self.m12 * self.m21
    }

    pub fn trace(&self) -> f64 {
        self.m11 + self.m22
    }

    pub fn inverse(&self) -> Option<Mat2> {
        let d = self.det();
        (d != 0.0 && d.is_finite()).then(|| Mat2::new(self.m22 / d, -self.m12 / d, -self.m21 / d, self.m11 / d))
    }

    /// Frobenius distance.
    pub fn distance(&self, o: &Mat2) -> f64 {
        let d = [self.m11 - o.m11, self.m12 - o.m12, self.m21 - o.m21, self.m22 - o.m22];
        d.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Real eigenvalues ordered by decreasing modulus, if they exist.
    pub fn real_eigenvalues(&self) -> Option<(f64, f64)> {
        let tr = self.trace();
        let disc = tr * tr - 4.0 * self.det();
        if disc < 0.0 {
            return None;
        }
        let sq = disc.sqrt();
        // stable root pair
        let big = 0.5 * (tr + tr.signum() * sq);
        let small = if big != 0.0 { self.det() / big } else { 0.5 * (tr - sq) };
        Some(if big.abs() >= small.abs() { (big, small) } else { (small, big) })
    }

    /// Unit eigenvector for a real eigenvalue `lambda`.
    pub fn eigenvector(&self, lambda: f64) -> Option<Vec2> {
        let a = Vec2::new(self.m12, lambda - self.m11);
        let b = Vec2::new(lambda - self.m22, self.m21);
        let v = if a.norm_sq() >= b.norm_sq() { a } else { b };
        v.normalized()
    }
}

/// Reference splitting `E^s ⊕ E^u` of the linear part of a map.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Splitting {
    pub e_u: Vec2,
    pub e_s: Vec2,
}

impl Splitting {
    pub fn axes() -> Self {
        Splitting { e_u: Vec2::new(1.0, 0.0), e_s: Vec2::new(0.0, 1.0) }
    }

    /// Coordinates `(c_s, c_u)` with `v = c_s e_s + c_u e_u`.
    pub fn coords(&self, v: Vec2) -> (f64, f64) {
        let det = self.e_s.cross(self.e_u);
        let c_s = v.cross(self.e_u) / det;
        let c_u = self.e_s.cross(v) / det;
        (c_s, c_u)
    }

    /// Change of basis from splitting coordinates to the standard basis.
    pub fn basis(&self) -> Mat2 {
        Mat2::from_columns(self.e_s, self.e_u)
    }
}

/// Anything that acts on T² with a derivative.
///
/// Implementations are immutable and shared across workers.
pub trait Dynamics: Sync {
    /// Image of `p` in lift coordinates (before reduction mod 1).
    fn apply_lift(&self, p: TorusPoint) -> Vec2;

    fn apply(&self, p: TorusPoint) -> TorusPoint {
        TorusPoint::from_lift(self.apply_lift(p))
    }

    /// Derivative of the lift at `p`.
    fn jacobian(&self, p: TorusPoint) -> Mat2;

    fn inverse_apply(&self, p: TorusPoint) -> Result<TorusPoint>;

    /// Reference splitting used to seed direction tracking and cones.
    fn splitting(&self) -> Splitting {
        Splitting::axes()
    }
}

/// Parameters of a derived-from-Anosov map.
///
/// JSON form: `{"base": [2, 1, 1, 1], "center": [0.0, 0.0], "radius": 0.12, "strength": 0.2}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DAParams {
    /// Integer base matrix, row-major.
    #[serde(default = "default_base")]
    pub base: [i64; 4],
    #[serde(default)]
    pub center: [f64; 2],
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_strength")]
    pub strength: f64,
}

fn default_base() -> [i64; 4] {
    [2, 1, 1, 1]
}

fn default_radius() -> f64 {
    0.12
}

fn default_strength() -> f64 {
    0.2
}

impl Default for DAParams {
    /// The certified parameter set: cat-map base, V = B((0,0), 0.12), strength 0.2.
    fn default() -> Self {
        DAParams { base: default_base(), center: [0.0, 0.0], radius: default_radius(), strength: default_strength() }
    }
}

impl DAParams {
    /// The unperturbed cat map (same `V`, zero strength).
    pub fn cat_map() -> Self {
        DAParams { strength: 0.0, ..DAParams::default() }
    }

    pub fn with_strength(mut self, strength: f64) -> Self {
        self.strength = strength;
        self
    }

    pub fn base_matrix(&self) -> Mat2 {
        let b = self.base.map(|v| v as f64);
        Mat2::new(b[0], b[1], b[2], b[3])
    }
}

/// `wrap(base · p)`.
pub fn apply_linear(base: &Mat2, p: TorusPoint) -> TorusPoint {
    TorusPoint::from_lift(base.apply(p.as_vec2()))
}

/// A linear Anosov map or a DA deformation of one.
#[derive(Clone, Debug)]
pub struct TorusMap {
    params: DAParams,
    center: TorusPoint,
    base: Mat2,
    base_inv: Mat2,
    splitting: Splitting,
    lambda_u: f64,
    lambda_s: f64,
}

/// Builds `f = A ∘ g` after validating the parameters.
pub fn make_da_map(params: &DAParams) -> Result<TorusMap> {
    let base = params.base_matrix();
    let det = base.det();
    if det.abs() != 1.0 {
        return Err(Error::InvalidParams(format!("|det base| = {} != 1", det.abs())));
    }
    let (lambda_u, lambda_s) =
        base.real_eigenvalues().ok_or_else(|| Error::InvalidParams("base has complex eigenvalues".into()))?;
    if lambda_u.abs() <= 1.0 || lambda_s.abs() >= 1.0 {
        return Err(Error::InvalidParams(format!("base is not hyperbolic (eigenvalues {lambda_u}, {lambda_s})")));
    }
    let mut e_u = base.eigenvector(lambda_u).expect("real eigenvalue has an eigenvector");
    let mut e_s = base.eigenvector(lambda_s).expect("real eigenvalue has an eigenvector");
    if e_u.x < 0.0 || (e_u.x == 0.0 && e_u.y < 0.0) {
        e_u = -e_u;
    }
    if e_s.y < 0.0 || (e_s.y == 0.0 && e_s.x < 0.0) {
        e_s = -e_s;
    }
    let [cx, cy] = params.center;
    let center = wrap(cx, cy).map_err(|_| Error::InvalidParams("non-finite center".into()))?;
    if !(params.radius > 0.0 && params.radius < 0.5) {
        return Err(Error::InvalidParams(format!("radius {} outside (0, 0.5)", params.radius)));
    }
    if !(params.strength >= 0.0 && params.strength < 1.0) {
        return Err(Error::InvalidParams(format!("strength {} outside [0, 1)", params.strength)));
    }
    if params.strength * SHEAR_SLOPE_BOUND >= 1.0 {
        return Err(Error::InvalidParams("shear is not monotone along e_u".into()));
    }
    let map = TorusMap {
        params: params.clone(),
        center,
        base,
        base_inv: base.inverse().expect("unimodular matrix is invertible"),
        splitting: Splitting { e_u, e_s },
        lambda_u,
        lambda_s,
    };
    let side = map.image_of_region_extent();
    if side >= 1.0 {
        return Err(Error::InvalidParams(format!(
            "f(V) has bounding-box side {side:.4} >= 1; it does not fit in a unit cube"
        )));
    }
    Ok(map)
}

/// The linear Anosov map with integer matrix `base` (row-major).
pub fn linear_map(base: [i64; 4]) -> Result<TorusMap> {
    make_da_map(&DAParams { base, ..DAParams::cat_map() })
}

impl TorusMap {
    pub fn params(&self) -> &DAParams {
        &self.params
    }

    pub fn base(&self) -> &Mat2 {
        &self.base
    }

    pub fn base_inverse(&self) -> &Mat2 {
        &self.base_inv
    }

    /// Expanding eigenvalue of the base matrix.
    pub fn lambda_u(&self) -> f64 {
        self.lambda_u
    }

    pub fn lambda_s(&self) -> f64 {
        self.lambda_s
    }

    pub fn center(&self) -> TorusPoint {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.params.radius
    }

    pub fn strength(&self) -> f64 {
        self.params.strength
    }

    pub fn in_region(&self, p: TorusPoint) -> bool {
        self.params.strength > 0.0 && self.center.distance(p) < self.params.radius
    }

    /// Bump value ψ and its gradient at displacement `d` from the center.
    fn bump(&self, d: Vec2) -> Option<(f64, Vec2)> {
        let r2 = self.params.radius * self.params.radius;
        let w = 1.0 - d.norm_sq() / r2;
        if w <= 0.0 {
            return None;
        }
        let psi = w * w * w;
        let grad = (-6.0 * w * w / r2) * d;
        Some((psi, grad))
    }

    /// Lift of the shear `g`.
    pub fn shear_lift(&self, p: TorusPoint) -> Vec2 {
        let q = p.as_vec2();
        if self.params.strength == 0.0 {
            return q;
        }
        let d = self.center.displacement_to(p);
        match self.bump(d) {
            None => q,
            Some((psi, _)) => {
                let e_u = self.splitting.e_u;
                q - (self.params.strength * psi * d.dot(e_u)) * e_u
            }
        }
    }

    /// Derivative of the shear `g`.
    pub fn shear_jacobian(&self, p: TorusPoint) -> Mat2 {
        if self.params.strength == 0.0 {
            return Mat2::IDENTITY;
        }
        let d = self.center.displacement_to(p);
        match self.bump(d) {
            None => Mat2::IDENTITY,
            Some((psi, grad)) => {
                let e = self.splitting.e_u;
                let s = self.params.strength;
                // I − s e_u (ψ e_u + ⟨d, e_u⟩ ∇ψ)ᵀ
                let row = psi * e + d.dot(e) * grad;
                Mat2::new(1.0 - s * e.x * row.x, -s * e.x * row.y, -s * e.y * row.x, 1.0 - s * e.y * row.y)
            }
        }
    }

    /// Side of the axis-aligned bounding box of the lifted image of `V`.
    fn image_of_region_extent(&self) -> f64 {
        const SAMPLES: usize = 720;
        let c = self.center.as_vec2();
        let r = self.params.radius;
        let (mut lo, mut hi) = (Vec2::new(f64::MAX, f64::MAX), Vec2::new(f64::MIN, f64::MIN));
        for k in 0..SAMPLES {
            let th = std::f64::consts::TAU * k as f64 / SAMPLES as f64;
            // g fixes the boundary of V, so f(∂V) = A(∂V) in the chart around the center
            let q = c + (r * 0.999_999) * Vec2::new(th.cos(), th.sin());
            let d = q - c;
            let gq = match self.bump(d) {
                Some((psi, _)) => q - (self.params.strength * psi * d.dot(self.splitting.e_u)) * self.splitting.e_u,
                None => q,
            };
            let img = self.base.apply(gq);
            lo = Vec2::new(lo.x.min(img.x), lo.y.min(img.y));
            hi = Vec2::new(hi.x.max(img.x), hi.y.max(img.y));
        }
        (hi.x - lo.x).max(hi.y - lo.y)
    }

    /// Inverse of the shear along the chord through `z` parallel to `e_u`.
    fn shear_inverse(&self, z: TorusPoint) -> Result<TorusPoint> {
        if self.params.strength == 0.0 {
            return Ok(z);
        }
        let d = self.center.displacement_to(z);
        let r = self.params.radius;
        if d.norm_sq() >= r * r {
            return Ok(z);
        }
        let e = self.splitting.e_u;
        let s = self.params.strength;
        let target = d.dot(e);
        let perp = d - target * e;
        let perp2 = perp.norm_sq();
        let r2 = r * r;
        let chord = (r2 - perp2).max(0.0).sqrt();
        // φ(u) = u (1 − s ψ(u)) is increasing on the chord and |φ(u)| ≤ |u|.
        let phi = |u: f64| {
            let w = 1.0 - (u * u + perp2) / r2;
            if w <= 0.0 {
                (u, 1.0)
            } else {
                let psi = w * w * w;
                let dpsi_du = -6.0 * w * w * u / r2;
                (u * (1.0 - s * psi), 1.0 - s * (psi + u * dpsi_du))
            }
        };
        let (mut lo, mut hi) = if target >= 0.0 { (target, chord) } else { (-chord, target) };
        let mut u = target;
        let mut residual = f64::INFINITY;
        for _ in 0..NEWTON_MAX_ITERS {
            let (val, slope) = phi(u);
            let f = val - target;
            residual = f.abs();
            if residual <= 1e-16 * (1.0 + target.abs()) {
                let q = self.center.as_vec2() + u * e + perp;
                return Ok(TorusPoint::from_lift(q));
            }
            if f > 0.0 {
                hi = hi.min(u);
            } else {
                lo = lo.max(u);
            }
            let mut next = u - f / slope;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            if next == u {
                let q = self.center.as_vec2() + u * e + perp;
                return Ok(TorusPoint::from_lift(q));
            }
            u = next;
        }
        Err(Error::Numerical { message: format!("shear inverse did not converge at {z}"), residual })
    }
}

impl Dynamics for TorusMap {
    fn apply_lift(&self, p: TorusPoint) -> Vec2 {
        self.base.apply(self.shear_lift(p))
    }

    fn jacobian(&self, p: TorusPoint) -> Mat2 {
        if self.params.strength == 0.0 {
            return self.base;
        }
        self.base.mul(&self.shear_jacobian(p))
    }

    fn inverse_apply(&self, p: TorusPoint) -> Result<TorusPoint> {
        let z = TorusPoint::from_lift(self.base_inv.apply(p.as_vec2()));
        self.shear_inverse(z)
    }

    fn splitting(&self) -> Splitting {
        self.splitting
    }
}

/// Which condition a grid sample failed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConditionTag {
    /// Cone invariance: `Df C^cu ⊂ C^cu` and `Df⁻¹ C^cs ⊂ C^cs`.
    A,
    /// Volume hyperbolicity along cone directions.
    B,
    /// Uniform hyperbolicity off `V`.
    C,
    /// Near-neutral behaviour inside `V`.
    D,
    /// Domination product above the target.
    Domination,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionViolation {
    pub point: TorusPoint,
    pub tag: ConditionTag,
    /// The offending local value (stretch, norm or product).
    pub value: f64,
}

/// Numerical certificate for conditions (A)–(D) on a sampled grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapConditionsReport {
    /// Certified volume-hyperbolicity constant (min over samples).
    pub sigma1: f64,
    /// Worst off-V norm of `(Df|cu)⁻¹` and `Df|cs`.
    pub sigma2: f64,
    /// Excess over 1 of the in-V norms (0 if none).
    pub delta0: f64,
    pub cone_width: f64,
    /// Worst domination product over the grid.
    pub domination: f64,
    pub lambda_target: f64,
    pub grid_n: usize,
    pub samples_in_region: usize,
    pub violations: Vec<ConditionViolation>,
}

impl MapConditionsReport {
    pub fn certified(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, tag: ConditionTag) -> usize {
        self.violations.iter().filter(|v| v.tag == tag).count()
    }
}

struct PointVerdict {
    action: ConeAction,
    in_region: bool,
    point: TorusPoint,
}

/// Evaluates (A)–(D) and domination on a `grid_n × grid_n` grid.
///
/// Stretches are measured in the splitting coordinates: the `e_u`
/// coefficient for cu vectors and the `e_s` coefficient for cs vectors.
pub fn verify_conditions(
    map: &TorusMap,
    cone_width: f64,
    grid_n: usize,
    lambda_target: f64,
) -> Result<MapConditionsReport> {
    if grid_n < 16 {
        return Err(domain(format!("grid_n = {grid_n} < 16")));
    }
    if !(cone_width > 0.0 && cone_width < 1.0) {
        return Err(domain(format!("cone width {cone_width} outside (0, 1)")));
    }
    let splitting = map.splitting();
    let rows: Vec<Vec<PointVerdict>> = par::map_indexed(grid_n, |i| {
        (0..grid_n)
            .map(|j| {
                let point = TorusPoint::from_lift(Vec2::new(j as f64 / grid_n as f64, i as f64 / grid_n as f64));
                let action = cone_action(&map.jacobian(point), &splitting, cone_width);
                PointVerdict { action, in_region: map.in_region(point), point }
            })
            .collect()
    });

    let mut sigma1 = f64::INFINITY;
    let mut sigma2: f64 = 0.0;
    let mut in_region_max: f64 = 0.0;
    let mut domination: f64 = 0.0;
    let mut samples_in_region = 0;
    let mut violations = Vec::new();
    for v in rows.iter().flatten() {
        let a = &v.action;
        if !(a.cu_invariant && a.cs_invariant) {
            violations.push(ConditionViolation { point: v.point, tag: ConditionTag::A, value: a.cu_min_stretch });
        }
        let local_sigma = a.cu_min_stretch.min(1.0 / a.cs_max_stretch);
        sigma1 = sigma1.min(local_sigma);
        if local_sigma <= 1.0 {
            violations.push(ConditionViolation { point: v.point, tag: ConditionTag::B, value: local_sigma });
        }
        let worst_norm = (1.0 / a.cu_min_stretch).max(a.cs_max_stretch);
        if v.in_region {
            samples_in_region += 1;
            in_region_max = in_region_max.max(worst_norm);
        } else {
            sigma2 = sigma2.max(worst_norm);
            if worst_norm >= 1.0 {
                violations.push(ConditionViolation { point: v.point, tag: ConditionTag::C, value: worst_norm });
            }
        }
        let product = a.cs_max_stretch / a.cu_min_stretch;
        domination = domination.max(product);
        if product > lambda_target {
            violations.push(ConditionViolation { point: v.point, tag: ConditionTag::Domination, value: product });
        }
    }
    let delta0 = (in_region_max - 1.0).max(0.0);
    if delta0 >= DELTA0_SMALL {
        for v in rows.iter().flatten().filter(|v| v.in_region) {
            let a = &v.action;
            let worst = (1.0 / a.cu_min_stretch).max(a.cs_max_stretch);
            if worst >= 1.0 + DELTA0_SMALL {
                violations.push(ConditionViolation { point: v.point, tag: ConditionTag::D, value: worst });
            }
        }
    }
    Ok(MapConditionsReport {
        sigma1,
        sigma2,
        delta0,
        cone_width,
        domination,
        lambda_target,
        grid_n,
        samples_in_region,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: f64, y: f64) -> TorusPoint {
        wrap(x, y).unwrap()
    }

    #[test]
    fn wrap_examples() {
        assert_eq!(pt(1.5, 1.0), pt(0.5, 0.0));
        let p = pt(-0.25, 2.0);
        assert_eq!((p.x(), p.y()), (0.75, 0.0));
        let p = pt(0.3, 0.7);
        assert_eq!((p.x(), p.y()), (0.3, 0.7));
        assert!(wrap(f64::NAN, 0.0).is_err());
        assert!(wrap(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn wrap_never_returns_one() {
        let p = pt(-1e-18, -0.0);
        assert!(p.x() < 1.0 && p.y() < 1.0);
    }

    #[test]
    fn linear_examples() {
        let a = Mat2::new(2.0, 1.0, 1.0, 1.0);
        let p = apply_linear(&a, pt(0.1, 0.2));
        assert!((p.x() - 0.4).abs() < 1e-15 && (p.y() - 0.3).abs() < 1e-15);
        let p = apply_linear(&a, pt(0.5, 0.5));
        assert_eq!((p.x(), p.y()), (0.5, 0.0));
        assert_eq!(apply_linear(&a, TorusPoint::ORIGIN), TorusPoint::ORIGIN);
    }

    #[test]
    fn cat_eigen_structure() {
        let m = linear_map([2, 1, 1, 1]).unwrap();
        assert!((m.lambda_u() - 2.618_033_988_749_895).abs() < 1e-14);
        assert!((m.lambda_s() - 0.381_966_011_250_105).abs() < 1e-14);
        let s = m.splitting();
        assert!((s.e_u.x - 0.850_650_808_352_039_9).abs() < 1e-12);
        assert!((s.e_u.y - 0.525_731_112_119_133_6).abs() < 1e-12);
        assert!((s.e_s.x + 0.525_731_112_119_133_6).abs() < 1e-12);
        assert!((s.e_s.y - 0.850_650_808_352_039_9).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_params() {
        let bad = |p: DAParams| make_da_map(&p).is_err();
        assert!(bad(DAParams { base: [1, 1, 0, 1], ..DAParams::default() }));
        assert!(bad(DAParams { base: [2, 0, 0, 1], ..DAParams::default() }));
        assert!(bad(DAParams { base: [0, 1, -1, 0], ..DAParams::default() }));
        assert!(bad(DAParams { radius: 0.0, ..DAParams::default() }));
        assert!(bad(DAParams { radius: 0.5, ..DAParams::default() }));
        assert!(bad(DAParams { strength: 1.0, ..DAParams::default() }));
        assert!(bad(DAParams { strength: -0.1, ..DAParams::default() }));
        // f(V) wider than a unit cube
        assert!(bad(DAParams { radius: 0.45, ..DAParams::default() }));
    }

    #[test]
    fn zero_strength_is_linear_bitwise() {
        let da = make_da_map(&DAParams::cat_map()).unwrap();
        let a = *da.base();
        for k in 0..500 {
            let p = pt(k as f64 * 0.618_033_988_7, k as f64 * 0.414_213_562_3);
            assert_eq!(da.apply_lift(p), a.apply(p.as_vec2()));
            assert_eq!(da.jacobian(p), a);
        }
    }

    #[test]
    fn outside_region_agrees_with_linear() {
        let da = make_da_map(&DAParams::default()).unwrap();
        let p = pt(0.5, 0.5);
        assert!(!da.in_region(p));
        assert_eq!(da.apply_lift(p), da.base().apply(p.as_vec2()));
        assert_eq!(da.jacobian(p), *da.base());
    }

    #[test]
    fn center_stretch_by_hand() {
        // ∂_u g at the center is 1 − s, so the cu stretch is (1 − s) λ_u.
        let da = make_da_map(&DAParams::default().with_strength(0.63)).unwrap();
        let e_u = da.splitting().e_u;
        let stretch = da.jacobian(da.center()).apply(e_u).norm();
        let by_hand = 0.37 * (3.0 + 5f64.sqrt()) / 2.0;
        assert!((stretch - by_hand).abs() < 1e-12);
        assert!((stretch - 0.9687).abs() < 1e-4);
        // finite differences along e_u through the center
        let h = 1e-6;
        let plus = da.apply(da.center().translate(h * e_u));
        let minus = da.apply(da.center().translate(-h * e_u));
        let fd = (1.0 / (2.0 * h)) * minus.displacement_to(plus);
        assert!((fd.norm() - by_hand).abs() < 1e-6);
    }

    #[test]
    fn linear_inverse_is_matrix_inverse() {
        let m = linear_map([2, 1, 1, 1]).unwrap();
        assert_eq!(*m.base_inverse(), Mat2::new(1.0, -1.0, -1.0, 2.0));
        let p = pt(0.3, 0.9);
        let q = m.inverse_apply(p).unwrap();
        let expect = apply_linear(&Mat2::new(1.0, -1.0, -1.0, 2.0), p);
        assert_eq!(q, expect);
    }

    #[test]
    fn shear_inverse_near_center() {
        let da = make_da_map(&DAParams::default().with_strength(0.9)).unwrap();
        for p in [pt(0.0, 0.0), pt(0.01, -0.02), pt(0.1, 0.03), pt(-0.05, 0.08)] {
            let q = da.inverse_apply(p).unwrap();
            assert!(da.apply(q).distance(p) < 1e-12, "{p}");
        }
    }

    #[test]
    fn cat_map_certificate() {
        let m = linear_map([2, 1, 1, 1]).unwrap();
        let r = verify_conditions(&m, 0.2, 32, 0.5).unwrap();
        assert!(r.certified(), "{:?}", &r.violations[..r.violations.len().min(4)]);
        assert!(r.sigma1 >= 2.61);
        assert!(r.sigma2 <= 0.383);
        assert_eq!(r.delta0, 0.0);
    }

    #[test]
    fn absurd_strength_fails() {
        let da = make_da_map(&DAParams::default().with_strength(0.99)).unwrap();
        let r = verify_conditions(&da, 0.2, 64, 0.5).unwrap();
        assert!(!r.certified());
        assert!(r.count(ConditionTag::A) > 0);
        assert!(r.count(ConditionTag::B) > 0);
    }

    #[test]
    fn verify_rejects_bad_arguments() {
        let m = linear_map([2, 1, 1, 1]).unwrap();
        assert!(verify_conditions(&m, 0.2, 8, 0.5).is_err());
        assert!(verify_conditions(&m, 1.0, 32, 0.5).is_err());
    }
}
