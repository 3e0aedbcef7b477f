//! Cone fields around the reference splitting, tracking of the
//! center-unstable and center-stable directions, and curvature of cu-curves.
//!
//! Cones are constant fields in the splitting coordinates `v = v_s e_s + v_u e_u`:
//! `C^cu_a = {|v_s| ≤ a |v_u|}` and `C^cs_a = {|v_u| ≤ a |v_s|}`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::noise::{sample_noise, NoiseModel, RandomOrbit, RngStream};
use crate::torus::{Dynamics, Mat2, Splitting, TorusPoint, Vec2};

/// Relative slack on cone boundaries, so that boundary vectors built in
/// floating point still count as inside.
const BOUNDARY_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConeKind {
    Cu,
    Cs,
}

/// Cone field of width `a` around `e_u` / `e_s`, with domination constant `λ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeParams {
    pub width: f64,
    pub e_u: Vec2,
    pub e_s: Vec2,
    pub lambda: f64,
}

impl ConeParams {
    pub fn new(width: f64, e_u: Vec2, e_s: Vec2, lambda: f64) -> Result<Self> {
        if !(width > 0.0 && width < 1.0) {
            return Err(domain(format!("cone width {width} outside (0, 1)")));
        }
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(domain(format!("domination constant {lambda} outside (0, 1)")));
        }
        let unit = |v: Vec2| (v.norm() - 1.0).abs() < 1e-9;
        if !unit(e_u) || !unit(e_s) {
            return Err(domain("cone axes must be unit vectors"));
        }
        if e_u.cross(e_s).abs() < 1e-9 {
            return Err(domain("cone axes are parallel"));
        }
        Ok(ConeParams { width, e_u, e_s, lambda })
    }

    /// Cones around the reference splitting of `map`.
    pub fn for_map<M: Dynamics + ?Sized>(map: &M, width: f64, lambda: f64) -> Result<Self> {
        let s = map.splitting();
        ConeParams::new(width, s.e_u, s.e_s, lambda)
    }

    pub fn splitting(&self) -> Splitting {
        Splitting { e_u: self.e_u, e_s: self.e_s }
    }
}

fn in_cone_coords(c_s: f64, c_u: f64, a: f64, which: ConeKind) -> bool {
    let (off, on) = match which {
        ConeKind::Cu => (c_s, c_u),
        ConeKind::Cs => (c_u, c_s),
    };
    off.abs() <= a * on.abs() * (1.0 + BOUNDARY_SLACK) + BOUNDARY_SLACK * off.abs().min(on.abs())
}

/// Whether `v` lies in the closed cone `which` (boundary inclusive).
pub fn in_cone(v: Vec2, cone: &ConeParams, which: ConeKind) -> Result<bool> {
    if v == Vec2::ZERO || !v.is_finite() {
        return Err(domain("cone membership of the zero vector is undefined"));
    }
    let (c_s, c_u) = cone.splitting().coords(v);
    Ok(in_cone_coords(c_s, c_u, cone.width, which))
}

/// How one derivative acts on the two cones, in splitting coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeAction {
    /// `Df C^cu ⊂ C^cu`.
    pub cu_invariant: bool,
    /// `Df⁻¹ C^cs ⊂ C^cs`.
    pub cs_invariant: bool,
    /// Minimum over `C^cu` of the growth of the `e_u` coefficient.
    pub cu_min_stretch: f64,
    /// Maximum over `C^cs` of the growth of the `e_s` coefficient.
    pub cs_max_stretch: f64,
}

/// Acts with `df` on the extremal vectors of both cones.
///
/// In 2D a cone is the convex hull of its two boundary rays, so checking
/// those rays (and that their images land in the same nappe) is enough.
pub fn cone_action(df: &Mat2, splitting: &Splitting, width: f64) -> ConeAction {
    let p = splitting.basis();
    let p_inv = p.inverse().expect("splitting axes are independent");
    let m = p_inv.mul(&df.mul(&p));
    let a = width;

    // coordinates are (c_s, c_u)
    let lo = m.apply(Vec2::new(-a, 1.0));
    let hi = m.apply(Vec2::new(a, 1.0));
    let cu_invariant =
        in_cone_coords(lo.x, lo.y, a, ConeKind::Cu) && in_cone_coords(hi.x, hi.y, a, ConeKind::Cu) && lo.y * hi.y > 0.0;
    let cu_min_stretch = if lo.y * hi.y > 0.0 { lo.y.abs().min(hi.y.abs()) } else { 0.0 };

    let cs_max_stretch = (m.m11 + a * m.m12).abs().max((m.m11 - a * m.m12).abs());
    let cs_invariant = match m.inverse() {
        Some(mi) => {
            let lo = mi.apply(Vec2::new(1.0, -a));
            let hi = mi.apply(Vec2::new(1.0, a));
            in_cone_coords(lo.x, lo.y, a, ConeKind::Cs)
                && in_cone_coords(hi.x, hi.y, a, ConeKind::Cs)
                && lo.x * hi.x > 0.0
        }
        None => false,
    };
    ConeAction { cu_invariant, cs_invariant, cu_min_stretch, cs_max_stretch }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeViolation {
    pub point: TorusPoint,
    pub noise: Vec2,
    pub kind: ConeKind,
}

/// Random-sample check of `Df_t C^cu(x) ⊂ C^cu(f_t x)` and the cs analogue
/// under `Df_t⁻¹`.
pub fn check_cone_invariance<M: Dynamics + ?Sized>(
    map: &M,
    cone: &ConeParams,
    noise_radius: f64,
    samples: usize,
    rng: &mut RngStream,
) -> Result<Vec<ConeViolation>> {
    if samples == 0 {
        return Err(domain("samples must be >= 1"));
    }
    let model = NoiseModel::new(noise_radius)?;
    let splitting = cone.splitting();
    let mut out = Vec::new();
    for _ in 0..samples {
        let x = rng.torus_point();
        let t = sample_noise(&model, rng);
        // Df_t = Df for additive noise and the cone field is constant
        let act = cone_action(&map.jacobian(x), &splitting, cone.width);
        if !act.cu_invariant {
            out.push(ConeViolation { point: x, noise: t, kind: ConeKind::Cu });
        }
        if !act.cs_invariant {
            out.push(ConeViolation { point: x, noise: t, kind: ConeKind::Cs });
        }
    }
    Ok(out)
}

/// Unoriented angle between the lines spanned by two unit vectors.
fn line_angle(a: Vec2, b: Vec2) -> f64 {
    a.cross(b).abs().atan2(a.dot(b).abs())
}

fn push(m: &Mat2, v: Vec2) -> Vec2 {
    m.apply(v).normalized().expect("derivative is invertible")
}

/// Settled estimates of `E^cu` and `E^cs` at one orbit point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionEstimate {
    pub at: TorusPoint,
    pub v_cu: Vec2,
    pub v_cs: Vec2,
    pub settle_steps: usize,
    /// Angular width of the pushed seed cone, the larger of the two
    /// directions; the true direction lies inside it.
    pub residual: f64,
}

/// Width of the seed cones whose images bound the direction error.
pub const SEED_CONE_WIDTH: f64 = 0.2;

/// Pushes `e_u` forward along `points[index − settle..index]` and `e_s`
/// backward (by inverse Jacobians) along `points[index..index + settle]`.
pub fn estimate_direction<M: Dynamics + ?Sized>(
    map: &M,
    orbit: &RandomOrbit,
    index: usize,
    settle: usize,
) -> Result<DirectionEstimate> {
    if settle == 0 {
        return Err(Error::Range("settle must be >= 1".into()));
    }
    if index < settle || index + settle >= orbit.points.len() {
        return Err(Error::Range(format!(
            "index {index} with settle {settle} exceeds an orbit of {} points",
            orbit.points.len()
        )));
    }
    let split = map.splitting();
    let forward = |seed: Vec2| orbit.points[index - settle..index].iter().fold(seed, |v, p| push(&map.jacobian(*p), v));
    let backward = |seed: Vec2| {
        orbit.points[index..index + settle]
            .iter()
            .rev()
            .fold(seed, |v, p| push(&map.jacobian(*p).inverse().expect("derivative is invertible"), v))
    };
    let (a, e_u, e_s) = (SEED_CONE_WIDTH, split.e_u, split.e_s);
    let mut v_cu = forward(e_u);
    let mut v_cs = backward(e_s);
    let res_cu = line_angle(forward(e_u + a * e_s), forward(e_u - a * e_s));
    let res_cs = line_angle(backward(e_s + a * e_u), backward(e_s - a * e_u));
    // orient like the reference axes
    if v_cu.dot(split.e_u) < 0.0 {
        v_cu = -v_cu;
    }
    if v_cs.dot(split.e_s) < 0.0 {
        v_cs = -v_cs;
    }
    Ok(DirectionEstimate {
        at: orbit.points[index],
        v_cu,
        v_cs,
        settle_steps: settle,
        residual: f64::max(res_cu, res_cs),
    })
}

/// `‖Df v_cs‖ / ‖Df v_cu‖` at the estimate's base point.
pub fn domination_gap<M: Dynamics + ?Sized>(map: &M, dir: &DirectionEstimate) -> Result<f64> {
    if !(dir.residual < 1e-6) {
        return Err(domain(format!("direction estimate not settled (residual {:e})", dir.residual)));
    }
    let df = map.jacobian(dir.at);
    Ok(df.apply(dir.v_cs).norm() / df.apply(dir.v_cu).norm())
}

/// Push-and-renormalize tracker of the cu direction along an orbit.
#[derive(Clone, Copy, Debug)]
pub struct CuTracker {
    v: Vec2,
}

impl CuTracker {
    pub fn new(seed: Vec2) -> Self {
        CuTracker { v: seed.normalized().expect("nonzero seed") }
    }

    pub fn direction(&self) -> Vec2 {
        self.v
    }

    /// Returns `a = −log ‖Df(p) v‖` and advances `v` to `Df(p) v / ‖Df(p) v‖`.
    pub fn step<M: Dynamics + ?Sized>(&mut self, map: &M, p: TorusPoint) -> f64 {
        let w = map.jacobian(p).apply(self.v);
        let n = w.norm();
        self.v = Vec2::new(w.x / n, w.y / n);
        -n.ln()
    }
}

/// `a_j = −log ‖Df(x_j)|E^cu‖` for `j ≥ start`.
///
/// `values[i]` belongs to the step from `points[start + i]` to
/// `points[start + i + 1]`; `directions[i]` is the cu estimate at
/// `points[start + i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CocycleTrace {
    pub start: usize,
    pub values: Vec<f64>,
    pub directions: Vec<Vec2>,
}

impl CocycleTrace {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// CSV with columns `step,a_j,vx,vy`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,a_j,vx,vy\n");
        for (i, (a, v)) in self.values.iter().zip(&self.directions).enumerate() {
            out.push_str(&format!("{},{:.16e},{:.16e},{:.16e}\n", self.start + i, a, v.x, v.y));
        }
        out
    }
}

pub fn cocycle_log_norms<M: Dynamics + ?Sized>(map: &M, orbit: &RandomOrbit, settle: usize) -> Result<CocycleTrace> {
    let steps = orbit.steps();
    if steps <= settle {
        return Err(Error::Range(format!("orbit of {steps} steps is not longer than settle {settle}")));
    }
    let mut tracker = CuTracker::new(map.splitting().e_u);
    for p in &orbit.points[..settle] {
        tracker.step(map, *p);
    }
    let mut values = Vec::with_capacity(steps - settle);
    let mut directions = Vec::with_capacity(steps - settle);
    for p in &orbit.points[settle..steps] {
        directions.push(tracker.direction());
        values.push(tracker.step(map, *p));
    }
    Ok(CocycleTrace { start: settle, values, directions })
}

/// Discrete Hölder curvature of a cu-curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureReport {
    pub holder_exponent: f64,
    pub kappa: f64,
    /// Empirical curvature bound, when a calibration run produced one.
    pub c1_bound: Option<f64>,
}

/// Slopes at the rounding level of chord directions count as zero.
const SLOPE_FLOOR: f64 = 1e-11;

/// Curvature comparisons only between points this close along the curve.
pub const CHART_RADIUS: f64 = 0.1;

fn segment_tangents(curve: &[TorusPoint], cone: &ConeParams) -> Result<Vec<(Vec2, f64)>> {
    curve
        .windows(2)
        .map(|w| {
            let d = w[0].displacement_to(w[1]);
            let len = d.norm();
            let t = d.normalized().ok_or_else(|| domain("repeated vertex in curve"))?;
            if !in_cone(t, cone, ConeKind::Cu)? {
                return Err(domain("curve tangent outside the cu cone"));
            }
            Ok((t, len))
        })
        .collect()
}

/// `κ = max ‖A_x(y)‖ / d_S(x, y)^ζ` over tangent pairs within `chart_radius`
/// of arclength.
///
/// Tangents live at segment midpoints. `A_x(y)` is the slope of `T_y S` as a
/// graph over `T_x S` in the orthogonal frame at `x`.
pub fn holder_constant(
    curve: &[TorusPoint],
    cone: &ConeParams,
    zeta: f64,
    chart_radius: f64,
) -> Result<CurvatureReport> {
    if curve.len() < 3 {
        return Err(domain("curvature needs at least 3 vertices"));
    }
    if !(zeta > 0.0 && zeta <= 1.0) {
        return Err(domain(format!("Hölder exponent {zeta} outside (0, 1]")));
    }
    let tangents = segment_tangents(curve, cone)?;
    // arclength position of each segment midpoint
    let mut mid = Vec::with_capacity(tangents.len());
    let mut s = 0.0;
    for (_, len) in &tangents {
        mid.push(s + 0.5 * len);
        s += len;
    }
    let mut kappa: f64 = 0.0;
    for i in 0..tangents.len() {
        let tx = tangents[i].0;
        for j in i + 1..tangents.len() {
            let d = mid[j] - mid[i];
            if d > chart_radius {
                break;
            }
            let ty = tangents[j].0;
            let along = tx.dot(ty);
            let slope = if along > 0.0 { tx.cross(ty).abs() / along } else { f64::INFINITY };
            if slope <= SLOPE_FLOOR {
                continue;
            }
            kappa = kappa.max(slope / d.powf(zeta));
        }
    }
    Ok(CurvatureReport { holder_exponent: zeta, kappa, c1_bound: None })
}

/// Straight segment through `center` with direction `dir`, `2 * half_count`
/// pieces of length `spacing`.
pub fn straight_segment(center: TorusPoint, dir: Vec2, spacing: f64, half_count: usize) -> Vec<TorusPoint> {
    let u = dir.normalized().expect("nonzero direction");
    (0..=2 * half_count).map(|k| center.translate(((k as f64 - half_count as f64) * spacing) * u)).collect()
}

/// One deterministic iterate of a cu-polyline, refined to the given
/// spacing and trimmed to arclength `max_len` around its middle vertex.
pub fn iterate_curve<M: Dynamics + ?Sized>(
    map: &M,
    curve: &[TorusPoint],
    cone: &ConeParams,
    spacing: f64,
    max_len: f64,
    step: usize,
) -> Result<Vec<TorusPoint>> {
    let mut out = vec![map.apply(curve[0])];
    for w in curve.windows(2) {
        let img = map.apply(w[1]);
        let gap = out.last().unwrap().distance(img);
        let pieces = (gap / spacing).ceil().max(1.0) as usize;
        let d = w[0].displacement_to(w[1]);
        for k in 1..pieces {
            out.push(map.apply(w[0].translate((k as f64 / pieces as f64) * d)));
        }
        out.push(img);
    }
    for w in out.windows(2) {
        let t = w[0].displacement_to(w[1]);
        if t == Vec2::ZERO || !in_cone(t, cone, ConeKind::Cu)? {
            return Err(Error::CurveLeftCone { step });
        }
    }
    // trim around the vertex closest to the arclength midpoint
    let mut arc = vec![0.0];
    for w in out.windows(2) {
        arc.push(arc.last().unwrap() + w[0].distance(w[1]));
    }
    let total = *arc.last().unwrap();
    if total <= max_len {
        return Ok(out);
    }
    let half = 0.5 * total;
    let lo = arc.partition_point(|&s| s < half - 0.5 * max_len);
    let hi = arc.partition_point(|&s| s <= half + 0.5 * max_len);
    Ok(out[lo..hi.max(lo + 3).min(out.len())].to_vec())
}

/// Curvature of `iterations` successive iterates of `curve` (index 0 is the
/// curve itself).
pub fn curvature_iterates<M: Dynamics + ?Sized>(
    map: &M,
    curve: &[TorusPoint],
    cone: &ConeParams,
    zeta: f64,
    iterations: usize,
    spacing: f64,
) -> Result<Vec<f64>> {
    let mut c = curve.to_vec();
    let mut out = vec![holder_constant(&c, cone, zeta, CHART_RADIUS)?.kappa];
    for step in 1..=iterations {
        c = iterate_curve(map, &c, cone, spacing, 2.0 * CHART_RADIUS, step)?;
        out.push(holder_constant(&c, cone, zeta, CHART_RADIUS)?.kappa);
    }
    Ok(out)
}

/// Iterates `curve` and reports the largest curvature seen, with the
/// empirical bound `C₁ = 2 × max over the first `calibration` iterates`.
pub fn curvature_bound<M: Dynamics + ?Sized>(
    map: &M,
    curve: &[TorusPoint],
    cone: &ConeParams,
    zeta: f64,
    iterations: usize,
    calibration: usize,
) -> Result<CurvatureReport> {
    let k = curvature_iterates(map, curve, cone, zeta, iterations, 1e-3)?;
    let cal = k[..=calibration.min(iterations)].iter().cloned().fold(0.0, f64::max);
    let kappa = k.iter().cloned().fold(0.0, f64::max);
    Ok(CurvatureReport { holder_exponent: zeta, kappa, c1_bound: Some(2.0 * cal) })
}
