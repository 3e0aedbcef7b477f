//! Pliss selection, α-hyperbolic times and their two payoffs along
//! cu-curves: backward contraction and bounded distortion.
//!
//! Hyperbolic times are counted along a [`CocycleTrace`]: time `m` (1-based)
//! is the orbit point `trace.start + m`, reached after the steps with values
//! `a_1, …, a_m` (`trace.values[0..m]`). `m` is α-hyperbolic when
//! `a_{m−k+1} + … + a_m ≤ k log α` for every `k = 1, …, m`.

use serde::{Deserialize, Serialize};

use crate::cones::{in_cone, CocycleTrace, ConeKind, ConeParams, CuTracker};
use crate::error::{domain, Error, Result};
use crate::noise::{noisy_step, sample_noise, NoiseModel, RandomOrbit, RngStream};
use crate::par;
use crate::stats::Summary;
use crate::torus::{Dynamics, TorusPoint, Vec2};

/// Input of the Pliss lemma.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlissInput {
    pub values: Vec<f64>,
    pub c1: f64,
    pub c2: f64,
    #[serde(rename = "H")]
    pub h: f64,
}

impl PlissInput {
    pub fn validate(&self) -> Result<()> {
        if !(self.h >= self.c2 && self.c2 > self.c1) {
            return Err(domain(format!("need H >= c2 > c1, got H = {}, c2 = {}, c1 = {}", self.h, self.c2, self.c1)));
        }
        if let Some(a) = self.values.iter().find(|a| !(**a <= self.h)) {
            return Err(domain(format!("value {a} exceeds H = {}", self.h)));
        }
        Ok(())
    }

    /// `ζ = (c2 − c1) / (H − c1)`.
    pub fn zeta(&self) -> f64 {
        (self.c2 - self.c1) / (self.h - self.c1)
    }

    /// Whether `Σ a_j ≥ c2 N`, the hypothesis of the cardinality bound.
    pub fn has_good_average(&self) -> bool {
        self.values.iter().sum::<f64>() >= self.c2 * self.values.len() as f64
    }
}

/// Online Pliss selection: index `n` is selected iff its prefix sum of
/// `a_j − c1` reaches the running maximum of all earlier prefix sums
/// (ties count as selected).
#[derive(Clone, Copy, Debug)]
pub struct PlissScanner {
    c1: f64,
    prefix: f64,
    running_max: f64,
    n: usize,
}

impl PlissScanner {
    pub fn new(c1: f64) -> Self {
        PlissScanner { c1, prefix: 0.0, running_max: 0.0, n: 0 }
    }

    /// Feeds `a_{n+1}`; returns whether `n + 1` is selected.
    pub fn push(&mut self, a: f64) -> bool {
        self.n += 1;
        self.prefix += a - self.c1;
        let selected = self.prefix >= self.running_max;
        if selected {
            self.running_max = self.prefix;
        }
        selected
    }

    pub fn count(&self) -> usize {
        self.n
    }
}

/// Every `n_i ∈ [1, N]` with `Σ_{j=n+1}^{n_i} a_j ≥ c1 (n_i − n)` for all
/// `0 ≤ n < n_i`, in linear time.
pub fn pliss_select(input: &PlissInput) -> Result<Vec<usize>> {
    input.validate()?;
    Ok(select_by_prefix(&input.values, input.c1))
}

fn select_by_prefix(values: &[f64], c1: f64) -> Vec<usize> {
    let mut scan = PlissScanner::new(c1);
    values.iter().enumerate().filter_map(|(i, a)| scan.push(*a).then_some(i + 1)).collect()
}

/// Quadratic reference for [`pliss_select`]: checks every `n < n_i` by a
/// backward sum.
pub fn pliss_select_quadratic(values: &[f64], c1: f64) -> Vec<usize> {
    (1..=values.len())
        .filter(|&ni| {
            let mut sum = 0.0;
            (0..ni).rev().all(|n| {
                sum += values[n] - c1;
                sum >= 0.0
            })
        })
        .collect()
}

/// Replays the definition at time `m`: `a_{m−k+1} + … + a_m ≤ k log α + tol`
/// for every `k = 1, …, m`.
pub fn is_hyperbolic_time(values: &[f64], m: usize, alpha: f64, tol: f64) -> bool {
    let la = alpha.ln();
    let mut sum = 0.0;
    (1..=m).all(|k| {
        sum += values[m - k];
        sum <= k as f64 * la + tol
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicTimeReport {
    pub alpha: f64,
    /// Hyperbolic times along the trace, 1-based and strictly increasing.
    pub indices: Vec<usize>,
    /// `|indices| / N`.
    pub density: f64,
    /// `ζ = (c2 − c1)/(H − c1)` with `c1 = −log α`, `c2` the mean and `H` the
    /// max of `−a_j`; `None` when `c2 ≤ c1`.
    pub gamma_bound: Option<f64>,
}

impl HyperbolicTimeReport {
    /// CSV with column `n`.
    pub fn indices_csv(&self) -> String {
        let mut out = String::from("n\n");
        for n in &self.indices {
            out.push_str(&format!("{n}\n"));
        }
        out
    }
}

/// α-hyperbolic times of a cocycle trace (Pliss on `−a_j` with `c1 = −log α`).
pub fn detect_hyperbolic_times(trace: &CocycleTrace, alpha: f64) -> Result<HyperbolicTimeReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(domain(format!("alpha {alpha} outside (0, 1)")));
    }
    if trace.is_empty() {
        return Err(domain("empty cocycle trace"));
    }
    let c1 = -alpha.ln();
    let neg: Vec<f64> = trace.values.iter().map(|a| -a).collect();
    let indices = select_by_prefix(&neg, c1);
    let n = neg.len() as f64;
    let c2 = neg.iter().sum::<f64>() / n;
    let h = neg.iter().cloned().fold(f64::NEG_INFINITY, f64::max).max(c2);
    let gamma_bound = (c2 > c1).then(|| (c2 - c1) / (h - c1));
    Ok(HyperbolicTimeReport { alpha, density: indices.len() as f64 / n, indices, gamma_bound })
}

/// `α = exp(−c/4)` with `c = −mean(a_j)`, the measured expansion rate.
pub fn choose_alpha(trace: &CocycleTrace) -> Result<f64> {
    let c = -trace.mean();
    if !(c > 0.0) {
        return Err(domain(format!("trace is not expanding on average (c = {c})")));
    }
    Ok((-c / 4.0).exp())
}

/// Steps of direction settling before a trace starts.
pub const SETTLE: usize = 30;

/// Hyperbolic-time density of one streamed random orbit: `SETTLE` steps to
/// settle the cu direction, then `n` counted steps.
pub fn orbit_density<M: Dynamics + ?Sized>(
    map: &M,
    model: &NoiseModel,
    alpha: f64,
    n: usize,
    mut rng: RngStream,
) -> f64 {
    let mut x = rng.torus_point();
    let mut tracker = CuTracker::new(map.splitting().e_u);
    let mut scan = PlissScanner::new(-alpha.ln());
    let mut hits = 0usize;
    for j in 0..SETTLE + n {
        let a = tracker.step(map, x);
        if j >= SETTLE && scan.push(-a) {
            hits += 1;
        }
        x = noisy_step(map, x, sample_noise(model, &mut rng));
    }
    hits as f64 / n as f64
}

/// Per-orbit hyperbolic-time densities over an ensemble; orbit `i` uses
/// stream `i` of `seed`.
pub fn estimate_density<M: Dynamics + ?Sized>(
    map: &M,
    model: &NoiseModel,
    ensemble: usize,
    n: usize,
    alpha: f64,
    seed: u64,
) -> Result<Summary> {
    if ensemble == 0 || n < 100 {
        return Err(domain("density estimation needs ensemble >= 1 and n >= 100"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(domain(format!("alpha {alpha} outside (0, 1)")));
    }
    let d = par::map_indexed(ensemble, |i| orbit_density(map, model, alpha, n, RngStream::new(seed, i as u64)));
    Ok(Summary::of(&d))
}

/// Default locality scale of the hyperbolic-time payoffs.
pub const DELTA1: f64 = 0.05;

/// Target vertex spacing of evolved curves.
pub const MAX_SPACING: f64 = 1e-3;

/// Windows are restarted once the predicted preimage is smaller than this.
pub const MIN_WINDOW: f64 = 1e-9;

const INITIAL_HALF_VERTICES: usize = 32;

/// A polyline tangent to the cu cone, with `vertices[base]` on the orbit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CuPolyline {
    pub vertices: Vec<TorusPoint>,
    pub base: usize,
}

impl CuPolyline {
    pub fn new(vertices: Vec<TorusPoint>, base: usize) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(domain("a cu-polyline needs at least 3 vertices"));
        }
        if base >= vertices.len() {
            return Err(Error::Range(format!("base vertex {base} of {}", vertices.len())));
        }
        Ok(CuPolyline { vertices, base })
    }

    /// Straight segment centered at `center`, `2 * half_count` pieces of length `spacing`.
    pub fn segment(center: TorusPoint, dir: Vec2, spacing: f64, half_count: usize) -> Result<Self> {
        let u = dir.normalized().ok_or_else(|| domain("zero segment direction"))?;
        let vertices =
            (0..=2 * half_count).map(|k| center.translate(((k as f64 - half_count as f64) * spacing) * u)).collect();
        CuPolyline::new(vertices, half_count)
    }

    fn tangent_at_base(&self) -> Vec2 {
        let v = &self.vertices;
        let b = self.base;
        let lo = b.saturating_sub(1);
        let hi = (b + 1).min(v.len() - 1);
        v[lo].displacement_to(v[hi]).normalized().expect("distinct vertices")
    }

    /// Vertices in chart coordinates around the base, with arclength positions.
    fn chart(&self) -> (Vec<Vec2>, Vec<f64>) {
        let b = self.base;
        let mut pts = vec![Vec2::ZERO; self.vertices.len()];
        for i in b + 1..self.vertices.len() {
            pts[i] = pts[i - 1] + self.vertices[i - 1].displacement_to(self.vertices[i]);
        }
        for i in (0..b).rev() {
            pts[i] = pts[i + 1] + self.vertices[i + 1].displacement_to(self.vertices[i]);
        }
        let mut s = vec![0.0; pts.len()];
        for i in b + 1..pts.len() {
            s[i] = s[i - 1] + (pts[i] - pts[i - 1]).norm();
        }
        for i in (0..b).rev() {
            s[i] = s[i + 1] - (pts[i + 1] - pts[i]).norm();
        }
        (pts, s)
    }

    /// Sub-polyline of arclength `half_len` on each side of the base, with
    /// interpolated endpoints (clamped to the available curve).
    fn clip(&self, half_len: f64) -> Vec<(Vec2, Vec2)> {
        let (pts, s) = self.chart();
        let at = |target: f64| -> (Vec2, Vec2) {
            let target = target.clamp(s[0], s[s.len() - 1]);
            let i = s.partition_point(|v| *v < target).clamp(1, s.len() - 1);
            let len = s[i] - s[i - 1];
            let w = if len > 0.0 { (target - s[i - 1]) / len } else { 0.0 };
            let d = pts[i] - pts[i - 1];
            (pts[i - 1] + w * d, d.normalized().expect("distinct vertices"))
        };
        let mut out = Vec::with_capacity(2 * INITIAL_HALF_VERTICES + 1);
        for k in 0..=2 * INITIAL_HALF_VERTICES {
            let t = (k as f64 / INITIAL_HALF_VERTICES as f64 - 1.0) * half_len;
            out.push(at(t));
        }
        out
    }
}

#[derive(Clone, Debug)]
struct WindowVertex {
    /// Positions at times `m0, m0 + 1, …`.
    history: Vec<TorusPoint>,
    tangent: Vec2,
    log_stretch: f64,
}

/// A cu-curve evolved from time `m0` to the hyperbolic time `m` along one
/// orbit, refined so that consecutive vertices stay within `MAX_SPACING`.
#[derive(Clone, Debug)]
pub struct CurveWindow {
    pub m0: usize,
    pub hyp_time: usize,
    /// Log-stretch of the curve tangent at the orbit point for each step `0..m`.
    pub base_log_stretch: Vec<f64>,
    /// `arclength[τ][v]`: signed arclength from the base vertex at time `m0 + τ`.
    pub arclength: Vec<Vec<f64>>,
    /// Log tangential stretch of `f^{m − m0}` at each vertex.
    pub log_stretch: Vec<f64>,
    pub base_vertex: usize,
}

fn step_vertex<M: Dynamics + ?Sized>(map: &M, v: &mut WindowVertex, noise: Vec2) {
    let p = *v.history.last().unwrap();
    let w = map.jacobian(p).apply(v.tangent);
    let n = w.norm();
    v.log_stretch += n.ln();
    v.tangent = Vec2::new(w.x / n, w.y / n);
    v.history.push(noisy_step(map, p, noise));
}

/// Evolves `curve` (through `orbit.points[origin]`) along the orbit for
/// `hyp_time` steps, restarting at the latest resolvable time.
pub fn evolve_window<M: Dynamics + ?Sized>(
    map: &M,
    orbit: &RandomOrbit,
    curve: &CuPolyline,
    cone: &ConeParams,
    origin: usize,
    hyp_time: usize,
    delta1: f64,
) -> Result<CurveWindow> {
    let m = hyp_time;
    if m == 0 || origin + m >= orbit.points.len() {
        return Err(Error::Range(format!("window {origin} + {m} outside an orbit of {} points", orbit.points.len())));
    }
    if !(delta1 > 0.0 && delta1 < 0.25) {
        return Err(domain(format!("delta1 {delta1} outside (0, 0.25)")));
    }
    let base_point = orbit.points[origin];
    if curve.vertices[curve.base].distance(base_point) > 1e-12 {
        return Err(domain("curve does not pass through the orbit point"));
    }
    let t0 = curve.tangent_at_base();
    if !in_cone(t0, cone, ConeKind::Cu)? {
        return Err(domain("curve tangent outside the cu cone"));
    }

    // tangent cocycle along the orbit
    let mut base_log_stretch = Vec::with_capacity(m);
    let mut base_tangents = Vec::with_capacity(m + 1);
    let mut t = t0;
    for j in 0..m {
        base_tangents.push(t);
        let w = map.jacobian(orbit.points[origin + j]).apply(t);
        let n = w.norm();
        base_log_stretch.push(n.ln());
        t = Vec2::new(w.x / n, w.y / n);
    }
    base_tangents.push(t);

    // latest restart time whose predicted half-length stays resolvable
    let mut m0 = 0;
    let mut acc = 0.0;
    for j in (0..m).rev() {
        acc += base_log_stretch[j];
        if 2.0 * delta1 * (-acc).exp() < MIN_WINDOW {
            m0 = j + 1;
            break;
        }
    }
    let half = 2.0 * delta1 * (-base_log_stretch[m0..].iter().sum::<f64>()).exp();

    let start = orbit.points[origin + m0];
    let initial: Vec<(Vec2, Vec2)> = if m0 == 0 {
        curve.clip(half)
    } else {
        let u = base_tangents[m0];
        (0..=2 * INITIAL_HALF_VERTICES)
            .map(|k| ((k as f64 / INITIAL_HALF_VERTICES as f64 - 1.0) * half * u, u))
            .collect()
    };
    // a clipped curve shorter than the window repeats its endpoints
    let base_pos = initial[INITIAL_HALF_VERTICES].0;
    let mut base_vertex = 0;
    let mut verts: Vec<WindowVertex> = Vec::with_capacity(initial.len());
    let mut last: Option<Vec2> = None;
    for (k, (p, u)) in initial.iter().enumerate() {
        if k == INITIAL_HALF_VERTICES {
            base_vertex = verts.len();
            verts.push(WindowVertex { history: vec![start], tangent: base_tangents[m0], log_stretch: 0.0 });
        } else if last != Some(*p) && *p != base_pos {
            verts.push(WindowVertex { history: vec![start.translate(*p - base_pos)], tangent: *u, log_stretch: 0.0 });
        }
        last = Some(*p);
    }
    if verts.len() < 2 {
        return Err(domain("curve too short around the orbit point"));
    }

    for (tau, j) in (m0..m).enumerate() {
        let noise = orbit.noises[origin + j + 1];
        for v in verts.iter_mut() {
            step_vertex(map, v, noise);
        }
        // refine: insert time-m0 midpoints until the current spacing is fine
        let mut i = 0;
        while i + 1 < verts.len() {
            let now = tau + 1;
            let gap = verts[i].history[now].distance(verts[i + 1].history[now]);
            if gap <= MAX_SPACING {
                i += 1;
                continue;
            }
            let a = verts[i].history[0];
            let d = a.displacement_to(verts[i + 1].history[0]);
            let tangent = d.normalized().unwrap_or(verts[i].tangent);
            let mut v = WindowVertex { history: vec![a.translate(0.5 * d)], tangent, log_stretch: 0.0 };
            for jj in m0..=j {
                step_vertex(map, &mut v, orbit.noises[origin + jj + 1]);
            }
            verts.insert(i + 1, v);
            if i < base_vertex {
                base_vertex += 1;
            }
        }
        for w in verts.windows(2) {
            let d = w[0].history[tau + 1].displacement_to(w[1].history[tau + 1]);
            if d == Vec2::ZERO || !in_cone(d, cone, ConeKind::Cu)? {
                return Err(Error::CurveLeftCone { step: j + 1 });
            }
        }
    }

    let times = m - m0 + 1;
    let mut arclength = Vec::with_capacity(times);
    for tau in 0..times {
        let mut s = vec![0.0; verts.len()];
        for i in base_vertex + 1..verts.len() {
            s[i] = s[i - 1] + verts[i - 1].history[tau].distance(verts[i].history[tau]);
        }
        for i in (0..base_vertex).rev() {
            s[i] = s[i + 1] - verts[i + 1].history[tau].distance(verts[i].history[tau]);
        }
        arclength.push(s);
    }
    Ok(CurveWindow {
        m0,
        hyp_time: m,
        base_log_stretch,
        arclength,
        log_stretch: verts.iter().map(|v| v.log_stretch).collect(),
        base_vertex,
    })
}

impl CurveWindow {
    /// Vertices whose image lies within `delta1` of the base along the curve.
    fn local_vertices(&self, delta1: f64) -> impl Iterator<Item = usize> + '_ {
        let last = self.arclength.last().unwrap();
        (0..last.len()).filter(move |&v| v != self.base_vertex && last[v].abs() <= delta1)
    }

    /// Half-lengths of the final image on each side of the base.
    pub fn image_extent(&self) -> (f64, f64) {
        let last = self.arclength.last().unwrap();
        (-last[0], last[last.len() - 1])
    }
}

/// Backward contraction at one hyperbolic time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub alpha: f64,
    pub hyp_time: usize,
    pub m0: usize,
    /// `ratios[k]` for `k = 0..=hyp_time`: the largest `d_S(f^{m−k} y, f^{m−k} x) / d_S(f^m y, f^m x)`.
    pub ratios: Vec<f64>,
    /// `max_k ratios[k] / α^{k/2}`.
    pub worst_excess: f64,
    pub vertices_checked: usize,
}

impl ContractionReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.worst_excess <= 1.0 + tol
    }
}

/// Ratios of curve distances at times `m − k` and `m` for all `k`.
#[allow(clippy::too_many_arguments)]
pub fn check_backward_contraction<M: Dynamics + ?Sized>(
    map: &M,
    orbit: &RandomOrbit,
    curve: &CuPolyline,
    cone: &ConeParams,
    origin: usize,
    hyp_time: usize,
    alpha: f64,
    delta1: f64,
) -> Result<ContractionReport> {
    let w = evolve_window(map, orbit, curve, cone, origin, hyp_time, delta1)?;
    Ok(contraction_from_window(&w, alpha, delta1))
}

pub fn contraction_from_window(w: &CurveWindow, alpha: f64, delta1: f64) -> ContractionReport {
    let m = w.hyp_time;
    let resolved = m - w.m0;
    let last = w.arclength.last().unwrap();
    let local: Vec<usize> = w.local_vertices(delta1).collect();
    let mut ratios = vec![1.0; m + 1];
    for (k, r) in ratios.iter_mut().enumerate().take(resolved + 1).skip(1) {
        let s = &w.arclength[resolved - k];
        *r = local.iter().map(|&v| s[v].abs() / last[v].abs()).fold(0.0, f64::max);
    }
    // below resolution the curve is linear: contraction is the tangent cocycle
    let mut acc = 0.0;
    for k in resolved + 1..=m {
        acc += w.base_log_stretch[m - k];
        ratios[k] = ratios[resolved] * (-acc).exp();
    }
    let worst_excess = ratios.iter().enumerate().map(|(k, r)| r / alpha.powf(0.5 * k as f64)).fold(0.0, f64::max);
    ContractionReport { alpha, hyp_time: m, m0: w.m0, ratios, worst_excess, vertices_checked: local.len() }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    /// Calibrated bound `C₂` the ratio is compared against.
    pub c2_constant: f64,
    /// Largest `J(y)/J(x)` over vertex pairs with image distance ≤ δ₁.
    pub max_ratio: f64,
    pub pairs_checked: usize,
    pub delta1: f64,
    pub hyp_time: usize,
}

impl DistortionReport {
    pub fn passes(&self) -> bool {
        self.max_ratio >= 1.0 && self.max_ratio <= self.c2_constant
    }
}

/// Tangential stretch of `f^m` across pairs of nearby curve points.
#[allow(clippy::too_many_arguments)]
pub fn check_distortion<M: Dynamics + ?Sized>(
    map: &M,
    orbit: &RandomOrbit,
    curve: &CuPolyline,
    cone: &ConeParams,
    origin: usize,
    hyp_time: usize,
    delta1: f64,
    c2_constant: f64,
) -> Result<DistortionReport> {
    let w = evolve_window(map, orbit, curve, cone, origin, hyp_time, delta1)?;
    Ok(distortion_from_window(&w, delta1, c2_constant))
}

pub fn distortion_from_window(w: &CurveWindow, delta1: f64, c2_constant: f64) -> DistortionReport {
    let last = w.arclength.last().unwrap();
    let mut idx: Vec<usize> = w.local_vertices(delta1).collect();
    idx.push(w.base_vertex);
    idx.sort_unstable();
    let mut max_log: f64 = 0.0;
    let mut pairs = 0;
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            if last[j] - last[i] > delta1 {
                break;
            }
            pairs += 1;
            max_log = max_log.max((w.log_stretch[j] - w.log_stretch[i]).abs());
        }
    }
    DistortionReport { c2_constant, max_ratio: max_log.exp(), pairs_checked: pairs, delta1, hyp_time: w.hyp_time }
}

/// Max/min density of the pushed-forward arclength measure on the δ₁-local
/// image, relative to arclength (`∝ 1 / J`).
pub fn density_ratio_from_window(w: &CurveWindow, delta1: f64) -> f64 {
    let mut idx: Vec<usize> = w.local_vertices(delta1).collect();
    idx.push(w.base_vertex);
    let (lo, hi) = idx
        .iter()
        .map(|&v| w.log_stretch[v])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), l| (lo.min(l), hi.max(l)));
    (hi - lo).exp()
}
