//! Additive uniform noise on the torus and random orbits of the skew product.
//!
//! A random orbit applies the map and then adds a translation drawn from the
//! uniform law on the closed disk of radius ε:
//! `x_{j+1} = f(x_j) + t_{j+1} (mod 1)`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::torus::{Dynamics, TorusPoint, Vec2};

/// Uniform noise on the disk of radius `epsilon`, added after the map.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub epsilon: f64,
}

impl NoiseModel {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(domain(format!("noise radius {epsilon} must be finite and >= 0")));
        }
        Ok(NoiseModel { epsilon })
    }

    pub fn deterministic() -> Self {
        NoiseModel { epsilon: 0.0 }
    }

    /// Whether `t` is in the support of the noise law.
    pub fn supports(&self, t: Vec2) -> bool {
        t.norm() <= self.epsilon
    }
}

/// SplitMix64 finalizer, used to derive per-stream seeds.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent random stream for one worker or one ensemble member.
///
/// Stream `j` of master seed `s` is a ChaCha8 generator seeded with
/// `s ⊕ mix64(j)`.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngStream { seed, stream_id, rng: ChaCha8Rng::seed_from_u64(seed ^ mix64(stream_id)) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Lebesgue-random point of T².
    pub fn torus_point(&mut self) -> TorusPoint {
        let x = self.uniform();
        let y = self.uniform();
        TorusPoint::from_lift(Vec2::new(x, y))
    }
}

/// Uniform sample on the closed disk of radius ε (polar method, r = ε√u).
pub fn sample_noise(model: &NoiseModel, rng: &mut RngStream) -> Vec2 {
    if model.epsilon == 0.0 {
        return Vec2::ZERO;
    }
    let r = model.epsilon * rng.uniform().sqrt();
    let th = std::f64::consts::TAU * rng.uniform();
    let t = Vec2::new(r * th.cos(), r * th.sin());
    // cos/sin rounding can push |t| a few ulps past r
    let n = t.norm();
    let t = if n > model.epsilon { (model.epsilon / n) * t } else { t };
    assert!(t.norm() <= model.epsilon, "noise sample outside the disk");
    t
}

/// One noisy step `f_t(x) = f(x) + t`.
pub fn noisy_step<M: Dynamics + ?Sized>(map: &M, x: TorusPoint, t: Vec2) -> TorusPoint {
    TorusPoint::from_lift(map.apply_lift(x) + t)
}

/// A realisation of the skew product: points and the noises that produced them.
///
/// `noises[0]` is zero; `points[j + 1] = wrap(f(points[j]) + noises[j + 1])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomOrbit {
    pub points: Vec<TorusPoint>,
    pub noises: Vec<Vec2>,
}

impl RandomOrbit {
    /// Number of steps (points minus one).
    pub fn steps(&self) -> usize {
        self.points.len().saturating_sub(1)
    }

    /// Largest deviation from the orbit relation when replayed through `map`.
    pub fn replay_error<M: Dynamics + ?Sized>(&self, map: &M) -> f64 {
        self.points
            .windows(2)
            .zip(&self.noises[1..])
            .map(|(w, t)| noisy_step(map, w[0], *t).distance(w[1]))
            .fold(0.0, f64::max)
    }

    /// CSV with columns `step,x,y,tx,ty`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,x,y,tx,ty\n");
        for (j, (p, t)) in self.points.iter().zip(&self.noises).enumerate() {
            out.push_str(&format!("{j},{:.16e},{:.16e},{:.16e},{:.16e}\n", p.x(), p.y(), t.x, t.y));
        }
        out
    }
}

/// Streaming random orbit: yields `(point, noise)` pairs without storing them.
pub struct OrbitStepper<'a, M: Dynamics + ?Sized> {
    map: &'a M,
    model: NoiseModel,
    rng: RngStream,
    current: TorusPoint,
}

impl<'a, M: Dynamics + ?Sized> OrbitStepper<'a, M> {
    pub fn new(map: &'a M, model: NoiseModel, x0: TorusPoint, rng: RngStream) -> Self {
        OrbitStepper { map, model, rng, current: x0 }
    }

    pub fn current(&self) -> TorusPoint {
        self.current
    }

    /// Advances one step and returns the new point with its noise.
    pub fn step(&mut self) -> (TorusPoint, Vec2) {
        let t = sample_noise(&self.model, &mut self.rng);
        self.current = noisy_step(self.map, self.current, t);
        (self.current, t)
    }
}

/// `n` steps of the random orbit started at `x0`.
pub fn random_orbit<M: Dynamics + ?Sized>(
    map: &M,
    model: &NoiseModel,
    x0: TorusPoint,
    n: usize,
    rng: RngStream,
) -> Result<RandomOrbit> {
    if n == 0 {
        return Err(domain("random orbit needs n >= 1"));
    }
    let mut points = Vec::with_capacity(n + 1);
    let mut noises = Vec::with_capacity(n + 1);
    points.push(x0);
    noises.push(Vec2::ZERO);
    let mut stepper = OrbitStepper::new(map, *model, x0, rng);
    for _ in 0..n {
        let (p, t) = stepper.step();
        points.push(p);
        noises.push(t);
    }
    Ok(RandomOrbit { points, noises })
}

/// Ensemble member `i`: Lebesgue-random start and noise, both from stream `i`.
pub fn ensemble_member<M: Dynamics + ?Sized>(
    map: &M,
    model: &NoiseModel,
    seed: u64,
    i: usize,
    n: usize,
) -> Result<RandomOrbit> {
    let mut rng = RngStream::new(seed, i as u64);
    let x0 = rng.torus_point();
    random_orbit(map, model, x0, n, rng)
}

/// Monte Carlo evidence for the two non-degeneracy conditions at one point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NondegeneracyReport {
    pub epsilon: f64,
    pub samples: usize,
    /// Radius of the largest disk around `f(x)` fully covered by one-step images.
    pub xi: f64,
    pub xi_ratio: f64,
    /// Condition 1: `xi >= 0.9 ε`.
    pub covers_neighborhood: bool,
    /// Largest histogram density of the one-step images (per unit area).
    pub max_density: f64,
    /// `1 / (π ε²)`, the density of the uniform disk law.
    pub disk_density: f64,
    /// Condition 2: `max_density <= 1.1 · disk_density`.
    pub bounded_density: bool,
}

/// Grid resolution of the coverage test around `f(x)`.
pub const COVERAGE_GRID: usize = 64;
/// Grid resolution of the density test around `f(x)`.
pub const DENSITY_GRID: usize = 8;

/// Samples `f_t(x)` and checks that the images cover a ball around `f(x)`
/// and have a bounded density.
pub fn check_nondegeneracy<M: Dynamics + ?Sized>(
    map: &M,
    model: &NoiseModel,
    x: TorusPoint,
    samples: usize,
    rng: &mut RngStream,
) -> NondegeneracyReport {
    let eps = model.epsilon;
    let disk_density = if eps > 0.0 { 1.0 / (std::f64::consts::PI * eps * eps) } else { f64::INFINITY };
    if eps == 0.0 || samples == 0 {
        return NondegeneracyReport {
            epsilon: eps,
            samples,
            xi: 0.0,
            xi_ratio: 0.0,
            covers_neighborhood: false,
            max_density: f64::INFINITY,
            disk_density,
            bounded_density: false,
        };
    }
    let fx = map.apply(x);
    let mut coverage = vec![0u32; COVERAGE_GRID * COVERAGE_GRID];
    let mut density = vec![0u32; DENSITY_GRID * DENSITY_GRID];
    let cell_index = |v: f64, grid: usize| -> Option<usize> {
        let k = ((v + eps) / (2.0 * eps) * grid as f64).floor();
        (k >= 0.0 && k < grid as f64).then_some(k as usize)
    };
    for _ in 0..samples {
        let t = sample_noise(model, rng);
        let d = fx.displacement_to(noisy_step(map, x, t));
        if let (Some(i), Some(j)) = (cell_index(d.y, COVERAGE_GRID), cell_index(d.x, COVERAGE_GRID)) {
            coverage[i * COVERAGE_GRID + j] += 1;
        }
        if let (Some(i), Some(j)) = (cell_index(d.y, DENSITY_GRID), cell_index(d.x, DENSITY_GRID)) {
            density[i * DENSITY_GRID + j] += 1;
        }
    }
    // distance from f(x) to the nearest point of each empty cell
    let h = 2.0 * eps / COVERAGE_GRID as f64;
    let mut xi = eps;
    for i in 0..COVERAGE_GRID {
        for j in 0..COVERAGE_GRID {
            if coverage[i * COVERAGE_GRID + j] > 0 {
                continue;
            }
            let (x0, y0) = (-eps + j as f64 * h, -eps + i as f64 * h);
            let nx = 0f64.clamp(x0, x0 + h);
            let ny = 0f64.clamp(y0, y0 + h);
            xi = xi.min(nx.hypot(ny));
        }
    }
    let cell_area = (2.0 * eps / DENSITY_GRID as f64).powi(2);
    let max_density = *density.iter().max().unwrap() as f64 / (samples as f64 * cell_area);
    NondegeneracyReport {
        epsilon: eps,
        samples,
        xi,
        xi_ratio: xi / eps,
        covers_neighborhood: xi >= 0.9 * eps,
        max_density,
        disk_density,
        bounded_density: max_density <= 1.1 * disk_density,
    }
}
