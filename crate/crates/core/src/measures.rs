//! Stationary and physical measure estimation: Birkhoff averages, grid
//! histograms, the Ulam transfer operator, distances between measures,
//! basin clustering and the zero-noise experiments.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::cones::{ConeParams, CuTracker};
use crate::error::{domain, Error, Result};
use crate::hyperbolic::{evolve_window, CuPolyline, CurveWindow, SETTLE};
use crate::noise::{NoiseModel, OrbitStepper, RandomOrbit, RngStream};
use crate::par;
use crate::stats::{log_linear_decay, quantile, LineFit, Summary};
use crate::torus::{Dynamics, TorusMap, TorusPoint, Vec2};

/// Normalization tolerance of histograms and stochastic rows.
pub const MASS_TOL: f64 = 1e-9;

/// Default burn-in of long-orbit estimators.
pub const BURN_IN: usize = 1000;

/// Probability vector on the `n × n` grid of `[0, 1)²`, row-major by `y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridHistogram {
    n: usize,
    mass: Vec<f64>,
}

/// Cell of `p` on the `n × n` grid.
pub fn cell_of(p: TorusPoint, n: usize) -> usize {
    let col = ((p.x() * n as f64) as usize).min(n - 1);
    let row = ((p.y() * n as f64) as usize).min(n - 1);
    row * n + col
}

impl GridHistogram {
    pub fn from_mass(n: usize, mass: Vec<f64>) -> Result<Self> {
        if n == 0 || mass.len() != n * n {
            return Err(domain(format!("{} masses for an {n} x {n} grid", mass.len())));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > MASS_TOL || mass.iter().any(|m| !(*m >= 0.0)) {
            return Err(domain(format!("not a probability vector (total {total})")));
        }
        Ok(GridHistogram { n, mass })
    }

    pub fn from_counts(n: usize, counts: &[u64]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(domain("histogram of zero points"));
        }
        GridHistogram::from_mass(n, counts.iter().map(|c| *c as f64 / total as f64).collect())
    }

    pub fn uniform(n: usize) -> Self {
        let m = 1.0 / (n * n) as f64;
        GridHistogram { n, mass: vec![m; n * n] }
    }

    pub fn point_mass(n: usize, cell: usize) -> Self {
        let mut mass = vec![0.0; n * n];
        mass[cell] = 1.0;
        GridHistogram { n, mass }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.mass[row * self.n + col]
    }

    /// CSV with columns `row,col,mass`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,col,mass\n");
        for (k, m) in self.mass.iter().enumerate() {
            out.push_str(&format!("{},{},{:.16e}\n", k / self.n, k % self.n, m));
        }
        out
    }

    /// `n` as little-endian u64, then `n²` little-endian f64.
    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 8 * self.mass.len());
        out.extend_from_slice(&(self.n as u64).to_le_bytes());
        for m in &self.mass {
            out.extend_from_slice(&m.to_le_bytes());
        }
        out
    }

    pub fn from_binary(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 {
            return Err(domain("truncated histogram header"));
        }
        let n = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
        let body = &bytes[8..];
        if n == 0 || body.len() != 8 * n * n {
            return Err(domain(format!("histogram body of {} bytes for n = {n}", body.len())));
        }
        let mass = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        GridHistogram::from_mass(n, mass)
    }

    /// Mass on the columns (`axis = 0`, the x-marginal) or on the rows.
    pub fn marginal(&self, axis: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (k, m) in self.mass.iter().enumerate() {
            let idx = if axis == 0 { k % self.n } else { k / self.n };
            out[idx] += m;
        }
        out
    }
}

/// `(1/n) Σ_{j<n} φ(x_j)` over the first `n = steps` points (the single
/// point of a zero-step orbit).
pub fn birkhoff_average(orbit: &RandomOrbit, observable: impl Fn(TorusPoint) -> f64) -> Result<f64> {
    let pts = match orbit.steps() {
        0 => &orbit.points[..],
        n => &orbit.points[..n],
    };
    if pts.is_empty() {
        return Err(domain("empty orbit"));
    }
    Ok(pts.iter().map(|p| observable(*p)).sum::<f64>() / pts.len() as f64)
}

/// Normalized cell counts of `points[burn_in..]` over all orbits.
pub fn empirical_histogram(orbits: &[RandomOrbit], n: usize, burn_in: usize) -> Result<GridHistogram> {
    if n == 0 {
        return Err(domain("grid size must be >= 1"));
    }
    if orbits.iter().any(|o| o.points.len() <= burn_in) {
        return Err(domain(format!("an orbit is not longer than the burn-in {burn_in}")));
    }
    let mut counts = vec![0u64; n * n];
    for o in orbits {
        for p in &o.points[burn_in..] {
            counts[cell_of(*p, n)] += 1;
        }
    }
    GridHistogram::from_counts(n, &counts)
}

/// Histogram of `ensemble` streamed orbits (member `i` uses stream `i`),
/// counting points `burn_in..=steps`.
pub fn ensemble_histogram<M: Dynamics + ?Sized>(
    map: &M,
    model: &NoiseModel,
    ensemble: usize,
    steps: usize,
    burn_in: usize,
    grid_n: usize,
    seed: u64,
) -> Result<GridHistogram> {
    if ensemble == 0 || steps < burn_in || grid_n == 0 {
        return Err(domain("ensemble histogram needs ensemble >= 1, steps >= burn_in, grid >= 1"));
    }
    let per_orbit = par::map_indexed(ensemble, |i| {
        let mut rng = RngStream::new(seed, i as u64);
        let x0 = rng.torus_point();
        let mut counts = vec![0u32; grid_n * grid_n];
        let mut stepper = OrbitStepper::new(map, *model, x0, rng);
        if burn_in == 0 {
            counts[cell_of(x0, grid_n)] += 1;
        }
        for j in 1..=steps {
            let (p, _) = stepper.step();
            if j >= burn_in {
                counts[cell_of(p, grid_n)] += 1;
            }
        }
        counts
    });
    let mut counts = vec![0u64; grid_n * grid_n];
    for c in &per_orbit {
        for (t, v) in counts.iter_mut().zip(c) {
            *t += *v as u64;
        }
    }
    GridHistogram::from_counts(grid_n, &counts)
}

/// `Σ |h1 − h2|` over cells.
pub fn l1_distance(h1: &GridHistogram, h2: &GridHistogram) -> Result<f64> {
    if h1.n != h2.n {
        return Err(domain(format!("grid sizes differ ({} vs {})", h1.n, h2.n)));
    }
    Ok(h1.mass.iter().zip(&h2.mass).map(|(a, b)| (a - b).abs()).sum())
}

/// Circular 1-Wasserstein distance between two bin vectors on a circle of
/// length 1.
pub fn circular_w1(p: &[f64], q: &[f64]) -> f64 {
    let n = p.len();
    let mut f = Vec::with_capacity(n);
    let mut acc = 0.0;
    for (a, b) in p.iter().zip(q) {
        acc += a - b;
        f.push(acc);
    }
    let shift = quantile(&f, 0.5);
    f.iter().map(|v| (v - shift).abs()).sum::<f64>() / n as f64
}

/// Circular W1 of the x- and y-marginals.
pub fn marginal_w1(h1: &GridHistogram, h2: &GridHistogram) -> Result<(f64, f64)> {
    if h1.n != h2.n {
        return Err(domain(format!("grid sizes differ ({} vs {})", h1.n, h2.n)));
    }
    Ok((circular_w1(&h1.marginal(0), &h2.marginal(0)), circular_w1(&h1.marginal(1), &h2.marginal(1))))
}

/// Row-stochastic transition matrix between grid cells (CSR), with its
/// transpose stored for deterministic left products.
#[derive(Clone, Debug)]
pub struct UlamOperator {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    col_ptr: Vec<usize>,
    rows_t: Vec<u32>,
    vals_t: Vec<f64>,
}

/// Area of `{0 ≤ x ≤ a, 0 ≤ y ≤ b} ∩ B(0, r)`, extended oddly in `a` and `b`.
fn quadrant_area(a: f64, b: f64, r: f64) -> f64 {
    let sign = a.signum() * b.signum();
    let (a, b) = (a.abs().min(r), b.abs().min(r));
    let r2 = r * r;
    if a * a + b * b <= r2 {
        return sign * a * b;
    }
    let g = |t: f64| 0.5 * (t * (r2 - t * t).max(0.0).sqrt() + r2 * (t / r).clamp(-1.0, 1.0).asin());
    let xa = (r2 - b * b).max(0.0).sqrt();
    sign * (xa * b + g(a) - g(xa))
}

/// Area of `[x0, x1] × [y0, y1] ∩ B(0, r)`.
pub fn disk_rect_area(x0: f64, x1: f64, y0: f64, y1: f64, r: f64) -> f64 {
    quadrant_area(x1, y1, r) - quadrant_area(x0, y1, r) - quadrant_area(x1, y0, r) + quadrant_area(x0, y0, r)
}

/// Adds the uniform law on `B(y, r)` (or the point mass at `y`) to `row`
/// with total weight `w`.
fn deposit(row: &mut Vec<(u32, f64)>, y: Vec2, r: f64, n: usize, w: f64) {
    let nf = n as f64;
    if r == 0.0 {
        row.push((cell_of(TorusPoint::from_lift(y), n) as u32, w));
        return;
    }
    let c0 = ((y.x - r) * nf).floor() as i64;
    let c1 = ((y.x + r) * nf).floor() as i64;
    let r0 = ((y.y - r) * nf).floor() as i64;
    let r1 = ((y.y + r) * nf).floor() as i64;
    let start = row.len();
    let mut total = 0.0;
    for ri in r0..=r1 {
        let (ya, yb) = (ri as f64 / nf - y.y, (ri + 1) as f64 / nf - y.y);
        for ci in c0..=c1 {
            let (xa, xb) = (ci as f64 / nf - y.x, (ci + 1) as f64 / nf - y.x);
            let area = disk_rect_area(xa, xb, ya, yb, r);
            if area > 0.0 {
                let cell = ri.rem_euclid(n as i64) as usize * n + ci.rem_euclid(n as i64) as usize;
                row.push((cell as u32, area));
                total += area;
            }
        }
    }
    for e in &mut row[start..] {
        e.1 *= w / total;
    }
}

/// Transition probabilities of one noisy step on an `n × n` grid.
///
/// Each cell is sampled at `samples_per_cell` jittered-stratified points;
/// the uniform noise is integrated exactly over cells.
pub fn ulam_operator<M: Dynamics + ?Sized>(
    map: &M,
    model: &NoiseModel,
    n: usize,
    samples_per_cell: usize,
    seed: u64,
) -> Result<UlamOperator> {
    if n < 8 {
        return Err(domain(format!("grid size {n} < 8")));
    }
    if samples_per_cell < 16 {
        return Err(domain(format!("{samples_per_cell} samples per cell < 16")));
    }
    if model.epsilon >= 0.5 {
        return Err(domain("noise radius must be < 0.5"));
    }
    let k = (samples_per_cell as f64).sqrt().floor() as usize;
    let h = 1.0 / n as f64;
    let w = 1.0 / samples_per_cell as f64;
    let rows: Vec<Vec<(u32, f64)>> = par::map_indexed(n * n, |cell| {
        let mut rng = RngStream::new(seed, cell as u64);
        let (r, c) = (cell / n, cell % n);
        let mut row = Vec::new();
        for s in 0..samples_per_cell {
            let (u, v) = if s < k * k {
                (((s % k) as f64 + rng.uniform()) / k as f64, ((s / k) as f64 + rng.uniform()) / k as f64)
            } else {
                (rng.uniform(), rng.uniform())
            };
            let x = TorusPoint::from_lift(Vec2::new((c as f64 + u) * h, (r as f64 + v) * h));
            deposit(&mut row, map.apply_lift(x), model.epsilon, n, w);
        }
        row.sort_unstable_by_key(|e| e.0);
        let mut merged: Vec<(u32, f64)> = Vec::with_capacity(row.len());
        for (j, p) in row {
            match merged.last_mut() {
                Some(last) if last.0 == j => last.1 += p,
                _ => merged.push((j, p)),
            }
        }
        let total: f64 = merged.iter().map(|e| e.1).sum();
        for e in &mut merged {
            e.1 /= total;
        }
        merged
    });
    Ok(UlamOperator::from_rows(n, rows))
}

impl UlamOperator {
    fn from_rows(n: usize, rows: Vec<Vec<(u32, f64)>>) -> Self {
        let size = n * n;
        let mut row_ptr = Vec::with_capacity(size + 1);
        row_ptr.push(0);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for r in &rows {
            let sum: f64 = r.iter().map(|e| e.1).sum();
            assert!((sum - 1.0).abs() <= MASS_TOL, "Ulam row sums to {sum}");
            for &(j, p) in r {
                assert!(p >= 0.0, "negative transition probability");
                cols.push(j);
                vals.push(p);
            }
            row_ptr.push(cols.len());
        }
        let mut counts = vec![0usize; size + 1];
        for &j in &cols {
            counts[j as usize + 1] += 1;
        }
        for j in 0..size {
            counts[j + 1] += counts[j];
        }
        let col_ptr = counts.clone();
        let mut fill = counts;
        let mut rows_t = vec![0u32; cols.len()];
        let mut vals_t = vec![0.0; cols.len()];
        for i in 0..size {
            for e in row_ptr[i]..row_ptr[i + 1] {
                let j = cols[e] as usize;
                rows_t[fill[j]] = i as u32;
                vals_t[fill[j]] = vals[e];
                fill[j] += 1;
            }
        }
        UlamOperator { n, row_ptr, cols, vals, col_ptr, rows_t, vals_t }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Row `i` as `(column, probability)` pairs.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(|e| (self.cols[e] as usize, self.vals[e]))
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).map(|e| e.1).sum()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.n * self.n).map(|j| self.vals_t[self.col_ptr[j]..self.col_ptr[j + 1]].iter().sum()).collect()
    }

    /// `h ↦ h P`, each output summed in a fixed order.
    pub fn left_mul(&self, h: &[f64]) -> Vec<f64> {
        par::map_indexed(self.n * self.n, |j| {
            (self.col_ptr[j]..self.col_ptr[j + 1]).map(|e| h[self.rows_t[e] as usize] * self.vals_t[e]).sum()
        })
    }

    /// Sparse triplets `row,col,p`.
    pub fn to_triplet_csv(&self) -> String {
        let mut out = String::from("row,col,p\n");
        for i in 0..self.n * self.n {
            for (j, p) in self.row(i) {
                out.push_str(&format!("{i},{j},{p:.16e}\n"));
            }
        }
        out
    }
}

/// Power iteration from the uniform vector until the L1 step change is
/// below `tol`.
pub fn stationary_density(op: &UlamOperator, tol: f64, max_iters: usize) -> Result<GridHistogram> {
    let size = op.n * op.n;
    let mut h = vec![1.0 / size as f64; size];
    let mut change = f64::INFINITY;
    for _ in 0..max_iters {
        let mut next = op.left_mul(&h);
        let total: f64 = next.iter().sum();
        for v in &mut next {
            *v /= total;
        }
        change = h.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        h = next;
        if change < tol {
            return GridHistogram::from_mass(op.n, h);
        }
    }
    Err(Error::Numerical {
        message: format!("power iteration did not converge in {max_iters} steps"),
        residual: change,
    })
}

/// `‖h P − h‖₁`.
pub fn stationarity_residual(op: &UlamOperator, h: &GridHistogram) -> f64 {
    let next = op.left_mul(&h.mass);
    next.iter().zip(&h.mass).map(|(a, b)| (a - b).abs()).sum()
}

/// A Fourier observable `cos` or `sin` of `2π k` times one coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierMode {
    pub k: u32,
    /// 0 for x, 1 for y.
    pub axis: u8,
    pub sine: bool,
}

impl FourierMode {
    pub fn eval(&self, p: TorusPoint) -> f64 {
        let c = if self.axis == 0 { p.x() } else { p.y() };
        let t = TAU * self.k as f64 * c;
        if self.sine {
            t.sin()
        } else {
            t.cos()
        }
    }

    pub fn name(&self) -> String {
        format!("{}(2pi*{}*{})", if self.sine { "sin" } else { "cos" }, self.k, if self.axis == 0 { 'x' } else { 'y' })
    }
}

/// cos/sin of the first `modes` frequencies in each coordinate.
pub fn fourier_modes(modes: u32) -> Vec<FourierMode> {
    let mut out = Vec::new();
    for k in 1..=modes {
        for axis in 0..2 {
            for sine in [false, true] {
                out.push(FourierMode { k, axis, sine });
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasinReport {
    pub observables: Vec<String>,
    /// Birkhoff-average vector of each orbit.
    pub averages: Vec<Vec<f64>>,
    pub clusters: usize,
    pub assignments: Vec<usize>,
    pub threshold: f64,
}

/// Single-linkage clustering in the max norm; labels in order of first
/// appearance.
pub fn single_linkage(points: &[Vec<f64>], threshold: f64) -> (usize, Vec<usize>) {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            let d = points[i].iter().zip(&points[j]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if d <= threshold {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let r = find(&mut parent, i);
        if label[r] == usize::MAX {
            label[r] = next;
            next += 1;
        }
        out.push(label[r]);
    }
    (next, out)
}

/// Clusters ensemble orbits by their Fourier Birkhoff averages; the cluster
/// count estimates the number of ergodic stationary measures.
pub fn cluster_basins<M: Dynamics + ?Sized>(
    map: &M,
    model: &NoiseModel,
    ensemble: usize,
    n_steps: usize,
    modes: u32,
    threshold: f64,
    seed: u64,
) -> Result<BasinReport> {
    if modes < 2 {
        return Err(domain("basin clustering needs modes >= 2"));
    }
    if ensemble == 0 || n_steps == 0 {
        return Err(domain("basin clustering needs ensemble, n_steps >= 1"));
    }
    let obs = fourier_modes(modes);
    let averages = par::map_indexed(ensemble, |i| {
        let mut rng = RngStream::new(seed, i as u64);
        let x0 = rng.torus_point();
        let mut stepper = OrbitStepper::new(map, *model, x0, rng);
        let mut acc = vec![0.0; obs.len()];
        let mut x = x0;
        for _ in 0..n_steps {
            for (a, o) in acc.iter_mut().zip(&obs) {
                *a += o.eval(x);
            }
            x = stepper.step().0;
        }
        acc.iter().map(|a| a / n_steps as f64).collect::<Vec<f64>>()
    });
    let (clusters, assignments) = single_linkage(&averages, threshold);
    Ok(BasinReport { observables: obs.iter().map(|o| o.name()).collect(), averages, clusters, assignments, threshold })
}

/// Long-orbit histogram of the deterministic map from Lebesgue-random starts.
pub fn srb_reference<M: Dynamics + ?Sized>(
    map: &M,
    grid_n: usize,
    starts: usize,
    steps: usize,
    burn_in: usize,
    seed: u64,
) -> Result<GridHistogram> {
    ensemble_histogram(map, &NoiseModel::deterministic(), starts, burn_in + steps, burn_in, grid_n, seed)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityConfig {
    pub ensemble: usize,
    pub steps: usize,
    pub burn_in: usize,
    pub grid_n: usize,
    pub seed: u64,
    /// Also solve the Ulam fixed point at this many samples per cell.
    pub ulam_samples: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityPoint {
    pub epsilon: f64,
    pub l1_distance: f64,
    pub orbit_count: usize,
    pub steps: usize,
    pub ulam_l1_distance: Option<f64>,
}

/// L1 distance of the ε-stationary estimate to `reference` along a
/// descending noise ladder.
pub fn stability_curve<M: Dynamics + ?Sized>(
    map: &M,
    epsilons: &[f64],
    reference: &GridHistogram,
    cfg: &StabilityConfig,
) -> Result<Vec<StabilityPoint>> {
    if epsilons.is_empty() {
        return Err(domain("empty noise ladder"));
    }
    if epsilons.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(domain("noise ladder must be strictly descending"));
    }
    if reference.n() != cfg.grid_n {
        return Err(domain("reference grid does not match the configured grid"));
    }
    let mut out = Vec::with_capacity(epsilons.len());
    for (level, &eps) in epsilons.iter().enumerate() {
        let model = NoiseModel::new(eps)?;
        let seed = cfg.seed ^ crate::noise::mix64(level as u64 + 1);
        let h = ensemble_histogram(map, &model, cfg.ensemble, cfg.burn_in + cfg.steps, cfg.burn_in, cfg.grid_n, seed)?;
        let ulam_l1_distance = match cfg.ulam_samples {
            Some(s) => {
                let op = ulam_operator(map, &model, cfg.grid_n, s, seed)?;
                Some(l1_distance(&stationary_density(&op, 1e-12, 100_000)?, reference)?)
            }
            None => None,
        };
        out.push(StabilityPoint {
            epsilon: eps,
            l1_distance: l1_distance(&h, reference)?,
            orbit_count: cfg.ensemble,
            steps: cfg.steps,
            ulam_l1_distance,
        });
    }
    Ok(out)
}

/// CSV with columns `epsilon,l1_distance,orbit_count,steps`.
pub fn stability_csv(curve: &[StabilityPoint]) -> String {
    let mut out = String::from("epsilon,l1_distance,orbit_count,steps\n");
    for p in curve {
        out.push_str(&format!("{:.16e},{:.16e},{},{}\n", p.epsilon, p.l1_distance, p.orbit_count, p.steps));
    }
    out
}

/// Whether `values` never increase by more than `band` along the sequence.
pub fn nonincreasing_within(values: &[f64], band: f64) -> bool {
    values.windows(2).all(|w| w[1] <= w[0] + band)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PushforwardDensity {
    /// `(hyperbolic time, max/min density ratio)`.
    pub ratios: Vec<(usize, f64)>,
    pub c2_squared: f64,
    pub passing: bool,
}

/// Max/min of the density of the pushed arclength measure on `grid_1d`
/// arclength bins over `[−δ₁, δ₁]`.
pub fn window_density_ratio(w: &CurveWindow, delta1: f64, grid_1d: usize) -> f64 {
    let s0 = &w.arclength[0];
    let sm = w.arclength.last().unwrap();
    let lo = (-delta1).max(sm[0]);
    let hi = delta1.min(sm[sm.len() - 1]);
    let interp = |t: f64| -> f64 {
        let i = sm.partition_point(|v| *v < t).clamp(1, sm.len() - 1);
        let f = (t - sm[i - 1]) / (sm[i] - sm[i - 1]);
        s0[i - 1] + f * (s0[i] - s0[i - 1])
    };
    let width = (hi - lo) / grid_1d as f64;
    let dens: Vec<f64> = (0..grid_1d)
        .map(|b| {
            let a = lo + b as f64 * width;
            (interp(a + width) - interp(a)) / width
        })
        .collect();
    let max = dens.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = dens.iter().cloned().fold(f64::INFINITY, f64::min);
    max / min
}

/// Density of the push-forward of arclength on `curve` at each hyperbolic
/// time; passing iff every max/min ratio is at most `C₂²`.
#[allow(clippy::too_many_arguments)]
pub fn curve_pushforward_density<M: Dynamics + ?Sized>(
    map: &M,
    orbit: &RandomOrbit,
    curve: &CuPolyline,
    cone: &ConeParams,
    origin: usize,
    hyp_times: &[usize],
    delta1: f64,
    grid_1d: usize,
    c2_constant: f64,
) -> Result<PushforwardDensity> {
    if curve.vertices.len() < 3 {
        return Err(domain("degenerate curve"));
    }
    if grid_1d == 0 {
        return Err(domain("grid_1d must be >= 1"));
    }
    let ratios = hyp_times
        .iter()
        .map(|&t| {
            let w = evolve_window(map, orbit, curve, cone, origin, t, delta1)?;
            Ok((t, window_density_ratio(&w, delta1, grid_1d)))
        })
        .collect::<Result<Vec<_>>>()?;
    let c2_squared = c2_constant * c2_constant;
    let passing = ratios.iter().all(|r| r.1 <= c2_squared);
    Ok(PushforwardDensity { ratios, c2_squared, passing })
}

/// Default ladder of expansion levels `c` for the fraction of weakly
/// expanding orbits.
pub const C_LADDER: [f64; 4] = [0.05, 0.1, 0.2, 0.5];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    /// Orbit lengths.
    pub n: Vec<usize>,
    /// Fraction of orbits in the bad set at each `n`.
    pub fraction: Vec<f64>,
    pub fit: Option<LineFit>,
}

impl DecayCurve {
    fn new(n: Vec<usize>, fraction: Vec<f64>, ensemble: usize) -> Self {
        let x: Vec<f64> = n.iter().map(|v| *v as f64).collect();
        let fit = log_linear_decay(&x, &fraction, 0.5 / ensemble as f64).ok();
        DecayCurve { n, fraction, fit }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,fraction\n");
        for (n, f) in self.n.iter().zip(&self.fraction) {
            out.push_str(&format!("{n},{f:.16e}\n"));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RnueReport {
    pub n_steps: usize,
    /// Per-orbit `(1/n) Σ a_j` at `n_steps`.
    pub values: Vec<f64>,
    pub summary: Summary,
    /// `(c, fraction of orbits with value > −c)`.
    pub weak_fractions: Vec<(f64, f64)>,
    /// `−c`: the 95th percentile of the averages at the first ladder length.
    pub bad_level: f64,
    pub decay: DecayCurve,
}

fn ladder_for(n_steps: usize) -> Vec<usize> {
    let mut l: Vec<usize> = [100usize, 1000, 10_000, 100_000].into_iter().filter(|n| *n < n_steps).collect();
    l.push(n_steps);
    l
}

/// Per-orbit averages of `a_j` (after `SETTLE` steps) at each ladder length.
fn orbit_cocycle_averages<M: Dynamics + ?Sized>(
    map: &M,
    model: &NoiseModel,
    ladder: &[usize],
    mut rng: RngStream,
) -> Vec<f64> {
    let x0 = rng.torus_point();
    let mut tracker = CuTracker::new(map.splitting().e_u);
    let mut stepper = OrbitStepper::new(map, *model, x0, rng);
    let mut x = x0;
    for _ in 0..SETTLE {
        tracker.step(map, x);
        x = stepper.step().0;
    }
    let mut out = Vec::with_capacity(ladder.len());
    let mut sum = 0.0;
    let mut next = 0;
    for j in 1..=*ladder.last().unwrap() {
        sum += tracker.step(map, x);
        x = stepper.step().0;
        if j == ladder[next] {
            out.push(sum / j as f64);
            next += 1;
        }
    }
    out
}

/// Random non-uniform expansion along the cu direction.
pub fn rnue_experiment<M: Dynamics + ?Sized>(
    map: &M,
    model: &NoiseModel,
    ensemble: usize,
    n_steps: usize,
    seed: u64,
) -> Result<RnueReport> {
    if ensemble == 0 || n_steps < 100 {
        return Err(domain("rnue needs ensemble >= 1 and n_steps >= 100"));
    }
    let ladder = ladder_for(n_steps);
    let per =
        par::map_indexed(ensemble, |i| orbit_cocycle_averages(map, model, &ladder, RngStream::new(seed, i as u64)));
    let at = |k: usize| per.iter().map(|v| v[k]).collect::<Vec<f64>>();
    let values = at(ladder.len() - 1);
    let summary = Summary::of(&values);
    let weak_fractions =
        C_LADDER.iter().map(|c| (*c, values.iter().filter(|v| **v > -c).count() as f64 / ensemble as f64)).collect();
    let bad_level = quantile(&at(0), 0.95);
    let fraction =
        (0..ladder.len()).map(|k| at(k).iter().filter(|v| **v > bad_level).count() as f64 / ensemble as f64).collect();
    Ok(RnueReport {
        n_steps,
        values,
        summary,
        weak_fractions,
        bad_level,
        decay: DecayCurve::new(ladder, fraction, ensemble),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyReport {
    pub radius: f64,
    pub ladder: Vec<usize>,
    /// Mean fraction of time outside `V` at each ladder length.
    pub mean_occupancy: Vec<f64>,
    /// 5th percentile of the occupancy at the first ladder length.
    pub zeta: f64,
    /// Per-orbit occupancy at the last ladder length.
    pub occupancy: Vec<f64>,
    pub decay: DecayCurve,
}

/// Fraction of time random orbits spend outside `V = B(center, radius)`.
pub fn frequency_experiment(
    map: &TorusMap,
    model: &NoiseModel,
    partition_radius: f64,
    ensemble: usize,
    n_ladder: &[usize],
    seed: u64,
) -> Result<FrequencyReport> {
    if ensemble == 0 || n_ladder.is_empty() || n_ladder.windows(2).any(|w| w[0] >= w[1]) || n_ladder[0] == 0 {
        return Err(domain("frequency needs ensemble >= 1 and a strictly increasing positive ladder"));
    }
    if !(0.0..0.5).contains(&partition_radius) {
        return Err(domain(format!("partition radius {partition_radius} outside [0, 0.5)")));
    }
    let center = map.center();
    let last = *n_ladder.last().unwrap();
    let per = par::map_indexed(ensemble, |i| {
        let mut rng = RngStream::new(seed, i as u64);
        let x0 = rng.torus_point();
        let mut stepper = OrbitStepper::new(map, *model, x0, rng);
        let mut x = x0;
        let mut good = 0usize;
        let mut out = Vec::with_capacity(n_ladder.len());
        let mut next = 0;
        for j in 1..=last {
            if center.distance(x) >= partition_radius {
                good += 1;
            }
            x = stepper.step().0;
            if j == n_ladder[next] {
                out.push(good as f64 / j as f64);
                next += 1;
            }
        }
        out
    });
    let at = |k: usize| per.iter().map(|v| v[k]).collect::<Vec<f64>>();
    let zeta = quantile(&at(0), 0.05);
    let mean_occupancy = (0..n_ladder.len()).map(|k| at(k).iter().sum::<f64>() / ensemble as f64).collect();
    let fraction =
        (0..n_ladder.len()).map(|k| at(k).iter().filter(|v| **v < zeta).count() as f64 / ensemble as f64).collect();
    Ok(FrequencyReport {
        radius: partition_radius,
        ladder: n_ladder.to_vec(),
        mean_occupancy,
        zeta,
        occupancy: at(n_ladder.len() - 1),
        decay: DecayCurve::new(n_ladder.to_vec(), fraction, ensemble),
    })
}

/// Lebesgue measure of the complement of a disk of radius `r` in T².
pub fn disk_complement_area(r: f64) -> f64 {
    1.0 - PI * r * r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{IdentityMap, Translation};
    use crate::noise::random_orbit;
    use crate::torus::linear_map;

    #[test]
    fn l1_examples() {
        let u = GridHistogram::uniform(32);
        let p = GridHistogram::point_mass(32, 0);
        let q = GridHistogram::point_mass(32, 5);
        assert_eq!(l1_distance(&u, &u).unwrap(), 0.0);
        assert_eq!(l1_distance(&p, &q).unwrap(), 2.0);
        assert!((l1_distance(&u, &p).unwrap() - 2.0 * (1.0 - 1.0 / 1024.0)).abs() < 1e-12);
        assert!(l1_distance(&u, &GridHistogram::uniform(16)).is_err());
    }

    #[test]
    fn histogram_round_trips() {
        let h = GridHistogram::from_counts(4, &(0..16).collect::<Vec<u64>>()).unwrap();
        assert_eq!(GridHistogram::from_binary(&h.to_binary()).unwrap(), h);
        let csv = h.to_csv();
        assert!(csv.starts_with("row,col,mass\n0,0,"));
        assert_eq!(csv.lines().count(), 17);
        assert!(GridHistogram::from_mass(2, vec![0.5, 0.5, 0.5, -0.5]).is_err());
    }

    #[test]
    fn birkhoff_examples() {
        let m = linear_map([2, 1, 1, 1]).unwrap();
        let o = random_orbit(&m, &NoiseModel::deterministic(), TorusPoint::ORIGIN, 10, RngStream::new(0, 0)).unwrap();
        assert_eq!(birkhoff_average(&o, |_| 1.0).unwrap(), 1.0);
        assert_eq!(birkhoff_average(&o, |p| p.x()).unwrap(), 0.0);
        let h = empirical_histogram(&[o], 32, 2).unwrap();
        assert_eq!(h.at(0, 0), 1.0);
    }

    #[test]
    fn disk_areas() {
        let r = 0.3;
        assert!((disk_rect_area(-1.0, 1.0, -1.0, 1.0, r) - PI * r * r).abs() < 1e-15);
        assert!((disk_rect_area(0.0, 1.0, 0.0, 1.0, r) - PI * r * r / 4.0).abs() < 1e-15);
        assert!((disk_rect_area(-1.0, 1.0, 0.0, 1.0, r) - PI * r * r / 2.0).abs() < 1e-15);
        assert_eq!(disk_rect_area(0.5, 1.0, 0.0, 1.0, r), 0.0);
        // thin strip through the center: 2 r w to first order
        let w = 1e-4;
        assert!((disk_rect_area(0.0, w, -1.0, 1.0, r) - 2.0 * r * w).abs() < 1e-10);
    }

    #[test]
    fn ulam_rows_are_stochastic() {
        let m = linear_map([2, 1, 1, 1]).unwrap();
        let op = ulam_operator(&m, &NoiseModel::new(0.05).unwrap(), 16, 16, 1).unwrap();
        for i in 0..256 {
            assert!((op.row_sum(i) - 1.0).abs() < 1e-12);
        }
        assert!(ulam_operator(&m, &NoiseModel::new(0.05).unwrap(), 4, 16, 1).is_err());
        assert!(ulam_operator(&m, &NoiseModel::new(0.05).unwrap(), 16, 8, 1).is_err());
        assert!(op.to_triplet_csv().starts_with("row,col,p\n"));
    }

    #[test]
    fn identity_ulam_is_diagonal() {
        let op = ulam_operator(&IdentityMap, &NoiseModel::deterministic(), 8, 16, 0).unwrap();
        for i in 0..64 {
            let own: f64 = op.row(i).filter(|e| e.0 == i).map(|e| e.1).sum();
            assert!(own >= 0.9);
        }
        let h = stationary_density(&op, 1e-12, 10).unwrap();
        assert!(l1_distance(&h, &GridHistogram::uniform(8)).unwrap() < 1e-12);
    }

    #[test]
    fn noisy_identity_diffuses_to_uniform() {
        let op = ulam_operator(&IdentityMap, &NoiseModel::new(0.2).unwrap(), 8, 16, 0).unwrap();
        let h = stationary_density(&op, 1e-13, 10_000).unwrap();
        let d = l1_distance(&h, &GridHistogram::uniform(8)).unwrap();
        assert!(d < 0.05, "{d}");
    }

    #[test]
    fn translation_keeps_uniform() {
        let t = Translation { shift: Vec2::new(0.125, 0.25) };
        let op = ulam_operator(&t, &NoiseModel::deterministic(), 8, 16, 0).unwrap();
        let h = stationary_density(&op, 1e-12, 10).unwrap();
        assert!(l1_distance(&h, &GridHistogram::uniform(8)).unwrap() < 1e-12);
        assert!(stationarity_residual(&op, &h) < 1e-12);
    }

    #[test]
    fn power_iteration_reports_failure() {
        let m = linear_map([2, 1, 1, 1]).unwrap();
        let op = ulam_operator(&m, &NoiseModel::new(0.01).unwrap(), 16, 16, 3).unwrap();
        match stationary_density(&op, 0.0, 3) {
            Err(Error::Numerical { residual, .. }) => assert!(residual.is_finite()),
            other => panic!("expected a numerical error, got {other:?}"),
        }
    }

    #[test]
    fn circular_w1_examples() {
        let mut p = vec![0.0; 8];
        let mut q = vec![0.0; 8];
        p[0] = 1.0;
        q[1] = 1.0;
        assert!((circular_w1(&p, &q) - 0.125).abs() < 1e-15);
        q[1] = 0.0;
        q[7] = 1.0;
        assert!((circular_w1(&p, &q) - 0.125).abs() < 1e-15);
        assert_eq!(circular_w1(&p, &p), 0.0);
    }

    #[test]
    fn linkage_examples() {
        let pts = vec![vec![0.0], vec![0.05], vec![0.12], vec![0.5]];
        assert_eq!(single_linkage(&pts, 0.1), (2, vec![0, 0, 0, 1]));
        assert_eq!(single_linkage(&pts, 0.01).0, 4);
    }

    #[test]
    fn stability_ladder_validation() {
        let m = linear_map([2, 1, 1, 1]).unwrap();
        let reference = GridHistogram::uniform(8);
        let cfg = StabilityConfig { ensemble: 2, steps: 100, burn_in: 10, grid_n: 8, seed: 0, ulam_samples: None };
        assert!(stability_curve(&m, &[], &reference, &cfg).is_err());
        assert!(stability_curve(&m, &[0.01, 0.05], &reference, &cfg).is_err());
        let one = stability_curve(&m, &[0.05], &reference, &cfg).unwrap();
        assert_eq!(one.len(), 1);
        assert!(nonincreasing_within(&[one[0].l1_distance], 0.0));
    }

    #[test]
    fn empty_bad_region() {
        let m = linear_map([2, 1, 1, 1]).unwrap();
        let r = frequency_experiment(&m, &NoiseModel::new(0.01).unwrap(), 0.0, 10, &[100, 200], 0).unwrap();
        assert!(r.occupancy.iter().all(|v| *v == 1.0));
    }
}
