//! Newton-map dynamics on the complex plane: polynomial evaluation, orbit
//! iteration with a finite-time stretching exponent, and basin labeling of
//! rectangular grids.
//!
//! The map is N(z) = z - f(z)/f'(z). Its roots are superattracting fixed
//! points; the common boundary of their basins is where orbits shadow the
//! unstable set and the stretching exponent turns positive.

use num_complex::Complex64;
use thiserror::Error;

/// Relative floor below which |f'(z)| counts as singular. Scaled by the
/// magnitude of the derivative's leading coefficient so the test does not
/// depend on an overall constant factor of f.
pub const DERIVATIVE_FLOOR: f64 = 1e-14;

/// Residual bound every computed root must satisfy.
pub const ROOT_TOLERANCE: f64 = 1e-9;

/// Default capture radius around a root.
pub const DEFAULT_CONVERGENCE_RADIUS: f64 = 1e-9;

/// Default orbit length cap.
pub const DEFAULT_MAX_ITERS: usize = 200;

/// Per-step log-stretch values are clamped to [-FTLE_CLIP, FTLE_CLIP].
/// ln|N'| is -inf exactly at a root and +inf at a critical point of f;
/// only the sign and rough magnitude carry meaning downstream.
pub const FTLE_CLIP: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NewtonError {
    #[error("polynomial must have degree >= 2 and a nonzero leading coefficient")]
    InvalidPolynomial,
    #[error("root finding failed to reach residual {ROOT_TOLERANCE:e}")]
    RootsNotConverged,
    #[error("derivative magnitude {magnitude:e} at {z} is below the singularity floor")]
    SingularDerivative { z: Complex64, magnitude: f64 },
}

/// A complex polynomial of degree >= 2 together with its derivatives and
/// root set. Coefficients are stored constant term first.
#[derive(Debug, Clone)]
pub struct PolynomialMap {
    coeffs: Vec<Complex64>,
    dcoeffs: Vec<Complex64>,
    ddcoeffs: Vec<Complex64>,
    roots: Vec<Complex64>,
    derivative_floor: f64,
}

impl PolynomialMap {
    /// Builds the map, trimming exactly-zero leading coefficients. Roots are
    /// located once by Durand-Kerner iteration and sorted by principal
    /// argument, then modulus, so indices are stable across runs.
    pub fn new(coefficients: Vec<Complex64>) -> Result<Self, NewtonError> {
        let mut coeffs = coefficients;
        while coeffs.last().is_some_and(|c| *c == Complex64::ZERO) {
            coeffs.pop();
        }
        if coeffs.len() < 3 {
            return Err(NewtonError::InvalidPolynomial);
        }
        let dcoeffs = differentiate(&coeffs);
        let ddcoeffs = differentiate(&dcoeffs);
        let derivative_floor = DERIVATIVE_FLOOR * dcoeffs.last().unwrap().norm();
        let mut roots = durand_kerner(&coeffs)?;
        roots.sort_by(|a, b| a.arg().total_cmp(&b.arg()).then(a.norm().total_cmp(&b.norm())));
        Ok(Self { coeffs, dcoeffs, ddcoeffs, roots, derivative_floor })
    }

    /// f(z) = z^3 - 1, the three cubic roots of unity. Root index 1 is z = 1;
    /// indices 0 and 2 are the lower and upper complex roots.
    pub fn cubic_roots_of_unity() -> Self {
        let c = |re: f64| Complex64::new(re, 0.0);
        Self::new(vec![c(-1.0), c(0.0), c(0.0), c(1.0)]).unwrap()
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Every returned root r satisfies |f(r)| < [`ROOT_TOLERANCE`].
    pub fn roots(&self) -> &[Complex64] {
        &self.roots
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        horner(&self.coeffs, z)
    }

    pub fn derivative_at(&self, z: Complex64) -> Complex64 {
        horner(&self.dcoeffs, z)
    }

    pub fn second_derivative_at(&self, z: Complex64) -> Complex64 {
        horner(&self.ddcoeffs, z)
    }

    pub fn derivative_floor(&self) -> f64 {
        self.derivative_floor
    }

    /// Index of the root within `radius` of z, if any. Ties go to the
    /// closest root; exact ties to the lowest index.
    pub fn root_within(&self, z: Complex64, radius: f64) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (k, r) in self.roots.iter().enumerate() {
            let d = (z - r).norm();
            if d < radius && best.is_none_or(|(_, bd)| d < bd) {
                best = Some((k, d));
            }
        }
        best.map(|(k, _)| k)
    }

    /// Permutation taking root index k to the index of `g(root_k)`, for a
    /// symmetry g of the root set. Fails if some image is not itself a root.
    pub fn root_permutation(&self, g: impl Fn(Complex64) -> Complex64) -> Option<Vec<usize>> {
        self.roots
            .iter()
            .map(|&r| self.root_within(g(r), 1e-6))
            .collect()
    }
}

fn differentiate(coeffs: &[Complex64]) -> Vec<Complex64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, c)| c * k as f64)
        .collect()
}

fn horner(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    let mut acc = Complex64::ZERO;
    for c in coeffs.iter().rev() {
        acc = acc * z + c;
    }
    acc
}

/// Durand-Kerner simultaneous root iteration on the monic normalization.
fn durand_kerner(coeffs: &[Complex64]) -> Result<Vec<Complex64>, NewtonError> {
    let lead = *coeffs.last().unwrap();
    let monic: Vec<Complex64> = coeffs.iter().map(|c| c / lead).collect();
    let n = monic.len() - 1;
    let seed = Complex64::new(0.4, 0.9);
    let mut zs: Vec<Complex64> = (0..n).map(|k| seed.powu(k as u32 + 1)).collect();
    for _ in 0..1000 {
        let mut max_step = 0.0f64;
        for i in 0..n {
            let zi = zs[i];
            let mut denom = Complex64::ONE;
            for (j, zj) in zs.iter().enumerate() {
                if j != i {
                    denom *= zi - zj;
                }
            }
            let step = horner(&monic, zi) / denom;
            zs[i] -= step;
            max_step = max_step.max(step.norm());
        }
        if max_step < 1e-14 {
            break;
        }
    }
    if zs.iter().any(|&z| horner(&monic, z).norm() * lead.norm() >= ROOT_TOLERANCE) {
        return Err(NewtonError::RootsNotConverged);
    }
    Ok(zs)
}

/// One Newton step N(z) = z - f(z)/f'(z).
pub fn newton_step(map: &PolynomialMap, z: Complex64) -> Result<Complex64, NewtonError> {
    let d = map.derivative_at(z);
    let magnitude = d.norm();
    if magnitude <= map.derivative_floor() {
        return Err(NewtonError::SingularDerivative { z, magnitude });
    }
    Ok(z - map.eval(z) / d)
}

/// Clamped ln|N'(z)| with N'(z) = f(z) f''(z) / f'(z)^2. Returns the upper
/// clamp at points where f' is singular (the map stretch is unbounded there).
fn log_stretch(map: &PolynomialMap, z: Complex64) -> f64 {
    let d = map.derivative_at(z);
    if d.norm() <= map.derivative_floor() {
        return FTLE_CLIP;
    }
    let n_prime = map.eval(z) * map.second_derivative_at(z) / (d * d);
    n_prime.norm().ln().clamp(-FTLE_CLIP, FTLE_CLIP)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TerminalStatus {
    Converged(usize),
    MaxItersExceeded,
    SingularDerivative,
}

/// A realized orbit. `ftle` is the mean clamped log-stretch over the points
/// where the map was applied (or attempted); an orbit captured at its start
/// reports the local stretch at that single point instead, so superattracting
/// starts still read as strongly contracting.
#[derive(Debug, Clone)]
pub struct Orbit {
    pub points: Vec<Complex64>,
    pub status: TerminalStatus,
    pub ftle: f64,
}

impl Orbit {
    /// Number of map applications performed.
    pub fn iterations(&self) -> usize {
        self.points.len() - 1
    }
}

/// Iterates the Newton map from z0 until a root captures the orbit, the
/// derivative floor is hit, or `max_iters` applications have run.
pub fn iterate_orbit(
    map: &PolynomialMap,
    z0: Complex64,
    max_iters: usize,
    convergence_radius: f64,
) -> Orbit {
    assert!(max_iters >= 1, "max_iters must be at least 1");
    if let Some(k) = map.root_within(z0, convergence_radius) {
        return Orbit {
            points: vec![z0],
            status: TerminalStatus::Converged(k),
            ftle: log_stretch(map, z0),
        };
    }
    let mut points = vec![z0];
    let mut terms = Vec::new();
    let mut status = TerminalStatus::MaxItersExceeded;
    let mut z = z0;
    for _ in 0..max_iters {
        terms.push(log_stretch(map, z));
        match newton_step(map, z) {
            Ok(next) => {
                points.push(next);
                z = next;
            }
            Err(_) => {
                status = TerminalStatus::SingularDerivative;
                break;
            }
        }
        if let Some(k) = map.root_within(z, convergence_radius) {
            status = TerminalStatus::Converged(k);
            break;
        }
    }
    let ftle = terms.iter().sum::<f64>() / terms.len() as f64;
    Orbit { points, status, ftle }
}

/// Allocation-free orbit endpoint, for grid labeling. Returns the terminal
/// status and the number of successful map applications; agrees with
/// [`iterate_orbit`] on both.
pub fn orbit_terminal(
    map: &PolynomialMap,
    z0: Complex64,
    max_iters: usize,
    convergence_radius: f64,
) -> (TerminalStatus, u32) {
    assert!(max_iters >= 1, "max_iters must be at least 1");
    if map.root_within(z0, convergence_radius).is_some() {
        let k = map.root_within(z0, convergence_radius).unwrap();
        return (TerminalStatus::Converged(k), 0);
    }
    let mut z = z0;
    let mut applied = 0u32;
    for _ in 0..max_iters {
        match newton_step(map, z) {
            Ok(next) => {
                z = next;
                applied += 1;
            }
            Err(_) => return (TerminalStatus::SingularDerivative, applied),
        }
        if let Some(k) = map.root_within(z, convergence_radius) {
            return (TerminalStatus::Converged(k), applied);
        }
    }
    (TerminalStatus::MaxItersExceeded, applied)
}

/// 1/ftle for expanding orbits; infinite when the orbit contracts
/// (predictability is never lost there).
pub fn lyapunov_time(ftle: f64) -> f64 {
    if ftle > 0.0 {
        1.0 / ftle
    } else {
        f64::INFINITY
    }
}

/// Per-cell basin labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellLabel {
    Basin(usize),
    Unresolved,
}

/// Rectangular sampling window. Cell (i, j) is centered at
/// origin + ((i+0.5)/nx) Re(extent) + i ((j+0.5)/ny) Im(extent).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub origin: Complex64,
    pub extent: Complex64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn from_window(xmin: f64, xmax: f64, ymin: f64, ymax: f64, nx: usize, ny: usize) -> Self {
        assert!(xmax > xmin && ymax > ymin, "window must have positive area");
        Self {
            origin: Complex64::new(xmin, ymin),
            extent: Complex64::new(xmax - xmin, ymax - ymin),
            nx,
            ny,
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Complex64 {
        self.origin
            + Complex64::new(
                (i as f64 + 0.5) / self.nx as f64 * self.extent.re,
                (j as f64 + 0.5) / self.ny as f64 * self.extent.im,
            )
    }

    /// Cell containing z, or None outside the half-open window.
    pub fn cell_of(&self, z: Complex64) -> Option<(usize, usize)> {
        let fx = (z.re - self.origin.re) / self.extent.re;
        let fy = (z.im - self.origin.im) / self.extent.im;
        if !(0.0..1.0).contains(&fx) || !(0.0..1.0).contains(&fy) {
            return None;
        }
        let i = ((fx * self.nx as f64) as usize).min(self.nx - 1);
        let j = ((fy * self.ny as f64) as usize).min(self.ny - 1);
        Some((i, j))
    }

    pub fn cell_diagonal(&self) -> f64 {
        let w = self.extent.re / self.nx as f64;
        let h = self.extent.im / self.ny as f64;
        (w * w + h * h).sqrt()
    }
}

/// A labeled grid. `labels` and `iters` are row-major: index j*nx + i.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGrid {
    pub spec: GridSpec,
    /// Number of basin indices in play (the polynomial degree).
    pub num_basins: usize,
    pub labels: Vec<CellLabel>,
    pub iters: Vec<u32>,
}

impl ComplexGrid {
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.spec.nx + i
    }

    pub fn label_at(&self, i: usize, j: usize) -> CellLabel {
        self.labels[self.idx(i, j)]
    }
}

fn label_cell(
    map: &PolynomialMap,
    spec: &GridSpec,
    idx: usize,
    max_iters: usize,
    convergence_radius: f64,
) -> (CellLabel, u32) {
    let (i, j) = (idx % spec.nx, idx / spec.nx);
    let (status, iters) = orbit_terminal(map, spec.cell_center(i, j), max_iters, convergence_radius);
    let label = match status {
        TerminalStatus::Converged(k) => CellLabel::Basin(k),
        _ => CellLabel::Unresolved,
    };
    (label, iters)
}

/// Labels every cell by its center orbit. Cells are independent; the
/// parallel and sequential paths produce identical grids.
pub fn label_grid(
    map: &PolynomialMap,
    spec: &GridSpec,
    max_iters: usize,
    convergence_radius: f64,
) -> ComplexGrid {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        assert!(spec.nx >= 2 && spec.ny >= 2, "resolution must be at least 2x2");
        let cells: Vec<(CellLabel, u32)> = (0..spec.len())
            .into_par_iter()
            .map(|idx| label_cell(map, spec, idx, max_iters, convergence_radius))
            .collect();
        let (labels, iters) = cells.into_iter().unzip();
        ComplexGrid { spec: *spec, num_basins: map.degree(), labels, iters }
    }
    #[cfg(not(feature = "parallel"))]
    {
        label_grid_seq(map, spec, max_iters, convergence_radius)
    }
}

/// Single-threaded labeling; the reference for determinism checks.
pub fn label_grid_seq(
    map: &PolynomialMap,
    spec: &GridSpec,
    max_iters: usize,
    convergence_radius: f64,
) -> ComplexGrid {
    assert!(spec.nx >= 2 && spec.ny >= 2, "resolution must be at least 2x2");
    let cells: Vec<(CellLabel, u32)> = (0..spec.len())
        .map(|idx| label_cell(map, spec, idx, max_iters, convergence_radius))
        .collect();
    let (labels, iters) = cells.into_iter().unzip();
    ComplexGrid { spec: *spec, num_basins: map.degree(), labels, iters }
}
