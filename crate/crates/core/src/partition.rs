//! Inner/outer coarse-graining of a basin and the stochastic switch kernel
//! sampled from its uncertain shell.
//!
//! For a designated basin the inner region is certainly inside it and the
//! complement of the outer region certainly outside; the shell between the
//! two is where cell-scale information cannot decide the destination. The
//! shell's area fraction within the outer region is the threshold
//! probability used by the inference loop, and re-converging jittered shell
//! samples yields a transition kernel between basins.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fractal::BoundaryMask;
use crate::newton::{
    orbit_terminal, CellLabel, ComplexGrid, GridSpec, PolynomialMap, TerminalStatus,
    DEFAULT_CONVERGENCE_RADIUS, DEFAULT_MAX_ITERS,
};

/// Default structuring-element radius in cells.
pub const DEFAULT_DILATION_RADIUS: usize = 2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PartitionError {
    #[error("erosion at radius {radius} removed every inner cell")]
    EmptyInner { radius: usize },
    #[error("basin {basin} has an empty uncertain shell")]
    EmptyShell { basin: usize },
    #[error("point {0} lies outside the grid window")]
    OutOfWindow(Complex64),
    #[error("shapes disagree: {0}")]
    ShapeMismatch(String),
    #[error("no jittered sample from basin {basin}'s shell re-converged")]
    NoConvergedSamples { basin: usize },
    #[error("kernel is not row-stochastic: {0}")]
    InvalidKernel(String),
}

/// Coarse-graining of one basin. All three masks are row-major over the
/// grid; `inner` is the erosion of the basin's cells, `outer` the dilation
/// joined with boundary and unresolved cells, so inner ⊆ basin ⊆ outer by
/// construction. `theta` = shell area / outer area, in (0,1).
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub basin_index: usize,
    pub spec: GridSpec,
    pub inner: Vec<bool>,
    pub outer: Vec<bool>,
    pub shell: Vec<bool>,
    pub theta: f64,
    pub dilation_radius: usize,
}

impl Partition {
    pub fn shell_count(&self) -> usize {
        self.shell.iter().filter(|&&c| c).count()
    }
}

/// Where a point sits relative to one partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Inside,
    Outside,
    Uncertain,
}

/// Horizontal then vertical sliding-window pass; `require_all` ANDs the
/// window (erosion), otherwise ORs it (dilation). Windows clip at the grid
/// edge; cells outside the grid neither veto nor contribute.
fn morph_pass(cells: &[bool], nx: usize, ny: usize, r: usize, require_all: bool) -> Vec<bool> {
    let window = |out: &mut Vec<bool>, len: usize, stride: usize, base: usize, src: &[bool]| {
        for p in 0..len {
            let lo = p.saturating_sub(r);
            let hi = (p + r).min(len - 1);
            let mut acc = require_all;
            for q in lo..=hi {
                let v = src[base + q * stride];
                acc = if require_all { acc && v } else { acc || v };
            }
            out[base + p * stride] = acc;
        }
    };
    let mut tmp = vec![false; cells.len()];
    for j in 0..ny {
        window(&mut tmp, nx, 1, j * nx, cells);
    }
    let mut out = vec![false; cells.len()];
    for i in 0..nx {
        window(&mut out, ny, nx, i, &tmp);
    }
    out
}

pub(crate) fn dilate(cells: &[bool], nx: usize, ny: usize, r: usize) -> Vec<bool> {
    morph_pass(cells, nx, ny, r, false)
}

pub(crate) fn erode(cells: &[bool], nx: usize, ny: usize, r: usize) -> Vec<bool> {
    morph_pass(cells, nx, ny, r, true)
}

/// Builds the inner/outer pair for `basin_index` by morphological erosion
/// and dilation at the given Chebyshev radius.
pub fn build_partition(
    grid: &ComplexGrid,
    mask: &BoundaryMask,
    basin_index: usize,
    dilation_radius: usize,
) -> Result<Partition, PartitionError> {
    assert!(basin_index < grid.num_basins, "basin index out of range");
    assert!(dilation_radius >= 1, "dilation radius must be at least 1");
    let (nx, ny) = (grid.spec.nx, grid.spec.ny);
    if (mask.nx, mask.ny) != (nx, ny) {
        return Err(PartitionError::ShapeMismatch(format!(
            "mask {}x{} vs grid {}x{}",
            mask.nx, mask.ny, nx, ny
        )));
    }
    let basin: Vec<bool> = grid
        .labels
        .iter()
        .map(|l| *l == CellLabel::Basin(basin_index))
        .collect();
    let inner = erode(&basin, nx, ny, dilation_radius);
    if !inner.iter().any(|&c| c) {
        return Err(PartitionError::EmptyInner { radius: dilation_radius });
    }
    let dilated = dilate(&basin, nx, ny, dilation_radius);
    let outer: Vec<bool> = (0..nx * ny)
        .map(|idx| dilated[idx] || mask.cells[idx] || grid.labels[idx] == CellLabel::Unresolved)
        .collect();
    let shell: Vec<bool> = (0..nx * ny).map(|idx| outer[idx] && !inner[idx]).collect();
    let outer_count = outer.iter().filter(|&&c| c).count();
    let shell_count = shell.iter().filter(|&&c| c).count();
    let theta = shell_count as f64 / outer_count as f64;
    Ok(Partition {
        basin_index,
        spec: grid.spec,
        inner,
        outer,
        shell,
        theta,
        dilation_radius,
    })
}

/// Inside the inner region, outside the outer region, or in the shell.
pub fn classify_point(partition: &Partition, z: Complex64) -> Result<Region, PartitionError> {
    let (i, j) = partition
        .spec
        .cell_of(z)
        .ok_or(PartitionError::OutOfWindow(z))?;
    let idx = j * partition.spec.nx + i;
    if partition.inner[idx] {
        Ok(Region::Inside)
    } else if !partition.outer[idx] {
        Ok(Region::Outside)
    } else {
        Ok(Region::Uncertain)
    }
}

/// Row-stochastic transition probabilities between basins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchKernel {
    pub probs: Vec<Vec<f64>>,
}

impl SwitchKernel {
    pub fn size(&self) -> usize {
        self.probs.len()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.probs[k]
    }

    pub fn identity(k: usize) -> Self {
        let probs = (0..k)
            .map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self { probs }
    }

    /// Diagonal `p_stay`, remaining mass spread evenly off-diagonal.
    pub fn uniform_stay(k: usize, p_stay: f64) -> Self {
        assert!(k >= 2 && (0.0..=1.0).contains(&p_stay));
        let off = (1.0 - p_stay) / (k - 1) as f64;
        let probs = (0..k)
            .map(|i| (0..k).map(|j| if i == j { p_stay } else { off }).collect())
            .collect();
        Self { probs }
    }

    pub fn validate(&self) -> Result<(), PartitionError> {
        let k = self.size();
        for (i, row) in self.probs.iter().enumerate() {
            if row.len() != k {
                return Err(PartitionError::InvalidKernel(format!(
                    "row {i} has length {} in a {k}-state kernel",
                    row.len()
                )));
            }
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(PartitionError::InvalidKernel(format!("row {i} leaves [0,1]")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(PartitionError::InvalidKernel(format!("row {i} sums to {sum}")));
            }
        }
        Ok(())
    }

    /// Averages the kernel over the cyclic group generated by `perm`
    /// (perm[i] is the image of state i). When the underlying symmetry is
    /// exact, this strips finite-sample noise without touching the
    /// symmetric part; rows stay stochastic.
    pub fn symmetrized(&self, perm: &[usize]) -> Self {
        let k = self.size();
        assert_eq!(perm.len(), k, "permutation size mismatch");
        let mut images: Vec<Vec<usize>> = vec![(0..k).collect()];
        loop {
            let last = images.last().unwrap();
            let next: Vec<usize> = (0..k).map(|i| perm[last[i]]).collect();
            if next == images[0] {
                break;
            }
            images.push(next);
            assert!(images.len() <= k * k, "permutation does not close");
        }
        let order = images.len() as f64;
        let mut probs = vec![vec![0.0; k]; k];
        for g in &images {
            for i in 0..k {
                for j in 0..k {
                    probs[g[i]][g[j]] += self.probs[i][j] / order;
                }
            }
        }
        Self { probs }
    }
}

/// Shared per-sample work: pick a shell cell, a point inside it, a jitter
/// of one cell diagonal, then re-run convergence. The tally is independent
/// of accumulation order, so the parallel and sequential paths agree.
fn sample_destination(
    map: &PolynomialMap,
    spec: &GridSpec,
    shell_cells: &[usize],
    seed: u64,
    stream_id: u64,
) -> Option<usize> {
    let mut rng = crate::rng::stream(seed, stream_id);
    let cell = shell_cells[rng.random_range(0..shell_cells.len())];
    let (i, j) = (cell % spec.nx, cell / spec.nx);
    let center = spec.cell_center(i, j);
    let du = rng.random::<f64>() - 0.5;
    let dv = rng.random::<f64>() - 0.5;
    let point = center
        + Complex64::new(
            du * spec.extent.re / spec.nx as f64,
            dv * spec.extent.im / spec.ny as f64,
        );
    let angle = rng.random::<f64>() * std::f64::consts::TAU;
    let radius = spec.cell_diagonal() * rng.random::<f64>().sqrt();
    let jittered = point + Complex64::from_polar(radius, angle);
    match orbit_terminal(map, jittered, DEFAULT_MAX_ITERS, DEFAULT_CONVERGENCE_RADIUS).0 {
        TerminalStatus::Converged(dest) => Some(dest),
        _ => None,
    }
}

fn shell_cell_indices(partitions: &[Partition]) -> Result<Vec<Vec<usize>>, PartitionError> {
    partitions
        .iter()
        .map(|p| {
            let cells: Vec<usize> = p
                .shell
                .iter()
                .enumerate()
                .filter_map(|(idx, &on)| on.then_some(idx))
                .collect();
            if cells.is_empty() {
                Err(PartitionError::EmptyShell { basin: p.basin_index })
            } else {
                Ok(cells)
            }
        })
        .collect()
}

fn rows_from_counts(
    counts: Vec<Vec<u64>>,
    partitions: &[Partition],
) -> Result<SwitchKernel, PartitionError> {
    let mut probs = Vec::with_capacity(counts.len());
    for (row, p) in counts.iter().zip(partitions) {
        let total: u64 = row.iter().sum();
        if total == 0 {
            return Err(PartitionError::NoConvergedSamples { basin: p.basin_index });
        }
        probs.push(row.iter().map(|&c| c as f64 / total as f64).collect());
    }
    Ok(SwitchKernel { probs })
}

/// Monte-Carlo transition kernel: row k tallies where jittered samples from
/// partition k's shell re-converge. Deterministic for a fixed seed; each
/// sample draws from its own RNG stream (k << 32 | sample).
pub fn switch_kernel(
    map: &PolynomialMap,
    grid: &ComplexGrid,
    partitions: &[Partition],
    samples_per_row: usize,
    seed: u64,
) -> Result<SwitchKernel, PartitionError> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let shells = shell_cell_indices(partitions)?;
        let k = grid.num_basins;
        let counts: Vec<Vec<u64>> = shells
            .iter()
            .enumerate()
            .map(|(row, cells)| {
                (0..samples_per_row)
                    .into_par_iter()
                    .fold(
                        || vec![0u64; k],
                        |mut acc, s| {
                            let id = ((row as u64) << 32) | s as u64;
                            if let Some(dest) = sample_destination(map, &grid.spec, cells, seed, id) {
                                acc[dest] += 1;
                            }
                            acc
                        },
                    )
                    .reduce(
                        || vec![0u64; k],
                        |mut a, b| {
                            for (x, y) in a.iter_mut().zip(b) {
                                *x += y;
                            }
                            a
                        },
                    )
            })
            .collect();
        rows_from_counts(counts, partitions)
    }
    #[cfg(not(feature = "parallel"))]
    {
        switch_kernel_seq(map, grid, partitions, samples_per_row, seed)
    }
}

/// Single-threaded kernel sampling; bit-identical to [`switch_kernel`].
pub fn switch_kernel_seq(
    map: &PolynomialMap,
    grid: &ComplexGrid,
    partitions: &[Partition],
    samples_per_row: usize,
    seed: u64,
) -> Result<SwitchKernel, PartitionError> {
    let shells = shell_cell_indices(partitions)?;
    let k = grid.num_basins;
    let counts: Vec<Vec<u64>> = shells
        .iter()
        .enumerate()
        .map(|(row, cells)| {
            let mut acc = vec![0u64; k];
            for s in 0..samples_per_row {
                let id = ((row as u64) << 32) | s as u64;
                if let Some(dest) = sample_destination(map, &grid.spec, cells, seed, id) {
                    acc[dest] += 1;
                }
            }
            acc
        })
        .collect();
    rows_from_counts(counts, partitions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fractal::extract_boundary;
    use crate::newton::label_grid;
    use proptest::prelude::*;

    fn half_plane_grid(nx: usize, ny: usize) -> (ComplexGrid, BoundaryMask) {
        let spec = GridSpec::from_window(-1.0, 1.0, -1.0, 1.0, nx, ny);
        let labels = (0..nx * ny)
            .map(|idx| {
                if idx % nx < nx / 2 {
                    CellLabel::Basin(0)
                } else {
                    CellLabel::Basin(1)
                }
            })
            .collect();
        let grid = ComplexGrid { spec, num_basins: 2, labels, iters: vec![0; nx * ny] };
        let mask = extract_boundary(&grid).unwrap();
        (grid, mask)
    }

    fn cubic_fixture(n: usize) -> (PolynomialMap, ComplexGrid, BoundaryMask) {
        let map = PolynomialMap::cubic_roots_of_unity();
        let spec = GridSpec::from_window(-2.0, 2.0, -2.0, 2.0, n, n);
        let grid = label_grid(&map, &spec, DEFAULT_MAX_ITERS, DEFAULT_CONVERGENCE_RADIUS);
        let mask = extract_boundary(&grid).unwrap();
        (map, grid, mask)
    }

    #[test]
    fn half_plane_shell_is_the_expected_band() {
        let (grid, mask) = half_plane_grid(32, 32);
        let p = build_partition(&grid, &mask, 0, 1).unwrap();
        // Basin 0 is columns 0..16. Dilation reaches column 16, the mask
        // adds nothing new, erosion keeps columns 0..15.
        for j in 0..32 {
            for i in 0..32 {
                let idx = j * 32 + i;
                assert_eq!(p.inner[idx], i <= 14, "inner {i},{j}");
                assert_eq!(p.outer[idx], i <= 16, "outer {i},{j}");
                assert_eq!(p.shell[idx], i == 15 || i == 16, "shell {i},{j}");
            }
        }
        let expect = (2.0 * 32.0) / (17.0 * 32.0);
        assert!((p.theta - expect).abs() < 1e-15);
    }

    #[test]
    fn nesting_holds_cell_by_cell_on_the_cubic() {
        let (_, grid, mask) = cubic_fixture(128);
        for r in 1..=4 {
            for k in 0..3 {
                let p = build_partition(&grid, &mask, k, r).unwrap();
                for idx in 0..grid.labels.len() {
                    let in_basin = grid.labels[idx] == CellLabel::Basin(k);
                    assert!(!p.inner[idx] || in_basin, "inner outside basin at {idx}");
                    assert!(!in_basin || p.outer[idx], "basin outside outer at {idx}");
                }
            }
        }
    }

    #[test]
    fn theta_grows_with_radius() {
        let (_, grid, mask) = cubic_fixture(128);
        let mut last = 0.0;
        for r in 1..=4 {
            let p = build_partition(&grid, &mask, 1, r).unwrap();
            assert!(p.theta > 0.0 && p.theta < 1.0);
            assert!(p.theta >= last, "theta fell from {last} to {} at radius {r}", p.theta);
            last = p.theta;
        }
    }

    #[test]
    fn oversized_radius_empties_the_inner_region() {
        let (grid, mask) = half_plane_grid(32, 32);
        assert_eq!(
            build_partition(&grid, &mask, 0, 32).unwrap_err(),
            PartitionError::EmptyInner { radius: 32 }
        );
    }

    #[test]
    fn every_cell_gets_exactly_one_region() {
        let (_, grid, mask) = cubic_fixture(96);
        let p = build_partition(&grid, &mask, 1, 2).unwrap();
        for j in 0..96 {
            for i in 0..96 {
                let z = grid.spec.cell_center(i, j);
                let idx = j * 96 + i;
                let expect = if p.inner[idx] {
                    Region::Inside
                } else if !p.outer[idx] {
                    Region::Outside
                } else {
                    Region::Uncertain
                };
                assert_eq!(classify_point(&p, z).unwrap(), expect);
            }
        }
    }

    #[test]
    fn classification_matches_geometry() {
        let (_, grid, mask) = cubic_fixture(128);
        let p = build_partition(&grid, &mask, 1, 2).unwrap();
        assert_eq!(classify_point(&p, Complex64::new(1.0, 0.0)).unwrap(), Region::Inside);
        // Deep in the basin of the upper root.
        let ang = 2.0 * std::f64::consts::PI / 3.0;
        let far = Complex64::from_polar(1.0, ang);
        assert_eq!(classify_point(&p, far).unwrap(), Region::Outside);
        assert!(matches!(
            classify_point(&p, Complex64::new(10.0, 0.0)).unwrap_err(),
            PartitionError::OutOfWindow(_)
        ));
        // Boundary cells always sit in the shell: they are in the outer
        // region by construction and erosion removed them from the inner.
        for (idx, &on) in mask.cells.iter().enumerate() {
            if on {
                let (i, j) = (idx % 128, idx / 128);
                let z = grid.spec.cell_center(i, j);
                assert_eq!(classify_point(&p, z).unwrap(), Region::Uncertain, "cell {i},{j}");
            }
        }
    }

    #[test]
    fn kernel_rows_are_stochastic_and_deterministic() {
        let (map, grid, mask) = cubic_fixture(96);
        let parts: Vec<Partition> = (0..3)
            .map(|k| build_partition(&grid, &mask, k, 2).unwrap())
            .collect();
        let a = switch_kernel(&map, &grid, &parts, 600, 11).unwrap();
        let b = switch_kernel_seq(&map, &grid, &parts, 600, 11).unwrap();
        assert_eq!(a, b);
        a.validate().unwrap();
        for k in 0..3 {
            assert!(a.probs[k][k] > 0.0, "diagonal entry {k} vanished");
        }
        let c = switch_kernel(&map, &grid, &parts, 600, 12).unwrap();
        assert_ne!(a, c, "different seeds should move the tallies");
    }

    #[test]
    fn identity_and_uniform_kernels_validate() {
        SwitchKernel::identity(3).validate().unwrap();
        let k = SwitchKernel::uniform_stay(3, 0.9);
        k.validate().unwrap();
        assert!((k.probs[0][0] - 0.9).abs() < 1e-15);
        assert!((k.probs[0][1] - 0.05).abs() < 1e-15);
    }

    #[test]
    fn symmetrization_projects_onto_the_cycle() {
        let k = SwitchKernel {
            probs: vec![
                vec![0.8, 0.15, 0.05],
                vec![0.1, 0.7, 0.2],
                vec![0.25, 0.05, 0.7],
            ],
        };
        let s = k.symmetrized(&[1, 2, 0]);
        s.validate().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((s.probs[i][j] - s.probs[(i + 1) % 3][(j + 1) % 3]).abs() < 1e-15);
            }
        }
        // Projection is idempotent.
        let s2 = s.symmetrized(&[1, 2, 0]);
        for i in 0..3 {
            for j in 0..3 {
                assert!((s.probs[i][j] - s2.probs[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn invalid_kernels_are_rejected() {
        let bad = SwitchKernel { probs: vec![vec![0.6, 0.3], vec![0.5, 0.5]] };
        assert!(matches!(bad.validate(), Err(PartitionError::InvalidKernel(_))));
    }

    proptest! {
        #[test]
        fn erosion_and_dilation_nest(
            cells in proptest::collection::vec(any::<bool>(), 18 * 18),
            r in 1usize..4,
        ) {
            let d = dilate(&cells, 18, 18, r);
            let e = erode(&cells, 18, 18, r);
            for idx in 0..cells.len() {
                prop_assert!(!e[idx] || cells[idx]);
                prop_assert!(!cells[idx] || d[idx]);
            }
        }

        #[test]
        fn morphology_is_monotone_in_radius(cells in proptest::collection::vec(any::<bool>(), 16 * 16)) {
            let mut prev_d = cells.clone();
            let mut prev_e = cells.clone();
            for r in 1usize..5 {
                let d = dilate(&cells, 16, 16, r);
                let e = erode(&cells, 16, 16, r);
                for idx in 0..cells.len() {
                    prop_assert!(!prev_d[idx] || d[idx]);
                    prop_assert!(!e[idx] || prev_e[idx]);
                }
                prev_d = d;
                prev_e = e;
            }
        }
    }
}
