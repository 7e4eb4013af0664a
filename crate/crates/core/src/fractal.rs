//! Boundary extraction, box-counting dimension, and area measures on
//! labeled grids.

use thiserror::Error;

use crate::newton::{CellLabel, ComplexGrid};
use crate::partition::Partition;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FractalError {
    #[error("grid carries fewer than two distinct labels; no boundary exists")]
    DegenerateGrid,
    #[error("boundary mask is empty")]
    EmptyMask,
    #[error("shapes disagree: {0}")]
    ShapeMismatch(String),
}

/// Cells adjacent (4-neighborhood) to a differently labeled cell.
/// Unresolved compares unequal to every label, itself included.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryMask {
    pub nx: usize,
    pub ny: usize,
    pub cells: Vec<bool>,
}

impl BoundaryMask {
    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn fraction(&self) -> f64 {
        self.count() as f64 / (self.nx * self.ny) as f64
    }
}

fn labels_differ(a: CellLabel, b: CellLabel) -> bool {
    match (a, b) {
        (CellLabel::Basin(x), CellLabel::Basin(y)) => x != y,
        _ => true,
    }
}

/// Marks every cell whose 4-neighborhood crosses a label change.
pub fn extract_boundary(grid: &ComplexGrid) -> Result<BoundaryMask, FractalError> {
    let distinct: std::collections::HashSet<CellLabel> = grid.labels.iter().copied().collect();
    if distinct.len() < 2 {
        return Err(FractalError::DegenerateGrid);
    }
    let (nx, ny) = (grid.spec.nx, grid.spec.ny);
    let mut cells = vec![false; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let here = grid.label_at(i, j);
            let mut edge = false;
            if i + 1 < nx {
                edge |= labels_differ(here, grid.label_at(i + 1, j));
            }
            if i > 0 {
                edge |= labels_differ(here, grid.label_at(i - 1, j));
            }
            if j + 1 < ny {
                edge |= labels_differ(here, grid.label_at(i, j + 1));
            }
            if j > 0 {
                edge |= labels_differ(here, grid.label_at(i, j - 1));
            }
            cells[j * nx + i] = edge;
        }
    }
    Ok(BoundaryMask { nx, ny, cells })
}

/// Box-count fit. `slope` is the least-squares slope of log(count) against
/// log(1/box_size), so a space-filling mask reads 2 and a smooth curve 1.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DimensionEstimate {
    pub box_sizes: Vec<usize>,
    pub counts: Vec<usize>,
    pub slope: f64,
    pub r2: f64,
}

/// Powers of 2 from 2 up to nx/8; at least four fit points at 128 cells
/// and above.
pub fn default_box_sizes(nx: usize) -> Vec<usize> {
    let mut sizes = Vec::new();
    let mut s = 2usize;
    while s <= nx / 8 {
        sizes.push(s);
        s *= 2;
    }
    sizes
}

fn count_boxes(mask: &BoundaryMask, size: usize) -> usize {
    // Partial boxes along the far edges count like any other box.
    let bx = mask.nx.div_ceil(size);
    let by = mask.ny.div_ceil(size);
    let mut occupied = 0usize;
    for gy in 0..by {
        for gx in 0..bx {
            let x1 = ((gx + 1) * size).min(mask.nx);
            let y1 = ((gy + 1) * size).min(mask.ny);
            'cells: for y in gy * size..y1 {
                for x in gx * size..x1 {
                    if mask.cells[y * mask.nx + x] {
                        occupied += 1;
                        break 'cells;
                    }
                }
            }
        }
    }
    occupied
}

/// Box-counting dimension estimate over the given box sizes.
pub fn box_counting_dimension(
    mask: &BoundaryMask,
    sizes: &[usize],
) -> Result<DimensionEstimate, FractalError> {
    assert!(sizes.len() >= 4, "need at least four box sizes for a fit");
    assert!(sizes.iter().all(|&s| s >= 1), "box sizes must be positive");
    if mask.count() == 0 {
        return Err(FractalError::EmptyMask);
    }
    let counts = count_all(mask, sizes);
    let xs: Vec<f64> = sizes.iter().map(|&s| (1.0 / s as f64).ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    let (slope, _, r2) = crate::stats::linear_fit(&xs, &ys);
    if r2 < 0.98 {
        log::warn!("box-count fit r2 = {r2:.4} is below 0.98; treat the slope with care");
    }
    Ok(DimensionEstimate { box_sizes: sizes.to_vec(), counts, slope, r2 })
}

fn count_all(mask: &BoundaryMask, sizes: &[usize]) -> Vec<usize> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        sizes.par_iter().map(|&s| count_boxes(mask, s)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        sizes.iter().map(|&s| count_boxes(mask, s)).collect()
    }
}

/// Empirical area fractions by cell counting.
#[derive(Debug, Clone, serde::Serialize)]
pub struct MeasureReport {
    pub basin_fractions: Vec<f64>,
    pub unresolved_fraction: f64,
    pub boundary_fraction: f64,
    pub uncertain_fraction: Option<f64>,
}

/// Counts cells per label; with a mask, reports its fraction too, and with a
/// partition the fraction of its uncertain shell.
pub fn measure_report(
    grid: &ComplexGrid,
    mask: Option<&BoundaryMask>,
    partition: Option<&Partition>,
) -> Result<MeasureReport, FractalError> {
    let total = grid.labels.len() as f64;
    if let Some(m) = mask {
        if (m.nx, m.ny) != (grid.spec.nx, grid.spec.ny) {
            return Err(FractalError::ShapeMismatch(format!(
                "mask {}x{} vs grid {}x{}",
                m.nx, m.ny, grid.spec.nx, grid.spec.ny
            )));
        }
    }
    if let Some(p) = partition {
        if (p.spec.nx, p.spec.ny) != (grid.spec.nx, grid.spec.ny) {
            return Err(FractalError::ShapeMismatch(format!(
                "partition {}x{} vs grid {}x{}",
                p.spec.nx, p.spec.ny, grid.spec.nx, grid.spec.ny
            )));
        }
    }
    let mut basin_counts = vec![0usize; grid.num_basins];
    let mut unresolved = 0usize;
    for l in &grid.labels {
        match l {
            CellLabel::Basin(k) => basin_counts[*k] += 1,
            CellLabel::Unresolved => unresolved += 1,
        }
    }
    Ok(MeasureReport {
        basin_fractions: basin_counts.iter().map(|&c| c as f64 / total).collect(),
        unresolved_fraction: unresolved as f64 / total,
        boundary_fraction: mask.map_or(0.0, BoundaryMask::fraction),
        uncertain_fraction: partition.map(|p| p.shell.iter().filter(|&&c| c).count() as f64 / total),
    })
}
