//! Sidecar metadata for rendered grids: key=value lines carrying the
//! polynomial, window, and resolution, enough to rebuild the grid spec and
//! the map without the original command line.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use basin_bayes::GridSpec;
use num_complex::Complex64;

#[derive(Debug, Clone)]
pub struct GridMeta {
    /// Polynomial coefficients in ascending powers.
    pub poly: Vec<Complex64>,
    /// xmin, xmax, ymin, ymax.
    pub window: [f64; 4],
    pub nx: usize,
    pub ny: usize,
    pub num_basins: usize,
    pub max_iters: usize,
}

impl GridMeta {
    pub fn spec(&self) -> GridSpec {
        let [xmin, xmax, ymin, ymax] = self.window;
        GridSpec::from_window(xmin, xmax, ymin, ymax, self.nx, self.ny)
    }
}

pub fn fmt_complex(c: Complex64) -> String {
    if c.im == 0.0 {
        format!("{}", c.re)
    } else if c.im < 0.0 {
        format!("{}-{}i", c.re, -c.im)
    } else {
        format!("{}+{}i", c.re, c.im)
    }
}

pub fn parse_complex(s: &str) -> Result<Complex64> {
    s.trim()
        .parse()
        .map_err(|e| anyhow!("bad complex number {:?}: {e}", s.trim()))
}

pub fn write_meta(path: &Path, meta: &GridMeta) -> Result<()> {
    let poly: Vec<String> = meta.poly.iter().map(|&c| fmt_complex(c)).collect();
    let [xmin, xmax, ymin, ymax] = meta.window;
    let text = format!(
        "poly={}\nwindow={xmin},{xmax},{ymin},{ymax}\nresolution={}x{}\n\
         num_basins={}\nmax_iters={}\nseed=irrelevant\nversion={}\n",
        poly.join(","),
        meta.nx,
        meta.ny,
        meta.num_basins,
        meta.max_iters,
        env!("CARGO_PKG_VERSION"),
    );
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Parses a sidecar. Unknown keys are ignored so newer files stay readable.
pub fn read_meta(path: &Path) -> Result<GridMeta> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut poly = None;
    let mut window = None;
    let mut resolution = None;
    let mut num_basins = None;
    let mut max_iters = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .with_context(|| format!("{}:{}: expected key=value", path.display(), i + 1))?;
        let value = value.trim();
        match key.trim() {
            "poly" => {
                poly = Some(
                    value
                        .split(',')
                        .map(parse_complex)
                        .collect::<Result<Vec<_>>>()?,
                );
            }
            "window" => {
                let parts: Vec<f64> = value
                    .split(',')
                    .map(|p| p.trim().parse())
                    .collect::<Result<_, _>>()
                    .with_context(|| format!("bad window {value:?}"))?;
                if parts.len() != 4 {
                    bail!("window needs 4 numbers, got {}", parts.len());
                }
                window = Some([parts[0], parts[1], parts[2], parts[3]]);
            }
            "resolution" => {
                let (nx, ny) = value
                    .split_once('x')
                    .with_context(|| format!("bad resolution {value:?}"))?;
                resolution = Some((
                    nx.trim().parse::<usize>().with_context(|| format!("bad nx {nx:?}"))?,
                    ny.trim().parse::<usize>().with_context(|| format!("bad ny {ny:?}"))?,
                ));
            }
            "num_basins" => num_basins = Some(value.parse().context("bad num_basins")?),
            "max_iters" => max_iters = Some(value.parse().context("bad max_iters")?),
            _ => {}
        }
    }
    let (nx, ny) = resolution.context("sidecar is missing resolution")?;
    Ok(GridMeta {
        poly: poly.context("sidecar is missing poly")?,
        window: window.context("sidecar is missing window")?,
        nx,
        ny,
        num_basins: num_basins.context("sidecar is missing num_basins")?,
        max_iters: max_iters.context("sidecar is missing max_iters")?,
    })
}
