//! Binary P6 pixmaps for label grids. The palette is deterministic and
//! collision-free, so a rendered grid converts back to labels exactly:
//! writing an image loses nothing but the iteration counts.

use std::io::{BufRead, Write};

use thiserror::Error;

use crate::newton::{CellLabel, ComplexGrid};

#[derive(Debug, Error)]
pub enum PixmapError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad pixmap: {0}")]
    Format(String),
    #[error("pixel ({0}, {1}, {2}) is not in the palette")]
    UnknownColor(u8, u8, u8),
}

/// 8-bit RGB image, row-major from the top-left pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pixmap {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[u8; 3]>,
}

pub const UNRESOLVED_COLOR: [u8; 3] = [0, 0, 0];

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let h = (h.fract() + 1.0).fract() * 6.0;
    let c = v * s;
    let x = c * (1.0 - (h % 2.0 - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    let byte = |f: f64| ((f + m) * 255.0).round().clamp(0.0, 255.0) as u8;
    [byte(r), byte(g), byte(b)]
}

/// One saturated color per basin index, hues stepped by the golden angle.
/// Colors are pairwise distinct and never black (black marks unresolved
/// cells); collisions fall back to a deterministic blue-channel probe.
pub fn basin_palette(n: usize) -> Vec<[u8; 3]> {
    const GOLDEN: f64 = 0.618_033_988_749_895;
    let mut used: std::collections::HashSet<[u8; 3]> = std::collections::HashSet::new();
    used.insert(UNRESOLVED_COLOR);
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let mut color = hsv_to_rgb(k as f64 * GOLDEN, 0.85, 0.95);
        while !used.insert(color) {
            color[2] = color[2].wrapping_add(1);
        }
        out.push(color);
    }
    out
}

/// Renders labels with `basin_palette`; the pixel row order is flipped so
/// increasing imaginary part points up in the image.
pub fn colorize(grid: &ComplexGrid) -> Pixmap {
    let palette = basin_palette(grid.num_basins);
    let (nx, ny) = (grid.spec.nx, grid.spec.ny);
    let mut pixels = vec![UNRESOLVED_COLOR; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let color = match grid.label_at(i, j) {
                CellLabel::Basin(k) => palette[k],
                CellLabel::Unresolved => UNRESOLVED_COLOR,
            };
            pixels[(ny - 1 - j) * nx + i] = color;
        }
    }
    Pixmap { width: nx, height: ny, pixels }
}

/// Inverse of `colorize` up to the iteration counts.
pub fn labels_from_pixmap(pix: &Pixmap, num_basins: usize) -> Result<Vec<CellLabel>, PixmapError> {
    let palette = basin_palette(num_basins);
    let lookup: std::collections::HashMap<[u8; 3], CellLabel> = palette
        .iter()
        .enumerate()
        .map(|(k, &c)| (c, CellLabel::Basin(k)))
        .chain(std::iter::once((UNRESOLVED_COLOR, CellLabel::Unresolved)))
        .collect();
    let (nx, ny) = (pix.width, pix.height);
    let mut labels = vec![CellLabel::Unresolved; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let c = pix.pixels[(ny - 1 - j) * nx + i];
            labels[j * nx + i] =
                *lookup.get(&c).ok_or(PixmapError::UnknownColor(c[0], c[1], c[2]))?;
        }
    }
    Ok(labels)
}

/// Writes the image as binary P6 with a 255 maxval.
pub fn write_p6(w: &mut impl Write, pix: &Pixmap) -> Result<(), PixmapError> {
    if pix.pixels.len() != pix.width * pix.height {
        return Err(PixmapError::Format(format!(
            "{} pixels for {}x{}",
            pix.pixels.len(),
            pix.width,
            pix.height
        )));
    }
    write!(w, "P6\n{} {}\n255\n", pix.width, pix.height)?;
    for p in &pix.pixels {
        w.write_all(p)?;
    }
    Ok(())
}

fn header_token(r: &mut impl BufRead) -> Result<String, PixmapError> {
    let mut tok = Vec::new();
    loop {
        let mut byte = [0u8; 1];
        let n = r.read(&mut byte)?;
        if n == 0 {
            if tok.is_empty() {
                return Err(PixmapError::Format("truncated header".into()));
            }
            break;
        }
        match byte[0] {
            b'#' if tok.is_empty() => {
                let mut skip = Vec::new();
                r.read_until(b'\n', &mut skip)?;
            }
            b if b.is_ascii_whitespace() => {
                if !tok.is_empty() {
                    break;
                }
            }
            b => tok.push(b),
        }
    }
    String::from_utf8(tok).map_err(|_| PixmapError::Format("non-ascii header".into()))
}

/// Reads the subset of P6 this crate writes (plus `#` header comments).
pub fn read_p6(r: &mut impl BufRead) -> Result<Pixmap, PixmapError> {
    if header_token(r)? != "P6" {
        return Err(PixmapError::Format("not a P6 pixmap".into()));
    }
    let parse = |s: String| {
        s.parse::<usize>().map_err(|_| PixmapError::Format(format!("bad header field {s:?}")))
    };
    let width = parse(header_token(r)?)?;
    let height = parse(header_token(r)?)?;
    let maxval = parse(header_token(r)?)?;
    if maxval != 255 {
        return Err(PixmapError::Format(format!("unsupported maxval {maxval}")));
    }
    if width == 0 || height == 0 || width.saturating_mul(height) > (1 << 30) {
        return Err(PixmapError::Format(format!("unreasonable size {width}x{height}")));
    }
    let mut raw = vec![0u8; width * height * 3];
    r.read_exact(&mut raw).map_err(|_| PixmapError::Format("truncated pixel data".into()))?;
    let pixels = raw.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    Ok(Pixmap { width, height, pixels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::newton::{label_grid, GridSpec, PolynomialMap};
    use std::io::BufReader;

    #[test]
    fn palette_colors_are_distinct_and_never_black() {
        let palette = basin_palette(64);
        let mut seen = std::collections::HashSet::new();
        for c in &palette {
            assert_ne!(*c, UNRESOLVED_COLOR);
            assert!(seen.insert(*c), "palette repeats {c:?}");
        }
    }

    #[test]
    fn colorize_then_invert_recovers_all_labels() {
        let map = PolynomialMap::cubic_roots_of_unity();
        let spec = GridSpec::from_window(-2.0, 2.0, -2.0, 2.0, 48, 40);
        let grid = label_grid(&map, &spec, 200, 1e-9);
        let pix = colorize(&grid);
        let labels = labels_from_pixmap(&pix, grid.num_basins).unwrap();
        assert_eq!(labels, grid.labels);
    }

    #[test]
    fn p6_round_trips_bytes() {
        let map = PolynomialMap::cubic_roots_of_unity();
        let spec = GridSpec::from_window(-1.0, 1.0, -1.0, 1.0, 17, 11);
        let pix = colorize(&label_grid(&map, &spec, 200, 1e-9));
        let mut buf = Vec::new();
        write_p6(&mut buf, &pix).unwrap();
        let back = read_p6(&mut BufReader::new(&buf[..])).unwrap();
        assert_eq!(back, pix);
    }

    #[test]
    fn header_comments_are_tolerated() {
        let data = b"P6\n# a comment line\n2 1\n255\nabcdef";
        let pix = read_p6(&mut BufReader::new(&data[..])).unwrap();
        assert_eq!(pix.width, 2);
        assert_eq!(pix.pixels, vec![*b"abc", *b"def"]);
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        let cases: &[&[u8]] = &[
            b"P5\n2 1\n255\nabcdef",
            b"P6\n2 1\n65535\nabcdef",
            b"P6\n2 1\n255\nabc",
            b"P6\nx 1\n255\nabcdef",
            b"",
        ];
        for case in cases {
            assert!(read_p6(&mut BufReader::new(*case)).is_err());
        }
    }

    #[test]
    fn unknown_colors_fail_inversion() {
        let pix = Pixmap { width: 1, height: 1, pixels: vec![[1, 2, 3]] };
        assert!(matches!(
            labels_from_pixmap(&pix, 3),
            Err(PixmapError::UnknownColor(1, 2, 3))
        ));
    }
}
