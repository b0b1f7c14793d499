//! Plain-text grid format.
//!
//! ```text
//! ncols N
//! nrows M
//! xllcorner X
//! yllcorner Y
//! cellsize C
//! nodata_value V
//! <M rows of N space-separated values, northernmost first>
//! ```
//!
//! Floats are written in shortest round-trip form, so write → read is lossless.

use std::fmt::Write as _;
use std::path::Path;

use super::{FloatGrid, GridSpec, Mask, DEFAULT_NODATA};
use crate::error::{Error, Result};

const KEYS: [&str; 6] = ["ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value"];

fn header(spec: &GridSpec, nodata: f64) -> String {
    format!(
        "ncols {}\nnrows {}\nxllcorner {}\nyllcorner {}\ncellsize {}\nnodata_value {}\n",
        spec.ncols, spec.nrows, spec.origin_x, spec.origin_y, spec.cell_size, nodata
    )
}

pub fn format_mask(mask: &Mask) -> String {
    let spec = mask.spec();
    let mut out = header(spec, DEFAULT_NODATA);
    out.reserve(spec.len() * 2);
    for r in 0..spec.nrows {
        for (c, &v) in mask.row(r).iter().enumerate() {
            if c > 0 {
                out.push(' ');
            }
            out.push(if v { '1' } else { '0' });
        }
        out.push('\n');
    }
    out
}

pub fn format_float_grid(grid: &FloatGrid) -> String {
    let spec = grid.spec();
    let mut out = header(spec, grid.nodata_value);
    for r in 0..spec.nrows {
        for c in 0..spec.ncols {
            if c > 0 {
                out.push(' ');
            }
            let v = grid.values()[spec.index(r, c)];
            let v = if v.is_nan() { grid.nodata_value } else { v };
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    out
}

pub fn write_mask(path: impl AsRef<Path>, mask: &Mask) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_mask(mask)).map_err(|e| Error::file(path, e))
}

pub fn write_float_grid(path: impl AsRef<Path>, grid: &FloatGrid) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_float_grid(grid)).map_err(|e| Error::file(path, e))
}

pub fn read_float_grid(path: impl AsRef<Path>) -> Result<FloatGrid> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    parse_float_grid(&text)
}

/// Reads a grid as a mask: nonzero cells are true, nodata and zero are false.
pub fn read_mask(path: impl AsRef<Path>) -> Result<Mask> {
    let grid = read_float_grid(path)?;
    let cells = grid.values().iter().map(|&v| !v.is_nan() && v != 0.0).collect();
    Mask::from_cells(*grid.spec(), cells)
}

pub fn parse_float_grid(text: &str) -> Result<FloatGrid> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let mut head = [0.0f64; 6];
    for (k, key) in KEYS.iter().enumerate() {
        let (n, line) = lines.next().ok_or_else(|| Error::GridParse {
            line: k + 1,
            msg: format!("missing header field {key}"),
        })?;
        let mut parts = line.split_whitespace();
        let name = parts.next().unwrap_or_default();
        if !name.eq_ignore_ascii_case(key) {
            return Err(Error::GridParse {
                line: n + 1,
                msg: format!("expected {key}, found {name:?}"),
            });
        }
        let value = parts.next().and_then(|v| v.parse::<f64>().ok()).ok_or_else(|| Error::GridParse {
            line: n + 1,
            msg: format!("{key} needs a numeric value"),
        })?;
        if parts.next().is_some() {
            return Err(Error::GridParse {
                line: n + 1,
                msg: format!("trailing tokens after {key}"),
            });
        }
        head[k] = value;
    }
    let as_count = |v: f64, key: &str| -> Result<usize> {
        if v >= 1.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(Error::GridParse {
                line: 0,
                msg: format!("{key} must be a positive integer, got {v}"),
            })
        }
    };
    let ncols = as_count(head[0], "ncols")?;
    let nrows = as_count(head[1], "nrows")?;
    let spec = GridSpec::new(head[2], head[3], head[4], ncols, nrows).map_err(|e| Error::GridParse {
        line: 0,
        msg: e.to_string(),
    })?;
    let nodata = head[5];

    let mut values = Vec::with_capacity(spec.len());
    let mut rows = 0;
    for (n, line) in lines {
        rows += 1;
        if rows > nrows {
            return Err(Error::DimensionMismatch(format!(
                "header declares {nrows} rows, found more (line {})",
                n + 1
            )));
        }
        let before = values.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| Error::GridParse {
                line: n + 1,
                msg: format!("bad value {tok:?}"),
            })?;
            values.push(if v == nodata { f64::NAN } else { v });
        }
        if values.len() - before != ncols {
            return Err(Error::DimensionMismatch(format!(
                "line {}: {} values, header declares ncols {ncols}",
                n + 1,
                values.len() - before
            )));
        }
    }
    if rows != nrows {
        return Err(Error::DimensionMismatch(format!(
            "header declares {nrows} rows, found {rows}"
        )));
    }
    let mut grid = FloatGrid::from_values(spec, values)?;
    grid.nodata_value = nodata;
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_grid_round_trip_with_nodata() {
        let spec = GridSpec::new(-1234.5, 987.25, 100.0, 3, 2).unwrap();
        let g = FloatGrid::from_values(spec, vec![0.1, f64::NAN, -3.0, 1e-17, 2.0 / 3.0, 12345.678]).unwrap();
        let back = parse_float_grid(&format_float_grid(&g)).unwrap();
        assert_eq!(back, g);
        assert!(back.get(0, 1).is_none());
    }

    #[test]
    fn exact_text_layout() {
        let spec = GridSpec::new(0.0, 0.0, 100.0, 2, 2).unwrap();
        let mut m = Mask::new(spec);
        m.set(0, 1, true);
        assert_eq!(
            format_mask(&m),
            "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 100\nnodata_value -9999\n0 1\n0 0\n"
        );
    }

    #[test]
    fn ncols_mismatch_is_an_error() {
        let text = "ncols 3\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 100\nnodata_value -9999\n1 2\n3 4\n";
        assert!(matches!(parse_float_grid(text), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn row_count_mismatch_is_an_error() {
        let text = "ncols 2\nnrows 3\nxllcorner 0\nyllcorner 0\ncellsize 100\nnodata_value -9999\n1 2\n3 4\n";
        assert!(matches!(parse_float_grid(text), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn malformed_header_is_an_error() {
        let text = "ncols 2\nrows 2\nxllcorner 0\nyllcorner 0\ncellsize 100\nnodata_value -9999\n1 2\n3 4\n";
        assert!(matches!(parse_float_grid(text), Err(Error::GridParse { .. })));
        let text = "ncols two\nnrows 2\n";
        assert!(matches!(parse_float_grid(text), Err(Error::GridParse { .. })));
    }
}
