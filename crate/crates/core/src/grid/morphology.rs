use rayon::prelude::*;

use super::Mask;
use crate::error::{Error, Result};

/// Euclidean buffer: a cell becomes true iff some true cell center lies
/// within `radius_m` of its center.
///
/// The disc is stored as per-row half widths. Each input row is first reduced
/// to the horizontal distance (in cells) to its nearest true cell, so an
/// output cell only has to compare one number per disc row.
pub fn dilate(mask: &Mask, radius_m: f64) -> Result<Mask> {
    if !(radius_m >= 0.0) || !radius_m.is_finite() {
        return Err(Error::invalid(format!("buffer radius must be >= 0, got {radius_m}")));
    }
    let spec = *mask.spec();
    let half_widths = disc_half_widths(radius_m, spec.cell_size);
    if half_widths.len() == 1 && half_widths[0] == 0 {
        return Ok(mask.clone());
    }
    let reach = (half_widths.len() / 2) as i64;
    let (nrows, ncols) = (spec.nrows, spec.ncols);

    let nearest: Vec<u32> = (0..nrows)
        .into_par_iter()
        .flat_map_iter(|r| row_nearest_true(mask.row(r)))
        .collect();

    let mut out = Mask::new(spec);
    out.cells_mut()
        .par_chunks_mut(ncols)
        .enumerate()
        .for_each(|(r, cells)| {
            let lo = (r as i64 - reach).max(0);
            let hi = (r as i64 + reach).min(nrows as i64 - 1);
            for src in lo..=hi {
                let w = half_widths[(src - r as i64 + reach) as usize];
                let row = &nearest[src as usize * ncols..(src as usize + 1) * ncols];
                for (cell, &d) in cells.iter_mut().zip(row) {
                    *cell |= d <= w;
                }
            }
        });
    Ok(out)
}

/// Half widths `w(dy)` for `dy = -k..=k`: the largest `dx` with
/// `(dx·cs)² + (dy·cs)² <= r²`.
fn disc_half_widths(radius: f64, cell_size: f64) -> Vec<u32> {
    let r2 = radius * radius;
    let within = |dx: i64, dy: i64| {
        let (x, y) = (dx as f64 * cell_size, dy as f64 * cell_size);
        x * x + y * y <= r2
    };
    let mut k = (radius / cell_size).floor() as i64;
    while within(0, k + 1) {
        k += 1;
    }
    while k > 0 && !within(0, k) {
        k -= 1;
    }
    (-k..=k)
        .map(|dy| {
            let mut w = k;
            while w > 0 && !within(w, dy) {
                w -= 1;
            }
            w as u32
        })
        .collect()
}

/// Horizontal distance in cells to the nearest true cell in the row.
fn row_nearest_true(row: &[bool]) -> Vec<u32> {
    let n = row.len();
    let mut d = vec![u32::MAX; n];
    let mut last: Option<usize> = None;
    for i in 0..n {
        if row[i] {
            last = Some(i);
        }
        if let Some(j) = last {
            d[i] = (i - j) as u32;
        }
    }
    last = None;
    for i in (0..n).rev() {
        if row[i] {
            last = Some(i);
        }
        if let Some(j) = last {
            d[i] = d[i].min((j - i) as u32);
        }
    }
    d
}
