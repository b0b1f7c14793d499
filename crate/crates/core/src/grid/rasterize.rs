use rayon::prelude::*;

use super::vector::{Coord, PlanarFeature, PlanarGeometry};
use super::{GridSpec, Mask};

/// Burns projected features into a boolean grid.
///
/// A cell is set when its center lies inside a polygon (even-odd rule, holes
/// honored) or within `cell_size / 2` of a polyline or point.
pub fn rasterize(features: &[PlanarFeature], spec: &GridSpec) -> Mask {
    let mut mask = Mask::new(*spec);
    let mut polygons: Vec<&Vec<Vec<Coord>>> = Vec::new();
    let mut lines: Vec<&[Coord]> = Vec::new();
    for f in features {
        collect(&f.geometry, &mut polygons, &mut lines);
    }
    for rings in polygons {
        rasterize_polygon_into(&mut mask, rings);
    }
    let half = spec.cell_size / 2.0;
    for line in lines {
        if line.len() == 1 {
            burn_segment(&mut mask, line[0], line[0], half);
        }
        for w in line.windows(2) {
            burn_segment(&mut mask, w[0], w[1], half);
        }
    }
    mask
}

fn collect<'a>(g: &'a PlanarGeometry, polys: &mut Vec<&'a Vec<Vec<Coord>>>, lines: &mut Vec<&'a [Coord]>) {
    match g {
        PlanarGeometry::Polygon(rings) => polys.push(rings),
        PlanarGeometry::Polyline(cs) => lines.push(cs),
        PlanarGeometry::Point(c) => lines.push(std::slice::from_ref(c)),
        PlanarGeometry::Multi(parts) => parts.iter().for_each(|p| collect(p, polys, lines)),
    }
}

/// Sets every cell whose center is inside the polygon given by `rings`.
pub fn rasterize_polygon_into(mask: &mut Mask, rings: &[Vec<Coord>]) {
    let spec = *mask.spec();
    let edges: Vec<(Coord, Coord)> = rings
        .iter()
        .flat_map(|r| r.windows(2).map(|w| (w[0], w[1])))
        .filter(|(a, b)| a[1] != b[1])
        .collect();
    if edges.is_empty() {
        return;
    }
    let (ymin, ymax) = edges.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (a, b)| {
        (lo.min(a[1]).min(b[1]), hi.max(a[1]).max(b[1]))
    });

    mask.cells_mut()
        .par_chunks_mut(spec.ncols)
        .enumerate()
        .for_each_init(Vec::new, |xs: &mut Vec<f64>, (row, cells)| {
            let (_, y) = spec.cell_center(row, 0);
            if y < ymin || y > ymax {
                return;
            }
            xs.clear();
            for &(a, b) in &edges {
                if (a[1] > y) != (b[1] > y) {
                    xs.push(a[0] + (y - a[1]) * (b[0] - a[0]) / (b[1] - a[1]));
                }
            }
            xs.sort_by(f64::total_cmp);
            for pair in xs.chunks_exact(2) {
                let start = first_col_at_or_after(&spec, pair[0]);
                let end = first_col_at_or_after(&spec, pair[1]);
                for cell in &mut cells[start..end] {
                    *cell = true;
                }
            }
        });
}

/// Smallest column whose center x is `>= x` (clamped to `0..=ncols`).
fn first_col_at_or_after(spec: &GridSpec, x: f64) -> usize {
    let center = |c: usize| spec.cell_center(0, c).0;
    let est = ((x - spec.origin_x) / spec.cell_size - 0.5).ceil();
    let mut c = est.clamp(0.0, spec.ncols as f64) as usize;
    while c > 0 && center(c - 1) >= x {
        c -= 1;
    }
    while c < spec.ncols && center(c) < x {
        c += 1;
    }
    c
}

pub(crate) fn point_segment_dist2(p: Coord, a: Coord, b: Coord) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    };
    let (qx, qy) = (a[0] + t * dx - p[0], a[1] + t * dy - p[1]);
    qx * qx + qy * qy
}

fn burn_segment(mask: &mut Mask, a: Coord, b: Coord, radius: f64) {
    let spec = *mask.spec();
    let cs = spec.cell_size;
    let r2 = radius * radius;
    let (x0, x1) = (a[0].min(b[0]) - radius, a[0].max(b[0]) + radius);
    let (y0, y1) = (a[1].min(b[1]) - radius, a[1].max(b[1]) + radius);
    // inclusive column/row window, widened by one to absorb rounding
    let c0 = (((x0 - spec.origin_x) / cs).floor() as i64 - 1).max(0);
    let c1 = (((x1 - spec.origin_x) / cs).floor() as i64 + 1).min(spec.ncols as i64 - 1);
    let rb0 = (((y0 - spec.origin_y) / cs).floor() as i64 - 1).max(0);
    let rb1 = (((y1 - spec.origin_y) / cs).floor() as i64 + 1).min(spec.nrows as i64 - 1);
    if c0 > c1 || rb0 > rb1 {
        return;
    }
    for rb in rb0..=rb1 {
        let row = spec.nrows - 1 - rb as usize;
        for col in c0 as usize..=c1 as usize {
            let (x, y) = spec.cell_center(row, col);
            if point_segment_dist2([x, y], a, b) <= r2 {
                mask.set(row, col, true);
            }
        }
    }
}
