//! Figures of merit and phase-transition contour extraction.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::{dist_sq, norm_sq};

/// Success threshold on the linear NMSE.
pub const SUCCESS_NMSE: f64 = 1e-4;

/// Level of the empirical phase-transition contour.
pub const CONTOUR_LEVEL: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealizationMetrics {
    pub nmse: f64,
    pub fanmse: f64,
    pub iterations: usize,
    pub success: bool,
    pub seed: u64,
}

impl RealizationMetrics {
    pub fn evaluate(x_true: &[f64], x_hat: &[f64], iterations: usize, seed: u64) -> Result<Self> {
        let nmse = nmse(x_true, x_hat)?;
        Ok(RealizationMetrics {
            nmse,
            fanmse: fanmse(x_true, x_hat)?,
            iterations,
            success: success_indicator(nmse),
            seed,
        })
    }
}

fn truth_energy(x_true: &[f64], x_hat: &[f64]) -> Result<f64> {
    if x_true.len() != x_hat.len() {
        return Err(Error::invalid(format!(
            "length mismatch: truth {} vs estimate {}",
            x_true.len(),
            x_hat.len()
        )));
    }
    let e = norm_sq(x_true);
    if e == 0.0 {
        return Err(Error::DegenerateSignal(
            "normalized error is undefined for an all-zero signal".into(),
        ));
    }
    Ok(e)
}

/// `||x - x_hat||^2 / ||x||^2`
pub fn nmse(x_true: &[f64], x_hat: &[f64]) -> Result<f64> {
    let e = truth_energy(x_true, x_hat)?;
    Ok(dist_sq(x_true, x_hat) / e)
}

/// Energy of the estimate outside the true support, relative to `||x||^2`.
pub fn fanmse(x_true: &[f64], x_hat: &[f64]) -> Result<f64> {
    let e = truth_energy(x_true, x_hat)?;
    let off: f64 = x_true
        .iter()
        .zip(x_hat)
        .filter(|(&t, _)| t == 0.0)
        .map(|(_, &h)| h * h)
        .sum();
    Ok(off / e)
}

pub fn success_indicator(nmse_value: f64) -> bool {
    nmse_value < SUCCESS_NMSE
}

pub fn average_success(indicators: &[bool]) -> Result<f64> {
    if indicators.is_empty() {
        return Err(Error::invalid("average success of zero realizations"));
    }
    Ok(indicators.iter().filter(|&&s| s).count() as f64 / indicators.len() as f64)
}

/// Scalar field sampled on a rectilinear grid. `values[iy][ix]` sits at
/// `(xs[ix], ys[iy])`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl GridField {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        let increasing = |a: &[f64]| a.windows(2).all(|w| w[0] < w[1]);
        if !increasing(&xs) || !increasing(&ys) {
            return Err(Error::invalid("grid axes must be strictly increasing"));
        }
        if values.len() != ys.len() || values.iter().any(|row| row.len() != xs.len()) {
            return Err(Error::invalid("grid values do not match the axes"));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("grid values must be finite"));
        }
        Ok(GridField { xs, ys, values })
    }

    /// Bilinear reconstruction at `(x, y)`; `None` outside the grid.
    pub fn bilinear(&self, x: f64, y: f64) -> Option<f64> {
        let locate = |axis: &[f64], v: f64| -> Option<(usize, f64)> {
            if axis.len() < 2 || v < axis[0] || v > axis[axis.len() - 1] {
                return None;
            }
            let i = axis.partition_point(|&a| a <= v).clamp(1, axis.len() - 1) - 1;
            Some((i, (v - axis[i]) / (axis[i + 1] - axis[i])))
        };
        let (ix, tx) = locate(&self.xs, x)?;
        let (iy, ty) = locate(&self.ys, y)?;
        let v = &self.values;
        let bottom = v[iy][ix] * (1.0 - tx) + v[iy][ix + 1] * tx;
        let top = v[iy + 1][ix] * (1.0 - tx) + v[iy + 1][ix + 1] * tx;
        Some(bottom * (1.0 - ty) + top * ty)
    }
}

/// Grid edge carrying a contour crossing. Ordering is by (row, column, kind).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EdgeId {
    /// Between `(ix, iy)` and `(ix + 1, iy)`.
    Horizontal { iy: usize, ix: usize },
    /// Between `(ix, iy)` and `(ix, iy + 1)`.
    Vertical { iy: usize, ix: usize },
}

fn crossing(field: &GridField, edge: EdgeId, level: f64) -> (f64, f64) {
    let v = &field.values;
    match edge {
        EdgeId::Horizontal { iy, ix } => {
            let (a, b) = (v[iy][ix], v[iy][ix + 1]);
            let t = (level - a) / (b - a);
            (field.xs[ix] + t * (field.xs[ix + 1] - field.xs[ix]), field.ys[iy])
        }
        EdgeId::Vertical { iy, ix } => {
            let (a, b) = (v[iy][ix], v[iy + 1][ix]);
            let t = (level - a) / (b - a);
            (field.xs[ix], field.ys[iy] + t * (field.ys[iy + 1] - field.ys[iy]))
        }
    }
}

/// Corners in perimeter order and the edge that follows each corner.
fn cell_perimeter(ix: usize, iy: usize) -> [((usize, usize), EdgeId); 4] {
    [
        ((ix, iy), EdgeId::Horizontal { iy, ix }),
        ((ix + 1, iy), EdgeId::Vertical { iy, ix: ix + 1 }),
        ((ix + 1, iy + 1), EdgeId::Horizontal { iy: iy + 1, ix }),
        ((ix, iy + 1), EdgeId::Vertical { iy, ix }),
    ]
}

/// Contour segments inside one cell, as pairs of crossed edges.
///
/// Corners at or above `level` are inside. Saddle cells connect the inside
/// corners when the mean of the four corners is at or above `level`.
fn cell_segments(field: &GridField, ix: usize, iy: usize, level: f64) -> Vec<(EdgeId, EdgeId)> {
    let per = cell_perimeter(ix, iy);
    let inside: [bool; 4] = std::array::from_fn(|k| {
        let (cx, cy) = per[k].0;
        field.values[cy][cx] >= level
    });
    let crossed: Vec<EdgeId> = (0..4)
        .filter(|&k| inside[k] != inside[(k + 1) % 4])
        .map(|k| per[k].1)
        .collect();
    match crossed.len() {
        2 => vec![(crossed[0], crossed[1])],
        4 => {
            let mean = per
                .iter()
                .map(|&((cx, cy), _)| field.values[cy][cx])
                .sum::<f64>()
                / 4.0;
            // isolate the corners that end up on the far side of the center
            let isolate = mean < level;
            (0..4)
                .filter(|&k| inside[k] == isolate)
                .map(|k| (per[(k + 3) % 4].1, per[k].1))
                .collect()
        }
        _ => Vec::new(),
    }
}

/// Extracts the `level` set of `field` by marching squares with linear
/// interpolation along cell edges. Polylines are returned in axis
/// coordinates; closed loops repeat their first point at the end.
pub fn contour(field: &GridField, level: f64) -> Vec<Vec<(f64, f64)>> {
    let (nx, ny) = (field.xs.len(), field.ys.len());
    if nx < 2 || ny < 2 {
        return Vec::new();
    }
    let mut adjacency: BTreeMap<EdgeId, Vec<EdgeId>> = BTreeMap::new();
    for iy in 0..ny - 1 {
        for ix in 0..nx - 1 {
            for (a, b) in cell_segments(field, ix, iy, level) {
                adjacency.entry(a).or_default().push(b);
                adjacency.entry(b).or_default().push(a);
            }
        }
    }

    let mut polylines = Vec::new();
    let mut visited: BTreeMap<EdgeId, bool> = adjacency.keys().map(|&k| (k, false)).collect();
    let walk = |start: EdgeId, visited: &mut BTreeMap<EdgeId, bool>| {
        let mut path = vec![start];
        visited.insert(start, true);
        let mut cur = start;
        loop {
            let next = adjacency[&cur].iter().copied().find(|e| !visited[e]);
            match next {
                Some(e) => {
                    visited.insert(e, true);
                    path.push(e);
                    cur = e;
                }
                None => {
                    if path.len() > 2 && adjacency[&cur].contains(&start) {
                        path.push(start);
                    }
                    return path;
                }
            }
        }
    };
    let ends: Vec<EdgeId> = adjacency
        .iter()
        .filter(|(_, n)| n.len() == 1)
        .map(|(&k, _)| k)
        .collect();
    for e in ends {
        if !visited[&e] {
            polylines.push(walk(e, &mut visited));
        }
    }
    let rest: Vec<EdgeId> = adjacency.keys().copied().collect();
    for e in rest {
        if !visited[&e] {
            polylines.push(walk(e, &mut visited));
        }
    }
    polylines
        .into_iter()
        .map(|p| p.into_iter().map(|e| crossing(field, e, level)).collect())
        .collect()
}

/// The 0.5 average-success contour.
pub fn contour_half(field: &GridField) -> Vec<Vec<(f64, f64)>> {
    contour(field, CONTOUR_LEVEL)
}

fn shoelace(poly: &[(f64, f64)]) -> f64 {
    let n = poly.len();
    let mut s = 0.0;
    for i in 0..n {
        let (x0, y0) = poly[i];
        let (x1, y1) = poly[(i + 1) % n];
        s += x0 * y1 - x1 * y0;
    }
    0.5 * s.abs()
}

/// Area (in axis units) of the region where the edge-interpolated field is
/// at or above `level`, using the same saddle rule as [`contour`].
pub fn superlevel_area(field: &GridField, level: f64) -> f64 {
    let (nx, ny) = (field.xs.len(), field.ys.len());
    let mut area = 0.0;
    for iy in 0..ny.saturating_sub(1) {
        for ix in 0..nx.saturating_sub(1) {
            let per = cell_perimeter(ix, iy);
            let val = |k: usize| {
                let (cx, cy) = per[k].0;
                field.values[cy][cx]
            };
            let inside: [bool; 4] = std::array::from_fn(|k| val(k) >= level);
            let mut poly = Vec::with_capacity(8);
            let mut crossings = Vec::with_capacity(4);
            for k in 0..4 {
                let (cx, cy) = per[k].0;
                if inside[k] {
                    poly.push((field.xs[cx], field.ys[cy]));
                }
                if inside[k] != inside[(k + 1) % 4] {
                    let p = crossing(field, per[k].1, level);
                    poly.push(p);
                    crossings.push(p);
                }
            }
            if poly.len() < 3 {
                continue;
            }
            let mut a = shoelace(&poly);
            if crossings.len() == 4 {
                let mean = (0..4).map(val).sum::<f64>() / 4.0;
                if mean < level {
                    a -= shoelace(&crossings);
                }
            }
            area += a;
        }
    }
    area
}

/// Area of the region with average success at or above one half.
pub fn success_area(field: &GridField) -> f64 {
    superlevel_area(field, CONTOUR_LEVEL)
}
