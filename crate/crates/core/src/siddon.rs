//! Ray-driven exact intersection-length projector and its matched transpose.
//!
//! The forward direction clips each ray to the grid's bounding box and walks
//! the merged sequence of x, y and z plane crossings. Every interval between
//! consecutive crossings is charged to the voxel bounded by the planes on
//! either side of it.
//!
//! The transpose gathers per x-line of voxels: each line collects from the
//! detector pixels whose rays can reach it and recomputes intersection
//! lengths by clipping the ray against the voxel slabs. Plane positions and
//! crossing parameters are evaluated with the same expressions on both sides,
//! so an interval endpoint in the forward walk is bit-identical to the
//! corresponding slab bound in the transpose.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::real::Real;
use crate::geometry::{parallel_back_distance, Geometry, Ray, ViewFrame, VolumeSpec};
use crate::data::{ProjectionSet, Volume};
use crate::vec3::Vec3;

/// One voxel crossed by a ray and the length (mm) of the crossing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayVoxelHit {
    pub voxel: [usize; 3],
    pub length: f64,
}

#[derive(Debug, Clone, Copy)]
struct Grid {
    min: [f64; 3],
    size: [f64; 3],
    n: [usize; 3],
}

impl Grid {
    fn new(spec: &VolumeSpec) -> Self {
        let m = spec.min_corner();
        Self {
            min: [m.x, m.y, m.z],
            size: [spec.voxel_width, spec.voxel_width, spec.voxel_height],
            n: spec.counts(),
        }
    }

    #[inline]
    fn plane(&self, axis: usize, k: usize) -> f64 {
        self.min[axis] + k as f64 * self.size[axis]
    }

    /// Cell index of coordinate `c` along `axis`, unclamped.
    #[inline]
    fn cell(&self, axis: usize, c: f64) -> f64 {
        ((c - self.min[axis]) / self.size[axis]).floor()
    }
}

#[inline]
fn components(v: crate::vec3::Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

/// Walks `ray` through the grid, calling `visit(flat_index, length)` for each
/// non-degenerate interval.
#[inline]
fn trace(grid: &Grid, ray: &Ray, mut visit: impl FnMut(usize, f64)) {
    let o = components(ray.origin);
    let d = components(ray.direction);
    let mut inv = [0.0; 3];
    let mut fixed = [0usize; 3];
    let mut lo: f64 = 0.0;
    let mut hi = f64::INFINITY;
    for a in 0..3 {
        if d[a] == 0.0 {
            let c = grid.cell(a, o[a]);
            if !(c >= 0.0 && c < grid.n[a] as f64) {
                return;
            }
            fixed[a] = c as usize;
        } else {
            inv[a] = 1.0 / d[a];
            let a0 = (grid.plane(a, 0) - o[a]) * inv[a];
            let a1 = (grid.plane(a, grid.n[a]) - o[a]) * inv[a];
            lo = lo.max(a0.min(a1));
            hi = hi.min(a0.max(a1));
        }
    }
    if !(hi > lo) {
        return;
    }

    // Next plane index and its crossing parameter per moving axis.
    let mut next_k = [0i64; 3];
    let mut next_a = [f64::INFINITY; 3];
    for a in 0..3 {
        if d[a] == 0.0 {
            continue;
        }
        let p = o[a] + lo * d[a];
        let n = grid.n[a] as i64;
        let mut k = if d[a] > 0.0 {
            grid.cell(a, p) as i64 + 1
        } else {
            grid.cell(a, p) as i64
        }
        .clamp(0, n);
        let step = if d[a] > 0.0 { 1 } else { -1 };
        while (0..=n).contains(&k) && (grid.plane(a, k as usize) - o[a]) * inv[a] <= lo {
            k += step;
        }
        // The cell estimate can be off by one when the ray runs nearly along a plane.
        while (0..=n).contains(&(k - step)) && (grid.plane(a, (k - step) as usize) - o[a]) * inv[a] > lo {
            k -= step;
        }
        next_k[a] = k;
        if (0..=n).contains(&k) {
            next_a[a] = (grid.plane(a, k as usize) - o[a]) * inv[a];
        }
    }

    // Current cell per moving axis: the one bounded by the last plane crossed
    // and `next_k`, so each interval lies inside the slabs `voxel_length` uses.
    let mut cell = fixed;
    for a in 0..3 {
        if d[a] != 0.0 {
            let c = if d[a] > 0.0 { next_k[a] - 1 } else { next_k[a] };
            cell[a] = c.clamp(0, grid.n[a] as i64 - 1) as usize;
        }
    }
    let nx = grid.n[0];
    let ny = grid.n[1];
    let mut cur = lo;
    while cur < hi {
        let next = next_a[0].min(next_a[1]).min(next_a[2]).min(hi);
        let len = next - cur;
        if len > 0.0 {
            visit((cell[2] * ny + cell[1]) * nx + cell[0], len);
        }
        for a in 0..3 {
            if next_a[a] <= next {
                let n = grid.n[a] as i64;
                let (k, c) = if d[a] > 0.0 {
                    (next_k[a] + 1, next_k[a])
                } else {
                    (next_k[a] - 1, next_k[a] - 1)
                };
                next_k[a] = k;
                if (0..n).contains(&c) {
                    cell[a] = c as usize;
                }
                next_a[a] = if (0..=n).contains(&k) {
                    (grid.plane(a, k as usize) - o[a]) * inv[a]
                } else {
                    f64::INFINITY
                };
            }
        }
        cur = next;
    }
}

/// Voxels crossed by the ray of sample `(view, row, col)` in traversal order.
pub fn ray_hits(g: &Geometry, spec: &VolumeSpec, view: usize, row: usize, col: usize) -> Result<Vec<RayVoxelHit>> {
    let ray = g.ray_for_sample(spec, view, row, col)?;
    let grid = Grid::new(spec);
    let mut hits = Vec::new();
    trace(&grid, &ray, |flat, length| {
        let i = flat % spec.num_x;
        let j = (flat / spec.num_x) % spec.num_y;
        let k = flat / (spec.num_x * spec.num_y);
        hits.push(RayVoxelHit { voxel: [i, j, k], length });
    });
    Ok(hits)
}

fn frames(g: &Geometry, spec: &VolumeSpec) -> Vec<ViewFrame> {
    let back = parallel_back_distance(spec);
    (0..g.num_views()).map(|v| g.view_frame(v, back)).collect()
}

/// `y = A x` into a caller-provided buffer of `g.num_samples()` values.
pub(crate) fn forward_into<I: Real, O: Real>(g: &Geometry, spec: &VolumeSpec, x: &[I], y: &mut [O]) {
    let grid = Grid::new(spec);
    let frames = frames(g, spec);
    let det = &g.detector;
    y.par_chunks_mut(det.num_cols)
        .enumerate()
        .for_each(|(line, out)| {
            let view = line / det.num_rows;
            let row = line % det.num_rows;
            let t = det.t(row);
            for (col, o) in out.iter_mut().enumerate() {
                let ray = frames[view].ray(det.s(col), t);
                let mut acc = 0.0f64;
                trace(&grid, &ray, |idx, len| acc += len * x[idx].to_f64());
                *o = O::from_f64(acc);
            }
        });
}

/// `x = Aᵀ y` into a caller-provided buffer of `spec.num_voxels()` values.
///
/// Each task owns one x-line of voxels. For every view it visits the pixels
/// whose rays can meet the line, clips each ray once against the line's y and
/// z slabs, then spreads the clipped interval over the x slabs with the same
/// expressions [`voxel_length`] uses.
pub(crate) fn backproject_into<I: Real, O: Real>(g: &Geometry, spec: &VolumeSpec, y: &[I], x: &mut [O]) {
    let grid = Grid::new(spec);
    let frames = frames(g, spec);
    let det = &g.detector;
    let npix = det.num_pixels();
    let (nx, ny) = (spec.num_x, spec.num_y);
    x.par_chunks_mut(nx).enumerate().for_each_init(
        || vec![0.0f64; nx],
        |acc, (line, out)| {
            let j = line % ny;
            let k = line / ny;
            acc.fill(0.0);
            let lo = Vec3::new(grid.plane(0, 0), grid.plane(1, j), grid.plane(2, k));
            let hi = Vec3::new(grid.plane(0, nx), grid.plane(1, j + 1), grid.plane(2, k + 1));
            for (view, frame) in frames.iter().enumerate() {
                let yv = &y[view * npix..(view + 1) * npix];
                let (rows, cols) = pixel_ranges(det, frame.box_bounds(lo, hi));
                for row in rows {
                    let t = det.t(row);
                    for col in cols.clone() {
                        let w = yv[row * det.num_cols + col].to_f64();
                        if w == 0.0 {
                            continue;
                        }
                        let ray = frame.ray(det.s(col), t);
                        spread_over_line(&grid, &ray, j, k, |i, len| acc[i] += len * w);
                    }
                }
            }
            for (o, a) in out.iter_mut().zip(acc.iter()) {
                *o = O::from_f64(*a);
            }
        },
    );
}

/// Calls `visit(i, length)` for every voxel `(i, j, k)` of the x-line that
/// `ray` crosses with positive length.
#[inline]
fn spread_over_line(grid: &Grid, ray: &Ray, j: usize, k: usize, mut visit: impl FnMut(usize, f64)) {
    let o = components(ray.origin);
    let d = components(ray.direction);
    let mut lo: f64 = 0.0;
    let mut hi = f64::INFINITY;
    for (a, idx) in [(1, j), (2, k)] {
        if d[a] == 0.0 {
            if grid.cell(a, o[a]) != idx as f64 {
                return;
            }
        } else {
            let inv = 1.0 / d[a];
            let a0 = (grid.plane(a, idx) - o[a]) * inv;
            let a1 = (grid.plane(a, idx + 1) - o[a]) * inv;
            lo = lo.max(a0.min(a1));
            hi = hi.min(a0.max(a1));
        }
    }
    if !(hi > lo) {
        return;
    }
    let n = grid.n[0];
    if d[0] == 0.0 {
        let c = grid.cell(0, o[0]);
        if c >= 0.0 && c < n as f64 {
            visit(c as usize, hi - lo);
        }
        return;
    }
    let inv = 1.0 / d[0];
    let (p, q) = (o[0] + lo * d[0], o[0] + hi * d[0]);
    let first = (grid.cell(0, p.min(q)) - 1.0).max(0.0) as usize;
    let last = ((grid.cell(0, p.max(q)) + 1.0).max(0.0) as usize).min(n - 1);
    for i in first..=last {
        let a0 = (grid.plane(0, i) - o[0]) * inv;
        let a1 = (grid.plane(0, i + 1) - o[0]) * inv;
        let len = hi.min(a0.max(a1)) - lo.max(a0.min(a1));
        if len > 0.0 {
            visit(i, len);
        }
    }
}

/// Slack (in pixels) absorbing rounding between box projection and ray setup.
const PIXEL_MARGIN: f64 = 1e-6;

/// Pixel index ranges whose centers fall inside the detector bounds.
pub(crate) fn pixel_ranges(
    det: &crate::geometry::DetectorSpec,
    bounds: Option<crate::geometry::DetectorBounds>,
) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
    let Some(b) = bounds else {
        return (0..det.num_rows, 0..det.num_cols);
    };
    let range = |lo: f64, hi: f64, n: usize| {
        let a = (lo - PIXEL_MARGIN).ceil().max(0.0);
        let b = ((hi + PIXEL_MARGIN).floor() + 1.0).min(n as f64);
        if b <= a {
            0..0
        } else {
            a as usize..b as usize
        }
    };
    (
        range(det.row_of(b.t_min), det.row_of(b.t_max), det.num_rows),
        range(det.col_of(b.s_min), det.col_of(b.s_max), det.num_cols),
    )
}

pub(crate) fn check_finite(values: &[f32], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::SpecMismatch(format!("{what} contains non-finite values")))
    }
}

pub fn siddon_forward(x: &Volume, g: &Geometry) -> Result<ProjectionSet> {
    g.validate()?;
    check_finite(x.data(), "volume")?;
    let mut y = ProjectionSet::zeros(g.clone())?;
    forward_into(g, x.spec(), x.data(), y.data_mut());
    Ok(y)
}

pub fn siddon_backproject(y: &ProjectionSet, spec: &VolumeSpec) -> Result<Volume> {
    check_finite(y.data(), "projections")?;
    let mut x = Volume::zeros(spec.clone())?;
    backproject_into(y.geometry(), spec, y.data(), x.data_mut());
    Ok(x)
}
