//! Separable-footprint projector (trapezoid transverse, rectangle axial).
//!
//! Each voxel's detector footprint is modelled as the product of a transverse
//! trapezoid, whose breakpoints are the projections of the voxel's four
//! vertical edges, and an axial rectangle, the projection of the voxel's axial
//! extent at its center. Both are integrated in closed form over each pixel's
//! extent and normalized by the pixel size, then scaled by the amplitude
//! `l_xy / cos κ`:
//!
//! * `l_xy = Δ / max(|cos φ_v|, |sin φ_v|)` is the longest transverse chord of
//!   the voxel along the azimuth `φ_v` of the ray through its center;
//! * `κ` is that ray's tilt out of the transverse plane (zero in parallel beam).
//!
//! The coefficient of voxel `v` on pixel `(r, c)` is
//! `(W_v[c] · a_v) · T_v[r]`, computed by the same routine in both directions,
//! which makes the backprojector the exact transpose of the forward projector.
//! The forward direction scatters voxels into one view at a time (views run in
//! parallel); the transpose gathers per voxel line.

use rayon::prelude::*;

use crate::data::{ProjectionSet, Volume};
use crate::error::{Error, Result};
use crate::real::Real;
use crate::geometry::{DetectorSpec, Geometry, Scan, VolumeSpec};
use crate::siddon::check_finite;
use crate::vec3::Vec3;

/// Footprints wider than this many columns are split into 2×2 sub-voxels.
pub const SUBDIVIDE_COLUMNS: f64 = 8.0;

/// Transverse trapezoid of a voxel on the detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trapezoid {
    /// Sorted breakpoints τ0 ≤ τ1 ≤ τ2 ≤ τ3 (detector transverse coordinate, mm).
    pub tau: [f64; 4],
    /// Plateau value (mm), the maximum transverse chord.
    pub height: f64,
}

impl Trapezoid {
    /// ∫ of the unit-height profile from −∞ to `s`.
    pub fn unit_cdf(&self, s: f64) -> f64 {
        let [t0, t1, t2, t3] = self.tau;
        if s <= t0 {
            return 0.0;
        }
        let rise = t1 - t0;
        if s < t1 {
            return (s - t0) * (s - t0) / (2.0 * rise);
        }
        let mut acc = 0.5 * rise;
        if s < t2 {
            return acc + (s - t1);
        }
        acc += t2 - t1;
        let fall = t3 - t2;
        if s < t3 {
            let r = t3 - s;
            return acc + 0.5 * fall - r * r / (2.0 * fall);
        }
        acc + 0.5 * fall
    }

    /// ∫ of the scaled profile over `[a, b]`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.height * (self.unit_cdf(b) - self.unit_cdf(a))
    }

    pub fn area(&self) -> f64 {
        let [t0, t1, t2, t3] = self.tau;
        self.height * ((t3 - t0) + (t2 - t1)) / 2.0
    }
}

/// Per-view quantities for footprint evaluation.
#[derive(Debug, Clone, Copy)]
enum View {
    Parallel { cos: f64, sin: f64 },
    Cone { source: Vec3, axis: Vec3, u: Vec3, sdd: f64, curved: bool },
}

impl View {
    fn new(g: &Geometry, view: usize) -> Self {
        match &g.scan {
            Scan::Parallel { angles } => {
                let (sin, cos) = angles[view].to_radians().sin_cos();
                View::Parallel { cos, sin }
            }
            Scan::Cone { angles, sod, sdd, shape } => {
                let (s, c) = angles[view].to_radians().sin_cos();
                View::Cone {
                    source: Vec3::new(sod * c, sod * s, 0.0),
                    axis: Vec3::new(-c, -s, 0.0),
                    u: Vec3::new(-s, c, 0.0),
                    sdd: *sdd,
                    curved: *shape == crate::geometry::DetectorShape::Curved,
                }
            }
            Scan::Modular { .. } => unreachable!("checked by supported()"),
        }
    }

    /// Detector transverse coordinate of the vertical line through `(x, y)`.
    #[inline]
    fn s_of(&self, x: f64, y: f64) -> f64 {
        match *self {
            View::Parallel { cos, sin } => -x * sin + y * cos,
            View::Cone { source, axis, u, sdd, curved } => {
                let rx = x - source.x;
                let ry = y - source.y;
                let depth = rx * axis.x + ry * axis.y;
                let lateral = rx * u.x + ry * u.y;
                if curved {
                    sdd * lateral.atan2(depth)
                } else {
                    sdd * lateral / depth
                }
            }
        }
    }

    /// Trapezoid of the square column of half-width `half` centered at `(x, y)`.
    #[inline]
    fn trapezoid(&self, x: f64, y: f64, half: f64) -> Trapezoid {
        let mut tau = [
            self.s_of(x - half, y - half),
            self.s_of(x + half, y - half),
            self.s_of(x - half, y + half),
            self.s_of(x + half, y + half),
        ];
        tau.sort_by(f64::total_cmp);
        let (dx, dy) = match *self {
            View::Parallel { cos, sin } => (cos, sin),
            View::Cone { source, .. } => (x - source.x, y - source.y),
        };
        let height = 2.0 * half * dx.hypot(dy) / dx.abs().max(dy.abs());
        Trapezoid { tau, height }
    }

    /// `(1 / cos κ, magnification)` for a voxel centered at `c`.
    #[inline]
    fn axial(&self, c: Vec3) -> (f64, f64) {
        match *self {
            View::Parallel { .. } => (1.0, 1.0),
            View::Cone { source, axis, sdd, curved, .. } => {
                let rel = c - source;
                let rho = rel.x.hypot(rel.y);
                let inv_cos = rho.hypot(rel.z) / rho;
                let mag = if curved { sdd / rho } else { sdd / rel.dot(axis) };
                (inv_cos, mag)
            }
        }
    }
}

/// Transverse weights `W[c] = Σ_sub l_xy · (1/pw) ∫_pixel c trap` for one
/// voxel column; returns the first column index, weights in `w`.
#[inline]
fn transverse(view: &View, det: &DetectorSpec, x: f64, y: f64, width: f64, w: &mut Vec<f64>) -> usize {
    w.clear();
    let half = width / 2.0;
    let full = view.trapezoid(x, y, half);
    let [t0, _, _, t3] = full.tau;
    let lo = (det.col_of(t0) + 0.5).floor().max(0.0);
    let hi = (det.col_of(t3) + 0.5).floor().min(det.num_cols as f64 - 1.0);
    if hi < lo {
        return 0;
    }
    let (c0, c1) = (lo as usize, hi as usize);
    w.resize(c1 - c0 + 1, 0.0);
    let pw = det.pixel_width;
    let mut add = |trap: &Trapezoid| {
        for (k, wk) in w.iter_mut().enumerate() {
            let s = det.s(c0 + k);
            *wk += trap.integral(s - pw / 2.0, s + pw / 2.0) / pw;
        }
    };
    if t3 - t0 > SUBDIVIDE_COLUMNS * pw {
        let q = half / 2.0;
        for (ox, oy) in [(-q, -q), (q, -q), (-q, q), (q, q)] {
            add(&view.trapezoid(x + ox, y + oy, q));
        }
    } else {
        add(&full);
    }
    c0
}

/// Axial weights `T[r] = (1/ph) · overlap` for a voxel; returns the first row.
#[inline]
fn axial_rows(det: &DetectorSpec, z: f64, height: f64, mag: f64, t: &mut Vec<f64>) -> usize {
    t.clear();
    let a = (z - height / 2.0) * mag;
    let b = (z + height / 2.0) * mag;
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    let lo = (det.row_of(a) + 0.5).floor().max(0.0);
    let hi = (det.row_of(b) + 0.5).floor().min(det.num_rows as f64 - 1.0);
    if hi < lo {
        return 0;
    }
    let (r0, r1) = (lo as usize, hi as usize);
    let ph = det.pixel_height;
    for r in r0..=r1 {
        let tr = det.t(r);
        let overlap = (b.min(tr + ph / 2.0) - a.max(tr - ph / 2.0)).max(0.0);
        t.push(overlap / ph);
    }
    r0
}

fn supported(g: &Geometry) -> Result<()> {
    if let Scan::Modular { .. } = g.scan {
        return Err(Error::Unsupported(
            "the separable-footprint projector does not support modular geometry".into(),
        ));
    }
    Ok(())
}

pub(crate) fn forward_into<I: Real, O: Real>(g: &Geometry, spec: &VolumeSpec, x: &[I], y: &mut [O]) {
    let det = &g.detector;
    let npix = det.num_pixels();
    let ncols = det.num_cols;
    y.par_chunks_mut(npix).enumerate().for_each_init(
        || (vec![0.0f64; npix], Vec::new(), Vec::new()),
        |(acc, w, t), (v, out)| {
            let view = View::new(g, v);
            acc.fill(0.0);
            for j in 0..spec.num_y {
                for i in 0..spec.num_x {
                    let center = spec.voxel_center(i, j, 0);
                    let c0 = transverse(&view, det, center.x, center.y, spec.voxel_width, w);
                    if w.is_empty() {
                        continue;
                    }
                    for k in 0..spec.num_z {
                        let xv = x[spec.index(i, j, k)].to_f64();
                        if xv == 0.0 {
                            continue;
                        }
                        let c = spec.voxel_center(i, j, k);
                        let (ak, mag) = view.axial(c);
                        let r0 = axial_rows(det, c.z, spec.voxel_height, mag, t);
                        for (dr, tr) in t.iter().enumerate() {
                            let row = &mut acc[(r0 + dr) * ncols + c0..];
                            for (a, wc) in row.iter_mut().zip(w.iter()) {
                                *a += xv * ((wc * ak) * tr);
                            }
                        }
                    }
                }
            }
            for (o, a) in out.iter_mut().zip(acc.iter()) {
                *o = O::from_f64(*a);
            }
        },
    );
}

pub(crate) fn backproject_into<I: Real, O: Real>(g: &Geometry, spec: &VolumeSpec, y: &[I], x: &mut [O]) {
    let det = &g.detector;
    let npix = det.num_pixels();
    let ncols = det.num_cols;
    let views: Vec<View> = (0..g.num_views()).map(|v| View::new(g, v)).collect();
    let (nx, ny) = (spec.num_x, spec.num_y);
    x.par_chunks_mut(nx).enumerate().for_each_init(
        || (Vec::new(), Vec::new()),
        |(w, t), (line, out)| {
            let j = line % ny;
            let k = line / ny;
            for (i, o) in out.iter_mut().enumerate() {
                let c = spec.voxel_center(i, j, k);
                let mut acc = 0.0f64;
                for (v, view) in views.iter().enumerate() {
                    let c0 = transverse(view, det, c.x, c.y, spec.voxel_width, w);
                    if w.is_empty() {
                        continue;
                    }
                    let (ak, mag) = view.axial(c);
                    let r0 = axial_rows(det, c.z, spec.voxel_height, mag, t);
                    let yv = &y[v * npix..(v + 1) * npix];
                    for (dr, tr) in t.iter().enumerate() {
                        let row = &yv[(r0 + dr) * ncols + c0..];
                        for (yc, wc) in row.iter().zip(w.iter()) {
                            acc += yc.to_f64() * ((wc * ak) * tr);
                        }
                    }
                }
                *o = O::from_f64(acc);
            }
        },
    );
}

pub fn sf_forward(x: &Volume, g: &Geometry) -> Result<ProjectionSet> {
    supported(g)?;
    g.validate()?;
    check_finite(x.data(), "volume")?;
    let mut y = ProjectionSet::zeros(g.clone())?;
    forward_into(g, x.spec(), x.data(), y.data_mut());
    Ok(y)
}

pub fn sf_backproject(y: &ProjectionSet, spec: &VolumeSpec) -> Result<Volume> {
    supported(y.geometry())?;
    check_finite(y.data(), "projections")?;
    let mut x = Volume::zeros(spec.clone())?;
    backproject_into(y.geometry(), spec, y.data(), x.data_mut());
    Ok(x)
}

pub(crate) fn check_supported(g: &Geometry) -> Result<()> {
    supported(g)
}

/// Trapezoid of voxel column `(i, j)` in `view` (no subdivision).
pub fn voxel_trapezoid(g: &Geometry, spec: &VolumeSpec, view: usize, i: usize, j: usize) -> Result<Trapezoid> {
    supported(g)?;
    if view >= g.num_views() || i >= spec.num_x || j >= spec.num_y {
        return Err(Error::IndexOutOfRange(format!("view {view}, voxel column ({i}, {j})")));
    }
    let c = spec.voxel_center(i, j, 0);
    Ok(View::new(g, view).trapezoid(c.x, c.y, spec.voxel_width / 2.0))
}
