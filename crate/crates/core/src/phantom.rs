//! Analytic ellipsoid phantoms: rasterization and exact line integrals.

use rayon::prelude::*;
use serde_json::{json, Value};

use crate::data::{ProjectionSet, Volume};
use crate::error::{Error, Result};
use crate::geometry::{Geometry, Ray, VolumeSpec};
use crate::vec3::Vec3;

/// Solid ellipsoid of constant (additive) density, rotated about z.
#[derive(Debug, Clone, PartialEq)]
pub struct Ellipsoid {
    pub center: Vec3,
    pub semi_axes: Vec3,
    /// Degrees.
    pub rotation_z: f64,
    /// mm⁻¹.
    pub density: f64,
}

impl Ellipsoid {
    /// Maps a world point into the frame where the ellipsoid is the unit ball.
    fn to_unit(&self, p: Vec3) -> Vec3 {
        let q = p.rotate_z(-self.rotation_z.to_radians());
        Vec3::new(q.x / self.semi_axes.x, q.y / self.semi_axes.y, q.z / self.semi_axes.z)
    }

    pub fn contains(&self, p: Vec3) -> bool {
        let q = self.to_unit(p - self.center);
        q.dot(q) <= 1.0
    }

    /// Chord length of the ray through the ellipsoid; `whole_line` ignores the
    /// α ≥ 0 restriction.
    pub fn chord(&self, ray: &Ray, whole_line: bool) -> f64 {
        let o = self.to_unit(ray.origin - self.center);
        let d = self.to_unit(ray.direction);
        let a = d.dot(d);
        let b = 2.0 * o.dot(d);
        let c = o.dot(o) - 1.0;
        let disc = b * b - 4.0 * a * c;
        if disc <= 0.0 {
            return 0.0;
        }
        let root = disc.sqrt();
        let t_hi = (-b + root) / (2.0 * a);
        let mut t_lo = (-b - root) / (2.0 * a);
        if !whole_line {
            t_lo = t_lo.max(0.0);
        }
        // `direction` is unit length, so parameter differences are millimetres.
        (t_hi - t_lo).max(0.0)
    }

    fn validate(&self) -> Result<()> {
        let finite = self.center.is_finite()
            && self.semi_axes.is_finite()
            && self.rotation_z.is_finite()
            && self.density.is_finite();
        if !finite {
            return Err(Error::invalid("ellipsoid", "parameters must be finite"));
        }
        if self.semi_axes.x <= 0.0 || self.semi_axes.y <= 0.0 || self.semi_axes.z <= 0.0 {
            return Err(Error::invalid("semiAxes", "semi-axes must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EllipsoidPhantom {
    pub ellipsoids: Vec<Ellipsoid>,
}

/// Three-ellipsoid test object in units of the field half-width:
/// (center, semi-axes, rotation about z in degrees, density in mm⁻¹).
pub const DESK_PHANTOM: [([f64; 3], [f64; 3], f64, f64); 3] = [
    ([0.0, 0.0, 0.0], [0.80, 0.60, 0.70], 0.0, 0.02),
    ([0.25, 0.10, 0.10], [0.30, 0.18, 0.30], 30.0, 0.015),
    ([-0.30, -0.15, -0.10], [0.15, 0.22, 0.20], -20.0, -0.01),
];

impl EllipsoidPhantom {
    pub fn new(ellipsoids: Vec<Ellipsoid>) -> Result<Self> {
        ellipsoids.iter().try_for_each(Ellipsoid::validate)?;
        Ok(Self { ellipsoids })
    }

    /// [`DESK_PHANTOM`] scaled to a field of half-width `half_width` mm.
    pub fn desk(half_width: f64) -> Self {
        let ellipsoids = DESK_PHANTOM
            .iter()
            .map(|(c, a, rot, density)| Ellipsoid {
                center: Vec3::from_array(*c) * half_width,
                semi_axes: Vec3::from_array(*a) * half_width,
                rotation_z: *rot,
                density: *density,
            })
            .collect();
        Self { ellipsoids }
    }

    /// Desk phantom sized to the smaller transverse extent of `spec`.
    pub fn desk_for(spec: &VolumeSpec) -> Self {
        let half = (spec.num_x.min(spec.num_y) as f64 * spec.voxel_width)
            .min(spec.num_z as f64 * spec.voxel_height)
            / 2.0;
        Self::desk(half)
    }

    pub fn density_at(&self, p: Vec3) -> f64 {
        self.ellipsoids
            .iter()
            .filter(|e| e.contains(p))
            .map(|e| e.density)
            .sum()
    }

    /// Same object rotated by `delta` degrees about z.
    pub fn rotated(&self, delta: f64) -> Self {
        Self {
            ellipsoids: self
                .ellipsoids
                .iter()
                .map(|e| Ellipsoid {
                    center: e.center.rotate_z(delta.to_radians()),
                    rotation_z: e.rotation_z + delta,
                    ..e.clone()
                })
                .collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text)?;
        let arr = v
            .as_array()
            .ok_or_else(|| Error::invalid("phantom", "expected an array of ellipsoids"))?;
        let num = |o: &serde_json::Map<String, Value>, k: &str| -> Result<f64> {
            o.get(k)
                .ok_or_else(|| Error::MissingKey(k.into()))?
                .as_f64()
                .ok_or_else(|| Error::invalid(k, "expected a number"))
        };
        let vec3 = |o: &serde_json::Map<String, Value>, k: &str| -> Result<Vec3> {
            let a = o
                .get(k)
                .ok_or_else(|| Error::MissingKey(k.into()))?
                .as_array()
                .filter(|a| a.len() == 3)
                .ok_or_else(|| Error::invalid(k, "expected an array of 3 numbers"))?;
            let mut out = [0.0; 3];
            for (o, x) in out.iter_mut().zip(a) {
                *o = x.as_f64().ok_or_else(|| Error::invalid(k, "expected a number"))?;
            }
            Ok(Vec3::from_array(out))
        };
        let ellipsoids = arr
            .iter()
            .map(|e| {
                let o = e
                    .as_object()
                    .ok_or_else(|| Error::invalid("phantom", "expected an object"))?;
                if let Some(k) = o
                    .keys()
                    .find(|k| !["center", "semiAxes", "rotationZ", "density"].contains(&k.as_str()))
                {
                    return Err(Error::UnknownKey(k.clone()));
                }
                Ok(Ellipsoid {
                    center: vec3(o, "center")?,
                    semi_axes: vec3(o, "semiAxes")?,
                    rotation_z: o.get("rotationZ").map_or(Ok(0.0), |_| num(o, "rotationZ"))?,
                    density: num(o, "density")?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(ellipsoids)
    }

    pub fn to_json(&self) -> String {
        let arr: Vec<Value> = self
            .ellipsoids
            .iter()
            .map(|e| {
                json!({
                    "center": e.center.to_array(),
                    "semiAxes": e.semi_axes.to_array(),
                    "rotationZ": e.rotation_z,
                    "density": e.density,
                })
            })
            .collect();
        serde_json::to_string_pretty(&arr).expect("plain JSON")
    }
}

/// Voxel values from `supersample³` sub-points per voxel.
pub fn rasterize(ph: &EllipsoidPhantom, spec: &VolumeSpec, supersample: usize) -> Result<Volume> {
    if supersample == 0 {
        return Err(Error::invalid("supersample", "must be at least 1"));
    }
    let mut vol = Volume::zeros(spec.clone())?;
    let s = supersample;
    let offsets: Vec<f64> = (0..s).map(|a| (a as f64 + 0.5) / s as f64 - 0.5).collect();
    let weight = 1.0 / (s * s * s) as f64;
    let nx = spec.num_x;
    vol.data_mut()
        .par_chunks_mut(nx)
        .enumerate()
        .for_each(|(line, out)| {
            let j = line % spec.num_y;
            let k = line / spec.num_y;
            for (i, o) in out.iter_mut().enumerate() {
                let c = spec.voxel_center(i, j, k);
                let mut acc = 0.0;
                for dz in &offsets {
                    for dy in &offsets {
                        for dx in &offsets {
                            let p = c + Vec3::new(
                                dx * spec.voxel_width,
                                dy * spec.voxel_width,
                                dz * spec.voxel_height,
                            );
                            acc += ph.density_at(p);
                        }
                    }
                }
                *o = (acc * weight) as f32;
            }
        });
    Ok(vol)
}

/// Exact line integrals of the phantom along every sample ray. Parallel-beam
/// rays are whole lines; cone and modular rays start at the source.
pub fn analytic_project(ph: &EllipsoidPhantom, g: &Geometry) -> Result<ProjectionSet> {
    let mut y = ProjectionSet::zeros(g.clone())?;
    let det = g.detector.clone();
    let frames: Vec<_> = (0..g.num_views()).map(|v| g.view_frame(v, 0.0)).collect();
    y.data_mut()
        .par_chunks_mut(det.num_cols)
        .enumerate()
        .for_each(|(line, out)| {
            let view = line / det.num_rows;
            let row = line % det.num_rows;
            let frame = &frames[view];
            for (col, o) in out.iter_mut().enumerate() {
                let ray = frame.ray(det.s(col), det.t(row));
                *o = ray_integral(ph, &ray, frame.is_parallel()) as f32;
            }
        });
    Ok(y)
}

pub fn ray_integral(ph: &EllipsoidPhantom, ray: &Ray, whole_line: bool) -> f64 {
    ph.ellipsoids
        .iter()
        .map(|e| e.density * e.chord(ray, whole_line))
        .sum()
}
