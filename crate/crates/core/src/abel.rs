//! Matched projector pair for cylindrically symmetric objects under parallel
//! rays (a discrete Abel transform).
//!
//! The object is a stack of axial slices, each described by radial samples at
//! `r_i = (i + ½)h`. Sample `i` stands for the annulus `[ih, (i+1)h]`, and its
//! weight on the detector column at offset `s` is the exact chord of that
//! annulus, so forward and back projection share one coefficient table.
//! Detector row `r` sees slice `r`.

use rayon::prelude::*;

use crate::data::{ProjectionSet, Volume};
use crate::error::{Error, Result};
use crate::geometry::{DetectorSpec, Geometry, VolumeSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    num_r: usize,
    spacing: f64,
    /// `[z][r]`.
    values: Vec<f32>,
}

impl RadialProfile {
    pub fn zeros(num_z: usize, num_r: usize, spacing: f64) -> Result<Self> {
        Self::from_vec(num_r, spacing, vec![0.0; num_z * num_r])
    }

    pub fn from_vec(num_r: usize, spacing: f64, values: Vec<f32>) -> Result<Self> {
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::invalid("radialSpacing", "must be positive"));
        }
        if num_r == 0 || values.is_empty() || !values.len().is_multiple_of(num_r) {
            return Err(Error::invalid("values", "expected numZ × numR samples"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteData(i));
        }
        Ok(Self { num_r, spacing, values })
    }

    /// Samples `f(r_i)` on every slice.
    pub fn from_fn(num_z: usize, num_r: usize, spacing: f64, f: impl Fn(usize, f64) -> f64) -> Result<Self> {
        let values = (0..num_z)
            .flat_map(|z| (0..num_r).map(move |i| (z, i)))
            .map(|(z, i)| f(z, (i as f64 + 0.5) * spacing) as f32)
            .collect();
        Self::from_vec(num_r, spacing, values)
    }

    pub fn num_r(&self) -> usize {
        self.num_r
    }

    pub fn num_z(&self) -> usize {
        self.values.len() / self.num_r
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn slice(&self, z: usize) -> &[f32] {
        &self.values[z * self.num_r..(z + 1) * self.num_r]
    }

    /// Storage form: a volume of shape `[numZ, 1, numR]`.
    pub fn to_volume(&self) -> Volume {
        let spec = VolumeSpec::new(self.num_r, 1, self.num_z(), self.spacing, self.spacing);
        Volume::from_vec(spec, self.values.clone()).expect("validated profile")
    }

    pub fn from_volume(v: &Volume) -> Result<Self> {
        let s = v.spec();
        if s.num_y != 1 {
            return Err(Error::SpecMismatch(format!(
                "radial profile volumes have numY = 1, found {}",
                s.num_y
            )));
        }
        Self::from_vec(s.num_x, s.voxel_width, v.data().to_vec())
    }

    /// Revolves the profile about the z axis onto `spec`; each voxel takes the
    /// sample of the annulus containing its center (zero outside).
    pub fn revolve(&self, spec: &VolumeSpec) -> Result<Volume> {
        if spec.num_z != self.num_z() {
            return Err(Error::SpecMismatch(format!(
                "volume has {} slices, profile has {}",
                spec.num_z,
                self.num_z()
            )));
        }
        let mut vol = Volume::zeros(spec.clone())?;
        for k in 0..spec.num_z {
            let slice = self.slice(k);
            for j in 0..spec.num_y {
                for i in 0..spec.num_x {
                    let c = spec.voxel_center(i, j, k);
                    let bin = (c.x.hypot(c.y) / self.spacing) as usize;
                    if bin < self.num_r {
                        vol.set(i, j, k, slice[bin]);
                    }
                }
            }
        }
        Ok(vol)
    }
}

/// Chord length through the annulus `[r_in, r_out]` of the line at offset `s`.
pub fn annulus_chord(r_in: f64, r_out: f64, s: f64) -> f64 {
    let half = |r: f64| (r * r - s * s).max(0.0).sqrt();
    2.0 * (half(r_out) - half(r_in))
}

fn weight(i: usize, h: f64, s: f64) -> f64 {
    annulus_chord(i as f64 * h, (i + 1) as f64 * h, s)
}

/// Single-view parallel geometry (angle 0) on `det`.
pub fn abel_geometry(det: DetectorSpec) -> Geometry {
    Geometry::parallel(vec![0.0], det)
}

pub fn abel_forward(f: &RadialProfile, det: &DetectorSpec) -> Result<ProjectionSet> {
    det.validate()?;
    if det.num_rows != f.num_z() {
        return Err(Error::SpecMismatch(format!(
            "detector has {} rows, profile has {} slices",
            det.num_rows,
            f.num_z()
        )));
    }
    let mut p = ProjectionSet::zeros(abel_geometry(det.clone()))?;
    let h = f.spacing;
    p.data_mut()
        .par_chunks_mut(det.num_cols)
        .enumerate()
        .for_each(|(row, out)| {
            let slice = f.slice(row);
            for (col, o) in out.iter_mut().enumerate() {
                let s = det.s(col);
                let acc: f64 = slice
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| v as f64 * weight(i, h, s))
                    .sum();
                *o = acc as f32;
            }
        });
    Ok(p)
}

pub fn abel_backproject(p: &ProjectionSet, num_r: usize, spacing: f64) -> Result<RadialProfile> {
    let g = p.geometry();
    if g.num_views() != 1 {
        return Err(Error::SpecMismatch(format!(
            "expected a single view, found {}",
            g.num_views()
        )));
    }
    let det = &g.detector;
    let mut f = RadialProfile::zeros(det.num_rows, num_r, spacing)?;
    f.values
        .par_chunks_mut(num_r)
        .enumerate()
        .for_each(|(row, out)| {
            let line = &p.data()[row * det.num_cols..(row + 1) * det.num_cols];
            for (i, o) in out.iter_mut().enumerate() {
                let acc: f64 = line
                    .iter()
                    .enumerate()
                    .map(|(col, &v)| v as f64 * weight(i, spacing, det.s(col)))
                    .sum();
                *o = acc as f32;
            }
        });
    Ok(f)
}
