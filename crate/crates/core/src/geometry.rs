//! Scanner geometries, volume sampling, per-sample rays and the JSON
//! configuration format.
//!
//! Coordinates are right-handed with the rotation axis along z. For a view
//! angle φ the parallel-beam ray direction is (cos φ, sin φ, 0), the detector
//! transverse axis is u(φ) = (−sin φ, cos φ, 0) and the axial axis is z. A cone
//! beam source sits at sod·(cos φ, sin φ, 0) and its flat detector plane passes
//! through −(sdd − sod)·(cos φ, sin φ, 0). A curved detector is a cylinder of
//! radius sdd around the source whose column coordinate is arc length.
//!
//! Cone-beam angles give the source azimuth, not a rotation of the object.
//! Angles are degrees at every external interface and are converted to
//! radians only where rays are built.

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::vec3::Vec3;

/// Voxel grid: counts, voxel sizes (mm) and the world position of its center.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeSpec {
    pub num_x: usize,
    pub num_y: usize,
    pub num_z: usize,
    /// Transverse voxel size shared by x and y.
    pub voxel_width: f64,
    /// Axial voxel size.
    pub voxel_height: f64,
    pub offset_x: f64,
    pub offset_y: f64,
    pub offset_z: f64,
}

impl VolumeSpec {
    /// Centered grid with cubic voxels of size `voxel` mm.
    pub fn cube(n: usize, voxel: f64) -> Self {
        Self::new(n, n, n, voxel, voxel)
    }

    pub fn new(num_x: usize, num_y: usize, num_z: usize, voxel_width: f64, voxel_height: f64) -> Self {
        Self {
            num_x,
            num_y,
            num_z,
            voxel_width,
            voxel_height,
            offset_x: 0.0,
            offset_y: 0.0,
            offset_z: 0.0,
        }
    }

    pub fn with_offset(mut self, x: f64, y: f64, z: f64) -> Self {
        self.offset_x = x;
        self.offset_y = y;
        self.offset_z = z;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (key, n) in [("numX", self.num_x), ("numY", self.num_y), ("numZ", self.num_z)] {
            if n == 0 {
                return Err(Error::invalid(key, "must be at least 1"));
            }
        }
        positive("voxelWidth", self.voxel_width)?;
        positive("voxelHeight", self.voxel_height)?;
        for (key, v) in [("offsetX", self.offset_x), ("offsetY", self.offset_y), ("offsetZ", self.offset_z)] {
            if !v.is_finite() {
                return Err(Error::invalid(key, "must be finite"));
            }
        }
        Ok(())
    }

    pub fn num_voxels(&self) -> usize {
        self.num_x * self.num_y * self.num_z
    }

    /// Flat index into the `[z][y][x]` layout.
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.num_y + j) * self.num_x + i
    }

    pub fn voxel_center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        Vec3::new(
            self.offset_x + (i as f64 - (self.num_x as f64 - 1.0) / 2.0) * self.voxel_width,
            self.offset_y + (j as f64 - (self.num_y as f64 - 1.0) / 2.0) * self.voxel_width,
            self.offset_z + (k as f64 - (self.num_z as f64 - 1.0) / 2.0) * self.voxel_height,
        )
    }

    /// Lower corner of the grid's bounding box.
    pub fn min_corner(&self) -> Vec3 {
        Vec3::new(
            self.offset_x - self.num_x as f64 * self.voxel_width / 2.0,
            self.offset_y - self.num_y as f64 * self.voxel_width / 2.0,
            self.offset_z - self.num_z as f64 * self.voxel_height / 2.0,
        )
    }

    pub fn sizes(&self) -> Vec3 {
        Vec3::new(self.voxel_width, self.voxel_width, self.voxel_height)
    }

    pub fn counts(&self) -> [usize; 3] {
        [self.num_x, self.num_y, self.num_z]
    }

    /// Radius of the sphere around the world origin enclosing the whole grid.
    pub fn circumscribed_radius(&self) -> f64 {
        let half = Vec3::new(
            self.num_x as f64 * self.voxel_width,
            self.num_y as f64 * self.voxel_width,
            self.num_z as f64 * self.voxel_height,
        )
        .norm()
            / 2.0;
        Vec3::new(self.offset_x, self.offset_y, self.offset_z).norm() + half
    }

    /// Every length multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            voxel_width: self.voxel_width * k,
            voxel_height: self.voxel_height * k,
            offset_x: self.offset_x * k,
            offset_y: self.offset_y * k,
            offset_z: self.offset_z * k,
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> Map<String, Value> {
        let mut m = Map::new();
        m.insert("numX".into(), self.num_x.into());
        m.insert("numY".into(), self.num_y.into());
        m.insert("numZ".into(), self.num_z.into());
        m.insert("voxelWidth".into(), self.voxel_width.into());
        m.insert("voxelHeight".into(), self.voxel_height.into());
        m.insert("offsetX".into(), self.offset_x.into());
        m.insert("offsetY".into(), self.offset_y.into());
        m.insert("offsetZ".into(), self.offset_z.into());
        m
    }

    /// Parses a volume object; unknown keys are rejected.
    pub fn from_json(map: &Map<String, Value>) -> Result<Self> {
        reject_unknown(map, &[VOLUME_KEYS])?;
        volume_from_map(map)
    }
}

/// Detector sampling. `center_row`/`center_col` are the fractional pixel
/// indices hit by the reference ray, which is how detector shifts are expressed.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorSpec {
    pub num_rows: usize,
    pub num_cols: usize,
    pub pixel_height: f64,
    pub pixel_width: f64,
    pub center_row: f64,
    pub center_col: f64,
}

impl DetectorSpec {
    /// Detector with the reference ray through its middle.
    pub fn centered(num_rows: usize, num_cols: usize, pixel_height: f64, pixel_width: f64) -> Self {
        Self {
            num_rows,
            num_cols,
            pixel_height,
            pixel_width,
            center_row: (num_rows as f64 - 1.0) / 2.0,
            center_col: (num_cols as f64 - 1.0) / 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_rows == 0 {
            return Err(Error::invalid("numRows", "must be at least 1"));
        }
        if self.num_cols == 0 {
            return Err(Error::invalid("numCols", "must be at least 1"));
        }
        positive("pixelHeight", self.pixel_height)?;
        positive("pixelWidth", self.pixel_width)?;
        if !self.center_row.is_finite() {
            return Err(Error::invalid("centerRow", "must be finite"));
        }
        if !self.center_col.is_finite() {
            return Err(Error::invalid("centerCol", "must be finite"));
        }
        Ok(())
    }

    /// Transverse coordinate of column `col` (arc length on curved detectors).
    pub fn s(&self, col: usize) -> f64 {
        (col as f64 - self.center_col) * self.pixel_width
    }

    /// Axial coordinate of row `row`.
    pub fn t(&self, row: usize) -> f64 {
        (row as f64 - self.center_row) * self.pixel_height
    }

    /// Fractional column index of transverse coordinate `s`.
    pub fn col_of(&self, s: f64) -> f64 {
        s / self.pixel_width + self.center_col
    }

    pub fn row_of(&self, t: f64) -> f64 {
        t / self.pixel_height + self.center_row
    }

    pub fn num_pixels(&self) -> usize {
        self.num_rows * self.num_cols
    }
}

/// One source/detector pose of a modular scanner. The detector pixel
/// `(row, col)` lies at `detector_center + s·col_dir + t·row_dir`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModularView {
    pub source_pos: Vec3,
    pub detector_center: Vec3,
    pub row_dir: Vec3,
    pub col_dir: Vec3,
}

impl ModularView {
    pub fn validate(&self) -> Result<()> {
        if !(self.source_pos.is_finite()
            && self.detector_center.is_finite()
            && self.row_dir.is_finite()
            && self.col_dir.is_finite())
        {
            return Err(Error::invalid("views", "non-finite vector"));
        }
        if (self.row_dir.norm() - 1.0).abs() > 1e-6 || (self.col_dir.norm() - 1.0).abs() > 1e-6 {
            return Err(Error::invalid("views", "rowDir and colDir must be unit vectors"));
        }
        if self.row_dir.dot(self.col_dir).abs() > 1e-6 {
            return Err(Error::invalid("views", "rowDir and colDir must be orthogonal"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectorShape {
    Flat,
    Curved,
}

/// Scan trajectory. View angles are in degrees.
#[derive(Debug, Clone, PartialEq)]
pub enum Scan {
    Parallel {
        angles: Vec<f64>,
    },
    Cone {
        angles: Vec<f64>,
        sod: f64,
        sdd: f64,
        shape: DetectorShape,
    },
    Modular {
        views: Vec<ModularView>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeometryKind {
    Parallel,
    ConeFlat,
    ConeCurved,
    Modular,
}

impl GeometryKind {
    pub const ALL: [GeometryKind; 4] = [
        GeometryKind::Parallel,
        GeometryKind::ConeFlat,
        GeometryKind::ConeCurved,
        GeometryKind::Modular,
    ];

    pub fn config_name(self) -> &'static str {
        match self {
            GeometryKind::Parallel => "parallel",
            GeometryKind::ConeFlat => "cone",
            GeometryKind::ConeCurved => "cone-curved",
            GeometryKind::Modular => "modular",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub scan: Scan,
    pub detector: DetectorSpec,
}

/// A measurement line: `origin + α·direction` for α ≥ 0, `direction` unit length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
}

impl Geometry {
    pub fn parallel(angles: Vec<f64>, detector: DetectorSpec) -> Self {
        Self {
            scan: Scan::Parallel { angles },
            detector,
        }
    }

    pub fn cone(angles: Vec<f64>, sod: f64, sdd: f64, detector: DetectorSpec) -> Self {
        Self {
            scan: Scan::Cone {
                angles,
                sod,
                sdd,
                shape: DetectorShape::Flat,
            },
            detector,
        }
    }

    pub fn cone_curved(angles: Vec<f64>, sod: f64, sdd: f64, detector: DetectorSpec) -> Self {
        Self {
            scan: Scan::Cone {
                angles,
                sod,
                sdd,
                shape: DetectorShape::Curved,
            },
            detector,
        }
    }

    pub fn modular(views: Vec<ModularView>, detector: DetectorSpec) -> Self {
        Self {
            scan: Scan::Modular { views },
            detector,
        }
    }

    pub fn kind(&self) -> GeometryKind {
        match &self.scan {
            Scan::Parallel { .. } => GeometryKind::Parallel,
            Scan::Cone { shape: DetectorShape::Flat, .. } => GeometryKind::ConeFlat,
            Scan::Cone { shape: DetectorShape::Curved, .. } => GeometryKind::ConeCurved,
            Scan::Modular { .. } => GeometryKind::Modular,
        }
    }

    pub fn angles(&self) -> Option<&[f64]> {
        match &self.scan {
            Scan::Parallel { angles } | Scan::Cone { angles, .. } => Some(angles),
            Scan::Modular { .. } => None,
        }
    }

    pub fn num_views(&self) -> usize {
        match &self.scan {
            Scan::Parallel { angles } | Scan::Cone { angles, .. } => angles.len(),
            Scan::Modular { views } => views.len(),
        }
    }

    pub fn num_samples(&self) -> usize {
        self.num_views() * self.detector.num_pixels()
    }

    pub fn validate(&self) -> Result<()> {
        self.detector.validate()?;
        match &self.scan {
            Scan::Parallel { angles } => validate_angles(angles),
            Scan::Cone { angles, sod, sdd, .. } => {
                validate_angles(angles)?;
                positive("sod", *sod)?;
                positive("sdd", *sdd)?;
                if sod > sdd {
                    return Err(Error::invalid("sod", format!("sod ({sod}) exceeds sdd ({sdd})")));
                }
                Ok(())
            }
            Scan::Modular { views } => {
                if views.is_empty() {
                    return Err(Error::invalid("views", "at least one view is required"));
                }
                views.iter().try_for_each(ModularView::validate)
            }
        }
    }

    /// The ray through the center of detector pixel `(row, col)` of `view`.
    ///
    /// Parallel-beam rays start behind the volume by its circumscribed radius
    /// plus one voxel so that the whole grid lies at α ≥ 0.
    pub fn ray_for_sample(&self, vol: &VolumeSpec, view: usize, row: usize, col: usize) -> Result<Ray> {
        if view >= self.num_views() || row >= self.detector.num_rows || col >= self.detector.num_cols {
            return Err(Error::IndexOutOfRange(format!(
                "sample ({view}, {row}, {col}) outside {} views of {}x{} pixels",
                self.num_views(),
                self.detector.num_rows,
                self.detector.num_cols
            )));
        }
        let frame = self.view_frame(view, parallel_back_distance(vol));
        Ok(frame.ray(self.detector.s(col), self.detector.t(row)))
    }

    pub(crate) fn view_frame(&self, view: usize, back: f64) -> ViewFrame {
        match &self.scan {
            Scan::Parallel { angles } => {
                let phi = angles[view].to_radians();
                let (s, c) = phi.sin_cos();
                ViewFrame::Parallel {
                    dir: Vec3::new(c, s, 0.0),
                    u: Vec3::new(-s, c, 0.0),
                    back,
                }
            }
            Scan::Cone { angles, sod, sdd, shape } => {
                let phi = angles[view].to_radians();
                let (s, c) = phi.sin_cos();
                ViewFrame::Cone {
                    source: Vec3::new(sod * c, sod * s, 0.0),
                    axis: Vec3::new(-c, -s, 0.0),
                    u: Vec3::new(-s, c, 0.0),
                    sdd: *sdd,
                    curved: *shape == DetectorShape::Curved,
                }
            }
            Scan::Modular { views } => {
                let v = &views[view];
                ViewFrame::Modular {
                    source: v.source_pos,
                    center: v.detector_center,
                    row_dir: v.row_dir,
                    col_dir: v.col_dir,
                }
            }
        }
    }

    /// Canonicalizes a flat-panel cone geometry into explicit per-view poses.
    pub fn to_modular(&self) -> Result<Geometry> {
        match &self.scan {
            Scan::Cone {
                angles,
                sod,
                sdd,
                shape: DetectorShape::Flat,
            } => {
                let views = angles
                    .iter()
                    .map(|a| {
                        let (s, c) = a.to_radians().sin_cos();
                        let e = Vec3::new(c, s, 0.0);
                        ModularView {
                            source_pos: e * *sod,
                            detector_center: e * -(sdd - sod),
                            row_dir: Vec3::Z,
                            col_dir: Vec3::new(-s, c, 0.0),
                        }
                    })
                    .collect();
                Ok(Geometry::modular(views, self.detector.clone()))
            }
            Scan::Cone { .. } => Err(Error::Unsupported(
                "a curved detector has no flat modular equivalent".into(),
            )),
            Scan::Parallel { .. } => Err(Error::Unsupported("parallel beam has no source position".into())),
            Scan::Modular { .. } => Err(Error::Unsupported("geometry is already modular".into())),
        }
    }

    /// Geometry restricted to the listed views, in the given order.
    pub fn select_views(&self, keep: &[usize]) -> Geometry {
        let scan = match &self.scan {
            Scan::Parallel { angles } => Scan::Parallel {
                angles: keep.iter().map(|&i| angles[i]).collect(),
            },
            Scan::Cone { angles, sod, sdd, shape } => Scan::Cone {
                angles: keep.iter().map(|&i| angles[i]).collect(),
                sod: *sod,
                sdd: *sdd,
                shape: *shape,
            },
            Scan::Modular { views } => Scan::Modular {
                views: keep.iter().map(|&i| views[i].clone()).collect(),
            },
        };
        Geometry {
            scan,
            detector: self.detector.clone(),
        }
    }

    /// Every length multiplied by `k`; angles and pixel indices unchanged.
    pub fn scaled(&self, k: f64) -> Geometry {
        let scan = match &self.scan {
            Scan::Parallel { angles } => Scan::Parallel { angles: angles.clone() },
            Scan::Cone { angles, sod, sdd, shape } => Scan::Cone {
                angles: angles.clone(),
                sod: sod * k,
                sdd: sdd * k,
                shape: *shape,
            },
            Scan::Modular { views } => Scan::Modular {
                views: views
                    .iter()
                    .map(|v| ModularView {
                        source_pos: v.source_pos * k,
                        detector_center: v.detector_center * k,
                        ..v.clone()
                    })
                    .collect(),
            },
        };
        let mut detector = self.detector.clone();
        detector.pixel_height *= k;
        detector.pixel_width *= k;
        Geometry { scan, detector }
    }

    /// Adds `delta` degrees to every view angle (modular poses are rotated about z).
    pub fn rotated(&self, delta: f64) -> Geometry {
        let mut g = self.clone();
        match &mut g.scan {
            Scan::Parallel { angles } | Scan::Cone { angles, .. } => {
                angles.iter_mut().for_each(|a| *a += delta);
            }
            Scan::Modular { views } => {
                let r = delta.to_radians();
                for v in views {
                    v.source_pos = v.source_pos.rotate_z(r);
                    v.detector_center = v.detector_center.rotate_z(r);
                    v.row_dir = v.row_dir.rotate_z(r);
                    v.col_dir = v.col_dir.rotate_z(r);
                }
            }
        }
        g
    }

    /// Serializes to the configuration keys, always with an explicit angle list.
    pub fn to_json(&self) -> Map<String, Value> {
        let mut m = Map::new();
        m.insert("geometry".into(), self.kind().config_name().into());
        m.insert("numAngles".into(), self.num_views().into());
        match &self.scan {
            Scan::Parallel { angles } => {
                m.insert("angles".into(), angles.clone().into());
            }
            Scan::Cone { angles, sod, sdd, .. } => {
                m.insert("angles".into(), angles.clone().into());
                m.insert("sod".into(), (*sod).into());
                m.insert("sdd".into(), (*sdd).into());
            }
            Scan::Modular { views } => {
                let vs: Vec<Value> = views
                    .iter()
                    .map(|v| {
                        serde_json::json!({
                            "sourcePos": v.source_pos.to_array(),
                            "detectorCenter": v.detector_center.to_array(),
                            "rowDir": v.row_dir.to_array(),
                            "colDir": v.col_dir.to_array(),
                        })
                    })
                    .collect();
                m.insert("views".into(), vs.into());
            }
        }
        let d = &self.detector;
        m.insert("numRows".into(), d.num_rows.into());
        m.insert("numCols".into(), d.num_cols.into());
        m.insert("pixelHeight".into(), d.pixel_height.into());
        m.insert("pixelWidth".into(), d.pixel_width.into());
        m.insert("centerRow".into(), d.center_row.into());
        m.insert("centerCol".into(), d.center_col.into());
        m
    }

    /// Parses a geometry object; unknown keys are rejected.
    pub fn from_json(map: &Map<String, Value>) -> Result<Self> {
        reject_unknown(map, &[GEOMETRY_KEYS])?;
        geometry_from_map(map)
    }
}

pub(crate) fn parallel_back_distance(vol: &VolumeSpec) -> f64 {
    vol.circumscribed_radius() + vol.voxel_width.max(vol.voxel_height)
}

/// Per-view pose with trigonometry evaluated once; both projector
/// directions build their rays through it so the arithmetic is shared.
#[derive(Debug, Clone)]
pub(crate) enum ViewFrame {
    Parallel {
        dir: Vec3,
        u: Vec3,
        back: f64,
    },
    Cone {
        source: Vec3,
        /// Central ray direction, −(cos φ, sin φ, 0).
        axis: Vec3,
        u: Vec3,
        sdd: f64,
        curved: bool,
    },
    Modular {
        source: Vec3,
        center: Vec3,
        row_dir: Vec3,
        col_dir: Vec3,
    },
}

/// Conservative detector-coordinate bounds of a projected box.
#[derive(Debug, Clone, Copy)]
pub(crate) struct DetectorBounds {
    pub s_min: f64,
    pub s_max: f64,
    pub t_min: f64,
    pub t_max: f64,
}

impl DetectorBounds {
    fn empty() -> Self {
        Self {
            s_min: f64::INFINITY,
            s_max: f64::NEG_INFINITY,
            t_min: f64::INFINITY,
            t_max: f64::NEG_INFINITY,
        }
    }

    fn include(&mut self, s: f64, t: f64) {
        self.s_min = self.s_min.min(s);
        self.s_max = self.s_max.max(s);
        self.t_min = self.t_min.min(t);
        self.t_max = self.t_max.max(t);
    }
}

impl ViewFrame {
    /// Ray through detector coordinates `(s, t)`.
    pub fn ray(&self, s: f64, t: f64) -> Ray {
        match *self {
            ViewFrame::Parallel { dir, u, back } => Ray {
                origin: u * s + Vec3::Z * t - dir * back,
                direction: dir,
            },
            ViewFrame::Cone {
                source,
                axis,
                u,
                sdd,
                curved,
            } => {
                let d = if curved {
                    let (sa, ca) = (s / sdd).sin_cos();
                    axis * (sdd * ca) + u * (sdd * sa) + Vec3::Z * t
                } else {
                    axis * sdd + u * s + Vec3::Z * t
                };
                Ray {
                    origin: source,
                    direction: d.normalized(),
                }
            }
            ViewFrame::Modular {
                source,
                center,
                row_dir,
                col_dir,
            } => Ray {
                origin: source,
                direction: (center - source + col_dir * s + row_dir * t).normalized(),
            },
        }
    }

    /// Whether rays are whole lines (no source point).
    pub fn is_parallel(&self) -> bool {
        matches!(self, ViewFrame::Parallel { .. })
    }

    /// Bounds on the detector coordinates of every ray meeting the box
    /// `[lo, hi]`. `None` means the box cannot be bounded (it reaches behind
    /// the source) and the whole detector must be considered.
    pub fn box_bounds(&self, lo: Vec3, hi: Vec3) -> Option<DetectorBounds> {
        let corners = [
            Vec3::new(lo.x, lo.y, lo.z),
            Vec3::new(hi.x, lo.y, lo.z),
            Vec3::new(lo.x, hi.y, lo.z),
            Vec3::new(hi.x, hi.y, lo.z),
            Vec3::new(lo.x, lo.y, hi.z),
            Vec3::new(hi.x, lo.y, hi.z),
            Vec3::new(lo.x, hi.y, hi.z),
            Vec3::new(hi.x, hi.y, hi.z),
        ];
        let mut b = DetectorBounds::empty();
        match *self {
            ViewFrame::Parallel { u, .. } => {
                for p in corners {
                    b.include(p.dot(u), p.z);
                }
            }
            ViewFrame::Cone {
                source,
                axis,
                u,
                sdd,
                curved: false,
            } => {
                for p in corners {
                    let rel = p - source;
                    let depth = rel.dot(axis);
                    if depth <= 0.0 {
                        return None;
                    }
                    b.include(sdd * rel.dot(u) / depth, sdd * rel.z / depth);
                }
            }
            ViewFrame::Cone {
                source,
                axis,
                u,
                sdd,
                curved: true,
            } => {
                let mut rho_max: f64 = 0.0;
                for p in &corners[..4] {
                    let rel = *p - source;
                    let depth = rel.dot(axis);
                    if depth <= 0.0 {
                        return None;
                    }
                    let s = sdd * rel.dot(u).atan2(depth);
                    b.s_min = b.s_min.min(s);
                    b.s_max = b.s_max.max(s);
                    rho_max = rho_max.max(rel.x.hypot(rel.y));
                }
                // Closest point of the xy rectangle to the source.
                let cx = source.x.clamp(lo.x, hi.x) - source.x;
                let cy = source.y.clamp(lo.y, hi.y) - source.y;
                let rho_min = cx.hypot(cy);
                if rho_min <= 0.0 {
                    return None;
                }
                for z in [lo.z - source.z, hi.z - source.z] {
                    for rho in [rho_min, rho_max] {
                        let t = sdd * z / rho;
                        b.t_min = b.t_min.min(t);
                        b.t_max = b.t_max.max(t);
                    }
                }
            }
            ViewFrame::Modular {
                source,
                center,
                row_dir,
                col_dir,
            } => {
                let normal = col_dir.cross(row_dir);
                let plane = (center - source).dot(normal);
                for p in corners {
                    let rel = p - source;
                    let denom = rel.dot(normal);
                    if denom == 0.0 || (denom > 0.0) != (plane > 0.0) {
                        return None;
                    }
                    let hit = source + rel * (plane / denom) - center;
                    b.include(hit.dot(col_dir), hit.dot(row_dir));
                }
            }
        }
        Some(b)
    }
}

fn validate_angles(angles: &[f64]) -> Result<()> {
    if angles.is_empty() {
        return Err(Error::invalid("numAngles", "at least one view is required"));
    }
    if angles.iter().any(|a| !a.is_finite()) {
        return Err(Error::invalid("angles", "angles must be finite"));
    }
    Ok(())
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(key, format!("must be positive and finite, got {v}")))
    }
}

// ---------------------------------------------------------------------------
// Configuration format

const GEOMETRY_KEYS: &[&str] = &[
    "geometry",
    "numAngles",
    "angularRange",
    "angles",
    "numRows",
    "numCols",
    "pixelHeight",
    "pixelWidth",
    "centerRow",
    "centerCol",
    "sod",
    "sdd",
    "views",
];

const VOLUME_KEYS: &[&str] = &[
    "numX",
    "numY",
    "numZ",
    "voxelWidth",
    "voxelHeight",
    "offsetX",
    "offsetY",
    "offsetZ",
];

/// Parses a configuration document into a validated geometry and volume.
pub fn parse_config(text: &str) -> Result<(Geometry, VolumeSpec)> {
    let value: Value = serde_json::from_str(text)?;
    let map = value
        .as_object()
        .ok_or_else(|| Error::invalid("<document>", "expected a JSON object"))?;
    reject_unknown(map, &[GEOMETRY_KEYS, VOLUME_KEYS])?;
    Ok((geometry_from_map(map)?, volume_from_map(map)?))
}

/// Inverse of [`parse_config`].
pub fn config_to_json(g: &Geometry, vol: &VolumeSpec) -> Value {
    let mut m = g.to_json();
    m.extend(vol.to_json());
    Value::Object(m)
}

fn reject_unknown(map: &Map<String, Value>, known: &[&[&str]]) -> Result<()> {
    for key in map.keys() {
        if !known.iter().any(|set| set.contains(&key.as_str())) {
            return Err(Error::UnknownKey(key.clone()));
        }
    }
    Ok(())
}

fn get_usize(map: &Map<String, Value>, key: &str) -> Result<Option<usize>> {
    match map.get(key) {
        None => Ok(None),
        Some(v) => v
            .as_u64()
            .map(|n| Some(n as usize))
            .ok_or_else(|| Error::invalid(key, format!("expected a non-negative integer, got {v}"))),
    }
}

fn get_f64(map: &Map<String, Value>, key: &str) -> Result<Option<f64>> {
    match map.get(key) {
        None => Ok(None),
        Some(v) => match v.as_f64() {
            Some(x) if x.is_finite() => Ok(Some(x)),
            _ => Err(Error::invalid(key, format!("expected a finite number, got {v}"))),
        },
    }
}

fn require<T>(key: &str, v: Option<T>) -> Result<T> {
    v.ok_or_else(|| Error::MissingKey(key.to_string()))
}

fn get_vec3(obj: &Map<String, Value>, key: &str) -> Result<Vec3> {
    let v = require(key, obj.get(key))?;
    let arr = v
        .as_array()
        .filter(|a| a.len() == 3)
        .ok_or_else(|| Error::invalid(key, "expected an array of 3 numbers"))?;
    let mut out = [0.0; 3];
    for (o, x) in out.iter_mut().zip(arr) {
        *o = x
            .as_f64()
            .filter(|x| x.is_finite())
            .ok_or_else(|| Error::invalid(key, "expected an array of 3 numbers"))?;
    }
    Ok(Vec3::from_array(out))
}

fn volume_from_map(map: &Map<String, Value>) -> Result<VolumeSpec> {
    let spec = VolumeSpec {
        num_x: require("numX", get_usize(map, "numX")?)?,
        num_y: require("numY", get_usize(map, "numY")?)?,
        num_z: require("numZ", get_usize(map, "numZ")?)?,
        voxel_width: require("voxelWidth", get_f64(map, "voxelWidth")?)?,
        voxel_height: require("voxelHeight", get_f64(map, "voxelHeight")?)?,
        offset_x: get_f64(map, "offsetX")?.unwrap_or(0.0),
        offset_y: get_f64(map, "offsetY")?.unwrap_or(0.0),
        offset_z: get_f64(map, "offsetZ")?.unwrap_or(0.0),
    };
    spec.validate()?;
    Ok(spec)
}

fn angles_from_map(map: &Map<String, Value>) -> Result<Vec<f64>> {
    let num = get_usize(map, "numAngles")?;
    let angles = match (map.get("angularRange"), map.get("angles")) {
        (Some(_), Some(_)) => {
            return Err(Error::ConflictingKeys("angularRange".into(), "angles".into()));
        }
        (Some(_), None) => {
            let range = require("angularRange", get_f64(map, "angularRange")?)?;
            positive("angularRange", range)?;
            let n = require("numAngles", num)?;
            (0..n).map(|i| i as f64 * range / n as f64).collect()
        }
        (None, Some(v)) => {
            let arr = v
                .as_array()
                .ok_or_else(|| Error::invalid("angles", "expected an array of degrees"))?;
            let angles = arr
                .iter()
                .map(|a| {
                    a.as_f64()
                        .filter(|a| a.is_finite())
                        .ok_or_else(|| Error::invalid("angles", format!("expected a number, got {a}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            if let Some(n) = num {
                if n != angles.len() {
                    return Err(Error::invalid(
                        "numAngles",
                        format!("{n} does not match {} listed angles", angles.len()),
                    ));
                }
            }
            angles
        }
        (None, None) => return Err(Error::MissingKey("angularRange".into())),
    };
    validate_angles(&angles)?;
    Ok(angles)
}

fn geometry_from_map(map: &Map<String, Value>) -> Result<Geometry> {
    let kind = require("geometry", map.get("geometry"))?;
    let kind = match kind.as_str() {
        Some("parallel") => GeometryKind::Parallel,
        Some("cone") => GeometryKind::ConeFlat,
        Some("cone-curved") => GeometryKind::ConeCurved,
        Some("modular") => GeometryKind::Modular,
        _ => {
            return Err(Error::invalid(
                "geometry",
                format!("expected parallel, cone, cone-curved or modular, got {kind}"),
            ))
        }
    };

    let num_rows = require("numRows", get_usize(map, "numRows")?)?;
    let num_cols = require("numCols", get_usize(map, "numCols")?)?;
    let detector = DetectorSpec {
        num_rows,
        num_cols,
        pixel_height: require("pixelHeight", get_f64(map, "pixelHeight")?)?,
        pixel_width: require("pixelWidth", get_f64(map, "pixelWidth")?)?,
        center_row: get_f64(map, "centerRow")?.unwrap_or((num_rows as f64 - 1.0) / 2.0),
        center_col: get_f64(map, "centerCol")?.unwrap_or((num_cols as f64 - 1.0) / 2.0),
    };
    detector.validate()?;

    let not_for = |keys: &[&str]| -> Result<()> {
        match keys.iter().find(|k| map.contains_key(**k)) {
            Some(k) => Err(Error::invalid(
                k,
                format!("not used by {} geometry", kind.config_name()),
            )),
            None => Ok(()),
        }
    };

    let scan = match kind {
        GeometryKind::Parallel => {
            not_for(&["sod", "sdd", "views"])?;
            Scan::Parallel {
                angles: angles_from_map(map)?,
            }
        }
        GeometryKind::ConeFlat | GeometryKind::ConeCurved => {
            not_for(&["views"])?;
            Scan::Cone {
                angles: angles_from_map(map)?,
                sod: require("sod", get_f64(map, "sod")?)?,
                sdd: require("sdd", get_f64(map, "sdd")?)?,
                shape: if kind == GeometryKind::ConeFlat {
                    DetectorShape::Flat
                } else {
                    DetectorShape::Curved
                },
            }
        }
        GeometryKind::Modular => {
            not_for(&["sod", "sdd", "angles", "angularRange"])?;
            let arr = require("views", map.get("views"))?
                .as_array()
                .ok_or_else(|| Error::invalid("views", "expected an array of view objects"))?;
            let views = arr
                .iter()
                .map(|v| {
                    let obj = v
                        .as_object()
                        .ok_or_else(|| Error::invalid("views", "expected an object"))?;
                    reject_unknown(obj, &[&["sourcePos", "detectorCenter", "rowDir", "colDir"]])?;
                    Ok(ModularView {
                        source_pos: get_vec3(obj, "sourcePos")?,
                        detector_center: get_vec3(obj, "detectorCenter")?,
                        row_dir: get_vec3(obj, "rowDir")?,
                        col_dir: get_vec3(obj, "colDir")?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if let Some(n) = get_usize(map, "numAngles")? {
                if n != views.len() {
                    return Err(Error::invalid(
                        "numAngles",
                        format!("{n} does not match {} views", views.len()),
                    ));
                }
            }
            Scan::Modular { views }
        }
    };
    let g = Geometry { scan, detector };
    g.validate()?;
    Ok(g)
}
