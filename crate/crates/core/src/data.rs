//! Volume and projection containers plus the raw + JSON header file format.
//!
//! A header is a JSON object
//! `{"kind": "volume"|"projections", "shape": [..], "dtype": "f32le", "raw": "<file>", ...}`
//! carrying the volume spec under `"volume"` or the geometry under
//! `"geometry"`. The raw file holds exactly `product(shape) * 4` bytes of
//! little-endian IEEE-754 floats.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::geometry::{Geometry, VolumeSpec};

/// Attenuation volume (mm⁻¹), stored `[z][y][x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    spec: VolumeSpec,
    data: Vec<f32>,
}

impl Volume {
    pub fn zeros(spec: VolumeSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.num_voxels();
        Ok(Self { spec, data: vec![0.0; n] })
    }

    pub fn filled(spec: VolumeSpec, value: f32) -> Result<Self> {
        let mut v = Self::zeros(spec)?;
        v.data.fill(value);
        Ok(v)
    }

    pub fn from_vec(spec: VolumeSpec, data: Vec<f32>) -> Result<Self> {
        spec.validate()?;
        check_len(spec.num_voxels(), data.len())?;
        check_finite(&data)?;
        Ok(Self { spec, data })
    }

    pub fn spec(&self) -> &VolumeSpec {
        &self.spec
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Mutable access; callers must keep values finite.
    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f32 {
        self.data[self.spec.index(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f32) {
        let idx = self.spec.index(i, j, k);
        self.data[idx] = value;
    }

    pub fn byte_len(&self) -> usize {
        self.data.len() * 4
    }
}

/// Line-integral data, stored `[view][row][col]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionSet {
    geometry: Geometry,
    data: Vec<f32>,
}

impl ProjectionSet {
    pub fn zeros(geometry: Geometry) -> Result<Self> {
        geometry.validate()?;
        let n = geometry.num_samples();
        Ok(Self { geometry, data: vec![0.0; n] })
    }

    pub fn from_vec(geometry: Geometry, data: Vec<f32>) -> Result<Self> {
        geometry.validate()?;
        check_len(geometry.num_samples(), data.len())?;
        check_finite(&data)?;
        Ok(Self { geometry, data })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    pub fn view(&self, v: usize) -> &[f32] {
        let n = self.geometry.detector.num_pixels();
        &self.data[v * n..(v + 1) * n]
    }

    pub fn view_mut(&mut self, v: usize) -> &mut [f32] {
        let n = self.geometry.detector.num_pixels();
        &mut self.data[v * n..(v + 1) * n]
    }

    pub fn get(&self, view: usize, row: usize, col: usize) -> f32 {
        let d = &self.geometry.detector;
        self.data[(view * d.num_rows + row) * d.num_cols + col]
    }

    pub fn byte_len(&self) -> usize {
        self.data.len() * 4
    }
}

/// Per-view keep flags for limited-angle experiments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AngleMask {
    keep: Vec<bool>,
}

impl AngleMask {
    /// At least one view must be kept.
    pub fn new(keep: Vec<bool>) -> Result<Self> {
        if !keep.iter().any(|&k| k) {
            return Err(Error::invalid("mask", "at least one view must be kept"));
        }
        Ok(Self { keep })
    }

    pub fn all(num_views: usize) -> Result<Self> {
        Self::new(vec![true; num_views])
    }

    /// Keeps views whose index lies in `range`.
    pub fn keep_range(num_views: usize, range: std::ops::Range<usize>) -> Result<Self> {
        Self::new((0..num_views).map(|i| range.contains(&i)).collect())
    }

    pub fn len(&self) -> usize {
        self.keep.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keep.is_empty()
    }

    pub fn is_kept(&self, view: usize) -> bool {
        self.keep[view]
    }

    pub fn flags(&self) -> &[bool] {
        &self.keep
    }

    pub fn kept_indices(&self) -> Vec<usize> {
        (0..self.keep.len()).filter(|&i| self.keep[i]).collect()
    }

    /// JSON array of 0/1.
    pub fn from_json(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text)?;
        let arr = v
            .as_array()
            .ok_or_else(|| Error::invalid("mask", "expected an array of 0/1"))?;
        let keep = arr
            .iter()
            .map(|x| match x.as_u64() {
                Some(0) => Ok(false),
                Some(1) => Ok(true),
                _ => Err(Error::invalid("mask", format!("expected 0 or 1, got {x}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(keep)
    }

    pub fn to_json(&self) -> String {
        Value::from(self.keep.iter().map(|&k| k as u8).collect::<Vec<_>>()).to_string()
    }

    pub(crate) fn check(&self, num_views: usize) -> Result<()> {
        if self.keep.len() != num_views {
            return Err(Error::LengthMismatch {
                expected: num_views,
                actual: self.keep.len(),
            });
        }
        Ok(())
    }
}

/// Restricts `y` to the kept views; the geometry's view list is filtered alike.
pub fn apply_mask(y: &ProjectionSet, mask: &AngleMask) -> Result<ProjectionSet> {
    mask.check(y.geometry.num_views())?;
    let keep = mask.kept_indices();
    let mut data = Vec::with_capacity(keep.len() * y.geometry.detector.num_pixels());
    for &v in &keep {
        data.extend_from_slice(y.view(v));
    }
    Ok(ProjectionSet {
        geometry: y.geometry.select_views(&keep),
        data,
    })
}

/// Either container, as returned by [`read_array`].
#[derive(Debug, Clone, PartialEq)]
pub enum Array {
    Volume(Volume),
    Projections(ProjectionSet),
}

impl Array {
    pub fn into_volume(self) -> Result<Volume> {
        match self {
            Array::Volume(v) => Ok(v),
            Array::Projections(_) => Err(Error::SpecMismatch("expected a volume, found projections".into())),
        }
    }

    pub fn into_projections(self) -> Result<ProjectionSet> {
        match self {
            Array::Projections(p) => Ok(p),
            Array::Volume(_) => Err(Error::SpecMismatch("expected projections, found a volume".into())),
        }
    }
}

impl From<Volume> for Array {
    fn from(v: Volume) -> Self {
        Array::Volume(v)
    }
}

impl From<ProjectionSet> for Array {
    fn from(p: ProjectionSet) -> Self {
        Array::Projections(p)
    }
}

pub trait ArrayRef {
    fn header(&self, raw: &str) -> Value;
    fn values(&self) -> &[f32];
}

impl ArrayRef for Volume {
    fn header(&self, raw: &str) -> Value {
        let s = &self.spec;
        json!({
            "kind": "volume",
            "shape": [s.num_z, s.num_y, s.num_x],
            "dtype": "f32le",
            "raw": raw,
            "volume": Value::Object(s.to_json()),
        })
    }

    fn values(&self) -> &[f32] {
        &self.data
    }
}

impl ArrayRef for ProjectionSet {
    fn header(&self, raw: &str) -> Value {
        let g = &self.geometry;
        json!({
            "kind": "projections",
            "shape": [g.num_views(), g.detector.num_rows, g.detector.num_cols],
            "dtype": "f32le",
            "raw": raw,
            "geometry": Value::Object(g.to_json()),
        })
    }

    fn values(&self) -> &[f32] {
        &self.data
    }
}

impl ArrayRef for Array {
    fn header(&self, raw: &str) -> Value {
        match self {
            Array::Volume(v) => v.header(raw),
            Array::Projections(p) => p.header(raw),
        }
    }

    fn values(&self) -> &[f32] {
        match self {
            Array::Volume(v) => v.values(),
            Array::Projections(p) => p.values(),
        }
    }
}

/// Raw file name paired with a header path: `foo.json` → `foo.raw`.
pub fn raw_path_for(header: &Path) -> PathBuf {
    header.with_extension("raw")
}

/// Writes the raw payload and the header. Both go through a temporary file
/// in the destination directory followed by a rename.
pub fn write_array<A: ArrayRef + ?Sized>(a: &A, header_path: &Path) -> Result<()> {
    let raw_path = raw_path_for(header_path);
    let raw_name = raw_path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::MalformedHeader(format!("unusable path {}", header_path.display())))?
        .to_string();

    let mut bytes = Vec::with_capacity(a.values().len() * 4);
    for v in a.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    write_atomic(&raw_path, &bytes)?;
    let header = serde_json::to_string_pretty(&a.header(&raw_name))?;
    write_atomic(header_path, header.as_bytes())?;
    Ok(())
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

type Builder = Box<dyn FnOnce(Vec<f32>) -> Result<Array>>;

pub fn read_array(header_path: &Path) -> Result<Array> {
    let text = fs::read_to_string(header_path)?;
    let header: Value =
        serde_json::from_str(&text).map_err(|e| Error::MalformedHeader(format!("{}: {e}", header_path.display())))?;
    let obj = header
        .as_object()
        .ok_or_else(|| Error::MalformedHeader("header is not a JSON object".into()))?;

    let field = |k: &str| obj.get(k).ok_or_else(|| Error::MalformedHeader(format!("missing `{k}`")));
    if field("dtype")?.as_str() != Some("f32le") {
        return Err(Error::MalformedHeader("dtype must be \"f32le\"".into()));
    }
    let raw = field("raw")?
        .as_str()
        .ok_or_else(|| Error::MalformedHeader("`raw` must be a string".into()))?;
    let shape: Vec<usize> = field("shape")?
        .as_array()
        .and_then(|a| a.iter().map(|x| x.as_u64().map(|n| n as usize)).collect())
        .filter(|s: &Vec<usize>| s.len() == 3)
        .ok_or_else(|| Error::MalformedHeader("`shape` must be 3 non-negative integers".into()))?;

    let spec_obj = |k: &str| -> Result<&Map<String, Value>> {
        field(k)?
            .as_object()
            .ok_or_else(|| Error::MalformedHeader(format!("`{k}` must be an object")))
    };
    let kind = field("kind")?.as_str().unwrap_or_default();
    let (expected_shape, make): (Vec<usize>, Builder) = match kind {
        "volume" => {
            let spec = VolumeSpec::from_json(spec_obj("volume")?)?;
            (vec![spec.num_z, spec.num_y, spec.num_x], Box::new(move |d| Ok(Volume::from_vec(spec, d)?.into())))
        }
        "projections" => {
            let g = Geometry::from_json(spec_obj("geometry")?)?;
            (
                vec![g.num_views(), g.detector.num_rows, g.detector.num_cols],
                Box::new(move |d| Ok(ProjectionSet::from_vec(g, d)?.into())),
            )
        }
        other => return Err(Error::MalformedHeader(format!("unknown kind `{other}`"))),
    };
    if shape != expected_shape {
        return Err(Error::MalformedHeader(format!(
            "shape {shape:?} disagrees with embedded spec {expected_shape:?}"
        )));
    }

    let raw_path = header_path.parent().unwrap_or(Path::new("")).join(raw);
    let bytes = fs::read(&raw_path)?;
    let expected = shape.iter().product::<usize>() as u64 * 4;
    if bytes.len() as u64 != expected {
        return Err(Error::SizeMismatch {
            expected,
            actual: bytes.len() as u64,
        });
    }
    let data: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    make(data)
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::LengthMismatch { expected, actual });
    }
    Ok(())
}

fn check_finite(data: &[f32]) -> Result<()> {
    match data.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFiniteData(i)),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DetectorSpec;

    fn par(n: usize) -> Geometry {
        Geometry::parallel(
            (0..n).map(|i| i as f64 * 180.0 / n as f64).collect(),
            DetectorSpec::centered(2, 3, 1.0, 1.0),
        )
    }

    #[test]
    fn small_volume_reads_back() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vol.json");
        let v = Volume::from_vec(VolumeSpec::cube(2, 1.5), (0..8).map(|i| i as f32 * 0.5).collect()).unwrap();
        write_array(&v, &path).unwrap();
        assert_eq!(fs::metadata(dir.path().join("vol.raw")).unwrap().len(), 32);
        let back = read_array(&path).unwrap().into_volume().unwrap();
        assert_eq!(back.data().len(), 8);
        assert_eq!(back, v);
    }

    #[test]
    fn short_raw_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vol.json");
        write_array(&Volume::zeros(VolumeSpec::cube(2, 1.0)).unwrap(), &path).unwrap();
        let raw = dir.path().join("vol.raw");
        let bytes = fs::read(&raw).unwrap();
        fs::write(&raw, &bytes[..bytes.len() - 4]).unwrap();
        assert!(matches!(
            read_array(&path),
            Err(Error::SizeMismatch { expected: 32, actual: 28 })
        ));
    }

    #[test]
    fn non_finite_payload_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        write_array(&ProjectionSet::zeros(par(2)).unwrap(), &path).unwrap();
        let raw = dir.path().join("p.raw");
        let mut bytes = fs::read(&raw).unwrap();
        bytes[8..12].copy_from_slice(&f32::NAN.to_le_bytes());
        fs::write(&raw, bytes).unwrap();
        assert!(matches!(read_array(&path), Err(Error::NonFiniteData(2))));
    }

    #[test]
    fn malformed_headers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.json");
        fs::write(&path, "{\"kind\":\"volume\"").unwrap();
        assert!(matches!(read_array(&path), Err(Error::MalformedHeader(_))));

        write_array(&Volume::zeros(VolumeSpec::cube(2, 1.0)).unwrap(), &path).unwrap();
        let text = fs::read_to_string(&path).unwrap().replace("f32le", "f64le");
        fs::write(&path, text).unwrap();
        assert!(matches!(read_array(&path), Err(Error::MalformedHeader(_))));
    }

    #[test]
    fn empty_dimensions_are_unrepresentable() {
        let mut spec = VolumeSpec::cube(2, 1.0);
        spec.num_y = 0;
        assert!(Volume::zeros(spec).is_err());
        assert!(ProjectionSet::zeros(par(0)).is_err());
    }

    #[test]
    fn mask_selects_views() {
        let g = par(20);
        let n = g.detector.num_pixels();
        let y = ProjectionSet::from_vec(g.clone(), (0..20 * n).map(|i| i as f32).collect()).unwrap();

        let all = apply_mask(&y, &AngleMask::all(20).unwrap()).unwrap();
        assert_eq!(all, y);

        let mut keep = vec![false; 20];
        for i in [0, 7, 13] {
            keep[i] = true;
        }
        let sub = apply_mask(&y, &AngleMask::new(keep).unwrap()).unwrap();
        assert_eq!(sub.geometry().angles().unwrap(), &[0.0, 63.0, 117.0]);
        assert_eq!(sub.view(1), y.view(7));

        assert!(matches!(
            apply_mask(&y, &AngleMask::all(19).unwrap()),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(AngleMask::new(vec![false; 4]).is_err());
    }

    #[test]
    fn limited_angle_mask_of_720_views() {
        let g = Geometry::parallel(
            (0..720).map(|i| i as f64 * 0.25).collect(),
            DetectorSpec::centered(1, 2, 1.0, 1.0),
        );
        let y = ProjectionSet::zeros(g).unwrap();
        let sub = apply_mask(&y, &AngleMask::keep_range(720, 0..240).unwrap()).unwrap();
        let a = sub.geometry().angles().unwrap();
        assert_eq!(a.len(), 240);
        assert_eq!(a[239] - a[0] + 0.25, 60.0);
    }

    #[test]
    fn mask_json() {
        let m = AngleMask::from_json("[1,0,1]").unwrap();
        assert_eq!(m.kept_indices(), vec![0, 2]);
        assert_eq!(AngleMask::from_json(&m.to_json()).unwrap(), m);
        assert!(AngleMask::from_json("[1,2]").is_err());
    }
}
