#![allow(dead_code)]

use ctproj::phantom::{analytic_project, Ellipsoid, EllipsoidPhantom};
use ctproj::{DetectorSpec, Geometry, GeometryKind, ModularView, Vec3, VolumeSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn angles(n: usize, range: f64) -> Vec<f64> {
    (0..n).map(|i| i as f64 * range / n as f64).collect()
}

/// Tilted, shifted detectors on an irregular orbit around the grid.
pub fn modular_views(n: usize, sod: f64, sdd: f64, seed: u64) -> Vec<ModularView> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let phi = (i as f64 * 360.0 / n as f64 + rng.random_range(-3.0..3.0)).to_radians();
            let e = Vec3::new(phi.cos(), phi.sin(), 0.0);
            let u = Vec3::new(-phi.sin(), phi.cos(), 0.0);
            let tilt = rng.random_range(-0.1..0.1f64);
            let col_dir = (u * tilt.cos() + Vec3::Z * tilt.sin()).normalized();
            let row_dir = e.cross(col_dir);
            ModularView {
                source_pos: e * sod + Vec3::Z * rng.random_range(-2.0..2.0),
                detector_center: e * (sod - sdd) + u * rng.random_range(-3.0..3.0),
                row_dir,
                col_dir,
            }
        })
        .collect()
}

/// One geometry of each kind sized for a grid of half-width `half` mm.
pub fn geometry_of(kind: GeometryKind, views: usize, det: DetectorSpec, half: f64) -> Geometry {
    let (sod, sdd) = (4.0 * half, 8.0 * half);
    let mut cone_det = det.clone();
    cone_det.pixel_width *= 2.0;
    cone_det.pixel_height *= 2.0;
    match kind {
        GeometryKind::Parallel => Geometry::parallel(angles(views, 180.0), det),
        GeometryKind::ConeFlat => Geometry::cone(angles(views, 360.0), sod, sdd, cone_det),
        GeometryKind::ConeCurved => Geometry::cone_curved(angles(views, 360.0), sod, sdd, cone_det),
        GeometryKind::Modular => Geometry::modular(modular_views(views, sod, sdd, 11), cone_det),
    }
}

pub fn half_width(spec: &VolumeSpec) -> f64 {
    spec.num_x as f64 * spec.voxel_width / 2.0
}

/// Mask of samples whose ray crosses the phantom's outer ellipsoid for more
/// than `min_chord` mm.
pub fn chord_mask(ph: &EllipsoidPhantom, g: &Geometry, min_chord: f64) -> Vec<bool> {
    let outer = EllipsoidPhantom::new(vec![Ellipsoid {
        density: 1.0,
        ..ph.ellipsoids[0].clone()
    }])
    .unwrap();
    analytic_project(&outer, g)
        .unwrap()
        .data()
        .iter()
        .map(|&c| c as f64 > min_chord)
        .collect()
}

/// Infinite cylinder along z.
pub fn cylinder(radius: f64, density: f64) -> EllipsoidPhantom {
    EllipsoidPhantom::new(vec![Ellipsoid {
        center: Vec3::default(),
        semi_axes: Vec3::new(radius, radius, 1e6),
        rotation_z: 0.0,
        density,
    }])
    .unwrap()
}

pub fn random_vec(n: usize, seed: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0f32)).collect()
}
