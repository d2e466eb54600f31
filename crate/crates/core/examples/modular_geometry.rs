//! Build a modular scanner with tilted detectors and check it against the
//! axial cone beam it generalizes.

use ctproj::phantom::rasterize;
use ctproj::{DetectorSpec, EllipsoidPhantom, Geometry, Model, ModularView, ProjectorPair, Vec3, VolumeSpec};

fn main() -> ctproj::Result<()> {
    let spec = VolumeSpec::cube(32, 1.0);
    let x = rasterize(&EllipsoidPhantom::desk_for(&spec), &spec, 2)?;
    let det = DetectorSpec::centered(40, 48, 1.5, 1.5);
    let angles: Vec<f64> = (0..24).map(|i| i as f64 * 15.0).collect();
    let cone = Geometry::cone(angles.clone(), 80.0, 160.0, det.clone());

    let a = ProjectorPair::new(Model::Siddon, cone.clone(), spec.clone())?.forward(&x)?;
    let b = ProjectorPair::new(Model::Siddon, cone.to_modular()?, spec.clone())?.forward(&x)?;
    let diff = a.data().iter().zip(b.data()).map(|(p, q)| (p - q).abs()).fold(0.0f32, f32::max);
    println!("cone vs equivalent modular: max difference {diff:.2e}");

    let views = angles
        .iter()
        .map(|deg| {
            let (s, c) = deg.to_radians().sin_cos();
            let e = Vec3::new(c, s, 0.0);
            let tilt = 10f64.to_radians();
            let col_dir = Vec3::new(-s * tilt.cos(), c * tilt.cos(), tilt.sin());
            ModularView {
                source_pos: e * 80.0,
                detector_center: e * -80.0 + Vec3::new(0.0, 0.0, 3.0),
                row_dir: e.cross(col_dir),
                col_dir,
            }
        })
        .collect();
    let tilted = ProjectorPair::new(Model::Siddon, Geometry::modular(views, det), spec)?;
    let y = tilted.forward(&x)?;
    println!("tilted modular scan: {} views, total signal {:.3}", y.geometry().num_views(), y.data().iter().sum::<f32>());
    println!("adjoint check {:.2e}", tilted.adjoint_check(5, 1).max_rel_err);
    Ok(())
}
