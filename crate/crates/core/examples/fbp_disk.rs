//! Filtered backprojection of a uniform disk.

use ctproj::phantom::analytic_project;
use ctproj::recon::fbp_parallel;
use ctproj::{DetectorSpec, Ellipsoid, EllipsoidPhantom, Geometry, Model, ProjectorPair, Vec3, VolumeSpec};

fn main() -> ctproj::Result<()> {
    let n = 128;
    let spec = VolumeSpec::new(n, n, 1, 1.0, 1.0);
    let disk = EllipsoidPhantom::new(vec![Ellipsoid {
        center: Vec3::new(0.0, 0.0, 0.0),
        semi_axes: Vec3::new(40.0, 40.0, 1e3),
        rotation_z: 0.0,
        density: 0.02,
    }])?;
    let angles: Vec<f64> = (0..360).map(|i| i as f64 * 0.5).collect();
    let g = Geometry::parallel(angles, DetectorSpec::centered(1, 184, 1.0, 1.0));
    let x = fbp_parallel(&analytic_project(&disk, &g)?, &ProjectorPair::new(Model::Siddon, g, spec)?)?;

    let (mut sum, mut count) = (0.0, 0);
    for j in 0..n {
        for i in 0..n {
            let p = x.spec().voxel_center(i, j, 0);
            if p.x.hypot(p.y) < 30.0 {
                sum += x.get(i, j, 0) as f64;
                count += 1;
            }
        }
    }
    println!("mean interior value {:.6} (disk density 0.02)", sum / count as f64);
    let row = (0..n).step_by(8).map(|i| format!("{:.4}", x.get(i, n / 2, 0))).collect::<Vec<_>>();
    println!("center row: {}", row.join(" "));
    Ok(())
}
