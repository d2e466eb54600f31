//! Ellipsoid phantoms: JSON description, rasterization and exact chords.

use ctproj::phantom::{analytic_project, rasterize, ray_integral};
use ctproj::{DetectorSpec, EllipsoidPhantom, Geometry, VolumeSpec};

fn main() -> ctproj::Result<()> {
    let spec = VolumeSpec::cube(32, 1.0);
    let ph = EllipsoidPhantom::desk_for(&spec);
    println!("{}", ph.to_json());
    let parsed = EllipsoidPhantom::from_json(&ph.to_json())?;
    assert_eq!(parsed, ph);

    for s in [1, 2, 4] {
        let x = rasterize(&ph, &spec, s)?;
        println!("supersample {s}: integral {:.4} mm^3", x.data().iter().map(|&v| v as f64).sum::<f64>());
    }

    let g = Geometry::cone(vec![0.0, 90.0], 64.0, 128.0, DetectorSpec::centered(3, 5, 4.0, 4.0));
    let y = analytic_project(&ph, &g)?;
    let ray = g.ray_for_sample(&spec, 0, 1, 2)?;
    println!("central ray: {:.5} (direct {:.5})", y.get(0, 1, 2), ray_integral(&ph, &ray, false));
    Ok(())
}
