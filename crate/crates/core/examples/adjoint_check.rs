//! Randomized dot-product test of the matched transpose for every geometry.

use ctproj::{DetectorSpec, Geometry, Model, ProjectorPair, VolumeSpec};

fn main() -> ctproj::Result<()> {
    let spec = VolumeSpec::new(24, 24, 16, 1.0, 1.0);
    let angles: Vec<f64> = (0..18).map(|i| i as f64 * 20.0).collect();
    let det = DetectorSpec::centered(20, 32, 1.5, 1.5);
    let geometries = [
        ("parallel", Geometry::parallel(angles.clone(), DetectorSpec::centered(16, 32, 1.0, 1.0))),
        ("cone flat", Geometry::cone(angles.clone(), 60.0, 120.0, det.clone())),
        ("cone curved", Geometry::cone_curved(angles.clone(), 60.0, 120.0, det.clone())),
        ("modular", Geometry::cone(angles, 60.0, 120.0, det).to_modular()?),
    ];
    for (name, g) in geometries {
        for model in [Model::Siddon, Model::Sf] {
            match ProjectorPair::new(model, g.clone(), spec.clone()) {
                Ok(pair) => println!("{name:<12} {model:?}: max relative error {:.2e}", pair.adjoint_check(10, 0).max_rel_err),
                Err(e) => println!("{name:<12} {model:?}: {e}"),
            }
        }
    }
    Ok(())
}
