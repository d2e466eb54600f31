//! Forward project a rasterized phantom with both models and compare against
//! the analytic line integrals.

use ctproj::metrics::relative_rmse;
use ctproj::phantom::{analytic_project, rasterize};
use ctproj::{DetectorSpec, EllipsoidPhantom, Geometry, Model, ProjectorPair, VolumeSpec};

fn main() -> ctproj::Result<()> {
    let spec = VolumeSpec::cube(48, 1.0);
    let ph = EllipsoidPhantom::desk_for(&spec);
    let x = rasterize(&ph, &spec, 2)?;
    let angles: Vec<f64> = (0..60).map(|i| i as f64 * 6.0).collect();
    let g = Geometry::cone(angles, 150.0, 300.0, DetectorSpec::centered(56, 64, 2.0, 2.0));
    let truth = analytic_project(&ph, &g)?;
    let support: Vec<bool> = truth.data().iter().map(|&v| v > 0.0).collect();
    for model in [Model::Siddon, Model::Sf] {
        let pair = ProjectorPair::new(model, g.clone(), spec.clone())?;
        let y = pair.forward(&x)?;
        let err = relative_rmse(y.data(), truth.data(), Some(&support));
        println!("{model:?}: {} samples, relative RMSE vs analytic {:.3}%", y.data().len(), 100.0 * err);
    }
    Ok(())
}
