//! Fill the missing views of a sinogram from a reconstruction.

use ctproj::metrics::relative_rmse;
use ctproj::phantom::rasterize;
use ctproj::recon::{complete_sinogram, reconstruct_ls, LsConfig};
use ctproj::{apply_mask, AngleMask, DetectorSpec, EllipsoidPhantom, Geometry, Model, ProjectorPair, VolumeSpec};

fn main() -> ctproj::Result<()> {
    let spec = VolumeSpec::new(48, 48, 1, 1.0, 1.0);
    let truth = rasterize(&EllipsoidPhantom::desk_for(&VolumeSpec::cube(48, 1.0)), &spec, 2)?;
    let angles: Vec<f64> = (0..90).map(|i| i as f64 * 2.0).collect();
    let pair = ProjectorPair::new(Model::Sf, Geometry::parallel(angles, DetectorSpec::centered(1, 70, 1.0, 1.0)), spec)?;
    let y = pair.forward(&truth)?;
    let mask = AngleMask::new((0..90).map(|v| v % 3 != 2).collect())?;

    let kept = pair.with_geometry(pair.geometry().select_views(&mask.kept_indices()))?;
    let x = reconstruct_ls(&apply_mask(&y, &mask)?, &kept, &LsConfig { max_iters: 150, ..LsConfig::default() }, None)?.volume;
    let filled = complete_sinogram(&x, &y, &mask, &pair)?;
    let missing: Vec<bool> = (0..y.data().len()).map(|i| !mask.is_kept(i / 70)).collect();
    println!("relative RMSE on filled views {:.3}%", 100.0 * relative_rmse(filled.data(), y.data(), Some(&missing)));
    Ok(())
}
