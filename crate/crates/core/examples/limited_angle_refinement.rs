//! Limited-angle scan: FBP of the zero-filled sinogram, then least squares on
//! the measured views started from it.

use ctproj::metrics::psnr;
use ctproj::phantom::rasterize;
use ctproj::recon::{fbp_parallel, refine_data_consistency, zero_fill, LsConfig};
use ctproj::{AngleMask, DetectorSpec, EllipsoidPhantom, Geometry, Model, ProjectorPair, VolumeSpec};

fn main() -> ctproj::Result<()> {
    let spec = VolumeSpec::new(64, 64, 1, 1.0, 1.0);
    let truth = rasterize(&EllipsoidPhantom::desk_for(&VolumeSpec::cube(64, 1.0)), &spec, 2)?;
    let angles: Vec<f64> = (0..180).map(|i| i as f64).collect();
    let pair = ProjectorPair::new(Model::Siddon, Geometry::parallel(angles, DetectorSpec::centered(1, 92, 1.0, 1.0)), spec)?;
    let y = pair.forward(&truth)?;
    let mask = AngleMask::keep_range(180, 0..60)?;

    let x0 = fbp_parallel(&zero_fill(&y, &mask)?, &pair)?;
    let cfg = LsConfig { max_iters: 100, ..LsConfig::default() };
    let refined = refine_data_consistency(&x0, &y, &mask, &pair, &cfg)?;
    println!("kept {} of {} views", mask.kept_indices().len(), mask.len());
    println!("zero-filled FBP PSNR {:.2} dB", psnr(x0.data(), truth.data(), None));
    println!("refined       PSNR {:.2} dB", psnr(refined.volume.data(), truth.data(), None));
    Ok(())
}
