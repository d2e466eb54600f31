//! Gradient-descent least squares from simulated cone-beam data.

use ctproj::metrics::relative_rmse;
use ctproj::phantom::rasterize;
use ctproj::recon::{reconstruct_ls, LsConfig};
use ctproj::{DetectorSpec, EllipsoidPhantom, Geometry, Model, ProjectorPair, VolumeSpec};

fn main() -> ctproj::Result<()> {
    let spec = VolumeSpec::cube(24, 1.0);
    let truth = rasterize(&EllipsoidPhantom::desk_for(&spec), &spec, 2)?;
    let angles: Vec<f64> = (0..36).map(|i| i as f64 * 10.0).collect();
    let g = Geometry::cone(angles, 80.0, 160.0, DetectorSpec::centered(32, 40, 2.0, 2.0));
    let pair = ProjectorPair::new(Model::Sf, g, spec)?;
    let y = pair.forward(&truth)?;

    let cfg = LsConfig { max_iters: 200, tol: 1e-5, nonneg: true, ..LsConfig::default() };
    let res = reconstruct_ls(&y, &pair, &cfg, None)?;
    println!("step {:.3e}, {} iterations, converged {}", res.step, res.iterations, res.converged);
    for (i, c) in res.cost_trace.iter().enumerate().step_by(40) {
        println!("  iteration {i:>3}: cost {c:.4e}");
    }
    println!("relative RMSE vs truth {:.2}%", 100.0 * relative_rmse(res.volume.data(), truth.data(), None));
    Ok(())
}
