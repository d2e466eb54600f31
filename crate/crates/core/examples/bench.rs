//! Time forward and back projection; run as a release build.

use ctproj::alloc_tracker::TrackingAllocator;
use ctproj::cli::bench;
use ctproj::{DetectorSpec, Geometry, Model, ProjectorPair, VolumeSpec};

#[global_allocator]
static ALLOC: TrackingAllocator = TrackingAllocator;

fn main() -> ctproj::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(64);
    let angles: Vec<f64> = (0..n).map(|i| i as f64 * 360.0 / n as f64).collect();
    let g = Geometry::cone(angles, 4.0 * n as f64, 8.0 * n as f64, DetectorSpec::centered(n, n + n / 2, 2.0, 2.0));
    for model in [Model::Siddon, Model::Sf] {
        let pair = ProjectorPair::new(model, g.clone(), VolumeSpec::cube(n, 1.0))?;
        println!("{model:?} at {n}^3");
        print!("{}", bench(&pair, 3, 0)?);
    }
    Ok(())
}
