//! Projection and matched backprojection of a cylindrically symmetric object.

use ctproj::abel::{abel_backproject, abel_forward, RadialProfile};
use ctproj::DetectorSpec;

fn main() -> ctproj::Result<()> {
    let (num_r, spacing, radius) = (64, 0.5, 20.0);
    let f = RadialProfile::from_fn(4, num_r, spacing, |_, r| if r < radius { 1.0 } else { 0.0 })?;
    let det = DetectorSpec::centered(4, 128, spacing, spacing);
    let p = abel_forward(&f, &det)?;
    let mut worst: f64 = 0.0;
    for c in 0..det.num_cols {
        let s = det.s(c);
        let exact = 2.0 * (radius * radius - s * s).max(0.0).sqrt();
        worst = worst.max((p.get(0, 0, c) as f64 - exact).abs() / (2.0 * radius));
    }
    println!("largest projection error relative to the diameter {:.3}%", 100.0 * worst);

    let b = abel_backproject(&p, num_r, spacing)?;
    let fp: f64 = f.values().iter().zip(b.values()).map(|(&a, &b)| a as f64 * b as f64).sum();
    let pp: f64 = p.data().iter().map(|&v| v as f64 * v as f64).sum();
    println!("<Af, Af> = {pp:.6}, <f, A^T A f> = {fp:.6}");
    Ok(())
}
