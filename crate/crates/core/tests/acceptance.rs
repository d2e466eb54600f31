//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Exit status is nonzero when any criterion fails, except for the thread
//! scaling sub-check of criterion 7 on machines with fewer than 8 cores,
//! which is still reported as FAIL.

mod common;

use std::time::{Duration, Instant};

use ctproj::abel::{abel_backproject, abel_forward, abel_geometry, RadialProfile};
use ctproj::alloc_tracker::TrackingAllocator;
use ctproj::cli::bench;
use ctproj::metrics::{psnr, relative_rmse};
use ctproj::operator::with_threads;
use ctproj::phantom::{analytic_project, rasterize, EllipsoidPhantom};
use ctproj::recon::{fbp_parallel, reconstruct_ls, refine_data_consistency, zero_fill, LsConfig};
use ctproj::{AngleMask, DetectorSpec, Geometry, GeometryKind, Model, ProjectionSet, ProjectorPair, Volume, VolumeSpec};

use common::*;

#[global_allocator]
static ALLOC: TrackingAllocator = TrackingAllocator;

struct Outcome {
    pass: bool,
    detail: String,
    /// Failure attributable only to the host having too few cores.
    hardware_bound: bool,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Self {
            pass,
            detail,
            hardware_bound: false,
        }
    }
}

fn pairs_for(kind: GeometryKind) -> Vec<Model> {
    if kind == GeometryKind::Modular {
        vec![Model::Siddon]
    } else {
        vec![Model::Siddon, Model::Sf]
    }
}

fn adjointness() -> Outcome {
    let start = Instant::now();
    let spec = VolumeSpec::cube(32, 1.0);
    let det = DetectorSpec::centered(48, 48, 1.0, 1.0);
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for kind in GeometryKind::ALL {
        let g = geometry_of(kind, 24, det.clone(), half_width(&spec));
        for model in pairs_for(kind) {
            let pair = ProjectorPair::new(model, g.clone(), spec.clone()).unwrap();
            let r = pair.adjoint_check(20, 1);
            worst = worst.max(r.max_rel_err);
            parts.push(format!("{model:?}/{}={:.1e}", kind.config_name(), r.max_rel_err));
        }
    }
    let elapsed = start.elapsed();
    Outcome::new(
        worst < 1e-5 && elapsed < Duration::from_secs(60),
        format!(
            "max rel err {worst:.2e} (< 1e-5) in {:.1}s (< 60s) [{}]",
            elapsed.as_secs_f64(),
            parts.join(" ")
        ),
    )
}

fn accuracy_scene(g: &Geometry, spec: &VolumeSpec, x: &Volume, ph: &EllipsoidPhantom) -> (f64, f64) {
    let truth = analytic_project(ph, g).unwrap();
    let sel = chord_mask(ph, g, 2.0 * spec.voxel_width);
    let err = |m: Model| {
        let y = ProjectorPair::new(m, g.clone(), spec.clone()).unwrap().forward(x).unwrap();
        relative_rmse(y.data(), truth.data(), Some(&sel))
    };
    (err(Model::Siddon), err(Model::Sf))
}

fn accuracy() -> Outcome {
    let start = Instant::now();
    let spec = VolumeSpec::cube(64, 1.0);
    let ph = EllipsoidPhantom::desk_for(&spec);
    let x = rasterize(&ph, &spec, 4).unwrap();
    let scenes = [
        ("parallel", Geometry::parallel(angles(48, 180.0), DetectorSpec::centered(64, 96, 1.0, 1.0))),
        (
            "cone-flat",
            Geometry::cone(angles(48, 360.0), 400.0, 800.0, DetectorSpec::centered(96, 128, 2.0, 2.0)),
        ),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, g) in &scenes {
        let (siddon, sf) = accuracy_scene(g, &spec, &x, &ph);
        pass &= siddon <= 0.02 && sf <= 0.01;
        parts.push(format!("{name}: siddon {:.3}% sf {:.3}%", 100.0 * siddon, 100.0 * sf));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(120);
    Outcome::new(
        pass,
        format!(
            "{} (limits 2% / 1%) in {:.1}s (< 120s)",
            parts.join(", "),
            elapsed.as_secs_f64()
        ),
    )
}

/// Informational: the same scene with a wider cone (source at 200 mm).
fn accuracy_wide_cone() -> String {
    let spec = VolumeSpec::cube(64, 1.0);
    let ph = EllipsoidPhantom::desk_for(&spec);
    let x = rasterize(&ph, &spec, 4).unwrap();
    let g = Geometry::cone(angles(48, 360.0), 200.0, 400.0, DetectorSpec::centered(96, 128, 2.0, 2.0));
    let (siddon, sf) = accuracy_scene(&g, &spec, &x, &ph);
    format!("sod 200 / sdd 400: siddon {:.3}% sf {:.3}%", 100.0 * siddon, 100.0 * sf)
}

fn unit_scaling() -> Outcome {
    let spec = VolumeSpec::cube(24, 1.0);
    let ph = EllipsoidPhantom::desk_for(&spec);
    let x = rasterize(&ph, &spec, 2).unwrap();
    let mut det = DetectorSpec::centered(24, 36, 1.0, 1.0);
    det.center_col += 0.3;
    det.center_row += 0.2;
    let mut worst: f64 = 0.0;
    for kind in GeometryKind::ALL {
        let g = geometry_of(kind, 12, det.clone(), half_width(&spec));
        for model in pairs_for(kind) {
            let y = ProjectorPair::new(model, g.clone(), spec.clone()).unwrap().forward(&x).unwrap();
            for k in [0.5, 3.0] {
                let pair = ProjectorPair::new(model, g.scaled(k), spec.scaled(k)).unwrap();
                let xk = Volume::from_vec(spec.scaled(k), x.data().to_vec()).unwrap();
                let yk = pair.forward(&xk).unwrap();
                let expect: Vec<f32> = y.data().iter().map(|v| v * k as f32).collect();
                worst = worst.max(relative_rmse(yk.data(), &expect, None));
            }
        }
    }
    Outcome::new(worst < 1e-5, format!("max rel deviation from k·A x {worst:.2e} (< 1e-5), k ∈ {{0.5, 3}}"))
}

fn gradient() -> Outcome {
    let spec = VolumeSpec::cube(8, 1.0);
    let mut worst: f64 = 0.0;
    for kind in [GeometryKind::Parallel, GeometryKind::ConeFlat] {
        let g = geometry_of(kind, 10, DetectorSpec::centered(10, 12, 1.0, 1.0), half_width(&spec));
        for model in [Model::Siddon, Model::Sf] {
            let pair = ProjectorPair::new(model, g.clone(), spec.clone()).unwrap();
            let x: Vec<f64> = random_vec(pair.num_voxels(), 5).iter().map(|&v| v as f64).collect();
            let y: Vec<f64> = random_vec(pair.num_samples(), 6).iter().map(|&v| v as f64).collect();
            let cost = |x: &[f64]| {
                let mut ax = vec![0.0f64; pair.num_samples()];
                pair.apply(x, &mut ax).unwrap();
                0.5 * ax.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            };
            let mut r = vec![0.0f64; pair.num_samples()];
            pair.apply(&x, &mut r).unwrap();
            r.iter_mut().zip(&y).for_each(|(a, b)| *a -= b);
            let mut grad = vec![0.0f64; pair.num_voxels()];
            pair.apply_adjoint(&r, &mut grad).unwrap();
            let h = 1e-3;
            for idx in [0, 73, 200, 255, 292, 365, 438, 511] {
                let mut xp = x.clone();
                xp[idx] += h;
                let mut xm = x.clone();
                xm[idx] -= h;
                let fd = (cost(&xp) - cost(&xm)) / (2.0 * h);
                let rel = (fd - grad[idx]).abs() / grad[idx].abs().max(1e-12);
                worst = worst.max(rel);
            }
        }
    }
    Outcome::new(
        worst < 1e-3,
        format!("max rel error vs central differences {worst:.2e} (< 1e-3) on 8 coordinates × 4 operators"),
    )
}

fn stability() -> Outcome {
    let spec = VolumeSpec::cube(16, 1.0);
    let g = Geometry::parallel(angles(36, 180.0), DetectorSpec::centered(16, 24, 1.0, 1.0));
    let x = rasterize(&EllipsoidPhantom::desk_for(&spec), &spec, 2).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for model in [Model::Siddon, Model::Sf] {
        let pair = ProjectorPair::new(model, g.clone(), spec.clone()).unwrap();
        let y = pair.forward(&x).unwrap();
        let cfg = LsConfig {
            max_iters: 2000,
            tol: 0.0,
            ..LsConfig::default()
        };
        match reconstruct_ls(&y, &pair, &cfg, None) {
            Ok(res) => {
                let c0 = res.cost_trace[0];
                let last = *res.cost_trace.last().unwrap();
                let monotone = res.cost_trace.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-6));
                let ok = res.iterations == 2000 && monotone && last < 1e-6 * c0;
                pass &= ok;
                parts.push(format!(
                    "{model:?}: {} iters, monotone {monotone}, final cost/cost0 {:.2e}",
                    res.iterations,
                    last / c0
                ));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{model:?}: {e}"));
            }
        }
    }
    Outcome::new(pass, format!("{} (need < 1e-6)", parts.join("; ")))
}

fn refinement() -> Outcome {
    let n = 64;
    let mut spec = VolumeSpec::cube(n, 1.0);
    spec.num_z = 1;
    let g = Geometry::parallel(angles(180, 180.0), DetectorSpec::centered(1, 96, 1.0, 1.0));
    let ph = EllipsoidPhantom::desk(n as f64 / 2.0);
    let truth = rasterize(&ph, &spec, 4).unwrap();
    let y = analytic_project(&ph, &g).unwrap();
    let mask = AngleMask::keep_range(180, 0..60).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for model in [Model::Siddon, Model::Sf] {
        let pair = ProjectorPair::new(model, g.clone(), spec.clone()).unwrap();
        let x0 = fbp_parallel(&zero_fill(&y, &mask).unwrap(), &pair).unwrap();
        let cfg = LsConfig {
            max_iters: 100,
            ..LsConfig::default()
        };
        let res = refine_data_consistency(&x0, &y, &mask, &pair, &cfg).unwrap();
        let before = psnr(x0.data(), truth.data(), None);
        let after = psnr(res.volume.data(), truth.data(), None);
        pass &= after > before;
        parts.push(format!("{model:?} {before:.2} -> {after:.2} dB"));
    }
    Outcome::new(pass, format!("PSNR vs rasterized truth, 60° of 180° kept: {}", parts.join(", ")))
}

fn memory_and_scaling() -> Outcome {
    let mut pass = true;
    let mut hardware_bound = false;
    let mut parts = Vec::new();

    let spec = VolumeSpec::cube(64, 1.0);
    for kind in [GeometryKind::Parallel, GeometryKind::ConeFlat] {
        let g = geometry_of(kind, 90, DetectorSpec::centered(64, 96, 1.0, 1.0), half_width(&spec));
        for model in [Model::Siddon, Model::Sf] {
            let pair = ProjectorPair::new(model, g.clone(), spec.clone()).unwrap();
            let r = bench(&pair, 1, 0).unwrap();
            let peak = r.peak_additional_bytes.unwrap_or(usize::MAX);
            let ratio = peak as f64 / (r.volume_bytes + r.projection_bytes) as f64;
            pass &= r.peak_additional_bytes.is_some() && r.within_budget();
            parts.push(format!("{model:?}/{} {ratio:.3}", kind.config_name()));
        }
    }
    let memory = format!("peak additional / (volume+projection) bytes: {} (≤ 1.25)", parts.join(", "));

    let spec = VolumeSpec::cube(256, 1.0);
    let g = Geometry::parallel(angles(180, 180.0), DetectorSpec::centered(256, 384, 1.0, 1.0));
    let pair = ProjectorPair::new(Model::Siddon, g, spec.clone()).unwrap();
    let x = rasterize(&EllipsoidPhantom::desk_for(&spec), &spec, 1).unwrap();
    let time = |threads: usize| {
        with_threads(threads, || {
            let start = Instant::now();
            let y: ProjectionSet = pair.forward(&x).unwrap();
            (start.elapsed().as_secs_f64(), y.data().iter().all(|v| v.is_finite()))
        })
    };
    let (t1, ok1) = time(1);
    let (t8, ok8) = time(8);
    let speedup = t1 / t8;
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    pass &= ok1 && ok8;
    if speedup < 3.0 {
        pass = false;
        hardware_bound = cores < 8;
    }
    let mut o = Outcome::new(
        pass,
        format!(
            "{memory}; 256³/180-view Siddon forward {t1:.1}s on 1 thread, {t8:.1}s on 8, speedup {speedup:.2}× (≥ 3×) with {cores} core(s) available"
        ),
    );
    o.hardware_bound = hardware_bound;
    o
}

fn abel_pair() -> Outcome {
    let (num_r, radius, mu) = (256, 20.0, 0.02);
    let h = 24.0 / num_r as f64;
    let f = RadialProfile::from_fn(1, num_r, h, |_, r| if r < radius { mu } else { 0.0 }).unwrap();
    let det = DetectorSpec::centered(1, 400, 1.0, 0.12);
    let p = abel_forward(&f, &det).unwrap();
    let mut worst: f64 = 0.0;
    for col in 0..det.num_cols {
        let s = det.s(col);
        if s.abs() < 0.9 * radius {
            let exact = 2.0 * mu * (radius * radius - s * s).sqrt();
            worst = worst.max((p.data()[col] as f64 - exact).abs() / exact);
        }
    }
    let fr = RadialProfile::from_vec(num_r, h, random_vec(num_r * 3, 21)).unwrap();
    let det3 = DetectorSpec::centered(3, 400, 1.0, 0.12);
    let q = ProjectionSet::from_vec(abel_geometry(det3.clone()), random_vec(3 * 400, 22)).unwrap();
    let af = abel_forward(&fr, &det3).unwrap();
    let atq = abel_backproject(&q, num_r, h).unwrap();
    let lhs: f64 = af.data().iter().zip(q.data()).map(|(a, b)| *a as f64 * *b as f64).sum();
    let rhs: f64 = fr.values().iter().zip(atq.values()).map(|(a, b)| *a as f64 * *b as f64).sum();
    let adj = (lhs - rhs).abs() / lhs.abs();
    Outcome::new(
        worst < 0.01 && adj < 1e-5,
        format!("disk max rel err {:.3}% for |s| < 0.9R (< 1%), adjoint mismatch {adj:.2e} (< 1e-5)", 100.0 * worst),
    )
}

fn fbp_calibration() -> Outcome {
    let n = 128;
    let mut spec = VolumeSpec::cube(n, 1.0);
    spec.num_z = 1;
    let g = Geometry::parallel(angles(180, 180.0), DetectorSpec::centered(1, 192, 1.0, 1.0));
    let (radius, mu) = (0.35 * n as f64, 0.02);
    let y = analytic_project(&cylinder(radius, mu), &g).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for model in [Model::Siddon, Model::Sf] {
        let pair = ProjectorPair::new(model, g.clone(), spec.clone()).unwrap();
        let x = fbp_parallel(&y, &pair).unwrap();
        let (mut sum, mut count) = (0.0, 0);
        for j in 0..n {
            for i in 0..n {
                let c = spec.voxel_center(i, j, 0);
                if c.x.hypot(c.y) < 0.8 * radius {
                    sum += x.get(i, j, 0) as f64;
                    count += 1;
                }
            }
        }
        let ratio = sum / count as f64 / mu;
        pass &= (ratio - 1.0).abs() < 0.02;
        parts.push(format!("{model:?} {ratio:.4}"));
    }
    Outcome::new(pass, format!("interior mean / μ: {} (within 2%)", parts.join(", ")))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("matched-projector adjointness", adjointness),
        ("quantitative accuracy", accuracy),
        ("unit scaling", unit_scaling),
        ("gradient correctness", gradient),
        ("iterative stability", stability),
        ("limited-angle refinement", refinement),
        ("memory bound and thread scaling", memory_and_scaling),
        ("Abel pair", abel_pair),
        ("FBP calibration", fbp_calibration),
    ];
    let mut failed = false;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = f();
        let status = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "{status} {} {name}: {} [{:.1}s]",
            i + 1,
            o.detail,
            start.elapsed().as_secs_f64()
        );
        if i == 1 {
            println!("     info: {}", accuracy_wide_cone());
        }
        if !o.pass && o.hardware_bound {
            println!("     note: thread scaling cannot be observed with fewer than 8 cores");
        }
        failed |= !o.pass && !o.hardware_bound;
    }
    if failed {
        std::process::exit(1);
    }
}
