//! Reference reconstructions built on a [`ProjectorPair`]: parallel-beam
//! filtered backprojection, least squares by gradient descent, masked
//! data-consistency refinement and sinogram completion.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::data::{AngleMask, ProjectionSet, Volume};
use crate::error::{Error, Result};
use crate::geometry::GeometryKind;
use crate::operator::{dot, ProjectorPair};

/// Empirical correction to the discrete FBP scale, fixed on a uniform disk.
pub const FBP_CALIBRATION: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Step {
    /// `0.95 / σ²` with `σ` from 50 power iterations.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsConfig {
    pub max_iters: usize,
    /// Stop once `‖Aᵀ(Ax − y)‖ / ‖Aᵀy‖` falls below this.
    pub tol: f64,
    pub step: Step,
    pub nonneg: bool,
}

impl Default for LsConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            tol: 1e-6,
            step: Step::Auto,
            nonneg: false,
        }
    }
}

impl LsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::invalid("maxIters", "must be at least 1"));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::invalid("tol", "must be nonnegative"));
        }
        if let Step::Fixed(eta) = self.step {
            if !(eta.is_finite() && eta > 0.0) {
                return Err(Error::invalid("step", "must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LsResult {
    pub volume: Volume,
    /// `½‖Ax − y‖²` at the start and after every iteration.
    pub cost_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub step: f64,
}

const OPNORM_ITERS: usize = 50;
const STEP_SAFETY: f64 = 0.95;

/// Dimensionless Ram-Lak kernel `τ²·h(nτ)` on the sample lattice.
fn ramp_kernel(n: i64) -> f64 {
    if n == 0 {
        0.25
    } else if n % 2 == 0 {
        0.0
    } else {
        -1.0 / (PI * PI * (n * n) as f64)
    }
}

/// Ramp-filters every detector row of `y` by zero-padded FFT convolution.
pub fn ramp_filter(y: &ProjectionSet) -> ProjectionSet {
    let ncols = y.geometry().detector.num_cols;
    let len = (2 * ncols).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);

    let mut kernel: Vec<Complex<f64>> = (0..len)
        .map(|k| {
            let n = if k <= len / 2 { k as i64 } else { k as i64 - len as i64 };
            Complex::new(ramp_kernel(n), 0.0)
        })
        .collect();
    fwd.process(&mut kernel);

    let mut out = y.clone();
    let mut buf = vec![Complex::new(0.0, 0.0); len];
    for row in out.data_mut().chunks_mut(ncols) {
        buf.iter_mut().for_each(|b| *b = Complex::new(0.0, 0.0));
        for (b, &v) in buf.iter_mut().zip(row.iter()) {
            b.re = v as f64;
        }
        fwd.process(&mut buf);
        buf.iter_mut().zip(&kernel).for_each(|(b, k)| *b *= k);
        inv.process(&mut buf);
        for (o, b) in row.iter_mut().zip(&buf) {
            *o = (b.re / len as f64) as f32;
        }
    }
    out
}

/// Filtered backprojection for parallel-beam data over ≈180°, using the
/// pair's transpose as the backprojector.
pub fn fbp_parallel(y: &ProjectionSet, pair: &ProjectorPair) -> Result<Volume> {
    let g = pair.geometry();
    if g.kind() != GeometryKind::Parallel {
        return Err(Error::Unsupported(format!(
            "filtered backprojection needs parallel-beam data, got {}",
            g.kind().config_name()
        )));
    }
    if y.geometry() != g {
        return Err(Error::SpecMismatch("projection geometry differs from the pair".into()));
    }
    let q = ramp_filter(y);
    let mut x = pair.adjoint(&q)?;
    let det = &g.detector;
    let spec = pair.volume_spec();
    // Aᵀ sums ray lengths; the density factor turns that into a per-view
    // sample of the filtered projection at the voxel.
    let density = det.pixel_width * det.pixel_height / (spec.voxel_width.powi(2) * spec.voxel_height);
    let scale = PI / (g.num_views() as f64 * det.pixel_width) * density * FBP_CALIBRATION;
    x.data_mut().iter_mut().for_each(|v| *v = (*v as f64 * scale) as f32);
    Ok(x)
}

/// Copy of `y` with the masked-out views set to zero.
pub fn zero_fill(y: &ProjectionSet, mask: &AngleMask) -> Result<ProjectionSet> {
    mask.check(y.geometry().num_views())?;
    let mut out = y.clone();
    for v in 0..mask.len() {
        if !mask.is_kept(v) {
            out.view_mut(v).fill(0.0);
        }
    }
    Ok(out)
}

/// Gradient descent on `½‖Ax − y‖²` from `x0` (zero when `None`). Iterates
/// are held in f64.
pub fn reconstruct_ls(y: &ProjectionSet, pair: &ProjectorPair, cfg: &LsConfig, x0: Option<&Volume>) -> Result<LsResult> {
    cfg.validate()?;
    if y.geometry() != pair.geometry() {
        return Err(Error::SpecMismatch("projection geometry differs from the pair".into()));
    }
    let mut x: Vec<f64> = match x0 {
        Some(v) => {
            if v.spec() != pair.volume_spec() {
                return Err(Error::SpecMismatch("initial volume differs from the pair's grid".into()));
            }
            v.data().iter().map(|&a| a as f64).collect()
        }
        None => vec![0.0; pair.num_voxels()],
    };
    let yd: Vec<f64> = y.data().iter().map(|&a| a as f64).collect();

    let eta = match cfg.step {
        Step::Fixed(eta) => eta,
        Step::Auto => {
            let sigma = pair.estimate_opnorm(OPNORM_ITERS, 0);
            if sigma == 0.0 {
                0.0
            } else {
                STEP_SAFETY / (sigma * sigma)
            }
        }
    };

    let mut aty = vec![0.0f64; pair.num_voxels()];
    pair.apply_adjoint(&yd, &mut aty)?;
    let grad_ref = {
        let n = dot(&aty, &aty).sqrt();
        if n > 0.0 {
            n
        } else {
            1.0
        }
    };

    let mut r = vec![0.0f64; pair.num_samples()];
    let mut grad = vec![0.0f64; pair.num_voxels()];
    let residual = |x: &[f64], r: &mut [f64], grad: &mut [f64]| -> Result<f64> {
        pair.apply(x, r)?;
        r.iter_mut().zip(&yd).for_each(|(a, b)| *a -= b);
        pair.apply_adjoint(r, grad)?;
        Ok(0.5 * dot(r, r))
    };

    let mut cost = residual(&x, &mut r, &mut grad)?;
    let mut trace = vec![cost];
    let mut converged = false;
    let mut rises = 0;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        if dot(&grad, &grad).sqrt() / grad_ref < cfg.tol || eta == 0.0 {
            converged = true;
            break;
        }
        for (xi, gi) in x.iter_mut().zip(&grad) {
            *xi -= eta * gi;
            if cfg.nonneg && *xi < 0.0 {
                *xi = 0.0;
            }
        }
        let next = residual(&x, &mut r, &mut grad)?;
        iterations += 1;
        trace.push(next);
        if matches!(cfg.step, Step::Fixed(_)) {
            rises = if next > cost { rises + 1 } else { 0 };
            if rises >= 3 {
                return Err(Error::DivergenceDetected(iterations));
            }
        }
        cost = next;
    }
    if !converged && dot(&grad, &grad).sqrt() / grad_ref < cfg.tol {
        converged = true;
    }
    let data = x.iter().map(|&v| v as f32).collect();
    Ok(LsResult {
        volume: Volume::from_vec(pair.volume_spec().clone(), data)?,
        cost_trace: trace,
        iterations,
        converged,
        step: eta,
    })
}

/// Least squares on the kept views only, started from `x0`. `y` carries the
/// full view list; masked views are ignored.
pub fn refine_data_consistency(
    x0: &Volume,
    y: &ProjectionSet,
    mask: &AngleMask,
    pair: &ProjectorPair,
    cfg: &LsConfig,
) -> Result<LsResult> {
    mask.check(pair.geometry().num_views())?;
    let kept = crate::data::apply_mask(y, mask)?;
    let sub = pair.with_geometry(kept.geometry().clone())?;
    reconstruct_ls(&kept, &sub, cfg, Some(x0))
}

/// Measured data on kept views, forward projection of `x` on masked views.
pub fn complete_sinogram(x: &Volume, y: &ProjectionSet, mask: &AngleMask, pair: &ProjectorPair) -> Result<ProjectionSet> {
    if y.geometry() != pair.geometry() {
        return Err(Error::SpecMismatch("projection geometry differs from the pair".into()));
    }
    if x.spec() != pair.volume_spec() {
        return Err(Error::SpecMismatch("volume differs from the pair's grid".into()));
    }
    mask.check(y.geometry().num_views())?;
    let missing: Vec<usize> = (0..mask.len()).filter(|&v| !mask.is_kept(v)).collect();
    let mut out = y.clone();
    if missing.is_empty() {
        return Ok(out);
    }
    let sub = pair.with_geometry(pair.geometry().select_views(&missing))?;
    let filled = sub.forward(x)?;
    for (k, &v) in missing.iter().enumerate() {
        out.view_mut(v).copy_from_slice(filled.view(k));
    }
    Ok(out)
}
