//! The projector pair as a linear operator: batching, the vector-Jacobian
//! product contract, adjointness checks and operator-norm estimation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{ProjectionSet, Volume};
use crate::error::{Error, Result};
use crate::geometry::{Geometry, VolumeSpec};
use crate::real::Real;
use crate::{sf, siddon};

/// Name of the generator used for every seeded random draw in this module.
pub const RNG_NAME: &str = "ChaCha8Rng (rand_chacha), standard normal";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Siddon,
    Sf,
}

impl std::str::FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "siddon" => Ok(Model::Siddon),
            "sf" => Ok(Model::Sf),
            other => Err(Error::invalid("model", format!("expected siddon or sf, got {other}"))),
        }
    }
}

/// A forward projector `A` and its exact transpose for one geometry and grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorPair {
    model: Model,
    geometry: Geometry,
    volume: VolumeSpec,
}

impl ProjectorPair {
    pub fn new(model: Model, geometry: Geometry, volume: VolumeSpec) -> Result<Self> {
        geometry.validate()?;
        volume.validate()?;
        if model == Model::Sf {
            sf::check_supported(&geometry)?;
        }
        Ok(Self { model, geometry, volume })
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn volume_spec(&self) -> &VolumeSpec {
        &self.volume
    }

    pub fn num_voxels(&self) -> usize {
        self.volume.num_voxels()
    }

    pub fn num_samples(&self) -> usize {
        self.geometry.num_samples()
    }

    /// Same model and grid on a different geometry.
    pub fn with_geometry(&self, geometry: Geometry) -> Result<Self> {
        Self::new(self.model, geometry, self.volume.clone())
    }

    /// `y = A x` on raw buffers. Input and output element types are
    /// independent; accumulation is always `f64`.
    pub fn apply<I: Real, O: Real>(&self, x: &[I], y: &mut [O]) -> Result<()> {
        self.check_len(x.len(), y.len())?;
        match self.model {
            Model::Siddon => siddon::forward_into(&self.geometry, &self.volume, x, y),
            Model::Sf => sf::forward_into(&self.geometry, &self.volume, x, y),
        }
        Ok(())
    }

    /// `x = Aᵀ y` on raw buffers.
    pub fn apply_adjoint<I: Real, O: Real>(&self, y: &[I], x: &mut [O]) -> Result<()> {
        self.check_len(x.len(), y.len())?;
        match self.model {
            Model::Siddon => siddon::backproject_into(&self.geometry, &self.volume, y, x),
            Model::Sf => sf::backproject_into(&self.geometry, &self.volume, y, x),
        }
        Ok(())
    }

    fn check_len(&self, nx: usize, ny: usize) -> Result<()> {
        if nx != self.num_voxels() {
            return Err(Error::LengthMismatch {
                expected: self.num_voxels(),
                actual: nx,
            });
        }
        if ny != self.num_samples() {
            return Err(Error::LengthMismatch {
                expected: self.num_samples(),
                actual: ny,
            });
        }
        Ok(())
    }

    fn check_volume(&self, spec: &VolumeSpec) -> Result<()> {
        if *spec != self.volume {
            return Err(Error::SpecMismatch(format!(
                "volume spec {spec:?} does not match the projector's {:?}",
                self.volume
            )));
        }
        Ok(())
    }

    fn check_geometry(&self, g: &Geometry) -> Result<()> {
        if *g != self.geometry {
            return Err(Error::SpecMismatch("projection geometry does not match the projector's".into()));
        }
        Ok(())
    }

    pub fn forward(&self, x: &Volume) -> Result<ProjectionSet> {
        self.check_volume(x.spec())?;
        siddon::check_finite(x.data(), "volume")?;
        let mut y = ProjectionSet::zeros(self.geometry.clone())?;
        self.apply(x.data(), y.data_mut())?;
        Ok(y)
    }

    pub fn adjoint(&self, y: &ProjectionSet) -> Result<Volume> {
        self.check_geometry(y.geometry())?;
        siddon::check_finite(y.data(), "projections")?;
        let mut x = Volume::zeros(self.volume.clone())?;
        self.apply_adjoint(y.data(), x.data_mut())?;
        Ok(x)
    }

    /// Batched forward projection; elements are processed one after another,
    /// each with the kernel's internal parallelism.
    pub fn forward_batch(&self, xb: &Batch<VolumeSpec>) -> Result<Batch<Geometry>> {
        self.check_volume(&xb.spec)?;
        let mut out = Batch::zeros(self.geometry.clone(), xb.count)?;
        for b in 0..xb.count {
            self.apply(xb.item(b), out.item_mut(b))?;
        }
        Ok(out)
    }

    pub fn adjoint_batch(&self, yb: &Batch<Geometry>) -> Result<Batch<VolumeSpec>> {
        self.check_geometry(&yb.spec)?;
        let mut out = Batch::zeros(self.volume.clone(), yb.count)?;
        for b in 0..yb.count {
            self.apply_adjoint(yb.item(b), out.item_mut(b))?;
        }
        Ok(out)
    }

    /// Cotangent of the forward map: `x̄ = Aᵀ ȳ`. `A` is linear, so `x` only
    /// fixes the shape.
    pub fn vjp_forward(&self, x: &Volume, y_bar: &ProjectionSet) -> Result<Volume> {
        self.check_volume(x.spec())?;
        self.adjoint(y_bar)
    }

    /// Cotangent of the backprojection: `ȳ = A x̄`.
    pub fn vjp_adjoint(&self, y: &ProjectionSet, x_bar: &Volume) -> Result<ProjectionSet> {
        self.check_geometry(y.geometry())?;
        self.forward(x_bar)
    }

    /// Draws `trials` pairs of standard-normal `(x, y)` and reports the worst
    /// `|⟨Ax, y⟩ − ⟨x, Aᵀy⟩| / (‖Ax‖ ‖y‖)`.
    pub fn adjoint_check(&self, trials: usize, seed: u64) -> AdjointReport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rel_errors = Vec::with_capacity(trials);
        let mut ax = vec![0f32; self.num_samples()];
        let mut aty = vec![0f32; self.num_voxels()];
        for _ in 0..trials {
            let x = normal_vec(&mut rng, self.num_voxels());
            let y = normal_vec(&mut rng, self.num_samples());
            self.apply(&x, &mut ax).expect("buffer sizes follow the pair");
            self.apply_adjoint(&y, &mut aty).expect("buffer sizes follow the pair");
            let lhs = dot(&ax, &y);
            let rhs = dot(&x, &aty);
            let scale = norm(&ax) * norm(&y);
            let err = if scale > 0.0 { (lhs - rhs).abs() / scale } else { (lhs - rhs).abs() };
            rel_errors.push(err);
        }
        AdjointReport {
            trials,
            seed,
            rng: RNG_NAME,
            max_rel_err: rel_errors.iter().copied().fold(0.0, f64::max),
            rel_errors,
        }
    }

    /// Largest singular value of `A` by power iteration on `AᵀA`.
    pub fn estimate_opnorm(&self, iters: usize, seed: u64) -> f64 {
        *self
            .opnorm_history(iters, seed)
            .last()
            .expect("at least one iteration")
    }

    /// Estimates after 1, 2, …, `iters` power iterations (`iters` ≥ 1).
    pub fn opnorm_history(&self, iters: usize, seed: u64) -> Vec<f64> {
        let iters = iters.max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v: Vec<f64> = (0..self.num_voxels())
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        normalize(&mut v);
        let mut av = vec![0f64; self.num_samples()];
        let mut history = Vec::with_capacity(iters);
        for _ in 0..iters {
            self.apply(&v, &mut av).expect("buffer sizes follow the pair");
            self.apply_adjoint(&av, &mut v).expect("buffer sizes follow the pair");
            if normalize(&mut v) == 0.0 {
                history.push(0.0);
                return history;
            }
            self.apply(&v, &mut av).expect("buffer sizes follow the pair");
            history.push(norm(&av));
        }
        history
    }
}

#[derive(Debug, Clone)]
pub struct AdjointReport {
    pub trials: usize,
    pub seed: u64,
    pub rng: &'static str,
    pub max_rel_err: f64,
    pub rel_errors: Vec<f64>,
}

/// `count` arrays sharing one spec, stored back to back.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch<S> {
    spec: S,
    count: usize,
    data: Vec<f32>,
}

/// Something that fixes the length of one batch element.
pub trait ItemSpec: Clone {
    fn item_len(&self) -> usize;
}

impl ItemSpec for VolumeSpec {
    fn item_len(&self) -> usize {
        self.num_voxels()
    }
}

impl ItemSpec for Geometry {
    fn item_len(&self) -> usize {
        self.num_samples()
    }
}

impl<S: ItemSpec> Batch<S> {
    pub fn zeros(spec: S, count: usize) -> Result<Self> {
        Self::from_vec(spec.clone(), count, vec![0.0; count * spec.item_len()])
    }

    pub fn from_vec(spec: S, count: usize, data: Vec<f32>) -> Result<Self> {
        if count == 0 {
            return Err(Error::invalid("batch", "batch size must be at least 1"));
        }
        let expected = count * spec.item_len();
        if data.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: data.len(),
            });
        }
        Ok(Self { spec, count, data })
    }

    pub fn spec(&self) -> &S {
        &self.spec
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn item(&self, b: usize) -> &[f32] {
        let n = self.spec.item_len();
        &self.data[b * n..(b + 1) * n]
    }

    pub fn item_mut(&mut self, b: usize) -> &mut [f32] {
        let n = self.spec.item_len();
        &mut self.data[b * n..(b + 1) * n]
    }
}

impl Batch<VolumeSpec> {
    pub fn from_volumes(volumes: &[Volume]) -> Result<Self> {
        let first = volumes.first().ok_or_else(|| Error::invalid("batch", "empty batch"))?;
        let spec = first.spec().clone();
        let mut data = Vec::with_capacity(volumes.len() * spec.num_voxels());
        for v in volumes {
            if *v.spec() != spec {
                return Err(Error::SpecMismatch("batch elements must share one volume spec".into()));
            }
            data.extend_from_slice(v.data());
        }
        Self::from_vec(spec, volumes.len(), data)
    }

    pub fn volume(&self, b: usize) -> Volume {
        Volume::from_vec(self.spec.clone(), self.item(b).to_vec()).expect("batch invariants")
    }
}

impl Batch<Geometry> {
    pub fn from_projections(sets: &[ProjectionSet]) -> Result<Self> {
        let first = sets.first().ok_or_else(|| Error::invalid("batch", "empty batch"))?;
        let g = first.geometry().clone();
        let mut data = Vec::with_capacity(sets.len() * g.num_samples());
        for p in sets {
            if *p.geometry() != g {
                return Err(Error::SpecMismatch("batch elements must share one geometry".into()));
            }
            data.extend_from_slice(p.data());
        }
        Self::from_vec(g, sets.len(), data)
    }

    pub fn projections(&self, b: usize) -> ProjectionSet {
        ProjectionSet::from_vec(self.spec.clone(), self.item(b).to_vec()).expect("batch invariants")
    }
}

/// Runs `f` on a pool of `threads` workers (0 = all cores).
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    if threads == 0 {
        return f();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
        .install(f)
}

fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f32> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

pub(crate) fn dot<A: Real, B: Real>(a: &[A], b: &[B]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.to_f64() * y.to_f64()).sum()
}

pub(crate) fn norm<A: Real>(a: &[A]) -> f64 {
    dot(a, a).sqrt()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = norm(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}
