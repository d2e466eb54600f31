//! Command-line front end. [`run`] parses `argv` (including the program name)
//! and returns the process exit code: 0 on success, 2 on usage errors and 1
//! on runtime errors. Diagnostics go to stderr; written paths and reports go
//! to stdout.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::alloc_tracker;
use crate::data::{read_array, write_array, write_atomic, AngleMask, ProjectionSet, Volume};
use crate::error::{Error, Result};
use crate::geometry::{parse_config, Geometry, VolumeSpec};
use crate::operator::{with_threads, Model, ProjectorPair};
use crate::phantom::{analytic_project, rasterize, EllipsoidPhantom};
use crate::recon::{
    complete_sinogram, fbp_parallel, reconstruct_ls, refine_data_consistency, zero_fill, LsConfig, LsResult, Step,
};

/// Adjointness threshold for `adjoint-check`'s exit status.
pub const ADJOINT_TOLERANCE: f64 = 1e-5;

#[derive(Parser, Debug)]
#[command(name = "ctproj", version, about = "Matched X-ray CT projectors and reference reconstructions")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand, Debug)]
enum Verb {
    /// Forward project a volume.
    Project(IoArgs),
    /// Apply the exact transpose to a projection set.
    Backproject(IoArgs),
    /// Parallel-beam filtered backprojection.
    Fbp(FbpArgs),
    /// Least-squares reconstruction by gradient descent.
    ReconLs(LsArgs),
    /// Least squares on the kept views of a masked scan, started from --x0.
    Refine(RefineArgs),
    /// Fill masked views with the forward projection of a volume.
    Complete(CompleteArgs),
    /// Rasterize an ellipsoid phantom, or project it analytically.
    Phantom(PhantomArgs),
    /// Randomized ⟨Ax, y⟩ = ⟨x, Aᵀy⟩ test.
    AdjointCheck(AdjointArgs),
    /// Time forward and back projection and report peak heap growth.
    Bench(BenchArgs),
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum ModelArg {
    Siddon,
    Sf,
}

impl From<ModelArg> for Model {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Siddon => Model::Siddon,
            ModelArg::Sf => Model::Sf,
        }
    }
}

#[derive(Args, Debug)]
struct Common {
    /// Geometry and volume configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum, default_value = "siddon")]
    model: ModelArg,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Args, Debug)]
struct IoArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct FbpArgs {
    #[command(flatten)]
    io: IoArgs,
    /// Views to keep (JSON 0/1 array, inline or a file); others are zeroed.
    #[arg(long)]
    mask: Option<String>,
}

#[derive(Args, Debug)]
struct SolverArgs {
    #[arg(long, default_value_t = 500)]
    iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Fixed step size; automatic when omitted.
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    nonneg: bool,
    /// Write the cost trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

impl SolverArgs {
    fn config(&self) -> LsConfig {
        LsConfig {
            max_iters: self.iters,
            tol: self.tol,
            step: self.step.map_or(Step::Auto, Step::Fixed),
            nonneg: self.nonneg,
        }
    }
}

#[derive(Args, Debug)]
struct LsArgs {
    #[command(flatten)]
    io: IoArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Initial volume (zero when omitted).
    #[arg(long)]
    x0: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RefineArgs {
    #[command(flatten)]
    io: IoArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    x0: PathBuf,
    #[arg(long)]
    mask: String,
}

#[derive(Args, Debug)]
struct CompleteArgs {
    /// Volume whose projections fill the masked views.
    #[command(flatten)]
    io: IoArgs,
    /// Measured projection set.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    mask: String,
}

#[derive(Args, Debug)]
struct PhantomArgs {
    #[arg(long)]
    config: PathBuf,
    /// Ellipsoid list (JSON); the desk phantom sized to the grid when omitted.
    #[arg(long)]
    phantom: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    supersample: usize,
    /// Write exact line integrals for the configured geometry instead.
    #[arg(long)]
    analytic: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Args, Debug)]
struct AdjointArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 3)]
    repeat: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.verb) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn execute(verb: Verb) -> Result<i32> {
    match verb {
        Verb::Project(a) => {
            let pair = load_pair(&a.common)?;
            let x = read_volume(&a.input, pair.volume_spec())?;
            let y = with_threads(a.common.threads, || pair.forward(&x))?;
            save(&y, &a.out)?;
        }
        Verb::Backproject(a) => {
            let pair = load_pair(&a.common)?;
            let y = read_projections(&a.input, pair.geometry())?;
            let x = with_threads(a.common.threads, || pair.adjoint(&y))?;
            save(&x, &a.out)?;
        }
        Verb::Fbp(a) => {
            let pair = load_pair(&a.io.common)?;
            let mut y = read_projections(&a.io.input, pair.geometry())?;
            if let Some(m) = &a.mask {
                y = zero_fill(&y, &load_mask(m)?)?;
            }
            let x = with_threads(a.io.common.threads, || fbp_parallel(&y, &pair))?;
            save(&x, &a.io.out)?;
        }
        Verb::ReconLs(a) => {
            let pair = load_pair(&a.io.common)?;
            let y = read_projections(&a.io.input, pair.geometry())?;
            let x0 = a.x0.as_deref().map(|p| read_volume(p, pair.volume_spec())).transpose()?;
            let cfg = a.solver.config();
            cfg.validate()?;
            let res = with_threads(a.io.common.threads, || reconstruct_ls(&y, &pair, &cfg, x0.as_ref()))?;
            finish_ls(&res, &a.solver, &a.io.out)?;
        }
        Verb::Refine(a) => {
            let pair = load_pair(&a.io.common)?;
            let y = read_projections(&a.io.input, pair.geometry())?;
            let x0 = read_volume(&a.x0, pair.volume_spec())?;
            let mask = load_mask(&a.mask)?;
            let cfg = a.solver.config();
            cfg.validate()?;
            let res = with_threads(a.io.common.threads, || refine_data_consistency(&x0, &y, &mask, &pair, &cfg))?;
            finish_ls(&res, &a.solver, &a.io.out)?;
        }
        Verb::Complete(a) => {
            let pair = load_pair(&a.io.common)?;
            let x = read_volume(&a.io.input, pair.volume_spec())?;
            let y = read_projections(&a.data, pair.geometry())?;
            let mask = load_mask(&a.mask)?;
            let out = with_threads(a.io.common.threads, || complete_sinogram(&x, &y, &mask, &pair))?;
            save(&out, &a.io.out)?;
        }
        Verb::Phantom(a) => {
            let (g, spec) = load_config(&a.config)?;
            let ph = match &a.phantom {
                Some(p) => EllipsoidPhantom::from_json(&fs::read_to_string(p)?)?,
                None => EllipsoidPhantom::desk_for(&spec),
            };
            if a.analytic {
                g.validate()?;
                let y = with_threads(a.threads, || analytic_project(&ph, &g))?;
                save(&y, &a.out)?;
            } else {
                let x = with_threads(a.threads, || rasterize(&ph, &spec, a.supersample))?;
                save(&x, &a.out)?;
            }
        }
        Verb::AdjointCheck(a) => {
            let pair = load_pair(&a.common)?;
            let report = with_threads(a.common.threads, || pair.adjoint_check(a.trials, a.seed));
            println!("trials {} seed {} rng {}", report.trials, report.seed, report.rng);
            println!("maxRelErr {:e}", report.max_rel_err);
            return Ok(if report.max_rel_err < ADJOINT_TOLERANCE { 0 } else { 1 });
        }
        Verb::Bench(a) => {
            let pair = load_pair(&a.common)?;
            let report = with_threads(a.common.threads, || bench(&pair, a.repeat, a.seed))?;
            print!("{report}");
            return Ok(if report.within_budget() { 0 } else { 1 });
        }
    }
    Ok(0)
}

fn load_config(path: &Path) -> Result<(Geometry, VolumeSpec)> {
    parse_config(&fs::read_to_string(path)?)
}

fn load_pair(c: &Common) -> Result<ProjectorPair> {
    let (g, spec) = load_config(&c.config)?;
    ProjectorPair::new(c.model.into(), g, spec)
}

fn load_mask(arg: &str) -> Result<AngleMask> {
    if arg.trim_start().starts_with('[') {
        AngleMask::from_json(arg)
    } else {
        AngleMask::from_json(&fs::read_to_string(arg)?)
    }
}

fn read_volume(path: &Path, spec: &VolumeSpec) -> Result<Volume> {
    let v = read_array(path)?.into_volume()?;
    if v.spec() != spec {
        return Err(Error::SpecMismatch(format!(
            "{} does not match the configured volume",
            path.display()
        )));
    }
    Ok(v)
}

fn read_projections(path: &Path, g: &Geometry) -> Result<ProjectionSet> {
    let y = read_array(path)?.into_projections()?;
    if y.geometry() != g {
        return Err(Error::SpecMismatch(format!(
            "{} does not match the configured geometry",
            path.display()
        )));
    }
    Ok(y)
}

fn save<A: crate::data::ArrayRef>(a: &A, out: &Path) -> Result<()> {
    write_array(a, out)?;
    println!("{}", out.display());
    Ok(())
}

fn finish_ls(res: &LsResult, solver: &SolverArgs, out: &Path) -> Result<()> {
    eprintln!(
        "iterations {} converged {} cost {:e} -> {:e}",
        res.iterations,
        res.converged,
        res.cost_trace[0],
        res.cost_trace.last().copied().unwrap_or_default()
    );
    if let Some(t) = &solver.trace {
        let mut csv = String::from("iteration,cost\n");
        for (i, c) in res.cost_trace.iter().enumerate() {
            csv.push_str(&format!("{i},{c:e}\n"));
        }
        write_atomic(t, csv.as_bytes())?;
        println!("{}", t.display());
    }
    save(&res.volume, out)
}

/// Timings and heap growth of one `bench` run.
#[derive(Debug, Clone)]
pub struct BenchReport {
    pub forward_median_s: f64,
    pub backward_median_s: f64,
    /// Largest heap growth during a single forward or back projection,
    /// inputs excluded. `None` when the tracking allocator is not installed.
    pub peak_additional_bytes: Option<usize>,
    pub volume_bytes: usize,
    pub projection_bytes: usize,
}

impl BenchReport {
    pub fn budget_bytes(&self) -> f64 {
        1.25 * (self.volume_bytes + self.projection_bytes) as f64
    }

    pub fn within_budget(&self) -> bool {
        self.peak_additional_bytes
            .is_none_or(|p| p as f64 <= self.budget_bytes())
    }
}

impl std::fmt::Display for BenchReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "forward median {:.6} s", self.forward_median_s)?;
        writeln!(f, "backproject median {:.6} s", self.backward_median_s)?;
        writeln!(f, "volume bytes {}", self.volume_bytes)?;
        writeln!(f, "projection bytes {}", self.projection_bytes)?;
        match self.peak_additional_bytes {
            Some(p) => writeln!(
                f,
                "peak additional bytes {p} ({:.3} of volume+projection)",
                p as f64 / (self.volume_bytes + self.projection_bytes) as f64
            ),
            None => writeln!(f, "peak additional bytes untracked"),
        }
    }
}

/// Runs forward and back projection `repeat` times on standard-normal input.
pub fn bench(pair: &ProjectorPair, repeat: usize, seed: u64) -> Result<BenchReport> {
    let repeat = repeat.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Volume::from_vec(
        pair.volume_spec().clone(),
        (0..pair.num_voxels()).map(|_| StandardNormal.sample(&mut rng)).collect(),
    )?;
    let mut y = ProjectionSet::zeros(pair.geometry().clone())?;
    let (mut tf, mut tb, mut peak) = (Vec::new(), Vec::new(), 0usize);
    for _ in 0..repeat {
        let start = Instant::now();
        let (out, bytes) = alloc_tracker::measure_peak(|| pair.forward(&x));
        tf.push(start.elapsed().as_secs_f64());
        peak = peak.max(bytes);
        y = out?;

        let start = Instant::now();
        let (out, bytes) = alloc_tracker::measure_peak(|| pair.adjoint(&y));
        tb.push(start.elapsed().as_secs_f64());
        peak = peak.max(bytes);
        drop(out?);
    }
    Ok(BenchReport {
        forward_median_s: median(&mut tf),
        backward_median_s: median(&mut tb),
        peak_additional_bytes: alloc_tracker::is_installed().then_some(peak),
        volume_bytes: x.byte_len(),
        projection_bytes: y.byte_len(),
    })
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
