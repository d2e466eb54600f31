use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ctproj::geometry::config_to_json;
use ctproj::{read_array, write_array, DetectorSpec, Geometry, Model, ProjectorPair, Volume, VolumeSpec};
use tempfile::TempDir;

fn ctproj(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctproj")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

struct Scene {
    dir: TempDir,
    spec: VolumeSpec,
    geometry: Geometry,
}

impl Scene {
    fn parallel() -> Self {
        let angles = (0..12).map(|i| i as f64 * 15.0).collect();
        Self::with(Geometry::parallel(angles, DetectorSpec::centered(4, 12, 1.0, 1.0)))
    }

    fn cone() -> Self {
        let angles = (0..12).map(|i| i as f64 * 30.0).collect();
        Self::with(Geometry::cone(angles, 40.0, 80.0, DetectorSpec::centered(6, 12, 2.0, 2.0)))
    }

    fn with(geometry: Geometry) -> Self {
        Self::sized(geometry, VolumeSpec::new(8, 8, 4, 1.0, 1.0))
    }

    fn sized(geometry: Geometry, spec: VolumeSpec) -> Self {
        let dir = TempDir::new().unwrap();
        fs::write(dir.path().join("config.json"), config_to_json(&geometry, &spec).to_string()).unwrap();
        Self { dir, spec, geometry }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn arg(&self, name: &str) -> String {
        self.path(name).to_str().unwrap().to_string()
    }

    fn config(&self) -> String {
        self.arg("config.json")
    }

    fn volume(&self) -> Volume {
        let data = (0..self.spec.num_voxels()).map(|i| ((i * 7) % 11) as f32 / 11.0).collect();
        Volume::from_vec(self.spec.clone(), data).unwrap()
    }

    fn write_volume(&self, name: &str) -> String {
        write_array(&self.volume(), &self.path(name)).unwrap();
        self.arg(name)
    }

    fn pair(&self, model: Model) -> ProjectorPair {
        ProjectorPair::new(model, self.geometry.clone(), self.spec.clone()).unwrap()
    }
}

fn read_volume(p: &Path) -> Volume {
    read_array(p).unwrap().into_volume().unwrap()
}

fn read_projections(p: &Path) -> ctproj::ProjectionSet {
    read_array(p).unwrap().into_projections().unwrap()
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

#[test]
fn project_and_backproject_match_the_library() {
    let s = Scene::cone();
    let x = s.write_volume("x.json");
    for (model, name) in [(Model::Siddon, "siddon"), (Model::Sf, "sf")] {
        let o = ctproj(&["project", "--config", &s.config(), "--model", name, "--in", &x, "--out", &s.arg("y.json")]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert_eq!(stdout(&o).trim(), s.arg("y.json"));
        let y = read_projections(&s.path("y.json"));
        let expected = s.pair(model).forward(&s.volume()).unwrap();
        assert_eq!(y.data(), expected.data());

        let o = ctproj(&["backproject", "--config", &s.config(), "--model", name, "--in", &s.arg("y.json"), "--out", &s.arg("b.json")]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let b = read_volume(&s.path("b.json"));
        assert_eq!(b.data(), s.pair(model).adjoint(&expected).unwrap().data());
    }
}

#[test]
fn repeated_runs_are_bit_identical_across_thread_counts() {
    let s = Scene::cone();
    let x = s.write_volume("x.json");
    let mut raws = Vec::new();
    for (i, threads) in ["1", "1", "3"].iter().enumerate() {
        let out = s.arg(&format!("y{i}.json"));
        let o = ctproj(&["project", "--config", &s.config(), "--threads", threads, "--in", &x, "--out", &out]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        raws.push(fs::read(s.path(&format!("y{i}.raw"))).unwrap());
    }
    assert_eq!(raws[0], raws[1]);
    assert_eq!(raws[0], raws[2]);
}

#[test]
fn usage_errors_exit_2_and_name_the_flag() {
    let s = Scene::parallel();
    let o = ctproj(&["project", "--config", &s.config(), "--out", &s.arg("y.json")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--in"), "{}", stderr(&o));

    let o = ctproj(&["project", "--config", &s.config(), "--model", "joseph", "--in", "a", "--out", "b"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--model"), "{}", stderr(&o));

    let o = ctproj(&["transmogrify"]);
    assert_eq!(o.status.code(), Some(2));

    assert_eq!(ctproj(&["--help"]).status.code(), Some(0));
    assert_eq!(ctproj(&["--version"]).status.code(), Some(0));
}

#[test]
fn runtime_errors_exit_1_without_partial_outputs() {
    let s = Scene::parallel();
    let before = listing(s.dir.path());

    let o = ctproj(&["project", "--config", &s.config(), "--in", &s.arg("missing.json"), "--out", &s.arg("y.json")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error:"), "{}", stderr(&o));
    assert_eq!(listing(s.dir.path()), before);

    // a volume on a different grid is rejected before anything is written
    let other = Volume::zeros(VolumeSpec::cube(5, 1.0)).unwrap();
    write_array(&other, &s.path("other.json")).unwrap();
    let before = listing(s.dir.path());
    let o = ctproj(&["project", "--config", &s.config(), "--in", &s.arg("other.json"), "--out", &s.arg("y.json")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("does not match"), "{}", stderr(&o));
    assert_eq!(listing(s.dir.path()), before);

    fs::write(s.path("bad.json"), r#"{"geometry":"parallel","numAngles":4,"bogus":1}"#).unwrap();
    let before = listing(s.dir.path());
    let x = s.arg("other.json");
    let o = ctproj(&["project", "--config", &s.arg("bad.json"), "--in", &x, "--out", &s.arg("y.json")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bogus"), "{}", stderr(&o));
    assert_eq!(listing(s.dir.path()), before);
}

#[test]
fn adjoint_check_reports_max_relative_error() {
    for s in [Scene::parallel(), Scene::cone()] {
        for model in ["siddon", "sf"] {
            let o = ctproj(&["adjoint-check", "--config", &s.config(), "--model", model, "--trials", "5", "--seed", "3"]);
            assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
            let out = stdout(&o);
            let line = out.lines().find(|l| l.starts_with("maxRelErr")).unwrap();
            let err: f64 = line.split_whitespace().nth(1).unwrap().parse().unwrap();
            assert!(err < 1e-5, "{line}");
            assert!(out.contains("trials 5 seed 3"), "{out}");
        }
    }
}

#[test]
fn bench_reports_timings_and_tracked_memory() {
    // the heap budget is relative, so the grid must dwarf fixed overheads
    let angles = (0..32).map(|i| i as f64 * 11.25).collect();
    let g = Geometry::cone(angles, 64.0, 128.0, DetectorSpec::centered(32, 32, 2.0, 2.0));
    let s = Scene::sized(g, VolumeSpec::cube(32, 1.0));
    let o = ctproj(&["bench", "--config", &s.config(), "--model", "sf", "--repeat", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let out = stdout(&o);
    for key in ["forward median", "backproject median", "volume bytes", "projection bytes"] {
        assert!(out.contains(key), "{out}");
    }
    assert!(out.contains("peak additional bytes") && !out.contains("untracked"), "{out}");
}

#[test]
fn recon_ls_writes_volume_and_trace() {
    let s = Scene::parallel();
    let y = s.pair(Model::Siddon).forward(&s.volume()).unwrap();
    write_array(&y, &s.path("y.json")).unwrap();
    let o = ctproj(&[
        "recon-ls", "--config", &s.config(), "--in", &s.arg("y.json"), "--out", &s.arg("x.json"),
        "--iters", "20", "--trace", &s.arg("trace.csv"),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(s.path("trace.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("iteration,cost"));
    let costs: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(costs.len(), 21);
    assert!(costs.windows(2).all(|w| w[1] <= w[0]), "{costs:?}");
    assert_eq!(read_volume(&s.path("x.json")).spec(), &s.spec);

    let o = ctproj(&["recon-ls", "--config", &s.config(), "--in", &s.arg("y.json"), "--out", &s.arg("z.json"), "--tol=-1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!s.path("z.json").exists());
}

#[test]
fn masks_are_accepted_inline_or_from_a_file() {
    let s = Scene::parallel();
    let y = s.pair(Model::Siddon).forward(&s.volume()).unwrap();
    write_array(&y, &s.path("y.json")).unwrap();
    let mask = "[1,1,1,1,1,1,0,0,0,0,0,0]";
    fs::write(s.path("mask.json"), mask).unwrap();

    let run = |m: &str, out: &str| {
        let o = ctproj(&["fbp", "--config", &s.config(), "--in", &s.arg("y.json"), "--out", &s.arg(out), "--mask", m]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        fs::read(s.path(out).with_extension("raw")).unwrap()
    };
    assert_eq!(run(mask, "a.json"), run(&s.arg("mask.json"), "b.json"));

    let o = ctproj(&["fbp", "--config", &s.config(), "--in", &s.arg("y.json"), "--out", &s.arg("c.json"), "--mask", "[1,0]"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!s.path("c.json").exists());
}

#[test]
fn fbp_rejects_cone_geometry() {
    let s = Scene::cone();
    let y = s.pair(Model::Siddon).forward(&s.volume()).unwrap();
    write_array(&y, &s.path("y.json")).unwrap();
    let o = ctproj(&["fbp", "--config", &s.config(), "--in", &s.arg("y.json"), "--out", &s.arg("x.json")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!s.path("x.json").exists());
}

#[test]
fn refine_and_complete_keep_measured_views() {
    let s = Scene::parallel();
    let pair = s.pair(Model::Siddon);
    let y = pair.forward(&s.volume()).unwrap();
    write_array(&y, &s.path("y.json")).unwrap();
    let x0 = s.write_volume("x0.json");
    let mask = "[1,1,1,1,1,1,1,1,0,0,0,0]";

    let o = ctproj(&[
        "refine", "--config", &s.config(), "--in", &s.arg("y.json"), "--x0", &x0, "--mask", mask,
        "--out", &s.arg("r.json"), "--iters", "5",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    // starting at the exact solution leaves nothing to fit
    let r = read_volume(&s.path("r.json"));
    let drift = r.data().iter().zip(s.volume().data()).map(|(a, b)| (a - b).abs()).fold(0.0f32, f32::max);
    assert!(drift < 1e-4, "{drift}");

    let zero = Volume::zeros(s.spec.clone()).unwrap();
    write_array(&zero, &s.path("zero.json")).unwrap();
    let o = ctproj(&[
        "complete", "--config", &s.config(), "--in", &s.arg("zero.json"), "--data", &s.arg("y.json"),
        "--mask", mask, "--out", &s.arg("c.json"),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let c = read_projections(&s.path("c.json"));
    for v in 0..12 {
        if v < 8 {
            assert_eq!(c.view(v), y.view(v));
        } else {
            assert!(c.view(v).iter().all(|&p| p == 0.0));
        }
    }
}

#[test]
fn phantom_rasterizes_or_projects_analytically() {
    let s = Scene::cone();
    let phantom = r#"[{"center":[0,0,0],"semiAxes":[3,3,1.5],"rotationZ":0,"density":0.5}]"#;
    fs::write(s.path("ph.json"), phantom).unwrap();

    let o = ctproj(&["phantom", "--config", &s.config(), "--phantom", &s.arg("ph.json"), "--out", &s.arg("v.json")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = read_volume(&s.path("v.json"));
    assert_eq!(v.get(4, 4, 2), 0.5);
    assert_eq!(v.get(0, 0, 0), 0.0);

    let o = ctproj(&["phantom", "--config", &s.config(), "--analytic", "--phantom", &s.arg("ph.json"), "--out", &s.arg("p.json")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let p = read_projections(&s.path("p.json"));
    assert_eq!(p.geometry(), &s.geometry);
    let ph = ctproj::EllipsoidPhantom::from_json(phantom).unwrap();
    assert_eq!(p.data(), ctproj::phantom::analytic_project(&ph, &s.geometry).unwrap().data());
    assert!(p.data().iter().all(|&v| (0.0..=3.0).contains(&v)));

    let o = ctproj(&["phantom", "--config", &s.config(), "--out", &s.arg("desk.json")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(read_volume(&s.path("desk.json")).data().iter().any(|&d| d != 0.0));

    fs::write(s.path("bad.json"), r#"[{"center":[0,0,0],"semiAxes":[1,1,1],"density":1,"color":2}]"#).unwrap();
    let o = ctproj(&["phantom", "--config", &s.config(), "--phantom", &s.arg("bad.json"), "--out", &s.arg("q.json")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!s.path("q.json").exists());
}
