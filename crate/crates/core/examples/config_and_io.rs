//! Configuration documents and the header + raw array format.

use ctproj::geometry::config_to_json;
use ctproj::{parse_config, read_array, write_array, Array, DetectorSpec, Geometry, Model, ProjectorPair, Volume, VolumeSpec};

fn main() -> ctproj::Result<()> {
    let g = Geometry::cone_curved(vec![0.0, 45.0, 90.0], 100.0, 200.0, DetectorSpec::centered(8, 16, 2.0, 2.0));
    let spec = VolumeSpec::new(16, 16, 8, 1.0, 2.0).with_offset(0.0, 0.0, 1.0);
    let text = serde_json::to_string_pretty(&config_to_json(&g, &spec))?;
    println!("{text}");
    let (g2, spec2) = parse_config(&text)?;
    assert_eq!((g2, spec2), (g.clone(), spec.clone()));

    match parse_config(r#"{"geometry":"parallel","numAngles":2,"voxelWidth":1,"unknown":0}"#) {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => unreachable!(),
    }

    let dir = std::env::temp_dir().join(format!("ctproj-io-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let x = Volume::filled(spec.clone(), 0.01)?;
    let y = ProjectorPair::new(Model::Siddon, g, spec)?.forward(&x)?;
    let path = dir.join("projections.json");
    write_array(&y, &path)?;
    println!("wrote {} and {}", path.display(), path.with_extension("raw").display());
    match read_array(&path)? {
        Array::Projections(back) => println!("read back bit-exact: {}", back == y),
        Array::Volume(_) => unreachable!(),
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
