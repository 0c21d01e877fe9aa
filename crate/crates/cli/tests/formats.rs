use std::fs;

use atlas_cli::formats::{
    load_cloud, load_mesh, save_cloud, save_mesh, CloudFormat, MeshFormat,
};
use atlas_cli::CliError;
use atlas_core::geom::unit_sphere_quadgrid;
use atlas_core::synth::SyntheticShape;
use atlas_core::{Error, Point3, PointCloud, TriMesh};
use proptest::prelude::*;

fn f32_bits(c: &PointCloud) -> Vec<[u32; 3]> {
    c.points().iter().map(|p| [(p.x as f32).to_bits(), (p.y as f32).to_bits(), (p.z as f32).to_bits()]).collect()
}

#[test]
fn two_point_xyz() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("c.xyz");
    fs::write(&path, "0 0 0\n1 0 0").unwrap();
    let c = load_cloud(&path, CloudFormat::Xyz).unwrap();
    assert_eq!(c.points(), &[Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0)]);
}

#[test]
fn empty_file_is_a_size_error() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("e.xyz");
    fs::write(&path, "\n# nothing\n").unwrap();
    assert!(matches!(load_cloud(&path, CloudFormat::Xyz), Err(CliError::Core(Error::Size(_)))));
}

#[test]
fn cloud_round_trip_every_format() {
    let tmp = tempfile::tempdir().unwrap();
    let cloud = SyntheticShape::Torus { major: 1.0, minor: 0.3 }.sample(500, 3).unwrap();
    for (format, ext) in
        [(CloudFormat::Xyz, "xyz"), (CloudFormat::PlyAscii, "ply"), (CloudFormat::ObjVertices, "obj")]
    {
        let path = tmp.path().join(format!("c.{ext}"));
        save_cloud(&cloud, &path, format).unwrap();
        let back = load_cloud(&path, format).unwrap();
        assert_eq!(f32_bits(&back), f32_bits(&cloud), "{}", format.name());
        // A second pass is exact in f64 too.
        save_cloud(&back, &path, format).unwrap();
        assert_eq!(load_cloud(&path, format).unwrap(), back);
    }
}

#[test]
fn single_triangle_obj() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("t.obj");
    let mesh = TriMesh::new(
        vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)],
        vec![[0, 1, 2]],
    )
    .unwrap();
    save_mesh(&mesh, &path, MeshFormat::Obj).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 3);
    assert_eq!(text.lines().filter(|l| l.starts_with("f ")).collect::<Vec<_>>(), vec!["f 1 2 3"]);
}

#[test]
fn quad_sphere_round_trip_keeps_topology() {
    let tmp = tempfile::tempdir().unwrap();
    let mesh = unit_sphere_quadgrid(6).unwrap();
    for (format, ext) in [(MeshFormat::Obj, "obj"), (MeshFormat::PlyAscii, "ply")] {
        let path = tmp.path().join(format!("s.{ext}"));
        save_mesh(&mesh, &path, format).unwrap();
        let back = load_mesh(&path, format).unwrap();
        assert_eq!(back.vertices().len(), mesh.vertices().len());
        assert_eq!(back.faces(), mesh.faces());
        assert_eq!(back.euler_characteristic(), 2);
        for (a, b) in back.vertices().iter().zip(mesh.vertices()) {
            assert!(a.dist(*b) < 1e-6);
        }
    }
}

#[test]
fn unwritable_path_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let mesh = unit_sphere_quadgrid(2).unwrap();
    let err = save_mesh(&mesh, &blocker.join("m.obj"), MeshFormat::Obj).unwrap_err();
    assert!(matches!(err, CliError::Io { .. }));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn xyz_round_trip_is_bitwise_at_f32(
        coords in prop::collection::vec(prop::array::uniform3(-1e6f32..1e6f32), 1..40)
    ) {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("p.xyz");
        let cloud = PointCloud::new(
            coords.iter().map(|c| Point3::new(c[0] as f64, c[1] as f64, c[2] as f64)).collect(),
        )
        .unwrap();
        save_cloud(&cloud, &path, CloudFormat::Xyz).unwrap();
        let back = load_cloud(&path, CloudFormat::Xyz).unwrap();
        prop_assert_eq!(f32_bits(&back), f32_bits(&cloud));
    }
}
